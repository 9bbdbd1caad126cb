"""Deterministic CSV/JSON/SVG writers shared by the study harness and the CLI."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Round-trip-exact text form of a number (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(header))
        for r in rows:
            wr.writerow([fmt(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, data: dict) -> None:
    # json.dumps uses repr() for floats, which round-trips exactly
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def loglog_svg(path, series: dict, xlabel: str, ylabel: str, title: str = "",
               comment: str | None = None) -> None:
    """Log-log line plot written as SVG with no timestamp and a fixed id salt.

    ``series`` maps a label to (x, y); non-positive y values are dropped.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "slenderdamage", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for label, (x, y) in series.items():
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            keep = y > 0
            ax.loglog(x[keep], y[keep], "o-", label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", lw=0.3)
        ax.legend()
        fig.tight_layout()
        meta = {"Date": None}
        if comment:
            meta["Description"] = comment
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
