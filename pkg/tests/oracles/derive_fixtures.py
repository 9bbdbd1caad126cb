"""Independent oracles for the frozen fixture values in tests/fixtures/derived.json.

Uses only numpy/scipy (never the package) so that the frozen numbers check
the implementation rather than restate it. Run from the repository root:

    python3 tests/oracles/derive_fixtures.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from scipy.integrate import quad

OUT = Path(__file__).resolve().parents[1] / "fixtures" / "derived.json"


def moduli(lam, mu):
    return mu * (3 * lam + 2 * mu) / (lam + mu), lam / (2 * (lam + mu))


# --- pointwise homogeneous problem -------------------------------------------------

def at2_closed_form(E, eta, w1, eps):
    """argmin over alpha of ((1-a)^2 (1-eta) + eta) E eps^2 / 2 + w1 a^2 (stationary point, clipped)."""
    A = 0.5 * (1 - eta) * E * eps**2
    alpha = A / (A + w1)
    e = ((1 - alpha) ** 2 * (1 - eta) + eta) * 0.5 * E * eps**2 + w1 * alpha**2
    return alpha, e


def scan(E, eta, w1, eps, n, kind="at2"):
    alpha = np.arange(n + 1) / n
    w = w1 * alpha**2 if kind == "at2" else w1 * alpha
    e = ((1 - alpha) ** 2 * (1 - eta) + eta) * 0.5 * E * eps**2 + w
    i = int(np.argmin(e))
    return float(alpha[i]), float(e[i])


def homogeneous_fixtures():
    lam, mu, eta, w1 = 1.0, 1.0, 0.01, 1.0
    E, _ = moduli(lam, mu)
    out = {"params": {"lam": lam, "mu": mu, "eta": eta, "w1": w1, "E": E}}
    a_cf, e_cf = at2_closed_form(E, eta, w1, 1.0)
    a_sc, e_sc = scan(E, eta, w1, 1.0, 1000)
    out["example_eps1"] = {"closed_form_alpha": a_cf, "closed_form_energy": e_cf,
                           "scan1000_alpha": a_sc, "scan1000_energy": e_sc}
    # AT1 threshold from the sign of d/dalpha at alpha = 0: -(1-eta) E eps^2 + w1
    eps_c = math.sqrt(w1 / (E * (1 - eta)))
    below = scan(E, eta, w1, 0.999 * eps_c, 100_000, "at1")[0]
    above = scan(E, eta, w1, 1.001 * eps_c, 100_000, "at1")[0]
    out["at1_threshold"] = {"eps_c": eps_c, "scan_alpha_below": below, "scan_alpha_above": above,
                            "alpha_at_1p1": 1 - 1 / 1.1**2}
    levels = [f * eps_c for f in (0.5, 0.9, 1.1, 1.5, 2.0)]
    out["at2_levels"] = [{"eps": e, "alpha": at2_closed_form(E, eta, w1, e)[0],
                          "energy": at2_closed_form(E, eta, w1, e)[1]} for e in levels]
    return out


# --- mesh measure ------------------------------------------------------------------

def disk_columns(nxy):
    h = 2.0 / nxy
    cols = []
    for i in range(nxy):
        for j in range(nxy):
            cx, cy = -1 + (i + 0.5) * h, -1 + (j + 0.5) * h
            if cx * cx + cy * cy < 1.0:
                cols.append((cx, cy))
    return h, cols


def mesh_fixtures():
    h, cols = disk_columns(64)
    area = len(cols) * h * h
    return {"nxy64_nz32": {"n_columns": len(cols), "measure": area * 1.0}}


# --- recovery ----------------------------------------------------------------------

BUMP_C = 1.0 / quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1, 1, epsabs=0.0, epsrel=1e-13)[0]


def rho_s(t, s):
    x = t / s
    if abs(x) >= 1:
        return 0.0
    return BUMP_C * math.exp(-1.0 / (1.0 - x * x)) / s


def drho_s(t, s):
    x = t / s
    if abs(x) >= 1:
        return 0.0
    return rho_s(t, s) * (-2 * x / (1 - x * x) ** 2) / s


def kinked_slope(eps_z, kink, ratio):
    s1 = -eps_z / (kink + ratio * (1 - kink))
    return (lambda t: s1 if t < kink else ratio * s1), s1, ratio * s1


def convolve(fun, z, s, kink, deriv=False):
    """(f extended by zero) * rho_s at z, by adaptive quadrature over t in (0, 1).

    With ``deriv`` the kernel is rho_s', which differentiates the convolution
    (the jumps of the zero extension at 0 and 1 are included automatically).
    """
    kern = drho_s if deriv else rho_s
    lo, hi = max(0.0, z - s), min(1.0, z + s)
    if hi <= lo:
        return 0.0
    pts = [p for p in (kink,) if lo < p < hi]
    val, _ = quad(lambda t: fun(t) * kern(z - t, s), lo, hi, points=pts or None,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def recovery_fixtures():
    lam, mu = 1.0, 1.0
    E, nu = moduli(lam, mu)
    eps_z, kink, ratio = 0.1, 0.5, 3.0
    f, s1, s2 = kinked_slope(eps_z, kink, ratio)
    # fine composite-Simpson grid; nodes on the kink
    z = np.linspace(0.0, 1.0, 4001)
    wz = np.full(z.size, 2.0)
    wz[1::2] = 4.0
    wz[[0, -1]] = 1.0
    wz *= (z[1] - z[0]) / 3.0
    # ubar' is discontinuous at the kink: integrate each half separately
    left, right = z <= kink, z >= kink

    def integral(vals_left, vals_right):
        zl, zr = z[left], z[right]
        return _simpson(vals_left, zl) + _simpson(vals_right, zr)

    h, cols = disk_columns(24)
    area = len(cols) * h * h
    second_moment = sum(h * h * (cx * cx + cy * cy + h * h / 6.0) for cx, cy in cols) / area

    sweep = []
    E1 = 0.5 * E * (kink * s1**2 + (1 - kink) * s2**2)
    for delta in (0.4, 0.2, 0.1, 0.05):
        k = int(math.floor(1.0 / math.sqrt(delta) + 1e-12))
        s = 1.0 / math.sqrt(k)
        v = np.array([convolve(f, zz, s, kink) for zz in z])
        dv = np.array([convolve(f, zz, s, kink, deriv=True) for zz in z])
        sq_l = (v[left] - s1) ** 2
        sq_r = (v[right] - s2) ** 2
        dv2 = float(np.sum(wz * dv**2))
        gap = 2 * nu**2 * (lam + mu) * integral(sq_l, sq_r) + 0.5 * mu * nu**2 * delta**2 * second_moment * dv2
        sweep.append({"delta": delta, "k": k, "gap_continuum_z": gap, "bound": delta**2 * dv2,
                      "bound_ratio": delta * dv2, "E1d": E1, "strain_l2_error": math.sqrt(integral(sq_l, sq_r))})
    C = max(r["bound_ratio"] for r in sweep)
    C_frozen = math.ceil(C * 1000) / 1000
    l2 = {}
    for k in (4, 16, 64):
        s = 1.0 / math.sqrt(k)
        v = np.array([convolve(f, zz, s, kink) for zz in z])
        l2[str(k)] = math.sqrt(integral((v[left] - s1) ** 2, (v[right] - s2) ** 2))
    return {
        "params": {"lam": lam, "mu": mu, "eps_z": eps_z, "kink": kink, "ratio": ratio,
                   "nxy": 24, "nz": 48, "section_second_moment": second_moment},
        "sweep": sweep,
        "C_frozen": C_frozen,
        "strain_l2_error_by_k": l2,
        "bump_normalisation": BUMP_C,
    }


def _simpson(y, x):
    n = len(x) - 1
    if n % 2:
        raise ValueError("Simpson needs an even number of intervals")
    hh = x[1] - x[0]
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[[0, -1]] = 1.0
    return float(np.sum(w * y) * hh / 3.0)


def main():
    data = {
        "homogeneous": homogeneous_fixtures(),
        "mesh": mesh_fixtures(),
        "recovery": recovery_fixtures(),
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=2) + "\n")
    print(json.dumps(data, indent=2))


if __name__ == "__main__":
    main()
