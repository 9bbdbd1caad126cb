"""Recovery fields built from a 1D state: mollified axial strain and the limsup check.

The slope of u3bar is piecewise constant, so its convolution with the scaled
bump has a closed form in terms of the bump's cumulative distribution R:
for f = sum_i J_i H(. - b_i) (jumps J_i at breakpoints b_i),
f * rho_s (z) = sum_i J_i R((z - b_i) / s).
R is tabulated once and evaluated with a cubic Hermite interpolant whose
slopes are the exact bump values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .energy import energy_1d, energy_3d
from .fields import Field1D, Field3D, embed_uniaxial
from .material import ConstitutiveLaw, MaterialParams
from .mesh import CylinderMesh, IntervalMesh, build_interval
from .output import loglog_svg, write_csv

_TABLE_POINTS = 20001
_GAUSS5 = np.polynomial.legendre.leggauss(5)


def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = np.exp(-1.0 / (1.0 - zi * zi))
    return out


@lru_cache(maxsize=1)
def _bump_table():
    t = np.linspace(-1.0, 1.0, _TABLE_POINTS)
    raw = _bump(t)
    cum = cumulative_simpson(raw, x=t, initial=0.0)
    const = 1.0 / cum[-1]
    return t, raw * const, cum * const, const


@dataclass(frozen=True)
class Mollifier:
    """Normalised bump rho(z) = C exp(-1 / (1 - z^2)) on (-1, 1), scaled to width ``s``.

    rho_s(z) = rho(z / s) / s has support [-s, s] and unit integral.
    """

    s: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"mollifier width must be > 0 (got {self.s})")

    @property
    def normalisation(self) -> float:
        return _bump_table()[3]

    def density(self, z) -> np.ndarray:
        return self.normalisation * _bump(np.asarray(z, float) / self.s) / self.s

    def cdf(self, z) -> np.ndarray:
        """Integral of rho_s from -inf to z."""
        t = np.clip(np.asarray(z, float) / self.s, -1.0, 1.0)
        return _cdf_spline()(t)

    def total_mass(self) -> float:
        return float(self.cdf(self.s) - self.cdf(-self.s))


@lru_cache(maxsize=1)
def _cdf_spline() -> CubicHermiteSpline:
    t, rho, cum, _ = _bump_table()
    return CubicHermiteSpline(t, cum, rho)


def k_of_delta(delta: float) -> int:
    """Diagonal index k = floor(delta^(-1/2)), clamped to at least 1."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0 (got {delta})")
    k = max(1, int(math.floor(delta ** -0.5)))
    # guard the floor against rounding in the power
    while (k + 1) ** 2 * delta <= 1.0:
        k += 1
    while k > 1 and k * k * delta > 1.0:
        k -= 1
    return k


@dataclass(frozen=True)
class MollifiedStrain:
    """v_k = u3bar' * rho_s with s = 1/sqrt(k), evaluable anywhere on [0, 1]."""

    k: int
    extension: str
    base: float
    breakpoints: np.ndarray
    jumps: np.ndarray
    mollifier: Mollifier
    slopes: np.ndarray
    mesh: IntervalMesh

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        R = self.mollifier.cdf(z[..., None] - self.breakpoints)
        return self.base + R @ self.jumps

    def derivative(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return self.mollifier.density(z[..., None] - self.breakpoints) @ self.jumps

    @property
    def nodal(self) -> np.ndarray:
        return self(self.mesh.nodes)

    def _fine_quadrature(self, refine: int = 4):
        """5-point Gauss nodes/weights on each sub-interval of a ``refine``-times finer grid."""
        edges = np.linspace(0.0, 1.0, refine * self.mesh.nz + 1)
        x, w = _GAUSS5
        a, b = edges[:-1, None], edges[1:, None]
        pts = 0.5 * (a + b) + 0.5 * (b - a) * x
        wts = 0.5 * (b - a) * w
        elem = np.minimum((pts / self.mesh.h).astype(int), self.mesh.nz - 1)
        return pts.ravel(), np.broadcast_to(wts, pts.shape).ravel(), elem.ravel()

    def l2_error(self, refine: int = 4) -> float:
        """||v_k - u3bar'||_{L2(0,1)}."""
        pts, wts, elem = self._fine_quadrature(refine)
        return float(np.sqrt(np.sum(wts * (self(pts) - self.slopes[elem]) ** 2)))

    def derivative_l2_sq(self, refine: int = 4) -> float:
        """||v_k'||^2_{L2(0,1)}."""
        pts, wts, _ = self._fine_quadrature(refine)
        return float(np.sum(wts * self.derivative(pts) ** 2))

    def derivative_sup(self, refine: int = 4) -> float:
        """max |v_k'| sampled on the refined grid and its Gauss points."""
        pts, _, _ = self._fine_quadrature(refine)
        grid = np.linspace(0.0, 1.0, refine * self.mesh.nz + 1)
        return float(np.max(np.abs(self.derivative(np.concatenate([pts, grid])))))

    @property
    def derivative_constant(self) -> float:
        """Measured C in sup|v_k'| <= C k."""
        return self.derivative_sup() / self.k


def mollify_strain(ubar3, k: int, extension: str = "zero") -> MollifiedStrain:
    """Mollify the slope of a piecewise-linear profile at width 1/sqrt(k).

    ``ubar3`` is a Field1D (its u3bar is used). Outside (0, 1) the slope is
    extended by zero (``extension="zero"``) or by its end values
    (``extension="edge"``); the latter reproduces constant slopes exactly.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer (got {k})")
    if extension not in ("zero", "edge"):
        raise ValueError(f"unknown extension {extension!r}")
    g = ubar3
    slopes = g.slope()
    b = g.mesh.nodes
    padded = np.concatenate([[0.0], slopes, [0.0]])
    jumps = np.diff(padded)
    base = 0.0
    if extension == "edge":
        jumps[0] = jumps[-1] = 0.0
        base = float(slopes[0])
    return MollifiedStrain(k=int(k), extension=extension, base=base, breakpoints=b, jumps=jumps,
                           mollifier=Mollifier(1.0 / math.sqrt(k)), slopes=slopes, mesh=g.mesh)


def resample_1d(g: Field1D, nz: int) -> Field1D:
    """Linear interpolation of a 1D field onto a uniform mesh with ``nz`` elements."""
    if g.mesh.nz == nz:
        return g
    m = build_interval(nz)
    return Field1D(m, np.interp(m.nodes, g.mesh.nodes, g.u3bar),
                   np.interp(m.nodes, g.mesh.nodes, g.alphabar), g.eps_z)


def build_recovery(g: Field1D, delta: float, mesh3d: CylinderMesh, nu: float,
                   extension: str = "zero") -> Field3D:
    """u1 = -nu x v_k(z), u2 = -nu y v_k(z), u3 = u3bar(z), alpha = alphabar(z), k = k_of_delta(delta)."""
    g.check()
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1] (got {delta})")
    v = mollify_strain(g, k_of_delta(delta), extension)
    g3 = resample_1d(g, mesh3d.nz)
    return embed_uniaxial(g3, mesh3d, delta, nu, strain_profile=v(g3.mesh.nodes)).check()


@dataclass
class LimsupRow:
    delta: float
    k: int
    E3d: float
    E1d: float
    gap: float
    bound: float          # delta^2 ||v_k'||^2
    bound_ratio: float    # bound / delta
    strain_l2_error: float
    deriv_constant: float

    HEADER = ("delta", "k", "E3d", "E1d", "gap", "bound", "bound_ratio",
              "strain_l2_error", "deriv_constant")

    def row(self) -> list:
        return [getattr(self, h) for h in self.HEADER]


@dataclass
class LimsupTable:
    rows: list

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.rows])

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])

    @property
    def bounds(self) -> np.ndarray:
        return np.array([r.bound for r in self.rows])

    def gap_strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.gaps) < 0))

    def bound_constant(self) -> float:
        """Smallest C with bound <= C delta over the table."""
        return float(max(r.bound_ratio for r in self.rows))

    def write_csv(self, path, comment: str | None = None) -> None:
        write_csv(path, LimsupRow.HEADER, (r.row() for r in self.rows), comment)

    def write_svg(self, path, comment: str | None = None) -> None:
        d = self.deltas
        loglog_svg(path, {"gap": (d, np.abs(self.gaps)), "delta^2 |v'|^2": (d, self.bounds)},
                   "delta", "value", "recovery gap", comment)


def limsup_check(params: MaterialParams, law: ConstitutiveLaw, mesh3d: CylinderMesh,
                 mesh1d: IntervalMesh, g: Field1D, deltas, extension: str = "zero") -> LimsupTable:
    """Energy of the recovery field against the 1D energy for a decreasing list of deltas."""
    deltas = [float(d) for d in deltas]
    if len(deltas) == 0 or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    if g.mesh.nz != mesh1d.nz:
        raise ValueError("g is not defined on mesh1d")
    E1 = energy_1d(params, law, g).total
    rows = []
    for d in deltas:
        k = k_of_delta(d)
        v = mollify_strain(g, k, extension)
        f = build_recovery(g, d, mesh3d, params.nu, extension)
        E3 = energy_3d(params, law, f).total
        bound = d * d * v.derivative_l2_sq()
        rows.append(LimsupRow(delta=d, k=k, E3d=E3, E1d=E1, gap=E3 - E1, bound=bound,
                              bound_ratio=bound / d, strain_l2_error=v.l2_error(),
                              deriv_constant=v.derivative_constant))
    return LimsupTable(rows)


def kinked_profile(mesh: IntervalMesh, eps_z: float, kink: float = 0.5, ratio: float = 3.0) -> Field1D:
    """Piecewise-linear u3bar with one kink and zero damage; the slope jumps by ``ratio``.

    Slopes are s1 on (0, kink) and ratio*s1 on (kink, 1), scaled so that u3bar(1) = -eps_z.
    """
    s1 = -eps_z / (kink + ratio * (1.0 - kink))
    z = mesh.nodes
    u = np.where(z <= kink, s1 * z, s1 * kink + ratio * s1 * (z - kink))
    u[-1] = -eps_z
    return Field1D(mesh, u, np.zeros_like(z), float(eps_z))
