"""Material parameters and the scalar constitutive functions a_eta and w."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator


class ParameterError(ValueError):
    """Raised when material or law parameters violate their admissibility bounds."""


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    mu: float
    eta: float
    w1: float
    ell: float
    bigL: float = 1.0
    eps_z: float = 0.0

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ParameterError("; ".join(errors))

    def violations(self) -> list[str]:
        errs = []
        if not self.mu > 0:
            errs.append(f"mu must be > 0 (got {self.mu})")
        if not self.lam + self.mu > 0:
            errs.append(f"lambda + mu must be > 0 (got {self.lam + self.mu})")
        elif self.mu > 0 and not 3 * self.lam + 2 * self.mu > 0:
            errs.append(f"3 lambda + 2 mu must be > 0 so that E > 0 and nu > -1 (got {3 * self.lam + 2 * self.mu})")
        if not 0 < self.eta < 1:
            errs.append(f"eta must lie in (0, 1) (got {self.eta})")
        if not self.w1 > 0:
            errs.append(f"w1 must be > 0 (got {self.w1})")
        if not self.ell > 0:
            errs.append(f"ell must be > 0 (got {self.ell})")
        if not self.bigL > 0:
            errs.append(f"L must be > 0 (got {self.bigL})")
        if not np.isfinite(self.eps_z):
            errs.append("eps_z must be finite")
        return errs

    @property
    def E(self) -> float:
        return derived_moduli(self)[0]

    @property
    def nu(self) -> float:
        return derived_moduli(self)[1]

    @property
    def grad_coef(self) -> float:
        """Prefactor w1 * ell^2 / (2 L^2) of the damage-gradient terms."""
        return 0.5 * self.w1 * (self.ell / self.bigL) ** 2

    def replace(self, **changes) -> "MaterialParams":
        kw = dict(lam=self.lam, mu=self.mu, eta=self.eta, w1=self.w1,
                  ell=self.ell, bigL=self.bigL, eps_z=self.eps_z)
        kw.update(changes)
        return MaterialParams(**kw)


def derived_moduli(p) -> tuple[float, float]:
    """Young's modulus and Poisson ratio from the Lame constants.

    Accepts a MaterialParams or a ``(lam, mu)`` pair.
    """
    if isinstance(p, MaterialParams):
        lam, mu = p.lam, p.mu
    else:
        lam, mu = p
    if not mu > 0 or not lam + mu > 0:
        raise ParameterError(f"need mu > 0 and lambda + mu > 0 (got lambda={lam}, mu={mu})")
    E = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    return E, nu


def verify_uniaxial_identity(p, exact: bool = False) -> float:
    """Relative residual of mu (2 nu^2 + 1) + lam/2 (2 nu - 1)^2 = E/2.

    In floating point the residual is conditioned like mu / E, so it grows
    without bound as nu -> -1. ``exact=True`` runs the same formulas on the
    rational values of the inputs and isolates algebra from rounding.
    """
    if isinstance(p, MaterialParams):
        lam, mu = p.lam, p.mu
    else:
        lam, mu = p
    if exact:
        lam, mu = Fraction(lam), Fraction(mu)
    E, nu = derived_moduli((lam, mu))
    lhs = mu * (2 * nu**2 + 1) + lam / 2 * (2 * nu - 1) ** 2
    return float(abs(lhs - E / 2) / abs(E / 2))


def _check_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise ValueError("damage values must lie in [0, 1]")
    return a


def _monotone_table(nodes, values, increasing: bool, what: str) -> PchipInterpolator:
    x = np.asarray(nodes, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2:
        raise ParameterError(f"{what}: table needs matching 1D node/value arrays of length >= 2")
    if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
        raise ParameterError(f"{what}: nodes must increase strictly from 0 to 1")
    dy = np.diff(y)
    if increasing and np.any(dy <= 0):
        raise ParameterError(f"{what}: values must be strictly increasing")
    if not increasing and np.any(dy >= 0):
        raise ParameterError(f"{what}: values must be strictly decreasing")
    # PCHIP preserves monotonicity of monotone data
    interp = PchipInterpolator(x, y)
    probe = np.linspace(0.0, 1.0, 2001)
    d = np.diff(interp(probe))
    if (increasing and np.any(d < 0)) or (not increasing and np.any(d > 0)):
        raise ParameterError(f"{what}: interpolant is not monotone")
    return interp


@dataclass(frozen=True)
class ConstitutiveLaw:
    """Degradation a_eta(alpha) and damage energy w(alpha).

    ``degradation`` is ``"quadratic"`` for (1 - alpha)^2 (1 - eta) + eta or
    ``"tabulated"``; ``damage_energy`` is ``"at1"`` (w1 alpha), ``"at2"``
    (w1 alpha^2) or ``"tabulated"``. Tables are sampled on nodes in [0, 1]
    and interpolated with a monotone cubic.
    """

    eta: float
    w1: float
    degradation: str = "quadratic"
    damage_energy: str = "at2"
    a_table: Optional[tuple] = None
    w_table: Optional[tuple] = None
    _a_interp: Optional[PchipInterpolator] = field(default=None, repr=False, compare=False)
    _w_interp: Optional[PchipInterpolator] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParameterError(f"eta must lie in (0, 1) (got {self.eta})")
        if not self.w1 > 0:
            raise ParameterError(f"w1 must be > 0 (got {self.w1})")
        if self.degradation == "tabulated":
            if self.a_table is None:
                raise ParameterError("tabulated degradation needs a_table=(nodes, values)")
            interp = _monotone_table(*self.a_table, increasing=False, what="degradation")
            if abs(interp(0.0) - 1.0) > 1e-12 or abs(interp(1.0) - self.eta) > 1e-12:
                raise ParameterError("tabulated degradation must satisfy a(0)=1, a(1)=eta")
            object.__setattr__(self, "_a_interp", interp)
        elif self.degradation != "quadratic":
            raise ParameterError(f"unknown degradation {self.degradation!r}")
        if self.damage_energy == "tabulated":
            if self.w_table is None:
                raise ParameterError("tabulated damage energy needs w_table=(nodes, values)")
            interp = _monotone_table(*self.w_table, increasing=True, what="damage energy")
            if abs(interp(0.0)) > 1e-12 or abs(interp(1.0) - self.w1) > 1e-12:
                raise ParameterError("tabulated damage energy must satisfy w(0)=0, w(1)=w1")
            object.__setattr__(self, "_w_interp", interp)
        elif self.damage_energy not in ("at1", "at2"):
            raise ParameterError(f"unknown damage energy {self.damage_energy!r}")

    @classmethod
    def from_params(cls, p: MaterialParams, degradation: str = "quadratic",
                    damage_energy: str = "at2", **tables) -> "ConstitutiveLaw":
        return cls(eta=p.eta, w1=p.w1, degradation=degradation,
                   damage_energy=damage_energy, **tables)

    # The raw evaluators skip range checks; solvers call them on values that
    # are in [0, 1] by construction.
    def a(self, alpha):
        if self._a_interp is not None:
            return self._a_interp(alpha)
        return (1.0 - alpha) ** 2 * (1.0 - self.eta) + self.eta

    def da(self, alpha):
        if self._a_interp is not None:
            return self._a_interp(alpha, 1)
        return -2.0 * (1.0 - alpha) * (1.0 - self.eta)

    def w(self, alpha):
        if self._w_interp is not None:
            return self._w_interp(alpha)
        if self.damage_energy == "at1":
            return self.w1 * np.asarray(alpha, dtype=float)
        return self.w1 * alpha**2

    def dw(self, alpha):
        if self._w_interp is not None:
            return self._w_interp(alpha, 1)
        if self.damage_energy == "at1":
            return self.w1 * np.ones_like(np.asarray(alpha, dtype=float))
        return 2.0 * self.w1 * alpha

    @property
    def is_quadratic(self) -> bool:
        """True when both a and w are polynomials of degree <= 2 in alpha."""
        return self._a_interp is None and self._w_interp is None


def eval_degradation(law: ConstitutiveLaw, alpha, derivative: bool = False):
    a = _check_alpha(alpha)
    return law.da(a) if derivative else law.a(a)


def eval_damage_energy(law: ConstitutiveLaw, alpha, derivative: bool = False):
    a = _check_alpha(alpha)
    return law.dw(a) if derivative else law.w(a)


def at1_threshold_strain(p: MaterialParams) -> float:
    """Strain below which alpha = 0 is stationary for AT1 with quadratic degradation."""
    E, _ = derived_moduli(p)
    return float(np.sqrt(p.w1 / (E * (1.0 - p.eta))))


def tabulated_law(p: MaterialParams, nodes: Sequence[float], a_values: Sequence[float] | None = None,
                  w_values: Sequence[float] | None = None) -> ConstitutiveLaw:
    """Convenience constructor for user-supplied tables."""
    kw = {}
    deg, dmg = "quadratic", "at2"
    if a_values is not None:
        deg = "tabulated"
        kw["a_table"] = (tuple(nodes), tuple(a_values))
    if w_values is not None:
        dmg = "tabulated"
        kw["w_table"] = (tuple(nodes), tuple(w_values))
    return ConstitutiveLaw(eta=p.eta, w1=p.w1, degradation=deg, damage_energy=dmg, **kw)
