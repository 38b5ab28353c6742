"""One-parameter copulas and the fine-stratum joint survival PMF.

Plackett copulas use the native parameter ``phi > 0`` and Gaussian copulas
use ``r`` in ``(-1, 1)``; independence is the common special case.  Either
family can also be specified through its Spearman correlation ``rho``; only
``0 <= rho <= RHO_MAX`` is accepted that way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .model import FollowUpSchedule, MarginalSurvival

RHO_MAX = 0.9999
NEG_CLAMP_TOL = 1e-12

FAMILIES = ("plackett", "gaussian", "independence")


class CopulaDomainError(ValueError):
    """A copula parameter or argument is outside its domain."""


# ---------------------------------------------------------------------------
# Plackett


def plackett_cdf(u, v, phi: float):
    """Plackett copula ``C_phi(u, v)``; vectorized over ``u`` and ``v``.

    For ``phi > 1`` the rationalized root ``2 phi u v / (a + sqrt(a^2 - ...))``
    is used, which avoids cancellation at large ``phi``.
    """
    if not phi > 0:
        raise CopulaDomainError(f"Plackett parameter must be positive, got {phi}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    dphi = phi - 1.0
    if abs(dphi) < 1e-9:
        out = u * v
    elif abs(dphi) < 1e-6:
        out = u * v * (1.0 + dphi * (1.0 - u) * (1.0 - v))
    else:
        a = 1.0 + dphi * (u + v)
        disc = np.maximum(a * a - 4.0 * phi * dphi * u * v, 0.0)
        if phi > 1.0:
            out = 2.0 * phi * u * v / (a + np.sqrt(disc))
        else:
            out = (a - np.sqrt(disc)) / (2.0 * dphi)
    lo = np.maximum(u + v - 1.0, 0.0)
    hi = np.minimum(u, v)
    out = np.clip(out, lo, hi)
    return float(out) if out.ndim == 0 else out


def spearman_from_phi(phi: float) -> float:
    """Spearman's rho of the Plackett copula as a function of ``phi``."""
    if not phi > 0:
        raise CopulaDomainError(f"Plackett parameter must be positive, got {phi}")
    d = phi - 1.0
    if abs(d) < 1e-6:
        # rho = d/3 - d^2/6 + O(d^3)
        return d / 3.0 - d * d / 6.0
    return (phi + 1.0) / d - 2.0 * phi * math.log(phi) / (d * d)


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not (0.0 <= rho <= RHO_MAX):
        raise CopulaDomainError(f"Spearman rho must lie in [0, {RHO_MAX}], got {rho}")
    return rho


@lru_cache(maxsize=4096)
def phi_from_spearman(rho: float) -> float:
    """Invert :func:`spearman_from_phi` by bisection on ``log phi``."""
    rho = _check_rho(rho)
    if rho == 0.0:
        return 1.0
    lo, hi = -40.0, 40.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = spearman_from_phi(math.exp(mid)) - rho
        if abs(f) < 1e-9:
            break
        if f < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return math.exp(mid)


# ---------------------------------------------------------------------------
# Gaussian

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def bvn_cdf(x, y, r: float):
    """Standard bivariate normal CDF ``P(X <= x, Y <= y)`` with correlation ``r``.

    Uses the single-integral form of the correlation derivative, after the
    substitution ``t = sin(theta)``::

        Phi2(x, y; r) = Phi(x) Phi(y)
            + 1/(2 pi) * int_0^asin(r) exp(-(x^2 - 2 xy sin + y^2) / (2 cos^2)) dtheta

    The integrand is smooth in ``theta`` so 64-node Gauss-Legendre gives
    better than 1e-7 absolute accuracy.  Infinite arguments are allowed.
    """
    if not abs(r) < 1:
        raise CopulaDomainError(f"correlation must satisfy |r| < 1, got {r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    base = ndtr(x) * ndtr(y)
    if r == 0.0:
        return float(base) if base.ndim == 0 else base
    finite = np.isfinite(x) & np.isfinite(y)
    xf = np.where(finite, x, 0.0)[..., None]
    yf = np.where(finite, y, 0.0)[..., None]
    half = 0.5 * math.asin(r)
    theta = half * (_GL_NODES + 1.0)
    s = np.sin(theta)
    c2 = np.cos(theta) ** 2
    integrand = np.exp(-(xf * xf - 2.0 * xf * yf * s + yf * yf) / (2.0 * c2))
    integral = half * (integrand @ _GL_WEIGHTS)
    out = np.where(finite, base + integral / (2.0 * math.pi), base)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def gaussian_copula_cdf(u, v, r: float):
    """Gaussian copula ``Phi_r(Phi^-1(u), Phi^-1(v))``.

    Margins ``u`` or ``v`` equal to 0 or 1 are resolved exactly without
    evaluating the normal quantile there.
    """
    if not abs(r) < 1:
        raise CopulaDomainError(f"correlation must satisfy |r| < 1, got {r}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    interior = (u > 0) & (u < 1) & (v > 0) & (v < 1)
    ui = np.where(interior, u, 0.5)
    vi = np.where(interior, v, 0.5)
    inner = bvn_cdf(ndtri(ui), ndtri(vi), r)
    edge = np.where((u <= 0) | (v <= 0), 0.0, np.where(u >= 1, v, u))
    out = np.where(interior, inner, edge)
    out = np.clip(out, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))
    return float(out) if out.ndim == 0 else out


def r_from_spearman(rho: float) -> float:
    """Gaussian-copula correlation with Spearman's rho ``rho``: ``2 sin(pi rho / 6)``.

    Defined on ``[0, 1]``; ``rho = 1`` gives the limit ``r = 1``, which
    :class:`CopulaSpec` itself does not accept.
    """
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise CopulaDomainError(f"Spearman rho must lie in [0, 1], got {rho}")
    return 2.0 * math.sin(math.pi * rho / 6.0)


def spearman_from_r(r: float) -> float:
    if not abs(r) < 1:
        raise CopulaDomainError(f"correlation must satisfy |r| < 1, got {r}")
    return 6.0 / math.pi * math.asin(r / 2.0)


def independence_cdf(u, v):
    out = np.asarray(u, dtype=float) * np.asarray(v, dtype=float)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Specification and joint PMF


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family with its native association parameter.

    ``param`` is ``phi`` for Plackett, ``r`` for Gaussian and ignored for
    independence.  Build from Spearman's rho with :meth:`from_spearman`.
    """

    family: str
    param: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise CopulaDomainError(f"unknown copula family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "plackett" and not self.param > 0:
            raise CopulaDomainError(f"Plackett parameter must be positive, got {self.param}")
        if self.family == "gaussian" and not abs(self.param) < 1:
            raise CopulaDomainError(f"Gaussian correlation must satisfy |r| < 1, got {self.param}")

    @classmethod
    def from_spearman(cls, family: str, rho: float) -> "CopulaSpec":
        rho = _check_rho(rho)
        if family == "plackett":
            return cls(family, phi_from_spearman(rho))
        if family == "gaussian":
            return cls(family, r_from_spearman(rho))
        if family == "independence":
            if rho != 0.0:
                raise CopulaDomainError("independence copula has rho = 0")
            return cls(family, 1.0)
        raise CopulaDomainError(f"unknown copula family {family!r}")

    @classmethod
    def plackett(cls, phi: float) -> "CopulaSpec":
        return cls("plackett", phi)

    @classmethod
    def gaussian(cls, r: float) -> "CopulaSpec":
        return cls("gaussian", r)

    @classmethod
    def independence(cls) -> "CopulaSpec":
        return cls("independence", 1.0)

    @property
    def rho(self) -> float:
        if self.family == "plackett":
            return spearman_from_phi(self.param)
        if self.family == "gaussian":
            return spearman_from_r(self.param)
        return 0.0

    @property
    def native(self) -> float:
        """``log(phi)`` for Plackett, ``r`` for Gaussian, 0 for independence."""
        if self.family == "plackett":
            return math.log(self.param)
        if self.family == "gaussian":
            return self.param
        return 0.0

    @property
    def native_label(self) -> str:
        return "r" if self.family == "gaussian" else "log_phi"

    def cdf(self, u, v):
        if self.family == "plackett":
            return plackett_cdf(u, v, self.param)
        if self.family == "gaussian":
            return gaussian_copula_cdf(u, v, self.param)
        return independence_cdf(u, v)


# ``p[t1, t0] = P{S(1) = s_t1, S(0) = s_t0}``, a (K+1) x (K+1) float array.
JointSurvivalPMF = np.ndarray


def principal_strata(p: np.ndarray, T: int) -> dict[str, float]:
    """Masses of the four principal strata defined by survival to ``s_T``."""
    p = np.asarray(p)
    return {
        "always_survivor": float(p[T:, T:].sum()),
        "protected": float(p[T:, :T].sum()),
        "harmed": float(p[:T, T:].sum()),
        "never_survivor": float(p[:T, :T].sum()),
    }


def joint_pmf_from_cdfs(F1: np.ndarray, F0: np.ndarray, spec: CopulaSpec) -> np.ndarray:
    """Rectangle probabilities of the copula on the grid ``F1 x F0``."""
    F1 = np.concatenate([[0.0], np.asarray(F1, dtype=float)])
    F0 = np.concatenate([[0.0], np.asarray(F0, dtype=float)])
    C = spec.cdf(F1[:, None], F0[None, :])
    p = C[1:, 1:] - C[:-1, 1:] - C[1:, :-1] + C[:-1, :-1]
    if np.any(p < -NEG_CLAMP_TOL):
        raise ArithmeticError(f"copula rectangle probability {p.min():.3g} is negative")
    return np.clip(p, 0.0, 1.0)


def joint_pmf(marginals: MarginalSurvival, spec: CopulaSpec,
              schedule: FollowUpSchedule | None = None) -> JointSurvivalPMF:
    """Fine-stratum joint PMF induced by coupling the marginals with ``spec``.

    ``p[t1, t0] = C(F1(t1), F0(t0)) - C(F1(t1-1), F0(t0)) - C(F1(t1), F0(t0-1))
    + C(F1(t1-1), F0(t0-1))`` with ``F(-1) = 0``.
    """
    if schedule is not None and len(marginals.treated) != schedule.K + 1:
        raise ValueError("marginal length does not match the schedule")
    if spec.family == "independence":
        return np.outer(marginals.treated, marginals.control)
    return joint_pmf_from_cdfs(marginals.cdf(1), marginals.cdf(0), spec)
