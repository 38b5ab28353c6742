"""Domain types for truncation-by-death data on a discrete follow-up grid.

Arms are indexed ``d = 1`` (treated) and ``d = 0`` (control).  Survival
times take values on the follow-up grid ``s_0 = 0 < s_1 < ... < s_K``; the
binary outcome is measured at follow-up ``T`` and is only defined for
subjects with ``S >= s_T``.  Outcome level 1 is the *worse* level.

Per-arm quantities that only exist for ``t >= T`` are stored as arrays of
length ``K + 1 - T`` aligned to ``t = T, ..., K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

MARGINAL_TOL = 1e-10
JOINT_TOL = 1e-12

ARMS = ("treated", "control")


class ValidationError(ValueError):
    """An input violates a type invariant.

    ``path`` names the offending field, e.g. ``"marginals.treated"``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InconsistencyError(ValueError):
    """Two pieces of input describe incompatible distributions."""


@dataclass(frozen=True)
class FollowUpSchedule:
    """Follow-up grid ``s_0..s_K`` and the outcome measurement index ``T``."""

    times: tuple[float, ...]
    measurement_index: int

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(s) for s in self.times))

    @property
    def K(self) -> int:
        return len(self.times) - 1

    @property
    def T(self) -> int:
        return self.measurement_index

    @property
    def n_post(self) -> int:
        """Number of grid points with a defined outcome, ``K + 1 - T``."""
        return self.K + 1 - self.T

    def as_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)


@dataclass(frozen=True)
class MarginalSurvival:
    """Per-arm survival PMFs ``pi[t] = P{S(d) = s_t}``."""

    treated: np.ndarray
    control: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "treated", np.asarray(self.treated, dtype=float))
        object.__setattr__(self, "control", np.asarray(self.control, dtype=float))

    def arm(self, d: int) -> np.ndarray:
        return self.treated if d == 1 else self.control

    def cdf(self, d: int) -> np.ndarray:
        """``F_d(s_t)`` for ``t = 0..K`` (last entry clipped to exactly 1)."""
        F = np.cumsum(self.arm(d))
        F[-1] = 1.0
        return np.minimum(F, 1.0)

    def survival_at(self, t: int, d: int) -> float:
        """``P{S(d) >= s_t}``."""
        return float(np.sum(self.arm(d)[t:]))


@dataclass(frozen=True)
class OutcomeRisk:
    """``alpha[t - T] = P{Y(d) = 1 | S(d) = s_t}`` for ``t = T..K``."""

    treated: np.ndarray
    control: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "treated", np.asarray(self.treated, dtype=float))
        object.__setattr__(self, "control", np.asarray(self.control, dtype=float))

    def arm(self, d: int) -> np.ndarray:
        return self.treated if d == 1 else self.control


@dataclass(frozen=True)
class LargeSampleInput:
    """The observable large-sample distribution of ``(D, S, Y)``."""

    schedule: FollowUpSchedule
    marginals: MarginalSurvival
    risks: OutcomeRisk

    def joint_y1(self, d: int) -> np.ndarray:
        """``P(Y = 1, S = s_t | D = d)`` for ``t = T..K``."""
        T = self.schedule.T
        return self.marginals.arm(d)[T:] * self.risks.arm(d)


@dataclass(frozen=True)
class ArmCounts:
    """Observed counts in one arm.

    ``deaths[t]`` is ``U_t`` (outcome undefined, ``t < T``); ``n_bad``,
    ``n_good`` and ``n_missing`` are ``N_1t``, ``N_0t`` and ``M_t`` for
    ``t = T..K``.
    """

    deaths: np.ndarray
    n_bad: np.ndarray
    n_good: np.ndarray
    n_missing: np.ndarray

    def __post_init__(self):
        for name in ("deaths", "n_bad", "n_good", "n_missing"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))

    @property
    def total(self) -> int:
        return int(self.deaths.sum() + self.n_bad.sum() + self.n_good.sum()
                   + self.n_missing.sum())


@dataclass(frozen=True)
class CountData:
    schedule: FollowUpSchedule
    treated: ArmCounts
    control: ArmCounts

    def arm(self, d: int) -> ArmCounts:
        return self.treated if d == 1 else self.control


@dataclass(frozen=True)
class GroundTruth:
    """A fully specified data-generating process, used for synthetic checks.

    ``joint[t1, t0] = P{S(1) = s_t1, S(0) = s_t0}``.  ``q_treated[t1, t0]``
    is the treated-arm outcome risk of that fine stratum and is NaN for
    ``t1 < T``; ``q_control`` is NaN for ``t0 < T``.  ``coupling`` records
    the copula that produced ``joint`` when known.
    """

    schedule: FollowUpSchedule
    joint: np.ndarray
    q_treated: np.ndarray
    q_control: np.ndarray
    coupling: object = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("joint", "q_treated", "q_control"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


AnyInput = Union[LargeSampleInput, CountData, GroundTruth]


def _check_schedule(schedule: FollowUpSchedule, path: str = "schedule") -> None:
    times = schedule.as_array()
    if len(times) < 3:
        raise ValidationError(f"{path}.times", "need at least three grid points (K >= 2)")
    if times[0] != 0.0:
        raise ValidationError(f"{path}.times", "times[0] must be 0")
    if np.any(np.diff(times) <= 0) or not np.all(np.isfinite(times)):
        raise ValidationError(f"{path}.times", "times must be finite and strictly increasing")
    T, K = schedule.T, schedule.K
    if not isinstance(T, (int, np.integer)):
        raise ValidationError(f"{path}.measurement_index", "T must be an integer")
    if T < 1:
        raise ValidationError(f"{path}.measurement_index", "T must be >= 1")
    if T >= K:
        raise ValidationError(f"{path}.measurement_index", f"T must be < K (got T={T}, K={K})")


def _check_pmf(v: np.ndarray, n: int, path: str) -> np.ndarray:
    if v.shape != (n,):
        raise ValidationError(path, f"expected {n} entries, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
        raise ValidationError(path, "entries must lie in [0, 1]")
    total = v.sum()
    if abs(total - 1.0) >= MARGINAL_TOL:
        raise ValidationError(path, f"marginal does not sum to 1 (sum={total:.12g})")
    return v / total


def _check_unit(v: np.ndarray, n: int, path: str) -> None:
    if v.shape != (n,):
        raise ValidationError(path, f"expected {n} entries, got shape {v.shape}")
    if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
        raise ValidationError(path, "entries must lie in [0, 1]")


def _check_counts(v: np.ndarray, n: int, path: str) -> np.ndarray:
    if v.shape != (n,):
        raise ValidationError(path, f"expected {n} entries, got shape {v.shape}")
    if not np.all(np.isfinite(v.astype(float))):
        raise ValidationError(path, "counts must be finite")
    if np.any(v < 0):
        raise ValidationError(path, "counts must be nonnegative")
    if np.any(np.asarray(v, dtype=float) != np.round(np.asarray(v, dtype=float))):
        raise ValidationError(path, "counts must be integers")
    return np.asarray(v, dtype=np.int64)


def validate_marginals(schedule: FollowUpSchedule, m: MarginalSurvival) -> MarginalSurvival:
    """Check both survival PMFs against ``schedule`` and renormalize them."""
    n = schedule.K + 1
    return MarginalSurvival(_check_pmf(m.treated, n, "marginals.treated"),
                            _check_pmf(m.control, n, "marginals.control"))


def validate(x: AnyInput) -> AnyInput:
    """Check all invariants of ``x`` and return a normalized copy.

    Marginal PMFs within ``1e-10`` of summing to one are renormalized;
    anything further off is rejected.  Raises :class:`ValidationError`
    naming the first violated field.  A bare schedule is accepted too.
    """
    if isinstance(x, FollowUpSchedule):
        _check_schedule(x)
        return x
    _check_schedule(x.schedule)
    K, n_post = x.schedule.K, x.schedule.n_post

    if isinstance(x, LargeSampleInput):
        marginals = validate_marginals(x.schedule, x.marginals)
        _check_unit(x.risks.treated, n_post, "risks.treated")
        _check_unit(x.risks.control, n_post, "risks.control")
        return replace(x, marginals=marginals)

    if isinstance(x, CountData):
        arms = {}
        for name in ARMS:
            a = getattr(x, name)
            arms[name] = ArmCounts(
                deaths=_check_counts(a.deaths, x.schedule.T, f"counts.{name}.deaths"),
                n_bad=_check_counts(a.n_bad, n_post, f"counts.{name}.n_bad"),
                n_good=_check_counts(a.n_good, n_post, f"counts.{name}.n_good"),
                n_missing=_check_counts(a.n_missing, n_post, f"counts.{name}.n_missing"),
            )
        return replace(x, **arms)

    if isinstance(x, GroundTruth):
        T = x.schedule.T
        p = x.joint
        if p.shape != (K + 1, K + 1):
            raise ValidationError("truth.joint", f"expected {(K + 1, K + 1)} matrix, got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < -JOINT_TOL):
            raise ValidationError("truth.joint", "entries must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("truth.joint", f"joint PMF does not sum to 1 (sum={p.sum():.12g})")
        p = np.clip(p, 0.0, None)
        for name, q, defined in (
            ("q.treated", x.q_treated, np.arange(K + 1)[:, None] >= T),
            ("q.control", x.q_control, np.arange(K + 1)[None, :] >= T),
        ):
            if q.shape != (K + 1, K + 1):
                raise ValidationError(f"truth.{name}", f"expected {(K + 1, K + 1)} matrix")
            mask = np.broadcast_to(defined, q.shape)
            if np.any(np.isnan(q[mask])):
                raise ValidationError(f"truth.{name}", "risk missing for a stratum where it is defined")
            if np.any(~np.isnan(q[~mask])):
                raise ValidationError(f"truth.{name}", "risk given for a stratum where the outcome is undefined")
            if np.any(q[mask] < 0) or np.any(q[mask] > 1):
                raise ValidationError(f"truth.{name}", "risks must lie in [0, 1]")
        return replace(x, joint=p / p.sum())

    raise TypeError(f"cannot validate object of type {type(x).__name__}")


def risks_from_joint(
    schedule: FollowUpSchedule,
    marginals: MarginalSurvival,
    joint_y1_treated,
    joint_y1_control,
) -> OutcomeRisk:
    """Convert ``P(Y=1, S=s_t | D=d)`` for ``t = T..K`` into risks ``alpha``.

    Strata with zero survival probability get ``alpha = 0``.
    """
    T = schedule.T
    out = []
    for d, jy in ((1, joint_y1_treated), (0, joint_y1_control)):
        jy = np.asarray(jy, dtype=float)
        pi = marginals.arm(d)[T:]
        if jy.shape != pi.shape:
            raise ValidationError(f"joint_y1.{ARMS[1 - d]}",
                                  f"expected {pi.shape[0]} entries, got {jy.shape}")
        if np.any(jy < -JOINT_TOL):
            raise InconsistencyError(f"negative joint probability in arm {ARMS[1 - d]}")
        bad = np.nonzero(jy > pi + JOINT_TOL)[0]
        if bad.size:
            t = T + int(bad[0])
            raise InconsistencyError(
                f"P(Y=1, S=s_{t} | {ARMS[1 - d]}) = {jy[bad[0]]:.6g} exceeds "
                f"P(S=s_{t} | {ARMS[1 - d]}) = {pi[bad[0]]:.6g}"
            )
        with np.errstate(invalid="ignore", divide="ignore"):
            alpha = np.where(pi > 0, jy / np.where(pi > 0, pi, 1.0), 0.0)
        out.append(np.clip(alpha, 0.0, 1.0))
    return OutcomeRisk(*out)


def empirical_input(counts: CountData) -> LargeSampleInput:
    """Plug-in estimate of the observable distribution from counts.

    Survival PMFs use all subjects (missing outcomes included); risks use
    subjects with an observed outcome only, i.e. missing at random given
    survival and arm.
    """
    pis, alphas = [], []
    for d in (1, 0):
        a = counts.arm(d)
        n_t = np.concatenate([a.deaths, a.n_bad + a.n_good + a.n_missing]).astype(float)
        if n_t.sum() <= 0:
            raise ValidationError(f"counts.{ARMS[1 - d]}", "arm has no subjects")
        pis.append(n_t / n_t.sum())
        obs = (a.n_bad + a.n_good).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            alphas.append(np.where(obs > 0, a.n_bad / np.where(obs > 0, obs, 1.0), 0.0))
    return LargeSampleInput(counts.schedule, MarginalSurvival(*pis), OutcomeRisk(*alphas))
