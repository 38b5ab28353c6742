"""Large-sample bounds on the survivor average causal effect (SACE).

The fine-stratum risks ``q[t1, t0, d] = P{Y(d) = 1 | S(1) = s_t1, S(0) = s_t0}``
are the LP decision variables.  For a fixed coupling ``p`` of the two
potential survival times the bounds are the min and max of

    SACE = sum_{t1, t0 >= T} (q[t1, t0, 1] - q[t1, t0, 0]) p[t1, t0] / P_AS

subject to the observed mixtures, ``0 <= q <= 1`` and the ranked-risk
orderings between strata.  Sweeping the copula parameter and taking the
envelope gives bounds that are valid for every coupling in the sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .copula import CopulaSpec, joint_pmf
from .linprog import LinearProgram, solve_range
from .model import (
    FollowUpSchedule,
    GroundTruth,
    LargeSampleInput,
    MarginalSurvival,
    OutcomeRisk,
    risks_from_joint,
)

DEGENERATE_TOL = 1e-12
ZR_STEP = 1e-3

OK = "ok"
INFEASIBLE = "infeasible"
DEGENERATE = "degenerate"


class DegenerateError(ValueError):
    """There are no always survivors (or no survivors) to define the SACE."""


class IncompatibleDataError(ValueError):
    """Every coupling in a sweep is incompatible with the assumptions."""


@dataclass(frozen=True)
class BoundsResult:
    lower: float
    upper: float
    rho: float = float("nan")
    native: float = float("nan")
    status: str = OK
    family: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True)
class SweepRow:
    rho: float
    native: float
    bounds: BoundsResult
    relative_length: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    envelope: BoundsResult
    zr: BoundsResult

    @property
    def infeasible_rhos(self) -> list[float]:
        return [r.rho for r in self.rows if not r.bounds.ok]


# ---------------------------------------------------------------------------
# Constraint generation


def _treated_vars(K: int, T: int) -> list[tuple[int, int]]:
    return [(t1, t0) for t1 in range(T, K + 1) for t0 in range(K + 1)]


def _control_vars(K: int, T: int) -> list[tuple[int, int]]:
    return [(t1, t0) for t1 in range(K + 1) for t0 in range(T, K + 1)]


def order_pairs(schedule: FollowUpSchedule, arm: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Ordered stratum pairs ``(g, h)`` meaning ``q[g, arm] <= q[h, arm]``.

    For the treated arm: ``t1 >= t1' >= T`` and ``s_t1 + s_t0 >= s_t1' + s_t0'``;
    for control the roles of ``t1`` and ``t0`` swap.  Transitively implied
    pairs are kept; only identical strata are skipped.
    """
    return list(_order_pairs(schedule.times, schedule.T, arm))


@lru_cache(maxsize=64)
def _order_pairs(times: tuple[float, ...], T: int, arm: int):
    K = len(times) - 1
    s = times
    strata = _treated_vars(K, T) if arm == 1 else _control_vars(K, T)
    own = 0 if arm == 1 else 1
    out = []
    for g in strata:
        for h in strata:
            if g == h:
                continue
            if g[own] >= h[own] and s[g[0]] + s[g[1]] >= s[h[0]] + s[h[1]]:
                out.append((g, h))
    return tuple(out)


@dataclass(frozen=True)
class SaceProgram:
    """The SACE linear program for one coupling.

    ``lp.objective`` already carries the ``1 / P_AS`` normalization.
    ``treated_vars[k]`` / ``control_vars[k]`` give the ``(t1, t0)`` stratum of
    each variable; control variables follow the treated ones.
    """

    lp: LinearProgram
    p_as: float
    treated_vars: list[tuple[int, int]] = field(repr=False)
    control_vars: list[tuple[int, int]] = field(repr=False)

    def __iter__(self):
        # allows ``lp, p_as = build_sace_lp(...)``
        yield self.lp
        yield self.p_as

    def unpack(self, x: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrange an LP solution into NaN-padded ``(K+1) x (K+1)`` risk tables."""
        n1 = len(self.treated_vars)
        q1 = np.full((K + 1, K + 1), np.nan)
        q0 = np.full((K + 1, K + 1), np.nan)
        for k, (t1, t0) in enumerate(self.treated_vars):
            q1[t1, t0] = x[k]
        for k, (t1, t0) in enumerate(self.control_vars):
            q0[t1, t0] = x[n1 + k]
        return q1, q0


@lru_cache(maxsize=64)
def _static_structure(times: tuple[float, ...], T: int):
    """Index maps and the (coupling independent) ordering rows."""
    K = len(times) - 1
    v1 = _treated_vars(K, T)
    v0 = _control_vars(K, T)
    n1 = len(v1)
    n = n1 + len(v0)
    idx1 = {v: k for k, v in enumerate(v1)}
    idx0 = {v: n1 + k for k, v in enumerate(v0)}
    rows = []
    for arm, idx in ((1, idx1), (0, idx0)):
        for g, h in _order_pairs(times, T, arm):
            rows.append((idx[g], idx[h]))
    A_ub = np.zeros((len(rows), n))
    for i, (a, b) in enumerate(rows):
        A_ub[i, a] = 1.0
        A_ub[i, b] = -1.0
    A_ub.setflags(write=False)
    # gather indices so that p.ravel()[gather] lines up with variables
    t1_1 = np.array([v[0] for v in v1]); t0_1 = np.array([v[1] for v in v1])
    t1_0 = np.array([v[0] for v in v0]); t0_0 = np.array([v[1] for v in v0])
    return v1, v0, A_ub, (t1_1, t0_1, t1_0, t0_0)


def build_sace_lp(schedule: FollowUpSchedule, pmf: np.ndarray,
                  marginals: MarginalSurvival, risks: OutcomeRisk) -> SaceProgram:
    """Assemble the SACE LP for a given fine-stratum PMF.

    Equalities: for each arm ``d`` and ``t >= T`` the mixture of stratum risks
    reproduces ``pi[t, d] * alpha[t, d]``.  Inequalities: the ranked-risk
    orderings of :func:`order_pairs`.  All ``q`` live in ``[0, 1]``, including
    those of empty strata.  Raises :class:`DegenerateError` if the
    always-survivor mass is below ``1e-12``.
    """
    K, T = schedule.K, schedule.T
    p = np.asarray(pmf, dtype=float)
    v1, v0, A_ub, (t1_1, t0_1, t1_0, t0_0) = _static_structure(schedule.times, T)
    n1, n = len(v1), len(v1) + len(v0)

    p_as = float(p[T:, T:].sum())
    if p_as < DEGENERATE_TOL:
        raise DegenerateError(f"always-survivor mass {p_as:.3g} is zero at this coupling")

    n_post = K + 1 - T
    A_eq = np.zeros((2 * n_post, n))
    b_eq = np.zeros(2 * n_post)
    p1 = p[t1_1, t0_1]
    p0 = p[t1_0, t0_0]
    cols1 = np.arange(n1)
    cols0 = n1 + np.arange(n - n1)
    A_eq[t1_1 - T, cols1] = p1
    A_eq[n_post + (t0_0 - T), cols0] = p0
    b_eq[:n_post] = marginals.treated[T:] * risks.treated
    b_eq[n_post:] = marginals.control[T:] * risks.control

    c = np.zeros(n)
    as1 = t0_1 >= T
    as0 = t1_0 >= T
    c[cols1[as1]] = p1[as1] / p_as
    c[cols0[as0]] = -p0[as0] / p_as

    lp = LinearProgram(c, np.zeros(n), np.ones(n), A_eq, b_eq, A_ub, np.zeros(A_ub.shape[0]))
    return SaceProgram(lp, p_as, v1, v0)


def bounds_given_joint(schedule: FollowUpSchedule, pmf: np.ndarray,
                       marginals: MarginalSurvival, risks: OutcomeRisk) -> tuple[float, float, str]:
    """``(lower, upper, status)`` for a known fine-stratum PMF."""
    try:
        prog = build_sace_lp(schedule, pmf, marginals, risks)
    except DegenerateError:
        return math.nan, math.nan, DEGENERATE
    lo, hi = solve_range(prog.lp)
    if not (lo.optimal and hi.optimal):
        return math.nan, math.nan, INFEASIBLE
    # the two phase-two solves may disagree by rounding when the SACE is point identified
    lower, upper = min(lo.value, hi.value), max(lo.value, hi.value)
    return float(np.clip(lower, -1.0, 1.0)), float(np.clip(upper, -1.0, 1.0)), OK


def large_sample_bounds(data: LargeSampleInput, spec: CopulaSpec) -> BoundsResult:
    """SACE bounds when the observable distribution is known exactly."""
    p = joint_pmf(data.marginals, spec, data.schedule)
    lower, upper, status = bounds_given_joint(data.schedule, p, data.marginals, data.risks)
    return BoundsResult(lower, upper, spec.rho, spec.native, status, spec.family)


# ---------------------------------------------------------------------------
# Coarse (four principal strata) comparison bounds


def _coarse(data: LargeSampleInput) -> tuple[float, float, float, float]:
    T = data.schedule.T
    a = data.marginals.survival_at(T, 1)
    b = data.marginals.survival_at(T, 0)
    m1 = float(np.sum(data.joint_y1(1)))
    m0 = float(np.sum(data.joint_y1(0)))
    return a, b, min(m1, a), min(m0, b)


def zr_grid(a: float, b: float, step: float = ZR_STEP) -> np.ndarray:
    """Always-survivor proportions from ``max(0, a+b-1)`` to ``min(a, b)``, both included."""
    lo, hi = max(0.0, a + b - 1.0), min(a, b)
    n = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(n + 1)
    grid = grid[grid < hi - 1e-12]
    return np.append(grid, hi)


def _zr_lp(pi_as: float, a: float, b: float, m1: float, m0: float) -> LinearProgram:
    # variables: q_AS1, q_P1, q_AS0, q_H0
    return LinearProgram.build(
        [1.0, 0.0, -1.0, 0.0],
        bounds=[(0.0, 1.0)] * 4,
        eq=[([pi_as, a - pi_as, 0.0, 0.0], m1), ([0.0, 0.0, pi_as, b - pi_as], m0)],
        ineq=[([1.0, -1.0, 0.0, 0.0], 0.0), ([0.0, 0.0, 1.0, -1.0], 0.0)],
    )


def zr_ranges(pi_as: np.ndarray, a: float, b: float, m1: float, m0: float):
    """Closed-form solution of the coarse LP at each always-survivor proportion.

    With ``w = a - pi``, feasible ``q_AS1`` form ``[max(0, (m1 - w) / pi), m1 / a]``
    (``[0, m1 / a]`` at ``pi = 0``), and symmetrically for control.
    Returns arrays ``(lower, upper)`` of the SACE range.
    """
    pi = np.asarray(pi_as, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo1 = np.where(pi > 0, np.maximum(0.0, (m1 - (a - pi)) / np.where(pi > 0, pi, 1.0)), 0.0)
        lo0 = np.where(pi > 0, np.maximum(0.0, (m0 - (b - pi)) / np.where(pi > 0, pi, 1.0)), 0.0)
    hi1 = m1 / a
    hi0 = m0 / b
    return lo1 - hi0, hi1 - lo0


def zr_bounds(data: LargeSampleInput, method: str = "lp", step: float = ZR_STEP) -> BoundsResult:
    """Bounds using only survival status at the measurement time.

    Sweeps the always-survivor proportion over :func:`zr_grid`; at each
    value the four-variable LP (``q_AS <= q_protected`` under treatment,
    ``q_AS <= q_harmed`` under control) is solved by the simplex
    (``method="lp"``) or in closed form (``method="closed"``).
    """
    a, b, m1, m0 = _coarse(data)
    if min(a, b) < DEGENERATE_TOL:
        return BoundsResult(math.nan, math.nan, status=DEGENERATE, family="zr")
    grid = zr_grid(a, b, step)
    if method == "closed":
        lows, highs = zr_ranges(grid, a, b, m1, m0)
        lower, upper = float(lows.min()), float(highs.max())
    elif method == "lp":
        lower, upper = math.inf, -math.inf
        for pi in grid:
            lo, hi = solve_range(_zr_lp(float(pi), a, b, m1, m0))
            if lo.optimal:
                lower = min(lower, lo.value)
                upper = max(upper, hi.value)
        if not math.isfinite(lower):
            return BoundsResult(math.nan, math.nan, status=INFEASIBLE, family="zr")
    else:
        raise ValueError(f"unknown method {method!r}")
    return BoundsResult(lower, upper, status=OK, family="zr")


# ---------------------------------------------------------------------------
# Sweeps


def sweep(data: LargeSampleInput, family: str, rho_grid: Iterable[float],
          zr: BoundsResult | None = None) -> SweepResult:
    """Bounds at each Spearman rho in ``rho_grid`` plus their envelope.

    Rows are returned in ascending rho.  Infeasible rows are kept and
    flagged; the envelope covers the feasible rows only.
    """
    grid = sorted(float(r) for r in rho_grid)
    if len(set(grid)) != len(grid):
        raise ValueError("rho grid values must be distinct")
    if zr is None:
        zr = zr_bounds(data)
    zr_width = zr.width if zr.ok else math.nan
    rows = []
    for rho in grid:
        spec = CopulaSpec.from_spearman(family, rho)
        res = large_sample_bounds(data, spec)
        rel = res.width / zr_width if res.ok and zr_width > 0 else math.nan
        rows.append(SweepRow(rho, spec.native, res, rel))
    good = [r.bounds for r in rows if r.bounds.ok]
    if not good:
        raise IncompatibleDataError("data are incompatible with the assumptions at every rho in the grid")
    env = BoundsResult(min(b.lower for b in good), max(b.upper for b in good),
                       status=OK, family=family)
    return SweepResult(rows, env, zr)


# ---------------------------------------------------------------------------
# Point contrasts, ground truth and stratification


@dataclass(frozen=True)
class SurvivorContrast:
    value: float
    degenerate: bool
    """True when both arms have equal survival to ``s_T``; under monotonicity
    the SACE is then point identified and equals ``value``."""


def survivor_contrast(data: LargeSampleInput) -> SurvivorContrast:
    """``E[Y | S >= s_T, D=1] - E[Y | S >= s_T, D=0]`` among observed survivors."""
    a, b, m1, m0 = _coarse(data)
    if a <= 0 or b <= 0:
        raise DegenerateError("an arm has no survivors at the measurement time")
    return SurvivorContrast(m1 / a - m0 / b, abs(a - b) < 1e-9)


def true_sace(truth: GroundTruth) -> float:
    T = truth.schedule.T
    p = truth.joint[T:, T:]
    mass = p.sum()
    if mass < DEGENERATE_TOL:
        raise DegenerateError("ground truth has no always survivors")
    diff = truth.q_treated[T:, T:] - truth.q_control[T:, T:]
    return float(np.sum(diff * p) / mass)


def observable_from_truth(truth: GroundTruth) -> LargeSampleInput:
    """Large-sample observable distribution implied by a ground truth."""
    T = truth.schedule.T
    p = truth.joint
    marginals = MarginalSurvival(p.sum(axis=1), p.sum(axis=0))
    jy1 = np.nansum(p[T:, :] * truth.q_treated[T:, :], axis=1)
    jy0 = np.nansum(p[:, T:] * truth.q_control[:, T:], axis=0)
    risks = risks_from_joint(truth.schedule, marginals, jy1, jy0)
    return LargeSampleInput(truth.schedule, marginals, risks)


def ordering_violation(truth: GroundTruth) -> float:
    """Largest amount by which the truth's risks break a ranked-risk ordering."""
    worst = 0.0
    for arm, q in ((1, truth.q_treated), (0, truth.q_control)):
        for g, h in order_pairs(truth.schedule, arm):
            worst = max(worst, q[g] - q[h])
    return worst


def truth_bounds(truth: GroundTruth) -> BoundsResult:
    """Bounds computed at the truth's own coupling (its joint PMF)."""
    obs = observable_from_truth(truth)
    lower, upper, status = bounds_given_joint(truth.schedule, truth.joint, obs.marginals, obs.risks)
    spec = truth.coupling
    rho = spec.rho if isinstance(spec, CopulaSpec) else math.nan
    native = spec.native if isinstance(spec, CopulaSpec) else math.nan
    family = spec.family if isinstance(spec, CopulaSpec) else "given"
    return BoundsResult(lower, upper, rho, native, status, family)


def stratified_combine(per_stratum: Sequence[tuple[BoundsResult, float]]) -> BoundsResult:
    """Weighted average of stratum bounds.

    Weights should be proportional to the number of always survivors in each
    stratum, i.e. always-survivor mass times stratum size.
    """
    if not per_stratum:
        raise ValueError("need at least one stratum")
    w = np.array([float(wt) for _, wt in per_stratum])
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if w.sum() <= 0:
        raise ValueError("all stratum weights are zero")
    lows = np.array([b.lower for b, _ in per_stratum])
    ups = np.array([b.upper for b, _ in per_stratum])
    live = w > 0
    if not all(b.ok for (b, _), keep in zip(per_stratum, live) if keep):
        raise ValueError("a stratum with positive weight has no valid bounds")
    w = w[live] / w[live].sum()
    return BoundsResult(float(w @ lows[live]), float(w @ ups[live]), status=OK, family="stratified")
