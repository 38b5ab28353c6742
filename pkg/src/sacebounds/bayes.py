"""Posterior inference for the SACE bounds.

Survival PMFs get Dirichlet posteriors and stratum outcome risks get Beta
posteriors (uniform priors, outcomes missing at random given survival and
arm).  Truncation to the compatible region, where the SACE LP is feasible
at the chosen coupling, is done by rejection.  Every accepted draw carries
its own LP bounds; the bound pairs are summarized by posterior medians and
the shortest interval that contains both bounds with the requested
posterior probability.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import numpy as np

from .bounds import DegenerateError, bounds_given_joint, zr_grid, zr_ranges, OK
from .copula import CopulaSpec, joint_pmf_from_cdfs
from .model import ArmCounts, CountData, GroundTruth, MarginalSurvival, OutcomeRisk


class RejectionBudgetError(RuntimeError):
    """The proposal budget ran out before enough compatible draws were found."""

    def __init__(self, accepted: int, attempts: int, target: int):
        self.accepted = accepted
        self.attempts = attempts
        self.target = target
        self.acceptance_rate = accepted / attempts if attempts else 0.0
        super().__init__(
            f"only {accepted} of {target} draws accepted after {attempts} proposals "
            f"(acceptance rate {self.acceptance_rate:.3g}); the data look incompatible "
            f"with the assumptions at this coupling"
        )


@dataclass(frozen=True)
class BayesConfig:
    n_draws: int = 4000
    max_attempts: int = 2_000_000
    seed: int = 20190101
    credible_level: float = 0.95
    batch_size: int = 256
    workers: int = 1

    def __post_init__(self):
        if self.n_draws < 100:
            raise ValueError("n_draws must be at least 100")
        if not 0.5 < self.credible_level < 1:
            raise ValueError("credible_level must lie in (0.5, 1)")
        if self.max_attempts < self.n_draws:
            raise ValueError("max_attempts must be at least n_draws")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class PosteriorParams:
    """Dirichlet vectors per arm (length ``K+1``) and Beta pairs per arm (``(K+1-T) x 2``)."""

    dirichlet_treated: np.ndarray
    dirichlet_control: np.ndarray
    beta_treated: np.ndarray
    beta_control: np.ndarray


@dataclass(frozen=True)
class PosteriorDraw:
    index: int
    pi_treated: np.ndarray
    pi_control: np.ndarray
    alpha: OutcomeRisk
    lower: float
    upper: float


@dataclass(frozen=True)
class CredibleInterval:
    a: float
    b: float
    level: float
    achieved: float

    @property
    def width(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class PosteriorSample:
    draws: list[PosteriorDraw]
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.draws) / self.attempts

    @property
    def pairs(self) -> np.ndarray:
        return np.array([(d.lower, d.upper) for d in self.draws]).reshape(-1, 2)


@dataclass(frozen=True)
class PosteriorSummary:
    median_lower: float
    median_upper: float
    interval: CredibleInterval
    acceptance_rate: float


def posterior_params(counts: CountData) -> PosteriorParams:
    """Conjugate posterior parameters under uniform priors.

    Dirichlet: ``U_t + 1`` for ``t < T`` and ``M_t + N_1t + N_0t + 1`` for
    ``t >= T``.  Beta for ``alpha_t``: ``(N_1t + 1, N_0t + 1)``.
    """
    out = []
    for d in (1, 0):
        arm = counts.arm(d)
        dirichlet = np.concatenate([arm.deaths, arm.n_missing + arm.n_bad + arm.n_good]) + 1.0
        beta = np.column_stack([arm.n_bad + 1.0, arm.n_good + 1.0])
        out.append((dirichlet.astype(float), beta.astype(float)))
    return PosteriorParams(out[0][0], out[1][0], out[0][1], out[1][1])


def draw_rng(seed: int, index: int) -> np.random.Generator:
    """Independent substream for proposal ``index``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _dirichlet(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    g = rng.standard_gamma(alpha)
    return g / g.sum()


def _beta(rng: np.random.Generator, ab: np.ndarray) -> np.ndarray:
    x = rng.standard_gamma(ab[:, 0])
    y = rng.standard_gamma(ab[:, 1])
    return x / (x + y)


def draw_posterior(params: PosteriorParams, rng: np.random.Generator):
    """One unconstrained draw ``(pi_treated, pi_control, alpha)``."""
    pi1 = _dirichlet(rng, params.dirichlet_treated)
    pi0 = _dirichlet(rng, params.dirichlet_control)
    a1 = _beta(rng, params.beta_treated)
    a0 = _beta(rng, params.beta_control)
    return pi1, pi0, OutcomeRisk(a1, a0)


def _evaluate(args):
    """Bounds for proposal ``index``, or None if it falls outside the compatible region."""
    index, seed, params, schedule, spec = args
    rng = draw_rng(seed, index)
    pi1, pi0, alpha = draw_posterior(params, rng)
    m = MarginalSurvival(pi1, pi0)
    if spec.family == "independence":
        p = np.outer(pi1, pi0)
    else:
        p = joint_pmf_from_cdfs(m.cdf(1), m.cdf(0), spec)
    try:
        lower, upper, status = bounds_given_joint(schedule, p, m, alpha)
    except DegenerateError:
        return None
    if status != OK:
        return None
    return PosteriorDraw(index, pi1, pi0, alpha, lower, upper)


def _evaluate_batch(batch):
    return [_evaluate(a) for a in batch]


def sample_compatible(counts: CountData, spec: CopulaSpec, cfg: BayesConfig = BayesConfig()) -> PosteriorSample:
    """Rejection-sample the truncated posterior at a fixed coupling.

    Proposal ``m`` always uses substream ``(cfg.seed, m)`` and accepted draws
    are kept in proposal order, so results do not depend on ``cfg.workers``.
    Raises :class:`RejectionBudgetError` when ``cfg.max_attempts`` proposals
    yield fewer than ``cfg.n_draws`` compatible draws.
    """
    params = posterior_params(counts)
    schedule = counts.schedule
    accepted: list[PosteriorDraw] = []
    attempts = 0
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while len(accepted) < cfg.n_draws and attempts < cfg.max_attempts:
            size = min(cfg.batch_size * max(1, cfg.workers), cfg.max_attempts - attempts)
            jobs = [(attempts + k, cfg.seed, params, schedule, spec) for k in range(size)]
            if pool is None:
                results = _evaluate_batch(jobs)
            else:
                chunk = max(1, size // cfg.workers)
                parts = [jobs[i:i + chunk] for i in range(0, size, chunk)]
                results = [r for part in pool.map(_evaluate_batch, parts) for r in part]
            for k, res in enumerate(results):
                if res is not None:
                    accepted.append(res)
                    if len(accepted) == cfg.n_draws:
                        attempts += k + 1
                        break
            else:
                attempts += size
    finally:
        if pool is not None:
            pool.shutdown()
    if len(accepted) < cfg.n_draws:
        raise RejectionBudgetError(len(accepted), attempts, cfg.n_draws)
    return PosteriorSample(accepted, attempts)


def sample_zr(counts: CountData, cfg: BayesConfig = BayesConfig()) -> PosteriorSample:
    """Posterior of the coarse comparison bounds.

    Uses Beta posteriors on ``P(S(d) >= s_T)`` (all subjects, missing outcomes
    included) and on ``P(Y = 1 | S >= s_T, D = d)`` (observed outcomes only).
    The coarse LP is feasible for every such draw, so no proposal is
    rejected; the per-draw bounds use the closed-form coarse solution on the
    same always-survivor grid as :func:`~sacebounds.bounds.zr_bounds`.
    """
    surv, risk = [], []
    for d in (1, 0):
        arm = counts.arm(d)
        alive = int(arm.n_bad.sum() + arm.n_good.sum() + arm.n_missing.sum())
        surv.append((alive + 1.0, float(arm.deaths.sum()) + 1.0))
        risk.append((float(arm.n_bad.sum()) + 1.0, float(arm.n_good.sum()) + 1.0))
    ab = np.array(surv + risk)
    draws = []
    empty = OutcomeRisk(np.empty(0), np.empty(0))
    for m in range(cfg.n_draws):
        rng = draw_rng(cfg.seed, m)
        a, b, r1, r0 = _beta(rng, ab)
        grid = zr_grid(a, b)
        lows, highs = zr_ranges(grid, a, b, a * r1, b * r0)
        draws.append(PosteriorDraw(m, np.array([1 - a, a]), np.array([1 - b, b]), empty,
                                   float(lows.min()), float(highs.max())))
    return PosteriorSample(draws, cfg.n_draws)


def simulate_counts(truth: GroundTruth, n_per_arm: int, seed: int = 0,
                    missing_rate: float = 0.0) -> CountData:
    """Draw a randomized trial with ``n_per_arm`` subjects per arm from a ground truth.

    Each arm's cell counts (deaths before ``s_T``, then bad, good and missing
    outcomes per survival time) are one multinomial draw.  Outcomes go
    missing completely at random with probability ``missing_rate``.
    """
    if n_per_arm < 1:
        raise ValueError("n_per_arm must be positive")
    if not 0.0 <= missing_rate < 1.0:
        raise ValueError("missing_rate must lie in [0, 1)")
    T = truth.schedule.T
    p = truth.joint
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    arms = []
    for d in (1, 0):
        pi = p.sum(axis=1) if d == 1 else p.sum(axis=0)
        if d == 1:
            bad = np.nansum(p[T:, :] * truth.q_treated[T:, :], axis=1)
        else:
            bad = np.nansum(p[:, T:] * truth.q_control[:, T:], axis=0)
        good = np.clip(pi[T:] - bad, 0.0, None)
        keep = 1.0 - missing_rate
        cells = np.concatenate([pi[:T], bad * keep, good * keep, pi[T:] * missing_rate])
        cells = np.clip(cells, 0.0, None)
        n = rng.multinomial(n_per_arm, cells / cells.sum())
        L = len(pi) - T
        arms.append(ArmCounts(n[:T], n[T:T + L], n[T + L:T + 2 * L], n[T + 2 * L:]))
    return CountData(truth.schedule, arms[0], arms[1])


# ---------------------------------------------------------------------------
# Summaries


def _required(level: float, M: int) -> int:
    # guard against 0.95 * 100 = 95.00000000000001
    return int(math.ceil(level * M - 1e-9))


def shortest_joint_ci(pairs, level: float) -> CredibleInterval:
    """Shortest ``[a, b]`` holding both bounds of ``ceil(level M)`` draws.

    Candidate left ends are the observed lower bounds.  Scanning them in
    descending order, draws with ``lower >= a`` enter a max-heap that keeps
    the ``k`` smallest upper bounds, whose top is the best right end for
    ``a``.  Ties in width go to the smallest ``a``.
    """
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    M = pairs.shape[0]
    k = _required(level, M) if M else 0
    if M == 0 or k > M or k < 1:
        raise ValueError(f"need at least {k} draws for level {level}, got {M}")
    order = np.argsort(-pairs[:, 0], kind="stable")
    lowers = pairs[order, 0]
    uppers = pairs[order, 1]
    heap: list[float] = []  # negated uppers
    best = (math.inf, math.nan, math.nan)
    i = 0
    while i < M:
        a = lowers[i]
        while i < M and lowers[i] == a:
            u = uppers[i]
            if len(heap) < k:
                heapq.heappush(heap, -u)
            elif u < -heap[0]:
                heapq.heapreplace(heap, -u)
            i += 1
        if len(heap) == k:
            b = -heap[0]
            if b - a <= best[0]:
                best = (b - a, a, b)
    _, a, b = best
    achieved = float(np.mean((pairs[:, 0] >= a) & (pairs[:, 1] <= b)))
    return CredibleInterval(float(a), float(b), level, achieved)


def summarize(sample, level: float = 0.95, acceptance_rate: float | None = None) -> PosteriorSummary:
    """Posterior medians of both bounds and the shortest joint credible interval."""
    if isinstance(sample, PosteriorSample):
        pairs = sample.pairs
        rate = sample.acceptance_rate if acceptance_rate is None else acceptance_rate
    else:
        pairs = np.asarray(sample, dtype=float).reshape(-1, 2)
        rate = math.nan if acceptance_rate is None else acceptance_rate
    if pairs.shape[0] == 0:
        raise ValueError("no draws to summarize")
    med = np.median(pairs, axis=0)
    return PosteriorSummary(float(med[0]), float(med[1]), shortest_joint_ci(pairs, level), rate)


def posterior_bounds(counts: CountData, spec: CopulaSpec, cfg: BayesConfig = BayesConfig()) -> PosteriorSummary:
    """Sample at one coupling and summarize."""
    return summarize(sample_compatible(counts, spec, cfg), cfg.credible_level)
