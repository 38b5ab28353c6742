"""Independent reference computations shared by the test modules."""

import itertools

import numpy as np

from sacebounds.linprog import LinearProgram

from sacebounds.copula import CopulaSpec, joint_pmf
from sacebounds.model import FollowUpSchedule, GroundTruth, MarginalSurvival

GRID = 20  # q and p are multiples of 1/GRID


def _rows_for(p_row, target):
    """All integer q-vectors (0..GRID) with p_row @ q == target."""
    n = len(p_row)
    out = []
    for q in itertools.product(range(GRID + 1), repeat=n):
        if sum(a * b for a, b in zip(p_row, q)) == target:
            out.append(q)
    return out


def grid_arm_extremes(p, q_truth, arm):
    """Min and max of the arm's always-survivor numerator over feasible grid q.

    Works on the K = 2, T = 1 shape with times (0, 1, 2).  ``p`` and
    ``q_truth`` hold integers in units of 1/GRID.  Returns integers in units
    of 1/GRID^2.
    """
    K, T = 2, 1
    if arm == 1:
        cells = [[(t, u) for u in range(K + 1)] for t in range(T, K + 1)]
    else:
        cells = [[(u, t) for u in range(K + 1)] for t in range(T, K + 1)]
    per_row = []
    for row in cells:
        coef = [p[c] for c in row]
        target = sum(p[c] * q_truth[c] for c in row)
        per_row.append(_rows_for(coef, target))
    own = 0 if arm == 1 else 1
    flat = [c for row in cells for c in row]
    pairs = [(i, j) for i, g in enumerate(flat) for j, h in enumerate(flat)
             if i != j and g[own] >= h[own] and sum(g) >= sum(h)]
    weights = [p[c] if c[0] >= T and c[1] >= T else 0 for c in flat]
    lo, hi = None, None
    for a in per_row[0]:
        for b in per_row[1]:
            q = a + b
            if all(q[i] <= q[j] for i, j in pairs):
                v = sum(w * x for w, x in zip(weights, q))
                lo = v if lo is None else min(lo, v)
                hi = v if hi is None else max(hi, v)
    return lo, hi


def random_grid_instance(rng):
    """A K = 2, T = 1 truth with p and q on the 1/GRID lattice."""
    while True:
        cells = rng.multinomial(GRID, np.ones(9) / 9).reshape(3, 3)
        if cells[1:, 1:].sum() > 0:
            break
    c1, c0 = rng.integers(8, GRID + 1, size=2)
    b_own = rng.integers(0, 5, size=2)
    b_oth = np.array([rng.integers(0, b + 1) for b in b_own])
    q1 = np.full((3, 3), -1)
    q0 = np.full((3, 3), -1)
    for t1 in range(3):
        for t0 in range(3):
            if t1 >= 1:
                q1[t1, t0] = min(max(c1 - b_own[0] * t1 - b_oth[0] * t0, 0), GRID)
            if t0 >= 1:
                q0[t1, t0] = min(max(c0 - b_own[1] * t0 - b_oth[1] * t1, 0), GRID)
    return cells, q1, q0


def grid_truth(cells, q1, q0):
    sched = FollowUpSchedule((0.0, 1.0, 2.0), 1)
    f = lambda q: np.where(q < 0, np.nan, q / GRID)
    return GroundTruth(sched, cells / GRID, f(q1), f(q0))


def random_truth(rng):
    """A ground-truth whose risks are linear in survival times, ordered as the assumptions require."""
    K = int(rng.integers(2, 5))
    T = int(rng.integers(1, K))
    times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 2.0, size=K))])
    sched = FollowUpSchedule(tuple(times), T)
    w1, w0 = rng.dirichlet(np.ones(K + 1)), rng.dirichlet(np.ones(K + 1))
    rho = float(rng.choice([0.0, rng.uniform(0, 0.99)]))
    family = str(rng.choice(["plackett", "gaussian"]))
    spec = CopulaSpec.from_spearman(family, rho)
    p = joint_pmf(MarginalSurvival(w1, w0), spec)
    s = times / times[-1]
    q1 = np.full((K + 1, K + 1), np.nan)
    q0 = np.full((K + 1, K + 1), np.nan)
    for d, q in ((1, q1), (0, q0)):
        c = rng.uniform(0.4, 1.0)
        b_own = rng.uniform(0, 0.6)
        b_oth = rng.uniform(0, b_own)
        for t1 in range(K + 1):
            for t0 in range(K + 1):
                own, oth = (t1, t0) if d == 1 else (t0, t1)
                if own >= T:
                    q[t1, t0] = np.clip(c - b_own * s[own] - b_oth * s[oth], 0, 1)
    return GroundTruth(sched, p, q1, q0, coupling=spec)


def brute_force_ci(pairs, level):
    """Shortest joint interval by checking every (observed lower, observed upper) pair.

    Ties in width go to the smallest left end.
    """
    import math

    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    M = pairs.shape[0]
    k = int(math.ceil(level * M - 1e-9))
    best = (math.inf, math.nan, math.nan)
    for a in np.unique(pairs[:, 0]):
        inside = np.sort(pairs[pairs[:, 0] >= a, 1])
        for b in np.unique(pairs[:, 1]):
            if b < a:
                continue
            n = int(np.searchsorted(inside, b, side="right"))
            if n >= k and (b - a < best[0] or (b - a == best[0] and a < best[1])):
                best = (b - a, a, b)
    return best[1], best[2]


def vertex_oracle(lp: LinearProgram, sense: str):
    """Optimum over all basic feasible points of a bounded LP, or None if infeasible."""
    n = lp.n_vars
    rows = [(lp.A_eq[i], lp.b_eq[i]) for i in range(lp.A_eq.shape[0])]
    rows += [(lp.A_ub[i], lp.b_ub[i]) for i in range(lp.A_ub.shape[0])]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows += [(e, lp.lo[j]), (e, lp.hi[j])]
    best = None
    # the box makes the feasible set a polytope, so its optimum is attained
    # at a point where n linearly independent rows are tight
    for act in itertools.combinations(range(len(rows)), n):
        A = np.array([rows[i][0] for i in act])
        b = np.array([rows[i][1] for i in act])
        if abs(np.linalg.det(A)) < 1e-10:
            continue
        x = np.linalg.solve(A, b)
        if lp.violation(x) > 1e-9:
            continue
        v = float(lp.objective @ x)
        if best is None or (v < best if sense == "min" else v > best):
            best = v
    return best


def random_tiny_lp(rng):
    n = int(rng.integers(1, 4))
    n_ub = int(rng.integers(0, 4))
    n_eq = int(rng.integers(0, min(n, 2) + 1))
    ints = lambda *s: rng.integers(-3, 4, size=s).astype(float)
    c = ints(n)
    hi = rng.integers(1, 4, size=n).astype(float)
    lo = np.where(rng.random(n) < 0.3, -hi, 0.0)
    A_ub = ints(n_ub, n)
    x0 = lo + rng.random(n) * (hi - lo)
    b_ub = np.round(A_ub @ x0 + rng.integers(-1, 3, size=n_ub)) if n_ub else np.zeros(0)
    A_eq = ints(n_eq, n)
    b_eq = np.round(A_eq @ x0 * 2) / 2 if n_eq else np.zeros(0)
    return LinearProgram.build(c, bounds=list(zip(lo, hi)), A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
