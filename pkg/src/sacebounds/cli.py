"""Command-line front end.

Reads one JSON input file (format described by ``data/input.schema.json``)
and writes CSV or an aligned text table.  Exit codes: 0 success, 2 invalid
input, 3 data incompatible with the assumptions at every coupling, 4
rejection budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from . import bayes, bounds
from .copula import FAMILIES, RHO_MAX, CopulaDomainError, CopulaSpec, joint_pmf, principal_strata
from .model import (
    ArmCounts, CountData, FollowUpSchedule, GroundTruth, InconsistencyError, LargeSampleInput,
    MarginalSurvival, OutcomeRisk, ValidationError, empirical_input, risks_from_joint, validate, validate_marginals,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INCOMPATIBLE = 3
EXIT_BUDGET = 4

DEFAULT_GRID = "0:0.9:0.1,0.99,0.999,0.9999"
SUBCOMMANDS = ("large-sample", "bayes", "zr", "contrast", "truth-check")
CONSISTENCY_TOL = 1e-9


class InputError(ValueError):
    """The input file could not be parsed or failed validation."""


# ---------------------------------------------------------------------------
# Input format


def _schema() -> dict:
    text = resources.files("sacebounds").joinpath("data/input.schema.json").read_text("utf-8")
    return json.loads(text)


def _matrix(rows) -> np.ndarray:
    return np.array([[math.nan if v is None else float(v) for v in row] for row in rows], dtype=float)


def _pair(block) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(block["treated"], dtype=float), np.asarray(block["control"], dtype=float)


def _arm_counts(block: dict, schedule: FollowUpSchedule, label: str) -> ArmCounts:
    K, T = schedule.K, schedule.T
    deaths = np.asarray(block["deaths"], dtype=np.int64)
    if deaths.shape != (T,):
        raise ValidationError(f"counts.{label}.deaths", f"expected {T} entries (t = 0..T-1), got {deaths.size}")
    n = K + 1 - T
    cols = {k: np.zeros(n, dtype=np.int64) for k in ("n_bad", "n_good", "n_missing")}
    seen = set()
    for i, row in enumerate(block["survivors"]):
        t = row["t"]
        if not T <= t <= K:
            raise ValidationError(f"counts.{label}.survivors[{i}].t", f"must lie in [{T}, {K}], got {t}")
        if t in seen:
            raise ValidationError(f"counts.{label}.survivors[{i}].t", f"duplicate time index {t}")
        seen.add(t)
        for k in cols:
            cols[k][t - T] = row.get(k, 0)
    return ArmCounts(deaths, cols["n_bad"], cols["n_good"], cols["n_missing"])


def _copula_from_json(block: dict) -> CopulaSpec:
    family = block["family"]
    if "rho" in block:
        return CopulaSpec.from_spearman(family, block["rho"])
    if family == "plackett":
        return CopulaSpec.plackett(block.get("phi", 1.0))
    if family == "gaussian":
        return CopulaSpec.gaussian(block.get("r", 0.0))
    return CopulaSpec.independence()


def load_input(obj: dict):
    """Build a validated model object from a decoded input document."""
    try:
        jsonschema.validate(obj, _schema())
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"{where}: {exc.message}") from None
    sch = obj["schedule"]
    schedule = FollowUpSchedule(tuple(float(t) for t in sch["times"]), int(sch["measurement_index"]))
    validate(schedule)
    mode = obj["mode"]
    if mode == "large_sample":
        m = MarginalSurvival(*_pair(obj["marginals"]))
        risks = OutcomeRisk(*_pair(obj["risks"])) if "risks" in obj else None
        if "joint_y1" in obj:
            derived = risks_from_joint(schedule, validate_marginals(schedule, m), *_pair(obj["joint_y1"]))
            if risks is not None:
                for d, label in ((1, "treated"), (0, "control")):
                    if risks.arm(d).shape != derived.arm(d).shape or np.max(
                            np.abs(risks.arm(d) - derived.arm(d))) > CONSISTENCY_TOL:
                        raise InconsistencyError(
                            f"risks.{label} disagrees with joint_y1.{label} by more than {CONSISTENCY_TOL:g}")
            risks = derived
        return validate(LargeSampleInput(schedule, m, risks))
    if mode == "counts":
        c = obj["counts"]
        return validate(CountData(schedule, _arm_counts(c["treated"], schedule, "treated"),
                                  _arm_counts(c["control"], schedule, "control")))
    truth = obj["truth"]
    q1, q0 = _matrix(truth["q"]["treated"]), _matrix(truth["q"]["control"])
    if "joint" in truth:
        return validate(GroundTruth(schedule, _matrix(truth["joint"]), q1, q0))
    if "marginals" not in obj:
        raise InputError("truth.copula requires top-level marginals")
    spec = _copula_from_json(truth["copula"])
    m = validate_marginals(schedule, MarginalSurvival(*_pair(obj["marginals"])))
    return validate(GroundTruth(schedule, joint_pmf(m, spec, schedule), q1, q0, coupling=spec))


def parse_input_file(path) -> LargeSampleInput | CountData | GroundTruth:
    """Read and validate an input file.

    Errors carry the offending line (for JSON syntax errors) or the field
    path (for schema and domain errors).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return load_input(obj)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _nullable(m: np.ndarray) -> list:
    return [[None if math.isnan(v) else float(v) for v in row] for row in m]


def dump_input(x) -> dict:
    """Inverse of :func:`load_input`."""
    s = x.schedule
    head = {"schedule": {"times": list(s.times), "measurement_index": s.measurement_index}}
    if isinstance(x, LargeSampleInput):
        return {"mode": "large_sample", **head,
                "marginals": {"treated": x.marginals.treated.tolist(), "control": x.marginals.control.tolist()},
                "risks": {"treated": x.risks.treated.tolist(), "control": x.risks.control.tolist()}}
    if isinstance(x, CountData):
        def arm(a: ArmCounts):
            return {"deaths": a.deaths.tolist(),
                    "survivors": [{"t": s.T + i, "n_bad": int(a.n_bad[i]), "n_good": int(a.n_good[i]),
                                   "n_missing": int(a.n_missing[i])} for i in range(s.n_post)]}
        return {"mode": "counts", **head, "counts": {"treated": arm(x.treated), "control": arm(x.control)}}
    if isinstance(x, GroundTruth):
        return {"mode": "ground_truth", **head,
                "truth": {"joint": x.joint.tolist(),
                          "q": {"treated": _nullable(x.q_treated), "control": _nullable(x.q_control)}}}
    raise TypeError(f"cannot serialize {type(x).__name__}")


# ---------------------------------------------------------------------------
# Grid parsing


def parse_rho_grid(text: str) -> list[float]:
    """Comma-separated values and inclusive ``start:stop:step`` ranges.

    Ranges are enumerated in decimal arithmetic so ``0:0.9:0.1`` yields
    exactly ten values.
    """
    values: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise ValueError(f"range {part!r} must be start:stop:step")
            start, stop, step = (Decimal(b) for b in bits)
            if step <= 0:
                raise ValueError(f"step must be positive in {part!r}")
            v = start
            while v <= stop:
                values.append(float(v))
                v += step
        else:
            values.append(float(Decimal(part)))
    if not values:
        raise ValueError("empty rho grid")
    for v in values:
        if not 0.0 <= v <= RHO_MAX:
            raise ValueError(f"rho values must lie in [0, {RHO_MAX}], got {v}")
    return sorted(set(values))


# ---------------------------------------------------------------------------
# Output


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)
    failure: Exception | None = None

    def add(self, *cells):
        self.rows.append(list(cells))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = f"{float(v):.6f}"
    return "0.000000" if s == "-0.000000" else s


def render(table: Table, fmt: str) -> str:
    cells = [table.header] + [[_cell(v) for v in row] for row in table.rows]
    if fmt == "csv":
        return "".join(",".join(r) + "\n" for r in cells)
    widths = [max(len(r[i]) for r in cells) for i in range(len(table.header))]
    lines = []
    for k, r in enumerate(cells):
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands


@dataclass
class RunConfig:
    subcommand: str
    input_path: str
    copula: str = "plackett"
    rho_grid: list[float] = field(default_factory=lambda: parse_rho_grid(DEFAULT_GRID))
    draws: int = 4000
    seed: int = 20190101
    credible_level: float = 0.95
    budget: int = 2_000_000
    output_path: str | None = None
    output_format: str = "csv"
    quiet: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.copula not in FAMILIES:
            raise ValueError(f"unknown copula {self.copula!r}")
        if self.output_format not in ("csv", "pretty"):
            raise ValueError(f"unknown format {self.output_format!r}")


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _observable(x) -> LargeSampleInput:
    if isinstance(x, LargeSampleInput):
        return x
    if isinstance(x, GroundTruth):
        return bounds.observable_from_truth(x)
    return empirical_input(x)


def _native_label(family: str) -> str:
    return "r" if family == "gaussian" else "log_phi"


def _large_sample(cfg: RunConfig, x, log) -> Table:
    data = _observable(x)
    try:
        res = bounds.sweep(data, cfg.copula, cfg.rho_grid)
    except bounds.IncompatibleDataError as exc:
        raise _Failure(EXIT_INCOMPATIBLE, str(exc)) from None
    t = Table(["rho", _native_label(cfg.copula), "lower", "upper", "rel_length"])
    for row in res.rows:
        b = row.bounds
        t.add(row.rho, row.native, b.lower, b.upper, row.relative_length)
    if res.infeasible_rhos:
        log(f"infeasible at rho = {', '.join(f'{r:g}' for r in res.infeasible_rhos)}")
    env = res.envelope
    zr_w = res.zr.width if res.zr.ok else math.nan
    t.add("ENVELOPE", "", env.lower, env.upper, env.width / zr_w if zr_w > 0 else math.nan)
    return t


def _bayes(cfg: RunConfig, x, log) -> Table:
    if not isinstance(x, CountData):
        raise _Failure(EXIT_INVALID, "bayes requires an input file with mode 'counts'")
    bc = bayes.BayesConfig(n_draws=cfg.draws, max_attempts=cfg.budget, seed=cfg.seed,
                           credible_level=cfg.credible_level, workers=cfg.workers)
    zr = bayes.summarize(bayes.sample_zr(x, bc), bc.credible_level)
    zr_w, zr_ci_w = zr.median_upper - zr.median_lower, zr.interval.width
    t = Table(["rho", _native_label(cfg.copula), "lower", "upper", "rel_length",
               "ci_lower", "ci_upper", "ci_rel_length", "acceptance_rate"])
    exhausted, feasible = [], 0
    for rho in cfg.rho_grid:
        spec = CopulaSpec.from_spearman(cfg.copula, rho)
        try:
            s = bayes.posterior_bounds(x, spec, bc)
        except bayes.RejectionBudgetError as exc:
            log(f"rho = {rho:g}: {exc}")
            exhausted.append(rho)
            t.add(rho, spec.native, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
                  exc.acceptance_rate)
            continue
        feasible += 1
        w = s.median_upper - s.median_lower
        t.add(rho, spec.native, s.median_lower, s.median_upper, w / zr_w if zr_w > 0 else math.nan,
              s.interval.a, s.interval.b, s.interval.width / zr_ci_w if zr_ci_w > 0 else math.nan,
              s.acceptance_rate)
        log(f"rho = {rho:g}: acceptance rate {s.acceptance_rate:.3f}")
    t.add("ZR", "", zr.median_lower, zr.median_upper, 1.0, zr.interval.a, zr.interval.b, 1.0,
          zr.acceptance_rate)
    if exhausted:
        t.failure = _Failure(EXIT_BUDGET, f"rejection budget exhausted at {len(exhausted)} of "
                                          f"{len(cfg.rho_grid)} rho values")
    return t


def _zr(cfg: RunConfig, x, log) -> Table:
    res = bounds.zr_bounds(_observable(x))
    if not res.ok:
        raise _Failure(EXIT_INCOMPATIBLE, f"coarse bounds are {res.status}")
    t = Table(["lower", "upper", "width"])
    t.add(res.lower, res.upper, res.width)
    return t


def _contrast(cfg: RunConfig, x, log) -> Table:
    try:
        c = bounds.survivor_contrast(_observable(x))
    except bounds.DegenerateError as exc:
        raise _Failure(EXIT_INVALID, str(exc)) from None
    t = Table(["survivor_contrast", "degenerate"])
    t.add(c.value, c.degenerate)
    return t


def _truth_check(cfg: RunConfig, x, log) -> Table:
    if not isinstance(x, GroundTruth):
        raise _Failure(EXIT_INVALID, "truth-check requires an input file with mode 'ground_truth'")
    sace = bounds.true_sace(x)
    obs = bounds.observable_from_truth(x)
    b = bounds.truth_bounds(x)
    strata = principal_strata(x.joint, x.schedule.T)
    t = Table(["quantity", "value"])
    t.add("true_sace", sace)
    for k, v in strata.items():
        t.add(f"stratum_{k}", v)
    for d, arm in ((1, "treated"), (0, "control")):
        for i, v in enumerate(obs.marginals.arm(d)):
            t.add(f"pi_{arm}_{i}", v)
        for i, v in enumerate(obs.risks.arm(d)):
            t.add(f"alpha_{arm}_{x.schedule.T + i}", v)
    t.add("ordering_violation", bounds.ordering_violation(x))
    t.add("lower", b.lower)
    t.add("upper", b.upper)
    t.add("contains_truth", b.ok and b.contains(sace, 1e-9))
    return t


_HANDLERS = {
    "large-sample": _large_sample,
    "bayes": _bayes,
    "zr": _zr,
    "contrast": _contrast,
    "truth-check": _truth_check,
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Execute one subcommand; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr

    def log(msg: str):
        if not cfg.quiet:
            print(msg, file=stderr)

    try:
        x = parse_input_file(cfg.input_path)
        table = _HANDLERS[cfg.subcommand](cfg, x, log)
    except _Failure as exc:
        print(f"error: {exc}", file=stderr)
        return exc.code
    except (InputError, ValidationError, InconsistencyError, CopulaDomainError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID
    text = render(table, cfg.output_format)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if table.failure is not None:
        print(f"error: {table.failure}", file=stderr)
        return table.failure.code
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sacebounds",
                                     description="Bounds on the survivor average causal effect.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--input", "-i", required=True, help="JSON input file")
    parser.add_argument("--out", "-o", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "pretty"), default="csv")
    parser.add_argument("--copula", choices=FAMILIES, default="plackett")
    parser.add_argument("--rho", default=DEFAULT_GRID,
                        help="Spearman rho grid: comma list and/or start:stop:step ranges "
                             f"(default {DEFAULT_GRID})")
    parser.add_argument("--draws", type=int, default=4000, help="accepted posterior draws per rho")
    parser.add_argument("--seed", type=int, default=20190101)
    parser.add_argument("--budget", type=int, default=2_000_000, help="proposal budget per rho")
    parser.add_argument("--cred", type=float, default=0.95, help="credible level")
    parser.add_argument("--workers", type=int, default=1, help="processes for posterior sampling")
    parser.add_argument("--quiet", "-q", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        grid = parse_rho_grid(args.rho)
        if args.copula == "independence" and grid != [0.0]:
            if not args.quiet:
                print("note: independence copula ignores --rho; using rho = 0", file=sys.stderr)
            grid = [0.0]
        cfg = RunConfig(args.subcommand, args.input, args.copula, grid, args.draws, args.seed,
                        args.cred, args.budget, args.out, args.format, args.quiet, args.workers)
        if args.subcommand == "bayes":
            bayes.BayesConfig(args.draws, args.budget, args.seed, args.cred)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
