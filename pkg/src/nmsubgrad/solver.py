"""Projected subgradient solvers.

solve_nonmonotone runs the backtracking method; solve_prefixed runs the
classical prefixed-step rules used as baselines. Both produce a RunReport
whose rows cover every visited iterate: rows with ell >= 1 are line-search
steps, and the final landed iterate is always recorded as a trailing row with
the ell = 0 sentinel (prefixed runs use the sentinel on every row). A budget
of max_iters therefore yields max_iters + 1 rows unless the run stops early.

Runs are deterministic: identical (problem, config, start) give identical
traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import (
    BacktrackFailureError,
    IterationRecord,
    OracleError,
    RunReport,
    SolverConfig,
    TERMINATION_BACKTRACK_FAILURE,
    TERMINATION_MAX_ITERS,
    TERMINATION_ZERO_SUBGRADIENT,
    as_point,
    build_report,
    gamma_values,
    validate_config,
)
from .problems import ProblemSpec

__all__ = [
    "ConstantStep",
    "ConstantLength",
    "NonsummableDiminishing",
    "SquareSummable",
    "StepRule",
    "solve_nonmonotone",
    "solve_prefixed",
    "write_trace_csv",
    "read_trace_csv",
]


# ----- prefixed step rules -----


@dataclass(frozen=True)
class ConstantStep:
    """alpha_k = a."""

    a: float = 0.1

    def size(self, k: int, snorm: float) -> float:
        return self.a


@dataclass(frozen=True)
class ConstantLength:
    """alpha_k = a / ||s_k||, so every raw step has length a."""

    a: float = 0.2

    def size(self, k: int, snorm: float) -> float:
        return self.a / snorm


@dataclass(frozen=True)
class NonsummableDiminishing:
    """alpha_k = a / sqrt(k)."""

    a: float = 0.1

    def size(self, k: int, snorm: float) -> float:
        return self.a / math.sqrt(k)


@dataclass(frozen=True)
class SquareSummable:
    """alpha_k = a / k."""

    a: float = 0.5

    def size(self, k: int, snorm: float) -> float:
        return self.a / k


StepRule = Union[ConstantStep, ConstantLength, NonsummableDiminishing, SquareSummable]


def _check_rule(rule: StepRule) -> None:
    if not isinstance(rule, (ConstantStep, ConstantLength, NonsummableDiminishing, SquareSummable)):
        raise TypeError(f"not a step rule: {rule!r}")
    if not (rule.a > 0.0 and math.isfinite(rule.a)):
        raise ValueError(f"step constant must be positive, got {rule.a}")


# ----- starting point -----


def _start_point(problem: ProblemSpec, x0) -> np.ndarray:
    if x0 is None:
        x0 = np.zeros(problem.n)
    x = problem.project(as_point(x0))
    return np.ascontiguousarray(x, dtype=np.float64)


# ----- non-monotone solver -----


def solve_nonmonotone(
    problem: ProblemSpec, cfg: SolverConfig, x0=None
) -> RunReport:
    """Run the backtracking method for cfg.max_iters steps.

    Stops early only on an exactly zero subgradient or on numerical breakdown
    (backtracking cap exhausted / non-finite oracle values), in which case the
    partial trace is returned with the matching termination tag.
    """
    from .linesearch import nonmonotone_backtrack

    cfg = validate_config(cfg)
    gammas = gamma_values(cfg.gamma, cfg.max_iters + 1)  # fails fast on short tables
    x = _start_point(problem, x0)
    f = problem.value(x)
    alpha = cfg.alpha1
    records: list[IterationRecord] = []

    for k in range(1, cfg.max_iters + 1):
        gamma_k = float(gammas[k - 1])
        if not math.isfinite(f):
            records.append(_terminal(k, x, f, gamma_k, alpha, snorm=math.nan))
            return build_report(records, TERMINATION_BACKTRACK_FAILURE)
        _, s = problem.eval(x)
        snorm_sq = float(np.dot(s, s))
        snorm = math.sqrt(snorm_sq) if math.isfinite(snorm_sq) else math.inf
        if snorm_sq == 0.0:
            records.append(_terminal(k, x, f, gamma_k, alpha, snorm=0.0))
            return build_report(records, TERMINATION_ZERO_SUBGRADIENT)
        if not math.isfinite(snorm_sq):
            records.append(_terminal(k, x, f, gamma_k, alpha, snorm=snorm))
            return build_report(records, TERMINATION_BACKTRACK_FAILURE)
        try:
            out = nonmonotone_backtrack(
                problem.value, problem.project, x, f, s, alpha, gamma_k, cfg
            )
        except (BacktrackFailureError, OracleError):
            records.append(_terminal(k, x, f, gamma_k, alpha, snorm=snorm))
            return build_report(records, TERMINATION_BACKTRACK_FAILURE)
        records.append(
            IterationRecord(
                k=k,
                x=x,
                f=f,
                gamma=gamma_k,
                alpha=alpha,
                ell=out.ell,
                step=out.step,
                snorm=snorm,
                alpha_next=out.alpha_next,
            )
        )
        x, f, alpha = out.x_next, out.f_next, out.alpha_next

    # budget exhausted: record the landed iterate (its subgradient is
    # evaluated so the trace is uniform and a zero there is still reported)
    k = cfg.max_iters + 1
    gamma_k = float(gammas[k - 1])
    _, s = problem.eval(x)
    snorm_sq = float(np.dot(s, s))
    snorm = math.sqrt(snorm_sq) if math.isfinite(snorm_sq) else math.inf
    records.append(_terminal(k, x, f, gamma_k, alpha, snorm=snorm))
    if snorm_sq == 0.0:
        return build_report(records, TERMINATION_ZERO_SUBGRADIENT)
    return build_report(records, TERMINATION_MAX_ITERS)


def _terminal(k, x, f, gamma, alpha, snorm) -> IterationRecord:
    return IterationRecord(
        k=k,
        x=x,
        f=f,
        gamma=gamma,
        alpha=alpha,
        ell=0,
        step=0.0,
        snorm=snorm,
        alpha_next=alpha,
    )


# ----- prefixed-step solver -----


def solve_prefixed(
    problem: ProblemSpec, rule: StepRule, max_iters: int, x0=None
) -> RunReport:
    """x_{k+1} = P_C(x_k - alpha_k * s_k) with alpha_k from the rule.

    Every row uses the ell = 0 sentinel and stores the applied size in both
    alpha and step; gamma is recorded as NaN (no slack sequence exists here).
    A zero subgradient stops the run before any division by ||s_k||.
    """
    _check_rule(rule)
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    x = _start_point(problem, x0)
    records: list[IterationRecord] = []

    for k in range(1, max_iters + 2):
        f, s = problem.eval(x)
        snorm_sq = float(np.dot(s, s))
        snorm = math.sqrt(snorm_sq) if math.isfinite(snorm_sq) else math.inf
        last = k == max_iters + 1
        if snorm_sq == 0.0 or last or not math.isfinite(f) or not math.isfinite(snorm_sq):
            records.append(
                IterationRecord(
                    k=k,
                    x=x,
                    f=f,
                    gamma=math.nan,
                    alpha=math.nan,
                    ell=0,
                    step=0.0,
                    snorm=snorm,
                    alpha_next=math.nan,
                )
            )
            if snorm_sq == 0.0:
                return build_report(records, TERMINATION_ZERO_SUBGRADIENT)
            if last:
                return build_report(records, TERMINATION_MAX_ITERS)
            return build_report(records, TERMINATION_BACKTRACK_FAILURE)
        size = rule.size(k, snorm)
        x_next = problem.project(x - size * s)
        records.append(
            IterationRecord(
                k=k,
                x=x,
                f=f,
                gamma=math.nan,
                alpha=size,
                ell=0,
                step=size,
                snorm=snorm,
                alpha_next=math.nan,
            )
        )
        x = x_next
    raise AssertionError("unreachable")


# ----- trace serialization -----
#
# Columns are exactly the plotted series: k, f, fbest_gap (only when f_star is
# known), alpha, ell, gamma, snorm. fbest_gap is the running best value minus
# f_star. Iterates are not serialized. Floats are written with repr, which
# round-trips exactly.


def write_trace_csv(report: RunReport, path: str, f_star: float | None = None) -> None:
    import os

    with_gap = f_star is not None
    header = "k,f,fbest_gap,alpha,ell,gamma,snorm" if with_gap else "k,f,alpha,ell,gamma,snorm"
    lines = [header]
    best = math.inf
    for r in report.records:
        best = min(best, r.f)
        cells = [str(r.k), repr(float(r.f))]
        if with_gap:
            cells.append(repr(float(best - f_star)))
        cells += [repr(float(r.alpha)), str(r.ell), repr(float(r.gamma)), repr(float(r.snorm))]
        lines.append(",".join(cells))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace_csv(path: str) -> tuple[RunReport, np.ndarray | None]:
    """Rebuild a RunReport (x = None on every row, termination = "unknown")
    plus the fbest_gap column when present."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty trace")
    header = lines[0].split(",")
    expected_with_gap = ["k", "f", "fbest_gap", "alpha", "ell", "gamma", "snorm"]
    expected_plain = ["k", "f", "alpha", "ell", "gamma", "snorm"]
    if header == expected_with_gap:
        with_gap = True
    elif header == expected_plain:
        with_gap = False
    else:
        raise ValueError(f"{path}: unrecognized trace header {header!r}")
    records = []
    gaps = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
        it = iter(cells)
        k = int(next(it))
        f = float(next(it))
        if with_gap:
            gaps.append(float(next(it)))
        alpha = float(next(it))
        ell = int(next(it))
        gamma = float(next(it))
        snorm = float(next(it))
        # step/alpha_next are not serialized; auditors re-derive them from
        # (alpha, ell) and beta, so corrupt columns stay detectable
        records.append(
            IterationRecord(
                k=k,
                x=None,
                f=f,
                gamma=gamma,
                alpha=alpha,
                ell=ell,
                step=math.nan,
                snorm=snorm,
                alpha_next=math.nan,
            )
        )
    fs = [r.f for r in records]
    best = min(fs)
    report = RunReport(
        records=tuple(records),
        f_best=best,
        it_best=records[fs.index(best)].k,
        termination="unknown",
    )
    return report, (np.asarray(gaps) if with_gap else None)
