"""Theory-audit layer: verify on recorded runs the inequalities the method
guarantees by construction, and the complexity bounds they imply.

Every check compares floats with a relative slack of 1e-9, scaled by the
magnitudes of both sides (floored at 1), so legitimate roundoff never trips a
check while any real violation does. Checks whose prerequisites are missing
(no optimum, no Lipschitz constant, no iterates in a CSV-round-tripped trace,
prefixed-step traces with no line-search law) are reported as skipped, never
silently dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import RunReport, SolverConfig, SqrtInverse, StronglyConvexHarmonic
from .problems import ProblemSpec, diameter_sq

__all__ = [
    "REL_SLACK",
    "TheoryConstants",
    "constants",
    "CheckResult",
    "AuditReport",
    "audit_stepwise",
    "audit_rate_bounds",
    "merge_reports",
    "audit_report_to_json",
    "check_sum_lemmas",
    "sum_lemma_sweep",
]

REL_SLACK = 1e-9

PASSED = "passed"
FAILED = "failed"
SKIPPED = "skipped"


@dataclass(frozen=True)
class TheoryConstants:
    """theta = min(1, 1/((1+rho)L^2)) and gamma_big = theta*(2beta - beta/rho),
    the constants appearing in every complexity bound. gamma_big > 0 exactly
    when rho > 1/2, which constants() requires."""

    theta: float
    gamma_big: float
    L: float
    rho: float
    beta: float
    c: float


def constants(rho: float, beta: float, L: float, c: float = 1.0) -> TheoryConstants:
    if not (0.5 < rho < 1.0):
        raise ValueError(f"rho must lie in (1/2, 1) for positive constants, got {rho}")
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not (L > 0.0 and math.isfinite(L)):
        raise ValueError(f"L must be positive and finite, got {L}")
    if not (c > 0.0 and math.isfinite(c)):
        raise ValueError(f"c must be positive and finite, got {c}")
    theta = min(1.0, 1.0 / ((1.0 + rho) * L * L))
    gamma_big = theta * (2.0 * beta - beta / rho)
    return TheoryConstants(theta=theta, gamma_big=gamma_big, L=L, rho=rho, beta=beta, c=c)


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # passed | failed | skipped
    worst_violation: float | None = None
    worst_index: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class AuditReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(ch.status != FAILED for ch in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for ch in self.checks:
            if ch.name == name:
                return ch
        raise KeyError(name)


def merge_reports(*reports: AuditReport) -> AuditReport:
    checks: list[CheckResult] = []
    for rep in reports:
        checks.extend(rep.checks)
    return AuditReport(checks=tuple(checks))


def audit_report_to_json(report: AuditReport) -> str:
    obj = {
        "passed": report.passed,
        "checks": [
            {
                "name": ch.name,
                "status": ch.status,
                "worst_violation": ch.worst_violation,
                "worst_index": ch.worst_index,
                "detail": ch.detail,
            }
            for ch in report.checks
        ],
    }
    return json.dumps(obj, sort_keys=True, indent=2)


def _scale(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


def _worst(name: str, lhs: np.ndarray, rhs: np.ndarray, ks: np.ndarray, detail: str = "") -> CheckResult:
    """Check lhs_k <= rhs_k for all k; the worst normalized violation decides."""
    viol = (lhs - rhs) / _scale(lhs, rhs)
    bad = ~np.isfinite(viol)
    if bad.any():  # NaN anywhere is corrupt data, report it as the failure
        idx = int(np.argmax(bad))
        return CheckResult(name, FAILED, math.inf, int(ks[idx]), "non-finite comparison")
    idx = int(np.argmax(viol))
    worst = float(viol[idx])
    status = PASSED if worst <= REL_SLACK else FAILED
    return CheckResult(name, status, worst, int(ks[idx]), detail)


def _skip(name: str, why: str) -> CheckResult:
    return CheckResult(name, SKIPPED, detail=why)


# ----- stepwise audit -----


def _trace_arrays(report: RunReport):
    rec = report.records
    return {
        "k": np.array([r.k for r in rec], dtype=np.int64),
        "f": np.array([r.f for r in rec]),
        "gamma": np.array([r.gamma for r in rec]),
        "alpha": np.array([r.alpha for r in rec]),
        "ell": np.array([r.ell for r in rec], dtype=np.int64),
        "step": np.array([r.step for r in rec]),
        "snorm": np.array([r.snorm for r in rec]),
        "alpha_next": np.array([r.alpha_next for r in rec]),
    }


def audit_stepwise(
    report: RunReport,
    problem: ProblemSpec | None,
    cfg: SolverConfig,
    tc: TheoryConstants | None = None,
) -> AuditReport:
    """Per-iteration laws of the accepted steps.

    consistency        alpha_next = beta**(ell-1)*alpha, step = beta*alpha_next,
                       next row's alpha continues the chain, ell >= 1 on step rows
    step_upper_bound   alpha_{k+1} <= c * gamma_k
    step_lower_bound   theta * gamma_{k+1} <= alpha_{k+1}   (needs tc)
    sufficient_decrease f_{k+1} <= f_k - rho*beta*alpha_{k+1}*||s_k||^2 + gamma_k
    quasi_fejer        ||x_{k+1}-x*||^2 <= ||x_k-x*||^2 + (beta*c/rho)*gamma_k^2
                       (needs iterates, x*, and rho > 1/2)
    """
    arr = _trace_arrays(report)
    n_rows = len(report.records)
    K = n_rows - 1  # rows 1..K are steps, row K+1 is the landed iterate
    names = ["consistency", "step_upper_bound", "step_lower_bound",
             "sufficient_decrease", "quasi_fejer"]
    if K < 1 or not np.any(arr["ell"][:K] >= 1):
        why = "no line-search rows (prefixed-step trace or single-iterate run)"
        return AuditReport(checks=tuple(_skip(n, why) for n in names))

    beta, c, rho = cfg.beta, cfg.c, cfg.rho
    ks = arr["k"][:K]
    ell = arr["ell"][:K]
    alpha = arr["alpha"][:K]
    gamma = arr["gamma"][:K]
    snorm = arr["snorm"][:K]
    f = arr["f"]

    derived_next = beta ** (ell - 1).astype(np.float64) * alpha
    recorded_next = arr["alpha_next"][:K]
    # CSV traces do not carry alpha_next/step; fall back to the derived law
    eff_next = np.where(np.isfinite(recorded_next), recorded_next, derived_next)
    recorded_step = arr["step"][:K]
    eff_step = np.where(np.isfinite(recorded_step), recorded_step, beta * eff_next)

    checks: list[CheckResult] = []

    # consistency: the ladder law plus the alpha chain between rows
    if np.any(ell < 1):
        idx = int(np.argmax(ell < 1))
        checks.append(CheckResult("consistency", FAILED, math.inf, int(ks[idx]),
                                  "step row with ell < 1"))
    else:
        lhs_parts = [np.abs(eff_next - derived_next) / _scale(eff_next, derived_next)]
        chain = arr["alpha"][1 : K + 1]
        lhs_parts.append(np.abs(chain - eff_next) / _scale(chain, eff_next))
        lhs_parts.append(np.abs(eff_step - beta * eff_next) / _scale(eff_step, beta * eff_next))
        dev = np.vstack(lhs_parts).max(axis=0)
        checks.append(_worst("consistency", dev, np.zeros_like(dev), ks))

    checks.append(_worst("step_upper_bound", eff_next, c * gamma, ks))

    if tc is None:
        checks.append(_skip("step_lower_bound", "no Lipschitz constant supplied"))
    else:
        gamma_next = arr["gamma"][1 : K + 1]
        checks.append(_worst("step_lower_bound", tc.theta * gamma_next, eff_next, ks))

    decrease_rhs = f[:K] - rho * eff_step * snorm**2 + gamma
    checks.append(_worst("sufficient_decrease", f[1 : K + 1], decrease_rhs, ks))

    xs = [r.x for r in report.records]
    x_star = problem.x_star if problem is not None else None
    if any(x is None for x in xs):
        checks.append(_skip("quasi_fejer", "trace carries no iterates (CSV round-trip)"))
    elif x_star is None:
        checks.append(_skip("quasi_fejer", "no known optimum"))
    elif rho <= 0.5:
        checks.append(_skip("quasi_fejer", "rho <= 1/2"))
    else:
        X = np.vstack(xs)
        dist_sq = ((X - x_star[None, :]) ** 2).sum(axis=1)
        rhs = dist_sq[:K] + (beta * c / rho) * gamma**2
        checks.append(_worst("quasi_fejer", dist_sq[1 : K + 1], rhs, ks))

    return AuditReport(checks=tuple(checks))


# ----- rate-bound audit -----


def audit_rate_bounds(
    report: RunReport,
    problem: ProblemSpec | None,
    cfg: SolverConfig,
    tc: TheoryConstants | None = None,
    x1: np.ndarray | None = None,
) -> AuditReport:
    """For every prefix N of the trace, the best gap so far must sit under
    each applicable bound; the reported worst_index is the tightest N.

    rate_general          (dist^2 + (beta*c/rho) * sum gamma_k^2) / (Gamma * sum gamma_{k+1})
    rate_sqrt_log         4/Gamma * (dist^2 + beta*c/rho + beta*c/rho * ln N) / sqrt(N)
                          (sqrt-inverse gamma only)
    rate_tail             (dist^2 + (beta*c/rho) * sum gamma_k^2) / (Gamma * N * gamma_{N+1})
    rate_compact          4*(D + beta*c/rho * ln 3) / (Gamma * sqrt(N+2)), N >= 2
                          (bounded set, sqrt-inverse gamma with zeta = 1)
    rate_strongly_convex  8*beta*c / (rho*sigma*beta*theta*Gamma*(N+1))
                          (sigma > 0 with the matching harmonic gamma)
    """
    arr = _trace_arrays(report)
    K = len(report.records) - 1
    names = ["rate_general", "rate_sqrt_log", "rate_tail", "rate_compact",
             "rate_strongly_convex"]
    if K < 1 or not np.any(arr["ell"][:K] >= 1):
        why = "no line-search rows (prefixed-step trace or single-iterate run)"
        return AuditReport(checks=tuple(_skip(n, why) for n in names))
    if tc is None:
        return AuditReport(checks=tuple(_skip(n, "no theory constants supplied") for n in names))
    f_star = problem.f_star if problem is not None else None
    if f_star is None:
        return AuditReport(checks=tuple(_skip(n, "no known optimal value") for n in names))

    if x1 is None and report.records[0].x is not None:
        x1 = report.records[0].x
    x_star = problem.x_star if problem is not None else None

    beta, c, rho = cfg.beta, cfg.c, cfg.rho
    Gamma = tc.gamma_big
    gap = np.minimum.accumulate(arr["f"][:K]) - f_star  # best gap over iterates 1..N
    Ns = np.arange(1, K + 1, dtype=np.int64)
    gamma = arr["gamma"]
    sum_sq = np.cumsum(gamma[:K] ** 2)
    sum_shift = np.cumsum(gamma[1 : K + 1])

    checks: list[CheckResult] = []

    if x1 is None or x_star is None:
        why = "needs x1 and a known optimum"
        checks.append(_skip("rate_general", why))
        checks.append(_skip("rate_sqrt_log", why))
        checks.append(_skip("rate_tail", why))
    else:
        dist_sq = float(np.dot(x1 - x_star, x1 - x_star))
        numer = dist_sq + (beta / rho) * c * sum_sq
        checks.append(_worst("rate_general", gap, numer / (Gamma * sum_shift), Ns))
        if isinstance(cfg.gamma, SqrtInverse):
            bound = (4.0 / Gamma) * (
                dist_sq + beta / rho * c + beta / rho * c * np.log(Ns)
            ) / np.sqrt(Ns)
            checks.append(_worst("rate_sqrt_log", gap, bound, Ns))
        else:
            checks.append(_skip("rate_sqrt_log", "gamma is not the sqrt-inverse kind"))
        checks.append(
            _worst("rate_tail", gap, numer / (Gamma * Ns * gamma[1 : K + 1]), Ns)
        )

    D = diameter_sq(problem.cset) if problem is not None else None
    if D is None:
        checks.append(_skip("rate_compact", "constraint set is unbounded"))
    elif not (isinstance(cfg.gamma, SqrtInverse) and cfg.gamma.zeta == 1.0):
        checks.append(_skip("rate_compact", "needs the sqrt-inverse gamma with zeta = 1"))
    elif K < 2:
        checks.append(_skip("rate_compact", "needs at least two steps"))
    else:
        Ns2 = Ns[1:]
        bound = 4.0 * (D + beta * c / rho * math.log(3.0)) / (Gamma * np.sqrt(Ns2 + 2.0))
        checks.append(_worst("rate_compact", gap[1:], bound, Ns2))

    sigma = problem.sigma if problem is not None else 0.0
    seq = cfg.gamma
    if sigma <= 0.0:
        checks.append(_skip("rate_strongly_convex", "objective is not strongly convex"))
    elif not isinstance(seq, StronglyConvexHarmonic):
        checks.append(_skip("rate_strongly_convex", "gamma is not the harmonic kind"))
    elif (
        abs(seq.sigma - sigma) > REL_SLACK * max(1.0, sigma)
        or abs(seq.beta - beta) > REL_SLACK
        or abs(seq.big_theta - tc.theta) > REL_SLACK * max(1.0, tc.theta)
    ):
        checks.append(_skip("rate_strongly_convex", "gamma parameters do not match the run"))
    else:
        bound = (8.0 * beta * c) / (rho * sigma * beta * tc.theta * Gamma * (Ns + 1.0))
        checks.append(_worst("rate_strongly_convex", gap, bound, Ns))

    return AuditReport(checks=tuple(checks))


# ----- summation lemmas -----


def check_sum_lemmas(a: float, d: float, N: int) -> tuple[bool, bool | None]:
    """Direct-summation check of the two harmonic-vs-sqrt sum bounds.

    First (N >= 1):  (d + a*sum_{k<=N} 1/k) / sum_{k<=N} 1/sqrt(k+1)
                       <= 4*(d + a + a*ln N) / sqrt(N)
    Second (N >= 2): same shape with both sums over k = ceil(N/2)..N and
                     right side 4*(d + a*ln 3) / sqrt(N+2); None when N < 2.
    """
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    if a < 0.0 or d < 0.0:
        raise ValueError("a and d must be nonnegative")
    k = np.arange(1, N + 1, dtype=np.float64)
    lhs1 = (d + a * float((1.0 / k).sum())) / float((1.0 / np.sqrt(k + 1.0)).sum())
    rhs1 = 4.0 * (d + a + a * math.log(N)) / math.sqrt(N)
    ok1 = (lhs1 - rhs1) / max(1.0, abs(lhs1), abs(rhs1)) <= REL_SLACK
    if N < 2:
        return bool(ok1), None
    start = math.ceil(N / 2)
    kh = np.arange(start, N + 1, dtype=np.float64)
    lhs2 = (d + a * float((1.0 / kh).sum())) / float((1.0 / np.sqrt(kh + 1.0)).sum())
    rhs2 = 4.0 * (d + a * math.log(3.0)) / math.sqrt(N + 2.0)
    ok2 = (lhs2 - rhs2) / max(1.0, abs(lhs2), abs(rhs2)) <= REL_SLACK
    return bool(ok1), bool(ok2)


@dataclass(frozen=True)
class SumLemmaSweep:
    all_hold: bool
    worst_violation_full: float
    worst_violation_half: float
    worst_case_full: tuple[float, float, int]
    worst_case_half: tuple[float, float, int]


def sum_lemma_sweep(a_values, d_values, n_max: int) -> SumLemmaSweep:
    """Vectorized check_sum_lemmas over every N in 2..n_max and each (a, d)."""
    if n_max < 2:
        raise ValueError(f"need n_max >= 2, got {n_max}")
    k = np.arange(1, n_max + 1, dtype=np.float64)
    H = np.cumsum(1.0 / k)
    S = np.cumsum(1.0 / np.sqrt(k + 1.0))
    Ns = np.arange(2, n_max + 1, dtype=np.int64)
    starts = (Ns + 1) // 2  # ceil(N/2)
    H_half = H[Ns - 1] - np.where(starts >= 2, H[starts - 2], 0.0)
    S_half = S[Ns - 1] - np.where(starts >= 2, S[starts - 2], 0.0)

    worst_full = -math.inf
    worst_half = -math.inf
    case_full = case_half = (math.nan, math.nan, 0)
    for a in a_values:
        for d in d_values:
            lhs = (d + a * H[Ns - 1]) / S[Ns - 1]
            rhs = 4.0 * (d + a + a * np.log(Ns)) / np.sqrt(Ns)
            viol = (lhs - rhs) / np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
            i = int(np.argmax(viol))
            if viol[i] > worst_full:
                worst_full, case_full = float(viol[i]), (float(a), float(d), int(Ns[i]))
            lhs2 = (d + a * H_half) / S_half
            rhs2 = 4.0 * (d + a * math.log(3.0)) / np.sqrt(Ns + 2.0)
            viol2 = (lhs2 - rhs2) / np.maximum(1.0, np.maximum(np.abs(lhs2), np.abs(rhs2)))
            j = int(np.argmax(viol2))
            if viol2[j] > worst_half:
                worst_half, case_half = float(viol2[j]), (float(a), float(d), int(Ns[j]))
    return SumLemmaSweep(
        all_hold=(worst_full <= REL_SLACK and worst_half <= REL_SLACK),
        worst_violation_full=worst_full,
        worst_violation_half=worst_half,
        worst_case_full=case_full,
        worst_case_half=case_half,
    )
