"""Core types for the non-monotone projected subgradient toolkit.

A point is a finite 1-D float64 numpy array. Iteration and gamma indices are
1-based throughout: gamma_value(seq, 1) is the first slack value and the first
trace row carries k=1.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "ConfigError",
    "OracleError",
    "BacktrackFailureError",
    "TheoryRegimeWarning",
    "as_point",
    "SqrtInverse",
    "PowerInverse",
    "StronglyConvexHarmonic",
    "ExplicitTable",
    "GammaSequence",
    "gamma_value",
    "gamma_values",
    "GammaDiagnostics",
    "sequence_diagnostics",
    "SolverConfig",
    "validate_config",
    "config_to_json",
    "config_from_json",
    "config_to_keyvalues",
    "config_from_keyvalues",
    "IterationRecord",
    "RunReport",
    "TERMINATION_MAX_ITERS",
    "TERMINATION_ZERO_SUBGRADIENT",
    "TERMINATION_BACKTRACK_FAILURE",
]


class ConfigError(ValueError):
    """Invalid solver or sequence parameters."""


class OracleError(RuntimeError):
    """An objective evaluation returned a non-finite value."""


class BacktrackFailureError(RuntimeError):
    """The backtracking search exhausted its trial cap."""


class TheoryRegimeWarning(UserWarning):
    """rho <= 1/2 leaves the complexity constants non-positive."""


TERMINATION_MAX_ITERS = "max_iters"
TERMINATION_ZERO_SUBGRADIENT = "zero_subgradient"
TERMINATION_BACKTRACK_FAILURE = "backtrack_failure"


def as_point(x) -> np.ndarray:
    """Coerce to a finite contiguous float64 vector."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"point must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite entries")
    return arr


# ----- gamma sequences -----
#
# All kinds are positive and non-increasing in k. Values are defined for
# k >= 1; an ExplicitTable raises past its end instead of extending silently.


@dataclass(frozen=True)
class SqrtInverse:
    """gamma_k = zeta / sqrt(k)."""

    zeta: float = 1.0

    def __post_init__(self):
        if not (self.zeta > 0.0 and math.isfinite(self.zeta)):
            raise ConfigError(f"zeta must be positive and finite, got {self.zeta}")


@dataclass(frozen=True)
class PowerInverse:
    """gamma_k = zeta / k**(1 - theta/2) with theta in (0, 1)."""

    zeta: float
    theta: float

    def __post_init__(self):
        if not (self.zeta > 0.0 and math.isfinite(self.zeta)):
            raise ConfigError(f"zeta must be positive and finite, got {self.zeta}")
        if not (0.0 < self.theta < 1.0):
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")


@dataclass(frozen=True)
class StronglyConvexHarmonic:
    """gamma_k = 2 / (sigma * beta * big_theta * k), the schedule paired with
    sigma-strongly-convex objectives."""

    sigma: float
    beta: float
    big_theta: float

    def __post_init__(self):
        for name in ("sigma", "beta", "big_theta"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class ExplicitTable:
    """A finite table of slack values; indexing past the end is an error."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) == 0:
            raise ConfigError("gamma table must be non-empty")
        arr = np.asarray(vals)
        if not np.all(np.isfinite(arr)) or not np.all(arr > 0.0):
            raise ConfigError("gamma table values must be positive and finite")
        if np.any(np.diff(arr) > 0.0):
            raise ConfigError("gamma table must be non-increasing")


GammaSequence = Union[SqrtInverse, PowerInverse, StronglyConvexHarmonic, ExplicitTable]


def gamma_value(seq: GammaSequence, k: int) -> float:
    """gamma_k for 1-based k."""
    if k < 1:
        raise ValueError(f"gamma index must be >= 1, got {k}")
    if isinstance(seq, SqrtInverse):
        return seq.zeta / math.sqrt(k)
    if isinstance(seq, PowerInverse):
        return seq.zeta / k ** (1.0 - seq.theta / 2.0)
    if isinstance(seq, StronglyConvexHarmonic):
        return 2.0 / (seq.sigma * seq.beta * seq.big_theta * k)
    if isinstance(seq, ExplicitTable):
        if k > len(seq.values):
            raise ValueError(
                f"gamma table has {len(seq.values)} entries, index {k} is out of range"
            )
        return seq.values[k - 1]
    raise TypeError(f"not a gamma sequence: {seq!r}")


def gamma_values(seq: GammaSequence, n: int) -> np.ndarray:
    """Vectorized [gamma_1, ..., gamma_n]."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    k = np.arange(1, n + 1, dtype=np.float64)
    if isinstance(seq, SqrtInverse):
        return seq.zeta / np.sqrt(k)
    if isinstance(seq, PowerInverse):
        return seq.zeta / k ** (1.0 - seq.theta / 2.0)
    if isinstance(seq, StronglyConvexHarmonic):
        return 2.0 / (seq.sigma * seq.beta * seq.big_theta * k)
    if isinstance(seq, ExplicitTable):
        if n > len(seq.values):
            raise ValueError(
                f"gamma table has {len(seq.values)} entries, index {n} is out of range"
            )
        return np.asarray(seq.values[:n], dtype=np.float64)
    raise TypeError(f"not a gamma sequence: {seq!r}")


@dataclass(frozen=True)
class GammaDiagnostics:
    """Finite-N surrogates for the summability conditions a slack sequence
    must satisfy for the min-gap to vanish.

    r3: sum(gamma_k^2, k<=N) / sum(gamma_{k+1}, k<=N)   -> 0 wanted
    r4: sum(gamma_k^2, k<=N) / (N * gamma_{N+1})        -> 0 wanted
    s5: sum(gamma_k^2, k<=N)                            bounded wanted
    s6: sum(gamma_k,   k<=N)                            divergent wanted
    """

    N: int
    r3: float
    r4: float
    s5: float
    s6: float


def sequence_diagnostics(seq: GammaSequence, N: int) -> GammaDiagnostics:
    if N < 1:
        raise ValueError(f"need N >= 1, got {N}")
    g = gamma_values(seq, N + 1)  # needs gamma_{N+1}
    sq = g[:N] ** 2
    s5 = float(sq.sum())
    s6 = float(g[:N].sum())
    shifted = float(g[1 : N + 1].sum())
    r3 = s5 / shifted
    r4 = s5 / (N * float(g[N]))
    return GammaDiagnostics(N=N, r3=r3, r4=r4, s5=s5, s6=s6)


# ----- solver configuration -----


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the non-monotone projected subgradient method.

    c > 0 caps the accepted trial size at c*gamma_k; beta in (0,1) is the
    backtracking ratio; rho in (0,1) the sufficient-decrease factor; alpha1 > 0
    the initial trial size. rho > 1/2 is the regime where the complexity
    constants are positive; `theory_regime` records that.
    """

    c: float = 1.0
    beta: float = 0.9
    rho: float = 0.8
    alpha1: float = 0.1
    gamma: GammaSequence = field(default_factory=SqrtInverse)
    max_iters: int = 3000
    backtrack_cap: int = 500
    seed: int = 0

    @property
    def theory_regime(self) -> bool:
        return self.rho > 0.5


def validate_config(cfg: SolverConfig) -> SolverConfig:
    """Check every field, reporting all violations at once. Warns (without
    failing) when rho <= 1/2."""
    problems = []
    if not (cfg.c > 0.0 and math.isfinite(cfg.c)):
        problems.append(f"c must be positive and finite, got {cfg.c}")
    if not (0.0 < cfg.beta < 1.0):
        problems.append(f"beta must lie in (0, 1), got {cfg.beta}")
    if not (0.0 < cfg.rho < 1.0):
        problems.append(f"rho must lie in (0, 1), got {cfg.rho}")
    if not (cfg.alpha1 > 0.0 and math.isfinite(cfg.alpha1)):
        problems.append(f"alpha1 must be positive and finite, got {cfg.alpha1}")
    if not isinstance(cfg.max_iters, int) or cfg.max_iters < 1:
        problems.append(f"max_iters must be an integer >= 1, got {cfg.max_iters}")
    if not isinstance(cfg.backtrack_cap, int) or cfg.backtrack_cap < 1:
        problems.append(f"backtrack_cap must be an integer >= 1, got {cfg.backtrack_cap}")
    if not isinstance(
        cfg.gamma, (SqrtInverse, PowerInverse, StronglyConvexHarmonic, ExplicitTable)
    ):
        problems.append(f"gamma is not a recognized sequence: {cfg.gamma!r}")
    if problems:
        raise ConfigError("invalid config: " + "; ".join(problems))
    if cfg.rho <= 0.5:
        warnings.warn(
            f"rho = {cfg.rho} <= 1/2: complexity constants are non-positive, "
            "rate audits will not apply",
            TheoryRegimeWarning,
            stacklevel=2,
        )
    return cfg


_GAMMA_KINDS = {
    SqrtInverse: "sqrt_inverse",
    PowerInverse: "power_inverse",
    StronglyConvexHarmonic: "strongly_convex_harmonic",
    ExplicitTable: "table",
}


def _gamma_to_items(seq: GammaSequence) -> dict:
    items = {"gamma.kind": _GAMMA_KINDS[type(seq)]}
    if isinstance(seq, SqrtInverse):
        items["gamma.zeta"] = seq.zeta
    elif isinstance(seq, PowerInverse):
        items["gamma.zeta"] = seq.zeta
        items["gamma.theta"] = seq.theta
    elif isinstance(seq, StronglyConvexHarmonic):
        items["gamma.sigma"] = seq.sigma
        items["gamma.beta"] = seq.beta
        items["gamma.big_theta"] = seq.big_theta
    else:
        items["gamma.values"] = list(seq.values)
    return items


def _gamma_from_items(items: dict) -> GammaSequence:
    kind = items.get("gamma.kind")
    if kind == "sqrt_inverse":
        return SqrtInverse(zeta=float(items.get("gamma.zeta", 1.0)))
    if kind == "power_inverse":
        return PowerInverse(
            zeta=float(items["gamma.zeta"]), theta=float(items["gamma.theta"])
        )
    if kind == "strongly_convex_harmonic":
        return StronglyConvexHarmonic(
            sigma=float(items["gamma.sigma"]),
            beta=float(items["gamma.beta"]),
            big_theta=float(items["gamma.big_theta"]),
        )
    if kind == "table":
        values = items["gamma.values"]
        if isinstance(values, str):
            values = [float(v) for v in values.split(",")]
        return ExplicitTable(values=tuple(float(v) for v in values))
    raise ConfigError(f"unknown gamma.kind: {kind!r}")


def _config_items(cfg: SolverConfig) -> dict:
    items = {
        "c": cfg.c,
        "beta": cfg.beta,
        "rho": cfg.rho,
        "alpha1": cfg.alpha1,
        "max_iters": cfg.max_iters,
        "backtrack_cap": cfg.backtrack_cap,
        "seed": cfg.seed,
    }
    items.update(_gamma_to_items(cfg.gamma))
    return items


def _config_from_items(items: dict) -> SolverConfig:
    cfg = SolverConfig(
        c=float(items.get("c", 1.0)),
        beta=float(items.get("beta", 0.9)),
        rho=float(items.get("rho", 0.8)),
        alpha1=float(items.get("alpha1", 0.1)),
        gamma=_gamma_from_items(items) if "gamma.kind" in items else SqrtInverse(),
        max_iters=int(items.get("max_iters", 3000)),
        backtrack_cap=int(items.get("backtrack_cap", 500)),
        seed=int(items.get("seed", 0)),
    )
    return validate_config(cfg)


def config_to_json(cfg: SolverConfig) -> str:
    return json.dumps(_config_items(cfg), sort_keys=True, indent=2)


def config_from_json(text: str) -> SolverConfig:
    return _config_from_items(json.loads(text))


def config_to_keyvalues(cfg: SolverConfig) -> str:
    """`key = value` lines; the table kind writes values comma-separated."""
    lines = []
    for key, value in sorted(_config_items(cfg).items()):
        if isinstance(value, list):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_from_keyvalues(text: str) -> SolverConfig:
    items: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        items[key.strip()] = value.strip()
    return _config_from_items(items)


# ----- run records -----


@dataclass(frozen=True)
class IterationRecord:
    """One visited iterate.

    Rows where a line-search step was taken carry ell >= 1 and satisfy
    alpha_next = beta**(ell-1) * alpha and step = beta * alpha_next. The final
    landed iterate (and every row of a prefixed-step run) uses the ell = 0
    sentinel; prefixed rows store the applied step size in both alpha and step.
    x is None for traces re-read from CSV, which does not serialize iterates.
    """

    k: int
    x: np.ndarray | None
    f: float
    gamma: float
    alpha: float
    ell: int
    step: float
    snorm: float
    alpha_next: float


@dataclass(frozen=True)
class RunReport:
    """A full run: every visited iterate plus how the run ended.

    f_best is the minimum recorded objective value and it_best the first k
    attaining it. termination is one of the TERMINATION_* constants ("unknown"
    only for traces reconstructed from CSV).
    """

    records: tuple[IterationRecord, ...]
    f_best: float
    it_best: int
    termination: str

    @property
    def n_steps(self) -> int:
        return sum(1 for r in self.records if r.ell >= 1)


def build_report(records: list[IterationRecord], termination: str) -> RunReport:
    if not records:
        raise ValueError("a run must visit at least one iterate")
    fs = [r.f for r in records]
    best = min(fs)
    it_best = records[fs.index(best)].k
    return RunReport(
        records=tuple(records), f_best=best, it_best=it_best, termination=termination
    )
