"""Command-line harness.

Subcommands: gen (write an instance file), run (solve one instance, write a
trace and a summary), bench (run a plan of configs x methods x seeds, write
per-config tables), check (audit a trace against its instance).

Exit codes: 0 success, 1 at least one audit check failed, 2 usage or input
errors. All outputs are deterministic for fixed inputs and written atomically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import statistics
import sys

import numpy as np

from .analysis import (
    audit_rate_bounds,
    audit_report_to_json,
    audit_stepwise,
    constants,
    merge_reports,
)
from .core import (
    ConfigError,
    SolverConfig,
    SqrtInverse,
    ExplicitTable,
    config_from_json,
    config_from_keyvalues,
    validate_config,
)
from .problems import (
    Ball,
    Box,
    WholeSpace,
    _atomic_write,
    gen_fermat_weber,
    gen_max_affine,
    lipschitz_bound,
    load_instance,
    make_problem,
    plant_optimum_max_affine,
    project,
    read_anchor_csv,
    save_instance,
    weiszfeld,
    FermatWeberInstance,
)
from .solver import (
    ConstantLength,
    ConstantStep,
    NonsummableDiminishing,
    SquareSummable,
    read_trace_csv,
    solve_nonmonotone,
    solve_prefixed,
    write_trace_csv,
)

METHODS = ("nonmonotone", "constant", "fixedlength", "nonsum", "sqrsum")

# default constants of the prefixed rules; a bench plan can override them
STEP_CONSTANTS = {"constant": 0.1, "fixedlength": 0.2, "nonsum": 0.1, "sqrsum": 0.5}

_RULES = {
    "constant": ConstantStep,
    "fixedlength": ConstantLength,
    "nonsum": NonsummableDiminishing,
    "sqrsum": SquareSummable,
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmsubgrad", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    gsub = g.add_subparsers(dest="family", required=True)

    ga = gsub.add_parser("maxaffine", help="max-of-affine instance")
    ga.add_argument("--seed", type=int, default=0)
    ga.add_argument("--n", type=int, required=True)
    ga.add_argument("--m", type=int, required=True)
    ga.add_argument("--planted", action="store_true",
                    help="plant a certified optimum (x_star, f_star)")
    ga.add_argument("--active", type=int, default=None,
                    help="planted active piece count (default n+1)")
    ga.add_argument("--spread", type=float, default=1.0,
                    help="planted distance of x_star from the origin")
    ga.add_argument("--active-scale", type=float, default=1.0,
                    help="multiplier on the planted active gradients")
    ga.add_argument("--sigma", type=float, default=0.0,
                    help="strong-convexity modulus of the added quadratic")
    _add_set_flags(ga)
    ga.add_argument("--out", required=True)

    gf = gsub.add_parser("fermatweber", help="weighted-distance-sum instance")
    gf.add_argument("--seed", type=int, default=0)
    gf.add_argument("--n", type=int, default=2)
    gf.add_argument("--m", type=int, default=27)
    gf.add_argument("--scale", type=float, default=10.0)
    gf.add_argument("--from-csv", default=None,
                    help="read anchors from lat,lon rows (integer parts, sign-flipped)")
    _add_set_flags(gf)
    gf.add_argument("--out", required=True)

    r = sub.add_parser("run", help="solve one instance, write trace + summary")
    r.add_argument("instance")
    r.add_argument("--method", choices=METHODS, default="nonmonotone")
    r.add_argument("--zeta", type=float, default=None, help="gamma_k = zeta/sqrt(k)")
    r.add_argument("--c", type=float, default=None)
    r.add_argument("--beta", type=float, default=None)
    r.add_argument("--rho", type=float, default=None)
    r.add_argument("--alpha1", type=float, default=None)
    r.add_argument("--backtrack-cap", type=int, default=None)
    r.add_argument("--iters", type=int, default=None)
    r.add_argument("--seed", type=int, default=None, help="recorded in the config")
    r.add_argument("--step-const", type=float, default=None,
                   help="constant of the prefixed rule (method-specific default)")
    r.add_argument("--config", default=None,
                   help="JSON or key=value config file; explicit flags override it")
    r.add_argument("--out", required=True, help="trace path; summary lands beside it")
    r.add_argument("--format", choices=("csv", "json"), default="csv")

    b = sub.add_parser("bench", help="run a benchmark plan")
    b.add_argument("plan")
    b.add_argument("--out-dir", default=None, help="overrides the plan's out_dir")

    k = sub.add_parser("check", help="audit a trace against its instance")
    k.add_argument("trace")
    k.add_argument("instance")
    k.add_argument("--c", type=float, default=1.0)
    k.add_argument("--beta", type=float, default=0.9)
    k.add_argument("--rho", type=float, default=0.8)
    k.add_argument("--zeta", type=float, default=None,
                   help="declare gamma_k = zeta/sqrt(k); inferred from the trace otherwise")
    k.add_argument("--out", default=None, help="write the audit report JSON here")
    return p


def _add_set_flags(sp) -> None:
    sp.add_argument("--set", choices=("rn", "box", "ball"), default="rn")
    sp.add_argument("--radius", type=float, default=10.0, help="ball radius")
    sp.add_argument("--box-lo", type=float, default=-10.0, help="box lower bound (scalar)")
    sp.add_argument("--box-hi", type=float, default=10.0, help="box upper bound (scalar)")


def _build_set(args, n: int):
    if args.set == "rn":
        return WholeSpace()
    if args.set == "ball":
        return Ball(center=np.zeros(n), radius=args.radius)
    return Box(lo=np.full(n, args.box_lo), hi=np.full(n, args.box_hi))


# ----- gen -----


def cmd_gen(args) -> int:
    if args.family == "maxaffine":
        if args.planted:
            inst = plant_optimum_max_affine(
                args.seed, args.n, args.m,
                active_count=args.active, spread=args.spread, sigma=args.sigma,
                active_scale=args.active_scale,
            )
        else:
            inst = gen_max_affine(args.seed, args.n, args.m, sigma=args.sigma)
        cset = _build_set(args, args.n)
        if inst.x_star is not None and not _feasible(cset, inst.x_star):
            raise UsageError(
                "planted optimum lies outside the requested set; "
                "enlarge the set or drop --planted"
            )
        save_instance(args.out, inst, cset)
    else:
        if args.from_csv is not None:
            anchors = read_anchor_csv(args.from_csv)
            if args.n != anchors.shape[1] and args.n != 2:
                raise UsageError(
                    f"--n {args.n} conflicts with csv width {anchors.shape[1]}"
                )
            inst = FermatWeberInstance(anchors=anchors, weights=np.ones(anchors.shape[0]))
        else:
            inst = gen_fermat_weber(args.seed, args.n, args.m, scale=args.scale)
        cset = _build_set(args, inst.n)
        save_instance(args.out, inst, cset)
    print(args.out)
    return 0


def _feasible(cset, x) -> bool:
    from .problems import contains

    return contains(cset, x)


# ----- run -----


def _run_config(args) -> SolverConfig:
    base = None
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            base = config_from_json(text)
        except json.JSONDecodeError:
            base = config_from_keyvalues(text)
    c = args.c if args.c is not None else (base.c if base else 1.0)
    beta = args.beta if args.beta is not None else (base.beta if base else 0.9)
    rho = args.rho if args.rho is not None else (base.rho if base else 0.8)
    alpha1 = args.alpha1 if args.alpha1 is not None else (base.alpha1 if base else 0.1)
    cap = args.backtrack_cap if args.backtrack_cap is not None else (
        base.backtrack_cap if base else 500
    )
    iters = args.iters if args.iters is not None else (base.max_iters if base else 3000)
    seed = args.seed if args.seed is not None else (base.seed if base else 0)
    if args.zeta is not None:
        gamma = SqrtInverse(zeta=args.zeta)
    elif base is not None:
        gamma = base.gamma
    else:
        gamma = SqrtInverse()
    return validate_config(SolverConfig(
        c=c, beta=beta, rho=rho, alpha1=alpha1, gamma=gamma,
        max_iters=iters, backtrack_cap=cap, seed=seed,
    ))


def _make_rule(method: str, const: float | None):
    cls = _RULES[method]
    return cls() if const is None else cls(a=const)


def cmd_run(args) -> int:
    inst, cset = load_instance(args.instance)
    problem = make_problem(inst, cset)
    cfg = _run_config(args)
    if args.method == "nonmonotone":
        report = solve_nonmonotone(problem, cfg)
    else:
        report = solve_prefixed(problem, _make_rule(args.method, args.step_const), cfg.max_iters)
    f_star = problem.f_star
    if args.format == "csv":
        write_trace_csv(report, args.out, f_star=f_star)
    else:
        _write_trace_json(report, args.out, f_star=f_star)
    summary = {
        "method": args.method,
        "f_best": report.f_best,
        "it_best": report.it_best,
        "termination": report.termination,
        "n_rows": len(report.records),
    }
    if f_star is not None:
        summary["f_star"] = f_star
        summary["gap"] = report.f_best - f_star
    spath = _summary_path(args.out)
    _atomic_write(spath, json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(args.out)
    print(spath)
    return 0


def _summary_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".summary.json"


def _write_trace_json(report, path: str, f_star=None) -> None:
    rows = []
    best = math.inf
    for r in report.records:
        best = min(best, r.f)
        row = {"k": r.k, "f": r.f, "alpha": r.alpha, "ell": r.ell,
               "gamma": r.gamma, "snorm": r.snorm}
        if f_star is not None:
            row["fbest_gap"] = best - f_star
        rows.append(row)
    _atomic_write(path, json.dumps(rows, sort_keys=True, indent=2) + "\n")


# ----- bench -----


def cmd_bench(args) -> int:
    with open(args.plan, "r", encoding="utf-8") as fh:
        plan = json.load(fh)
    problem_kind = plan.get("problem", "maxaffine")
    if problem_kind not in ("maxaffine", "fermatweber"):
        raise UsageError(f"unknown problem kind {problem_kind!r}")
    methods = plan.get("methods", list(METHODS))
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    solver_over = plan.get("solver", {})
    step_over = dict(STEP_CONSTANTS)
    step_over.update(plan.get("step_constants", {}))
    out_dir = args.out_dir or plan.get("out_dir")
    if not out_dir:
        raise UsageError("no output directory: pass --out-dir or set out_dir in the plan")
    os.makedirs(out_dir, exist_ok=True)
    configs = plan.get("configs")
    if not configs:
        raise UsageError("plan has no configs")
    written = []
    for conf in configs:
        written.append(_bench_one_config(problem_kind, conf, methods, solver_over, step_over, out_dir))
    for path in written:
        print(path)
    return 0


def _bench_config_fields(conf) -> tuple[int, int, float, int, list[int]]:
    try:
        n = int(conf["n"])
        m = int(conf["m"])
        zeta = float(conf.get("zeta", 1.0))
        iters = int(conf["iters"])
        seeds = [int(s) for s in conf["seeds"]]
    except KeyError as exc:
        raise UsageError(f"config is missing field {exc}")
    if not seeds:
        raise UsageError("config has an empty seed list")
    return n, m, zeta, iters, seeds


def _bench_one_config(kind, conf, methods, solver_over, step_over, out_dir) -> str:
    n, m, zeta, iters, seeds = _bench_config_fields(conf)
    cfg = validate_config(SolverConfig(
        c=float(solver_over.get("c", 1.0)),
        beta=float(solver_over.get("beta", 0.9)),
        rho=float(solver_over.get("rho", 0.8)),
        alpha1=float(solver_over.get("alpha1", 0.1)),
        gamma=SqrtInverse(zeta=zeta),
        max_iters=iters,
        backtrack_cap=int(solver_over.get("backtrack_cap", 500)),
    ))
    fw = kind == "fermatweber"
    x_cols = [f"x{i+1}" for i in range(n)] if fw else []
    header = ["method", "seed"] + x_cols + ["gap", "it_best", "status"]
    lines = [",".join(header)]
    for method in methods:
        gaps, bests = [], []
        for seed in seeds:
            try:
                problem, f_star = _bench_problem(kind, conf, seed, n, m)
                if method == "nonmonotone":
                    report = solve_nonmonotone(problem, cfg)
                else:
                    report = solve_prefixed(
                        problem, _RULES[method](a=float(step_over[method])), iters
                    )
                gap = report.f_best - f_star
                cells = [method, str(seed)]
                if fw:
                    xb = _best_iterate(report)
                    cells += [repr(float(v)) for v in xb]
                cells += [repr(float(gap)), str(report.it_best), report.termination]
                gaps.append(gap)
                bests.append(report.it_best)
            except Exception as exc:  # a failed run becomes a row, bench continues
                cells = [method, str(seed)] + ["nan"] * len(x_cols)
                cells += ["nan", "0", f"error:{type(exc).__name__}"]
            lines.append(",".join(cells))
        if gaps:
            cells = [method, "median"] + ["nan"] * len(x_cols)
            cells += [
                repr(float(statistics.median(gaps))),
                repr(float(statistics.median(bests))),
                "aggregate",
            ]
            lines.append(",".join(cells))
    name = f"bench_{kind}_n{n}_m{m}.csv"
    path = os.path.join(out_dir, name)
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _bench_problem(kind, conf, seed, n, m):
    if kind == "maxaffine":
        inst = plant_optimum_max_affine(
            seed, n, m,
            active_count=conf.get("active"),
            spread=float(conf.get("spread", 1.0)),
            sigma=float(conf.get("sigma", 0.0)),
            active_scale=float(conf.get("active_scale", 1.0)),
        )
        return make_problem(inst), inst.f_star
    if "anchors_csv" in conf:
        anchors = read_anchor_csv(conf["anchors_csv"])
        inst = FermatWeberInstance(anchors=anchors, weights=np.ones(anchors.shape[0]))
    else:
        inst = gen_fermat_weber(seed, n, m, scale=float(conf.get("anchor_scale", 10.0)))
    _, f_star = weiszfeld(inst)
    problem = make_problem(inst)
    return ProblemWithStar(problem, f_star), f_star


class ProblemWithStar:
    """Wrap a problem with an externally computed optimal value."""

    def __init__(self, problem, f_star):
        self._p = problem
        self.n = problem.n
        self.value = problem.value
        self.eval = problem.eval
        self.cset = problem.cset
        self.sigma = problem.sigma
        self.L = problem.L
        self.x_star = problem.x_star
        self.f_star = f_star

    def project(self, y):
        return self._p.project(y)

    def contains(self, x, tol=1e-9):
        return self._p.contains(x, tol)


def _best_iterate(report):
    for r in report.records:
        if r.k == report.it_best:
            return r.x
    raise AssertionError("it_best not found in records")


# ----- check -----


def _infer_gamma(gammas: np.ndarray, zeta_flag: float | None):
    if zeta_flag is not None:
        return SqrtInverse(zeta=zeta_flag)
    finite = gammas[np.isfinite(gammas)]
    if finite.size == 0:
        return SqrtInverse()
    k = np.arange(1, len(gammas) + 1, dtype=np.float64)
    z = gammas * np.sqrt(k)
    if np.all(np.isfinite(z)) and np.ptp(z) <= 1e-9 * max(1.0, abs(float(z[0]))):
        return SqrtInverse(zeta=float(gammas[0]))
    try:
        return ExplicitTable(values=tuple(float(g) for g in gammas))
    except ConfigError:
        return SqrtInverse()  # corrupt gammas; the audits will flag them


def cmd_check(args) -> int:
    report, _ = read_trace_csv(args.trace)
    inst, cset = load_instance(args.instance)
    problem = make_problem(inst, cset)
    gammas = np.array([r.gamma for r in report.records])
    gamma_seq = _infer_gamma(gammas, args.zeta)
    cfg = SolverConfig(
        c=args.c, beta=args.beta, rho=args.rho,
        gamma=gamma_seq, max_iters=max(1, len(report.records) - 1),
    )
    tc = None
    if problem.L is not None and 0.5 < args.rho < 1.0:
        tc = constants(args.rho, args.beta, problem.L, c=args.c)
    x1 = project(cset, np.zeros(problem.n))  # the default start convention
    merged = merge_reports(
        audit_stepwise(report, problem, cfg, tc),
        audit_rate_bounds(report, problem, cfg, tc, x1=x1),
    )
    for ch in merged.checks:
        loc = f" (worst at k={ch.worst_index})" if ch.worst_index is not None else ""
        why = f" [{ch.detail}]" if ch.status == "skipped" and ch.detail else ""
        print(f"{ch.name}: {ch.status}{loc}{why}")
    if args.out:
        _atomic_write(args.out, audit_report_to_json(merged) + "\n")
    if merged.passed:
        print("audit passed")
        return 0
    print("audit FAILED")
    return 1


# ----- entry point -----


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        if args.command == "gen":
            return cmd_gen(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "check":
            return cmd_check(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
