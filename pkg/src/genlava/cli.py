"""``genlava`` command-line interface.

Exit codes: 0 success, 2 usage or validation error, 3 numerical degeneracy,
4 file-system error.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark as bench
from .gcm import DegenerateStatisticError, Fixed, gcm_edge_test
from .glm import LinkSpec, format_float, read_dataset_csv, write_columns_csv, write_dataset_csv
from .penalty import PenaltyParams
from .selection import LASSO, LAVA, CvConfig, DegenerateDataError, cv_fit, parse_grid
from .simulate import DeltaMode, DesignKind, GammaDecay, ResponseKind, ScenarioConfig, draw_scenario
from .solver import Problem, SolverOptions

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return parse_grid(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--tol", type=_float, default=1e-8)
    p.add_argument("--kkt-tol", type=_float, default=1e-6)


def _add_cv_flags(p: argparse.ArgumentParser, n_lambda1: int) -> None:
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--n-lambda1", type=int, default=n_lambda1)
    p.add_argument("--lambda-min-ratio", type=_float, default=None,
                   help="default 1e-4 when n >= p, else 0.01")
    p.add_argument("--gamma-grid", type=_floats, default=None,
                   help="comma-separated gamma values (default p/50,...,p/10)")


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma-decay", choices=[e.value for e in GammaDecay],
                   default=GammaDecay.FACTORS.value,
                   help="whether loading sd nu/k decays over factors or over variables")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genlava", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="plain-text key=value file; flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated dataset and its truth")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--nu", type=_float, default=1.0)
    p.add_argument("--design", choices=[e.value for e in DesignKind], default="toeplitz")
    p.add_argument("--response", choices=[e.value for e in ResponseKind], default="logistic")
    p.add_argument("--b-effect", type=_float, default=0.0)
    p.add_argument("--delta-w-mode", choices=[e.value for e in DeltaMode], default="unit-ones")
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data.csv")
    p.add_argument("--truth", default=None, help="default: <out stem>.truth.csv")
    _add_scenario_flags(p)

    p = sub.add_parser("fit", help="fit at fixed penalties")
    p.add_argument("--data", required=True)
    p.add_argument("--link", choices=["identity", "logistic"], default="logistic")
    p.add_argument("--lambda1", type=_float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=_float)
    g.add_argument("--lambda2", type=_float, help="'inf' selects the Lasso")
    p.add_argument("--out", default="fit.csv")
    _add_solver_flags(p)

    p = sub.add_parser("cv", help="cross-validate and refit")
    p.add_argument("--data", required=True)
    p.add_argument("--link", choices=["identity", "logistic"], default="logistic")
    p.add_argument("--method", choices=[LAVA, LASSO], default=LAVA)
    _add_cv_flags(p, 100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="cv.csv")
    p.add_argument("--fit-out", default=None)
    _add_solver_flags(p)

    p = sub.add_parser("gcm-test", help="test the W -> Y edge given X")
    p.add_argument("--data", required=True)
    p.add_argument("--link-y", choices=["identity", "logistic"], default="logistic")
    p.add_argument("--link-w", choices=["identity", "logistic"], default="identity")
    p.add_argument("--alpha", type=_float, default=0.05)
    p.add_argument("--method", choices=[LAVA, LASSO], default=LAVA)
    p.add_argument("--lambda1-y", type=_float, help="fixed tuning instead of CV")
    p.add_argument("--gamma-y", type=_float)
    p.add_argument("--lambda1-w", type=_float)
    p.add_argument("--gamma-w", type=_float)
    _add_cv_flags(p, 100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="gcm.csv")
    _add_solver_flags(p)

    p = sub.add_parser("bench-estimation", help="estimation-error study")
    p.add_argument("--n", type=int, default=800)
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--designs", type=_strs, default=("toeplitz",))
    p.add_argument("--qs", type=_ints, default=(5,))
    p.add_argument("--nus", type=_floats, default=(1.0,))
    p.add_argument("--ss", type=_ints, default=(5,))
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--response", choices=["logistic", "linear"], default="logistic")
    p.add_argument("--methods", type=_strs, default=(bench.GENLAVA, bench.LASSO_METHOD))
    p.add_argument("--timing", action="store_true", help="record wall-clock seconds")
    _add_bench_common(p)
    _add_scenario_flags(p)

    p = sub.add_parser("bench-inference", help="size and power of the edge test")
    p.add_argument("--b-grid", type=_floats, default=(0.0, 0.03, 0.06, 0.1, 0.13, 0.16, 0.2))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--q", type=int, default=5)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--nu", type=_float, default=1.0)
    p.add_argument("--design", choices=[e.value for e in DesignKind], default="expdecay")
    p.add_argument("--delta-w-mode", choices=[e.value for e in DeltaMode], default="unit-ones")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--alpha", type=_float, default=0.05)
    p.add_argument("--methods", type=_strs, default=(bench.GENLAVA, bench.LASSO_METHOD))
    _add_bench_common(p)
    _add_scenario_flags(p)
    return parser


def _add_bench_common(p: argparse.ArgumentParser) -> None:
    _add_cv_flags(p, 25)
    p.add_argument("--cv-tol", type=_float, default=bench.CV_SOLVER_OPTIONS.tol)
    p.add_argument("--cv-kkt-tol", type=_float, default=bench.CV_SOLVER_OPTIONS.kkt_tol)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="0 = one per CPU")
    p.add_argument("--out", default="records.csv")
    p.add_argument("--summary-out", default=None, help="default: <out stem>.summary.csv")
    _add_solver_flags(p)


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}, line {i}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    values = read_config_file(known.config)
    sub = parser._subparsers._group_actions[0].choices[command]
    by_dest = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in values.items():
        action = by_dest.get(key)
        if action is None or key == "help":
            raise UsageError(f"unknown config key {key!r} for {command}")
        if action.nargs == 0:
            defaults[key] = text.lower() in ("1", "true", "yes", "on")
        else:
            try:
                value = action.type(text) if action.type else text
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: invalid choice {value!r}")
            defaults[key] = value
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _solver_options(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, tol=args.tol, kkt_tol=args.kkt_tol)


def _cv_config(args, seed=None) -> CvConfig:
    return CvConfig(n_folds=args.folds, n_lambda1=args.n_lambda1,
                    lambda_min_ratio=args.lambda_min_ratio, gamma_grid=args.gamma_grid,
                    seed=args.seed if seed is None else seed)


def _summary_path(args) -> Path:
    if args.summary_out:
        return Path(args.summary_out)
    out = Path(args.out)
    return out.with_name(out.stem + ".summary.csv")


def _write_fit(path, data, fit) -> None:
    write_columns_csv(path, ["feature", "beta_hat", "b_hat", "theta_hat"],
                      [list(data.names), fit.beta_hat, fit.b_hat, fit.theta_hat])


def _report_fit(fit) -> None:
    print(f"objective={format_float(fit.objective)}")
    print(f"kkt_residual={format_float(fit.kkt_residual)}")
    print(f"converged={str(fit.converged).lower()} iterations={fit.iterations}")


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig(n=args.n, p=args.p, q=args.q, s=args.s, nu=args.nu, design=args.design,
                         response=args.response, b_effect=args.b_effect, seed=args.seed,
                         delta_w_mode=args.delta_w_mode, gamma_decay=args.gamma_decay)
    sc = draw_scenario(cfg, args.rep)
    out = Path(args.out)
    truth = Path(args.truth) if args.truth else out.with_name(out.stem + ".truth.csv")
    write_dataset_csv(sc.data, out)
    rows = [("beta0", name, format_float(v)) for name, v in zip(sc.data.names, sc.beta0)]
    rows += [("support", str(k), sc.data.names[j]) for k, j in enumerate(sc.support)]
    rows += [("delta0", str(j), format_float(v)) for j, v in enumerate(sc.delta0)]
    if sc.beta_w is not None:
        rows += [("beta_w", name, format_float(v)) for name, v in zip(sc.data.names, sc.beta_w)]
        rows += [("delta_w", str(j), format_float(v)) for j, v in enumerate(sc.delta_w)]
    meta = dict(n=cfg.n, p=cfg.p, q=cfg.q, s=cfg.s, nu=format_float(cfg.nu),
                design=cfg.design.value, response=cfg.response.value,
                b_effect=format_float(cfg.b_effect), seed=cfg.seed, rep=args.rep,
                delta_w_mode=cfg.delta_w_mode.value, gamma_decay=cfg.gamma_decay.value)
    rows += [("meta", k, str(v)) for k, v in meta.items()]
    write_columns_csv(truth, ["section", "name", "value"], list(zip(*rows)))
    print(out)
    print(truth)
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    link = LinkSpec.from_name(args.link)
    data.check_link(link)
    if args.gamma is not None:
        params = PenaltyParams.from_gamma(args.lambda1, args.gamma)
    else:
        params = PenaltyParams(args.lambda1, args.lambda2)
    fit = Problem(data, link).fit(params, _solver_options(args))
    _write_fit(args.out, data, fit)
    _report_fit(fit)
    return EXIT_OK


def cmd_cv(args) -> int:
    data = read_dataset_csv(args.data)
    link = LinkSpec.from_name(args.link)
    fit, table = cv_fit(data, link, _cv_config(args), args.method, opts=_solver_options(args),
                        n_jobs=args.threads)
    table.to_csv(args.out)
    lam, gam = table.best
    print(f"best lambda1={format_float(lam)} gamma={format_float(gam)}")
    if args.fit_out:
        _write_fit(args.fit_out, data, fit)
    _report_fit(fit)
    return EXIT_OK


def cmd_gcm_test(args) -> int:
    data = read_dataset_csv(args.data)
    if data.w is None:
        raise UsageError("dataset has no 'w' column")
    fixed = [args.lambda1_y, args.gamma_y, args.lambda1_w, args.gamma_w]
    if any(v is not None for v in fixed):
        if any(v is None for v in fixed):
            raise UsageError("fixed tuning needs --lambda1-y, --gamma-y, --lambda1-w, --gamma-w")
        if args.method == LASSO:
            tuning = Fixed(PenaltyParams.lasso(args.lambda1_y), PenaltyParams.lasso(args.lambda1_w))
        else:
            tuning = Fixed(PenaltyParams.from_gamma(args.lambda1_y, args.gamma_y),
                           PenaltyParams.from_gamma(args.lambda1_w, args.gamma_w))
    else:
        tuning = _cv_config(args)
    res = gcm_edge_test(data, LinkSpec.from_name(args.link_y), LinkSpec.from_name(args.link_w),
                        tuning, alpha=args.alpha, method=args.method,
                        opts=_solver_options(args), n_jobs=args.threads)
    res.to_csv(args.out)
    print(f"T={format_float(res.t_stat)}")
    print(f"p_value={format_float(res.p_value)}")
    print(f"decision={'reject' if res.reject else 'do not reject'} at alpha={format_float(res.alpha)}")
    return EXIT_OK


def _bench_solver(args):
    return _solver_options(args), replace(bench.CV_SOLVER_OPTIONS, tol=args.cv_tol,
                                          kkt_tol=args.cv_kkt_tol)


def cmd_bench_estimation(args) -> int:
    opts, cv_opts = _bench_solver(args)
    cfg = bench.EstimationConfig(
        n=args.n, p=args.p, designs=args.designs, qs=args.qs, nus=args.nus, ss=args.ss,
        reps=args.reps, seed=args.seed, response=args.response, gamma_decay=args.gamma_decay,
        methods=args.methods, cv=_cv_config(args), cv_opts=cv_opts, opts=opts,
        timing=args.timing)
    records = bench.run_estimation_benchmark(cfg, threads=args.threads)
    bench.write_records_csv(args.out, records, bench.EstimationRecord.FIELDS)
    summary = bench.estimation_summary(records)
    bench.write_summary_csv(_summary_path(args), summary)
    for row in summary:
        print(f"{row['design']} q={row['q']} nu={row['nu']} s={row['s']} {row['method']}: "
              f"median error {row['median_error']:.4g} ({row['failures']} failed)")
    return EXIT_OK


def cmd_bench_inference(args) -> int:
    opts, cv_opts = _bench_solver(args)
    cfg = bench.InferenceConfig(
        b_grid=args.b_grid, n=args.n, p=args.p, q=args.q, s=args.s, nu=args.nu,
        design=args.design, reps=args.reps, alpha=args.alpha, seed=args.seed,
        gamma_decay=args.gamma_decay, delta_w_mode=args.delta_w_mode, methods=args.methods,
        cv=_cv_config(args), cv_opts=cv_opts, opts=opts)
    records, summary = bench.run_inference_benchmark(cfg, threads=args.threads)
    bench.write_records_csv(args.out, records, bench.InferenceRecord.FIELDS)
    bench.write_summary_csv(_summary_path(args), summary)
    for row in summary:
        print(f"{row['method']} b={row['b_effect']}: rejection rate "
              f"{row['rejection_rate']:.3f} ({row['failures']} failed)")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "cv": cmd_cv,
    "gcm-test": cmd_gcm_test,
    "bench-estimation": cmd_bench_estimation,
    "bench-inference": cmd_bench_inference,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return COMMANDS[args.command](args)
    except (DegenerateStatisticError, DegenerateDataError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
