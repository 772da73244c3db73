"""Command-line entry points for the simulation benchmarks and the estimator."""

import argparse
import sys

import numpy as np

from .bench import (
    ExperimentConfig,
    run_experiment,
    run_misspec,
    run_reduction_checks,
    write_report_csv,
    write_rows_csv,
)
from .errors import SparseCcaError
from .linalg import load_matrix_csv
from .model import SampleSet
from .stage1 import AdmmConfig
from .stage2 import CvConfig, colar_estimate


def _parse_value(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    return text


def load_config_file(path):
    """Parse a plain `key = value` configuration file; `#` starts a comment."""
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SparseCcaError(f"{path}:{line_no}: expected `key = value`")
            key, _, raw = line.partition("=")
            values[key.strip().replace("-", "_")] = _parse_value(raw)
    return values


def _resolve(args, config, key, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _b_grid(value):
    if isinstance(value, (tuple, list)):
        return tuple(float(v) for v in value)
    return tuple(float(tok) for tok in str(value).split(","))


def _add_common(sub):
    sub.add_argument("--config", help="key = value configuration file")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output CSV path")


def _add_sim_args(sub):
    _add_common(sub)
    sub.add_argument("--setting", choices=("identity", "toeplitz", "sparse_inv"))
    sub.add_argument("--p", type=int)
    sub.add_argument("--m", type=int)
    sub.add_argument("--n", type=int)
    sub.add_argument("--reps", type=int)
    sub.add_argument("--rank", type=int, dest="rank_r")
    sub.add_argument("--rho-multiplier", type=float, dest="rho_multiplier")
    sub.add_argument("--eta", type=float)
    sub.add_argument("--b-grid", dest="b_grid")
    sub.add_argument("--folds", type=int)
    sub.add_argument("--threads", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsecca",
        description="Sparse CCA benchmarks, estimation, and reduction checks.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="reproduce a simulation table row")
    _add_sim_args(sim)

    mis = subs.add_parser("misspec", help="run with an extra correlated pair")
    _add_sim_args(mis)
    mis.add_argument("--scenario", choices=("shared_support", "free_support"))
    mis.add_argument("--lambda3", type=float)

    chk = subs.add_parser("reduce-check", help="validate the graph reduction numerically")
    _add_common(chk)
    chk.add_argument("--n-vertices", type=int, dest="n_vertices")
    chk.add_argument("--clique-size", type=int, dest="clique_size")
    chk.add_argument("--reps", type=int)

    est = subs.add_parser("estimate", help="run the estimator on CSV data matrices")
    _add_common(est)
    est.add_argument("--x", help="CSV matrix of X observations (rows)")
    est.add_argument("--y", help="CSV matrix of Y observations (rows)")
    est.add_argument("--rank", type=int, dest="rank_r")
    est.add_argument("--rho-multiplier", type=float, dest="rho_multiplier")
    est.add_argument("--eta", type=float)
    est.add_argument("--b-grid", dest="b_grid")
    est.add_argument("--folds", type=int)
    return parser


def _experiment_config(args, config, misspec=None):
    cfg = ExperimentConfig(
        setting=_resolve(args, config, "setting", "identity"),
        p=_resolve(args, config, "p", 300),
        m=_resolve(args, config, "m", 300),
        n=_resolve(args, config, "n", 500),
        reps=_resolve(args, config, "reps", 20),
        seed=_resolve(args, config, "seed", 0),
        rank_r=_resolve(args, config, "rank_r", 2),
        rho_multiplier=_resolve(args, config, "rho_multiplier", 0.55),
        eta=_resolve(args, config, "eta", 2.0),
        b_grid=_b_grid(_resolve(args, config, "b_grid", (0.5, 1.0, 1.5, 2.0))),
        folds=_resolve(args, config, "folds", 5),
        misspec=misspec,
        lambda3=_resolve(args, config, "lambda3", 0.3),
        threads=_resolve(args, config, "threads", 1),
    )
    return cfg


def _print_summary(summary):
    for key in sorted(summary):
        print(f"{key} = {summary[key]}")


def _cmd_simulate(args, config):
    cfg = _experiment_config(args, config)
    rows, summary = run_experiment(cfg)
    out = _resolve(args, config, "out", None)
    if out:
        write_rows_csv(out, rows)
    _print_summary(summary)
    return 0


def _cmd_misspec(args, config):
    scenario = _resolve(args, config, "scenario", "free_support")
    cfg = _experiment_config(args, config, misspec=scenario)
    rows, summary = run_misspec(cfg)
    out = _resolve(args, config, "out", None)
    if out:
        write_rows_csv(out, rows)
    _print_summary(summary)
    return 0


def _cmd_reduce_check(args, config):
    report = run_reduction_checks(
        n_vertices=_resolve(args, config, "n_vertices", 1200),
        clique_size=_resolve(args, config, "clique_size", 120),
        reps=_resolve(args, config, "reps", 50),
        seed=_resolve(args, config, "seed", 0),
    )
    out = _resolve(args, config, "out", None)
    if out:
        write_report_csv(out, report)
    failures = 0
    for row in report:
        flag = "pass" if row.passed else "FAIL"
        print(f"[{flag}] {row.name}: value={row.value:.6g} target={row.target}")
        failures += 0 if row.passed else 1
    return 2 if failures else 0


def _cmd_estimate(args, config):
    x_path = _resolve(args, config, "x", None)
    y_path = _resolve(args, config, "y", None)
    if not x_path or not y_path:
        raise SparseCcaError("estimate requires --x and --y CSV paths")
    s = SampleSet(load_matrix_csv(x_path), load_matrix_csv(y_path))
    r = _resolve(args, config, "rank_r", 2)
    rho_mult = _resolve(args, config, "rho_multiplier", 0.55)
    eta = _resolve(args, config, "eta", 2.0)
    rho = rho_mult * np.sqrt(np.log(s.p + s.m) / s.n)
    est = colar_estimate(
        s,
        r,
        admm_cfg=AdmmConfig(rho=rho, rank_r=r, eta=eta),
        cv_cfg=CvConfig(
            rank_r=r,
            folds=_resolve(args, config, "folds", 5),
            b_grid=_b_grid(_resolve(args, config, "b_grid", (0.5, 1.0, 1.5, 2.0))),
        ),
    )
    out = _resolve(args, config, "out", None)
    if out:
        est.save(out, seed=_resolve(args, config, "seed", None))
    print(f"chosen_b = {est.chosen_b}")
    print(f"converged = {est.converged}")
    print(f"support_u = {','.join(map(str, est.support_u))}")
    print(f"support_v = {','.join(map(str, est.support_v))}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "misspec": _cmd_misspec,
    "reduce-check": _cmd_reduce_check,
    "estimate": _cmd_estimate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config_file(args.config) if args.config else {}
        return _COMMANDS[args.command](args, config)
    except SparseCcaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
