"""Command-line entry point.

Three commands: ``verify-duality`` runs the brute-force duality checks on a
builtin toy problem; ``train`` runs the fairness-constrained comparison
(unconstrained / standard Lagrangian / augmented) on a CSV or the synthetic
generator; ``pacc`` runs the generalization-bound harness.  Every run writes a
config echo capturing all effective values, line-delimited JSON traces, JSON
reports, and figures rendered from the same series.

Exit codes: 0 success, 1 invariant/assertion failure, 2 usage or config
error, 3 I/O error.  Set AUGLEARN_LOG=debug|info|warning for log verbosity.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import figures
from .ascent import (
    AscentConfig,
    DivergenceError,
    InnerSolverConfig,
    solve_augmented,
    solve_standard,
)
from .data import DatasetSchema, flip_transforms, load_csv, synthesize_biased, train_test_split
from .models import (
    FairnessConstraintSpec,
    Mlp,
    accuracy,
    counterfactual_flip_rate,
    cross_entropy_risk,
    randomized_accuracy,
    randomized_flip_rate,
)
from .oracle import (
    GridSpec,
    dual_surface,
    duality_report,
    perturbation_table,
    second_order_stability_check,
    tabulate_risks,
)
from .pacc import LocationFamily, empirical_pacc_harness, hoeffding_radius
from .problems import BUILTIN_PROBLEMS, ConstrainedProblem, ParamDomain, evaluate_risks

log = logging.getLogger("auglearn")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2
EXIT_IO = 3

DEFAULTS_NOTE = "all hyperparameter defaults below are toolkit choices"

DEFAULTS = {
    "seed": 0,
    "problem": "toy-qp",
    "grid": {
        "theta_points": 6001,
        "lambda_max": 6.0,
        "lambda_points": 61,
        "alpha_min": 1e-2,
        "alpha_max": 1e4,
        "alpha_points": 25,
        "u_half_width": 0.5,
        "u_points": 101,
        "max_resolution_bound": None,
    },
    "ascent": {
        "alpha0": 1.0,
        "growth_factor": 1.5,
        "growth_interval": 20,
        "outer_iters": 120,
        "eps0": 1e-2,
        "eps_decay": 0.9,
        "dual_step": 1.0,
        "project_lambda": True,
        "multiplier_rule": "shifted",
        "archive_stride": 2,
    },
    "inner": {
        "method": "gradient-descent",
        "step_size": 0.5,
        "max_steps": 30,
        "grad_tol": 1e-6,
        "warm_start": True,
        "momentum": 0.9,
        "line_search": True,
        "restarts": 0,
    },
    "train": {
        "method": "all",
        "hidden": [16, 16],
        "threshold": 0.05,
        "clamp_eps": 1e-6,
        "data_path": None,
        "schema_path": None,
        "train_fraction": 0.8,
        "synthetic_n": 2000,
        "synthetic_bias": 2.0,
        "randomized_window": 0.5,
        "zeta_delta": 0.1,
    },
    "pacc": {
        "sample_sizes": [250, 1000, 4000],
        "trials": 20,
        "delta": 0.05,
        "constrained": True,
    },
}

METHODS = ("unconstrained", "standard", "standard-randomized", "augmented", "all")


class ConfigError(ValueError):
    pass


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(path, "r", encoding="utf-8") as f:
        try:
            user = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config file {path}: {e}") from None
    if not isinstance(user, dict):
        raise ConfigError("config file must hold a JSON object")
    return _merge(DEFAULTS, user)


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, records: list):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def _echo_config(out: Path, cfg: dict, command: str):
    echo = {"command": command, "defaults_note": DEFAULTS_NOTE, "effective": cfg}
    _write_json(out / "config_echo.json", echo)


def _grid_for(problem, cfg_grid: dict) -> GridSpec:
    return GridSpec.default_for(
        problem,
        theta_points=int(cfg_grid["theta_points"]),
        lambda_max=float(cfg_grid["lambda_max"]),
        lambda_points=int(cfg_grid["lambda_points"]),
        alpha_axis=(
            float(cfg_grid["alpha_min"]),
            float(cfg_grid["alpha_max"]),
            int(cfg_grid["alpha_points"]),
        ),
        u_half_width=float(cfg_grid["u_half_width"]),
        u_points=int(cfg_grid["u_points"]),
    )


def _ascent_config(cfg: dict, **overrides) -> AscentConfig:
    inner = InnerSolverConfig(
        method=cfg["inner"]["method"],
        step_size=float(cfg["inner"]["step_size"]),
        max_steps=int(cfg["inner"]["max_steps"]),
        grad_tol=float(cfg["inner"]["grad_tol"]),
        warm_start=bool(cfg["inner"]["warm_start"]),
        momentum=float(cfg["inner"]["momentum"]),
        line_search=bool(cfg["inner"]["line_search"]),
        restarts=int(cfg["inner"]["restarts"]),
    )
    kwargs = dict(
        alpha0=float(cfg["ascent"]["alpha0"]),
        growth_factor=float(cfg["ascent"]["growth_factor"]),
        growth_interval=int(cfg["ascent"]["growth_interval"]),
        outer_iters=int(cfg["ascent"]["outer_iters"]),
        eps0=float(cfg["ascent"]["eps0"]),
        eps_decay=float(cfg["ascent"]["eps_decay"]),
        dual_step=float(cfg["ascent"]["dual_step"]),
        project_lambda=bool(cfg["ascent"]["project_lambda"]),
        multiplier_rule=cfg["ascent"]["multiplier_rule"],
        archive_stride=int(cfg["ascent"]["archive_stride"]),
        inner=inner,
    )
    kwargs.update(overrides)
    return AscentConfig(**kwargs)


def cmd_verify_duality(cfg: dict, out: Path) -> int:
    problem_id = cfg["problem"]
    if problem_id not in BUILTIN_PROBLEMS:
        raise ConfigError(
            f"invalid problem id {problem_id!r}; choose from {sorted(BUILTIN_PROBLEMS)}"
        )
    problem = BUILTIN_PROBLEMS[problem_id]()
    grid = _grid_for(problem, cfg["grid"])
    log.info("tabulating %d theta grid points", grid.theta_points().shape[0])
    table = tabulate_risks(problem, grid)
    surface = dual_surface(problem, grid, table)
    report = duality_report(problem, grid, problem_id, table, surface)
    ptable = perturbation_table(problem, grid, table)
    stability = second_order_stability_check(ptable, report.lambda_bar, report.alpha_bar)
    control = second_order_stability_check(ptable, np.zeros(problem.m), 0.0)
    payload = report.to_dict()
    payload["stability_at_dual_pair"] = {
        "passed": stability.passed,
        "max_violation": stability.max_violation,
        "n_violations": stability.n_violations,
    }
    payload["stability_zero_control"] = {
        "passed": control.passed,
        "max_violation": control.max_violation,
        "n_violations": control.n_violations,
    }
    _write_json(out / "duality_report.json", payload)
    figures.plot_dual_surface(surface, report.inf_P, out / "duality_surface.png")
    figures.plot_perturbation(ptable, report.lambda_bar, report.alpha_bar, out / "perturbation.png")

    max_bound = cfg["grid"]["max_resolution_bound"]
    if not report.weak_duality_ok or not report.dominance_ok:
        log.error("duality invariant violated: %s", payload)
        return EXIT_INVARIANT
    if max_bound is not None and report.grid_resolution_bound > float(max_bound):
        log.error(
            "grid too coarse: resolution bound %.3g exceeds requested %.3g",
            report.grid_resolution_bound,
            float(max_bound),
        )
        return EXIT_INVARIANT
    return EXIT_OK


def _final_constraint_values(problem: ConstrainedProblem, theta) -> list:
    if problem.m == 0:
        return []
    return [float(v) for v in evaluate_risks(problem, theta)[1:]]


def _lambda_oscillation(trace, window: int = 50):
    if trace.lam.shape[1] == 0:
        return None
    tail = trace.lam[-min(window, len(trace)):]
    return float(np.max(np.std(tail, axis=0)))


def cmd_train(cfg: dict, out: Path) -> int:
    tcfg = cfg["train"]
    method = tcfg["method"]
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    seed = int(cfg["seed"])

    if tcfg["data_path"] is not None:
        if tcfg["schema_path"] is None:
            raise ConfigError("data_path requires schema_path")
        schema = DatasetSchema.from_json(tcfg["schema_path"])
        dataset = load_csv(tcfg["data_path"], schema)
        log.info(
            "loaded %d rows (%d dropped) from %s",
            dataset.n,
            dataset.meta["dropped_rows"],
            tcfg["data_path"],
        )
    else:
        dataset = synthesize_biased(int(tcfg["synthetic_n"]), seed, float(tcfg["synthetic_bias"]))
        log.info("synthesized %d biased rows", dataset.n)
    train_ds, test_ds = train_test_split(dataset, float(tcfg["train_fraction"]), seed)
    flips = flip_transforms(train_ds)
    if not flips:
        raise ConfigError("dataset schema declares no protected columns")
    spec = FairnessConstraintSpec(
        transforms=tuple(flips),
        threshold=float(tcfg["threshold"]),
        clamp_eps=float(tcfg["clamp_eps"]),
    )

    mlp = Mlp(train_ds.width, hidden=tuple(int(h) for h in tcfg["hidden"]))
    theta0 = mlp.init_params(seed)
    X_train, y_train = train_ds.features(), train_ds.labels()
    X_test, y_test = test_ds.features(), test_ds.labels()
    domain = ParamDomain(mlp.n_params)
    objective = cross_entropy_risk(mlp, X_train, y_train, spec.clamp_eps)
    constraints = spec.build_risks(mlp, X_train)
    constrained = ConstrainedProblem(objective, constraints, domain)
    unconstrained = ConstrainedProblem(objective, [], domain)
    zetas = [
        hoeffding_radius(r.bound, train_ds.n, float(tcfg["zeta_delta"])) for r in constraints
    ]

    wanted = (
        ["unconstrained", "standard", "standard-randomized", "augmented"]
        if method == "all"
        else [method]
    )
    run_standard = "standard" in wanted or "standard-randomized" in wanted
    traces, metrics = {}, {}
    exit_code = EXIT_OK

    def run(name, solver, problem, **cfg_overrides):
        nonlocal exit_code
        ascent = _ascent_config(cfg, theta0=theta0, **cfg_overrides)
        try:
            return solver(problem, ascent)
        except DivergenceError as e:
            partial = getattr(e, "partial_result", None)
            log.error("%s diverged: %s", name, e)
            if partial is not None:
                traces[name] = partial.trace
                _write_jsonl(out / f"trace_{name}.jsonl", partial.trace.records())
            exit_code = EXIT_INVARIANT
            return None

    results = {}
    if "unconstrained" in wanted:
        results["unconstrained"] = run("unconstrained", solve_augmented, unconstrained)
    if run_standard:
        results["standard"] = run(
            "standard", solve_standard, constrained, archive_iterates=True
        )
    if "augmented" in wanted:
        results["augmented"] = run("augmented", solve_augmented, constrained)

    for name, result in results.items():
        if result is None:
            continue
        traces[name] = result.trace
        _write_jsonl(out / f"trace_{name}.jsonl", result.trace.records())
        metrics[name] = {
            "accuracy": accuracy(mlp, result.theta, X_test, y_test),
            "flip_rates": {
                f.name: counterfactual_flip_rate(mlp, result.theta, X_test, f)
                for f in flips
            },
            "final_constraint_values": _final_constraint_values(constrained, result.theta),
            "lambda_oscillation": _lambda_oscillation(result.trace),
            "termination": result.termination,
        }

    if "standard-randomized" in wanted and results.get("standard") is not None:
        archive = results["standard"].archive
        t0 = int(len(archive) * (1.0 - float(tcfg["randomized_window"])))
        t0 = min(max(t0, 0), len(archive) - 1)
        metrics["standard-randomized"] = {
            "accuracy": randomized_accuracy(mlp, archive, t0, X_test, y_test, seed),
            "flip_rates": {
                f.name: randomized_flip_rate(mlp, archive, t0, X_test, f, seed)
                for f in flips
            },
            "final_constraint_values": metrics.get("standard", {}).get(
                "final_constraint_values", []
            ),
            "lambda_oscillation": metrics.get("standard", {}).get("lambda_oscillation"),
            "termination": "randomized-over-archive",
            "archive_window": [t0, len(archive)],
        }

    payload = {
        "methods": metrics,
        "constraint_names": [f.name for f in flips],
        "constraint_radii": zetas,
        "zeta_delta": float(tcfg["zeta_delta"]),
        "threshold": spec.threshold,
        "train_rows": train_ds.n,
        "test_rows": test_ds.n,
        "dropped_rows": dataset.meta.get("dropped_rows", 0),
        "parameters": mlp.n_params,
    }
    _write_json(out / "metrics.json", payload)
    if traces:
        figures.plot_multiplier_dynamics(
            {k: v for k, v in traces.items() if v.lam.shape[1] > 0},
            out / "multiplier_dynamics.png",
        )
        figures.plot_slack_dynamics(
            {k: v for k, v in traces.items() if v.slacks.shape[1] > 0},
            out / "slack_dynamics.png",
        )
    if metrics:
        figures.plot_metric_bars(metrics, out / "metrics_summary.png")
    return exit_code


def cmd_pacc(cfg: dict, out: Path) -> int:
    pcfg = cfg["pacc"]
    if int(pcfg["trials"]) < 1:
        raise ConfigError("pacc.trials must be >= 1")
    if not pcfg["sample_sizes"]:
        raise ConfigError("pacc.sample_sizes must be non-empty")
    family = LocationFamily(constrained=bool(pcfg["constrained"]))
    report = empirical_pacc_harness(
        family,
        [int(n) for n in pcfg["sample_sizes"]],
        int(pcfg["trials"]),
        float(pcfg["delta"]),
        int(cfg["seed"]),
    )
    _write_json(out / "pacc_report.json", report.to_dict())
    figures.plot_harness_medians(report, out / "pacc_medians.png")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auglearn",
        description="Augmented Lagrangian constrained learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("verify-duality", "brute-force duality checks on a builtin problem"),
        ("train", "fairness-constrained training comparison"),
        ("pacc", "generalization-bound harness on the synthetic family"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        if name == "verify-duality":
            p.add_argument("--problem", type=str, default=None, help="builtin problem id")
        if name == "train":
            p.add_argument("--method", type=str, default=None, choices=METHODS)
            p.add_argument("--data", type=str, default=None, help="CSV dataset path")
            p.add_argument("--schema", type=str, default=None, help="dataset schema JSON")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("AUGLEARN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if getattr(args, "problem", None) is not None:
            cfg["problem"] = args.problem
        if getattr(args, "method", None) is not None:
            cfg["train"]["method"] = args.method
        if getattr(args, "data", None) is not None:
            cfg["train"]["data_path"] = args.data
        if getattr(args, "schema", None) is not None:
            cfg["train"]["schema_path"] = args.schema
        out = Path(args.out) if args.out else Path("auglearn-out") / args.command
        out.mkdir(parents=True, exist_ok=True)
        _echo_config(out, cfg, args.command)
        if args.command == "verify-duality":
            return cmd_verify_duality(cfg, out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "pacc":
            return cmd_pacc(cfg, out)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as e:
        log.error("config error: %s", e)
        print(f"auglearn: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"auglearn: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as e:
        print(f"auglearn: solver diverged: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
