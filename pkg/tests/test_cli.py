import json

import numpy as np
import pytest

from auglearn.cli import DEFAULTS, EXIT_INVARIANT, EXIT_IO, EXIT_OK, EXIT_USAGE, main

SMALL_TRAIN = {
    "train": {"synthetic_n": 400, "hidden": [8]},
    "ascent": {"outer_iters": 40, "growth_interval": 8},
    "inner": {"max_steps": 25},
}

SMALL_GRID = {
    "grid": {"theta_points": 1201, "lambda_points": 31, "alpha_points": 13, "u_points": 41}
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def run(args):
    return main(args)


def test_verify_duality_toy(tmp_path):
    out = tmp_path / "vd"
    code = run(
        ["verify-duality", "--problem", "toy-qp", "--out", str(out),
         "--config", write_config(tmp_path, SMALL_GRID)]
    )
    assert code == EXIT_OK
    report = json.loads((out / "duality_report.json").read_text())
    assert report["inf_P"] == pytest.approx(1.0, abs=report["grid_resolution_bound"])
    assert report["gap_augmented"] <= report["grid_resolution_bound"]
    assert report["weak_duality_ok"] and report["dominance_ok"]
    assert report["stability_at_dual_pair"]["passed"]
    assert not report["stability_zero_control"]["passed"]
    for name in ("config_echo.json", "duality_surface.png", "perturbation.png"):
        assert (out / name).exists()


def test_verify_duality_nonconvex_gap_ordering(tmp_path):
    out = tmp_path / "vd2"
    code = run(
        ["verify-duality", "--problem", "nonconvex-1d", "--out", str(out),
         "--config", write_config(tmp_path, SMALL_GRID)]
    )
    assert code == EXIT_OK
    report = json.loads((out / "duality_report.json").read_text())
    assert report["gap_standard"] > report["gap_augmented"]


def test_verify_duality_invalid_problem(tmp_path):
    assert run(["verify-duality", "--problem", "no-such", "--out", str(tmp_path / "x")]) == EXIT_USAGE


def test_verify_duality_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code = run(["verify-duality", "--out", str(tmp_path / "y"), "--config", str(bad)])
    assert code == EXIT_USAGE


def test_verify_duality_unknown_key_rejected(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"theta_pints": 100}})
    assert run(["verify-duality", "--out", str(tmp_path / "z"), "--config", cfg]) == EXIT_USAGE


def test_verify_duality_grid_too_coarse(tmp_path):
    payload = {"grid": dict(SMALL_GRID["grid"], max_resolution_bound=1e-9)}
    cfg = write_config(tmp_path, payload)
    out = tmp_path / "coarse"
    assert run(["verify-duality", "--out", str(out), "--config", cfg]) == EXIT_INVARIANT
    assert (out / "duality_report.json").exists()  # reported, then nonzero exit


def test_train_synthetic_all_methods(tmp_path):
    out = tmp_path / "train"
    cfg = write_config(tmp_path, SMALL_TRAIN)
    assert run(["train", "--out", str(out), "--config", cfg, "--seed", "1"]) == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    methods = metrics["methods"]
    assert set(methods) == {"unconstrained", "standard", "standard-randomized", "augmented"}
    # constrained training satisfies the constraints while unconstrained violates
    assert max(methods["augmented"]["final_constraint_values"]) <= 1e-3
    assert max(methods["unconstrained"]["final_constraint_values"]) > 0
    assert (
        methods["augmented"]["flip_rates"]["z-flip"]
        < methods["unconstrained"]["flip_rates"]["z-flip"]
    )
    for name in (
        "trace_unconstrained.jsonl",
        "trace_standard.jsonl",
        "trace_augmented.jsonl",
        "multiplier_dynamics.png",
        "slack_dynamics.png",
        "metrics_summary.png",
        "config_echo.json",
    ):
        assert (out / name).exists()


def test_train_trace_record_schema(tmp_path):
    out = tmp_path / "train"
    cfg = write_config(tmp_path, SMALL_TRAIN)
    run(["train", "--out", str(out), "--config", cfg, "--seed", "1"])
    lines = (out / "trace_augmented.jsonl").read_text().splitlines()
    assert len(lines) == 40
    for k, line in enumerate(lines):
        rec = json.loads(line)
        assert set(rec) == {
            "iter", "lambda", "alpha", "slack", "objective", "inner_steps", "inner_grad_norm",
        }
        assert rec["iter"] == k
        assert isinstance(rec["lambda"], list) and isinstance(rec["slack"], list)
    # the standard baseline trains the unpenalized Lagrangian: alpha column is 0
    std = json.loads((out / "trace_standard.jsonl").read_text().splitlines()[0])
    assert std["alpha"] == 0.0


def test_train_reruns_byte_identical(tmp_path):
    cfg = write_config(tmp_path, SMALL_TRAIN)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(["train", "--out", str(out1), "--config", cfg, "--seed", "3"])
    run(["train", "--out", str(out2), "--config", cfg, "--seed", "3"])
    names = sorted(p.name for p in out1.iterdir())
    assert names == sorted(p.name for p in out2.iterdir())
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_train_single_method(tmp_path):
    out = tmp_path / "only-aug"
    cfg = write_config(tmp_path, SMALL_TRAIN)
    run(["train", "--out", str(out), "--config", cfg, "--method", "augmented"])
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics["methods"]) == {"augmented"}
    assert not (out / "trace_standard.jsonl").exists()


def test_train_from_csv(tmp_path):
    csv_path = tmp_path / "tiny.csv"
    rng = np.random.default_rng(0)
    rows = ["f1,z,label"]
    for _ in range(60):
        z = rng.integers(0, 2)
        f1 = rng.normal() + 1.5 * z
        y = int(rng.random() < 1 / (1 + np.exp(-(f1 + 2 * z - 1))))
        rows.append(f"{f1:.6f},{z},{y}")
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    schema_path = tmp_path / "schema.json"
    schema_path.write_text(
        json.dumps(
            {
                "columns": [
                    {"name": "f1", "role": "feature", "encoding": "numeric"},
                    {"name": "z", "role": "protected", "encoding": "binary", "values": ["0", "1"]},
                    {"name": "label", "role": "label", "encoding": "numeric"},
                ]
            }
        ),
        encoding="utf-8",
    )
    out = tmp_path / "csvrun"
    cfg = write_config(
        tmp_path,
        {
            "train": {"hidden": [4], "train_fraction": 0.7},
            "ascent": {"outer_iters": 10},
            "inner": {"max_steps": 10},
        },
    )
    code = run(
        ["train", "--out", str(out), "--config", cfg,
         "--data", str(csv_path), "--schema", str(schema_path)]
    )
    assert code == EXIT_OK
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["train_rows"] == 42 and metrics["test_rows"] == 18


def test_train_data_without_schema(tmp_path):
    code = run(["train", "--out", str(tmp_path / "x"), "--data", "whatever.csv"])
    assert code == EXIT_USAGE


def test_train_missing_file_is_io_error(tmp_path):
    schema_path = tmp_path / "s.json"
    schema_path.write_text(
        json.dumps({"columns": [
            {"name": "a", "role": "feature", "encoding": "numeric"},
            {"name": "z", "role": "protected", "encoding": "binary", "values": ["0", "1"]},
            {"name": "label", "role": "label", "encoding": "numeric"},
        ]}),
        encoding="utf-8",
    )
    code = run(
        ["train", "--out", str(tmp_path / "x"), "--data", str(tmp_path / "nope.csv"),
         "--schema", str(schema_path)]
    )
    assert code == EXIT_IO


def test_pacc_small_run(tmp_path):
    out = tmp_path / "pacc"
    cfg = write_config(tmp_path, {"pacc": {"sample_sizes": [200, 800], "trials": 3}})
    assert run(["pacc", "--out", str(out), "--config", cfg, "--seed", "0"]) == EXIT_OK
    report = json.loads((out / "pacc_report.json").read_text())
    assert report["sample_sizes"] == [200, 800]
    assert all(np.isfinite(report["median_objective_gap"]))
    assert "plug-ins" in report["note"]
    assert (out / "pacc_medians.png").exists()


def test_pacc_zero_trials_rejected(tmp_path):
    cfg = write_config(tmp_path, {"pacc": {"trials": 0}})
    assert run(["pacc", "--out", str(tmp_path / "x"), "--config", cfg]) == EXIT_USAGE


def test_pacc_unconstrained_family(tmp_path):
    out = tmp_path / "pacc0"
    cfg = write_config(
        tmp_path, {"pacc": {"sample_sizes": [200], "trials": 2, "constrained": False}}
    )
    assert run(["pacc", "--out", str(out), "--config", cfg]) == EXIT_OK
    report = json.loads((out / "pacc_report.json").read_text())
    assert report["median_constraint_gap"] == [0.0]


def test_config_echo_captures_defaults(tmp_path):
    out = tmp_path / "echo"
    cfg = write_config(tmp_path, {"seed": 17, **SMALL_GRID})
    run(["verify-duality", "--out", str(out), "--config", cfg])
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["effective"]["seed"] == 17
    assert echo["effective"]["ascent"]["growth_factor"] == DEFAULTS["ascent"]["growth_factor"]
    assert echo["defaults_note"]
    assert echo["command"] == "verify-duality"


def test_flag_overrides_config_file(tmp_path):
    out = tmp_path / "ovr"
    cfg = write_config(tmp_path, {"seed": 17, **SMALL_GRID})
    run(["verify-duality", "--out", str(out), "--config", cfg, "--seed", "99"])
    echo = json.loads((out / "config_echo.json").read_text())
    assert echo["effective"]["seed"] == 99


def test_bad_method_flag_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["train", "--method", "sideways", "--out", str(tmp_path / "x")])
    assert e.value.code == EXIT_USAGE
