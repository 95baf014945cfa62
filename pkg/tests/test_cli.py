"""Command-line interface: full synth/train/odometry/eval chain on tmp dirs."""

import configparser

import numpy as np
import pytest

from pcodo.cli import build_parser, main, resolve_config
from pcodo.sampling import SamplingStrategy

CONFIG_TEXT = """\
[run]
seed = 1
points = 384
train_scans = 3

[matching]
ransac_iterations = 128
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synth -> train -> odometry -> eval chain shared by the checks."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "pipeline.cfg"
    cfg.write_text(CONFIG_TEXT)
    data = root / "seq"
    model = root / "model.bin"
    odo = root / "odo"
    report = root / "report"

    assert main([
        "synth", "--out", str(data),
        "--frames", "5", "--points", "1500", "--noise", "0.01", "--seed", "3",
    ]) == 0
    assert main([
        "train", "--data-root", str(data),
        "--model", str(model), "--config", str(cfg),
    ]) == 0
    assert main([
        "odometry", "--data-root", str(data),
        "--model", str(model), "--out", str(odo), "--config", str(cfg),
    ]) == 0
    assert main([
        "eval", "--data-root", str(data),
        "--pred", str(odo), "--out", str(report),
    ]) == 0
    return {"root": root, "cfg": cfg, "data": data, "model": model,
            "odo": odo, "report": report}


def seq_name(workspace):
    return workspace["data"].name


def test_train_outputs(workspace):
    model = workspace["model"]
    assert model.is_file() and model.stat().st_size > 0
    sidecar = model.with_suffix(".cfg")
    assert sidecar.is_file()
    meta = configparser.ConfigParser()
    meta.read(sidecar)
    assert meta.getint("run", "points") == 384
    assert meta.getint("matching", "ransac_iterations") == 128
    assert len(meta.get("provenance", "model_sha256")) == 64


def test_odometry_outputs(workspace):
    out = workspace["odo"] / seq_name(workspace)
    for name in ("trajectory.txt", "trajectory.csv", "frames.csv",
                 "timings.csv", "run.cfg", "trajectory.png", "errors.png"):
        assert (out / name).is_file(), name
        assert (out / name).stat().st_size > 0, name

    frames = (out / "frames.csv").read_text().strip().splitlines()
    assert frames[0].startswith("frame,raw_points,selected_points")
    assert len(frames) == 6
    assert all(row.split(",")[8] == "0" for row in frames[1:])  # no fallbacks

    trajectory = (out / "trajectory.txt").read_text().strip().splitlines()
    assert len(trajectory) == 5


def test_run_config_records_resolved_values(workspace):
    out = workspace["odo"] / seq_name(workspace)
    cfg = configparser.ConfigParser()
    cfg.read(out / "run.cfg")
    assert cfg.getint("run", "points") == 384
    assert cfg.getint("run", "seed") == 1
    assert cfg.getint("matching", "ransac_iterations") == 128
    assert cfg.get("provenance", "command") == "odometry"
    assert cfg.getint("provenance", "frames") == 5


def test_eval_outputs(workspace):
    report = workspace["report"]
    name = seq_name(workspace)
    for f in ("metrics.txt", "metrics.csv",
              f"{name}_trajectory.png", f"{name}_errors.png"):
        assert (report / f).is_file() and (report / f).stat().st_size > 0, f

    lines = (report / "metrics.csv").read_text().strip().splitlines()
    assert lines[0] == ("sequence,kitti_translation_pct,kitti_rotation_deg_per_m,"
                        "rel_translation_rmse_m,rel_rotation_rmse_deg,drift_fraction")
    assert len(lines) == 2
    cells = lines[1].split(",")
    assert cells[0] == name
    # a 1.6 m path is far below the 100 m segment scale: KITTI fields are nan
    assert np.isnan(float(cells[1])) and np.isnan(float(cells[2]))
    assert float(cells[5]) < 0.2


def test_eval_of_ground_truth_is_zero(workspace, tmp_path):
    out = tmp_path / "self"
    assert main([
        "eval", "--data-root", str(workspace["data"]),
        "--pred", str(workspace["data"] / "poses.txt"), "--out", str(out),
    ]) == 0
    cells = (out / "metrics.csv").read_text().strip().splitlines()[1].split(",")
    # relative residuals pass through inv(delta) @ delta: rounding only
    assert float(cells[3]) <= 1e-12  # rel translation RMSE
    assert float(cells[4]) <= 1e-12  # rel rotation RMSE
    assert float(cells[5]) == 0.0  # final drift


def test_rerun_reproduces_outputs(workspace, tmp_path):
    odo2 = tmp_path / "odo2"
    assert main([
        "odometry", "--data-root", str(workspace["data"]),
        "--model", str(workspace["model"]), "--out", str(odo2),
        "--config", str(workspace["cfg"]),
    ]) == 0
    name = seq_name(workspace)
    for f in ("trajectory.txt", "trajectory.csv", "frames.csv"):
        a = (workspace["odo"] / name / f).read_bytes()
        b = (odo2 / name / f).read_bytes()
        assert a == b, f


def test_retrain_reproduces_model(workspace, tmp_path):
    model2 = tmp_path / "model2.bin"
    assert main([
        "train", "--data-root", str(workspace["data"]),
        "--model", str(model2), "--config", str(workspace["cfg"]),
    ]) == 0
    assert model2.read_bytes() == workspace["model"].read_bytes()


def test_ablate(workspace, tmp_path):
    out = tmp_path / "ablation"
    assert main([
        "ablate", "--data-root", str(workspace["data"]),
        "--out", str(out), "--config", str(workspace["cfg"]),
        "--counts", "256",
    ]) == 0
    for f in ("ablation.csv", "ablation.txt", "ablation.png"):
        assert (out / f).is_file() and (out / f).stat().st_size > 0, f

    lines = (out / "ablation.csv").read_text().strip().splitlines()
    names = [row.split(",")[0] for row in lines[1:]]
    assert names == ["geometry-256", "random-256", "fps-256", "no-views", "no-eigen"]
    views_col = {row.split(",")[0]: row.split(",")[3] for row in lines[1:]}
    assert views_col["no-views"] == "0"
    assert views_col["geometry-256"] == "1"
    eigen_col = {row.split(",")[0]: row.split(",")[4] for row in lines[1:]}
    assert eigen_col["no-eigen"] == "0"


def test_flag_overrides_config_file(workspace):
    parser = build_parser()
    base = ["odometry", "--data-root", "x", "--model", "m", "--out", "o",
            "--config", str(workspace["cfg"])]
    assert resolve_config(parser.parse_args(base)).points == 384
    assert resolve_config(parser.parse_args(base + ["--points", "300"])).points == 300

    args = parser.parse_args(base + ["--sampling", "random", "--no-views",
                                     "--no-eigen-features", "--single-thread"])
    cfg = resolve_config(args)
    assert cfg.sampling is SamplingStrategy.RANDOM
    assert cfg.use_views is False
    assert cfg.use_eigen_features is False
    assert cfg.single_thread is True


def test_invalid_train_scans_fails_before_writing(workspace, tmp_path):
    model = tmp_path / "never.bin"
    with pytest.raises(ValueError):
        main([
            "train", "--data-root", str(workspace["data"]),
            "--model", str(model), "--train-scans", "0",
        ])
    assert not model.exists()


def test_missing_model_is_an_error(workspace, tmp_path):
    with pytest.raises((FileNotFoundError, OSError)):
        main([
            "odometry", "--data-root", str(workspace["data"]),
            "--model", str(tmp_path / "absent.bin"),
            "--out", str(tmp_path / "odo"),
        ])


def test_unknown_strategy_rejected_by_parser(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--data-root", "x", "--model", "m",
                                   "--sampling", "uniform"])
    assert "invalid choice" in capsys.readouterr().err
