import subprocess
import sys

import numpy as np
import pytest

from bectrack.harness import ExperimentConfig, read_manifest
from bectrack.harness.cli import build_parser, config_from_args, main
from bectrack.spinspace import ModelParams

FAST = ["-N", "6", "--interaction", "1", "--t-final", "0.2", "--dt", "1e-3", "--sample-interval", "0.01"]


def test_flags_override_config_file(tmp_path):
    base = ExperimentConfig(ModelParams(20, interaction_u=2.0), 1.0, 1e-3, seed=9)
    base.save(tmp_path / "c.json")
    args = build_parser().parse_args(["run", "--config", str(tmp_path / "c.json"), "-N", "12", "--wigner-at", "0.5"])
    cfg = config_from_args(args)
    assert cfg.params.n_particles == 12
    assert cfg.params.interaction_u == 2.0
    assert cfg.seed == 9 and cfg.wigner_times == (0.5,)


def test_defaults_are_the_reference_regime():
    cfg = config_from_args(build_parser().parse_args(["run"]))
    assert cfg.params.n_particles == 100 and cfg.params.gamma_bar == 1.0
    assert cfg.t_final == 60.0 and cfg.dt == 1e-3
    assert cfg.gamma == pytest.approx(0.01)


def test_run_then_plot_then_estimate(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", *FAST, "--wigner-at", "0.2", "--output", str(out), "--plot"]) == 0
    assert (out / "plot" / "timeseries.csv").is_file()
    assert read_manifest(out)["kind"] == "experiment"

    est = tmp_path / "est.csv"
    code = main(
        ["estimate", str(out / "record.bin"), "--estimate-seed", "1", "--reference", str(out / "config.json"),
         "--sample-interval", "0.01", "--output", str(est)]
    )
    assert code == 0
    head = est.read_text().splitlines()[0].split(",")
    replay = np.loadtxt(est, delimiter=",", skiprows=1)
    stored = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    stored_head = (out / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert np.array_equal(replay[:, head.index("fidelity")], stored[:, stored_head.index("fidelity")])

    assert main(["plot", str(out)]) == 0


def test_ensemble_command(tmp_path, capsys):
    out = tmp_path / "e"
    assert main(["ensemble", *FAST, "--seed-count", "3", "--density-at", "0.1", "--output", str(out)]) == 0
    assert "fraction converged" in capsys.readouterr().out
    assert read_manifest(out)["seeds"] == [1, 2, 3]


def test_gpe_command(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["gpe", "-u", "1", "--t-final", "1", "--initial", "0", "0", "2", "--output", str(out)]) == 0
    table = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.allclose(table[0, 2:], [0, 0, 1])
    assert np.abs(np.linalg.norm(table[:, 2:], axis=1) - 1).max() < 1e-8


def test_wigner_command(tmp_path):
    stem = tmp_path / "w"
    assert main(["wigner", "-N", "10", "--state", "coherent", "--theta", "1", "--phi", "0.5", "--output", str(stem)]) == 0
    assert (tmp_path / "w.csv").is_file() and (tmp_path / "w.bin").is_file()


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", *FAST, "--dt", "0.05", "--output", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["plot", str(tmp_path / "missing")]) == 2
    with pytest.raises(SystemExit):
        main(["preset", "nope"])


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "bectrack.harness.cli", "gpe", "--t-final", "0.1", "--output", str(tmp_path / "p.csv")],
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip().endswith("p.csv")
