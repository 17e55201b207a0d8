"""Run orchestration and on-disk artifacts.

A run directory holds ``config.json``, the measurement record (CSV and
binary), the trajectory log, optional Wigner grids and, written last,
``manifest.json``.  A directory without a manifest, or whose manifest
lists missing files, is incomplete.  Every file is a deterministic function
of the config, so rerunning reproduces it byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..dynamics import (
    MeasurementRecord,
    TrajectoryLog,
    gpe_phase_portrait,
    propagate_conditioned_batch,
    propagate_estimate,
)
from ..dynamics.gpe import sphere_initial_conditions
from ..dynamics.records import RECORD_FORMAT_VERSION
from ..observables import wigner_function
from ..observables.wigner import WIGNER_FORMAT_VERSION, WignerGrid
from ..spinspace import maximally_uncertain_estimate
from .analysis import convergence_time
from .config import CONFIG_VERSION, ExperimentConfig

OUTPUT_ENV = "BECTRACK_OUTPUT"
DEFAULT_OUTPUT_ROOT = "bectrack-runs"
MANIFEST = "manifest.json"
MANIFEST_VERSION = 1
CONVERGENCE_THRESHOLD = 0.99
CONVERGENCE_WINDOW = 10.0  # t_R
PORTRAIT_SPAN = 5.0  # t_R
PORTRAIT_DT = 1e-3  # t_R


class IncompleteRunError(RuntimeError):
    """The run directory lacks a manifest or files it lists."""


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_ROOT))


def resolve_run_dir(config: ExperimentConfig, kind: str = "run") -> Path:
    if config.output_dir is not None:
        return Path(config.output_dir)
    return output_root() / f"{kind}-{config.digest()}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _prepare_dir(run_dir: Path, config: ExperimentConfig) -> None:
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create run directory {run_dir}: {exc}") from exc
    if not os.access(run_dir, os.W_OK):
        raise PermissionError(f"run directory {run_dir} is not writable")
    manifest = run_dir / MANIFEST
    if manifest.exists():
        old = json.loads(manifest.read_text())
        if old.get("config_digest") != config.digest():
            raise FileExistsError(f"{run_dir} already holds a run of a different configuration")
        # invalidate until the rerun completes
        manifest.unlink()


def _write_manifest(run_dir: Path, config: ExperimentConfig, kind: str, files: list[str], extra: dict) -> None:
    body = {
        "kind": kind,
        "package": "bectrack",
        "version": __version__,
        "config_digest": config.digest(),
        "seeds": list(config.ensemble_seeds) if kind == "ensemble" else [config.seed],
        "formats": {
            "config": CONFIG_VERSION,
            "record": RECORD_FORMAT_VERSION,
            "wigner": WIGNER_FORMAT_VERSION,
            "manifest": MANIFEST_VERSION,
        },
        "files": {name: _sha256(run_dir / name) for name in sorted(files)},
        **extra,
    }
    (run_dir / MANIFEST).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def read_manifest(run_dir) -> dict:
    """Load and verify a manifest; raise ``IncompleteRunError`` if anything is missing."""
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST
    if not path.is_file():
        raise IncompleteRunError(f"{run_dir} has no {MANIFEST}")
    manifest = json.loads(path.read_text())
    missing = [name for name in manifest.get("files", {}) if not (run_dir / name).is_file()]
    if missing:
        raise IncompleteRunError(f"{run_dir} is missing {missing}")
    return manifest


def _initial_states(config: ExperimentConfig, seeds) -> tuple[np.ndarray, np.ndarray | None]:
    n = config.params.n_particles
    psi = np.array([config.initial_state.build(n, s) for s in seeds])
    est = np.array([maximally_uncertain_estimate(n, s) for s in seeds]) if config.estimator else None
    return psi, est


def _simulate(config: ExperimentConfig, seeds) -> list[tuple[TrajectoryLog, MeasurementRecord]]:
    psi, est = _initial_states(config, seeds)
    return propagate_conditioned_batch(
        psi,
        config.params,
        config.model_t_final,
        config.model_dt,
        seeds,
        initial_estimates=est,
        sample_interval=config.model_sample_interval,
        snapshot_times=config.wigner_times + config.density_times,
    )


def _wigner_name(which: str, time: float) -> str:
    return f"wigner/{which}_t{time:08.3f}"


def _write_wigner(run_dir: Path, log: TrajectoryLog, times) -> tuple[list[str], list[dict]]:
    files, entries = [], []
    if times:
        (run_dir / "wigner").mkdir(exist_ok=True)
    for t in times:
        snap = log.snapshot(t)
        entry = {"requested": t, "time": snap.time, "files": []}
        for which, state in (("conditioned", snap.conditioned), ("estimate", snap.estimate)):
            if state is None:
                continue
            grid = wigner_function(state)
            stem = _wigner_name(which, t)
            grid.to_csv(run_dir / f"{stem}.csv")
            grid.save(run_dir / f"{stem}.bin")
            entry["files"] += [f"{stem}.csv", f"{stem}.bin"]
        files += entry["files"]
        entries.append(entry)
    return files, entries


@dataclass(frozen=True)
class RunResult:
    run_dir: Path
    log: TrajectoryLog
    record: MeasurementRecord


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Simulate one trajectory (plus estimator) and write its run directory."""
    run_dir = resolve_run_dir(config)
    _prepare_dir(run_dir, config)
    ((log, record),) = _simulate(config, [config.seed])

    config.save(run_dir / "config.json")
    record.save_csv(run_dir / "record.csv")
    record.save_binary(run_dir / "record.bin")
    log.to_csv(run_dir / "trajectory.csv")
    files = ["config.json", "record.csv", "record.bin", "trajectory.csv"]
    wig_files, wig_entries = _write_wigner(run_dir, log, config.wigner_times)
    _write_manifest(run_dir, config, "experiment", files + wig_files, {"wigner": wig_entries})
    return RunResult(run_dir, log, record)


@dataclass
class EnsembleSummary:
    """Seed-ordered trajectories and their aggregates (times in t_R)."""

    seeds: tuple[int, ...]
    times: np.ndarray
    jz_mean: np.ndarray
    jz_stderr: np.ndarray
    fidelity_mean: np.ndarray | None
    convergence_times: np.ndarray | None
    densities: dict[float, np.ndarray]
    logs: list[TrajectoryLog] = field(repr=False)
    records: list[MeasurementRecord] = field(repr=False)
    run_dir: Path | None = None

    def fraction_converged(self, by: float = 30.0) -> float:
        """Share of seeds whose fidelity passes the threshold (sustained) by ``by`` t_R."""
        if self.convergence_times is None:
            raise ValueError("ensemble was run without an estimator")
        return float(np.mean(self.convergence_times <= by))


def _chunks(seq, size: int):
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def simulate_ensemble(config: ExperimentConfig, *, workers: int = 1, chunk_size: int = 64) -> EnsembleSummary:
    """Run every seed of ``config`` and aggregate, without touching the disk."""
    seeds = config.ensemble_seeds
    if len(seeds) < 2:
        raise ValueError("an ensemble needs at least two seeds")
    if len(set(seeds)) != len(seeds):
        raise ValueError("ensemble seeds must be distinct")
    chunks = _chunks(list(seeds), max(1, chunk_size))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _simulate(config, c), chunks))
    else:
        parts = [_simulate(config, c) for c in chunks]
    results = [item for part in parts for item in part]
    logs = [log for log, _ in results]
    records = [rec for _, rec in results]

    times = logs[0].times
    jz = np.array([log.conditioned.jz for log in logs])
    fid_mean = conv = None
    if config.estimator:
        fid = np.array([log.fidelity for log in logs])
        fid_mean = fid.mean(axis=0)
        conv = np.array(
            [convergence_time(times, f, CONVERGENCE_THRESHOLD, CONVERGENCE_WINDOW) for f in fid]
        )
    densities = {}
    for t in config.density_times:
        states = np.array([log.snapshot(t).conditioned for log in logs])
        densities[t] = np.einsum("si,sj->ij", states, states.conj()) / len(states)
    return EnsembleSummary(
        seeds=tuple(seeds),
        times=times,
        jz_mean=jz.mean(axis=0),
        jz_stderr=jz.std(axis=0, ddof=1) / np.sqrt(len(seeds)),
        fidelity_mean=fid_mean,
        convergence_times=conv,
        densities=densities,
        logs=logs,
        records=records,
    )


def run_ensemble(config: ExperimentConfig, *, workers: int = 1, chunk_size: int = 64) -> EnsembleSummary:
    """Run an ensemble and write per-seed logs and aggregates to its run directory."""
    run_dir = resolve_run_dir(config, "ensemble")
    if len(config.ensemble_seeds) < 2:
        raise ValueError("an ensemble needs at least two seeds")
    _prepare_dir(run_dir, config)
    summary = simulate_ensemble(config, workers=workers, chunk_size=chunk_size)
    summary.run_dir = run_dir

    config.save(run_dir / "config.json")
    files = ["config.json"]
    (run_dir / "seeds").mkdir(exist_ok=True)
    for seed, log, rec in zip(summary.seeds, summary.logs, summary.records):
        log.to_csv(run_dir / f"seeds/trajectory_{seed}.csv")
        rec.save_binary(run_dir / f"seeds/record_{seed}.bin")
        files += [f"seeds/trajectory_{seed}.csv", f"seeds/record_{seed}.bin"]

    cols = {"t": summary.times, "jz_mean": summary.jz_mean, "jz_stderr": summary.jz_stderr}
    if summary.fidelity_mean is not None:
        cols["fidelity_mean"] = summary.fidelity_mean
    np.savetxt(
        run_dir / "ensemble.csv",
        np.column_stack(list(cols.values())),
        delimiter=",",
        header=",".join(cols),
        comments="",
        fmt="%.17g",
    )
    files.append("ensemble.csv")
    if summary.convergence_times is not None:
        np.savetxt(
            run_dir / "convergence.csv",
            np.column_stack([summary.seeds, summary.convergence_times]),
            delimiter=",",
            header="seed,convergence_time",
            comments="",
            fmt=["%d", "%.17g"],
        )
        files.append("convergence.csv")
    density_files = {}
    for t, rho in summary.densities.items():
        name = f"density_t{t:08.3f}.npy"
        np.save(run_dir / name, rho)
        density_files[name] = t
        files.append(name)
    extra = {"densities": density_files}
    if summary.convergence_times is not None:
        extra["fraction_converged_by_30"] = summary.fraction_converged(30.0)
    _write_manifest(run_dir, config, "ensemble", files, extra)
    return summary


def replay_estimate(
    record: MeasurementRecord,
    estimate_seed: int,
    *,
    reference=None,
    sample_interval: float | None = None,
) -> TrajectoryLog:
    """Filter a stored record starting from a fresh maximally uncertain estimate.

    ``sample_interval`` is in t_R.
    """
    params = record.params
    psi_e = maximally_uncertain_estimate(params.n_particles, estimate_seed)
    interval = None if sample_interval is None else sample_interval * params.rabi_period
    return propagate_estimate(psi_e, record, params, reference=reference, sample_interval=interval)


# plot-ready output

_TIMESERIES_DOC = {
    "t": "time in Rabi periods",
    "jx_c": "<Jx> of the conditioned (true) state",
    "jy_c": "<Jy> of the conditioned state",
    "jz_c": "<Jz> of the conditioned state (half the population imbalance)",
    "jx_e": "<Jx> of the estimate",
    "jy_e": "<Jy> of the estimate",
    "jz_e": "<Jz> of the estimate",
    "fidelity": "|<psi_c|psi_e>|^2",
    "purity": "one-body purity of the conditioned state",
    "purity_e": "one-body purity of the estimate",
}


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(names)}


def _write_csv(path: Path, cols: dict[str, np.ndarray]) -> None:
    np.savetxt(
        path, np.column_stack(list(cols.values())), delimiter=",", header=",".join(cols), comments="", fmt="%.17g"
    )


def emit_plot_data(run_dir) -> Path:
    """Write flat, documented CSVs for plotting into ``run_dir/plot``.

    Raises
    ------
    IncompleteRunError
        If the run directory has no manifest or misses listed files.
    """
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    config = ExperimentConfig.load(run_dir / "config.json")
    out = run_dir / "plot"
    out.mkdir(exist_ok=True)
    schema: dict[str, dict] = {}
    n = config.params.n_particles

    if manifest["kind"] == "experiment":
        traj = _read_csv(run_dir / "trajectory.csv")
        series = {"t": traj["t"]}
        for key, src in (
            ("jx_c", "jx_c"), ("jy_c", "jy_c"), ("jz_c", "jz_c"),
            ("jx_e", "jx_e"), ("jy_e", "jy_e"), ("jz_e", "jz_e"),
            ("fidelity", "fidelity"), ("purity", "purity_c"), ("purity_e", "purity_e"),
        ):
            if src in traj:
                series[key] = traj[src]
        _write_csv(out / "timeseries.csv", series)
        schema["timeseries.csv"] = {k: _TIMESERIES_DOC[k] for k in series}
        for suffix, label in (("c", "conditioned"), ("e", "estimate")):
            if f"jz_{suffix}" not in traj:
                continue
            path = {
                "t": traj["t"],
                "sx": 2 * traj[f"jx_{suffix}"] / n,
                "sy": 2 * traj[f"jy_{suffix}"] / n,
                "sz": 2 * traj[f"jz_{suffix}"] / n,
            }
            name = f"bloch_path_{label}.csv"
            _write_csv(out / name, path)
            schema[name] = {
                "t": "time in Rabi periods",
                "sx": f"2<Jx>/N of the {label} state",
                "sy": f"2<Jy>/N of the {label} state",
                "sz": f"2<Jz>/N of the {label} state",
            }
        for entry in manifest.get("wigner", []):
            for name in entry["files"]:
                if not name.endswith(".bin"):
                    continue
                grid = WignerGrid.load(run_dir / name)
                target = "wigner_" + Path(name).stem + ".csv"
                grid.to_csv(out / target)
                schema[target] = {
                    "theta": "polar angle (rad)",
                    "phi": "azimuthal angle (rad)",
                    "value": f"Wigner function at t = {entry['time']:.4f} t_R, unit sphere integral",
                }
    else:
        ens = _read_csv(run_dir / "ensemble.csv")
        _write_csv(out / "timeseries.csv", ens)
        schema["timeseries.csv"] = {
            "t": "time in Rabi periods",
            "jz_mean": "seed average of <Jz> (conditioned)",
            "jz_stderr": "standard error of the seed average",
            "fidelity_mean": "seed average of the estimator fidelity",
        }
        schema["timeseries.csv"] = {k: v for k, v in schema["timeseries.csv"].items() if k in ens}

    _write_gpe_portrait(out / "gpe_portrait.csv", config.params.interaction_u)
    schema["gpe_portrait.csv"] = {
        "orbit": "index of the mean-field orbit",
        "t": "time in Rabi periods",
        "sx": "Bloch x component",
        "sy": "Bloch y component",
        "sz": "Bloch z component",
    }
    (out / "schema.json").write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
    return out


def _write_gpe_portrait(path: Path, u: float) -> None:
    dt = 2 * np.pi * PORTRAIT_DT
    every = 10
    orbits = gpe_phase_portrait(u, sphere_initial_conditions(), 2 * np.pi * PORTRAIT_SPAN, dt, every)
    rows = []
    for k, orbit in enumerate(orbits):
        t = np.arange(len(orbit)) * every * PORTRAIT_DT
        rows.append(np.column_stack([np.full(len(orbit), k), t, orbit]))
    table = np.vstack(rows) if rows else np.empty((0, 5))
    np.savetxt(path, table, delimiter=",", header="orbit,t,sx,sy,sz", comments="", fmt=["%d"] + ["%.17g"] * 4)

