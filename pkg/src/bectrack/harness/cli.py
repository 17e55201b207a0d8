"""Command-line entry point (``bectrack``).

Examples
--------
    bectrack preset fig2 --output runs/fig2 --plot
    bectrack run -N 10 --interaction 1 --gamma-bar 1 --t-final 5 --dt 1e-3
    bectrack estimate runs/fig2/record.bin --estimate-seed 7
    bectrack ensemble -N 10 --gamma-bar 1 --t-final 5 --seed-count 100 --density-at 5
    bectrack gpe --interaction 1 --t-final 5 --output portrait.csv
    bectrack wigner -N 20 --state coherent --theta 1.0 --phi 0.5 --output wig
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..dynamics import MeasurementRecord, gpe_phase_portrait
from ..dynamics.gpe import sphere_initial_conditions
from ..observables import BlochState, wigner_function
from .config import INITIAL_KINDS, ExperimentConfig, InitialState
from .presets import PRESETS, preset
from .runner import emit_plot_data, replay_estimate, run_ensemble, run_experiment

_DEFAULTS = {
    "format": "bectrack-config",
    "version": 1,
    "params": {"n_particles": 100, "interaction_u": 0.0, "tunneling_k": 1.0, "gamma_bar": 1.0, "bias_epsilon": 1e-2},
    "t_final": 60.0,
    "dt": 1e-3,
}

# flag dest -> ModelParams field
_PARAM_FLAGS = {
    "n_particles": "n_particles",
    "interaction": "interaction_u",
    "tunneling": "tunneling_k",
    "gamma_bar": "gamma_bar",
    "bias": "bias_epsilon",
}
_TOP_FLAGS = ("t_final", "dt", "seed", "seed_count", "sample_interval")


def add_config_arguments(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--config", type=Path, help="JSON config file; other flags override it")
    g.add_argument("-N", "--n-particles", type=int, help="number of bosons")
    g.add_argument("-u", "--interaction", type=float, help="normalized interaction u = UN/K")
    g.add_argument("-K", "--tunneling", type=float, help="tunneling rate K")
    g.add_argument("--gamma-bar", type=float, help="normalized measurement strength")
    g.add_argument("--bias", type=float, help="symmetry-breaking coefficient epsilon")
    g.add_argument("--t-final", type=float, help="horizon in Rabi periods")
    g.add_argument("--dt", type=float, help="time step in Rabi periods")
    g.add_argument("--seed", type=int)
    g.add_argument("--seed-count", type=int)
    g.add_argument("--initial", choices=INITIAL_KINDS, help="true initial state")
    g.add_argument("--m", type=float, help="Jz eigenvalue for a Fock initial state")
    g.add_argument("--theta", type=float, help="polar angle for a coherent initial state")
    g.add_argument("--phi", type=float, help="azimuth for a coherent initial state")
    g.add_argument("--no-estimator", action="store_true", help="do not propagate an estimate")
    g.add_argument("--wigner-at", type=float, action="append", default=None, help="Wigner snapshot time (t_R)")
    g.add_argument("--density-at", type=float, action="append", default=None, help="ensemble density time (t_R)")
    g.add_argument("--sample-interval", type=float, help="logging cadence (t_R)")
    g.add_argument("--output", type=str, help="run directory")


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data = ExperimentConfig.load(args.config).to_dict() if args.config else json.loads(json.dumps(_DEFAULTS))
    for dest, key in _PARAM_FLAGS.items():
        value = getattr(args, dest)
        if value is not None:
            data["params"][key] = value
    for dest in _TOP_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            data[dest] = value
    if args.initial is not None:
        init = {"kind": args.initial}
        for key in ("m", "theta", "phi"):
            if getattr(args, key) is not None:
                init[key] = getattr(args, key)
        data["initial_state"] = init
    if args.no_estimator:
        data["estimator"] = False
    if args.wigner_at is not None:
        data["wigner_times"] = args.wigner_at
    if args.density_at is not None:
        data["density_times"] = args.density_at
    if args.output is not None:
        data["output_dir"] = args.output
    return ExperimentConfig.from_dict(data)


def _cmd_run(args) -> int:
    result = run_experiment(config_from_args(args))
    if args.plot:
        emit_plot_data(result.run_dir)
    print(result.run_dir)
    return 0


def _cmd_preset(args) -> int:
    result = run_experiment(preset(args.name, seed=args.seed, output_dir=args.output))
    if args.plot:
        emit_plot_data(result.run_dir)
    print(result.run_dir)
    return 0


def _cmd_estimate(args) -> int:
    path = Path(args.record)
    record = MeasurementRecord.load_binary(path) if path.suffix == ".bin" else MeasurementRecord.load_csv(path)
    reference = None
    if args.reference is not None:
        config = ExperimentConfig.load(args.reference)
        reference = config.initial_state.build(record.params.n_particles, record.seed)
    log = replay_estimate(record, args.estimate_seed, reference=reference, sample_interval=args.sample_interval)
    out = Path(args.output) if args.output else path.with_name(f"estimate_{args.estimate_seed}.csv")
    log.to_csv(out)
    print(out)
    return 0


def _cmd_ensemble(args) -> int:
    summary = run_ensemble(config_from_args(args), workers=args.workers)
    print(summary.run_dir)
    if summary.convergence_times is not None:
        print(f"fraction converged by 30 t_R: {summary.fraction_converged(30.0):.3f}")
    return 0


def _cmd_gpe(args) -> int:
    if args.initial:
        ics = [BlochState(*(np.asarray(s) / np.linalg.norm(s))) for s in args.initial]
    else:
        ics = sphere_initial_conditions()
    every = args.sample_every
    orbits = gpe_phase_portrait(args.interaction, ics, 2 * np.pi * args.t_final, 2 * np.pi * args.dt, every)
    rows = [
        np.column_stack([np.full(len(o), k), np.arange(len(o)) * every * args.dt, o]) for k, o in enumerate(orbits)
    ]
    np.savetxt(
        args.output,
        np.vstack(rows) if rows else np.empty((0, 5)),
        delimiter=",",
        header="orbit,t,sx,sy,sz",
        comments="",
        fmt=["%d"] + ["%.17g"] * 4,
    )
    print(args.output)
    return 0


def _cmd_wigner(args) -> int:
    init = {"kind": args.state}
    for key in ("m", "theta", "phi"):
        if getattr(args, key) is not None:
            init[key] = getattr(args, key)
    psi = InitialState(**init).build(args.n_particles, args.seed)
    grid = wigner_function(psi, args.n_theta, args.n_phi)
    grid.to_csv(f"{args.output}.csv")
    grid.save(f"{args.output}.bin")
    print(f"{args.output}.csv")
    return 0


def _cmd_plot(args) -> int:
    print(emit_plot_data(args.run_dir))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bectrack", description="Measured double-well BEC: simulate and estimate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one trajectory with its record, log and Wigner grids")
    add_config_arguments(p)
    p.add_argument("--plot", action="store_true", help="also write plot-ready files")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", type=str)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("estimate", help="replay a stored record against a fresh estimate")
    p.add_argument("record", help="record.bin or record.csv")
    p.add_argument("--estimate-seed", type=int, default=0)
    p.add_argument("--reference", type=Path, help="config.json of the run, to log fidelity against the true state")
    p.add_argument("--sample-interval", type=float, help="logging cadence (t_R)")
    p.add_argument("--output", type=str)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("ensemble", help="many seeds with aggregates")
    add_config_arguments(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("gpe", help="mean-field phase portrait")
    p.add_argument("-u", "--interaction", type=float, default=0.0)
    p.add_argument("--t-final", type=float, default=5.0, help="Rabi periods")
    p.add_argument("--dt", type=float, default=1e-3, help="Rabi periods")
    p.add_argument("--sample-every", type=int, default=10)
    p.add_argument("--initial", type=float, nargs=3, action="append", metavar=("SX", "SY", "SZ"))
    p.add_argument("--output", default="gpe_portrait.csv")
    p.set_defaults(func=_cmd_gpe)

    p = sub.add_parser("wigner", help="Wigner grid of a Fock, coherent or random-phase state")
    p.add_argument("-N", "--n-particles", type=int, required=True)
    p.add_argument("--state", choices=INITIAL_KINDS, default="fock")
    p.add_argument("--m", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-phi", type=int)
    p.add_argument("--output", default="wigner")
    p.set_defaults(func=_cmd_wigner)

    p = sub.add_parser("plot", help="write plot-ready files for a finished run")
    p.add_argument("run_dir", type=Path)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"bectrack: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
