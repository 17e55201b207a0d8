"""Experiment configuration and its JSON file form.

User-facing times (``t_final``, ``dt``, ``sample_interval``, snapshot
times) are in Rabi periods t_R = 2 pi / K.  The file form is a single JSON
object with a fixed ``format`` tag and ``version``; unknown or missing keys
are rejected rather than silently defaulted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..rng import INITIAL
from ..spinspace import ModelParams, coherent_state, fock_state, random_phase_state

CONFIG_FORMAT = "bectrack-config"
CONFIG_VERSION = 1
MAX_DT_MEASURED = 1e-2  # t_R; stability guard when gamma_bar > 0

INITIAL_KINDS = ("fock", "coherent", "random")


@dataclass(frozen=True)
class InitialState:
    """Recipe for the true initial state.

    ``fock`` uses ``m`` (default +j, all atoms in the first well);
    ``coherent`` uses ``theta`` and ``phi``; ``random`` draws uniform phases
    with equal weights from the trajectory seed (on a stream distinct
    from the estimator's).
    """

    kind: str = "fock"
    m: float | None = None
    theta: float | None = None
    phi: float | None = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"initial state kind must be one of {INITIAL_KINDS}, got {self.kind!r}")
        if self.kind == "coherent" and (self.theta is None or self.phi is None):
            raise ValueError("coherent initial state needs theta and phi")
        if self.kind != "coherent" and (self.theta is not None or self.phi is not None):
            raise ValueError(f"theta/phi are only meaningful for coherent states, not {self.kind!r}")
        if self.kind != "fock" and self.m is not None:
            raise ValueError(f"m is only meaningful for Fock states, not {self.kind!r}")

    def build(self, n_particles: int, seed: int = 0) -> np.ndarray:
        if self.kind == "fock":
            return fock_state(n_particles, n_particles / 2 if self.m is None else self.m)
        if self.kind == "coherent":
            return coherent_state(n_particles, self.theta, self.phi)
        return random_phase_state(n_particles, seed, INITIAL)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}


def _is_multiple(value: float, step: float) -> bool:
    n = round(value / step)
    return n >= 1 and abs(n * step - value) <= 1e-9 * max(1.0, value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to regenerate a run.

    Parameters
    ----------
    params : ModelParams
        Physical constants.
    t_final, dt : float
        Horizon and time step, in Rabi periods.
    seed : int
        Seed of the (first) trajectory.  Ensembles use ``seed, seed+1, ...``
        unless ``seeds`` is given explicitly.
    seed_count : int
        Number of trajectories for ensembles.
    initial_state : InitialState
        True initial state.
    estimator : bool
        Propagate a maximally uncertain estimate alongside the true state.
    wigner_times : tuple of float
        Times (t_R) at which Wigner grids are written.
    density_times : tuple of float
        Times (t_R) at which ensembles store the trajectory-averaged
        density matrix.
    sample_interval : float
        Logging cadence in t_R.
    output_dir : str or None
        Run directory; ``None`` derives one under the default output root.
    seeds : tuple of int or None
        Explicit ensemble seeds (overrides ``seed``/``seed_count``).
    """

    params: ModelParams
    t_final: float
    dt: float
    seed: int = 1
    seed_count: int = 1
    initial_state: InitialState = field(default_factory=InitialState)
    estimator: bool = True
    wigner_times: tuple[float, ...] = ()
    density_times: tuple[float, ...] = ()
    sample_interval: float = 1e-2
    output_dir: str | None = None
    seeds: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "wigner_times", tuple(float(t) for t in self.wigner_times))
        object.__setattr__(self, "density_times", tuple(float(t) for t in self.density_times))
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        for name in ("t_final", "dt", "sample_interval"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.params.gamma_bar > 0 and not self.dt < MAX_DT_MEASURED:
            raise ValueError(f"dt must be below {MAX_DT_MEASURED} t_R when measuring, got {self.dt}")
        if not _is_multiple(self.t_final, self.dt):
            raise ValueError(f"t_final={self.t_final} is not an integer multiple of dt={self.dt}")
        if not _is_multiple(self.sample_interval, self.dt):
            raise ValueError(f"sample_interval={self.sample_interval} is not an integer multiple of dt={self.dt}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed}")
        if int(self.seed_count) != self.seed_count or self.seed_count < 1:
            raise ValueError(f"seed_count must be a positive integer, got {self.seed_count}")
        if self.seeds is not None:
            if not self.seeds or min(self.seeds) < 0:
                raise ValueError("explicit seeds must be a non-empty list of non-negative integers")
            if len(set(self.seeds)) != len(self.seeds):
                raise ValueError("explicit seeds must be distinct")
        for t in self.wigner_times + self.density_times:
            if not 0 <= t <= self.t_final:
                raise ValueError(f"snapshot time {t} outside [0, {self.t_final}]")

    # derived quantities
    @property
    def gamma(self) -> float:
        return self.params.gamma

    @property
    def interaction_U(self) -> float:
        return self.params.interaction_U

    @property
    def model_dt(self) -> float:
        return self.dt * self.params.rabi_period

    @property
    def model_t_final(self) -> float:
        return round(self.t_final / self.dt) * self.model_dt

    @property
    def model_sample_interval(self) -> float:
        return round(self.sample_interval / self.dt) * self.model_dt

    @property
    def ensemble_seeds(self) -> tuple[int, ...]:
        if self.seeds is not None:
            return self.seeds
        return tuple(range(self.seed, self.seed + self.seed_count))

    def with_updates(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    # file form
    def to_dict(self) -> dict:
        return {
            "format": CONFIG_FORMAT,
            "version": CONFIG_VERSION,
            "params": self.params.as_dict(),
            "t_final": float(self.t_final),
            "dt": float(self.dt),
            "seed": int(self.seed),
            "seed_count": int(self.seed_count),
            "initial_state": self.initial_state.as_dict(),
            "estimator": bool(self.estimator),
            "wigner_times": list(self.wigner_times),
            "density_times": list(self.density_times),
            "sample_interval": float(self.sample_interval),
            "output_dir": self.output_dir,
            "seeds": None if self.seeds is None else list(self.seeds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if data.get("format") != CONFIG_FORMAT:
            raise ValueError(f"not a {CONFIG_FORMAT} document")
        if data.get("version") != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {data.get('version')!r}")
        expected = {f.name for f in fields(cls)} | {"format", "version"}
        unknown = set(data) - expected
        missing = {"params", "t_final", "dt"} - set(data)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if missing:
            raise ValueError(f"missing config keys: {sorted(missing)}")
        body = {k: v for k, v in data.items() if k not in ("format", "version")}
        body["params"] = ModelParams(**body["params"])
        if "initial_state" in body:
            body["initial_state"] = InitialState(**body["initial_state"])
        for key in ("wigner_times", "density_times"):
            if key in body:
                body[key] = tuple(body[key])
        if body.get("seeds") is not None:
            body["seeds"] = tuple(body["seeds"])
        return cls(**body)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def digest(self) -> str:
        """Hash of the physics-relevant content (output location excluded)."""
        body = self.to_dict()
        body.pop("output_dir")
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:12]
