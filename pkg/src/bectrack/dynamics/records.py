"""Measurement records and trajectory logs, with their file formats.

Record file layout
------------------
CSV::

    # bectrack-record
    # {"format_version": 1, "n_particles": ..., "dt": ..., "seed": ..., ...}
    t,dI
    <t_1>,<dI_0>
    ...

where ``t_n = (n + 1) dt`` is the end of the n-th increment (units 1/K).
Binary: the 8-byte magic ``BECREC1\\n``, a little-endian uint32 giving the
length of a UTF-8 JSON header (same keys as the CSV header), then the dI
values as little-endian float64.

The signal is I(t) = 2 i(t) / gamma, a rescaled photo current i(t).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..spinspace import ModelParams

RECORD_FORMAT_VERSION = 1
_MAGIC = b"BECREC1\n"


def params_digest(params: ModelParams, dt: float) -> str:
    """Stable hash of everything an estimator must agree on with the record."""
    payload = dict(params.as_dict(), dt=float(dt).hex())
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MeasurementRecord:
    """Signal increments dI_n over [n dt, (n+1) dt], with provenance."""

    dt: float
    increments: np.ndarray
    seed: int
    params: ModelParams

    def __post_init__(self):
        inc = np.ascontiguousarray(self.increments, dtype=float)
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return len(self.increments)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MeasurementRecord):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.seed == other.seed
            and self.params == other.params
            and np.array_equal(self.increments, other.increments)
        )

    @property
    def t_final(self) -> float:
        return len(self.increments) * self.dt

    @property
    def digest(self) -> str:
        return params_digest(self.params, self.dt)

    def signal(self) -> np.ndarray:
        """Integrated signal I(t_n), starting from I(0) = 0."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])

    def coarsen(self, factor: int) -> "MeasurementRecord":
        """Merge ``factor`` consecutive increments (dt -> factor * dt)."""
        if factor < 1 or len(self) % factor:
            raise ValueError(f"record of length {len(self)} cannot be coarsened by {factor}")
        merged = self.increments.reshape(-1, factor).sum(axis=1)
        return MeasurementRecord(self.dt * factor, merged, self.seed, self.params)

    def header(self) -> dict:
        return {
            "format_version": RECORD_FORMAT_VERSION,
            **self.params.as_dict(),
            "dt": float(self.dt),
            "seed": int(self.seed),
            "length": len(self),
        }

    def save_csv(self, path) -> None:
        t = self.dt * np.arange(1, len(self) + 1)
        with open(path, "w") as fh:
            fh.write("# bectrack-record\n")
            fh.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            fh.write("t,dI\n")
            # repr of a Python float is the shortest string that round-trips
            for ti, di in zip(t.tolist(), self.increments.tolist()):
                fh.write(f"{ti!r},{di!r}\n")

    def save_binary(self, path) -> None:
        blob = json.dumps(self.header(), sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(blob).to_bytes(4, "little"))
            fh.write(blob)
            fh.write(self.increments.astype("<f8").tobytes())

    @classmethod
    def _from_header(cls, header: dict, increments: np.ndarray) -> "MeasurementRecord":
        if header.get("format_version", 0) > RECORD_FORMAT_VERSION:
            raise ValueError(f"unsupported record format version {header['format_version']}")
        if header["length"] != len(increments):
            raise ValueError(
                f"record header says {header['length']} increments, found {len(increments)}"
            )
        params = ModelParams(
            n_particles=header["n_particles"],
            interaction_u=header["interaction_u"],
            tunneling_k=header["tunneling_k"],
            gamma_bar=header["gamma_bar"],
            bias_epsilon=header["bias_epsilon"],
        )
        return cls(header["dt"], increments, header["seed"], params)

    @classmethod
    def load_csv(cls, path) -> "MeasurementRecord":
        with open(path) as fh:
            first = fh.readline()
            if not first.startswith("# bectrack-record"):
                raise ValueError(f"{path}: not a measurement record")
            header = json.loads(fh.readline()[2:])
            if fh.readline().strip() != "t,dI":
                raise ValueError(f"{path}: missing column header")
            values = [float(line.split(",")[1]) for line in fh if line.strip()]
        return cls._from_header(header, np.array(values, dtype=float))

    @classmethod
    def load_binary(cls, path) -> "MeasurementRecord":
        raw = Path(path).read_bytes()
        if not raw.startswith(_MAGIC):
            raise ValueError(f"{path}: not a binary measurement record")
        pos = len(_MAGIC)
        size = int.from_bytes(raw[pos : pos + 4], "little")
        header = json.loads(raw[pos + 4 : pos + 4 + size])
        increments = np.frombuffer(raw[pos + 4 + size :], dtype="<f8").astype(float)
        return cls._from_header(header, increments)


@dataclass(frozen=True)
class StateSeries:
    """Sampled moments of one state (conditioned or estimated)."""

    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    var_jx: np.ndarray
    var_jy: np.ndarray
    var_jz: np.ndarray
    purity: np.ndarray
    # mean |norm - 1| before renormalization over the steps ending at each sample
    norm_drift: np.ndarray

    def bloch(self, n_particles: int) -> np.ndarray:
        return (2.0 / n_particles) * np.column_stack([self.jx, self.jy, self.jz])


@dataclass(frozen=True)
class Snapshot:
    time: float  # t_R
    conditioned: np.ndarray | None
    estimate: np.ndarray | None


@dataclass(frozen=True)
class TrajectoryLog:
    """Observables sampled along a trajectory; ``times`` in Rabi periods."""

    times: np.ndarray
    conditioned: StateSeries | None = None
    estimate: StateSeries | None = None
    fidelity: np.ndarray | None = None
    conditioned_states: np.ndarray | None = None
    estimate_states: np.ndarray | None = None
    snapshots: tuple[Snapshot, ...] = field(default_factory=tuple)

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.times}
        for suffix, series in (("c", self.conditioned), ("e", self.estimate)):
            if series is None:
                continue
            for f in fields(StateSeries):
                cols[f"{f.name}_{suffix}"] = getattr(series, f.name)
        if self.fidelity is not None:
            cols["fidelity"] = self.fidelity
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        table = np.column_stack(list(cols.values()))
        np.savetxt(path, table, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")

    def snapshot(self, time: float) -> Snapshot:
        """The stored snapshot closest to ``time`` (t_R)."""
        if not self.snapshots:
            raise LookupError("no snapshots stored in this log")
        return min(self.snapshots, key=lambda s: abs(s.time - time))
