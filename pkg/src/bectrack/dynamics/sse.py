"""Conditioned and estimator stochastic Schroedinger equations.

Both the real (conditioned) state and the estimate obey

    d|psi> = (-i H - gamma/8 (Jz - <Jz>)^2) dt |psi>
             + gamma/2 (Jz - <Jz>) (dI - <Jz> dt) |psi>,

with <.> taken in the state being propagated.  For the real state the
record increment is dI = <Jz>_c dt + gamma^(-1/2) dW.

Stepping (``scheme="exponential"``, the default) splits each step into the
measurement update followed by the exact unitary exp(-i H dt):

    psi <- exp(gamma/2 D (dI - <Jz> dt) - gamma/4 D^2 dt) psi,  D = Jz - <Jz>,

renormalized.  Expanding the exponential with dI^2 = dt/gamma reproduces the
Ito-Euler increment above term by term, but the update stays positive and
is exact in the absence of H.  ``scheme="euler"`` applies the literal
Euler-Maruyama increment (including -i H dt) and renormalizes; it is only
usable for small dt * ||H||.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict

import numpy as np
from scipy.linalg import eigh

from .. import rng as _rng
from ..observables.moments import batch_moments
from ..spinspace import ModelParams, SpinOperators, angular_momentum_operators, build_hamiltonian
from .records import MeasurementRecord, Snapshot, StateSeries, TrajectoryLog, params_digest

SCHEMES = ("exponential", "euler")
DEFAULT_SAMPLE_FRACTION = 1e-2  # of a Rabi period

_unitary_cache: OrderedDict = OrderedDict()


def _step_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    key = (hashlib.sha1(np.ascontiguousarray(h).tobytes()).hexdigest(), h.shape, float(dt))
    hit = _unitary_cache.get(key)
    if hit is not None:
        _unitary_cache.move_to_end(key)
        return hit
    u = unitary_propagator(h, dt)
    _unitary_cache[key] = u
    if len(_unitary_cache) > 32:
        _unitary_cache.popitem(last=False)
    return u


def unitary_propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) from the eigendecomposition of the Hermitian ``h``."""
    if not np.allclose(h, h.conj().T, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise ValueError("Hamiltonian is not Hermitian")
    try:
        w, v = eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"eigendecomposition failed: {exc}") from exc
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def unitary_propagate(initial: np.ndarray, h: np.ndarray, t):
    """Apply exp(-i H t).  ``t`` may be a scalar or a 1-D array of times.

    For an array of times, returns an array of shape ``(len(t), dim)``.
    """
    if not np.allclose(h, h.conj().T, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = eigh(h)
    coeff = v.conj().T @ np.asarray(initial, dtype=complex)
    t_arr = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t_arr, w))
    return (phases * coeff) @ v.T


class Stepper:
    """One integrator step for a stack of states of shape ``(B, dim)``."""

    def __init__(self, h: np.ndarray, m: np.ndarray, gamma: float, dt: float, scheme: str = "exponential"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        if not dt > 0:
            raise ValueError("dt must be positive")
        if gamma < 0:
            raise ValueError("gamma must be non-negative")
        self.h = h
        self.m = np.asarray(m, dtype=float)
        self.m2 = self.m**2
        self.gamma = float(gamma)
        self.dt = float(dt)
        self.scheme = scheme
        if scheme == "exponential":
            self._ut = _step_unitary(h, dt).T.copy()
        else:
            self._ht = h.T.copy()

    def jz(self, psi: np.ndarray) -> np.ndarray:
        return (psi.real**2 + psi.imag**2) @ self.m

    def record_increment(self, psi: np.ndarray, dw: np.ndarray) -> np.ndarray:
        """dI = <Jz> dt + gamma^(-1/2) dW (noise-free <Jz> dt when gamma = 0)."""
        mean = self.jz(psi) * self.dt
        if self.gamma == 0:
            return mean
        return mean + dw / np.sqrt(self.gamma)

    def __call__(self, psi: np.ndarray, d_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Advance by dt given record increments; returns (psi, norm drift)."""
        g, dt = self.gamma, self.dt
        if self.scheme == "euler":
            a = self.jz(psi)
            dev = self.m[None, :] - a[:, None]
            innov = (d_i - a * dt)[:, None]
            phi = psi + (0.5 * g * dev * innov - 0.125 * g * dev * dev * dt) * psi - 1j * dt * (psi @ self._ht)
            nrm = np.linalg.norm(phi, axis=1)
        elif g == 0:
            phi = psi
            nrm = np.ones(psi.shape[0])
        else:
            a = self.jz(psi)
            dev = self.m[None, :] - a[:, None]
            expo = 0.5 * g * dev * (d_i - a * dt)[:, None] - 0.25 * g * dev * dev * dt
            shift = expo.max(axis=1, keepdims=True)
            phi = psi * np.exp(expo - shift)
            nrm = np.linalg.norm(phi, axis=1) * np.exp(shift[:, 0])
        if not np.all(np.isfinite(nrm)) or np.any(nrm == 0):
            raise FloatingPointError("state norm became zero or non-finite; reduce dt")
        phi = phi / np.linalg.norm(phi, axis=1)[:, None]
        if self.scheme == "exponential":
            phi = phi @ self._ut
        return phi, nrm - 1.0


def sse_step(state, h, ops: SpinOperators, gamma: float, dt: float, dW: float, *, scheme: str = "exponential"):
    """Single conditioned step; returns ``(new_state, dI)``."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (ops.dim,) or h.shape != (ops.dim, ops.dim):
        raise ValueError("state, Hamiltonian and operators have inconsistent dimensions")
    if not np.isfinite(dW):
        raise ValueError("dW must be finite")
    stepper = Stepper(h, ops.m, gamma, dt, scheme)
    psi = state[None, :]
    d_i = stepper.record_increment(psi, np.array([dW]))
    new, _ = stepper(psi, d_i)
    return new[0], float(d_i[0])


def _ladder(n_particles: int) -> np.ndarray:
    j = n_particles / 2
    m = np.arange(n_particles + 1) - j
    return np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))


def _steps(t_final: float, dt: float, what: str = "t_final") -> int:
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"{what}={t_final} is not a positive integer multiple of dt={dt}")
    return n


def _sample_stride(params: ModelParams, dt: float, sample_interval: float | None) -> int:
    if sample_interval is None:
        sample_interval = DEFAULT_SAMPLE_FRACTION * params.rabi_period
        return max(1, int(round(sample_interval / dt)))
    return _steps(sample_interval, dt, "sample_interval")


class _Recorder:
    """Accumulates sampled moments for a batch of states."""

    def __init__(self, n_particles: int, n_samples: int, batch: int, store_states: bool, snap_idx):
        self.n = n_particles
        self.ladder = _ladder(n_particles)
        self.m = np.arange(n_particles + 1) - n_particles / 2
        self.keys = ("jx", "jy", "jz", "var_jx", "var_jy", "var_jz")
        self.data = {k: np.empty((n_samples, batch)) for k in self.keys}
        self.drift = np.zeros((n_samples, batch))
        self.states = np.empty((n_samples, batch, n_particles + 1), complex) if store_states else None
        self.snap_idx = snap_idx
        self.snaps: dict[int, np.ndarray] = {}
        self._acc = np.zeros(batch)
        self._count = 0

    def add_drift(self, drift: np.ndarray) -> None:
        self._acc += np.abs(drift)
        self._count += 1

    def sample(self, k: int, psi: np.ndarray) -> None:
        mom = batch_moments(psi, self.m, self.ladder)
        for key in self.keys:
            self.data[key][k] = mom[key]
        self.drift[k] = self._acc / self._count if self._count else 0.0
        self._acc[:] = 0.0
        self._count = 0
        if self.states is not None:
            self.states[k] = psi
        if k in self.snap_idx:
            self.snaps[k] = psi.copy()

    def series(self, b: int) -> StateSeries:
        cols = {key: self.data[key][:, b].copy() for key in self.keys}
        s2 = (2.0 / self.n) ** 2 * (cols["jx"] ** 2 + cols["jy"] ** 2 + cols["jz"] ** 2)
        return StateSeries(**cols, purity=0.5 * (1.0 + s2), norm_drift=self.drift[:, b].copy())


def _integrate(
    params: ModelParams,
    dt: float,
    n_steps: int,
    stride: int,
    psi_c: np.ndarray | None,
    psi_e: np.ndarray | None,
    noise: np.ndarray | None,
    increments: np.ndarray | None,
    scheme: str,
    store_states: bool,
    snapshot_times,
):
    """Shared loop.  Exactly one of ``noise`` / ``increments`` is given, shape (n_steps, B)."""
    ops = angular_momentum_operators(params.n_particles)
    h = build_hamiltonian(params, ops)
    stepper = Stepper(h, ops.m, params.gamma, dt, scheme)
    batch = (psi_c if psi_c is not None else psi_e).shape[0]
    n_samples = n_steps // stride + 1
    t_r = params.rabi_period
    sample_times = np.arange(n_samples) * stride * dt / t_r
    snap_idx = {int(np.argmin(np.abs(sample_times - t))) for t in snapshot_times}
    rec_c = _Recorder(params.n_particles, n_samples, batch, store_states, snap_idx) if psi_c is not None else None
    rec_e = _Recorder(params.n_particles, n_samples, batch, store_states, snap_idx) if psi_e is not None else None
    fid = np.empty((n_samples, batch)) if (psi_c is not None and psi_e is not None) else None
    out_inc = np.empty((n_steps, batch)) if increments is None else None

    def sample(k):
        if rec_c is not None:
            rec_c.sample(k, psi_c)
        if rec_e is not None:
            rec_e.sample(k, psi_e)
        if fid is not None:
            fid[k] = np.minimum(np.abs(np.sum(np.conj(psi_c) * psi_e, axis=1)) ** 2, 1.0)

    sample(0)
    for n in range(n_steps):
        if increments is None:
            d_i = stepper.record_increment(psi_c, noise[n])
            out_inc[n] = d_i
        else:
            d_i = increments[n]
        if psi_c is not None:
            psi_c, drift = stepper(psi_c, d_i)
            rec_c.add_drift(drift)
        if psi_e is not None:
            psi_e, drift = stepper(psi_e, d_i)
            rec_e.add_drift(drift)
        if (n + 1) % stride == 0:
            sample((n + 1) // stride)

    logs = []
    for b in range(batch):
        snaps = tuple(
            Snapshot(
                time=float(sample_times[k]),
                conditioned=rec_c.snaps[k][b].copy() if rec_c is not None else None,
                estimate=rec_e.snaps[k][b].copy() if rec_e is not None else None,
            )
            for k in sorted(snap_idx)
        )
        logs.append(
            TrajectoryLog(
                times=sample_times.copy(),
                conditioned=rec_c.series(b) if rec_c is not None else None,
                estimate=rec_e.series(b) if rec_e is not None else None,
                fidelity=fid[:, b].copy() if fid is not None else None,
                conditioned_states=rec_c.states[:, b].copy() if (rec_c is not None and store_states) else None,
                estimate_states=rec_e.states[:, b].copy() if (rec_e is not None and store_states) else None,
                snapshots=snaps,
            )
        )
    return logs, out_inc


def _as_batch(states, dim: int, count: int) -> np.ndarray:
    arr = np.asarray(states, dtype=complex)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (count, arr.shape[0]))
    if arr.shape != (count, dim):
        raise ValueError(f"expected states of shape ({count}, {dim}), got {arr.shape}")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1) > 1e-10):
        raise ValueError("initial states must be normalized")
    return np.array(arr, dtype=complex)


def propagate_conditioned_batch(
    initial,
    params: ModelParams,
    t_final: float,
    dt: float,
    seeds,
    *,
    initial_estimates=None,
    sample_interval: float | None = None,
    scheme: str = "exponential",
    store_states: bool = False,
    snapshot_times=(),
):
    """Integrate independent trajectories side by side, one per seed.

    Times are in model units (1/K).  ``initial`` is one state (shared) or
    one per seed; likewise ``initial_estimates``.  Returns a list of
    ``(TrajectoryLog, MeasurementRecord)`` in seed order.
    """
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    n_steps = _steps(t_final, dt)
    stride = _sample_stride(params, dt, sample_interval)
    psi_c = _as_batch(initial, params.dim, len(seeds))
    psi_e = _as_batch(initial_estimates, params.dim, len(seeds)) if initial_estimates is not None else None
    noise = np.column_stack([_rng.wiener_increments(s, n_steps, dt) for s in seeds])
    logs, increments = _integrate(
        params, dt, n_steps, stride, psi_c, psi_e, noise, None, scheme, store_states, snapshot_times
    )
    return [
        (log, MeasurementRecord(dt, increments[:, b], seeds[b], params))
        for b, log in enumerate(logs)
    ]


def propagate_conditioned(
    initial,
    params: ModelParams,
    t_final: float,
    dt: float,
    seed: int,
    *,
    initial_estimate=None,
    sample_interval: float | None = None,
    scheme: str = "exponential",
    store_states: bool = False,
    snapshot_times=(),
) -> tuple[TrajectoryLog, MeasurementRecord]:
    """Integrate the conditioned SSE and synthesize its measurement record.

    If ``initial_estimate`` is given, the estimator is propagated alongside,
    slaved to the record as it is produced, and the log carries both states
    and their fidelity.  Times are in model units; the log reports Rabi
    periods.
    """
    ((log, record),) = propagate_conditioned_batch(
        initial,
        params,
        t_final,
        dt,
        [seed],
        initial_estimates=None if initial_estimate is None else [initial_estimate],
        sample_interval=sample_interval,
        scheme=scheme,
        store_states=store_states,
        snapshot_times=snapshot_times,
    )
    return log, record


def propagate_estimate(
    initial_estimate,
    record: MeasurementRecord,
    params: ModelParams,
    *,
    reference=None,
    sample_interval: float | None = None,
    scheme: str = "exponential",
    store_states: bool = False,
    snapshot_times=(),
) -> TrajectoryLog:
    """Run the estimator on a stored record.

    ``reference`` is an optional true initial state; it is replayed through
    the same record (reproducing the conditioned trajectory exactly) so that
    the log also contains the fidelity.
    """
    if params_digest(params, record.dt) != record.digest:
        raise ValueError(
            f"record was produced with {record.params} (dt={record.dt}); "
            f"estimator configured with {params}"
        )
    stride = _sample_stride(params, record.dt, sample_interval)
    if len(record) % stride:
        raise ValueError("record length is not a multiple of the sampling stride")
    psi_e = _as_batch(initial_estimate, params.dim, 1)
    psi_c = _as_batch(reference, params.dim, 1) if reference is not None else None
    logs, _ = _integrate(
        params,
        record.dt,
        len(record),
        stride,
        psi_c,
        psi_e,
        None,
        np.asarray(record.increments)[:, None],
        scheme,
        store_states,
        snapshot_times,
    )
    return logs[0]
