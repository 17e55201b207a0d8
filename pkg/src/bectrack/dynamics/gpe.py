"""Mean-field (discrete Gross-Pitaevskii) dynamics on the Bloch sphere.

In time units of 1/K,

    ds_x/dt = -u s_y s_z,   ds_y/dt = s_z + u s_x s_z,   ds_z/dt = -s_y,

which conserves |s| and E = (u/2) s_z^2 - s_x.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..observables.moments import BlochState


def gpe_rhs(s: np.ndarray, u: float) -> np.ndarray:
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([-u * sy * sz, sz + u * sx * sz, -sy], axis=-1)


def gpe_energy(s, u: float):
    s = np.asarray(s, dtype=float)
    return 0.5 * u * s[..., 2] ** 2 - s[..., 0]


def _rk4(s: np.ndarray, u: float, dt: float) -> np.ndarray:
    k1 = gpe_rhs(s, u)
    k2 = gpe_rhs(s + 0.5 * dt * k1, u)
    k3 = gpe_rhs(s + 0.5 * dt * k2, u)
    k4 = gpe_rhs(s + dt * k3, u)
    return s + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_unit(s: np.ndarray) -> None:
    drift = np.max(np.abs(np.linalg.norm(s, axis=-1) - 1.0))
    if drift > 1e-6:
        warnings.warn(f"Bloch vector length deviates from 1 by {drift:.2e}", stacklevel=3)


def gpe_step(s, u: float, dt: float) -> BlochState:
    """One classical fourth-order Runge-Kutta step."""
    arr = np.asarray(s, dtype=float)
    _check_unit(arr)
    return BlochState(*(float(x) for x in _rk4(arr, u, dt)))


def gpe_integrate(s0, u: float, t_final: float, dt: float, sample_every: int = 1) -> np.ndarray:
    """Trajectories for one or many initial vectors.

    ``s0`` has shape (3,) or (n, 3); the result has shape (samples, 3) or
    (samples, n, 3) with samples at t = k * sample_every * dt.
    """
    s = np.array(s0, dtype=float)
    _check_unit(s)
    n_steps = int(round(t_final / dt))
    out = [s.copy()]
    for n in range(1, n_steps + 1):
        s = _rk4(s, u, dt)
        if n % sample_every == 0:
            out.append(s.copy())
    return np.array(out)


def gpe_phase_portrait(
    u: float,
    initial_conditions,
    t_final: float,
    dt: float = 2 * np.pi * 1e-3,
    sample_every: int = 10,
) -> list[np.ndarray]:
    """Mean-field orbits through each initial Bloch vector, as (samples, 3) arrays."""
    initial = [np.asarray(s, dtype=float) for s in initial_conditions]
    if not initial:
        return []
    traj = gpe_integrate(np.stack(initial), u, t_final, dt, sample_every)
    return [traj[:, i, :] for i in range(len(initial))]


def sphere_initial_conditions(n_theta: int = 7, n_phi: int = 8) -> list[BlochState]:
    """A spread of starting points covering the sphere, for portraits."""
    out = []
    for th in np.linspace(0.15, np.pi - 0.15, n_theta):
        for ph in np.linspace(0, 2 * np.pi, n_phi, endpoint=False):
            out.append(BlochState(np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)))
    return out
