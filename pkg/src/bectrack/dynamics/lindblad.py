"""Ensemble-averaged (master-equation) dynamics of the measured condensate.

    d rho/dt = -i [H, rho] + gamma/4 (Jz rho Jz - {Jz^2, rho}/2)
             = -i [H, rho] - gamma/8 [Jz, [Jz, rho]],

the Ito average of the conditioned SSE.  Coherences rho_{m m'} are damped at
rate gamma/8 (m - m')^2.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from ..spinspace import ModelParams, angular_momentum_operators, build_hamiltonian
from .sse import unitary_propagator, _steps

EXPM_MAX_DIM = 40


def _check_density(rho: np.ndarray) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1) > 1e-10:
        raise ValueError(f"density matrix has trace {np.trace(rho).real}")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix is not positive semidefinite")


def liouvillian(h: np.ndarray, jz_diag: np.ndarray, gamma: float) -> np.ndarray:
    """Generator acting on row-major vec(rho): vec(A rho B) = (A kron B^T) vec(rho)."""
    dim = h.shape[0]
    eye = np.eye(dim)
    jz = np.diag(jz_diag).astype(complex)
    jz2 = jz @ jz
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    lv += 0.25 * gamma * (np.kron(jz, jz.T) - 0.5 * np.kron(jz2, eye) - 0.5 * np.kron(eye, jz2.T))
    return lv


def lindblad_solve(
    initial_density: np.ndarray,
    params: ModelParams,
    t_final: float,
    dt: float,
    *,
    hamiltonian: np.ndarray | None = None,
    method: str = "auto",
    stride: int = 1,
) -> np.ndarray:
    """Density matrices at times ``k * stride * dt`` for k = 0, 1, ...

    Parameters
    ----------
    initial_density : ndarray
        Hermitian, unit-trace, positive semidefinite (dim, dim) matrix.
    params : ModelParams
        Supplies gamma and, unless ``hamiltonian`` is given, H.
    t_final, dt : float
        Model time units; ``t_final`` must be a multiple of ``dt``.
    hamiltonian : ndarray, optional
        Overrides the Bose-Hubbard Hamiltonian (e.g. zeros for the pure
        dissipator).
    method : {"auto", "expm", "split"}
        ``expm`` exponentiates the full Liouvillian once (dim <= 40 for
        "auto"); ``split`` uses a Strang splitting of the exact unitary and
        exact dephasing maps, both trace preserving and completely positive.

    Returns
    -------
    ndarray of shape (n_out, dim, dim)
    """
    rho = np.array(initial_density, dtype=complex)
    _check_density(rho)
    if rho.shape[0] != params.dim:
        raise ValueError("density matrix dimension does not match params")
    n_steps = _steps(t_final, dt)
    if stride < 1 or n_steps % stride:
        raise ValueError("stride must divide the number of steps")
    ops = angular_momentum_operators(params.n_particles)
    h = build_hamiltonian(params, ops) if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    gamma = params.gamma
    m = ops.m
    dim = params.dim
    if method == "auto":
        method = "expm" if dim <= EXPM_MAX_DIM else "split"

    out = np.empty((n_steps // stride + 1, dim, dim), dtype=complex)
    out[0] = rho
    if method == "expm":
        prop = expm(liouvillian(h, m, gamma) * dt)
        vec = rho.reshape(-1)
        for n in range(1, n_steps + 1):
            vec = prop @ vec
            if n % stride == 0:
                out[n // stride] = vec.reshape(dim, dim)
    elif method == "split":
        u = unitary_propagator(h, dt)
        ud = u.conj().T
        half = np.exp(-0.0625 * gamma * np.subtract.outer(m, m) ** 2 * dt)
        for n in range(1, n_steps + 1):
            rho = half * (u @ (half * rho) @ ud)
            if n % stride == 0:
                out[n // stride] = rho
    else:
        raise ValueError(f"unknown method {method!r}")
    # enforce exact Hermiticity lost to round-off
    out = 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))
    drift = np.max(np.abs(np.trace(out, axis1=1, axis2=2).real - 1))
    if drift > 1e-9:
        raise RuntimeError(f"trace drifted by {drift:.2e}")
    return out
