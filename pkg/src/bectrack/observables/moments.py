"""Expectation values, variances, Bloch vector, one-body purity, fidelity.

Functions accept either a state vector (1-D) or a density matrix (2-D).
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..spinspace import SpinOperators

_IMAG_TOL = 1e-10


class BlochState(NamedTuple):
    """Single-particle Bloch vector s = (2/N) <J>."""

    sx: float
    sy: float
    sz: float

    def norm(self) -> float:
        return float(np.sqrt(self.sx**2 + self.sy**2 + self.sz**2))


def _check_dim(state: np.ndarray, op: np.ndarray) -> None:
    if state.shape[0] != op.shape[0]:
        raise ValueError(f"dimension mismatch: state {state.shape}, operator {op.shape}")


def expectation(state: np.ndarray, op: np.ndarray) -> float:
    """<A> for a Hermitian A; the tiny imaginary round-off is discarded."""
    state = np.asarray(state)
    _check_dim(state, op)
    if state.ndim == 1:
        value = np.vdot(state, op @ state)
    else:
        value = np.trace(state @ op)
    if abs(value.imag) > _IMAG_TOL * max(1.0, abs(value.real)):
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}; operator not Hermitian?")
    return float(value.real)


def variance(state: np.ndarray, op: np.ndarray) -> float:
    """<A^2> - <A>^2, clamped at zero for round-off below 1e-12."""
    mean = expectation(state, op)
    var = expectation(state, op @ op) - mean**2
    if var < -1e-12 * max(1.0, mean**2):
        raise ValueError(f"negative variance {var:.3e}")
    return max(var, 0.0)


def bloch_vector(state: np.ndarray, ops: SpinOperators) -> BlochState:
    scale = 2.0 / ops.n_particles
    return BlochState(
        scale * expectation(state, ops.jx),
        scale * expectation(state, ops.jy),
        scale * expectation(state, ops.jz),
    )


def purity_from_bloch(s) -> float:
    sx, sy, sz = s
    return 0.5 * (1.0 + sx * sx + sy * sy + sz * sz)


def one_body_purity(state: np.ndarray, ops: SpinOperators) -> float:
    """p = (1 + |s|^2) / 2; 1 for coherent states, 1/2 when s = 0."""
    return purity_from_bloch(bloch_vector(state, ops))


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for two normalized pure states."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of rho - sigma."""
    eig = np.linalg.eigvalsh(rho - sigma)
    return 0.5 * float(np.abs(eig).sum())


def batch_moments(psi: np.ndarray, m: np.ndarray, ladder: np.ndarray) -> dict[str, np.ndarray]:
    """First and second moments of J for a stack of states ``psi`` (B, dim).

    ``ladder[i] = <m_i + 1|J+|m_i>``.  Uses the tridiagonal structure of
    J_x and J_y, so costs O(B * dim).
    """
    prob = psi.real**2 + psi.imag**2
    jz = prob @ m
    jz2 = prob @ (m * m)
    # <J+> = sum_m conj(c_{m+1}) c_m ladder_m
    jp = np.sum(np.conj(psi[:, 1:]) * psi[:, :-1] * ladder, axis=1)
    # <J+^2>
    l2 = ladder[:-1] * ladder[1:]
    jp2 = np.sum(np.conj(psi[:, 2:]) * psi[:, :-2] * l2, axis=1)
    # <J+J- + J-J+> = 2 <J^2 - Jz^2>
    j = (len(m) - 1) / 2
    jpm = 2 * (j * (j + 1) - jz2)
    jx, jy = jp.real, jp.imag
    # Jx^2 = (J+^2 + J-^2 + J+J- + J-J+)/4 ; Jy^2 = -(J+^2 + J-^2 - J+J- - J-J+)/4
    jx2 = (2 * jp2.real + jpm) / 4
    jy2 = (-2 * jp2.real + jpm) / 4
    return {
        "jx": jx,
        "jy": jy,
        "jz": jz,
        "var_jx": np.maximum(jx2 - jx**2, 0.0),
        "var_jy": np.maximum(jy2 - jy**2, 0.0),
        "var_jz": np.maximum(jz2 - jz**2, 0.0),
    }
