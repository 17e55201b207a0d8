"""Spin Wigner function on the Bloch sphere (multipole construction).

rho_W(theta, phi) = sqrt((2j+1)/(4 pi)) sum_{k,q} rho_kq Y_kq(theta, phi),
rho_kq = Tr(rho T_kq^dagger).  With this prefactor the function integrates
to one over the unit sphere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre, sph_harm_y

from .clebsch import multipoles

WIGNER_FORMAT_VERSION = 1
_MAGIC = b"BECWIG1\n"


@dataclass(frozen=True)
class WignerGrid:
    """Wigner function sampled on a Gauss-Legendre x uniform grid.

    ``values[i, k]`` is rho_W at ``(theta[i], phi[k])``.  ``theta_weights``
    are the Gauss-Legendre weights in cos(theta).
    """

    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray
    theta_weights: np.ndarray

    def integral(self) -> float:
        dphi = 2 * np.pi / len(self.phi)
        return float(self.theta_weights @ self.values.sum(axis=1) * dphi)

    def argmax(self) -> tuple[float, float]:
        i, k = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.theta[i]), float(self.phi[k])

    def to_csv(self, path) -> None:
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        table = np.column_stack([th.ravel(), ph.ravel(), self.values.ravel()])
        np.savetxt(path, table, delimiter=",", header="theta,phi,value", comments="", fmt="%.17g")

    def save(self, path) -> None:
        """JSON header + little-endian float64 payload (theta, phi, weights, values)."""
        header = {
            "format_version": WIGNER_FORMAT_VERSION,
            "n_theta": len(self.theta),
            "n_phi": len(self.phi),
            "layout": "theta[n_theta], phi[n_phi], theta_weights[n_theta], values[n_theta, n_phi] row-major",
            "dtype": "<f8",
        }
        blob = json.dumps(header, sort_keys=True).encode()
        payload = np.concatenate(
            [self.theta, self.phi, self.theta_weights, self.values.ravel()]
        ).astype("<f8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(len(blob).to_bytes(4, "little"))
            fh.write(blob)
            fh.write(payload.tobytes())

    @classmethod
    def load(cls, path) -> "WignerGrid":
        raw = Path(path).read_bytes()
        if not raw.startswith(_MAGIC):
            raise ValueError(f"{path}: not a Wigner grid file")
        pos = len(_MAGIC)
        size = int.from_bytes(raw[pos : pos + 4], "little")
        header = json.loads(raw[pos + 4 : pos + 4 + size])
        if header["format_version"] > WIGNER_FORMAT_VERSION:
            raise ValueError(f"unsupported Wigner format version {header['format_version']}")
        data = np.frombuffer(raw[pos + 4 + size :], dtype="<f8")
        nt, nph = header["n_theta"], header["n_phi"]
        theta, phi = data[:nt], data[nt : nt + nph]
        weights = data[nt + nph : 2 * nt + nph]
        values = data[2 * nt + nph :].reshape(nt, nph)
        return cls(theta.copy(), phi.copy(), values.copy(), weights.copy())


@lru_cache(maxsize=16)
def _harmonics_at(two_j: int, theta_bytes: bytes) -> np.ndarray:
    """Y_kq(theta, 0) indexed [k, q + 2j, i]; real because phi = 0."""
    theta = np.frombuffer(theta_bytes)
    k = np.arange(two_j + 1)[:, None, None]
    q = np.arange(-two_j, two_j + 1)[None, :, None]
    valid = np.abs(q) <= k
    y = sph_harm_y(k, np.where(valid, q, 0), theta[None, None, :], 0.0).real
    return np.where(valid, y, 0.0)


def _angular_sum(state: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """A[q, i] = sum_k rho_kq Y_kq(theta_i, 0) times the normalization."""
    state = np.asarray(state)
    two_j = state.shape[0] - 1
    rho_kq = multipoles(state)
    y = _harmonics_at(two_j, np.ascontiguousarray(theta, dtype=float).tobytes())
    pref = np.sqrt((two_j + 1) / (4 * np.pi))
    return pref * np.einsum("kq,kqi->qi", rho_kq, y)


def wigner_at(state: np.ndarray, theta, phi) -> np.ndarray:
    """Evaluate rho_W at arbitrary points (broadcast over theta and phi)."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    two_j = np.asarray(state).shape[0] - 1
    flat_t, flat_p = theta.ravel(), phi.ravel()
    a = _angular_sum(state, flat_t)  # (q, n)
    q = np.arange(-two_j, two_j + 1)[:, None]
    vals = np.sum(a * np.exp(1j * q * flat_p[None, :]), axis=0)
    return vals.real.reshape(theta.shape)


def wigner_function(state: np.ndarray, n_theta: int | None = None, n_phi: int | None = None) -> WignerGrid:
    """Sample the spin Wigner function of a pure state or density matrix.

    Parameters
    ----------
    state : ndarray
        State vector of length 2j+1 or (2j+1, 2j+1) density matrix.
    n_theta : int, optional
        Gauss-Legendre nodes in cos(theta); at least 2j+1 (default 2j+1).
    n_phi : int, optional
        Uniform azimuthal nodes; at least 2(2j+1) (default 2(2j+1)).
    """
    state = np.asarray(state)
    dim = state.shape[0]
    n_theta = dim if n_theta is None else int(n_theta)
    n_phi = 2 * dim if n_phi is None else int(n_phi)
    if n_theta < dim:
        raise ValueError(f"n_theta={n_theta} < 2j+1={dim}: grid would alias")
    if n_phi < 2 * dim:
        raise ValueError(f"n_phi={n_phi} < 2(2j+1)={2 * dim}: grid would alias")
    x, w = roots_legendre(n_theta)
    # ascending theta from the north pole
    theta = np.arccos(x[::-1])
    w = w[::-1].copy()
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    a = _angular_sum(state, theta)  # (q, theta)
    two_j = dim - 1
    q = np.arange(-two_j, two_j + 1)
    # sum_q a[q, i] e^{i q phi_k}
    phase = np.exp(1j * np.outer(q, phi))
    vals = a.T @ phase
    resid = np.max(np.abs(vals.imag)) if vals.size else 0.0
    scale = max(1.0, float(np.max(np.abs(vals.real))))
    if resid > 1e-8 * scale:
        raise RuntimeError(f"Wigner function has imaginary residue {resid:.3e}")
    return WignerGrid(theta=theta, phi=phi, values=vals.real.copy(), theta_weights=w)


def dominant_lobe_fraction(grid: WignerGrid, cap_radius: float = 0.5) -> float:
    """Share of the positive quasi-probability inside a cap around the maximum."""
    t0, p0 = grid.argmax()
    th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    cosang = np.cos(th) * np.cos(t0) + np.sin(th) * np.sin(t0) * np.cos(ph - p0)
    inside = cosang >= np.cos(cap_radius)
    pos = np.clip(grid.values, 0.0, None) * grid.theta_weights[:, None]
    total = pos.sum()
    return float(pos[inside].sum() / total) if total > 0 else 0.0
