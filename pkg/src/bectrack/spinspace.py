"""Two-mode Bose-Hubbard model in the angular-momentum (Dicke) basis.

States are plain 1-D complex numpy arrays of length ``N + 1`` holding the
amplitudes c_m for m = -j, ..., +j in ascending order (j = N/2), so index
``i`` corresponds to ``m = i - j``.  The number of atoms in the first well
is ``n1 = m + N/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import gammaln

from .rng import ESTIMATE, make_generator


@dataclass(frozen=True)
class SpinOperators:
    """Dense angular-momentum matrices for N bosons in two modes (hbar = 1)."""

    n_particles: int
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jz_sq: np.ndarray
    jplus: np.ndarray

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def j(self) -> float:
        return self.n_particles / 2

    @property
    def jminus(self) -> np.ndarray:
        return self.jplus.conj().T

    @property
    def m(self) -> np.ndarray:
        """Diagonal of ``jz`` (the magnetic quantum numbers, ascending)."""
        return np.arange(self.dim) - self.j


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in the normalized form used throughout.

    Parameters
    ----------
    n_particles : int
        Total number of bosons N.
    interaction_u : float
        u = U N / K.
    tunneling_k : float
        Tunneling rate K; sets the time unit (Rabi period 2 pi / K).
    gamma_bar : float
        Normalized measurement strength gamma N / K.
    bias_epsilon : float
        Coefficient of the small symmetry-breaking term eps * K * n1.
    """

    n_particles: int
    interaction_u: float = 0.0
    tunneling_k: float = 1.0
    gamma_bar: float = 0.0
    bias_epsilon: float = 1e-2

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError(f"n_particles must be an integer >= 1, got {self.n_particles}")
        for name in ("interaction_u", "tunneling_k", "gamma_bar"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")
        if not np.isfinite(self.bias_epsilon):
            raise ValueError("bias_epsilon must be finite")

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def j(self) -> float:
        return self.n_particles / 2

    @property
    def interaction_U(self) -> float:
        return self.interaction_u * self.tunneling_k / self.n_particles

    @property
    def gamma(self) -> float:
        """Bare measurement strength gamma = gamma_bar K / N."""
        return self.gamma_bar * self.tunneling_k / self.n_particles

    @property
    def rabi_period(self) -> float:
        if self.tunneling_k <= 0:
            raise ValueError("Rabi period undefined for K = 0")
        return 2 * np.pi / self.tunneling_k

    def as_dict(self) -> dict:
        return {
            "n_particles": int(self.n_particles),
            "interaction_u": float(self.interaction_u),
            "tunneling_k": float(self.tunneling_k),
            "gamma_bar": float(self.gamma_bar),
            "bias_epsilon": float(self.bias_epsilon),
        }


def angular_momentum_operators(n_particles: int) -> SpinOperators:
    """Build J_x, J_y, J_z, J_z^2 and J_+ for ``n_particles`` bosons."""
    if int(n_particles) != n_particles or n_particles < 1:
        raise ValueError(f"n_particles must be an integer >= 1, got {n_particles}")
    n_particles = int(n_particles)
    j = n_particles / 2
    m = np.arange(n_particles + 1) - j
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1))
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jplus = np.diag(ladder, -1).astype(complex)
    jminus = jplus.T.copy()
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    jz = np.diag(m).astype(complex)
    return SpinOperators(
        n_particles=n_particles,
        jx=jx,
        jy=jy,
        jz=jz,
        jz_sq=np.diag(m * m).astype(complex),
        jplus=jplus,
    )


def build_hamiltonian(params: ModelParams, ops: SpinOperators, *, bias: bool = True) -> np.ndarray:
    """H = U Jz^2 - K Jx + eps K n1, with n1 = Jz + N/2.

    ``bias=False`` drops the eps term regardless of ``params.bias_epsilon``.
    """
    if ops.n_particles != params.n_particles:
        raise ValueError(
            f"operators built for N={ops.n_particles}, params have N={params.n_particles}"
        )
    h = params.interaction_U * ops.jz_sq - params.tunneling_k * ops.jx
    if bias and params.bias_epsilon != 0:
        n1 = ops.jz + (params.n_particles / 2) * np.eye(ops.dim)
        h = h + params.bias_epsilon * params.tunneling_k * n1
    # symmetrize so that H == H^dagger bit for bit
    return (h + h.conj().T) / 2


def cavity_gamma(chi: float, epsilon_pump: float, cavity_damping: float) -> float:
    """Measurement strength 64 chi^2 eps^2 / Gamma^3 of the cavity read-out."""
    if not cavity_damping > 0:
        raise ValueError(f"cavity damping must be positive, got {cavity_damping}")
    return 64.0 * chi**2 * epsilon_pump**2 / cavity_damping**3


def _index_of(n_particles: int, m: float) -> int:
    j = n_particles / 2
    idx = m + j
    if abs(idx - round(idx)) > 1e-12 or not (-j - 1e-12 <= m <= j + 1e-12):
        raise ValueError(f"m={m} is not a valid magnetic number for j={j}")
    return int(round(idx))


def fock_state(n_particles: int, m: float) -> np.ndarray:
    """Number state |m> (n1 = m + N/2 atoms in the first well)."""
    psi = np.zeros(int(n_particles) + 1, dtype=complex)
    psi[_index_of(n_particles, m)] = 1.0
    return psi


def coherent_state(n_particles: int, theta: float, phi: float) -> np.ndarray:
    """SU(2) coherent state pointing along (sin t cos p, sin t sin p, cos t).

    c_m = binom(N, j+m)^(1/2) cos(t/2)^(j+m) sin(t/2)^(j-m) exp(i (j-m) p).
    """
    if not (0 <= theta <= np.pi):
        raise ValueError(f"theta must lie in [0, pi], got {theta}")
    n = int(n_particles)
    if n < 1:
        raise ValueError("n_particles must be >= 1")
    up = np.arange(n + 1)  # j + m
    down = n - up  # j - m
    sqrt_binom = np.exp(0.5 * (gammaln(n + 1) - gammaln(up + 1) - gammaln(down + 1)))
    mag = sqrt_binom * np.cos(theta / 2) ** up * np.sin(theta / 2) ** down
    psi = mag * np.exp(1j * down * phi)
    return psi / np.linalg.norm(psi)


def random_phase_state(n_particles: int, rng_seed: int, stream: int = ESTIMATE) -> np.ndarray:
    """Equal-weight superposition with independent uniform random phases."""
    dim = int(n_particles) + 1
    rng = make_generator(rng_seed, stream)
    phases = rng.uniform(0.0, 2 * np.pi, size=dim)
    return np.exp(1j * phases) / np.sqrt(dim)


def maximally_uncertain_estimate(n_particles: int, rng_seed: int) -> np.ndarray:
    """Initial estimate with no information about the true state."""
    return random_phase_state(n_particles, rng_seed, ESTIMATE)
