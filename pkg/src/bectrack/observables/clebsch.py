"""Clebsch-Gordan coefficients and irreducible spherical tensor operators.

Two independent routes are provided:

* :func:`clebsch_gordan` evaluates a single coefficient with the Racah sum
  in exact rational arithmetic (Python integers), converting to float only
  at the very end.  It is exact but slow for large j.
* :func:`tensor_operator_table` produces every coefficient needed for the
  multipole expansion of a spin-j density matrix at once, by diagonalizing
  the total-J^2 operator restricted to each fixed-q block of j x j.  That
  block is symmetric tridiagonal with eigenvalues k(k+1) spaced by at least
  2, so the eigenvectors are well conditioned.  Signs follow Condon-Shortley.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt

import numpy as np
from scipy.linalg import eigh_tridiagonal


def _twice(x: float) -> int:
    t = round(2 * x)
    if abs(2 * x - t) > 1e-9:
        raise ValueError(f"{x} is not a multiple of 1/2")
    return int(t)


def clebsch_gordan_squared(j1, m1, j2, m2, J, M) -> tuple[int, Fraction]:
    """Exact ``(sign, C**2)`` of <j1 m1; j2 m2 | J M>."""
    a, b, c = _twice(j1), _twice(j2), _twice(J)
    am, bm, cm = _twice(m1), _twice(m2), _twice(M)
    if am + bm != cm:
        return 0, Fraction(0)
    if c < abs(a - b) or c > a + b or (a + b + c) % 2:
        return 0, Fraction(0)
    if abs(am) > a or abs(bm) > b or abs(cm) > c:
        return 0, Fraction(0)
    if (a + am) % 2 or (b + bm) % 2 or (c + cm) % 2:
        return 0, Fraction(0)
    f = factorial
    # all arguments below are integers because of the parity checks above
    jjJ = (a + b - c) // 2
    pref = Fraction(
        (c + 1) * f((c + a - b) // 2) * f((c - a + b) // 2) * f(jjJ),
        f((a + b + c) // 2 + 1),
    )
    pref *= (
        f((c + cm) // 2) * f((c - cm) // 2) * f((a - am) // 2) * f((a + am) // 2)
        * f((b - bm) // 2) * f((b + bm) // 2)
    )
    kmin = max(0, (b - c - am) // 2, (a - c + bm) // 2)
    kmax = min(jjJ, (a - am) // 2, (b + bm) // 2)
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            f(k) * f(jjJ - k) * f((a - am) // 2 - k) * f((b + bm) // 2 - k)
            * f((c - b + am) // 2 + k) * f((c - a - bm) // 2 + k)
        )
        total += Fraction((-1) ** k, den)
    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), pref * total * total


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> (Condon-Shortley phase), exact up to final rounding."""
    sign, sq = clebsch_gordan_squared(j1, m1, j2, m2, J, M)
    return sign * sqrt(float(sq)) if sign else 0.0


def _recursion_sign(diag, off, lam, vec, from_top: bool) -> float:
    """Sign making ``vec`` agree with the recursion seeded by +1 at one end."""
    n = len(diag)
    peak = int(np.argmax(np.abs(vec)))
    if from_top:
        prev, cur = 0.0, 1.0  # v[n], v[n-1]
        for i in range(n - 1, peak, -1):
            nxt = -((diag[i] - lam) * cur + (off[i] * prev if i < n - 1 else 0.0)) / off[i - 1]
            prev, cur = cur, nxt
            scale = abs(cur)
            if scale > 1e100:
                prev, cur = prev / scale, cur / scale
    else:
        prev, cur = 0.0, 1.0  # v[-1], v[0]
        for i in range(0, peak):
            nxt = -((diag[i] - lam) * cur + (off[i - 1] * prev if i > 0 else 0.0)) / off[i]
            prev, cur = cur, nxt
            scale = abs(cur)
            if scale > 1e100:
                prev, cur = prev / scale, cur / scale
    return float(np.sign(cur) * np.sign(vec[peak]))


@lru_cache(maxsize=8)
def tensor_operator_table(two_j: int) -> dict[int, np.ndarray]:
    """Matrix elements of the spherical tensor operators T_kq on spin j.

    T_kq = sum_m (-1)^(j-m') <j m; j -m' | k q> |m><m'|,  m' = m - q.

    Returns a dict mapping q (integer, -2j..2j) to an array of shape
    ``(2j + 1 - |q|, 2j + 1 - |q|)`` whose row ``k - |q|`` holds the
    elements T_kq[m, m - q] for the valid m in ascending order.  Basis
    indices of those m start at ``max(0, q)``.
    """
    if two_j < 1:
        raise ValueError("two_j must be >= 1")
    j = two_j / 2
    jj1 = j * (j + 1)
    table: dict[int, np.ndarray] = {}
    for q in range(-two_j, two_j + 1):
        lo = max(0, q)  # basis index of the first valid m
        size = two_j + 1 - abs(q)
        m1 = np.arange(lo, lo + size) - j
        m2 = q - m1
        if size == 1:
            vecs = np.ones((1, 1))
        else:
            diag = 2 * jj1 + 2 * m1 * m2
            off = np.sqrt(jj1 - m1[:-1] * (m1[:-1] + 1)) * np.sqrt(jj1 - m2[:-1] * (m2[:-1] - 1))
            w, vecs = eigh_tridiagonal(diag, off)
            k = np.arange(abs(q), two_j + 1)
            if np.max(np.abs(w - k * (k + 1))) > 1e-8 * (two_j + 1) ** 2:
                raise RuntimeError(f"J^2 spectrum check failed in block q={q}")
        k = np.arange(abs(q), two_j + 1)
        vecs = vecs.T.copy()  # row i <-> k = |q| + i, column <-> m1
        # Condon-Shortley: <j j; j q-j | k q> > 0 for q >= 0, and for q < 0
        # <j -j; j q+j | k q> has sign (-1)^(2j-k).  The reference element can
        # be far below round-off, so its sign is carried to the peak of each
        # eigenvector by the exact three-term recursion (stable inward).
        if size > 1:
            for i, kk in enumerate(k):
                want = 1.0 if q >= 0 else (-1.0) ** (two_j - kk)
                sign = _recursion_sign(diag, off, kk * (kk + 1.0), vecs[i], from_top=q >= 0)
                vecs[i] *= sign * want
        phase = (-1.0) ** np.rint(j + m2).astype(int)  # (-1)^(j - m'), m' = -m2
        table[q] = vecs * phase[None, :]
    return table


def tensor_operator(two_j: int, k: int, q: int) -> np.ndarray:
    """Dense matrix of T_kq (mostly for tests and small j)."""
    if not (0 <= k <= two_j and abs(q) <= k):
        raise ValueError(f"invalid (k, q) = ({k}, {q}) for 2j = {two_j}")
    dim = two_j + 1
    rows = tensor_operator_table(two_j)[q][k - abs(q)]
    out = np.zeros((dim, dim))
    lo = max(0, q)
    idx = np.arange(lo, lo + len(rows))
    out[idx, idx - q] = rows
    return out


def multipoles(state: np.ndarray) -> np.ndarray:
    """rho_kq = Tr(rho T_kq^dagger) as an array indexed ``[k, q + 2j]``.

    ``state`` may be a pure-state vector or a density matrix.
    """
    state = np.asarray(state)
    dim = state.shape[0]
    two_j = dim - 1
    table = tensor_operator_table(two_j)
    out = np.zeros((dim, 2 * two_j + 1), dtype=complex)
    for q, rows in table.items():
        lo = max(0, q)
        idx = np.arange(lo, lo + rows.shape[1])
        if state.ndim == 1:
            diag = state[idx] * np.conj(state[idx - q])
        else:
            diag = state[idx, idx - q]
        out[abs(q):, q + two_j] = rows @ diag
    return out
