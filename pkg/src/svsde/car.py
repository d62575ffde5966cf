"""Proper CAR priors on the coefficient lattice."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ArgumentError, NumericError

__all__ = ["CarStructure", "build_car", "car_precision", "sample_gaussian_precision",
           "sample_gaussian_canonical"]


@dataclass(frozen=True)
class CarStructure:
    """Rook adjacency ``Q`` and degree matrix ``D`` on a K x L lattice.

    Coefficient ``(k, l)`` maps to flat index ``k * L + l`` (row-major), matching
    ``TensorSurface.coeffs.ravel()``.
    """

    K: int
    L: int
    Q: np.ndarray
    D: np.ndarray
    # eigenvalues of D^-1/2 Q D^-1/2; det(D - rho Q) = prod(d) * prod(1 - rho * eig)
    _eig: np.ndarray
    _logdet_d: float

    @property
    def size(self) -> int:
        return self.K * self.L

    @property
    def degrees(self) -> np.ndarray:
        return np.diag(self.D).copy()

    def logdet(self, rho: float) -> float:
        """log det(D - rho Q) for rho in (-1, 1)."""
        return self._logdet_d + float(np.sum(np.log1p(-rho * self._eig)))

    def quad(self, v: np.ndarray, rho: float) -> float:
        """v' (D - rho Q) v."""
        v = np.asarray(v, dtype=float).ravel()
        return float(v @ (self.D @ v) - rho * (v @ (self.Q @ v)))


def build_car(K: int, L: int) -> CarStructure:
    if int(K) != K or int(L) != L or K < 1 or L < 1:
        raise ArgumentError(f"lattice dims must be positive integers, got ({K}, {L})")
    K, L = int(K), int(L)
    n = K * L
    Q = np.zeros((n, n))
    for k in range(K):
        for l in range(L):
            i = k * L + l
            if k + 1 < K:
                Q[i, i + L] = Q[i + L, i] = 1.0
            if l + 1 < L:
                Q[i, i + 1] = Q[i + 1, i] = 1.0
    deg = Q.sum(axis=1)
    D = np.diag(deg)
    if n == 1:
        # a lone coefficient has no neighbours; D - rho Q is the zero matrix
        eig = np.zeros(1)
        logdet_d = -np.inf
    else:
        s = 1.0 / np.sqrt(deg)
        eig = np.linalg.eigvalsh(s[:, None] * Q * s[None, :])
        logdet_d = float(np.sum(np.log(deg)))
    for a in (Q, D, eig):
        a.setflags(write=False)
    return CarStructure(K, L, Q, D, eig, logdet_d)


def car_precision(c: CarStructure, tau: float, rho: float) -> np.ndarray:
    """``tau * (D - rho * Q)``."""
    if not tau > 0:
        raise ArgumentError(f"tau must be positive, got {tau!r}")
    if not 0.0 < rho < 1.0:
        raise ArgumentError(f"rho must lie in (0, 1), got {rho!r}")
    return tau * (c.D - rho * c.Q)


def _cholesky(precision):
    try:
        return linalg.cholesky(precision, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"precision matrix is not positive definite: {exc}") from None


def sample_gaussian_precision(mean_vector, precision, rng) -> np.ndarray:
    """Draw from N(mean, precision^-1) using the Cholesky factor of the precision."""
    mean = np.asarray(mean_vector, dtype=float)
    chol = _cholesky(np.asarray(precision, dtype=float))
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T")


def sample_gaussian_canonical(precision, linear, rng):
    """Draw from N(P^-1 b, P^-1) given precision ``P`` and linear term ``b``.

    Returns ``(draw, mean, chol)``; ``chol`` is the lower Cholesky factor of ``P``.
    """
    chol = _cholesky(np.asarray(precision, dtype=float))
    mean = linalg.cho_solve((chol, True), np.asarray(linear, dtype=float))
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T"), mean, chol
