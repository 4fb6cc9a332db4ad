"""Gaussian mutual information from joint covariances.

Every compress-and-forward rate in this package is a conditional mutual information
between jointly Gaussian variables: user inputs X, base-station observations Y and
their quantized descriptions Y_hat = Y + e. This module builds the joint covariance of
(X, Y, Y_hat) for an instance and evaluates I(A; B | C) through Schur complements.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.linalg as la

from multicell_tools.network import NetworkInstance

PSEUDO_DET_RTOL = 1e-12
SYMMETRY_RTOL = 1e-9


def pseudo_log2_det(matrix: np.ndarray) -> float:
    """
    log2 of the product of eigenvalues above 1e-12 times the trace.

    An empty matrix, or one with no eigenvalue above the threshold, has log-determinant 0.
    """
    if matrix.size == 0:
        return 0.0
    eigenvalues = la.eigvalsh(matrix)
    threshold = PSEUDO_DET_RTOL * max(float(np.trace(matrix)), 0.0)
    kept = eigenvalues[eigenvalues > threshold]
    if kept.size == 0:
        return 0.0
    return float(np.sum(np.log2(kept)))


def log2_det(matrix: np.ndarray) -> float:
    """
    log2 determinant of a covariance block.

    Positive definite blocks go through a Cholesky factorization; rank-deficient
    blocks fall back to :func:`pseudo_log2_det`.
    """
    if matrix.size == 0:
        return 0.0
    try:
        factor = la.cholesky(matrix, lower=True)
    except la.LinAlgError:
        return pseudo_log2_det(matrix)
    return float(2.0 * np.sum(np.log2(np.diag(factor))))


def conditional_covariance(
    cov: np.ndarray, target: Sequence[int], given: Sequence[int]
) -> np.ndarray:
    """
    Covariance of the ``target`` block after conditioning on the ``given`` block.

    Uses the Schur complement K_TT - K_TG K_GG^-1 K_GT. A singular K_GG (for example
    an input with zero power) is handled with a pseudo-inverse.
    """
    target_idx = np.asarray(target, dtype=int)
    given_idx = np.asarray(given, dtype=int)
    k_tt = cov[np.ix_(target_idx, target_idx)]
    if given_idx.size == 0 or target_idx.size == 0:
        return k_tt
    k_tg = cov[np.ix_(target_idx, given_idx)]
    k_gg = cov[np.ix_(given_idx, given_idx)]
    try:
        solved = la.cho_solve(la.cho_factor(k_gg, lower=True), k_tg.T)
    except la.LinAlgError:
        solved = la.pinvh(k_gg, rtol=PSEUDO_DET_RTOL) @ k_tg.T
    schur = k_tt - k_tg @ solved
    return 0.5 * (schur + schur.T)


def _validate_covariance(cov: np.ndarray) -> None:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"Covariance must be a square matrix, got shape {cov.shape}")
    scale = max(float(np.max(np.abs(cov))), 1.0) if cov.size else 1.0
    if not np.allclose(cov, cov.T, rtol=0.0, atol=SYMMETRY_RTOL * scale):
        raise ValueError("Covariance matrix is not symmetric")
    if cov.size and float(np.min(la.eigvalsh(cov))) < -SYMMETRY_RTOL * scale:
        raise ValueError("Covariance matrix is not positive semidefinite")


def gaussian_conditional_mi(
    cov: np.ndarray,
    a: Iterable[int],
    b: Iterable[int],
    cond: Iterable[int] = (),
) -> float:
    """
    Mutual information I(A; B | Cond) in bits for jointly Gaussian variables.

    I = 1/2 log2( det K_{A|C} det K_{B|C} / det K_{AB|C} ), with pseudo-determinants
    for rank-deficient blocks.

    Args:
        cov: Joint covariance matrix
        a: Indices of the first variable group
        b: Indices of the second variable group
        cond: Indices of the conditioning group

    Returns:
        Mutual information in bits, clipped at zero

    Raises:
        ValueError: If cov is not symmetric positive semidefinite
    """
    cov = np.asarray(cov, dtype=float)
    _validate_covariance(cov)

    a_idx, b_idx, c_idx = list(a), list(b), list(cond)
    if not a_idx or not b_idx:
        return 0.0

    joint = conditional_covariance(cov, a_idx + b_idx, c_idx)
    n_a = len(a_idx)
    log_det_a = log2_det(joint[:n_a, :n_a])
    log_det_b = log2_det(joint[n_a:, n_a:])
    log_det_ab = log2_det(joint)
    return max(0.5 * (log_det_a + log_det_b - log_det_ab), 0.0)


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """
    Joint covariance of (X_1..X_L, Y_1..Y_L, Y_hat_1..Y_hat_L).

    Descriptions with infinite quantization noise carry no information; they are kept
    out of every index set returned by :meth:`yhat`.
    """

    cov: np.ndarray
    q: np.ndarray

    @property
    def L(self) -> int:
        """Number of users."""
        return int(self.q.shape[0])

    def x(self, users: Iterable[int]) -> list[int]:
        """Covariance indices of inputs X_k."""
        return [int(k) for k in users]

    def y(self, stations: Iterable[int]) -> list[int]:
        """Covariance indices of observations Y_j."""
        return [self.L + int(j) for j in stations]

    def yhat(self, stations: Iterable[int]) -> list[int]:
        """Covariance indices of the informative descriptions Y_hat_j."""
        return [2 * self.L + int(j) for j in stations if math.isfinite(self.q[int(j)])]

    def mi(
        self, a: Iterable[int], b: Iterable[int], cond: Iterable[int] = ()
    ) -> float:
        """I(A; B | Cond) on this model's covariance."""
        return gaussian_conditional_mi(self.cov, a, b, cond)

    def conditional_variance(self, index: int, given: Iterable[int]) -> float:
        """Variance of one variable conditioned on a group."""
        return float(conditional_covariance(self.cov, [index], list(given))[0, 0])


def build_model(net: NetworkInstance, q: Union[Sequence[float], np.ndarray]) -> GaussianModel:
    """
    Build the joint covariance for Y_j = sum_i h_ij X_i + Z_j and Y_hat_j = Y_j + e_j.

    Args:
        net: Network instance
        q: Quantization noise variances (non-negative; infinite entries are inert)

    Returns:
        GaussianModel
    """
    q_vec = np.asarray(q, dtype=float).reshape(-1)
    if q_vec.shape[0] != net.L:
        raise ValueError(f"Expected {net.L} quantization levels, got {q_vec.shape[0]}")
    if np.any(np.isnan(q_vec)) or np.any(q_vec < 0):
        raise ValueError("Quantization noise levels must be non-negative")

    size = net.L
    transfer = net.gains.T  # rows: stations, cols: users
    k_xx = np.diag(net.powers)
    k_yx = transfer @ k_xx
    k_yy = transfer @ k_xx @ transfer.T + net.noise * np.eye(size)
    q_finite = np.where(np.isfinite(q_vec), q_vec, 0.0)

    cov = np.zeros((3 * size, 3 * size))
    x, y, z = slice(0, size), slice(size, 2 * size), slice(2 * size, 3 * size)
    cov[x, x] = k_xx
    cov[y, x] = k_yx
    cov[x, y] = k_yx.T
    cov[y, y] = k_yy
    cov[z, x] = k_yx
    cov[x, z] = k_yx.T
    cov[z, y] = k_yy
    cov[y, z] = k_yy
    cov[z, z] = k_yy + np.diag(q_finite)
    return GaussianModel(cov=cov, q=q_vec)
