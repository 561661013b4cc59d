"""Independent reference computations used to check the solvers.

Nothing in here calls the descent code: dense eigendecompositions,
central finite differences, exhaustive signed-permutation frames and
closed-form Poisson/Laplacian solutions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "EigenOracleResult",
    "dense_eig",
    "fd_directional_derivative",
    "enumerate_permutation_frames",
    "laplacian_eigenvalues_1d",
    "torsion_square",
    "sin2_poisson_1d",
]


@dataclass(frozen=True, eq=False)
class EigenOracleResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    backend_residual: float
    reconstruction_error: float


def dense_eig(matrix) -> EigenOracleResult:
    """Full ascending spectrum of a symmetric matrix via LAPACK.

    The result is checked by reconstructing the matrix from its
    eigenpairs (relative Frobenius error at most 1e-9) and by the
    per-pair residual bound ``1e-10 * ||A||``.
    """
    A = matrix.toarray() if sp.issparse(matrix) else np.array(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    norm = max(np.linalg.norm(A), 1e-300)
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * max(np.max(np.abs(A), initial=0.0), 1.0):
        raise ValueError("matrix is not symmetric")
    lam, vecs = np.linalg.eigh(A)
    residual = float(np.max(np.linalg.norm(A @ vecs - vecs * lam, axis=0), initial=0.0))
    recon = float(np.linalg.norm(vecs @ np.diag(lam) @ vecs.T - A) / norm)
    if residual > 1e-10 * norm or recon > 1e-9:
        raise ArithmeticError(f"eigendecomposition self-check failed (residual {residual:.2e}, reconstruction {recon:.2e})")
    return EigenOracleResult(lam, vecs, residual, recon)


def fd_directional_derivative(J: Callable, frame, direction, step: float = 1e-4) -> float:
    """Central difference of ``J`` along ``retract(frame, direction, t)``."""
    from .manifold import retract

    if step <= 0:
        raise ValueError("step must be positive")
    return (J(retract(frame, direction, step)) - J(retract(frame, direction, -step))) / (2 * step)


def enumerate_permutation_frames(n: int):
    """All ``2^n n!`` signed permutation matrices of size ``n`` (``n <= 6``)."""
    if n < 1 or n > 6:
        raise ValueError(f"enumeration is capped at n = 6, got n = {n}")
    frames = []
    eye = np.eye(n)
    for perm in itertools.permutations(range(n)):
        P = eye[:, perm]
        for signs in itertools.product((1.0, -1.0), repeat=n):
            frames.append(P * np.asarray(signs))
    return frames


def laplacian_eigenvalues_1d(points: int, length: float = 1.0) -> np.ndarray:
    """Closed-form spectrum ``4/h^2 sin^2(m pi h / (2 L))`` of the 3-point stencil."""
    h = length / (points + 1)
    m = np.arange(1, points + 1)
    return 4.0 / h**2 * np.sin(m * math.pi * h / (2.0 * length)) ** 2


def torsion_square(x, y, modes: int = 100) -> np.ndarray:
    """Solution of ``-Delta V = 1`` on the unit square, ``V = 0`` on the boundary.

    Double sine series over the first ``modes`` indices per axis (only odd
    indices contribute).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = np.arange(1, modes + 1, 2)
    sx = np.sin(np.pi * np.multiply.outer(x, k))
    sy = np.sin(np.pi * np.multiply.outer(y, k))
    coef = 16.0 / (np.pi**4 * np.outer(k, k) * (k[:, None] ** 2 + k[None, :] ** 2))
    return np.einsum("...i,ij,...j->...", sx, coef, sy)


def sin2_poisson_1d(x) -> np.ndarray:
    """Solution of ``-V'' = 2 sin^2(pi x)`` on ``(0, 1)`` with zero boundary values."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x * (1 - x) + (1 - np.cos(2 * np.pi * x)) / (4 * np.pi**2)
