"""Orthonormal frames, skew directions and exponential retractions.

A frame stores ``M`` grid functions that are orthonormal in the discrete
L2 product ``<u, v> = cell_volume * u . v``. Internally the algebra is done
on the Euclidean-orthonormal matrix ``Q = sqrt(cell_volume) * U``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .grid import GridDomain

__all__ = [
    "Frame",
    "SkewDirection",
    "random_frame",
    "identity_frame",
    "retract",
    "curve_velocity",
    "reorthonormalize",
    "block_rotate",
    "direction_from_tangent",
    "tangent_of",
    "project_tangent",
    "gram_error",
]


@dataclass(frozen=True, eq=False)
class Frame:
    """``n x M`` matrix with L2-orthonormal columns."""

    columns: np.ndarray
    cell_volume: float = 1.0
    domain: Optional[GridDomain] = None

    def __post_init__(self):
        cols = np.array(self.columns, dtype=float)
        if cols.ndim != 2:
            raise ValueError("frame columns must form a 2D array")
        if cols.shape[1] > cols.shape[0]:
            raise ValueError(f"frame has M = {cols.shape[1]} columns but only n = {cols.shape[0]} rows")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_orthonormal(cls, Q: np.ndarray, cell_volume: float = 1.0, domain=None) -> "Frame":
        return cls(np.asarray(Q) / np.sqrt(cell_volume), cell_volume, domain)

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def M(self) -> int:
        return self.columns.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return self.columns * np.sqrt(self.cell_volume)

    def gram(self) -> np.ndarray:
        return self.cell_volume * (self.columns.T @ self.columns)

    def inner(self, X: np.ndarray, Y: np.ndarray) -> float:
        return self.cell_volume * float(np.sum(X * Y))

    def replace(self, columns: np.ndarray) -> "Frame":
        return Frame(columns, self.cell_volume, self.domain)

    def permuted(self, order: Sequence[int]) -> "Frame":
        return self.replace(self.columns[:, list(order)])


def gram_error(frame: Frame) -> float:
    """Frobenius distance of the Gram matrix from the identity."""
    return float(np.linalg.norm(frame.gram() - np.eye(frame.M)))


@dataclass(frozen=True, eq=False)
class SkewDirection:
    """Generator of the curve ``t -> exp(-t M_op) U``.

    The full-space skew operator acts as ``M_op u_j = sum_i generator[i, j]
    u_i + component[:, j]`` on the frame, where ``component`` is orthogonal
    to the frame span. The tangent of the curve at ``t = 0`` is therefore
    ``-(U @ generator + component)``.
    """

    generator: np.ndarray
    component: Optional[np.ndarray] = None

    def __post_init__(self):
        K = np.array(self.generator, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("generator must be square")
        if not np.array_equal(K, -K.T):
            K = 0.5 * (K - K.T)
        object.__setattr__(self, "generator", K)
        if self.component is not None:
            object.__setattr__(self, "component", np.array(self.component, dtype=float))

    @classmethod
    def random(cls, frame: Frame, rng, in_span_only: bool = False) -> "SkewDirection":
        rng = np.random.default_rng(rng)
        K = rng.standard_normal((frame.M, frame.M))
        K = K - K.T
        if in_span_only:
            return cls(K)
        Z = rng.standard_normal(frame.columns.shape)
        Z = Z - frame.columns @ (frame.cell_volume * (frame.columns.T @ Z))
        scale = np.sqrt(frame.cell_volume) * np.linalg.norm(Z)
        if scale > 0:
            Z = Z / scale * np.sqrt(frame.M)
        return cls(K, Z)


def tangent_of(direction: SkewDirection, frame: Frame) -> np.ndarray:
    """Velocity of ``retract(frame, direction, t)`` at ``t = 0``."""
    T = -(frame.columns @ direction.generator)
    if direction.component is not None:
        T = T - direction.component
    return T


def direction_from_tangent(frame: Frame, tangent: np.ndarray) -> SkewDirection:
    """Inverse of :func:`tangent_of` for a tangent vector at ``frame``."""
    K = -frame.cell_volume * (frame.columns.T @ tangent)
    K = 0.5 * (K - K.T)
    Z = -(tangent + frame.columns @ K)
    return SkewDirection(K, Z)


def project_tangent(frame: Frame, X: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto the tangent space of the frame manifold."""
    U = frame.columns
    S = frame.cell_volume * (U.T @ X)
    return X - U @ (0.5 * (S + S.T))


def random_frame(domain_or_n, M: int, seed: int = 0) -> Frame:
    """Seeded Gaussian fill followed by orthonormalization."""
    if isinstance(domain_or_n, GridDomain):
        n, vol, domain = domain_or_n.n, domain_or_n.cell_volume, domain_or_n
    else:
        n, vol, domain = int(domain_or_n), 1.0, None
    if M > n:
        raise ValueError(f"cannot fit M = {M} orthonormal columns in n = {n} dimensions")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, M))
    return Frame.from_orthonormal(_orthonormal_qr(G), vol, domain)


def identity_frame(domain_or_n, M: int, basis: Optional[np.ndarray] = None) -> Frame:
    """Frame made of the first ``M`` basis vectors.

    ``basis`` defaults to the coordinate vectors; a supplied basis must have
    Euclidean-orthonormal columns (as returned by a dense eigensolver) and is
    rescaled to unit L2 norm.
    """
    if isinstance(domain_or_n, GridDomain):
        n, vol, domain = domain_or_n.n, domain_or_n.cell_volume, domain_or_n
    else:
        n, vol, domain = int(domain_or_n), 1.0, None
    if basis is None:
        if M > n:
            raise ValueError(f"only {n} coordinate vectors available, M = {M} requested")
        Q = np.eye(n)[:, :M]
    else:
        basis = np.asarray(basis, dtype=float)
        if basis.shape[0] != n or basis.shape[1] < M:
            raise ValueError(f"basis provides {basis.shape[1]} vectors of length {basis.shape[0]}, need {M} of length {n}")
        Q = basis[:, :M]
    return Frame.from_orthonormal(Q, vol, domain)


def _orthonormal_qr(A: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(A)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def reorthonormalize(frame: Frame, rank_tol: float = 1e-10) -> Frame:
    """Restore orthonormality by a sign-normalized QR (span is preserved)."""
    if frame.M == 0:
        return frame
    Q, R = np.linalg.qr(frame.Q)
    d = np.abs(np.diag(R))
    if np.min(d) <= rank_tol * max(np.max(d), np.finfo(float).tiny):
        raise ValueError("rank deficient frame cannot be reorthonormalized")
    signs = np.sign(np.diag(R))
    return Frame.from_orthonormal(Q * signs, frame.cell_volume, frame.domain)


def _subspace(frame: Frame, direction: SkewDirection):
    """Basis ``W`` and generator ``B`` of the invariant subspace of a curve."""
    K = direction.generator
    M = frame.M
    if K.shape != (M, M):
        raise ValueError(f"generator shape {K.shape} does not match M = {M}")
    Z = direction.component
    Q = frame.Q
    if Z is not None:
        if Z.shape != Q.shape:
            raise ValueError("orthogonal component shape does not match the frame")
        Zq = np.sqrt(frame.cell_volume) * Z
        if M == frame.n or not np.any(Zq):
            Z = None
    if Z is None:
        return Q, K
    Zq = Zq - Q @ (Q.T @ Zq)
    P, R = np.linalg.qr(Zq)
    return np.hstack([Q, P]), np.block([[K, -R.T], [R, np.zeros((M, M))]])


def retract(frame: Frame, direction: SkewDirection, step: float) -> Frame:
    """Move along ``exp(-step * M_op) U``.

    The exponential is evaluated exactly on the (at most ``2M``-dimensional)
    invariant subspace spanned by the frame and the orthogonal component, so
    orthonormality holds for every step size and in-span generators satisfy
    the one-parameter group law.
    """
    if step == 0:
        return frame
    W, B = _subspace(frame, direction)
    if W.shape[1] == frame.M:
        return frame.replace(frame.columns @ sla.expm(-step * B))
    E = sla.expm(-step * B)[:, : frame.M]
    return Frame.from_orthonormal(W @ E, frame.cell_volume, frame.domain)


def curve_velocity(frame: Frame, direction: SkewDirection, step: float) -> np.ndarray:
    """Velocity of ``t -> retract(frame, direction, t)`` at ``t = step``."""
    W, B = _subspace(frame, direction)
    E = sla.expm(-step * B)[:, : frame.M]
    return -(W @ (B @ E)) / np.sqrt(frame.cell_volume)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    a = np.abs(v)
    peak = np.max(a, initial=0.0)
    if peak == 0:
        return v
    # first index within rounding of the maximum, so ties are resolved stably
    k = int(np.argmax(a >= peak * (1 - 1e-8)))
    return -v if v[k] < 0 else v


def block_rotate(frame: Frame, operator_total, blocks, offdiag_tol: float = 1e-13) -> Frame:
    """Diagonalize the effective Hamiltonian inside each block of equal weights.

    Parameters
    ----------
    frame : Frame
    operator_total : matrix or SchrodingerOperator
        Symmetric ``H`` (``A`` or ``A + diag(V)``).
    blocks : sequence of index tuples
        Zero-based runs of equal weights, e.g. from
        :func:`spectral.weights.detect_degeneracy`.

    Within a block the columns are replaced by the Ritz vectors of ``H``,
    ordered by ascending Rayleigh quotient, each with its largest-magnitude
    entry made positive. Singleton blocks are left untouched.
    """
    H = getattr(operator_total, "matrix", operator_total)
    cols = np.array(frame.columns)
    for block in blocks:
        idx = list(block)
        if any(i < 0 or i >= frame.M for i in idx):
            raise IndexError(f"block {tuple(block)} out of range for M = {frame.M}")
        if len(idx) < 2:
            continue
        Ub = cols[:, idx]
        G = frame.cell_volume * (Ub.T @ (H @ Ub))
        G = 0.5 * (G + G.T)
        off = G - np.diag(np.diag(G))
        if np.max(np.abs(off)) <= offdiag_tol * max(np.max(np.abs(G)), 1.0):
            W = np.eye(len(idx))[:, np.argsort(np.diag(G), kind="stable")]
        else:
            _, W = np.linalg.eigh(G)
        rotated = Ub @ W
        for k in range(len(idx)):
            rotated[:, k] = _fix_sign(rotated[:, k])
        cols[:, idx] = rotated
    return frame.replace(cols)
