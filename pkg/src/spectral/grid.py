"""Uniform Dirichlet grids, finite-difference Schrodinger operators and
sampled external potentials."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridDomain",
    "GridFunction",
    "ExternalPotential",
    "SchrodingerOperator",
    "build_domain",
    "realize_potential",
    "assemble_operator",
    "laplacian",
]


@dataclass(frozen=True)
class GridDomain:
    """Box ``[0, L_1] x ... x [0, L_N]`` sampled at interior points only.

    Boundary values are implicitly zero. Linear indices follow C order
    (the last axis varies fastest).
    """

    dim: int
    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dimension must be <= 3 (and >= 1), got {self.dim}")
        if len(self.extents) != self.dim or len(self.points) != self.dim:
            raise ValueError("extents and points must have one entry per axis")
        for L in self.extents:
            if not (math.isfinite(L) and L > 0):
                raise ValueError(f"extents must be positive and finite, got {self.extents}")
        for p in self.points:
            if int(p) != p or p < 3:
                raise ValueError(f"points per axis must be integers >= 3, got {self.points}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(p) for p in self.points)

    @property
    def n(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (p + 1) for L, p in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return h * np.arange(1, self.points[axis] + 1)

    def coordinates(self) -> np.ndarray:
        """Interior point coordinates, shape ``(n, dim)`` in linear-index order."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_linear(self, multi_index) -> int | np.ndarray:
        return np.ravel_multi_index(tuple(np.asarray(multi_index).T), self.shape)

    def to_multi(self, index) -> np.ndarray:
        return np.stack(np.unravel_index(index, self.shape), axis=-1)


def build_domain(dim: int, extents: Sequence[float], points: Sequence[int]) -> GridDomain:
    """Create a :class:`GridDomain`, validating its arguments.

    >>> build_domain(1, [1.0], [3]).spacing
    (0.25,)
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be <= 3 (and >= 1), got {dim}")
    return GridDomain(int(dim), tuple(float(e) for e in extents), tuple(int(p) for p in points))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples at the interior points of ``domain``."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.domain.n,):
            raise ValueError(f"expected {self.domain.n} samples, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


@dataclass(frozen=True)
class ExternalPotential:
    """Description of the external potential, realized on demand.

    ``kind`` is one of ``"zero"``, ``"harmonic"``, ``"square_well"`` or
    ``"custom"``. For ``harmonic`` the value is ``stiffness * |x - center|^2``;
    for ``square_well`` it is ``depth`` inside the closed box
    ``[lower, upper]`` and zero elsewhere.
    """

    kind: str = "zero"
    center: Optional[tuple[float, ...]] = None
    stiffness: float = 0.0
    depth: float = 0.0
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None
    samples: Optional[tuple[float, ...]] = field(default=None, repr=False)

    @classmethod
    def zero(cls) -> "ExternalPotential":
        return cls("zero")

    @classmethod
    def harmonic(cls, center, stiffness: float) -> "ExternalPotential":
        return cls("harmonic", center=tuple(np.atleast_1d(center).astype(float)), stiffness=float(stiffness))

    @classmethod
    def square_well(cls, depth: float, lower, upper) -> "ExternalPotential":
        return cls(
            "square_well",
            depth=float(depth),
            lower=tuple(np.atleast_1d(lower).astype(float)),
            upper=tuple(np.atleast_1d(upper).astype(float)),
        )

    @classmethod
    def custom(cls, samples) -> "ExternalPotential":
        return cls("custom", samples=tuple(np.asarray(samples, dtype=float).ravel()))

    def realize(self, domain: GridDomain) -> GridFunction:
        return realize_potential(self, domain)


def _axis_tuple(value, dim: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape != (dim,):
        raise ValueError(f"{name} must have {dim} entries, got {arr.tolist()}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def realize_potential(kind: ExternalPotential, domain: GridDomain) -> GridFunction:
    """Sample ``kind`` at the interior points of ``domain``."""
    x = domain.coordinates()
    if kind.kind == "zero":
        values = np.zeros(domain.n)
    elif kind.kind == "harmonic":
        center = _axis_tuple(kind.center, domain.dim, "center")
        if not math.isfinite(kind.stiffness):
            raise ValueError("stiffness must be finite")
        values = kind.stiffness * np.sum((x - center) ** 2, axis=1)
    elif kind.kind == "square_well":
        lo = _axis_tuple(kind.lower, domain.dim, "lower")
        hi = _axis_tuple(kind.upper, domain.dim, "upper")
        if not math.isfinite(kind.depth):
            raise ValueError("depth must be finite")
        ext = np.asarray(domain.extents)
        if np.any(lo < 0) or np.any(hi > ext) or np.any(lo > hi):
            raise ValueError(f"well box [{lo.tolist()}, {hi.tolist()}] lies outside the domain")
        slack = 1e-12 * ext
        inside = np.all((x >= lo - slack) & (x <= hi + slack), axis=1)
        values = np.where(inside, kind.depth, 0.0)
    elif kind.kind == "custom":
        if kind.samples is None or len(kind.samples) != domain.n:
            raise ValueError(f"custom potential needs exactly {domain.n} samples")
        values = np.asarray(kind.samples, dtype=float)
    else:
        raise ValueError(f"unknown potential kind {kind.kind!r}")
    return GridFunction(domain, values)


def _laplacian_1d(points: int, h: float) -> sp.csr_matrix:
    main = np.full(points, 2.0 / h**2)
    off = np.full(points - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@lru_cache(maxsize=32)
def laplacian(domain: GridDomain) -> sp.csr_matrix:
    """Sparse matrix of ``-Delta_h`` with homogeneous Dirichlet data.

    Built as a Kronecker sum of 1D second-difference matrices, so the
    coefficients are exactly symmetric.
    """
    shape = domain.shape
    total = sp.csr_matrix((domain.n, domain.n))
    for a, (p, h) in enumerate(zip(shape, domain.spacing)):
        left = sp.identity(int(np.prod(shape[:a], dtype=int)), format="csr")
        right = sp.identity(int(np.prod(shape[a + 1:], dtype=int)), format="csr")
        total = total + sp.kron(sp.kron(left, _laplacian_1d(p, h)), right, format="csr")
    total.sort_indices()
    return total.tocsr()


@dataclass(frozen=True, eq=False)
class SchrodingerOperator:
    """``-Delta_h + diag(V0)`` on a grid, or a bare symmetric matrix.

    Synthetic matrix operators (``domain is None``) use the plain Euclidean
    inner product, i.e. a unit cell volume.
    """

    matrix: sp.csr_matrix | np.ndarray
    domain: Optional[GridDomain] = None
    potential: Optional[np.ndarray] = None

    @classmethod
    def from_matrix(cls, matrix) -> "SchrodingerOperator":
        if sp.issparse(matrix):
            mat = sp.csr_matrix(matrix, dtype=float)
            asym = abs(mat - mat.T)
            if asym.nnz and asym.max() > 0:
                raise ValueError("operator matrix must be symmetric")
        else:
            mat = np.array(matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("operator matrix must be square")
            scale = max(np.max(np.abs(mat)), 1.0) if mat.size else 1.0
            if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-12 * scale:
                raise ValueError("operator matrix must be symmetric")
            mat = 0.5 * (mat + mat.T)
            mat.setflags(write=False)
        return cls(mat, None, None)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def cell_volume(self) -> float:
        return self.domain.cell_volume if self.domain is not None else 1.0

    @property
    def laplacian(self) -> sp.csr_matrix:
        if self.domain is None:
            raise ValueError("synthetic operator has no Laplacian part")
        return laplacian(self.domain)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix)

    def with_potential(self, extra: np.ndarray):
        """Matrix of ``A + diag(extra)`` (the effective Hamiltonian)."""
        if sp.issparse(self.matrix):
            return (self.matrix + sp.diags(np.asarray(extra, dtype=float))).tocsr()
        return self.matrix + np.diag(np.asarray(extra, dtype=float))

    def quadratic_form(self, u: np.ndarray, extra: Optional[np.ndarray] = None) -> np.ndarray:
        """``<u_j, (A + diag(extra)) u_j>`` per column, in the discrete L2 product.

        Grid operators use the gradient form ``sum |grad_h u|^2 + V u^2``,
        which avoids the cancellation in ``u . (-Delta_h u)`` for smooth ``u``.
        """
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        if single:
            u = u[:, None]
        if self.domain is None:
            out = np.einsum("ij,ij->j", u, self.matrix @ u)
            if extra is not None:
                out = out + np.einsum("i,ij->j", extra, u * u)
        else:
            out = gradient_energy(self.domain, u)
            pot = np.zeros(self.n) if self.potential is None else self.potential
            if extra is not None:
                pot = pot + extra
            out = out + np.einsum("i,ij->j", pot, u * u)
            out = out * self.cell_volume
        return out[0] if single else out


def gradient_energy(domain: GridDomain, u: np.ndarray) -> np.ndarray:
    """``sum_edges (difference / h)^2`` per column, zero boundary values included."""
    u = np.asarray(u, dtype=float)
    cols = u.shape[1]
    grid = u.reshape(domain.shape + (cols,))
    total = np.zeros(cols)
    for a, h in enumerate(domain.spacing):
        pad = [(0, 0)] * (domain.dim + 1)
        pad[a] = (1, 1)
        diffs = np.diff(np.pad(grid, pad), axis=a)
        total += np.sum(diffs.reshape(-1, cols) ** 2, axis=0) / h**2
    return total


def assemble_operator(domain: GridDomain, potential=None) -> SchrodingerOperator:
    """Assemble ``A = -Delta_h + diag(V0)``.

    ``potential`` may be an :class:`ExternalPotential`, a
    :class:`GridFunction` or ``None`` (zero potential).
    """
    if potential is None:
        potential = ExternalPotential.zero()
    if isinstance(potential, ExternalPotential):
        potential = potential.realize(domain)
    if isinstance(potential, GridFunction):
        if potential.domain != domain:
            raise ValueError("potential was realized on a different domain")
        samples = potential.values
    else:
        samples = np.asarray(potential, dtype=float)
        if samples.shape != (domain.n,):
            raise ValueError(f"potential has {samples.size} samples, domain has {domain.n}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("potential samples must be finite")
    lap = laplacian(domain)
    matrix = (lap + sp.diags(samples)).tocsr()
    matrix.sort_indices()
    samples = np.array(samples, dtype=float)
    samples.setflags(write=False)
    return SchrodingerOperator(matrix, domain, samples)
