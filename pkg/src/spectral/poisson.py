"""Dirichlet Poisson solves and the Hartree potential of a frame."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .grid import GridDomain, GridFunction, gradient_energy, laplacian

__all__ = [
    "PoissonError",
    "PoissonSolver",
    "HartreePotentialResult",
    "solve_poisson",
    "hartree_potential",
    "density",
]

DEFAULT_TOLERANCE = 1e-9


class PoissonError(RuntimeError):
    """Raised when a solve cannot reach the requested residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


class PoissonSolver:
    """Reusable solver for ``-Delta_h V = f`` on one domain.

    1D and 2D grids use a sparse LU factorization computed once; 3D grids
    use conjugate gradients with relative tolerance ``cg_rtol``.
    """

    def __init__(self, domain: GridDomain, cg_rtol: float = 1e-10, max_refinements: int = 3):
        self.domain = domain
        self.matrix = laplacian(domain).tocsc()
        self.cg_rtol = cg_rtol
        self.max_refinements = max_refinements
        self._lu = spla.splu(self.matrix) if domain.dim < 3 else None

    def residual(self, V: np.ndarray, f: np.ndarray) -> float:
        return float(np.max(np.abs(self.matrix @ V - f), initial=0.0))

    def _raw_solve(self, f: np.ndarray, x0=None) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(f)
        x, info = spla.cg(self.matrix, f, x0=x0, rtol=self.cg_rtol, atol=0.0, maxiter=20 * self.domain.n)
        return x

    def solve(self, f, tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray:
        if tolerance <= 0:
            raise ValueError("tolerance must be positive")
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.domain.n:
            raise ValueError(f"source has {f.shape[0]} samples, domain has {self.domain.n}")
        if not np.all(np.isfinite(f)):
            raise ValueError("source must be finite")
        if not np.any(f):
            return np.zeros_like(f)
        V = self._raw_solve(f)
        res = self.matrix @ V - f
        for _ in range(self.max_refinements):
            if np.max(np.abs(res)) <= tolerance:
                break
            V = V - self._raw_solve(res)
            res = self.matrix @ V - f
        achieved = float(np.max(np.abs(res)))
        if achieved > tolerance:
            raise PoissonError("Poisson solve did not reach tolerance", achieved)
        return V


@lru_cache(maxsize=16)
def solver_for(domain: GridDomain) -> PoissonSolver:
    return PoissonSolver(domain)


def solve_poisson(domain: GridDomain, f, tolerance: float = DEFAULT_TOLERANCE) -> GridFunction:
    """Solve ``-Delta_h V = f`` with ``V = 0`` on the boundary."""
    values = np.asarray(getattr(f, "values", f), dtype=float)
    return GridFunction(domain, solver_for(domain).solve(values, tolerance))


def density(columns: np.ndarray, weights) -> np.ndarray:
    """Pointwise ``sum_j rho_j u_j^2``."""
    rho = np.asarray(getattr(weights, "values", weights), dtype=float)
    columns = np.asarray(columns, dtype=float)
    if columns.shape[1] != rho.size:
        raise ValueError(f"{columns.shape[1]} columns but {rho.size} weights")
    if rho.size == 0:
        return np.zeros(columns.shape[0])
    return (columns * columns) @ rho


@dataclass(frozen=True, eq=False)
class HartreePotentialResult:
    potential: GridFunction
    source: GridFunction
    dirichlet_energy: float
    duality_energy: float
    poisson_residual: float

    @property
    def duality_gap(self) -> float:
        scale = max(abs(self.dirichlet_energy), abs(self.duality_energy))
        return 0.0 if scale == 0 else abs(self.dirichlet_energy - self.duality_energy) / scale


def dirichlet_energy(domain: GridDomain, V: np.ndarray) -> float:
    """``1/2 sum_cells |grad_h V|^2`` times the cell volume."""
    return 0.5 * domain.cell_volume * float(gradient_energy(domain, np.asarray(V)[:, None])[0])


def hartree_potential(frame, weights, domain: GridDomain | None = None,
                      tolerance: float = DEFAULT_TOLERANCE,
                      check_duality: float | None = 1e-10) -> HartreePotentialResult:
    """Hartree potential of ``frame`` for occupation ``weights``.

    The frame columns are L2-normalized grid functions, so the source
    integrates to ``sum rho_j``. The energy is computed as a gradient sum and
    as ``1/2 <f, V>``; the two must agree to ``check_duality`` (relative).
    """
    columns = np.asarray(getattr(frame, "columns", frame), dtype=float)
    domain = domain if domain is not None else frame.domain
    f = density(columns, weights)
    solver = solver_for(domain)
    V = solver.solve(f, tolerance)
    energy = dirichlet_energy(domain, V)
    dual = 0.5 * domain.cell_volume * float(f @ V)
    result = HartreePotentialResult(
        GridFunction(domain, V), GridFunction(domain, f), energy, dual, solver.residual(V, f)
    )
    if check_duality is not None and result.duality_gap > check_duality:
        raise PoissonError("energy duality check failed", result.duality_gap)
    return result
