"""Weighted-trace energy ``J = J0 + J1`` on frames and its Riemannian gradient.

``J0(U) = sum_j rho_j <u_j, A u_j>`` and ``J1(U) = 1/2 int |grad V[U]|^2``
where ``-Delta V[U] = sum_j rho_j u_j^2``. Curves are parametrized as
``U(t) = exp(-t M) U`` (see :mod:`spectral.manifold`); the gradient returned
here pairs with the tangent of such a curve to give ``dJ/dt`` at ``t = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import SchrodingerOperator
from .manifold import Frame, project_tangent
from .poisson import DEFAULT_TOLERANCE, HartreePotentialResult, density, hartree_potential

__all__ = [
    "FunctionalValue",
    "GradientReport",
    "Evaluation",
    "evaluate",
    "eval_j0",
    "eval_j1",
    "eval_total",
    "riemannian_gradient",
    "stationarity_residual",
    "value_change",
]


def _as_operator(operator) -> SchrodingerOperator:
    if isinstance(operator, SchrodingerOperator):
        return operator
    return SchrodingerOperator.from_matrix(operator)


def _rho(weights) -> np.ndarray:
    return np.asarray(getattr(weights, "values", weights), dtype=float)


@dataclass(frozen=True)
class FunctionalValue:
    j0: float
    j1: float
    total: float
    per_state_rayleigh: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class GradientReport:
    """Riemannian gradient of ``J`` at a frame.

    ``riemannian_gradient`` is the tangent projection of ``2 H U D`` with
    ``H = A + diag(V[U])``. Descent moves along ``-riemannian_gradient``.
    """

    riemannian_gradient: np.ndarray
    norm: float
    effective_hamiltonian: object
    scaled_norm: float


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Everything derived from one Poisson solve at one frame."""

    frame: Frame
    operator: SchrodingerOperator
    rho: np.ndarray
    coupled: bool
    j0: float
    j1: float
    V: Optional[np.ndarray]
    hartree: Optional[HartreePotentialResult]
    H: object
    HU: np.ndarray
    rayleigh: np.ndarray

    @property
    def total(self) -> float:
        return self.j0 + self.j1

    @property
    def value(self) -> FunctionalValue:
        return FunctionalValue(self.j0, self.j1, self.j0 + self.j1, tuple(self.rayleigh.tolist()))

    def euclidean_gradient(self) -> np.ndarray:
        return 2.0 * self.HU * self.rho

    def gradient(self) -> GradientReport:
        G = project_tangent(self.frame, self.euclidean_gradient())
        vol = self.frame.cell_volume
        norm = float(np.sqrt(vol) * np.linalg.norm(G))
        scaled = float(np.sqrt(vol) * np.linalg.norm(G / (2.0 * self.rho))) if self.rho.size else 0.0
        return GradientReport(G, norm, self.H, scaled)

    def residuals(self) -> np.ndarray:
        R = self.HU - self.frame.columns * self.rayleigh
        return np.sqrt(self.frame.cell_volume) * np.linalg.norm(R, axis=0)


def evaluate(frame: Frame, operator, weights, coupled: bool = True,
             tolerance: float = DEFAULT_TOLERANCE) -> Evaluation:
    """Evaluate ``J0``, ``J1`` and the effective Hamiltonian at ``frame``.

    With ``coupled=False`` the Hartree term is dropped and ``H = A``.
    """
    op = _as_operator(operator)
    rho = _rho(weights)
    U = frame.columns
    if U.shape[1] != rho.size:
        raise ValueError(f"frame has {U.shape[1]} columns but {rho.size} weights were given")
    if U.shape[0] != op.n:
        raise ValueError(f"frame has {U.shape[0]} rows but the operator acts on {op.n}")
    V = hartree = None
    j1 = 0.0
    if coupled:
        if op.domain is None:
            raise ValueError("the coupled functional needs a grid operator")
        hartree = hartree_potential(frame, rho, op.domain, tolerance)
        V = hartree.potential.values
        j1 = hartree.dirichlet_energy
        H = op.with_potential(V)
    else:
        H = op.matrix
    rayleigh = op.quadratic_form(U, V) if U.shape[1] else np.zeros(0)
    j0 = float(rho @ op.quadratic_form(U)) if U.shape[1] else 0.0
    HU = np.asarray(H @ U)
    return Evaluation(frame, op, rho, coupled, j0, j1, V, hartree, H, HU, np.asarray(rayleigh))


def value_change(old: Evaluation, new: Evaluation) -> float:
    """``J(new) - J(old)`` computed from frame differences.

    Differencing two separately rounded energies loses everything below
    ``eps * |J|``; writing the change as ``<U' - U, A (U' + U)>`` and
    ``1/2 <f' - f, V' + V>`` keeps it accurate down to much smaller steps.
    """
    rho = old.rho
    delta = new.frame.columns - old.frame.columns
    plus = new.frame.columns + old.frame.columns
    vol = old.frame.cell_volume
    A = old.operator.matrix
    change = vol * float(np.sum(rho * np.einsum("ij,ij->j", delta, np.asarray(A @ plus))))
    if old.coupled:
        df = (delta * plus) @ rho
        change += 0.5 * vol * float(df @ (new.V + old.V))
    return change


def eval_j0(frame: Frame, operator, weights) -> float:
    """``sum_j rho_j <u_j, A u_j>`` in the discrete L2 product."""
    op = _as_operator(operator)
    rho = _rho(weights)
    if frame.M != rho.size:
        raise ValueError(f"frame has {frame.M} columns but {rho.size} weights were given")
    if frame.M == 0:
        return 0.0
    return float(rho @ op.quadratic_form(frame.columns))


def eval_j1(frame: Frame, weights, domain=None, poisson_tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Dirichlet energy of the Hartree potential of ``frame``."""
    return hartree_potential(frame, weights, domain, poisson_tolerance).dirichlet_energy


def eval_total(frame: Frame, operator, weights, domain=None, coupled: bool = True,
               tolerance: float = DEFAULT_TOLERANCE) -> FunctionalValue:
    op = _as_operator(operator)
    if domain is not None and op.domain is not None and domain != op.domain:
        raise ValueError("domain does not match the operator's domain")
    return evaluate(frame, op, weights, coupled, tolerance).value


def riemannian_gradient(frame: Frame, operator, weights, domain=None, coupled: bool = True,
                        tolerance: float = DEFAULT_TOLERANCE) -> GradientReport:
    return evaluate(frame, operator, weights, coupled, tolerance).gradient()


def stationarity_residual(frame: Frame, operator, weights, domain=None, coupled: bool = True,
                          tolerance: float = DEFAULT_TOLERANCE) -> np.ndarray:
    """Per-state ``||H u_j - lambda_j u_j||`` with ``lambda_j`` the Rayleigh quotient."""
    return evaluate(frame, operator, weights, coupled, tolerance).residuals()
