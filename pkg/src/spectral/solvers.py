"""Solution paths for the linear and the Schrodinger-Poisson problems.

* :func:`minimize_linear` and :func:`minimize_coupled` run Riemannian
  descent on frames for ``J0`` or ``J0 + J1`` and post-process blocks of
  equal weights.
* :func:`scf_homotopy_1d` continues the fixed-point map
  ``V -> theta * B(F(V))`` from ``theta = 0`` to ``1`` on 1D grids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import SchrodingerOperator
from .functional import Evaluation, evaluate, value_change
from .manifold import (
    Frame,
    block_rotate,
    direction_from_tangent,
    gram_error,
    project_tangent,
    random_frame,
    reorthonormalize,
    curve_velocity,
    retract,
)
from .poisson import PoissonError, solver_for
from .weights import DEFAULT_DEGENERACY_TOL, WeightSequence, detect_degeneracy

__all__ = [
    "SolverOptions",
    "SelfConsistentSolution",
    "HomotopySolution",
    "HomotopyError",
    "SpectrumReport",
    "minimize_linear",
    "minimize_coupled",
    "scf_homotopy_1d",
    "extract_spectrum",
]

log = logging.getLogger(__name__)

_NOISE = 256 * np.finfo(float).eps

ProgressCallback = Callable[[int, float, float], None]


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the frame descent.

    ``gradient_tolerance`` bounds the weight-normalized gradient norm
    ``|| G D^-1 / 2 ||``, which tracks the per-state residuals. The line
    search is ``"armijo"`` (sufficient decrease ``armijo_c1``, step shrink
    ``backtrack_factor``) or ``"fixed"`` (always ``fixed_step``).
    """

    max_iterations: int = 20000
    gradient_tolerance: float = 1e-8
    line_search: str = "armijo"
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    fixed_step: float = 0.1
    reorthonormalize_every: int = 50
    seed: int = 0
    restarts: int = 3
    conjugate: bool = True
    precondition: bool = True
    residual_factor: float = 10.0
    poisson_tolerance: float = 1e-10
    degeneracy_tolerance: float = DEFAULT_DEGENERACY_TOL
    callback: Optional[ProgressCallback] = field(default=None, compare=False)

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.line_search not in ("armijo", "fixed"):
            raise ValueError(f"unknown line search {self.line_search!r}")
        if not 0 < self.armijo_c1 <= 0.5:
            raise ValueError("armijo_c1 must lie in (0, 0.5]")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.fixed_step <= 0:
            raise ValueError("fixed_step must be positive")
        if self.reorthonormalize_every < 1:
            raise ValueError("reorthonormalize_every must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass(frozen=True, eq=False)
class SelfConsistentSolution:
    frame: Frame
    eigenvalues: np.ndarray
    hartree: Optional[np.ndarray]
    functional_history: tuple[float, ...]
    residuals: np.ndarray
    converged: bool
    iterations_used: int
    weights: np.ndarray
    j0: float = 0.0
    j1: float = 0.0
    gradient_norm: float = float("nan")
    poisson_residual: float = 0.0
    gram_error: float = 0.0
    max_gram_error: float = 0.0
    seed: int = 0
    message: str = ""

    @property
    def total(self) -> float:
        return self.j0 + self.j1

    @property
    def residual_max(self) -> float:
        return float(np.max(self.residuals, initial=0.0))


@dataclass(frozen=True, eq=False)
class HomotopySolution:
    potential: np.ndarray
    theta_path: tuple[tuple[float, int, float], ...]
    fixed_point_residual: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: np.ndarray
    converged: bool = True


class HomotopyError(RuntimeError):
    def __init__(self, theta: float, residual: float, iterations: int):
        super().__init__(
            f"fixed-point stage theta={theta:.4g} stalled after {iterations} iterations "
            f"(last update {residual:.3e})"
        )
        self.theta = theta
        self.residual = residual
        self.iterations = iterations


def _weights_array(weights) -> np.ndarray:
    return np.asarray(getattr(weights, "values", weights), dtype=float)


def _blocks(weights, tol: float):
    if isinstance(weights, WeightSequence):
        return detect_degeneracy(weights.values, tol)
    return detect_degeneracy(_weights_array(weights), tol)


def _preconditioner(op: SchrodingerOperator, rho: np.ndarray, block_tol: float):
    """Block-diagonal SPD approximation of the inverse Riemannian Hessian.

    In-span rotations between states ``i`` and ``l`` have curvature
    ``(rho_i - rho_l) (lambda_l - lambda_i)`` near a critical point; those
    coordinates are divided by its magnitude (rotations inside blocks of
    equal weight leave ``J`` invariant and are dropped). The component
    orthogonal to the span is mapped column-wise by
    ``(A + sigma)^-1 / (2 rho_j)``, with ``sigma`` making ``A + sigma`` SPD.
    """
    if sp.issparse(op.matrix):
        pot = op.potential if op.potential is not None else np.zeros(op.n)
        sigma = max(0.0, -float(np.min(pot, initial=0.0)))
        lu = spla.splu((op.matrix + sigma * sp.identity(op.n)).tocsc())
        solve = lu.solve
    else:
        A = np.asarray(op.matrix)
        radius = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
        lo = float(np.min(np.diag(A) - radius))
        hi = float(np.max(np.diag(A) + radius))
        sigma = max(0.0, 0.1 * max(hi - lo, 1e-12) - lo)
        chol = sla.cho_factor(A + sigma * np.eye(op.n))
        solve = lambda X: sla.cho_solve(chol, X)  # noqa: E731
    scale = 0.5 / rho
    drho = rho[:, None] - rho[None, :]
    same = np.abs(drho) <= block_tol * np.maximum(rho[:, None], rho[None, :])

    def apply(ev: Evaluation, G: np.ndarray) -> np.ndarray:
        frame = ev.frame
        U, vol = frame.columns, frame.cell_volume
        C = vol * (U.T @ G)
        C = 0.5 * (C - C.T)
        lam = ev.rayleigh
        curv = np.abs(drho * (lam[None, :] - lam[:, None]))
        floor = 1e-12 * max(float(np.max(curv, initial=0.0)), 1e-300)
        C = np.where(same, 0.0, C / np.maximum(curv, floor))
        perp = G - U @ (vol * (U.T @ G))
        P = np.asarray(solve(perp)) * scale
        P = P - U @ (vol * (U.T @ P))
        return U @ C + P

    return apply


@dataclass
class _RunResult:
    evaluation: Evaluation
    history: list
    converged: bool
    iterations: int
    max_gram_error: float
    message: str


def _rotated_residuals(ev: Evaluation, blocks) -> np.ndarray:
    """Per-state residuals after diagonalizing each equal-weight block."""
    if all(len(b) < 2 for b in blocks):
        return ev.residuals()
    frame = block_rotate(ev.frame, ev.H, blocks)
    U = frame.columns
    HU = np.asarray(ev.H @ U)
    R = HU - U * np.einsum("ij,ij->j", U, HU) * frame.cell_volume
    return np.sqrt(frame.cell_volume) * np.linalg.norm(R, axis=0)


def _descend(ev: Evaluation, options: SolverOptions, evaluate_at, precond, blocks=()) -> _RunResult:
    history = [ev.total]
    frame = ev.frame
    inner = frame.inner
    tol = options.gradient_tolerance
    step = 1.0
    prev = None  # (gradient, preconditioned gradient, direction)
    max_gram = gram_error(frame)
    message = "iteration limit reached"
    converged = False
    it = 0
    grad = ev.gradient()
    while True:
        if options.callback is not None:
            options.callback(it, history[-1], grad.norm)
        if grad.scaled_norm <= tol:
            if np.max(_rotated_residuals(ev, blocks), initial=0.0) <= options.residual_factor * tol or tol < 1e-15:
                converged = True
                message = "gradient tolerance reached"
                break
            # gradient small but residuals are not; tighten and continue
            tol = tol / 10.0
        if it >= options.max_iterations:
            break
        G = grad.riemannian_gradient
        PG = precond(ev, G) if precond is not None else G
        xi = -PG
        if options.conjugate and prev is not None:
            g_old, pg_old, xi_old = prev
            denom = inner(g_old, pg_old)
            beta = max(0.0, inner(G - project_tangent(frame, g_old), PG) / denom) if denom > 0 else 0.0
            xi = -PG + beta * project_tangent(frame, xi_old)
            if inner(G, xi) >= 0:
                xi = -PG
        slope = inner(G, xi)
        if slope >= 0:
            message = "no descent direction"
            break
        direction = direction_from_tangent(frame, xi)
        if options.line_search == "fixed":
            t = options.fixed_step
            new_ev = evaluate_at(retract(frame, direction, t))
            change = value_change(ev, new_ev)
        else:
            t = min(2.0 * step, 1e6)
            # energy differences below this are rounding, not descent
            noise = _NOISE * max(abs(ev.total), np.finfo(float).tiny)
            while True:
                new_ev = evaluate_at(retract(frame, direction, t))
                change = value_change(ev, new_ev)
                if abs(change) <= noise:
                    # change lost in rounding: secant step on the slope along the curve
                    velocity = curve_velocity(frame, direction, t)
                    slope_t = new_ev.frame.inner(new_ev.euclidean_gradient(), velocity)
                    if slope_t > slope:
                        t = t * slope / (slope - slope_t)
                        new_ev = evaluate_at(retract(frame, direction, t))
                        change = value_change(ev, new_ev)
                    if change <= noise:
                        change = min(change, 0.0) if change < -noise else 0.0
                        break
                elif change <= options.armijo_c1 * t * slope:
                    break
                t *= options.backtrack_factor
                if t < 1e-14:
                    new_ev = None
                    break
            if new_ev is None:
                message = "line search stalled"
                break
            step = t
        it += 1
        prev = (G, PG, xi)
        new_frame = new_ev.frame
        if it % options.reorthonormalize_every == 0:
            new_frame = reorthonormalize(new_frame)
            new_ev = evaluate_at(new_frame)
        max_gram = max(max_gram, gram_error(new_frame))
        # accumulate the accurately differenced change; equals J(new) up to rounding of J
        history.append(history[-1] + min(change, 0.0) if options.line_search == "armijo" else new_ev.total)
        ev, frame = new_ev, new_frame
        grad = ev.gradient()
    return _RunResult(ev, history, converged, it, max_gram, message)


def _finish(run: _RunResult, op, rho, coupled: bool, options: SolverOptions, seed: int) -> SelfConsistentSolution:
    ev = run.evaluation
    blocks = _blocks(rho, options.degeneracy_tolerance)
    frame = block_rotate(ev.frame, ev.H, blocks)
    final = evaluate(frame, op, rho, coupled, options.poisson_tolerance)
    residuals = final.residuals()
    converged = run.converged
    message = run.message
    if converged and np.max(residuals, initial=0.0) > options.residual_factor * options.gradient_tolerance:
        converged = False
        message = "gradient converged but per-state residuals did not"
    return SelfConsistentSolution(
        frame=frame,
        eigenvalues=np.array(final.rayleigh),
        hartree=None if final.V is None else np.array(final.V),
        functional_history=tuple(run.history),
        residuals=residuals,
        converged=converged,
        iterations_used=run.iterations,
        weights=np.array(rho),
        j0=final.j0,
        j1=final.j1,
        gradient_norm=final.gradient().norm,
        poisson_residual=0.0 if final.hartree is None else final.hartree.poisson_residual,
        gram_error=gram_error(frame),
        max_gram_error=max(run.max_gram_error, gram_error(frame)),
        seed=seed,
        message=message,
    )


def _better(a: SelfConsistentSolution, b: Optional[SelfConsistentSolution]) -> bool:
    if b is None:
        return True
    if a.converged != b.converged:
        return a.converged
    return a.total < b.total


def _minimize(op: SchrodingerOperator, weights, options: SolverOptions, coupled: bool,
              initial: Optional[Frame] = None) -> SelfConsistentSolution:
    rho = _weights_array(weights)
    if rho.size > op.n:
        raise ValueError(f"M = {rho.size} states do not fit in n = {op.n}")
    precond = _preconditioner(op, rho, options.degeneracy_tolerance) if options.precondition and rho.size else None

    def evaluate_at(frame):
        return evaluate(frame, op, rho, coupled, options.poisson_tolerance)

    best = None
    starts = [initial] if initial is not None else [None] * options.restarts
    for k, start in enumerate(starts):
        seed = options.seed + k
        frame = start if start is not None else random_frame(op.domain if op.domain is not None else op.n, rho.size, seed)
        run = _descend(evaluate_at(frame), options, evaluate_at, precond,
                       _blocks(rho, options.degeneracy_tolerance))
        sol = _finish(run, op, rho, coupled, options, seed)
        log.debug("start %d: J=%.15g converged=%s iterations=%d", k, sol.total, sol.converged, sol.iterations_used)
        if _better(sol, best):
            best = sol
    return best


def minimize_linear(operator, weights, options: SolverOptions = SolverOptions(),
                    initial: Optional[Frame] = None) -> SelfConsistentSolution:
    """Minimize ``J0(U) = tr(D U* A U)`` over frames with ``M = len(weights)`` columns.

    At a minimizer the columns are eigenvectors of ``A``; blocks of equal
    weights are rotated to diagonalize ``A`` on their span.
    """
    op = operator if isinstance(operator, SchrodingerOperator) else SchrodingerOperator.from_matrix(operator)
    return _minimize(op, weights, options, coupled=False, initial=initial)


def minimize_coupled(operator: SchrodingerOperator, weights, domain=None,
                     options: SolverOptions = SolverOptions(),
                     initial: Optional[Frame] = None) -> SelfConsistentSolution:
    """Minimize ``J0 + J1`` over frames; the result solves the discrete
    Schrodinger-Poisson system with ``H = A + diag(V[U])``."""
    if operator.domain is None:
        raise ValueError("coupled problems need a grid operator")
    if domain is not None and domain != operator.domain:
        raise ValueError("domain does not match the operator's domain")
    try:
        return _minimize(operator, weights, options, coupled=True, initial=initial)
    except PoissonError:
        log.error("Poisson solve failed inside the coupled descent")
        raise


def _first_extremum_sign(v: np.ndarray) -> float:
    """Sign of the first local extremum of a sampled 1D function."""
    d = np.diff(np.concatenate(([0.0], v, [0.0])))
    for i in range(1, d.size):
        if d[i - 1] * d[i] <= 0 and v[i - 1] != 0:
            return 1.0 if v[i - 1] > 0 else -1.0
    return 1.0


def _lowest_states(op: SchrodingerOperator, V: np.ndarray, M: int):
    H = op.with_potential(V)
    diag = H.diagonal()
    off = H.diagonal(1)
    lam, vecs = sla.eigh_tridiagonal(diag, off, select="i", select_range=(0, M - 1))
    vol = op.cell_volume
    phi = vecs / np.sqrt(vol)
    for k in range(M):
        phi[:, k] *= _first_extremum_sign(phi[:, k])
    return lam, phi


def scf_homotopy_1d(operator: SchrodingerOperator, weights, domain=None, theta_steps: int = 5,
                    damping: float = 0.5, tolerance: float = 1e-12,
                    max_stage_iterations: int = 1000,
                    poisson_tolerance: float = 1e-10) -> HomotopySolution:
    """Continuation of ``V - theta T(V) = 0`` with ``T(V) = B F(V)``.

    ``F(V) = sum_k rho_k phi_k[V]^2`` uses the ``M`` lowest eigenfunctions of
    ``A + diag(V)`` (ascending, so the ``k``-th weight occupies the ``k``-th
    level) and ``B`` is the Dirichlet Poisson solve. Each stage iterates the
    damped map ``V <- (1 - damping) V + damping * theta * T(V)`` until the
    update is below ``tolerance`` in max norm.
    """
    domain = domain if domain is not None else operator.domain
    if domain is None or domain.dim != 1:
        raise ValueError("the homotopy fixed-point method is implemented for 1D grids only")
    if operator.domain != domain:
        raise ValueError("domain does not match the operator's domain")
    if theta_steps < 1:
        raise ValueError("theta_steps must be >= 1")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    rho = _weights_array(weights)
    M = rho.size
    poisson = solver_for(domain)

    def T(V):
        _, phi = _lowest_states(operator, V, M)
        return poisson.solve((phi * phi) @ rho, poisson_tolerance)

    V = np.zeros(domain.n)
    path = []
    for theta in np.linspace(0.0, 1.0, theta_steps + 1):
        theta = float(theta)
        update = np.inf
        for k in range(1, max_stage_iterations + 1):
            new = (1.0 - damping) * V + damping * theta * T(V) if theta > 0 else np.zeros_like(V)
            update = float(np.max(np.abs(new - V)))
            V = new
            if update <= tolerance:
                break
        else:
            raise HomotopyError(theta, update, max_stage_iterations)
        path.append((theta, k, update))
    residual = float(np.max(np.abs(V - T(V))))
    lam, phi = _lowest_states(operator, V, M)
    return HomotopySolution(V, tuple(path), residual, lam, phi, rho, residual <= 10 * tolerance / damping)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Eigenpairs in weight order plus an ascending view.

    ``ordering_consistent`` is true when every pair with ``rho_i > rho_j``
    has ``lambda_i <= lambda_j`` (up to ``tolerance``).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sorted_eigenvalues: np.ndarray
    sorted_eigenvectors: np.ndarray
    order: np.ndarray
    weights: np.ndarray
    ordering_consistent: bool
    violations: int


def extract_spectrum(solution: SelfConsistentSolution, tolerance: float = 1e-10) -> SpectrumReport:
    lam = np.asarray(solution.eigenvalues, dtype=float)
    rho = np.asarray(solution.weights, dtype=float)
    vecs = np.asarray(solution.frame.columns)
    order = np.argsort(lam, kind="stable")
    scale = tolerance * max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    violations = 0
    for i in range(lam.size):
        for j in range(lam.size):
            if rho[i] > rho[j] and lam[i] > lam[j] + scale:
                violations += 1
    return SpectrumReport(lam, vecs, lam[order], vecs[:, order], order, rho, violations == 0, violations)
