"""Truncated occupation weights and their degeneracy structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["WeightSequence", "make_weights", "detect_degeneracy", "DEFAULT_DEGENERACY_TOL"]

DEFAULT_DEGENERACY_TOL = 1e-12

Blocks = tuple[tuple[int, ...], ...]


def detect_degeneracy(weights, tolerance: float = DEFAULT_DEGENERACY_TOL) -> Blocks:
    """Split indices into maximal runs of (relatively) equal weights.

    Adjacent entries ``a, b`` belong to the same run when
    ``|a - b| <= tolerance * max(a, b)``. Indices are zero-based.

    >>> detect_degeneracy([2.0, 1.0, 1.0], 0.0)
    ((0,), (1, 2))
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    values = np.asarray(getattr(weights, "values", weights), dtype=float)
    if values.size == 0:
        return ()
    blocks = [[0]]
    for i in range(1, values.size):
        a, b = values[i - 1], values[i]
        if abs(a - b) <= tolerance * max(abs(a), abs(b)):
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return tuple(tuple(b) for b in blocks)


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Positive weights ``rho_1 .. rho_M`` (the diagonal of ``D``).

    Attributes
    ----------
    values : ndarray
        The weights, in state order.
    scheme : str
        ``"geometric"``, ``"power"``, ``"boltzmann"`` or ``"explicit"``.
    params : dict
        Scheme parameters, kept for reporting.
    dim : int
        Spatial dimension used by the tail diagnostic.
    """

    values: np.ndarray
    scheme: str = "explicit"
    params: tuple = ()
    dim: int = 1
    tolerance: float = DEFAULT_DEGENERACY_TOL

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("weights must be positive and finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def multiplicity_blocks(self) -> Blocks:
        return detect_degeneracy(self.values, self.tolerance)

    @property
    def tail(self) -> float:
        """``M^(2/dim) * rho_M``; small values mean little weight is truncated."""
        if self.M == 0:
            return 0.0
        return float(self.M ** (2.0 / self.dim) * self.values[-1])

    def partial_sum(self) -> float:
        """``sum_m m^(2/dim) rho_m`` over the retained states."""
        m = np.arange(1, self.M + 1)
        return float(np.sum(m ** (2.0 / self.dim) * self.values))

    def scaled(self, factor: float) -> "WeightSequence":
        return WeightSequence(self.values * factor, self.scheme, self.params, self.dim, self.tolerance)

    def diagnostics(self) -> dict:
        return {
            "scheme": self.scheme,
            "values": self.values.tolist(),
            "blocks": [list(b) for b in self.multiplicity_blocks],
            "tail": self.tail,
            "weighted_sum": self.partial_sum(),
        }


def make_weights(scheme: str, M: int, dim: int = 1, *, alpha: float | None = None,
                 p: float | None = None, beta: float | None = None,
                 base_eigenvalues: Sequence[float] | None = None,
                 values: Sequence[float] | None = None,
                 tolerance: float = DEFAULT_DEGENERACY_TOL) -> WeightSequence:
    """Construct a validated weight sequence.

    ``geometric``: ``rho_j = alpha**j``; ``power``: ``rho_j = j**-p`` with
    ``p > 1 + 2/dim``; ``boltzmann``: ``rho_j = exp(-beta * lambda_j)`` over
    ascending positive ``base_eigenvalues``; ``explicit``: ``values`` as given.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dimension must be <= 3 (and >= 1), got {dim}")
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    M = int(M)
    j = np.arange(1, M + 1, dtype=float)
    if scheme == "geometric":
        if alpha is None or not (0.0 < alpha < 1.0):
            raise ValueError(f"geometric ratio alpha must lie in (0, 1), got {alpha}")
        out = alpha ** j
        params = (("alpha", float(alpha)),)
    elif scheme == "power":
        if p is None or not p > 1.0 + 2.0 / dim:
            raise ValueError(f"power exponent p must exceed 1 + 2/dim = {1 + 2 / dim:g}, got {p}")
        out = j ** (-float(p))
        params = (("p", float(p)),)
    elif scheme == "boltzmann":
        if beta is None or not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        lam = np.asarray(base_eigenvalues if base_eigenvalues is not None else [], dtype=float)
        if lam.size < M:
            raise ValueError(f"need {M} base eigenvalues, got {lam.size}")
        lam = lam[:M]
        if np.any(lam <= 0) or np.any(np.diff(lam) < 0):
            raise ValueError("base eigenvalues must be positive and ascending")
        out = np.exp(-float(beta) * lam)
        params = (("beta", float(beta)), ("base_eigenvalues", tuple(lam.tolist())))
    elif scheme == "explicit":
        out = np.asarray(values if values is not None else [], dtype=float).ravel()
        if out.size != M:
            raise ValueError(f"explicit list has {out.size} entries, expected M = {M}")
        if np.any(~np.isfinite(out)) or np.any(out <= 0):
            raise ValueError("explicit weights must be positive and finite")
        params = ()
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    if np.any(out <= 0) or not np.all(np.isfinite(out)):
        # exp(-beta*lambda) underflows for large arguments
        raise ValueError("weights underflowed to zero; reduce M or the scheme's decay")
    return WeightSequence(out, scheme, params, dim, tolerance)
