"""Multiplicity of an isolated root via truncated dual spaces.

Diagnostic-only module: the solver never consults it. The multiplicity of an
isolated root equals the dimension of the space of differential functionals
(taken at the root) that annihilate every element of the ideal. Truncating
at differential order d turns that into the nullity of a finite matrix:

    row (i, beta):  the equation f_i multiplied by the monomial u^beta,
                    |beta| <= d - 1, after recentering the root to 0
    column alpha:   the normalized functional reading off the u^alpha
                    Taylor coefficient, |alpha| <= d
    entry:          Taylor coefficient of f_i at exponent alpha - beta

The nullity is nondecreasing in d and becomes stationary exactly at the
multiplicity, so the first repeat of consecutive nullities is returned.
Rows are scaled to unit norm before the SVD because the raw rows mix widely
different coefficient magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from . import linalg
from .polysys import PolySystem

COLUMN_CAP = 5000
DEFAULT_TOL = 1e-6
ROOT_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class MacaulayMatrix:
    """Order-d annihilation matrix with its row and column labels."""

    order: int
    matrix: np.ndarray
    row_labels: tuple
    col_labels: tuple


def _monomials_upto(nvars: int, degree: int):
    """All exponent tuples with total degree <= degree, graded order."""
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            exps = [0] * nvars
            for j in combo:
                exps[j] += 1
            out.append(tuple(exps))
    return out


def macaulay_matrix(system: PolySystem, x_star, order: int) -> MacaulayMatrix:
    """Assemble the order-d matrix whose nullity truncates the dual space."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    n = system.nvars
    cols = _monomials_upto(n, order)
    if len(cols) > COLUMN_CAP:
        raise ValueError(
            f"order {order} needs {len(cols)} columns, above the cap {COLUMN_CAP}"
        )
    shifted = [p.shift(x_star) for p in system.equations]
    multipliers = _monomials_upto(n, order - 1) if order > 0 else []
    row_labels = [(i, beta) for i in range(system.neqs) for beta in multipliers]
    col_index = {alpha: k for k, alpha in enumerate(cols)}
    matrix = np.zeros((len(row_labels), len(cols)), dtype=complex)
    for r, (i, beta) in enumerate(row_labels):
        for gamma, coeff in shifted[i].terms.items():
            alpha = tuple(g + b for g, b in zip(gamma, beta))
            k = col_index.get(alpha)
            if k is not None:
                matrix[r, k] = coeff
        norm = np.linalg.norm(matrix[r])
        if norm > 0:
            matrix[r] /= norm
    return MacaulayMatrix(order=order, matrix=matrix,
                          row_labels=tuple(row_labels), col_labels=tuple(cols))


def dual_nullity_at_order(system: PolySystem, x_star, order: int,
                          tol: float = DEFAULT_TOL) -> int:
    """Dimension of the order-d truncation of the annihilating dual space."""
    mac = macaulay_matrix(system, x_star, order)
    ncols = mac.matrix.shape[1]
    if mac.matrix.shape[0] == 0:
        return ncols
    decomp = linalg.svd(mac.matrix)
    leading = float(decomp.sigma[0])
    if leading == 0.0:
        return ncols
    rank = int(np.count_nonzero(decomp.sigma > tol * leading))
    return ncols - rank


def multiplicity(system: PolySystem, x_star, max_order: int = 12,
                 tol: float = DEFAULT_TOL):
    """Multiplicity of the root ``x_star``, or None if it does not settle.

    Raises ValueError when ``x_star`` is not an approximate root. Increases
    the truncation order until two consecutive nullities agree; a return of
    None means stabilization was not reached by ``max_order``.
    """
    residual = float(np.linalg.norm(system.value_at(x_star)))
    if residual > ROOT_RESIDUAL_TOL:
        raise ValueError(
            f"point is not an approximate root (residual {residual:.3e})"
        )
    previous = dual_nullity_at_order(system, x_star, 0, tol)
    for order in range(1, max_order + 1):
        current = dual_nullity_at_order(system, x_star, order, tol)
        if current == previous:
            return current
        previous = current
    return None
