"""Dense complex linear algebra: SVD, numerical rank, least squares, kernels.

The decomposition itself is delegated to LAPACK through numpy; this module
fixes the conventions the rest of the package relies on. ``svd`` always
returns the full factors (U square of size rows, V square of size cols) and
``A = U diag(sigma) V^H``. Rank decisions compare singular values against
``tol * sigma_1``; the solver layer additionally uses the scale-anchored
variants at the bottom of this module, which judge near-singular Jacobians
against the coefficient scale of the system instead of against a leading
singular value that itself vanishes toward the root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SvdConvergenceError(RuntimeError):
    """The iterative SVD kernel failed to converge on this input."""


@dataclass(frozen=True)
class SvdResult:
    """Full SVD of a rows x cols complex matrix: A = U diag(sigma) V^H."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    rows: int
    cols: int


@dataclass(frozen=True)
class RankInfo:
    """Numerical rank decision for one SVD at one tolerance."""

    rank: int
    tol_used: float
    inverse_condition: float


def svd(matrix) -> SvdResult:
    """Full singular value decomposition of a complex matrix."""
    a = np.atleast_2d(np.asarray(matrix, dtype=complex))
    rows, cols = a.shape
    if rows < 1 or cols < 1:
        raise ValueError("svd needs a nonempty matrix")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    return SvdResult(U=u, sigma=s, V=vh.conj().T, rows=rows, cols=cols)


def numerical_rank(decomp: SvdResult, tol: float) -> RankInfo:
    """Count singular values above ``tol * sigma_1``.

    The reported inverse condition is sigma_min / sigma_1 over all
    min(rows, cols) singular values, and 0 when sigma_1 = 0.
    """
    if not 0 < tol < 1:
        raise ValueError("rank tolerance must lie in (0, 1)")
    sigma = decomp.sigma
    leading = float(sigma[0])
    if leading == 0.0:
        return RankInfo(rank=0, tol_used=tol, inverse_condition=0.0)
    rank = int(np.count_nonzero(sigma > tol * leading))
    return RankInfo(rank=rank, tol_used=tol,
                    inverse_condition=float(sigma[-1] / leading))


def pseudo_solve(decomp: SvdResult, b, rank: int) -> np.ndarray:
    """Apply the rank-truncated pseudoinverse to ``b``."""
    b = np.asarray(b, dtype=complex)
    if b.shape != (decomp.rows,):
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({decomp.rows},)")
    if rank == 0:
        return np.zeros(decomp.cols, dtype=complex)
    coeffs = decomp.U[:, :rank].conj().T @ b
    return decomp.V[:, :rank] @ (coeffs / decomp.sigma[:rank])


def least_squares(matrix, b, tol: float = 1e-8) -> np.ndarray:
    """Minimum-norm least-squares solution via truncated SVD."""
    decomp = svd(matrix)
    info = numerical_rank(decomp, tol)
    return pseudo_solve(decomp, b, info.rank)


def kernel_vector(decomp: SvdResult, rank: int) -> np.ndarray:
    """Unit right singular vector for the smallest singular value.

    With V full (cols x cols), the column at index ``rank`` spans the most
    nearly null direction once ``rank`` columns are deemed independent.
    """
    if rank >= decomp.cols:
        raise ValueError("matrix has full numerical column rank, no kernel vector")
    return decomp.V[:, rank].copy()


# ---------------------------------------------------------------------------
# scale-anchored rank decisions for the solver layer
# ---------------------------------------------------------------------------

def scaled_rank(sigma, tol: float, scale: float) -> int:
    """Rank with the threshold anchored at ``tol * max(sigma_1, scale)``.

    Near a singular root every singular value of the Jacobian may shrink
    together, so a purely relative test keeps reporting full rank. Anchoring
    the threshold at the coefficient scale of the system separates singular
    values that vanish in the limit from those that stay of order one.
    """
    sigma = np.asarray(sigma, dtype=float)
    leading = float(sigma[0]) if sigma.size else 0.0
    return int(np.count_nonzero(sigma > tol * max(leading, scale)))


def scaled_inverse_condition(sigma, scale: float) -> float:
    """sigma_min over max(sigma_1, scale); near 0 at a singular point."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0:
        return 0.0
    return float(sigma[-1] / max(float(sigma[0]), scale))
