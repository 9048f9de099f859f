"""Gauss-Newton iteration with an SVD pseudoinverse and rank monitoring.

``refine`` drives the iteration on any system object exposing ``nvars``,
``value_at``, ``jacobian_at`` and ``coefficient_scale`` (both ``PolySystem``
and the deflated systems do). Its exit statuses:

``converged_regular``
    residual at or below ``residual_tol`` with a Jacobian of full column
    rank, and the recent step history does not look like the geometric decay
    of a singular root.
``stalled_singular``
    the scale-anchored rank test reports a stable corank deficit while the
    step lengths refuse to contract by the factor a healthy Newton tail
    shows. This is the signal that deflation is needed.
``max_iter``
    the iteration budget ran out without either verdict.

At a multiple root plain Newton contracts linearly (ratios such as 1/2 on a
double root), so the stall pattern is defined as: the last three step ratios
all above 0.25. Convergence additionally requires that pattern to be absent,
which keeps a shrinking-but-singular iteration from being misread as a
regular solution just because the residual crossed the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg

CONVERGED_REGULAR = "converged_regular"
STALLED_SINGULAR = "stalled_singular"
MAX_ITER = "max_iter"

_STALL_RATIO = 0.25
_STALL_WINDOW = 3


@dataclass(frozen=True)
class NewtonOptions:
    max_iterations: int = 50
    residual_tol: float = 1e-12
    step_tol: float = 1e-14
    rank_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("residual_tol", "step_tol", "rank_tol"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class NewtonTrace:
    """Per-iterate log: points, residual and step norms, rank diagnostics."""

    points: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    inverse_conditions: list = field(default_factory=list)

    def record(self, point, residual, rank, inverse_condition):
        self.points.append(np.array(point, dtype=complex))
        self.residuals.append(float(residual))
        self.ranks.append(int(rank))
        self.inverse_conditions.append(float(inverse_condition))

    def step_ratios(self):
        return [b / a for a, b in zip(self.steps, self.steps[1:]) if a > 0]


def newton_step(f_eval, jac_eval, x, rank_tol: float = 1e-8):
    """One Gauss-Newton update x - A(x)^+ F(x); also returns the rank info."""
    x = np.asarray(x, dtype=complex)
    fx = np.asarray(f_eval(x), dtype=complex)
    jac = np.asarray(jac_eval(x), dtype=complex)
    if jac.shape != (fx.shape[0], x.shape[0]):
        raise ValueError(
            f"Jacobian shape {jac.shape} does not match system "
            f"({fx.shape[0]} equations, {x.shape[0]} variables)"
        )
    decomp = linalg.svd(jac)
    info = linalg.numerical_rank(decomp, rank_tol)
    dx = linalg.pseudo_solve(decomp, fx, info.rank)
    return x - dx, info


def is_regular(rank_info: linalg.RankInfo, ncols: int) -> bool:
    """Full column rank test that ends the deflation loop."""
    return rank_info.rank == ncols


def correct_digits(x, x_ref) -> float:
    """Agreement with a reference point in decimal digits, clamped to [0, 16].

    Uses the absolute error when the reference is small (norm below 1) and
    the relative error otherwise.
    """
    x = np.asarray(x, dtype=complex)
    x_ref = np.asarray(x_ref, dtype=complex)
    if x.shape != x_ref.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_ref.shape}")
    err = float(np.linalg.norm(x - x_ref))
    ref_norm = float(np.linalg.norm(x_ref))
    if ref_norm > 1.0:
        err /= ref_norm
    digits = -math.log10(max(err, 1e-300))
    return min(16.0, max(0.0, digits))


def _stall_pattern(steps) -> bool:
    if len(steps) < _STALL_WINDOW + 1:
        return False
    recent = steps[-(_STALL_WINDOW + 1):]
    return all(
        prev > 0 and cur > _STALL_RATIO * prev
        for prev, cur in zip(recent, recent[1:])
    )


def refine(system, x0, opts: NewtonOptions | None = None):
    """Iterate Gauss-Newton from ``x0``; returns (x_final, status, trace)."""
    if opts is None:
        opts = NewtonOptions()
    x = np.asarray(x0, dtype=complex)
    if x.shape != (system.nvars,):
        raise ValueError(
            f"start point has {x.shape[0] if x.ndim else 0} coordinates, "
            f"expected {system.nvars}"
        )
    scale = max(1.0, float(system.coefficient_scale))
    ncols = system.nvars
    trace = NewtonTrace()
    coranks = []
    exhausted = False
    status = MAX_ITER

    for iteration in range(opts.max_iterations + 1):
        fx = system.value_at(x)
        residual = float(np.linalg.norm(fx))
        jac = np.asarray(system.jacobian_at(x), dtype=complex)
        decomp = linalg.svd(jac)
        limit_rank = linalg.scaled_rank(decomp.sigma, opts.rank_tol, scale)
        corank = ncols - limit_rank
        coranks.append(corank)
        trace.record(x, residual, limit_rank,
                     linalg.scaled_inverse_condition(decomp.sigma, scale))

        stall = _stall_pattern(trace.steps)
        corank_stable = (
            corank > 0
            and len(coranks) >= _STALL_WINDOW
            and coranks[-_STALL_WINDOW:] == [corank] * _STALL_WINDOW
        )
        if residual <= opts.residual_tol and corank == 0 and (not stall or exhausted):
            status = CONVERGED_REGULAR
            break
        if corank_stable and stall:
            status = STALLED_SINGULAR
            break
        if exhausted or iteration == opts.max_iterations:
            if corank_stable:
                status = STALLED_SINGULAR
            elif corank > 0 and exhausted:
                status = STALLED_SINGULAR
            else:
                status = MAX_ITER
            break

        info = linalg.numerical_rank(decomp, opts.rank_tol)
        dx = linalg.pseudo_solve(decomp, fx, info.rank)
        step = float(np.linalg.norm(dx))
        x = x - dx
        trace.steps.append(step)
        if step <= opts.step_tol:
            exhausted = True

    return x, status, trace
