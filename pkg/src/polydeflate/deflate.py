"""Randomized deflation of singular polynomial roots.

One deflation stage takes a system with Jacobian of numerical rank r at the
current point, draws a random unit-modulus matrix ``mix`` with r + 1 columns
and a unit-modulus row ``anchor``, and extends the system with

    A(x) (mix @ multipliers) = 0        (one equation per old equation)
    anchor . multipliers     = 1

so the equation count doubles plus one and r + 1 multiplier variables are
adjoined. The extended root is regular more often than not; when it is not,
deflation is applied again, and the total number of stages stays below the
multiplicity of the root.

Deflated systems are never expanded into polynomials on the evaluation path.
Values and Jacobians are assembled blockwise from derivative tensors of the
previous level; ``DeflatedSystem._jet`` carries the recursion, and the
symbolic tensors of the base Jacobian are differentiated once and cached.

``DeflatedSystem.expand`` produces the naive fully-expanded polynomial
system. It exists for file export and as a cross-check in the tests; it is
deliberately not used by ``value_at``/``jacobian_at``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from . import linalg, newton
from .polysys import Polynomial, PolyMatrix, PolySystem, format_system, _fmt_coeff

DEFAULT_SEED = 0x5EED
STAGE_CAP = 10
_UNIT_TOL = 1e-15


class RegularPointError(ValueError):
    """Deflation was requested at a point with full-column-rank Jacobian."""


@dataclass(frozen=True)
class DeflationStage:
    """Random data and sizes of one deflation step."""

    rank: int
    mix: np.ndarray
    anchor: np.ndarray
    nvars_prev: int
    neqs_prev: int

    def __post_init__(self):
        if not 0 <= self.rank < self.nvars_prev:
            raise ValueError(
                f"stage rank {self.rank} incompatible with {self.nvars_prev} variables"
            )
        if self.mix.shape != (self.nvars_prev, self.rank + 1):
            raise ValueError(f"mix has shape {self.mix.shape}, "
                             f"expected ({self.nvars_prev}, {self.rank + 1})")
        if self.anchor.shape != (self.rank + 1,):
            raise ValueError(f"anchor has shape {self.anchor.shape}, "
                             f"expected ({self.rank + 1},)")
        for arr in (self.mix, self.anchor):
            if np.max(np.abs(np.abs(arr) - 1.0)) > _UNIT_TOL:
                raise ValueError("mix and anchor entries must have modulus one")

    @property
    def nvars_out(self) -> int:
        return self.nvars_prev + self.rank + 1

    @property
    def neqs_out(self) -> int:
        return 2 * self.neqs_prev + 1


class _BaseTensors:
    """Symbolic derivative tensors of the base Jacobian, cached by multi-index."""

    def __init__(self, base: PolySystem):
        self.cache = {(): base.jacobian_matrix}

    def get(self, alpha) -> PolyMatrix:
        found = self.cache.get(alpha)
        if found is None:
            found = self.get(alpha[:-1]).differentiate(alpha[-1])
            self.cache[alpha] = found
        return found


class DeflatedSystem:
    """A base system plus an ordered stack of deflation stages.

    Instances are immutable; ``with_stage`` returns a new system sharing the
    base and its tensor cache. With no stages the object behaves exactly
    like the base system, which lets the solver treat both uniformly.
    """

    def __init__(self, base: PolySystem, stages=(), _tensors=None):
        self.base = base
        self.stages = tuple(stages)
        nvars, neqs = base.nvars, base.neqs
        for k, stage in enumerate(self.stages):
            if stage.nvars_prev != nvars or stage.neqs_prev != neqs:
                raise ValueError(f"stage {k} does not chain onto the system below it")
            nvars, neqs = stage.nvars_out, stage.neqs_out
        self._nvars = nvars
        self._neqs = neqs
        self._tensors = _tensors if _tensors is not None else _BaseTensors(base)

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def neqs(self) -> int:
        return self._neqs

    @property
    def coefficient_scale(self) -> float:
        return self.base.coefficient_scale

    def with_stage(self, stage: DeflationStage) -> "DeflatedSystem":
        return DeflatedSystem(self.base, self.stages + (stage,),
                              _tensors=self._tensors)

    def multiplier_slice(self, stage_index: int) -> slice:
        stage = self.stages[stage_index]
        return slice(stage.nvars_prev, stage.nvars_out)

    @property
    def var_names(self):
        names = list(self.base.var_names)
        for k, stage in enumerate(self.stages, start=1):
            names.extend(f"l_{k}_{j}" for j in range(1, stage.rank + 2))
        return tuple(names)

    # -- structured evaluation ----------------------------------------------

    def _jet(self, level: int, z, order: int):
        """Derivative tensors of the level-k Jacobian, evaluated at ``z``.

        Returns a list indexed by derivative order q; element q maps each
        sorted multi-index alpha with |alpha| = q to the matrix obtained by
        differentiating the level-k Jacobian by the variables in alpha.
        """
        if level == 0:
            cache = {}
            y = z[:self.base.nvars]
            out = []
            for q in range(order + 1):
                tier = {}
                for alpha in combinations_with_replacement(range(self.base.nvars), q):
                    tier[alpha] = self._tensors.get(alpha).evaluate(y, cache)
                out.append(tier)
            return out

        stage = self.stages[level - 1]
        n0, neq0 = stage.nvars_prev, stage.neqs_prev
        n1, neq1 = stage.nvars_out, stage.neqs_out
        y = z[:n0]
        mu = z[n0:n1]
        below = self._jet(level - 1, y, order + 1)
        mixed = stage.mix @ mu
        out = []
        for q in range(order + 1):
            tier = {}
            for alpha in combinations_with_replacement(range(n1), q):
                split = sum(1 for a in alpha if a < n0)
                a_vars = alpha[:split]
                a_mult = alpha[split:]
                block = np.zeros((neq1, n1), dtype=complex)
                if not a_mult:
                    top = below[q][a_vars]
                    block[:neq0, :n0] = top
                    for col in range(n0):
                        key = tuple(sorted(a_vars + (col,)))
                        block[neq0:2 * neq0, col] = below[q + 1][key] @ mixed
                    block[neq0:2 * neq0, n0:] = top @ stage.mix
                    if q == 0:
                        block[2 * neq0, n0:] = stage.anchor
                elif len(a_mult) == 1:
                    direction = stage.mix[:, a_mult[0] - n0]
                    for col in range(n0):
                        key = tuple(sorted(a_vars + (col,)))
                        block[neq0:2 * neq0, col] = below[q][key] @ direction
                # second and higher multiplier derivatives vanish identically
                tier[alpha] = block
            out.append(tier)
        return out

    def value_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.nvars,):
            raise ValueError(
                f"point has {z.shape[0] if z.ndim else 0} coordinates, "
                f"expected {self.nvars}"
            )
        pieces = [self.base.value_at(z[:self.base.nvars])]
        for level, stage in enumerate(self.stages):
            mu = z[stage.nvars_prev:stage.nvars_out]
            jac_below = self._jet(level, z[:stage.nvars_prev], 0)[0][()]
            pieces.append(jac_below @ (stage.mix @ mu))
            pieces.append(np.array([stage.anchor @ mu - 1.0]))
        return np.concatenate(pieces)

    def jacobian_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.nvars,):
            raise ValueError(
                f"point has {z.shape[0] if z.ndim else 0} coordinates, "
                f"expected {self.nvars}"
            )
        return self._jet(len(self.stages), z, 0)[0][()]

    # -- naive route (export and cross-checks only) --------------------------

    def expand(self) -> PolySystem:
        """Fully expanded polynomial system in base plus multiplier variables."""
        equations = list(self.base.equations)
        names = self.var_names
        for stage in self.stages:
            n_prev = stage.nvars_prev
            n_out = stage.nvars_out
            prefix = list(range(n_prev))
            lifted = [p.embed(n_out, prefix) for p in equations]
            level = PolySystem(equations, names[:n_prev])
            combined = level.jacobian_matrix.right_multiply(stage.mix)
            mid = []
            for row in combined.entries:
                acc = Polynomial.zero(n_out)
                for t, entry in enumerate(row):
                    if not entry.is_zero:
                        acc = acc + entry.embed(n_out, prefix) \
                            * Polynomial.variable(n_out, n_prev + t)
                mid.append(acc)
            last = Polynomial.constant(n_out, -1.0)
            for t in range(stage.rank + 1):
                last = last + stage.anchor[t] * Polynomial.variable(n_out, n_prev + t)
            equations = lifted + mid + [last]
        return PolySystem(equations, names)


def _as_deflated(system) -> DeflatedSystem:
    if isinstance(system, DeflatedSystem):
        return system
    return DeflatedSystem(system)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def unit_circle_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Matrix of e^(i theta) entries, theta uniform from the given generator."""
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    angles = 2.0 * np.pi * rng.random((rows, cols))
    return np.exp(1j * angles)


def _make_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.Generator(np.random.PCG64(seed_or_rng))


def deflate_once(system, x0, rank_tol: float = 1e-8, rng_seed=0):
    """Apply one deflation stage at ``x0``; returns (extended, multipliers).

    The multipliers are initialized as the minimum-norm least-squares
    solution of the stacked linear system [A(x0) mix; anchor] lam = e_last,
    which pins them near the kernel direction with anchor . lam = 1.
    ``rng_seed`` may be an integer seed or an existing numpy Generator (the
    deflation loop threads one generator through all its stages).
    """
    if not 0 < rank_tol < 1:
        raise ValueError("rank tolerance must lie in (0, 1)")
    current = _as_deflated(system)
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (current.nvars,):
        raise ValueError(
            f"point has {x0.shape[0] if x0.ndim else 0} coordinates, "
            f"expected {current.nvars}"
        )
    jac = current.jacobian_at(x0)
    decomp = linalg.svd(jac)
    scale = max(1.0, current.coefficient_scale)
    rank = linalg.scaled_rank(decomp.sigma, rank_tol, scale)
    if rank >= current.nvars:
        raise RegularPointError("Jacobian has full column rank at the given point")
    rng = _make_rng(rng_seed)
    mix = unit_circle_matrix(rng, current.nvars, rank + 1)
    anchor = unit_circle_matrix(rng, 1, rank + 1)[0]
    stage = DeflationStage(rank=rank, mix=mix, anchor=anchor,
                           nvars_prev=current.nvars, neqs_prev=current.neqs)
    stacked = np.vstack([jac @ mix, anchor[np.newaxis, :]])
    rhs = np.zeros(current.neqs + 1, dtype=complex)
    rhs[-1] = 1.0
    multipliers = linalg.least_squares(stacked, rhs, rank_tol)
    return current.with_stage(stage), multipliers


def symbolic_deflation(system: PolySystem, x0, rank_tol: float = 1e-8) -> PolySystem:
    """Append directional derivatives along a kernel vector of the Jacobian.

    No multiplier variables are added; the result has the same variables and
    twice the equations. Kept as a cross-validation route: its output must
    also have strictly smaller multiplicity at the root.
    """
    x0 = np.asarray(x0, dtype=complex)
    decomp = linalg.svd(system.jacobian_at(x0))
    scale = max(1.0, system.coefficient_scale)
    rank = linalg.scaled_rank(decomp.sigma, rank_tol, scale)
    if rank >= system.nvars:
        raise RegularPointError("Jacobian has full column rank at the given point")
    direction = linalg.kernel_vector(decomp, rank)
    appended = []
    for poly in system.equations:
        acc = Polynomial.zero(system.nvars)
        for j in range(system.nvars):
            if direction[j] != 0:
                acc = acc + poly.differentiate(j) * direction[j]
        appended.append(acc)
    return PolySystem(list(system.equations) + appended, system.var_names)


def evaluate_deflated(deflated: DeflatedSystem, z) -> np.ndarray:
    """Blockwise evaluation of the deflated system at a full point."""
    return deflated.value_at(z)


def jacobian_deflated(deflated: DeflatedSystem, z) -> np.ndarray:
    """Blockwise Jacobian of the deflated system at a full point."""
    return deflated.jacobian_at(z)


# ---------------------------------------------------------------------------
# the top-level loop and its report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeflationReport:
    """Corank and conditioning on both sides of one deflation stage."""

    corank_before: int
    corank_after: int
    inverse_condition_before: float
    inverse_condition_after: float
    multiplier_values: np.ndarray


@dataclass
class SolverReport:
    """Everything the CLI prints about one solve."""

    system_name: str
    nvars: int
    neqs: int
    status: str
    deflations: int
    corank_sequence: list
    solution: np.ndarray
    residual_initial: float
    residual_final: float
    inverse_condition_original: float
    inverse_condition_final: float
    correct_digits_initial: float | None
    correct_digits_final: float | None
    stages: list
    seed: int
    wall_time_seconds: float
    deflated: "DeflatedSystem | None" = None

    @property
    def corank_arrow(self) -> str:
        return " -> ".join(str(c) for c in self.corank_sequence)


def deflate_loop(system, x0, opts: newton.NewtonOptions | None = None, *,
                 seed: int = DEFAULT_SEED, max_stages: int = STAGE_CAP,
                 reference=None, system_name: str = "system") -> SolverReport:
    """Alternate refinement and deflation until the Jacobian is regular.

    Runs ``newton.refine`` on the current system; on a singular stall it
    applies ``deflate_once`` (drawing from one generator seeded once per
    solve), lifts the point with the initial multipliers, and repeats. Stops
    on regular convergence, on a refinement that gives up (max_iter), or at
    the stage cap; the cap is reported through the status, not an exception.
    """
    start = time.perf_counter()
    if opts is None:
        opts = newton.NewtonOptions()
    current = _as_deflated(system)
    base = current.base
    x0 = np.asarray(x0, dtype=complex)
    if x0.shape != (current.nvars,):
        raise ValueError(
            f"start point has {x0.shape[0] if x0.ndim else 0} coordinates, "
            f"expected {current.nvars}"
        )
    scale = max(1.0, base.coefficient_scale)
    residual_initial = float(np.linalg.norm(current.value_at(x0)))
    digits_initial = None
    if reference is not None:
        digits_initial = newton.correct_digits(x0[:base.nvars], reference)

    rng = np.random.Generator(np.random.PCG64(seed))
    z = x0
    corank_sequence = []
    pending = []
    status = newton.MAX_ITER
    while True:
        z, status, trace = newton.refine(current, z, opts)
        corank = current.nvars - trace.ranks[-1]
        invcond = trace.inverse_conditions[-1]
        corank_sequence.append(corank)
        if pending:
            pending[-1]["corank_after"] = corank
            pending[-1]["invcond_after"] = invcond
        if status == newton.CONVERGED_REGULAR or corank == 0:
            break
        if status == newton.MAX_ITER:
            break
        if len(current.stages) >= max_stages:
            break
        pending.append({"corank_before": corank, "invcond_before": invcond})
        current, multipliers = deflate_once(current, z, opts.rank_tol, rng)
        z = np.concatenate([z, multipliers])

    stage_reports = []
    for index, entry in enumerate(pending):
        window = current.multiplier_slice(index)
        stage_reports.append(DeflationReport(
            corank_before=entry["corank_before"],
            corank_after=entry["corank_after"],
            inverse_condition_before=entry["invcond_before"],
            inverse_condition_after=entry["invcond_after"],
            multiplier_values=z[window].copy(),
        ))

    prefix = z[:base.nvars]
    original_sigma = linalg.svd(base.jacobian_at(prefix)).sigma
    final_sigma = linalg.svd(current.jacobian_at(z)).sigma
    digits_final = None
    if reference is not None:
        digits_final = newton.correct_digits(prefix, reference)

    return SolverReport(
        system_name=system_name,
        nvars=base.nvars,
        neqs=base.neqs,
        status=status,
        deflations=len(current.stages),
        corank_sequence=corank_sequence,
        solution=z,
        residual_initial=residual_initial,
        residual_final=float(np.linalg.norm(current.value_at(z))),
        inverse_condition_original=linalg.scaled_inverse_condition(original_sigma, scale),
        inverse_condition_final=linalg.scaled_inverse_condition(final_sigma, scale),
        correct_digits_initial=digits_initial,
        correct_digits_final=digits_final,
        stages=stage_reports,
        seed=seed,
        wall_time_seconds=time.perf_counter() - start,
        deflated=current,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def format_deflated(deflated: DeflatedSystem) -> str:
    """Expanded system text plus a comment block with each stage's draws."""
    text = format_system(deflated.expand())
    lines = [text.rstrip("\n")]
    lines.append(f"# deflation stages: {len(deflated.stages)}")
    for k, stage in enumerate(deflated.stages, start=1):
        lines.append(f"# stage {k} rank: {stage.rank}")
        for i in range(stage.nvars_prev):
            row = " ".join(_fmt_coeff(c) for c in stage.mix[i])
            lines.append(f"# stage {k} mix row {i + 1}: {row}")
        anchor_row = " ".join(_fmt_coeff(c) for c in stage.anchor)
        lines.append(f"# stage {k} anchor: {anchor_row}")
    return "\n".join(lines) + "\n"
