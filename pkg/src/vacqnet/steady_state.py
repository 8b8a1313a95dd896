"""Stationary analysis of a class's level/phase chain.

Two solvers are provided: a dense linear solve of the full chain and a
matrix-analytic solver that works block-row by block-row.  For these finite
chains the classical single-R geometric tail is exact only away from the full
level, so the matrix-analytic solver uses level-dependent rate matrices
obtained by backward substitution from the full level; far from the boundary
they converge to the classical minimal R.  Both solvers agree to solver
tolerance on every irreducible input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .priority_chain import QbdBlocks, assemble_transition_matrix

logger = logging.getLogger(__name__)

#: Row-stochasticity tolerance accepted on solver inputs.
INPUT_ATOL = 1e-10

#: Condition-number threshold above which a solve is logged as ill-conditioned.
CONDITION_WARN = 1e12


class SolverError(RuntimeError):
    """Raised when a stationary solve cannot be completed (singular system)."""


@dataclass(frozen=True)
class SteadyState:
    """Stationary distribution of one class, partitioned by level.

    ``x`` is the full stationary vector in level-major order; ``level_pmf``
    its per-level sums.  ``gamma`` is the probability that all higher classes
    are empty (the serving phase mass), split into ``delta_component`` (own
    queue also empty) and ``zeta`` (own queue non-empty).  ``overflow`` is the
    drift-condition flag, with the signed drifts retained for reporting.
    """

    x: np.ndarray
    level_count: int
    phase_count: int
    level_pmf: np.ndarray
    gamma: float
    zeta: float
    delta_component: float
    overflow: bool
    drift_down: float
    drift_up: float

    def by_level(self, j: int) -> np.ndarray:
        m = self.phase_count
        return self.x[j * m:(j + 1) * m]


def solve_direct(P: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic matrix by direct linear solve.

    Solves x (P - I + U) = 1 with U the all-ones matrix, which embeds the
    normalization into an invertible system for any irreducible chain.
    """
    P = np.asarray(P, dtype=float)
    r = P.shape[0]
    if P.shape != (r, r):
        raise SolverError(f"transition matrix must be square, got {P.shape}")
    dev = np.max(np.abs(P.sum(axis=1) - 1.0))
    if dev > INPUT_ATOL:
        raise SolverError(f"matrix is not row-stochastic (max deviation {dev:.3e})")
    system = (P - np.eye(r) + np.ones((r, r))).T
    cond = np.linalg.cond(system)
    if cond > CONDITION_WARN:
        logger.warning("stationary solve is ill-conditioned (cond=%.3e)", cond)
    try:
        x = np.linalg.solve(system, np.ones(r))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular stationary system: {exc}") from exc
    residual = np.max(np.abs(x @ P - x))
    if residual > 1e-8 or not np.isfinite(x).all():
        raise SolverError(
            f"stationary solve failed to converge (residual {residual:.3e}); "
            "the chain may be reducible"
        )
    if np.min(x) < -1e-9:
        raise SolverError(
            f"stationary solve produced negative mass ({np.min(x):.3e})"
        )
    # roundoff on transient states can leave mass at -1e-17; clip and rescale
    x = np.clip(x, 0.0, None)
    return x / x.sum()


def classical_rate_matrix(
    blocks: QbdBlocks, tol: float = 1e-13, max_iter: int = 100_000
) -> np.ndarray:
    """Minimal nonnegative solution of R = A0 + R A1 + R^2 A2.

    Because the down block has rank one with restart row beta, the first
    passage to the level below always lands in phase beta, which closes the
    quadratic into R = A0 (I - A1 - A0 1 beta)^{-1} whenever that passage is
    certain.  The closed form is tried first; if its residual is not already
    below tolerance (overflow regimes, where the passage is defective) the
    monotone fixed-point iteration from zero takes over.
    """
    a0, a1, a2, beta = blocks.a0, blocks.a1, blocks.a2, blocks.beta
    m = blocks.phase_count

    def residual(R):
        return np.max(np.abs(a0 + R @ a1 + R @ R @ a2 - R))

    try:
        seed = a0 @ np.linalg.inv(np.eye(m) - a1 - np.outer(a0.sum(axis=1), beta))
        if residual(seed) < tol and np.all(seed >= -tol):
            return np.clip(seed, 0.0, None)
    except np.linalg.LinAlgError:
        pass
    R = np.zeros_like(a0)
    for _ in range(max_iter):
        R_next = a0 + R @ a1 + R @ R @ a2
        if np.max(np.abs(R_next - R)) < tol:
            return R_next
        R = R_next
    raise SolverError(
        f"rate-matrix iteration did not converge within {max_iter} iterations "
        "(chain likely operates in the overflow regime)"
    )


def _level_rate_matrices(blocks: QbdBlocks) -> list[np.ndarray]:
    """Backward recursion of the level-dependent rate matrices.

    ``rates[j]`` maps x_{j} = x_{j-1} (C or A0) rates[j]; the recursion starts
    from the full level, where the up block is absent, and sweeps down:
        rates[k] = (I - B2)^{-1}
        rates[j] = (I - A1 - A0 rates[j+1] A2)^{-1}      for 1 <= j < k.
    """
    m, k = blocks.phase_count, blocks.level_count
    eye = np.eye(m)
    rates: list[np.ndarray | None] = [None] * (k + 1)
    try:
        rates[k] = np.linalg.inv(eye - blocks.b2)
        for j in range(k - 1, 0, -1):
            rates[j] = np.linalg.inv(
                eye - blocks.a1 - blocks.a0 @ rates[j + 1] @ blocks.a2
            )
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular level reduction: {exc}") from exc
    return rates  # type: ignore[return-value]


def solve_mam(blocks: QbdBlocks) -> np.ndarray:
    """Stationary vector via matrix-analytic level reduction.

    The empty-level vector solves x_0 = x_0 (B1 + C rates[1] ... A2-folded),
    after which each level follows from its predecessor through the
    level-dependent rate matrices; the result is normalized over the finite
    level range.  Agrees with :func:`solve_direct` to solver precision.
    """
    m, k = blocks.phase_count, blocks.level_count
    rates = _level_rate_matrices(blocks)
    # Fold levels >= 1 into the empty-level balance: x_1 = x_0 C rates[1] and
    # x_0 = x_0 B1 + x_1 A2.
    step = blocks.c @ rates[1]
    closure = blocks.b1 + step @ blocks.a2
    system = (closure.T - np.eye(m))
    system[-1, :] = 1.0  # replace one redundant balance row by normalization
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        x0 = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular boundary system: {exc}") from exc
    levels = [x0, x0 @ step]
    for j in range(2, k + 1):
        levels.append(levels[-1] @ blocks.a0 @ rates[j])
    x = np.concatenate(levels)
    total = x.sum()
    if not np.isfinite(total) or total <= 0:
        raise SolverError("level reduction produced a non-normalizable vector")
    x /= total
    if np.min(x) < -1e-9:
        raise SolverError(f"negative stationary mass ({np.min(x):.3e})")
    return np.clip(x, 0.0, None) / np.clip(x, 0.0, None).sum()


def check_overflow(blocks: QbdBlocks) -> tuple[bool, float, float]:
    """Evaluate the drift condition on the phase process.

    With pi stationary for A = A0 + A1 + A2, the chain stays out of the
    overflow regime when the downward drift pi A2 1 exceeds the upward drift
    pi A0 1; returns (overflow, drift_down, drift_up).
    """
    A = blocks.a0 + blocks.a1 + blocks.a2
    pi = solve_direct(A)
    drift_down = float(pi @ blocks.a2.sum(axis=1))
    drift_up = float(pi @ blocks.a0.sum(axis=1))
    return drift_down <= drift_up, drift_down, drift_up


def class_marginals(
    x: np.ndarray, level_count: int, phase_count: int
) -> tuple[np.ndarray, float, float, float]:
    """Extract (level PMF, gamma, zeta, delta_component) from a stationary vector.

    Phase 0 is the serving/idle phase (all higher classes empty); gamma is its
    total mass, delta_component the part with the own queue also empty, and
    zeta the remainder.
    """
    grid = np.asarray(x, dtype=float).reshape(level_count + 1, phase_count)
    level_pmf = grid.sum(axis=1)
    gamma = float(grid[:, 0].sum())
    delta_component = float(grid[0, 0])
    zeta = gamma - delta_component
    return level_pmf, gamma, zeta, delta_component


def solve_class(blocks: QbdBlocks, method: str = "direct") -> SteadyState:
    """Solve one class's chain and package the stationary summary.

    ``method`` selects "direct" or "mam"; the matrix-analytic path falls back
    to the direct solve if its linear algebra degenerates.
    """
    if method == "mam":
        try:
            x = solve_mam(blocks)
        except SolverError:
            logger.warning("matrix-analytic solve failed; falling back to direct")
            x = solve_direct(assemble_transition_matrix(blocks))
    elif method == "direct":
        x = solve_direct(assemble_transition_matrix(blocks))
    else:
        raise ValueError(f"unknown method {method!r}")
    level_pmf, gamma, zeta, delta_component = class_marginals(
        x, blocks.level_count, blocks.phase_count
    )
    overflow, drift_down, drift_up = check_overflow(blocks)
    return SteadyState(
        x=x,
        level_count=blocks.level_count,
        phase_count=blocks.phase_count,
        level_pmf=level_pmf,
        gamma=gamma,
        zeta=zeta,
        delta_component=delta_component,
        overflow=overflow,
        drift_down=drift_down,
        drift_up=drift_up,
    )
