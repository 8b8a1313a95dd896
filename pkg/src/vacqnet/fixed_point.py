"""Coupling of per-class queue dynamics with network-wide interference.

Device activity determines interference, interference determines coverage,
and coverage feeds back into the queue dynamics.  The solver alternates both
scales until the steady-state vectors stop moving: coverage probabilities are
refreshed from the current activity factors (zeta per class under dedicated
allocation, the complement of the all-empty probability under shared
allocation), all class chains are rebuilt in priority order, and the
stationary solves refresh the activity factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, Strategy, SystemConfig
from .coverage import LoadParams, RadioParams, channel_split, coverage_probability
from .priority_chain import QbdBlocks, build_class_chain
from .steady_state import SolverError, SteadyState, solve_class

#: Consecutive residual increases tolerated before damping engages.
_NONMONOTONE_LIMIT = 50
_AUTO_DAMPING = 0.5


@dataclass(frozen=True)
class NetworkSolution:
    """Converged (or best-effort) network operating point.

    ``coverage`` holds the per-class transmission success probability given a
    transmission; ``steady_states`` the per-class stationary summaries;
    ``blocks`` the chains they were solved from (needed by delay metrics).
    ``residual`` is the final max-norm change of the stationary vectors.
    """

    config: SystemConfig
    coverage: tuple[float, ...]
    steady_states: tuple[SteadyState, ...]
    blocks: tuple[QbdBlocks, ...]
    overflow: tuple[bool, ...]
    delta: float
    iterations: int
    converged: bool
    residual: float

    @property
    def gammas(self) -> tuple[float, ...]:
        return tuple(s.gamma for s in self.steady_states)

    @property
    def tsp(self) -> tuple[float, ...]:
        return tuple(s.gamma * p for s, p in zip(self.steady_states, self.coverage))


def _class_coverages(
    config: SystemConfig, zetas: np.ndarray, delta: float
) -> np.ndarray:
    """Coverage per class for the current activity factors."""
    radio = RadioParams(
        eta=config.eta, theta=config.theta, noise_to_signal=config.noise_to_signal
    )
    splits = channel_split(config.strategy, config.channels, config.alphas)
    n = config.n_classes
    out = np.empty(n)
    if config.strategy is Strategy.SHARED:
        load = LoadParams(kappa=config.kappa, activity=min(max(1.0 - delta, 0.0), 1.0))
        out[:] = coverage_probability(radio, load)
        return out
    for i in range(n):
        if splits[i] <= 0.0:
            # A class with no arrivals draws no channels and never transmits;
            # its nominal coverage is the noise-only bound.
            load = LoadParams(kappa=0.0, activity=0.0)
        else:
            kappa_i = config.mu_per_km2 / (config.lambda_per_km2 * splits[i])
            load = LoadParams(kappa=kappa_i, activity=min(max(zetas[i], 0.0), 1.0))
        out[i] = coverage_probability(radio, load)
    return out


def _solve_all_classes(
    config: SystemConfig, coverage: np.ndarray
) -> tuple[list[SteadyState], list[QbdBlocks]]:
    states, blocks = [], []
    for i in range(1, config.n_classes + 1):
        blk = build_class_chain(i, tuple(coverage), config.classes)
        states.append(solve_class(blk))
        blocks.append(blk)
    return states, blocks


def solve_network_with_init(
    config: SystemConfig, init_delta: float, init_zeta
) -> NetworkSolution:
    """Run the activity/coverage fixed point from a caller-chosen start.

    The loop stops when every class's stationary vector changes by less than
    ``config.epsilon`` in max-norm, and otherwise returns the best iterate
    with ``converged=False``.  Overflow is evaluated per class at the final
    point; by default it only flags (finite queues always admit a stationary
    law), while ``strict_overflow_break`` aborts the iteration the first time
    the drift condition fails, forcing delta to zero for the final coverage
    update.
    """
    if config.strategy is Strategy.PRIORITY_AGNOSTIC:
        raise ConfigError(
            "the priority-agnostic benchmark has no analytical model; "
            "use the Monte Carlo simulator"
        )
    n = config.n_classes
    if np.isscalar(init_zeta):
        init_zeta = [float(init_zeta)] * n
    zetas = np.array([float(z) for z in init_zeta])
    if zetas.shape != (n,):
        raise ConfigError(f"init_zeta must be scalar or length {n}")
    if not (0.0 <= init_delta <= 1.0) or np.any(zetas < 0) or np.any(zetas > 1):
        raise ConfigError("initial activity factors must lie in [0, 1]")
    delta = float(init_delta)

    coverage = _class_coverages(config, zetas, delta)
    damping = config.damping
    prev_states: list[SteadyState] | None = None
    prev_residual = np.inf
    nonmonotone = 0
    residual = np.inf
    states: list[SteadyState] = []
    blocks: list[QbdBlocks] = []
    iterations = 0
    converged = False
    for iterations in range(1, config.max_iterations + 1):
        try:
            states, blocks = _solve_all_classes(config, coverage)
        except SolverError as exc:
            raise SolverError(
                f"steady-state solve failed at iteration {iterations}: {exc}"
            ) from exc
        if prev_states is not None:
            residual = max(
                float(np.max(np.abs(new.x - old.x)))
                for new, old in zip(states, prev_states)
            )
            if residual >= prev_residual:
                nonmonotone += 1
                if nonmonotone >= _NONMONOTONE_LIMIT and damping == 1.0:
                    damping = _AUTO_DAMPING
            prev_residual = residual
        prev_states = states

        zetas = np.array([s.zeta for s in states])
        delta = states[-1].delta_component

        if config.strict_overflow_break and any(s.overflow for s in states):
            delta = 0.0
            coverage = _class_coverages(config, zetas, delta)
            break

        new_coverage = _class_coverages(config, zetas, delta)
        coverage = damping * new_coverage + (1.0 - damping) * coverage

        if residual < config.epsilon:
            converged = True
            break

    return NetworkSolution(
        config=config,
        coverage=tuple(float(p) for p in coverage),
        steady_states=tuple(states),
        blocks=tuple(blocks),
        overflow=tuple(s.overflow for s in states),
        delta=float(delta),
        iterations=iterations,
        converged=converged,
        residual=float(residual) if np.isfinite(residual) else float("inf"),
    )


def solve_network(config: SystemConfig) -> NetworkSolution:
    """Solve the network from the empty-queue initialization (delta=1, zeta=0)."""
    return solve_network_with_init(config, init_delta=1.0, init_zeta=0.0)
