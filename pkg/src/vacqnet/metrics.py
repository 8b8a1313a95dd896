"""Per-class performance indicators derived from a solved network.

Delay conventions (discrete slotted time, late-arrival accounting): a packet
generated during slot t can be transmitted no earlier than slot t+1.  The
waiting time W counts the slots from generation up to and including the last
slot before its own first transmission, so W = 1 for a packet that finds its
queue empty.  The service time D counts transmission slots including the
successful one, so D >= 1.  Peak age of information is then
mean inter-arrival + E[W] + E[D].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError
from .fixed_point import NetworkSolution
from .priority_chain import PhDistribution, QbdBlocks
from .steady_state import SteadyState

#: Default waiting-time tail mass at which truncation stops.
WAIT_TAIL_TOL = 1e-9

#: Hard cap on the waiting-time support scan.
WAIT_N_CAP = 100_000


@dataclass(frozen=True)
class ClassMetrics:
    """All reported indicators for one priority class."""

    class_index: int
    tsp: float
    mean_queue: float
    availability: float
    waiting_pmf: np.ndarray
    waiting_tail: float
    mean_wait: float
    mean_service: float
    paoi: float
    interarrival: float


def mean_queue_length(steady: SteadyState) -> float:
    """Average number of queued packets, sum of n * P{level = n}."""
    levels = np.arange(steady.level_count + 1)
    return float(np.dot(levels, steady.level_pmf))


def availability(steady_states, i: int) -> float:
    """Probability the slot is not consumed by higher-priority classes.

    Computed as 1 minus the summed non-empty probabilities of classes below
    index i, clipped into [0, 1]; identically 1 for the highest priority.
    """
    if i < 1 or i > len(steady_states):
        raise ConfigError(f"class index {i} out of range 1..{len(steady_states)}")
    blocked = sum(1.0 - s.level_pmf[0] for s in steady_states[: i - 1])
    return float(min(max(1.0 - blocked, 0.0), 1.0))


def service_ph(blocks: QbdBlocks) -> PhDistribution:
    """Service-time phase-type law of one class (fresh service start)."""
    return PhDistribution(
        init=blocks.beta.copy(),
        transient=blocks.serve.copy(),
        absorb=blocks.absorb.copy(),
        dim=blocks.phase_count,
    )


def mean_service(ph: PhDistribution) -> float:
    """Mean absorption time init (I - transient)^-1 1 of a phase-type law."""
    if ph.dim == 0:
        raise ConfigError("mean service time of an empty phase-type law")
    system = np.eye(ph.dim) - ph.transient
    try:
        times = np.linalg.solve(system, np.ones(ph.dim))
    except np.linalg.LinAlgError as exc:
        raise ConfigError(f"singular service process: {exc}") from exc
    return float(ph.init @ times)


def waiting_time_pmf(
    steady: SteadyState,
    blocks: QbdBlocks,
    n_max: int | None = None,
    tail_tol: float = WAIT_TAIL_TOL,
    n_cap: int = WAIT_N_CAP,
) -> tuple[np.ndarray, float]:
    """Waiting-time distribution P{W = n} with its truncation tail mass.

    P{W = 1} is the probability of finding the own queue empty.  For n >= 2
    the queue found at generation must drain: with k packets ahead, the chance
    that the k-th departure lands exactly n - 1 slots later follows the
    k-fold service convolution started from the stationary phase vector of
    level k, evaluated through the recursion
        g_j(1) = S^{j-1} s,
        g_k(k) = s * s[0]^(k-1),
        g_j(k) = S g_{j-1}(k) + s * (g_{j-1}(k-1))[0]   for j > k,
    where s is the departure vector and phase 0 the serving phase.  When
    ``n_max`` is omitted the support grows until the tail drops below
    ``tail_tol`` (capped).  Index 0 of the returned array is always zero.
    """
    m, k_cap = blocks.phase_count, blocks.level_count
    S, s = blocks.serve, blocks.absorb
    s0 = s[0]
    x_levels = [steady.by_level(j) for j in range(k_cap + 1)]

    limit = n_max if n_max is not None else n_cap
    pmf = [0.0, float(x_levels[0].sum())]
    # g_prev[k] holds g_{j-1}(k); index 0 unused
    g_prev = np.zeros((k_cap + 1, m))
    j = 0
    while True:
        j += 1
        n = j + 1
        if n > limit:
            break
        g_now = np.zeros_like(g_prev)
        for k in range(1, min(j, k_cap) + 1):
            if j == k:
                g_now[k] = s * s0 ** (k - 1)
            elif k == 1:
                g_now[1] = S @ g_prev[1]
            else:
                g_now[k] = S @ g_prev[k] + s * g_prev[k - 1][0]
        prob = sum(
            float(x_levels[k] @ g_now[k]) for k in range(1, min(j, k_cap) + 1)
        )
        pmf.append(prob)
        g_prev = g_now
        tail = 1.0 - sum(pmf)
        if n_max is None and tail < tail_tol:
            break
    arr = np.array(pmf)
    tail = 1.0 - arr.sum()
    return arr, float(tail)


def mean_wait(waiting_pmf: np.ndarray) -> float:
    """Mean of a waiting-time PMF indexed by slot count."""
    pmf = np.asarray(waiting_pmf, dtype=float)
    return float(np.dot(np.arange(pmf.size), pmf))


def paoi(alpha_i: float, mean_wait_slots: float, mean_service_slots: float) -> float:
    """Peak age of information: inter-arrival + queueing + service delay."""
    if alpha_i <= 0.0:
        raise ConfigError("peak age of information needs a positive arrival rate")
    return 1.0 / alpha_i + mean_wait_slots + mean_service_slots


def class_metrics(
    solution: NetworkSolution,
    i: int,
    n_max: int | None = None,
    tail_tol: float = WAIT_TAIL_TOL,
    n_cap: int = WAIT_N_CAP,
) -> ClassMetrics:
    """Assemble every indicator for class i from a solved network."""
    steady = solution.steady_states[i - 1]
    blocks = solution.blocks[i - 1]
    alpha = solution.config.classes[i - 1].alpha
    pmf, tail = waiting_time_pmf(
        steady, blocks, n_max=n_max, tail_tol=tail_tol, n_cap=n_cap
    )
    w = mean_wait(pmf)
    d = mean_service(service_ph(blocks))
    return ClassMetrics(
        class_index=i,
        tsp=steady.gamma * solution.coverage[i - 1],
        mean_queue=mean_queue_length(steady),
        availability=availability(solution.steady_states, i),
        waiting_pmf=pmf,
        waiting_tail=tail,
        mean_wait=w,
        mean_service=d,
        paoi=paoi(alpha, w, d) if alpha > 0 else float("inf"),
        interarrival=1.0 / alpha if alpha > 0 else float("inf"),
    )


def network_metrics(
    solution: NetworkSolution,
    n_max: int | None = None,
    tail_tol: float = WAIT_TAIL_TOL,
    n_cap: int = WAIT_N_CAP,
) -> tuple[ClassMetrics, ...]:
    """Metrics for every class of a solved network."""
    return tuple(
        class_metrics(solution, i, n_max=n_max, tail_tol=tail_tol, n_cap=n_cap)
        for i in range(1, solution.config.n_classes + 1)
    )
