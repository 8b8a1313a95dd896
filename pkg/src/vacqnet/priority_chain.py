"""Vacation phase-type service processes and QBD blocks for preemptive priority queues.

Each priority class i is reduced to a single discrete-time Geo/PH/1 queue in
which the "service phase" tracks the joint occupancy of all higher-priority
queues.  While any higher queue is non-empty the server is on vacation; the
class-i head of line departs only from the serving phase, with probability
(no higher-priority arrival) * (own coverage probability).

Phase ordering convention (load-bearing, used by every consumer): phases of
the class-i chain are the joint occupancy tuples (n_1, ..., n_{i-1}) in mixed
radix with n_1 varying fastest and the all-empty tuple first.  The assembled
transition matrix of the class-(i-1) chain in level-major layout then equals
that same lexicographic order over (n_1, ..., n_{i-1}), so the vacation visit
matrix of class i is obtained by deleting the first (all-empty) row and column
of the class-(i-1) chain.

All functions are pure; inputs are never mutated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import TrafficClass

#: Row-sum / distribution consistency tolerance enforced on constructed chains.
STOCHASTIC_ATOL = 1e-12

#: Default cap on the joint state-space size of the exact oracle chain.
ORACLE_STATE_CAP = 20_000


class ChainConstructionError(ValueError):
    """Raised when a constructed chain violates its stochasticity invariants."""


@dataclass(frozen=True)
class PhDistribution:
    """A discrete phase-type law: initial vector, transient matrix, absorption vector.

    ``dim`` may be zero (the degenerate empty law used as the vacation process
    of the highest-priority class, which is never interrupted).
    """

    init: np.ndarray
    transient: np.ndarray
    absorb: np.ndarray
    dim: int

    def validate(self, atol: float = STOCHASTIC_ATOL) -> None:
        if self.dim == 0:
            return
        if self.transient.shape != (self.dim, self.dim):
            raise ChainConstructionError(
                f"transient matrix shape {self.transient.shape} does not match "
                f"dim {self.dim}"
            )
        if np.any(self.transient < -atol) or np.any(self.absorb < -atol):
            raise ChainConstructionError("negative transition probability")
        row_total = self.transient.sum(axis=1) + self.absorb
        if np.max(np.abs(row_total - 1.0)) > atol:
            raise ChainConstructionError(
                f"transient rows plus absorption do not sum to 1 "
                f"(max dev {np.max(np.abs(row_total - 1.0)):.3e})"
            )
        if self.init.size and abs(self.init.sum() - 1.0) > atol:
            raise ChainConstructionError("initial vector does not sum to 1")


@dataclass(frozen=True)
class QbdBlocks:
    """Block matrices of one class's level/phase transition matrix.

    ``b1``/``c`` govern the empty level, ``a2``/``a1``/``a0`` the interior
    (down / same / up one level), and ``b2`` the full level.  ``serve`` and
    ``absorb`` are the service-phase transient matrix and its departure vector
    (needed by delay metrics); ``boundary`` is the phase matrix in force while
    the queue is empty.
    """

    b1: np.ndarray
    c: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray
    beta: np.ndarray
    level_count: int
    phase_count: int
    serve: np.ndarray
    absorb: np.ndarray
    boundary: np.ndarray
    alpha: float
    coverage: float

    def validate(self, atol: float = STOCHASTIC_ATOL) -> None:
        pairs = [
            ("[B1 | C]", self.b1.sum(axis=1) + self.c.sum(axis=1)),
            ("[A2 | A1 | A0]",
             self.a2.sum(axis=1) + self.a1.sum(axis=1) + self.a0.sum(axis=1)),
            ("[A2 | B2]", self.a2.sum(axis=1) + self.b2.sum(axis=1)),
        ]
        for label, total in pairs:
            dev = np.max(np.abs(total - 1.0))
            if dev > atol:
                raise ChainConstructionError(
                    f"block row sums of {label} deviate from 1 by {dev:.3e}"
                )
        for label, block in (("B1", self.b1), ("C", self.c), ("A0", self.a0),
                             ("A1", self.a1), ("A2", self.a2), ("B2", self.b2)):
            if np.any(block < -atol):
                raise ChainConstructionError(f"negative entry in block {label}")


def phase_space(classes: tuple[TrafficClass, ...]) -> list[tuple[int, ...]]:
    """Enumerate joint occupancy tuples of the given classes, first coordinate fastest."""
    ranges = [range(cls.queue_size + 1) for cls in classes]
    # itertools.product varies the LAST factor fastest, so feed classes reversed.
    return [tup[::-1] for tup in itertools.product(*ranges[::-1])]


def phase_dimension(classes: tuple[TrafficClass, ...]) -> int:
    """Number of joint occupancy states of the given classes."""
    out = 1
    for cls in classes:
        out *= cls.queue_size + 1
    return out


def batch_arrival_distribution(
    classes: tuple[TrafficClass, ...],
) -> tuple[float, np.ndarray]:
    """Distribution of a slot's batch arrival over the higher-priority classes.

    Returns ``chi``, the probability that at least one of the given classes
    sees an arrival in a slot, and the conditional distribution ``v`` of the
    resulting occupancy pattern over the non-empty joint states.  A vacation
    always starts from an empty higher-priority system, so every occupancy
    count is 0 or 1 and ``v`` is zero outside those patterns.

    An empty class list yields ``chi = 0`` and an empty vector.
    """
    if not classes:
        return 0.0, np.zeros(0)
    alphas = np.array([cls.alpha for cls in classes])
    chi = 1.0 - float(np.prod(1.0 - alphas))
    v = np.zeros(phase_dimension(classes) - 1)
    if chi == 0.0:
        return chi, v
    radix = np.cumprod([1] + [cls.queue_size + 1 for cls in classes[:-1]])
    for pattern in itertools.product((0, 1), repeat=len(classes)):
        if not any(pattern):
            continue
        idx = int(np.dot(pattern, radix))
        prob = np.prod([a if n else 1.0 - a for a, n in zip(alphas, pattern)])
        v[idx - 1] = prob / chi
    return chi, v


def _top_class_busy_period(cls: TrafficClass, coverage: float) -> PhDistribution:
    """Busy-period chain of the highest-priority queue over occupancies 1..k.

    Birth-death transient matrix: up = alpha * (1 - p), down = (1 - alpha) * p,
    stay = (1 - alpha) * (1 - p) + alpha * p; arrivals at a full queue are only
    effective when a departure frees the slot, so the last diagonal absorbs the
    alpha mass.  Absorption (queue drained) occurs from occupancy 1 with
    probability (1 - alpha) * p.
    """
    a, p, k = cls.alpha, coverage, cls.queue_size
    trans = np.zeros((k, k))
    for r in range(k):
        if r < k - 1:
            trans[r, r] = (1 - a) * (1 - p) + a * p
            trans[r, r + 1] = a * (1 - p)
        else:
            trans[r, r] = (1 - a) * (1 - p) + a
        if r > 0:
            trans[r, r - 1] = (1 - a) * p
    absorb = np.zeros(k)
    absorb[0] = (1 - a) * p
    init = np.zeros(k)
    init[0] = 1.0
    return PhDistribution(init=init, transient=trans, absorb=absorb, dim=k)


def build_vacation_ph(
    i: int,
    coverage: tuple[float, ...] | list[float],
    classes: tuple[TrafficClass, ...],
) -> PhDistribution:
    """Vacation process of class i: aggregate busy period of classes 1..i-1.

    For i = 1 the vacation is the degenerate empty law.  For i = 2 it is the
    explicit busy-period chain of class 1.  For i >= 3 it is obtained by
    assembling the full class-(i-1) transition matrix and deleting the
    all-empty state (first row and column); the absorption vector is the
    complementary row mass.  The initial vector is the batch-arrival
    distribution over the non-empty {0,1}-occupancy states.
    """
    if len(coverage) < i - 1:
        raise ChainConstructionError(
            f"need coverage probabilities for classes 1..{i - 1}, "
            f"got {len(coverage)}"
        )
    if i == 1:
        return PhDistribution(
            init=np.zeros(0), transient=np.zeros((0, 0)), absorb=np.zeros(0), dim=0
        )
    if i == 2:
        ph = _top_class_busy_period(classes[0], coverage[0])
    else:
        blocks = build_class_chain(i - 1, coverage, classes)
        full = assemble_transition_matrix(blocks)
        trans = full[1:, 1:]
        absorb = 1.0 - trans.sum(axis=1)
        chi, v = batch_arrival_distribution(classes[: i - 1])
        init = v if chi > 0 else np.zeros(trans.shape[0])
        ph = PhDistribution(init=init, transient=trans, absorb=absorb, dim=trans.shape[0])
    ph.validate()
    return ph


def build_qbd_blocks(
    i: int,
    vacation: PhDistribution,
    chi: float,
    v: np.ndarray,
    alpha_i: float,
    p_i: float,
    k_i: int,
) -> QbdBlocks:
    """Assemble the six QBD blocks of class i from its vacation process.

    The boundary phase matrix stacks the serving state on top of the vacation
    states: stay serving with probability 1 - chi, start a vacation into
    pattern v with probability chi, return from vacation via the absorption
    vector.  The in-service variant scales the serving self-loop by the own
    transmission failure probability, so departure occurs with probability
    (1 - chi) * p_i exactly.
    """
    mv = vacation.dim
    m = mv + 1
    if v.shape[0] != mv:
        raise ChainConstructionError(
            f"vacation init vector length {v.shape[0]} does not match "
            f"vacation dimension {mv}"
        )
    boundary = np.zeros((m, m))
    boundary[0, 0] = 1.0 - chi
    if mv:
        boundary[0, 1:] = chi * v
        boundary[1:, 0] = vacation.absorb
        boundary[1:, 1:] = vacation.transient
    serve = boundary.copy()
    serve[0, 0] *= 1.0 - p_i
    absorb = 1.0 - serve.sum(axis=1)
    absorb[np.abs(absorb) < STOCHASTIC_ATOL] = 0.0
    beta = np.zeros(m)
    beta[0] = 1.0
    dep = np.outer(absorb, beta)
    a = alpha_i
    blocks = QbdBlocks(
        b1=(1 - a) * boundary,
        c=a * boundary,
        a0=a * serve,
        a1=a * dep + (1 - a) * serve,
        a2=(1 - a) * dep,
        b2=a * dep + serve,
        beta=beta,
        level_count=k_i,
        phase_count=m,
        serve=serve,
        absorb=absorb,
        boundary=boundary,
        alpha=a,
        coverage=p_i,
    )
    blocks.validate()
    return blocks


def build_class_chain(
    i: int,
    coverage: tuple[float, ...] | list[float],
    classes: tuple[TrafficClass, ...],
) -> QbdBlocks:
    """Build the complete class-i QBD, recursing through classes 1..i-1."""
    vacation = build_vacation_ph(i, coverage, classes)
    chi, v = batch_arrival_distribution(classes[: i - 1])
    return build_qbd_blocks(
        i, vacation, chi, v, classes[i - 1].alpha, coverage[i - 1],
        classes[i - 1].queue_size,
    )


def assemble_transition_matrix(blocks: QbdBlocks) -> np.ndarray:
    """Expand QBD blocks into the dense level-major transition matrix."""
    m, k = blocks.phase_count, blocks.level_count
    P = np.zeros((m * (k + 1), m * (k + 1)))

    def put(row_level, col_level, block):
        P[row_level * m:(row_level + 1) * m,
          col_level * m:(col_level + 1) * m] = block

    put(0, 0, blocks.b1)
    put(0, 1, blocks.c)
    for lev in range(1, k):
        put(lev, lev - 1, blocks.a2)
        put(lev, lev, blocks.a1)
        put(lev, lev + 1, blocks.a0)
    put(k, k - 1, blocks.a2)
    put(k, k, blocks.b2)
    return P


def build_joint_oracle_chain(
    classes: tuple[TrafficClass, ...],
    coverage: tuple[float, ...] | list[float],
    state_cap: int = ORACLE_STATE_CAP,
) -> np.ndarray:
    """Exact slot-transition matrix over the full joint occupancy space.

    Ground-truth dynamics, coded directly from the slot rules rather than via
    the vacation decomposition: independent Bernoulli arrivals per class at
    slot start, the highest-priority queue that was non-empty at the slot
    boundary is served, its departure is voided by any strictly
    higher-priority arrival in the same slot, and occupancies update as
    min(n + arrival - departure, k) so a full queue drops an arrival unless a
    departure frees the slot.

    States are ordered mixed-radix with class-1 occupancy varying fastest,
    matching the phase/level layout of the per-class chains.
    """
    n = len(classes)
    sizes = [cls.queue_size + 1 for cls in classes]
    total = int(np.prod(sizes))
    if total > state_cap:
        raise ChainConstructionError(
            f"joint state space has {total} states, exceeding the cap "
            f"{state_cap}"
        )
    radix = np.cumprod([1] + sizes[:-1])
    alphas = [cls.alpha for cls in classes]
    P = np.zeros((total, total))
    for state in itertools.product(*[range(sz) for sz in sizes[::-1]]):
        state = state[::-1]
        row = int(np.dot(state, radix))
        served = next((c for c in range(n) if state[c] > 0), None)
        for arrivals in itertools.product((0, 1), repeat=n):
            p_arr = np.prod(
                [a if x else 1.0 - a for a, x in zip(alphas, arrivals)]
            )
            if p_arr == 0.0:
                continue
            preempted = served is not None and any(arrivals[:served])
            if served is None or preempted:
                outcomes = [(0, 1.0)]
            else:
                outcomes = [(1, coverage[served]), (0, 1.0 - coverage[served])]
            for departed, p_dep in outcomes:
                if p_dep == 0.0:
                    continue
                col = 0
                for c in range(n):
                    d = departed if c == served else 0
                    nxt = min(state[c] + arrivals[c] - d, classes[c].queue_size)
                    col += nxt * radix[c]
                P[row, col] += p_arr * p_dep
    return P
