"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from vacqnet import (
    SystemConfig,
    TrafficClass,
    assemble_transition_matrix,
    build_class_chain,
    build_joint_oracle_chain,
    make_config,
    solve_direct,
)


def random_classes(rng: np.random.Generator, n: int, k_max: int = 3,
                   alpha_lo: float = 0.02, alpha_hi: float = 0.6):
    """Draw a random valid priority class tuple."""
    return tuple(
        TrafficClass(
            index=i + 1,
            alpha=float(rng.uniform(alpha_lo, alpha_hi)),
            queue_size=int(rng.integers(1, k_max + 1)),
        )
        for i in range(n)
    )


def joint_marginal_up_to(x_joint: np.ndarray, classes, i: int) -> np.ndarray:
    """Marginalize a joint stationary vector onto classes 1..i.

    The joint layout is mixed radix with class-1 occupancy fastest, so the
    marginal is a reshape-sum over the trailing (lower-priority) axes.
    """
    keep = 1
    for cls in classes[:i]:
        keep *= cls.queue_size + 1
    return x_joint.reshape(-1, keep).sum(axis=0)


def vacation_chain_stationary(i: int, coverage, classes) -> np.ndarray:
    blocks = build_class_chain(i, coverage, classes)
    return solve_direct(assemble_transition_matrix(blocks))


def oracle_stationary(classes, coverage) -> np.ndarray:
    return solve_direct(build_joint_oracle_chain(classes, coverage))


@pytest.fixture
def fig4_classes():
    """The two-class golden configuration with fixed coverage 0.5."""
    return make_config([0.1, 0.5], [6, 5]).classes


FIG4_CLASS1_PMF = np.array([
    0.800000301068341,
    0.177777844681854,
    0.0197530938535393,
    0.00219478820594881,
    0.000243865356216534,
    2.7096150690726e-05,
    3.01068341008067e-06,
])

FIG4_CLASS2_PMF = np.array([
    0.025105333738797,
    0.0619812817198168,
    0.0941059652153034,
    0.146851464361824,
    0.230227496730046,
    0.441728458234214,
])
