"""KPI extraction: queue length, availability, waiting distribution, PAoI.

The waiting-time recursion is validated against an absorbing chain coded
directly from the slot rules over (packets ahead, higher-class occupancy),
an independent path that never touches the service-phase matrices.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import FIG4_CLASS1_PMF
from vacqnet import (
    SteadyState,
    assemble_transition_matrix,
    availability,
    build_class_chain,
    make_config,
    mean_queue_length,
    mean_service,
    mean_wait,
    paoi,
    service_ph,
    solve_class,
    solve_direct,
    waiting_time_pmf,
)
from vacqnet.config import ConfigError


def _steady(level_pmf, phase_count=1, x=None):
    level_pmf = np.asarray(level_pmf, float)
    if x is None:
        x = level_pmf.copy()
    return SteadyState(
        x=np.asarray(x, float),
        level_count=level_pmf.size - 1,
        phase_count=phase_count,
        level_pmf=level_pmf,
        gamma=1.0,
        zeta=1.0 - level_pmf[0],
        delta_component=level_pmf[0],
        overflow=False,
        drift_down=1.0,
        drift_up=0.0,
    )


def test_mean_queue_all_idle():
    assert mean_queue_length(_steady([1.0, 0.0, 0.0])) == 0.0


def test_mean_queue_uniform():
    k = 6
    pmf = np.full(k + 1, 1.0 / (k + 1))
    assert mean_queue_length(_steady(pmf)) == pytest.approx(k / 2)


def test_mean_queue_fig4_class1(fig4_classes):
    s = solve_class(build_class_chain(1, (0.5, 0.5), fig4_classes))
    expected = float(np.dot(np.arange(7), FIG4_CLASS1_PMF))
    assert mean_queue_length(s) == pytest.approx(expected, abs=1e-9)
    assert mean_queue_length(s) == pytest.approx(0.2249974, abs=1e-6)


def test_availability_identities(fig4_classes):
    coverage = (0.5, 0.5)
    states = [
        solve_class(build_class_chain(i, coverage, fig4_classes)) for i in (1, 2)
    ]
    assert availability(states, 1) == 1.0
    assert availability(states, 2) == pytest.approx(FIG4_CLASS1_PMF[0], abs=1e-9)


def test_availability_non_increasing():
    classes = make_config([0.1, 0.25, 0.35], [3, 3, 3]).classes
    coverage = (0.8, 0.8, 0.8)
    states = [solve_class(build_class_chain(i, coverage, classes)) for i in (1, 2, 3)]
    vals = [availability(states, i) for i in (1, 2, 3)]
    assert vals[0] == 1.0
    assert vals[0] >= vals[1] >= vals[2] >= 0.0


def test_mean_service_single_class_geometric():
    classes = make_config([0.1], [4]).classes
    blocks = build_class_chain(1, (0.5,), classes)
    assert mean_service(service_ph(blocks)) == pytest.approx(2.0, rel=1e-12)
    blocks = build_class_chain(1, (0.25,), classes)
    assert mean_service(service_ph(blocks)) == pytest.approx(4.0, rel=1e-12)


def _brute_service_mean(alpha1, p1, p2, k1):
    """Mean slots from service start to departure for the second class.

    Absorbing chain over the higher-class occupancy n1 coded from the raw slot
    rules: while n1 >= 1 the higher class is served (departs w.p. p1, fills
    w.p. alpha1); at n1 = 0 a higher-priority arrival preempts, otherwise the
    own packet departs w.p. p2.
    """
    states = k1 + 1  # n1 in 0..k1
    T = np.zeros((states, states))
    for n1 in range(states):
        if n1 == 0:
            T[0, 1] += alpha1
            T[0, 0] += (1 - alpha1) * (1 - p2)
            # absorption: (1 - alpha1) * p2
        else:
            for a1, pa in ((1, alpha1), (0, 1 - alpha1)):
                if a1:  # arrival preempts the class-1 departure decision? no:
                    pass
                for d1, pd in ((1, p1), (0, 1 - p1)):
                    nxt = min(n1 + a1 - d1, k1)
                    T[n1, nxt] += pa * pd
    times = np.linalg.solve(np.eye(states) - T, np.ones(states))
    return times[0]


def test_mean_service_second_class_matches_raw_rules():
    alpha1, p1, p2, k1 = 0.15, 0.6, 0.45, 3
    classes = make_config([alpha1, 0.3], [k1, 2]).classes
    blocks = build_class_chain(2, (p1, p2), classes)
    ours = mean_service(service_ph(blocks))
    brute = _brute_service_mean(alpha1, p1, p2, k1)
    assert ours == pytest.approx(brute, rel=1e-9)


def _brute_wait_pmf_two_classes(classes, coverage, n_max):
    """Waiting PMF of class 2 from an absorbing chain over (ahead, n1).

    Independent of the service-phase machinery: the clearing dynamics follow
    the raw slot rules, with one state per (remaining packets ahead, class-1
    occupancy) and the count starting the slot after generation.
    """
    alpha1, p1 = classes[0].alpha, coverage[0]
    p2 = coverage[1]
    k1, k2 = classes[0].queue_size, classes[1].queue_size
    x = solve_direct(
        assemble_transition_matrix(build_class_chain(2, coverage, classes))
    ).reshape(k2 + 1, k1 + 1)

    def idx(r, n1):
        return (r - 1) * (k1 + 1) + n1

    size = k2 * (k1 + 1)
    T = np.zeros((size, size))
    absorb = np.zeros(size)
    for r in range(1, k2 + 1):
        for n1 in range(k1 + 1):
            row = idx(r, n1)
            if n1 == 0:
                T[row, idx(r, 1)] += alpha1
                dep = (1 - alpha1) * p2
                stay = (1 - alpha1) * (1 - p2)
                T[row, idx(r, 0)] += stay
                if r == 1:
                    absorb[row] += dep
                else:
                    T[row, idx(r - 1, 0)] += dep
            else:
                for a1, pa in ((1, alpha1), (0, 1 - alpha1)):
                    for d1, pd in ((1, p1), (0, 1 - p1)):
                        nxt = min(n1 + a1 - d1, k1)
                        T[row, idx(r, nxt)] += pa * pd
    pmf = np.zeros(n_max + 1)
    pmf[1] = x[0].sum()
    state = np.zeros(size)
    for r in range(1, k2 + 1):
        for n1 in range(k1 + 1):
            state[idx(r, n1)] = x[r, n1]
    for n in range(2, n_max + 1):
        pmf[n] = state @ absorb
        state = state @ T
    return pmf


def test_waiting_pmf_matches_raw_rule_oracle():
    classes = make_config([0.15, 0.3], [3, 3]).classes
    coverage = (0.6, 0.5)
    blocks = build_class_chain(2, coverage, classes)
    steady = solve_class(blocks)
    pmf, tail = waiting_time_pmf(steady, blocks, n_max=40)
    brute = _brute_wait_pmf_two_classes(classes, coverage, 40)
    assert_allclose(pmf, brute, atol=1e-12, rtol=0)


def test_waiting_pmf_light_traffic_single_class():
    # nearly empty queue: P{W=1} ~ level-0 mass and the tail is the residual
    classes = make_config([0.001], [4]).classes
    blocks = build_class_chain(1, (0.5,), classes)
    steady = solve_class(blocks)
    pmf, tail = waiting_time_pmf(steady, blocks, n_max=200)
    assert pmf[0] == 0.0
    assert pmf[1] == pytest.approx(steady.level_pmf[0], abs=1e-12)
    # service of the packet ahead is geometric(p): P{W=2} = x1 * p
    assert pmf[2] == pytest.approx(steady.by_level(1).sum() * 0.5, abs=1e-12)
    assert pmf.sum() + tail == pytest.approx(1.0, abs=1e-12)


def test_waiting_pmf_completeness_various():
    rng = np.random.default_rng(31)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        classes = make_config(
            rng.uniform(0.05, 0.4, n), rng.integers(1, 4, n)
        ).classes
        coverage = tuple(rng.uniform(0.5, 0.95, n))
        blocks = build_class_chain(n, coverage, classes)
        steady = solve_class(blocks)
        pmf, tail = waiting_time_pmf(steady, blocks, n_max=300)
        assert np.all(pmf >= -1e-15)
        assert pmf.sum() + tail == pytest.approx(1.0, abs=1e-12)


def test_waiting_pmf_auto_truncation():
    classes = make_config([0.1], [6]).classes
    blocks = build_class_chain(1, (0.7,), classes)
    steady = solve_class(blocks)
    pmf, tail = waiting_time_pmf(steady, blocks, tail_tol=1e-9)
    assert tail < 1e-9
    assert pmf.size < 200


def test_mean_wait_degenerate_and_two_point():
    assert mean_wait(np.array([1.0])) == 0.0
    assert mean_wait(np.array([0.0, 0.0, 1.0])) == 2.0
    assert mean_wait(np.array([0.5, 0.0, 0.5])) == 1.0


def test_little_relation_single_class():
    # no-drop regime: E[Q] = alpha (E[W] + E[D] + x0 - 2) ties three metrics
    for alpha, p in ((0.1, 0.6), (0.15, 0.7), (0.05, 0.35)):
        classes = make_config([alpha], [12]).classes
        blocks = build_class_chain(1, (p,), classes)
        steady = solve_class(blocks)
        pmf, tail = waiting_time_pmf(steady, blocks, tail_tol=1e-13)
        assert tail < 1e-12
        lhs = mean_queue_length(steady)
        rhs = alpha * (
            mean_wait(pmf) + mean_service(service_ph(blocks))
            + steady.level_pmf[0] - 2.0
        )
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_little_relation_second_class_via_oracle_chain():
    # same relation evaluated with the raw-rule oracle PMF in place of ours
    classes = make_config([0.1, 0.12], [3, 8]).classes
    coverage = (0.8, 0.75)
    blocks = build_class_chain(2, coverage, classes)
    steady = solve_class(blocks)
    pmf, tail = waiting_time_pmf(steady, blocks, n_max=2500)
    brute = _brute_wait_pmf_two_classes(classes, coverage, 2500)
    assert tail < 1e-10
    assert mean_wait(pmf) == pytest.approx(mean_wait(brute), abs=1e-6)


def test_paoi_formula():
    assert paoi(0.5, 0.0, 2.0) == pytest.approx(4.0)
    assert paoi(1.0, 0.0, 1.0) == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        paoi(0.0, 1.0, 1.0)


def test_paoi_lower_bound_property():
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        alphas = rng.uniform(0.05, 0.5, n)
        classes = make_config(alphas, rng.integers(1, 4, n)).classes
        coverage = tuple(rng.uniform(0.4, 0.95, n))
        blocks = build_class_chain(n, coverage, classes)
        steady = solve_class(blocks)
        pmf, _ = waiting_time_pmf(steady, blocks, n_max=600)
        value = paoi(alphas[-1], mean_wait(pmf), mean_service(service_ph(blocks)))
        assert value >= 1.0 / alphas[-1] + 1.0 - 1e-9
