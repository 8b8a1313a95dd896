"""Solver agreement, drift condition, and marginal extraction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import FIG4_CLASS1_PMF, FIG4_CLASS2_PMF, random_classes
from vacqnet import (
    assemble_transition_matrix,
    build_class_chain,
    check_overflow,
    class_marginals,
    classical_rate_matrix,
    make_config,
    solve_class,
    solve_direct,
    solve_mam,
)
from vacqnet.steady_state import SolverError


def test_solve_direct_symmetric_two_state():
    P = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert_allclose(solve_direct(P), [0.5, 0.5], atol=1e-14)


def test_solve_direct_matches_power_iteration():
    rng = np.random.default_rng(5)
    P = rng.uniform(0.05, 1.0, size=(8, 8))
    P /= P.sum(axis=1, keepdims=True)
    x = solve_direct(P)
    y = np.full(8, 1.0 / 8)
    for _ in range(4000):  # contraction is geometric; this exceeds 1e6 steps' accuracy
        y = y @ P
    assert_allclose(x, y, atol=1e-10)
    assert x.sum() == pytest.approx(1.0, abs=1e-12)


def test_solve_direct_rejects_non_stochastic():
    with pytest.raises(SolverError):
        solve_direct(np.array([[0.5, 0.4], [0.5, 0.5]]))


def test_solve_direct_fig4_value(fig4_classes):
    P = assemble_transition_matrix(build_class_chain(1, (0.5, 0.5), fig4_classes))
    x = solve_direct(P)
    assert x[0] == pytest.approx(0.800000301068341, abs=1e-12)


def test_solve_mam_single_class_matches_direct():
    classes = make_config([0.1], [6]).classes
    blocks = build_class_chain(1, (0.5,), classes)
    xd = solve_direct(assemble_transition_matrix(blocks))
    xm = solve_mam(blocks)
    assert_allclose(xm, xd, atol=1e-12, rtol=0)


def test_solve_mam_level_ratio_constant_for_birth_death():
    # single class: the interior level ratios are the scalar rate matrix
    classes = make_config([0.12], [7]).classes
    blocks = build_class_chain(1, (0.8,), classes)
    x = solve_mam(blocks)
    ratios = x[2:-1] / x[1:-2]
    assert_allclose(ratios, ratios[0], rtol=1e-9)
    R = classical_rate_matrix(blocks)
    assert ratios[0] == pytest.approx(float(R[0, 0]), rel=1e-9)


def test_solve_mam_fig4_second_class(fig4_classes):
    blocks = build_class_chain(2, (0.5, 0.5), fig4_classes)
    x = solve_mam(blocks)
    levels = x.reshape(6, 7).sum(axis=1)
    assert levels[5] == pytest.approx(0.441728458234214, abs=1e-6)
    assert_allclose(levels, FIG4_CLASS2_PMF, atol=1e-9)


def test_solver_agreement_randomized_non_overflow():
    # matrix-analytic and direct solves agree to 1e-10 on 100 random stable configs
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 100:
        n = int(rng.integers(1, 4))
        classes = random_classes(rng, n, k_max=4, alpha_lo=0.02, alpha_hi=0.35)
        coverage = tuple(rng.uniform(0.55, 0.99, n))
        blocks = build_class_chain(n, coverage, classes)
        overflow, _, _ = check_overflow(blocks)
        if overflow:
            continue
        xd = solve_direct(assemble_transition_matrix(blocks))
        xm = solve_mam(blocks)
        assert np.max(np.abs(xd - xm)) < 1e-10
        checked += 1


def test_classical_rate_matrix_spectral_radius():
    # below the overflow point the minimal rate matrix is strictly contracting
    classes = make_config([0.1, 0.25], [4, 4]).classes
    blocks = build_class_chain(2, (0.9, 0.9), classes)
    R = classical_rate_matrix(blocks)
    radius = np.max(np.abs(np.linalg.eigvals(R)))
    assert radius < 1.0
    residual = np.max(np.abs(blocks.a0 + R @ blocks.a1 + R @ R @ blocks.a2 - R))
    assert residual < 1e-12


def test_check_overflow_scalar_drifts():
    classes = make_config([0.1], [6]).classes
    blocks = build_class_chain(1, (0.5,), classes)
    overflow, down, up = check_overflow(blocks)
    assert not overflow
    assert down == pytest.approx(0.45, abs=1e-12)
    assert up == pytest.approx(0.05, abs=1e-12)


def test_check_overflow_no_departures():
    classes = make_config([0.3], [4]).classes
    blocks = build_class_chain(1, (0.0,), classes)
    overflow, down, _ = check_overflow(blocks)
    assert overflow
    assert down == pytest.approx(0.0, abs=1e-15)


def test_check_overflow_no_arrivals():
    classes = make_config([0.0], [4]).classes
    blocks = build_class_chain(1, (0.5,), classes)
    overflow, _, up = check_overflow(blocks)
    assert not overflow
    assert up == pytest.approx(0.0, abs=1e-15)


def test_overflow_single_crossing_in_coverage():
    # sweeping p downward flips the drift condition at most once
    classes = make_config([0.2, 0.3], [3, 3]).classes
    flips = []
    prev = None
    for p in np.linspace(1.0, 0.02, 60):
        blocks = build_class_chain(2, (p, p), classes)
        overflow, _, _ = check_overflow(blocks)
        if prev is not None and overflow != prev:
            flips.append(p)
        prev = overflow
    assert len(flips) <= 1


def test_class_marginals_gamma_identities(fig4_classes):
    coverage = (0.5, 0.5)
    s1 = solve_class(build_class_chain(1, coverage, fig4_classes))
    assert s1.gamma == pytest.approx(1.0, abs=1e-12)
    s2 = solve_class(build_class_chain(2, coverage, fig4_classes))
    # zeta + delta_component = gamma, and gamma equals the class-1 empty mass
    assert s2.zeta + s2.delta_component == pytest.approx(s2.gamma, abs=1e-12)
    assert s2.gamma == pytest.approx(FIG4_CLASS1_PMF[0], abs=1e-9)
    assert s2.level_pmf.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(s2.x >= 0)


def test_gamma_non_increasing_in_class_index():
    classes = make_config([0.1, 0.25, 0.35], [3, 3, 3]).classes
    coverage = (0.7, 0.7, 0.7)
    gammas = [
        solve_class(build_class_chain(i, coverage, classes)).gamma
        for i in (1, 2, 3)
    ]
    assert gammas[0] >= gammas[1] >= gammas[2]


def test_class_marginals_function_shape():
    x = np.array([0.3, 0.1, 0.25, 0.15, 0.12, 0.08])
    level_pmf, gamma, zeta, delta = class_marginals(x, level_count=2, phase_count=2)
    assert_allclose(level_pmf, [0.4, 0.4, 0.2])
    assert gamma == pytest.approx(0.3 + 0.25 + 0.12)
    assert delta == pytest.approx(0.3)
    assert zeta == pytest.approx(0.25 + 0.12)
