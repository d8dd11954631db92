import math
import warnings

import numpy as np
import pytest

from fcba.estimators import random_params
from fcba.model import validate_params
from fcba.theory import (Branch, DegenerateDenominator, UnsupportedRatio, S_closed, g, g_display_eval, g_eval,
                         hatp_from_mutual, pc_closed_form, q_curve, r_closed, r_parts, rec2_closed, recursion_rhs,
                         s_closed, s_parts, solve_q, triple_sum_closed, truncation_bound, truncation_index)


def _params(n, seed=0):
    return random_params(n, seed)


def test_pc_anchors(classical, thirds):
    assert pc_closed_form(classical) == 0.25
    assert pc_closed_form(thirds) == pytest.approx(0.125, abs=1e-15)
    assert pc_closed_form(validate_params(0, 0, 0, .5)) == pytest.approx(1 / 11, abs=1e-15)


def test_pc_warns_outside_unit_interval():
    # coalescence alone already beats the blockades here
    with pytest.warns(RuntimeWarning):
        assert pc_closed_form(validate_params(0, .9, 0, .5)) < 0


def test_pc_denominator_guard():
    # valid params keep the denominator away from zero, so use a stand-in
    class Fake:
        a, b, alpha, beta = 1.0, 1.0, 0.0, 0.0

        def as_tuple(self):
            return (4.0, 0.0, 0.0, 0.0)

    with pytest.raises(DegenerateDenominator):
        pc_closed_form(Fake())


def test_classical_g_is_linear_at_one(classical):
    for u in np.linspace(0, 1, 11):
        assert g(classical, u, 1.0) == pytest.approx(0.5 - 2 * u, abs=1e-14)


def test_g_vanishes_at_critical_point_for_random_params():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        worst = max(abs(g(prm, pc_closed_form(prm), 1.0)) for prm in _params(10**4, 1))
    assert worst < 1e-9


def test_g_affine_in_u_at_one():
    for prm in _params(500, 2):
        y = [g(prm, u, 1.0) for u in (0.2, 0.5, 0.8)]
        assert abs(y[0] - 2 * y[1] + y[2]) < 1e-12


def test_g_vanishes_at_full_density():
    for prm in _params(500, 3):
        parts = g_eval(prm, 1.0, 0.0)
        assert parts.f1 == 0 and parts.f2 == 0
        assert parts.g == 0


def test_g_accepts_arrays(thirds):
    v = np.linspace(0, 1, 5)
    np.testing.assert_allclose(g(thirds, 0.3, v), [g(thirds, 0.3, x) for x in v])


def test_display_form_matches_without_coalescence():
    for prm in _params(200, 4):
        prm = validate_params(prm.a, 0.0, prm.alpha, prm.beta)
        for u, v in [(0.1, 0.3), (0.5, 0.9), (0.9, 0.2)]:
            assert g_display_eval(prm, u, v).g == pytest.approx(g(prm, u, v), rel=1e-9, abs=1e-12)


def test_display_form_misses_the_critical_point(thirds):
    assert abs(g_display_eval(thirds, pc_closed_form(thirds), 1.0).g) > 1e-3
    assert abs(g(thirds, pc_closed_form(thirds), 1.0)) < 1e-12


def test_recursion_assembled_term_by_term():
    for prm in _params(200, 5):
        if prm.c < 1e-3:
            continue
        for p, q in [(0.2, 0.4), (0.5, 0.7), (0.8, 0.1)]:
            lhs = q - recursion_rhs(prm, p, q)
            # q - rhs = (1 - q) * g * (positive factor); compare signs and zeros
            gv = g(prm, p, q)
            assert (lhs == 0) == (gv == 0) or abs(lhs) < 1e-12
            assert np.sign(lhs) == np.sign(-(1 - q) * gv) or abs(lhs) < 1e-12


def test_recursion_fixed_point_is_solver_root(thirds):
    sol = solve_q(thirds, 0.3)
    assert recursion_rhs(thirds, 0.3, sol.q) == pytest.approx(sol.q, abs=1e-10)
    with pytest.raises(UnsupportedRatio):
        recursion_rhs(validate_params(.5, .5, 0, 0), 0.3, 0.5)
    with pytest.raises(UnsupportedRatio):
        recursion_rhs(thirds, 0.0, 0.5)


def test_classical_q_closed_form(classical):
    for p in (0.26, 0.3, 0.35, 0.5, 0.9):
        assert solve_q(classical, p).q == pytest.approx(1 / math.sqrt(p) - 1, abs=1e-10)
    assert solve_q(classical, 0.3).q == pytest.approx(0.825741858350554, abs=1e-12)


@pytest.mark.parametrize("params,p,q", [((0, 0, 0, .5), .15, .8194), ((0, 0, 0, .5), .25, .6192),
                                        ((.2, .2, .2, .3), .3, .68871), ((1 / 3,) * 4, .2, .87298)])
def test_solver_reference_values(params, p, q):
    assert solve_q(validate_params(*params), p).q == pytest.approx(q, abs=1e-4)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_solver_branches():
    for prm in _params(50, 6):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pc = pc_closed_form(prm)
        if pc > 0:
            low = solve_q(prm, pc / 2)
            assert (low.q, low.branch, low.residual) == (1.0, Branch.SUBCRITICAL_ONE, 0.0)
        top = solve_q(prm, 1.0)
        assert top.q == 0.0 and top.branch is Branch.SUPERCRITICAL_ROOT


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_solver_monotone_and_continuous():
    gen = np.random.default_rng(7)
    for prm in _params(20, 7):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            pc = max(pc_closed_form(prm), 0.0)
        grid = np.arange(pc + 1e-3, 1.0, 0.02)
        qs = [s.q for s in q_curve(prm, grid)]
        assert np.all(np.diff(qs) < 0)
        p = float(gen.uniform(pc + 0.01, 0.99))
        assert abs(solve_q(prm, p + 1e-6).q - solve_q(prm, p).q) < 1e-3


def test_solver_input_checks(classical):
    with pytest.raises(ValueError):
        solve_q(classical, 1.5)
    with pytest.raises(ValueError):
        solve_q(classical, 0.3, tol=0)


def test_s_and_r_examples(classical):
    prm = validate_params(.2, .2, .3, .4)
    assert s_closed(prm, .3, .1, 0.0) == 0 and r_closed(prm, .3, .1, 0.0) == 0
    for p in (0.1, 0.4):
        assert s_closed(classical, p, 0.0, 1.0) == pytest.approx(p / 2)
        assert r_closed(classical, p, 0.0, 1.0) == 0


def test_s_and_r_split_into_weak_and_mutual():
    for prm in _params(200, 8):
        for p, ph, q in [(0.2, 0.05, 0.5), (0.6, 0.1, 0.9)]:
            assert sum(s_parts(prm, p, ph, q)) == pytest.approx(s_closed(prm, p, ph, q), rel=1e-12)
            assert sum(r_parts(prm, p, ph, q)) == pytest.approx(r_closed(prm, p, ph, q), rel=1e-12)


def test_r_keeps_the_strong_collision_complement():
    # with alpha = 0 a right arrow is always stopped by the first blockade, so r > 0 when q < 1
    prm = validate_params(0, 0, 0, 0.5)
    assert r_closed(prm, 0.3, 0.0, 0.5) == pytest.approx(0.3 * 0.5 * 0.5 / 0.75 ** 2)


def test_rec2_examples(classical):
    assert rec2_closed(validate_params(.2, .2, .2, .3), 0.0, 0.5) == 0
    assert rec2_closed(classical, 0.4, 0.7) == pytest.approx(0.4 * 0.49)
    assert rec2_closed(validate_params(0, 0, .3, .5), 0.4, 0.6) == pytest.approx(0.144)


def test_geometric_sums():
    assert S_closed(0.0, 0.7) == 0 and triple_sum_closed(0.0, 0.7) == 0
    assert S_closed(0.5, 1.0) == pytest.approx(0.5)
    assert triple_sum_closed(0.5, 1.0) == pytest.approx(0.25)
    assert S_closed(0.5, 0.5) == pytest.approx(1 / 18)
    # two copies of S make up the full double sum over i, j >= 1
    x = 0.3
    brute = 0.5 * sum(x ** (i + j) for i in range(1, 80) for j in range(1, 80))
    assert S_closed(0.6, 0.5) == pytest.approx(brute, rel=1e-10)


def test_hatp_ratio(thirds):
    assert hatp_from_mutual(validate_params(.3, 0, .1, .1), 0.2) == 0
    assert hatp_from_mutual(validate_params(0, .5, 0, 0), 0.2) == pytest.approx(0.2)
    assert hatp_from_mutual(thirds, 0.2) == pytest.approx(0.2)
    with pytest.raises(UnsupportedRatio):
        hatp_from_mutual(validate_params(.5, .5, 0, 0), 0.2)


def test_truncation_index():
    assert truncation_index(0.0) == 1
    for beta in (0.1, 0.3, 0.5, 0.9):
        k = truncation_index(beta)
        assert truncation_bound(beta, k) < 1e-6 <= truncation_bound(beta, k - 1)
    assert truncation_bound(0.5, 40) < 2.0 ** -30
