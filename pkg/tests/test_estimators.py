import json
import math

import numpy as np
import pytest

from fcba.estimators import (EstimateResult, Phase, SurvivalPoint, TrialSpec, Verdict, bracket_from_classes,
                             classify_point, critical_root_report, decide, empirical_pc, estimate_change_of_measure,
                             estimate_q, estimate_S, estimate_triple_sum, identity_suite, merge_tables,
                             one_sided_table, survival_slope, wilson_interval)
from fcba.model import validate_params
from fcba.theory import solve_q


def test_wilson_reference_values():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0 and hi == pytest.approx(0.27753, abs=1e-5)
    lo, hi = wilson_interval(50, 100)
    assert (lo, hi) == pytest.approx((0.40383, 0.59617), abs=1e-5)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert wilson_interval(7, 7)[1] == 1.0


def test_estimate_result_invariants():
    with pytest.raises(ValueError):
        EstimateResult(0.5, 0.6, 0.7, 10, 1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        EstimateResult(0.5, 0.4, 0.6, 10, 1.0, 0.55, 0.6)


def _est(point, lo, hi):
    return EstimateResult(point, point, point, 100, 0.5, lo, hi)


def test_decide_rule():
    assert decide(0.02, 0.01, 0.0, 0.5, _est(0.52, 0.52, 0.52))[1] is Verdict.PASS
    assert decide(0.035, 0.01, 0.01, 0.5, _est(0.535, 0.535, 0.535))[1] is Verdict.PASS
    assert decide(0.1, 0.01, 0.0, 0.5, _est(0.6, 0.45, 0.6))[1] is Verdict.INCONCLUSIVE
    z, v = decide(0.1, 0.01, 0.0, 0.5, _est(0.6, 0.58, 0.62))
    assert v is Verdict.FAIL and z == pytest.approx(10)
    assert decide(0.0, 0.0, 0.0, 0.5, _est(0.5, 0.5, 0.5)) == (0.0, Verdict.PASS)


def test_merge_is_order_independent():
    spec = TrialSpec(validate_params(.2, .2, .2, .3), 0.3, 300, 5, k_max=4)
    serial = one_sided_table(spec, 600, workers=1)
    pooled = one_sided_table(spec, 600, workers=2)
    for k in serial:
        np.testing.assert_array_equal(serial[k], pooled[k])
    parts = [{k: v[lo:hi] for k, v in serial.items()} for lo, hi in [(400, 600), (0, 150), (150, 400)]]
    shuffled = merge_tables(parts)
    for k in serial:
        np.testing.assert_array_equal(serial[k], shuffled[k])


def test_estimate_q_reproducible(thirds):
    a = estimate_q(thirds, 0.2, 500, 200, 3, workers=1)
    b = estimate_q(thirds, 0.2, 500, 200, 3, workers=2)
    assert a == b
    assert a != estimate_q(thirds, 0.2, 500, 200, 4, workers=1)
    json.dumps(a.to_dict())


def test_estimate_q_full_density(thirds):
    r = estimate_q(thirds, 1.0, 100, 50, 1, workers=1)
    assert r.point == 0 and r.certified_fraction == 1
    assert r.uncertain_low == 0


def test_estimate_q_without_blockades(classical):
    r = estimate_q(classical, 0.0, 10**4, 200, 2, workers=1)
    assert r.point == 1 and r.uncertain_low > 0.95


def test_estimate_q_all_uncertain(classical):
    table = {"n_visits": np.zeros(5, int), "closed": np.zeros(5, bool)}
    r = estimate_q(classical, 0.5, 100, 5, 0, table=table)
    assert r.inconclusive and "increase n" in r.diagnostics
    assert (r.uncertain_low, r.certified_fraction) == (0.0, 0.0)
    with pytest.raises(ValueError):
        estimate_q(classical, 0.5, 5, 5, 0)


def test_estimate_q_matches_solver_roughly(classical):
    r = estimate_q(classical, 0.35, 4000, 800, 9, workers=1)
    assert r.uncertain_low <= solve_q(classical, 0.35).q <= r.uncertain_high


def test_uncertain_band_shrinks_with_n(classical):
    widths = []
    for n in (10**3, 10**4, 10**5):
        r = estimate_q(classical, 0.3, n, 200, 11, workers=1)
        widths.append(r.uncertain_high - r.uncertain_low)
    assert widths[0] >= widths[1] >= widths[2]


def test_S_vanishes_without_weak_collisions(classical):
    for rep in (estimate_S(classical, 0.3, 500, 100, 5, 1, workers=1),
                estimate_triple_sum(classical, 0.3, 500, 100, 5, 1, workers=1)):
        assert rep.closed_value == 0 and rep.mc_value.point == 0
        assert rep.verdict is Verdict.PASS


def test_change_of_measure_zero_weight(classical):
    rep = estimate_change_of_measure(classical, 0.3, 300, 200, 1, workers=1)
    # only mutual annihilation has weight; nothing to compare and nothing impossible seen
    assert rep.verdict is Verdict.PASS
    assert all(count == 0 for _, count in rep.details["zero_weight_events"])


def test_small_identity_suite():
    reports = identity_suite(validate_params(.2, .2, .2, .3), 0.3, 3000, 1500, 21, workers=1, pc_checks=200)
    names = [r.name for r in reports]
    assert names[:3] == ["rec2", "s", "r"] and "g_at_critical" in names
    bad = [(r.name, r.z_score) for r in reports if r.verdict is Verdict.FAIL]
    assert not bad
    for r in reports:
        json.dumps(r.to_dict())


def test_critical_root_report(thirds):
    rep = critical_root_report(thirds, 500, 1)
    assert rep.verdict is Verdict.PASS and rep.details["max_abs_g"] < 1e-9


def _pts(means, ns=(10**4, 2 * 10**4, 4 * 10**4), se_frac=0.02):
    return [SurvivalPoint(0.3, n, m, m - 2 * se_frac * m, m + 2 * se_frac * m, 1000, se_frac * m)
            for n, m in zip(ns, means)]


def test_survival_slope_recovers_power():
    ns = (1000, 2000, 4000)
    slope, se = survival_slope(_pts([5 / n for n in ns], ns))
    assert slope == pytest.approx(-1) and se > 0
    assert survival_slope(_pts([0.1, 0.0, 0.0]))[0] == -math.inf
    with pytest.raises(ValueError):
        survival_slope(_pts([0.1], (1000,)))


def test_classify_point_rules():
    flat = _pts([0.05, 0.05, 0.05])
    decaying = _pts([0.02, 0.01, 0.005])
    assert classify_point(flat) is Phase.SUPERCRITICAL
    assert classify_point(decaying) is Phase.SUBCRITICAL
    assert classify_point(_pts([0.02, 0.016, 0.013], se_frac=0.2)) is Phase.UNDECIDED
    assert classify_point(flat, rule="threshold") is Phase.SUPERCRITICAL
    assert classify_point(decaying, rule="threshold") is Phase.SUBCRITICAL
    assert classify_point(_pts([0.02, 0.015, 0.0105], se_frac=0.1), rule="threshold") is Phase.UNDECIDED
    with pytest.raises(ValueError):
        classify_point(flat, rule="vote")


def test_bracket_from_classes():
    S, U, D = Phase.SUBCRITICAL, Phase.UNDECIDED, Phase.SUPERCRITICAL
    grid = [0.1, 0.2, 0.3, 0.4]
    assert bracket_from_classes(grid, [S, S, D, D]) == (0.2, 0.3, [])
    assert bracket_from_classes(grid, [S, U, U, D]) == (0.1, 0.4, [])
    lo, hi, notes = bracket_from_classes(grid, [S, D, S, D])
    assert (lo, hi) == (0.1, 0.4) and "non-monotone" in notes[0]
    lo, hi, notes = bracket_from_classes(grid, [D, D, D, D])
    assert lo == 0.1 and hi == 0.1 and "subcritical" in notes[0]


def test_empirical_pc_grid_above_critical(classical):
    with pytest.warns(RuntimeWarning, match="subcritical"):
        br = empirical_pc(classical, [0.45, 0.55], [200, 400], 40, 1, workers=1)
    assert br.p_lower == 0.45
    assert set(br.classes.values()) == {"supercritical"}
    json.dumps(br.to_dict())


def test_empirical_pc_input_checks(classical):
    with pytest.raises(ValueError):
        empirical_pc(classical, [], [200, 400], 10, 1)
    with pytest.raises(ValueError):
        empirical_pc(classical, [0.3], [200], 10, 1)
