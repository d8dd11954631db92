import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fcba.model import (BLOCKADE, LEFT, RIGHT, Configuration, Exponential, InitialConfig, ParameterError,
                        Side, Uniform, sample_initial_config, spacing_from_spec, validate_params)


def test_zero_params_put_all_mass_on_mutual():
    prm = validate_params(0, 0, 0, 0)
    assert prm.c == 1 and prm.xi == 1


def test_thirds():
    t = 1 / 3
    prm = validate_params(t, t, t, t)
    assert prm.c == pytest.approx(1 / 3)
    assert prm.xi == pytest.approx(1 / 3)


@pytest.mark.parametrize("args, fragment", [
    ((0.7, 0.4, 0, 0), "a + b <= 1"),
    ((0, 0, 0.6, 0.5), "alpha + beta <= 1"),
    ((1.0, 0, 0, 0), "0 <= a < 1"),
    ((0, -0.1, 0, 0), "0 <= b < 1"),
    ((0, 0, float("nan"), 0), "finite"),
])
def test_invalid_params_name_the_inequality(args, fragment):
    with pytest.raises(ParameterError, match=fragment.replace("+", r"\+")):
        validate_params(*args)


unit = st.floats(0, 0.999, allow_nan=False)


@given(unit, unit, unit, unit)
def test_derived_quantities(a, b, al, be):
    if a + b > 1 or al + be > 1:
        with pytest.raises(ParameterError):
            validate_params(a, b, al, be)
        return
    prm = validate_params(a, b, al, be)
    assert prm.c == 1 - (a + b)
    assert prm.xi == 1 - (al + be)


def test_three_blockades_at_full_density():
    conf = sample_initial_config(InitialConfig(3, 1.0, seed=4))
    assert list(conf.velocities) == [BLOCKADE] * 3


def test_same_seed_same_configuration():
    cfg = InitialConfig(10_000, 0.25, seed=77)
    x, y = sample_initial_config(cfg), sample_initial_config(cfg)
    assert x.positions.tobytes() == y.positions.tobytes()
    assert x.velocities.tobytes() == y.velocities.tobytes()


def test_different_seeds_differ():
    x = sample_initial_config(InitialConfig(100, 0.25, seed=1))
    y = sample_initial_config(InitialConfig(100, 0.25, seed=2))
    assert not np.array_equal(x.positions, y.positions)


def test_positions_strictly_increasing_over_many_configs():
    for seed in range(1000):
        side = Side.TWO_SIDED if seed % 2 else Side.RIGHT_HALF_LINE
        conf = sample_initial_config(InitialConfig(50, 0.3, side, seed=seed))
        assert np.all(np.diff(conf.positions) > 0)
        if side is Side.RIGHT_HALF_LINE:
            assert conf.positions[0] > 0
        else:
            assert 0.0 in conf.positions


def test_two_sided_origin_particle():
    conf = sample_initial_config(InitialConfig(11, 0.5, Side.TWO_SIDED, seed=3))
    zero = int(np.flatnonzero(conf.positions == 0.0)[0])
    assert conf.keys[zero] == 0
    assert np.all(conf.keys[:zero] < 0) and np.all(conf.keys[zero + 1:] > 0)


def test_blockade_fraction_concentrates():
    n, p = 10**6, 0.25
    conf = sample_initial_config(InitialConfig(n, p, seed=2024))
    frac = np.mean(conf.velocities == BLOCKADE)
    assert abs(frac - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_species_frequencies_chi_square():
    n, p = 10**6, 0.3
    conf = sample_initial_config(InitialConfig(n, p, seed=99))
    counts = [np.sum(conf.velocities == v) for v in (BLOCKADE, RIGHT, LEFT)]
    expected = [n * p, n * (1 - p) / 2, n * (1 - p) / 2]
    assert stats.chisquare(counts, expected).pvalue > 1e-3


def test_exponential_spacing_mean():
    conf = sample_initial_config(InitialConfig(200_000, 0.2, spacing=Exponential(2.0), seed=5))
    gaps = np.diff(np.concatenate([[0.0], conf.positions]))
    assert stats.kstest(gaps, "expon", args=(0, 2.0)).pvalue > 1e-3


def test_uniform_spacing_support():
    conf = sample_initial_config(InitialConfig(10_000, 0.2, spacing=Uniform(0.5, 1.5), seed=5))
    gaps = np.diff(np.concatenate([[0.0], conf.positions]))
    assert gaps.min() >= 0.5 and gaps.max() <= 1.5


def test_window_prefix_is_stable():
    small = sample_initial_config(InitialConfig(100, 0.3, seed=8))
    large = sample_initial_config(InitialConfig(1000, 0.3, seed=8))
    assert np.array_equal(small.positions, large.positions[:100])
    assert np.array_equal(small.velocities, large.velocities[:100])


@pytest.mark.parametrize("spec, expected", [
    (None, Exponential(1.0)),
    ("exponential", Exponential(1.0)),
    ("exponential:3", Exponential(3.0)),
    ("uniform:1,2", Uniform(1.0, 2.0)),
    ({"kind": "uniform", "lo": 0.1, "hi": 0.2}, Uniform(0.1, 0.2)),
])
def test_spacing_spec(spec, expected):
    assert spacing_from_spec(spec) == expected


@pytest.mark.parametrize("spec", ["gamma", "uniform:2,1", "uniform:-1,1", "exponential:0"])
def test_bad_spacing(spec):
    with pytest.raises(ParameterError):
        spacing_from_spec(spec)


def test_initial_config_serializes():
    cfg = InitialConfig(10, 0.2, "two-sided", "uniform:1,2", 3)
    d = json.loads(json.dumps(cfg.to_dict()))
    assert d["side"] == "two-sided" and d["spacing"]["lo"] == 1.0


def test_from_species_and_mirror():
    conf = Configuration.from_species([1.0, 2.0, 4.0], "<b>")
    assert list(conf.velocities) == [LEFT, BLOCKADE, RIGHT]
    m = conf.mirrored(about=0.0)
    assert list(m.positions) == [-4.0, -2.0, -1.0]
    assert list(m.velocities) == [LEFT, BLOCKADE, RIGHT]
    assert len(conf.restrict(lo=1.0)) == 2


def test_from_species_rejects_unsorted():
    with pytest.raises(ParameterError):
        Configuration.from_species([2.0, 1.0], "<>")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.floats(0, 1), st.integers(0, 2**63 - 1))
def test_sampling_properties(n, p, seed):
    conf = sample_initial_config(InitialConfig(n, p, seed=seed))
    assert len(conf) == n
    assert np.all(np.diff(conf.positions) > 0)
    assert set(np.unique(conf.velocities)) <= {LEFT, BLOCKADE, RIGHT}
