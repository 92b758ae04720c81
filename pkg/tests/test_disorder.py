import math

import numpy as np
import pytest

from sparseloc._rng import site_uniforms
from sparseloc.disorder import (
    DisorderModel,
    GaussianLaw,
    TruncatedCauchyLaw,
    UniformLaw,
    check_regularity,
    make_law,
    sample_potential,
    weight_value,
)
from sparseloc.lattice import sparse_set_from_sites


def _line_set(lo, hi):
    return sparse_set_from_sites([(i,) for i in range(lo, hi + 1)], 0.5, 1)


def test_empty_set_gives_empty_potential():
    model = DisorderModel(UniformLaw(-1, 1), coupling=5.0, seed=1)
    assert sample_potential(model, sparse_set_from_sites([], 0.5, 1), 0) == {}


def test_zero_coupling_gives_zeros():
    model = DisorderModel(UniformLaw(-1, 1), coupling=0.0, seed=1)
    values = sample_potential(model, _line_set(-3, 3), 0)
    assert set(values) == {(i,) for i in range(-3, 4)}
    assert all(v == 0.0 for v in values.values())


def test_replay_determinism_and_per_site_keying():
    model = DisorderModel(UniformLaw(-1, 1), coupling=10.0, seed=42)
    big = _line_set(-10, 10)
    small = sparse_set_from_sites([(-4,), (0,), (7,)], 0.5, 1)
    a = sample_potential(model, big, 3)
    b = sample_potential(model, big, 3)
    assert a == b
    # values depend on (seed, realization, site) only, not on the set
    c = sample_potential(model, small, 3)
    for site, value in c.items():
        assert value == a[site]
    # different realizations decorrelate
    d = sample_potential(model, big, 4)
    assert d != a


def test_uniform_law_of_large_numbers():
    model = DisorderModel(UniformLaw(-1, 1), coupling=10.0, seed=7)
    sites = _line_set(0, 9)
    total = 0.0
    n_real = 10_000
    for r in range(n_real):
        total += sum(sample_potential(model, sites, r).values())
    mean = total / (n_real * 10)
    # sigma = lambda/sqrt(3); three-sigma band for the mean of 1e5 draws
    assert abs(mean) < 3.0 * (10.0 / math.sqrt(3.0)) / math.sqrt(n_real * 10)


@pytest.mark.parametrize(
    "law,second_moment",
    [
        (UniformLaw(-1, 1), 1.0 / 3.0),
        (GaussianLaw(0.0, 2.0), 4.0),
        (TruncatedCauchyLaw(1.0, 5.0), (5.0 - math.atan(5.0)) / math.atan(5.0)),
    ],
)
def test_empirical_second_moment_matches_law(law, second_moment):
    u = site_uniforms(99, 1, 0, np.arange(1_000_000, dtype=np.int64)[:, None])
    x = np.asarray(law.inverse_cdf(u))
    assert np.mean(x ** 2) == pytest.approx(second_moment, rel=0.01)
    assert law.second_moment() == pytest.approx(second_moment, rel=1e-12)


def test_weighted_sampling_scales_by_distance():
    gamma = 0.5
    model = DisorderModel(UniformLaw(-1, 1), weight_gamma=gamma, seed=13)
    flat = DisorderModel(UniformLaw(-1, 1), coupling=1.0, seed=13)
    sites = _line_set(-99, 99)
    weighted = sample_potential(model, sites, 0)
    raw = sample_potential(flat, sites, 0)
    for site, value in weighted.items():
        assert value == pytest.approx(weight_value(gamma, site) * raw[site], rel=1e-12)


def test_weight_value_examples():
    assert weight_value(1.0, (0,)) == 1.0
    assert weight_value(2.0, (3,)) == 16.0
    assert weight_value(0.5, (99,)) == 10.0
    with pytest.raises(ValueError):
        weight_value(0.0, (1,))


def test_weight_value_nondecreasing():
    values = [weight_value(0.7, (n,)) for n in range(0, 50)]
    assert values == sorted(values)
    assert values[0] == 1.0


def test_regularity_uniform_pointwise_arithmetic():
    law = UniformLaw(-1, 1)
    # a=0, delta=1/2: mu(-1/2, 1/2) = 1/2 and delta * mu(-1, 1) = 1/2
    num = law.interval_measure(-0.5, 0.5)
    den = 0.5 * law.interval_measure(-1.0, 1.0)
    assert num == pytest.approx(0.5)
    assert num / den == pytest.approx(1.0)


def test_regularity_uniform_constant_below_two():
    report = check_regularity(DisorderModel(UniformLaw(-1, 1)), b=1.0)
    assert report.passed
    assert 1.0 <= report.c_estimate <= 2.0


def test_regularity_gaussian_finite():
    report = check_regularity(
        DisorderModel(GaussianLaw(0.0, 1.0)),
        b=1.0,
        a_values=np.linspace(-5, 5, 41),
        deltas=np.geomspace(0.01, 0.99, 25),
    )
    assert report.passed
    assert math.isfinite(report.c_estimate)


def test_regularity_point_mass_blows_up():
    report = check_regularity(DisorderModel(GaussianLaw(0.0, 1e-12)), b=1.0)
    assert not report.passed
    assert report.c_estimate > 1e6


def test_regularity_rejects_small_b():
    with pytest.raises(ValueError):
        check_regularity(DisorderModel(UniformLaw(-1, 1)), b=0.5)


def test_truncated_cauchy_measures():
    law = TruncatedCauchyLaw(1.0, 4.0)
    assert law.interval_measure(-4, 4) == pytest.approx(1.0)
    assert law.interval_measure(-10, 10) == pytest.approx(1.0)
    u = np.linspace(1e-6, 1 - 1e-6, 1001)
    x = law.inverse_cdf(u)
    assert np.all(np.abs(x) <= 4.0 + 1e-9)
    assert np.all(np.diff(x) > 0)


def test_gaussian_inverse_cdf_median():
    law = GaussianLaw(3.0, 2.0)
    assert float(law.inverse_cdf(np.array([0.5]))[0]) == pytest.approx(3.0)


def test_make_law_dispatch():
    assert isinstance(make_law("uniform", [-1, 1]), UniformLaw)
    assert isinstance(make_law("gaussian", [0, 1]), GaussianLaw)
    assert isinstance(make_law("truncated_cauchy", [1, 3]), TruncatedCauchyLaw)
    with pytest.raises(ValueError):
        make_law("cauchy", [1])
    with pytest.raises(ValueError):
        make_law("uniform", [1, -1])


def test_model_from_config():
    model = DisorderModel.from_config(
        {"law": "uniform", "params": [-1, 1], "lambda": 12.0,
         "weight": {"gamma": 0.5}, "seed": 42}
    )
    assert model.coupling == 12.0
    assert model.weight_gamma == 0.5
    assert model.seed == 42
    assert model.coupling_for((3,)) == pytest.approx(2.0)
