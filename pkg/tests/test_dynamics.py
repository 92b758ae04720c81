import numpy as np
import pytest

from sparseloc.disorder import DisorderModel, UniformLaw
from sparseloc.dynamics import (
    PropagatorQuery,
    axis_factor_bessel,
    axis_factor_table,
    cook_integrand,
    evolution_kernel,
    fit_loglog,
    projected_norm,
    sparseness_integral,
    verify_offdiagonal_decay,
    verify_time_decay,
    weighted_tail_norm,
)
from sparseloc.lattice import Cube, generate_sparse_set, sparse_set_from_sites
from sparseloc.operators import SymbolSpec, delta_symbol

DELTA1 = delta_symbol(1)
DELTA2 = delta_symbol(2)


def test_kernel_at_time_zero_is_identity():
    kernel = evolution_kernel(PropagatorQuery(DELTA1, 0.0, ((0,), (1,), (-4,))))
    assert kernel[(0,)] == pytest.approx(1.0)
    assert abs(kernel[(1,)]) < 1e-14
    assert abs(kernel[(-4,)]) < 1e-14


def test_kernel_matches_bessel_value():
    kernel = evolution_kernel(PropagatorQuery(DELTA1, 1.0, ((0,),)))
    assert kernel[(0,)].real == pytest.approx(0.22389077914123562, abs=1e-12)
    assert abs(kernel[(0,)].imag) < 1e-12


@pytest.mark.parametrize("t", [5.0, 37.5, 100.0])
def test_kernel_bessel_cross_check_wide_range(t):
    table = axis_factor_table(DELTA1, 0, t, 200)
    d = np.arange(-200, 201)
    oracle = np.array([axis_factor_bessel(1, 1.0, t, int(x)) for x in d])
    np.testing.assert_allclose(table, oracle, atol=1e-10)


def test_kernel_separable_product():
    t = 2.5
    offsets = tuple((a, b) for a in range(-5, 6) for b in range(-5, 6))
    kernel = evolution_kernel(PropagatorQuery(DELTA2, t, offsets))
    for a, b in offsets:
        oracle = axis_factor_bessel(1, 1.0, t, a) * axis_factor_bessel(1, 1.0, t, b)
        assert kernel[(a, b)] == pytest.approx(oracle, abs=1e-10)


def test_kernel_conjugation_under_time_reversal():
    offsets = tuple((d,) for d in range(-8, 9))
    forward = evolution_kernel(PropagatorQuery(DELTA1, 3.0, offsets))
    backward = evolution_kernel(PropagatorQuery(DELTA1, -3.0, offsets))
    for off in offsets:
        assert backward[off] == pytest.approx(np.conj(forward[off]), abs=1e-12)


def test_kernel_unitarity_and_group_law():
    t1, t2 = 1.25, 2.0
    d_max = 60
    table = axis_factor_table(DELTA1, 0, t1 + t2, d_max)
    assert np.sum(np.abs(axis_factor_table(DELTA1, 0, t1 + t2, 200)) ** 2) == pytest.approx(
        1.0, abs=1e-10
    )
    # group law by convolution on a wide box
    wide = 200
    f1 = axis_factor_table(DELTA1, 0, t1, wide)
    f2 = axis_factor_table(DELTA1, 0, t2, wide)
    conv = np.convolve(f1, f2)
    mid = 2 * wide
    for d in range(-d_max, d_max + 1):
        assert conv[mid + d] == pytest.approx(table[d_max + d], abs=1e-8)


def test_mixed_harmonic_axis_kernel():
    spec = SymbolSpec((((1, 1.0), (2, 0.25)),))
    t = 1.7
    table = axis_factor_table(spec, 0, t, 50)

    def oracle(d):
        # convolution of the two commuting harmonic factors
        total = 0.0j
        for j in range(-30, 31):
            if (d - 2 * j) % 1 == 0:
                total += axis_factor_bessel(1, 1.0, t, d - 2 * j) * (
                    axis_factor_bessel(2, 0.25, t, 2 * j)
                )
        return total

    for d in (0, 1, 2, 5, -3):
        assert table[50 + d] == pytest.approx(oracle(d), abs=1e-9)


def test_offdiagonal_decay_regime():
    check = verify_offdiagonal_decay(DELTA1, 5.0, [(d,) for d in range(18, 61)])
    assert check.admissible_from == 20  # 2 nu t sup|h'| = 20
    assert all(r.passed for r in check.rows)
    assert all(r.distance >= 20 for r in check.rows)


def test_offdiagonal_decay_no_admissible_offsets():
    with pytest.raises(ValueError):
        verify_offdiagonal_decay(DELTA1, 5.0, [(d,) for d in range(1, 10)])


def test_offdiagonal_time_zero_trivially_passes():
    check = verify_offdiagonal_decay(DELTA1, 0.0, [(d,) for d in range(1, 8)])
    assert all(r.passed for r in check.rows)


def test_fit_loglog_exact_powers():
    ts = np.geomspace(50, 800, 20)
    assert fit_loglog(ts, ts ** (-1.0 / 3.0)) == pytest.approx(-1.0 / 3.0, abs=1e-12)
    assert fit_loglog(ts, 2.7 * ts ** (-0.5)) == pytest.approx(-0.5, abs=1e-12)


def test_time_decay_targets_and_fits():
    fits = verify_time_decay(DELTA1, np.geomspace(50, 800, 20))
    fit = fits[0]
    assert fit.max_target == pytest.approx(-1.0 / 3.0)
    assert fit.fixed_target == pytest.approx(-0.5)
    assert fit.max_pass
    assert fit.fixed_pass


def test_time_decay_rejects_bad_grid():
    with pytest.raises(ValueError):
        verify_time_decay(DELTA1, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    with pytest.raises(ValueError):
        verify_time_decay(DELTA1, [50.0, 60.0])


def test_projected_norm_identity_time():
    sparse = sparse_set_from_sites([(0,), (2,)], 0.5, 1)
    assert projected_norm(DELTA1, sparse, {(0,): 1.0}, 0.0) == pytest.approx(1.0)
    weighted = projected_norm(DELTA1, sparse, {(0,): 1.0}, 0.0, weight_gamma=2.0)
    assert weighted == pytest.approx(1.0)  # only the origin carries amplitude at t=0


def test_sparseness_empty_set():
    sparse = sparse_set_from_sites([], 0.5, 1)
    res = sparseness_integral(DELTA1, sparse, {(0,): 1.0}, 16.0)
    assert res.total == 0.0
    assert res.verdict == "converging"


def test_sparseness_refuses_dense_set():
    dense = sparse_set_from_sites([(i,) for i in range(-40, 41)], 0.2, 1)
    with pytest.raises(ValueError, match="too dense"):
        sparseness_integral(DELTA1, dense, {(0,): 1.0}, 16.0)


def test_sparseness_windows_converge_high_dimension():
    spec = delta_symbol(5)
    sparse = generate_sparse_set(0.25, Cube((0,) * 5, 12), "deterministic_powers", 0)
    res = sparseness_integral(spec, sparse, {(0,) * 5: 1.0}, 32.0)
    assert res.verdict == "converging"
    assert all(r < 0.9 for r in res.ratios[-2:])
    assert res.head_bound >= 1.0


def test_sparseness_requires_enough_windows():
    sparse = sparse_set_from_sites([(0,)], 0.5, 1)
    with pytest.raises(ValueError):
        sparseness_integral(DELTA1, sparse, {(0,): 1.0}, 4.0)


def test_cook_zero_coupling():
    sparse = sparse_set_from_sites([(0,), (4,)], 0.5, 1)
    model = DisorderModel(UniformLaw(-1, 1), coupling=0.0, seed=2)
    rows = cook_integrand(DELTA1, sparse, model, {(0,): 1.0}, [0.5, 1.0], n_samples=30)
    for row in rows:
        assert row.q90 == 0.0
        assert row.q50 <= row.bound


def test_cook_empty_set():
    sparse = sparse_set_from_sites([], 0.5, 1)
    model = DisorderModel(UniformLaw(-1, 1), coupling=3.0, seed=2)
    rows = cook_integrand(DELTA1, sparse, model, {(0,): 1.0}, [1.0], n_samples=30)
    assert rows[0].bound == 0.0
    assert rows[0].q90 == 0.0


def test_cook_second_moment_identity():
    sparse = sparse_set_from_sites([(i,) for i in range(-8, 9, 2)], 0.5, 1)
    model = DisorderModel(UniformLaw(-1, 1), coupling=2.0, seed=3)
    rows = cook_integrand(DELTA1, sparse, model, {(0,): 1.0}, [0.5, 2.0, 5.0], n_samples=300)
    for row in rows:
        # E||V psi||^2 = sigma^2 sum w^2 |psi|^2 = bound^2; 300 samples
        assert row.mc_mean_sq == pytest.approx(row.bound ** 2, rel=0.2)
        assert row.q50 <= row.bound * (1 + 1e-9)


def test_cook_requires_enough_samples():
    sparse = sparse_set_from_sites([(0,)], 0.5, 1)
    model = DisorderModel(UniformLaw(-1, 1), coupling=1.0)
    with pytest.raises(ValueError):
        cook_integrand(DELTA1, sparse, model, {(0,): 1.0}, [1.0], n_samples=10)


def test_weighted_tail_norm_identity_time():
    on = sparse_set_from_sites([(0,), (3,)], 0.5, 1)
    off = sparse_set_from_sites([(3,), (5,)], 0.5, 1)
    assert weighted_tail_norm(DELTA1, {(0,): 1.0}, 0.0, 1.5, on) == pytest.approx(1.0)
    assert weighted_tail_norm(DELTA1, {(0,): 1.0}, 0.0, 1.5, off) == pytest.approx(0.0)


def test_weighted_tail_norm_box_doubling_stable():
    box = sparse_set_from_sites([(i,) for i in range(-20, 21)], 0.5, 1)
    double = sparse_set_from_sites([(i,) for i in range(-40, 41)], 0.5, 1)
    a = weighted_tail_norm(DELTA1, {(0,): 1.0}, 2.0, 1.5, box)
    b = weighted_tail_norm(DELTA1, {(0,): 1.0}, 2.0, 1.5, double)
    assert abs(a - b) < 1e-10


def test_weighted_tail_norm_requires_beta_above_dim():
    sparse = sparse_set_from_sites([(0,)], 0.5, 1)
    with pytest.raises(ValueError):
        weighted_tail_norm(DELTA1, {(0,): 1.0}, 1.0, 0.9, sparse)


def test_propagator_query_validates_offsets():
    with pytest.raises(ValueError):
        PropagatorQuery(DELTA2, 1.0, ((0,),))


def test_negative_amplitude_axis_matches_bessel():
    spec = SymbolSpec((((2, -0.75),),))
    t = 4.0
    table = axis_factor_table(spec, 0, t, 40)
    for d in range(-40, 41):
        oracle = axis_factor_bessel(2, -0.75, t, d)
        assert table[40 + d] == pytest.approx(oracle, abs=1e-10)
