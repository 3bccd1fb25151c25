import numpy as np
import pytest

from birkhoff_lab.errors import UnsupportedIndex
from birkhoff_lab.spectral import (
    Certificate,
    SampledFqi,
    fiber_selector,
    fibred_sum_fqi,
    fqi_from_csv,
    fqi_to_csv,
    negate,
    sample_fqi,
    selector_difference_bounds,
    selector_function,
    spectral_top,
    spectral_unit,
    sublevel_percolation_threshold,
    sum_additivity_check,
    witness_consistent,
)


def trig(coeffs):
    def f(q):
        out = 0.0
        for k, (a, b) in enumerate(coeffs, start=1):
            out = out + a * np.cos(2 * np.pi * k * q) + b * np.sin(2 * np.pi * k * q)
        return out

    return f


def test_pure_quadratic_min():
    s = sample_fqi(lambda x: x**2, (1,))
    sv = spectral_unit(s)
    assert sv.value == 0.0
    assert sv.certificate is Certificate.GLOBAL_MIN
    assert witness_consistent(s, sv)


def test_pure_saddle_threshold_zero():
    s = sample_fqi(lambda x, y: x**2 - y**2, (1, -1))
    sv = spectral_unit(s)
    assert sv.value == 0.0
    assert sv.certificate is Certificate.PERCOLATION_THRESHOLD
    assert witness_consistent(s, sv)


def test_negative_quadratic_top():
    s = sample_fqi(lambda x: -(x**2), (-1,))
    assert spectral_top(s).value == 0.0


def test_bump_on_saddle_matches_fine_brute_force():
    f = lambda x, y: x**2 - y**2 + np.exp(-(x**2 + y**2))
    coarse = spectral_unit(sample_fqi(f, (1, -1))).value
    fine = spectral_unit(sample_fqi(f, (1, -1), fiber_resolution=513)).value
    step = 8.0 / 128
    assert abs(coarse - fine) <= step
    assert coarse == pytest.approx(1.0, abs=step)


def test_duality_involution_bitwise():
    f = lambda x, y: x**2 - y**2 + 0.7 * np.exp(-(x**2 + y**2)) + 0.1 * np.sin(x)
    s = sample_fqi(f, (1, -1))
    assert spectral_top(s).value == -spectral_unit(negate(s)).value


def test_unsupported_index():
    s = sample_fqi(lambda x, y: -(x**2) - y**2, (-1, -1))
    with pytest.raises(UnsupportedIndex):
        spectral_unit(s)
    with pytest.raises(UnsupportedIndex):
        spectral_top(negate(s))


def test_fiber_selector_reductions():
    f = trig([(0.3, 0.1), (0.0, -0.2)])
    qs = np.arange(32) / 32
    s_min = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=32, fiber_resolution=65)
    s_max = sample_fqi(lambda q, x: -(x**2) + f(q), (-1,), base_resolution=32, fiber_resolution=65)
    s_sad = sample_fqi(
        lambda q, x, y: x**2 - y**2 + f(q), (1, -1), base_resolution=32, fiber_resolution=33
    )
    for s, tol in ((s_min, 1e-12), (s_max, 1e-12), (s_sad, 8.0 / 32)):
        vals = np.array([fiber_selector(s, i) for i in range(32)])
        assert np.max(np.abs(vals - f(qs))) <= tol


def test_fiber_selector_duality_exact():
    f = trig([(0.2, -0.3)])
    for sig, fn in [
        ((1,), lambda q, x: x**2 + f(q)),
        ((-1,), lambda q, x: -(x**2) + f(q)),
        ((1, -1), lambda q, x, y: x**2 - y**2 + f(q) + 0.3 * np.exp(-(x**2) - y**2)),
    ]:
        s = sample_fqi(fn, sig, base_resolution=16, fiber_resolution=33)
        m = negate(s)
        for i in range(16):
            assert fiber_selector(m, i) == -fiber_selector(s, i)


def test_selector_function_bounds_and_lipschitz():
    f = trig([(0.3, 0.1)])
    s = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=64, fiber_resolution=65)
    sel = selector_function(s)
    qs = np.arange(64) / 64
    assert np.max(np.abs(sel.values.values - f(qs))) <= 1e-12
    assert sel.bounds_ok
    assert sel.lower == pytest.approx(float(f(qs).min()), abs=1e-12)
    assert sel.upper == pytest.approx(float(f(qs).max()), abs=1e-12)
    assert sel.lipschitz <= 2 * np.pi * (0.3 + 0.1) + 1e-6
    flat = sample_fqi(lambda q, x: x**2 + 0 * q, (1,), base_resolution=32, fiber_resolution=65)
    self_sel = selector_function(flat)
    assert self_sel.values.oscillation() == 0.0
    assert self_sel.lipschitz == 0.0


def test_selector_oscillation_bounded_by_critical_oscillation():
    # index-0 instances: selector = fiberwise min; critical values of each
    # fiber include those minima, so Osc(selector) <= Osc over the critical
    # locus + 2 grid steps
    rng = np.random.default_rng(6)
    for _ in range(10):
        coeffs = [(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)) for _ in range(2)]
        f = trig(coeffs)
        s = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=64, fiber_resolution=65)
        sel = selector_function(s)
        crit_osc = float(np.ptp([fiber_selector(s, i) for i in range(64)]))
        assert sel.values.oscillation() <= crit_osc + 2 * s.fiber_step


def test_selector_nonexpansive_under_perturbation():
    f = trig([(0.3, 0.0)])
    s = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=32, fiber_resolution=65)
    rng = np.random.default_rng(7)
    for _ in range(5):
        delta = rng.uniform(-0.2, 0.2, 32)
        pert = SampledFqi(
            values=s.values + delta[:, None],
            signature=s.signature,
            fiber_halfwidth=s.fiber_halfwidth,
            constant_at_infinity=s.constant_at_infinity,
            base_resolution=32,
            shell_enforced=False,
        )
        a = selector_function(s).values.values
        b = selector_function(pert).values.values
        assert np.max(np.abs(a - b)) <= np.max(np.abs(delta)) + 1e-12


def test_additivity_separable_cases():
    f, g = trig([(0.2, 0.1)]), trig([(-0.15, 0.25)])
    combos = [((1,), (1,)), ((1,), (-1,)), ((-1,), (1,)), ((-1,), (-1,))]
    for s1_sig, s2_sig in combos:
        s1 = sample_fqi(
            lambda q, x: s1_sig[0] * x**2 + f(q), s1_sig, base_resolution=16, fiber_resolution=33
        )
        s2 = sample_fqi(
            lambda q, x: s2_sig[0] * x**2 + g(q), s2_sig, base_resolution=16, fiber_resolution=33
        )
        rep = sum_additivity_check(s1, s2, 5)
        assert abs(rep.difference) <= 1e-12


def test_additivity_with_pure_quadratic_is_stabilization():
    f = trig([(0.2, 0.1)])
    s1 = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=16, fiber_resolution=33)
    q2 = sample_fqi(lambda q, x: x**2 + 0 * q, (1,), base_resolution=16, fiber_resolution=33)
    rep = sum_additivity_check(s1, q2, 3)
    assert rep.part_selectors[1] == 0.0
    assert abs(rep.difference) <= 1e-12


def test_difference_bounds_sandwich():
    f, g = trig([(0.2, 0.1)]), trig([(-0.1, 0.3)])
    s1 = sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=32, fiber_resolution=33)
    s2 = sample_fqi(lambda q, x: x**2 + g(q), (1,), base_resolution=32, fiber_resolution=33)
    rep = selector_difference_bounds(s1, s2)
    assert rep.ok
    assert rep.lower == pytest.approx(rep.min_gap, abs=1e-9)
    assert rep.upper == pytest.approx(rep.max_gap, abs=1e-9)
    same = selector_difference_bounds(s1, s1)
    assert same.lower == pytest.approx(0.0, abs=1e-12)
    assert same.upper == pytest.approx(0.0, abs=1e-12)


def test_shell_enforced_by_construction():
    s = sample_fqi(
        lambda x, y: x**2 - y**2 + 3 * np.exp(-0.1 * (x**2 + y**2)), (1, -1), fiber_resolution=65
    )
    assert s.shell_error() <= 1e-9
    with pytest.raises(ValueError):
        SampledFqi(
            values=s.values + np.linspace(0, 1, 65)[:, None],
            signature=(1, -1),
            fiber_halfwidth=4.0,
            shell_enforced=True,
        )


def test_percolation_base_connectivity():
    # ends connect through the cheapest base point: threshold = min f
    f = trig([(0.3, 0.2)])
    s = sample_fqi(
        lambda q, x, y: x**2 - y**2 + f(q), (1, -1), base_resolution=32, fiber_resolution=33
    )
    sv = spectral_unit(s)
    qs = np.arange(32) / 32
    assert sv.value == pytest.approx(float(f(qs).min()), abs=1e-12)


def test_percolation_one_dimensional_is_max():
    # index 1 on a 1-D fiber: the two ends connect once the level clears the
    # interior maximum
    s = sample_fqi(lambda x: -(x**2) + 0.7 * np.exp(-(x**2)), (-1,), fiber_resolution=129)
    val, witness = sublevel_percolation_threshold(s.values, 0, (False,))
    assert val == pytest.approx(0.7, abs=1e-6)
    assert witness == (64,)


def test_fqi_csv_roundtrip(tmp_path):
    f = trig([(0.1, -0.2)])
    for s in (
        sample_fqi(lambda q, x: x**2 + f(q), (1,), base_resolution=8, fiber_resolution=17),
        sample_fqi(lambda x, y: x**2 - y**2, (1, -1), fiber_resolution=17),
    ):
        path = tmp_path / "inst.csv"
        fqi_to_csv(s, path)
        s2 = fqi_from_csv(path)
        assert np.array_equal(s2.values, s.values)
        assert s2.signature == s.signature
        assert s2.base_resolution == s.base_resolution


def test_fibred_sum_not_shell_enforced():
    s1 = sample_fqi(lambda x: x**2, (1,), fiber_resolution=17)
    s2 = sample_fqi(lambda x: -(x**2), (-1,), fiber_resolution=17)
    total = fibred_sum_fqi(s1, s2)
    assert not total.shell_enforced
    assert total.signature == (1, -1)
