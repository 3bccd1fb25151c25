import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from birkhoff_lab.errors import ConvexityViolation, MaximizerNotFound
from birkhoff_lab.hamiltonians import (
    Family,
    SampleSpec,
    TonelliHamiltonian,
    TrigPolynomial,
    eval_hamiltonian,
    extended_hamiltonian,
    fenchel_gap,
    free_hamiltonian,
    legendre_transform,
    mechanical,
    pendulum,
    shifted_quadratic,
    tonelli_report,
)

SQ = shifted_quadratic([(1, 1, 0.0, 0.05)], drift=0.3, offset=0.2)


def custom_quartic():
    return TonelliHamiltonian(
        family=Family.CUSTOM,
        custom_fn=lambda t, q, p: p**4 / 4 + p**2 / 2 + 0.3 * np.cos(2 * np.pi * q) * (1 + 0.5 * np.cos(2 * np.pi * t)),
        momentum_box=(-10.0, 10.0),
    )


def test_eval_examples():
    assert eval_hamiltonian(free_hamiltonian(), 0, 0, 2) == 2.0
    assert eval_hamiltonian(pendulum(), 0, 0, 0) == 1.0
    sq0 = shifted_quadratic([], drift=0.0, offset=0.0)
    assert eval_hamiltonian(sq0, 0, 0.3, 1) == 0.5


def test_periodicity_bitwise():
    for h in (pendulum(), SQ):
        for t, q, p in [(0.125, 0.375, 0.7), (0.0, 0.5, -1.2), (0.625, 0.0625, 3.0)]:
            assert eval_hamiltonian(h, t + 1, q, p) == eval_hamiltonian(h, t, q, p)
            assert eval_hamiltonian(h, t, q + 1, p) == eval_hamiltonian(h, t, q, p)


def test_legendre_closed_forms():
    lag = legendre_transform(free_hamiltonian(), 0, 0, 1)
    assert lag.value == 0.5 and lag.optimal_momentum == 1.0
    lag = legendre_transform(pendulum(), 0, 0, 0)
    assert lag.value == -1.0
    # mechanical with mass: L = v^2/(2k) - V - offset
    h = mechanical([(0, 1, 0.25, 0.0)], kinetic=2.0, offset=0.1)
    lag = legendre_transform(h, 0.0, 0.0, 1.0)
    assert lag.value == pytest.approx(0.25 - 0.25 - 0.1, abs=1e-14)
    assert lag.optimal_momentum == pytest.approx(0.5, abs=1e-14)


def test_legendre_custom_against_dense_grid():
    h = TonelliHamiltonian(
        family=Family.CUSTOM,
        custom_fn=lambda t, q, p: 0.5 * p**2,
        momentum_box=(-10.0, 10.0),
    )
    lag = legendre_transform(h, 0.0, 0.0, 0.7)
    # frozen dense-grid maximization over p in [-10, 10]: max at p = 0.7
    assert lag.value == pytest.approx(0.245, abs=1e-10)
    assert lag.optimal_momentum == pytest.approx(0.7, abs=1e-6)


def test_legendre_involution_mechanical():
    h = mechanical([(0, 1, 0.3, 0.2), (0, 2, -0.1, 0.0)], kinetic=1.5, offset=0.05)
    rng = np.random.default_rng(3)
    for _ in range(50):
        t, q, p = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-3, 3)
        vs = np.linspace(p * h.kinetic_coefficient - 0.4, p * h.kinetic_coefficient + 0.4, 4001)
        vals = [p * v - legendre_transform(h, t, q, v).value for v in vs]
        assert max(vals) == pytest.approx(eval_hamiltonian(h, t, q, p), abs=1e-9)


def test_fenchel_examples():
    h = free_hamiltonian()
    assert fenchel_gap(h, 0, 0, 1, 1) == 0.0
    assert fenchel_gap(h, 0, 0, 1, 0) == 0.5


def test_fenchel_gap_sweep_all_families():
    rng = np.random.default_rng(11)
    for h in (pendulum(), SQ, custom_quartic()):
        for _ in range(200):
            t, q = rng.uniform(0, 1), rng.uniform(0, 1)
            v, p = rng.uniform(-3, 3), rng.uniform(-3, 3)
            gap = fenchel_gap(h, t, q, v, p)
            assert gap >= -1e-12
            lag = legendre_transform(h, t, q, v)
            assert fenchel_gap(h, t, q, v, lag.optimal_momentum) <= 1e-9


@given(
    t=st.floats(0, 1), q=st.floats(0, 1),
    v=st.floats(-4, 4), p=st.floats(-4, 4),
)
@settings(max_examples=200, deadline=None)
def test_fenchel_gap_nonnegative_property(t, q, v, p):
    assert fenchel_gap(pendulum(), t, q, v, p) >= -1e-12


def test_shifted_solves_hamilton_jacobi():
    h = SQ
    worst = 0.0
    for t in np.linspace(0, 1, 17):
        for q in np.linspace(0, 1, 23):
            w = h.shift_profile.deriv(t, q, 0, 1)
            res = h.shift_profile.deriv(t, q, 1, 0) + eval_hamiltonian(h, t, q, w)
            worst = max(worst, abs(res - h.constant_offset))
    assert worst <= 1e-10


def test_tonelli_report_families():
    rep = tonelli_report(free_hamiltonian(), SampleSpec(t_samples=4, q_samples=8))
    assert rep.min_second_derivative == pytest.approx(1.0, abs=1e-6)
    rep = tonelli_report(SQ, SampleSpec(t_samples=4, q_samples=8))
    assert rep.min_second_derivative == pytest.approx(1.0, abs=1e-6)
    assert rep.superlinear


def test_tonelli_report_rejects_concave():
    bad = TonelliHamiltonian(
        family=Family.CUSTOM,
        custom_fn=lambda t, q, p: -0.5 * p**2,
        momentum_box=(-10, 10),
    )
    with pytest.raises(ConvexityViolation):
        tonelli_report(bad, SampleSpec(t_samples=2, q_samples=4))


def test_extended_hamiltonian():
    h = pendulum()
    val = eval_hamiltonian(h, 0.3, 0.7, 1.1)
    assert extended_hamiltonian(h, 0.3, -val, 0.7, 1.1) == 0.0
    assert extended_hamiltonian(free_hamiltonian(), 0, 1.0, 0, 0) == 1.0
    assert extended_hamiltonian(h, 0, -1.5, 0.5, 1.0) == pytest.approx(-2.0, abs=1e-15)


def test_trig_polynomial_derivatives():
    poly = TrigPolynomial.from_coeffs([(1, 2, 0.3, -0.4)])
    t, q, e = 0.21, 0.43, 1e-6
    for nt, nq in [(1, 0), (0, 1), (1, 1), (0, 2)]:
        if nt:
            approx = (poly.deriv(t + e, q, nt - 1, nq) - poly.deriv(t - e, q, nt - 1, nq)) / (2 * e)
        else:
            approx = (poly.deriv(t, q + e, nt, nq - 1) - poly.deriv(t, q - e, nt, nq - 1)) / (2 * e)
        assert approx == pytest.approx(poly.deriv(t, q, nt, nq), abs=1e-6, rel=1e-6)


def test_trig_polynomial_harmonic_cap():
    with pytest.raises(ValueError):
        TrigPolynomial.from_coeffs([(9, 0, 1.0, 0.0)])


def test_custom_requires_callable():
    with pytest.raises(ValueError):
        TonelliHamiltonian(family=Family.CUSTOM)


def test_legendre_maximizer_not_found_for_concave():
    bad = TonelliHamiltonian(
        family=Family.CUSTOM,
        custom_fn=lambda t, q, p: -0.5 * p**2,
        momentum_box=(-10, 10),
    )
    with pytest.raises(MaximizerNotFound):
        legendre_transform(bad, 0.0, 0.0, 0.5)
