import numpy as np
import pytest

from birkhoff_lab.errors import GridMismatch
from birkhoff_lab.grids import GridFunction, constant_grid, grid_from_trig
from birkhoff_lab.hamiltonians import TrigPolynomial
from birkhoff_lab.reports import grid_from_csv, grid_to_csv


def test_resolution_power_of_two():
    GridFunction(np.zeros(64))
    with pytest.raises(ValueError):
        GridFunction(np.zeros(100))
    with pytest.raises(ValueError):
        GridFunction(np.zeros((64, 48)))
    with pytest.raises(ValueError):
        GridFunction(np.array([1.0, np.inf]))


def test_two_dimensional_grid():
    g = GridFunction(np.arange(64.0).reshape(8, 8))
    assert g.dim == 2 and g.resolution == 8
    assert g.oscillation() == 63.0


def test_spectral_derivative_exact_for_trig():
    poly = TrigPolynomial.from_coeffs([(0, 3, 0.2, -0.4)])
    g = grid_from_trig(poly, 64)
    qs = g.nodes
    expected = poly.deriv(0.0, qs, 0, 1)
    assert np.max(np.abs(g.spectral_derivative() - expected)) <= 1e-12


def test_central_derivative_second_order():
    errs = []
    for n in (64, 128):
        g = grid_from_trig(TrigPolynomial.from_coeffs([(0, 1, 0.0, 1.0)]), n)
        d = g.central_derivative()
        errs.append(np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * g.nodes))))
    assert errs[1] <= errs[0] / 3.5


def test_periodic_spline_eval():
    g = grid_from_trig(TrigPolynomial.from_coeffs([(0, 2, 0.5, 0.0)]), 128)
    xs = np.array([0.013, 0.49, 0.731, 0.999])
    assert np.max(np.abs(g.eval(xs) - 0.5 * np.cos(4 * np.pi * xs))) <= 5e-7
    assert g.eval(0.25 + 1.0) == pytest.approx(float(g.eval(0.25)), abs=1e-12)


def test_grid_mismatch_guard():
    a, b = constant_grid(0.0, 64), constant_grid(0.0, 128)
    with pytest.raises(GridMismatch):
        a.require_same_grid(b)


def test_csv_roundtrip_1d(tmp_path):
    g = grid_from_trig(TrigPolynomial.from_coeffs([(0, 1, 0.3, 0.7)]), 32)
    path = tmp_path / "g.csv"
    grid_to_csv(g, path)
    with open(path) as fh:
        assert fh.readline().strip() == "index,q,value"
    g2 = grid_from_csv(path)
    assert np.array_equal(g.values, g2.values)


def test_csv_roundtrip_2d(tmp_path):
    g = GridFunction(np.arange(16.0).reshape(4, 4))
    path = tmp_path / "g2.csv"
    grid_to_csv(g, path)
    with open(path) as fh:
        assert fh.readline().strip() == "index,q,q2,value"
    g2 = grid_from_csv(path)
    assert np.array_equal(g.values, g2.values)
