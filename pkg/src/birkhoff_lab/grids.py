"""Scalar functions sampled on uniform periodic grids (dimension 1 or 2)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridMismatch
from .hamiltonians import TrigPolynomial, wrap_unit


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridFunction:
    """Samples of a scalar map on the uniform grid of T^1 or T^2."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim not in (1, 2):
            raise ValueError("GridFunction is 1- or 2-dimensional")
        for n in v.shape:
            if not _is_power_of_two(n):
                raise ValueError(f"resolution {n} is not a power of two")
        if not np.all(np.isfinite(v)):
            raise ValueError("GridFunction values must be finite")

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.resolution) / self.resolution

    def same_grid(self, other: "GridFunction") -> bool:
        return self.values.shape == other.values.shape

    def require_same_grid(self, other: "GridFunction") -> None:
        if not self.same_grid(other):
            raise GridMismatch(f"grids {self.values.shape} vs {other.values.shape}")

    # -- 1-D helpers --------------------------------------------------------

    def spectral_derivative(self) -> np.ndarray:
        """FFT differentiation; exact for trig polynomials below Nyquist."""
        if self.dim != 1:
            raise ValueError("spectral derivative implemented for dim 1")
        n = self.resolution
        freq = np.fft.rfftfreq(n, d=1.0 / n)
        spec = np.fft.rfft(self.values)
        if n % 2 == 0:
            spec[-1] = 0.0  # drop the unmatched Nyquist mode
        return np.fft.irfft(2j * np.pi * freq * spec, n=n)

    def central_derivative(self) -> np.ndarray:
        if self.dim != 1:
            raise ValueError("central derivative implemented for dim 1")
        step = 1.0 / self.resolution
        return (np.roll(self.values, -1) - np.roll(self.values, 1)) / (2 * step)

    def periodic_spline(self) -> CubicSpline:
        if self.dim != 1:
            raise ValueError("periodic spline implemented for dim 1")
        x = np.append(self.nodes, 1.0)
        y = np.append(self.values, self.values[0])
        return CubicSpline(x, y, bc_type="periodic")

    def eval(self, q) -> np.ndarray:
        """Cubic periodic interpolation at arbitrary positions."""
        return self.periodic_spline()(wrap_unit(q))

    def oscillation(self) -> float:
        return float(np.max(self.values) - np.min(self.values))


def grid_from_trig(poly: TrigPolynomial, n: int, t: float = 0.0) -> GridFunction:
    q = np.arange(n) / n
    return GridFunction(poly.value(t, q) + np.zeros(n))


def constant_grid(c: float, n: int) -> GridFunction:
    return GridFunction(np.full(n, float(c)))
