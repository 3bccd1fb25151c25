"""Tonelli Hamiltonian families on the cotangent bundle of the circle.

Three families are built in: mechanical (kinetic + potential), a manufactured
shifted-quadratic family that solves the Hamilton-Jacobi equation in closed
form, and user-supplied callables. Potentials and shift profiles are finite
trigonometric polynomials, so evaluation and all needed derivatives are
closed-form and exactly 1-periodic in time and position.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConvexityViolation, MaximizerNotFound

TWO_PI = 2.0 * math.pi


def wrap_unit(x):
    """Reduce a coordinate (scalar or array) to [0, 1)."""
    return x - np.floor(x)


def torus_distance(a, b):
    """Distance on the unit circle: min(|d|, 1-|d|)."""
    d = np.abs(wrap_unit(a) - wrap_unit(b))
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trig polynomial  sum_i a_i cos(2pi(j_i t + k_i q)) + b_i sin(...).

    Terms are (j, k, a, b) with integer harmonics j (time) and k (position),
    so the polynomial is exactly 1-periodic in both arguments.
    """

    terms: tuple[tuple[int, int, float, float], ...] = ()
    max_harmonic: int = 8

    def __post_init__(self):
        for j, k, _, _ in self.terms:
            if abs(j) > self.max_harmonic or abs(k) > self.max_harmonic:
                raise ValueError(f"harmonic ({j},{k}) exceeds max {self.max_harmonic}")

    @staticmethod
    def from_coeffs(terms: Sequence[Sequence[float]]) -> "TrigPolynomial":
        out = tuple((int(j), int(k), float(a), float(b)) for j, k, a, b in terms)
        return TrigPolynomial(out)

    def deriv(self, t, q, nt: int = 0, nq: int = 0):
        """Evaluate the (nt, nq)-th mixed derivative at (t, q).

        Arguments are reduced mod 1 before phases are formed, which makes
        1-periodicity hold bitwise.
        """
        tm = wrap_unit(np.asarray(t, dtype=float))
        qm = wrap_unit(np.asarray(q, dtype=float))
        out = np.zeros(np.broadcast(tm, qm).shape)
        n = nt + nq
        for j, k, a, b in self.terms:
            fac = (TWO_PI ** n) * (j ** nt) * (k ** nq)
            aa, bb = a, b
            for _ in range(n):
                aa, bb = bb, -aa
            theta = TWO_PI * (j * tm + k * qm)
            out = out + fac * (aa * np.cos(theta) + bb * np.sin(theta))
        if out.ndim == 0:
            return float(out)
        return out

    def value(self, t, q):
        return self.deriv(t, q, 0, 0)

    def is_zero(self) -> bool:
        return all(a == 0.0 and b == 0.0 for _, _, a, b in self.terms)


class Family(enum.Enum):
    MECHANICAL = "mechanical"
    SHIFTED_QUADRATIC = "shifted_quadratic"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LagrangianFnValue:
    """Action density and the momentum achieving the convex conjugacy."""

    value: float
    optimal_momentum: float


@dataclass(frozen=True)
class TonelliHamiltonian:
    """Closed-form Hamiltonian family, 1-periodic in time and position.

    mechanical:        H = kinetic/2 * p^2 + V(t,q) + offset
    shifted_quadratic: H = (p - du/dq)^2 / 2 + drift*(p - du/dq) - du/dt + offset
                       with shift profile u(t,q); u then solves
                       du/dt + H(t, q, du/dq) = offset identically.
    custom:            user callable H(t,q,p), smooth in p, with a declared
                       momentum search box for the conjugacy.
    """

    family: Family = Family.MECHANICAL
    kinetic_coefficient: float = 1.0
    potential: TrigPolynomial = field(default_factory=TrigPolynomial)
    shift_profile: TrigPolynomial = field(default_factory=TrigPolynomial)
    drift: float = 0.0
    constant_offset: float = 0.0
    custom_fn: Callable[[float, float, float], float] | None = None
    momentum_box: tuple[float, float] = (-10.0, 10.0)

    def __post_init__(self):
        if self.kinetic_coefficient <= 0:
            raise ValueError("kinetic coefficient must be positive")
        if self.family is Family.CUSTOM and self.custom_fn is None:
            raise ValueError("custom family requires a callable")

    # -- closed-form pieces ------------------------------------------------

    def _shift_q(self, t, q):
        return self.shift_profile.deriv(t, q, 0, 1)

    def _shift_t(self, t, q):
        return self.shift_profile.deriv(t, q, 1, 0)

    def value(self, t, q, p):
        if self.family is Family.MECHANICAL:
            return (
                0.5 * self.kinetic_coefficient * np.asarray(p) ** 2
                + self.potential.value(t, q)
                + self.constant_offset
            )
        if self.family is Family.SHIFTED_QUADRATIC:
            r = np.asarray(p) - self._shift_q(t, q)
            return 0.5 * r**2 + self.drift * r - self._shift_t(t, q) + self.constant_offset
        return self.custom_fn(t, q, p)

    def dH_dp(self, t, q, p):
        if self.family is Family.MECHANICAL:
            return self.kinetic_coefficient * np.asarray(p)
        if self.family is Family.SHIFTED_QUADRATIC:
            return (np.asarray(p) - self._shift_q(t, q)) + self.drift
        e = 1e-6
        return (self.custom_fn(t, q, p + e) - self.custom_fn(t, q, p - e)) / (2 * e)

    def dH_dq(self, t, q, p):
        if self.family is Family.MECHANICAL:
            return self.potential.deriv(t, q, 0, 1) + 0.0 * np.asarray(p)
        if self.family is Family.SHIFTED_QUADRATIC:
            r = np.asarray(p) - self._shift_q(t, q)
            return -(r + self.drift) * self.shift_profile.deriv(t, q, 0, 2) - self.shift_profile.deriv(t, q, 1, 1)
        e = 1e-6
        return (self.custom_fn(t, q + e, p) - self.custom_fn(t, q - e, p)) / (2 * e)

    def dH_dt(self, t, q, p):
        if self.family is Family.MECHANICAL:
            return self.potential.deriv(t, q, 1, 0) + 0.0 * np.asarray(p)
        if self.family is Family.SHIFTED_QUADRATIC:
            r = np.asarray(p) - self._shift_q(t, q)
            return -(r + self.drift) * self.shift_profile.deriv(t, q, 1, 1) - self.shift_profile.deriv(t, q, 2, 0)
        e = 1e-6
        return (self.custom_fn(t + e, q, p) - self.custom_fn(t - e, q, p)) / (2 * e)

    def d2H_dpp(self, t, q, p, step: float = 1e-4):
        if self.family is Family.MECHANICAL:
            return self.kinetic_coefficient + 0.0 * np.asarray(p)
        if self.family is Family.SHIFTED_QUADRATIC:
            return 1.0 + 0.0 * np.asarray(p)
        return (
            self.custom_fn(t, q, p + step)
            - 2.0 * self.custom_fn(t, q, p)
            + self.custom_fn(t, q, p - step)
        ) / step**2


def eval_hamiltonian(h: TonelliHamiltonian, t: float, q: float, p: float) -> float:
    """Evaluate H(t, q, p); exactly 1-periodic in t and q."""
    return float(h.value(t, q, p))


def extended_hamiltonian(h: TonelliHamiltonian, tau: float, energy: float, q: float, p: float) -> float:
    """Autonomous extension E + H(tau, q, p) on the enlarged phase space."""
    return float(energy + h.value(tau, q, p))


def legendre_transform(h: TonelliHamiltonian, t: float, q: float, v: float) -> LagrangianFnValue:
    """Convex conjugate L(t,q,v) = sup_p (p v - H) with its maximizer.

    Closed form for the mechanical and shifted-quadratic families; bracketed
    golden-section search followed by a Newton polish for custom callables.
    """
    if h.family is Family.MECHANICAL:
        p_star = v / h.kinetic_coefficient
        val = v * v / (2.0 * h.kinetic_coefficient) - h.potential.value(t, q) - h.constant_offset
        return LagrangianFnValue(float(val), float(p_star))
    if h.family is Family.SHIFTED_QUADRATIC:
        w = h._shift_q(t, q)
        p_star = w + (v - h.drift)
        val = w * v + 0.5 * (v - h.drift) ** 2 + h._shift_t(t, q) - h.constant_offset
        return LagrangianFnValue(float(val), float(p_star))
    return _legendre_numeric(h, t, q, v)


def _legendre_numeric(h: TonelliHamiltonian, t, q, v, newton_budget: int = 50, tol: float = 1e-12):
    lo, hi = h.momentum_box
    g = lambda p: p * v - h.custom_fn(t, q, p)
    # golden-section bracketing of the concave objective
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    gc, gd = g(c), g(d)
    for _ in range(80):
        if b - a < 1e-8:
            break
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    p = 0.5 * (a + b)
    # Newton polish on g'(p) = v - dH/dp
    e = 1e-6
    converged = False
    for _ in range(newton_budget):
        g1 = v - h.dH_dp(t, q, p)
        g2 = -h.d2H_dpp(t, q, p, step=e)
        if g2 >= -1e-14:
            break
        step = -g1 / g2
        p_new = min(max(p + step, lo), hi)
        if abs(p_new - p) < tol:
            p = p_new
            converged = True
            break
        p = p_new
    if not converged and abs(v - h.dH_dp(t, q, p)) > 1e-6:
        raise MaximizerNotFound(f"Legendre maximizer did not converge at v={v}")
    return LagrangianFnValue(float(g(p)), float(p))


def fenchel_gap(h: TonelliHamiltonian, t: float, q: float, v: float, p: float) -> float:
    """H(t,q,p) + L(t,q,v) - p*v; nonnegative, zero iff p is conjugate to v."""
    lag = legendre_transform(h, t, q, v)
    return float(h.value(t, q, p) + lag.value - p * v)


@dataclass(frozen=True)
class SampleSpec:
    """Sampling plan for the Tonelli certificate: (t,q) grids and a momentum ladder."""

    t_samples: int = 8
    q_samples: int = 32
    momentum_base: float = 4.0
    ladder_size: int = 5
    fd_step: float = 1e-4


@dataclass(frozen=True)
class TonelliReport:
    min_second_derivative: float
    ladder: tuple[float, ...]
    min_ratio_increase: float
    superlinear: bool


def tonelli_report(h: TonelliHamiltonian, spec: SampleSpec = SampleSpec()) -> TonelliReport:
    """Sampled convexity and superlinearity certificate.

    Checks the fiberwise second derivative on a (t, q, p) grid and the growth
    of H/|p| along the doubling momentum ladder. Heuristic: a sampled check,
    not a proof of the Tonelli conditions.
    """
    ts = np.linspace(0.0, 1.0, spec.t_samples, endpoint=False)
    qs = np.linspace(0.0, 1.0, spec.q_samples, endpoint=False)
    ladder = tuple(spec.momentum_base * (2.0**i) for i in range(spec.ladder_size))
    p_probe = sorted({0.0, *(x for L in ladder for x in (L, -L))})

    min_dpp = math.inf
    for t in ts:
        for q in qs:
            for p in p_probe:
                d = float(np.min(h.d2H_dpp(t, q, p, step=spec.fd_step)))
                min_dpp = min(min_dpp, d)
    if min_dpp <= 0.0:
        raise ConvexityViolation(f"min sampled d2H/dp2 = {min_dpp}")

    min_increase = math.inf
    for t in ts:
        for q in qs:
            for sign in (+1.0, -1.0):
                ratios = [abs(h.value(t, q, sign * L)) / abs(L) for L in ladder]
                inc = min(r2 - r1 for r1, r2 in zip(ratios, ratios[1:]))
                min_increase = min(min_increase, inc)
    return TonelliReport(
        min_second_derivative=float(min_dpp),
        ladder=ladder,
        min_ratio_increase=float(min_increase),
        superlinear=bool(min_increase > 0.0),
    )


def mechanical(potential_terms: Sequence[Sequence[float]] = (), kinetic: float = 1.0, offset: float = 0.0) -> TonelliHamiltonian:
    """Convenience constructor for the mechanical family."""
    return TonelliHamiltonian(
        family=Family.MECHANICAL,
        kinetic_coefficient=kinetic,
        potential=TrigPolynomial.from_coeffs(potential_terms),
        constant_offset=offset,
    )


def shifted_quadratic(shift_terms: Sequence[Sequence[float]], drift: float = 0.0, offset: float = 0.0) -> TonelliHamiltonian:
    """Convenience constructor for the manufactured shifted-quadratic family."""
    return TonelliHamiltonian(
        family=Family.SHIFTED_QUADRATIC,
        shift_profile=TrigPolynomial.from_coeffs(shift_terms),
        drift=drift,
        constant_offset=offset,
    )


def free_hamiltonian() -> TonelliHamiltonian:
    return mechanical(())


def pendulum() -> TonelliHamiltonian:
    """H = p^2/2 + cos(2 pi q)."""
    return mechanical([(0, 1, 1.0, 0.0)])
