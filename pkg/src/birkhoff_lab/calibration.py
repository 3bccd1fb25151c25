"""Calibration defects, domination sweeps, and calibrated-curve extraction.

A candidate solution is a time-knotted stack of grid functions, linear in
time and cubic-periodic in space. Defects of flow trajectories reuse the
trajectory's stored Simpson action increments: along a Hamiltonian flow the
action integrand p qdot - H equals the convex conjugate evaluated on the
velocity, identically at every sample, so the defect quadrature telescopes
exactly across shared knots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainExceeded, KinkAtSeed
from .flow import FlowSettings, PhasePoint, Trajectory, trajectory
from .grids import GridFunction
from .hamiltonians import TonelliHamiltonian, wrap_unit
from .lax_oleinik import lagrangian_batch, lax_negative, potential

KINK_RATIO = 50.0
KINK_FLOOR = 1e-9


@dataclass(frozen=True)
class SpaceTimeFunction:
    """Knot-sampled scalar function on [t0, t1] x T^1 with its critical constant."""

    times: np.ndarray
    knots: np.ndarray  # shape (K, N)
    alpha0: float = 0.0
    continuity_budget: float = np.inf

    def __post_init__(self):
        ts = np.asarray(self.times, dtype=float)
        ks = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "knots", ks)
        if ks.ndim != 2 or len(ts) != ks.shape[0]:
            raise ValueError("knots must be (K, N) aligned with times")
        dt = np.diff(ts)
        if len(dt) and (np.any(dt <= 0) or np.max(dt) > 0.25 + 1e-12):
            raise ValueError("knot times must increase with spacing <= 0.25")
        if len(ks) > 1:
            jump = float(np.max(np.abs(np.diff(ks, axis=0))))
            if jump > self.continuity_budget:
                raise ValueError(f"knot jump {jump} exceeds continuity budget")
        splines = [GridFunction(row).periodic_spline() for row in ks]
        object.__setattr__(self, "_splines", splines)
        d2 = np.abs(np.roll(ks, -1, axis=1) - 2.0 * ks + np.roll(ks, 1, axis=1))
        med = np.median(d2, axis=1)
        scale = np.maximum(KINK_FLOOR * (1.0 + np.ptp(ks, axis=1)), KINK_RATIO * med)
        object.__setattr__(self, "_kinks", d2 > scale[:, None])

    @property
    def resolution(self) -> int:
        return self.knots.shape[1]

    def _interval(self, t: float) -> tuple[int, float]:
        ts = self.times
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise DomainExceeded(f"time {t} outside [{ts[0]}, {ts[-1]}]")
        j = int(np.searchsorted(ts, t, side="right") - 1)
        j = min(max(j, 0), len(ts) - 2) if len(ts) > 1 else 0
        if len(ts) == 1:
            return 0, 0.0
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        return j, float(np.clip(w, 0.0, 1.0))

    def eval(self, t: float, q) -> float | np.ndarray:
        j, w = self._interval(t)
        qw = wrap_unit(q)
        lo = self._splines[j](qw)
        if w == 0.0 or len(self.times) == 1:
            return lo
        return (1 - w) * lo + w * self._splines[j + 1](qw)

    def dq(self, t: float, q) -> float | np.ndarray:
        j, w = self._interval(t)
        qw = wrap_unit(q)
        lo = self._splines[j](qw, 1)
        if w == 0.0 or len(self.times) == 1:
            return lo
        return (1 - w) * lo + w * self._splines[j + 1](qw, 1)

    def dt(self, t: float, q) -> float | np.ndarray:
        if len(self.times) == 1:
            return 0.0 * np.asarray(q, dtype=float)
        j, _ = self._interval(t)
        step = self.times[j + 1] - self.times[j]
        qw = wrap_unit(q)
        return (self._splines[j + 1](qw) - self._splines[j](qw)) / step

    def kink_at(self, t: float, q: float) -> bool:
        """Second-difference kink detector near (t, q)."""
        j, w = self._interval(t)
        rows = [j] if (w == 0.0 or len(self.times) == 1) else [j, j + 1]
        n = self.resolution
        cell = int(np.floor(wrap_unit(q) * n))
        cells = [(cell + d) % n for d in (-1, 0, 1, 2)]
        return any(bool(self._kinks[r][c]) for r in rows for c in cells)


def spacetime_from_grid(u: GridFunction, t0: float, t1: float, alpha0: float = 0.0) -> SpaceTimeFunction:
    """Time-independent candidate built from a single grid function."""
    k = max(2, int(np.ceil((t1 - t0) / 0.25)) + 1)
    times = np.linspace(t0, t1, k)
    return SpaceTimeFunction(times, np.tile(u.values, (k, 1)), alpha0)


def spacetime_from_lax(
    h: TonelliHamiltonian,
    u0: GridFunction,
    t0: float,
    t1: float,
    alpha0: float,
    knot_step: float = 1.0 / 16.0,
    n: int | None = None,
    quad_nodes: int = 8,
) -> SpaceTimeFunction:
    """Viscosity-type evolution of u0 sampled on a uniform knot ladder."""
    n = n or u0.resolution
    k = int(round((t1 - t0) / knot_step))
    if abs(k * knot_step - (t1 - t0)) > 1e-9 or k < 1:
        raise ValueError("knot_step must divide the time span")
    times = t0 + knot_step * np.arange(k + 1)
    rows = [u0.values.copy()]
    cur = u0
    for j in range(k):
        pm = potential(h, float(times[j]), float(times[j + 1]), n, quad_nodes=quad_nodes)
        cur = lax_negative(cur, pm, alpha0)
        rows.append(cur.values.copy())
    return SpaceTimeFunction(times, np.array(rows), alpha0)


def calibration_defect(u: SpaceTimeFunction, traj: Trajectory, a: float, b: float) -> float:
    """Action of the trajectory between a and b, critically normalized, minus
    the increment of u; a and b must be trajectory knots inside both domains."""
    ts = traj.times
    ia = int(np.argmin(np.abs(ts - a)))
    ib = int(np.argmin(np.abs(ts - b)))
    if abs(ts[ia] - a) > 1e-9 or abs(ts[ib] - b) > 1e-9:
        raise DomainExceeded("defect endpoints must be trajectory knots")
    if ia > ib:
        ia, ib = ib, ia
        a, b = b, a
    action = float(np.sum(traj.action_increments[ia:ib]))
    action += u.alpha0 * (ts[ib] - ts[ia])
    ua = float(u.eval(a, traj.q_lift[ia]))
    ub = float(u.eval(b, traj.q_lift[ib]))
    return action - (ub - ua)


@dataclass(frozen=True)
class DominationReport:
    min_defect: float
    argmin: int
    count: int


def domination_check(
    u: SpaceTimeFunction,
    h: TonelliHamiltonian,
    count: int = 1000,
    seed: int = 0,
    degree: int = 4,
    amplitude: float = 0.5,
    quad_intervals: int = 64,
) -> DominationReport:
    """Minimum defect over random smooth test loops (indexed min, deterministic).

    Test curves are random trig polynomials in time of bounded degree and
    amplitude spanning the whole knot window; their action uses composite
    Simpson on an analytic sampling.
    """
    t0, t1 = float(u.times[0]), float(u.times[-1])
    span = t1 - t0
    rng = np.random.default_rng(seed)
    q0 = rng.uniform(0.0, 1.0, size=count)
    coef = rng.uniform(-1.0, 1.0, size=(count, degree, 2))
    norm = np.sum(np.abs(coef), axis=(1, 2))
    scale = amplitude * rng.uniform(0.2, 1.0, size=count) / np.maximum(norm, 1e-12)
    coef *= scale[:, None, None]

    m = quad_intervals
    taus = t0 + span * np.arange(m + 1) / m
    sigma = (taus - t0) / span
    d = np.arange(1, degree + 1)
    # half-period harmonics keep the endpoints moving (loops dominate trivially)
    ang = np.pi * d[None, :, None] * sigma[None, None, :]
    gamma = q0[:, None] + np.sum(
        coef[:, :, 0:1] * np.cos(ang) + coef[:, :, 1:2] * np.sin(ang), axis=1
    )
    dgamma = np.sum(
        (np.pi / span)
        * d[None, :, None]
        * (-coef[:, :, 0:1] * np.sin(ang) + coef[:, :, 1:2] * np.cos(ang)),
        axis=1,
    )

    w = np.ones(m + 1)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= span / (3.0 * m)
    lag = np.empty_like(gamma)
    for j, tau in enumerate(taus):
        lag[:, j] = lagrangian_batch(h, float(tau), gamma[:, j], dgamma[:, j])
    actions = lag @ w + u.alpha0 * span
    u_start = np.asarray(u.eval(t0, gamma[:, 0]))
    u_end = np.asarray(u.eval(t1, gamma[:, -1]))
    defects = actions - (u_end - u_start)
    k = int(np.argmin(defects))
    return DominationReport(float(defects[k]), k, count)


@dataclass(frozen=True)
class CalibratedCurveReport:
    curve: Trajectory
    max_momentum_residual: float
    max_hj_residual: float
    defect: float
    seed_t: float
    seed_q: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "defect": self.defect,
                "momentum_residual": self.max_momentum_residual,
                "hj_residual": self.max_hj_residual,
                "seed_t": self.seed_t,
                "seed_q": self.seed_q,
            },
            sort_keys=True,
            indent=2,
        )


def calibrated_curve(
    u: SpaceTimeFunction,
    h: TonelliHamiltonian,
    t0: float,
    q0: float,
    horizon: float,
    settings: FlowSettings = FlowSettings(),
) -> CalibratedCurveReport:
    """Shoot the flow from the graph of dq u and measure the weak-KAM identities.

    The seed momentum is the cubic-interpolant derivative at (t0, q0); seeding
    at detector kinks is refused since no derivative can be trusted there.
    """
    if u.kink_at(t0, q0):
        raise KinkAtSeed(f"candidate solution is kinked near (t={t0}, q={q0})")
    p0 = float(u.dq(t0, q0))
    traj = trajectory(h, PhasePoint(q0, p0), t0, t0 + horizon, settings)
    dqu = np.array([u.dq(float(tt), qq) for tt, qq in zip(traj.times, traj.q)], dtype=float)
    mom_res = float(np.max(np.abs(dqu - traj.p)))
    hvals = np.array(
        [h.value(float(tt), float(qq), float(pp)) for tt, qq, pp in zip(traj.times, traj.q, dqu)]
    )
    dtu = np.array([u.dt(float(tt), qq) for tt, qq in zip(traj.times, traj.q)], dtype=float)
    hj_res = float(np.max(np.abs(dtu + hvals - u.alpha0)))
    defect = calibration_defect(u, traj, float(traj.times[0]), float(traj.times[-1]))
    return CalibratedCurveReport(
        curve=traj,
        max_momentum_residual=mom_res,
        max_hj_residual=hj_res,
        defect=defect,
        seed_t=t0,
        seed_q=float(wrap_unit(q0)),
    )


@dataclass(frozen=True)
class AprioriBoundReport:
    max_speed: float
    chain_count: int


def apriori_bound_report(chains, min_duration: int = 1) -> AprioriBoundReport:
    """Largest per-period speed over backtracked minimizer chains.

    Chains shorter than min_duration periods are skipped; refinement plateaus
    are checked by the caller against a doubled endpoint sweep.
    """
    speeds = [c.max_speed for c in chains if len(c.indices) - 1 >= min_duration]
    if not speeds:
        return AprioriBoundReport(0.0, 0)
    return AprioriBoundReport(float(max(speeds)), len(speeds))
