"""Exact Lagrangian curves in T*T^1 as closed polylines with primitives.

Curves store the unwrapped position lift alongside the wrapped coordinate so
winding and fold detection are exact. Evolution flows nodes individually,
advances primitives by the per-node action integral, and resamples by
bisecting in the initial-condition parameter and re-flowing (never by
interpolating in phase space at the final time).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyInput,
    MissingPrimitive,
    NotAGraph,
    ResamplingBudgetExceeded,
    TangencyDetected,
    TooFewSamples,
    WindingMismatch,
)
from .flow import FlowSettings, PhasePoint, integrate_batch
from .grids import GridFunction
from .hamiltonians import TonelliHamiltonian, wrap_unit

MIN_NODES = 16


@dataclass(frozen=True)
class LagrangianCurve:
    """Closed polyline (q_lift, p) with optional primitive and base winding."""

    q_lift: np.ndarray
    p: np.ndarray
    primitive: np.ndarray | None = None
    winding: int = 1

    def __post_init__(self):
        ql = np.asarray(self.q_lift, dtype=float)
        pp = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "q_lift", ql)
        object.__setattr__(self, "p", pp)
        if len(ql) < MIN_NODES:
            raise TooFewSamples(f"curve needs >= {MIN_NODES} nodes, got {len(ql)}")
        if len(ql) != len(pp):
            raise ValueError("q and p lengths differ")
        if self.primitive is not None:
            h = np.asarray(self.primitive, dtype=float)
            object.__setattr__(self, "primitive", h)
            if len(h) != len(ql):
                raise ValueError("primitive length differs from node count")

    @property
    def n_nodes(self) -> int:
        return len(self.q_lift)

    @property
    def q(self) -> np.ndarray:
        return wrap_unit(self.q_lift)

    @property
    def nodes(self) -> list[PhasePoint]:
        return [PhasePoint(qi, pi) for qi, pi in zip(self.q, self.p)]

    def closed_lift(self) -> np.ndarray:
        """Lift with the first node repeated one winding up (length n+1)."""
        return np.append(self.q_lift, self.q_lift[0] + self.winding)

    def closed_p(self) -> np.ndarray:
        return np.append(self.p, self.p[0])

    def length(self) -> float:
        dl = np.diff(self.closed_lift())
        dp = np.diff(self.closed_p())
        return float(np.sum(np.hypot(dl, dp)))


@dataclass(frozen=True)
class FoldReport:
    is_graph: bool
    fold_parameters: tuple[int, ...]
    min_projection_jacobian: float


def loop_integral(curve: LagrangianCurve) -> float:
    """Trapezoidal circulation of p dq around the closed polyline."""
    dl = np.diff(curve.closed_lift())
    pc = curve.closed_p()
    return float(np.sum(0.5 * (pc[:-1] + pc[1:]) * dl))


def exactness_defects(curve: LagrangianCurve) -> np.ndarray:
    """Per-segment residuals of the discrete identity dh = p dq (trapezoid)."""
    if curve.primitive is None:
        raise MissingPrimitive("curve carries no primitive")
    dl = np.diff(curve.closed_lift())
    pc = curve.closed_p()
    hc = np.append(curve.primitive, curve.primitive[0])
    return (hc[1:] - hc[:-1]) - 0.5 * (pc[:-1] + pc[1:]) * dl


def oscillation(values: Sequence[float]) -> float:
    """max - min of a nonempty sequence."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise EmptyInput("oscillation of an empty sequence")
    return float(np.max(arr) - np.min(arr))


def from_potential(u: GridFunction, derivative: str = "spectral") -> LagrangianCurve:
    """Graph of du with primitive u sampled on the grid of u.

    Uses trigonometric-interpolation differentiation by default (exact for
    trig polynomials below Nyquist); central differences are more robust for
    kinked inputs.
    """
    if u.dim != 1:
        raise ValueError("from_potential needs a 1-D grid function")
    if u.resolution < MIN_NODES:
        raise TooFewSamples(f"need >= {MIN_NODES} samples, got {u.resolution}")
    if derivative == "spectral":
        du = u.spectral_derivative()
    elif derivative == "central":
        du = u.central_derivative()
    else:
        raise ValueError(f"unknown derivative rule {derivative!r}")
    return LagrangianCurve(q_lift=u.nodes.copy(), p=du, primitive=u.values.copy(), winding=1)


def graph_check(curve: LagrangianCurve) -> FoldReport:
    """Scan forward differences of the lift for direction reversals."""
    if curve.winding != 1:
        raise WindingMismatch(f"winding {curve.winding} != 1")
    diffs = np.diff(curve.closed_lift())
    min_jac = float(np.min(diffs))
    signs = np.sign(diffs)
    prev = np.roll(signs, 1)
    folds = tuple(int(i) for i in np.nonzero((signs * prev <= 0) | (signs == 0))[0])
    return FoldReport(is_graph=(min_jac > 0), fold_parameters=folds, min_projection_jacobian=min_jac)


def invert(curve: LagrangianCurve) -> LagrangianCurve:
    """Fiberwise momentum flip; the primitive changes sign with the 1-form."""
    h = None if curve.primitive is None else -curve.primitive
    return LagrangianCurve(curve.q_lift.copy(), -curve.p, h, curve.winding)


def _graph_samples(curve: LagrangianCurve, grid: np.ndarray):
    """Sample p (and h) of a graph curve at given base points by linear interpolation."""
    lift = curve.closed_lift()
    base = np.floor(lift[0])
    x = lift - base
    xs = np.concatenate([x - 1.0, x, x + 1.0])
    p = curve.closed_p()
    ps = np.concatenate([p, p, p])
    out_p = np.interp(grid, xs, ps)
    if curve.primitive is not None:
        h = np.append(curve.primitive, curve.primitive[0])
        # the closing node repeats the first primitive value up to the loop
        # integral, which vanishes for exact curves
        hs = np.concatenate([h, h, h])
        out_h = np.interp(grid, xs, hs)
    else:
        out_h = None
    return out_p, out_h


def fibred_sum(a: LagrangianCurve, b: LagrangianCurve) -> LagrangianCurve:
    """Pointwise momentum sum of two graph curves over a common base grid."""
    for c in (a, b):
        if not graph_check(c).is_graph:
            raise NotAGraph("fibred sum needs fold-free curves")
    n = max(a.n_nodes, b.n_nodes)
    grid = np.arange(n) / n
    pa, ha = _graph_samples(a, grid)
    pb, hb = _graph_samples(b, grid)
    if a.primitive is not None and b.primitive is not None:
        h = ha + hb
    else:
        h = None
    return LagrangianCurve(q_lift=grid, p=pa + pb, primitive=h, winding=1)


def reduced_complexity_gauge(curve: LagrangianCurve, limit_potential: GridFunction) -> float:
    """Oscillation of the transported primitive against the limit potential.

    For a limit Lagrangian that is the graph of du, the fiber shear by du is
    the Hamiltonian map carrying it to the zero section, and the transported
    primitive of the curve is node-wise h - u(q); its oscillation is the
    convergence gauge, independent of either additive constant.
    """
    if curve.primitive is None:
        raise MissingPrimitive("gauge needs a primitive")
    u_at_nodes = limit_potential.eval(curve.q)
    return oscillation(curve.primitive - u_at_nodes)


# ---------------------------------------------------------------------------
# evolution


def _initial_state(curve: LagrangianCurve, thetas: np.ndarray):
    """Piecewise-linear state of the initial polyline at parameters in [0,1).

    Primitives are extended trapezoid-consistently along each segment.
    """
    n = curve.n_nodes
    lift = curve.closed_lift()
    p = curve.closed_p()
    x = np.asarray(thetas) * n
    j = np.minimum(x.astype(int), n - 1)
    frac = x - j
    l0, l1 = lift[j], lift[j + 1]
    p0, p1 = p[j], p[j + 1]
    li = l0 + frac * (l1 - l0)
    pi = p0 + frac * (p1 - p0)
    hi = None
    if curve.primitive is not None:
        h = curve.primitive
        hi = h[j % n] + 0.5 * (p0 + pi) * (li - l0)
    return li, pi, hi


def _phase_gaps(lift: np.ndarray, p: np.ndarray, winding: int) -> np.ndarray:
    dl = np.diff(np.append(lift, lift[0] + winding))
    dp = np.diff(np.append(p, p[0]))
    return np.hypot(dl, dp)


def evolve(
    h: TonelliHamiltonian,
    curve: LagrangianCurve,
    s: float,
    t: float,
    settings: FlowSettings = FlowSettings(),
    spacing: float = 0.02,
    node_cap: int = 2**16,
    return_thetas: bool = False,
):
    """Flow the curve from time s to t, transporting the primitive.

    Each node follows the Hamiltonian flow and its primitive value advances by
    the Simpson action integral along its own trajectory. Adjacent nodes whose
    phase-space gap exceeds `spacing` trigger midpoint insertion: the midpoint
    is taken on the *initial* curve (parameter bisection) and re-flowed, which
    keeps inserted nodes on the evolved invariant curve under stretching.
    Gaps below spacing/3 are coarsened away.
    """
    if curve.primitive is None:
        raise MissingPrimitive("evolve transports primitives; curve has none")

    thetas = np.arange(curve.n_nodes) / curve.n_nodes
    lift0, p0, h0 = curve.q_lift.copy(), curve.p.copy(), curve.primitive.copy()
    lift_t, p_t, act = integrate_batch(h, lift0, p0, s, t, settings)
    h_t = h0 + act

    for _round in range(64):
        gaps = _phase_gaps(lift_t, p_t, curve.winding)
        need = np.nonzero(gaps > spacing)[0]
        if len(need) == 0:
            break
        if len(thetas) + len(need) > node_cap:
            raise ResamplingBudgetExceeded(
                f"resampling wants {len(thetas) + len(need)} nodes (cap {node_cap})"
            )
        theta_hi = np.append(thetas, thetas[0] + 1.0)
        mid_thetas = 0.5 * (thetas[need] + theta_hi[need + 1])
        li, pi, hi = _initial_state(curve, wrap_unit(mid_thetas))
        li = li + np.floor(mid_thetas) * curve.winding
        lm, pm, am = integrate_batch(h, li, pi, s, t, settings)
        hm = hi + am
        order = np.argsort(np.concatenate([thetas, mid_thetas]), kind="stable")
        thetas = np.concatenate([thetas, mid_thetas])[order]
        lift_t = np.concatenate([lift_t, lm])[order]
        p_t = np.concatenate([p_t, pm])[order]
        h_t = np.concatenate([h_t, hm])[order]
    else:
        raise ResamplingBudgetExceeded("refinement did not settle in 64 rounds")

    # coarsen: drop node i when both adjacent gaps are under spacing/3 and the
    # merged gap stays within spacing (sequential scan, deterministic)
    n = len(thetas)
    if n > MIN_NODES:
        keep = [0]
        kept = n
        for i in range(1, n):
            prev = keep[-1]
            nxt = (i + 1) % n
            lift_nxt = lift_t[nxt] + (curve.winding if nxt == 0 else 0.0)
            gap_prev = np.hypot(lift_t[i] - lift_t[prev], p_t[i] - p_t[prev])
            gap_next = np.hypot(lift_nxt - lift_t[i], p_t[nxt] - p_t[i])
            gap_join = np.hypot(lift_nxt - lift_t[prev], p_t[nxt] - p_t[prev])
            if (
                kept > MIN_NODES
                and gap_prev < spacing / 3
                and gap_next < spacing / 3
                and gap_join <= spacing
            ):
                kept -= 1
                continue
            keep.append(i)
        if len(keep) < n:
            idx = np.array(keep)
            thetas, lift_t, p_t, h_t = thetas[idx], lift_t[idx], p_t[idx], h_t[idx]

    shift = np.floor(lift_t[0])
    out = LagrangianCurve(lift_t - shift, p_t, h_t, curve.winding)
    tol = 1e-6 * max(1.0, out.length()) * (1.0 + float(np.max(np.abs(out.p))))
    if abs(loop_integral(out)) > 50 * tol:
        raise ValueError("exactness lost during evolution; refine spacing or steps")
    if return_thetas:
        return out, wrap_unit(thetas)
    return out


# ---------------------------------------------------------------------------
# Hausdorff distance


def _point_segment_sq(dx1, dy1, dx2, dy2):
    """Squared distance from the origin to segments (dx1,dy1)-(dx2,dy2)."""
    ex, ey = dx2 - dx1, dy2 - dy1
    ee = ex * ex + ey * ey
    tt = np.where(ee > 0, -(dx1 * ex + dy1 * ey) / np.where(ee > 0, ee, 1.0), 0.0)
    tt = np.clip(tt, 0.0, 1.0)
    px, py = dx1 + tt * ex, dy1 + tt * ey
    return px * px + py * py


def points_to_curve_distance(q: np.ndarray, p: np.ndarray, b: LagrangianCurve, chunk: int = 512) -> np.ndarray:
    """Exact distances from phase points to the closed polyline b.

    Each segment of b is unwrapped into the chart of the query point (with
    the two adjacent winding images) before the point-segment projection.
    """
    lb = b.closed_lift()
    pb = b.closed_p()
    l1, l2 = lb[:-1], lb[1:]
    p1, p2 = pb[:-1], pb[1:]
    mid = 0.5 * (l1 + l2)
    qa = wrap_unit(np.asarray(q, dtype=float))
    pa = np.asarray(p, dtype=float)
    out = np.empty(len(qa))
    for i0 in range(0, len(qa), chunk):
        qs = qa[i0 : i0 + chunk, None]
        ps = pa[i0 : i0 + chunk, None]
        w = np.round(mid[None, :] - qs)
        best = np.full(qs.shape[0], np.inf)
        for dw in (-1.0, 0.0, 1.0):
            sh = w + dw
            d2 = _point_segment_sq(l1[None, :] - sh - qs, p1[None, :] - ps, l2[None, :] - sh - qs, p2[None, :] - ps)
            best = np.minimum(best, d2.min(axis=1))
        out[i0 : i0 + chunk] = best
    return np.sqrt(out)


def _directed_hausdorff(a: LagrangianCurve, b: LagrangianCurve) -> float:
    return float(np.max(points_to_curve_distance(a.q, a.p, b)))


def hausdorff_distance(a: LagrangianCurve, b: LagrangianCurve) -> float:
    """Symmetric Hausdorff distance between closed polylines.

    Node-to-segment distances are exact in the locally unwrapped chart
    (torus metric in q, Euclidean in p).
    """
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


# ---------------------------------------------------------------------------
# intersections


def intersection_action_gap(a: LagrangianCurve, b: LagrangianCurve) -> list[float]:
    """Primitive differences h_a - h_b at transverse intersections of a and b.

    Coincident nodes count as intersections; genuinely crossing segment pairs
    meeting at an angle below 1e-6 raise TangencyDetected. Intersections
    closer than 1e-9 in parameter are merged.
    """
    if a.primitive is None or b.primitive is None:
        raise MissingPrimitive("action gaps need primitives on both curves")

    la, pa = a.closed_lift(), a.closed_p()
    ha = np.append(a.primitive, a.primitive[0])
    lb, pb = b.closed_lift(), b.closed_p()
    hb = np.append(b.primitive, b.primitive[0])

    hits: list[tuple[float, float]] = []  # (theta along a, gap)

    # coincident-node pass
    qb_sorted = np.sort(wrap_unit(b.q_lift))
    sort_idx = np.argsort(wrap_unit(b.q_lift), kind="stable")
    qa_wrapped = a.q
    for i in range(a.n_nodes):
        pos = np.searchsorted(qb_sorted, qa_wrapped[i])
        for k in (pos - 1, pos, pos + 1):
            j = sort_idx[k % b.n_nodes]
            dq = abs(wrap_unit(qa_wrapped[i] - wrap_unit(b.q_lift[j]) + 0.5) - 0.5)
            if dq < 1e-12 and abs(a.p[i] - b.p[j]) < 1e-12:
                hits.append((i / a.n_nodes, float(a.primitive[i] - b.primitive[j])))
                break

    # transverse segment pass
    mid_b = 0.5 * (lb[:-1] + lb[1:])
    for i in range(a.n_nodes):
        ax1, ay1 = la[i], pa[i]
        ax2, ay2 = la[i + 1], pa[i + 1]
        ex_a, ey_a = ax2 - ax1, ay2 - ay1
        len_a = np.hypot(ex_a, ey_a)
        shifts = np.round(mid_b - 0.5 * (ax1 + ax2))
        for dw in (-1.0, 0.0, 1.0):
            bx1 = lb[:-1] - shifts - dw
            bx2 = lb[1:] - shifts - dw
            ex_b, ey_b = bx2 - bx1, pb[1:] - pb[:-1]
            denom = ex_a * ey_b - ey_a * ex_b
            rx, ry = bx1 - ax1, pb[:-1] - ay1
            with np.errstate(divide="ignore", invalid="ignore"):
                s_par = (rx * ey_b - ry * ex_b) / denom
                t_par = (rx * ey_a - ry * ex_a) / denom
            ok = (
                np.isfinite(s_par)
                & np.isfinite(t_par)
                & (s_par >= -1e-9)
                & (s_par <= 1 + 1e-9)
                & (t_par >= -1e-9)
                & (t_par <= 1 + 1e-9)
            )
            for j in np.nonzero(ok)[0]:
                len_b = np.hypot(ex_b[j], ey_b[j])
                if len_a == 0 or len_b == 0:
                    continue
                sin_angle = abs(denom[j]) / (len_a * len_b)
                if sin_angle < 1e-6:
                    # coincident overlap handled by the node pass; a genuine
                    # shallow crossing is unreliable
                    if _points_off_line(bx1[j], pb[j], ex_b[j], ey_b[j], ax1, ay1, ax2, ay2):
                        raise TangencyDetected(
                            f"intersection angle {sin_angle:.2e} below 1e-6"
                        )
                    continue
                sv, tv = float(s_par[j]), float(t_par[j])
                gap = (ha[i] + sv * (ha[i + 1] - ha[i])) - (hb[j] + tv * (hb[j + 1] - hb[j]))
                hits.append(((i + sv) / a.n_nodes, float(gap)))

    hits.sort()
    merged: list[tuple[float, float]] = []
    for theta, gap in hits:
        if merged and abs(theta - merged[-1][0]) < 1e-9:
            continue
        merged.append((theta, gap))
    # the parameter is cyclic: drop a duplicate at theta ~ 1 vs ~ 0
    if len(merged) > 1 and (merged[0][0] + 1.0) - merged[-1][0] < 1e-9:
        merged.pop()
    return sorted(gap for _, gap in merged)


def _points_off_line(bx, by, ex, ey, ax1, ay1, ax2, ay2) -> bool:
    """True if segment a's endpoints do not lie on the line through b."""
    nb = np.hypot(ex, ey)
    if nb == 0:
        return False
    d1 = abs((ax1 - bx) * ey - (ay1 - by) * ex) / nb
    d2 = abs((ax2 - bx) * ey - (ay2 - by) * ex) / nb
    return max(d1, d2) > 1e-9


# ---------------------------------------------------------------------------
# serialization


def curve_to_csv(curve: LagrangianCurve, path) -> None:
    """Write `index,q,p,h` rows (h blank when absent)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,q,p,h\n")
        hvals = curve.primitive
        for i in range(curve.n_nodes):
            h = "" if hvals is None else repr(float(hvals[i]))
            fh.write(f"{i},{float(curve.q[i])!r},{float(curve.p[i])!r},{h}\n")


def curve_from_csv(path) -> LagrangianCurve:
    qs: list[float] = []
    ps: list[float] = []
    hs: list[float] = []
    has_h = True
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "index,q,p,h":
            raise ValueError(f"unexpected curve CSV header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            _, q, p, h = line.split(",")
            qs.append(float(q))
            ps.append(float(p))
            if h == "":
                has_h = False
            else:
                hs.append(float(h))
    lift = _lift_from_wrapped(np.array(qs))
    return LagrangianCurve(lift, np.array(ps), np.array(hs) if has_h else None, winding=1)


def _lift_from_wrapped(q: np.ndarray) -> np.ndarray:
    """Continuous lift of wrapped samples, assuming steps shorter than 1/2."""
    dq = np.diff(q)
    jumps = np.round(dq)
    lift = np.concatenate([[q[0]], q[0] + np.cumsum(dq - jumps)])
    return lift
