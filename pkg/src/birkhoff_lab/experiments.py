"""Experiment pipelines: curve iteration, value recurrence, invariance checks.

The iteration pipeline flows an initial exact graph over integer times in
both directions, scores every iterate against a candidate limit (Hausdorff
distance and primitive-oscillation gauge), and runs the recurrence detector:
a direction counts as convergent when enough scored iterates dip under both
thresholds along a subsequence with nondecreasing gaps. Only a bidirectional
detection licenses asserting the graph property of every iterate; a fold
without bidirectional detection is the consistent (contrapositive) outcome.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .calibration import SpaceTimeFunction, spacetime_from_lax
from .curves import (
    LagrangianCurve,
    evolve,
    points_to_curve_distance,
    from_potential,
    graph_check,
    hausdorff_distance,
    oscillation,
    reduced_complexity_gauge,
)
from .errors import FixedPointNotReached, ResamplingBudgetExceeded
from .flow import FlowSettings
from .grids import GridFunction, grid_from_trig
from .hamiltonians import (
    TonelliHamiltonian,
    TrigPolynomial,
    mechanical,
    shifted_quadratic,
)
from .lax_oleinik import lax_negative, lax_positive, mane_critical_value, potential


@dataclass(frozen=True)
class ExperimentConfig:
    hamiltonian: TonelliHamiltonian
    initial_potential: TrigPolynomial
    limit_potential: TrigPolynomial | None = None
    n_max: int = 8
    m_max: int = 8
    resolution: int = 256
    initial_nodes: int = 1024
    spacing: float = 2e-3
    hausdorff_tol: float = 1e-4
    gauge_tol: float = 1e-4
    window: int = 4
    seed: int = 0
    outdir: str = "out"
    flow_settings: FlowSettings = field(default_factory=FlowSettings)
    alpha0: float | None = None  # None: estimate from the value iteration
    quad_nodes: int = 8  # sub-quadrature nodes per single-step potential
    max_span: float = 0.25  # single-step span of the action potential

    def __post_init__(self):
        if self.n_max < 1 or self.m_max < 1:
            raise ValueError("iterate counts must be >= 1")
        if min(self.hausdorff_tol, self.gauge_tol) <= 0:
            raise ValueError("detector thresholds must be positive")


@dataclass(frozen=True)
class DiagnosticsRecord:
    n: int
    hausdorff_to_candidate: float
    gauge: float
    is_graph: bool
    fold_count: int
    node_count: int
    primitive_osc: float


@dataclass
class DetectorResult:
    hits: list[int]
    fired: bool


@dataclass
class ReportBundle:
    kind: str
    verdict: str
    reason: str
    records: list[DiagnosticsRecord] = field(default_factory=list)
    witness: int | None = None
    detectors: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)  # n -> LagrangianCurve
    events: list[str] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)
    seed: int = 0


# ---------------------------------------------------------------------------
# config files (INI, utf-8, '#' comments)

_DEFAULT_INI = """
[hamiltonian]
family = shifted_quadratic
kinetic = 1.0
potential_coeffs =
shift_coeffs = 1 1 0.0 0.05
drift = 0.3
offset = 0.0

[experiment]
initial_potential_coeffs = 0 1 0.0 0.05
n_max = 8
m_max = 8
resolution = 256
initial_nodes = 1024
spacing = 2e-3
hausdorff_tol = 1e-4
gauge_tol = 1e-4
window = 4
seed = 0

[flow]
macro_step = 1e-2
integrator = auto
substeps_per_macro = 4

[output]
outdir = out
"""


def parse_trig_coeffs(text: str) -> TrigPolynomial:
    """Parse ';'-separated 'j k a b' terms into a trig polynomial."""
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.replace(",", " ").split()
        if len(parts) != 4:
            raise ValueError(f"coefficient term {chunk!r} is not 'j k a b'")
        j, k, a, b = parts
        terms.append((int(j), int(k), float(a), float(b)))
    return TrigPolynomial.from_coeffs(terms)


def hamiltonian_from_config(cp: configparser.ConfigParser) -> TonelliHamiltonian:
    sec = cp["hamiltonian"]
    family = sec.get("family", "mechanical").strip().lower()
    kinetic = sec.getfloat("kinetic", 1.0)
    offset = sec.getfloat("offset", 0.0)
    if family == "mechanical":
        return mechanical(
            parse_trig_coeffs(sec.get("potential_coeffs", "")).terms,
            kinetic=kinetic,
            offset=offset,
        )
    if family == "shifted_quadratic":
        return shifted_quadratic(
            parse_trig_coeffs(sec.get("shift_coeffs", "")).terms,
            drift=sec.getfloat("drift", 0.0),
            offset=offset,
        )
    raise ValueError(f"config cannot declare family {family!r} (custom is API-only)")


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    cp.read_string(_DEFAULT_INI)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    exp = cp["experiment"]
    flow = cp["flow"]
    limit_text = exp.get("limit_potential_coeffs", "").strip()
    return ExperimentConfig(
        hamiltonian=hamiltonian_from_config(cp),
        initial_potential=parse_trig_coeffs(exp.get("initial_potential_coeffs", "")),
        limit_potential=parse_trig_coeffs(limit_text) if limit_text else None,
        n_max=exp.getint("n_max", 8),
        m_max=exp.getint("m_max", 8),
        resolution=exp.getint("resolution", 256),
        initial_nodes=exp.getint("initial_nodes", 1024),
        spacing=exp.getfloat("spacing", 2e-3),
        hausdorff_tol=exp.getfloat("hausdorff_tol", 1e-4),
        gauge_tol=exp.getfloat("gauge_tol", 1e-4),
        window=exp.getint("window", 4),
        seed=exp.getint("seed", 0),
        outdir=cp["output"].get("outdir", "out"),
        quad_nodes=exp.getint("quad_nodes", 8),
        max_span=exp.getfloat("max_span", 0.25),
        flow_settings=FlowSettings(
            macro_step=flow.getfloat("macro_step", 1e-2),
            integrator=flow.get("integrator", "auto").strip(),
            substeps_per_macro=flow.getint("substeps_per_macro", 4),
        ),
        alpha0=exp.getfloat("alpha0") if exp.get("alpha0", "").strip() else None,
    )


def config_echo(config: ExperimentConfig) -> dict:
    h = config.hamiltonian
    return {
        "family": h.family.value,
        "kinetic": h.kinetic_coefficient,
        "potential_coeffs": list(h.potential.terms),
        "shift_coeffs": list(h.shift_profile.terms),
        "drift": h.drift,
        "offset": h.constant_offset,
        "initial_potential_coeffs": list(config.initial_potential.terms),
        "limit_potential_coeffs": list(config.limit_potential.terms)
        if config.limit_potential
        else None,
        "n_max": config.n_max,
        "m_max": config.m_max,
        "resolution": config.resolution,
        "initial_nodes": config.initial_nodes,
        "spacing": config.spacing,
        "hausdorff_tol": config.hausdorff_tol,
        "gauge_tol": config.gauge_tol,
        "window": config.window,
        "seed": config.seed,
        "quad_nodes": config.quad_nodes,
        "max_span": config.max_span,
        "macro_step": config.flow_settings.macro_step,
        "integrator": config.flow_settings.integrator,
        "substeps_per_macro": config.flow_settings.substeps_per_macro,
    }


# ---------------------------------------------------------------------------
# detector

def longest_nondecreasing_gap_run(hits: list[int]) -> int:
    """Length of the longest subsequence whose consecutive gaps never shrink."""
    h = sorted(hits)
    m = len(h)
    if m <= 2:
        return m
    best = 2
    memo = {}

    def extend(i, j):  # longest run ending with (h[i], h[j])
        key = (i, j)
        if key in memo:
            return memo[key]
        gap = h[j] - h[i]
        out = 2
        for k in range(i):
            if h[i] - h[k] <= gap:
                out = max(out, extend(k, i) + 1)
        memo[key] = out
        return out

    for j in range(m):
        for i in range(j):
            best = max(best, extend(i, j))
    return best


def run_detector(records: list[DiagnosticsRecord], config: ExperimentConfig) -> DetectorResult:
    hits = [
        abs(r.n)
        for r in records
        if r.hausdorff_to_candidate < config.hausdorff_tol and r.gauge < config.gauge_tol
    ]
    fired = longest_nondecreasing_gap_run(hits) >= config.window
    return DetectorResult(hits=sorted(hits), fired=fired)


# ---------------------------------------------------------------------------
# pipelines

def _initial_objects(config: ExperimentConfig):
    v_grid = grid_from_trig(config.initial_potential, config.initial_nodes)
    limit_poly = config.limit_potential or config.initial_potential
    u_lim = grid_from_trig(limit_poly, config.initial_nodes)
    l0 = from_potential(v_grid)
    candidate = from_potential(u_lim)
    return v_grid, u_lim, l0, candidate


def _diagnose(n: int, curve: LagrangianCurve, candidate: LagrangianCurve, u_lim: GridFunction) -> DiagnosticsRecord:
    fr = graph_check(curve)
    return DiagnosticsRecord(
        n=n,
        hausdorff_to_candidate=hausdorff_distance(curve, candidate),
        gauge=reduced_complexity_gauge(curve, u_lim),
        is_graph=fr.is_graph,
        fold_count=len(fr.fold_parameters),
        node_count=curve.n_nodes,
        primitive_osc=oscillation(curve.primitive),
    )


def run_iteration_experiment(config: ExperimentConfig) -> ReportBundle:
    """Theorem-style pipeline over curve iterates in both time directions."""
    _, u_lim, l0, candidate = _initial_objects(config)
    bundle = ReportBundle(
        kind="iteration",
        verdict="NO_DATA",
        reason="",
        config_echo=config_echo(config),
        seed=config.seed,
    )
    bundle.curves[0] = l0
    l0_graph = graph_check(l0).is_graph

    directions = {}
    for label, count, step in (("forward", config.n_max, +1), ("backward", config.m_max, -1)):
        cur = l0
        recs: list[DiagnosticsRecord] = []
        for i in range(count):
            s, t = step * i, step * (i + 1)
            try:
                cur = evolve(
                    config.hamiltonian, cur, float(s), float(t),
                    config.flow_settings, spacing=config.spacing,
                )
            except ResamplingBudgetExceeded as exc:
                bundle.events.append(f"{label} iterate {t}: stretching blow-up ({exc})")
                break
            rec = _diagnose(t, cur, candidate, u_lim)
            recs.append(rec)
            bundle.curves[t] = cur
        directions[label] = recs
        bundle.records.extend(recs)

    bundle.records.sort(key=lambda r: r.n)
    det_f = run_detector(directions["forward"], config)
    det_b = run_detector(directions["backward"], config)
    bundle.detectors = {
        "forward": {"hits": det_f.hits, "fired": det_f.fired},
        "backward": {"hits": det_b.hits, "fired": det_b.fired},
    }
    bundle.series["hausdorff"] = [(r.n, r.hausdorff_to_candidate) for r in bundle.records]
    bundle.series["gauge"] = [(r.n, r.gauge) for r in bundle.records]

    non_graph = [r.n for r in bundle.records if not r.is_graph]
    if not l0_graph:
        non_graph.insert(0, 0)
    if det_f.fired and det_b.fired:
        if not non_graph:
            bundle.verdict, bundle.reason = "PASS", (
                "bidirectional reduced-complexity convergence detected; "
                "every iterate is a graph over the zero section"
            )
        else:
            bundle.verdict, bundle.reason = "FAIL", (
                f"bidirectional convergence detected but iterate {non_graph[0]} is not a graph"
            )
            bundle.witness = non_graph[0]
    elif non_graph:
        bundle.verdict, bundle.reason = "PASS", (
            f"non-graph iterate {non_graph[0]} occurred without bidirectional "
            "convergence (contrapositive)"
        )
        bundle.witness = non_graph[0]
    elif det_f.fired or det_b.fired:
        bundle.verdict, bundle.reason = "INCONCLUSIVE", (
            "one-directional convergence only (Question 2 regime)"
        )
    else:
        bundle.verdict, bundle.reason = "INCONCLUSIVE", (
            "no convergent subsequence detected in either direction"
        )
    return bundle


def grid_kink_mask(values: np.ndarray) -> np.ndarray:
    """Second-difference kink cells (shares the calibration detector rule)."""
    d2 = np.abs(np.roll(values, -1) - 2.0 * values + np.roll(values, 1))
    med = float(np.median(d2))
    scale = max(1e-9 * (1.0 + float(np.ptp(values))), 50.0 * med)
    return d2 > scale


def run_recurrence_experiment(config: ExperimentConfig) -> ReportBundle:
    """Value-function recurrence under the one-period operators."""
    n = config.resolution
    h = config.hamiltonian
    u0 = grid_from_trig(config.initial_potential, n)
    alpha0 = (
        config.alpha0
        if config.alpha0 is not None
        else mane_critical_value(h, 48, n, quad_nodes=config.quad_nodes, max_span=config.max_span).alpha0
    )
    pm = potential(h, 0.0, 1.0, n, quad_nodes=config.quad_nodes, max_span=config.max_span)

    fwd = [u0]
    for _ in range(config.n_max):
        fwd.append(lax_negative(fwd[-1], pm, alpha0))
    bwd = [u0]
    for _ in range(config.m_max):
        bwd.append(lax_positive(bwd[-1], pm, alpha0))

    ret_f = [float(np.max(np.abs(u.values - u0.values))) for u in fwd[1:]]
    ret_b = [float(np.max(np.abs(u.values - u0.values))) for u in bwd[1:]]
    inc_f = [
        float(np.max(np.abs(a.values - b.values))) for a, b in zip(fwd[1:], fwd[:-1])
    ]
    bundle = ReportBundle(
        kind="recurrence",
        verdict="PASS",
        reason="",
        config_echo=config_echo(config),
        seed=config.seed,
    )
    bundle.series["return_forward"] = list(enumerate(ret_f, start=1))
    bundle.series["return_backward"] = list(enumerate(ret_b, start=1))
    bundle.series["increments_forward"] = list(enumerate(inc_f, start=1))
    bundle.detectors = {
        "forward": {
            "hits": [k for k, r in enumerate(ret_f, start=1) if r < config.gauge_tol],
            "fired": any(r < config.gauge_tol for r in ret_f),
        },
        "backward": {
            "hits": [k for k, r in enumerate(ret_b, start=1) if r < config.gauge_tol],
            "fired": any(r < config.gauge_tol for r in ret_b),
        },
    }
    bundle.events.append(f"alpha0 = {float(alpha0)!r}")

    kink_free = not any(bool(grid_kink_mask(u.values).any()) for u in fwd)
    consistency = None
    if kink_free:
        cur = from_potential(u0)
        worst = 0.0
        for k in range(1, config.n_max + 1):
            cur = evolve(h, cur, float(k - 1), float(k), config.flow_settings, spacing=config.spacing)
            track = from_potential(fwd[k], derivative="central")
            worst = max(worst, hausdorff_distance(cur, track))
        consistency = worst
        bundle.series["consistency"] = [(config.n_max, worst)]
        if worst > 10.0 / n:
            bundle.verdict = "FAIL"
            bundle.reason = (
                f"curve and value evolutions disagree by {worst:.3e} (> 10/{n})"
            )
            return bundle
    rec_f = bundle.detectors["forward"]["fired"]
    rec_b = bundle.detectors["backward"]["fired"]
    parts = []
    parts.append(
        "recurrence detected in both directions" if (rec_f and rec_b)
        else "no bidirectional recurrence of the value function"
    )
    if consistency is not None:
        parts.append(f"curve/value consistency {consistency:.3e}")
    if inc_f and inc_f[-1] < min(inc_f) + 1e-12:
        parts.append("one-period increments settle (stationary regime)")
    bundle.reason = "; ".join(parts)
    return bundle


def run_autonomous_invariance(config: ExperimentConfig) -> ReportBundle:
    """Fixed-point construction and flow invariance of its graph (autonomous)."""
    h = config.hamiltonian
    for j, _, a, b in (*h.potential.terms, *h.shift_profile.terms):
        if j != 0 and (a != 0.0 or b != 0.0):
            raise ValueError("invariance experiment needs an autonomous Hamiltonian")
    n = config.resolution
    alpha0 = (
        config.alpha0
        if config.alpha0 is not None
        else mane_critical_value(h, 48, n, quad_nodes=config.quad_nodes, max_span=config.max_span).alpha0
    )
    pm = potential(h, 0.0, 1.0, n, quad_nodes=config.quad_nodes, max_span=config.max_span)
    u = grid_from_trig(config.initial_potential, n)
    budget = 512
    residual = np.inf
    for _ in range(budget):
        nxt = lax_negative(u, pm, alpha0)
        residual = float(np.max(np.abs(nxt.values - u.values)))
        u = nxt
        if residual < 1e-4:
            break
    else:
        raise FixedPointNotReached(f"one-period residual {residual} after {budget} iterations")

    kinks = grid_kink_mask(u.values)
    # widen the excluded arc by two cells on each side of every kink
    excluded = kinks.copy()
    for shift in (-2, -1, 1, 2):
        excluded |= np.roll(kinks, shift)
    curve = from_potential(u, derivative="central")
    bundle = ReportBundle(
        kind="invariance",
        verdict="NO_DATA",
        reason="",
        config_echo=config_echo(config),
        seed=config.seed,
    )
    bundle.curves[0] = curve
    bundle.events.append(f"alpha0 = {float(alpha0)!r}")
    bundle.events.append(f"fixed-point residual = {float(residual)!r}")
    bundle.events.append(f"kink cells = {int(np.count_nonzero(kinks))}")

    # With kinks the evolved curve grows flaps along the orbit of the kink
    # junction (the candidate selects one branch of an invariant set); the
    # meaningful check is then one-sided: the kink-free arc of the candidate
    # must stay shadowed by the evolved curve. Kink-free candidates get the
    # full symmetric Hausdorff comparison.
    has_kinks = bool(kinks.any())
    times = [k / 10.0 for k in range(1, 10)]
    worst = 0.0
    for t in times:
        lt = evolve(h, curve, 0.0, t, config.flow_settings, spacing=config.spacing)
        keep = ~excluded[(np.floor(curve.q * n).astype(int)) % n]
        d = float(np.max(points_to_curve_distance(curve.q[keep], curve.p[keep], lt)))
        if not has_kinks:
            d = max(d, float(np.max(points_to_curve_distance(lt.q, lt.p, curve))))
        worst = max(worst, d)
        bundle.series.setdefault("invariance", []).append((t, d))
    bundle.verdict = "PASS" if worst < 10.0 / n else "FAIL"
    bundle.reason = (
        f"max invariance residual {worst:.3e} over t in (0,1) "
        f"({'below' if worst < 10.0 / n else 'above'} 10/{n}; "
        f"{int(np.count_nonzero(kinks))} kink cells excluded; "
        f"{'one-sided arc shadowing' if has_kinks else 'symmetric'})"
    )
    return bundle


def lax_spacetime(config: ExperimentConfig, t0: float, t1: float) -> SpaceTimeFunction:
    """Candidate solution window for the calibration pipeline."""
    n = config.resolution
    h = config.hamiltonian
    alpha0 = (
        config.alpha0
        if config.alpha0 is not None
        else mane_critical_value(h, 48, n, quad_nodes=config.quad_nodes, max_span=config.max_span).alpha0
    )
    u0 = grid_from_trig(config.initial_potential, n)
    pm = potential(h, 0.0, 1.0, n, quad_nodes=config.quad_nodes, max_span=config.max_span)
    cur = u0
    for _ in range(int(max(0, round(t0)))):
        cur = lax_negative(cur, pm, alpha0)
    return spacetime_from_lax(h, cur, t0, t1, alpha0, n=n, quad_nodes=config.quad_nodes)
