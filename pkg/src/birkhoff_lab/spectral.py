"""Min-max invariants of sampled functions quadratic at infinity.

Supported quadratic indices are 0, 1, k-1 and k (k = fiber dimension): global
minima, sublevel percolation thresholds, and their duals under sign flip.
The percolation threshold is computed exactly on the sampled complex by
inserting cells in increasing value order into a union-find structure whose
two extra sentinels represent the two ends of the negative quadratic
direction; the threshold is the value of the cell whose insertion first
connects them. Adjacency is axis-neighbor only, and the base circle (when
present) wraps periodically.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import UnsupportedIndex
from .grids import GridFunction

SHELL_FRACTION = 0.9
SHELL_TOL = 1e-9


class Certificate(enum.Enum):
    GLOBAL_MIN = "global_min"
    GLOBAL_MAX = "global_max"
    PERCOLATION_THRESHOLD = "percolation_threshold"


@dataclass(frozen=True)
class SpectralValue:
    value: float
    certificate: Certificate
    witness: tuple[int, ...]


@dataclass(frozen=True)
class SampledFqi:
    """Samples of a function equal to constant + quadratic outside a compact set.

    values has shape (base_resolution?, M1[, M2]) with odd fiber resolutions.
    shell_enforced marks instances whose outer fiber shell was overwritten
    with constant + quadratic at construction; fibred sums keep the flag off
    because the sum of compact perturbations is not compactly supported on
    the product box (mixed far regions), matching the continuum caveat.
    """

    values: np.ndarray
    signature: tuple[int, ...]
    fiber_halfwidth: float
    constant_at_infinity: float = 0.0
    base_resolution: int | None = None
    shell_enforced: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "signature", tuple(int(s) for s in self.signature))
        k = len(self.signature)
        expected_ndim = k + (1 if self.base_resolution else 0)
        if v.ndim != expected_ndim:
            raise ValueError(f"values ndim {v.ndim} != expected {expected_ndim}")
        if self.base_resolution and v.shape[0] != self.base_resolution:
            raise ValueError("base axis length mismatch")
        for m in self.fiber_shape:
            if m < 3 or m % 2 == 0:
                raise ValueError("fiber resolutions must be odd and >= 3")
        if any(s not in (-1, 1) for s in self.signature):
            raise ValueError("signature entries must be +-1")
        if self.shell_enforced:
            err = self.shell_error()
            if err > SHELL_TOL:
                raise ValueError(f"outer shell deviates from constant+quadratic by {err}")

    @property
    def fiber_dims(self) -> int:
        return len(self.signature)

    @property
    def fiber_shape(self) -> tuple[int, ...]:
        off = 1 if self.base_resolution else 0
        return self.values.shape[off:]

    @property
    def index(self) -> int:
        return sum(1 for s in self.signature if s < 0)

    def fiber_axis(self, i: int) -> np.ndarray:
        m = self.fiber_shape[i]
        return np.linspace(-self.fiber_halfwidth, self.fiber_halfwidth, m)

    @property
    def fiber_step(self) -> float:
        return float(max(2 * self.fiber_halfwidth / (m - 1) for m in self.fiber_shape))

    def quadratic_part(self) -> np.ndarray:
        axes = [self.fiber_axis(i) for i in range(self.fiber_dims)]
        grids = np.meshgrid(*axes, indexing="ij")
        q = sum(s * g**2 for s, g in zip(self.signature, grids))
        if self.base_resolution:
            q = np.broadcast_to(q, self.values.shape)
        return np.asarray(q)

    def _shell_mask(self) -> np.ndarray:
        axes = [self.fiber_axis(i) for i in range(self.fiber_dims)]
        grids = np.meshgrid(*axes, indexing="ij")
        mask = np.zeros(self.fiber_shape, dtype=bool)
        for g in grids:
            mask |= np.abs(g) > SHELL_FRACTION * self.fiber_halfwidth
        if self.base_resolution:
            mask = np.broadcast_to(mask, self.values.shape)
        return np.asarray(mask)

    def shell_error(self) -> float:
        mask = self._shell_mask()
        if not mask.any():
            return 0.0
        target = self.constant_at_infinity + self.quadratic_part()
        return float(np.max(np.abs(self.values[mask] - target[mask])))


def sample_fqi(
    fn,
    signature: tuple[int, ...],
    base_resolution: int | None = None,
    fiber_resolution: int | tuple[int, ...] = 129,
    halfwidth: float = 4.0,
    constant: float = 0.0,
) -> SampledFqi:
    """Sample fn on the base x fiber grid and enforce the quadratic shell.

    fn takes (q, xi1[, xi2]) broadcastable arrays (q omitted for point base).
    The outer 10% of the fiber box is overwritten with constant + quadratic,
    which keeps the two far ends unambiguous for the percolation sentinels.
    """
    k = len(signature)
    if isinstance(fiber_resolution, int):
        fiber_resolution = (fiber_resolution,) * k
    axes = [np.linspace(-halfwidth, halfwidth, m) for m in fiber_resolution]
    grids = list(np.meshgrid(*axes, indexing="ij"))
    if base_resolution:
        q = np.arange(base_resolution) / base_resolution
        shape = (base_resolution,) + tuple(fiber_resolution)
        qb = q.reshape((-1,) + (1,) * k)
        vals = np.broadcast_to(fn(qb, *[g[None] for g in grids]), shape).astype(float).copy()
    else:
        vals = np.asarray(fn(*grids), dtype=float).copy()
    quad = sum(s * g**2 for s, g in zip(signature, grids))
    mask = np.zeros(tuple(fiber_resolution), dtype=bool)
    for g in grids:
        mask |= np.abs(g) > SHELL_FRACTION * halfwidth
    target = constant + quad
    if base_resolution:
        vals[:, mask] = np.broadcast_to(target, vals.shape[1:])[mask]
    else:
        vals[mask] = target[mask]
    return SampledFqi(
        values=vals,
        signature=tuple(signature),
        fiber_halfwidth=halfwidth,
        constant_at_infinity=constant,
        base_resolution=base_resolution,
    )


def negate(s: SampledFqi) -> SampledFqi:
    return replace(
        s,
        values=-s.values,
        signature=tuple(-x for x in s.signature),
        constant_at_infinity=-s.constant_at_infinity,
    )


# ---------------------------------------------------------------------------
# percolation


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def _neighbor_tables(shape: tuple[int, ...], periodic_axes: tuple[bool, ...]):
    size = int(np.prod(shape))
    arr = np.arange(size).reshape(shape)
    tables = []
    for k, per in enumerate(periodic_axes):
        for sign in (-1, +1):
            nb = np.full(shape, -1, dtype=np.int64)
            src = np.moveaxis(arr, k, 0)
            dst = np.moveaxis(nb, k, 0)
            if sign < 0:
                dst[1:] = src[:-1]
                if per:
                    dst[0] = src[-1]
            else:
                dst[:-1] = src[1:]
                if per:
                    dst[-1] = src[0]
            tables.append(nb.ravel())
    return tables


def sublevel_percolation_threshold(
    values: np.ndarray,
    neg_axis: int,
    periodic_axes: tuple[bool, ...],
):
    """Level at which the two ends of the negative axis join in the sublevels.

    Cells enter in increasing (value, flat index) order; cells on the two
    boundary faces of neg_axis attach to two sentinels on insertion. Returns
    (threshold value, witness multi-index of the connecting cell).
    """
    shape = values.shape
    size = int(np.prod(shape))
    flat = values.ravel()
    order = np.lexsort((np.arange(size), flat))
    tables = _neighbor_tables(shape, periodic_axes)

    face = np.zeros(shape, dtype=np.int8)
    lo = np.moveaxis(face, neg_axis, 0)
    lo[0] = 1
    lo[-1] = 2
    face_flat = face.ravel()

    uf = _UnionFind(size + 2)
    sentinel_a, sentinel_b = size, size + 1
    inserted = bytearray(size)
    for c in map(int, order):
        inserted[c] = 1
        for nb in tables:
            m = int(nb[c])
            if m >= 0 and inserted[m]:
                uf.union(c, m)
        f = face_flat[c]
        if f == 1:
            uf.union(c, sentinel_a)
        elif f == 2:
            uf.union(c, sentinel_b)
        if uf.find(sentinel_a) == uf.find(sentinel_b):
            return float(flat[c]), tuple(int(i) for i in np.unravel_index(c, shape))
    raise AssertionError("sentinels never connected; negative axis faces missing")


def _complex_axes(s: SampledFqi) -> tuple[bool, ...]:
    per = (True,) if s.base_resolution else ()
    return per + (False,) * s.fiber_dims


def spectral_unit(s: SampledFqi) -> SpectralValue:
    """Invariant of the unit class: global min (index 0) or percolation (index 1)."""
    m = s.index
    if m == 0:
        flat = int(np.argmin(s.values))
        witness = tuple(int(i) for i in np.unravel_index(flat, s.values.shape))
        return SpectralValue(float(s.values.min()), Certificate.GLOBAL_MIN, witness)
    if m == 1:
        off = 1 if s.base_resolution else 0
        neg_axis = off + s.signature.index(-1)
        val, witness = sublevel_percolation_threshold(s.values, neg_axis, _complex_axes(s))
        return SpectralValue(val, Certificate.PERCOLATION_THRESHOLD, witness)
    raise UnsupportedIndex(f"unit invariant needs index 0 or 1, got {m}")


def spectral_top(s: SampledFqi) -> SpectralValue:
    """Invariant of the top class, defined through duality as -unit(-S)."""
    neg = negate(s)
    if neg.index > 1:
        raise UnsupportedIndex(f"top invariant needs index {s.fiber_dims - 1} or {s.fiber_dims}")
    r = spectral_unit(neg)
    cert = Certificate.GLOBAL_MAX if r.certificate is Certificate.GLOBAL_MIN else Certificate.PERCOLATION_THRESHOLD
    return SpectralValue(-r.value, cert, r.witness)


def _restrict_to_fiber(s: SampledFqi, q_index: int) -> SampledFqi:
    if not s.base_resolution:
        raise ValueError("restriction needs a circle base")
    return SampledFqi(
        values=s.values[q_index].copy(),
        signature=s.signature,
        fiber_halfwidth=s.fiber_halfwidth,
        constant_at_infinity=s.constant_at_infinity,
        base_resolution=None,
        shell_enforced=False,
    )


def fiber_selector(s: SampledFqi, q_index: int) -> float:
    """Invariant of the fiber over one base point.

    Index 0 is the fiber minimum, full index the fiber maximum; the mixed 2-D
    signature goes through the fiber percolation, with (-1,+1) routed through
    duality so that selector(-S) = -selector(S) holds exactly.
    """
    fq = _restrict_to_fiber(s, q_index) if s.base_resolution else s
    m = fq.index
    k = fq.fiber_dims
    if m == 0:
        return float(fq.values.min())
    if m == k:
        return float(fq.values.max())
    if k == 2 and fq.signature == (1, -1):
        val, _ = sublevel_percolation_threshold(fq.values, 1, (False, False))
        return val
    if k == 2 and fq.signature == (-1, 1):
        return -fiber_selector(negate(fq), 0)
    raise UnsupportedIndex(f"fiber signature {fq.signature} unsupported")


@dataclass(frozen=True)
class SelectorResult:
    values: GridFunction
    lipschitz: float
    lower: float | None
    upper: float | None
    bounds_ok: bool | None


def selector_function(s: SampledFqi) -> SelectorResult:
    """Base-wise invariant as a grid function, with the global two-sided bounds.

    The unit invariant bounds the selector from below and the top invariant
    from above whenever their indices are supported; slack 1e-9 covers float
    noise (the discrete inequalities are exact).
    """
    if not s.base_resolution:
        raise ValueError("selector_function needs a circle base")
    vals = np.array([fiber_selector(s, i) for i in range(s.base_resolution)])
    step = 1.0 / s.base_resolution
    lip = float(np.max(np.abs(np.diff(np.append(vals, vals[0]))))) / step
    lower = upper = None
    if s.index <= 1:
        lower = spectral_unit(s).value
    if s.fiber_dims - s.index <= 1:
        upper = spectral_top(s).value
    ok = None
    if lower is not None or upper is not None:
        ok = True
        if lower is not None and lower > float(vals.min()) + 1e-9:
            ok = False
        if upper is not None and float(vals.max()) > upper + 1e-9:
            ok = False
    return SelectorResult(GridFunction(vals), lip, lower, upper, ok)


def fibred_sum_fqi(s1: SampledFqi, s2: SampledFqi, negate_second: bool = False) -> SampledFqi:
    """Product-fiber sum S1(q, xi) + (+-S2)(q, eta) for 1-D fiber inputs.

    The result is not shell-enforced: compact perturbations do not stay
    compact on the product box (mixed far regions), matching the continuum
    situation for direct sums.
    """
    if s1.fiber_dims != 1 or s2.fiber_dims != 1:
        raise UnsupportedIndex("fibred sums implemented for 1-D fiber factors")
    if s1.base_resolution != s2.base_resolution:
        raise ValueError("factors must share their base")
    b = negate(s2) if negate_second else s2
    if s1.base_resolution:
        vals = s1.values[:, :, None] + b.values[:, None, :]
    else:
        vals = s1.values[:, None] + b.values[None, :]
    return SampledFqi(
        values=vals,
        signature=(s1.signature[0], b.signature[0]),
        fiber_halfwidth=max(s1.fiber_halfwidth, b.fiber_halfwidth),
        constant_at_infinity=s1.constant_at_infinity + b.constant_at_infinity,
        base_resolution=s1.base_resolution,
        shell_enforced=False,
    )


@dataclass(frozen=True)
class AdditivityReport:
    sum_selector: float
    part_selectors: tuple[float, float]
    difference: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return abs(self.difference) <= self.tolerance


def sum_additivity_check(s1: SampledFqi, s2: SampledFqi, q_index: int) -> AdditivityReport:
    """Selector of the product-fiber sum against the sum of fiber selectors."""
    total = fibred_sum_fqi(s1, s2)
    a = fiber_selector(s1, q_index) if s1.base_resolution else fiber_selector(s1, 0)
    b = fiber_selector(s2, q_index) if s2.base_resolution else fiber_selector(s2, 0)
    c = fiber_selector(total, q_index) if total.base_resolution else fiber_selector(total, 0)
    tol = 2.0 * max(s1.fiber_step, s2.fiber_step)
    return AdditivityReport(c, (a, b), c - (a + b), tol)


@dataclass(frozen=True)
class DifferenceBoundsReport:
    lower: float | None
    upper: float | None
    min_gap: float
    max_gap: float
    tolerance: float

    @property
    def ok(self) -> bool:
        good = True
        if self.lower is not None:
            good = good and self.lower <= self.min_gap + self.tolerance
        if self.upper is not None:
            good = good and self.max_gap <= self.upper + self.tolerance
        return good


def selector_difference_bounds(s1: SampledFqi, s2: SampledFqi) -> DifferenceBoundsReport:
    """Bound selector differences by the invariants of S1 (-) S2.

    Each side of the sandwich is evaluated when its quadratic index is
    supported; mismatched signatures leave one side open.
    """
    diff = fibred_sum_fqi(s1, s2, negate_second=True)
    lower = spectral_unit(diff).value if diff.index <= 1 else None
    upper = spectral_top(diff).value if diff.fiber_dims - diff.index <= 1 else None
    if lower is None and upper is None:
        raise UnsupportedIndex(f"difference signature {diff.signature} unsupported")
    u1 = selector_function(s1).values.values
    u2 = selector_function(s2).values.values
    gaps = u1 - u2
    tol = 2.0 * max(s1.fiber_step, s2.fiber_step)
    return DifferenceBoundsReport(lower, upper, float(gaps.min()), float(gaps.max()), tol)


def witness_consistent(s: SampledFqi, sv: SpectralValue) -> bool:
    """Check the witness looks like a critical cell of the sampled complex.

    Min and max certificates require no strictly better axis neighbor; a
    percolation witness must see both weakly lower and weakly higher
    neighbors (a grid saddle).
    """
    v = s.values
    shape = v.shape
    idx = sv.witness
    periodic = _complex_axes(s)
    val = v[idx]
    lower = higher = strictly_lower = strictly_higher = False
    for ax in range(len(shape)):
        for d in (-1, +1):
            j = list(idx)
            j[ax] += d
            if periodic[ax]:
                j[ax] %= shape[ax]
            elif not 0 <= j[ax] < shape[ax]:
                continue
            other = v[tuple(j)]
            if other < val:
                strictly_lower = True
            if other > val:
                strictly_higher = True
            lower = lower or other <= val
            higher = higher or other >= val
    if sv.certificate is Certificate.GLOBAL_MIN:
        return not strictly_lower and val == float(v.min())
    if sv.certificate is Certificate.GLOBAL_MAX:
        return not strictly_higher and val == float(v.max())
    # a percolation witness joins previously inserted (weakly lower) cells:
    # it is never a strict local minimum, and generically sees both sides
    return lower and higher


# ---------------------------------------------------------------------------
# serialization


def fqi_to_csv(s: SampledFqi, path) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if s.fiber_dims == 1:
            fh.write("q_index,xi1_index,value\n")
        else:
            fh.write("q_index,xi1_index,xi2_index,value\n")
        it = np.ndindex(s.values.shape)
        for idx in it:
            if s.base_resolution:
                q, rest = idx[0], idx[1:]
            else:
                q, rest = 0, idx
            cols = [str(q)] + [str(i) for i in rest] + [repr(float(s.values[idx]))]
            fh.write(",".join(cols) + "\n")
    meta = {
        "base_resolution": s.base_resolution,
        "fiber_resolution": list(s.fiber_shape),
        "fiber_halfwidth": s.fiber_halfwidth,
        "signature": list(s.signature),
        "constant_at_infinity": s.constant_at_infinity,
        "shell_enforced": s.shell_enforced,
    }
    with open(path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def fqi_from_csv(path) -> SampledFqi:
    path = Path(path)
    with open(path.with_suffix(".meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    fiber_shape = tuple(meta["fiber_resolution"])
    base = meta["base_resolution"]
    shape = ((base,) if base else ()) + fiber_shape
    vals = np.zeros(shape)
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        ncols = len(header.strip().split(","))
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != ncols:
                continue
            q = int(parts[0])
            fiber_idx = tuple(int(x) for x in parts[1:-1])
            value = float(parts[-1])
            idx = ((q,) if base else ()) + fiber_idx
            vals[idx] = value
    return SampledFqi(
        values=vals,
        signature=tuple(meta["signature"]),
        fiber_halfwidth=float(meta["fiber_halfwidth"]),
        constant_at_infinity=float(meta["constant_at_infinity"]),
        base_resolution=base,
        shell_enforced=bool(meta["shell_enforced"]),
    )
