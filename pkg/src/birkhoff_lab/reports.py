"""Report emission: diagnostics CSV, versioned JSON, self-contained SVG plots.

Everything written here is byte-deterministic for a fixed bundle: floats go
through repr (shortest round-trip), JSON keys are sorted, and the SVG writer
formats coordinates with a fixed precision and embeds no external assets.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .curves import curve_to_csv
from .errors import IoFailure
from .experiments import ReportBundle
from .grids import GridFunction
from .lax_oleinik import PotentialMatrix

SCHEMA_VERSION = 1

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


# ---------------------------------------------------------------------------
# CSV emitters


def grid_to_csv(u: GridFunction, path) -> None:
    """`index,q[,q2],value` rows over the uniform grid."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if u.dim == 1:
            fh.write("index,q,value\n")
            for i, val in enumerate(u.values):
                fh.write(f"{i},{i / u.resolution!r},{float(val)!r}\n")
        else:
            fh.write("index,q,q2,value\n")
            n = u.values.shape[1]
            for i in range(u.values.shape[0]):
                for j in range(n):
                    flat = i * n + j
                    fh.write(f"{flat},{i / u.values.shape[0]!r},{j / n!r},{float(u.values[i, j])!r}\n")


def grid_from_csv(path) -> GridFunction:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            line = line.strip()
            if line:
                rows.append(line.split(","))
    if header == ["index", "q", "value"]:
        return GridFunction(np.array([float(r[2]) for r in rows]))
    if header == ["index", "q", "q2", "value"]:
        n = int(round(np.sqrt(len(rows))))
        vals = np.array([float(r[3]) for r in rows]).reshape(n, n)
        return GridFunction(vals)
    raise ValueError(f"unexpected grid CSV header {header}")


def potential_to_csv(pm: PotentialMatrix, path) -> None:
    """Matrix CSV with coordinate row/column headers."""
    n = pm.resolution
    grid = [repr(i / n) for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("y\\x," + ",".join(grid) + "\n")
        for i in range(n):
            row = ",".join(repr(float(v)) for v in pm.entries[i])
            fh.write(f"{grid[i]},{row}\n")


# ---------------------------------------------------------------------------
# SVG plotting (hand-rolled for byte determinism)


def _svg_header(width, height, title):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.1f}" y="18" font-family="monospace" font-size="13" '
        f'text-anchor="middle">{title}</text>\n'
    )


def _axis_box(x0, y0, x1, y1):
    return (
        f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
        f'fill="none" stroke="black" stroke-width="1"/>\n'
    )


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [(out_lo + (v - lo) / span * (out_hi - out_lo)) for v in vals]


def polyline_plot_svg(path, series, title, xlabel="", ylabel="", width=640, height=420):
    """series: list of (name, xs, ys); one polyline per entry."""
    x0, y0, x1, y1 = 60, 30, width - 20, height - 45
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    lo_x, hi_x = min(xs_all), max(xs_all)
    lo_y, hi_y = min(ys_all), max(ys_all)
    if hi_y == lo_y:
        hi_y = lo_y + 1.0
    parts = [_svg_header(width, height, title), _axis_box(x0, y0, x1, y1)]
    for k, (name, xs, ys) in enumerate(series):
        if len(xs) == 0:
            continue
        px = _scale(xs, lo_x, hi_x, x0, x1)
        py = _scale(ys, lo_y, hi_y, y1, y0)
        pts = " ".join(f"{a:.4f},{b:.4f}" for a, b in zip(px, py))
        color = _PALETTE[k % len(_PALETTE)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>\n'
        )
        if name:
            parts.append(
                f'<text x="{x1 - 8}" y="{y0 + 14 + 13 * k}" font-family="monospace" '
                f'font-size="11" text-anchor="end" fill="{color}">{name}</text>\n'
            )
    for frac, val in ((0.0, lo_x), (1.0, hi_x)):
        parts.append(
            f'<text x="{x0 + frac * (x1 - x0):.1f}" y="{y1 + 16}" font-family="monospace" '
            f'font-size="11" text-anchor="middle">{val:.4g}</text>\n'
        )
    for frac, val in ((0.0, lo_y), (1.0, hi_y)):
        parts.append(
            f'<text x="{x0 - 6}" y="{y1 - frac * (y1 - y0) + 4:.1f}" font-family="monospace" '
            f'font-size="11" text-anchor="end">{val:.4g}</text>\n'
        )
    if xlabel:
        parts.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 8}" font-family="monospace" '
            f'font-size="12" text-anchor="middle">{xlabel}</text>\n'
        )
    if ylabel:
        parts.append(
            f'<text x="14" y="{(y0 + y1) / 2:.1f}" font-family="monospace" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 14 {(y0 + y1) / 2:.1f})">{ylabel}</text>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(parts))


def histogram_svg(path, values, title, bins=24, width=640, height=420):
    values = np.asarray(list(values), dtype=float)
    x0, y0, x1, y1 = 60, 30, width - 20, height - 45
    parts = [_svg_header(width, height, title), _axis_box(x0, y0, x1, y1)]
    if len(values):
        counts, edges = np.histogram(values, bins=bins)
        top = max(1, counts.max())
        bw = (x1 - x0) / bins
        for i, c in enumerate(counts):
            bh = (y1 - y0) * (c / top)
            parts.append(
                f'<rect x="{x0 + i * bw:.3f}" y="{y1 - bh:.3f}" width="{bw:.3f}" '
                f'height="{bh:.3f}" fill="#1f77b4" stroke="black" stroke-width="0.5"/>\n'
            )
        for frac, val in ((0.0, edges[0]), (1.0, edges[-1])):
            parts.append(
                f'<text x="{x0 + frac * (x1 - x0):.1f}" y="{y1 + 16}" font-family="monospace" '
                f'font-size="11" text-anchor="middle">{val:.4g}</text>\n'
            )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(parts))


# ---------------------------------------------------------------------------
# bundle emission


def emit_reports(bundle: ReportBundle, outdir) -> list[Path]:
    """Write diagnostics.csv, report.json, SVG plots, and any witness curve."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []

        csv_path = out / "diagnostics.csv"
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("n,hausdorff_to_candidate,gauge,is_graph,fold_count,node_count,primitive_osc\n")
            for r in bundle.records:
                fh.write(
                    f"{r.n},{float(r.hausdorff_to_candidate)!r},{float(r.gauge)!r},"
                    f"{str(r.is_graph).lower()},{r.fold_count},{r.node_count},{float(r.primitive_osc)!r}\n"
                )
        written.append(csv_path)

        payload = {
            "schema_version": SCHEMA_VERSION,
            "tool": {"name": "birkhoff-lab", "version": __version__},
            "kind": bundle.kind,
            "verdict": bundle.verdict,
            "reason": bundle.reason,
            "witness": bundle.witness,
            "detectors": bundle.detectors,
            "events": bundle.events,
            "series": {k: [[a, b] for a, b in v] for k, v in bundle.series.items()},
            "config": bundle.config_echo,
            "seed": bundle.seed,
            "record_count": len(bundle.records),
        }
        json_path = out / "report.json"
        with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        written.append(json_path)

        portrait = []
        for n in sorted(bundle.curves):
            c = bundle.curves[n]
            order = np.argsort(c.q, kind="stable")
            portrait.append((f"n={n}", list(c.q[order]), list(c.p[order])))
        svg1 = out / "phase_portrait.svg"
        polyline_plot_svg(svg1, portrait, "iterates in phase space", "q", "p")
        written.append(svg1)

        series = []
        for name in ("return_forward", "return_backward", "hausdorff", "gauge", "invariance"):
            if name in bundle.series and bundle.series[name]:
                xs, ys = zip(*bundle.series[name])
                series.append((name, list(xs), list(ys)))
        svg2 = out / "return_distance.svg"
        polyline_plot_svg(svg2, series, "convergence diagnostics", "iterate", "distance")
        written.append(svg2)

        hist_vals = [r.gauge for r in bundle.records]
        if "increments_forward" in bundle.series:
            hist_vals.extend(v for _, v in bundle.series["increments_forward"])
        svg3 = out / "defect_hist.svg"
        histogram_svg(svg3, hist_vals, "gauge / increment histogram")
        written.append(svg3)

        if bundle.witness is not None and bundle.witness in bundle.curves:
            wpath = out / "witness_curve.csv"
            curve_to_csv(bundle.curves[bundle.witness], wpath)
            written.append(wpath)
        return written
    except OSError as exc:
        raise IoFailure(f"cannot write reports under {out}: {exc}") from exc
