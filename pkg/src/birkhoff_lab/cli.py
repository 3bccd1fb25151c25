"""Command-line front end.

Subcommands: flow, potential, lax, mane, barrier, spectral, calibrate,
birkhoff, recurrence, invariance. Global flags --config/--out/--seed/
--resolution/--quiet. Exit codes: 0 PASS, 1 FAIL, 2 INCONCLUSIVE, >= 10
errors (details on stderr unless --quiet).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import calibrated_curve, domination_check
from .errors import BirkhoffLabError, KinkAtSeed
from .experiments import (
    ExperimentConfig,
    lax_spacetime,
    load_config,
    run_autonomous_invariance,
    run_iteration_experiment,
    run_recurrence_experiment,
)
from .flow import PhasePoint, trajectory
from .grids import grid_from_trig
from .lax_oleinik import (
    lax_negative,
    lax_positive,
    mane_critical_value,
    peierls_barrier,
    potential,
)
from .reports import emit_reports, grid_to_csv, potential_to_csv
from .spectral import fqi_from_csv, selector_function, spectral_top, spectral_unit

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_ERROR = 0, 1, 2, 10


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; that slot is taken
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _write_json(out: Path, name: str, payload: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _verdict_exit(verdict: str) -> int:
    return {"PASS": EXIT_PASS, "FAIL": EXIT_FAIL}.get(verdict, EXIT_INCONCLUSIVE)


def build_parser() -> _Parser:
    p = _Parser(prog="birkhoff-lab", description=__doc__)
    p.add_argument("--version", action="version", version=f"birkhoff-lab {__version__}")
    p.add_argument("--config", type=str, default=None, help="INI config path")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override random seed")
    p.add_argument("--resolution", type=int, default=None, help="override grid resolution")
    p.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("flow", help="integrate one trajectory")
    sp.add_argument("--q", type=float, default=0.0)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t1", type=float, default=1.0)

    sp = sub.add_parser("potential", help="action potential matrix")
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--t1", type=float, default=1.0)

    sp = sub.add_parser("lax", help="iterate the one-period operators")
    sp.add_argument("--steps", type=int, default=8)
    sp.add_argument("--direction", choices=("negative", "positive"), default="negative")

    sub.add_parser("mane", help="critical value estimate")

    sp = sub.add_parser("barrier", help="long-horizon barrier matrix")
    sp.add_argument("--n-min", type=int, default=8)
    sp.add_argument("--n-max", type=int, default=64)

    sp = sub.add_parser("spectral", help="invariants of a sampled CSV instance")
    sp.add_argument("--fqi", type=str, required=True, help="CSV path (sidecar .meta.json)")

    sp = sub.add_parser("calibrate", help="domination sweep and calibrated shots")
    sp.add_argument("--curves", type=int, default=1000)
    sp.add_argument("--horizon", type=float, default=1.0)
    sp.add_argument("--tolerance", type=float, default=5e-3)

    sub.add_parser("birkhoff", help="bidirectional iteration experiment")
    sub.add_parser("recurrence", help="value-function recurrence experiment")
    sub.add_parser("invariance", help="autonomous invariance experiment")
    return p


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.resolution is not None:
        config = replace(config, resolution=args.resolution)
    if args.out is not None:
        config = replace(config, outdir=args.out)
    return config


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help/--version or argument errors
        return exc.code if isinstance(exc.code, int) else 0
    try:
        config = _apply_overrides(load_config(args.config), args)
        out = Path(config.outdir)
        say = (lambda *a: None) if args.quiet else print
        h = config.hamiltonian

        if args.command == "flow":
            tr = trajectory(h, PhasePoint(args.q, args.p), args.t0, args.t1, config.flow_settings)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "trajectory.csv", "w", encoding="utf-8", newline="\n") as fh:
                fh.write("t,q,p,action_increment\n")
                inc = np.append(tr.action_increments, np.nan)
                for t, q, p, a in zip(tr.times, tr.q, tr.p, inc):
                    fh.write(f"{float(t)!r},{float(q)!r},{float(p)!r},{'' if np.isnan(a) else repr(float(a))}\n")
            say(f"endpoint q={float(tr.q[-1])!r} p={float(tr.p[-1])!r} action={tr.total_action!r}")
            return EXIT_PASS

        if args.command == "potential":
            pm = potential(h, args.t0, args.t1, config.resolution)
            out.mkdir(parents=True, exist_ok=True)
            potential_to_csv(pm, out / "potential.csv")
            say(f"potential [{args.t0},{args.t1}] written; min={float(pm.entries.min())!r}")
            return EXIT_PASS

        if args.command == "lax":
            u = grid_from_trig(config.initial_potential, config.resolution)
            pm = potential(h, 0.0, 1.0, config.resolution)
            alpha0 = config.alpha0 if config.alpha0 is not None else mane_critical_value(
                h, 48, config.resolution
            ).alpha0
            for _ in range(args.steps):
                u = (
                    lax_negative(u, pm, alpha0)
                    if args.direction == "negative"
                    else lax_positive(u, pm, alpha0)
                )
            out.mkdir(parents=True, exist_ok=True)
            grid_to_csv(u, out / f"lax_{args.direction}_{args.steps}.csv")
            say(f"after {args.steps} {args.direction} periods: osc={u.oscillation()!r}")
            return EXIT_PASS

        if args.command == "mane":
            est = mane_critical_value(h, 64, config.resolution)
            _write_json(out, "mane.json", {
                "alpha0": est.alpha0,
                "half_width": est.half_width,
                "horizon_used": est.horizon_used,
            })
            say(f"alpha0 = {est.alpha0!r} +- {est.half_width!r}")
            return EXIT_PASS

        if args.command == "barrier":
            est = mane_critical_value(h, 48, config.resolution)
            res = peierls_barrier(h, est.alpha0, 0.0, 0.0, args.n_min, args.n_max, config.resolution)
            out.mkdir(parents=True, exist_ok=True)
            potential_to_csv(res.matrix, out / "barrier.csv")
            _write_json(out, "barrier.json", {
                "alpha0": est.alpha0,
                "converged": res.converged,
                "final_change": res.sup_changes[-1],
            })
            say(f"barrier converged={res.converged}")
            return EXIT_PASS if res.converged else EXIT_INCONCLUSIVE

        if args.command == "spectral":
            s = fqi_from_csv(args.fqi)
            payload = {"index": s.index, "fiber_dims": s.fiber_dims}
            if s.index <= 1:
                sv = spectral_unit(s)
                payload["unit"] = {"value": sv.value, "certificate": sv.certificate.value,
                                   "witness": list(sv.witness)}
            if s.fiber_dims - s.index <= 1:
                sv = spectral_top(s)
                payload["top"] = {"value": sv.value, "certificate": sv.certificate.value,
                                  "witness": list(sv.witness)}
            if s.base_resolution:
                sel = selector_function(s)
                payload["selector_oscillation"] = sel.values.oscillation()
                payload["selector_lipschitz"] = sel.lipschitz
                payload["bounds_ok"] = sel.bounds_ok
            _write_json(out, "spectral.json", payload)
            say(json.dumps(payload, sort_keys=True))
            return EXIT_PASS

        if args.command == "calibrate":
            u = lax_spacetime(config, 0.0, args.horizon)
            dom = domination_check(u, h, count=args.curves, seed=config.seed)
            shots = []
            rng = np.random.default_rng(config.seed)
            for q0 in rng.uniform(0, 1, 8):
                try:
                    rep = calibrated_curve(u, h, 0.0, float(q0), args.horizon, config.flow_settings)
                except KinkAtSeed:
                    continue
                shots.append({
                    "defect": rep.defect,
                    "momentum_residual": rep.max_momentum_residual,
                    "hj_residual": rep.max_hj_residual,
                    "seed_t": rep.seed_t,
                    "seed_q": rep.seed_q,
                })
            ok = dom.min_defect >= -args.tolerance
            _write_json(out, "calibration.json", {
                "min_defect": dom.min_defect,
                "curves": dom.count,
                "tolerance": args.tolerance,
                "verdict": "PASS" if ok else "FAIL",
                "calibrated_shots": shots,
            })
            say(f"min defect {dom.min_defect!r} over {dom.count} curves -> {'PASS' if ok else 'FAIL'}")
            return EXIT_PASS if ok else EXIT_FAIL

        if args.command == "birkhoff":
            bundle = run_iteration_experiment(config)
        elif args.command == "recurrence":
            bundle = run_recurrence_experiment(config)
        elif args.command == "invariance":
            bundle = run_autonomous_invariance(config)
        else:  # pragma: no cover
            raise AssertionError(args.command)
        emit_reports(bundle, out)
        say(f"verdict: {bundle.verdict} ({bundle.reason})")
        return _verdict_exit(bundle.verdict)

    except BirkhoffLabError as exc:
        if not args.quiet:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, KeyError) as exc:
        if not args.quiet:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR + 1


if __name__ == "__main__":
    raise SystemExit(main())
