"""Command-line front end.

Exit codes: 0 success, 1 rejected input, 2 numerical failure, 3 I/O error.
Relative output paths are placed under $KLEIN_OUT_DIR when it is set.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .core import (
    BranchPoint,
    EnergyZone,
    InputError,
    KleinError,
    PhysParams,
    classify_zone,
    kinematics,
    zone_interval,
)
from .oracle import NoConvergence, sharp_limit
from .scatter import (
    EvanescentAmplitudes,
    Family,
    OverBarrierAmplitudes,
    StepAmplitudes,
    current_density,
    evaluate_field,
    solve,
    unitarity_report,
)
from .svgplot import line_chart
from .wavepacket import (
    ZoneStraddle,
    asymptotic_time,
    build_gaussian,
    evolve,
    reflection_and_penetration,
    spectral_transmission,
    suggest_x_grid,
)

log = logging.getLogger("kleinstep")

SWEEP_HEADER = ["E", "zone", "R2", "T2", "Rv2", "Tv2", "unitarity_defect", "J_left", "J_right"]
PACKET_HEADER = ["x", "re_upper", "im_upper", "re_lower", "im_lower", "density"]


# -- serialisation -----------------------------------------------------------

def fmt(v: float) -> str:
    """17 significant digits; round-trips every double exactly."""
    return format(float(v), ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits (non-finite floats become null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, complex):
        return dumps({"re": obj.real, "im": obj.imag}, indent, _level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def parse_complex(d: dict) -> complex:
    return complex(d["re"], d["im"])


def solution_record(params: PhysParams, E: float) -> dict:
    kin = kinematics(params, E)
    rec: dict[str, Any] = {"m": params.m, "V": params.V, "E": E, "zone": str(kin.zone), "k": kin.k, "alpha": kin.alpha}
    sol = solve(params, E)
    if kin.zone is EnergyZone.KLEIN:
        rm = kin.right_mode
        rec.update(p=rm.p, beta=rm.beta)
        a: StepAmplitudes = sol.amps
        u = unitarity_report(params, E)
        rec["amplitudes"] = {"A": a.A, "B": a.B, "C": a.C, "D": a.D, "R": a.R, "T": a.T,
                             "R_virt": a.R_virt, "T_virt": a.T_virt}
        rec["probabilities"] = {"R2": abs(a.R) ** 2, "T2": abs(a.T) ** 2,
                                "Rv2": abs(a.R_virt) ** 2, "Tv2": abs(a.T_virt) ** 2}
        rec["unitarity"] = {"sum_traditional": u.sum_traditional, "sum_virtual": u.sum_virtual,
                            "A_eq_C_gap": u.A_eq_C_gap,
                            "defect_traditional": abs(u.sum_traditional - 1),
                            "defect_virtual": abs(u.sum_virtual - 1)}
    elif kin.zone is EnergyZone.EVANESCENT:
        ev: EvanescentAmplitudes = sol.amps
        rec["kappa"] = kin.right_mode.kappa
        rec["amplitudes"] = {"A": ev.A, "F": ev.F, "R": ev.R}
        rec["probabilities"] = {"R2": abs(ev.A) ** 2, "T2": 0.0}
        rec["unitarity"] = {"defect": abs(abs(ev.A) ** 2 - 1)}
    else:
        ob: OverBarrierAmplitudes = sol.amps
        rec.update(kp=kin.right_mode.kp, alpha_p=kin.right_mode.alpha_p)
        rec["amplitudes"] = {"A": ob.A, "B": ob.B, "R": ob.R, "T": ob.T}
        rec["probabilities"] = {"R2": abs(ob.R) ** 2, "T2": abs(ob.T) ** 2}
        rec["unitarity"] = {"defect": abs(abs(ob.R) ** 2 + abs(ob.T) ** 2 - 1)}
    return rec


def sweep_row(params: PhysParams, E: float) -> Optional[list]:
    """One CSV row, or None when E is rejected (threshold or sub-threshold)."""
    try:
        zone = classify_zone(params, E)
    except BranchPoint as exc:
        log.warning("skipping E=%s: %s", fmt(E), exc)
        return None
    if zone is EnergyZone.SUB_THRESHOLD:
        log.warning("skipping E=%s: below threshold", fmt(E))
        return None
    sol = solve(params, E)
    J_left = float(current_density(evaluate_field(sol, -1.0)))
    J_right = float(current_density(evaluate_field(sol, 1.0)))
    if zone is EnergyZone.KLEIN:
        a = sol.amps
        R2, T2, Rv2, Tv2 = abs(a.R) ** 2, abs(a.T) ** 2, abs(a.R_virt) ** 2, abs(a.T_virt) ** 2
        defect = max(abs(R2 + T2 - 1), abs(Rv2 + Tv2 - 1), abs(R2 + Tv2 - 1), abs(Rv2 + T2 - 1))
    else:
        R2 = abs(sol.amps.R) ** 2
        T2 = abs(sol.amps.T) ** 2
        Rv2 = Tv2 = math.nan
        defect = abs(R2 + T2 - 1)
    return [E, str(zone), R2, T2, Rv2, Tv2, defect, J_left, J_right]


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([c if isinstance(c, str) else fmt(c) for c in r])
    return buf.getvalue()


# -- output --------------------------------------------------------------------

def resolve_out(path: Optional[str]) -> Optional[Path]:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get("KLEIN_OUT_DIR")
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _emit(text: str, path: Optional[str]):
    out = resolve_out(path)
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
    log.info("wrote %s", out)


# -- commands -----------------------------------------------------------------

def cmd_solve(args) -> int:
    params = PhysParams(args.m, args.V)
    rec = solution_record(params, args.E)
    _emit(dumps(rec) + "\n", args.out)
    return 0


def _sweep_energies(params, args) -> np.ndarray:
    if args.emin is None or args.emax is None:
        raise InputError("sweep needs --emin and --emax")
    if not args.emin > params.m:
        raise InputError(f"--emin must exceed m={params.m!r}")
    if not (math.isfinite(args.emax) and args.emax >= args.emin):
        raise InputError("--emax must be finite and >= --emin")
    if args.n < 2:
        raise InputError("--n must be >= 2")
    return np.linspace(args.emin, args.emax, args.n)


def cmd_sweep(args) -> int:
    params = PhysParams(args.m, args.V)
    rows = [r for E in _sweep_energies(params, args) if (r := sweep_row(params, float(E))) is not None]
    if not rows:
        log.warning("sweep produced no data rows")
    if args.format == "json":
        text = dumps([dict(zip(SWEEP_HEADER, r)) for r in rows]) + "\n"
    elif args.format == "svg":
        text = line_chart([r[0] for r in rows], {"|R|^2": [r[2] for r in rows], "|T|^2": [r[3] for r in rows]},
                          title=f"step m={args.m:g} V={args.V:g}", xlabel="E", ylabel="probability")
    else:
        text = _csv_text(SWEEP_HEADER, rows)
    _emit(text, args.out)
    if args.plot:
        _emit(line_chart([r[0] for r in rows], {"|R|^2": [r[2] for r in rows]},
                         title=f"reflection m={args.m:g} V={args.V:g}", xlabel="E", ylabel="|R|^2"), args.plot)
    return 0


def default_verify_energies(params: PhysParams) -> list[float]:
    """Three interior points per non-empty zone."""
    out = []
    for zone in (EnergyZone.KLEIN, EnergyZone.EVANESCENT):
        lo, hi = zone_interval(params, zone)
        if hi - lo > 0:
            out += [lo + f * (hi - lo) for f in (0.25, 0.5, 0.75)]
        else:
            log.warning("%s zone is empty for m=%g, V=%g", zone, params.m, params.V)
    lo = params.V + params.m
    out += [lo + f * params.m for f in (0.5, 1.0, 2.0)]
    return out


def _verify_one(job):
    params, E, a_seq, tol = job
    analytic = solve(params, E).mode("reflected").amplitude
    lim = sharp_limit(params, E, a_seq, tol=tol)
    return E, analytic, lim.R_extrapolated, lim.convergence_order


def cmd_verify(args) -> int:
    params = PhysParams(args.m, args.V)
    energies = args.E if args.E else default_verify_energies(params)
    a_seq = (4 * args.a_min, 2 * args.a_min, args.a_min)
    jobs = []
    for E in energies:
        zone = classify_zone(params, E)
        if zone is EnergyZone.SUB_THRESHOLD:
            raise InputError(f"E={E!r} is below threshold")
        jobs.append((params, float(E), a_seq, args.tol))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_verify_one, jobs))
    else:
        results = [_verify_one(j) for j in jobs]
    rows, worst, ok = [], 0.0, True
    for E, an, ex, q in results:
        gap = abs(ex - an)
        worst = max(worst, gap)
        passed = gap <= args.threshold
        ok &= passed
        rows.append({"E": E, "zone": str(classify_zone(params, E)), "R_analytic": an, "R_oracle": ex,
                     "gap": gap, "order": q, "pass": passed})
    if args.format == "json":
        text = dumps({"m": params.m, "V": params.V, "threshold": args.threshold, "max_gap": worst,
                      "pass": ok, "rows": rows}) + "\n"
    else:
        lines = [f"{'E':>10} {'zone':>12} {'R analytic':>28} {'R oracle':>28} {'gap':>10} {'q':>6}"]
        for r in rows:
            lines.append(f"{r['E']:10.6f} {r['zone']:>12} {r['R_analytic']:>28.10f} {r['R_oracle']:>28.10f} "
                         f"{r['gap']:10.2e} {r['order']:6.3f} {'PASS' if r['pass'] else 'FAIL'}")
        lines.append(f"max gap {worst:.3e} threshold {args.threshold:.1e}: {'PASS' if ok else 'FAIL'}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0 if ok else 2


def cmd_packet(args) -> int:
    import warnings

    params = PhysParams(args.m, args.V)
    if args.E0 is None:
        raise InputError("packet needs --E0")
    family = Family.COMBINED if args.family == "combined" else Family.TRADITIONAL
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ZoneStraddle)
        grid = build_gaussian(params, args.E0, args.sigma, args.n, x0=args.x0)
    for w in caught:
        log.warning("%s", w.message)
    t_final = asymptotic_time(grid)
    times = args.t if args.t else [float(v) for v in np.linspace(0.0, t_final, args.snapshots)]
    x = suggest_x_grid(grid, max(times), dx=args.dx)
    out_dir = resolve_out(args.out or "packet_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    snaps = []
    for i, t in enumerate(times):
        state = evolve(grid, t, x, family)
        d = reflection_and_penetration(state)
        psi = state.psi
        rows = zip(x, psi[0].real, psi[0].imag, psi[1].real, psi[1].imag, state.density)
        name = f"snapshot_{i:03d}.csv"
        with open(out_dir / name, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(_csv_text(PACKET_HEADER, rows))
        snaps.append({"t": t, "file": name, "refl_norm": d.refl_norm, "pen_prob": d.pen_prob,
                      "trans_norm": d.trans_norm, "left_norm": d.left_norm})
    last = snaps[-1]
    summary = {
        "refl_norm": last["refl_norm"],
        "pen_prob": last["pen_prob"],
        "trans_norm": last["trans_norm"],
        "max_pen_prob": max(s["pen_prob"] for s in snaps),
        "spectral_T2": spectral_transmission(grid),
        "zone_fractions": grid.zone_fractions(),
        "straddle": grid.straddle,
        "family": str(family),
        "snapshots": snaps,
    }
    with open(out_dir / "summary.json", "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(summary) + "\n")
    meta = {"version": __version__, "argv": [a for a in sys.argv[1:]], "m": params.m, "V": params.V,
            "E0": args.E0, "sigma": args.sigma, "n": args.n, "x0": args.x0, "dx": args.dx}
    with open(out_dir / "run.meta.json", "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(meta) + "\n")
    if args.format == "json":
        sys.stdout.write(dumps(summary) + "\n")
    else:
        sys.stdout.write(f"wrote {len(snaps)} snapshots to {out_dir}\n"
                         f"refl_norm={fmt(summary['refl_norm'])} pen_prob={fmt(summary['pen_prob'])} "
                         f"trans_norm={fmt(summary['trans_norm'])} max_pen_prob={fmt(summary['max_pen_prob'])}\n")
    return 0


def cmd_zones(args) -> int:
    params = PhysParams(args.m, args.V)
    info: dict[str, Any] = {"m": params.m, "V": params.V, "klein_zone_exists": params.has_klein_zone,
                            "boundaries": params.boundaries()}
    if args.E:
        info["energies"] = []
        for E in args.E:
            try:
                z = str(classify_zone(params, E))
            except BranchPoint as exc:
                z = f"BranchPoint ({exc.name})"
            info["energies"].append({"E": E, "zone": z})
    _emit(dumps(info) + "\n", args.out)
    return 0


# -- parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=float, default=1.0, help="rest mass (default: 1, the mass unit)")
    common.add_argument("--V", type=float, default=4.0, help="step height (default: 4)")
    common.add_argument("--out", default=None, help="output path (default: stdout; packet: directory packet_out)")
    common.add_argument("--format", choices=("csv", "json", "svg"), default=None, help="output format")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = _Parser(prog="kleinstep", description="Dirac scattering off a potential step (natural units).")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", parents=[common], help="matched solution at one energy (JSON)")
    s.add_argument("--E", type=float, required=True, help="energy")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", parents=[common], help="reflection/transmission over an energy range (CSV)")
    s.add_argument("--emin", type=float, help="lowest energy, must exceed m")
    s.add_argument("--emax", type=float, help="highest energy")
    s.add_argument("--n", type=int, default=201, help="number of energies (default: 201)")
    s.add_argument("--plot", default=None, help="also write an SVG plot of R2 vs E to this path")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("packet", parents=[common], help="Gaussian wave packet snapshots and summary")
    s.add_argument("--E0", type=float, help="central energy")
    s.add_argument("--sigma", type=float, default=0.1, help="energy spread sigma_E (default: 0.1)")
    s.add_argument("--n", type=int, default=256, help="energy samples (default: 256)")
    s.add_argument("--x0", type=float, default=-40.0, help="initial packet centre, < 0 (default: -40)")
    s.add_argument("--t", type=_floats, default=None,
                   help="comma-separated snapshot times (default: evenly spaced up to the asymptotic time)")
    s.add_argument("--snapshots", type=int, default=9, help="number of default snapshots (default: 9)")
    s.add_argument("--dx", type=float, default=0.05, help="spatial grid spacing (default: 0.05)")
    s.add_argument("--family", choices=("combined", "traditional"), default="combined",
                   help="Klein-zone states: with virtual incidence (combined) or without (default: combined)")
    s.set_defaults(func=cmd_packet)

    s = sub.add_parser("verify", parents=[common], help="compare closed forms with the ODE oracle")
    s.add_argument("--E", type=_floats, default=None, help="comma-separated energies (default: 9 zone-interior points)")
    s.add_argument("--tol", type=float, default=1e-10, help="integrator tolerance (default: 1e-10)")
    s.add_argument("--a-min", type=float, default=2.5e-3, help="finest smoothing width (default: 2.5e-3)")
    s.add_argument("--threshold", type=float, default=1e-4, help="pass threshold on |R - R_oracle| (default: 1e-4)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("zones", parents=[common], help="zone boundaries, optionally classify energies")
    s.add_argument("--E", type=_floats, default=None, help="comma-separated energies to classify")
    s.set_defaults(func=cmd_zones)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KleinError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
