"""Command-line driver: parameter sweeps written as reproducible CSV.

    zigzag <ed|phase|rpa|perturb|fidelity> [flags]

Every command renders one CSV table (stdout or --out).  Identical
configurations produce byte-identical files: fixed float formatting, grid
points in row-major order, worker results merged in grid order.  With
--resume, rows already present in the output file are kept verbatim and
only missing grid points are recomputed.

Exit codes: 0 success, 1 configuration error, 2 completed with per-point
failures (failed rows carry NaN columns).
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import exact, meanfield, perturb, rpa
from .model import (
    LadderError,
    SpinValue,
    spec_from_json,
    uniform_spec,
)
from .tableio import format_value, read_csv_lines, render_row, write_csv


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; config errors are 1
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# sweep grammar
# ---------------------------------------------------------------------------

def parse_sweep(min_max_steps: str) -> np.ndarray:
    """'min:max:steps' inclusive of both ends; steps is the point count."""
    parts = min_max_steps.split(":")
    if len(parts) != 3:
        raise ConfigError(f"sweep must be min:max:steps, got {min_max_steps!r}")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1 or not np.isfinite(lo) or not np.isfinite(hi):
        raise ConfigError(f"bad sweep bounds {min_max_steps!r}")
    return np.linspace(lo, hi, steps)


_LINE_RE = re.compile(
    r"^(?P<lhs>[A-Za-z0-9]+)=(?:(?P<num>[0-9.eE+-]+)\*)?(?P<rhs>[A-Za-z0-9]+)"
    r"(?:/(?P<den>[0-9.eE+-]+))?$"
)


def parse_line_constraint(text: str):
    """'J2=Jp/2' or 'Jp=2*J2' -> (target var, source var, multiplier)."""
    m = _LINE_RE.match(text.replace(" ", ""))
    if not m:
        raise ConfigError(f"cannot parse line constraint {text!r}")
    mult = float(m.group("num")) if m.group("num") else 1.0
    if m.group("den"):
        mult /= float(m.group("den"))
    return m.group("lhs"), m.group("rhs"), mult


def parse_fixed(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"--fixed expects VAR=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = float(val)
    return out


def parse_spins(text: str):
    return [SpinValue.parse(tok) for tok in text.split(",") if tok]


def couplings_at(sweep_var: str, x: float, fixed: dict, line=None) -> dict:
    values = {"J": 1.0, "Jp": 0.0, "J2": 0.0}
    values.update(fixed)
    values[sweep_var] = float(x)
    if line is not None:
        lhs, rhs, mult = line
        values[lhs] = mult * values[rhs]
    return values


# ---------------------------------------------------------------------------
# shared command plumbing
# ---------------------------------------------------------------------------

def _map_jobs(fn, items, jobs: int):
    """Order-preserving map, optionally across worker threads.

    Threads suffice here: the grid-point work is numpy/LAPACK-bound, which
    releases the GIL, and results merge in grid order regardless of
    completion order.
    """
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _guard(fn, n_nan_cols):
    """Wrap a row computation; failures become NaN tails."""
    def wrapped(item):
        try:
            return True, fn(item)
        except Exception as err:  # pragma: no cover - per-point robustness
            return False, [format_value(float("nan"))] * n_nan_cols
    return wrapped


def emit_table(args, header, keys, compute_row, jobs: int):
    """Render/reuse rows per grid key, write CSV, return failure count.

    ``keys`` are pre-rendered key-column strings (one tuple per grid
    point); a resumed row is reused when its key columns match.
    """
    existing = {}
    if getattr(args, "resume", False) and args.out:
        hdr, lines = read_csv_lines(args.out)
        if hdr == header:
            for ln in lines:
                fields = ln.split(",")
                existing[tuple(fields[: len(keys[0])])] = ln
    todo = [i for i, key in enumerate(keys) if key not in existing]
    results = _map_jobs(compute_row, todo, jobs)
    failures = 0
    by_index = {}
    for i, (ok, tail) in zip(todo, results):
        if not ok:
            failures += 1
        by_index[i] = ",".join(list(keys[i]) + list(tail))
    lines = [existing.get(key, by_index.get(i)) for i, key in enumerate(keys)]
    write_csv(args.out, header, lines)
    return failures


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ed(args) -> int:
    if args.spec:
        spec = spec_from_json(open(args.spec).read())
        rows = []
        for tsz in (0, 2):
            try:
                res = exact.sector_spectrum(spec, tsz, n_levels=args.levels,
                                            want_states=False)
            except LadderError:
                continue
            for lvl, (e, r) in enumerate(zip(res.energies, res.residuals)):
                rows.append([tsz, lvl, e, r])
        write_csv(args.out, ["twice_sz", "level", "energy", "residual"], rows)
        return 0

    spins = parse_spins(args.spins)
    xs = parse_sweep(args.sweep_grid)
    fixed = parse_fixed(args.fixed) if args.fixed else {}
    line = parse_line_constraint(args.line) if args.line else None
    grid = [(sv, float(x)) for sv in spins for x in xs]
    keys = [(sv.label, format_value(x)) for sv, x in grid]

    def run(i):
        sv, x = grid[i]
        c = couplings_at(args.sweep_var, x, fixed, line)
        spec = uniform_spec(args.rungs, sv, c["J"], c["Jp"], c["J2"],
                            boundary=args.boundary)
        from .model import dimer_energy

        e_dim, _ = dimer_energy(spec)
        e_gs, _, _ = exact.ground_state_full(spec)
        return [format_value(v) for v in
                (c["Jp"], c["J2"], e_gs, e_dim, e_gs / e_dim - 1.0)]

    header = ["spin", "x", "jp", "j2", "e_gs", "e_dimer", "rel_energy"]
    return 2 if emit_table(args, header, keys, _guard(run, 5), args.jobs) else 0


def cmd_phase(args) -> int:
    if args.jp is not None and args.j2 is not None:
        jps, j2s = [args.jp], [args.j2]
    else:
        jps = parse_sweep(args.sweep_jp)
        j2s = parse_sweep(args.sweep_j2)
    spin = SpinValue.parse(args.spin)
    grid = [(float(a), float(b)) for a in jps for b in j2s]
    keys = [(format_value(a), format_value(b)) for a, b in grid]

    def run(i):
        jp, j2 = grid[i]
        from .model import CouplingPattern

        point = meanfield.classical_phase(
            CouplingPattern.uniform(1, 1.0, jp, j2), spin)
        return [point.label, format_value(point.energy_per_rung),
                format_value(point.theta), format_value(point.phi)]

    header = ["jp_over_j", "j2_over_j", "label", "energy_per_rung", "theta", "phi"]
    return 2 if emit_table(args, header, keys, _guard(run, 4), args.jobs) else 0


def cmd_rpa(args) -> int:
    if args.dispersion:
        spec = rpa.dimer_rpa_dispersion(args.gamma, args.rungs)
        rows = [
            [i, spec.momenta[i], spec.omega[i], bool(spec.zero_modes[i])]
            for i in range(len(spec.momenta))
        ]
        write_csv(args.out, ["k_index", "k_radians", "omega", "zero_mode_flag"], rows)
        return 0
    if args.spiral:
        from .model import CouplingPattern

        spin = SpinValue.parse(args.spin)
        c = CouplingPattern.uniform(1, 1.0, args.jp, args.j2)
        extrema = meanfield.classical_extrema(c, spin)
        angles, _ = min(extrema, key=lambda t: t[1])
        spec = rpa.spiral_rpa_spectrum(angles, c, spin, args.nk)
        rows = [
            [i, spec.momenta[i], spec.omega_minus[i], spec.omega_plus[i],
             bool(spec.zero_modes[i])]
            for i in range(len(spec.momenta))
        ]
        write_csv(args.out, ["k_index", "k_radians", "omega_minus",
                             "omega_plus", "zero_mode_flag"], rows)
        return 0
    # energy curve along a J2 sweep at fixed J'
    spin = SpinValue.parse(args.spin)
    j2s = parse_sweep(args.sweep_grid)
    keys = [(format_value(float(x)),) for x in j2s]

    def run(i):
        row = rpa.rpa_energy_curves(spin, args.jp, [float(j2s[i])],
                                    n_rungs=args.rungs, n_k=args.nk,
                                    with_exact=not args.no_ed)[0]
        return [format_value(row[k]) for k in
                ("gamma", "e_mf_site", "e_rpa_site", "stable_site", "e_mf_pair",
                 "e_rpa_pair", "stable_pair", "e_exact", "e_dimer")]

    header = ["j2_over_j", "gamma", "e_mf_site", "e_rpa_site", "stable_site",
              "e_mf_pair", "e_rpa_pair", "stable_pair", "e_exact", "e_dimer"]
    return 2 if emit_table(args, header, keys, _guard(run, 9), args.jobs) else 0


PERTURB_HEADER = [
    "jp_over_j", "dE_one_exc", "dE_two_exc_j1", "dE_two_exc_j2",
    "dE_two_exc_far", "dE_resum_pair", "dE_resum_single",
    "gap_perturbative", "gap_ed",
]


def cmd_perturb(args) -> int:
    if args.sectors:
        rows, _ = perturb.gap_vs_ed(args.spin, [args.jp], n_rungs=args.rungs,
                                    with_ed=args.with_ed,
                                    boundary=args.boundary)
        write_csv(args.out, PERTURB_HEADER, [_gap_row(rows[0])])
        return 0
    if args.sweep_grid:
        xs = parse_sweep(args.sweep_grid)
        rows, departure = perturb.gap_vs_ed(args.spin, xs, n_rungs=args.rungs,
                                            with_ed=args.with_ed,
                                            boundary=args.boundary)
        write_csv(args.out, PERTURB_HEADER, [_gap_row(r) for r in rows])
        if departure is not None:
            print(f"# ed dimer departure at jp_over_j = {format_value(departure)}",
                  file=sys.stderr)
        return 0
    spins = parse_spins(args.spins)
    rows = [[sv.twice_s, sv.label, perturb.critical_coupling(sv)] for sv in spins]
    write_csv(args.out, ["twice_s", "spin", "jp_critical"], rows)
    return 0


def _gap_row(r) -> list:
    return [r.jp_over_j, r.de_one_exc, r.de_two_exc_j1, r.de_two_exc_j2,
            r.de_two_exc_far, r.de_resum_pair, r.de_resum_single,
            r.gap_perturbative, r.gap_ed]


def cmd_fidelity(args) -> int:
    spins = parse_spins(args.spins)
    xs = parse_sweep(args.sweep_grid)
    fixed = parse_fixed(args.fixed) if args.fixed else {}
    line = parse_line_constraint(args.line) if args.line else None
    grid = [(sv, float(x)) for sv in spins for x in xs]
    keys = [(sv.label, format_value(x)) for sv, x in grid]

    def run(i):
        sv, x = grid[i]
        c = couplings_at(args.sweep_var, x, fixed, line)
        spec = uniform_spec(args.rungs, sv, c["J"], c["Jp"], c["J2"],
                            boundary=args.boundary)
        kw = {}
        if args.reference == "srmf":
            from .model import CouplingPattern

            extrema = meanfield.classical_extrema(
                CouplingPattern.uniform(1, c["J"], c["Jp"], c["J2"]), sv)
            kw["reference_angles"] = min(extrema, key=lambda t: t[1])[0]
        fid = exact.rung_state_fidelity(spec, reference=args.reference, **kw)
        return [format_value(v) for v in (c["Jp"], c["J2"], fid)]

    header = ["spin", "x", "jp", "j2", f"fidelity_{args.reference}"]
    return 2 if emit_table(args, header, keys, _guard(run, 3), args.jobs) else 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--config", help="JSON file whose keys override flags")
    p.add_argument("--jobs", type=int,
                   default=int(os.environ.get("ZIGZAG_JOBS", "1")),
                   help="parallel workers for grid points")
    p.add_argument("--resume", action="store_true",
                   help="reuse rows already present in --out")
    p.add_argument("--boundary", choices=("periodic", "open"), default="periodic")


def _add_sweep(p, default_var):
    p.add_argument("--sweep", nargs=2, metavar=("VAR", "MIN:MAX:STEPS"),
                   help="swept coupling and inclusive grid")
    p.add_argument("--line", help="tie a coupling to the sweep, e.g. J2=Jp/2")
    p.add_argument("--fixed", help="comma list of VAR=VALUE couplings")
    p.set_defaults(default_sweep_var=default_var)


def build_parser() -> _Parser:
    ap = _Parser(prog="zigzag", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ed", help="exact-diagonalization energy sweeps")
    _add_sweep(p, "Jp")
    p.add_argument("--spins", default="1/2")
    p.add_argument("--rungs", type=int, default=4)
    p.add_argument("--spec", help="JSON ladder spec; prints low levels instead")
    p.add_argument("--levels", type=int, default=4)
    _add_common(p)
    p.set_defaults(fn=cmd_ed)

    p = sub.add_parser("phase", help="classical phase diagram grid")
    p.add_argument("--sweep-jp", default="0:2:41", metavar="MIN:MAX:STEPS")
    p.add_argument("--sweep-j2", default="0:1.2:25", metavar="MIN:MAX:STEPS")
    p.add_argument("--jp", type=float, help="single-point J'/J")
    p.add_argument("--j2", type=float, help="single-point J2/J")
    p.add_argument("--spin", default="1/2")
    _add_common(p)
    p.set_defaults(fn=cmd_phase)

    p = sub.add_parser("rpa", help="excitation spectra and corrected energies")
    p.add_argument("--dispersion", action="store_true",
                   help="dimer-line boson dispersion at --gamma")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--spiral", action="store_true",
                   help="two-branch spectrum over the optimal spiral")
    p.add_argument("--jp", type=float, default=0.6)
    p.add_argument("--j2", type=float, default=0.3)
    p.add_argument("--spin", default="1/2")
    p.add_argument("--rungs", type=int, default=4,
                   help="rungs for --dispersion and the ED join")
    p.add_argument("--nk", type=int, default=256, help="momentum grid size")
    p.add_argument("--no-ed", action="store_true",
                   help="skip the exact column in energy curves")
    _add_sweep(p, "J2")
    _add_common(p)
    p.set_defaults(fn=cmd_rpa)

    p = sub.add_parser("perturb", help="perturbative gaps and critical coupling")
    p.add_argument("--spins", default="1/2,1,3/2,2,5/2,3")
    p.add_argument("--spin", default="1/2")
    p.add_argument("--jp", type=float, default=0.5)
    p.add_argument("--sectors", action="store_true",
                   help="sector energies at a single --jp")
    p.add_argument("--with-ed", action="store_true")
    p.add_argument("--rungs", type=int, default=6)
    _add_sweep(p, "Jp")
    _add_common(p)
    p.set_defaults(fn=cmd_perturb)

    p = sub.add_parser("fidelity", help="exact local state vs reference pair state")
    _add_sweep(p, "Jp")
    p.add_argument("--spins", default="1/2")
    p.add_argument("--rungs", type=int, default=4)
    p.add_argument("--reference", choices=("singlet", "srmf"), default="singlet")
    _add_common(p)
    p.set_defaults(fn=cmd_fidelity)
    return ap


def _apply_config(args):
    if getattr(args, "config", None):
        try:
            overrides = json.loads(open(args.config).read())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"bad --config file: {err}")
        for key, val in overrides.items():
            setattr(args, key.replace("-", "_"), val)


def _resolve_sweep(args):
    if hasattr(args, "sweep") and args.sweep:
        args.sweep_var, args.sweep_grid = args.sweep[0], args.sweep[1]
    elif hasattr(args, "default_sweep_var"):
        args.sweep_var, args.sweep_grid = args.default_sweep_var, None
    if getattr(args, "sweep_var", None) not in (None, "J", "Jp", "J2"):
        raise ConfigError(f"unknown sweep variable {args.sweep_var!r}")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _apply_config(args)
        _resolve_sweep(args)
        needs_grid = args.command in ("ed", "fidelity") and not getattr(args, "spec", None)
        if needs_grid and not args.sweep_grid:
            raise ConfigError("this command requires --sweep VAR MIN:MAX:STEPS")
        if args.command == "rpa" and not (args.dispersion or args.spiral) \
                and not args.sweep_grid:
            raise ConfigError("rpa needs --dispersion, --spiral, or --sweep")
        return args.fn(args)
    except ConfigError as err:
        print(f"zigzag: {err}", file=sys.stderr)
        return 1
    except LadderError as err:
        print(f"zigzag: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
