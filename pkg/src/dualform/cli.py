"""Command-line entry point.

Exit codes: 0 success, 1 a theorem check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import load_dsl, parse_builtin_spec
from .curvature import bidual_distance, decomposition_report, inverse_duality
from .dualizer import generic_dual_dimension, resolve_grid, sample_dual, trace_dual
from .expr import ParseError
from .patch import DEFAULT_FD_STEP
from .report import SCHEMA, cloud_csv, columns, dumps, measured, ply

DEFAULT_GRID = 256
DEFAULT_TOL = 1e-6
DEFAULT_SAMPLES = 100


class InputError(Exception):
    pass


def _grid(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected N[,N...]") from None
    if min(vals) < 2:
        raise argparse.ArgumentTypeError("grid resolutions must be >= 2")
    return vals


def _projection(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad projection {text!r}; expected i,j,k") from None
    if min(vals) < 1:
        raise argparse.ArgumentTypeError("projection indices are 1-based")
    return vals


def _add_patch_flags(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--builtin", metavar="NAME[:p1,p2]", help="catalog patch, e.g. small_circle:0.6")
    src.add_argument("--dsl", metavar="FILE", help="patch file in the parametrization DSL")
    p.add_argument("--fd-step", type=float, metavar="H",
                   help="use central differences with step H instead of AD")
    p.add_argument("--out", metavar="FILE", help="write the main output here (default stdout)")


def _build_parser():
    parser = argparse.ArgumentParser(prog="dualform",
                                     description="Dual varieties and second fundamental forms "
                                                 "of spherical and hyperbolic submanifolds.")
    parser.add_argument("--version", action="version", version=f"dualform {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="sample the dual variety and write a CSV cloud")
    _add_patch_flags(p)
    p.add_argument("--grid", type=_grid, help=f"points per axis (default {DEFAULT_GRID})")
    p.add_argument("--ply", metavar="FILE", help="also write the q cloud as ASCII PLY")

    p = sub.add_parser("check", help="decomposition and inverse-matrix checks at random pairs")
    _add_patch_flags(p)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                   help="random dual pairs to check (default 100)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                   help="pass threshold for the residuals (default 1e-6)")

    p = sub.add_parser("bidual", help="Hausdorff distances between (M^v)^v and its target")
    _add_patch_flags(p)
    p.add_argument("--grid", type=_grid, help=f"points per axis (default {DEFAULT_GRID})")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL,
                   help="Hausdorff threshold in both directions (default 1e-6)")
    p.add_argument("--ply", metavar="FILE", help="also write the bidual sample as ASCII PLY")

    p = sub.add_parser("plotdata", help="whitespace columns for external plotting")
    _add_patch_flags(p, required=False)
    p.add_argument("--input", metavar="CSV", help="a trace CSV instead of a patch")
    p.add_argument("--cloud", choices=("p", "q", "bidual"), default="q",
                   help="which point cloud to print (default q)")
    p.add_argument("--grid", type=_grid, help=f"points per axis (default {DEFAULT_GRID})")
    p.add_argument("--project", type=_projection, metavar="i,j,k",
                   help="1-based coordinates to keep (default 1,2,3)")
    p.add_argument("--label", action="store_true",
                   help="append the block dimensions (patch input) or dual rank (CSV input)")
    return parser


def _load_patch(args):
    try:
        if args.builtin:
            return parse_builtin_spec(args.builtin)
        text = Path(args.dsl).read_text()
        return load_dsl(text, name=Path(args.dsl).name)
    except (OSError, ValueError, ParseError) as err:
        raise InputError(str(err)) from None


def _method(args):
    return ("FD", args.fd_step) if args.fd_step is not None else ("AD", DEFAULT_FD_STEP)


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _base_report(args, patch, settings):
    method, h = _method(args)
    settings = dict(settings, jet_method=method)
    if method == "FD":
        settings["fd_step"] = h
    return {"schema": SCHEMA, "tool": {"name": "dualform", "version": __version__},
            "command": args.command,
            "patch": {"description": patch.describe(), "sheet": patch.sheet.value,
                      "ambient_dim": patch.metric.ambient_dim, "param_dim": patch.param_dim},
            "settings": settings}


def _grid_setting(args, patch):
    grid = args.grid or [DEFAULT_GRID]
    res, fiber = resolve_grid(grid, patch.param_dim, patch.codim)
    return grid, {"grid": res, "fiber_grid": fiber if patch.codim > 1 else 2,
                  "grid_default": args.grid is None}


def cmd_trace(args):
    patch = _load_patch(args)
    method, h = _method(args)
    grid, settings = _grid_setting(args, patch)
    cloud = trace_dual(patch, grid, method, h)
    _emit(args, cloud_csv(cloud, patch))
    if args.ply:
        Path(args.ply).write_text(ply(cloud.q_array()))
    report = _base_report(args, patch, settings)
    report["results"] = {"rows": len(cloud.pairs), "skipped_nonsmooth": cloud.skipped}
    report["exit_status"] = 0
    sys.stderr.write(dumps(report) + "\n")
    return 0


def cmd_check(args):
    patch = _load_patch(args)
    method, h = _method(args)
    if args.samples < 1:
        raise InputError("--samples must be positive")
    cloud = sample_dual(patch, args.samples, args.seed, method, h)
    ms = patch.metric
    counts = {"PASS": 0, "FAIL": 0, "excluded": 0}
    inv = {"ok": 0, "fail": 0, "vacuous": 0, "excluded": 0}
    residuals, ortho = [], []
    for pr in cloud.pairs:
        d = decomposition_report(ms, pr, tol=args.tol)
        counts[d.status] += 1
        if d.status != "excluded":
            ortho.append(max(d.ortho_residual, d.span_residual, *d.item_residuals))
        r = inverse_duality(ms, pr)
        if r.status == "ok":
            residuals.append(r.residual)
            inv["ok" if r.residual <= args.tol else "fail"] += 1
        else:
            inv[r.status] += 1
    failed = counts["FAIL"] > 0 or inv["fail"] > 0
    dim, frac = generic_dual_dimension(cloud) if cloud.pairs else (0, 0.0)

    report = _base_report(args, patch, {"samples": args.samples, "seed": args.seed,
                                        "tol": args.tol})
    report["results"] = {
        "pairs": len(cloud.pairs),
        "skipped_nonsmooth": cloud.skipped,
        "generic_pairs": sum(pr.generic for pr in cloud.pairs),
        "dual_dimension": dim,
        "generic_fraction": measured(frac, None),
        "decomposition": {"pass": counts["PASS"], "fail": counts["FAIL"],
                          "excluded": counts["excluded"],
                          "max_residual": measured(max(ortho) if ortho else 0.0, args.tol)},
        "inverse_duality": {
            "ok": inv["ok"], "fail": inv["fail"], "vacuous": inv["vacuous"],
            "excluded": inv["excluded"],
            "max_residual": measured(max(residuals) if residuals else 0.0, args.tol),
            "median_residual": measured(statistics.median(residuals) if residuals else 0.0,
                                        args.tol),
        },
    }
    report["status"] = "FAIL" if failed else "PASS"
    report["exit_status"] = 1 if failed else 0
    _emit(args, dumps(report) + "\n")
    return report["exit_status"]


def cmd_bidual(args):
    patch = _load_patch(args)
    method, h = _method(args)
    grid, settings = _grid_setting(args, patch)
    try:
        res = bidual_distance(patch, grid, method, h)
    except (NotImplementedError, ValueError) as err:
        raise InputError(f"biduality check not possible: {err}") from None
    ok = res.within(args.tol)
    report = _base_report(args, patch, dict(settings, tol=args.tol))
    report["results"] = {
        "target": res.target,
        "d_forward": measured(res.d_forward, args.tol),
        "d_backward": measured(res.d_backward, args.tol),
        "bidual_points": res.n_bidual,
        "target_points": res.n_target,
        "dual_dimension": res.dual_rank,
    }
    if res.target != "M":
        report["results"]["d_antipodal"] = measured(res.d_antipodal, args.tol)
    report["status"] = "PASS" if ok else "FAIL"
    report["exit_status"] = 0 if ok else 1
    if args.ply:
        Path(args.ply).write_text(ply(res.bidual))
    _emit(args, dumps(report) + "\n")
    return report["exit_status"]


def _read_trace_csv(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise InputError(str(err)) from None
    if not lines:
        return [], np.zeros((0, 0)), []
    header = lines[0].split(",")
    if "rank" not in header or not any(h.startswith("q") for h in header):
        raise InputError(f"{path}: not a trace CSV (header {lines[0]!r})")
    try:
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
    except ValueError as err:
        raise InputError(f"{path}: {err}") from None
    return header, rows.reshape(-1, len(header)), header


def cmd_plotdata(args):
    proj = [i - 1 for i in (args.project or [1, 2, 3])]
    labels = None
    if args.input:
        if args.cloud == "bidual":
            raise InputError("--cloud bidual needs a patch, not a trace CSV")
        header, rows, _ = _read_trace_csv(args.input)
        if rows.size == 0:
            sys.stderr.write(f"warning: {args.input} holds an empty cloud\n")
            _emit(args, "")
            return 0
        cols = [i for i, h in enumerate(header) if h.startswith(args.cloud)
                and h[1:].isdigit()]
        pts = rows[:, cols]
        if args.label:
            labels = [str(int(r)) for r in rows[:, header.index("rank")]]
    else:
        if not (args.builtin or args.dsl):
            raise InputError("plotdata needs --input, --builtin or --dsl")
        patch = _load_patch(args)
        method, h = _method(args)
        grid, _ = _grid_setting(args, patch)
        if args.cloud == "bidual":
            pts = bidual_distance(patch, grid, method, h).bidual
        else:
            cloud = trace_dual(patch, grid, method, h)
            pts = np.array([getattr(pr, args.cloud) for pr in cloud.pairs]).reshape(
                -1, patch.metric.ambient_dim)
            if args.label:
                ms = patch.metric
                labels = ["-".join(map(str, decomposition_report(ms, pr).dims)) or "excluded"
                          for pr in cloud.pairs]
        if len(pts) == 0:
            sys.stderr.write("warning: empty cloud\n")
    if pts.size and max(proj) >= pts.shape[1]:
        raise InputError(f"--project index {max(proj) + 1} exceeds dimension {pts.shape[1]}")
    _emit(args, columns(pts[:, proj] if pts.size else [], labels))
    return 0


COMMANDS = {"trace": cmd_trace, "check": cmd_check, "bidual": cmd_bidual,
            "plotdata": cmd_plotdata}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as err:
        sys.stderr.write(f"dualform {args.command}: error: {err}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
