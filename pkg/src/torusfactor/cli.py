"""Command line interface.

Subcommands:

    decompose   factor an input diffeomorphism and write factors + report
    verify      recompute the bracket product of a factor file against an input
    probe       finite-difference stability of the factor map
    certify     emit a Diophantine certificate for a rotation vector
    make-input  write an example input field (convenience)

Exit codes: 0 success; 1 verification failure (residual above tolerance);
2 input or chart rejection; 3 solver divergence.
"""

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as tio
from .cohomology import GOLDEN_MEAN, SQRT2_MINUS_1, certify_diophantine
from .diffeo import make_diffeo
from .errors import (
    ChartViolationError,
    ChartWarning,
    DiophantineError,
    FragmentationError,
    InputError,
    InversionError,
    LeafwiseError,
    SmallDivisorBreach,
    SolverDivergenceError,
    TorusFactorError,
)
from .grid import DisplacementField, GridSpec
from .pipeline import CommutatorList, CommutatorPair, PipelineConfig, decompose, smoothness_probe, verify
from .reporting import render_figures, write_factor_csv, write_residual_csv
from .suite import probe_direction

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_DIVERGED = 3


def _parse_gamma(text):
    if text == "golden":
        return GOLDEN_MEAN
    if text.startswith("custom:"):
        vals = [float(v) for v in text[len("custom:") :].split(",") if v]
        if len(vals) == 1:
            return vals[0]
        return tuple(vals)
    raise InputError(f"unknown gamma spec {text!r}; use 'golden' or 'custom:v[,v2]'")


def _config_from_args(args):
    cfg = PipelineConfig()
    updates = {}
    if getattr(args, "grid", None):
        updates["N"] = args.grid
    if getattr(args, "gamma", None):
        g = _parse_gamma(args.gamma)
        if isinstance(g, tuple):
            raise InputError("the pipeline rotation must be scalar (one component)")
        updates["gamma_base"] = g
    if getattr(args, "gamma_scale", None) is not None:
        updates["gamma_scale"] = args.gamma_scale
    if getattr(args, "tau", None) is not None:
        updates["tau"] = args.tau
    if getattr(args, "tol", None) is not None:
        updates["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        updates["max_iter"] = args.max_iter
    if getattr(args, "prune", False):
        updates["prune"] = True
    return replace(cfg, **updates) if updates else cfg


def _load_input(args, N):
    field = tio.load_field(args.input, N=N)
    return make_diffeo(field)


def cmd_decompose(args):
    cfg = _config_from_args(args)
    f = _load_input(args, cfg.N)
    clist, report = decompose(f, cfg)
    if args.probe:
        w = probe_direction(cfg.N)
        report.data["smoothness_probe"] = smoothness_probe(
            f, w, deltas=(1e-4, 5e-5), config=cfg
        )
    if args.out:
        tio.save_factors(args.out, clist, mode_tol=args.mode_tol)
    if args.report:
        tio.save_json(args.report, report.to_json_dict())
    if args.plot_data:
        outdir = Path(args.plot_data)
        outdir.mkdir(parents=True, exist_ok=True)
        write_residual_csv(report, outdir / "residuals.csv")
        write_factor_csv(clist, outdir / "factors.csv")
        render_figures(report, clist, outdir)
    v = report.data["verification"]
    print(
        f"m = {clist.m} pairs, c0 residual = {v['c0_residual']:.3e} "
        f"(tol {v['tol']:.1e}), within published bound "
        f"{report.data['commutators']['bounds']['order_bound_9_times_n_plus_1']}: "
        f"{report.data['commutators']['within_bounds']}"
    )
    return EXIT_OK if v["passed"] else EXIT_VERIFY_FAILED


def cmd_verify(args):
    cfg = _config_from_args(args)
    f = _load_input(args, cfg.N)
    entries = tio.load_factors(args.factors, N=cfg.N)
    pairs = []
    for e in entries:
        pairs.append(
            CommutatorPair(
                g=make_factor(e["g"], cfg),
                h=make_factor(e["h"], cfg),
                chart=e.get("chart") or 0,
                foliation=e.get("foliation") or 0,
                stage=e.get("stage") or "",
                support=tuple(e["support"]) if e.get("support") else None,
            )
        )
    clist = CommutatorList(pairs)
    result = verify(f.with_interp(cfg.interp), clist, tol=cfg.tol)
    print(
        f"verified m = {result['m']} pairs: c0 residual = {result['c0_residual']:.3e}, "
        f"c1 residual = {result['c1_residual']:.3e}, tol = {result['tol']:.1e}"
    )
    if args.report:
        tio.save_json(args.report, result)
    return EXIT_OK if result["passed"] else EXIT_VERIFY_FAILED


def make_factor(field, cfg):
    from .diffeo import TorusDiffeo

    return TorusDiffeo(field, cfg.interp, c1_upper=None, _validated=True)


def cmd_probe(args):
    cfg = _config_from_args(args)
    f = _load_input(args, cfg.N)
    deltas = tuple(float(d) for d in args.deltas.split(","))
    w = probe_direction(cfg.N)
    table = smoothness_probe(f, w, deltas=deltas, config=cfg)
    print(f"probe deltas: {table['deltas']}")
    print(f"all factor ratios stable (<= {table['drift_tol']:.0%} drift): {table['all_stable']}")
    if args.report:
        tio.save_json(args.report, table)
    return EXIT_OK if table["all_stable"] else EXIT_VERIFY_FAILED


def cmd_certify(args):
    gamma = _parse_gamma(args.gamma)
    cert = certify_diophantine(gamma, tau=args.tau, k_scan=args.k_scan)
    payload = cert.to_json_dict()
    print(json.dumps(payload, indent=1))
    if args.out:
        tio.save_json(args.out, payload)
    return EXIT_OK


def cmd_make_input(args):
    grid = GridSpec(2, args.grid)
    x = grid.nodes()
    u = args.amplitude * np.stack(
        [np.sin(2 * np.pi * x[1]), np.sin(2 * np.pi * x[0])]
    )
    field = DisplacementField(grid, u)
    make_diffeo(field)  # chart validation before writing
    tio.save_field(args.out, field)
    print(f"wrote example input to {args.out}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="torusfactor",
        description="Factor near-identity torus diffeomorphisms into commutators",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_input=True):
        if with_input:
            p.add_argument("--input", required=True, help="input field JSON")
        p.add_argument("--grid", type=int, default=None, help="grid points per axis")
        p.add_argument("--gamma", default=None, help="golden | custom:value")
        p.add_argument("--gamma-scale", type=float, default=None, dest="gamma_scale")
        p.add_argument("--tau", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None, dest="max_iter")

    d = sub.add_parser("decompose", help="factor an input diffeomorphism")
    common(d)
    d.add_argument("--out", default=None, help="factor file to write")
    d.add_argument("--report", default=None, help="run report JSON to write")
    d.add_argument("--prune", action="store_true", help="drop identity pairs")
    d.add_argument(
        "--mode-tol",
        type=float,
        default=1e-14,
        dest="mode_tol",
        help="drop spectral modes below this magnitude when writing factors",
    )
    d.add_argument("--probe", action="store_true", help="include the smoothness probe")
    d.add_argument(
        "--plot-data",
        default=None,
        dest="plot_data",
        help="directory for residual CSVs and rendered figures",
    )
    d.set_defaults(func=cmd_decompose)

    v = sub.add_parser("verify", help="recompute a factor file against an input")
    common(v)
    v.add_argument("--factors", required=True, help="factor file to check")
    v.add_argument("--report", default=None)
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="finite-difference factor stability")
    common(p)
    p.add_argument("--deltas", default="1e-4,5e-5")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_probe)

    c = sub.add_parser("certify", help="emit a Diophantine certificate")
    c.add_argument("--gamma", default="golden")
    c.add_argument("--tau", type=float, default=2.0)
    c.add_argument("--k-scan", type=int, default=10_000, dest="k_scan")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_certify)

    m = sub.add_parser("make-input", help="write an example input field")
    m.add_argument("--out", required=True)
    m.add_argument("--grid", type=int, default=128)
    m.add_argument("--amplitude", type=float, default=1e-3)
    m.set_defaults(func=cmd_make_input)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    warnings.simplefilter("ignore", ChartWarning)
    try:
        return args.func(args)
    except (SolverDivergenceError,) as exc:
        print(f"solver divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (
        InputError,
        ChartViolationError,
        DiophantineError,
        FragmentationError,
        LeafwiseError,
        SmallDivisorBreach,
        InversionError,
    ) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except TorusFactorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
