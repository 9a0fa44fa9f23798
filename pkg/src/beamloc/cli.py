"""Command-line interface: ``beamloc {simulate,estimate,fisher,optimize-beam,sweep}``.

Exit status: 0 success, 2 invalid arguments, 3 I/O failure, 4 estimator failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .distributions import MixtureParams, mixture_mean
from .errors import BeamlocError, DegenerateLikelihood, EstimatorFailure, InvalidParameter, NoCrossing
from .estimators import METHODS, EstimationContext, interpolation_edge, mle_edge, mmle_edge
from .fisher import (
    beta_mixture,
    beta_poisson,
    default_gamma_period,
    fi_x_q,
    fi_y_q_numeric,
    nfi_y_high,
    nfi_y_low,
    optimal_beam_width,
    scan_information,
)
from .geometry import ScanGeometry, grid
from .io import CONV_FORMAT, TRM_FORMAT, ScanHeader, read_scan, write_scan
from .mc import PRESETS, SWEEPABLE, SweepSpec, default_threads, preset, run_sweep, write_report
from .sim import BeamConfig, ConventionalScan, EdgeSample, realize
from .streams import RandomStreams

log = logging.getLogger("beamloc")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_ESTIMATOR = 0, 2, 3, 4

GRID_HELP = "grid as start:stop:step (inclusive) or start:stop:logN (N log-spaced points)"


def parse_grid(text: str) -> np.ndarray:
    """Parse ``start:stop:step`` or ``start:stop:logN``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidParameter(f"bad grid {text!r}: {GRID_HELP}")
    try:
        start, stop = float(parts[0]), float(parts[1])
        if parts[2].startswith("log"):
            n = int(parts[2][3:])
            if n < 1 or start <= 0 or stop <= 0:
                raise InvalidParameter(f"bad log grid {text!r}: needs N >= 1 and positive ends")
            g = np.geomspace(start, stop, n)
        else:
            g = grid(start, stop, float(parts[2]))
    except ValueError as exc:
        if isinstance(exc, InvalidParameter):
            raise
        raise InvalidParameter(f"bad grid {text!r}: {GRID_HELP}") from exc
    if g.size == 0:
        raise InvalidParameter(f"grid {text!r} is empty")
    return g


def _emit_csv(header, rows):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])


# --- simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    sample = EdgeSample(args.eta1, args.eta2, args.gamma)
    beam = BeamConfig(args.sigma_b, args.lam)
    geom = ScanGeometry(args.length)
    r = realize(sample, beam, geom, RandomStreams(args.seed), times=args.times)
    scan = r.conventional() if args.conventional else r.trm()
    header = ScanHeader(
        CONV_FORMAT if args.conventional else TRM_FORMAT,
        beam.lam, beam.sigma_b, sample.eta1, sample.eta2, geom.length, args.seed,
    )
    write_scan(args.out, header, scan)
    print(json.dumps(header.to_dict()), file=sys.stderr)
    return EXIT_OK


# --- estimate ---------------------------------------------------------------------


def _known_parameters(args, header: ScanHeader):
    known = {"eta1": header.eta1, "eta2": header.eta2, "sigma_b": header.sigma_b, "lam": header.lam}
    for name in known:
        flag = getattr(args, name)
        if flag is None:
            continue
        if flag != known[name] and not args.trust_flags:
            raise InvalidParameter(
                f"--{name.replace('_', '-').replace('lam', 'lambda')} {flag} differs from the dataset "
                f"header ({known[name]}); pass --trust-flags to override"
            )
        known[name] = flag
    return known


def cmd_estimate(args) -> int:
    header, scan = read_scan(args.input)
    k = _known_parameters(args, header)
    bounds = None
    if args.gamma_min is not None or args.gamma_max is not None:
        ctx0 = EstimationContext(k["eta1"], k["eta2"], k["sigma_b"], k["lam"], ScanGeometry(header.length))
        lo, hi = ctx0.gamma_bounds
        bounds = (lo if args.gamma_min is None else args.gamma_min, hi if args.gamma_max is None else args.gamma_max)
    ctx = EstimationContext(
        k["eta1"], k["eta2"], k["sigma_b"], k["lam"], ScanGeometry(header.length), args.grid_step, bounds
    )
    methods = METHODS if args.method == "all" else (args.method,)
    if isinstance(scan, ConventionalScan) and set(methods) - {"interpolation"}:
        raise InvalidParameter("a conventional dataset supports only --method interpolation")
    conv = scan if isinstance(scan, ConventionalScan) else ConventionalScan(scan.ysum)
    for m in methods:
        if m == "interpolation":
            est = interpolation_edge(conv, ctx)
        elif m == "mle":
            est = mle_edge(scan, ctx)
        else:
            est = mmle_edge(scan, ctx)
        print(json.dumps(est.to_json()))
    return EXIT_OK


# --- fisher -----------------------------------------------------------------------


def cmd_fisher(args) -> int:
    curve = args.curve
    if curve == "fi-x":
        qs = parse_grid(args.q_grid)
        rows = []
        for q in qs:
            p = MixtureParams(q, args.eta1, args.eta2)
            rows.append((q, fi_x_q(p).value, nfi_y_low(p).value))
        _emit_csv(("q", "fi_x", "fi_trm_per_dose"), rows)
    elif curve == "nfi-y":
        p = MixtureParams(args.q, args.eta1, args.eta2)
        low, high = nfi_y_low(p).value, nfi_y_high(p).value
        rows = [(lam, fi_y_q_numeric(p, lam).value / lam, low, high) for lam in parse_grid(args.lambda_grid)]
        _emit_csv(("lambda", "nfi_y", "nfi_y_low", "nfi_y_high"), rows)
    elif curve == "beta":
        rows = []
        base = {"q": args.q, "eta1": args.eta1, "eta2": args.eta2}
        for v in parse_grid(args.grid):
            p = MixtureParams(**{**base, args.vary: v})
            rows.append((v, beta_mixture(p), beta_poisson(mixture_mean(p))))
        _emit_csv((args.vary, "beta_mixture", "beta_poisson"), rows)
    else:
        geom = ScanGeometry(args.length)
        gammas = parse_grid(args.gamma_grid)
        nfi = scan_information(gammas, geom, args.eta1, args.eta2, args.sigma_b)
        with np.errstate(divide="ignore"):
            crb = 1.0 / np.sqrt(args.lam * nfi)
        _emit_csv(("gamma", "nfi_gamma", "fi_gamma", "sqrt_crb"), zip(gammas, nfi, args.lam * nfi, crb))
    return EXIT_OK


# --- optimize-beam ----------------------------------------------------------------


def cmd_optimize_beam(args) -> int:
    if args.eta1 == args.eta2:
        raise InvalidParameter("eta1 == eta2: the scan carries no information about the edge")
    geom = ScanGeometry(args.length)
    sigmas = parse_grid(args.sigma_grid)
    gammas = default_gamma_period(geom) if args.gamma_grid is None else parse_grid(args.gamma_grid)
    res = optimal_beam_width(geom, args.eta1, args.eta2, gammas, sigmas)
    print(json.dumps({"sigma_star": res.sigma_star, "worstcase_nfi": res.worstcase_nfi.value}))
    return EXIT_OK


# --- sweep ------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    if args.preset:
        spec = preset(args.preset, args.trials, args.seed)
    else:
        if args.vary is None or args.grid is None:
            raise InvalidParameter("give --preset, or both --vary and --grid")
        spec = SweepSpec(
            EdgeSample(args.eta1, args.eta2, args.gamma),
            BeamConfig(args.sigma_b, args.lam),
            ScanGeometry(args.length),
            args.vary,
            tuple(parse_grid(args.grid)),
            args.trials,
            args.seed,
        )
    threads = default_threads() if args.threads is None else args.threads
    log.info("sweep %s over %d values x %d trials, %d worker(s)",
             spec.swept_parameter, len(spec.values), spec.n_trials, threads)
    report = run_sweep(spec, threads)
    sidecar = write_report(report, args.out)
    log.info("wrote %s and %s", args.out, sidecar)
    return EXIT_OK


# --- parser -----------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="beamloc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS, help="more logging (repeatable)")

    s = sub.add_parser("simulate", parents=[common], help="simulate one scan line and write it as JSON lines")
    s.add_argument("--eta1", type=float, required=True)
    s.add_argument("--eta2", type=float, required=True)
    s.add_argument("--gamma", type=float, required=True, help="edge position (pixels)")
    s.add_argument("--sigma-b", dest="sigma_b", type=float, required=True, help="beam width (pixels)")
    s.add_argument("--lambda", dest="lam", type=float, required=True, help="mean ions per location")
    s.add_argument("--length", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--times", action="store_true", help="also store detection times")
    s.add_argument("--conventional", action="store_true", help="write per-location totals only")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="estimate the edge position from a dataset")
    e.add_argument("input", help="dataset written by 'simulate'")
    e.add_argument("--method", choices=(*METHODS, "all"), default="mle")
    e.add_argument("--eta1", type=float)
    e.add_argument("--eta2", type=float)
    e.add_argument("--sigma-b", dest="sigma_b", type=float)
    e.add_argument("--lambda", dest="lam", type=float)
    e.add_argument("--trust-flags", action="store_true",
                   help="let parameter flags override a conflicting dataset header")
    e.add_argument("--grid-step", type=float, default=0.01)
    e.add_argument("--gamma-min", type=float)
    e.add_argument("--gamma-max", type=float)
    e.set_defaults(func=cmd_estimate)

    f = sub.add_parser("fisher", parents=[common], help="tabulate Fisher-information curves as CSV",
                       epilog=f"Grids: {GRID_HELP}.")
    f.add_argument("--curve", choices=("fi-x", "nfi-y", "beta", "scan-gamma"), required=True)
    f.add_argument("--eta1", type=float, required=True)
    f.add_argument("--eta2", type=float, required=True)
    f.add_argument("--q", type=float, default=0.5)
    f.add_argument("--q-grid", default="0:1:0.01")
    f.add_argument("--lambda-grid", default="0.1:100:log25")
    f.add_argument("--vary", choices=("q", "eta1", "eta2"), default="eta1", help="parameter swept by --curve beta")
    f.add_argument("--grid", default="0:10:0.1", help="values of --vary for --curve beta")
    f.add_argument("--sigma-b", dest="sigma_b", type=float, default=0.33)
    f.add_argument("--lambda", dest="lam", type=float, default=1.0)
    f.add_argument("--length", type=int, default=100)
    f.add_argument("--gamma-grid", default="46:53:0.01")
    f.set_defaults(func=cmd_fisher)

    o = sub.add_parser("optimize-beam", parents=[common], help="maximin beam width over one pixel period of edge positions",
                       epilog=f"Grids: {GRID_HELP}.")
    o.add_argument("--eta1", type=float, required=True)
    o.add_argument("--eta2", type=float, required=True)
    o.add_argument("--length", type=int, default=100)
    o.add_argument("--sigma-grid", default="0.1:1:0.01")
    o.add_argument("--gamma-grid", help="default: [floor(l/2), floor(l/2)+1) at step 0.01")
    o.set_defaults(func=cmd_optimize_beam)

    w = sub.add_parser("sweep", parents=[common], help="Monte Carlo comparison of the estimators",
                       epilog=f"Grids: {GRID_HELP}. Presets: {', '.join(PRESETS)}.")
    w.add_argument("--preset", choices=PRESETS)
    w.add_argument("--vary", choices=SWEEPABLE)
    w.add_argument("--grid")
    w.add_argument("--eta1", type=float, default=1.0)
    w.add_argument("--eta2", type=float, default=10.0)
    w.add_argument("--gamma", type=float, default=50.2)
    w.add_argument("--sigma-b", dest="sigma_b", type=float, default=1.0)
    w.add_argument("--lambda", dest="lam", type=float, default=200.0)
    w.add_argument("--length", type=int, default=100)
    w.add_argument("--trials", type=int, default=300)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--threads", type=_positive_int, help="worker processes (default: $BEAMLOC_THREADS or 1)")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except NoCrossing as exc:
        print(f"beamloc: no crossing: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except DegenerateLikelihood as exc:
        print(f"beamloc: degenerate likelihood: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except EstimatorFailure as exc:
        print(f"beamloc: estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (BeamlocError, ValueError) as exc:
        print(f"beamloc: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"beamloc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
