"""Command-line front end: parameter sweeps written as CSV.

Exit codes: 0 on success, 1 when an input violates a model constraint
(or ``validate`` finds a failing check), 2 on I/O failure.
"""

import argparse
import csv
import json
import math
import os
import sys
from fractions import Fraction

import numpy as np

from .asymptotics import (
    capacity_stats,
    capacity_variance,
    default_contour,
    mean_capacity_per_antenna,
    variance_numeric_contour,
)
from .exceptions import RayprodError
from .freecombinatorics import free_cumulants, moments_from_cumulants
from .geometry import AspectRatios, ChannelGeometry
from .montecarlo import default_workers, normality_diagnostics, run_simulation, write_samples
from .outage import finite_snr_dmt, outage_capacity, outage_probability

LN2 = math.log(2.0)

# built-in values for options that a config file may also supply
DEFAULTS = {
    "snr_db": "10",
    "samples": 100000,
    "seed": 0,
    "workers": None,
    "bits": False,
    "contour": False,
    "contour_nodes": 1024,
    "contour_shape": "ellipse",
    "order": 6,
    "m_grid": "0:0.25:1",
    "half_exponent": False,
}


class InputError(RayprodError):
    pass


def parse_grid(text):
    """``start:step:stop`` (inclusive), a comma list, or a single number."""
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        try:
            start, step, stop = (float(p) for p in text.split(":"))
        except ValueError:
            raise InputError(f"grid {text!r} is not start:step:stop") from None
        if step <= 0 or stop < start:
            raise InputError(f"grid {text!r} needs a positive step and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + i * step for i in range(count)]
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            raise InputError(f"cannot parse grid {text!r}") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise InputError(f"grid {text!r} must be nonempty and finite")
    return values


def _ratio(text):
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise InputError(f"cannot parse ratio {text!r}") from None


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.12g}"


def _geometry(args):
    dims = (args.R, args.S, args.T)
    if any(v is None for v in dims):
        return None
    return ChannelGeometry(int(args.R), int(args.S), int(args.T))


def _need_geometry(args):
    geo = _geometry(args)
    if geo is None:
        raise InputError(f"{args.command} needs --R, --S and --T")
    return geo


def _units(args):
    return LN2 if args.bits else 1.0


def cmd_asymptotic(args):
    geo = _geometry(args)
    unit = _units(args)
    rows = []
    for db in parse_grid(args.snr_db):
        gamma = 10 ** (db / 10)
        if geo is not None:
            stats = capacity_stats(geo, gamma, contour=args.contour)
            rows.append([db, stats.mu_total / geo.R / unit, stats.mu_total / unit, stats.sigma_sq / unit**2])
        elif args.rho is not None:
            rho = float(_ratio(args.rho))
            mu = mean_capacity_per_antenna(rho, gamma).mu_per_antenna
            rows.append([db, mu / unit, "", capacity_variance(1.0 / rho, gamma) / unit**2])
        else:
            raise InputError("asymptotic needs --R/--S/--T or --rho")
    return ["snr_db", "mu_per_antenna", "mu_total", "sigma_sq"], rows


def cmd_variance(args):
    unit = _units(args)
    geo = _geometry(args)
    if geo is not None:
        ratios = geo.ratios()
    elif args.zeta is not None:
        zeta = _ratio(args.zeta)
        ratios = AspectRatios(_ratio(args.rho), zeta) if args.rho is not None else AspectRatios.square(zeta)
    else:
        raise InputError("variance needs --zeta (optionally --rho) or --R/--S/--T")
    rows = []
    for db in parse_grid(args.snr_db):
        gamma = 10 ** (db / 10)
        if args.contour:
            spec = default_contour(ratios, gamma, nodes=args.contour_nodes, shape=args.contour_shape)
            var = variance_numeric_contour(ratios, gamma, spec)
        elif ratios.square_case():
            var = capacity_variance(float(ratios.zeta), gamma)
        else:
            raise InputError(
                f"closed-form variance needs R = T (rho * zeta = 1, got {float(ratios.rho * ratios.zeta):.6g}); pass --contour"
            )
        rows.append([db, var / unit**2])
    return ["snr_db", "sigma_sq"], rows


def cmd_outage(args):
    geo = _need_geometry(args)
    unit = _units(args)
    rows = []
    for db in parse_grid(args.snr_db):
        stats = capacity_stats(geo, 10 ** (db / 10), contour=args.contour)
        if args.p_out is not None:
            for p in parse_grid(args.p_out):
                rows.append([db, outage_capacity(p, stats) / unit, p])
        elif args.rate is not None:
            for r in parse_grid(args.rate):
                rows.append([db, r, outage_probability(r * unit, stats)])
        else:
            raise InputError("outage needs --rate or --p-out")
    return ["snr_db", "rate", "p_out"], rows


def cmd_dmt(args):
    geo = _need_geometry(args)
    rows = []
    for db in parse_grid(args.snr_db):
        for m in parse_grid(args.m_grid):
            pt = finite_snr_dmt(m, geo, 10 ** (db / 10), half_exponent=args.half_exponent)
            rows.append([db, pt.m, pt.k_value, pt.d])
    return ["snr_db", "m", "k_value", "d"], rows


def cmd_simulate(args):
    geo = _need_geometry(args)
    unit = _units(args)
    workers = args.workers if args.workers is not None else default_workers()
    seed = int(args.seed)
    rows = []
    grid = parse_grid(args.snr_db)
    for db in grid:
        res = run_simulation(geo, 10 ** (db / 10), int(args.samples), seed, workers=workers)
        ks = normality_diagnostics(res)["ks_statistic"] if len(res.samples) >= 1000 else ""
        rows.append([db, len(res.samples), seed, res.mean / unit, res.variance / unit**2,
                     res.skewness, res.excess_kurtosis, ks])
        if args.dump:
            path = args.dump if len(grid) == 1 else f"{args.dump}.{db:g}dB"
            write_samples(path, res)
    return ["snr_db", "samples", "seed", "mean", "variance", "skewness", "excess_kurtosis", "ks_statistic"], rows


def cmd_moments(args):
    if args.rho is None or args.zeta is None:
        raise InputError("moments needs --rho and --zeta")
    rho, zeta = _ratio(args.rho), _ratio(args.zeta)
    AspectRatios(rho, zeta)
    order = int(args.order)
    cum = free_cumulants(rho, zeta, order, order)
    mom = moments_from_cumulants(cum)
    rows = [[n, "", cum.first_order[n], mom.first_order[n]] for n in sorted(cum.first_order)]
    rows += [[m, n, cum.second_order[(m, n)], mom.second_order.get((m, n), "")] for (m, n) in sorted(cum.second_order)]
    return ["m", "n", "cumulant", "moment"], rows


def cmd_validate(args):
    from .validation import run_checks

    numbers = {int(v) for v in parse_grid(args.only)} if args.only else None
    results = run_checks(numbers, report=lambda line: print(line, file=sys.stderr))
    rows = [[r.number, r.name, "PASS" if r.passed else "FAIL", r.detail] for r in results]
    args._failed = not all(r.passed for r in results)
    return ["criterion", "name", "status", "detail"], rows


COMMANDS = {
    "asymptotic": cmd_asymptotic,
    "variance": cmd_variance,
    "outage": cmd_outage,
    "dmt": cmd_dmt,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "validate": cmd_validate,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="rayprod", description="Outage statistics of Rayleigh product MIMO channels.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with option values; flags take precedence")
        p.add_argument("--output", "-o", help="CSV path (default: stdout)")
        p.add_argument("--bits", action="store_const", const=True, default=None, help="report capacities in bits")
        if name == "validate":
            p.add_argument("--only", help="criterion numbers, e.g. 1,2,3")
            continue
        p.add_argument("--R", type=int)
        p.add_argument("--S", type=int)
        p.add_argument("--T", type=int)
        p.add_argument("--rho", help="S/R, may be a fraction such as 1/2")
        p.add_argument("--zeta", help="T/S, may be a fraction")
        p.add_argument("--snr-db", dest="snr_db", help="dB grid start:step:stop or a list")
        p.add_argument("--contour", action="store_const", const=True, default=None)
        p.add_argument("--contour-nodes", dest="contour_nodes", type=int)
        p.add_argument("--contour-shape", dest="contour_shape", choices=["ellipse", "rectangle"])
        p.add_argument("--rate", help="rate grid (nats, or bits with --bits)")
        p.add_argument("--p-out", dest="p_out", help="outage-probability grid")
        p.add_argument("--m-grid", dest="m_grid", help="multiplexing-gain grid")
        p.add_argument("--half-exponent", dest="half_exponent", action="store_const", const=True, default=None)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--dump", help="write raw capacity samples to this path")
        p.add_argument("--order", type=int)
    return parser


def _merge_config(args):
    config = {}
    if args.config:
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except OSError as err:
            raise OSError(f"cannot read config {args.config}: {err}") from err
        except json.JSONDecodeError as err:
            raise InputError(f"config {args.config} is not valid JSON: {err}") from None
        if not isinstance(config, dict):
            raise InputError("config must be a JSON object")
    for key, value in config.items():
        key = key.replace("-", "_")
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    cap = os.environ.get("RAYPROD_THREADS")
    if cap and args.workers is not None:
        # the cap only bounds the thread pool; results do not depend on it
        args.workers = min(int(args.workers), default_workers())
    return args


def _write(header, rows, path):
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    finally:
        if path:
            out.close()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        header, rows = COMMANDS[args.command](args)
        _write(header, rows, args.output)
    except OSError as err:
        print(f"rayprod: I/O error: {err}", file=sys.stderr)
        return 2
    except (RayprodError, ValueError, ZeroDivisionError) as err:
        print(f"rayprod: {err}", file=sys.stderr)
        return 1
    return 1 if getattr(args, "_failed", False) else 0


if __name__ == "__main__":
    sys.exit(main())
