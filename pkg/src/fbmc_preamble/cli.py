"""Command-line entry point: ``fbmc-preamble {coeffs,design,simulate,papr}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""
import argparse
import json
import os
import sys

import numpy as np

from .filterbank import design_phydyas, grid_to_csv
from .harness import ConfigError, SimConfig, run_ber_sweep, run_mse_sweep, run_papr
from .interference import build_B, build_table, full_table
from .preamble import Method, build_preamble, first_order_pseudo_pilots, pseudo_pilots
from .sdr import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_coeffs(args):
    filt = design_phydyas(args.M)
    table = build_table(filt, args.P, args.Q)
    _emit(table.to_csv(args.parity), args.out)
    return EXIT_OK


def _cvec(v):
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.abs(v.imag).max() > 1e-12:
        return [[float(z.real), float(z.imag)] for z in v]
    return [float(z) for z in np.real(v)]


def cmd_design(args):
    method = Method.parse(args.method)
    filt = design_phydyas(args.M)
    table = full_table(filt)
    kw = {"field": args.field} if method is Method.FDM_OPT else {}
    pset = build_preamble(method, args.nt, args.M, table, guards=args.guards, **kw)
    col = pset.pilot_cols[0]
    c = pset.expected_pilots[0, :, col]
    summary = {
        "method": method.value,
        "nt": args.nt,
        "M": args.M,
        "columns": pset.num_cols,
        "energy": pset.energy_budget,
    }
    if pset.vector is not None:
        a = np.asarray(pset.vector)
        B = build_B(table, args.nt)
        summary["a"] = _cvec(a)
        summary["c2"] = float(abs(first_order_pseudo_pilots(a.reshape(args.nt, 3), table)[0]))
        summary["aBa"] = B.energy(a)
    else:
        summary["c_abs_mean"] = float(np.mean(np.abs(c)))
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        pp = pseudo_pilots(pset, table).values
        for t in range(pset.nt):
            grid_to_csv(pset.grids[t], os.path.join(args.out_dir, f"{method.value}_tx{t}.csv"))
            grid_to_csv(pp[t], os.path.join(args.out_dir, f"{method.value}_tx{t}_pseudo.csv"))
        with open(os.path.join(args.out_dir, f"{method.value}.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _load_config(args, **extra):
    over = dict(
        snr_db=args.snr, frames=args.frames, master_seed=args.seed, methods=args.method,
        nt=args.nt, nr=args.nr, guards=args.guards, M=args.M, workers=args.workers, **extra,
    )
    if args.config:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        return SimConfig.from_json(args.config, **over)
    return SimConfig.from_dict({}, **over)


def cmd_simulate(args):
    cfg = _load_config(args)
    res = run_ber_sweep(cfg) if args.kind == "ber" else run_mse_sweep(cfg)
    _emit(res.to_csv(), args.out)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res.summary(), fh, indent=2)
    return EXIT_OK


def cmd_papr(args):
    cfg = _load_config(args)
    res = run_papr(cfg)
    _emit(json.dumps({"M": cfg.M, "nt": cfg.nt, "papr_db": res}, indent=2) + "\n", args.out)
    return EXIT_OK


def _sim_flags(p, default_m=None):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--snr", type=float, nargs="+", help="SNR points in dB")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--method", nargs="+", help="e.g. iam-c fdm-conv fdm-opt fdm-opt-g1")
    p.add_argument("--nt", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--guards", type=int)
    p.add_argument("--M", type=int, default=default_m)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output file (default stdout)")


def build_parser():
    ap = argparse.ArgumentParser(prog="fbmc-preamble", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("coeffs", help="dump the interference table as CSV")
    p.add_argument("--M", type=int, default=256)
    p.add_argument("--P", type=int, default=1)
    p.add_argument("--Q", type=int, default=3)
    p.add_argument("--parity", choices=["odd", "even"], default="odd")
    p.add_argument("--out")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("design", help="build one preamble and print a JSON summary")
    p.add_argument("--method", required=True)
    p.add_argument("--nt", type=int, default=2)
    p.add_argument("--M", type=int, default=256)
    p.add_argument("--guards", type=int, default=0)
    p.add_argument("--field", choices=["real", "complex"], default="real")
    p.add_argument("--out-dir", help="write grids, pseudo-pilots and summary here")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="Monte Carlo MSE/BER sweep, CSV output")
    _sim_flags(p)
    p.add_argument("--kind", choices=["mse", "ber"], default="ber")
    p.add_argument("--json", help="also write a JSON summary with metadata")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("papr", help="preamble PAPR per method, JSON output")
    _sim_flags(p, default_m=256)
    p.set_defaults(func=cmd_papr)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as e:
        print(f"solver failure: {e}\n{json.dumps(e.diagnostics, indent=2)}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
