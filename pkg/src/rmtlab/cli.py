"""
Command-line front end: ``rmtlab <command> [flags]``.

Outputs are CSV (``#`` header lines carrying version, command, seed and
the full flag echo) or JSON.  Exit codes: 0 success, 2 usage or domain
error, 3 solver failure, 4 precision loss.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from . import cs_replica, detectors, free_calc, mc_lab, replica, spectra, transforms

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_PRECISION = 0, 2, 3, 4

DESCRIBE = {
    "law": {
        "density": {"x": "abscissa (radius for planar laws)",
                    "density": "closed-form density (radial CDF for planar laws)"},
        "moments": {"k": "moment order", "moment": "k-th moment (of |z| for planar laws)"},
    },
    "convolve": {
        "density": {"x": "abscissa", "density": "density recovered from the Stieltjes transform",
                    "closed_form": "explicit density when available (binary free CLT), else empty"},
    },
    "mc-compare": {
        "stats": {"replicate": "replicate index of the Philox stream (or median)", "N": "matrix dimension",
                  "stat": "KS distance to the reference law (radial or phase where applicable)",
                  "m1": "first empirical moment", "m2": "second empirical moment"},
    },
    "sinr": {
        "sinr": {"beta": "load K/N", "detector": "mmse, mf or pe:D",
                 "sinr": "large-system output SINR (linear scale)",
                 "ber_gaussian_approx": "Q(sqrt(SINR))"},
    },
    "replica-sweep": {
        "branches": {"beta": "load K/N", "branch_id": "solution index, 0 = smallest E",
                     "E": "RS order parameter E", "ber": "Q(sqrt(E))",
                     "free_energy": "RS free energy per user",
                     "selected_flag": "1 for the free-energy minimizer at this load"},
    },
    "cs-fixed-point": {
        "fixed_points": {"sigma_eff_sq": "effective noise variance", "gamma_p": "limiting threshold scale",
                         "mse": "predicted per-component squared error",
                         "branch": "index by increasing mse (RS ansatz, no selection rule)"},
    },
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers

def parse_law(text: str) -> spectra.SpectralLaw:
    """``semicircle``, ``quarter_circle``, ``inverse_semicircle``, ``binary``,
    ``mp:beta[:scale]``, ``point:a``, ``full_circle``, ``haar``, ``ginibre:L``."""
    name, *args = text.split(":")
    vals = [float(a) for a in args]
    simple = {"semicircle": spectra.semicircle, "quarter_circle": spectra.quarter_circle,
              "inverse_semicircle": spectra.inverse_semicircle, "binary": spectra.binary,
              "full_circle": spectra.full_circle, "haar": spectra.haar_circle}
    if name in simple and not vals:
        return simple[name]()
    if name == "mp" and 1 <= len(vals) <= 2:
        return spectra.marchenko_pastur(*vals)
    if name == "point" and len(vals) == 1:
        return spectra.point_mass(vals[0])
    if name == "ginibre" and len(vals) == 1:
        return spectra.ginibre_product(int(vals[0]))
    raise UsageError(f"unknown law {text!r}")


def parse_grid(text: str | None, lo: float, hi: float, n: int = 201, midpoint: bool = False):
    if text:
        try:
            a, b, k = text.split(":")
            lo, hi, n = float(a), float(b), int(k)
        except ValueError:
            raise UsageError(f"grid must be lo:hi:n, got {text!r}") from None
    if n < 1 or not hi > lo:
        raise UsageError("grid needs hi > lo and n >= 1")
    if midpoint:
        return lo + (np.arange(n) + 0.5) * (hi - lo) / n
    return np.linspace(lo, hi, n)


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use flag names."""
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.lstrip("-").replace("-", "_")] = v
    return out


# ---------------------------------------------------------------------------
# output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def emit(args, tables: dict, meta: dict | None = None) -> str:
    """Render tables (name -> (columns, rows)) in the requested format."""
    flags = {k: v for k, v in sorted(vars(args).items())
             if k not in ("func", "describe", "output", "config") and v is not None}
    head = {"version": __version__, "command": args.command, "seed": args.seed}
    head.update(meta or {})
    if args.format == "json":
        doc = {"meta": {**head, "flags": {k: _jsonable(v) for k, v in flags.items()}},
               "tables": {n: {"columns": list(c), "rows": [[_jsonable(x) for x in r] for r in rows]}
                          for n, (c, rows) in tables.items()}}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    lines = [f"# rmtlab {__version__}", f"# command: {args.command}", f"# seed: {args.seed}",
             "# flags: " + " ".join(f"{k}={_fmt(v)}" for k, v in flags.items())]
    lines += [f"# {k}: {_fmt(v)}" for k, v in (meta or {}).items()]
    for name, (cols, rows) in tables.items():
        lines.append(f"# table: {name}")
        lines.append(",".join(cols))
        lines += [",".join(_fmt(x) for x in r) for r in rows]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# commands

def cmd_law(args):
    name = {"mp": f"mp:{args.beta}:{args.scale}", "ginibre": f"ginibre:{args.L}"}.get(args.kind, args.kind)
    law = parse_law(name)
    if law.planar:
        r = parse_grid(args.grid, 0.0, 1.0, 101)
        dens = [(float(x), float(spectra.radial_cdf(law, x))) for x in r]
    else:
        lo, hi = law.lo, law.hi
        if law.kind == "discrete":
            raise UsageError("law has no density; use a continuous kind")
        x = parse_grid(args.grid, lo, hi)
        dens = list(zip(x, spectra.law_density(law, x)))
    mom = [(k, spectra.law_moment(law, k)) for k in range(1, args.moments + 1)]
    return {"density": (("x", "density"), dens), "moments": (("k", "moment"), mom)}, {}


def cmd_convolve(args):
    if args.op == "clt":
        if not args.law:
            raise UsageError("clt needs --law")
        mu = parse_law(args.law)
        bound = 2 * math.sqrt(max(spectra.law_moment(mu, 2), 1e-12)) + 0.5
        x = parse_grid(args.grid, -bound, bound, 200, midpoint=True)
        closed = mu.kind == "discrete" and mu.atoms == ((-1.0, 0.5), (1.0, 0.5))
        out = free_calc.free_clt(mu, args.n, x, closed_form=closed)
        dens, cf = out if closed else (out, [None] * len(x))
        rows = [(a, b, c) for a, b, c in zip(x, dens.values, cf)]
    else:
        if not (args.a and args.b):
            raise UsageError(f"{args.op} needs --a and --b")
        A, B = parse_law(args.a), parse_law(args.b)
        if args.op == "add":
            x = parse_grid(args.grid, A.lo + B.lo, A.hi + B.hi, 200, midpoint=True)
            dens = free_calc.add_free_convolve(A, B, x)
        else:
            G = free_calc.mul_convolution_transform(A, B)
            lo, hi = G.bounds
            x = parse_grid(args.grid, lo, hi, 200, midpoint=True)
            dens = free_calc.mul_free_convolve(A, B, x)
        rows = [(a, b, None) for a, b in zip(x, dens.values)]
    meta = {"atoms": ";".join(f"{_fmt(a)}@{_fmt(m)}" for a, m in dens.atoms) or "none"}
    return {"density": (("x", "density", "closed_form"), rows)}, meta


_ENSEMBLES = {
    # name: (spec kind, extra params, spectrum mode, statistic)
    "wigner": ("wigner_sym", {}, "eig_hermitian", "ks"),
    "iid": ("iid_gaussian", {}, "singular_sq", "ks"),
    "haar": ("haar_unitary", {}, "eig_complex", "phase"),
    "ginibre": ("iid_gaussian", {"complex": True}, "eig_complex", "radial"),
}


def cmd_mc_compare(args):
    kind, extra, mode, stat = _ENSEMBLES[args.ensemble]
    params = {"N": args.N, **extra}
    if args.ensemble == "iid":
        params["K"] = args.K or args.N
    if args.law:
        law = parse_law(args.law)
    else:
        law = {"wigner": spectra.semicircle(), "haar": spectra.haar_circle(),
               "ginibre": spectra.full_circle(),
               "iid": spectra.marchenko_pastur(params.get("K", args.N) / args.N)}[args.ensemble]
    rows = []
    for r in range(args.replicates):
        M = mc_lab.sample(mc_lab.EnsembleSpec(kind, params, args.seed, r))
        emp = mc_lab.spectrum(M, mode)
        if stat == "phase":
            d = mc_lab.phase_ks(emp)
        elif stat == "radial":
            d = mc_lab.radial_ks(emp, law)
        else:
            d = mc_lab.ks_distance(emp, law)
        rows.append((r, args.N, d, emp.moment(1), emp.moment(2)))
    med = ["median", args.N] + [float(np.median([row[i] for row in rows])) for i in (2, 3, 4)]
    return {"stats": (("replicate", "N", "stat", "m1", "m2"), rows + [tuple(med)])}, \
        {"statistic": stat, "law": law.kind}


def _sigma0_sq(args) -> float:
    if getattr(args, "sigma0_sq", None) is not None:
        return float(args.sigma0_sq)
    if args.snr_db is None:
        raise UsageError("give --snr-db or --sigma0-sq")
    return 10 ** (-(args.snr_db + args.snr_offset_db) / 10)


def cmd_sinr(args):
    s2 = _sigma0_sq(args)
    betas = parse_grid(args.load_sweep, 0, 1, 1) if args.load_sweep else [args.beta]
    if betas[0] is None:
        raise UsageError("give --beta or --load-sweep")
    rows = []
    for b in betas:
        for det in args.detector:
            if det == "mmse":
                v = detectors.tse_hanly_eta(detectors.ChannelParams(float(b), 1.0, s2))
            elif det == "mf":
                v = detectors.matched_filter_sinr(b, 1.0, s2)
            elif det.startswith("pe:"):
                v = detectors.pe_sinr_recursion(b, 1.0, s2, int(det[3:]))
            else:
                raise UsageError(f"unknown detector {det!r}")
            rows.append((b, det, v, detectors.ber_gaussian_approx(v)))
    return {"sinr": (("beta", "detector", "sinr", "ber_gaussian_approx"), rows)}, {"sigma0_sq": s2}


def cmd_replica_sweep(args):
    s2 = _sigma0_sq(args)
    betas = np.linspace(args.beta_min, args.beta_max, args.steps)
    if args.prior == "binary":
        res = replica.phase_transition_sweep(s2, betas)
        rows = res.rows
        meta = {"window": "none" if res.window is None else f"{res.window[0]:.6g}..{res.window[1]:.6g}",
                "beta_star": "none" if res.beta_star is None else f"{res.beta_star:.8g}"}
    else:
        rows = []
        for b in betas:
            st = replica.rs_fixed_point_gaussian(replica.ReplicaProblem.matched(float(b), s2))
            if not st.converged:
                raise free_calc.SolverFailedError(f"no convergence at beta={b}", st.residual, st.E)
            rows.append((float(b), 0, st.E, st.ber, st.free_energy, True))
        meta = {}
    meta.update({"sigma0_sq": s2, "ansatz": "RS"})
    cols = ("beta", "branch_id", "E", "ber", "free_energy", "selected_flag")
    return {"branches": (cols, rows)}, meta


def cmd_cs(args):
    s2 = args.sigma0_sq if args.sigma0_sq is not None else (
        args.sigma0 ** 2 if args.sigma0 is not None else None)
    if s2 is None:
        raise UsageError("give --sigma0-sq or --sigma0")
    prob = cs_replica.CsProblem(args.beta, s2, args.gamma, args.rho)
    states = cs_replica.l0_state_evolution(prob, all_branches=True)
    rows = [(s.sigma_eff_sq, s.gamma_p, s.mse, i) for i, s in enumerate(states)]
    return {"fixed_points": (("sigma_eff_sq", "gamma_p", "mse", "branch"), rows)}, \
        {"ansatz": "RS", "max_residual": max(s.residual for s in states)}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--output", "-o", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--config", default=None, help="key=value file overriding defaults")
    common.add_argument("--describe", action="store_true", help="document output columns and exit")

    p = argparse.ArgumentParser(prog="rmtlab", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"rmtlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("law", parents=[common], help="closed-form density and moments")
    s.add_argument("--kind", required=True,
                   choices=("semicircle", "quarter_circle", "mp", "inverse_semicircle",
                            "full_circle", "haar", "ginibre"))
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--grid", default=None, help="lo:hi:n (use --grid=lo:hi:n when lo < 0)")
    s.add_argument("--moments", type=int, default=8)
    s.set_defaults(func=cmd_law)

    s = sub.add_parser("convolve", parents=[common], help="free convolution densities")
    s.add_argument("--op", required=True, choices=("add", "mul", "clt"))
    s.add_argument("--a")
    s.add_argument("--b")
    s.add_argument("--law")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--grid", default=None, help="lo:hi:n midpoints (use --grid=lo:hi:n when lo < 0)")
    s.set_defaults(func=cmd_convolve)

    s = sub.add_parser("mc-compare", parents=[common], help="Monte Carlo spectra against laws")
    s.add_argument("--ensemble", required=True, choices=tuple(_ENSEMBLES))
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--K", type=int, default=None)
    s.add_argument("--law", default=None)
    s.add_argument("--replicates", type=int, default=3)
    s.set_defaults(func=cmd_mc_compare)

    snr = argparse.ArgumentParser(add_help=False)
    snr.add_argument("--snr-db", type=float, default=None, help="10 log10(P / sigma0^2), P = 1")
    snr.add_argument("--snr-offset-db", type=float, default=0.0,
                     help="added to --snr-db before conversion (convention shift)")
    snr.add_argument("--sigma0-sq", type=float, default=None, help="noise variance; overrides --snr-db")

    s = sub.add_parser("sinr", parents=[common, snr], help="large-system detector SINR")
    s.add_argument("--beta", type=float, default=None)
    s.add_argument("--load-sweep", default=None, help="lo:hi:n (use --grid=lo:hi:n when lo < 0)")
    s.add_argument("--detector", action="append", default=None)
    s.set_defaults(func=cmd_sinr)

    s = sub.add_parser("replica-sweep", parents=[common, snr], help="RS fixed points over load")
    s.add_argument("--beta-min", type=float, required=True)
    s.add_argument("--beta-max", type=float, required=True)
    s.add_argument("--steps", type=int, default=300)
    s.add_argument("--prior", choices=("gaussian", "binary"), default="binary")
    s.set_defaults(func=cmd_replica_sweep)

    s = sub.add_parser("cs-fixed-point", parents=[common], help="l0 compressed-sensing state evolution")
    s.add_argument("--beta", type=float, required=True, help="K/N")
    s.add_argument("--sigma0", type=float, default=None, help="noise standard deviation")
    s.add_argument("--sigma0-sq", type=float, default=None, help="noise variance")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--rho", type=float, default=0.1)
    s.set_defaults(func=cmd_cs)
    return p


def _describe(command: str) -> str:
    lines = [f"rmtlab {__version__} {command}: output columns"]
    for table, cols in DESCRIBE[command].items():
        lines.append(f"table {table}:")
        lines += [f"  {c}: {d}" for c, d in cols.items()]
    return "\n".join(lines) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--describe" in argv:
        cmd = next((a for a in argv if a in DESCRIBE), None)
        if cmd is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        sys.stdout.write(_describe(cmd))
        return EXIT_OK
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.config:
            cfg = read_config(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            known = {a.dest for a in sub._actions}
            bad = sorted(set(cfg) - known)
            if bad:
                raise UsageError(f"unknown config keys: {', '.join(bad)}")
            sub.set_defaults(**cfg)
            args = parser.parse_args(argv)
        if args.command == "sinr" and args.detector is None:
            args.detector = ["mmse"]
        tables, meta = args.func(args)
    except (UsageError, ValueError, spectra.UnsupportedLawError,
            transforms.MeanZeroUnsupportedError, OSError) as e:
        print(f"rmtlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except replica.PrecisionError as e:
        print(f"rmtlab: precision: {e}", file=sys.stderr)
        return EXIT_PRECISION
    except (free_calc.SolverFailedError, free_calc.ConvolutionFailedError,
            free_calc.NormalizationError, transforms.InversionFailedError,
            transforms.InversionUnstableError, cs_replica.DivergenceError,
            detectors.DivergenceError, ArithmeticError, RuntimeError) as e:
        print(f"rmtlab: solver failed: {e}", file=sys.stderr)
        return EXIT_SOLVER
    text = emit(args, tables, meta)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
