import argparse
import json
import sys

import numpy as np
import pandas as pd

from config import (
    DEFAULT_SEED, DEFAULT_TOL, MIN_NORM_TOL, ROUNDING_BITS, PROBE_EPS, PROBE_R_MAX, PROBE_R_STEP,
    FREE_DIAMETER_SAMPLES, ENABLE_REPORT_LOGGING, REPORT_DB_PATH, CSV_SIGNIFICANT_DIGITS,
    validate_config,
)
from weight_core import (
    omega_full, weightset_to_dict, weightset_from_dict, array_to_dict, array_from_dict,
)
from constructions import (
    gamma_qubit, kravtsov_lambda, gamma_3, gamma_stacked, gamma_4, pad_weightset, omega_poly,
    QuiverInstance, DiameterInstance, pad_diameter_array, rounded_tensor,
)
from geometry import (
    min_norm_point, separation_certificate, in_affine_hull_zero, in_convex_hull_zero,
    margin_bruteforce, smallest_nonzero_singular_value,
)
from capacity import (
    GeometricProgram, capacity_gd, sinkhorn_array, diameter_probe, default_radii, probe_to_frame,
    directional_profile, profile_slope, scaling_certificate,
)
from tensor_ops import (
    quantum_marginals, moment_map_G, moment_map_T, gap_witness_minimize,
    free_diameter_sample_check, tensor_to_dict, tensor_from_dict,
)
from verifier import TheoremVerifier, CATALOG, reports_to_frame, to_jsonable
from report_logger import ReportLogger

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FAMILIES = ["omega", "qubit", "kravtsov", "gamma3", "stacked", "gamma4", "pad", "poly",
            "quiver", "diameter", "pad-diameter", "round-tensor"]


class UsageError(Exception):
    """Bad input file or parameter combination; exits with code 2."""


# ============================================================================
# INPUT / OUTPUT
# ============================================================================

def load_object(path):
    """Read weightset.json, array.json, tensor.json or a report file and decode it."""
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise UsageError(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"{path} is not valid JSON: {e}")

    if "reports" in data:
        return "reports", data["reports"]
    if "elements" in data:
        return "weightset", weightset_from_dict(data)
    if "entries" in data:
        first = data["entries"][0] if data["entries"] else {}
        if "re" in first:
            return "tensor", tensor_from_dict(data)
        return "array", array_from_dict(data)
    raise UsageError(f"{path}: unrecognized payload (expected elements, entries or reports)")


def _expect(path, kind):
    found, obj = load_object(path)
    if found != kind:
        raise UsageError(f"{path} holds a {found}, expected a {kind}")
    return obj


def encode(kind, obj):
    if kind == "weightset":
        return weightset_to_dict(obj)
    if kind == "array":
        return array_to_dict(obj)
    if kind == "tensor":
        return tensor_to_dict(obj)
    if kind == "reports":
        return {"reports": obj}
    return obj


def to_frame(kind, obj):
    """Tabular view for CSV output: one row per element, entry or report."""
    if kind == "weightset":
        return pd.DataFrame([[float(c) for c in w.coords] for w in obj],
                            columns=[f"c{k}" for k in range(obj.n * obj.d)])
    if kind == "array":
        return pd.DataFrame([{"idx": " ".join(map(str, idx)), "val": float(val)} for idx, val in obj.items()])
    if kind == "tensor":
        return pd.DataFrame([{"idx": " ".join(map(str, idx)), "re": val.real, "im": val.imag}
                             for idx, val in obj.items()])
    if kind == "reports":
        return reports_to_frame(obj)
    if isinstance(obj, pd.DataFrame):
        return obj
    return pd.DataFrame([obj])


def write_output(args, kind, obj):
    """Write obj to --out in --format; print a JSON preview to stdout when no --out is given."""
    if args.out is None:
        if args.format == "json":
            print(json.dumps(encode(kind, obj), indent=2, default=to_jsonable))
        return
    try:
        if args.format == "json":
            with open(args.out, "w") as f:
                json.dump(encode(kind, obj), f, indent=2, default=to_jsonable)
        else:
            to_frame(kind, obj).to_csv(args.out, index=False, float_format=f"%.{CSV_SIGNIFICANT_DIGITS}g")
    except OSError as e:
        raise UsageError(f"Cannot write {args.out}: {e}")
    print(f"✅ Wrote {kind} to {args.out}")


def parse_values(text):
    """'3..10' -> [3, ..., 10]; '2,3' -> [2, 3]; floats and bare words are kept."""
    def scalar(s):
        for cast in (int, float):
            try:
                return cast(s)
            except ValueError:
                pass
        return s

    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [scalar(s) for s in text.split(",") if s]


def parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=values, got '{item}'")
        key, values = item.split("=", 1)
        params[key.strip()] = parse_values(values.strip())
    return params


def _tol(args, default=DEFAULT_TOL):
    return default if args.tol is None else args.tol


def _require(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.family} needs {', '.join(missing)}")


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_construct(args):
    fam = args.family
    if fam == "omega":
        _require(args, "n", "d")
        kind, obj = "weightset", omega_full(args.n, args.d)
    elif fam == "qubit":
        _require(args, "d")
        kind, obj = "weightset", gamma_qubit(args.d)
    elif fam == "kravtsov":
        _require(args, "n")
        kind, obj = "array", kravtsov_lambda(args.n)
    elif fam == "gamma3":
        _require(args, "n")
        kind, obj = "weightset", gamma_3(args.n)
    elif fam == "stacked":
        _require(args, "n", "r")
        kind, obj = "weightset", gamma_stacked(args.n, args.r)
    elif fam == "gamma4":
        _require(args, "n")
        kind, obj = "weightset", gamma_4(args.n)
    elif fam == "pad":
        _require(args, "n", "r")
        kind, obj = "weightset", pad_weightset(gamma_3(args.n), args.r)
    elif fam == "poly":
        _require(args, "n", "d")
        kind, obj = "weightset", omega_poly(args.n, args.d)
    elif fam == "quiver":
        _require(args, "n", "d")
        kind, obj = "weightset", QuiverInstance(args.n, args.d).gamma
    elif fam == "diameter":
        _require(args, "l")
        kind, obj = "array", DiameterInstance(args.l).p
    elif fam == "pad-diameter":
        _require(args, "l", "n")
        kind, obj = "array", pad_diameter_array(DiameterInstance(args.l).p, args.n)
    else:
        _require(args, "l")
        result = rounded_tensor(DiameterInstance(args.l).p, args.bits)
        print(f"ℹ️  Rounding L1 error: {float(result['l1_error']):.3e} ({args.bits} bits)")
        kind, obj = "tensor", result["tensor"]

    print(f"✅ Built {fam}: {obj!r}")
    write_output(args, kind, obj)
    return EXIT_OK


def cmd_minnorm(args):
    ws = _expect(args.input, "weightset")
    result = min_norm_point(ws.to_matrix(), tol=_tol(args, MIN_NORM_TOL))
    cert = separation_certificate(ws.rational_rows(), result["point"])
    print(f"📊 dist(0, conv({ws.label or args.input})) = {result['distance']:.17g}")
    print(f"   Certificate: {result['certificate']['type']}")
    print(f"   Exact lower bound: {cert['distance_lower_bound']:.17g}")
    print(f"   Converged: {result['converged']} ({result['iterations']} iterations)")
    write_output(args, "result", {
        "distance": result["distance"],
        "point": result["point"],
        "coefficients": result["coefficients"],
        "certificate": result["certificate"]["type"],
        "certified_lower_bound": cert["distance_lower_bound"],
        "converged": result["converged"],
    })
    return EXIT_OK


def cmd_margin(args):
    ws = _expect(args.input, "weightset")
    payload = {"size": len(ws)}
    if args.exact:
        conv = in_convex_hull_zero(ws.rational_rows())
        payload["zero_in_hull"] = conv["member"]
        print(f"📊 0 in conv: {conv['member']} (exact)")
    result = margin_bruteforce(ws)
    payload.update({"margin": result["margin"], "subset": result["subset"],
                    "subsets_checked": result["subsets_checked"]})
    if result["margin"] is None:
        print("ℹ️  Every subset contains 0 in its hull")
    else:
        print(f"📊 margin = {result['margin']:.17g} (subset {result['subset']})")
    write_output(args, "result", payload)
    return EXIT_OK


def cmd_affhull(args):
    ws = _expect(args.input, "weightset")
    result = in_affine_hull_zero(ws.rational_rows())
    print(f"📊 0 in aff({ws.label or args.input}): {result['member']}")
    write_output(args, "result", result)
    return EXIT_OK


def cmd_svmin(args):
    if args.l is not None:
        M = DiameterInstance(args.l).M
    elif args.input is not None:
        try:
            M = np.loadtxt(args.input, delimiter=",", ndmin=2)
        except (OSError, ValueError) as e:
            raise UsageError(f"Cannot read matrix {args.input}: {e}")
    else:
        raise UsageError("svmin needs a matrix CSV or --l")
    result = smallest_nonzero_singular_value(M)
    print(f"📊 sigma_min = {result['sigma_min']:.17g}, zero singular values: {result['zero_count']}")
    write_output(args, "result", {"sigma_min": result["sigma_min"], "zero_count": result["zero_count"],
                                  "singular_values": result["singular_values"]})
    return EXIT_OK


def _program(path):
    return GeometricProgram.from_array(_expect(path, "array"))


def cmd_capacity(args):
    prog = _program(args.input)
    result = capacity_gd(prog, tol=_tol(args), max_iter=args.max_iter)
    mark = "⚠️ " if result["capacity_zero"] else "📊"
    print(f"{mark} capa = {result['value']:.17g} ({result['status']}, {result['iterations']} iterations)")
    print(f"   ||grad log f|| = {result['grad_norm']:.3e}")
    write_output(args, "result", result)
    return EXIT_OK


def cmd_sinkhorn(args):
    arr = _expect(args.input, "array")
    result = sinkhorn_array(arr, tol=_tol(args), max_sweeps=args.max_sweeps)
    print(f"📊 Sinkhorn: {result['sweeps']} sweeps, residual {result['residuals'][-1]:.3e}, "
          f"converged {result['converged']}")
    if args.out is not None and args.format == "json":
        write_output(args, "array", result["array"])
    else:
        write_output(args, "result", pd.DataFrame({"sweep": range(len(result["residuals"])),
                                                   "residual": result["residuals"]}))
    return EXIT_OK


def cmd_probe(args):
    prog = _program(args.input)
    direction = np.array(parse_values(args.direction), dtype=float) if args.direction else None
    result = diameter_probe(prog, args.eps, radii=default_radii(args.r_max, args.step),
                            capa=args.capa, direction=direction, verbose=args.verbose)
    reached = f"R_needed = {result['R_needed']}" if result["R_needed"] is not None else "not reached"
    print(f"📊 Probe at eps={args.eps:g}: {reached} (capacity {result['capacity']:.17g})")
    write_output(args, "result", probe_to_frame(result) if args.format == "csv" else result)
    return EXIT_OK


def cmd_profile(args):
    if args.l is not None:
        inst = DiameterInstance(args.l)
        prog = GeometricProgram.from_array(inst.p)
        direction = inst.direction()
    elif args.input is not None and args.direction is not None:
        prog = _program(args.input)
        direction = np.array(parse_values(args.direction), dtype=float)
    else:
        raise UsageError("profile needs --l, or an array file with --direction")
    ts = np.linspace(0.0, args.t_max, args.points)
    values = directional_profile(prog, direction, ts)
    frame = pd.DataFrame({"t": ts, "value": values})
    print(f"📊 Profile over t in [0, {args.t_max}] ({args.points} points)")
    if args.offset is not None:
        slope = profile_slope(ts, values, args.offset)
        print(f"   slope of log(value - {args.offset}) = {slope:.10g}")
    write_output(args, "result", frame if args.format == "csv" else frame.to_dict("list"))
    return EXIT_OK


def cmd_certify(args):
    prog = _program(args.input)
    result = scaling_certificate(prog, args.bound)
    mark = "✅" if result["status"] == "certified-positive" else "ℹ️ "
    print(f"{mark} {result['status']} (bound {args.bound:g}, grad norm {result['grad_norm']})")
    write_output(args, "result", result)
    return EXIT_OK


def cmd_marginals(args):
    v = _expect(args.input, "tensor")
    rhos = quantum_marginals(v)
    for k, rho in enumerate(rhos, start=1):
        print(f"📊 rho_{k}: trace {np.real(np.trace(rho)):.12f}, "
              f"diag {np.round(np.real(np.diag(rho)), 12).tolist()}")
    write_output(args, "result", {f"rho_{k}": {"re": np.real(r), "im": np.imag(r)}
                                  for k, r in enumerate(rhos, start=1)})
    return EXIT_OK


def cmd_momentmap(args):
    v = _expect(args.input, "tensor")
    mu_g = moment_map_G(v)
    mu_t = moment_map_T(v)
    print(f"📊 ||mu_G|| = {mu_g.frobenius_norm:.17g}")
    print(f"   ||mu_T|| = {float(np.linalg.norm(mu_t)):.17g}")
    print(f"   max off-diagonal = {mu_g.max_off_diagonal():.3e}")
    write_output(args, "result", {"mu_G_norm": mu_g.frobenius_norm, "mu_T": mu_t,
                                  "max_off_diagonal": mu_g.max_off_diagonal()})
    return EXIT_OK


def cmd_gapwitness(args):
    v = _expect(args.input, "tensor")
    try:
        result = gap_witness_minimize(v, tol=_tol(args))
    except ValueError as e:
        raise UsageError(str(e))
    print(f"📊 inf ||mu_T(t.v)|| ~ {result['value']:.17g} ({result['iterations']} iterations)")
    write_output(args, "result", result)
    return EXIT_OK


def cmd_fdcheck(args):
    v = _expect(args.input, "tensor")
    result = free_diameter_sample_check(v, args.R, samples=args.samples, seed=args.seed)
    mark = "✅" if result["ok"] else "❌"
    print(f"{mark} torus optimum {result['torus_optimum']:.17g}, "
          f"smallest sample {result['min_sampled']:.17g}, violations {result['violations']}")
    write_output(args, "result", result)
    return EXIT_OK if result["ok"] else EXIT_FAIL


def cmd_verify(args):
    checks = args.check or ["all"]
    if "all" in checks:
        checks = list(CATALOG)
    unknown = [c for c in checks if c not in CATALOG]
    if unknown:
        raise UsageError(f"Unknown check '{unknown[0]}'. Catalog: {', '.join(CATALOG)}")
    params = parse_params(args.param)
    if params and len(checks) != 1:
        raise UsageError("--param applies to a single --check")

    verifier = TheoremVerifier(seed=args.seed, tol=_tol(args, MIN_NORM_TOL), verbose=args.verbose)
    print(f"\n🔬 Running {len(checks)} check(s) with seed {args.seed}...")
    try:
        for check_id in checks:
            verifier.run(check_id, params if params else None)
    except KeyError as e:
        raise UsageError(str(e).strip("'\""))
    verifier.print_results()

    if ENABLE_REPORT_LOGGING and not args.no_log:
        ReportLogger(args.db).log_run(verifier.reports, args.seed)
    if args.out is not None:
        verifier.export_results(args.out, fmt=args.format)

    return EXIT_OK if verifier.all_passed() else EXIT_FAIL


def cmd_emit(args):
    kind, obj = load_object(args.input)
    if args.out is None:
        raise UsageError("emit needs --out")
    write_output(args, kind, obj)
    return EXIT_OK


def cmd_reports(args):
    logger = ReportLogger(args.db)
    logger.print_summary_report(limit=args.limit)
    if args.out is not None:
        logger.export_to_csv(args.out)
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed for randomized steps (default 0)")
    common.add_argument("--tol", type=float, default=None,
                        help=f"numeric tolerance (default {MIN_NORM_TOL:g} for min-norm and verify, else {DEFAULT_TOL:g})")
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    common.add_argument("--verbose", action="store_true", help="print solver traces")

    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Constructions, margins, capacities and diameter probes for scaling problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="build an explicit instance")
    p.add_argument("family", choices=FAMILIES)
    for name in ("n", "d", "r", "l"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--bits", type=int, default=ROUNDING_BITS)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("minnorm", parents=[common], help="min-norm point of a weight set's hull")
    p.add_argument("input")
    p.set_defaults(func=cmd_minnorm)

    p = sub.add_parser("margin", parents=[common], help="brute-force margin of a small weight set")
    p.add_argument("input")
    p.add_argument("--exact", action="store_true", help="also decide 0 in conv exactly")
    p.set_defaults(func=cmd_margin)

    p = sub.add_parser("affhull", parents=[common], help="exact test of 0 in the affine hull")
    p.add_argument("input")
    p.set_defaults(func=cmd_affhull)

    p = sub.add_parser("svmin", parents=[common], help="smallest nonzero singular value")
    p.add_argument("input", nargs="?", default=None, help="dense matrix CSV")
    p.add_argument("--l", type=int, default=None, help="use the diameter matrix at level l")
    p.set_defaults(func=cmd_svmin)

    p = sub.add_parser("capacity", parents=[common], help="capacity of an array")
    p.add_argument("input")
    p.add_argument("--max-iter", type=int, default=200_000)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sinkhorn", parents=[common], help="alternating marginal normalization")
    p.add_argument("input")
    p.add_argument("--max-sweeps", type=int, default=1000)
    p.set_defaults(func=cmd_sinkhorn)

    p = sub.add_parser("probe", parents=[common], help="diameter probe along a radius grid")
    p.add_argument("input")
    p.add_argument("--eps", type=float, default=PROBE_EPS)
    p.add_argument("--r-max", type=float, default=PROBE_R_MAX)
    p.add_argument("--step", type=float, default=PROBE_R_STEP)
    p.add_argument("--capa", type=float, default=None, help="known capacity (solved when omitted)")
    p.add_argument("--direction", default=None, help="comma-separated seed direction (minimizing along -direction)")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("profile", parents=[common], help="f_p along a ray")
    p.add_argument("input", nargs="?", default=None)
    p.add_argument("--l", type=int, default=None, help="diameter instance and its kernel direction")
    p.add_argument("--direction", default=None, help="comma-separated direction vector")
    p.add_argument("--t-max", type=float, default=40.0)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--offset", type=float, default=None, help="fit the slope of log(value - offset)")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("certify", parents=[common], help="gradient certificate of positive capacity")
    p.add_argument("input")
    p.add_argument("--bound", type=float, required=True)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("marginals", parents=[common], help="quantum marginals of a tensor")
    p.add_argument("input")
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("momentmap", parents=[common], help="moment maps of a tensor")
    p.add_argument("input")
    p.set_defaults(func=cmd_momentmap)

    p = sub.add_parser("gapwitness", parents=[common], help="torus minimization of the moment map norm")
    p.add_argument("input")
    p.set_defaults(func=cmd_gapwitness)

    p = sub.add_parser("fdcheck", parents=[common], help="random check of the torus reduction on a ball")
    p.add_argument("input")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--samples", type=int, default=FREE_DIAMETER_SAMPLES)
    p.set_defaults(func=cmd_fdcheck)

    p = sub.add_parser("verify", parents=[common], help="run catalog checks")
    p.add_argument("--check", action="append", help="catalog id or 'all' (repeatable)")
    p.add_argument("--param", action="append", help="key=values override, e.g. n=3..10 or r=2,3")
    p.add_argument("--no-log", action="store_true", help="skip the SQLite report log")
    p.add_argument("--db", default=REPORT_DB_PATH)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("emit", parents=[common], help="re-emit a JSON payload as json or csv")
    p.add_argument("input")
    p.set_defaults(func=cmd_emit)

    p = sub.add_parser("reports", parents=[common], help="summary of logged verification runs")
    p.add_argument("--db", default=REPORT_DB_PATH)
    p.add_argument("--limit", type=int, default=5)
    p.set_defaults(func=cmd_reports)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if not validate_config():
        return EXIT_USAGE
    if args.command in ("verify", "fdcheck"):
        print(f"ℹ️  Seed: {args.seed}")

    try:
        return args.func(args)
    except UsageError as e:
        print(f"❌ {e}")
        return EXIT_USAGE
    except ValueError as e:
        print(f"❌ Invalid input: {e}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("\n\n🛑 Stopped by user.")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
