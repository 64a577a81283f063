"""Command-line front-end: problem ingestion, solving, and result emission.

Problem files are JSON.  QP/conic mode:

    {"mode": "qp", "n": 2, "m": 4,
     "H": [[...], ...],            # optional, omitted means zero
     "c": [...], "A": [[...], ...], "b": [...],
     "cone": [{"type": "nonpos", "dim": 4}]}   # K for qp (y-order),
                                               # C for conic (x-order)

Separation instance files:

    {"dimension": 2,
     "side_one": [{"center": [...], "shape": [[...], ...]}, ...],
     "side_two": [...]}

Result documents are JSON with all floats rendered at 17 significant digits,
keys sorted, so identical configurations produce byte-identical files apart
from the wall_time_sec field.  Exit codes: 0 solved / common point, 2
infeasibility certified / separator found, 3 inconclusive, 1 usage or IO
error.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import cones, conic, diagnostics, ellipsoid, qp
from .core import Iterate, iterate, validate_steps
from .errors import (CertificateValidationFailed, DimensionMismatch,
                     NonPolyhedralCone, NotPositiveDefinite,
                     SingularShapeMatrix, StepSizeTooLarge)

log = logging.getLogger("pdhg_diag")

SCHEMA_VERSION = 1

EXIT_SOLVED = 0
EXIT_USAGE = 1
EXIT_CERTIFIED = 2
EXIT_INCONCLUSIVE = 3

_CONE_TAGS = {
    "zero": cones.Zero,
    "free": cones.Free,
    "nonneg": cones.NonnegOrthant,
    "nonpos": cones.NonposOrthant,
    "soc": cones.SecondOrder,
}


class ProblemFormatError(ValueError):
    """Malformed problem file; message carries the offending field."""


# ---------------------------------------------------------------------------
# deterministic JSON emission


def _format_float(x):
    return format(float(x), ".17g")


def _write_json(obj):
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _write_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_write_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ", ".join(
            "%s: %s" % (json.dumps(str(k)), _write_json(v)) for k, v in items
        ) + "}"
    raise TypeError("cannot serialize %r" % type(obj))


def dumps_document(doc):
    """Serialize a result document deterministically (sorted keys, 17 digits)."""
    return _write_json(doc) + "\n"


def write_document(doc, path):
    with open(path, "w") as fh:
        fh.write(dumps_document(doc))


# ---------------------------------------------------------------------------
# problem file format


def cone_from_blocks(blocks):
    factors = []
    for i, blk in enumerate(blocks):
        try:
            tag = blk["type"]
            dim = int(blk["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemFormatError("cone[%d]: need {type, dim} (%s)" % (i, exc))
        if tag not in _CONE_TAGS:
            raise ProblemFormatError(
                "cone[%d]: unknown type %r (expected one of %s)"
                % (i, tag, sorted(_CONE_TAGS))
            )
        factors.append(_CONE_TAGS[tag](dim))
    if not factors:
        raise ProblemFormatError("cone: empty block list")
    return factors[0] if len(factors) == 1 else cones.Product(tuple(factors))


def cone_to_blocks(cone):
    inverse = {cls: tag for tag, cls in _CONE_TAGS.items()}
    out = []
    for _, factor in cones.iter_blocks(cone):
        out.append({"type": inverse[type(factor)], "dim": factor.dim})
    return out


def _field(doc, name, path):
    if name not in doc:
        raise ProblemFormatError("%s: missing field %r" % (path, name))
    return doc[name]


def load_problem(path, mode=None):
    """Parse a qp/conic problem file; returns (mode, problem)."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFormatError("%s: %s" % (path, exc))
    except json.JSONDecodeError as exc:
        raise ProblemFormatError("%s: line %d: %s" % (path, exc.lineno, exc.msg))
    if not isinstance(doc, dict):
        raise ProblemFormatError("%s: top level must be an object" % path)
    file_mode = doc.get("mode")
    mode = mode or file_mode
    if mode not in ("qp", "conic"):
        raise ProblemFormatError("%s: mode must be 'qp' or 'conic'" % path)
    try:
        n = int(_field(doc, "n", path))
        m = int(_field(doc, "m", path))
        c = np.asarray(_field(doc, "c", path), dtype=float)
        A = np.asarray(_field(doc, "A", path), dtype=float)
        b = np.asarray(_field(doc, "b", path), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError("%s: %s" % (path, exc))
    if A.shape != (m, n):
        raise ProblemFormatError(
            "%s: A has shape %s, expected (%d, %d)" % (path, A.shape, m, n)
        )
    H = doc.get("H")
    if H is not None:
        H = np.asarray(H, dtype=float)
        if H.shape != (n, n):
            raise ProblemFormatError("%s: H has shape %s, expected (%d, %d)"
                                     % (path, H.shape, n, n))
    if mode == "qp":
        K = cone_from_blocks(doc["cone"]) if "cone" in doc else cones.NonposOrthant(m)
        if K.dim != m:
            raise ProblemFormatError("%s: cone dim %d != m = %d" % (path, K.dim, m))
        try:
            return mode, qp.QpProblem(H, c, A, b, K)
        except (NotPositiveDefinite, NonPolyhedralCone, DimensionMismatch) as exc:
            raise ProblemFormatError("%s: %s" % (path, exc))
    if H is not None:
        raise ProblemFormatError("%s: conic mode has no H field" % path)
    C = cone_from_blocks(_field(doc, "cone", path))
    if C.dim != n:
        raise ProblemFormatError("%s: cone dim %d != n = %d" % (path, C.dim, n))
    try:
        return mode, conic.ConicPrimalProblem(C=C, A=A, b=b, c=c)
    except DimensionMismatch as exc:
        raise ProblemFormatError("%s: %s" % (path, exc))


def save_problem(problem, path, mode):
    """Write a problem back to the JSON format (bit-exact round trips)."""
    if mode == "qp":
        doc = {
            "mode": "qp", "n": problem.n, "m": problem.m,
            "c": problem.c, "A": problem.A, "b": problem.b,
            "cone": cone_to_blocks(problem.K),
        }
        if problem.H is not None:
            doc["H"] = problem.H
    else:
        doc = {
            "mode": "conic", "n": problem.n, "m": problem.m,
            "c": problem.c, "A": problem.A, "b": problem.b,
            "cone": cone_to_blocks(problem.C),
        }
    write_document(doc, path)


def load_instance(path):
    """Parse an ellipsoid separation instance file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFormatError("%s: %s" % (path, exc))
    except json.JSONDecodeError as exc:
        raise ProblemFormatError("%s: line %d: %s" % (path, exc.lineno, exc.msg))
    if not isinstance(doc, dict):
        raise ProblemFormatError("%s: top level must be an object" % path)
    d = int(_field(doc, "dimension", path))
    sides = []
    for name in ("side_one", "side_two"):
        ells = []
        for i, e in enumerate(_field(doc, name, path)):
            try:
                ells.append(ellipsoid.Ellipsoid(
                    shape=np.asarray(e["shape"], dtype=float),
                    center=np.asarray(e["center"], dtype=float),
                ))
            except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
                raise ProblemFormatError("%s: %s[%d]: %s" % (path, name, i, exc))
            if ells[-1].dim != d:
                raise ProblemFormatError(
                    "%s: %s[%d]: dimension %d != %d" % (path, name, i, ells[-1].dim, d)
                )
        sides.append(ells)
    return ellipsoid.SeparationInstance(sides[0], sides[1])


# ---------------------------------------------------------------------------
# run configuration and commands


@dataclass
class RunConfig:
    mode: str = None
    input: str = None
    sigma: float = None
    tau: float = None
    max_iter: int = 100_000
    residual_tol: float = 1e-9
    cert_tol: float = 1e-6
    seed: int = 0
    trace_path: str = None
    out_path: str = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if (self.sigma is None) != (self.tau is None):
            raise ValueError("provide both sigma and tau, or neither")
        if self.sigma is not None and (self.sigma <= 0 or self.tau <= 0):
            raise ValueError("step sizes must be positive")


def _write_trace_csv(trace, path):
    with open(path, "w") as fh:
        fh.write("k,norm_dx,norm_dy,resid_m,norm_z\n")
        for k in range(trace.iterations):
            fh.write("%d,%s,%s,%s,%s\n" % (
                k + 1,
                _format_float(trace.norm_dx[k]),
                _format_float(trace.norm_dy[k]),
                _format_float(trace.resid_m[k]),
                _format_float(trace.norm_z[k]),
            ))


def _certificates_doc(certs):
    return [
        {"kind": cert.kind, "vector": cert.vector, "residuals": cert.residuals}
        for cert in certs
    ]


def _exit_for_status(status):
    if status == diagnostics.CONSISTENT:
        return EXIT_SOLVED
    if status == diagnostics.INCONCLUSIVE:
        return EXIT_INCONCLUSIVE
    return EXIT_CERTIFIED


def cmd_solve(config):
    """Solve a qp/conic problem file and emit a result document."""
    t_start = time.perf_counter()
    try:
        mode, problem = load_problem(config.input, config.mode)
    except ProblemFormatError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE, None
    thresholds = diagnostics.ClassifyThresholds(
        eps_cert=config.cert_tol, residual_tol=config.residual_tol
    )
    try:
        if mode == "qp":
            saddle = qp.build_saddle(problem, config.sigma, config.tau,
                                     seed=config.seed)
            metric = validate_steps(saddle)
            z0 = Iterate(np.zeros(problem.n), np.zeros(problem.m))
            trace = iterate(saddle, z0, max_iter=config.max_iter,
                            residual_tol=config.residual_tol)
            v = diagnostics.estimate_displacement(
                trace, metric, diagnostics.AVERAGED_DIFFERENCES,
                window=min(10, len(trace.differences)),
            )
            validator = qp.certificate_validator(
                problem, saddle.sigma, saddle.tau, eps_cert=config.cert_tol
            )
            verdict = diagnostics.classify(trace, v, metric, thresholds, validator)
            certs = []
            if verdict.status not in (diagnostics.CONSISTENT, diagnostics.INCONCLUSIVE):
                certs = qp.extract_certificates(
                    problem, saddle.sigma, saddle.tau, v, eps_cert=config.cert_tol
                )
            result = None
        else:
            res = conic.solve_conic_with_limit(
                problem, sigma=config.sigma, tau=config.tau,
                max_iter=config.max_iter, residual_tol=config.residual_tol,
                seed=config.seed,
            )
            trace, v, metric = res.trace, res.v, res.metric
            verdict = diagnostics.classify(trace, v, metric, thresholds)
            certs = []
            result = res
    except (StepSizeTooLarge, CertificateValidationFailed, ProblemFormatError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE, None

    doc = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "status": verdict.status,
        "sigma": float(metric.sigma),
        "tau": float(metric.tau),
        "seed": config.seed,
        "iterations": trace.iterations,
        "v_primal": v.v_primal,
        "v_dual": v.v_dual,
        "m_norm_v": v.m_norm,
        "residual_report": {
            k: val for k, val in verdict.residual_report.items()
        },
        "certificates": _certificates_doc(certs),
        "converged_point": (
            trace.z_final.x if verdict.status == diagnostics.CONSISTENT else None
        ),
    }
    if mode == "conic":
        doc["kernel_condition_heuristic"] = bool(result.kernel_condition)
    doc["wall_time_sec"] = time.perf_counter() - t_start
    if config.trace_path:
        _write_trace_csv(trace, config.trace_path)
    if config.out_path:
        write_document(doc, config.out_path)
    else:
        sys.stdout.write(dumps_document(doc))
    return _exit_for_status(verdict.status), doc


# ---------------------------------------------------------------------------
# bundled demonstration scenarios (an infeasible LP and its QP variant)


def reproduction_scenario(name):
    """Return (problem, sigma, tau, z0, plotted_iterations) for a named scenario."""
    A = np.array([[-1.0, 1.0], [1.0, -1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([-2.0, 1.0, 0.0, 0.0])
    c = np.array([1.0, -2.0])
    z0 = Iterate(np.zeros(2), np.array([0.0, 0.0, -1.0, -1.0]))
    if name == "lp-example":
        return qp.QpProblem(None, c, A, b), 0.3, 0.3, z0, 50
    if name == "qp-example":
        return qp.QpProblem(np.eye(2), c, A, b), 0.3, 0.3, z0, 150
    raise ValueError("unknown scenario %r" % name)


def cmd_reproduce(name, out_dir, long_iters=10_000):
    """Write the difference / shifted-residual trace table and a long-run report.

    The reference displacement for the plotted columns is estimated from the
    long run itself (last difference, matching the plotted quantity), never
    hardcoded.
    """
    try:
        problem, sigma, tau, z0, plot_iters = reproduction_scenario(name)
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    os.makedirs(out_dir, exist_ok=True)
    saddle = qp.build_saddle(problem, sigma, tau)
    metric = validate_steps(saddle)
    trace = iterate(saddle, z0, max_iter=long_iters, residual_tol=0.0)
    v = diagnostics.estimate_displacement(
        trace, metric, diagnostics.LAST_DIFFERENCE
    )
    certs = qp.extract_certificates(problem, sigma, tau, v)
    cols = qp.shifted_iterate_experiment(problem, sigma, tau, z0, v, plot_iters)
    trace_path = os.path.join(out_dir, "%s-trace.csv" % name)
    with open(trace_path, "w") as fh:
        names = ["k", "norm_dx", "norm_dy", "norm_dx_minus_vR",
                 "norm_dy_minus_vD", "shifted_resid_x", "shifted_resid_y"]
        fh.write(",".join(names) + "\n")
        for i in range(plot_iters):
            row = [str(int(cols["k"][i]))] + [
                _format_float(cols[n][i]) for n in names[1:]
            ]
            fh.write(",".join(row) + "\n")

    # long-run shifted residual: the stabilized level is strictly positive,
    # i.e. the limit of z_k + k v is not a fixed point of v + T
    long_cols = qp.shifted_iterate_experiment(problem, sigma, tau, z0, v, long_iters)
    shifted_total = np.hypot(long_cols["shifted_resid_x"], long_cols["shifted_resid_y"])
    tail = shifted_total[int(0.9 * long_iters):]
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": name,
        "sigma": sigma,
        "tau": tau,
        "iterations": trace.iterations,
        "v_primal": v.v_primal,
        "v_dual": v.v_dual,
        "m_norm_v": v.m_norm,
        "certificates": _certificates_doc(certs),
        "shifted_residual_final": float(shifted_total[-1]),
        "shifted_residual_tail_relative_change": float(
            (tail.max() - tail.min()) / max(tail[-1], 1e-300)
        ),
    }
    write_document(report, os.path.join(out_dir, "%s-report.json" % name))
    return EXIT_SOLVED


def cmd_separate(config):
    """Run ellipsoid separation on an instance file."""
    t_start = time.perf_counter()
    try:
        inst = load_instance(config.input)
    except ProblemFormatError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE, None
    except SingularShapeMatrix as exc:
        print("error: %s: %s" % (config.input, exc), file=sys.stderr)
        return EXIT_USAGE, None
    outcome = ellipsoid.separate(
        inst, sigma=config.sigma, tau=config.tau, max_iter=config.max_iter,
        residual_tol=config.residual_tol, eps_cert=config.cert_tol,
        seed=config.seed,
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "status": outcome.status,
        "diagnostics": outcome.diagnostics,
    }
    if outcome.status == ellipsoid.COMMON_POINT:
        doc.update({
            "point": outcome.point,
            "lambdas": outcome.lambdas,
            "mus": outcome.mus,
            "reconstruction_gap": outcome.reconstruction_gap,
        })
        code = EXIT_SOLVED
    elif outcome.status == ellipsoid.SEPARATOR:
        doc.update({
            "w": outcome.w,
            "s": outcome.s,
            "t": outcome.t,
            "s_prime": outcome.s_prime,
            "margins_one": outcome.margins_one,
            "margins_two": outcome.margins_two,
        })
        code = EXIT_CERTIFIED
    else:
        code = EXIT_INCONCLUSIVE
    doc["wall_time_sec"] = time.perf_counter() - t_start
    if config.out_path:
        write_document(doc, config.out_path)
    else:
        sys.stdout.write(dumps_document(doc))
    return code, doc


# ---------------------------------------------------------------------------
# argument parsing


def _add_solver_flags(p):
    p.add_argument("--input", required=True, help="problem file (JSON)")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--tol", type=float, default=1e-9,
                   help="fixed-point residual tolerance in the M-norm")
    p.add_argument("--cert-tol", type=float, default=1e-6,
                   help="nonzeroness threshold for certificates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="result document path")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pdhg-diag",
        description="PDHG solver with displacement-vector infeasibility diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a qp/conic problem file")
    _add_solver_flags(p_solve)
    p_solve.add_argument("--mode", choices=["qp", "conic"], default=None,
                         help="overrides the file's mode field")
    p_solve.add_argument("--trace", default=None, help="iteration trace CSV path")

    p_rep = sub.add_parser("reproduce", help="regenerate the bundled scenario traces")
    p_rep.add_argument("name", choices=["lp-example", "qp-example"])
    p_rep.add_argument("--out-dir", required=True)

    p_sep = sub.add_parser("separate", help="ellipsoid separation on an instance file")
    _add_solver_flags(p_sep)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("PDHG_DIAG_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    if args.command == "reproduce":
        return cmd_reproduce(args.name, args.out_dir)
    try:
        config = RunConfig(
            mode=getattr(args, "mode", None),
            input=args.input,
            sigma=args.sigma,
            tau=args.tau,
            max_iter=args.max_iter,
            residual_tol=args.tol,
            cert_tol=args.cert_tol,
            seed=args.seed,
            trace_path=getattr(args, "trace", None),
            out_path=args.out,
        )
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command == "solve":
        code, _ = cmd_solve(config)
    else:
        code, _ = cmd_separate(config)
    return code


if __name__ == "__main__":
    sys.exit(main())
