"""Command-line interface: document ingestion, computation, report emission.

Exit codes: 0 computed or verified, 1 verification failed, 2 invalid input,
3 numerically non-certifiable.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import document as doc
from .acceptance import run_all
from .algebra import fk_det
from .complexes import torsion
from .errors import (DocumentError, NonConvergent, NotDeterminantClass,
                     TorsionError)
from .formulas import verify_fibration, verify_product, verify_sum
from .oracle import mahler_refine, torsion_via_dense, torsion_via_laplacian
from .spaces import (builtin_space, cochain_with_coefficients,
                     default_coefficients, pushout_assemble)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_NOT_CERTIFIED = 3


def _read_input(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
        return
    rows = _flatten(payload)
    width = max(len(k) for k, _ in rows) if rows else 0
    for key, val in rows:
        print("%-*s  %s" % (width, key, val))


def _flatten(payload, prefix=""):
    rows = []
    if isinstance(payload, dict):
        for k in sorted(payload):
            rows.extend(_flatten(payload[k], prefix + str(k) + "."))
    elif isinstance(payload, (list, tuple)):
        for i, v in enumerate(payload):
            rows.extend(_flatten(v, prefix + "%d." % i))
    else:
        if isinstance(payload, float):
            val = "%.17g" % payload
        else:
            val = str(payload)
        rows.append((prefix.rstrip("."), val))
    return rows


def _log_pair(log_value) -> dict:
    if log_value is None:
        return {"log": None, "value": None}
    return {"log": float(log_value), "value": float(np.exp(log_value))}


def cmd_det(args) -> int:
    data = doc.load_document(_read_input(args.file))
    if "matrix" not in data:
        raise DocumentError("det needs a matrix block")
    alg = doc.algebra_from_json(data["algebra"])
    mat = doc.matrix_from_json(alg, data["matrix"])
    res = fk_det(mat, eps_rel=args.epsilon, grid=args.grid, tol=args.tolerance)
    payload = {"log_det": res.log_det, "det": float(np.exp(res.log_det)),
               "det_class": res.det_class, "invertible": res.invertible,
               "converged": res.converged}
    _emit(payload, args.format)
    return EXIT_OK if res.det_class else EXIT_NOT_CERTIFIED


def cmd_mahler(args) -> int:
    data = doc.load_document(_read_input(args.file))
    if "polynomial" not in data:
        raise DocumentError("mahler needs a polynomial block")
    alg = doc.algebra_from_json(data["algebra"])
    poly = doc.element_from_json(alg, data["polynomial"])
    value, bound = mahler_refine(poly, args.tolerance)
    _emit({"log_mahler": value, "mahler": float(np.exp(value)),
           "error_bound": bound}, args.format)
    return EXIT_OK


def _space_and_coefficients(data):
    space = doc.space_from_json(data["space"])
    if "coefficients" in data:
        h = doc.coefficients_from_json(data["coefficients"])
    else:
        h = default_coefficients(space)
    return space, h


def cmd_torsion(args) -> int:
    data = doc.load_document(_read_input(args.file))
    if "space" in data:
        space, h = _space_and_coefficients(data)
        complex_ = cochain_with_coefficients(space, h)
    elif "complex" in data:
        complex_ = doc.complex_from_json(data["complex"])
    else:
        raise DocumentError("torsion needs a space or complex block")
    report = torsion(complex_, tol=args.tolerance, grid=args.grid,
                     eps_rel=args.epsilon)
    payload = {"torsion": _log_pair(report.log_value),
               "line": repr(report.line),
               "det_class": report.det_class,
               "weakly_acyclic": report.weakly_acyclic,
               "betti": [float(b) for b in report.betti],
               "per_degree_log_det": [float(v) for v in report.per_degree_log_det]}
    code = EXIT_OK if report.log_value is not None else EXIT_NOT_CERTIFIED
    if args.oracle:
        lap = torsion_via_laplacian(complex_)
        payload["oracle"] = {"laplacian_log": lap,
                             "disagreement": abs(lap - report.log_raw)}
        if complex_.algebra.torus_rank == 0:
            dense = torsion_via_dense(complex_)
            payload["oracle"]["dense_log"] = dense
            payload["oracle"]["disagreement"] = max(
                payload["oracle"]["disagreement"], abs(dense - report.log_raw))
        if payload["oracle"]["disagreement"] > max(args.tolerance, 1e-8):
            code = EXIT_VERIFY_FAILED
    _emit(payload, args.format)
    return code


def cmd_verify(args) -> int:
    data = doc.load_document(_read_input(args.file))
    if args.kind == "sum":
        if "pushout" not in data:
            raise DocumentError("verify sum needs a pushout block")
        block = data["pushout"]
        x0 = doc.space_from_json(block["x0"])
        x1 = doc.space_from_json(block["x1"])
        x2 = doc.space_from_json(block["x2"])
        j1 = doc.chain_map_from_json(x0, x1, block["j1"])
        j2 = doc.chain_map_from_json(x0, x2, block["j2"])
        push = pushout_assemble(j1, j2)
        h = doc.coefficients_from_json(data["coefficients"]) \
            if "coefficients" in data else default_coefficients(push.space)
        report = verify_sum(push, h, tol=args.tolerance, grid=args.grid,
                            oracle=args.oracle)
    elif args.kind == "product":
        if "product" not in data:
            raise DocumentError("verify product needs a product block")
        block = data["product"]
        x1 = doc.space_from_json(block["x1"])
        x2 = doc.space_from_json(block["x2"])
        h1 = doc.coefficients_from_json(block["coefficients1"]) \
            if "coefficients1" in block else default_coefficients(x1)
        h2 = doc.coefficients_from_json(block["coefficients2"]) \
            if "coefficients2" in block else default_coefficients(x2)
        report = verify_product(x1, h1, x2, h2, tol=args.tolerance,
                                grid=args.grid, oracle=args.oracle)
    elif args.kind == "fibration":
        if "bundle" not in data:
            raise DocumentError("verify fibration needs a bundle block")
        bundle = doc.bundle_from_json(data["bundle"])
        h = doc.coefficients_from_json(data["coefficients"]) \
            if "coefficients" in data else default_coefficients(bundle.fiber)
        report = verify_fibration(bundle, h, tol=args.tolerance, grid=args.grid)
    else:
        raise DocumentError("unknown verification kind %r" % args.kind)
    payload = report.to_dict()
    _emit(payload, args.format)
    if report.residual is None:
        return EXIT_NOT_CERTIFIED
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_builtin(args) -> int:
    space = builtin_space(args.name, *args.params)
    payload = {"space": doc.space_to_json(space)}
    try:
        payload["coefficients"] = doc.coefficients_to_json(
            default_coefficients(space))
    except TorsionError:
        pass
    print(doc.dump_document(payload))
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_all(fast=args.fast)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l2torsion",
        description="Combinatorial L2-torsion of equivariant CW complexes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_oracle=False):
        p.add_argument("--tolerance", type=float, default=1e-8)
        p.add_argument("--grid", type=int, default=256,
                       help="starting torus grid resolution per circle")
        p.add_argument("--epsilon", type=float, default=1e-10,
                       help="relative spectral cutoff")
        p.add_argument("--format", choices=("json", "table"), default="table")
        if with_oracle:
            p.add_argument("--oracle", action="store_true",
                           help="also run the independent oracle path")

    p = sub.add_parser("det", help="Fuglede-Kadison determinant of a matrix")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_det)

    p = sub.add_parser("mahler", help="log Mahler measure with error bound")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_mahler)

    p = sub.add_parser("torsion", help="L2-torsion of a space or complex")
    p.add_argument("file")
    common(p, with_oracle=True)
    p.set_defaults(fn=cmd_torsion)

    p = sub.add_parser("verify", help="verify a torsion formula")
    p.add_argument("kind", choices=("sum", "product", "fibration"))
    p.add_argument("file")
    common(p, with_oracle=True)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("builtin", help="emit a builtin space document")
    p.add_argument("name")
    p.add_argument("params", nargs="*")
    p.set_defaults(fn=cmd_builtin)

    p = sub.add_parser("selftest", help="run the acceptance suites")
    p.add_argument("--fast", action="store_true",
                   help="smaller sample counts for a quick check")
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (NonConvergent, NotDeterminantClass) as exc:
        print("not certifiable: %s" % exc, file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    except (DocumentError, TorsionError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
