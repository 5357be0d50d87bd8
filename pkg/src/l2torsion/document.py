"""JSON document format shared by the CLI and the library.

A document carries exactly one computation subject (a matrix, a polynomial,
a space, a complex, a pushout, a product, or a bundle) plus the blocks it
needs (algebra, coefficient system).  Group ring scalars are stored as term
lists {"key": ..., "re": ..., "im": ...}; handle element keys are integers
(finite tables), exponent lists (free abelian), signed-letter word lists
(presented groups), or [left, right] pairs (products).
"""

from __future__ import annotations

import json

import numpy as np

from .algebra import GroupAlgebra, GroupRingElement, GroupRingMatrix
from .complexes import CochainComplex
from .errors import DocumentError
from .formulas import BaseCell, FibrationData
from .groups import FiniteGroupTable
from .spaces import (ChainMap, CoefficientSystem, EquivariantCWComplex,
                     FiniteHandle, FreeAbelianHandle, GroupHandle,
                     IntegralElement, IntegralMatrix, PresentedHandle,
                     ProductHandle)

FORMAT_VERSION = "1"


# ---------------------------------------------------------------------------
# algebra blocks


def algebra_to_json(alg: GroupAlgebra) -> dict:
    out = {"type": alg.kind}
    if alg.order > 1 or alg.torus_rank == 0:
        out["table"] = [[int(v) for v in row] for row in alg.group.mult]
    if alg.torus_rank:
        out["rank"] = alg.torus_rank
    return out


def algebra_from_json(block) -> GroupAlgebra:
    if not isinstance(block, dict) or "type" not in block:
        raise DocumentError("algebra block needs a type")
    kind = block["type"]
    if kind == "finite_group":
        return GroupAlgebra(FiniteGroupTable(block["table"]))
    if kind == "torus":
        return GroupAlgebra(torus_rank=int(block["rank"]))
    if kind == "mixed":
        return GroupAlgebra(FiniteGroupTable(block["table"]), int(block["rank"]))
    raise DocumentError("unknown algebra type %r" % kind)


def _key_to_json(key):
    g, exps = key
    return [int(g), [int(e) for e in exps]]


def _key_from_json(alg: GroupAlgebra, data):
    try:
        g, exps = data
        return alg.check_key((int(g), tuple(int(e) for e in exps)))
    except Exception as exc:
        raise DocumentError("bad algebra key %r: %s" % (data, exc))


def element_to_json(e: GroupRingElement) -> list:
    return [{"key": _key_to_json(k), "re": float(np.real(c)), "im": float(np.imag(c))}
            for k, c in sorted(e.terms.items())]


def element_from_json(alg: GroupAlgebra, terms) -> GroupRingElement:
    if not isinstance(terms, list):
        raise DocumentError("element must be a list of terms")
    out = {}
    for t in terms:
        key = _key_from_json(alg, t["key"])
        out[key] = out.get(key, 0.0) + complex(t.get("re", 0.0), t.get("im", 0.0))
    return GroupRingElement(alg, out)


def matrix_to_json(m: GroupRingMatrix) -> dict:
    return {"rows": m.rows, "cols": m.cols,
            "entries": [{"row": i, "col": j, "terms": element_to_json(v)}
                        for (i, j), v in sorted(m.entries.items())]}


def matrix_from_json(alg: GroupAlgebra, block) -> GroupRingMatrix:
    try:
        entries = {(int(e["row"]), int(e["col"])): element_from_json(alg, e["terms"])
                   for e in block.get("entries", [])}
        return GroupRingMatrix(alg, int(block["rows"]), int(block["cols"]), entries)
    except DocumentError:
        raise
    except Exception as exc:
        raise DocumentError("bad matrix block: %s" % exc)


# ---------------------------------------------------------------------------
# group handles and integral chain data


def handle_to_json(h: GroupHandle) -> dict:
    if isinstance(h, FiniteHandle):
        return {"kind": "finite_table",
                "table": [[int(v) for v in row] for row in h.table.mult]}
    if isinstance(h, FreeAbelianHandle):
        return {"kind": "free_abelian", "rank": h.rank}
    if isinstance(h, PresentedHandle):
        return {"kind": "presented", "generators": h.n_generators,
                "relators": [list(r) for r in h.relators], "name": h.name}
    if isinstance(h, ProductHandle):
        return {"kind": "product", "left": handle_to_json(h.left),
                "right": handle_to_json(h.right)}
    raise DocumentError("cannot serialize handle %r" % h)


def handle_from_json(block) -> GroupHandle:
    kind = block.get("kind")
    if kind == "finite_table":
        return FiniteHandle(FiniteGroupTable(block["table"]))
    if kind == "free_abelian":
        return FreeAbelianHandle(int(block["rank"]))
    if kind == "presented":
        return PresentedHandle(int(block["generators"]),
                               tuple(tuple(r) for r in block["relators"]),
                               block.get("name", "presented"))
    if kind == "product":
        return ProductHandle(handle_from_json(block["left"]),
                             handle_from_json(block["right"]))
    raise DocumentError("unknown group kind %r" % kind)


def _handle_key_to_json(h: GroupHandle, key):
    if isinstance(h, FiniteHandle):
        return int(key)
    if isinstance(h, FreeAbelianHandle):
        return [int(e) for e in key]
    if isinstance(h, PresentedHandle):
        return [int(l) for l in key]
    if isinstance(h, ProductHandle):
        return [_handle_key_to_json(h.left, key[0]),
                _handle_key_to_json(h.right, key[1])]
    raise DocumentError("cannot serialize key for handle %r" % h)


def _handle_key_from_json(h: GroupHandle, data):
    if isinstance(h, FiniteHandle):
        return int(data)
    if isinstance(h, FreeAbelianHandle):
        return tuple(int(e) for e in data)
    if isinstance(h, PresentedHandle):
        return tuple(int(l) for l in data)
    if isinstance(h, ProductHandle):
        return (_handle_key_from_json(h.left, data[0]),
                _handle_key_from_json(h.right, data[1]))
    raise DocumentError("cannot parse key for handle %r" % h)


def int_matrix_to_json(m: IntegralMatrix) -> dict:
    return {"rows": m.rows, "cols": m.cols,
            "entries": [{"row": i, "col": j,
                         "terms": [{"key": _handle_key_to_json(m.handle, k),
                                    "coeff": int(c)} for k, c in sorted(v.terms.items())]}
                        for (i, j), v in sorted(m.entries.items())]}


def int_matrix_from_json(h: GroupHandle, block) -> IntegralMatrix:
    try:
        entries = {}
        for e in block.get("entries", []):
            terms = {_handle_key_from_json(h, t["key"]): int(t["coeff"])
                     for t in e["terms"]}
            entries[(int(e["row"]), int(e["col"]))] = IntegralElement(h, terms)
        return IntegralMatrix(h, int(block["rows"]), int(block["cols"]), entries)
    except DocumentError:
        raise
    except Exception as exc:
        raise DocumentError("bad integral matrix block: %s" % exc)


def space_to_json(x: EquivariantCWComplex) -> dict:
    return {"group": handle_to_json(x.group), "cells": list(x.cells),
            "boundary": [int_matrix_to_json(b) for b in x.boundaries],
            "label": x.label}


def space_from_json(block) -> EquivariantCWComplex:
    try:
        handle = handle_from_json(block["group"])
        cells = [int(c) for c in block["cells"]]
        bnds = [int_matrix_from_json(handle, b) for b in block.get("boundary", [])]
        return EquivariantCWComplex(handle, cells, bnds, block.get("label", "X"))
    except DocumentError:
        raise
    except Exception as exc:
        raise DocumentError("bad space block: %s" % exc)


# ---------------------------------------------------------------------------
# coefficient systems


def coefficients_to_json(h: CoefficientSystem) -> dict:
    if h.handle.kind == "product":
        c1, c2 = h._children
        return {"kind": "product", "left": coefficients_to_json(c1),
                "right": coefficients_to_json(c2), "label": h.label}
    return {"kind": h.handle.kind, "group": handle_to_json(h.handle),
            "algebra": algebra_to_json(h.algebra),
            "images": [element_to_json(img) for img in h.images],
            "label": h.label}


def coefficients_from_json(block) -> CoefficientSystem:
    kind = block.get("kind")
    if kind == "product":
        return CoefficientSystem.product(coefficients_from_json(block["left"]),
                                         coefficients_from_json(block["right"]),
                                         block.get("label"))
    handle = handle_from_json(block["group"])
    alg = algebra_from_json(block["algebra"])
    images = [element_from_json(alg, t) for t in block["images"]]
    label = block.get("label", "H")
    if kind == "finite":
        return CoefficientSystem.finite(handle, alg, images, label)
    if kind == "free_abelian":
        return CoefficientSystem.abelian(handle, alg, images, label)
    if kind == "presented":
        return CoefficientSystem.presented(handle, alg, images, label)
    raise DocumentError("unknown coefficient kind %r" % kind)


# ---------------------------------------------------------------------------
# complexes, pushouts, bundles


def complex_to_json(c: CochainComplex) -> dict:
    out = {"algebra": algebra_to_json(c.algebra), "ranks": list(c.ranks),
           "differentials": [matrix_to_json(d.matrix) for d in c.differentials],
           "label": c.label}
    if any(m.gram is not None for m in c.modules):
        out["grams"] = [matrix_to_json(m.gram_or_identity()) for m in c.modules]
    return out


def complex_from_json(block) -> CochainComplex:
    alg = algebra_from_json(block["algebra"])
    ranks = [int(r) for r in block["ranks"]]
    mats = [matrix_from_json(alg, b) for b in block.get("differentials", [])]
    grams = None
    if "grams" in block:
        grams = [matrix_from_json(alg, g) if g else None for g in block["grams"]]
    return CochainComplex.from_matrices(alg, ranks, mats, grams,
                                        block.get("label", "C"))


def chain_map_from_json(source, target, blocks) -> ChainMap:
    mats = [int_matrix_from_json(source.group, b) for b in blocks]
    return ChainMap(source, target, mats)


def bundle_from_json(block) -> FibrationData:
    fiber = space_from_json(block["fiber"])
    cells = []
    for c in block.get("base_cells", []):
        attach = None
        transport = None
        if c.get("attach") is not None:
            from .spaces import trivial_handle
            attach = [int_matrix_from_json(trivial_handle(), b) for b in c["attach"]]
        if c.get("transport") is not None:
            transport = [int_matrix_from_json(fiber.group, b)
                         for b in c["transport"]]
        cells.append(BaseCell(int(c["dim"]), attach, transport))
    return FibrationData(fiber, cells, block.get("label", "E"))


# ---------------------------------------------------------------------------
# whole documents


def load_document(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError("not valid JSON: %s" % exc)
    if not isinstance(doc, dict):
        raise DocumentError("document must be a JSON object")
    if doc.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise DocumentError("unsupported document version %r" % doc.get("version"))
    subjects = [k for k in ("matrix", "polynomial", "space", "complex",
                            "pushout", "product", "bundle") if k in doc]
    if len(subjects) != 1:
        raise DocumentError("document must carry exactly one computation "
                            "subject, found %r" % subjects)
    return doc


def dump_document(doc: dict) -> str:
    doc = dict(doc)
    doc.setdefault("version", FORMAT_VERSION)
    return json.dumps(doc, indent=2, sort_keys=True)
