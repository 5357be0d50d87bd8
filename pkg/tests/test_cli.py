"""End-to-end tests of the command line interface and document round trips."""

import json

import numpy as np
import pytest

from l2torsion import document as doc
from l2torsion.algebra import GroupAlgebra, GroupRingMatrix
from l2torsion.cli import main
from l2torsion.groups import cyclic_group
from l2torsion.spaces import builtin_space, default_coefficients


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_doc(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(doc.dump_document(payload))
    return str(path)


def det_document():
    alg = GroupAlgebra(cyclic_group(3))
    m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
    return {"algebra": doc.algebra_to_json(alg), "matrix": doc.matrix_to_json(m)}


def test_det_golden(tmp_path, capsys):
    path = write_doc(tmp_path, "det.json", det_document())
    code, out, _ = run_cli(capsys, "det", path, "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["log_det"] == pytest.approx(np.log(3) / 3, abs=1e-12)
    assert payload["det_class"] is True


def test_det_rejects_bad_document(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run_cli(capsys, "det", str(path))
    assert code == 2
    assert "error" in err


def test_mahler_subcommand(tmp_path, capsys):
    alg = GroupAlgebra(torus_rank=2)
    poly = alg.one() + alg.monomial(exps=(1, 0)) + alg.monomial(exps=(0, 1))
    payload = {"algebra": doc.algebra_to_json(alg),
               "polynomial": doc.element_to_json(poly)}
    path = write_doc(tmp_path, "mahler.json", payload)
    code, out, _ = run_cli(capsys, "mahler", path, "--format", "json",
                           "--tolerance", "1e-6")
    assert code == 0
    data = json.loads(out)
    assert data["log_mahler"] == pytest.approx(0.3230659472194505, abs=1e-6)
    assert data["error_bound"] <= 1e-6


def test_builtin_pipes_into_torsion(tmp_path, capsys, monkeypatch):
    code, out, _ = run_cli(capsys, "builtin", "sphere", "2")
    assert code == 0
    path = tmp_path / "sphere.json"
    path.write_text(out)
    code, out2, _ = run_cli(capsys, "torsion", str(path), "--format", "json")
    assert code == 0
    data = json.loads(out2)
    assert data["torsion"]["value"] == pytest.approx(1.0, abs=1e-12)
    assert data["betti"] == [1.0, 0.0, 1.0]


def test_torsion_stdin_dash(capsys, monkeypatch):
    space = builtin_space("lens", 3, 1)
    payload = {"space": doc.space_to_json(space),
               "coefficients": doc.coefficients_to_json(default_coefficients(space))}
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO(doc.dump_document(payload)))
    code, out, _ = run_cli(capsys, "torsion", "-", "--format", "json", "--oracle")
    assert code == 0
    data = json.loads(out)
    assert data["oracle"]["disagreement"] < 1e-9


def test_torsion_rejects_bad_boundary(tmp_path, capsys):
    space = builtin_space("lens", 3, 1)
    block = doc.space_to_json(space)
    # corrupt the boundary so that dd != 0
    block["boundary"][1]["entries"][0]["terms"] = [{"key": 1, "coeff": 1}]
    path = write_doc(tmp_path, "bad_dsquared.json", {"space": block})
    code, _, err = run_cli(capsys, "torsion", str(path))
    assert code == 2
    assert "error" in err


def test_verify_product_document(tmp_path, capsys):
    x1 = builtin_space("lens", 3, 1)
    x2 = builtin_space("circle_z")
    payload = {"product": {
        "x1": doc.space_to_json(x1),
        "x2": doc.space_to_json(x2),
        "coefficients1": doc.coefficients_to_json(default_coefficients(x1)),
        "coefficients2": doc.coefficients_to_json(default_coefficients(x2)),
    }}
    path = write_doc(tmp_path, "lens31_x_circle.json", payload)
    code, out, _ = run_cli(capsys, "verify", "product", path,
                           "--format", "json", "--oracle")
    assert code == 0
    data = json.loads(out)
    assert data["passed"] is True
    assert data["residual"] < 1e-8


def test_verify_sum_document(tmp_path, capsys):
    s1 = builtin_space("sphere", 1)
    d2 = builtin_space("disk", 2)
    from l2torsion.spaces import IntegralMatrix
    incl = [doc.int_matrix_to_json(IntegralMatrix.identity(s1.group, 1))] * 2
    payload = {"pushout": {
        "x0": doc.space_to_json(s1),
        "x1": doc.space_to_json(d2),
        "x2": doc.space_to_json(d2),
        "j1": incl, "j2": incl,
    }}
    path = write_doc(tmp_path, "sum.json", payload)
    code, out, _ = run_cli(capsys, "verify", "sum", path, "--format", "json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_document_round_trip_determinism(tmp_path, capsys):
    path = write_doc(tmp_path, "det.json", det_document())
    _, out1, _ = run_cli(capsys, "det", path, "--format", "json")
    _, out2, _ = run_cli(capsys, "det", path, "--format", "json")
    assert out1 == out2


def test_space_document_round_trip():
    for name in (("lens", 5, 2), ("klein_bottle",), ("torus", 2)):
        x = builtin_space(*name)
        back = doc.space_from_json(json.loads(doc.dump_document(
            {"space": doc.space_to_json(x)}))["space"])
        assert back.cells == x.cells
        assert back.group == x.group
        for b1, b2 in zip(back.boundaries, x.boundaries):
            assert b1.entries.keys() == b2.entries.keys()
            for key in b1.entries:
                assert b1.entries[key].terms == b2.entries[key].terms


def test_selftest_fast(capsys):
    code, out, _ = run_cli(capsys, "selftest", "--fast")
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("[")]
    assert len(lines) == 8
    assert all(l.startswith("[PASS]") for l in lines)


def test_complex_document_round_trip(tmp_path, capsys):
    alg = GroupAlgebra(cyclic_group(5))
    m = GroupRingMatrix.from_rows(alg, [[alg.group_element(1) - alg.one()]])
    from l2torsion.complexes import CochainComplex
    c = CochainComplex.from_matrices(alg, [1, 1], [m])
    payload = {"complex": doc.complex_to_json(c)}
    path = write_doc(tmp_path, "complex.json", payload)
    code, out, _ = run_cli(capsys, "torsion", str(path), "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["per_degree_log_det"][0] == pytest.approx(np.log(5) / 5, abs=1e-12)


def test_verify_fibration_document(tmp_path, capsys):
    from l2torsion.spaces import IntegralMatrix, trivial_handle
    fiber = builtin_space("circle_z")
    attach = [doc.int_matrix_to_json(
        IntegralMatrix(trivial_handle(), 1, 1, {(0, 0): 1})),
        doc.int_matrix_to_json(IntegralMatrix(trivial_handle(), 0, 1))]
    payload = {"bundle": {
        "fiber": doc.space_to_json(fiber),
        "base_cells": [{"dim": 0}, {"dim": 2, "attach": attach}],
    }}
    path = write_doc(tmp_path, "bundle.json", payload)
    code, out, _ = run_cli(capsys, "verify", "fibration", path, "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["passed"] is True
    assert data["details"]["chi_base"] == 2


def test_verify_fibration_euler_guard_exit_code(tmp_path, capsys):
    payload = {"bundle": {
        "fiber": doc.space_to_json(builtin_space("sphere", 2)),
        "base_cells": [{"dim": 0}],
    }}
    path = write_doc(tmp_path, "badbundle.json", payload)
    code, _, err = run_cli(capsys, "verify", "fibration", path)
    assert code == 2
    assert "Euler" in err or "euler" in err
