import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

import conftest as fx
from pdhg_diag import cli, cones, diagnostics, qp


LP_DOC = {
    "mode": "qp", "n": 2, "m": 4,
    "c": [1, -2],
    "A": [[-1, 1], [1, -1], [-1, 0], [0, -1]],
    "b": [-2, 1, 0, 0],
    "cone": [{"type": "nonpos", "dim": 4}],
}

FEASIBLE_DOC = {
    "mode": "qp", "n": 1, "m": 1,
    "c": [1], "A": [[-1]], "b": [0],
    "cone": [{"type": "nonpos", "dim": 1}],
}

CONIC_DOC = {
    "mode": "conic", "n": 2, "m": 1,
    "c": [0, 0], "A": [[1, 1]], "b": [-1],
    "cone": [{"type": "nonneg", "dim": 2}],
}

DISKS_DOC = {
    "dimension": 2,
    "side_one": [{"center": [-3, 0], "shape": [[1, 0], [0, 1]]}],
    "side_two": [{"center": [3, 0], "shape": [[1, 0], [0, 1]]}],
}

OVERLAP_DOC = {
    "dimension": 2,
    "side_one": [{"center": [-0.5, 0], "shape": [[1, 0], [0, 1]]}],
    "side_two": [{"center": [0.5, 0], "shape": [[1, 0], [0, 1]]}],
}


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestSolve:
    def test_infeasible_lp_exit_2_with_both_certificates(self, tmp_path):
        inp = write(tmp_path, "lp.json", LP_DOC)
        out = str(tmp_path / "out.json")
        code = cli.main(["solve", "--input", inp, "--sigma", "0.3",
                         "--tau", "0.3", "--max-iter", "10000", "--out", out])
        assert code == cli.EXIT_CERTIFIED
        doc = json.loads(open(out).read())
        assert doc["status"] == diagnostics.BOTH_INFEASIBLE
        assert {c["kind"] for c in doc["certificates"]} == {
            qp.DUAL_INFEASIBLE_RAY, qp.PRIMAL_INFEASIBLE_MULTIPLIER}
        assert_allclose(doc["v_primal"], fx.V_PRIMAL_LP, atol=1e-6)
        assert_allclose(doc["v_dual"], fx.V_DUAL, atol=1e-6)
        assert doc["schema_version"] == cli.SCHEMA_VERSION

    def test_feasible_exit_0_with_point(self, tmp_path):
        inp = write(tmp_path, "feas.json", FEASIBLE_DOC)
        out = str(tmp_path / "out.json")
        code = cli.main(["solve", "--input", inp, "--out", out])
        assert code == cli.EXIT_SOLVED
        doc = json.loads(open(out).read())
        assert doc["status"] == diagnostics.CONSISTENT
        assert_allclose(doc["converged_point"], [0.0], atol=1e-6)
        assert doc["certificates"] == []

    def test_conic_infeasible_exit_2(self, tmp_path):
        inp = write(tmp_path, "conic.json", CONIC_DOC)
        out = str(tmp_path / "out.json")
        code = cli.main(["solve", "--input", inp, "--max-iter", "20000",
                         "--out", out])
        assert code == cli.EXIT_CERTIFIED
        doc = json.loads(open(out).read())
        assert doc["status"] == diagnostics.PRIMAL_INFEASIBLE
        assert doc["kernel_condition_heuristic"] is True

    def test_garbage_input_exit_1(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("garbage {{{")
        assert cli.main(["solve", "--input", str(path)]) == cli.EXIT_USAGE

    def test_missing_field_exit_1(self, tmp_path):
        doc = dict(LP_DOC)
        del doc["b"]
        inp = write(tmp_path, "nofield.json", doc)
        assert cli.main(["solve", "--input", inp]) == cli.EXIT_USAGE

    def test_bad_steps_exit_1(self, tmp_path):
        inp = write(tmp_path, "lp.json", LP_DOC)
        code = cli.main(["solve", "--input", inp, "--sigma", "10", "--tau", "10"])
        assert code == cli.EXIT_USAGE

    def test_trace_csv_written(self, tmp_path):
        inp = write(tmp_path, "lp.json", LP_DOC)
        trace_path = str(tmp_path / "trace.csv")
        cli.main(["solve", "--input", inp, "--sigma", "0.3", "--tau", "0.3",
                  "--max-iter", "100", "--trace", trace_path])
        lines = open(trace_path).read().splitlines()
        assert lines[0] == "k,norm_dx,norm_dy,resid_m,norm_z"
        assert len(lines) == 101

    def test_determinism_excluding_wall_time(self, tmp_path):
        inp = write(tmp_path, "lp.json", LP_DOC)
        docs = []
        for name in ("a.json", "b.json"):
            out = str(tmp_path / name)
            cli.main(["solve", "--input", inp, "--sigma", "0.3", "--tau", "0.3",
                      "--max-iter", "2000", "--seed", "7", "--out", out])
            text = open(out).read()
            doc = json.loads(text)
            doc.pop("wall_time_sec")
            docs.append(cli.dumps_document(doc))
        assert docs[0] == docs[1]


class TestRoundTrip:
    def test_qp_problem_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        B = rng.normal(size=(3, 3))
        problem = qp.QpProblem(
            B @ B.T, rng.normal(size=3), rng.normal(size=(5, 3)),
            rng.normal(size=5),
            K=cones.Product((cones.Zero(2), cones.NonposOrthant(3))))
        path = str(tmp_path / "roundtrip.json")
        cli.save_problem(problem, path, "qp")
        mode, loaded = cli.load_problem(path)
        assert mode == "qp"
        assert np.array_equal(loaded.H, problem.H)
        assert np.array_equal(loaded.c, problem.c)
        assert np.array_equal(loaded.A, problem.A)
        assert np.array_equal(loaded.b, problem.b)
        assert loaded.K == problem.K

    def test_conic_problem_bit_identical(self, tmp_path):
        from pdhg_diag import conic as conic_mod
        rng = np.random.default_rng(1)
        problem = conic_mod.ConicPrimalProblem(
            C=cones.Product((cones.SecondOrder(3), cones.NonnegOrthant(1))),
            A=rng.normal(size=(2, 4)), b=rng.normal(size=2),
            c=rng.normal(size=4))
        path = str(tmp_path / "roundtrip.json")
        cli.save_problem(problem, path, "conic")
        mode, loaded = cli.load_problem(path)
        assert mode == "conic"
        assert np.array_equal(loaded.A, problem.A)
        assert np.array_equal(loaded.b, problem.b)
        assert np.array_equal(loaded.c, problem.c)
        assert loaded.C == problem.C


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp("rep"))
    assert cli.main(["reproduce", "lp-example", "--out-dir", out_dir]) == 0
    assert cli.main(["reproduce", "qp-example", "--out-dir", out_dir]) == 0
    return out_dir


class TestReproduce:
    def test_trace_tables(self, outputs):
        lp_lines = open(os.path.join(outputs, "lp-example-trace.csv")).read().splitlines()
        qp_lines = open(os.path.join(outputs, "qp-example-trace.csv")).read().splitlines()
        header = ("k,norm_dx,norm_dy,norm_dx_minus_vR,norm_dy_minus_vD,"
                  "shifted_resid_x,shifted_resid_y")
        assert lp_lines[0] == header
        assert len(lp_lines) == 51   # 50 plotted iterations
        assert len(qp_lines) == 151  # 150 plotted iterations

    def test_lp_long_run_displacement(self, outputs):
        doc = json.loads(open(os.path.join(outputs, "lp-example-report.json")).read())
        stacked = np.array(doc["v_primal"] + doc["v_dual"])
        expected = np.array([-0.15, -0.15, -0.15, -0.15, 0.0, 0.0])
        assert np.linalg.norm(stacked - expected) <= 1e-6
        assert doc["iterations"] == 10_000
        assert {c["kind"] for c in doc["certificates"]} == {
            qp.DUAL_INFEASIBLE_RAY, qp.PRIMAL_INFEASIBLE_MULTIPLIER}

    def test_qp_long_run_displacement(self, outputs):
        doc = json.loads(open(os.path.join(outputs, "qp-example-report.json")).read())
        assert_allclose(doc["v_primal"], [0.0, 0.0], atol=1e-6)
        assert_allclose(doc["v_dual"], fx.V_DUAL, atol=1e-6)

    def test_shifted_residual_stabilizes_positive(self, outputs):
        for name in ("lp-example", "qp-example"):
            doc = json.loads(open(os.path.join(outputs, "%s-report.json" % name)).read())
            assert doc["shifted_residual_final"] > 1e-2
            assert doc["shifted_residual_tail_relative_change"] < 1e-6

    def test_unknown_name_exit_1(self, tmp_path):
        assert cli.main(["reproduce", "lp-example", "--out-dir",
                         str(tmp_path)]) == 0
        # argparse rejects unknown scenario names
        assert cli.main(["reproduce", "nonsense", "--out-dir",
                         str(tmp_path)]) == cli.EXIT_USAGE


class TestSeparate:
    def test_disjoint_exit_2(self, tmp_path):
        inp = write(tmp_path, "disks.json", DISKS_DOC)
        out = str(tmp_path / "out.json")
        code = cli.main(["separate", "--input", inp, "--max-iter", "10000",
                         "--out", out])
        assert code == cli.EXIT_CERTIFIED
        doc = json.loads(open(out).read())
        assert doc["status"] == "separator"
        assert doc["s"] > -doc["t"]
        assert all(m > 0 for m in doc["margins_one"] + doc["margins_two"])

    def test_overlapping_exit_0(self, tmp_path):
        inp = write(tmp_path, "overlap.json", OVERLAP_DOC)
        out = str(tmp_path / "out.json")
        code = cli.main(["separate", "--input", inp, "--out", out])
        assert code == cli.EXIT_SOLVED
        doc = json.loads(open(out).read())
        assert doc["status"] == "common_point"
        assert sum(doc["lambdas"]) == pytest.approx(1.0, abs=1e-8)

    def test_self_separation_exit_0(self, tmp_path):
        doc = {
            "dimension": 1,
            "side_one": [{"center": [4.0], "shape": [[0.001]]}],
            "side_two": [{"center": [4.0], "shape": [[0.001]]}],
        }
        inp = write(tmp_path, "self.json", doc)
        out = str(tmp_path / "out.json")
        assert cli.main(["separate", "--input", inp, "--out", out]) == cli.EXIT_SOLVED
        res = json.loads(open(out).read())
        assert res["point"][0] == pytest.approx(4.0, abs=1e-6)

    def test_singular_shape_exit_1(self, tmp_path):
        doc = {
            "dimension": 2,
            "side_one": [{"center": [0, 0], "shape": [[1, 1], [1, 1]]}],
            "side_two": [{"center": [3, 0], "shape": [[1, 0], [0, 1]]}],
        }
        inp = write(tmp_path, "singular.json", doc)
        assert cli.main(["separate", "--input", inp]) == cli.EXIT_USAGE


class TestDocumentWriter:
    def test_17_significant_digits_round_trip(self):
        rng = np.random.default_rng(2)
        values = list(rng.normal(size=50)) + [0.15, 1e-300, 1.0, -2.5e17]
        text = cli.dumps_document({"values": values})
        back = json.loads(text)["values"]
        assert back == [float(v) for v in values]

    def test_sorted_keys(self):
        text = cli.dumps_document({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')
