import csv
import dataclasses
import io
import json
import math

import numpy as np
import pytest

from src.main import build_parser, main
from src.models.report import decode_array
from src.services import nahm_flow, reduction, riemann_theta
from src.services.reduction import TETRAHEDRAL_TAU

TETRAHEDRAL_B = 5.0 * math.sqrt(2.0)


def _run_json(capsys, argv):
    code = main(argv + ["--json"])
    payload = json.loads(capsys.readouterr().out)
    return code, payload


def test_solve_tetrahedral(capsys):
    code, payload = _run_json(capsys, ["solve", "1", "1"])
    assert code == 0
    assert payload["command"] == "solve"
    assert payload["outputs"]["b"] == pytest.approx(TETRAHEDRAL_B, rel=1e-10)
    assert payload["outputs"]["n"] == [1, 0, -1, 1]
    assert payload["outputs"]["d"] == -4
    assert payload["residuals"]["es_periods"] < 1e-9
    assert payload["tolerances"]["abs_tol"] == 1e-12


def test_solve_inadmissible_pair(capsys):
    code = main(["solve", "1", "-1"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 2
    assert payload["verdict"] == "error"
    assert payload["outputs"]["error"]["error"] == "InadmissibleError"


def test_invalid_tolerance(capsys):
    assert main(["solve", "1", "1", "--abs-tol", "-1"]) == 2


def test_periods_round_trip(capsys):
    code, payload = _run_json(capsys, ["periods", repr(TETRAHEDRAL_B), "--compact"])
    assert code == 0
    tau_b = decode_array(payload["outputs"]["tau_b"])
    np.testing.assert_allclose(tau_b, TETRAHEDRAL_TAU, atol=1e-8)
    assert max(payload["residuals"].values()) < 1e-9


def test_periods_with_quadrature(capsys):
    code, payload = _run_json(capsys, ["periods", "1.0", "--verify-quadrature"])
    assert code == 0
    assert payload["residuals"]["quadrature_I"] < 1e-7
    assert payload["tolerances"]["quadrature"] == 1e-7


def test_reduce_tetrahedral(capsys):
    code, payload = _run_json(capsys, ["reduce", "1", "1"])
    assert code == 0
    outputs = payload["outputs"]
    assert outputs["winding"] == ["1/2", "0", "0", "0"]
    assert outputs["d"] == -4
    assert outputs["alpha_entry"] == -1
    assert payload["residuals"]["theta_split"] < 1e-9


def test_verify_suite(capsys):
    code, payload = _run_json(capsys, ["verify", "legendre"])
    assert code == 0
    assert payload["verdict"] == "passed"
    assert all(key.startswith("legendre.") for key in payload["residuals"])


def test_nahm_charge2_csv(capsys):
    code = main(["nahm", "2", "--k", "0.6", "--nodes", "21", "--csv"])
    assert code == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    header = rows[0]
    assert header[0] == "z"
    assert "T1_11_re" in header and "T3_22_im" in header
    assert header[-1] == "nahm_residual"
    assert len(rows) == 22
    assert float(rows[1][0]) == pytest.approx(-0.95)


def test_nahm_charge2_summary(capsys):
    code = main(["nahm", "2", "--k", "0.3", "--nodes", "11"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("nahm: pole-free interior")


def test_nahm_requires_parameters(capsys):
    assert main(["nahm", "3"]) == 2
    capsys.readouterr()
    assert main(["nahm", "2"]) == 2


def test_nahm_margin_floor(capsys):
    assert main(["nahm", "2", "--k", "0.5", "--margin", "0.01"]) == 2


def test_nahm_interior_poles(capsys):
    code, payload = _run_json(capsys, ["nahm", "3", "--n1", "2", "--m1", "1"])
    assert code == 3
    assert payload["verdict"] == "interior poles"
    assert sorted(payload["outputs"]["interior_poles_z"]) == pytest.approx([-1 / 3, 1 / 3], abs=1e-6)


def test_scan_csv(capsys):
    code = main(["scan", "1", "--threads", "2", "--csv"])
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert code == 0
    assert rows[0][:2] == ["n1", "m1"]
    assert [(int(r[0]), int(r[1])) for r in rows[1:]] == [(-1, -1), (-1, 0), (1, 0), (1, 1)]


def test_key_value_csv(capsys, tmp_path):
    target = tmp_path / "solve.csv"
    assert main(["solve", "2", "1", "--csv", str(target)]) == 0
    with target.open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["name", "i", "j", "value"]
    names = {r[0] for r in rows[1:]}
    assert {"t", "b", "n", "residual:es_periods"} <= names


def test_parser_rejects_unknown_suite():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["verify", "bogus"])


def test_error_report_goes_to_json_path(capsys, tmp_path):
    target = tmp_path / "error.json"
    assert main(["solve", "1", "-1", "--json", str(target)]) == 2
    assert capsys.readouterr().out == ""
    payload = json.loads(target.read_text(encoding="utf-8"))
    assert payload["verdict"] == "error"
    assert payload["outputs"]["error"]["error"] == "InadmissibleError"


def test_reduce_fails_on_first_row_residual(capsys, monkeypatch):
    original = reduction.reduce
    monkeypatch.setattr(
        reduction, "reduce",
        lambda *a, **kw: dataclasses.replace(original(*a, **kw), first_row_residual=1e-3),
    )
    code, payload = _run_json(capsys, ["reduce", "1", "1"])
    assert code == 4
    assert payload["exit_code"] == 4
    assert payload["verdict"] == "reduced first row is not (1, 0, 0, 0)"


def test_reduce_fails_on_theta_split(capsys, monkeypatch):
    monkeypatch.setattr(riemann_theta, "theta_reduce", lambda *a, **kw: 123.0 + 0j)
    code, payload = _run_json(capsys, ["reduce", "1", "1"])
    assert code == 4
    assert payload["verdict"] == "theta splitting disagrees with the direct sum"


def test_nahm_charge2_verdict_follows_closed_form(capsys, monkeypatch):
    original = nahm_flow.charge2_nahm

    def drifting(*a, **kw):
        sample = original(*a, **kw)
        sample.metadata["closed_form_deviation"] = 1e-3
        return sample

    monkeypatch.setattr(nahm_flow, "charge2_nahm", drifting)
    code, payload = _run_json(capsys, ["nahm", "2", "--k", "0.6", "--nodes", "11"])
    assert code == 4
    assert payload["verdict"] == "residual above tolerance: closed_form"


def test_nahm_charge2_json_verdict(capsys):
    code, payload = _run_json(capsys, ["nahm", "2", "--k", "0.6", "--nodes", "11"])
    assert code == 0
    assert payload["verdict"] == "pole-free interior"
    assert payload["residuals"]["closed_form"] <= payload["tolerances"]["closed_form"]
    assert payload["residuals"]["nahm"] <= payload["tolerances"]["nahm"]


def test_max_terms_flag(capsys):
    code, payload = _run_json(capsys, ["solve", "1", "1", "--max-terms", "8000"])
    assert code == 0
    assert payload["tolerances"]["max_terms"] == 8000
    assert main(["solve", "1", "1", "--max-terms", "0"]) == 2
