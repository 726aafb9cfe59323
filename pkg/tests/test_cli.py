import json

import pytest

from ksverify.cli import main
from ksverify.config import configuration_to_json
from ksverify.solver import UnsatCertificate, build_constraints, verify_certificate


@pytest.fixture
def toy_file(tmp_path, toy):
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(configuration_to_json(toy)))
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_json(capsys):
    code, out, _ = run(capsys, "generate", "--no-timestamp")
    data = json.loads(out)
    assert code == 0
    assert len(data["rays"]) == 33
    assert len(data["internal_triples"]) == 16
    assert len(data["completion_triples"]) == 24
    assert data["meta"]["schema_version"] == 1
    assert "generated_at" not in data["meta"]


def test_generate_timestamp_present_by_default(capsys):
    _, out, _ = run(capsys, "generate")
    assert "generated_at" in json.loads(out)["meta"]


def test_generate_csv(capsys):
    code, out, _ = run(capsys, "generate", "--format", "csv", "--no-timestamp")
    rows = [r for r in out.splitlines() if not r.startswith("#")]
    assert code == 0 and rows[0].startswith("index,x,y,z,x_float") and len(rows) == 34


def test_generate_unwritable(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--output", str(tmp_path / "missing" / "x.json"))
    assert code == 2 and "cannot write" in err


def test_generated_file_reimports(capsys, tmp_path):
    path = tmp_path / "peres.json"
    assert main(["generate", "--output", str(path)]) == 0
    code, out, _ = run(capsys, "verify", "--config", str(path), "--no-timestamp")
    assert code == 0 and json.loads(out)["status"] == "UNSAT"


def test_verify_default(capsys):
    code, out, _ = run(capsys, "verify", "--format", "text")
    assert code == 0 and out.splitlines()[0] == "UNSAT"


def test_verify_certify(capsys, tmp_path, peres):
    cert_path = tmp_path / "c.jsonl"
    code, out, _ = run(capsys, "verify", "--certify", "--certificate", str(cert_path), "--no-timestamp")
    report = json.loads(out)
    assert code == 0 and report["certificate"]["valid"]
    cert = UnsatCertificate.from_jsonl(cert_path.read_text())
    assert verify_certificate(cert, build_constraints(peres))


def test_verify_certify_wlog(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--certify", "--wlog", "--certificate", str(tmp_path / "w.jsonl"), "--format", "text")
    assert code == 0 and "w.l.o.g." in out


def test_verify_toy_config(capsys, toy_file):
    code, out, _ = run(capsys, "verify", "--config", str(toy_file), "--no-timestamp")
    report = json.loads(out)
    assert code == 0 and report["status"] == "SAT" and sorted(report["model"]) == [0, 1, 1]


def test_verify_bad_config(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"rays": [[[1,0],[0,0],[0,0]], [[0,0],[1,0],[0,0]]], "orthogonal_pairs": []}')
    code, _, err = run(capsys, "verify", "--config", str(bad))
    assert code == 2 and "invalid configuration" in err


def test_fwt_default(capsys):
    code, out, _ = run(capsys, "fwt", "--no-timestamp")
    report = json.loads(out)["reduction"]
    assert code == 0
    assert report["quadruple_count"] == 1320 and report["status"] == "UNSAT"
    assert report["reduction_target"]["matches_kochen_specker_constraints"]


def test_fwt_derandomize_with_tapes_file(capsys, tmp_path):
    tapes = tmp_path / "tapes.json"
    assert main(["fwt", "--derandomize", "--write-tapes", str(tapes), "--seed", "5", "--no-timestamp"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "fwt", "--derandomize", "--tapes", str(tapes), "--strategy", "constant", "--no-timestamp")
    v = json.loads(out)["derandomization"]["first_violation"]
    assert code == 0 and v["kind"] in ("SPIN", "TWIN") and 1 <= v["quadruple"] <= 1320


def test_fwt_toy(capsys, toy_file):
    code, out, _ = run(capsys, "fwt", "--config", str(toy_file), "--format", "text")
    assert code == 0 and out.strip().endswith("SAT")


def test_twin_member(capsys):
    code, out, _ = run(capsys, "twin", "--n", "100000", "--seed", "42", "--triple", "0", "--no-timestamp")
    report = json.loads(out)
    assert code == 0 and report["w_is_member"] and report["agreements"] == 100000


def test_twin_orthogonal_non_member(capsys, peres):
    # pick a ray orthogonal to a member of triple 0 but outside it
    members = set(peres.triple_members(0))
    w = next(j for i, j in peres.orthogonal_pairs if i in members and j not in members)
    code, out, _ = run(capsys, "twin", "--n", "100000", "--seed", "42", "--triple", "0", "--w", str(w), "--no-timestamp")
    report = json.loads(out)
    assert code == 0 and not report["w_is_member"]
    assert abs(sum(c["exact"] for c in report["cells"]) - 1) < 1e-12
    assert sum(c["count"] for c in report["cells"]) == 100000


def test_twin_log_and_csv(capsys, tmp_path):
    log = tmp_path / "log.csv"
    code, out, _ = run(capsys, "twin", "--n", "50", "--log", str(log), "--format", "csv")
    assert code == 0 and out == log.read_text()
    assert out.splitlines()[0] == "run_index,triple_id,w_id,a_outcome,b_outcome"


@pytest.mark.parametrize("argv", [["twin", "--n", "0"], ["twin", "--triple", "40"], ["twin", "--w", "33"]])
def test_twin_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_perturb(capsys):
    code, out, _ = run(capsys, "perturb", "--epsilon", "1e-6", "--trials", "100", "--seed", "1", "--no-timestamp")
    assert code == 0 and json.loads(out)["preserved"]


def test_perturb_domain_error(capsys):
    code, _, _ = run(capsys, "perturb", "--epsilon", "0.5")
    assert code == 2


def test_argparse_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
