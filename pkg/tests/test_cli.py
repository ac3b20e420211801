import json

import pytest

from mixedq import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, l.split(","))) for l in lines[1:]]


class TestMoments:
    def test_catalan(self, capsys):
        code, out, _ = run(["moments", "--q", "0", "--N", "1", "--i", "1,1,1,1"], capsys)
        assert code == 0
        assert table(out)[0]["moment"] == "2.0"

    def test_alternating_and_odd(self, capsys, tmp_path):
        qf = tmp_path / "q.json"
        qf.write_text(json.dumps({"N": 2, "entries": [[0.1, 0.35], [0.35, -0.2]]}))
        code, out, _ = run(["moments", "--q-file", str(qf), "--i", "1,2,1,2", "--i", "1,2,2"], capsys)
        rows = {r["i"]: float(r["moment"]) for r in table(out)}
        assert code == 0 and rows == {"1 2 1 2": 0.35, "1 2 2": 0.0}

    def test_bad_config(self, capsys, tmp_path):
        assert run(["moments", "--q", "[[0, 0.5], [0.4, 0]]"], capsys)[0] == 2
        assert run(["moments", "--q-file", str(tmp_path / "missing.json")], capsys)[0] == 2
        assert run(["moments", "--bogus"], capsys)[0] == 2
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run(["moments", "--config", str(cfg)], capsys)[0] == 2

    def test_header_echoes_config(self, capsys):
        _, out, _ = run(["moments", "--q", "0.25", "--N", "1", "--max-d", "2"], capsys)
        cfg_line = next(l for l in out.splitlines() if l.startswith("# config "))
        assert json.loads(cfg_line[len("# config "):])["max_d"] == 2


class TestFockVerify:
    def test_pass(self, capsys):
        code, out, _ = run(["fock-verify", "--N", "2", "--D", "4", "--seed", "42", "--q-max", "0.9"], capsys)
        assert code == 0 and "# passed true" in out

    def test_negative_control(self, capsys):
        code, out, _ = run(["fock-verify", "--N", "2", "--D", "4", "--seed", "42", "--negative-control"], capsys)
        assert code == 1 and "# passed false" in out

    def test_fermion_quotient(self, capsys):
        code, out, _ = run(["fock-verify", "--N", "1", "--q", "-1", "--D", "3"], capsys)
        assert code == 0
        assert '"kernel_dims":[0,0,1,1]' in out


class TestSuites:
    def test_clt(self, capsys):
        code, out, _ = run(["clt", "--q", "0.5", "--N", "1", "--i", "1,1,1,1", "--m-grid", "4,8", "--seeds", "3"], capsys)
        rows = table(out)
        assert code == 0 and len(rows) == 6
        assert float(rows[0]["expectation_error"]) == pytest.approx(1.5 / 4)

    def test_hyper_threshold_and_witness(self, capsys):
        code, out, _ = run(["hyper", "--G", "4", "--samples", "30", "--p-grid", "2,4"], capsys)
        kinds = {r["kind"] for r in table(out)}
        assert code == 0 and kinds == {"check", "witness"}

    def test_hyper_t_zero(self, capsys):
        code, out, _ = run(["hyper", "--G", "4", "--samples", "30", "--t-grid", "0"], capsys)
        assert code == 0

    def test_logsob(self, capsys):
        code, out, _ = run(["logsob", "--G", "4", "--samples", "30", "--format", "json"], capsys)
        doc = json.loads(out)
        assert code == 0 and doc["passed"] and doc["summary"]["two_point_ratio"] > 0.95

    def test_riesz_and_poincare(self, capsys):
        assert run(["riesz", "--G", "3", "--samples", "4"], capsys)[0] == 0
        assert run(["poincare", "--G", "4", "--samples", "10"], capsys)[0] == 0

    def test_flags_override_config(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"G": 5, "samples": 7, "seed": 3}))
        _, out, _ = run(["logsob", "--config", str(cfg), "--samples", "9"], capsys)
        echoed = json.loads(next(l for l in out.splitlines() if l.startswith("# config "))[9:])
        assert (echoed["G"], echoed["samples"], echoed["seed"]) == (5, 9, 3)

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "o.csv"
        assert run(["moments", "--q", "0", "--N", "1", "--max-d", "2", "--out", str(path)], capsys)[0] == 0
        assert path.read_text().startswith("# mixedq moments")
