import io
import json

import pytest

from t800.cli import main
from t800.packet import read_pcap


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--format", "csv", "--out", str(d / "data.csv"),
                 "--n-benign", "1500", "--n-malicious", "1200", "--seed", "2"]) == 0
    assert main(["train", "dt", "--dataset", str(d / "data.csv"), "--out", str(d / "dt.json")]) == 0
    assert main(["synth", "--out", str(d / "scan.pcap"), "--duration", "3", "--seed", "4"]) == 0
    return d


class TestTrain:
    def test_dt_report(self, workdir, capsys):
        code, out, _ = run(capsys, "train", "dt", "--dataset", workdir / "data.csv",
                           "--max-depth", 12, "--out", workdir / "dt2.json")
        report = json.loads(out)
        assert code == 0 and report["f1"] == 1.0
        assert json.loads((workdir / "dt2.json").read_text())["kind"] == "dt"

    def test_mlp_zero_epochs(self, workdir, capsys):
        code, out, _ = run(capsys, "train", "mlp", "--epochs", 0, "--dataset", workdir / "data.csv",
                           "--out", workdir / "m0.json", "--seed", 3)
        assert code == 0
        from t800.policy import init_mlp, load_model
        with open(workdir / "m0.json") as f:
            assert load_model(f) == init_mlp(seed=3)

    @pytest.mark.parametrize("kind", ["logreg", "svm", "mlp_q8"])
    def test_other_kinds(self, workdir, capsys, kind):
        extra = ["--epochs", 5, "--lr", 0.01] if kind == "mlp_q8" else []
        code, out, _ = run(capsys, "train", kind, "--dataset", workdir / "data.csv",
                           "--output-dir", workdir, "--out", f"{kind}.json", *extra)
        assert code == 0 and json.loads(out)["kind"] == kind
        assert (workdir / f"{kind}.json").exists()

    def test_unknown_kind(self, capsys):
        code, _, err = run(capsys, "train", "forest")
        assert code == 2 and "invalid choice" in err

    def test_missing_dataset(self, capsys, tmp_path):
        code, _, err = run(capsys, "train", "dt", "--dataset", tmp_path / "nope.csv")
        assert code == 1 and err.startswith("t800:")

    def test_eval(self, workdir, capsys):
        code, out, _ = run(capsys, "eval", "--model", workdir / "dt.json", "--dataset", workdir / "data.csv")
        assert code == 0 and json.loads(out)["n"] == 810


class TestFilter:
    def test_disabled_keeps_every_record(self, workdir, capsys):
        code, out, _ = run(capsys, "filter", "--input", workdir / "scan.pcap", "--out", workdir / "all.pcap",
                           "--disabled")
        with open(workdir / "scan.pcap", "rb") as f:
            n = sum(1 for _ in read_pcap(f))
        with open(workdir / "all.pcap", "rb") as f:
            assert sum(1 for _ in read_pcap(f)) == n
        assert code == 0 and out.startswith(f"accepted={n} dropped=0")

    def test_dt_drops_scans(self, workdir, capsys):
        code, out, _ = run(capsys, "filter", "--input", workdir / "scan.pcap", "--out", workdir / "f.pcap",
                           "--model", workdir / "dt.json")
        fields = dict(kv.split("=") for kv in out.split())
        with open(workdir / "scan.pcap", "rb") as f:
            n = sum(1 for _ in read_pcap(f))
        assert code == 0 and int(fields["dropped"]) > 0
        assert int(fields["accepted"]) + int(fields["dropped"]) == n

    def test_schema_mismatch(self, workdir, capsys):
        doc = json.loads((workdir / "dt.json").read_text())
        doc["feature_len"] = 12
        (workdir / "bad.json").write_text(json.dumps(doc))
        code, _, err = run(capsys, "filter", "--input", workdir / "scan.pcap", "--out", workdir / "x.pcap",
                           "--model", workdir / "bad.json")
        assert code == 1 and "SchemaMismatch" in err

    def test_needs_model_or_disabled(self, workdir, capsys):
        code, _, _ = run(capsys, "filter", "--input", workdir / "scan.pcap", "--out", workdir / "x.pcap")
        assert code == 2


@pytest.fixture(scope="module")
def metrics(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    args = ["bench", "--replicas", "2", "--duration", "2", "--stack-cost-ns", "30000"]
    assert main(args + ["--out", str(d / "a.csv")]) == 0
    assert main(args + ["--out", str(d / "b.csv")]) == 0
    return d


class TestBenchAnalyze:
    def test_rows_and_determinism(self, metrics):
        a = (metrics / "a.csv").read_bytes()
        assert a == (metrics / "b.csv").read_bytes()
        assert len(a.decode().splitlines()) == 1 + 4 * 5 * 2 * 2

    def test_analyze(self, metrics, capsys):
        code, out, _ = run(capsys, "analyze", metrics / "a.csv", "--json", metrics / "r.json")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "Model,A,I,M,AI,AM,IM,AIM,Err"
        for line in lines[1:]:
            assert sum(float(v) for v in line.split(",")[1:]) == pytest.approx(1.0, abs=5e-4)
        doc = json.loads((metrics / "r.json").read_text())
        for row in doc["policies"].values():
            assert sum(row["fractions"].values()) == pytest.approx(1.0, abs=1e-9)

    def test_analyze_missing_scenario(self, metrics, capsys):
        rows = (metrics / "a.csv").read_text().splitlines()
        (metrics / "c.csv").write_text("\n".join(r for r in rows if not r.startswith("I1M1")) + "\n")
        code, _, err = run(capsys, "analyze", metrics / "c.csv")
        assert code == 1 and "IncompleteGrid" in err

    def test_zero_replicas_is_usage_error(self, capsys):
        assert run(capsys, "bench", "--replicas", 0)[0] == 2

    def test_full_scale_flag_parses(self):
        from t800.cli import build_parser
        args = build_parser().parse_args(["bench", "--full-scale"])
        assert args.full_scale and args.replicas is None


def test_version(capsys):
    assert main(["--version"]) == 0
