import csv
import io
import json
import math

import numpy as np
import pytest

from sskm.cli import main
from sskm.corpus import Vocabulary, load_matrix, zipf_token_docs

FIXTURE = [
    {"id": "d1", "text": "Sparse vectors, sparse clusters."},
    {"id": "d2", "text": "The dense vectors and the clusters"},
    {"id": "d3", "text": "The and the."},
]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


@pytest.fixture
def fixture_files(tmp_path):
    write_jsonl(tmp_path / "docs.jsonl", FIXTURE)
    (tmp_path / "stop.txt").write_text("the\nand\n")
    return tmp_path


@pytest.fixture(scope="module")
def zipf_matrix(tmp_path_factory):
    d = tmp_path_factory.mktemp("zipf")
    rows = [{"id": doc_id, "text": " ".join(f"w{t}" for t in terms)}
            for doc_id, terms in zipf_token_docs(400, 1500, 10, seed=7)]
    write_jsonl(d / "docs.jsonl", rows)
    assert main(["vectorize", "--input", str(d / "docs.jsonl"),
                 "--output", str(d / "m.mtx")]) == 0
    return d / "m.mtx"


def cluster(matrix, out, *extra):
    argv = ["cluster", "--input", str(matrix), "--out-assignments", str(out / "a.tsv"),
            "--out-report", str(out / "r.json"), *extra]
    return main(argv)


class TestVectorize:
    def test_hand_built_fixture(self, fixture_files, capsys):
        d = fixture_files
        rc = main(["vectorize", "--input", str(d / "docs.jsonl"), "--output", str(d / "m.mtx"),
                   "--stopwords", str(d / "stop.txt"), "--max-df", "1.0"])
        assert rc == 0
        vocab = Vocabulary.load(d / "m.mtx.vocab.json")
        assert vocab.term_to_dim == {"sparse": 0, "vectors": 1, "clusters": 2, "dense": 3}
        assert vocab.doc_freq == [1, 2, 2, 1]
        assert vocab.n_docs == 3
        m = load_matrix(d / "m.mtx")
        assert m.doc_ids == ["d1", "d2"] and m.dropped == ["d3"]
        l3, l15 = math.log(3), math.log(1.5)
        raw = np.array([[2 * l3, l15, l15, 0], [0, l15, l15, l3]])
        expected = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        np.testing.assert_allclose(m.matrix.toarray(), expected, atol=1e-12)
        out = capsys.readouterr().out
        assert "2 kept, 1 dropped" in out and "dropped: d3" in out

    def test_empty_file(self, tmp_path, capsys):
        (tmp_path / "e.jsonl").write_text("")
        rc = main(["vectorize", "--input", str(tmp_path / "e.jsonl"),
                   "--output", str(tmp_path / "m.mtx")])
        assert rc == 1
        assert "empty corpus" in capsys.readouterr().err

    def test_bad_jsonl_line(self, tmp_path, capsys):
        write_jsonl(tmp_path / "d.jsonl", [{"id": "a", "text": "x"}, {"id": "b"}])
        rc = main(["vectorize", "--input", str(tmp_path / "d.jsonl"),
                   "--output", str(tmp_path / "m.mtx")])
        assert rc == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert main(["vectorize", "--input", str(tmp_path / "nope.jsonl"),
                     "--output", str(tmp_path / "m.mtx")]) == 1


class TestCluster:
    def test_modes_agree(self, zipf_matrix, tmp_path):
        outs = {}
        for mode in ("baseline", "ncc+index"):
            d = tmp_path / mode.replace("+", "_")
            d.mkdir()
            assert cluster(zipf_matrix, d, "--mode", mode, "--k", "50", "--seed", "7") == 0
            outs[mode] = (d / "a.tsv").read_bytes()
        assert outs["baseline"] == outs["ncc+index"]

    def test_report(self, zipf_matrix, tmp_path):
        assert cluster(zipf_matrix, tmp_path, "--k", "20", "--seed", "1") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["config"]["lambdas"] == [0.1, 0.25, 0.4, 0.6]
        assert report["config"]["mode"] == "ncc+index"
        iters = report["iterations"]
        assert report["totals"]["iterations"] == len(iters)
        assert report["totals"]["dot_products"] == sum(r["dot_products"] for r in iters)
        assert report["totals"]["wall_time"] == pytest.approx(sum(r["wall_time"] for r in iters))
        assert sum(report["cluster_sizes"]) == report["n_docs"]
        lines = (tmp_path / "a.tsv").read_text().splitlines()
        assert len(lines) == report["n_docs"]
        doc_id, c = lines[0].split("\t")
        assert 0 <= int(c) < 20

    @pytest.mark.parametrize("extra", [["--k", "100000"], ["--k", "1"],
                                       ["--k", "5", "--lambdas", "0.5,0.2"],
                                       ["--k", "5", "--threads", "0"]])
    def test_usage_errors(self, zipf_matrix, tmp_path, extra):
        assert cluster(zipf_matrix, tmp_path, *extra) == 2

    def test_bad_mode_is_usage_error(self, zipf_matrix, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cluster(zipf_matrix, tmp_path, "--k", "5", "--mode", "turbo")
        assert exc.value.code == 2

    def test_corrupt_matrix(self, tmp_path, capsys):
        (tmp_path / "bad.mtx").write_text("%%sparse-unit-matrix 1 2 1\n0 5 1\n")
        (tmp_path / "bad.mtx.ids").write_text("a\n")
        assert cluster(tmp_path / "bad.mtx", tmp_path, "--k", "2") == 1
        assert "line 2" in capsys.readouterr().err

    def test_threads_env_default(self, zipf_matrix, tmp_path, monkeypatch):
        monkeypatch.setenv("SSKM_THREADS", "3")
        assert cluster(zipf_matrix, tmp_path, "--k", "10") == 0
        a = (tmp_path / "a.tsv").read_bytes()
        monkeypatch.delenv("SSKM_THREADS")
        assert cluster(zipf_matrix, tmp_path, "--k", "10") == 0
        assert (tmp_path / "a.tsv").read_bytes() == a


class TestBench:
    def test_synthetic_matrix(self, tmp_path, capsys):
        rc = main(["bench", "--synthetic", "600,1500,8,1.0,3", "--k-list", "5,20",
                   "--modes", "baseline,ncc,ncc+index", "--repeats", "3",
                   "--out", str(tmp_path / "b.csv")])
        assert rc == 0
        rows = list(csv.DictReader(io.StringIO((tmp_path / "b.csv").read_text())))
        assert len(rows) == 6
        assert list(rows[0])[:6] == ["mode", "k", "median_seconds", "iqr_seconds",
                                     "dot_products", "iterations"]
        by = {(r["mode"], int(r["k"])): r for r in rows}
        assert int(by[("ncc", 20)]["dot_products"]) < int(by[("baseline", 20)]["dot_products"])
        assert capsys.readouterr().out.startswith("mode,k,")

    def test_bad_synthetic_spec(self):
        assert main(["bench", "--synthetic", "10,20", "--k-list", "2"]) == 2

    def test_input_and_synthetic_exclusive(self, zipf_matrix):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--input", str(zipf_matrix), "--synthetic", "10,20,3,1,0"])
        assert exc.value.code == 2
