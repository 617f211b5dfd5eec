import hashlib

import numpy as np
import pytest

from litriage import cli, datasets as ds, synthetic
from litriage.embed import EmbeddingMatrix, save_embeddings
from litriage.text import read_documents, write_documents


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "concepts.tsv").write_text("A\talpha\tt1\nB\tbeta\tt1\nC\tgamma\tt1\n")
    (root / "edges.tsv").write_text("A\tB\nB\tC\nA\tC\n")
    docs = synthetic.separable_documents(60, seed=5, min_len=10, max_len=20)
    write_documents(docs, root / "docs.jsonl")
    write_documents([d for d in docs if d.is_positive], root / "positives.jsonl")
    pool = synthetic.separable_documents(80, seed=9, min_len=10, max_len=20)
    write_documents(pool[40:], root / "pool.jsonl")
    save_embeddings(synthetic.topical_word_vectors(8, seed=1), root / "w1.txt")
    save_embeddings(synthetic.topical_word_vectors(8, seed=2), root / "w2.txt")
    lex = synthetic.synthetic_lexicon()
    (root / "lexicon.tsv").write_text("".join(f"{g}\tG{i:03d}\n" for i, g in enumerate(synthetic.GENES))
                                      + "".join(f"{d}\tD{i:03d}\n" for i, d in enumerate(synthetic.DISEASES)))
    rng = np.random.default_rng(0)
    save_embeddings(EmbeddingMatrix(lex.concept_keys, rng.standard_normal((len(lex.concept_keys), 4))), root / "kg.txt")
    (root / "genes.txt").write_text("\n".join(synthetic.GENES) + "\n")
    (root / "diseases.txt").write_text("\n".join(synthetic.DISEASES) + "\n")
    return root


class TestKg:
    def test_walk_count_and_rerun(self, workspace, tmp_path):
        graph = f"{workspace / 'concepts.tsv'},{workspace / 'edges.tsv'}"
        out1, out2 = tmp_path / "w1.txt", tmp_path / "w2.txt"
        assert run("kg-walk", "--graph", graph, "--out", out1, "--walks", 3, "--length", 4) == 0
        assert run("kg-walk", "--graph", graph, "--out", out2, "--walks", 3, "--length", 4) == 0
        assert len(out1.read_text().splitlines()) == 2 * 3 * 3
        assert sha(out1) == sha(out2)
        cfg = (tmp_path / "w1.txt.config").read_text()
        assert "walks = 3" in cfg and "radius = 0.1" in cfg and "seed = 0" in cfg

    def test_bad_tsv(self, workspace, tmp_path, capsys):
        (tmp_path / "e.tsv").write_text("A\tZ\n")
        code = run("kg-walk", "--graph", f"{workspace / 'concepts.tsv'},{tmp_path / 'e.tsv'}", "--out", tmp_path / "w.txt")
        assert code == 2
        assert "'Z'" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("kg-walk", "--graph", f"{tmp_path / 'x'},{tmp_path / 'y'}", "--out", tmp_path / "w.txt") == 1

    def test_embed_header(self, workspace, tmp_path):
        graph = f"{workspace / 'concepts.tsv'},{workspace / 'edges.tsv'}"
        run("kg-walk", "--graph", graph, "--out", tmp_path / "walks.txt", "--walks", 2, "--length", 5)
        assert run("kg-embed", "--corpus", tmp_path / "walks.txt", "--out", tmp_path / "v1.txt", "--epochs", 1) == 0
        assert run("kg-embed", "--corpus", tmp_path / "walks.txt", "--out", tmp_path / "v2.txt", "--epochs", 1) == 0
        assert (tmp_path / "v1.txt").read_text().splitlines()[0] == "3 108"
        assert sha(tmp_path / "v1.txt") == sha(tmp_path / "v2.txt")

    def test_embed_empty_corpus(self, tmp_path):
        (tmp_path / "empty.txt").write_text("")
        assert run("kg-embed", "--corpus", tmp_path / "empty.txt", "--out", tmp_path / "v.txt") == 2


class TestDataset:
    def test_async_split(self, workspace, tmp_path):
        out = tmp_path / "m.jsonl"
        assert run("dataset", "split", "--docs", workspace / "docs.jsonl", "--out", out) == 0
        m = ds.read_manifest(out)
        assert m.strategy == "asynchronous" and str(m.cutoff_date) == "2018-01-01"
        m.check_temporal(read_documents(workspace / "docs.jsonl"))
        assert run("dataset", "split", "--docs", workspace / "docs.jsonl", "--out", tmp_path / "m2.jsonl") == 0
        assert sha(out) == sha(tmp_path / "m2.jsonl")

    def test_sync_split_ratios(self, workspace, tmp_path):
        out = tmp_path / "m.jsonl"
        code = run("dataset", "split", "--docs", workspace / "docs.jsonl", "--out", out, "--strategy", "synchronous",
                   "--ratios", "0.5,0.25,0.25")
        assert code == 0
        m = ds.read_manifest(out)
        assert (len(m.train), len(m.validation), len(m.test)) == (30, 15, 15)

    def test_keywords_default_k(self, workspace, tmp_path):
        out = tmp_path / "kw.txt"
        assert run("dataset", "keywords", "--positives", workspace / "positives.jsonl", "--out", out) == 0
        assert len(out.read_text().split()) == 18
        assert "k = 18" in (tmp_path / "kw.txt.config").read_text()

    def test_negsample_random(self, workspace, tmp_path):
        out = tmp_path / "neg.jsonl"
        code = run("dataset", "negsample", "--pool", workspace / "docs.jsonl", "--positives", workspace / "positives.jsonl",
                   "--out", out, "--count", 10)
        assert code == 0
        negs = read_documents(out)
        pos = {d.pmid for d in read_documents(workspace / "positives.jsonl")}
        assert len(negs) == 10 and pos.isdisjoint(d.pmid for d in negs)

    def test_negsample_ambiguous(self, workspace, tmp_path):
        out = tmp_path / "neg.jsonl"
        code = run("dataset", "negsample", "--strategy", "ambiguous", "--pool", workspace / "pool.jsonl",
                   "--positives", workspace / "positives.jsonl", "--out", out, "--count", 5,
                   "--gene-lexicon", workspace / "genes.txt", "--disease-lexicon", workspace / "diseases.txt")
        assert code == 0
        assert len(read_documents(out)) == 5

    def test_negsample_pool_too_small(self, workspace, tmp_path):
        code = run("dataset", "negsample", "--pool", workspace / "positives.jsonl", "--positives",
                   workspace / "positives.jsonl", "--out", tmp_path / "n.jsonl", "--count", 1)
        assert code == 2


class TestConfig:
    def test_file_and_flag_precedence(self, workspace, tmp_path):
        graph = f"{workspace / 'concepts.tsv'},{workspace / 'edges.tsv'}"
        (tmp_path / "run.conf").write_text(f"# walk settings\ngraph = {graph}\nwalks = 2\nlength = 3\n")
        out = tmp_path / "w.txt"
        assert run("kg-walk", "--config", tmp_path / "run.conf", "--out", out, "--walks", 1) == 0
        assert len(out.read_text().splitlines()) == 2 * 1 * 3
        effective = (tmp_path / "w.txt.config").read_text()
        assert "walks = 1" in effective and "length = 3" in effective

    def test_unknown_key(self, tmp_path):
        (tmp_path / "run.conf").write_text("colour = red\n")
        assert run("kg-walk", "--config", tmp_path / "run.conf", "--graph", "a,b", "--out", tmp_path / "w") == 2

    def test_missing_required(self, tmp_path, capsys):
        assert run("kg-walk", "--out", tmp_path / "w") == 2
        assert "--graph" in capsys.readouterr().err

    def test_bad_value(self, tmp_path):
        assert run("kg-walk", "--graph", "a,b", "--out", tmp_path / "w", "--walks", "many") == 2


@pytest.fixture(scope="module")
def trained(workspace, tmp_path_factory):
    root = tmp_path_factory.mktemp("train")
    run("dataset", "split", "--docs", workspace / "docs.jsonl", "--out", root / "m.jsonl", "--strategy", "synchronous",
        "--ratios", "0.6,0.2,0.2")
    args = ["train", "--docs", workspace / "docs.jsonl", "--manifest", root / "m.jsonl",
            "--word-vectors", f"{workspace / 'w1.txt'},{workspace / 'w2.txt'}", "--kg-vectors", workspace / "kg.txt",
            "--lexicon", workspace / "lexicon.tsv", "--n", 24, "--filters", 8, "--hidden-dim", 16, "--lr", 1e-2,
            "--epochs", 15, "--batch-size", 8]
    code = run(*args, "--out", root / "a")
    return dict(root=root, args=args, code=code)


class TestTrainPredictEval:
    def test_train_outputs(self, trained):
        out = trained["root"] / "a"
        assert trained["code"] == 0
        for name in ("checkpoint.kmc", "history.csv", "vocab.txt", "validation_predictions.tsv", "effective_config.txt"):
            assert (out / name).exists(), name
        assert len((out / "history.csv").read_text().splitlines()) == 16
        assert "lr = 0.01" in (out / "effective_config.txt").read_text()

    def test_train_rerun_byte_identical(self, trained):
        assert run(*trained["args"], "--out", trained["root"] / "b") == 0
        for name in ("checkpoint.kmc", "history.csv", "validation_predictions.tsv"):
            assert sha(trained["root"] / "a" / name) == sha(trained["root"] / "b" / name)

    def test_predict_reproduces_validation(self, workspace, trained):
        root = trained["root"]
        code = run("predict", "--checkpoint", root / "a" / "checkpoint.kmc", "--vocab", root / "a" / "vocab.txt",
                   "--docs", workspace / "docs.jsonl", "--manifest", root / "m.jsonl", "--split", "validation",
                   "--word-vectors", f"{workspace / 'w1.txt'},{workspace / 'w2.txt'}", "--kg-vectors", workspace / "kg.txt",
                   "--lexicon", workspace / "lexicon.tsv", "--out", root / "val.tsv")
        assert code == 0
        assert (root / "val.tsv").read_bytes() == (root / "a" / "validation_predictions.tsv").read_bytes()
        for line in (root / "val.tsv").read_text().splitlines():
            pmid, label, score = line.split("\t")
            assert (label == "positive") == (float(score) >= 0.5)

    def test_predict_wrong_vectors(self, workspace, trained):
        root = trained["root"]
        code = run("predict", "--checkpoint", root / "a" / "checkpoint.kmc", "--vocab", root / "a" / "vocab.txt",
                   "--docs", workspace / "docs.jsonl", "--word-vectors", f"{workspace / 'w2.txt'},{workspace / 'w1.txt'}",
                   "--kg-vectors", workspace / "kg.txt", "--lexicon", workspace / "lexicon.tsv", "--out", root / "x.tsv")
        assert code == 2

    def test_eval_report(self, workspace, trained, tmp_path):
        root = trained["root"]
        pred = root / "a" / "validation_predictions.tsv"
        assert run("eval", "--gold", workspace / "docs.jsonl", "--pred", f"{pred},{pred}", "--variants", "kmcnn,mcnn",
                   "--datasets", "synthetic", "--out", tmp_path / "rep") == 0
        rows = (tmp_path / "rep" / "f1.csv").read_text().splitlines()
        assert rows[0] == ",synthetic"
        assert rows[1].startswith("KMCNN,") and rows[2].startswith("MCNN,")
        assert rows[1].split(",")[1] == rows[2].split(",")[1]
        for metric in ("precision", "recall"):
            assert (tmp_path / "rep" / f"{metric}.txt").exists()

    def test_eval_mismatched_lists(self, workspace, trained, tmp_path):
        pred = trained["root"] / "a" / "validation_predictions.tsv"
        code = run("eval", "--gold", workspace / "docs.jsonl", "--pred", pred, "--variants", "a,b",
                   "--datasets", "x,y,z", "--out", tmp_path / "rep")
        assert code == 2

    def test_train_needs_kg_for_kmcnn(self, workspace, trained, tmp_path):
        root = trained["root"]
        code = run("train", "--docs", workspace / "docs.jsonl", "--manifest", root / "m.jsonl",
                   "--word-vectors", f"{workspace / 'w1.txt'},{workspace / 'w2.txt'}", "--out", tmp_path / "o")
        assert code == 2

    def test_plain_cnn_without_knowledge(self, workspace, trained, tmp_path):
        root = trained["root"]
        code = run("train", "--docs", workspace / "docs.jsonl", "--manifest", root / "m.jsonl", "--variant", "plain_cnn",
                   "--word-vectors", str(workspace / "w1.txt"), "--n", 16, "--filters", 4, "--epochs", 2,
                   "--out", tmp_path / "o")
        assert code == 0


class TestGradcheck:
    def test_passes(self, tmp_path, capsys):
        assert run("gradcheck", "--trials", 3, "--out", tmp_path / "g.txt") == 0
        text = (tmp_path / "g.txt").read_text()
        assert "kmcnn" in text and "FAIL" not in text

    def test_fails_with_impossible_tolerance(self):
        assert run("gradcheck", "--trials", 2, "--tolerance", 0) == 3
