import numpy as np
import pytest

from litriage import model, synthetic
from litriage.embed import EmbeddingMatrix
from litriage.text import build_vocab, encode


@pytest.fixture(scope="session")
def tiny_setup():
    """A small corpus, vocabulary, lexicon and embedding tables for model tests."""
    docs = synthetic.separable_documents(24, seed=3, min_len=8, max_len=14)
    vocab = build_vocab(docs)
    lex = synthetic.synthetic_lexicon()
    ch1 = synthetic.topical_word_vectors(6, seed=1)
    ch2 = synthetic.topical_word_vectors(6, seed=2)
    rng = np.random.default_rng(0)
    concepts = EmbeddingMatrix(lex.concept_keys, rng.standard_normal((len(lex.concept_keys), 3)))
    cfg = model.ModelConfig(n=12, dw=6, dk=3, filters=4, hidden_dim=5, epochs=3, batch_size=8, learning_rate=1e-2)
    fb = model.FeatureBuilder(cfg, vocab, lex, [ch1, ch2], concepts)
    encoded = [(encode(d, vocab, lex, cfg.n), int(d.is_positive)) for d in docs]
    return dict(docs=docs, vocab=vocab, lex=lex, ch1=ch1, ch2=ch2, concepts=concepts, cfg=cfg, fb=fb, encoded=encoded)


ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome: ``criterion(ok, detail)``."""
    name = request.node.name.removeprefix("test_")

    def record(ok: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
        assert ok, detail

    yield record
    ACCEPTANCE_RESULTS.setdefault(name, (False, "raised before reaching its verdict"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
