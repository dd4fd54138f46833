import pathlib

import pytest

from labrag import embedding as emb
from labrag import index as ix
from labrag.corpus import format_document
from labrag.datasets import corpus_from_labs, load_labs
from labrag.providers import OracleProvider
from labrag.session import Orchestrator

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def labs():
    return load_labs()


@pytest.fixture(scope="session")
def fixture_corpus(labs):
    return corpus_from_labs(labs)


@pytest.fixture(scope="session")
def embed_cfg():
    return emb.EmbeddingProviderConfig(kind="local-hash")


@pytest.fixture(scope="session")
def fixture_index(fixture_corpus, embed_cfg):
    texts = [format_document(d) for d in fixture_corpus.documents]
    vectors = emb.embed_batch(texts, embed_cfg)
    entries = [
        ix.IndexEntry(doc_id=d.doc_id, vector=v, text=t, url=d.url)
        for d, v, t in zip(fixture_corpus.documents, vectors, texts)
    ]
    return ix.build_index(entries)


def fixed_clock():
    return "2025-01-01T00:00:00+00:00"


@pytest.fixture()
def engine(fixture_index, embed_cfg, labs):
    return Orchestrator(fixture_index, embed_cfg, OracleProvider(labs),
                        clock=fixed_clock)
