import json
from pathlib import Path

import pytest

from nerfusion import corpus as C, embedio as E

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((FIXTURES / "manifest.json").read_text())


@pytest.fixture(scope="session")
def tiny_corpus_nodeps() -> C.Corpus:
    with open(FIXTURES / "tiny.conll", encoding="utf-8") as fh:
        return C.parse_conll(fh, C.default_tagset(C.IOB1))


@pytest.fixture(scope="session")
def tiny_corpus(tiny_corpus_nodeps) -> C.Corpus:
    with open(FIXTURES / "tiny.conllu", encoding="utf-8") as fh:
        return C.attach_deps(tiny_corpus_nodeps, C.parse_conllu_deps(fh))


@pytest.fixture(scope="session")
def tiny_wv(manifest) -> E.WordVectors:
    with open(FIXTURES / "tiny.glove.txt", encoding="utf-8") as fh:
        return E.load_glove(fh, manifest["fixture"]["glove_dim"])


@pytest.fixture(scope="session")
def tiny_ctx() -> E.ContextualFile:
    return E.read_ctxe_path(FIXTURES / "tiny.ctxe")
