import random

import pytest

from src.algorithms.grid_aligner import ScoringConfig
from src.data.corpus_io import document_from_dict
from src.data.sample_data import create_sample_corpora, mini_corpus
from src.models.annotation_grid import build_grid
from src.models.data_models import Corpus


def make_document(tokens, annotations=(), document_id="doc", sentences=None):
    """Документ из строк токенов (или словарей признаков) и кортежей (start, end, type, features)."""
    data = {
        "id": document_id,
        "sentences": sentences if sentences is not None else [list(tokens)],
        "annotations": [
            {"start": a[0], "end": a[1], "type": a[2], "features": a[3] if len(a) > 3 else {}}
            for a in annotations
        ],
    }
    return document_from_dict(data)


def letter_grid(text, document_id="doc"):
    """Сетка из однобуквенных токенов: один ключ :token|string|<буква> в позиции."""
    return build_grid(make_document(list(text), document_id=document_id))


@pytest.fixture
def unit_scoring():
    return ScoringConfig(match_score=1, mismatch_score=-1, gap_penalty=0)


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture(scope="session")
def sample_corpora():
    return create_sample_corpora(num_documents=20, seed=42)


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return mini_corpus(seed=7, num_documents=8)
