import logging
import random

import pytest

from conftest import make_document
from src.data.sample_data import chain_corpus, overlapping_annotation_document
from src.exceptions import AnnotationRangeError
from src.models.annotation_grid import build_grid, sentence_grids
from src.models.data_models import END_KEY, START_KEY, ElementKey, KeyDerivationPolicy, derive_keys


@pytest.fixture
def acme():
    return overlapping_annotation_document()


def keys_at(grid, index):
    return {(e.key.to_text(), e.length) for e in grid.elements_at(index)}


def test_overlapping_annotations_share_positions(acme):
    grid = build_grid(acme)

    assert grid.length == 5
    assert grid.element_count == 14
    assert keys_at(grid, 0) == {(":token|string|the", 1), (":token|category|det", 1), (":chunk|kind|np", 2)}
    assert keys_at(grid, 2) == {(":token|string|sued", 1), (":token|category|verb", 1), (":chunk|kind|vp", 3)}
    assert keys_at(grid, 3) == {
        (":token|string|acme", 1), (":token|category|nnp", 1),
        (":chunk|kind|np", 2), (":lookup|majortype|organization", 2),
    }
    assert grid.lengths_for(3, ElementKey("chunk", "kind", "np")) == (2,)
    assert grid.common_lengths(3, [ElementKey("chunk", "kind", "np"),
                                   ElementKey("lookup", "majortype", "organization")]) == (2,)
    assert grid.common_lengths(3, [ElementKey("chunk", "kind", "np"),
                                   ElementKey("token", "category", "nnp")]) == ()


def test_markers_shift_positions(acme):
    grid = build_grid(acme, mark_start=True, mark_end=True)

    assert grid.length == 7
    assert [e.key for e in grid.elements_at(0)] == [START_KEY]
    assert [e.key for e in grid.elements_at(6)] == [END_KEY]
    assert grid.elements_at(0)[0].is_marker
    assert (grid.content_start, grid.content_end) == (1, 6)
    assert grid.to_document_range(4, 6) == (3, 5)
    assert grid.from_document_index(3) == 4
    assert ElementKey("token", "string", "acme") in grid.key_index(4)


def test_sub_range_drops_straddling_annotations(acme, caplog):
    with caplog.at_level(logging.WARNING):
        grid = build_grid(acme, atom_range=(3, 5))

    assert grid.length == 2
    assert grid.diagnostics.dropped_straddling == 1
    assert ElementKey("chunk", "kind", "vp") not in grid.key_set()
    assert ElementKey("lookup", "majortype", "organization") in grid.key_set()
    assert grid.to_document_range(0, 2) == (3, 5)
    assert "пересекающих границу" in caplog.text


def test_range_outside_document_rejected(acme):
    with pytest.raises(AnnotationRangeError):
        build_grid(acme, atom_range=(2, 9))


def test_excluded_types_and_overrides(acme):
    grid = build_grid(acme, exclude_types=("Chunk",))
    assert not any(key.type == "chunk" for key in grid.key_set())

    overridden = build_grid(acme, overrides={
        ("acme", 3, 5, "Lookup"): (),
        ("acme", 0, 2, "Chunk"): (ElementKey("np"),),
    })
    assert ElementKey("lookup", "majortype", "organization") not in overridden.key_set()
    assert ElementKey("np") in overridden.key_index(0)
    assert overridden.diagnostics.overridden == 2


def test_flatten_returns_source_annotations(acme):
    grid = build_grid(acme, mark_start=True)
    flattened = grid.flatten()
    assert len(flattened) == grid.element_count - 1
    assert all(annotation.document_id == "acme" for annotation, _ in flattened)


def test_sentence_grids_use_markers():
    document = chain_corpus().get("chain")
    first, second = sentence_grids(document)

    assert (first.length, second.length) == (7, 5)
    assert (first.origin, second.origin) == (0, 5)
    assert second.to_document_range(1, 2) == (5, 6)
    assert START_KEY in second.key_index(0) and END_KEY in second.key_index(4)


def test_signature_ignores_document_identity():
    a = build_grid(make_document(["x", "y"], [(0, 2, "P")], document_id="a"))
    b = build_grid(make_document(["x", "y"], [(0, 2, "P")], document_id="b"))
    c = build_grid(make_document(["x", "z"], [(0, 2, "P")], document_id="c"))
    assert a.signature() == b.signature()
    assert a.signature() != c.signature()


def test_element_count_matches_brute_force():
    rng = random.Random(5)
    policy = KeyDerivationPolicy.default()
    for case in range(100):
        n = rng.randint(1, 8)
        tokens = [{"string": rng.choice("abc"), "category": rng.choice(["nn", "vb"])} for _ in range(n)]
        annotations = []
        for _ in range(rng.randint(0, 5)):
            start = rng.randrange(n)
            annotations.append((start, rng.randint(start + 1, n), rng.choice(["Lookup", "Number", "LOC"]),
                                {"majorType": "city"}))
        document = make_document(tokens, annotations, document_id=f"d{case}")
        lo = rng.randint(0, n)
        hi = rng.randint(lo, n)
        mark_start, mark_end = rng.random() < 0.5, rng.random() < 0.5

        grid = build_grid(document, (lo, hi), policy, mark_start=mark_start, mark_end=mark_end)

        inside = [a for a in document.annotations if lo <= a.start and a.end <= hi]
        straddling = [a for a in document.annotations
                      if a.start < hi and a.end > lo and not (lo <= a.start and a.end <= hi)]
        expected = sum(len(derive_keys(a, policy)) for a in document.atoms[lo:hi] + tuple(inside))
        expected += int(mark_start) + int(mark_end)
        assert grid.element_count == expected, case
        assert grid.diagnostics.dropped_straddling == len(straddling)
        assert grid.length == (hi - lo) + int(mark_start) + int(mark_end)
