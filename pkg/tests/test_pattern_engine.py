import pytest
from joblib import parallel_backend

from conftest import make_document
from src.algorithms.pattern_engine import (
    apply_once,
    apply_pair,
    candidate_ranges,
    match_context_at,
    merge_overlapping,
    run_to_fixpoint,
)
from src.data.sample_data import chain_corpus, chain_pairs, context_example_corpus
from src.exceptions import AnnotationRangeError, FixpointError
from src.models.annotation_grid import build_grid, sentence_grids
from src.models.data_models import SOURCE_FEATURE, SOURCE_PATTERN, Annotation, Corpus
from src.models.patterns import PatternFileRecord


def pair(context, target, label="LOC"):
    return PatternFileRecord(context, target, label).to_pair()


@pytest.fixture
def oslo_grid():
    return sentence_grids(context_example_corpus().get("flight-1"))[0]


def test_match_context_at(oslo_grid):
    flew_to = pair(":token|string|flew :token|string|to :target", ":token|category|nnp").context.lc
    assert match_context_at(oslo_grid, flew_to, 3) == 5
    assert match_context_at(oslo_grid, flew_to, 2) is None
    with pytest.raises(AnnotationRangeError):
        match_context_at(oslo_grid, flew_to, 11)


def test_match_uses_multi_atom_elements():
    document = make_document(["in", "New", "York", "."], [(1, 3, "Lookup", {"majorType": "city"})])
    grid = build_grid(document)
    located = pair(":token|string|in :target :token|string|.", ":lookup|majortype|city")
    assert candidate_ranges(located, grid) == [(1, 3)]
    assert [(r.start, r.end) for r in apply_pair(located, grid)] == [(1, 3)]


def test_two_sided_context_uses_nearest_right_context():
    document = make_document(["to", "a", "x", "b", "x", "."])
    grid = sentence_grids(document)[0]
    nearest = pair(":token|string|to :target :token|string|x", ":token|string|a")
    assert candidate_ranges(nearest, grid) == [(2, 3)]
    assert [(r.start, r.end) for r in apply_pair(nearest, grid)] == [(1, 2)]

    wide = pair(":token|string|to :target :token|string|x", ":token|string|a :token|string|x :token|string|b")
    assert apply_pair(wide, grid) == []


def test_results_report_context_atoms():
    document = make_document(["Prime", "Minister", "Smith", "said", "."],
                             [(0, 2, "Lookup", {"majorType": "title"})])
    grid = sentence_grids(document)[0]
    titled = pair(":start :lookup|majortype|title :target :token|string|said :token|string|. :end",
                  ":token|string|smith", "PER")
    bare = pair(":lookup|majortype|title :target :token|string|said", ":token|string|smith", "PER")

    assert [r.context_atoms for r in apply_pair(titled, grid)] == [4]
    assert [r.context_atoms for r in apply_pair(bare, grid)] == [3]


def test_one_sided_contexts_extend_to_sentence_edge(oslo_grid):
    left_only = pair(":token|string|to :target", ":token|category|nnp")
    assert candidate_ranges(left_only, oslo_grid) == [(5, 9)]
    assert apply_pair(left_only, oslo_grid) == []

    grid = sentence_grids(context_example_corpus().get("flight-3"))[0]
    right_only = pair(":target :token|string|flew", ":token|category|prp", "PER")
    results = apply_pair(right_only, grid)
    assert [(r.document_id, r.start, r.end, r.label) for r in results] == [("flight-3", 0, 1, "PER")]


def test_target_pattern_must_cover_candidate(oslo_grid):
    accepted = pair(":token|string|to :target :token|string|on", ":token|category|nnp")
    results = apply_pair(accepted, oslo_grid, iteration=2)
    assert [(r.start, r.end, r.iteration) for r in results] == [(4, 5, 2)]
    assert results[0].pair_id == accepted.pair_id

    rejected = pair(":token|string|to :target :token|string|on", ":token|category|nn")
    assert apply_pair(rejected, oslo_grid) == []


def test_missing_required_keys_skip_grid(oslo_grid):
    absent = pair(":token|string|sailed :target", ":token|category|nnp")
    assert apply_pair(absent, oslo_grid) == []


def test_apply_once_is_sorted_and_parallel_safe():
    corpus = context_example_corpus()
    pairs = [pair(":token|string|to :target :token|category|in", ":token|category|nnp"),
             pair(":token|string|to :target :token|category|nn", ":token|category|nnp"),
             pair(":token|string|to :target :token|category|rb", ":token|category|nnp")]
    serial = apply_once(corpus, pairs)
    assert [(r.document_id, r.start) for r in serial] == [("flight-1", 4), ("flight-2", 3), ("flight-3", 3)]
    with parallel_backend("threading"):
        assert apply_once(corpus, pairs, n_jobs=2) == serial
    assert apply_once(corpus, []) == []


def test_chain_reaches_fixpoint_in_four_iterations():
    annotated, report = run_to_fixpoint(chain_pairs(), chain_corpus())

    assert report.iterations == 4
    assert report.added_per_iteration == [1, 1, 1, 0]
    assert report.productive_iterations == 3
    assert [(r.label, r.start, r.iteration) for r in report.results] == [
        ("STAGE1", 1, 1), ("STAGE2", 2, 2), ("STAGE3", 3, 3),
    ]
    document = annotated.get("chain")
    assert sorted((a.type, a.start, a.end) for a in document.annotations) == [
        ("STAGE1", 1, 2), ("STAGE2", 2, 3), ("STAGE3", 3, 4),
    ]
    assert all(a.get(SOURCE_FEATURE) == SOURCE_PATTERN for a in document.annotations)


def test_fixpoint_is_stable_when_reapplied():
    annotated, _ = run_to_fixpoint(chain_pairs(), chain_corpus())
    again, report = run_to_fixpoint(chain_pairs(), annotated)
    assert report.added_per_iteration == [0]
    assert again == annotated


def test_fixpoint_iteration_limit():
    with pytest.raises(FixpointError):
        run_to_fixpoint(chain_pairs(), chain_corpus(), max_iterations=3)
    _, report = run_to_fixpoint(chain_pairs(), chain_corpus(), max_iterations=4)
    assert report.iterations == 4


@pytest.mark.parametrize("tokens, expected", [
    (["Mr", "Alpha", "Beta", "Gamma", "."], ["STAGE1", "STAGE2", "STAGE3"]),
    (["Dr", "Alpha", "Beta", "Gamma", "."], []),
    (["Mr", "Alpha", "Beta", "Gamma", "!"], ["STAGE1", "STAGE2"]),
    (["Mr", "Alpha", "Beta", "."], ["STAGE1"]),
])
def test_chain_depends_on_earlier_stages(tokens, expected):
    document = make_document([{"string": t, "category": "NNP" if t[0].isupper() else "."} for t in tokens],
                             document_id="chain")
    annotated, report = run_to_fixpoint(chain_pairs(), Corpus([document]))
    assert sorted(a.type for a in annotated.get("chain").annotations) == expected
    assert report.iterations == len(expected) + 1


def test_merge_overlapping_system_annotations():
    system = {SOURCE_FEATURE: SOURCE_PATTERN}
    document = make_document(list("abcdefg"), [
        (0, 1, "PER"),
        (0, 2, "PER", system),
        (1, 3, "PER", system),
        (1, 2, "LOC", system),
        (4, 6, "PER", system),
        (4, 5, "PER", system),
        (6, 7, "PER", system),
    ])
    merged = merge_overlapping(Corpus([document]), ["PER", "LOC"]).get("doc")
    assert sorted((a.type, a.start, a.end) for a in merged.annotations) == [
        ("LOC", 1, 2), ("PER", 0, 1), ("PER", 0, 3), ("PER", 4, 6), ("PER", 6, 7),
    ]
    assert Annotation("doc", 0, 1, "PER") in merged.annotations
