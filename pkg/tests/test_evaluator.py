import random

import pandas as pd
import pytest

from conftest import make_document
from src.evaluation.evaluator import (
    LEVEL_TOKEN,
    MICRO,
    REPORT_COLUMNS,
    compare_with_reference,
    entity_counts,
    evaluate,
    evaluate_stages,
    lookup_baseline,
    prf,
    token_labels,
)
from src.models.data_models import SOURCE_FEATURE, Corpus


LETTERS = list("abcdefgh")


def corpus_with(annotations, document_id="doc"):
    return Corpus([make_document(LETTERS, annotations, document_id=document_id)])


@pytest.fixture
def gold():
    return corpus_with([(2, 5, "PER"), (6, 7, "LOC")])


@pytest.fixture
def system():
    return corpus_with([(2, 4, "PER"), (6, 7, "LOC"), (0, 1, "ORG")])


@pytest.mark.parametrize("tp, fp, fn, expected", [
    (0, 0, 0, (0.0, 0.0, 0.0)),
    (1, 1, 0, (0.5, 1.0, 2 / 3)),
    (3, 0, 1, (1.0, 0.75, 6 / 7)),
    (0, 2, 2, (0.0, 0.0, 0.0)),
])
def test_prf(tp, fp, fn, expected):
    assert prf(tp, fp, fn) == pytest.approx(expected)


def test_partial_match_counts_twice(system, gold):
    report = evaluate(system, gold)

    per = report.row("PER")
    assert (per["tp"], per["fp"], per["fn"]) == (0, 1, 1)
    assert report.row("LOC")["f1"] == 1.0
    total = report.row(MICRO)
    assert (total["tp"], total["fp"], total["fn"]) == (1, 2, 1)
    assert total["precision"] == pytest.approx(1 / 3)
    assert total["f1"] == pytest.approx(0.4)


def test_token_level_metrics(system, gold):
    report = evaluate(system, gold)

    per = report.row("PER", LEVEL_TOKEN)
    assert (per["tp"], per["fp"], per["fn"]) == (2, 0, 1)
    assert per["precision"] == 1.0
    assert per["recall"] == pytest.approx(2 / 3)
    assert per["f1"] == pytest.approx(0.8)
    assert report.row("ORG", LEVEL_TOKEN)["f1"] == 0.0
    total = report.row(MICRO, LEVEL_TOKEN)
    assert (total["tp"], total["fp"], total["fn"]) == (3, 1, 1)
    assert total["f1"] == pytest.approx(0.75)


def test_identical_annotations_score_perfectly(gold):
    report = evaluate(gold, gold, labels=("PER", "LOC"))
    assert set(report.frame["f1"]) == {1.0}
    assert report.stages == ["full"]


def test_token_labels_follow_label_order():
    corpus = corpus_with([(0, 3, "LOC"), (1, 2, "PER")])
    assert token_labels(corpus, ["PER", "LOC"])[:4] == ["LOC", "PER", "LOC", "O"]
    assert token_labels(corpus, ["LOC", "PER"])[:4] == ["LOC", "LOC", "LOC", "O"]


def test_entity_counts_match_brute_force():
    rng = random.Random(17)
    labels = ["PER", "ORG", "LOC"]

    def random_spans():
        spans = set()
        for _ in range(rng.randint(0, 12)):
            start = rng.randrange(10)
            spans.add((rng.choice("xy"), start, rng.randint(start + 1, 10), rng.choice(labels)))
        return spans

    for _ in range(200):
        system, gold = random_spans(), random_spans()
        counts = entity_counts(system, gold, labels)
        for label in labels:
            tp = sum(1 for s in system if s[3] == label and s in gold)
            fp = sum(1 for s in system if s[3] == label and s not in gold)
            fn = sum(1 for g in gold if g[3] == label and g not in system)
            assert counts[label] == (tp, fp, fn)


def test_document_mismatch_rejected(gold):
    with pytest.raises(ValueError):
        evaluate(corpus_with([], document_id="other"), gold)


def test_empty_corpora():
    report = evaluate(Corpus(), Corpus(), labels=("PER",))
    assert report.row(MICRO)["f1"] == 0.0
    assert report.row("PER", LEVEL_TOKEN)["tp"] == 0


def test_missing_row(system, gold):
    report = evaluate(system, gold, stage="patterns")
    with pytest.raises(KeyError):
        report.row("PER")
    assert report.row("PER", stage="patterns")["fp"] == 1


def test_stages_and_output(system, gold, tmp_path):
    report = evaluate_stages({"patterns": gold, "full": system}, gold, labels=("PER", "LOC"))

    assert report.stages == ["patterns", "full"]
    assert report.entity_f1("PER", "patterns") == 1.0
    assert report.entity_f1("PER") == 0.0

    table = report.format_table()
    assert table.splitlines()[0].split() == ["stage", "level", "label", "P", "R", "F1", "TP", "FP", "FN"]
    assert len(table.splitlines()) == len(report.frame) + 2

    path = tmp_path / "report.tsv"
    report.write_records(path)
    reread = pd.read_csv(path, sep="\t")
    assert list(reread.columns) == REPORT_COLUMNS
    assert len(reread) == len(report.frame)
    assert report.to_records().startswith("stage\tlevel\tlabel")


def test_compare_with_reference(gold):
    report = evaluate(gold, gold, labels=("PER", "LOC"))
    frame = compare_with_reference(report, {"PER": 0.98, "LOC": 0.5}, tolerance=0.05)
    assert list(frame["flagged"]) == [False, True]
    assert frame.loc[1, "delta"] == pytest.approx(0.5)


def test_lookup_baseline():
    document = make_document(LETTERS, [
        (0, 1, "PER"),
        (0, 1, "Lookup", {"majorType": "person_first"}),
        (2, 4, "Lookup", {"majorType": "Organization"}),
        (5, 6, "Lookup", {"majorType": "date"}),
    ])
    baseline = lookup_baseline(Corpus([document])).get("doc")

    labels = [a for a in baseline.annotations if a.type in ("PER", "ORG", "LOC")]
    assert sorted((a.type, a.start, a.end) for a in labels) == [("ORG", 2, 4), ("PER", 0, 1)]
    assert all(a.get(SOURCE_FEATURE) == "lookup" for a in labels)
    assert len(baseline.annotations_of_type("Lookup")) == 3
