import logging

import pytest

from src.data.corpus_io import (
    CHUNK_TYPE,
    document_from_dict,
    format_annotation_record,
    ingest_conll,
    parse_annotation_record,
    priors_path_for,
    read_annotation_records,
    read_pattern_file,
    stats_path_for,
    write_annotation_records,
    write_conll,
    write_pattern_file,
    write_stats_file,
)
from src.data.sample_data import MINI_CONLL
from src.exceptions import CorpusFormatError
from src.models.data_models import Annotation
from src.models.patterns import PairStats, PatternFileRecord


def spans(document, types):
    return sorted((a.type, a.start, a.end) for a in document.annotations if a.type in types)


def chunks(document):
    return sorted((a.get("kind"), a.start, a.end) for a in document.annotations_of_type(CHUNK_TYPE))


def test_ingest_conll(caplog):
    with caplog.at_level(logging.WARNING):
        corpus = ingest_conll(MINI_CONLL.splitlines())

    assert [d.document_id for d in corpus] == ["doc-0001", "doc-0002"]
    first, second = corpus
    assert first.text() == "U.N. official Ekeus heads for Baghdad ."
    assert first.atoms[0].get("category") == "NNP"
    assert first.sentence_boundaries == ((0, 7),)
    assert spans(first, ("PER", "ORG", "LOC")) == [("LOC", 5, 6), ("ORG", 0, 1), ("PER", 2, 3)]
    assert chunks(first) == [("NP", 0, 2), ("NP", 2, 3), ("NP", 5, 6), ("PP", 4, 5), ("VP", 3, 4)]
    assert spans(second, ("PER",)) == [("PER", 0, 2)]
    assert "Исправлено 3" in caplog.text


def test_strict_ingest_reports_line():
    with pytest.raises(CorpusFormatError) as info:
        ingest_conll(MINI_CONLL.splitlines(), strict=True)
    assert info.value.line_number == 3


@pytest.mark.parametrize("lines, line_number", [
    (["Word NNP O"], 1),
    (["-DOCSTART- -X- -X- O", "", "Word NNP B-NP X-PER"], 3),
])
def test_malformed_conll_lines(lines, line_number):
    with pytest.raises(CorpusFormatError) as info:
        ingest_conll(lines)
    assert info.value.line_number == line_number


def test_documents_split_on_docstart():
    lines = ["-DOCSTART- -X- -X- O", "", "A NN B-NP O", ""] * 3
    assert len(ingest_conll(lines)) == 3
    assert len(ingest_conll([])) == 0


def test_sentences_split_on_blank_lines():
    lines = ["A NN B-NP O", "B NN I-NP O", "", "", "C NN B-NP O"]
    document, = ingest_conll(lines, document_prefix="t")
    assert document.document_id == "t-0001"
    assert document.sentence_boundaries == ((0, 2), (2, 3))


def test_conll_file_round_trip(tmp_path):
    original = ingest_conll(MINI_CONLL.splitlines())
    path = tmp_path / "mini.conll"
    write_conll(original, path)
    reread = ingest_conll(path, strict=True)

    assert [d.document_id for d in reread] == ["mini-0001", "mini-0002"]
    for before, after in zip(original, reread):
        assert after.text() == before.text()
        assert spans(after, ("PER", "ORG", "LOC")) == spans(before, ("PER", "ORG", "LOC"))
        assert chunks(after) == chunks(before)


def test_annotation_record_escapes():
    annotation = Annotation("d", 0, 2, "Lookup", {"majorType": "a\tb", "note": "x\\y"})
    line = format_annotation_record(annotation)
    assert line.count("\t") == 5
    document_id, start, end, type_name, features = parse_annotation_record(line)
    assert Annotation(document_id, start, end, type_name, features) == annotation


@pytest.mark.parametrize("line", [
    "d\t0\t1",
    "d\t0\tx\tPER",
    "d\t0\t1\tPER\tnovalue",
    "d\t0\t1\tPER\tname=bad\\q",
])
def test_annotation_record_errors(line):
    with pytest.raises(CorpusFormatError) as info:
        parse_annotation_record(line, 7)
    assert info.value.line_number == 7


def test_records_round_trip(small_corpus, tmp_path):
    path = tmp_path / "records.tsv"
    write_annotation_records(small_corpus, path)
    assert read_annotation_records(path) == small_corpus


def test_char_offsets_are_converted():
    lines = [
        "d\t0\t5\tToken\tstring=Hello",
        "d\t6\t11\tToken\tstring=world",
        "d\t11\t12\tToken\tstring=!",
        "d\t0\t12\tSentence",
        "d\t0\t11\tPER",
        "d\t6\t11\tLOC\tsource=gold",
    ]
    document, = read_annotation_records(lines, offsets="char")
    assert document.text() == "Hello world !"
    assert document.sentence_boundaries == ((0, 3),)
    assert spans(document, ("PER", "LOC")) == [("LOC", 1, 2), ("PER", 0, 2)]


def test_char_offsets_outside_tokens_rejected():
    lines = ["d\t0\t5\tToken\tstring=Hello", "d\t3\t30\tPER"]
    with pytest.raises(CorpusFormatError) as info:
        read_annotation_records(lines, offsets="char")
    assert info.value.line_number == 2


def test_atom_record_range_errors():
    with pytest.raises(CorpusFormatError):
        read_annotation_records(["d\t0\t1\tToken\tstring=a", "d\t0\t4\tPER"])
    with pytest.raises(ValueError):
        read_annotation_records([], offsets="bytes")


def test_pattern_file_with_stats(tmp_path):
    pairs = [
        PatternFileRecord(":token|string|to :target", ":token|category|nnp", "LOC").to_pair()
        .with_stats(PairStats(4, 3)),
        PatternFileRecord(":token|string|in :target", ":token|category|nnp", "LOC").to_pair()
        .with_stats(PairStats(9, 9)),
        PatternFileRecord(":target :token|string|said", ":token|category|nnp", "PER").to_pair()
        .with_stats(PairStats(1, 1)),
    ]
    path = tmp_path / "patterns.txt"
    write_pattern_file(pairs, path)
    write_stats_file(pairs, stats_path_for(path))

    assert stats_path_for(path).name == "patterns.stats.tsv"
    assert priors_path_for(path) == tmp_path / "priors.tsv"
    assert path.read_text(encoding="utf-8").splitlines()[0] == \
        ":token|string|in :target\t:token|category|nnp\tLOC\t9"

    loaded = read_pattern_file(path)
    assert [p.label for p in loaded] == ["LOC", "LOC", "PER"]
    assert [p.stats for p in loaded] == [PairStats(9, 9), PairStats(4, 3), PairStats(1, 1)]
    assert set(loaded) == set(pairs)


def test_pattern_file_without_stats(tmp_path):
    path = tmp_path / "patterns.txt"
    path.write_text("# comment\n\n:token|string|to :target\t:token|category|nnp\tLOC\t2\n", encoding="utf-8")
    pair, = read_pattern_file(path)
    assert pair.stats is None


def test_pattern_file_bad_line(tmp_path):
    path = tmp_path / "patterns.txt"
    path.write_text(":token|string|to :target\t:token|category|nnp\tLOC\t2\n"
                    "to :target\t:token|category|nnp\tLOC\t1\n", encoding="utf-8")
    with pytest.raises(CorpusFormatError) as info:
        read_pattern_file(path)
    assert info.value.line_number == 2


def test_document_from_dict():
    document = document_from_dict({
        "id": "json",
        "tokens": ["Oslo", {"string": "airport", "category": "NN"}],
        "annotations": [{"start": 0, "end": 1, "type": "LOC"}],
    })
    assert document.text() == "Oslo airport"
    assert document.atoms[1].get("category") == "NN"
    assert spans(document, ("LOC",)) == [("LOC", 0, 1)]
    assert document_from_dict({"sentences": [["a"]]}, default_id="fallback").document_id == "fallback"


@pytest.mark.parametrize("data", [
    {"id": "x", "sentences": "abc"},
    {"id": "x"},
    {"id": "x", "sentences": [[{"category": "NN"}]]},
    {"id": "x", "sentences": [["a"]], "annotations": [{"start": 0, "type": "LOC"}]},
    {"id": "x", "sentences": [["a"]], "annotations": [{"start": 1, "end": 0, "type": "LOC"}]},
])
def test_document_from_dict_errors(data):
    with pytest.raises(CorpusFormatError):
        document_from_dict(data)
