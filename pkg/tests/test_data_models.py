import pytest

from conftest import make_document
from src.exceptions import AnnotationRangeError
from src.models.data_models import (
    Annotation,
    Corpus,
    Document,
    ElementKey,
    KeyDerivationPolicy,
    derive_keys,
)


def test_annotation_normalizes_features():
    annotation = Annotation("d", 0, 2, "Lookup", {"minorType": "city", "majorType": "location"})
    assert annotation.features == (("majorType", "location"), ("minorType", "city"))
    assert annotation.get("MAJORTYPE") == "location"
    assert annotation.get("missing", "-") == "-"
    assert annotation.length == 2
    assert annotation.span_key == ("d", 0, 2, "Lookup")


@pytest.mark.parametrize("start, end", [(-1, 2), (3, 3), (4, 2)])
def test_annotation_rejects_bad_range(start, end):
    with pytest.raises(AnnotationRangeError):
        Annotation("d", start, end, "LOC")


def test_annotation_rejects_empty_type():
    with pytest.raises(ValueError):
        Annotation("d", 0, 1, "")


def test_document_requires_atom_tiling():
    atoms = [Annotation("d", 0, 1, "Token"), Annotation("d", 2, 3, "Token")]
    with pytest.raises(AnnotationRangeError):
        Document("d", atoms)


@pytest.mark.parametrize("boundaries", [[(0, 2)], [(0, 2), (1, 3)], [(1, 3)]])
def test_document_requires_sentence_partition(boundaries):
    atoms = [Annotation("d", i, i + 1, "Token") for i in range(3)]
    with pytest.raises(AnnotationRangeError):
        Document("d", atoms, (), boundaries)


def test_document_rejects_annotation_past_end():
    atoms = [Annotation("d", i, i + 1, "Token") for i in range(2)]
    with pytest.raises(AnnotationRangeError):
        Document("d", atoms, [Annotation("d", 1, 3, "LOC")])


def test_document_rejects_foreign_annotation():
    atoms = [Annotation("d", 0, 1, "Token")]
    with pytest.raises(ValueError):
        Document("d", atoms, [Annotation("other", 0, 1, "LOC")])


def test_document_defaults_to_single_sentence():
    document = make_document(["a", "b", "c"])
    assert document.sentence_boundaries == ((0, 3),)
    assert document.sentence_of(1, 3) == (0, 3)
    assert document.text() == "a b c"


def test_sentence_of_straddling_range():
    document = make_document([], sentences=[["a", "b"], ["c"]])
    assert document.sentence_of(0, 2) == (0, 2)
    assert document.sentence_of(1, 3) is None


def test_with_annotations_skips_duplicates():
    document = make_document(["a", "b"], [(0, 1, "PER")])
    same = document.with_annotations([Annotation("doc", 0, 1, "PER", {"source": "pattern"})])
    assert same is document

    extended = document.with_annotations([Annotation("doc", 0, 2, "PER"), Annotation("doc", 0, 2, "PER")])
    assert len(extended.annotations) == 2
    assert len(extended.without_types(["PER"]).annotations) == 0


@pytest.mark.parametrize("key, text", [
    (ElementKey("target"), ":target"),
    (ElementKey("number"), ":number"),
    (ElementKey("lookup", "majortype"), ":lookup|majortype"),
    (ElementKey("token", "string", "new york"), ":token|string|new\\ york"),
    (ElementKey("token", "string", "a|b!c"), ":token|string|a\\|b\\!c"),
])
def test_element_key_text(key, text):
    assert key.to_text() == text


def test_element_key_value_requires_feature():
    with pytest.raises(ValueError):
        ElementKey("token", None, "x")


def test_default_policy_keys():
    policy = KeyDerivationPolicy.default()
    token = Annotation("d", 0, 1, "Token", {"string": "Paris", "category": "NNP", "root": "paris"})
    assert derive_keys(token, policy) == (
        ElementKey("token", "string", "paris"),
        ElementKey("token", "root", "paris"),
        ElementKey("token", "category", "nnp"),
    )
    lookup = Annotation("d", 0, 1, "Lookup", {"majorType": "Location"})
    assert derive_keys(lookup, policy) == (ElementKey("lookup", "majortype", "location"),)
    number = Annotation("d", 0, 1, "Number", {"value": "3"})
    assert derive_keys(number, policy) == (ElementKey("number"),)


def test_unknown_type_and_missing_features_fall_back_to_type_key():
    policy = KeyDerivationPolicy.default()
    assert derive_keys(Annotation("d", 0, 1, "Person"), policy) == (ElementKey("person"),)
    assert derive_keys(Annotation("d", 0, 1, "Date"), policy) == (ElementKey("date"),)


def test_policy_string_round_trip():
    policy = KeyDerivationPolicy.from_string("token:string, category ; number:value,+")
    assert policy.rule_for("NUMBER").bare
    assert policy.rule_for("Number").features == ("value",)
    assert KeyDerivationPolicy.from_string(policy.to_string()) == policy


@pytest.mark.parametrize("text", ["token", ":string"])
def test_policy_string_rejects_malformed(text):
    with pytest.raises(ValueError):
        KeyDerivationPolicy.from_string(text)


def test_policy_can_keep_case():
    policy = KeyDerivationPolicy(rules=KeyDerivationPolicy.default().rules, lowercase_values=False)
    token = Annotation("d", 0, 1, "Token", {"string": "Paris"})
    assert derive_keys(token, policy) == (ElementKey("token", "string", "Paris"),)


def test_corpus_indexing_and_statistics():
    corpus = Corpus([
        make_document(["a", "b"], [(0, 1, "PER")], document_id="one"),
        make_document([], [(0, 2, "LOC")], document_id="two", sentences=[["c"], ["d"]]),
    ])
    assert corpus.get("two").atom_count == 2
    with pytest.raises(KeyError):
        corpus.get("three")
    with pytest.raises(ValueError):
        Corpus([make_document(["a"], document_id="one"), make_document(["b"], document_id="one")])

    stats = corpus.get_statistics()
    assert stats == {
        "documents": 2,
        "sentences": 3,
        "atoms": 4,
        "annotations": 2,
        "annotations_by_type": {"LOC": 1, "PER": 1},
    }
    assert corpus.span_set(["PER"]) == {("one", 0, 1, "PER")}
    assert list(corpus.to_frame()["type"]) == ["PER", "LOC"]


def test_corpus_with_annotations_rejects_unknown_document():
    corpus = Corpus([make_document(["a"], document_id="one")])
    with pytest.raises(KeyError):
        corpus.with_annotations([Annotation("two", 0, 1, "PER")])
