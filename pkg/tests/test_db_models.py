import pytest

from src.database.db_models import PatternDatabase, PatternPairRecord
from src.models.patterns import PairStats, PatternFileRecord


def make_pair(context, target, label, applications=None, true_positives=None):
    pair = PatternFileRecord(context, target, label).to_pair()
    if applications is None:
        return pair
    return pair.with_stats(PairStats(applications, true_positives))


@pytest.fixture
def pairs():
    return [
        make_pair(":token|string|to :target", ":token|category|nnp", "LOC", 10, 8),
        make_pair(":token|string|in :target :token|string|.", ":token|category|nnp", "LOC", 4, 4),
        make_pair(":target :token|string|said", ":token|category|nnp :token|category|nnp", "PER", 6, 6),
    ]


@pytest.fixture
def pattern_db(tmp_path):
    database = PatternDatabase(f"sqlite:///{tmp_path / 'patterns.db'}")
    database.create_tables()
    return database


def test_save_and_load_pairs(pattern_db, pairs):
    assert pattern_db.save_pairs(pairs) == 3

    loaded = pattern_db.load_pairs()
    assert set(loaded) == set(pairs)
    assert {p.pair_id: p.stats for p in loaded} == {p.pair_id: p.stats for p in pairs}
    assert [p.label for p in pattern_db.load_pairs("PER")] == ["PER"]


def test_save_replaces_or_merges(pattern_db, pairs):
    pattern_db.save_pairs(pairs)
    pattern_db.save_pairs(pairs[:1])
    assert len(pattern_db.load_pairs()) == 1

    updated = pairs[1].with_stats(PairStats(5, 5))
    pattern_db.save_pairs([updated], replace=False)
    stats = {p.pair_id: p.stats for p in pattern_db.load_pairs()}
    assert stats == {pairs[0].pair_id: PairStats(10, 8), pairs[1].pair_id: PairStats(5, 5)}


@pytest.mark.parametrize("sort, expected", [
    ("count", [10, 6, 4]),
    ("precision", [6, 4, 10]),
])
def test_top_pairs_order(pattern_db, pairs, sort, expected):
    pattern_db.save_pairs(pairs)
    rows = pattern_db.top_pairs(sort=sort)
    counts = [row["count"] for row in rows]
    if sort == "precision":
        # две пары с точностью 1.0 упорядочены по числу применений
        assert rows[0]["precision"] == rows[1]["precision"] == 1.0
    assert counts == expected


def test_top_pairs_filters_and_limits(pattern_db, pairs):
    pattern_db.save_pairs(pairs)
    rows = pattern_db.top_pairs(label="LOC", top=1)
    assert len(rows) == 1
    assert rows[0]["context"] == ":token|string|to :target"
    assert rows[0]["precision"] == pytest.approx(0.8)

    with pytest.raises(ValueError):
        pattern_db.top_pairs(sort="length")


def test_unscored_pair_has_no_precision(pattern_db):
    pair = make_pair(":token|string|at :target", ":token|category|nnp", "LOC")
    record = PatternPairRecord.from_pair(pair)
    assert record.precision is None
    assert record.applications == 0

    pattern_db.save_pairs([pair])
    loaded, = pattern_db.load_pairs()
    assert loaded.precision is None


def test_database_stats(pattern_db, pairs):
    pattern_db.save_pairs(pairs)
    stats = pattern_db.get_database_stats()
    assert stats["pairs_count"] == 3
    assert stats["pairs_by_label"] == {"LOC": 2, "PER": 1}
    assert stats["database_url"].startswith("sqlite:///")
