import random

import pytest

from conftest import letter_grid, make_document
from src.algorithms.grid_aligner import (
    COMBINE_MAX,
    COMBINE_SUM,
    Link,
    ScoringConfig,
    align,
    align_with_matrix,
    dump_matrix,
    fill_matrix,
    global_max,
)
from src.models.annotation_grid import build_grid
from src.models.data_models import TARGET_KEY, ElementKey


def classic_smith_waterman(a, b, match, mismatch, gap):
    """Табличный Смит-Ватерман с линейным штрафом за пропуск."""
    H = [[0.0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            diag = H[i - 1][j - 1] + (match if a[i - 1] == b[j - 1] else mismatch)
            H[i][j] = max(0.0, diag, H[i - 1][j] - gap, H[i][j - 1] - gap)
    return H


def chain_oracle(x, y, match, mismatch, gap):
    """
    Лучшая цепочка совпавших прямоугольников.

    Между соседними прямоугольниками (dx, dy) позиций пропускаются либо
    пропусками, либо min(dx, dy) несовпадениями и остатком пропусков.
    """
    rects = []
    for i in range(x.length):
        for j in range(y.length):
            xi, yj = x.key_index(i), y.key_index(j)
            grouped = {}
            for key in set(xi) & set(yj):
                for lx in xi[key]:
                    for ly in yj[key]:
                        grouped[(lx, ly)] = grouped.get((lx, ly), 0) + 1
            for (lx, ly), count in grouped.items():
                rects.append(((i, j), (i + lx, j + ly), count * match))
    rects.sort()

    def skip(a, b):
        dx, dy = b[0] - a[0], b[1] - a[1]
        k = min(dx, dy)
        return min((dx + dy) * gap, k * -mismatch + (dx + dy - 2 * k) * gap)

    best_end = []
    for terminal, origin, contribution in rects:
        before = 0.0
        for (t2, o2, _), value in zip(rects, best_end):
            if o2[0] <= terminal[0] and o2[1] <= terminal[1]:
                before = max(before, value - skip(o2, terminal))
        best_end.append(contribution + before)
    return max([0.0] + best_end)


def random_overlap_grid(rng, document_id):
    n = rng.randint(1, 6)
    tokens = [rng.choice("ab") for _ in range(n)]
    annotations = []
    for _ in range(rng.randint(0, 4)):
        start = rng.randrange(n)
        end = start + rng.randint(1, min(3, n - start))
        annotations.append((start, end, rng.choice("pq")))
    return build_grid(make_document(tokens, annotations, document_id=document_id))


@pytest.fixture
def worked_case(unit_scoring):
    return letter_grid("ABCDE", "x"), letter_grid("HABGCD", "y"), unit_scoring


def test_worked_example_matrix(worked_case):
    x, y, cfg = worked_case
    matrix = fill_matrix(x, y, cfg)

    expected = [
        [0, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 1, 1, 1, 1],
        [0, 0, 1, 2, 2, 2, 2],
        [0, 0, 1, 2, 2, 3, 3],
        [0, 0, 1, 2, 2, 3, 4],
        [0, 0, 1, 2, 2, 3, 4],
    ]
    assert matrix.scores.tolist() == expected
    # столбец A: 1 во всех строках после A
    assert matrix.scores[1:, 2].tolist() == [1, 1, 1, 1, 1]
    # строка A: при d = 0 единица переносится и в столбцы B, G, C, D
    assert matrix.scores[1, 3:].tolist() == [1, 1, 1, 1]


def test_worked_example_backtrack(worked_case):
    x, y, cfg = worked_case
    alignment, matrix = align_with_matrix(x, y, cfg)

    assert global_max(matrix) == (4, 6)
    assert alignment.score == 4
    assert alignment.end_cell == (4, 6)
    assert [(e.x_start, e.y_start) for e in alignment.elements] == [(0, 1), (1, 2), (2, 4), (3, 5)]
    assert [e.keys[0].value for e in alignment.elements] == ["a", "b", "c", "d"]
    assert not alignment.has_gap(0)
    assert alignment.skipped(1) == (0, 1)
    assert alignment.has_gap(1)


def test_worked_example_matched_pairs(worked_case):
    x, y, cfg = worked_case
    matrix = fill_matrix(x, y, cfg)
    span = matrix.chosen[(4, 6)]
    pairs = matrix.matched_pairs(span)
    assert len(pairs) == 1
    assert pairs[0][0].key == ElementKey("token", "string", "d")


@pytest.fixture
def classic_cases():
    """Случаи (a, b, match, mismatch, gap): атомарные сетки без перекрытий."""
    rng = random.Random(2024)
    cases = [("", "", 1, -1, 1), ("a", "", 1, -1, 1), ("abc", "abc", 1, -1, 1), ("ab", "ba", 2, -3, 3)]
    for _ in range(250):
        a = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
        b = "".join(rng.choice("abcd") for _ in range(rng.randint(0, 8)))
        cases.append((a, b, rng.choice([1, 2, 3]), rng.choice([-3, -2, -1, 0]), rng.choice([0, 1, 2, 3])))
    return cases


def test_atomic_grids_match_classic_smith_waterman(classic_cases):
    for a, b, match, mismatch, gap in classic_cases:
        cfg = ScoringConfig(match_score=match, mismatch_score=mismatch, gap_penalty=gap)
        alignment, matrix = align_with_matrix(letter_grid(a), letter_grid(b), cfg)
        expected = classic_smith_waterman(a, b, match, mismatch, gap)
        assert matrix.scores.tolist() == expected, (a, b, match, mismatch, gap)
        assert alignment.score == max(max(row) for row in expected)


def test_overlapping_grids_match_chain_oracle():
    rng = random.Random(99)
    for case in range(150):
        x = random_overlap_grid(rng, f"x{case}")
        y = random_overlap_grid(rng, f"y{case}")
        match, mismatch, gap = rng.choice([1, 2]), rng.choice([-2, -1, 0]), rng.choice([0, 1, 2])
        cfg = ScoringConfig(match_score=match, mismatch_score=mismatch, gap_penalty=gap)

        score = align(x, y, cfg).score
        assert score == pytest.approx(chain_oracle(x, y, match, mismatch, gap)), case
        assert align(y, x, cfg).score == pytest.approx(score)


@pytest.mark.parametrize("combine, expected", [(COMBINE_SUM, 2), (COMBINE_MAX, 1)])
def test_cooccurring_keys_combine(combine, expected):
    x = build_grid(make_document(["a"], [(0, 1, "P")], document_id="x"))
    y = build_grid(make_document(["a"], [(0, 1, "P")], document_id="y"))
    alignment = align(x, y, ScoringConfig(combine=combine))

    assert alignment.score == expected
    assert len(alignment) == 1
    assert set(alignment.elements[0].keys) == {ElementKey("p"), ElementKey("token", "string", "a")}


def test_span_between_elements_of_different_lengths():
    x = build_grid(make_document(["a", "b"], [(0, 2, "P")], document_id="x"))
    y = build_grid(make_document(["c"], [(0, 1, "P")], document_id="y"))
    alignment = align(x, y, ScoringConfig())

    assert alignment.score == 1
    assert alignment.end_cell == (2, 1)
    element = alignment.elements[0]
    assert (element.x_start, element.x_length, element.y_start, element.y_length) == (0, 2, 0, 1)


def test_span_wins_ties_with_gap(unit_scoring):
    matrix = fill_matrix(letter_grid("aa"), letter_grid("a"), unit_scoring)
    assert matrix.scores[2, 1] == 1
    assert matrix.link_at((2, 1)) == Link.SPAN


def test_mismatch_step_not_taken_over_match():
    cfg = ScoringConfig(match_score=1, mismatch_score=0, gap_penalty=5)
    matrix = fill_matrix(letter_grid("ab"), letter_grid("ab"), cfg)
    assert matrix.link_at((1, 1)) == Link.SPAN
    assert matrix.link_at((2, 2)) == Link.SPAN
    assert matrix.scores[2, 2] == 2


def test_no_common_keys_gives_empty_alignment(unit_scoring):
    alignment, matrix = align_with_matrix(letter_grid("abc"), letter_grid("xyz"), unit_scoring)
    assert not alignment
    assert alignment.score == 0
    assert alignment.end_cell is None
    assert global_max(matrix) is None


def test_target_key_scores_higher():
    cfg = ScoringConfig(type_scores={"lookup": 5})
    assert cfg.score_for(TARGET_KEY) == 100
    assert cfg.score_for(ElementKey("lookup", "majortype", "city")) == 5
    assert cfg.score_for(ElementKey("token", "string", "a")) == 1


@pytest.mark.parametrize("kwargs", [
    {"match_score": 0},
    {"match_score": 5, "target_match_score": 2},
    {"gap_penalty": -1},
    {"mismatch_score": 0.5},
    {"combine": "AVG"},
    {"type_scores": {"lookup": 0}},
])
def test_invalid_scoring_rejected(kwargs):
    with pytest.raises(ValueError):
        ScoringConfig(**kwargs)


def test_dump_matrix_lists_positions_and_spans(worked_case):
    x, y, cfg = worked_case
    text = dump_matrix(fill_matrix(x, y, cfg))
    lines = text.splitlines()

    assert lines[0].split() == ["-", "h", "a", "b", "g", "c", "d"]
    assert lines[5].split()[0] == "d"
    assert "spans:" in lines
    assert any(line.startswith("* (3, 5) -> (4, 6) score=4") for line in lines)
