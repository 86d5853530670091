"""
Расширенный алгоритм Смита-Ватермана для сеток аннотаций.

Модуль выравнивает две сетки перекрывающихся аннотаций переменной длины.
Совпадение пары элементов дает прямоугольный переход (span) из клетки
(i, j) в клетку (i + len(x), j + len(y)); совпадения с одинаковыми
границами накапливаются как совместно встречающиеся ключи.
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.annotation_grid import AnnotationGrid, GridElement
from ..models.data_models import TARGET_KEY, ElementKey


logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

COMBINE_SUM = "SUM"
COMBINE_MAX = "MAX"


class Link(IntEnum):
    """Обратная ссылка клетки матрицы."""

    STOP = 0
    SPAN = 1
    GAP_X = 2      # пропуск в X: шаг из (i, j-1)
    GAP_Y = 3      # пропуск в Y: шаг из (i-1, j)
    MISMATCH = 4   # диагональный шаг без совпадения


@dataclass(frozen=True)
class ScoringConfig:
    """
    Параметры оценки выравнивания.

    Attributes:
        match_score: Оценка совпадения ключа по умолчанию
        target_match_score: Оценка совпадения ключа цели (:target)
        mismatch_score: Оценка диагонального шага между несовпавшими атомами
        gap_penalty: Штраф d за пропуск одной позиции
        type_scores: Переопределение оценки совпадения по типу аннотации
        combine: Правило объединения совместных совпадений (SUM или MAX)
    """

    match_score: float = 1.0
    target_match_score: float = 100.0
    mismatch_score: float = -1.0
    gap_penalty: float = 2.0
    type_scores: Dict[str, float] = field(default_factory=dict)
    combine: str = COMBINE_SUM
    target_key: ElementKey = TARGET_KEY

    def __post_init__(self):
        if self.match_score <= 0:
            raise ValueError(f"match_score должен быть > 0, получено {self.match_score}")
        if self.target_match_score < self.match_score:
            raise ValueError(
                f"target_match_score ({self.target_match_score}) должен быть >= match_score ({self.match_score})"
            )
        if self.gap_penalty < 0:
            raise ValueError(f"gap_penalty должен быть >= 0, получено {self.gap_penalty}")
        if self.mismatch_score > 0:
            raise ValueError(f"mismatch_score должен быть <= 0, получено {self.mismatch_score}")
        if self.combine not in (COMBINE_SUM, COMBINE_MAX):
            raise ValueError(f"combine должен быть SUM или MAX, получено {self.combine}")
        for type_name, score in self.type_scores.items():
            if score <= 0:
                raise ValueError(f"Оценка совпадения для типа {type_name} должна быть > 0, получено {score}")

    def score_for(self, key: ElementKey) -> float:
        if key == self.target_key:
            return self.target_match_score
        return self.type_scores.get(key.type, self.match_score)

    def combine_scores(self, keys: Sequence[ElementKey]) -> float:
        scores = [self.score_for(key) for key in keys]
        if self.combine == COMBINE_MAX:
            return max(scores)
        return sum(scores)


@dataclass(frozen=True)
class Span:
    """Прямоугольный переход от клетки terminal к клетке origin."""

    terminal: Cell
    origin: Cell
    score: float
    contribution: float
    keys: Tuple[ElementKey, ...]

    @property
    def x_length(self) -> int:
        return self.origin[0] - self.terminal[0]

    @property
    def y_length(self) -> int:
        return self.origin[1] - self.terminal[1]


@dataclass
class AlignmentMatrix:
    """Заполненная матрица динамического программирования."""

    x: AnnotationGrid
    y: AnnotationGrid
    scores: np.ndarray
    links: np.ndarray
    spans: Dict[Cell, List[Span]]
    chosen: Dict[Cell, Span]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.scores.shape

    def link_at(self, cell: Cell) -> Link:
        return Link(int(self.links[cell]))

    def matched_pairs(self, span: Span) -> List[Tuple[GridElement, GridElement]]:
        """Пары элементов X и Y, совпавшие на прямоугольнике перехода."""
        i, j = span.terminal
        keys = set(span.keys)
        xs = [e for e in self.x.elements_at(i) if e.length == span.x_length and e.key in keys]
        ys = [e for e in self.y.elements_at(j) if e.length == span.y_length and e.key in keys]
        return [(ex, ey) for ex in xs for ey in ys if ex.key == ey.key]


@dataclass(frozen=True)
class AlignedElement:
    """Элемент общей последовательности: положения в обеих сетках и совпавшие ключи."""

    x_start: int
    x_length: int
    y_start: int
    y_length: int
    keys: Tuple[ElementKey, ...]

    @property
    def x_end(self) -> int:
        return self.x_start + self.x_length

    @property
    def y_end(self) -> int:
        return self.y_start + self.y_length


@dataclass(frozen=True)
class Alignment:
    """Результат выравнивания: упорядоченные элементы и итоговая оценка."""

    elements: Tuple[AlignedElement, ...] = ()
    score: float = 0.0
    end_cell: Optional[Cell] = None

    def __len__(self) -> int:
        return len(self.elements)

    def __bool__(self) -> bool:
        return bool(self.elements)

    def skipped(self, index: int) -> Tuple[int, int]:
        """Число атомов, пропущенных в X и в Y между элементами index и index + 1."""
        current, following = self.elements[index], self.elements[index + 1]
        return (following.x_start - current.x_end, following.y_start - current.y_end)

    def has_gap(self, index: int) -> bool:
        skipped_x, skipped_y = self.skipped(index)
        return skipped_x > 0 or skipped_y > 0


def fill_matrix(x: AnnotationGrid, y: AnnotationGrid, cfg: ScoringConfig) -> AlignmentMatrix:
    """
    Прямой проход: заполняет матрицу (|X|+1) x (|Y|+1) построчно.

    M[i][j] = max(0, лучший переход в (i, j), M[i][j-1] - d, M[i-1][j] - d,
    M[i-1][j-1] + mismatch, если на прямоугольнике 1x1 ничего не совпало).
    """
    n, m = x.length, y.length
    d = cfg.gap_penalty
    scores = [[0.0] * (m + 1) for _ in range(n + 1)]
    links = [[int(Link.STOP)] * (m + 1) for _ in range(n + 1)]
    spans: Dict[Cell, List[Span]] = {}
    chosen: Dict[Cell, Span] = {}
    unit_match = [[False] * (m + 1) for _ in range(n + 1)]

    x_keys = [frozenset(x.key_index(i)) for i in range(n)]
    y_keys = [frozenset(y.key_index(j)) for j in range(m)]

    for i in range(n + 1):
        for j in range(m + 1):
            best, link = 0.0, Link.STOP

            landing = spans.get((i, j))
            if landing:
                span = landing[0]
                for candidate in landing[1:]:
                    if candidate.score > span.score:
                        span = candidate
                if span.score > best:
                    best, link = span.score, Link.SPAN
                    chosen[(i, j)] = span
            if j > 0 and scores[i][j - 1] - d > best:
                best, link = scores[i][j - 1] - d, Link.GAP_X
            if i > 0 and scores[i - 1][j] - d > best:
                best, link = scores[i - 1][j] - d, Link.GAP_Y
            if i > 0 and j > 0 and not unit_match[i - 1][j - 1]:
                if scores[i - 1][j - 1] + cfg.mismatch_score > best:
                    best, link = scores[i - 1][j - 1] + cfg.mismatch_score, Link.MISMATCH

            if link != Link.SPAN:
                chosen.pop((i, j), None)
            scores[i][j] = best
            links[i][j] = int(link)

            if i == n or j == m:
                continue
            common = x_keys[i] & y_keys[j]
            if not common:
                continue

            rectangles: Dict[Tuple[int, int], List[ElementKey]] = {}
            x_index, y_index = x.key_index(i), y.key_index(j)
            for key in sorted(common, key=lambda k: k.sort_key):
                for lx in x_index[key]:
                    for ly in y_index[key]:
                        rectangles.setdefault((lx, ly), []).append(key)

            for (lx, ly), keys in rectangles.items():
                if lx == 1 and ly == 1:
                    unit_match[i][j] = True
                contribution = cfg.combine_scores(keys)
                origin = (i + lx, j + ly)
                spans.setdefault(origin, []).append(
                    Span(terminal=(i, j), origin=origin, score=best + contribution,
                         contribution=contribution, keys=tuple(keys))
                )

    return AlignmentMatrix(
        x=x,
        y=y,
        scores=np.asarray(scores, dtype=float),
        links=np.asarray(links, dtype=np.int8),
        spans=spans,
        chosen=chosen,
    )


def global_max(matrix: AlignmentMatrix) -> Optional[Cell]:
    """
    Клетка с максимальной оценкой; при равенстве выбирается наименьшая (i, j).

    Returns:
        Клетка или None, если вся матрица нулевая
    """
    if matrix.scores.size == 0:
        return None
    flat = int(np.argmax(matrix.scores))
    cell = np.unravel_index(flat, matrix.scores.shape)
    if matrix.scores[cell] <= 0:
        return None
    return (int(cell[0]), int(cell[1]))


def backtrack(matrix: AlignmentMatrix, cell: Cell) -> List[AlignedElement]:
    """Обратный проход от клетки до первой клетки с нулевой оценкой."""
    elements: List[AlignedElement] = []
    i, j = cell
    while matrix.scores[i, j] > 0:
        link = matrix.link_at((i, j))
        if link == Link.SPAN:
            span = matrix.chosen[(i, j)]
            ti, tj = span.terminal
            elements.append(AlignedElement(ti, span.x_length, tj, span.y_length, span.keys))
            i, j = ti, tj
        elif link == Link.GAP_X:
            j -= 1
        elif link == Link.GAP_Y:
            i -= 1
        elif link == Link.MISMATCH:
            i, j = i - 1, j - 1
        else:
            break
    elements.reverse()
    return elements


def align(x: AnnotationGrid, y: AnnotationGrid, cfg: Optional[ScoringConfig] = None) -> Alignment:
    """
    Локальное выравнивание двух сеток аннотаций.

    Args:
        x: Первая сетка
        y: Вторая сетка
        cfg: Параметры оценки

    Returns:
        Выравнивание с элементами общей последовательности; пустое, если
        ни одна клетка не получила положительной оценки
    """
    return align_with_matrix(x, y, cfg)[0]


def align_with_matrix(x: AnnotationGrid, y: AnnotationGrid,
                      cfg: Optional[ScoringConfig] = None) -> Tuple[Alignment, AlignmentMatrix]:
    """Выравнивание вместе с заполненной матрицей (для отладочного дампа)."""
    matrix = fill_matrix(x, y, cfg or ScoringConfig())
    cell = global_max(matrix)
    if cell is None:
        return Alignment(), matrix
    elements = backtrack(matrix, cell)
    return Alignment(elements=tuple(elements), score=float(matrix.scores[cell]), end_cell=cell), matrix


def grid_labels(grid: AnnotationGrid) -> List[str]:
    """Подписи позиций сетки: строка атома, если она есть, иначе первый ключ атома."""
    labels = []
    for index in range(grid.length):
        atoms = [e for e in grid.elements_at(index) if e.is_atom]
        label = ""
        for element in atoms:
            if element.key.feature == "string":
                label = element.key.value or ""
                break
        if not label and atoms:
            key = atoms[0].key
            label = key.value or key.to_text()
        labels.append(label or "?")
    return labels


def dump_matrix(matrix: AlignmentMatrix) -> str:
    """Текстовый дамп матрицы: строки оценок по позициям X и список переходов."""
    x_labels, y_labels = grid_labels(matrix.x), grid_labels(matrix.y)
    width = max([5] + [len(label) + 1 for label in y_labels])
    lines = [" " * 8 + "".join(label.rjust(width) for label in ["-"] + y_labels)]
    for i, row in enumerate(matrix.scores):
        head = "-" if i == 0 else x_labels[i - 1]
        lines.append(head[:7].ljust(8) + "".join(f"{score:g}".rjust(width) for score in row))

    lines.append("")
    lines.append("spans:")
    for origin in sorted(matrix.spans):
        for span in matrix.spans[origin]:
            marker = "*" if matrix.chosen.get(origin) is span else " "
            keys = "!".join(key.to_text() for key in span.keys)
            lines.append(f"{marker} {span.terminal} -> {span.origin} score={span.score:g} {keys}")
    return "\n".join(lines)
