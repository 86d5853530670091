"""
Применение пар (контекстный шаблон, шаблон цели) к тексту.

Левый контекст ищется в сетке предложения, после него ищется ближайшее
вхождение правого контекста; фрагмент между ними проверяется шаблоном
цели. Применение повторяется по всему корпусу до неподвижной точки.
"""

import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from joblib import Parallel, delayed

from ..exceptions import AnnotationRangeError, FixpointError
from ..models.annotation_grid import AnnotationGrid, sentence_grids
from ..models.data_models import (
    SOURCE_FEATURE,
    SOURCE_PATTERN,
    Annotation,
    Corpus,
    Document,
    KeyDerivationPolicy,
    SpanKey,
)
from ..models.patterns import MatchResult, PatternElement, PatternTargetPair


logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 10


def match_ends(grid: AnnotationGrid, elements: Sequence[PatternElement], start: int) -> FrozenSet[int]:
    """
    Все позиции, в которых может закончиться совпадение последовательности элементов.

    На каждом шаге все ключи элемента должны начинаться в текущей позиции
    с общей длиной; пропуски не допускаются.
    """
    frontier: Set[int] = {start}
    for element in elements:
        following: Set[int] = set()
        for position in frontier:
            for length in grid.common_lengths(position, element.keys):
                following.add(position + length)
        if not following:
            return frozenset()
        frontier = following
    return frozenset(frontier)


def match_context_at(grid: AnnotationGrid, pattern: Sequence[PatternElement], start: int) -> Optional[int]:
    """
    Сопоставляет последовательность элементов шаблона с сеткой, начиная с позиции start.

    Returns:
        Ближайшая позиция конца совпадения или None
    """
    if not 0 <= start <= grid.length:
        raise AnnotationRangeError(f"Позиция {start} вне сетки длины {grid.length}")
    ends = match_ends(grid, pattern, start)
    return min(ends) if ends else None


def _match_positions(grid: AnnotationGrid, elements: Sequence[PatternElement]) -> Dict[int, FrozenSet[int]]:
    """Позиции начала, в которых последовательность совпадает, и соответствующие концы."""
    first = elements[0]
    positions = {}
    for start in range(grid.length):
        if not grid.common_lengths(start, first.keys):
            continue
        ends = match_ends(grid, elements, start)
        if ends:
            positions[start] = ends
    return positions


def _context_candidates(pair: PatternTargetPair, grid: AnnotationGrid) -> Dict[Tuple[int, int], int]:
    """
    Кандидаты контекстов пары и число атомов, занятых lc и rc.

    Маркеры :start/:end атомами не считаются; при нескольких вариантах
    совпадения берется самый короткий.
    """
    lc, rc = pair.context.lc, pair.context.rc
    low, high = grid.content_start, grid.content_end
    candidates: Dict[Tuple[int, int], int] = {}

    def add(candidate: Tuple[int, int], atoms: int):
        candidates[candidate] = min(atoms, candidates.get(candidate, atoms))

    rc_atoms: Dict[int, int] = {}
    if rc:
        for begin, ends in _match_positions(grid, rc).items():
            if low < begin <= high:
                rc_atoms[begin] = min(min(ends), high) - begin
    rc_starts = sorted(rc_atoms)

    if lc:
        lc_atoms: Dict[int, int] = {}
        for start, ends in _match_positions(grid, lc).items():
            for end in ends:
                atoms = end - max(start, low)
                lc_atoms[end] = min(atoms, lc_atoms.get(end, atoms))
        for end in sorted(lc_atoms):
            if not low <= end < high:
                continue
            if rc:
                index = bisect.bisect_right(rc_starts, end)
                if index < len(rc_starts):
                    begin = rc_starts[index]
                    add((end, begin), lc_atoms[end] + rc_atoms[begin])
            else:
                add((end, high), lc_atoms[end])
    else:
        for begin in rc_starts:
            add((low, begin), rc_atoms[begin])

    return candidates


def candidate_ranges(pair: PatternTargetPair, grid: AnnotationGrid) -> List[Tuple[int, int]]:
    """Диапазоны кандидатов (в позициях сетки), найденные контекстами пары."""
    return sorted(_context_candidates(pair, grid))


def apply_pair(pair: PatternTargetPair, grid: AnnotationGrid, iteration: int = 0) -> List[MatchResult]:
    """
    Применяет пару к сетке предложения.

    Кандидат принимается, если шаблон цели покрывает его целиком, от начала до конца.
    """
    if not pair.required_keys <= grid.key_set():
        return []

    results = []
    candidates = _context_candidates(pair, grid)
    for begin, end in sorted(candidates):
        if end not in match_ends(grid, pair.target.elements, begin):
            continue
        doc_start, doc_end = grid.to_document_range(begin, end)
        results.append(MatchResult(
            document_id=grid.document_id,
            start=doc_start,
            end=doc_end,
            label=pair.label,
            pair_id=pair.pair_id,
            iteration=iteration,
            context_atoms=candidates[(begin, end)],
        ))
    return results


def apply_pairs_to_document(document: Document,
                            pairs: Sequence[PatternTargetPair],
                            key_policy: Optional[KeyDerivationPolicy] = None,
                            iteration: int = 0,
                            exclude_types: Iterable[str] = ()) -> List[MatchResult]:
    """Применяет все пары ко всем предложениям документа (один проход)."""
    results = []
    for grid in sentence_grids(document, key_policy, exclude_types):
        keys = grid.key_set()
        for pair in pairs:
            if pair.required_keys <= keys:
                results.extend(apply_pair(pair, grid, iteration))
    return results


def apply_once(corpus: Corpus,
               pairs: Sequence[PatternTargetPair],
               key_policy: Optional[KeyDerivationPolicy] = None,
               iteration: int = 0,
               exclude_types: Iterable[str] = (),
               n_jobs: int = 1) -> List[MatchResult]:
    """Один проход всех пар по корпусу; документы обрабатываются независимо."""
    if not pairs or not len(corpus):
        return []
    exclude_types = tuple(exclude_types)
    batches = Parallel(n_jobs=n_jobs)(
        delayed(apply_pairs_to_document)(document, pairs, key_policy, iteration, exclude_types)
        for document in corpus
    )
    return sorted(
        (result for batch in batches for result in batch),
        key=lambda r: (r.document_id, r.start, r.end, r.label, r.pair_id),
    )


@dataclass
class FixpointReport:
    """Сводка итеративного применения."""

    iterations: int = 0
    added_per_iteration: List[int] = field(default_factory=list)
    results: List[MatchResult] = field(default_factory=list)

    @property
    def productive_iterations(self) -> int:
        return sum(1 for added in self.added_per_iteration if added)

    @property
    def total_added(self) -> int:
        return sum(self.added_per_iteration)


def results_to_annotations(results: Iterable[MatchResult], source: str = SOURCE_PATTERN) -> List[Annotation]:
    """Переводит результаты в аннотации; повторяющиеся (документ, диапазон, тип) отбрасываются."""
    seen: Set[SpanKey] = set()
    annotations = []
    for result in results:
        if result.span_key in seen:
            continue
        seen.add(result.span_key)
        annotations.append(Annotation(
            result.document_id, result.start, result.end, result.label,
            {SOURCE_FEATURE: source},
        ))
    return annotations


def run_to_fixpoint(pattern_sets: Sequence[Sequence[PatternTargetPair]],
                    corpus: Corpus,
                    key_policy: Optional[KeyDerivationPolicy] = None,
                    max_iterations: int = DEFAULT_MAX_ITERATIONS,
                    n_jobs: int = 1) -> Tuple[Corpus, FixpointReport]:
    """
    Применяет все наборы пар к корпусу, пока итерация не перестанет добавлять аннотации.

    Внутри итерации все пары применяются к снимку корпуса на начало итерации,
    после чего новые аннотации объединяются.

    Returns:
        Корпус с добавленными аннотациями и сводка итераций

    Raises:
        FixpointError: Итерации не сошлись за max_iterations
    """
    pairs = [pair for pattern_set in pattern_sets for pair in pattern_set]
    report = FixpointReport()

    while True:
        if report.iterations >= max_iterations:
            raise FixpointError(
                f"Применение шаблонов не сошлось за {max_iterations} итераций "
                f"(добавлено по итерациям: {report.added_per_iteration})"
            )
        report.iterations += 1
        iteration = report.iterations

        results = apply_once(corpus, pairs, key_policy, iteration, n_jobs=n_jobs)
        present = corpus.span_set()
        fresh = [r for r in results if r.span_key not in present]
        added = results_to_annotations(fresh)
        report.added_per_iteration.append(len(added))
        logger.debug("Итерация %d: %d совпадений, %d новых аннотаций", iteration, len(results), len(added))

        if not added:
            break
        new_keys = {a.span_key for a in added}
        report.results.extend(r for r in fresh if r.span_key in new_keys)
        corpus = corpus.with_annotations(added)

    logger.info(
        "Неподвижная точка достигнута за %d итераций, добавлено %d аннотаций",
        report.iterations, report.total_added,
    )
    return corpus, report


def merge_overlapping(corpus: Corpus, types: Iterable[str]) -> Corpus:
    """
    Объединяет пересекающиеся системные аннотации одного типа.

    Охватывающая аннотация поглощает вложенные, пересекающиеся объединяются
    в общий диапазон. Аннотации разных типов и эталонные аннотации не трогаются.
    """
    types = set(types)

    def merge_document(document: Document) -> Document:
        groups: Dict[str, List[Annotation]] = defaultdict(list)
        kept = []
        for annotation in document.annotations:
            if annotation.type in types and annotation.get(SOURCE_FEATURE):
                groups[annotation.type].append(annotation)
            else:
                kept.append(annotation)
        if not groups:
            return document

        for type_name in sorted(groups):
            ordered = sorted(groups[type_name], key=lambda a: (a.start, -a.end))
            current = ordered[0]
            for annotation in ordered[1:]:
                if annotation.start < current.end:
                    if annotation.end > current.end:
                        current = Annotation(current.document_id, current.start, annotation.end,
                                             current.type, current.features)
                else:
                    kept.append(current)
                    current = annotation
            kept.append(current)
        return document.replace_annotations(kept)

    return corpus.map(merge_document)
