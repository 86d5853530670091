"""
Генерация шаблонов попарным выравниванием.

Контекстные шаблоны получаются из выравнивания общих контекстов целей
(по умолчанию предложений), шаблоны цели из выравнивания сеток, покрытых
самими целями.
"""

import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from .grid_aligner import Alignment, ScoringConfig, align
from .pattern_engine import match_ends
from ..models.annotation_grid import AnnotationGrid, build_grid
from ..models.data_models import (
    TARGET_KEY,
    Annotation,
    Corpus,
    KeyDerivationPolicy,
    SpanKey,
)
from ..models.patterns import ContextPattern, PatternElement, PatternTargetPair, TargetPattern


logger = logging.getLogger(__name__)

WINDOW_SENTENCE = "SENTENCE"
WINDOW_TOKENS = "TOKENS"

DEFAULT_MAX_PAIRS = 10 ** 6
DEFAULT_SEED = 13


@dataclass(frozen=True)
class GeneralContext:
    """Общий контекст цели: диапазон атомов, его сетка и сама цель."""

    document_id: str
    atom_range: Tuple[int, int]
    grid: AnnotationGrid
    target: Annotation

    @property
    def target_position(self) -> Tuple[int, int]:
        """Положение цели в позициях сетки."""
        return (self.grid.from_document_index(self.target.start),
                self.grid.from_document_index(self.target.end))


@dataclass
class GenerationDiagnostics:
    skipped_cross_sentence: int = 0
    aligned_pairs: int = 0
    empty_alignments: int = 0
    discarded_vacuous: int = 0


@dataclass(frozen=True)
class TargetGrid:
    """Сетка, покрытая одной целью (без самой цели)."""

    grid: AnnotationGrid
    target: Annotation


@dataclass
class _Group:
    """Контексты с одинаковым содержимым сетки."""

    grid: AnnotationGrid
    sources: List[SpanKey] = field(default_factory=list)


def extract_general_contexts(corpus: Corpus,
                             target_type: str,
                             window: str = WINDOW_SENTENCE,
                             window_size: int = 5,
                             key_policy: Optional[KeyDerivationPolicy] = None,
                             label_types: Iterable[str] = (),
                             label_context: bool = False,
                             diagnostics: Optional[GenerationDiagnostics] = None) -> List[GeneralContext]:
    """
    Строит общий контекст для каждой цели типа target_type.

    Args:
        corpus: Корпус с эталонными аннотациями целей
        target_type: Тип целевых аннотаций (метка)
        window: SENTENCE (предложение) или TOKENS (окно из window_size атомов с каждой стороны)
        window_size: Размер окна для режима TOKENS
        key_policy: Политика получения ключей
        label_types: Типы эталонных меток; удаляются из контекста, если label_context выключен
        label_context: Оставлять в контексте другие эталонные метки
        diagnostics: Счетчики пропущенных целей

    Returns:
        Список контекстов; цели, пересекающие границу предложения, пропускаются
    """
    if window not in (WINDOW_SENTENCE, WINDOW_TOKENS):
        raise ValueError(f"window должен быть SENTENCE или TOKENS, получено {window}")
    diagnostics = diagnostics or GenerationDiagnostics()
    excluded = set() if label_context else set(label_types) - {target_type}

    contexts = []
    for document in corpus:
        for target in document.annotations_of_type(target_type):
            sentence = document.sentence_of(target.start, target.end)
            if sentence is None:
                diagnostics.skipped_cross_sentence += 1
                continue
            if window == WINDOW_SENTENCE:
                atom_range = sentence
            else:
                atom_range = (max(0, target.start - window_size),
                              min(document.atom_count, target.end + window_size))
            starts = {s for s, _ in document.sentence_boundaries}
            ends = {e for _, e in document.sentence_boundaries}

            overrides = {}
            if not label_context:
                # остальные цели того же типа в контексте не видны
                overrides = {
                    a.span_key: () for a in document.annotations_of_type(target_type) if a != target
                }
            overrides[target.span_key] = (TARGET_KEY,)
            grid = build_grid(
                document, atom_range, key_policy,
                mark_start=atom_range[0] in starts,
                mark_end=atom_range[1] in ends,
                exclude_types=excluded,
                overrides=overrides,
            )
            contexts.append(GeneralContext(document.document_id, atom_range, grid, target))

    if diagnostics.skipped_cross_sentence:
        logger.warning("Пропущено %d целей %s, пересекающих границу предложения",
                       diagnostics.skipped_cross_sentence, target_type)
    return contexts


def split_at_target(alignment: Alignment,
                    join_bilateral_gaps: bool = True) -> Optional[Tuple[Tuple[PatternElement, ...], Tuple[PatternElement, ...]]]:
    """
    Делит выровненную последовательность на левый и правый контексты.

    Пропуск, затронувший обе сетки, не разрывает контекст (сами пропущенные
    атомы в шаблон не попадают). На одностороннем пропуске последовательность
    режется и сохраняется фрагмент, примыкающий к цели; с
    join_bilateral_gaps=False режется на каждом пропуске.

    Returns:
        (lc, rc) или None, если цель не попала в выравнивание
    """
    elements = alignment.elements
    target_index = next(
        (index for index, element in enumerate(elements) if TARGET_KEY in element.keys), None
    )
    if target_index is None:
        return None

    def breaks(index: int) -> bool:
        skipped_x, skipped_y = alignment.skipped(index)
        if not skipped_x and not skipped_y:
            return False
        return not (join_bilateral_gaps and skipped_x and skipped_y)

    left = target_index
    while left > 0 and not breaks(left - 1):
        left -= 1
    right = target_index
    while right < len(elements) - 1 and not breaks(right):
        right += 1

    lc = tuple(PatternElement(e.keys) for e in elements[left:target_index])
    rc = tuple(PatternElement(e.keys) for e in elements[target_index + 1:right + 1])
    return lc, rc


def split_at_gaps(alignment: Alignment) -> List[Tuple[PatternElement, ...]]:
    """Фрагменты выравнивания без пропусков."""
    fragments: List[List[PatternElement]] = []
    for index, element in enumerate(alignment.elements):
        if index == 0 or alignment.has_gap(index - 1):
            fragments.append([])
        fragments[-1].append(PatternElement(element.keys))
    return [tuple(fragment) for fragment in fragments]


def _group_grids(items: Sequence[Tuple[AnnotationGrid, SpanKey]]) -> List[_Group]:
    groups: Dict[Tuple, _Group] = {}
    for grid, source in items:
        signature = grid.signature()
        if signature not in groups:
            groups[signature] = _Group(grid)
        groups[signature].sources.append(source)
    return list(groups.values())


def _pair_indices(groups: Sequence[_Group], max_pairs: int, seed: int) -> List[Tuple[int, int]]:
    """
    Пары групп для выравнивания. Группа из нескольких одинаковых сеток
    выравнивается сама с собой.
    """
    repeated = [(index, index) for index, group in enumerate(groups) if len(group.sources) > 1]
    return repeated + _distinct_pairs(len(groups), max_pairs, seed)


def _distinct_pairs(count: int, max_pairs: int, seed: int) -> List[Tuple[int, int]]:
    total = count * (count - 1) // 2
    if total <= max_pairs:
        return list(itertools.combinations(range(count), 2))
    logger.info("Пар %d больше предела %d, выбирается случайная выборка", total, max_pairs)
    rng = random.Random(seed)
    sampled = set()
    while len(sampled) < max_pairs:
        a, b = rng.sample(range(count), 2)
        sampled.add((min(a, b), max(a, b)))
    return sorted(sampled)


def _context_job(x: AnnotationGrid, y: AnnotationGrid, cfg: ScoringConfig, join_bilateral_gaps: bool):
    alignment = align(x, y, cfg)
    if not alignment:
        return None
    return split_at_target(alignment, join_bilateral_gaps)


def generate_context_patterns(contexts: Sequence[GeneralContext],
                              cfg: Optional[ScoringConfig] = None,
                              label: Optional[str] = None,
                              max_pairs: int = DEFAULT_MAX_PAIRS,
                              seed: int = DEFAULT_SEED,
                              join_bilateral_gaps: bool = True,
                              n_jobs: int = 1,
                              diagnostics: Optional[GenerationDiagnostics] = None) -> List[ContextPattern]:
    """
    Попарно выравнивает общие контексты и возвращает контекстные шаблоны.

    Контексты с одинаковым содержимым сетки объединяются в группу; группа
    из двух и более контекстов выравнивается сама с собой. Шаблоны
    дедуплицируются по канонической сериализации; у каждого шаблона
    накапливаются цели, из контекстов которых он получен.
    """
    cfg = cfg or ScoringConfig()
    diagnostics = diagnostics or GenerationDiagnostics()
    if label is None:
        label = contexts[0].target.type if contexts else ""

    groups = _group_grids([(c.grid, c.target.span_key) for c in contexts])
    indices = _pair_indices(groups, max_pairs, seed)
    if not indices:
        return []
    outputs = Parallel(n_jobs=n_jobs)(
        delayed(_context_job)(groups[a].grid, groups[b].grid, cfg, join_bilateral_gaps)
        for a, b in indices
    )
    diagnostics.aligned_pairs += len(indices)

    patterns: Dict[ContextPattern, ContextPattern] = {}
    for (a, b), output in zip(indices, outputs):
        if output is None:
            diagnostics.empty_alignments += 1
            continue
        lc, rc = output
        if not lc and not rc:
            diagnostics.empty_alignments += 1
            continue
        pattern = ContextPattern(lc, rc, label, frozenset(groups[a].sources) | frozenset(groups[b].sources))
        if pattern.is_vacuous:
            diagnostics.discarded_vacuous += 1
            continue
        if pattern in patterns:
            patterns[pattern] = patterns[pattern].with_sources(pattern.sources)
        else:
            patterns[pattern] = pattern

    logger.info("Метка %s: %d контекстов, %d выравниваний, %d контекстных шаблонов",
                label, len(contexts), len(indices), len(patterns))
    return sorted(patterns.values(), key=lambda p: p.canonical)


def target_grids(corpus: Corpus,
                 target_type: str,
                 key_policy: Optional[KeyDerivationPolicy] = None,
                 label_types: Iterable[str] = ()) -> List[TargetGrid]:
    """Сетки, покрытые целями типа target_type; эталонные метки в них не попадают."""
    excluded = set(label_types) | {target_type}
    return [
        TargetGrid(build_grid(document, (target.start, target.end), key_policy,
                              exclude_types=excluded), target)
        for document in corpus
        for target in document.annotations_of_type(target_type)
    ]


def _target_job(x: AnnotationGrid, y: AnnotationGrid, cfg: ScoringConfig):
    alignment = align(x, y, cfg)
    if not alignment:
        return []
    return split_at_gaps(alignment)


def matching_targets(pattern_elements: Sequence[PatternElement], targets: Sequence[TargetGrid]) -> FrozenSet[SpanKey]:
    """Цели, которые последовательность элементов покрывает целиком."""
    return frozenset(
        t.target.span_key for t in targets
        if t.grid.length in match_ends(t.grid, pattern_elements, 0)
    )


def whole_target_keys(target: TargetGrid) -> List[PatternElement]:
    """Ключи неатомарных аннотаций, в точности покрывающих цель."""
    grid = target.grid
    if not grid.length:
        return []
    return [
        PatternElement.of(element.key)
        for element in grid.elements_at(0)
        if not element.is_atom and element.length == grid.length
    ]


def generate_target_patterns(targets: Sequence[TargetGrid],
                             cfg: Optional[ScoringConfig] = None,
                             label: Optional[str] = None,
                             max_pairs: int = DEFAULT_MAX_PAIRS,
                             seed: int = DEFAULT_SEED,
                             n_jobs: int = 1) -> List[TargetPattern]:
    """
    Попарно выравнивает сетки целей и возвращает шаблоны цели.

    Фрагмент выравнивания становится шаблоном, только если он целиком
    покрывает хотя бы одну цель. Дополнительно выдаются одноключевые шаблоны
    для аннотаций, в точности покрывающих цель.
    """
    cfg = cfg or ScoringConfig()
    if label is None:
        label = targets[0].target.type if targets else ""

    candidates: Dict[Tuple[PatternElement, ...], None] = {}
    for target in targets:
        for element in whole_target_keys(target):
            candidates.setdefault((element,), None)

    groups = _group_grids([(t.grid, t.target.span_key) for t in targets])
    indices = _pair_indices(groups, max_pairs, seed)
    if indices:
        outputs = Parallel(n_jobs=n_jobs)(
            delayed(_target_job)(groups[a].grid, groups[b].grid, cfg) for a, b in indices
        )
        for fragments in outputs:
            for fragment in fragments:
                candidates.setdefault(fragment, None)

    patterns = []
    for elements in candidates:
        sources = matching_targets(elements, targets)
        if sources:
            patterns.append(TargetPattern(elements, label, sources))

    logger.info("Метка %s: %d целей, %d шаблонов цели", label, len(targets), len(patterns))
    return sorted(patterns, key=lambda p: p.canonical)


def form_pairs(context_patterns: Sequence[ContextPattern],
               target_patterns: Sequence[TargetPattern],
               label: str) -> List[PatternTargetPair]:
    """
    Составляет пары: шаблон цели сочетается с контекстным шаблоном, если он
    покрывает хотя бы одну из целей, породивших контекстный шаблон.
    """
    by_source: Dict[SpanKey, List[TargetPattern]] = {}
    for target_pattern in target_patterns:
        for source in target_pattern.sources:
            by_source.setdefault(source, []).append(target_pattern)

    pairs: Dict[PatternTargetPair, None] = {}
    for context in context_patterns:
        for source in sorted(context.sources):
            for target_pattern in by_source.get(source, ()):
                pairs.setdefault(PatternTargetPair(context, target_pattern, label), None)
    return list(pairs)
