"""
Оценка, отбор и фильтрация пар шаблонов на обучающих данных.
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import pandas as pd
from joblib import Parallel, delayed

from .pattern_engine import apply_pairs_to_document
from ..models.data_models import Corpus, Document, KeyDerivationPolicy, SpanKey
from ..models.patterns import PairStats, PatternTargetPair, serialize_pattern


logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.95
DEFAULT_MIN_SUPPORT = 3

PAIR_COLUMNS = ["pair_id", "label", "context", "target", "length",
                "applications", "true_positives", "precision"]


def _document_footprints(document: Document,
                         pairs: Sequence[PatternTargetPair],
                         key_policy: Optional[KeyDerivationPolicy],
                         exclude_types: Sequence[str]) -> Tuple[Dict[str, Set[SpanKey]], Dict[str, int]]:
    footprints: Dict[str, Set[SpanKey]] = defaultdict(set)
    atoms: Dict[str, int] = {}
    for result in apply_pairs_to_document(document, pairs, key_policy, 0, exclude_types):
        footprints[result.pair_id].add(result.span_key)
        atoms[result.pair_id] = min(result.context_atoms, atoms.get(result.pair_id, result.context_atoms))
    return dict(footprints), atoms


def score_pairs(pairs: Sequence[PatternTargetPair],
                training: Corpus,
                label_types: Iterable[str],
                key_policy: Optional[KeyDerivationPolicy] = None,
                label_context: bool = False,
                n_jobs: int = 1) -> List[PatternTargetPair]:
    """
    Оценивает пары одним проходом по обучающему корпусу.

    Результат применения считается верным, если его диапазон и тип в точности
    совпадают с эталонной аннотацией. Эталонные метки удаляются из сеток,
    если label_context выключен.

    Returns:
        Пары с заполненной статистикой, множеством извлеченных диапазонов
        и длиной контекста в атомах
    """
    label_types = tuple(label_types)
    gold = training.span_set(label_types)
    exclude_types = () if label_context else label_types

    batches = Parallel(n_jobs=n_jobs)(
        delayed(_document_footprints)(document, pairs, key_policy, exclude_types)
        for document in training
    )
    footprints: Dict[str, Set[SpanKey]] = defaultdict(set)
    context_atoms: Dict[str, int] = {}
    for batch_footprints, batch_atoms in batches:
        for pair_id, spans in batch_footprints.items():
            footprints[pair_id] |= spans
        for pair_id, atoms in batch_atoms.items():
            context_atoms[pair_id] = min(atoms, context_atoms.get(pair_id, atoms))

    scored = []
    for pair in pairs:
        footprint = footprints.get(pair.pair_id, set())
        stats = PairStats(applications=len(footprint), true_positives=len(footprint & gold))
        scored.append(pair.with_stats(stats, footprint, context_atoms.get(pair.pair_id)))

    evaluable = sum(1 for pair in scored if pair.stats.evaluable)
    logger.info("Оценено %d пар, применялись %d", len(scored), evaluable)
    return scored


def refine(pairs: Iterable[PatternTargetPair],
           threshold: float = DEFAULT_THRESHOLD,
           min_support: int = DEFAULT_MIN_SUPPORT) -> List[PatternTargetPair]:
    """
    Оставляет пары с точностью не ниже threshold и не менее min_support применениями.

    Пары без применений не оцениваются и не попадают в результат.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold должен быть в [0, 1], получено {threshold}")
    if min_support < 1:
        raise ValueError(f"min_support должен быть >= 1, получено {min_support}")
    return [
        pair for pair in pairs
        if pair.stats is not None
        and pair.stats.evaluable
        and pair.stats.applications >= min_support
        and pair.stats.precision >= threshold
    ]


def filter_subsumed(pairs: Sequence[PatternTargetPair]) -> List[PatternTargetPair]:
    """
    Удаляет пары, все извлечения которых покрыты строго более короткими парами.

    Пары просматриваются от длинных к коротким; длина пары равна числу
    атомов, занятых левым и правым контекстами на обучающих данных.
    """
    by_length: Dict[int, Set[SpanKey]] = defaultdict(set)
    for pair in pairs:
        by_length[pair.length] |= pair.footprint

    # объединение извлечений всех пар короче заданной длины
    shorter_union: Dict[int, Set[SpanKey]] = {}
    running: Set[SpanKey] = set()
    for length in sorted(by_length):
        shorter_union[length] = set(running)
        running |= by_length[length]

    removed = set()
    for pair in sorted(pairs, key=lambda p: (-p.length, p.pair_id)):
        if pair.footprint <= shorter_union[pair.length]:
            removed.add(pair.identity)

    kept = [pair for pair in pairs if pair.identity not in removed]
    logger.info("Фильтрация: %d из %d пар удалены как покрытые более короткими", len(removed), len(pairs))
    return kept


def extraction_footprint(pairs: Iterable[PatternTargetPair]) -> Set[SpanKey]:
    footprint: Set[SpanKey] = set()
    for pair in pairs:
        footprint |= pair.footprint
    return footprint


def pairs_frame(pairs: Iterable[PatternTargetPair]) -> pd.DataFrame:
    """Таблица пар со статистикой."""
    rows = [
        {
            "pair_id": pair.pair_id,
            "label": pair.label,
            "context": serialize_pattern(pair.context),
            "target": serialize_pattern(pair.target),
            "length": pair.length,
            "applications": pair.applications,
            "true_positives": pair.stats.true_positives if pair.stats else 0,
            "precision": pair.precision,
        }
        for pair in pairs
    ]
    return pd.DataFrame(rows, columns=PAIR_COLUMNS)


def threshold_sweep(pairs: Sequence[PatternTargetPair],
                    thresholds: Iterable[float],
                    min_support: int = DEFAULT_MIN_SUPPORT) -> pd.DataFrame:
    """Число сохраненных пар для каждого порога точности."""
    rows = [
        {"threshold": threshold, "retained": len(refine(pairs, threshold, min_support))}
        for threshold in thresholds
    ]
    return pd.DataFrame(rows, columns=["threshold", "retained"])
