"""
Априорные вероятности меток для токенов и правило распространения имен.

Вероятность P(метка | токен) оценивается по обучающему корпусу: доля
вхождений токена (в нижнем регистре), покрытых эталонной меткой.
"""

import logging
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import pandas as pd

from ..models.data_models import (
    SOURCE_FEATURE,
    SOURCE_PATTERN,
    SOURCE_PRIOR,
    SOURCE_PROPAGATION,
    Annotation,
    Corpus,
    Document,
)


logger = logging.getLogger(__name__)

PRIOR_COLUMNS = ["token", "label", "labeled", "total", "prior"]
NOUN_CATEGORIES = ("nn", "nnp", "nns", "nnps")

MODE_BOTH = "both"
MODE_LABEL = "label"
MODE_PRUNE = "prune"


class PriorTable:
    """Таблица априорных вероятностей (токен, метка) -> доля помеченных вхождений."""

    def __init__(self, frame: Optional[pd.DataFrame] = None):
        if frame is None:
            frame = pd.DataFrame(columns=PRIOR_COLUMNS)
        missing = set(PRIOR_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"В таблице априорных вероятностей нет колонок: {sorted(missing)}")
        self.frame = frame[PRIOR_COLUMNS].reset_index(drop=True)

        self._priors: Dict[Tuple[str, str], float] = {}
        self._totals: Dict[str, int] = {}
        for row in self.frame.itertuples(index=False):
            self._totals[row.token] = int(row.total)
            if row.label:
                self._priors[(row.token, row.label)] = float(row.prior)

    def __len__(self) -> int:
        return len(self._priors)

    def total(self, token: str) -> int:
        """Число вхождений токена в обучающем корпусе (0 для неизвестного)."""
        return self._totals.get(token.lower(), 0)

    def prior(self, token: str, label: str) -> Optional[float]:
        """Априорная вероятность метки; 0 для известного токена без метки, None для неизвестного."""
        token = token.lower()
        if token not in self._totals:
            return None
        return self._priors.get((token, label), 0.0)

    def labels_for(self, token: str) -> Dict[str, float]:
        token = token.lower()
        return {label: p for (t, label), p in self._priors.items() if t == token}

    def to_frame(self) -> pd.DataFrame:
        return self.frame.copy()


def _token_rows(document: Document, label_types: Set[str]) -> Tuple[List[dict], List[dict]]:
    tokens = [
        {"document_id": document.document_id, "index": i, "token": document.token_string(i).lower()}
        for i in range(document.atom_count)
    ]
    labels = [
        {"document_id": document.document_id, "index": i, "label": annotation.type}
        for annotation in document.annotations
        if annotation.type in label_types
        for i in range(annotation.start, annotation.end)
    ]
    return tokens, labels


def build_priors(training: Corpus, label_types: Iterable[str]) -> PriorTable:
    """Строит таблицу априорных вероятностей по эталонным меткам обучающего корпуса."""
    label_types = set(label_types)
    token_rows, label_rows = [], []
    for document in training:
        tokens, labels = _token_rows(document, label_types)
        token_rows.extend(tokens)
        label_rows.extend(labels)

    if not token_rows:
        return PriorTable()

    tokens = pd.DataFrame(token_rows)
    totals = tokens.groupby("token").size().rename("total").reset_index()

    if label_rows:
        labels = pd.DataFrame(label_rows).drop_duplicates()
        labeled = (
            labels.merge(tokens, on=["document_id", "index"])
            .groupby(["token", "label"]).size().rename("labeled").reset_index()
        )
    else:
        labeled = pd.DataFrame(columns=["token", "label", "labeled"])

    frame = totals.merge(labeled, on="token", how="left")
    frame["label"] = frame["label"].fillna("")
    frame["labeled"] = frame["labeled"].fillna(0).astype(int)
    frame["prior"] = frame["labeled"] / frame["total"]
    frame = frame.sort_values(["token", "label"]).reset_index(drop=True)

    logger.info("Априорные вероятности: %d токенов, %d пар (токен, метка)",
                len(totals), int((frame["label"] != "").sum()))
    return PriorTable(frame)


def _covered(document: Document, label_types: Set[str]) -> Set[int]:
    return {
        i for annotation in document.annotations if annotation.type in label_types
        for i in range(annotation.start, annotation.end)
    }


def _label_document(document: Document, table: PriorTable, hi: float,
                    label_types: Set[str], min_occurrences: int) -> Document:
    covered = _covered(document, label_types)
    chosen: Dict[int, str] = {}
    for i in range(document.atom_count):
        if i in covered:
            continue
        token = document.token_string(i)
        if table.total(token) < min_occurrences:
            continue
        candidates = [(p, label) for label, p in table.labels_for(token).items()
                      if label in label_types and p >= hi]
        if candidates:
            chosen[i] = max(candidates, key=lambda c: (c[0], c[1]))[1]

    added = []
    run_start, run_label = None, None
    for i in range(document.atom_count + 1):
        label = chosen.get(i)
        if run_label is not None and (label != run_label or i == document.atom_count):
            if document.sentence_of(run_start, i) is not None:
                added.append(Annotation(document.document_id, run_start, i, run_label,
                                        {SOURCE_FEATURE: SOURCE_PRIOR}))
            else:
                added.extend(Annotation(document.document_id, k, k + 1, run_label,
                                        {SOURCE_FEATURE: SOURCE_PRIOR}) for k in range(run_start, i))
            run_label = None
        if label is not None and run_label is None:
            run_start, run_label = i, label
    return document.with_annotations(added)


def _prune_document(document: Document, table: PriorTable, lo: float) -> Document:
    kept = []
    for annotation in document.annotations:
        if annotation.get(SOURCE_FEATURE) == SOURCE_PATTERN:
            priors = [table.prior(document.token_string(i), annotation.type)
                      for i in range(annotation.start, annotation.end)]
            if all(p is not None and p <= lo for p in priors):
                continue
        kept.append(annotation)
    if len(kept) == len(document.annotations):
        return document
    return document.replace_annotations(kept)


def apply_priors(corpus: Corpus,
                 table: PriorTable,
                 hi: float = 0.9,
                 lo: float = 0.1,
                 label_types: Iterable[str] = ("PER", "ORG", "LOC", "MISC"),
                 mode: str = MODE_BOTH,
                 min_occurrences: int = 2) -> Corpus:
    """
    Применяет априорные вероятности к корпусу.

    Args:
        corpus: Корпус
        table: Таблица априорных вероятностей
        hi: Токены без метки с вероятностью метки >= hi получают эту метку
        lo: Аннотации шаблонов, все токены которых имеют вероятность <= lo, удаляются
        label_types: Типы меток
        mode: both, label (только разметка) или prune (только удаление)
        min_occurrences: Минимальное число вхождений токена для разметки

    Returns:
        Новый корпус; эталонные аннотации не удаляются
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"Требуется 0 <= lo < hi <= 1, получено lo={lo}, hi={hi}")
    if mode not in (MODE_BOTH, MODE_LABEL, MODE_PRUNE):
        raise ValueError(f"mode должен быть both, label или prune, получено {mode}")
    label_types = set(label_types)

    if mode in (MODE_BOTH, MODE_LABEL):
        corpus = corpus.map(lambda d: _label_document(d, table, hi, label_types, min_occurrences))
    if mode in (MODE_BOTH, MODE_PRUNE):
        corpus = corpus.map(lambda d: _prune_document(d, table, lo))
    return corpus


def propagate_person_labels(document: Document,
                            person_type: str = "PER",
                            label_types: Sequence[str] = ("PER", "ORG", "LOC", "MISC"),
                            noun_categories: Sequence[str] = NOUN_CATEGORIES) -> Document:
    """
    Помечает существительные, совпадающие со словом внутри имени человека в том же документе.

    Токен должен иметь категорию существительного и не быть покрытым другой меткой.
    """
    persons = document.annotations_of_type(person_type)
    if not persons:
        return document
    names = {document.token_string(i) for a in persons for i in range(a.start, a.end)}
    names.discard("")
    covered = _covered(document, set(label_types) | {person_type})
    nouns = {c.lower() for c in noun_categories}

    added = [
        Annotation(document.document_id, i, i + 1, person_type, {SOURCE_FEATURE: SOURCE_PROPAGATION})
        for i in range(document.atom_count)
        if i not in covered
        and (document.atoms[i].get("category") or "").lower() in nouns
        and document.token_string(i) in names
    ]
    if added:
        logger.debug("Документ %s: %d токенов помечены как %s", document.document_id, len(added), person_type)
    return document.with_annotations(added)
