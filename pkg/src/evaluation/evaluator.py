"""
Оценка извлечения на уровне сущностей и токенов.

На уровне сущностей верным считается только точное совпадение диапазона
и метки; сущность с лишними или недостающими токенами дает одновременно
ложное срабатывание и пропуск.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import multilabel_confusion_matrix, precision_recall_fscore_support

from ..models.data_models import SOURCE_FEATURE, Annotation, Corpus, SpanKey


logger = logging.getLogger(__name__)

DEFAULT_LABELS = ("PER", "ORG", "LOC", "MISC")
OUTSIDE = "O"
MICRO = "ALL"

LEVEL_ENTITY = "entity"
LEVEL_TOKEN = "token"

REPORT_COLUMNS = ["stage", "level", "label", "tp", "fp", "fn", "precision", "recall", "f1"]

# эталонные значения F1 на уровне сущностей для полного корпуса CoNLL-2003 (testb)
REFERENCE_ENTITY_F1 = {"PER": 0.914, "ORG": 0.802, "LOC": 0.872}
REFERENCE_TOLERANCE = 0.05

DEFAULT_LOOKUP_LABELS = {
    "person_first": "PER",
    "person_full": "PER",
    "organization": "ORG",
    "location": "LOC",
}


def prf(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    """Точность, полнота и F1; F1 = 0 при P + R = 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def entity_counts(system: Set[SpanKey], gold: Set[SpanKey], labels: Sequence[str]) -> Dict[str, Tuple[int, int, int]]:
    """(tp, fp, fn) по меткам при точном совпадении диапазона и метки."""
    counts = {}
    for label in labels:
        sys_spans = {s for s in system if s[3] == label}
        gold_spans = {g for g in gold if g[3] == label}
        tp = len(sys_spans & gold_spans)
        counts[label] = (tp, len(sys_spans) - tp, len(gold_spans) - tp)
    return counts


def token_labels(corpus: Corpus, labels: Sequence[str]) -> List[str]:
    """Метка каждого токена корпуса (первая по порядку labels) или O."""
    priority = {label: rank for rank, label in enumerate(labels)}
    tags: List[str] = []
    for document in corpus:
        doc_tags = [OUTSIDE] * document.atom_count
        for annotation in sorted(
            (a for a in document.annotations if a.type in priority),
            key=lambda a: -priority[a.type],
        ):
            for i in range(annotation.start, annotation.end):
                doc_tags[i] = annotation.type
        tags.extend(doc_tags)
    return tags


def _rows(stage: str, level: str, counts: Mapping[str, Tuple[int, int, int]]) -> List[dict]:
    rows = []
    totals = np.zeros(3, dtype=int)
    for label, (tp, fp, fn) in counts.items():
        precision, recall, f1 = prf(tp, fp, fn)
        rows.append(dict(stage=stage, level=level, label=label, tp=tp, fp=fp, fn=fn,
                         precision=precision, recall=recall, f1=f1))
        totals += (tp, fp, fn)
    tp, fp, fn = (int(v) for v in totals)
    precision, recall, f1 = prf(tp, fp, fn)
    rows.append(dict(stage=stage, level=level, label=MICRO, tp=tp, fp=fp, fn=fn,
                     precision=precision, recall=recall, f1=f1))
    return rows


@dataclass
class EvalReport:
    """Отчет оценки: таблица по этапам, уровням и меткам."""

    frame: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=REPORT_COLUMNS))

    @property
    def stages(self) -> List[str]:
        return list(dict.fromkeys(self.frame["stage"]))

    def row(self, label: str, level: str = LEVEL_ENTITY, stage: str = "full") -> Dict[str, object]:
        selected = self.frame[
            (self.frame["stage"] == stage) & (self.frame["level"] == level) & (self.frame["label"] == label)
        ]
        if selected.empty:
            raise KeyError(f"Нет строки отчета: stage={stage}, level={level}, label={label}")
        return selected.iloc[0].to_dict()

    def entity_f1(self, label: str, stage: str = "full") -> float:
        return float(self.row(label, LEVEL_ENTITY, stage)["f1"])

    def merge(self, other: "EvalReport") -> "EvalReport":
        return EvalReport(pd.concat([self.frame, other.frame], ignore_index=True))

    def to_records(self) -> str:
        """Машиночитаемые строки TSV."""
        return self.frame.to_csv(sep="\t", index=False, float_format="%.4f")

    def write_records(self, path: Union[str, Path]):
        self.frame.to_csv(path, sep="\t", index=False, float_format="%.4f")

    def format_table(self) -> str:
        """Таблица для человека: по строке на (этап, уровень, метку)."""
        lines = [
            f"{'stage':<10}{'level':<8}{'label':<6}{'P':>8}{'R':>8}{'F1':>8}{'TP':>7}{'FP':>7}{'FN':>7}",
            "-" * 69,
        ]
        for row in self.frame.itertuples(index=False):
            lines.append(
                f"{row.stage:<10}{row.level:<8}{row.label:<6}"
                f"{row.precision:>8.3f}{row.recall:>8.3f}{row.f1:>8.3f}"
                f"{row.tp:>7}{row.fp:>7}{row.fn:>7}"
            )
        return "\n".join(lines)


def evaluate(system: Corpus,
             gold: Corpus,
             labels: Sequence[str] = DEFAULT_LABELS,
             stage: str = "full") -> EvalReport:
    """
    Сравнивает системные аннотации с эталонными.

    Args:
        system: Корпус с системными аннотациями меток
        gold: Корпус с эталонными аннотациями над теми же документами
        labels: Оцениваемые метки
        stage: Название этапа конвейера для отчета

    Returns:
        Отчет с метриками на уровне сущностей и токенов
    """
    labels = list(labels)
    system_ids = [d.document_id for d in system]
    gold_ids = [d.document_id for d in gold]
    if system_ids != gold_ids:
        raise ValueError("Системный и эталонный корпуса должны содержать одни и те же документы")

    rows = _rows(stage, LEVEL_ENTITY, entity_counts(system.span_set(labels), gold.span_set(labels), labels))

    y_true = token_labels(gold, labels)
    y_pred = token_labels(system, labels)
    token_counts: Dict[str, Tuple[int, int, int]] = {}
    if y_true:
        matrices = multilabel_confusion_matrix(y_true, y_pred, labels=labels)
        for label, matrix in zip(labels, matrices):
            token_counts[label] = (int(matrix[1, 1]), int(matrix[0, 1]), int(matrix[1, 0]))
    else:
        token_counts = {label: (0, 0, 0) for label in labels}
    token_rows = _rows(stage, LEVEL_TOKEN, token_counts)

    if y_true:
        precision, recall, f1, _ = precision_recall_fscore_support(
            y_true, y_pred, labels=labels, average=None, zero_division=0
        )
        for row, p, r, f in zip(token_rows, precision, recall, f1):
            row.update(precision=float(p), recall=float(r), f1=float(f))

    return EvalReport(pd.DataFrame(rows + token_rows, columns=REPORT_COLUMNS))


def evaluate_stages(stages: Mapping[str, Corpus], gold: Corpus, labels: Sequence[str] = DEFAULT_LABELS) -> EvalReport:
    """Оценивает несколько вариантов вывода (например, только шаблоны и полный конвейер)."""
    report = EvalReport()
    for stage, system in stages.items():
        part = evaluate(system, gold, labels, stage)
        report = part if report.frame.empty else report.merge(part)
    return report


def compare_with_reference(report: EvalReport,
                           reference: Mapping[str, float] = REFERENCE_ENTITY_F1,
                           tolerance: float = REFERENCE_TOLERANCE,
                           stage: str = "full") -> pd.DataFrame:
    """Сравнивает F1 на уровне сущностей с эталонными значениями и помечает отклонения."""
    rows = []
    for label, expected in reference.items():
        f1 = report.entity_f1(label, stage)
        rows.append({
            "label": label,
            "f1": f1,
            "reference": expected,
            "delta": f1 - expected,
            "flagged": abs(f1 - expected) > tolerance,
        })
    return pd.DataFrame(rows, columns=["label", "f1", "reference", "delta", "flagged"])


def lookup_baseline(corpus: Corpus,
                    label_map: Mapping[str, str] = DEFAULT_LOOKUP_LABELS,
                    label_types: Iterable[str] = DEFAULT_LABELS) -> Corpus:
    """
    Разметка только по словарным аннотациям Lookup: majorType переводится в метку.

    Эталонные метки удаляются, совпадающие диапазоны одной метки не дублируются.
    """
    label_types = set(label_types)

    def relabel(document):
        stripped = document.without_types(label_types)
        added = []
        for annotation in document.annotations_of_type("Lookup"):
            label = label_map.get((annotation.get("majorType") or "").lower())
            if label:
                added.append(Annotation(document.document_id, annotation.start, annotation.end,
                                        label, {SOURCE_FEATURE: "lookup"}))
        return stripped.with_annotations(added)

    return corpus.map(relabel)
