"""
Система извлечения именованных сущностей по шаблонам.

Связывает генерацию пар шаблонов, их оценку и отбор на обучающем корпусе,
применение до неподвижной точки, априорные вероятности меток и оценку.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from .algorithms.grid_aligner import ScoringConfig
from .algorithms.pattern_engine import FixpointReport, merge_overlapping, run_to_fixpoint
from .algorithms.pattern_generator import (
    WINDOW_SENTENCE,
    GenerationDiagnostics,
    extract_general_contexts,
    form_pairs,
    generate_context_patterns,
    generate_target_patterns,
    target_grids,
)
from .algorithms.pattern_refiner import filter_subsumed, pairs_frame, refine, score_pairs
from .algorithms.priors import MODE_LABEL, MODE_PRUNE, PriorTable, apply_priors, build_priors, propagate_person_labels
from .data.corpus_io import (
    priors_path_for,
    read_pattern_file,
    read_priors,
    stats_path_for,
    write_pattern_file,
    write_priors,
    write_stats_file,
)
from .evaluation.evaluator import EvalReport, evaluate_stages, lookup_baseline
from .models.data_models import SOURCE_FEATURE, SOURCE_PRIOR, Corpus, KeyDerivationPolicy
from .models.patterns import PatternTargetPair


logger = logging.getLogger(__name__)

STAGE_PATTERNS = "patterns"
STAGE_FULL = "full"
STAGE_LOOKUP = "lookup"

PERSON_LABEL = "PER"


@dataclass
class LabelSummary:
    """Счетчики обучения для одной метки."""

    targets: int = 0
    contexts: int = 0
    context_patterns: int = 0
    target_patterns: int = 0
    pairs: int = 0
    refined: int = 0
    kept: int = 0


@dataclass
class TrainingSummary:
    labels: Dict[str, LabelSummary] = field(default_factory=OrderedDict)
    diagnostics: GenerationDiagnostics = field(default_factory=GenerationDiagnostics)

    @property
    def kept(self) -> int:
        return sum(s.kept for s in self.labels.values())


@dataclass
class ApplyResult:
    """Результат применения: полный конвейер, только шаблоны и сводка итераций."""

    corpus: Corpus
    pattern_only: Corpus
    report: FixpointReport


class ExtractionSystem:
    """
    Система извлечения по парам (контекстный шаблон, шаблон цели).

    Обучение: генерация пар для каждой метки, оценка на обучающем корпусе,
    отбор по точности и удаление пар, покрытых более короткими.
    Применение: удаление эталонных меток, разметка по высоким априорным
    вероятностям, шаблоны до неподвижной точки, удаление по низким
    вероятностям, распространение имен и объединение пересечений.
    """

    def __init__(self,
                 labels: Sequence[str] = ("PER", "ORG", "LOC", "MISC"),
                 scoring: Optional[ScoringConfig] = None,
                 key_policy: Optional[KeyDerivationPolicy] = None,
                 window: str = WINDOW_SENTENCE,
                 window_size: int = 5,
                 max_pairs: int = 10 ** 6,
                 seed: int = 13,
                 join_bilateral_gaps: bool = True,
                 label_context: bool = False,
                 n_jobs: int = 1,
                 max_iterations: int = 10,
                 threshold: float = 0.95,
                 min_support: int = 3,
                 use_filter: bool = True,
                 use_priors: bool = True,
                 prior_hi: float = 0.9,
                 prior_lo: float = 0.1,
                 min_occurrences: int = 2,
                 propagate_persons: bool = True,
                 merge: bool = True):
        """
        Инициализация системы.

        Args:
            labels: Типы меток (типы эталонных аннотаций)
            scoring: Параметры оценки выравнивания
            key_policy: Политика получения ключей
            window: Общий контекст: SENTENCE или TOKENS
            window_size: Размер окна для режима TOKENS
            max_pairs: Предел числа выравниваемых пар
            seed: Семя выборки пар
            join_bilateral_gaps: Не разрывать фрагмент на двусторонних пропусках
            label_context: Оставлять эталонные метки в контекстах
            n_jobs: Число параллельных заданий joblib
            max_iterations: Предел итераций применения
            threshold: Минимальная точность пары
            min_support: Минимальное число применений пары
            use_filter: Удалять пары, покрытые более короткими
            use_priors: Использовать априорные вероятности
            prior_hi: Порог разметки по априорной вероятности
            prior_lo: Порог удаления аннотаций шаблонов
            min_occurrences: Минимальная частота токена для разметки
            propagate_persons: Распространять метку PER на совпадающие существительные
            merge: Объединять пересекающиеся аннотации одного типа
        """
        self.labels = tuple(labels)
        self.scoring = scoring or ScoringConfig()
        self.key_policy = key_policy or KeyDerivationPolicy.default()
        self.window = window
        self.window_size = window_size
        self.max_pairs = max_pairs
        self.seed = seed
        self.join_bilateral_gaps = join_bilateral_gaps
        self.label_context = label_context
        self.n_jobs = n_jobs
        self.max_iterations = max_iterations
        self.threshold = threshold
        self.min_support = min_support
        self.use_filter = use_filter
        self.use_priors = use_priors
        self.prior_hi = prior_hi
        self.prior_lo = prior_lo
        self.min_occurrences = min_occurrences
        self.propagate_persons = propagate_persons
        self.merge = merge

        self.pairs: List[PatternTargetPair] = []
        self.priors: Optional[PriorTable] = None
        self.summary: Optional[TrainingSummary] = None
        self.is_trained = False

    @classmethod
    def from_config(cls, cfg) -> 'ExtractionSystem':
        """Создает систему по SystemConfig."""
        return cls(
            labels=cfg.data.labels,
            scoring=cfg.alignment.to_scoring(),
            key_policy=cfg.keys.to_policy(),
            window=cfg.generation.window,
            window_size=cfg.generation.window_size,
            max_pairs=cfg.generation.max_pairs,
            seed=cfg.generation.seed,
            join_bilateral_gaps=cfg.generation.join_bilateral_gaps,
            label_context=cfg.generation.label_context,
            n_jobs=cfg.generation.n_jobs,
            max_iterations=cfg.engine.max_iterations,
            threshold=cfg.refine.threshold,
            min_support=cfg.refine.min_support,
            use_filter=cfg.refine.filter_subsumed,
            use_priors=cfg.priors.enabled,
            prior_hi=cfg.priors.hi,
            prior_lo=cfg.priors.lo,
            min_occurrences=cfg.priors.min_occurrences,
            propagate_persons=cfg.priors.propagate_persons,
            merge=cfg.engine.merge_overlapping,
        )

    def generate_pairs(self, training: Corpus, summary: Optional[TrainingSummary] = None) -> List[PatternTargetPair]:
        """Генерирует пары шаблонов для всех меток (без оценки)."""
        summary = summary or TrainingSummary()
        pairs: List[PatternTargetPair] = []
        for label in self.labels:
            stats = summary.labels.setdefault(label, LabelSummary())
            contexts = extract_general_contexts(
                training, label, self.window, self.window_size, self.key_policy,
                label_types=self.labels, label_context=self.label_context,
                diagnostics=summary.diagnostics,
            )
            context_patterns = generate_context_patterns(
                contexts, self.scoring, label, self.max_pairs, self.seed,
                self.join_bilateral_gaps, self.n_jobs, summary.diagnostics,
            )
            targets = target_grids(training, label, self.key_policy, self.labels)
            target_patterns = generate_target_patterns(
                targets, self.scoring, label, self.max_pairs, self.seed, self.n_jobs,
            )
            label_pairs = form_pairs(context_patterns, target_patterns, label)

            stats.targets = len(targets)
            stats.contexts = len(contexts)
            stats.context_patterns = len(context_patterns)
            stats.target_patterns = len(target_patterns)
            stats.pairs = len(label_pairs)
            print(f"  - {label}: целей {len(targets)}, контекстных шаблонов {len(context_patterns)}, "
                  f"шаблонов цели {len(target_patterns)}, пар {len(label_pairs)}")
            pairs.extend(label_pairs)
        return pairs

    def train(self, training: Corpus) -> TrainingSummary:
        """
        Обучает систему на корпусе с эталонными метками.

        Returns:
            Сводка по меткам
        """
        print("🎯 Генерация пар шаблонов...")
        summary = TrainingSummary()
        candidates = self.generate_pairs(training, summary)

        print("📏 Оценка пар на обучающем корпусе...")
        scored = score_pairs(candidates, training, self.labels, self.key_policy,
                             self.label_context, self.n_jobs)
        refined = refine(scored, self.threshold, self.min_support)
        kept = filter_subsumed(refined) if self.use_filter else refined

        for label, stats in summary.labels.items():
            stats.refined = sum(1 for p in refined if p.label == label)
            stats.kept = sum(1 for p in kept if p.label == label)

        self.pairs = kept
        self.priors = build_priors(training, self.labels) if self.use_priors else None
        self.summary = summary
        self.is_trained = True

        print(f"✅ Обучение завершено: {len(candidates)} пар, после отбора {len(refined)}, "
              f"после фильтрации {len(kept)}")
        return summary

    def pattern_sets(self) -> List[List[PatternTargetPair]]:
        """Пары, сгруппированные по метке."""
        groups: Dict[str, List[PatternTargetPair]] = OrderedDict((label, []) for label in self.labels)
        for pair in self.pairs:
            groups.setdefault(pair.label, []).append(pair)
        return [group for group in groups.values() if group]

    def apply(self, corpus: Corpus) -> ApplyResult:
        """
        Размечает корпус; эталонные метки во входе игнорируются.

        Raises:
            ValueError: Система не обучена и не загружена
            FixpointError: Применение не сошлось за max_iterations итераций
        """
        if not self.is_trained:
            raise ValueError("Шаблоны не загружены. Вызовите train() или load() сначала.")

        working = corpus.without_types(self.labels)
        use_priors = self.use_priors and self.priors is not None
        if use_priors:
            working = apply_priors(working, self.priors, self.prior_hi, self.prior_lo, self.labels,
                                   MODE_LABEL, self.min_occurrences)

        annotated, report = run_to_fixpoint(self.pattern_sets(), working, self.key_policy,
                                            self.max_iterations, self.n_jobs)

        pattern_only = annotated.map(
            lambda d: d.replace_annotations(
                [a for a in d.annotations if a.get(SOURCE_FEATURE) != SOURCE_PRIOR]
            )
        )

        full = annotated
        if use_priors:
            full = apply_priors(full, self.priors, self.prior_hi, self.prior_lo, self.labels,
                                MODE_PRUNE, self.min_occurrences)
        if self.propagate_persons and PERSON_LABEL in self.labels:
            full = full.map(lambda d: propagate_person_labels(d, PERSON_LABEL, self.labels))
        if self.merge:
            full = merge_overlapping(full, self.labels)
            pattern_only = merge_overlapping(pattern_only, self.labels)

        return ApplyResult(full, pattern_only, report)

    def evaluate(self, gold: Corpus, baseline: bool = False) -> EvalReport:
        """
        Применяет систему к корпусу с эталонными метками и оценивает результат.

        Args:
            gold: Корпус с эталонными метками
            baseline: Добавить этап разметки только по Lookup

        Returns:
            Отчет с этапами patterns (только шаблоны) и full (весь конвейер)
        """
        result = self.apply(gold)
        stages = OrderedDict([(STAGE_PATTERNS, result.pattern_only), (STAGE_FULL, result.corpus)])
        if baseline:
            stages[STAGE_LOOKUP] = lookup_baseline(gold, label_types=self.labels)
        return evaluate_stages(stages, gold, self.labels)

    def save(self, path: Union[str, Path]):
        """Сохраняет файл шаблонов, статистику и априорные вероятности рядом с ним."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pattern_file(self.pairs, path)
        write_stats_file(self.pairs, stats_path_for(path))
        if self.priors is not None:
            write_priors(self.priors, priors_path_for(path))
        print(f"💾 Шаблоны сохранены: {path} ({len(self.pairs)} пар)")

    def load(self, path: Union[str, Path]):
        """
        Загружает файл шаблонов и побочные файлы, если они есть.

        Raises:
            FileNotFoundError: Файл шаблонов не найден
            CorpusFormatError: Некорректная строка файла
        """
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Файл шаблонов не найден: {path}")
        self.pairs = read_pattern_file(path)
        priors_path = priors_path_for(path)
        self.priors = read_priors(priors_path) if priors_path.exists() else None
        self.is_trained = True
        logger.info("Загружено %d пар из %s", len(self.pairs), path)

    def use_pairs(self, pairs: Iterable[PatternTargetPair], priors: Optional[PriorTable] = None):
        """Использует готовые пары (например, из хранилища шаблонов)."""
        self.pairs = list(pairs)
        self.priors = priors
        self.is_trained = True

    def get_pairs_info(self):
        """Таблица пар со статистикой."""
        return pairs_frame(self.pairs)

    def get_system_info(self) -> Dict[str, object]:
        """Информация о системе."""
        return {
            "labels": list(self.labels),
            "is_trained": self.is_trained,
            "pairs": len(self.pairs),
            "pairs_by_label": {label: sum(1 for p in self.pairs if p.label == label) for label in self.labels},
            "priors": len(self.priors) if self.priors is not None else 0,
            "threshold": self.threshold,
            "min_support": self.min_support,
            "window": self.window,
            "key_policy": self.key_policy.to_string(),
        }
