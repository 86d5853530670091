#!/usr/bin/env python3
"""
Конфигурационный файл для системы извлечения именованных сущностей по шаблонам.

Содержит все настройки системы: оценки выравнивания, параметры генерации,
применения и отбора шаблонов, априорные вероятности, политику ключей,
логирование, пути к данным, хранилище шаблонов и HTTP API.

Порядок переопределения: предустановка окружения < файл KEY=value <
переменные окружения < флаги командной строки.
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values

from src.algorithms.grid_aligner import COMBINE_SUM, ScoringConfig
from src.algorithms.pattern_generator import WINDOW_SENTENCE, WINDOW_TOKENS
from src.exceptions import ConfigError
from src.models.data_models import DEFAULT_KEY_POLICY, KeyDerivationPolicy


@dataclass
class AlignmentConfig:
    """Конфигурация оценки выравнивания."""

    match_score: float = 1.0
    target_match_score: float = 100.0
    mismatch_score: float = -1.0
    gap_penalty: float = 2.0
    type_scores: Dict[str, float] = field(default_factory=dict)  # тип аннотации -> оценка совпадения
    combine: str = COMBINE_SUM  # SUM или MAX

    def to_scoring(self) -> ScoringConfig:
        return ScoringConfig(
            match_score=self.match_score,
            target_match_score=self.target_match_score,
            mismatch_score=self.mismatch_score,
            gap_penalty=self.gap_penalty,
            type_scores=dict(self.type_scores),
            combine=self.combine,
        )


@dataclass
class GenerationConfig:
    """Конфигурация генерации шаблонов."""

    window: str = WINDOW_SENTENCE  # SENTENCE или TOKENS
    window_size: int = 5
    max_pairs: int = 10 ** 6  # предел числа выравниваемых пар контекстов
    seed: int = 13
    join_bilateral_gaps: bool = True
    label_context: bool = False
    n_jobs: int = 1


@dataclass
class EngineConfig:
    """Конфигурация применения шаблонов."""

    max_iterations: int = 10
    merge_overlapping: bool = True


@dataclass
class RefineConfig:
    """Конфигурация отбора пар."""

    threshold: float = 0.95
    min_support: int = 3
    filter_subsumed: bool = True


@dataclass
class PriorConfig:
    """Конфигурация априорных вероятностей меток."""

    enabled: bool = True
    hi: float = 0.9
    lo: float = 0.1
    min_occurrences: int = 2
    propagate_persons: bool = True


@dataclass
class KeyPolicyConfig:
    """Политика получения ключей элементов из аннотаций."""

    policy: str = DEFAULT_KEY_POLICY
    lowercase_values: bool = True

    def to_policy(self) -> KeyDerivationPolicy:
        policy = KeyDerivationPolicy.from_string(self.policy)
        return KeyDerivationPolicy(rules=policy.rules, lowercase_values=self.lowercase_values)


@dataclass
class LoggingConfig:
    """Конфигурация логирования."""

    level: str = "INFO"  # DEBUG, INFO, WARNING, ERROR, CRITICAL
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file: Optional[str] = None  # Путь к файлу логов
    max_file_size: int = 10 * 1024 * 1024  # 10MB
    backup_count: int = 5


@dataclass
class DataConfig:
    """Конфигурация данных."""

    data_dir: str = "data"
    labels: Tuple[str, ...] = ("PER", "ORG", "LOC", "MISC")
    patterns_file: str = "data/patterns.tsv"
    sample_documents: int = 30
    sample_seed: int = 42
    strict_conll: bool = False


@dataclass
class DatabaseConfig:
    """Конфигурация хранилища шаблонов."""

    url: Optional[str] = None  # например sqlite:///data/patterns.db
    echo: bool = False  # Логирование SQL запросов


@dataclass
class APIConfig:
    """Конфигурация API сервера."""

    host: str = "0.0.0.0"
    port: int = 3002
    debug: bool = False
    cors_origins: list = field(default_factory=lambda: ["*"])
    max_content_length: int = 16 * 1024 * 1024  # 16MB
    default_top: int = 20


def _bool(value: str) -> bool:
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _optional(value: str) -> Optional[str]:
    return value or None


def _labels(value: str) -> Tuple[str, ...]:
    return tuple(label.strip() for label in value.split(",") if label.strip())


def _type_scores(value: str) -> Dict[str, float]:
    scores = {}
    for item in value.split(","):
        if not item.strip():
            continue
        name, sep, score = item.partition("=")
        if not sep:
            raise ValueError(f"ожидается тип=оценка, получено {item!r}")
        scores[name.strip().lower()] = float(score)
    return scores


# имя переменной -> (раздел, поле, преобразование)
ENV_FIELDS: Dict[str, Tuple[str, str, Callable[[str], Any]]] = {
    "ALIGN_MATCH_SCORE": ("alignment", "match_score", float),
    "ALIGN_TARGET_SCORE": ("alignment", "target_match_score", float),
    "ALIGN_MISMATCH_SCORE": ("alignment", "mismatch_score", float),
    "ALIGN_GAP_PENALTY": ("alignment", "gap_penalty", float),
    "ALIGN_TYPE_SCORES": ("alignment", "type_scores", _type_scores),
    "ALIGN_COMBINE": ("alignment", "combine", str.upper),
    "GC_WINDOW": ("generation", "window", str.upper),
    "GC_WINDOW_SIZE": ("generation", "window_size", int),
    "GEN_MAX_PAIRS": ("generation", "max_pairs", int),
    "GEN_SEED": ("generation", "seed", int),
    "GEN_JOIN_BILATERAL_GAPS": ("generation", "join_bilateral_gaps", _bool),
    "GEN_LABEL_CONTEXT": ("generation", "label_context", _bool),
    "N_JOBS": ("generation", "n_jobs", int),
    "ENGINE_MAX_ITERATIONS": ("engine", "max_iterations", int),
    "ENGINE_MERGE_OVERLAPPING": ("engine", "merge_overlapping", _bool),
    "REFINE_THRESHOLD": ("refine", "threshold", float),
    "REFINE_MIN_SUPPORT": ("refine", "min_support", int),
    "REFINE_FILTER_SUBSUMED": ("refine", "filter_subsumed", _bool),
    "PRIOR_ENABLED": ("priors", "enabled", _bool),
    "PRIOR_HI": ("priors", "hi", float),
    "PRIOR_LO": ("priors", "lo", float),
    "PRIOR_MIN_OCCURRENCES": ("priors", "min_occurrences", int),
    "PRIOR_PROPAGATE_PERSONS": ("priors", "propagate_persons", _bool),
    "KEY_POLICY": ("keys", "policy", str),
    "KEY_LOWERCASE": ("keys", "lowercase_values", _bool),
    "LOG_LEVEL": ("logging", "level", str.upper),
    "LOG_FILE": ("logging", "file", _optional),
    "DATA_DIR": ("data", "data_dir", str),
    "LABELS": ("data", "labels", _labels),
    "PATTERNS_FILE": ("data", "patterns_file", str),
    "SAMPLE_DOCUMENTS": ("data", "sample_documents", int),
    "SAMPLE_SEED": ("data", "sample_seed", int),
    "CONLL_STRICT": ("data", "strict_conll", _bool),
    "DATABASE_URL": ("database", "url", _optional),
    "DATABASE_ECHO": ("database", "echo", _bool),
    "API_HOST": ("api", "host", str),
    "API_PORT": ("api", "port", int),
    "API_DEBUG": ("api", "debug", _bool),
}


@dataclass
class SystemConfig:
    """Основная конфигурация системы."""

    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    priors: PriorConfig = field(default_factory=PriorConfig)
    keys: KeyPolicyConfig = field(default_factory=KeyPolicyConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    data: DataConfig = field(default_factory=DataConfig)
    database: DatabaseConfig = field(default_factory=DatabaseConfig)
    api: APIConfig = field(default_factory=APIConfig)

    environment: str = "development"  # development, testing, production
    version: str = "1.0.0"
    name: str = "Grid Pattern NER"

    def apply_overrides(self, values: Mapping[str, Optional[str]], source: str = "environment") -> 'SystemConfig':
        """
        Переопределяет поля из словаря KEY -> значение (имена как у переменных окружения).

        Raises:
            ConfigError: Неизвестный ключ или значение, которое нельзя преобразовать
        """
        for key, raw in values.items():
            if key not in ENV_FIELDS:
                if source != "environment":
                    raise ConfigError(f"{source}: неизвестный параметр {key}")
                continue
            if raw is None:
                raise ConfigError(f"{source}: у параметра {key} нет значения")
            section, name, convert = ENV_FIELDS[key]
            try:
                value = convert(raw)
            except ValueError as e:
                raise ConfigError(f"{source}: некорректное значение {key}={raw!r} ({e})") from e
            setattr(getattr(self, section), name, value)
        if "ENVIRONMENT" in values and values["ENVIRONMENT"]:
            self.environment = values["ENVIRONMENT"]
        return self

    @classmethod
    def load_from_env(cls, base: Optional['SystemConfig'] = None) -> 'SystemConfig':
        """Загружает конфигурацию из переменных окружения."""
        config = copy.deepcopy(base) if base is not None else cls()
        known = {key: os.environ[key] for key in ENV_FIELDS if key in os.environ}
        return config.apply_overrides(known)

    @classmethod
    def load_from_file(cls, path: Union[str, Path], base: Optional['SystemConfig'] = None) -> 'SystemConfig':
        """
        Загружает конфигурацию из файла строк KEY=value (комментарии начинаются с #).

        Raises:
            ConfigError: Файл не найден или содержит некорректные параметры
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Файл конфигурации не найден: {path}")
        config = copy.deepcopy(base) if base is not None else cls()
        values = {key: value for key, value in dotenv_values(path).items() if key != "ENVIRONMENT"}
        return config.apply_overrides(values, source=str(path))

    @property
    def scoring(self) -> ScoringConfig:
        return self.alignment.to_scoring()

    @property
    def key_policy(self) -> KeyDerivationPolicy:
        return self.keys.to_policy()

    def to_dict(self) -> Dict[str, Any]:
        """Преобразует конфигурацию в словарь."""
        return {
            "alignment": {
                "match_score": self.alignment.match_score,
                "target_match_score": self.alignment.target_match_score,
                "mismatch_score": self.alignment.mismatch_score,
                "gap_penalty": self.alignment.gap_penalty,
                "type_scores": dict(self.alignment.type_scores),
                "combine": self.alignment.combine,
            },
            "generation": {
                "window": self.generation.window,
                "window_size": self.generation.window_size,
                "max_pairs": self.generation.max_pairs,
                "seed": self.generation.seed,
                "join_bilateral_gaps": self.generation.join_bilateral_gaps,
                "label_context": self.generation.label_context,
                "n_jobs": self.generation.n_jobs,
            },
            "engine": {
                "max_iterations": self.engine.max_iterations,
                "merge_overlapping": self.engine.merge_overlapping,
            },
            "refine": {
                "threshold": self.refine.threshold,
                "min_support": self.refine.min_support,
                "filter_subsumed": self.refine.filter_subsumed,
            },
            "priors": {
                "enabled": self.priors.enabled,
                "hi": self.priors.hi,
                "lo": self.priors.lo,
                "min_occurrences": self.priors.min_occurrences,
                "propagate_persons": self.priors.propagate_persons,
            },
            "keys": {
                "policy": self.keys.policy,
                "lowercase_values": self.keys.lowercase_values,
            },
            "logging": {
                "level": self.logging.level,
                "format": self.logging.format,
                "file": self.logging.file,
                "max_file_size": self.logging.max_file_size,
                "backup_count": self.logging.backup_count,
            },
            "data": {
                "data_dir": self.data.data_dir,
                "labels": list(self.data.labels),
                "patterns_file": self.data.patterns_file,
                "sample_documents": self.data.sample_documents,
                "sample_seed": self.data.sample_seed,
                "strict_conll": self.data.strict_conll,
            },
            "database": {
                "url": self.database.url,
                "echo": self.database.echo,
            },
            "api": {
                "host": self.api.host,
                "port": self.api.port,
                "debug": self.api.debug,
                "cors_origins": self.api.cors_origins,
                "max_content_length": self.api.max_content_length,
                "default_top": self.api.default_top,
            },
            "system": {
                "environment": self.environment,
                "version": self.version,
                "name": self.name,
            },
        }

    def validate(self) -> None:
        """Валидирует конфигурацию."""
        try:
            self.alignment.to_scoring()
            self.keys.to_policy()
        except ValueError as e:
            raise ValueError(f"Invalid alignment or key policy settings: {e}") from e

        if self.generation.window not in (WINDOW_SENTENCE, WINDOW_TOKENS):
            raise ValueError(f"Window must be SENTENCE or TOKENS, got {self.generation.window}")
        if self.generation.window_size < 0:
            raise ValueError(f"Window size must be >= 0, got {self.generation.window_size}")
        if self.generation.max_pairs < 1:
            raise ValueError(f"Max pairs must be >= 1, got {self.generation.max_pairs}")
        if self.generation.n_jobs == 0:
            raise ValueError("n_jobs must be non-zero")

        if self.engine.max_iterations < 1:
            raise ValueError(f"Max iterations must be >= 1, got {self.engine.max_iterations}")

        if not (0.0 <= self.refine.threshold <= 1.0):
            raise ValueError(f"Refine threshold must be between 0 and 1, got {self.refine.threshold}")
        if self.refine.min_support < 1:
            raise ValueError(f"Min support must be >= 1, got {self.refine.min_support}")

        if not (0.0 <= self.priors.lo < self.priors.hi <= 1.0):
            raise ValueError(f"Prior thresholds must satisfy 0 <= lo < hi <= 1, got lo={self.priors.lo}, hi={self.priors.hi}")
        if self.priors.min_occurrences < 1:
            raise ValueError(f"Min occurrences must be >= 1, got {self.priors.min_occurrences}")

        if self.logging.level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level: {self.logging.level}")
        if not self.data.labels:
            raise ValueError("At least one label is required")
        if not (1 <= self.api.port <= 65535):
            raise ValueError(f"API port must be between 1 and 65535, got {self.api.port}")


# Предустановленные конфигурации для разных окружений
DEVELOPMENT_CONFIG = SystemConfig(
    logging=LoggingConfig(level="DEBUG"),
    api=APIConfig(debug=True),
    environment="development",
)

TESTING_CONFIG = SystemConfig(
    generation=GenerationConfig(max_pairs=400),
    data=DataConfig(data_dir="data/test", patterns_file="data/test/patterns.tsv", sample_documents=30),
    logging=LoggingConfig(level="WARNING"),
    environment="testing",
)

PRODUCTION_CONFIG = SystemConfig(
    generation=GenerationConfig(n_jobs=-1),
    database=DatabaseConfig(url="sqlite:///data/patterns.db"),
    logging=LoggingConfig(
        level="INFO",
        file="logs/extraction.log",
        max_file_size=50 * 1024 * 1024,  # 50MB
        backup_count=10,
    ),
    environment="production",
)

PRESETS = {
    "development": DEVELOPMENT_CONFIG,
    "testing": TESTING_CONFIG,
    "production": PRODUCTION_CONFIG,
}


def get_config(environment: Optional[str] = None, config_file: Optional[Union[str, Path]] = None) -> SystemConfig:
    """
    Возвращает конфигурацию для указанного окружения.

    Args:
        environment: Окружение (development, testing, production) или None для автовыбора
        config_file: Необязательный файл KEY=value, переопределяющий предустановку

    Returns:
        Конфигурация системы
    """
    if environment is None:
        environment = os.getenv("ENVIRONMENT", "development")
    if environment not in PRESETS:
        raise ValueError(f"Unknown environment: {environment}")

    config = copy.deepcopy(PRESETS[environment])
    if config_file is not None:
        config = SystemConfig.load_from_file(config_file, base=config)
    config = SystemConfig.load_from_env(base=config)

    config.validate()
    return config


def setup_logging(cfg: LoggingConfig) -> None:
    """Настраивает корневой логгер по конфигурации."""
    handlers = [logging.StreamHandler()]
    if cfg.file:
        Path(cfg.file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(RotatingFileHandler(cfg.file, maxBytes=cfg.max_file_size, backupCount=cfg.backup_count))
    logging.basicConfig(level=getattr(logging, cfg.level), format=cfg.format, handlers=handlers, force=True)


if __name__ == "__main__":
    # Демонстрация использования конфигурации
    print("🔧 КОНФИГУРАЦИЯ СИСТЕМЫ ИЗВЛЕЧЕНИЯ")
    print("=" * 50)

    cfg = get_config()

    print(f"Окружение: {cfg.environment}")
    print(f"Версия: {cfg.version}")
    print(f"Политика ключей: {cfg.keys.policy}")
    print(f"Окно контекста: {cfg.generation.window}")
    print(f"Порог точности: {cfg.refine.threshold}")
    print(f"Хранилище шаблонов: {cfg.database.url}")

    print("\n📊 Полная конфигурация:")
    import json
    print(json.dumps(cfg.to_dict(), indent=2, ensure_ascii=False))
