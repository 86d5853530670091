"""
Модели данных для системы извлечения информации.

Этот модуль содержит аннотации, документы, корпус, ключи элементов
и политику получения ключей из признаков аннотаций.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set, Tuple, Union

import pandas as pd

from ..exceptions import AnnotationRangeError


logger = logging.getLogger(__name__)

# Атомарный тип аннотаций по умолчанию
ATOM_TYPE = "Token"

# Признак, которым помечаются аннотации, созданные системой
SOURCE_FEATURE = "source"
SOURCE_PATTERN = "pattern"
SOURCE_PRIOR = "prior"
SOURCE_PROPAGATION = "propagation"

SpanKey = Tuple[str, int, int, str]

_ESCAPED = {"\\", "|", "!", " ", "\t", "\n"}


def escape_label(text: str) -> str:
    """Экранирует символы-разделители синтаксиса шаблонов."""
    return "".join("\\" + ch if ch in _ESCAPED else ch for ch in text)


@dataclass(frozen=True)
class Annotation:
    """Аннотация: документ, диапазон атомов [start, end), тип и признаки."""

    document_id: str
    start: int
    end: int
    type: str
    features: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        features = self.features
        if isinstance(features, Mapping):
            features = features.items()
        features = tuple(sorted((str(k), "" if v is None else str(v)) for k, v in features))
        object.__setattr__(self, "features", features)

        if not self.type:
            raise ValueError("Тип аннотации не может быть пустым")
        if any(not name for name, _ in features):
            raise ValueError(f"Пустое имя признака в аннотации типа {self.type}")
        if not (0 <= self.start < self.end):
            raise AnnotationRangeError(
                f"Некорректный диапазон аннотации {self.type}: [{self.start}, {self.end})"
            )

    @property
    def length(self) -> int:
        """Длина аннотации в атомах."""
        return self.end - self.start

    @property
    def feature_map(self) -> Dict[str, str]:
        return dict(self.features)

    @property
    def span_key(self) -> SpanKey:
        """Ключ (документ, начало, конец, тип), по которому аннотации дедуплицируются."""
        return (self.document_id, self.start, self.end, self.type)

    def get(self, name: str, default: Optional[str] = None) -> Optional[str]:
        """Возвращает значение признака без учета регистра имени."""
        lowered = name.lower()
        for key, value in self.features:
            if key.lower() == lowered:
                return value
        return default

    def overlaps(self, other: "Annotation") -> bool:
        return self.start < other.end and other.start < self.end

    def covers(self, other: "Annotation") -> bool:
        return self.start <= other.start and other.end <= self.end

    def shifted(self, offset: int) -> "Annotation":
        return replace(self, start=self.start + offset, end=self.end + offset)


@dataclass(frozen=True)
class Document:
    """
    Документ: атомы (длины 1, без пропусков), аннотации над ними и
    границы предложений, разбивающие [0, число атомов).
    """

    document_id: str
    atoms: Tuple[Annotation, ...]
    annotations: Tuple[Annotation, ...] = ()
    sentence_boundaries: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "annotations", tuple(self.annotations))
        boundaries = tuple((int(s), int(e)) for s, e in self.sentence_boundaries)
        if not boundaries and self.atoms:
            boundaries = ((0, len(self.atoms)),)
        object.__setattr__(self, "sentence_boundaries", boundaries)
        self._validate()

    def _validate(self):
        for index, atom in enumerate(self.atoms):
            if atom.start != index or atom.end != index + 1:
                raise AnnotationRangeError(
                    f"Документ {self.document_id}: атом {index} имеет диапазон "
                    f"[{atom.start}, {atom.end}), ожидался [{index}, {index + 1})"
                )

        n = len(self.atoms)
        for annotation in self.annotations:
            if annotation.document_id != self.document_id:
                raise ValueError(
                    f"Аннотация документа {annotation.document_id} добавлена в документ {self.document_id}"
                )
            if annotation.end > n:
                raise AnnotationRangeError(
                    f"Документ {self.document_id}: аннотация {annotation.type} "
                    f"[{annotation.start}, {annotation.end}) выходит за пределы {n} атомов"
                )

        position = 0
        for start, end in self.sentence_boundaries:
            if start != position or end <= start:
                raise AnnotationRangeError(
                    f"Документ {self.document_id}: границы предложений не разбивают [0, {n})"
                )
            position = end
        if position != n:
            raise AnnotationRangeError(
                f"Документ {self.document_id}: границы предложений не покрывают [0, {n})"
            )

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    @property
    def all_annotations(self) -> Tuple[Annotation, ...]:
        """Атомы и остальные аннотации вместе."""
        return self.atoms + self.annotations

    def sentence_of(self, start: int, end: int) -> Optional[Tuple[int, int]]:
        """Возвращает предложение, целиком содержащее [start, end), или None."""
        for s, e in self.sentence_boundaries:
            if s <= start and end <= e:
                return (s, e)
        return None

    def annotations_of_type(self, types: Union[str, Iterable[str]]) -> List[Annotation]:
        wanted = {types} if isinstance(types, str) else set(types)
        return [a for a in self.annotations if a.type in wanted]

    def token_string(self, index: int) -> str:
        atom = self.atoms[index]
        return atom.get("string", "") or ""

    def text(self, start: int = 0, end: Optional[int] = None) -> str:
        end = self.atom_count if end is None else end
        return " ".join(self.token_string(i) for i in range(start, end))

    def with_annotations(self, extra: Iterable[Annotation]) -> "Document":
        """Добавляет аннотации, пропуская уже существующие по ключу (документ, диапазон, тип)."""
        present = {a.span_key for a in self.annotations}
        added = []
        for annotation in extra:
            if annotation.span_key not in present:
                present.add(annotation.span_key)
                added.append(annotation)
        if not added:
            return self
        return replace(self, annotations=self.annotations + tuple(added))

    def without_types(self, types: Iterable[str]) -> "Document":
        dropped = set(types)
        return replace(self, annotations=tuple(a for a in self.annotations if a.type not in dropped))

    def replace_annotations(self, annotations: Iterable[Annotation]) -> "Document":
        return replace(self, annotations=tuple(annotations))


@dataclass(frozen=True)
class ElementKey:
    """Ключ элемента сетки: тип аннотации, необязательный признак и значение."""

    type: str
    feature: Optional[str] = None
    value: Optional[str] = None

    def __post_init__(self):
        if not self.type:
            raise ValueError("Тип ключа не может быть пустым")
        if self.value is not None and self.feature is None:
            raise ValueError(f"Ключ :{self.type} со значением должен иметь признак")
        if self.feature is not None and not self.feature:
            raise ValueError(f"Пустое имя признака в ключе :{self.type}")

    @property
    def sort_key(self) -> Tuple[str, str, str]:
        return (self.type, self.feature or "", self.value or "")

    def to_text(self) -> str:
        """Сериализация подэлемента: :type|feature|value."""
        parts = [escape_label(self.type)]
        if self.feature is not None:
            parts.append(escape_label(self.feature))
        if self.value is not None:
            parts.append(escape_label(self.value))
        return ":" + "|".join(parts)

    def __str__(self) -> str:
        return self.to_text()


TARGET_KEY = ElementKey("target")
START_KEY = ElementKey("start")
END_KEY = ElementKey("end")
MARKER_KEYS: FrozenSet[ElementKey] = frozenset({START_KEY, END_KEY})


@dataclass(frozen=True)
class KeyRule:
    """Правило для одного типа: какие признаки дают ключи и выдается ли ключ типа."""

    features: Tuple[str, ...] = ()
    bare: bool = False


FALLBACK_RULE = KeyRule(features=(), bare=True)


@dataclass(frozen=True)
class KeyDerivationPolicy:
    """Политика получения ключей элементов из аннотаций (по типам, без учета регистра)."""

    rules: Dict[str, KeyRule] = field(default_factory=dict)
    lowercase_values: bool = True

    def rule_for(self, annotation_type: str) -> KeyRule:
        return self.rules.get(annotation_type.lower(), FALLBACK_RULE)

    @classmethod
    def default(cls) -> "KeyDerivationPolicy":
        """Token→string/root/category, Date→normalized, Number→тип, Lookup→majorType, Chunk→kind."""
        return cls.from_string(DEFAULT_KEY_POLICY)

    @classmethod
    def from_string(cls, text: str) -> "KeyDerivationPolicy":
        """
        Разбирает строку политики.

        Формат: ``type:feature,feature,+;type:...``, где ``+`` включает ключ
        самого типа. Пример: ``token:string,root,category;number:+``.
        """
        rules: Dict[str, KeyRule] = {}
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            if ":" not in chunk:
                raise ValueError(f"Правило политики ключей без двоеточия: {chunk!r}")
            type_name, _, rule_text = chunk.partition(":")
            type_name = type_name.strip().lower()
            if not type_name:
                raise ValueError(f"Пустой тип в правиле политики ключей: {chunk!r}")
            items = [item.strip().lower() for item in rule_text.split(",") if item.strip()]
            features = tuple(item for item in items if item != "+")
            rules[type_name] = KeyRule(features=features, bare="+" in items)
        return cls(rules=rules)

    def to_string(self) -> str:
        parts = []
        for type_name, rule in self.rules.items():
            items = list(rule.features) + (["+"] if rule.bare else [])
            parts.append(f"{type_name}:{','.join(items)}")
        return ";".join(parts)


DEFAULT_KEY_POLICY = "token:string,root,category;date:normalized;number:+;lookup:majortype;chunk:kind"


def derive_keys(annotation: Annotation, key_policy: KeyDerivationPolicy) -> Tuple[ElementKey, ...]:
    """
    Возвращает упорядоченное множество ключей аннотации.

    Значения признаков приводятся к нижнему регистру. Если правило не дало
    ни одного ключа (неизвестный тип, отсутствующие признаки), используется
    ключ самого типа.
    """
    rule = key_policy.rule_for(annotation.type)
    type_name = annotation.type.lower()
    keys: List[ElementKey] = []

    for feature in rule.features:
        value = annotation.get(feature)
        if value is None:
            continue
        if key_policy.lowercase_values:
            value = value.lower()
        keys.append(ElementKey(type_name, feature.lower(), value))

    if rule.bare or not keys:
        keys.append(ElementKey(type_name))

    return tuple(dict.fromkeys(keys))


class Corpus:
    """Корпус документов с доступом по идентификатору."""

    def __init__(self, documents: Iterable[Document] = ()):
        self.documents: List[Document] = list(documents)
        self._index: Dict[str, int] = {}
        for position, document in enumerate(self.documents):
            if document.document_id in self._index:
                raise ValueError(f"Повторяющийся идентификатор документа: {document.document_id}")
            self._index[document.document_id] = position

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.documents == other.documents

    def get(self, document_id: str) -> Document:
        if document_id not in self._index:
            raise KeyError(f"Документ не найден: {document_id}")
        return self.documents[self._index[document_id]]

    def map(self, func) -> "Corpus":
        return Corpus(func(document) for document in self.documents)

    def with_annotations(self, annotations: Iterable[Annotation]) -> "Corpus":
        """Добавляет аннотации в соответствующие документы (с дедупликацией)."""
        grouped: Dict[str, List[Annotation]] = {}
        for annotation in annotations:
            grouped.setdefault(annotation.document_id, []).append(annotation)
        unknown = set(grouped) - set(self._index)
        if unknown:
            raise KeyError(f"Аннотации для неизвестных документов: {sorted(unknown)}")
        return Corpus(d.with_annotations(grouped.get(d.document_id, ())) for d in self.documents)

    def without_types(self, types: Iterable[str]) -> "Corpus":
        types = set(types)
        return Corpus(d.without_types(types) for d in self.documents)

    def annotations(self, types: Optional[Iterable[str]] = None) -> List[Annotation]:
        wanted = None if types is None else set(types)
        return [
            a for d in self.documents for a in d.annotations
            if wanted is None or a.type in wanted
        ]

    def span_set(self, types: Optional[Iterable[str]] = None) -> Set[SpanKey]:
        return {a.span_key for a in self.annotations(types)}

    def to_frame(self) -> pd.DataFrame:
        """Все неатомарные аннотации корпуса в виде DataFrame."""
        rows = [
            {
                "document_id": a.document_id,
                "start": a.start,
                "end": a.end,
                "type": a.type,
                "source": a.get(SOURCE_FEATURE, ""),
            }
            for a in self.annotations()
        ]
        return pd.DataFrame(rows, columns=["document_id", "start", "end", "type", "source"])

    def get_statistics(self) -> Dict[str, object]:
        """Статистика корпуса: документы, предложения, атомы и аннотации по типам."""
        type_counts = Counter(a.type for a in self.annotations())
        return {
            "documents": len(self.documents),
            "sentences": sum(len(d.sentence_boundaries) for d in self.documents),
            "atoms": sum(d.atom_count for d in self.documents),
            "annotations": sum(type_counts.values()),
            "annotations_by_type": dict(sorted(type_counts.items())),
        }
