"""
Шаблоны извлечения и их текстовый синтаксис.

Элементы шаблона разделяются пробелом, совместные подэлементы внутри
элемента соединяются символом "!", части подэлемента (тип, признак,
значение) разделяются символом "|". Специальные элементы: :target,
:start, :end. Обратная косая черта экранирует "\\", "!", "|" и пробелы.
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import FrozenSet, Iterable, List, Optional, Tuple, Union

from .data_models import MARKER_KEYS, TARGET_KEY, ElementKey, SpanKey
from ..exceptions import PatternParseError


class PatternElement:
    """Позиция шаблона: непустое множество совместно встречающихся ключей."""

    __slots__ = ("keys", "_canonical")

    def __init__(self, keys: Iterable[ElementKey]):
        keys = tuple(keys)
        if not keys:
            raise ValueError("Элемент шаблона должен содержать хотя бы один ключ")
        self.keys: Tuple[ElementKey, ...] = keys
        self._canonical = tuple(sorted(set(keys), key=lambda k: k.sort_key))

    @classmethod
    def of(cls, *keys: ElementKey) -> "PatternElement":
        return cls(keys)

    @property
    def key_set(self) -> FrozenSet[ElementKey]:
        return frozenset(self.keys)

    @property
    def canonical_keys(self) -> Tuple[ElementKey, ...]:
        return self._canonical

    @property
    def is_marker(self) -> bool:
        return all(key in MARKER_KEYS for key in self.keys)

    @property
    def is_target(self) -> bool:
        return self.keys == (TARGET_KEY,)

    def to_text(self, canonical: bool = False) -> str:
        keys = self._canonical if canonical else self.keys
        return "!".join(key.to_text() for key in keys)

    def __eq__(self, other) -> bool:
        return isinstance(other, PatternElement) and self._canonical == other._canonical

    def __hash__(self) -> int:
        return hash(self._canonical)

    def __repr__(self) -> str:
        return f"PatternElement({self.to_text()!r})"


TARGET_ELEMENT = PatternElement.of(TARGET_KEY)

Elements = Tuple[PatternElement, ...]


def _elements_text(elements: Iterable[PatternElement], canonical: bool = False) -> str:
    return " ".join(element.to_text(canonical) for element in elements)


@dataclass(frozen=True, eq=False)
class ContextPattern:
    """Контекстный шаблон: левый контекст, место цели и правый контекст."""

    lc: Elements = ()
    rc: Elements = ()
    label: str = ""
    sources: FrozenSet[SpanKey] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "lc", tuple(self.lc))
        object.__setattr__(self, "rc", tuple(self.rc))
        object.__setattr__(self, "sources", frozenset(self.sources))
        if not self.lc and not self.rc:
            raise ValueError("Контекстный шаблон: пустыми могут быть не оба контекста")
        if any(element == TARGET_ELEMENT for element in self.lc + self.rc):
            raise ValueError("Контекстный шаблон: :target допускается только один раз")

    @property
    def length(self) -> int:
        """Число элементов левого и правого контекстов."""
        return len(self.lc) + len(self.rc)

    @property
    def canonical(self) -> str:
        return serialize_pattern(self, canonical=True)

    @property
    def required_keys(self) -> FrozenSet[ElementKey]:
        return frozenset(key for element in self.lc + self.rc for key in element.keys)

    @property
    def is_vacuous(self) -> bool:
        """Шаблон состоит только из :start/:end."""
        return all(element.is_marker for element in self.lc + self.rc)

    def with_sources(self, sources: Iterable[SpanKey]) -> "ContextPattern":
        return replace(self, sources=self.sources | frozenset(sources))

    def __eq__(self, other) -> bool:
        return (isinstance(other, ContextPattern) and self.label == other.label
                and self.lc == other.lc and self.rc == other.rc)

    def __hash__(self) -> int:
        return hash((self.label, self.lc, self.rc))

    def __str__(self) -> str:
        return serialize_pattern(self)


@dataclass(frozen=True, eq=False)
class TargetPattern:
    """Шаблон цели: внутренняя структура извлекаемого фрагмента."""

    elements: Elements
    label: str = ""
    sources: FrozenSet[SpanKey] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "sources", frozenset(self.sources))
        if not self.elements:
            raise ValueError("Шаблон цели не может быть пустым")
        if any(element == TARGET_ELEMENT for element in self.elements):
            raise ValueError("Шаблон цели не может содержать :target")

    @property
    def length(self) -> int:
        return len(self.elements)

    @property
    def canonical(self) -> str:
        return serialize_pattern(self, canonical=True)

    @property
    def required_keys(self) -> FrozenSet[ElementKey]:
        return frozenset(key for element in self.elements for key in element.keys)

    def with_sources(self, sources: Iterable[SpanKey]) -> "TargetPattern":
        return replace(self, sources=self.sources | frozenset(sources))

    def __eq__(self, other) -> bool:
        return (isinstance(other, TargetPattern) and self.label == other.label
                and self.elements == other.elements)

    def __hash__(self) -> int:
        return hash((self.label, self.elements))

    def __str__(self) -> str:
        return serialize_pattern(self)


Pattern = Union[ContextPattern, TargetPattern]


@dataclass(frozen=True)
class PairStats:
    """Статистика применения пары на обучающих данных."""

    applications: int = 0
    true_positives: int = 0

    def __post_init__(self):
        if self.applications < 0 or not 0 <= self.true_positives <= self.applications:
            raise ValueError(
                f"Некорректная статистика: applications={self.applications}, "
                f"true_positives={self.true_positives}"
            )

    @property
    def evaluable(self) -> bool:
        return self.applications > 0

    @property
    def precision(self) -> Optional[float]:
        """M(p, t) = true_positives / applications; None для пары без применений."""
        if not self.applications:
            return None
        return self.true_positives / self.applications


@dataclass(frozen=True, eq=False)
class PatternTargetPair:
    """Пара (контекстный шаблон, шаблон цели), порождающая аннотации типа label."""

    context: ContextPattern
    target: TargetPattern
    label: str
    stats: Optional[PairStats] = None
    footprint: FrozenSet[SpanKey] = field(default_factory=frozenset)
    context_atoms: Optional[int] = None

    @property
    def identity(self) -> str:
        return f"{self.context.canonical}\t{self.target.canonical}\t{self.label}"

    @property
    def pair_id(self) -> str:
        return hashlib.sha1(self.identity.encode("utf-8")).hexdigest()[:12]

    @property
    def length(self) -> int:
        """
        Длина контекста в атомах, измеренная на обучающих применениях
        (наименьшая по всем применениям). Для неоцененной пары равна числу
        элементов lc и rc.
        """
        if self.context_atoms is None:
            return self.context.length
        return self.context_atoms

    @property
    def required_keys(self) -> FrozenSet[ElementKey]:
        return self.context.required_keys | self.target.required_keys

    @property
    def precision(self) -> Optional[float]:
        return self.stats.precision if self.stats else None

    @property
    def applications(self) -> int:
        return self.stats.applications if self.stats else 0

    def with_stats(self, stats: PairStats, footprint: Iterable[SpanKey] = (),
                   context_atoms: Optional[int] = None) -> "PatternTargetPair":
        return replace(self, stats=stats, footprint=frozenset(footprint), context_atoms=context_atoms)

    def __eq__(self, other) -> bool:
        return isinstance(other, PatternTargetPair) and self.identity == other.identity

    def __hash__(self) -> int:
        return hash(self.identity)

    def __repr__(self) -> str:
        return f"PatternTargetPair({self.context}, {self.target}, {self.label})"


@dataclass(frozen=True)
class MatchResult:
    """Кандидат, принятый парой: диапазон атомов документа."""

    document_id: str
    start: int
    end: int
    label: str
    pair_id: str
    iteration: int = 0
    context_atoms: int = 0

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError(f"Пустой диапазон результата [{self.start}, {self.end})")

    @property
    def span_key(self) -> SpanKey:
        return (self.document_id, self.start, self.end, self.label)


@dataclass(frozen=True)
class PatternFileRecord:
    """Строка файла шаблонов: контекст, цель, метка и необязательный счетчик."""

    context: str
    target: str
    label: str
    count: Optional[int] = None

    def to_line(self) -> str:
        fields = [self.context, self.target, self.label]
        if self.count is not None:
            fields.append(str(self.count))
        return "\t".join(fields)

    @classmethod
    def from_line(cls, line: str) -> "PatternFileRecord":
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) not in (3, 4):
            raise ValueError(f"Ожидалось 3 или 4 поля, получено {len(fields)}")
        count = int(fields[3]) if len(fields) == 4 and fields[3] != "" else None
        return cls(fields[0], fields[1], fields[2], count)

    def to_pair(self) -> PatternTargetPair:
        context = parse_pattern(self.context, self.label)
        target = parse_pattern(self.target, self.label)
        if not isinstance(context, ContextPattern):
            raise PatternParseError("контекстный шаблон должен содержать :target", 0)
        if not isinstance(target, TargetPattern):
            raise PatternParseError("шаблон цели не может содержать :target", 0)
        return PatternTargetPair(context, target, self.label)

    @classmethod
    def from_pair(cls, pair: PatternTargetPair) -> "PatternFileRecord":
        count = pair.stats.applications if pair.stats else None
        return cls(serialize_pattern(pair.context), serialize_pattern(pair.target), pair.label, count)


def serialize_pattern(pattern: Pattern, canonical: bool = False) -> str:
    """Сериализует шаблон; canonical=True упорядочивает подэлементы."""
    if isinstance(pattern, ContextPattern):
        return _elements_text(pattern.lc + (TARGET_ELEMENT,) + pattern.rc, canonical)
    return _elements_text(pattern.elements, canonical)


def parse_pattern(text: str, label: str = "") -> Pattern:
    """
    Разбирает строку шаблона.

    Строка с элементом :target дает ContextPattern, без него TargetPattern.

    Raises:
        PatternParseError: Пустой элемент, висячий разделитель, пустая часть подэлемента
    """
    elements = _parse_elements(text)
    if not elements:
        raise PatternParseError("пустой шаблон", 0)

    targets = [index for index, element in enumerate(elements) if element.is_target]
    if any(TARGET_KEY in element.keys and not element.is_target for element in elements):
        raise PatternParseError(":target не может иметь совместных подэлементов", 0)
    if len(targets) > 1:
        raise PatternParseError("шаблон содержит несколько :target", 0)

    try:
        if targets:
            split = targets[0]
            return ContextPattern(lc=elements[:split], rc=elements[split + 1:], label=label)
        return TargetPattern(elements=elements, label=label)
    except ValueError as exc:
        raise PatternParseError(str(exc), 0) from exc


def _parse_elements(text: str) -> List[PatternElement]:
    elements: List[PatternElement] = []
    keys: List[ElementKey] = []
    parts: List[str] = []
    current: List[str] = []
    position = 0
    in_key = False
    key_start = 0

    def finish_part(at: int):
        parts.append("".join(current))
        current.clear()
        # пустым может быть только значение
        if not parts[-1] and len(parts) != 3:
            raise PatternParseError("пустая часть подэлемента", at)

    def finish_key(at: int):
        nonlocal in_key
        if not in_key:
            raise PatternParseError("висячий разделитель", at)
        finish_part(at)
        keys.append(_make_key(parts, key_start))
        parts.clear()
        in_key = False

    def finish_element(at: int):
        finish_key(at)
        elements.append(PatternElement(keys))
        keys.clear()

    length = len(text)
    while position < length:
        ch = text[position]
        if ch == "\\":
            if position + 1 >= length:
                raise PatternParseError("обратная косая черта в конце строки", position)
            if not in_key:
                raise PatternParseError("подэлемент должен начинаться с ':'", position)
            current.append(text[position + 1])
            position += 2
            continue
        if ch == " ":
            if not in_key and not keys:
                raise PatternParseError("пустой элемент", position)
            finish_element(position)
        elif ch == "!":
            finish_key(position)
        elif ch == "|":
            if not in_key:
                raise PatternParseError("висячий разделитель", position)
            finish_part(position)
        elif not in_key:
            if ch != ":":
                raise PatternParseError("подэлемент должен начинаться с ':'", position)
            in_key = True
            key_start = position
        else:
            current.append(ch)
        position += 1

    if text:
        if not in_key:
            raise PatternParseError("висячий разделитель" if keys else "пустой элемент", length)
        finish_element(length)
    return elements


def _make_key(parts: List[str], position: int) -> ElementKey:
    if len(parts) > 3:
        raise PatternParseError("подэлемент содержит больше трех частей", position)
    type_name = parts[0]
    feature = parts[1] if len(parts) > 1 else None
    value = parts[2] if len(parts) > 2 else None
    return ElementKey(type_name, feature, value)
