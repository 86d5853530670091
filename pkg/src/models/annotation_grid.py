"""
Двумерная сетка аннотаций.

Для каждой атомарной позиции сетка хранит множество элементов, которые
начинаются в ней. Элементы могут перекрываться и иметь разную длину,
длина измеряется в атомах.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .data_models import (
    END_KEY,
    START_KEY,
    Annotation,
    Document,
    ElementKey,
    KeyDerivationPolicy,
    SpanKey,
    derive_keys,
)
from ..exceptions import AnnotationRangeError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridElement:
    """Элемент сетки: один ключ одной аннотации."""

    start: int
    length: int
    key: ElementKey
    annotation: Optional[Annotation] = None
    is_atom: bool = False

    @property
    def end(self) -> int:
        return self.start + self.length

    @property
    def is_marker(self) -> bool:
        return self.annotation is None


@dataclass
class GridDiagnostics:
    """Счетчики, собранные при построении сетки."""

    dropped_straddling: int = 0
    overridden: int = 0


class AnnotationGrid:
    """
    Сетка аннотаций над диапазоном атомов документа.

    Индексы сетки начинаются с 0. Если сетка помечена началом предложения,
    позиция 0 занята виртуальным атомом ``:start``, и атомы документа
    сдвигаются на единицу; виртуальный атом ``:end`` занимает последнюю позицию.
    """

    def __init__(self,
                 length: int,
                 elements: Iterable[GridElement],
                 document_id: str = "",
                 origin: int = 0,
                 has_start: bool = False,
                 has_end: bool = False,
                 diagnostics: Optional[GridDiagnostics] = None):
        self.length = length
        self.document_id = document_id
        self.origin = origin
        self.has_start = has_start
        self.has_end = has_end
        self.diagnostics = diagnostics or GridDiagnostics()

        starts: List[List[GridElement]] = [[] for _ in range(length)]
        for element in elements:
            if element.length < 1 or element.start < 0 or element.end > length:
                raise AnnotationRangeError(
                    f"Элемент {element.key} [{element.start}, {element.end}) вне сетки длины {length}"
                )
            starts[element.start].append(element)
        self.starts: Tuple[Tuple[GridElement, ...], ...] = tuple(tuple(s) for s in starts)

        # позиция -> ключ -> отсортированные различные длины
        self._index: List[Dict[ElementKey, Tuple[int, ...]]] = []
        for bucket in self.starts:
            lengths: Dict[ElementKey, set] = {}
            for element in bucket:
                lengths.setdefault(element.key, set()).add(element.length)
            self._index.append({key: tuple(sorted(v)) for key, v in lengths.items()})
        self._keys: FrozenSet[ElementKey] = frozenset(key for bucket in self._index for key in bucket)

    def __len__(self) -> int:
        return self.length

    def __repr__(self) -> str:
        return (f"AnnotationGrid(document_id={self.document_id!r}, origin={self.origin}, "
                f"length={self.length}, elements={self.element_count})")

    @property
    def element_count(self) -> int:
        return sum(len(bucket) for bucket in self.starts)

    @property
    def content_start(self) -> int:
        """Первая позиция сетки, занятая настоящим атомом."""
        return 1 if self.has_start else 0

    @property
    def content_end(self) -> int:
        """Позиция сразу за последним настоящим атомом."""
        return self.length - 1 if self.has_end else self.length

    def elements(self) -> Iterator[GridElement]:
        for bucket in self.starts:
            yield from bucket

    def elements_at(self, index: int) -> Tuple[GridElement, ...]:
        return self.starts[index]

    def key_index(self, index: int) -> Dict[ElementKey, Tuple[int, ...]]:
        """Ключи элементов, начинающихся в позиции, с их длинами."""
        return self._index[index]

    def lengths_for(self, index: int, key: ElementKey) -> Tuple[int, ...]:
        if not 0 <= index < self.length:
            return ()
        return self._index[index].get(key, ())

    def common_lengths(self, index: int, keys: Iterable[ElementKey]) -> Tuple[int, ...]:
        """Длины, при которых все ключи присутствуют в позиции одновременно."""
        if not 0 <= index < self.length:
            return ()
        common: Optional[set] = None
        bucket = self._index[index]
        for key in keys:
            lengths = bucket.get(key)
            if not lengths:
                return ()
            common = set(lengths) if common is None else common & set(lengths)
            if not common:
                return ()
        return tuple(sorted(common or ()))

    def key_set(self) -> FrozenSet[ElementKey]:
        return self._keys

    def to_document_range(self, start: int, end: int) -> Tuple[int, int]:
        """Переводит диапазон позиций сетки в диапазон атомов документа."""
        offset = self.origin - self.content_start
        return (start + offset, end + offset)

    def from_document_index(self, index: int) -> int:
        return index - self.origin + self.content_start

    def signature(self) -> Tuple:
        """Хешируемое представление содержимого сетки (без документа и смещения)."""
        return (
            self.length,
            tuple(
                tuple(sorted((key.sort_key, lengths) for key, lengths in bucket.items()))
                for bucket in self._index
            ),
        )

    def flatten(self) -> List[Tuple[Annotation, ElementKey]]:
        """Возвращает пары (аннотация, ключ), из которых построена сетка, без виртуальных атомов."""
        return [(e.annotation, e.key) for e in self.elements() if e.annotation is not None]


def build_grid(document: Document,
               atom_range: Optional[Tuple[int, int]] = None,
               key_policy: Optional[KeyDerivationPolicy] = None,
               mark_start: bool = False,
               mark_end: bool = False,
               exclude_types: Iterable[str] = (),
               overrides: Optional[Mapping[SpanKey, Sequence[ElementKey]]] = None) -> AnnotationGrid:
    """
    Строит сетку аннотаций документа над диапазоном атомов.

    Args:
        document: Документ
        atom_range: Диапазон атомов [start, end); None означает весь документ
        key_policy: Политика получения ключей (по умолчанию стандартная)
        mark_start: Добавить виртуальный атом :start в позицию 0
        mark_end: Добавить виртуальный атом :end после последнего атома
        exclude_types: Типы аннотаций, которые не попадают в сетку
        overrides: Явные ключи для аннотаций с заданным (документ, начало, конец, тип);
            пустой набор ключей исключает аннотацию из сетки

    Returns:
        Сетка, в которой начало диапазона имеет индекс 0 (или 1 при mark_start)

    Raises:
        AnnotationRangeError: Диапазон выходит за пределы документа
    """
    key_policy = key_policy or KeyDerivationPolicy.default()
    overrides = overrides or {}
    excluded = set(exclude_types)

    start, end = atom_range if atom_range is not None else (0, document.atom_count)
    if not (0 <= start <= end <= document.atom_count):
        raise AnnotationRangeError(
            f"Диапазон [{start}, {end}) вне документа {document.document_id} "
            f"из {document.atom_count} атомов"
        )

    shift = 1 if mark_start else 0
    length = (end - start) + shift + (1 if mark_end else 0)
    diagnostics = GridDiagnostics()
    elements: List[GridElement] = []

    if mark_start:
        elements.append(GridElement(0, 1, START_KEY, None, True))

    for atom in document.atoms[start:end]:
        position = atom.start - start + shift
        for key in _keys_for(atom, key_policy, overrides, diagnostics):
            elements.append(GridElement(position, 1, key, atom, True))

    for annotation in document.annotations:
        if annotation.type in excluded:
            continue
        if annotation.end <= start or annotation.start >= end:
            continue
        if annotation.start < start or annotation.end > end:
            diagnostics.dropped_straddling += 1
            continue
        position = annotation.start - start + shift
        for key in _keys_for(annotation, key_policy, overrides, diagnostics):
            elements.append(GridElement(position, annotation.length, key, annotation, False))

    if mark_end:
        elements.append(GridElement(length - 1, 1, END_KEY, None, True))

    if diagnostics.dropped_straddling:
        logger.warning(
            "Документ %s, диапазон [%d, %d): отброшено %d аннотаций, пересекающих границу",
            document.document_id, start, end, diagnostics.dropped_straddling,
        )

    return AnnotationGrid(
        length=length,
        elements=elements,
        document_id=document.document_id,
        origin=start,
        has_start=mark_start,
        has_end=mark_end,
        diagnostics=diagnostics,
    )


def _keys_for(annotation: Annotation,
              key_policy: KeyDerivationPolicy,
              overrides: Mapping[SpanKey, Sequence[ElementKey]],
              diagnostics: GridDiagnostics) -> Sequence[ElementKey]:
    if annotation.span_key in overrides:
        diagnostics.overridden += 1
        return overrides[annotation.span_key]
    return derive_keys(annotation, key_policy)


def sentence_grids(document: Document,
                   key_policy: Optional[KeyDerivationPolicy] = None,
                   exclude_types: Iterable[str] = ()) -> List[AnnotationGrid]:
    """Сетки всех предложений документа с виртуальными атомами :start и :end."""
    exclude_types = tuple(exclude_types)
    return [
        build_grid(document, (s, e), key_policy, mark_start=True, mark_end=True,
                   exclude_types=exclude_types)
        for s, e in document.sentence_boundaries
    ]
