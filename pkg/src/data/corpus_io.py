"""
Чтение и запись корпусов, аннотаций, файлов шаблонов и статистики.

Поддерживаемые форматы:
    - колоночный формат CoNLL-2003 (токен, POS, chunk, NER);
    - записи аннотаций: doc_id TAB start TAB end TAB type TAB feature=value ...;
    - файл шаблонов: контекст TAB цель TAB метка TAB счетчик;
    - таблицы статистики пар и априорных вероятностей (TSV через pandas).
"""

import bisect
import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ..algorithms.pattern_refiner import pairs_frame
from ..algorithms.priors import PRIOR_COLUMNS, PriorTable
from ..exceptions import CorpusFormatError, PatternParseError
from ..models.data_models import ATOM_TYPE, Annotation, Corpus, Document
from ..models.patterns import PairStats, PatternFileRecord, PatternTargetPair


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DOCSTART = "-DOCSTART-"
SENTENCE_TYPE = "Sentence"
CHUNK_TYPE = "Chunk"
CONLL_LABELS = ("PER", "ORG", "LOC", "MISC")
STATS_COLUMNS = ["pair_id", "applications", "true_positives", "precision"]

_RECORD_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_RECORD_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def _read_lines(source: Union[PathLike, Iterable[str]]) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return handle.read().splitlines()
    return [line.rstrip("\r\n") for line in source]


def _split_tag(tag: str, line_number: int) -> Tuple[str, Optional[str]]:
    if tag == "O":
        return "O", None
    prefix, sep, label = tag.partition("-")
    if not sep or prefix not in ("B", "I") or not label:
        raise CorpusFormatError(f"некорректный тег {tag!r}", line_number)
    return prefix, label


class _RunDecoder:
    """Собирает непрерывные B/I-последовательности одного типа в диапазоны."""

    def __init__(self, strict: bool):
        self.strict = strict
        self.repairs = 0
        self.runs: List[Tuple[int, int, str]] = []
        self._open: Optional[Tuple[int, str]] = None

    def feed(self, index: int, tag: str, line_number: int):
        prefix, label = _split_tag(tag, line_number)
        if prefix == "I" and self._open is not None and self._open[1] == label:
            return
        self.close(index)
        if prefix == "O":
            return
        if prefix == "I":
            if self.strict:
                raise CorpusFormatError(f"тег {tag} без предшествующего B-{label}", line_number)
            self.repairs += 1
        self._open = (index, label)

    def close(self, index: int):
        if self._open is not None:
            start, label = self._open
            self.runs.append((start, index, label))
            self._open = None


class _DocumentBuilder:
    def __init__(self, document_id: str, strict: bool):
        self.document_id = document_id
        self.atoms: List[Annotation] = []
        self.sentences: List[Tuple[int, int]] = []
        self.sentence_start = 0
        self.labels = _RunDecoder(strict)
        self.chunks = _RunDecoder(strict=False)

    def add_token(self, token: str, pos: str, chunk: str, ner: str, line_number: int):
        index = len(self.atoms)
        self.atoms.append(Annotation(self.document_id, index, index + 1, ATOM_TYPE,
                                     {"string": token, "category": pos}))
        self.chunks.feed(index, chunk, line_number)
        self.labels.feed(index, ner, line_number)

    def end_sentence(self):
        index = len(self.atoms)
        self.labels.close(index)
        self.chunks.close(index)
        if index > self.sentence_start:
            self.sentences.append((self.sentence_start, index))
            self.sentence_start = index

    def build(self) -> Document:
        self.end_sentence()
        annotations = [
            Annotation(self.document_id, s, e, CHUNK_TYPE, {"kind": kind})
            for s, e, kind in self.chunks.runs
        ] + [
            Annotation(self.document_id, s, e, label) for s, e, label in self.labels.runs
        ]
        return Document(self.document_id, self.atoms, annotations, self.sentences)


def ingest_conll(source: Union[PathLike, Iterable[str]],
                 strict: bool = False,
                 document_prefix: Optional[str] = None) -> Corpus:
    """
    Читает корпус в колоночном формате CoNLL-2003.

    Каждая строка содержит не менее четырех колонок: токен, POS, chunk, NER.
    Пустая строка разделяет предложения, -DOCSTART- начинает новый документ.

    Args:
        source: Путь к файлу или последовательность строк
        strict: Считать ошибкой тег I- без предшествующего B- того же типа
        document_prefix: Префикс идентификаторов документов (по умолчанию имя файла)

    Returns:
        Корпус с атомами Token{string, category}, аннотациями Chunk{kind}
        и эталонными аннотациями меток

    Raises:
        CorpusFormatError: Некорректная строка (с номером строки)
    """
    if document_prefix is None:
        document_prefix = Path(source).stem if isinstance(source, (str, Path)) else "doc"

    documents: List[Document] = []
    builder: Optional[_DocumentBuilder] = None
    repairs = 0

    def new_builder() -> _DocumentBuilder:
        return _DocumentBuilder(f"{document_prefix}-{len(documents) + 1:04d}", strict)

    for line_number, line in enumerate(_read_lines(source), start=1):
        stripped = line.strip()
        if stripped.startswith(DOCSTART):
            if builder is not None:
                repairs += builder.labels.repairs
                documents.append(builder.build())
            builder = new_builder()
            continue
        if not stripped:
            if builder is not None:
                builder.end_sentence()
            continue

        columns = stripped.split()
        if len(columns) < 4:
            raise CorpusFormatError(f"ожидалось не менее 4 колонок, получено {len(columns)}", line_number)
        if builder is None:
            builder = new_builder()
        builder.add_token(columns[0], columns[1], columns[-2], columns[-1], line_number)

    if builder is not None:
        repairs += builder.labels.repairs
        documents.append(builder.build())

    if repairs:
        logger.warning("Исправлено %d тегов I- без предшествующего B- (считаны как B-)", repairs)
    logger.info("Прочитано документов: %d", len(documents))
    return Corpus(documents)


def _bio_tags(length: int, runs: Iterable[Tuple[int, int, str]]) -> List[str]:
    tags = ["O"] * length
    for start, end, label in runs:
        tags[start] = f"B-{label}"
        for i in range(start + 1, end):
            tags[i] = f"I-{label}"
    return tags


def write_conll(corpus: Corpus, path: PathLike, label_types: Sequence[str] = CONLL_LABELS):
    """Записывает корпус в колоночном формате CoNLL (теги B-/I-)."""
    label_types = set(label_types)
    lines = []
    for document in corpus:
        lines.extend([f"{DOCSTART} -X- -X- O", ""])
        n = document.atom_count
        chunk_tags = _bio_tags(n, [(a.start, a.end, a.get("kind", "")) for a in document.annotations_of_type(CHUNK_TYPE)])
        ner_tags = _bio_tags(n, [(a.start, a.end, a.type) for a in document.annotations if a.type in label_types])
        for start, end in document.sentence_boundaries:
            for i in range(start, end):
                atom = document.atoms[i]
                lines.append(" ".join([atom.get("string", "") or "_", atom.get("category", "") or "_",
                                       chunk_tags[i], ner_tags[i]]))
            lines.append("")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _escape_field(text: str) -> str:
    return "".join(_RECORD_ESCAPES.get(ch, ch) for ch in text)


def _unescape_field(text: str, line_number: int) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _RECORD_UNESCAPES:
                raise CorpusFormatError(f"некорректная escape-последовательность в {text!r}", line_number)
            out.append(_RECORD_UNESCAPES[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def format_annotation_record(annotation: Annotation) -> str:
    fields = [annotation.document_id, str(annotation.start), str(annotation.end), annotation.type]
    fields += [f"{name}={value}" for name, value in annotation.features]
    return "\t".join(_escape_field(f) for f in fields)


def parse_annotation_record(line: str, line_number: int = 0) -> Tuple[str, int, int, str, Dict[str, str]]:
    """Разбирает одну запись аннотации без проверки диапазона."""
    fields = line.split("\t")
    if len(fields) < 4:
        raise CorpusFormatError(f"ожидалось не менее 4 полей, получено {len(fields)}", line_number)
    try:
        start, end = int(fields[1]), int(fields[2])
    except ValueError:
        raise CorpusFormatError(f"границы должны быть целыми числами: {fields[1]!r}, {fields[2]!r}", line_number)
    features = {}
    for field in fields[4:]:
        name, sep, value = field.partition("=")
        if not sep or not name:
            raise CorpusFormatError(f"признак должен иметь вид name=value: {field!r}", line_number)
        features[_unescape_field(name, line_number)] = _unescape_field(value, line_number)
    return (_unescape_field(fields[0], line_number), start, end,
            _unescape_field(fields[3], line_number), features)


def read_annotation_records(source: Union[PathLike, Iterable[str]],
                            offsets: str = "atom",
                            atom_type: str = ATOM_TYPE,
                            sentence_type: str = SENTENCE_TYPE) -> Corpus:
    """
    Читает записи аннотаций и собирает из них корпус.

    Записи атомарного типа становятся атомами, записи типа Sentence задают
    границы предложений, остальные становятся аннотациями.

    Args:
        source: Путь к файлу или последовательность строк
        offsets: atom (индексы атомов) или char (символьные смещения,
            переводятся в индексы атомов по записям токенов)
    """
    if offsets not in ("atom", "char"):
        raise ValueError(f"offsets должен быть atom или char, получено {offsets}")

    records: "OrderedDict[str, List[Tuple[int, str, int, int, Dict[str, str]]]]" = OrderedDict()
    for line_number, line in enumerate(_read_lines(source), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        document_id, start, end, type_name, features = parse_annotation_record(line, line_number)
        records.setdefault(document_id, []).append((line_number, type_name, start, end, features))

    documents = []
    for document_id, items in records.items():
        tokens = sorted((r for r in items if r[1] == atom_type), key=lambda r: r[2])
        convert = _char_converter(tokens) if offsets == "char" else (lambda s, e, n: (s, e))

        atoms = [
            Annotation(document_id, i, i + 1, atom_type, r[4])
            for i, r in enumerate(tokens)
        ] if offsets == "char" else [
            _checked(document_id, r, convert) for r in tokens
        ]
        sentences = sorted(convert(r[2], r[3], r[0]) for r in items if r[1] == sentence_type)
        annotations = [
            _checked(document_id, r, convert)
            for r in items if r[1] not in (atom_type, sentence_type)
        ]
        try:
            documents.append(Document(document_id, atoms, annotations, sentences))
        except ValueError as exc:
            raise CorpusFormatError(f"документ {document_id}: {exc}") from exc

    logger.info("Прочитано документов из записей аннотаций: %d", len(documents))
    return Corpus(documents)


def _checked(document_id, record, convert) -> Annotation:
    line_number, type_name, start, end, features = record
    start, end = convert(start, end, line_number)
    try:
        return Annotation(document_id, start, end, type_name, features)
    except ValueError as exc:
        raise CorpusFormatError(str(exc), line_number) from exc


def _char_converter(tokens):
    starts = [r[2] for r in tokens]
    ends = [r[3] for r in tokens]

    def convert(start: int, end: int, line_number: int) -> Tuple[int, int]:
        atom_start = bisect.bisect_right(starts, start) - 1
        atom_end = bisect.bisect_left(ends, end) + 1
        if atom_start < 0 or atom_end > len(tokens) or atom_start >= atom_end:
            raise CorpusFormatError(
                f"символьный диапазон [{start}, {end}) не соответствует токенам", line_number
            )
        return atom_start, atom_end

    return convert


def write_annotation_records(corpus: Corpus,
                             path: PathLike,
                             types: Optional[Iterable[str]] = None,
                             include_atoms: bool = True,
                             include_sentences: bool = True):
    """Записывает корпус в виде записей аннотаций (смещения в атомах)."""
    wanted = None if types is None else set(types)
    lines = []
    for document in corpus:
        if include_atoms:
            lines.extend(format_annotation_record(atom) for atom in document.atoms)
        if include_sentences:
            lines.extend(
                format_annotation_record(Annotation(document.document_id, s, e, SENTENCE_TYPE))
                for s, e in document.sentence_boundaries
            )
        lines.extend(
            format_annotation_record(a) for a in document.annotations
            if wanted is None or a.type in wanted
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def stats_path_for(pattern_path: PathLike) -> Path:
    pattern_path = Path(pattern_path)
    return pattern_path.with_name(pattern_path.stem + ".stats.tsv")


def priors_path_for(pattern_path: PathLike) -> Path:
    return Path(pattern_path).with_name("priors.tsv")


def write_pattern_file(pairs: Iterable[PatternTargetPair], path: PathLike):
    """Записывает пары в файл шаблонов, от частых к редким."""
    ordered = sorted(pairs, key=lambda p: (p.label, -p.applications, p.pair_id))
    lines = [PatternFileRecord.from_pair(pair).to_line() for pair in ordered]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_pattern_file(path: PathLike, stats_path: Optional[PathLike] = None) -> List[PatternTargetPair]:
    """
    Читает файл шаблонов; статистика подтягивается из побочного файла, если он есть.

    Raises:
        CorpusFormatError: Некорректная строка файла (с номером строки)
    """
    stats = {}
    stats_path = Path(stats_path) if stats_path is not None else stats_path_for(path)
    if stats_path.exists():
        stats = read_stats_file(stats_path)

    pairs = []
    for line_number, line in enumerate(_read_lines(path), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            pair = PatternFileRecord.from_line(line).to_pair()
        except (PatternParseError, ValueError) as exc:
            raise CorpusFormatError(str(exc), line_number) from exc
        if pair.pair_id in stats:
            pair = pair.with_stats(stats[pair.pair_id])
        pairs.append(pair)
    return pairs


def write_stats_file(pairs: Iterable[PatternTargetPair], path: PathLike):
    pairs_frame(pairs)[STATS_COLUMNS].to_csv(path, sep="\t", index=False)


def read_stats_file(path: PathLike) -> Dict[str, PairStats]:
    frame = pd.read_csv(path, sep="\t", dtype={"pair_id": str})
    missing = set(STATS_COLUMNS) - set(frame.columns)
    if missing:
        raise CorpusFormatError(f"в файле статистики нет колонок: {sorted(missing)}")
    return {
        row.pair_id: PairStats(int(row.applications), int(row.true_positives))
        for row in frame.itertuples(index=False)
    }


def write_priors(table: PriorTable, path: PathLike):
    table.to_frame().to_csv(path, sep="\t", index=False)


def read_priors(path: PathLike) -> PriorTable:
    frame = pd.read_csv(path, sep="\t", keep_default_na=False,
                        dtype={"token": str, "label": str})
    missing = set(PRIOR_COLUMNS) - set(frame.columns)
    if missing:
        raise CorpusFormatError(f"в файле априорных вероятностей нет колонок: {sorted(missing)}")
    return PriorTable(frame)


def document_from_dict(data: Dict, default_id: str = "doc") -> Document:
    """
    Строит документ из JSON-словаря.

    Формат: ``{"id": ..., "sentences": [[токен, ...], ...], "annotations": [...]}``,
    где токен задается строкой или словарем признаков с обязательным ``string``;
    аннотация: ``{"start", "end", "type", "features"}`` в индексах атомов.

    Raises:
        CorpusFormatError: Некорректная структура документа
    """
    document_id = str(data.get("id", default_id))
    sentences = data.get("sentences")
    if sentences is None and "tokens" in data:
        sentences = [data["tokens"]]
    if not isinstance(sentences, list) or not all(isinstance(s, list) for s in sentences):
        raise CorpusFormatError(f"документ {document_id}: sentences должен быть списком списков токенов")

    atoms, boundaries = [], []
    for sentence in sentences:
        start = len(atoms)
        for token in sentence:
            features = {"string": token} if isinstance(token, str) else dict(token)
            if "string" not in features:
                raise CorpusFormatError(f"документ {document_id}: у токена {len(atoms)} нет string")
            atoms.append(Annotation(document_id, len(atoms), len(atoms) + 1, ATOM_TYPE, features))
        if len(atoms) > start:
            boundaries.append((start, len(atoms)))

    annotations = []
    for item in data.get("annotations", ()):
        try:
            annotations.append(Annotation(document_id, int(item["start"]), int(item["end"]),
                                          str(item["type"]), item.get("features", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusFormatError(f"документ {document_id}: некорректная аннотация {item!r} ({exc})") from exc
    return Document(document_id, atoms, annotations, boundaries)


def annotation_to_dict(annotation: Annotation) -> Dict:
    return {
        "document_id": annotation.document_id,
        "start": annotation.start,
        "end": annotation.end,
        "type": annotation.type,
        "features": annotation.feature_map,
    }
