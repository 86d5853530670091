"""
Встроенные корпуса для демонстрации и тестов.

Модуль содержит небольшие документы с перекрывающимися аннотациями,
пример из трех предложений для генерации контекстов, корпус с цепочкой
зависимых шаблонов и генератор синтетического корпуса спортивных
результатов с эталонной разметкой PER/ORG/LOC.
"""

import random
from typing import Dict, List, Optional, Sequence, Tuple

from ..models.data_models import ATOM_TYPE, Annotation, Corpus, Document, ElementKey
from ..models.patterns import ContextPattern, PatternElement, PatternTargetPair, TargetPattern


LABELS = ("PER", "ORG", "LOC")


class DocumentBuilder:
    """Пошаговая сборка документа из предложений, токенов и аннотаций."""

    def __init__(self, document_id: str):
        self.document_id = document_id
        self.atoms: List[Annotation] = []
        self.annotations: List[Annotation] = []
        self.sentences: List[Tuple[int, int]] = []
        self._sentence_start = 0

    @property
    def position(self) -> int:
        return len(self.atoms)

    def token(self, string: str, category: str, **features) -> int:
        index = self.position
        self.atoms.append(Annotation(self.document_id, index, index + 1, ATOM_TYPE,
                                     {"string": string, "category": category, **features}))
        return index

    def tokens(self, *pairs: Tuple[str, str]) -> Tuple[int, int]:
        start = self.position
        for string, category in pairs:
            self.token(string, category)
        return start, self.position

    def annotate(self, start: int, end: int, type_name: str, **features):
        self.annotations.append(Annotation(self.document_id, start, end, type_name, features))

    def end_sentence(self):
        if self.position > self._sentence_start:
            self.sentences.append((self._sentence_start, self.position))
            self._sentence_start = self.position

    def build(self) -> Document:
        self.end_sentence()
        return Document(self.document_id, self.atoms, self.annotations, self.sentences)


def overlapping_annotation_document() -> Document:
    """
    Предложение "The man sued Acme Company" с перекрывающимися аннотациями:
    две именные группы, глагольная группа и организация.
    """
    builder = DocumentBuilder("acme")
    builder.tokens(("The", "det"), ("man", "noun"), ("sued", "verb"), ("Acme", "nnp"), ("Company", "nnp"))
    builder.annotate(0, 2, "Chunk", kind="np")
    builder.annotate(2, 5, "Chunk", kind="vp")
    builder.annotate(3, 5, "Chunk", kind="np")
    builder.annotate(3, 5, "Lookup", majorType="organization")
    return builder.build()


def context_example_corpus() -> Corpus:
    """
    Три предложения с целью LOC и разными окружениями; общий контекст
    у всех трех одинаков: "flew to :target".
    """
    sentences = [
        [("The", "DT"), ("team", "NN"), ("flew", "VBD"), ("to", "TO"), ("Oslo", "NNP"),
         ("on", "IN"), ("Monday", "NNP"), (".", ".")],
        [("Officials", "NNS"), ("flew", "VBD"), ("to", "TO"), ("Paris", "NNP"),
         ("yesterday", "NN"), (".", ".")],
        [("She", "PRP"), ("flew", "VBD"), ("to", "TO"), ("Madrid", "NNP"), ("twice", "RB"), (".", ".")],
    ]
    documents = []
    for number, sentence in enumerate(sentences, start=1):
        builder = DocumentBuilder(f"flight-{number}")
        builder.tokens(*sentence)
        target = next(i for i, (_, pos) in enumerate(sentence) if pos == "NNP")
        builder.annotate(target, target + 1, "LOC")
        documents.append(builder.build())
    return Corpus(documents)


CHAIN_LABELS = ("STAGE1", "STAGE2", "STAGE3")


def chain_corpus() -> Corpus:
    """Документ, в котором каждая следующая метка зависит от предыдущей."""
    builder = DocumentBuilder("chain")
    builder.tokens(("Mr", "NNP"), ("Alpha", "NNP"), ("Beta", "NNP"), ("Gamma", "NNP"), (".", "."))
    builder.end_sentence()
    builder.tokens(("Nothing", "NN"), ("here", "RB"), (".", "."))
    return Corpus([builder.build()])


def chain_pairs() -> List[List[PatternTargetPair]]:
    """Три набора пар: STAGE1 по слову Mr, STAGE2 после STAGE1, STAGE3 после STAGE2."""
    nnp = TargetPattern([PatternElement.of(ElementKey("token", "category", "nnp"))])
    next_nnp = (PatternElement.of(ElementKey("token", "category", "nnp")),)

    def pair(lc_key: ElementKey, rc: Sequence[PatternElement], label: str) -> PatternTargetPair:
        context = ContextPattern((PatternElement.of(lc_key),), tuple(rc), label)
        return PatternTargetPair(context, TargetPattern(nnp.elements, label), label)

    return [
        [pair(ElementKey("token", "string", "mr"), next_nnp, "STAGE1")],
        [pair(ElementKey("stage1"), next_nnp, "STAGE2")],
        [pair(ElementKey("stage2"), (PatternElement.of(ElementKey("token", "string", ".")),), "STAGE3")],
    ]


MINI_CONLL = """-DOCSTART- -X- -X- O

U.N. NNP I-NP I-ORG
official NN I-NP O
Ekeus NNP B-NP B-PER
heads VBZ I-VP O
for IN I-PP O
Baghdad NNP I-NP I-LOC
. . O O

-DOCSTART- -X- -X- O

Peter NNP I-NP I-PER
Blackburn NNP I-NP I-PER
said VBD I-VP O
. . O O
"""


FIRST_NAMES = [
    "Bjorn", "Marit", "Kjetil", "Hermann", "Alberto", "Lasse", "Vreni", "Katja",
    "Picabo", "Ingemar", "Deborah", "Pernilla", "Jure", "Hilde", "Michael", "Renate",
]
LAST_NAMES = [
    "Dahlie", "Bjoergen", "Aamodt", "Maier", "Tomba", "Kjus", "Schneider", "Seizinger",
    "Street", "Stenmark", "Compagnoni", "Wiberg", "Kosir", "Gerg", "Walchhofer", "Goetschl",
]
COUNTRIES = [
    "Norway", "Austria", "Italy", "Switzerland", "Germany", "Sweden", "Slovenia",
    "France", "Canada", "Finland",
]
CITIES = [
    "Oslo", "Vienna", "Milan", "Geneva", "Munich", "Stockholm", "Ljubljana", "Lyon",
    "Calgary", "Helsinki",
]
TEAMS = [
    ("Feyenoord",), ("PSV", "Eindhoven"), ("Vitesse", "Arnhem"), ("Twente", "Enschede"),
    ("Roda", "JC"), ("NAC", "Breda"), ("Heerenveen",), ("Groningen",),
    ("Sparta", "Rotterdam"), ("Fortuna", "Sittard"),
]
EVENTS = [("World", "Cup"), ("Super", "G"), ("Giant", "Slalom"), ("Downhill",)]
MONTHS = ["January", "February", "March", "April", "November", "December"]
JOB_TITLES = ["coach", "captain", "manager"]


class SportsCorpusGenerator:
    """
    Генератор синтетического корпуса спортивных результатов.

    Документ состоит из строк результатов (место, спортсмен, страна, время),
    счетов матчей (команда, голы) и повествовательных предложений. Словари
    имен, команд и географических названий не пересекаются.
    """

    def __init__(self, seed: int = 42):
        """
        Инициализация генератора.

        Args:
            seed: Семя генератора случайных чисел
        """
        self.rng = random.Random(seed)

    def _person(self, builder: DocumentBuilder):
        first, last = self.rng.choice(FIRST_NAMES), self.rng.choice(LAST_NAMES)
        start = builder.token(first, "NNP")
        builder.token(last, "NNP")
        builder.annotate(start, start + 1, "Lookup", majorType="person_first")
        builder.annotate(start, start + 2, "Chunk", kind="NP")
        builder.annotate(start, start + 2, "PER")

    def _place(self, builder: DocumentBuilder, names: Sequence[str]):
        start = builder.token(self.rng.choice(names), "NNP")
        builder.annotate(start, start + 1, "Lookup", majorType="location")
        builder.annotate(start, start + 1, "Chunk", kind="NP")
        builder.annotate(start, start + 1, "LOC")

    def _team(self, builder: DocumentBuilder):
        index = self.rng.randrange(len(TEAMS))
        start, end = builder.tokens(*[(word, "NNP") for word in TEAMS[index]])
        if index % 2 == 0:
            builder.annotate(start, end, "Lookup", majorType="organization")
        builder.annotate(start, end, "Chunk", kind="NP")
        builder.annotate(start, end, "ORG")

    def _number(self, builder: DocumentBuilder, text: str):
        index = builder.token(text, "CD")
        builder.annotate(index, index + 1, "Number", value=text)

    def _date(self, builder: DocumentBuilder):
        month, day = self.rng.randrange(len(MONTHS)), self.rng.randint(1, 28)
        start, end = builder.tokens((MONTHS[month], "NNP"), (str(day), "CD"))
        builder.annotate(start + 1, end, "Number", value=str(day))
        builder.annotate(start, end, "Date", normalized=f"{month + 1:02d}-{day:02d}")

    def _event(self, builder: DocumentBuilder):
        start, end = builder.tokens(*[(word, "NNP") for word in self.rng.choice(EVENTS)])
        builder.annotate(start, end, "Chunk", kind="NP")

    def results_line(self, builder: DocumentBuilder, place: int):
        self._number(builder, f"{place}.")
        self._person(builder)
        builder.token("(", "(")
        self._place(builder, COUNTRIES)
        builder.token(")", ")")
        self._number(builder, f"{self.rng.randint(1, 2)}:{self.rng.randint(10, 59)}.{self.rng.randint(10, 99)}")
        builder.end_sentence()

    def league_line(self, builder: DocumentBuilder):
        self._team(builder)
        self._number(builder, str(self.rng.randint(0, 4)))
        self._team(builder)
        self._number(builder, str(self.rng.randint(0, 4)))
        builder.end_sentence()

    def win_sentence(self, builder: DocumentBuilder):
        self._person(builder)
        builder.tokens(("won", "VBD"), ("the", "DT"))
        self._event(builder)
        builder.token("in", "IN")
        self._place(builder, CITIES)
        builder.token("on", "IN")
        self._date(builder)
        builder.token(".", ".")
        builder.end_sentence()

    def coach_sentence(self, builder: DocumentBuilder):
        self._team(builder)
        title = builder.token(self.rng.choice(JOB_TITLES), "NN")
        builder.annotate(title, title + 1, "Lookup", majorType="jobtitle")
        self._person(builder)
        builder.tokens(("said", "VBD"), ("the", "DT"), ("team", "NN"), ("was", "VBD"),
                       ("ready", "JJ"), (".", "."))
        builder.end_sentence()

    def beat_sentence(self, builder: DocumentBuilder):
        self._team(builder)
        builder.token("beat", "VBD")
        self._team(builder)
        self._number(builder, f"{self.rng.randint(1, 4)}-{self.rng.randint(0, 1)}")
        builder.token("in", "IN")
        self._place(builder, CITIES)
        builder.token(".", ".")
        builder.end_sentence()

    def medal_sentence(self, builder: DocumentBuilder):
        self._place(builder, COUNTRIES)
        builder.token("won", "VBD")
        self._number(builder, str(self.rng.randint(2, 9)))
        builder.tokens(("medals", "NNS"), (".", "."))
        builder.end_sentence()

    def distractor_sentence(self, builder: DocumentBuilder):
        builder.token("The", "DT")
        self._event(builder)
        builder.tokens(("final", "NN"), ("was", "VBD"), ("held", "VBN"), ("on", "IN"))
        self._date(builder)
        builder.token(".", ".")
        builder.end_sentence()

    def generate_document(self, document_id: str) -> Document:
        """Генерирует один документ."""
        builder = DocumentBuilder(document_id)
        self.rng.choice([self.win_sentence, self.beat_sentence])(builder)
        for place in range(1, self.rng.randint(3, 4) + 1):
            self.results_line(builder, place)
        for _ in range(2):
            self.league_line(builder)
        self.rng.choice([self.coach_sentence, self.medal_sentence, self.distractor_sentence])(builder)
        return builder.build()

    def generate_corpus(self, num_documents: int = 30, prefix: str = "sports") -> Corpus:
        """
        Генерирует корпус.

        Args:
            num_documents: Количество документов
            prefix: Префикс идентификаторов документов

        Returns:
            Корпус с атомами Token, аннотациями Chunk/Lookup/Number/Date и метками PER/ORG/LOC
        """
        return Corpus(self.generate_document(f"{prefix}-{n:03d}") for n in range(1, num_documents + 1))


def create_sample_corpora(num_documents: int = 30, seed: int = 42) -> Dict[str, Corpus]:
    """
    Создает разбиение синтетического корпуса на train, testa и testb.

    Args:
        num_documents: Общее количество документов
        seed: Семя генератора

    Returns:
        Словарь split -> корпус (60% / 20% / 20%)
    """
    generator = SportsCorpusGenerator(seed=seed)
    train_count = num_documents * 3 // 5
    testa_count = (num_documents - train_count) // 2
    return {
        "train": generator.generate_corpus(train_count, "train"),
        "testa": generator.generate_corpus(testa_count, "testa"),
        "testb": generator.generate_corpus(num_documents - train_count - testa_count, "testb"),
    }


def mini_corpus(seed: Optional[int] = 7, num_documents: int = 8) -> Corpus:
    """Небольшой синтетический корпус для быстрых проверок."""
    return SportsCorpusGenerator(seed=seed).generate_corpus(num_documents, "mini")
