"""
Хранилище пар шаблонов в базе данных.

Поддерживает SQLite и PostgreSQL (любой URL SQLAlchemy).
"""

import os
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional

from sqlalchemy import Column, DateTime, Float, Integer, String, Text, create_engine, func
from sqlalchemy.orm import declarative_base, sessionmaker

from ..models.patterns import PairStats, PatternFileRecord, PatternTargetPair, serialize_pattern


Base = declarative_base()

SORT_COLUMNS = ("count", "precision")


class PatternPairRecord(Base):
    """Модель пары шаблонов со статистикой."""
    __tablename__ = 'pattern_pairs'

    pair_id = Column(String(12), primary_key=True)
    label = Column(String(32), nullable=False, index=True)
    context = Column(Text, nullable=False)
    target = Column(Text, nullable=False)
    length = Column(Integer, nullable=False)
    applications = Column(Integer, default=0)
    true_positives = Column(Integer, default=0)
    precision = Column(Float)  # NULL для пар без применений
    created_date = Column(DateTime, default=datetime.utcnow)

    @classmethod
    def from_pair(cls, pair: PatternTargetPair) -> 'PatternPairRecord':
        stats = pair.stats
        return cls(
            pair_id=pair.pair_id,
            label=pair.label,
            context=serialize_pattern(pair.context),
            target=serialize_pattern(pair.target),
            length=pair.length,
            applications=stats.applications if stats else 0,
            true_positives=stats.true_positives if stats else 0,
            precision=pair.precision,
        )

    def to_pair(self) -> PatternTargetPair:
        """Восстанавливает пару со статистикой."""
        pair = PatternFileRecord(self.context, self.target, self.label).to_pair()
        return pair.with_stats(PairStats(self.applications or 0, self.true_positives or 0))

    def to_dict(self) -> Dict[str, Any]:
        """Преобразует объект в словарь."""
        return {
            'pair_id': self.pair_id,
            'label': self.label,
            'context': self.context,
            'target': self.target,
            'length': self.length,
            'count': self.applications,
            'true_positives': self.true_positives,
            'precision': self.precision,
        }


class PatternDatabase:
    """Менеджер хранилища пар шаблонов."""

    def __init__(self, database_url: Optional[str] = None, echo: bool = False):
        """
        Инициализация хранилища.

        Args:
            database_url: URL базы данных (если None, используется SQLite в data/)
            echo: Логировать SQL запросы
        """
        if database_url is None:
            db_path = os.path.join(os.path.dirname(__file__), '..', '..', 'data', 'patterns.db')
            database_url = f"sqlite:///{db_path}"

        self.database_url = database_url
        self.engine = create_engine(database_url, echo=echo)
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)

    def create_tables(self):
        """Создает все таблицы в базе данных."""
        Base.metadata.create_all(bind=self.engine)

    def get_session(self):
        """Возвращает сессию базы данных."""
        return self.SessionLocal()

    def save_pairs(self, pairs: Iterable[PatternTargetPair], replace: bool = True) -> int:
        """
        Сохраняет пары; существующие записи с тем же pair_id обновляются.

        Args:
            pairs: Пары со статистикой
            replace: Удалить все прежние записи перед сохранением

        Returns:
            Количество сохраненных пар
        """
        session = self.get_session()
        try:
            if replace:
                session.query(PatternPairRecord).delete()
            count = 0
            for pair in pairs:
                session.merge(PatternPairRecord.from_pair(pair))
                count += 1
            session.commit()
            return count
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def load_pairs(self, label: Optional[str] = None) -> List[PatternTargetPair]:
        """Загружает пары (все или одной метки)."""
        session = self.get_session()
        try:
            query = session.query(PatternPairRecord)
            if label is not None:
                query = query.filter(PatternPairRecord.label == label)
            return [record.to_pair() for record in query.order_by(PatternPairRecord.pair_id).all()]
        finally:
            session.close()

    def top_pairs(self, label: Optional[str] = None, top: int = 10, sort: str = "count") -> List[Dict[str, Any]]:
        """
        Самые частые (sort=count) или самые точные (sort=precision) пары.

        Raises:
            ValueError: Неизвестный порядок сортировки
        """
        if sort not in SORT_COLUMNS:
            raise ValueError(f"sort должен быть count или precision, получено {sort}")
        session = self.get_session()
        try:
            query = session.query(PatternPairRecord)
            if label is not None:
                query = query.filter(PatternPairRecord.label == label)
            if sort == "count":
                order = (PatternPairRecord.applications.desc(), PatternPairRecord.precision.desc())
            else:
                order = (PatternPairRecord.precision.desc(), PatternPairRecord.applications.desc())
            records = query.order_by(*order, PatternPairRecord.pair_id).limit(top).all()
            return [record.to_dict() for record in records]
        finally:
            session.close()

    def get_database_stats(self) -> Dict[str, Any]:
        """Получает статистику хранилища."""
        session = self.get_session()
        try:
            by_label = dict(
                session.query(PatternPairRecord.label, func.count(PatternPairRecord.pair_id))
                .group_by(PatternPairRecord.label).all()
            )
            return {
                'pairs_count': sum(by_label.values()),
                'pairs_by_label': by_label,
                'database_url': self.database_url,
            }
        finally:
            session.close()
