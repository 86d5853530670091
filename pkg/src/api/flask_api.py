"""
Flask API для системы извлечения именованных сущностей.

Этот модуль предоставляет RESTful API для разметки документов обученными
парами шаблонов, просмотра пар и отладки выравнивания.
"""

from typing import Optional

from flask import Flask, jsonify, request
from flask_cors import CORS

from ..algorithms.grid_aligner import align_with_matrix, dump_matrix
from ..data.corpus_io import annotation_to_dict, document_from_dict
from ..database.db_models import SORT_COLUMNS, PatternDatabase
from ..exceptions import FixpointError
from ..extraction_system import ExtractionSystem
from ..models.annotation_grid import build_grid
from ..models.data_models import Corpus


class ExtractionAPI:
    """API класс для системы извлечения."""

    def __init__(self,
                 system: ExtractionSystem,
                 pattern_db: Optional[PatternDatabase] = None,
                 cors_origins=("*",),
                 default_top: int = 20):
        """
        Инициализация API.

        Args:
            system: Обученная или загруженная система извлечения
            pattern_db: Необязательное хранилище пар для /patterns
            cors_origins: Разрешенные источники CORS
            default_top: Количество пар в /patterns по умолчанию
        """
        self.app = Flask(__name__)
        CORS(self.app, origins=list(cors_origins))

        self.system = system
        self.pattern_db = pattern_db
        self.default_top = default_top

        self._register_routes()
        self._register_error_handlers()

    def _register_routes(self):
        """Регистрирует все API маршруты."""

        @self.app.route('/', methods=['GET'])
        def index():
            """Главная страница API."""
            return jsonify({
                "message": "Извлечение именованных сущностей по шаблонам",
                "endpoints": {
                    "GET /": "Информация об API",
                    "GET /health": "Проверка состояния системы",
                    "GET /patterns": "Пары шаблонов (label, top, sort=count|precision)",
                    "POST /extract": "Разметить документы",
                    "POST /align": "Выровнять две последовательности токенов",
                }
            })

        @self.app.route('/health', methods=['GET'])
        def health_check():
            """Проверка состояния системы."""
            info = self.system.get_system_info()
            return jsonify({
                "status": "healthy" if info["is_trained"] else "untrained",
                "pairs": info["pairs"],
                "labels": info["labels"],
                "pattern_store": self.pattern_db.database_url if self.pattern_db else None,
            })

        @self.app.route('/patterns', methods=['GET'])
        def list_patterns():
            """
            Список пар шаблонов.

            Query параметры:
            - label (str): Метка (по умолчанию все)
            - top (int): Количество пар
            - sort (str): count или precision
            """
            label = request.args.get('label')
            sort = request.args.get('sort', 'count')
            try:
                top = int(request.args.get('top', self.default_top))
            except ValueError:
                return jsonify({"success": False, "error": "top должен быть целым числом"}), 400
            if sort not in SORT_COLUMNS:
                return jsonify({"success": False, "error": f"sort должен быть одним из {list(SORT_COLUMNS)}"}), 400

            if self.pattern_db is not None:
                rows = self.pattern_db.top_pairs(label, top, sort)
            else:
                frame = self.system.get_pairs_info().rename(columns={"applications": "count"})
                if label is not None:
                    frame = frame[frame["label"] == label]
                order = ["count", "precision"] if sort == "count" else ["precision", "count"]
                frame = frame.sort_values(order + ["pair_id"], ascending=[False, False, True]).head(top)
                rows = [
                    {k: (None if v != v else v) for k, v in row.items()}
                    for row in frame.drop(columns=["length"]).to_dict(orient="records")
                ]
            return jsonify({"success": True, "data": rows, "count": len(rows)})

        @self.app.route('/extract', methods=['POST'])
        def extract():
            """
            Размечает документы.

            JSON параметры:
            - documents (array): Документы {"id", "sentences": [[токен, ...]], "annotations": [...]}
            """
            data = request.get_json(silent=True)
            if not data or not isinstance(data.get('documents'), list):
                return jsonify({"success": False, "error": "Требуется массив documents в JSON данных"}), 400
            try:
                corpus = Corpus(
                    document_from_dict(item, f"doc-{n}") for n, item in enumerate(data['documents'], start=1)
                )
                result = self.system.apply(corpus)
            except FixpointError as e:
                return jsonify({"success": False, "error": str(e)}), 500
            except ValueError as e:
                return jsonify({"success": False, "error": str(e)}), 400

            labels = set(self.system.labels)
            annotations = [annotation_to_dict(a) for a in result.corpus.annotations(labels)]
            return jsonify({
                "success": True,
                "data": {
                    "annotations": annotations,
                    "iterations": result.report.iterations,
                },
                "count": len(annotations),
            })

        @self.app.route('/align', methods=['POST'])
        def align_tokens():
            """
            Выравнивает две последовательности токенов.

            JSON параметры:
            - x, y (array): Токены (строки или словари признаков)
            - dump_matrix (bool): Вернуть текстовый дамп матрицы
            """
            data = request.get_json(silent=True)
            if not data or not isinstance(data.get('x'), list) or not isinstance(data.get('y'), list):
                return jsonify({"success": False, "error": "Требуются массивы x и y"}), 400
            try:
                grids = [
                    build_grid(document_from_dict({"id": name, "sentences": [data[name]]}),
                               key_policy=self.system.key_policy)
                    for name in ('x', 'y')
                ]
            except ValueError as e:
                return jsonify({"success": False, "error": str(e)}), 400

            alignment, matrix = align_with_matrix(grids[0], grids[1], self.system.scoring)
            payload = {
                "score": alignment.score,
                "elements": [
                    {
                        "x_start": e.x_start, "x_length": e.x_length,
                        "y_start": e.y_start, "y_length": e.y_length,
                        "keys": [key.to_text() for key in e.keys],
                    }
                    for e in alignment.elements
                ],
            }
            if data.get('dump_matrix'):
                payload["matrix"] = dump_matrix(matrix)
            return jsonify({"success": True, "data": payload})

    def _register_error_handlers(self):
        """Регистрирует обработчики ошибок."""

        @self.app.errorhandler(404)
        def not_found(error):
            return jsonify({
                "success": False,
                "error": "Эндпоинт не найден",
                "code": 404
            }), 404

        @self.app.errorhandler(405)
        def method_not_allowed(error):
            return jsonify({
                "success": False,
                "error": "Метод не разрешен",
                "code": 405
            }), 405

    def run(self, host: str = '0.0.0.0', port: int = 3002, debug: bool = False):
        """
        Запускает Flask сервер.

        Args:
            host: Хост для привязки
            port: Порт для привязки
            debug: Режим отладки
        """
        print(f"Запуск API сервера на {host}:{port}")
        print(f"Документация доступна по адресу: http://{host}:{port}/")
        self.app.run(host=host, port=port, debug=debug)


def create_api(system: ExtractionSystem, database_url: Optional[str] = None, **kwargs) -> ExtractionAPI:
    """
    Создает экземпляр API.

    Args:
        system: Система извлечения
        database_url: URL хранилища пар (если None, пары берутся из системы)

    Returns:
        Экземпляр ExtractionAPI
    """
    pattern_db = PatternDatabase(database_url) if database_url else None
    if pattern_db is not None:
        pattern_db.create_tables()
    return ExtractionAPI(system, pattern_db, **kwargs)
