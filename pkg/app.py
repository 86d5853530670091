#!/usr/bin/env python3
"""
Единая точка входа в систему извлечения именованных сущностей по шаблонам.

Команды: обучение пар шаблонов, применение к корпусу, оценка, просмотр
пар, воспроизведение эталонного эксперимента, HTTP сервер, генерация
синтетических корпусов и отладка выравнивания.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from config import SystemConfig, get_config, setup_logging
from src.algorithms.grid_aligner import align_with_matrix, dump_matrix
from src.data.corpus_io import (
    document_from_dict,
    ingest_conll,
    read_annotation_records,
    read_pattern_file,
    write_annotation_records,
    write_conll,
)
from src.data.sample_data import (
    chain_corpus,
    context_example_corpus,
    create_sample_corpora,
    overlapping_annotation_document,
)
from src.evaluation.evaluator import compare_with_reference, evaluate
from src.exceptions import (
    AnnotationRangeError,
    ConfigError,
    CorpusFormatError,
    FixpointError,
    PatternParseError,
)
from src.extraction_system import STAGE_FULL, ExtractionSystem
from src.models.annotation_grid import build_grid
from src.models.data_models import Corpus


RECORD_SUFFIXES = (".tsv", ".records")
DOMAIN_ERRORS = (AnnotationRangeError, ConfigError, CorpusFormatError, FixpointError, PatternParseError, ValueError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Извлечение именованных сущностей по шаблонам выравнивания',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры использования:

  # Синтетический корпус в data/
  python app.py generate-data --output-dir data

  # Обучение на train + testa
  python app.py train --input data/train.tsv data/testa.tsv --output data/patterns.tsv

  # Применение и оценка
  python app.py apply --patterns data/patterns.tsv --input data/testb.tsv --output out.tsv
  python app.py eval --patterns data/patterns.tsv --gold data/testb.tsv --records report.tsv

  # Десять самых частых пар для PER
  python app.py patterns --patterns data/patterns.tsv --label PER --top 10

  # Дамп матрицы выравнивания
  python app.py align "A B C D E" "H A B G C D" --gap 0 --dump-matrix
        """
    )
    parser.add_argument('--environment', choices=['development', 'testing', 'production'], default=None,
                        help='Окружение для загрузки конфигурации')
    parser.add_argument('--config', type=str, default=None, help='Файл конфигурации KEY=value')
    parser.add_argument('--log-level', type=str, default=None, help='Уровень логирования')
    parser.add_argument('--n-jobs', type=int, default=None, help='Число параллельных заданий')

    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='Сгенерировать, оценить и отобрать пары шаблонов')
    _add_corpus_args(train, '--input', nargs='+', help='Обучающие корпуса (CoNLL или записи аннотаций)')
    train.add_argument('--output', type=str, default=None, help='Файл шаблонов')
    train.add_argument('--threshold', type=float, default=None, help='Минимальная точность пары')
    train.add_argument('--min-support', type=int, default=None, help='Минимальное число применений')
    train.add_argument('--max-pairs', type=int, default=None, help='Предел числа выравниваемых пар')
    train.add_argument('--window', choices=['SENTENCE', 'TOKENS'], default=None, help='Общий контекст')
    train.add_argument('--window-size', type=int, default=None, help='Размер окна TOKENS')
    train.add_argument('--label-context', action='store_true', help='Оставлять эталонные метки в контекстах')
    train.add_argument('--split-all-gaps', action='store_true',
                       help='Резать контекст на каждом пропуске, включая двусторонние')
    train.add_argument('--no-filter', action='store_true', help='Не удалять пары, покрытые более короткими')
    train.add_argument('--database', type=str, default=None, help='Сохранить пары в хранилище (URL SQLAlchemy)')

    apply = commands.add_parser('apply', help='Применить пары шаблонов к корпусу')
    apply.add_argument('--patterns', type=str, default=None, help='Файл шаблонов')
    _add_corpus_args(apply, '--input', help='Корпус для разметки')
    apply.add_argument('--output', type=str, required=True, help='Файл записей аннотаций')
    apply.add_argument('--no-priors', action='store_true', help='Не использовать априорные вероятности')

    evaluate_cmd = commands.add_parser('eval', help='Оценить разметку')
    evaluate_cmd.add_argument('--patterns', type=str, default=None, help='Файл шаблонов')
    _add_corpus_args(evaluate_cmd, '--gold', help='Корпус с эталонными метками')
    evaluate_cmd.add_argument('--system', type=str, default=None,
                              help='Готовая разметка (записи аннотаций); иначе применяются шаблоны')
    evaluate_cmd.add_argument('--records', type=str, default=None, help='Файл машиночитаемого отчета')
    evaluate_cmd.add_argument('--baseline', action='store_true', help='Добавить этап разметки только по Lookup')

    patterns = commands.add_parser('patterns', help='Показать пары шаблонов')
    patterns.add_argument('--patterns', type=str, default=None, help='Файл шаблонов')
    patterns.add_argument('--database', type=str, default=None, help='Хранилище пар (URL SQLAlchemy)')
    patterns.add_argument('--label', type=str, default=None, help='Метка')
    patterns.add_argument('--top', type=int, default=10, help='Количество пар')
    patterns.add_argument('--sort', choices=['count', 'precision'], default='count', help='Порядок')

    reproduce = commands.add_parser('reproduce', help='Обучение на train + testa, оценка на testb')
    reproduce.add_argument('--train', type=str, default=None, help='Корпус train (CoNLL)')
    reproduce.add_argument('--testa', type=str, default=None, help='Корпус testa (CoNLL)')
    reproduce.add_argument('--testb', type=str, default=None, help='Корпус testb (CoNLL)')
    reproduce.add_argument('--sample', action='store_true', help='Использовать синтетический корпус')
    reproduce.add_argument('--records', type=str, default=None, help='Файл машиночитаемого отчета')

    serve = commands.add_parser('serve', help='Запустить HTTP сервер')
    serve.add_argument('--patterns', type=str, default=None, help='Файл шаблонов')
    serve.add_argument('--database', type=str, default=None, help='Хранилище пар (URL SQLAlchemy)')
    serve.add_argument('--host', type=str, default=None, help='Хост')
    serve.add_argument('--port', type=int, default=None, help='Порт')
    serve.add_argument('--debug', action='store_true', help='Режим отладки')

    commands.add_parser('config', help='Показать текущую конфигурацию')

    generate = commands.add_parser('generate-data', help='Записать встроенные корпуса на диск')
    generate.add_argument('--output-dir', type=str, default=None, help='Каталог')
    generate.add_argument('--documents', type=int, default=None, help='Число документов')
    generate.add_argument('--seed', type=int, default=None, help='Семя генератора')

    align = commands.add_parser('align', help='Выровнять две последовательности токенов')
    align.add_argument('x', type=str, help='Токены X через пробел')
    align.add_argument('y', type=str, help='Токены Y через пробел')
    align.add_argument('--match', type=float, default=None, help='Оценка совпадения')
    align.add_argument('--mismatch', type=float, default=None, help='Оценка несовпадения')
    align.add_argument('--gap', type=float, default=None, help='Штраф за пропуск')
    align.add_argument('--dump-matrix', action='store_true', help='Показать матрицу и переходы')
    return parser


def _add_corpus_args(parser: argparse.ArgumentParser, flag: str, nargs: Optional[str] = None, help: str = ''):
    parser.add_argument(flag, type=str, required=True, nargs=nargs, help=help)
    parser.add_argument('--format', choices=['auto', 'conll', 'records'], default='auto',
                        help='Формат корпуса (auto: .tsv/.records как записи, остальное как CoNLL)')


def load_corpus(path: str, fmt: str = 'auto', strict: bool = False) -> Corpus:
    """Читает корпус в формате CoNLL или записей аннотаций."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"Файл не найден: {path}")
    if fmt == 'records' or (fmt == 'auto' and Path(path).suffix in RECORD_SUFFIXES):
        return read_annotation_records(path)
    return ingest_conll(path, strict=strict)


def load_corpora(paths: List[str], fmt: str = 'auto', strict: bool = False) -> Corpus:
    documents = []
    for path in paths:
        documents.extend(load_corpus(path, fmt, strict))
    return Corpus(documents)


def apply_cli_overrides(config: SystemConfig, args: argparse.Namespace) -> SystemConfig:
    """Флаги командной строки переопределяют файл конфигурации и окружение."""
    if args.log_level:
        config.logging.level = args.log_level.upper()
    if args.n_jobs is not None:
        config.generation.n_jobs = args.n_jobs
    for flag, section, name in [
        ('threshold', 'refine', 'threshold'),
        ('min_support', 'refine', 'min_support'),
        ('max_pairs', 'generation', 'max_pairs'),
        ('window', 'generation', 'window'),
        ('window_size', 'generation', 'window_size'),
        ('match', 'alignment', 'match_score'),
        ('mismatch', 'alignment', 'mismatch_score'),
        ('gap', 'alignment', 'gap_penalty'),
        ('host', 'api', 'host'),
        ('port', 'api', 'port'),
        ('seed', 'data', 'sample_seed'),
        ('documents', 'data', 'sample_documents'),
        ('output_dir', 'data', 'data_dir'),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            setattr(getattr(config, section), name, value)
    if getattr(args, 'label_context', False):
        config.generation.label_context = True
    if getattr(args, 'split_all_gaps', False):
        config.generation.join_bilateral_gaps = False
    if getattr(args, 'no_filter', False):
        config.refine.filter_subsumed = False
    if getattr(args, 'no_priors', False):
        config.priors.enabled = False
    if getattr(args, 'debug', False):
        config.api.debug = True
    if getattr(args, 'database', None):
        config.database.url = args.database
    config.validate()
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция приложения; возвращает код завершения."""
    args = build_parser().parse_args(argv)
    try:
        config = apply_cli_overrides(get_config(args.environment, args.config), args)
        setup_logging(config.logging)
        handler = COMMANDS[args.command]
        handler(config, args)
    except FileNotFoundError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1
    return 0


def _load_system(config: SystemConfig, patterns_path: Optional[str]) -> ExtractionSystem:
    system = ExtractionSystem.from_config(config)
    system.load(patterns_path or config.data.patterns_file)
    return system


def run_train(config: SystemConfig, args: argparse.Namespace):
    """Обучает пары шаблонов и сохраняет их."""
    print("🚀 ОБУЧЕНИЕ ПАР ШАБЛОНОВ")
    print("=" * 50)
    training = load_corpora(args.input, args.format, config.data.strict_conll)
    stats = training.get_statistics()
    print(f"📚 Корпус: {stats['documents']} документов, {stats['sentences']} предложений, {stats['atoms']} токенов")

    system = ExtractionSystem.from_config(config)
    summary = system.train(training)
    system.save(args.output or config.data.patterns_file)

    print("\n📊 Пары по меткам:")
    for label, label_summary in summary.labels.items():
        print(f"  - {label}: сгенерировано {label_summary.pairs}, отобрано {label_summary.refined}, "
              f"оставлено {label_summary.kept}")

    if config.database.url:
        from src.database.db_models import PatternDatabase

        pattern_db = PatternDatabase(config.database.url, echo=config.database.echo)
        pattern_db.create_tables()
        saved = pattern_db.save_pairs(system.pairs)
        print(f"🗄️ Сохранено в хранилище: {saved} пар")


def run_apply(config: SystemConfig, args: argparse.Namespace):
    """Размечает корпус и записывает аннотации."""
    print("🚀 ПРИМЕНЕНИЕ ШАБЛОНОВ")
    print("=" * 50)
    system = _load_system(config, args.patterns)
    corpus = load_corpus(args.input, args.format, config.data.strict_conll)
    result = system.apply(corpus)
    write_annotation_records(result.corpus, args.output)

    added = len(result.corpus.annotations(system.labels))
    print(f"✅ Итераций: {result.report.iterations}, добавлено по итерациям: {result.report.added_per_iteration}")
    print(f"💾 Аннотаций меток: {added}, записано в {args.output}")


def run_eval(config: SystemConfig, args: argparse.Namespace):
    """Оценивает разметку и печатает отчет."""
    gold = load_corpus(args.gold, args.format, config.data.strict_conll)
    if args.system:
        system_corpus = load_corpus(args.system, 'records')
        report = evaluate(system_corpus, gold, config.data.labels, STAGE_FULL)
    else:
        system = _load_system(config, args.patterns)
        report = system.evaluate(gold, baseline=args.baseline)

    print("📊 ОТЧЕТ ОЦЕНКИ")
    print("=" * 69)
    print(report.format_table())
    if args.records:
        report.write_records(args.records)
        print(f"\n💾 Отчет записан в {args.records}")


def format_pattern_table(rows: List[dict]) -> str:
    """Таблица пар: шаблон, цель, счетчик, точность."""
    width = max([len("Pattern")] + [len(row["context"]) for row in rows])
    target_width = max([len("Target")] + [len(row["target"]) for row in rows])
    lines = [f"{'Pattern':<{width}}  {'Target':<{target_width}}  {'Count':>6}  {'Precision':>9}",
             "-" * (width + target_width + 21)]
    for row in rows:
        precision = "-" if row["precision"] is None else f"{row['precision']:.3f}"
        lines.append(f"{row['context']:<{width}}  {row['target']:<{target_width}}  "
                     f"{row['count']:>6}  {precision:>9}")
    return "\n".join(lines)


def run_patterns(config: SystemConfig, args: argparse.Namespace):
    """Показывает пары, отсортированные по частоте или точности."""
    if config.database.url and not args.patterns:
        from src.database.db_models import PatternDatabase

        pattern_db = PatternDatabase(config.database.url, echo=config.database.echo)
        pattern_db.create_tables()
        rows = pattern_db.top_pairs(args.label, args.top, args.sort)
    else:
        path = args.patterns or config.data.patterns_file
        if not Path(path).is_file():
            raise FileNotFoundError(f"Файл шаблонов не найден: {path}")
        pairs = [p for p in read_pattern_file(path) if args.label is None or p.label == args.label]

        def order(pair):
            precision = pair.precision if pair.precision is not None else -1.0
            if args.sort == 'count':
                return (-pair.applications, -precision, pair.pair_id)
            return (-precision, -pair.applications, pair.pair_id)

        rows = [
            {"context": str(p.context), "target": str(p.target), "count": p.applications, "precision": p.precision}
            for p in sorted(pairs, key=order)[:args.top]
        ]

    title = f"метка {args.label}" if args.label else "все метки"
    print(f"📋 ПАРЫ ШАБЛОНОВ ({title}, по {args.sort})")
    print(format_pattern_table(rows))


def run_reproduce(config: SystemConfig, args: argparse.Namespace):
    """Обучение на train + testa, оценка на testb и сравнение с эталонными F1."""
    print("🔬 ВОСПРОИЗВЕДЕНИЕ ЭКСПЕРИМЕНТА")
    print("=" * 50)
    if args.sample:
        corpora = create_sample_corpora(config.data.sample_documents, config.data.sample_seed)
        training = Corpus(list(corpora["train"]) + list(corpora["testa"]))
        test = corpora["testb"]
    else:
        if not (args.train and args.testa and args.testb):
            raise ValueError("Нужны --train, --testa и --testb или --sample")
        training = load_corpora([args.train, args.testa], 'conll', config.data.strict_conll)
        test = load_corpus(args.testb, 'conll', config.data.strict_conll)

    system = ExtractionSystem.from_config(config)
    system.train(training)
    report = system.evaluate(test, baseline=True)
    print(report.format_table())

    labels = [label for label in ("PER", "ORG", "LOC") if label in system.labels]
    comparison = compare_with_reference(report)
    comparison = comparison[comparison["label"].isin(labels)]
    print("\n📐 Сравнение F1 на уровне сущностей с эталоном:")
    for row in comparison.itertuples(index=False):
        flag = "⚠️ " if row.flagged else "✅"
        print(f"  {flag} {row.label}: F1 {row.f1:.3f}, эталон {row.reference:.3f}, разница {row.delta:+.3f}")
    if args.records:
        report.write_records(args.records)


def run_serve(config: SystemConfig, args: argparse.Namespace):
    """Запускает HTTP сервер."""
    from src.api.flask_api import create_api

    system = _load_system(config, args.patterns)
    api = create_api(system, config.database.url, cors_origins=config.api.cors_origins,
                     default_top=config.api.default_top)
    api.app.config['MAX_CONTENT_LENGTH'] = config.api.max_content_length

    print(f"✅ Система готова: {len(system.pairs)} пар")
    print(f"\n🌐 Запуск API сервера на {config.api.host}:{config.api.port}")
    print(f"❤️  Health check: http://{config.api.host}:{config.api.port}/health")
    try:
        api.run(host=config.api.host, port=config.api.port, debug=config.api.debug)
    except KeyboardInterrupt:
        print("\n👋 Сервер остановлен пользователем")


def show_config(config: SystemConfig, args: argparse.Namespace = None):
    """Показывает текущую конфигурацию."""
    print("🔧 ТЕКУЩАЯ КОНФИГУРАЦИЯ")
    print("=" * 50)
    print(json.dumps(config.to_dict(), indent=2, ensure_ascii=False))


def run_generate_data(config: SystemConfig, args: argparse.Namespace):
    """Записывает синтетические и демонстрационные корпуса."""
    output_dir = Path(config.data.data_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    print(f"🏗️ Генерация корпусов в {output_dir}...")

    corpora = create_sample_corpora(config.data.sample_documents, config.data.sample_seed)
    for split, corpus in corpora.items():
        write_annotation_records(corpus, output_dir / f"{split}.tsv")
        write_conll(corpus, output_dir / f"{split}.conll", config.data.labels)
        print(f"  - {split}: {len(corpus)} документов")

    write_annotation_records(chain_corpus(), output_dir / "chain.tsv")
    write_annotation_records(context_example_corpus(), output_dir / "flights.tsv")
    write_annotation_records(Corpus([overlapping_annotation_document()]), output_dir / "acme.tsv")
    print("✅ Корпуса записаны (записи аннотаций .tsv и CoNLL .conll)")


def run_align(config: SystemConfig, args: argparse.Namespace):
    """Выравнивает две последовательности токенов."""
    grids = []
    for name, text in (('x', args.x), ('y', args.y)):
        document = document_from_dict({"id": name, "sentences": [text.split()]})
        grids.append(build_grid(document, key_policy=config.key_policy))
    alignment, matrix = align_with_matrix(grids[0], grids[1], config.scoring)

    if args.dump_matrix:
        print(dump_matrix(matrix))
        print()
    print(f"Оценка: {alignment.score:g}")
    for element in alignment.elements:
        keys = "!".join(key.to_text() for key in element.keys)
        print(f"  X[{element.x_start}:{element.x_end}] ~ Y[{element.y_start}:{element.y_end}]  {keys}")


COMMANDS = {
    'train': run_train,
    'apply': run_apply,
    'eval': run_eval,
    'patterns': run_patterns,
    'reproduce': run_reproduce,
    'serve': run_serve,
    'config': show_config,
    'generate-data': run_generate_data,
    'align': run_align,
}


if __name__ == '__main__':
    sys.exit(main())
