"""
Исключения системы извлечения информации.

Все ошибки наследуются от стандартных ValueError/RuntimeError, поэтому
вызывающий код, который ловит встроенные исключения, продолжает работать.
"""

from typing import Optional


class AnnotationRangeError(ValueError):
    """Диапазон атомов или аннотация выходят за границы документа."""


class CorpusFormatError(ValueError):
    """Некорректная строка во входном файле корпуса."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"строка {line_number}: {message}"
        super().__init__(message)


class PatternParseError(ValueError):
    """Ошибка разбора строки шаблона."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"позиция {position}: {message}")


class FixpointError(RuntimeError):
    """Итеративное применение шаблонов не сошлось за отведенное число итераций."""


class ConfigError(ValueError):
    """Некорректный файл конфигурации."""
