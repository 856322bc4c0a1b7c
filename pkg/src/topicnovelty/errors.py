"""Exception types shared across the pipeline."""

from __future__ import annotations


class TopicNoveltyError(Exception):
    """Base class for library errors."""


class YearRangeError(TopicNoveltyError, ValueError):
    pass


class DuplicateError(TopicNoveltyError, ValueError):
    pass


class LexiconError(TopicNoveltyError, ValueError):
    pass


class EmptyVocabularyError(TopicNoveltyError, ValueError):
    pass


class VocabularyMismatchError(TopicNoveltyError, ValueError):
    pass


class AlignmentError(TopicNoveltyError, ValueError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class TopicMissingError(TopicNoveltyError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else ""


class NoHistoryError(TopicNoveltyError, LookupError):
    pass


class MissingDataError(TopicNoveltyError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UndefinedGrowthError(TopicNoveltyError, ZeroDivisionError):
    pass


class CollinearityError(TopicNoveltyError, ValueError):
    def __init__(self, message: str, columns: list[str]):
        super().__init__(message)
        self.columns = columns


class InsufficientDataError(TopicNoveltyError, ValueError):
    pass


class ConfigError(TopicNoveltyError, ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class MissingPrerequisiteError(TopicNoveltyError, FileNotFoundError):
    def __init__(self, message: str, artifact: str | None = None):
        super().__init__(message)
        self.artifact = artifact
