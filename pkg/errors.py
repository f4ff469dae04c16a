# errors.py
from typing import Optional


class KSFluxError(Exception):
    """Базовое исключение проекта."""


class DomainError(KSFluxError, ValueError):
    """Нарушено предусловие операции (вне области определения)."""


class ConfigError(KSFluxError):
    """Файл конфигурации не читается или не проходит валидацию."""


class SweepError(KSFluxError):
    """Бисекция по alpha прервана."""


class StepFailureError(KSFluxError):
    def __init__(self, reason: str, t: Optional[float] = None):
        self.reason = reason
        self.t = t
        where = "" if t is None else f" (t={t:.6g})"
        super().__init__(f"{reason}{where}")
