# config.py
import logging
import os
from pathlib import Path
from typing import Type, TypeVar

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from errors import ConfigError

load_dotenv()

__version__ = "0.1.0"

# Корень для всех результатов прогонов
OUTPUT_ROOT = os.getenv("KSFLUX_OUTPUT_ROOT", "./runs")
LOG_LEVEL = os.getenv("KSFLUX_LOG_LEVEL", "INFO")
WORKERS = int(os.getenv("KSFLUX_WORKERS", "1"))
API_MAX_NODES = int(os.getenv("KSFLUX_API_MAX_NODES", "1024"))

ModelT = TypeVar("ModelT", bound=BaseModel)


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def output_root() -> Path:
    # перечитываем переменную окружения, чтобы тесты могли её подменять
    return Path(os.getenv("KSFLUX_OUTPUT_ROOT", OUTPUT_ROOT))


def load_config(path: Path, model: Type[ModelT]) -> ModelT:
    """Читает YAML-документ и валидирует его pydantic-моделью."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"Не удалось прочитать {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Некорректный YAML в {path}: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: ожидался словарь верхнего уровня")

    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e
