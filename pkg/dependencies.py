# dependencies.py
import os
from typing import Iterator

from fastapi import Depends, HTTPException, status

import config
from errors import DomainError, StepFailureError
from schemas import RunConfig


# Перевод доменных ошибок в ответ 422
def translate_domain_errors() -> Iterator[None]:
    try:
        yield
    except DomainError as e:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=str(e)
        ) from e
    except StepFailureError as e:
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Сбой интегрирования: {e}"
        ) from e


def get_max_nodes() -> int:
    return int(os.getenv("KSFLUX_API_MAX_NODES", config.API_MAX_NODES))


# Ограничение размера сетки для синхронного прогона через HTTP
def get_run_config(
    run: RunConfig,
    max_nodes: int = Depends(get_max_nodes)
) -> RunConfig:
    if run.N > max_nodes:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail=f"Сетка N={run.N} больше допустимой {max_nodes}"
        )
    return run
