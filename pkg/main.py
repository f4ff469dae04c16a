# main.py
# Главный файл приложения
import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

import config
from routers import model, runs

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    config.configure_logging(config.LOG_LEVEL)
    logger.info("Запуск приложения, результаты в %s", config.output_root())
    yield
    logger.info("Остановка приложения")

app = FastAPI(
    title="KS-flux API",
    description="Радиальная модель хемотаксиса с ограничением потока: показатели, окна и прогоны",
    version=config.__version__,
    lifespan=lifespan
)


app.include_router(model.router)
app.include_router(runs.router)


@app.get("/")
async def read_root() -> dict:
    return {
        "message": "KS-flux API - численный анализ взрыва в модели с ограничением потока",
        "version": config.__version__,
        "docs": "/docs",
        "redoc": "/redoc",
    }


@app.get("/health")
async def health_check() -> dict:
    """
    Проверка здоровья API.
    """
    return {
        "status": "healthy"
    }
