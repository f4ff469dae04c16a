# routers/runs.py
from fastapi import APIRouter, Depends

from dependencies import get_run_config, translate_domain_errors
from harness import run_single, summarize
from schemas import RunConfig, RunSummary

router = APIRouter(
    prefix="/api/v1/runs",
    tags=["runs"],
    dependencies=[Depends(translate_domain_errors)],
)


# Синхронный прогон без записи файлов; считается в пуле потоков FastAPI
@router.post("/simulate", response_model=RunSummary)
def simulate_run(
    run: RunConfig = Depends(get_run_config)
) -> RunSummary:
    bundle = run_single(run, write=False)
    return summarize(bundle)
