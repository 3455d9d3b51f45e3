import logging
from typing import Any

from fastapi import APIRouter, HTTPException, status
from fastapi.concurrency import run_in_threadpool

from app.domain import Command, WorkbenchError
from app.models import RunReport, RunRequest
from app.services.reporting import report_schema, run

router = APIRouter(prefix="/api/v1", tags=["runs"])

logger = logging.getLogger("fedosov.api.runs")


def _execute(request: RunRequest) -> RunReport:
    return run(
        request.command,
        request.config,
        request.config_b,
        order=request.order,
        budget=request.budget,
        is_text=True,
    )


@router.post(
    "/runs",
    response_model=RunReport,
    summary="Run one workbench command on config text",
)
async def create_run(payload: RunRequest) -> RunReport:
    """Parse the config text, run the command and return the report with its exit code."""

    if payload.command is Command.EQUIV and not payload.config_b:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail={"code": "equiv_needs_two", "message": "equiv requires config_b"},
        )
    try:
        report = await run_in_threadpool(_execute, payload)
    except WorkbenchError as exc:
        logger.info("Run rejected: command=%s code=%s", payload.command.value, exc.code)
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=exc.to_detail()) from exc

    logger.info("Run completed: command=%s exit=%s", payload.command.value, report.exit_code)
    return report


@router.get("/schema", summary="JSON schema of run reports")
def get_schema() -> dict[str, Any]:
    return report_schema()
