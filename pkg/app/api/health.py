"""Liveness plus the truncation defaults a run falls back to."""

from typing import Any

from fastapi import APIRouter

from app.config import settings

router = APIRouter()


@router.get("/healthz", summary="Health check and default truncation")
def health_check() -> dict[str, Any]:
    order = settings.default_lambda_order
    return {
        "status": "ok",
        "env": settings.env,
        "truncation": {"lambda_order": order, "budget": settings.default_budget(order)},
        "workers": settings.workers,
    }
