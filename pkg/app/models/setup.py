"""Request models for runs submitted over HTTP."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from app.domain import DEFAULT_COMMAND, Command


class RunRequest(BaseModel):
    """Config text plus the same overrides the CLI accepts."""

    command: Command = Field(default=DEFAULT_COMMAND, description="Workbench command to run")
    config: str = Field(..., description="Config text in the line-oriented grammar")
    config_b: Optional[str] = Field(default=None, description="Second config, required by equiv")
    order: Optional[int] = Field(default=None, ge=0, description="Override of the lambda truncation order")
    budget: Optional[int] = Field(default=None, ge=0, description="Override of the degree budget")
