#!/usr/bin/env python
# Run this with `npm run api-smoke`
# Only intended to run against a local dev server.
from __future__ import annotations

import json
import sys
from pathlib import Path

import httpx

BASE_URL = "http://localhost:8000"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"

RUNS = [
    ("spectrum", "oscillator.cfg", None),
    ("maslov", "oscillator.cfg", None),
    ("build", "flat_weyl.cfg", None),
    ("equiv", "flat_weyl.cfg", "flat_weyl_shifted.cfg"),
]


def check_server_health(client: httpx.Client) -> None:
    """Ensure the API server is up before running the smoke test."""
    url = f"{BASE_URL}/healthz"
    print(f"Checking API health at {url} ...")
    try:
        resp = client.get(url)
    except httpx.RequestError as exc:
        raise SystemExit(f"ERROR: The server is probably not running. Failed to reach {url}: {exc}")

    payload = resp.json() if resp.status_code == 200 else {}
    if payload.get("status") != "ok":
        raise SystemExit(f"ERROR: unexpected /healthz response {resp.status_code}: {resp.text}")
    print("Health check OK.\n")


def run_one(client: httpx.Client, command: str, config: str, config_b: str | None) -> int:
    body = {"command": command, "config": (CONFIGS / config).read_text(encoding="utf-8"), "order": 2}
    if config_b:
        body["config_b"] = (CONFIGS / config_b).read_text(encoding="utf-8")
    resp = client.post(f"{BASE_URL}/api/v1/runs", json=body)
    if resp.status_code != 200:
        print(f"{command} {config}: HTTP {resp.status_code} {json.dumps(resp.json())}")
        return 1
    report = resp.json()
    verdicts = ", ".join(f"{v['name']}={v['verdict']}" for v in report["verdicts"]) or "-"
    print(f"{command} {config}: exit {report['exit_code']} [{verdicts}]")
    return 0


def main() -> None:
    with httpx.Client(timeout=120) as client:
        check_server_health(client)
        failures = sum(run_one(client, *run) for run in RUNS)
    if failures:
        sys.exit(1)
    print("\nSmoke test complete.")


if __name__ == "__main__":
    main()
