import pytest
from fastapi.testclient import TestClient

from app.config import settings
from app.main import app


@pytest.fixture()
def client():
    with TestClient(app) as test_client:
        yield test_client


def test_health_and_root(client, monkeypatch):
    monkeypatch.setattr(settings, "env", "test")
    monkeypatch.setattr(settings, "default_lambda_order", 2)
    monkeypatch.setattr(settings, "budget_offset", 3)
    monkeypatch.setattr(settings, "workers", 1)
    assert client.get("/healthz").json() == {
        "status": "ok",
        "env": "test",
        "truncation": {"lambda_order": 2, "budget": 7},
        "workers": 1,
    }
    assert client.get("/").json() == {"message": "Fedosov workbench is running"}


def test_spectrum_run(client, config_text):
    response = client.post("/api/v1/runs", json={"command": "spectrum", "config": config_text("oscillator.cfg")})
    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] == 0
    assert body["source"] == "<text>"
    assert len(body["spectrum"]) == 21
    assert body["spectrum"][1]["energy"] == "3/20"


def test_maslov_run(client, config_text):
    response = client.post("/api/v1/runs", json={"command": "maslov", "config": config_text("oscillator.cfg")})
    assert response.status_code == 200
    maslov = response.json()["maslov"]
    assert (maslov["winding"], maslov["gauge"]) == (2, 2)


def test_build_run_with_order_override(client, config_text):
    response = client.post(
        "/api/v1/runs",
        json={"command": "build", "config": config_text("flat_weyl.cfg"), "order": 1},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["setup"]["lambda_order"] == 1
    assert [table["order"] for table in body["star_coefficients"]] == [0, 1]


def test_parse_errors_are_unprocessable(client):
    response = client.post("/api/v1/runs", json={"command": "build", "config": "[chart]\ndim = 3\n"})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["code"] == "parse_error"
    assert detail["details"] == {"line": 2}


def test_equiv_needs_second_config(client, config_text):
    response = client.post("/api/v1/runs", json={"command": "equiv", "config": config_text("flat_weyl.cfg")})
    assert response.status_code == 422
    assert response.json()["detail"]["code"] == "equiv_needs_two"


def test_negative_order_is_rejected(client, config_text):
    response = client.post("/api/v1/runs", json={"command": "build", "config": config_text("flat_weyl.cfg"), "order": -1})
    assert response.status_code == 422


def test_schema_endpoint(client):
    response = client.get("/api/v1/schema")
    assert response.status_code == 200
    schema = response.json()
    assert schema["title"] == "RunReport"
    assert "exit_code" in schema["required"]
