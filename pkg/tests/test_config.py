import pytest
from pydantic import ValidationError

from tis.config import Settings


def test_defaults(monkeypatch):
    for name in ("TIS_THREADS", "TIS_LOG_LEVEL", "TIS_PORT"):
        monkeypatch.delenv(name, raising=False)
    settings = Settings()
    assert settings.threads == 1
    assert settings.log_level == "INFO"
    assert settings.port == 8000


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TIS_THREADS", "6")
    monkeypatch.setenv("TIS_LOG_LEVEL", "DEBUG")
    settings = Settings()
    assert settings.threads == 6
    assert settings.log_level == "DEBUG"


@pytest.mark.parametrize("name,value", [("TIS_THREADS", "0"), ("TIS_LOG_LEVEL", "LOUD")])
def test_invalid_values(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ValidationError):
        Settings()
