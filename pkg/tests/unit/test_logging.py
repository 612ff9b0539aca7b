"""Unit tests for structured logging setup."""
import json
import logging

from app.utils.logging import setup_logging


class TestSetupLogging:
    def test_json_lines_on_stderr(self, capsys):
        setup_logging("DEBUG")
        logging.getLogger("app.test").debug("tracked 3 sequences")
        err = capsys.readouterr().err.strip().splitlines()[-1]
        record = json.loads(err)
        assert record["message"] == "tracked 3 sequences"
        assert record["level"] == "DEBUG"
        assert record["name"] == "app.test"
        assert "timestamp" in record

    def test_level_applied(self):
        setup_logging("warning")
        assert logging.getLogger().level == logging.WARNING

    def test_replaces_handlers(self):
        setup_logging("INFO")
        setup_logging("INFO")
        assert len(logging.getLogger().handlers) == 1
