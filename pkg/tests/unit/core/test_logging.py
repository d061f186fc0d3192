"""Tests for logging setup and the ordered thread fan-out."""

import logging
import threading
import time

import pytest
from rich.console import Console
from rich.logging import RichHandler

from plapbranch.core.logging import ROOT_LOGGER, setup_logging
from plapbranch.core.parallel import ordered_map


@pytest.fixture
def restore_logger():
    logger = logging.getLogger(ROOT_LOGGER)
    handlers, level, propagate = list(logger.handlers), logger.level, logger.propagate
    yield
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    for handler in handlers:
        logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = propagate


@pytest.mark.unit
class TestSetupLogging:
    def test_console_handler(self, restore_logger):
        logger = setup_logging("warning", console=Console(file=None, stderr=True))
        assert logger.level == logging.WARNING
        assert [type(h) for h in logger.handlers] == [RichHandler]
        assert not logger.propagate

    def test_repeated_setup_replaces_handlers(self, restore_logger):
        setup_logging("INFO")
        logger = setup_logging(logging.DEBUG)
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG

    def test_log_file(self, restore_logger, temp_dir):
        path = temp_dir / "logs" / "run.log"
        setup_logging("INFO", log_file=path)
        logging.getLogger(f"{ROOT_LOGGER}.eigsolve").info("solved p=%g", 2.5)
        logging.getLogger(f"{ROOT_LOGGER}.eigsolve").debug("hidden")
        for handler in logging.getLogger(ROOT_LOGGER).handlers:
            handler.flush()
        text = path.read_text(encoding="utf-8")
        assert "INFO     plapbranch.eigsolve: solved p=2.5" in text
        assert "hidden" not in text


@pytest.mark.unit
class TestOrderedMap:
    def test_serial(self):
        assert ordered_map(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]

    def test_threads_keep_order(self):
        def slow_first(x):
            time.sleep(0.05 if x == 0 else 0.0)
            return x, threading.get_ident()

        results = ordered_map(slow_first, range(4), threads=4)
        assert [x for x, _ in results] == [0, 1, 2, 3]

    def test_empty_and_single(self):
        assert ordered_map(str, [], threads=8) == []
        assert ordered_map(str, [5], threads=8) == ["5"]

    def test_errors_propagate(self):
        def fail(x):
            raise ValueError(x)

        with pytest.raises(ValueError):
            ordered_map(fail, [1, 2], threads=2)
