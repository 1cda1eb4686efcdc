import io
import logging

import pytest

from utils.logger import log_step_details, setup_logger


@pytest.fixture
def stream():
    buffer = io.StringIO()
    yield buffer
    root = logging.getLogger()
    for handler in root.handlers:
        handler.close()
    root.handlers.clear()


def test_progress_line(stream):
    logger = setup_logger("netdyn-test", log_level="DEBUG", log_to_file=False, stream=stream)
    row = {
        "step": 3,
        "t": 0.15,
        "x": [0.2, 0.7, 0.1],
        "utility": -2.5,
        "residual": 1e-6,
        "dissipation": -0.4,
    }
    log_step_details(row, verbose=True, logger=logger)
    line = stream.getvalue()
    assert "Step 00003" in line
    assert "x2  70.00%" in line
    assert "U -2.500000" in line


def test_quiet_unless_verbose(stream):
    logger = setup_logger("netdyn-test", log_to_file=False, stream=stream)
    log_step_details({"step": 1}, verbose=False, logger=logger)
    assert stream.getvalue() == ""


def test_bad_row_is_downgraded_to_warning(stream):
    logger = setup_logger("netdyn-test", log_to_file=False, stream=stream)
    log_step_details({"t": "soon"}, verbose=True, logger=logger)
    assert "[WARNING]" in stream.getvalue()


def test_file_handler(stream, tmp_path):
    logger = setup_logger("netdyn-test", log_to_file=True, log_dir=str(tmp_path), stream=stream)
    logger.info("written to disk")
    for handler in logger.handlers:
        handler.flush()
    files = list(tmp_path.glob("*/netdyn-test_*.log"))
    assert len(files) == 1
    assert "written to disk" in files[0].read_text(encoding="utf-8")
