import pathlib
import sys

import pytest
from loguru import logger

ROOT = pathlib.Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

pytest_plugins = [
    "fixtures.models",
    "fixtures.simulation",
]


@pytest.fixture
def caplog(caplog):
    logger.enable("poisson_disorder")
    handler_id = logger.add(caplog.handler, format="{message}")
    yield caplog
    logger.remove(handler_id)
