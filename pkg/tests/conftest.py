import os
import sys

import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from op.streams import StreamKey  # noqa: E402


@pytest.fixture
def key():
    return StreamKey(20240607)
