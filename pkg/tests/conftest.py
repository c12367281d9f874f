import sys
from pathlib import Path

import pytest

from accentloc.spatial import Polygon, Tessellation

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def two_squares():
    """A = [0,5]^2, B = [5,10] x [0,5]."""
    return Tessellation((("A", Polygon.box(0, 0, 5, 5)), ("B", Polygon.box(5, 0, 10, 5))))
