import pytest

from gstamp.catalog import load_reference_snapshot
from gstamp.config import Config
from gstamp.dynamics import PotentialParams
from gstamp.frames import FrameParams

# select_anchors(reference snapshot, k=16, min_sep=1 kpc), frozen once.
GOLDEN_ANCHORS = [39, 63, 158, 76, 2, 130, 4, 6, 80, 21, 91, 142, 101, 72, 103, 71]

# validate(reference snapshot) warning count, frozen once.
GOLDEN_SNAPSHOT_WARNINGS = 0


@pytest.fixture(scope="session")
def fp():
    return FrameParams()


@pytest.fixture(scope="session")
def pp():
    return PotentialParams()


@pytest.fixture(scope="session")
def cfg():
    return Config()


@pytest.fixture(scope="session")
def snapshot():
    return load_reference_snapshot()
