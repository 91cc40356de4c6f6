import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from urlguard.dns import IpMetadataIndex  # noqa: E402
from urlguard.synthetic import REGISTRY_SUFFIXES, network_ranges  # noqa: E402
from urlguard.url_core import TldRegistry  # noqa: E402

SUFFIXES = sorted(set(REGISTRY_SUFFIXES) | {"example", "zz.example"})


@pytest.fixture(scope="session")
def registry():
    return TldRegistry(SUFFIXES)


@pytest.fixture(scope="session")
def ip_index():
    return IpMetadataIndex(network_ranges())
