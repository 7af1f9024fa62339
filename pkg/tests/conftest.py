import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

from dorval._kernels import _fallback

try:
    from dorval._kernels import _speedups
except ImportError:
    _speedups = None


def kernel_backends():
    backends = [pytest.param(_fallback, id="python")]
    if _speedups is not None:
        backends.append(pytest.param(_speedups, id="compiled"))
    return backends


@pytest.fixture(params=kernel_backends())
def kernels(request):
    return request.param


@pytest.fixture
def crossroad():
    from mapkit import crossroad_map

    return crossroad_map()
