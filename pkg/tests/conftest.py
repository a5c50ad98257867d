import pytest

from hiopt import backend


@pytest.fixture(params=backend.available())
def each_backend(request):
    """Run the test once per available evaluation backend."""
    prev = backend.active()
    backend.use_backend(request.param)
    yield request.param
    backend.use_backend(prev)
