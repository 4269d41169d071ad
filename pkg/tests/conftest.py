import random

import pytest

from revlang.stdlib import CATALOG, entry_function


@pytest.fixture
def rng():
    return random.Random(20240811)


def catalog_items():
    return [(name, entry_function(name)) for name in CATALOG]


@pytest.fixture(params=list(CATALOG), ids=list(CATALOG))
def catalog_name(request):
    return request.param
