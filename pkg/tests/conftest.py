import pytest

from parabolab import build_ball_grid


@pytest.fixture(scope="session")
def grid65():
    return build_ball_grid(2, 65)


@pytest.fixture(scope="session")
def grid129():
    return build_ball_grid(2, 129)
