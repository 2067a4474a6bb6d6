import pytest

from lagmix import render_reference


@pytest.fixture(scope="session")
def r1_scene():
    return render_reference("r1")


@pytest.fixture(scope="session")
def r2_scene():
    return render_reference("r2")


@pytest.fixture(scope="session")
def r3_scene():
    return render_reference("r3")
