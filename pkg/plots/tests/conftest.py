from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def ex2_dir() -> Path:
    """Solver outputs for the sphere benchmark (N=10,20), committed as
    fixture data so these tests never invoke the solver package."""
    return DATA / "ex2"
