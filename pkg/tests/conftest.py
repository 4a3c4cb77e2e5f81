import pytest

from superdiff import billiard as bl
from superdiff.sources import SourceSpec

SINGLE_DISC = {"d": 2, "scatterers": [{"center": [0.5, 0.5], "radius": 0.25}]}
# two discs sized so every corridor direction is blocked (the big disc alone
# blocks every spacing below 0.9; the small one closes the two axes)
FINITE_HORIZON = {"d": 2, "scatterers": [
    {"center": [0.25, 0.25], "radius": 0.45},
    {"center": [0.75, 0.75], "radius": 0.1},
]}


@pytest.fixture(scope="session")
def disc_table():
    return bl.build_table(SINGLE_DISC)


@pytest.fixture(scope="session")
def finite_table():
    return bl.build_table(FINITE_HORIZON, horizon_scan=20)


@pytest.fixture(scope="session")
def lorentz_spec(disc_table):
    return SourceSpec.lorentz(disc_table.to_config())


@pytest.fixture(scope="session")
def pareto_spec():
    return SourceSpec.pareto()
