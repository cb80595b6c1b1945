import json
from importlib.resources import files

import numpy as np
import pytest

from pnsat.config import load_scenario, scenario_from_dict
from pnsat.moments import MomentBasis, assemble_transport


def scenario_path(name: str) -> str:
    return str(files("pnsat") / "scenarios" / f"{name}.json")


def load_bundled(name: str):
    return load_scenario(scenario_path(name))


def bundled_doc(name: str) -> dict:
    with open(scenario_path(name)) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def basis2():
    return MomentBasis.build(2)


@pytest.fixture(scope="session")
def system2(basis2):
    return assemble_transport(basis2)


@pytest.fixture(scope="session")
def basis5():
    return MomentBasis.build(5)


@pytest.fixture(scope="session")
def system5(basis5):
    return assemble_transport(basis5)


def sector_test2(basis):
    """Transversally even sector of the order-2 system: one odd row, three even columns."""
    odd_set = set(basis.odd_positions(1).tolist())
    sector = [i.flat for i in basis.indices if i.k >= 0 and (i.l + i.k) % 2 == 0]
    rows = np.array([i for i in sector if i in odd_set])
    cols = np.array([i for i in sector if i not in odd_set])
    return rows, cols
