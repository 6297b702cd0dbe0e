import pytest

from evaba.crypto_oracle import Oracle
from evaba.ppb import StepId


@pytest.fixture
def oracle4():
    return Oracle(4, 1, seed=1234)


def sid(party=1, view=1, step=1, instance="evaba"):
    return StepId(instance, party, view, step)
