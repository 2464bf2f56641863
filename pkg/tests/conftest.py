import numpy as np
import pytest

from resamplekit.cli import read_table
from resamplekit.estimators import PairedSample, Sample, TwoSample


def _tv():
    t = read_table("tv.csv")
    return (t.numeric("minutes", t.subset("channel", "basic")),
            t.numeric("minutes", t.subset("channel", "extended")))


@pytest.fixture(scope="session")
def tv_basic():
    return Sample(_tv()[0])


@pytest.fixture(scope="session")
def tv_two():
    b, e = _tv()
    return TwoSample(Sample(b), Sample(e))


@pytest.fixture(scope="session")
def skating():
    t = read_table("skating.csv")
    return PairedSample(t.numeric("short"), t.numeric("free"))


@pytest.fixture(scope="session")
def relrisk():
    high = np.r_[np.ones(55), np.zeros(3338 - 55)]
    low = np.r_[np.ones(21), np.zeros(2676 - 21)]
    return TwoSample(Sample(high), Sample(low))
