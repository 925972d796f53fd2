import numpy as np
import pytest

from wdrocert.losses import LossFamily
from wdrocert.risk import EmpiricalDistribution
from wdrocert.space import PointSet, SamplePoint, SampleSpace, TransportCost


def identity_fn(theta, x, labels):
    return x[:, 0]


@pytest.fixture
def unit():
    return SampleSpace(((0.0, 1.0),), (), 41)


@pytest.fixture
def sq():
    return TransportCost(2, 2)


@pytest.fixture
def ident():
    """The single-function family ``{zeta -> zeta}``."""
    return LossFamily.custom(identity_fn, differentiable=True, name="identity")


@pytest.fixture
def f_id(ident):
    return ident.member(())


@pytest.fixture
def delta0():
    return EmpiricalDistribution.dirac(SamplePoint((0.0,)))


def points(xs, labels=None):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    lab = np.zeros((len(xs), 0), dtype=np.int64) if labels is None else np.asarray(labels).reshape(len(xs), -1)
    return PointSet(xs, lab)
