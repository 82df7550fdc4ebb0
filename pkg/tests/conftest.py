import pytest

from irbrisk.asrf import PointEstimates
from irbrisk.data_io import PUBLISHED
from irbrisk.uncertainty import UncertaintyModel


def published_model(grade):
    p = PUBLISHED[grade]
    return UncertaintyModel(p["k_hat"], p["sigma_k"], p["lgd_hat"], p["sigma_lgd"], p["rho_lgd_k"])


def published_point(grade):
    p = PUBLISHED[grade]
    return PointEstimates(p["pd_hat"], p["lgd_hat"])


@pytest.fixture(params=["ar", "sg"])
def grade(request):
    return request.param


@pytest.fixture
def ar_model():
    return published_model("ar")


@pytest.fixture
def ar_point():
    return published_point("ar")
