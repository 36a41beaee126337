"""Shared fixtures: the published parameter sets and the market fixture."""
import numpy as np
import pytest

from ajdcredit import (DiscountCurve, FixedLoss, ModelParams, TimeChange,
                       load_bundled_market)

# calibrated parameter sets (global fit and one fit per maturity)
GLOBAL_PARAMS = dict(lambda0=7.115, lambda_inf=0.1846, kappa=4.303, sigma=0.9085,
                     n=9, gamma=0.08774, theta=5.704, alpha=1.377e-15, beta=0.005865)
SINGLE_5Y = dict(lambda0=1.013, lambda_inf=0.01748, kappa=0.4076, sigma=0.06084,
                 n=4, gamma=0.1049, theta=1.622, alpha=0.0, beta=0.004045)
SINGLE_7Y = dict(lambda0=1.815, lambda_inf=0.03061, kappa=0.7135, sigma=0.1065,
                 n=17, gamma=0.09124, theta=0.6226, alpha=0.0, beta=0.005947)
SINGLE_10Y = dict(lambda0=6.379, lambda_inf=0.3463, kappa=8.075, sigma=1.205,
                  n=34, gamma=0.07845, theta=3.131, alpha=0.0, beta=0.006013)

ALL_PARAM_SETS = {"global": GLOBAL_PARAMS, "5y": SINGLE_5Y,
                  "7y": SINGLE_7Y, "10y": SINGLE_10Y}


def make_model(params, jump_law=None) -> ModelParams:
    return ModelParams.constant(**params, jump_law=jump_law or FixedLoss(0.6))


@pytest.fixture(scope="session")
def market():
    return load_bundled_market()


@pytest.fixture(scope="session")
def basket(market):
    return market.basket


@pytest.fixture(scope="session")
def curve(market):
    return market.curve


@pytest.fixture(scope="session")
def model_5y():
    return make_model(SINGLE_5Y)


@pytest.fixture(scope="session")
def model_global():
    return make_model(GLOBAL_PARAMS)


@pytest.fixture
def identity_tc():
    return TimeChange.identity()


@pytest.fixture(scope="session")
def flat_curve():
    return DiscountCurve.flat(0.02)


def imaginary_axis_args(rng: np.random.Generator, size: int):
    """Random transform arguments on the imaginary axis in (u, v), w = 0."""
    return (1j * rng.uniform(-np.pi, np.pi, size),
            1j * rng.uniform(-np.pi, np.pi, size))
