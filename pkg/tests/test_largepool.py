"""Large-pool approximation: constants, expected loss, tranche puts."""
import math

import numpy as np
import pytest

from ajdcredit import (BasketState, DiscreteLoss, FixedLoss, ModelParams,
                       expected_defaults, lp_expected_loss, lp_tranche_put, solve_mu,
                       tranche_put)
from ajdcredit.errors import InvalidDetachment, NoRoot

from conftest import SINGLE_5Y, make_model

NM = 125


@pytest.fixture(scope="module")
def model():
    return make_model(SINGLE_5Y)


@pytest.fixture(scope="module")
def consts():
    return solve_mu(FixedLoss(0.6), NM)


class TestSolveMu:
    def test_fixed_loss_closed_form(self, consts):
        assert consts.mu == pytest.approx(-math.log(1 - 1 / 125) / 0.6)
        assert consts.max_loss == pytest.approx(75.0)

    def test_discrete_law_residual(self):
        law = DiscreteLoss(((0.4, 0.5), (0.8, 0.5)))
        c = solve_mu(law, NM)
        assert abs(float(np.real(law.phi(-c.mu))) - (1 - 1 / NM)) < 1e-12

    def test_large_basket_expansion(self):
        # mu * l1 * N_M -> 1 as the basket grows
        for nm in (10 ** 3, 10 ** 5, 10 ** 7):
            c = solve_mu(FixedLoss(0.6), nm)
            assert c.mu * 0.6 * nm == pytest.approx(1.0, rel=2.0 / nm)

    def test_pathological_law_raises(self):
        with pytest.raises(NoRoot):
            solve_mu(DiscreteLoss(((1e-11, 1.0),)), NM)


class TestExpectedLoss:
    def test_zero_intensity(self, consts):
        quiet = ModelParams.constant(lambda0=0.0, lambda_inf=0.0, kappa=1.0,
                                     sigma=1e-3, jump_law=FixedLoss(0.6))
        assert lp_expected_loss(5.0, quiet, None, consts) == pytest.approx(0.0, abs=1e-12)

    def test_exact_identity_with_count_route(self, model, consts):
        for T in (1.0, 5.0, 8.0):
            lp = lp_expected_loss(T, model, None, consts)
            via_counts = 0.6 * expected_defaults(BasketState(), T, model, None, NM) / NM
            assert lp == pytest.approx(via_counts, abs=1e-12)


class TestTranchePut:
    def test_zero_strike(self, model, consts):
        assert lp_tranche_put(5.0, 0.0, model, None, consts) == 0.0

    def test_invalid_detachment(self, model, consts):
        with pytest.raises(InvalidDetachment):
            lp_tranche_put(5.0, 0.6, model, None, consts)

    def test_variants_agree(self, model, consts):
        for strike in (0.03, 0.06, 0.12):
            delta = lp_tranche_put(5.0, strike, model, None, consts, "delta")
            pois = lp_tranche_put(5.0, strike, model, None, consts, "poisson")
            assert delta == pytest.approx(pois, abs=1e-6)

    def test_close_to_exact(self, model, consts):
        for strike in (0.03, 0.06, 0.12):
            approx = lp_tranche_put(5.0, strike, model, None, consts)
            exact = tranche_put(BasketState(), 5.0, strike, model, None, NM)
            assert abs(approx - exact) < 0.01 * strike

    def test_bounded_monotone_convex(self, model, consts):
        strikes = np.linspace(0.01, 0.5, 15)
        vals = np.array([lp_tranche_put(5.0, float(k), model, None, consts)
                         for k in strikes])
        assert np.all(vals >= 0.0) and np.all(vals <= strikes)
        diffs = np.diff(vals)
        assert np.all(diffs >= -1e-10)
        assert np.all(np.diff(diffs) >= -1e-7)

    def test_range_doubling_stability(self, model, consts):
        for aux in ("delta", "poisson"):
            base = lp_tranche_put(5.0, 0.06, model, None, consts, aux)
            wide = lp_tranche_put(5.0, 0.06, model, None, consts, aux, p_max=4096.0)
            assert abs(wide - base) < 1e-8
