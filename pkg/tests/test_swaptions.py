"""Swaption pricing: joint-law inversion, exact integration, fast approximation."""
import numpy as np
import pytest

from ajdcredit import (Basket, BasketState, DiscountCurve, LegSchedule, SwaptionSpec,
                       expected_defaults, joint_density, swaption_exact,
                       swaption_fast_payer, swaption_fast_receiver)
from ajdcredit.errors import AnchorInvalid
from ajdcredit.swaptions import _lambda_moments, fast_forward_value

from conftest import SINGLE_5Y, make_model

NM = 125


@pytest.fixture(scope="module")
def model():
    return make_model(SINGLE_5Y)


@pytest.fixture(scope="module")
def basket():
    return Basket.fixed_recovery(NM, 0.4)


@pytest.fixture(scope="module")
def curve():
    return DiscountCurve.flat(0.02)


@pytest.fixture(scope="module")
def joint_half_year(model):
    return joint_density(0.5, model, None)


def forward_package_value(expiry, maturity, strike, model, basket, curve):
    """Independent forward swap + front-end protection value from the
    expected-default legs (time-0 expectations, pricer conventions)."""
    st = BasketState()
    sched = LegSchedule.quarterly(maturity, start=expiry)
    l1 = basket.jump_law.l1

    def eloss(t):
        return l1 * expected_defaults(st, t, model, None, NM) / NM

    prot, prev = 0.0, eloss(expiry)
    for end in sched.ends:
        cur = eloss(end)
        prot += curve.df(end) * (cur - prev)
        prev = cur
    ann = sum(acc * curve.df(mid) *
              (NM - expected_defaults(st, mid, model, None, NM)) / NM
              for acc, mid in zip(sched.accruals, sched.mids))
    fep = curve.df(expiry) * eloss(expiry)
    return prot - strike * ann + fep


class TestJointDensity:
    def test_mass_and_clipping(self, joint_half_year):
        jg = joint_half_year
        assert jg.total == pytest.approx(1.0, abs=1e-6)
        assert jg.clipped < 1e-4
        assert jg.mass.min() >= 0.0

    def test_intensity_moment_matches_transform(self, model, joint_half_year):
        jg = joint_half_year
        grid_mean = float((jg.mass.sum(axis=0) * jg.lam).sum())
        cf_mean, _ = _lambda_moments(0.5, model, None, ex=0.0)
        assert grid_mean == pytest.approx(cf_mean, rel=1e-4)

    def test_count_marginal_matches_inversion(self, model, joint_half_year):
        # marginal over the intensity equals the direct count inversion
        from ajdcredit.lossdist import _count_cf_grid
        from ajdcredit.affine import TimeChange
        jg = joint_half_year
        marginal = jg.mass.sum(axis=1)
        m = len(marginal)
        cf = _count_cf_grid(model, TimeChange.identity(), 0.0, 0.5, 1.0, m,
                            model.lambda0)
        direct = np.real(np.fft.fft(np.asarray(cf))) / m
        assert np.max(np.abs(marginal - direct)) < 1e-6

    def test_short_horizon_concentrates(self, model):
        jg = joint_density(0.02, model, None)
        marginal_j = jg.mass.sum(axis=1)
        assert marginal_j[0] > 0.97  # almost surely no defaults yet
        lam_marg = jg.mass.sum(axis=0)
        peak = jg.lam[int(np.argmax(lam_marg))]
        assert peak == pytest.approx(model.lambda0, rel=0.05)


class TestExactPricer:
    def test_parity_against_forward(self, model, basket, curve, joint_half_year):
        spec = SwaptionSpec(0.5, 5.0, 0.0165, "payer", fep=True)
        res = swaption_exact(spec, model, None, basket, curve, joint=joint_half_year)
        fwd = forward_package_value(0.5, 5.0, 0.0165, model, basket, curve)
        assert res["payer"] - res["receiver"] == pytest.approx(fwd, abs=1e-6)

    def test_monotonicity_in_strike(self, model, basket, curve, joint_half_year):
        payers, receivers = [], []
        for k in (0.010, 0.0165, 0.025):
            spec = SwaptionSpec(0.5, 5.0, k, "payer", fep=True)
            res = swaption_exact(spec, model, None, basket, curve,
                                 joint=joint_half_year)
            payers.append(res["payer"])
            receivers.append(res["receiver"])
        assert all(b < a for a, b in zip(payers, payers[1:]))
        assert all(b > a for a, b in zip(receivers, receivers[1:]))
        assert min(payers) >= 0.0 and min(receivers) >= 0.0

    def test_fep_flag_adds_value_to_payer(self, model, basket, curve, joint_half_year):
        with_fep = swaption_exact(SwaptionSpec(0.5, 5.0, 0.0165, "payer", fep=True),
                                  model, None, basket, curve, joint=joint_half_year)
        without = swaption_exact(SwaptionSpec(0.5, 5.0, 0.0165, "payer", fep=False),
                                 model, None, basket, curve, joint=joint_half_year)
        assert with_fep["payer"] > without["payer"]

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SwaptionSpec(5.0, 5.0, 0.01)
        with pytest.raises(ValueError):
            SwaptionSpec(0.5, 5.0, -0.01)
        with pytest.raises(ValueError):
            SwaptionSpec(0.5, 5.0, 0.01, side="straddle")


class TestFastPricer:
    def test_deep_out_of_the_money_receiver_is_zero(self, basket, curve):
        # tiny strike on a defaulting model: never optimal to receive
        hot = make_model(dict(SINGLE_5Y, lambda0=5.0))
        spec = SwaptionSpec(0.5, 5.0, 5e-4, "receiver", fep=True)
        assert swaption_fast_receiver(spec, hot, None, basket, curve) == 0.0

    def test_anchor_robustness(self, model, basket, curve):
        spec = SwaptionSpec(0.5, 5.0, 0.0165, "receiver", fep=True)
        at_mean = swaption_fast_receiver(spec, model, None, basket, curve)
        at_zero = swaption_fast_receiver(spec, model, None, basket, curve, anchor=0.0)
        assert abs(at_mean - at_zero) < 0.005  # within 0.5% of notional

    def test_parity_residual(self, model, basket, curve):
        spec_p = SwaptionSpec(0.5, 5.0, 0.0165, "payer", fep=True)
        spec_r = SwaptionSpec(0.5, 5.0, 0.0165, "receiver", fep=True)
        payer = swaption_fast_payer(spec_p, model, None, basket, curve)
        receiver = swaption_fast_receiver(spec_r, model, None, basket, curve)
        fwd = fast_forward_value(spec_p, model, None, basket, curve)
        assert payer - receiver == pytest.approx(fwd, abs=1e-8)

    def test_forward_term_matches_count_route(self, model, basket, curve):
        # under fixed losses e^{-mu l1} = 1 - 1/N_M exactly, so the h-form
        # forward built from the loss argument equals the count-argument legs
        spec = SwaptionSpec(0.5, 5.0, 0.0165, "payer", fep=True)
        via_mu = fast_forward_value(spec, model, None, basket, curve)
        from ajdcredit.largepool import solve_mu
        from ajdcredit.swaptions import _h_weights
        from ajdcredit.affine import CharArg, char_fn
        import math
        nodes, w = _h_weights(spec, basket, curve)
        arg = CharArg(0.0, math.log1p(-1.0 / NM), 0.0, ex=0.0, ey=1.0)
        phi = np.array([float(np.real(char_fn(0.0, tau, arg, model)
                                      .value(model.lambda0))) for tau in nodes])
        consts = solve_mu(basket.jump_law, NM)
        via_count = consts.max_loss * (1.0 - float(np.sum(w * phi))) \
            * curve.df(0.5) / NM
        assert via_mu == pytest.approx(via_count, abs=1e-12)

    def test_fep_required(self, model, basket, curve):
        with pytest.raises(ValueError):
            swaption_fast_receiver(SwaptionSpec(0.5, 5.0, 0.0165, "receiver",
                                                fep=False), model, None, basket, curve)

    def test_anchor_invalid(self, model, basket, curve):
        spec = SwaptionSpec(0.5, 5.0, 0.0165, "receiver", fep=True)
        with pytest.raises(AnchorInvalid):
            swaption_fast_receiver(spec, model, None, basket, curve, anchor=500.0)

    def test_agreement_with_exact(self, model, basket, curve, joint_half_year):
        for k in (0.010, 0.0165, 0.025):
            spec = SwaptionSpec(0.5, 5.0, k, "payer", fep=True)
            exact = swaption_exact(spec, model, None, basket, curve,
                                   joint=joint_half_year)
            fast_p = swaption_fast_payer(spec, model, None, basket, curve)
            fast_r = swaption_fast_receiver(
                SwaptionSpec(0.5, 5.0, k, "receiver", fep=True),
                model, None, basket, curve)
            for fast, ex in ((fast_p, exact["payer"]), (fast_r, exact["receiver"])):
                assert abs(fast - ex) <= max(0.01 * abs(ex), 5e-4)

    def test_error_shrinks_with_tenor(self, model, basket, curve):
        # the boundary linearization is exact in both tenor limits; compare
        # a mid against a long tenor at the same expiry
        errs = []
        for maturity in (1.5, 8.0):
            spec = SwaptionSpec(0.5, maturity, 0.0165, "receiver", fep=True)
            exact = swaption_exact(spec, model, None, basket, curve)["receiver"]
            fast = swaption_fast_receiver(spec, model, None, basket, curve)
            errs.append(abs(fast - exact) / max(exact, 1e-12))
        assert errs[1] < max(errs[0], 5e-3)
