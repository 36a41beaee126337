"""Closed-form transform coefficients: examples, invariants, oracle agreement."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ajdcredit import (CharArg, DiscreteLoss, FixedLoss, ModelParams, ParamSegment,
                       TimeChange, b_roots, char_fn, ode_oracle, psi, solve_segment)
from ajdcredit.affine import AffineCoeffs, effective_segments
from ajdcredit.errors import DegenerateSigma, PoleCollision

from conftest import ALL_PARAM_SETS, GLOBAL_PARAMS, SINGLE_5Y, make_model


def seg(**kw):
    base = dict(t_start=0.0, t_end=None, lambda_inf=0.1, kappa=2.0, sigma=1.0,
                n=0, gamma=0.0, theta=1.0)
    base.update(kw)
    return ParamSegment(**base)


class TestPsi:
    def test_all_zero_argument(self):
        assert psi(CharArg(0, 0, 0, 1.0, 1.0), seg(), phiJ_u=1.0) == 0.0

    def test_count_argument(self):
        val = psi(CharArg(0, math.log(0.5), 0, 1.0, 1.0), seg(), phiJ_u=1.0)
        assert val == pytest.approx(0.5, abs=1e-15)

    def test_catastrophe_only_term(self):
        val = psi(CharArg(0, 0, 0, 0.0, 1.0), seg(alpha=0.3), phiJ_u=1.0)
        assert val == pytest.approx(0.3, abs=1e-15)

    def test_counterparty_terms(self):
        s = seg(xi=0.25, zeta=0.5)
        val = psi(CharArg(0, 0, 0, 1.0, 0.0), s, phiJ_u=1.0)
        # 1 - (1 - xi) + zeta
        assert val == pytest.approx(0.75, abs=1e-15)


class TestBRoots:
    def test_psi_zero(self):
        bp, bm = b_roots(0.0, seg(kappa=2.0, sigma=1.0))
        assert bp == pytest.approx(4.0)
        assert bm == pytest.approx(0.0, abs=1e-15)

    def test_table_roots_solve_riccati(self):
        s = seg(kappa=4.303, sigma=0.9085)
        for psi_val in (0.5, 1.0 / 125.0):
            bp, bm = b_roots(psi_val, s)
            for root in (bp, bm):
                resid = -0.5 * s.sigma ** 2 * root ** 2 + s.kappa * root + psi_val
                assert abs(resid) < 1e-12

    @given(st.floats(-40.0, 40.0))
    @settings(max_examples=50, deadline=None)
    def test_imaginary_axis_residual(self, y):
        s = seg(kappa=1.7, sigma=0.8)
        psi_val = 1j * y
        bp, bm = b_roots(psi_val, s)
        for root in (bp, bm):
            resid = -0.5 * s.sigma ** 2 * root ** 2 + s.kappa * root + psi_val
            assert abs(resid) < 1e-11 * max(1.0, abs(psi_val))

    def test_sigma_floor(self):
        with pytest.raises(DegenerateSigma):
            b_roots(0.1, seg(sigma=1e-9))


class TestSolveSegment:
    def test_all_zero_argument(self):
        arg = CharArg(0, 0, 0, 1.0, 1.0)
        terminal = AffineCoeffs(0.0 + 0j, 0.0 + 0j)
        out = solve_segment(terminal, arg, seg(gamma=0.3, n=2, theta=0.5), 3.0, 1.0)
        assert abs(out.A) < 1e-14 and abs(out.B) < 1e-14

    def test_dt_zero_returns_terminal(self):
        terminal = AffineCoeffs(0.3 + 0.1j, -0.2 + 0.4j)
        out = solve_segment(terminal, CharArg(0.1j, 0.2j, 0), seg(), 0.0)
        assert out is terminal

    def test_constant_solution_at_b_plus(self):
        s = seg(kappa=2.0, sigma=1.0, gamma=0.2, n=1, theta=0.1)
        psi_val = complex(psi(CharArg(0, math.log(0.5), 0, 1, 1), s, 1.0))
        bp, _ = b_roots(psi_val, s)
        out = solve_segment(AffineCoeffs(0.0 + 0j, bp),
                            CharArg(0, math.log(0.5), 0, 1, 1), s, 2.0, 1.0)
        assert out.B == pytest.approx(bp, rel=1e-12)
        phi_x = (1.0 - s.theta * bp) ** -(s.n + 1)
        expected_a = (s.kappa * s.lambda_inf * bp + s.gamma * (phi_x - 1.0)) * 2.0
        assert complex(out.A) == pytest.approx(expected_a, rel=1e-10)

    def test_matches_rk4_on_intensity_argument(self):
        model = make_model(GLOBAL_PARAMS)
        arg = CharArg(0.0, math.log(1 - 1.0 / 125), 0.0, ex=0.0, ey=1.0)
        cf = char_fn(0.0, 5.0, arg, model)
        oc = ode_oracle(0.0, 5.0, arg, model, steps=6000)
        assert complex(cf.A) == pytest.approx(complex(oc.A), rel=1e-8)
        assert complex(cf.B) == pytest.approx(complex(oc.B), rel=1e-8)

    def test_theta_pole_raises(self):
        s = seg(gamma=0.5, n=0, theta=2.0)
        bp, _ = b_roots(complex(psi(CharArg(0, 0, 0, 1, 1), s, 1.0)), s)
        with pytest.raises(PoleCollision):
            solve_segment(AffineCoeffs(0j, 0.5 + 0j), CharArg(0, 0, 0.5), s, 1.0, 1.0)


class TestCharFn:
    def test_normalization(self):
        for params in ALL_PARAM_SETS.values():
            model = make_model(params)
            tc = TimeChange((2.0,), (0.8, 1.3))
            out = char_fn(0.0, 7.0, CharArg(0, 0, 0, 1.0, 1.0), model, tc)
            assert abs(out.A) < 1e-12 and abs(out.B) < 1e-12

    def test_boundary_condition(self):
        model = make_model(SINGLE_5Y)
        out = char_fn(4.0, 4.0, CharArg(0.3j, -0.2, 0.7 + 0.1j), model)
        assert complex(out.A) == 0.0
        assert complex(out.B) == 0.7 + 0.1j

    def test_single_segment_equals_solve_segment(self):
        model = make_model(SINGLE_5Y)
        arg = CharArg(-0.1, 0.2j, 0.0, ex=0.0, ey=1.0)
        direct = solve_segment(AffineCoeffs(0j, 0j), arg, model.segments[0], 5.0,
                               model.jump_law.phi(arg.u))
        chained = char_fn(0.0, 5.0, arg, model)
        assert complex(chained.A) == pytest.approx(complex(direct.A), rel=1e-14)
        assert complex(chained.B) == pytest.approx(complex(direct.B), rel=1e-14)

    def test_tower_property(self):
        model = make_model(ALL_PARAM_SETS["7y"])
        tc = TimeChange((3.0,), (0.9, 1.2))
        arg = CharArg(0.3j, -0.4j, 0.0, ex=0.0, ey=1.0)
        full = char_fn(1.0, 6.0, arg, model, tc)
        upper = char_fn(3.5, 6.0, arg, model, tc)
        lower = char_fn(1.0, 3.5, CharArg(arg.u, arg.v, upper.B, arg.ex, arg.ey),
                        model, tc)
        assert complex(lower.A) + complex(upper.A) == pytest.approx(
            complex(full.A), rel=1e-10, abs=1e-10)
        assert complex(lower.B) == pytest.approx(complex(full.B), rel=1e-10)

    def test_time_change_is_model_clock(self):
        # slope-a time change over [0, T] = identity over [0, a T]
        model = make_model(SINGLE_5Y)
        arg = CharArg(0.5j, 0.3j, 0.0, ex=0.0, ey=1.0)
        fast = char_fn(0.0, 4.0, arg, model, TimeChange((), (1.75,)))
        plain = char_fn(0.0, 7.0, arg, model)
        assert complex(fast.A) == pytest.approx(complex(plain.A), rel=1e-12)
        assert complex(fast.B) == pytest.approx(complex(plain.B), rel=1e-12)

    def test_scaling_table_equivalence(self):
        # running the clock at speed a == scaling the parameters by the table
        # with the intensity state rescaled alongside: A and a*B' match B
        a = 2.0
        model = make_model(SINGLE_5Y)
        scaled = ModelParams(model.lambda0 * a,
                             (model.segments[0].scaled(a),), model.jump_law)
        arg = CharArg(-0.2, 0.15j, 0.0, ex=0.0, ey=1.0)
        via_clock = char_fn(0.0, 3.0, arg, model, TimeChange((), (a,)))
        via_table = char_fn(0.0, 3.0, arg, scaled)
        assert complex(via_table.A) == pytest.approx(complex(via_clock.A), rel=1e-12)
        assert a * complex(via_table.B) == pytest.approx(complex(via_clock.B), rel=1e-12)
        v1 = complex(via_clock.value(model.lambda0))
        v2 = complex(via_table.value(scaled.lambda0))
        assert v1 == pytest.approx(v2, rel=1e-12)

    def test_oracle_agreement_all_sets(self):
        rng = np.random.default_rng(11)
        for params in ALL_PARAM_SETS.values():
            model = make_model(params)
            tc = TimeChange((2.0, 4.0), (0.9, 1.1, 1.05))
            u = 1j * rng.uniform(-np.pi, np.pi, 25)
            v = 1j * rng.uniform(-np.pi, np.pi, 25)
            arg = CharArg(u, v, 0.0, ex=0.0, ey=1.0)
            cf = char_fn(0.0, 5.0, arg, model, tc).value(model.lambda0)
            oc = ode_oracle(0.0, 5.0, arg, model, tc, steps=4000).value(model.lambda0)
            assert np.max(np.abs(cf - oc) / np.abs(oc)) < 1e-7

    def test_value_in_unit_interval_for_real_args(self):
        model = make_model(GLOBAL_PARAMS)
        for ex in (0.0, 0.5, 1.0):
            for u, v, w in ((-0.3, 0.0, 0.0), (0.0, -0.5, 0.0), (-0.1, -0.1, -0.2)):
                val = char_fn(0.0, 5.0, CharArg(u, v, w, ex, 1.0), model) \
                    .value(model.lambda0)
                assert 0.0 < float(np.real(val)) <= 1.0 + 1e-12
                assert abs(float(np.imag(val))) < 1e-14

    def test_monotone_in_catastrophe_argument(self):
        model = make_model(SINGLE_5Y)
        vals = [float(np.real(char_fn(0.0, 5.0, CharArg(-0.2, -0.1, 0.0, ex, 1.0),
                                      model).value(model.lambda0)))
                for ex in np.linspace(0.0, 1.0, 7)]
        assert all(b >= a - 1e-14 for a, b in zip(vals, vals[1:]))

    def test_multiple_gamma_components_vs_oracle(self):
        base = ParamSegment(0.0, None, lambda_inf=0.05, kappa=1.2, sigma=0.3,
                            n=2, gamma=0.08, theta=0.9,
                            extra_jumps=((0.03, 0, 2.5), (0.05, 4, 0.4)))
        model = ModelParams(0.7, (base,), FixedLoss(0.6))
        arg = CharArg(1j * np.array([0.3, -1.1]), 1j * np.array([-0.6, 2.0]), 0.0,
                      ex=0.0, ey=1.0)
        cf = char_fn(0.0, 4.0, arg, model).value(model.lambda0)
        oc = ode_oracle(0.0, 4.0, arg, model, steps=4000).value(model.lambda0)
        assert np.max(np.abs(cf - oc) / np.abs(oc)) < 1e-8

    def test_counterparty_arguments_vs_oracle(self):
        base = ParamSegment(0.0, None, lambda_inf=0.05, kappa=1.0, sigma=0.4,
                            n=1, gamma=0.1, theta=0.8, alpha=0.2, beta=0.01,
                            xi=0.3, zeta=0.15, eta=0.02)
        model = ModelParams(0.5, (base,), FixedLoss(0.55))
        for ex, ey in ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.4, 0.7)):
            arg = CharArg(-0.25, 0.4j, 0.0, ex=ex, ey=ey)
            cf = char_fn(0.0, 3.0, arg, model).value(model.lambda0)
            oc = ode_oracle(0.0, 3.0, arg, model, steps=3000).value(model.lambda0)
            assert complex(cf) == pytest.approx(complex(oc), rel=1e-8)


class TestOdeOracle:
    def test_all_zero(self):
        model = make_model(SINGLE_5Y)
        out = ode_oracle(0.0, 5.0, CharArg(0, 0, 0, 1.0, 1.0), model, steps=500)
        assert abs(out.A) < 1e-12 and abs(out.B) < 1e-12

    def test_rejects_few_steps(self):
        model = make_model(SINGLE_5Y)
        with pytest.raises(ValueError):
            ode_oracle(0.0, 5.0, CharArg(), model, steps=50)

    def test_fourth_order_convergence(self):
        model = make_model(GLOBAL_PARAMS)
        arg = CharArg(2.5j, -2.9j, 0.0, ex=0.0, ey=1.0)
        exact = char_fn(0.0, 5.0, arg, model).value(model.lambda0)
        errs = []
        for steps in (200, 400):
            approx = ode_oracle(0.0, 5.0, arg, model, steps=steps).value(model.lambda0)
            errs.append(abs(complex(approx - exact)))
        ratio = errs[0] / errs[1]
        assert 8.0 < ratio < 32.0  # ~16x for a 4th-order scheme


class TestSegmentsAndTimeChange:
    def test_time_change_validation(self):
        with pytest.raises(ValueError):
            TimeChange((1.0,), (1.0,))
        with pytest.raises(ValueError):
            TimeChange((), (0.0,))
        with pytest.raises(ValueError):
            TimeChange((2.0, 1.0), (1.0, 1.0, 1.0))

    def test_segment_validation(self):
        with pytest.raises(ValueError):
            seg(kappa=0.0)
        with pytest.raises(ValueError):
            seg(xi=1.5)
        with pytest.raises(ValueError):
            seg(n=-1)

    def test_effective_segments_partition(self):
        segments = (ParamSegment(0.0, 2.0, 0.1, 1.0, 0.5),
                    ParamSegment(2.0, None, 0.2, 1.5, 0.6))
        model = ModelParams(0.5, segments, FixedLoss(0.6))
        tc = TimeChange((1.0, 3.0), (0.5, 1.0, 2.0))
        pieces = effective_segments(model, tc, 0.5, 4.0)
        assert [p[0] for p in pieces] == [0.5, 1.0, 2.0, 3.0]
        assert [p[1] for p in pieces] == [1.0, 2.0, 3.0, 4.0]
        assert [p[3] for p in pieces] == [0.5, 1.0, 1.0, 2.0]
        assert pieces[0][2].lambda_inf == 0.1 and pieces[2][2].lambda_inf == 0.2

    def test_model_requires_segment_cover(self):
        segments = (ParamSegment(0.0, 2.0, 0.1, 1.0, 0.5),)
        model = ModelParams(0.5, segments, FixedLoss(0.6))
        with pytest.raises(ValueError):
            char_fn(0.0, 3.0, CharArg(-0.1, 0, 0), model)

    def test_discrete_law_transform(self):
        law = DiscreteLoss(((0.4, 0.25), (0.8, 0.75)))
        assert law.l1 == pytest.approx(0.7)
        assert complex(law.phi(0.0)) == pytest.approx(1.0)
        z = -0.3 + 0.2j
        expected = 0.25 * np.exp(z * 0.4) + 0.75 * np.exp(z * 0.8)
        assert complex(law.phi(z)) == pytest.approx(expected)
