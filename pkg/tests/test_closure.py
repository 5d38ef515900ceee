import math

import numpy as np
import pytest

from helpers import (energies_vec, fermi_integral_ref, momentum_grid_integral,
                     romberg, semi_infinite_oracle, thermal_p)
from qhydro.closure import (Multipliers, MomentVector, Order,
                            closure_fluxes, compatibility_bound,
                            constraints_forward, invert_constraints,
                            j_coefficient, jacobian_2x2, newton_invert,
                            occupation_expanded)
from qhydro.constants import EV, M_E
from qhydro.dispersion import DispersionModel
from qhydro.errors import (CompatibilityWarning, DomainError,
                           NonConvergenceError, UnrealizableMomentsError)
from qhydro.quadrature import QuadratureSpec, fermi_integral

TIGHT = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-30)


def iso(model, eta0, eta1):
    return Multipliers.isotropic(eta0, eta1, model.dim)


class TestTypes:
    def test_eta1_positive_required(self):
        with pytest.raises(DomainError):
            Multipliers(0.0, -1.0, np.zeros(3))

    def test_second_order_multipliers_unrestricted(self):
        m = Multipliers(0.1, -0.5, np.zeros(3), Order.SECOND)
        assert m.eta1 == -0.5

    def test_moment_positivity(self):
        with pytest.raises(DomainError):
            MomentVector(-1.0, 1.0, np.zeros(3))
        with pytest.raises(DomainError):
            MomentVector(1.0, 1.0, np.array([math.inf, 0.0, 0.0]))


class TestConstraintsForward:
    def test_zero_drift_zero_current(self, si_kane):
        mv = constraints_forward(si_kane, iso(si_kane, -1.0, 1.2))
        assert np.all(mv.J == 0.0)

    def test_parabolic_fermi_closed_forms(self, si_parabolic):
        # n = y* Gamma(3/2) (E0/eta1)^(3/2) F_1/2(-eta0),
        # W = y* Gamma(5/2) (E0/eta1)^(5/2) F_3/2(-eta0)
        model = si_parabolic
        E0 = model.energy_scale
        y_star = (4.0 * math.pi * model.degeneracy_y
                  * model.m_star ** 1.5 * math.sqrt(2.0))
        for eta0, eta1 in [(-6.0, 0.7), (-2.0, 1.3), (1.5, 2.0), (4.0, 0.3)]:
            mv = constraints_forward(model, iso(model, eta0, eta1), TIGHT)
            n_cf = (y_star * math.gamma(1.5) * (E0 / eta1) ** 1.5
                    * fermi_integral(0.5, -eta0, TIGHT))
            w_cf = (y_star * math.gamma(2.5) * (E0 / eta1) ** 2.5
                    * fermi_integral(1.5, -eta0, TIGHT))
            assert mv.n == pytest.approx(n_cf, rel=1e-8)
            assert mv.W == pytest.approx(w_cf, rel=1e-8)

    def test_graphene_cone_closed_forms(self, graphene):
        # n = 2 pi y/v_F^2 Gamma(2) (E0/eta1)^2 F_1(-eta0), W analogous
        model = graphene
        E0 = model.energy_scale
        c0 = 2.0 * math.pi * model.degeneracy_y / model.v_fermi ** 2
        for eta0, eta1 in [(-4.0, 0.8), (0.5, 2.5)]:
            mv = constraints_forward(model, iso(model, eta0, eta1), TIGHT)
            n_cf = c0 * (E0 / eta1) ** 2 * fermi_integral_ref(1.0, -eta0)
            w_cf = c0 * 2.0 * (E0 / eta1) ** 3 * fermi_integral_ref(2.0, -eta0)
            assert mv.n == pytest.approx(n_cf, rel=1e-8)
            assert mv.W == pytest.approx(w_cf, rel=1e-8)

    def test_kane_vs_romberg_oracle(self, si_kane):
        # independent fixed-grid Richardson integration of the same moments
        model = si_kane
        E0 = model.energy_scale
        eta0, eta1 = -2.0, 1.0
        mv = constraints_forward(model, iso(model, eta0, eta1), TIGHT)
        y = model.degeneracy_y

        def f_n(u):
            xi = eta0 + eta1 * u
            if xi > 700.0:
                return model.dos_weight(u * E0) * math.exp(-xi)
            return model.dos_weight(u * E0) / (1.0 + math.exp(xi))

        def oracle(weight):
            # u = t^2 on [0, 2] removes the sqrt(eps) endpoint singularity
            head = romberg(lambda t: 2.0 * t * weight(t * t) * f_n(t * t),
                           0.0, math.sqrt(2.0), levels=16)
            tail = semi_infinite_oracle(lambda u: weight(u) * f_n(u),
                                        2.0, 3.0, splits=(10.0,))
            return head + tail

        ref_n = y * E0 * oracle(lambda u: 1.0)
        ref_w = y * E0 ** 2 * oracle(lambda u: u)
        assert mv.n == pytest.approx(ref_n, rel=1e-10)
        assert mv.W == pytest.approx(ref_w, rel=1e-10)

    def test_maxwell_boltzmann_equipartition(self, si_parabolic):
        # eta0 >> 1, eta1 = 1: W/n -> (3/2) kB T_ref
        mv = constraints_forward(si_parabolic, iso(si_parabolic, 8.0, 1.0))
        assert mv.W / mv.n == pytest.approx(
            1.5 * si_parabolic.energy_scale, rel=1e-3)

    def test_current_exactly_linear_in_eta2(self, si_kane, graphene):
        for model in (si_kane, graphene):
            e2 = np.zeros(model.dim)
            e2[0] = 1e-9
            m1 = Multipliers(-1.0, 1.0, e2)
            m2 = Multipliers(-1.0, 1.0, 2.0 * e2)
            j1 = constraints_forward(model, m1).J
            j2 = constraints_forward(model, m2).J
            assert np.all(j2 == 2.0 * j1)  # coefficient integral shared

    def test_monotonicity_scans(self, si_kane):
        ns = [constraints_forward(si_kane, iso(si_kane, e0, 1.0)).n
              for e0 in np.linspace(-8.0, 4.0, 20)]
        assert np.all(np.diff(ns) < 0.0)
        ws = [constraints_forward(si_kane, iso(si_kane, -1.0, e1)).W
              for e1 in np.linspace(0.2, 8.0, 20)]
        assert np.all(np.diff(ws) < 0.0)


class TestJacobian:
    def test_offdiagonal_shared_integral(self, si_kane):
        jac = jacobian_2x2(si_kane, iso(si_kane, -2.0, 1.0))
        assert jac[0, 1] == jac[1, 0]

    def test_negative_definite_on_grid(self, si_kane, graphene):
        for model in (si_kane, graphene):
            for e0 in (-15.0, -5.0, 0.0, 5.0):
                for e1 in (0.2, 1.0, 6.0):
                    jac = jacobian_2x2(model, iso(model, e0, e1))
                    eig = np.linalg.eigvalsh(jac)
                    assert np.all(eig < 0.0)

    def test_finite_difference_match(self, si_kane):
        model = si_kane
        E0 = model.energy_scale
        eta0, eta1 = -3.0, 0.8
        jac = jacobian_2x2(model, iso(model, eta0, eta1), TIGHT)
        h = 1e-4

        def nw(e0, e1):
            mv = constraints_forward(model, iso(model, e0, e1), TIGHT)
            return np.array([mv.n, mv.W / E0])

        fd0 = (nw(eta0 + h, eta1) - nw(eta0 - h, eta1)) / (2.0 * h)
        fd1 = (nw(eta0, eta1 + h) - nw(eta0, eta1 - h)) / (2.0 * h)
        fd = np.column_stack([fd0, fd1])
        assert np.max(np.abs(fd / jac - 1.0)) < 1e-5

    def test_parabolic_ladder_identity(self, si_parabolic):
        # d n / d eta0 = -y* Gamma(3/2) (E0/eta1)^(3/2) F_(-1/2)(-eta0)
        model = si_parabolic
        E0 = model.energy_scale
        eta0, eta1 = -1.5, 1.1
        y_star = (4.0 * math.pi * model.degeneracy_y
                  * model.m_star ** 1.5 * math.sqrt(2.0))
        jac = jacobian_2x2(model, iso(model, eta0, eta1), TIGHT)
        ref = -(y_star * math.gamma(1.5) * (E0 / eta1) ** 1.5
                * fermi_integral_ref(-0.5, -eta0))
        assert jac[0, 0] == pytest.approx(ref, rel=1e-8)


class TestClosureFluxes:
    def test_zero_drift(self, si_kane):
        fl = closure_fluxes(si_kane, iso(si_kane, -1.0, 1.0))
        assert np.all(fl.S == 0.0)
        assert fl.P[0, 0] > 0.0 and fl.G[0, 0] > 0.0

    def test_isotropy_and_linearity(self, si_kane):
        e2 = np.array([3e-10, -1e-10, 2e-10])
        fl1 = closure_fluxes(si_kane, Multipliers(-1.0, 1.0, e2))
        fl2 = closure_fluxes(si_kane, Multipliers(-1.0, 1.0, 2.0 * e2))
        assert np.all(fl2.S == 2.0 * fl1.S)
        for tensor in (fl1.P, fl1.G):
            assert tensor[0, 0] == tensor[1, 1] == tensor[2, 2]
            assert np.all(tensor == tensor.T)
            off = tensor - np.diag(np.diag(tensor))
            assert np.all(off == 0.0)

    def test_parabolic_gradient_identity(self, si_parabolic):
        mult = iso(si_parabolic, -2.0, 1.0)
        mv = constraints_forward(si_parabolic, mult)
        fl = closure_fluxes(si_parabolic, mult)
        assert fl.G[0, 0] == pytest.approx(mv.n / si_parabolic.m_star, rel=1e-12)

    def test_graphene_cone_gradient_reduction(self, graphene):
        # c = 0: G integrand reduces to the plain occupancy, so
        # G = pi y int 1/(e^xi+1) deps
        model = graphene
        E0 = model.energy_scale
        eta0, eta1 = -1.0, 1.0
        fl = closure_fluxes(model, iso(model, eta0, eta1), TIGHT)
        def occ(u):
            xi = eta0 + eta1 * u
            return math.exp(-xi) if xi > 700.0 else 1.0 / (1.0 + math.exp(xi))

        ref = math.pi * model.degeneracy_y * E0 * semi_infinite_oracle(
            occ, 0.0, 2.0, splits=(1.0, 8.0))
        assert fl.G[0, 0] == pytest.approx(ref, rel=1e-9)

    def test_graphene_pressure_vs_momentum_grid(self, graphene_gapped):
        # P = y int v x v w0 dp against Cartesian tensor quadrature
        model = graphene_gapped
        E0 = model.energy_scale
        eta0, eta1 = -1.0, 1.0
        fl = closure_fluxes(model, iso(model, eta0, eta1), TIGHT)

        def fn(pts):
            eps = energies_vec(model, pts)
            pn = np.maximum(np.linalg.norm(pts, axis=-1), 1e-300)
            vmag = model.v_fermi ** 2 * pn / eps
            v0 = vmag * pts[..., 0] / pn
            return v0 * v0 / (1.0 + np.exp(eta0 + eta1 * eps / E0))

        p_max = model.p_of_energy(model.band_min + 30.0 * E0)
        ref = model.degeneracy_y * momentum_grid_integral(model, fn, p_max,
                                                          n_nodes=801)
        assert fl.P[0, 0] == pytest.approx(ref, rel=1e-3)


class TestInversion:
    def test_round_trip_with_current(self, si_kane, rng):
        model = si_kane
        for _ in range(5):
            eta0 = rng.uniform(-10.0, 3.0)
            eta1 = rng.uniform(0.3, 4.0)
            bound = min(compatibility_bound(model, iso(model, eta0, eta1)),
                        1.0 / model.speed_bound())
            eta2 = 0.3 * bound * rng.normal(size=3)
            mult = Multipliers(eta0, eta1, eta2)
            mv = constraints_forward(model, mult)
            back = invert_constraints(model, mv)
            assert back.eta0 == pytest.approx(eta0, abs=2e-7)
            assert back.eta1 == pytest.approx(eta1, rel=2e-7)
            assert np.allclose(back.eta2, eta2, rtol=1e-6, atol=1e-12 * bound)

    def test_degenerate_stress(self, si_kane):
        mv = constraints_forward(si_kane, iso(si_kane, -30.0, 1.0))
        res = newton_invert(si_kane, mv)
        assert res.converged
        assert res.multipliers.eta0 == pytest.approx(-30.0, abs=1e-6)

    def test_warm_start_guess(self, graphene):
        mult = iso(graphene, -3.0, 2.0)
        mv = constraints_forward(graphene, mult)
        res = newton_invert(graphene, mv, guess=mult)
        assert res.iterations <= 2

    def test_unrealizable_rejected(self, si_kane, graphene_gapped):
        # negative W already fails moment validation
        with pytest.raises(DomainError):
            invert_constraints(si_kane, MomentVector(1e23, 1e23 * -1.0, np.zeros(3)))
        # positive W but mean energy below the graphene gap floor
        floor = graphene_gapped.band_min
        with pytest.raises(UnrealizableMomentsError):
            invert_constraints(graphene_gapped,
                               MomentVector(1e16, 1e16 * 0.5 * floor, np.zeros(2)))

    def test_nonconvergence_carries_last_iterate(self, si_kane):
        mv = constraints_forward(si_kane, iso(si_kane, -12.0, 3.0))
        with pytest.raises(NonConvergenceError) as exc:
            newton_invert(si_kane, mv, guess=iso(si_kane, 5.0, 0.2), max_iter=1)
        assert exc.value.last is not None
        assert exc.value.iterations == 1


class TestCompatibility:
    def test_bound_value(self, si_kane):
        mult = iso(si_kane, -1.0, 1.0)
        v_inf = si_kane.speed_bound()
        expected = (1.0 + math.exp(1.0)) / v_inf
        assert compatibility_bound(si_kane, mult) == pytest.approx(expected, rel=1e-12)

    def test_parabolic_unbounded(self, si_parabolic):
        assert math.isinf(compatibility_bound(si_parabolic, iso(si_parabolic, 0.0, 1.0)))

    def test_occupation_in_unit_interval(self, si_kane, rng):
        model = si_kane
        eta0, eta1 = -2.0, 1.0
        bound = min(compatibility_bound(model, iso(model, eta0, eta1)),
                    1.0 / model.speed_bound())
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        mult = Multipliers(eta0, eta1, 0.99 * bound * direction)
        for frac in np.linspace(0.05, 40.0, 25):
            for sign in (1.0, -1.0):
                p = sign * thermal_p(model, frac) * direction
                w = occupation_expanded(model, mult, p)
                assert -1e-12 <= w <= 1.0 + 1e-12

    def test_violation_warns(self, si_kane):
        mult = Multipliers(-1.0, 1.0,
                           np.array([10.0 / si_kane.speed_bound(), 0.0, 0.0]))
        with pytest.warns(CompatibilityWarning):
            constraints_forward(si_kane, mult)


class TestLimits:
    def test_kane_alpha_to_zero(self, si_parabolic):
        kane_small = DispersionModel.kane(0.32 * M_E, 1e-9 / EV)
        m = iso(kane_small, -1.0, 1.0)
        mv_small = constraints_forward(kane_small, m)
        mv_parab = constraints_forward(si_parabolic, iso(si_parabolic, -1.0, 1.0))
        assert mv_small.n == pytest.approx(mv_parab.n, rel=1e-6)
        assert mv_small.W == pytest.approx(mv_parab.W, rel=1e-6)

    def test_graphene_gap_to_zero(self, graphene):
        tiny_gap = DispersionModel.graphene(1.0e6, half_gap_c=1e-9 * EV / 1e6)
        m0 = iso(graphene, -1.0, 1.0)
        mv_gap = constraints_forward(tiny_gap, iso(tiny_gap, -1.0, 1.0))
        mv_cone = constraints_forward(graphene, m0)
        assert mv_gap.n == pytest.approx(mv_cone.n, rel=1e-6)
        assert mv_gap.W == pytest.approx(mv_cone.W, rel=1e-6)

    def test_j_coefficient_vs_momentum_grid(self, si_kane):
        # kappa I = y int w' v x v dp: independent Cartesian check of the
        # angular identity reduction, including vanishing off-diagonals
        model = si_kane
        E0 = model.energy_scale
        eta0, eta1 = -1.0, 1.0
        kappa, _ = j_coefficient(model, iso(model, eta0, eta1), TIGHT)

        def make_fn(i, j):
            def fn(pts):
                eps = energies_vec(model, pts)
                pn = np.maximum(np.linalg.norm(pts, axis=-1), 1e-300)
                g = 1.0 + 2.0 * model.alpha * eps
                vi = pts[..., i] / (model.m_star * g)
                vj = pts[..., j] / (model.m_star * g)
                x = eta0 + eta1 * eps / E0
                window = np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))) ** 2
                return vi * vj * window
            return fn

        p_max = model.p_of_energy(30.0 * E0)
        diag = model.degeneracy_y * momentum_grid_integral(
            model, make_fn(0, 0), p_max, n_nodes=161)
        off = model.degeneracy_y * momentum_grid_integral(
            model, make_fn(0, 1), p_max, n_nodes=161)
        assert diag == pytest.approx(kappa, rel=1e-3)
        assert abs(off) < 1e-12 * kappa
