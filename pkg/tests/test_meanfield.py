import math

import numpy as np
import pytest

from polarlat.errors import LobeError
from polarlat.meanfield import (Phase, bhm_boundary_oracle,
                                boundary_tunneling, classify_phase,
                                critical_tunneling, filling_at_zero_psi,
                                ground_energy_at_psi, landau_boundary_tunneling,
                                minimize_order_parameter, mott_lobe_mu_range,
                                phase_diagram, _golden_min)
from polarlat.model import SystemParams

P8 = SystemParams.dimensionless(8)
P1 = SystemParams.dimensionless(1)


class TestGroundEnergy:
    def test_zero_tunneling_is_psi_independent(self):
        for psi in (0.0, 0.3, 1.1):
            assert ground_energy_at_psi(P8, 0.0, -2.7, psi) == pytest.approx(
                ground_energy_at_psi(P8, 0.0, -2.7, 0.0), rel=1e-14)

    def test_filling_one_plateau(self):
        # inside the first lobe the undriven energy is eps(1) - mu
        val = ground_energy_at_psi(P8, 0.0, -2.73, 0.0)
        assert val == pytest.approx(-math.sqrt(8.0) + 2.73, rel=1e-12)

    def test_energy_grows_at_large_psi(self):
        e0 = ground_energy_at_psi(P8, 0.004, -2.73, 0.0)
        e_large = ground_energy_at_psi(P8, 0.004, -2.73, 2.5)
        assert e_large > e0

    def test_matches_dense_route(self):
        from polarlat.model import build_basis, build_site_hamiltonian, lowest_eigenpair
        t, mu_rel, psi = 0.012, -2.7, 0.45
        basis = build_basis(14, 8)
        h = build_site_hamiltonian(P8, basis, t, P8.omega_ex + mu_rel, psi)
        dense, _ = lowest_eigenpair(h)
        assert ground_energy_at_psi(P8, t, mu_rel, psi) == pytest.approx(
            dense, rel=1e-8)

    def test_rejects_negative_t(self):
        with pytest.raises(ValueError):
            ground_energy_at_psi(P8, -0.1, -2.7, 0.0)


class TestMinimize:
    def test_zero_tunneling_gives_zero_psi(self):
        for mu in (-3.5, -2.7, -2.66):
            res = minimize_order_parameter(P8, 0.0, mu)
            assert res.psi_star == 0.0

    def test_filling_zero_wins_outside_lobe(self):
        # N=1: at mu = -1.5 the one-polariton state costs eps(1) + 1.5 = 0.5,
        # the empty cavity costs 0
        res = minimize_order_parameter(P1, 0.0, -1.5)
        assert res.psi_star == 0.0
        assert res.e_star == pytest.approx(0.0, abs=1e-12)
        res_in = minimize_order_parameter(P1, 0.0, -0.7)
        assert res_in.e_star == pytest.approx(-1.0 + 0.7, rel=1e-12)

    def test_continuous_onset(self):
        # second-order transition: psi* grows continuously from zero
        mu = -2.73
        t_b = boundary_tunneling(P8, 1, mu)
        res = minimize_order_parameter(P8, t_b * 1.0005, mu)
        assert 0.0 < res.psi_star < 0.05
        res2 = minimize_order_parameter(P8, t_b * 1.3, mu)
        assert res2.psi_star > res.psi_star

    def test_reported_result_is_cutoff_converged(self):
        # enlarging both cutoffs by 2 beyond the reported ones moves the
        # minimal energy by less than the convergence threshold
        from polarlat.meanfield import _BandedSite

        t, mu = 0.018, -2.7
        res = minimize_order_parameter(P8, t, mu)
        bigger = _BandedSite(P8.big_n, res.n_max + 2,
                             min(P8.big_n, res.e_max + 2),
                             P8.detuning / P8.g, mu, P8.z * t)
        refreshed = bigger.energy(res.psi_star)
        assert abs(refreshed - res.e_star) <= 1e-8 * max(1.0, abs(res.e_star))


class TestClassify:
    def test_mott_one(self):
        point = classify_phase(P8, 0.0, -2.73)
        assert point.phase is Phase.MI and point.filling == 1

    def test_vacuum(self):
        point = classify_phase(P8, 0.0, -10.0)
        assert point.phase is Phase.MI and point.filling == 0

    def test_deep_superfluid_runaway(self):
        # far above the lobe tip the mean-field energy is unbounded in psi;
        # that regime is superfluid by definition
        point = classify_phase(P8, 1.0, -2.73)
        assert point.phase is Phase.SF
        assert point.runaway and math.isinf(point.psi_star)

    def test_moderate_superfluid(self):
        t_c, _ = critical_tunneling(P8, 1)
        point = classify_phase(P8, 2.0 * t_c, -2.73)
        assert point.phase is Phase.SF
        assert not point.runaway and point.psi_star > 1e-3


class TestLobes:
    def test_lobe_one_n8(self):
        lo, hi = mott_lobe_mu_range(P8, 1)
        assert lo == pytest.approx(-math.sqrt(8.0), rel=1e-12)
        assert hi == pytest.approx(math.sqrt(8.0) - math.sqrt(30.0), rel=1e-12)

    def test_lobe_one_n1(self):
        lo, hi = mott_lobe_mu_range(P1, 1)
        assert lo == pytest.approx(-1.0, rel=1e-12)
        assert hi == pytest.approx(1.0 - math.sqrt(2.0), rel=1e-12)
        assert hi - lo == pytest.approx(2.0 - math.sqrt(2.0), rel=1e-12)

    def test_filling_ties_break_down(self):
        lo, _ = mott_lobe_mu_range(P8, 1)
        assert filling_at_zero_psi(P8, lo) == 0  # degenerate edge -> lower

    def test_requires_positive_index(self):
        with pytest.raises(ValueError):
            mott_lobe_mu_range(P8, 0)


class TestBoundary:
    def test_outside_lobe_rejected(self):
        with pytest.raises(LobeError):
            boundary_tunneling(P8, 1, -3.2)

    def test_pinch_near_edges(self):
        lo, hi = mott_lobe_mu_range(P8, 1)
        width = hi - lo
        t_tip = boundary_tunneling(P8, 1, lo + 0.5 * width)
        t_edge = boundary_tunneling(P8, 1, lo + 0.02 * width)
        assert t_edge < 0.35 * t_tip

    @pytest.mark.parametrize("big_n,det,frac", [
        (8, 0.0, 0.45), (3, 0.0, 0.3), (1, 0.0, 0.55), (3, 4.0, 0.5)])
    def test_against_curvature_oracle(self, big_n, det, frac):
        p = SystemParams.dimensionless(big_n, det)
        lo, hi = mott_lobe_mu_range(p, 1)
        mu = lo + frac * (hi - lo)
        t_bisect = boundary_tunneling(p, 1, mu)
        t_landau = landau_boundary_tunneling(p, 1, mu)
        assert t_bisect == pytest.approx(t_landau, rel=1e-3)

    def test_landau_pinch(self):
        lo, hi = mott_lobe_mu_range(P8, 1)
        width = hi - lo
        assert landau_boundary_tunneling(P8, 1, lo + 1e-6 * width) < 1e-4


class TestCritical:
    def test_single_impurity_scale(self):
        t_c, mu_tip = critical_tunneling(P1, 1)
        assert 0.01 < t_c < 0.1  # of order 1e-2 in units of g
        lo, hi = mott_lobe_mu_range(P1, 1)
        assert lo < mu_tip < hi

    def test_tip_maximizes_boundary(self):
        t_c, mu_tip = critical_tunneling(P8, 1)
        lo, hi = mott_lobe_mu_range(P8, 1)
        for frac in (0.15, 0.85):
            assert boundary_tunneling(P8, 1, lo + frac * (hi - lo)) <= t_c * (1 + 1e-3)

    def test_blue_detuning_raises_tc(self):
        t_res, _ = critical_tunneling(SystemParams.dimensionless(3, 0.0), 1)
        t_blue, _ = critical_tunneling(SystemParams.dimensionless(3, 3.0), 1)
        assert t_blue > t_res


class TestBhmOracle:
    def test_vanishes_at_lobe_base_edges(self):
        assert bhm_boundary_oracle(1.0, 4, 1, 1e-9) < 1e-8
        assert bhm_boundary_oracle(1.0, 4, 1, 1.0 - 1e-9) < 1e-8

    def test_tip_closed_form(self):
        u, z = 1.0, 4
        mu_tip = math.sqrt(2.0) - 1.0
        t_tip = bhm_boundary_oracle(u, z, 1, mu_tip)
        assert z * t_tip == pytest.approx(3.0 - 2.0 * math.sqrt(2.0), rel=1e-12)
        assert u / t_tip == pytest.approx(4.0 * (3.0 + 2.0 * math.sqrt(2.0)),
                                          rel=1e-12)

    def test_tip_is_maximum(self):
        def neg(mu):
            return -bhm_boundary_oracle(1.0, 4, 1, mu)

        mu_tip, neg_t = _golden_min(neg, 1e-9, 1 - 1e-9, 1e-9)
        assert mu_tip == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-6)
        assert -neg_t == pytest.approx((3.0 - 2.0 * math.sqrt(2.0)) / 4.0, rel=1e-9)

    def test_outside_base_rejected(self):
        with pytest.raises(LobeError):
            bhm_boundary_oracle(1.0, 4, 1, 1.5)
        with pytest.raises(LobeError):
            bhm_boundary_oracle(1.0, 4, 2, 0.5)


class TestPhaseDiagram:
    def test_single_cell(self):
        grid = phase_diagram(P8, [0.0], [-2.7])
        assert grid.psi.shape == (1, 1)
        point = grid.points[0][0]
        assert point.phase is Phase.MI and point.filling == 1

    def test_zero_t_column_matches_lobes(self):
        mu_axis = np.linspace(-3.0, -2.2, 41)
        grid = phase_diagram(P8, [0.0], mu_axis)
        lo1, hi1 = mott_lobe_mu_range(P8, 1)
        for j, mu in enumerate(mu_axis):
            point = grid.points[0][j]
            assert point.phase is Phase.MI
            if lo1 + 1e-9 < mu < hi1 - 1e-9:
                assert point.filling == 1

    def test_lobe_structure_and_workers_determinism(self):
        t_axis = np.linspace(0.0, 0.02, 5)
        mu_axis = np.linspace(-3.0, -2.2, 9)
        serial = phase_diagram(P8, t_axis, mu_axis, workers=1)
        parallel = phase_diagram(P8, t_axis, mu_axis, workers=2)
        assert np.array_equal(serial.psi, parallel.psi)
        assert np.array_equal(serial.energy, parallel.energy)
        assert np.array_equal(serial.filling, parallel.filling)
        fillings = set(serial.filling[serial.is_mott])
        assert {1, 2} <= fillings

    def test_rerun_bit_identical(self):
        t_axis = np.linspace(0.0, 0.018, 3)
        mu_axis = np.linspace(-2.82, -2.66, 4)
        a = phase_diagram(P8, t_axis, mu_axis)
        b = phase_diagram(P8, t_axis, mu_axis)
        assert np.array_equal(a.psi, b.psi) and np.array_equal(a.energy, b.energy)

    def test_axis_validation(self):
        with pytest.raises(ValueError):
            phase_diagram(P8, [], [-2.7])
        with pytest.raises(ValueError):
            phase_diagram(P8, [0.0, 0.0], [-2.7])
        with pytest.raises(ValueError):
            phase_diagram(P8, [0.0], [-2.2, -2.7])
