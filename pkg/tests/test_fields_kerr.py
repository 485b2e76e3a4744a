import math

import numpy as np
import pytest

from polarlat.errors import FieldFormatError
from polarlat.fields import ScalarField3D, read_field, trapezoid3, write_field
from polarlat.kerr import (MaterialMaps, VACUUM_PERMITTIVITY, effective_bhm,
                           hopping_integral, kerr_u, mode_norm, normalize_mode)

EPS0 = VACUUM_PERMITTIVITY


def gaussian_field(n=48, box=4.0, sigma=1.0, amp=1.0):
    ax = np.linspace(-box, box, n)
    dx = ax[1] - ax[0]
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    vals = amp * np.exp(-(x * x + y * y + z * z) / (2.0 * sigma * sigma))
    return ScalarField3D(vals, (dx, dx, dx), (-box, -box, -box))


def uniform_like(f, value):
    return ScalarField3D(np.full(f.shape, value), f.spacing, f.origin)


class TestScalarField:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScalarField3D(np.zeros((2, 2)), (1, 1, 1))
        with pytest.raises(ValueError):
            ScalarField3D(np.zeros((2, 2, 2)), (1, 0, 1))
        with pytest.raises(ValueError):
            ScalarField3D(np.full((2, 2, 2), np.nan), (1, 1, 1))

    def test_axis(self):
        f = ScalarField3D(np.zeros((3, 4, 5)), (0.5, 1.0, 2.0), (10.0, 0.0, -1.0))
        assert f.axis(0).tolist() == [10.0, 10.5, 11.0]
        assert f.axis(2).tolist() == [-1.0, 1.0, 3.0, 5.0, 7.0]

    def test_trapezoid_exact_for_linear(self):
        nx, ny, nz = 5, 6, 7
        x = np.arange(nx)[:, None, None] * 0.3
        f = 2.0 + 1.5 * x * np.ones((nx, ny, nz))
        integral = trapezoid3(f, (0.3, 0.5, 0.25))
        lx, ly, lz = 0.3 * (nx - 1), 0.5 * (ny - 1), 0.25 * (nz - 1)
        exact = (2.0 * lx + 1.5 * 0.3 ** 2 * (nx - 1) ** 2 / 2) * ly * lz
        assert integral == pytest.approx(exact, rel=1e-13)

    def test_shift_identity_and_integer_steps(self):
        f = gaussian_field(n=17, box=2.0)
        assert np.array_equal(f.shifted_values((0.0, 0.0, 0.0)), f.values)
        dx = f.spacing[0]
        shifted = f.shifted_values((dx, 0.0, 0.0))
        assert np.allclose(shifted[1:, :, :], f.values[:-1, :, :])
        assert np.all(shifted[0, :, :] == 0.0)

    def test_shift_beyond_box_is_zero(self):
        f = gaussian_field(n=9, box=2.0)
        assert np.all(f.shifted_values((100.0, 0.0, 0.0)) == 0.0)


class TestFieldIO:
    @pytest.mark.parametrize("fmt", ["binary", "text"])
    def test_round_trip(self, tmp_path, fmt):
        f = gaussian_field(n=6, box=1.5, amp=3.3)
        path = tmp_path / "field"
        write_field(f, path, fmt=fmt)
        back = read_field(path)
        assert np.array_equal(back.values, f.values)
        assert back.spacing == f.spacing
        assert back.origin == f.origin

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"NOPE rest of file")
        with pytest.raises(FieldFormatError) as err:
            read_field(path)
        assert err.value.offset == 0

    def test_truncated_payload_offset(self, tmp_path):
        f = gaussian_field(n=6, box=1.5)
        path = tmp_path / "field"
        write_field(f, path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(FieldFormatError) as err:
            read_field(path)
        assert err.value.offset == len(data) // 2

    def test_trailing_bytes_rejected(self, tmp_path):
        f = gaussian_field(n=4, box=1.0)
        path = tmp_path / "field"
        write_field(f, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FieldFormatError):
            read_field(path)

    def test_text_bad_value(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("F3DT 1\n2 1 1\n1.0 1.0 1.0\n0 0 0\n1.0\nbogus\n")
        with pytest.raises(FieldFormatError) as err:
            read_field(path)
        assert err.value.offset > 0

    def test_text_wrong_counts(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("F3DT 1\n2 1\n")
        with pytest.raises(FieldFormatError):
            read_field(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "field.txt"
        path.write_text("F3DT 9\n")
        with pytest.raises(FieldFormatError):
            read_field(path)


class TestNormalization:
    def test_idempotent(self):
        phi = gaussian_field(amp=2.7)
        kc = uniform_like(phi, 10.0)
        once = normalize_mode(phi, kc)
        twice = normalize_mode(once, kc)
        assert mode_norm(once, kc) == pytest.approx(1.0, rel=1e-12)
        assert np.allclose(once.values, twice.values, rtol=1e-12)

    def test_scale_invariance(self):
        phi = gaussian_field(amp=1.0)
        kc = uniform_like(phi, 4.0)
        a = normalize_mode(phi, kc)
        b = normalize_mode(phi.scaled(3.0), kc)
        assert np.allclose(a.values, b.values, rtol=1e-12)

    def test_gaussian_amplitude(self):
        sigma, k_val = 1.0, 5.5
        # odd point count puts r = 0 on the grid, where the peak sits
        phi = gaussian_field(n=65, box=5.0, sigma=sigma, amp=1.0)
        kc = uniform_like(phi, k_val)
        normalized = normalize_mode(phi, kc)
        expected_amp = (2.0 * EPS0 * k_val * math.pi ** 1.5 * sigma ** 3) ** -0.5
        assert normalized.values.max() == pytest.approx(expected_amp, rel=1e-6)

    def test_zero_field_rejected(self):
        phi = ScalarField3D(np.zeros((4, 4, 4)), (1, 1, 1))
        with pytest.raises(ValueError):
            normalize_mode(phi, uniform_like(phi, 1.0))


class TestHopping:
    def test_self_overlap_is_unity(self):
        phi = normalize_mode(gaussian_field(), uniform_like(gaussian_field(), 2.0))
        kc = uniform_like(phi, 2.0)
        assert hopping_integral(kc, phi, (0, 0, 0)) == pytest.approx(1.0, rel=1e-12)

    def test_gaussian_overlap(self):
        sigma = 1.0
        phi = gaussian_field(n=64, box=5.0, sigma=sigma)
        kc = uniform_like(phi, 7.0)
        phi_n = normalize_mode(phi, kc)
        d = 1.37 * sigma  # deliberately off-grid displacement
        t = hopping_integral(kc, phi_n, (d, 0.0, 0.0))
        assert t == pytest.approx(math.exp(-d * d / (4 * sigma * sigma)), rel=1e-3)

    def test_displacement_symmetry(self):
        phi = gaussian_field(n=40, box=4.0)
        kc = uniform_like(phi, 3.0)
        phi_n = normalize_mode(phi, kc)
        d = (0.83, -0.41, 0.22)
        t_plus = hopping_integral(kc, phi_n, d)
        t_minus = hopping_integral(kc, phi_n, tuple(-x for x in d))
        assert t_plus == pytest.approx(t_minus, rel=1e-9)

    def test_disjoint_supports_warn_and_zero(self):
        phi = gaussian_field(n=16, box=2.0)
        kc = uniform_like(phi, 1.0)
        with pytest.warns(RuntimeWarning):
            assert hopping_integral(kc, phi, (50.0, 0.0, 0.0)) == 0.0

    def test_grid_mismatch_rejected(self):
        phi = gaussian_field(n=16, box=2.0)
        kc = uniform_like(gaussian_field(n=18, box=2.0), 1.0)
        with pytest.raises(ValueError):
            hopping_integral(kc, phi, (0, 0, 0))


class TestKerrU:
    def test_zero_nonlinearity(self):
        phi = gaussian_field()
        assert kerr_u(uniform_like(phi, 0.0), phi) == 0.0

    def test_sign_opposes_chi(self):
        phi = gaussian_field()
        assert kerr_u(uniform_like(phi, 1e-19), phi) < 0.0
        assert kerr_u(uniform_like(phi, -1e-19), phi) > 0.0

    def test_gaussian_closed_form(self):
        sigma, k_val, chi = 1.0, 3.0, 4.7e-19
        phi = gaussian_field(n=64, box=5.0, sigma=sigma)
        kc = uniform_like(phi, k_val)
        phi_n = normalize_mode(phi, kc)
        a2 = 1.0 / (2.0 * EPS0 * k_val * math.pi ** 1.5 * sigma ** 3)
        expected = -6.0 * EPS0 * chi * a2 ** 2 * (math.pi / 2.0) ** 1.5 * sigma ** 3
        assert kerr_u(uniform_like(phi, chi), phi_n) == pytest.approx(
            expected, rel=1e-4)


class TestMaterialMaps:
    def test_bundles_congruent_grids(self):
        phi = gaussian_field(n=8, box=1.0)
        maps = MaterialMaps(k_c=uniform_like(phi, 12.0),
                            chi3=uniform_like(phi, -3e-19))
        assert maps.k_c.congruent(maps.chi3)

    def test_rejects_incongruent_grids(self):
        a = gaussian_field(n=8, box=1.0)
        b = gaussian_field(n=9, box=1.0)
        with pytest.raises(ValueError):
            MaterialMaps(k_c=uniform_like(a, 2.0), chi3=uniform_like(b, 1e-19))

    def test_rejects_unphysical_dielectric(self):
        phi = gaussian_field(n=8, box=1.0)
        with pytest.raises(ValueError):
            MaterialMaps(k_c=uniform_like(phi, 0.5), chi3=uniform_like(phi, 0.0))


class TestEffectiveBhm:
    def test_scale_covariance(self):
        phi = gaussian_field(n=32, box=3.5)
        kc = uniform_like(phi, 2.0)
        chi = uniform_like(phi, 1e-19)
        d = (0.9, 0.0, 0.0)
        a = effective_bhm(kc, chi, phi, d)
        b = effective_bhm(kc, chi, phi.scaled(5.0), d)
        assert a.t == pytest.approx(b.t, rel=1e-12)
        assert a.u == pytest.approx(b.u, rel=1e-12)
        assert b.norm_constant == pytest.approx(25.0 * a.norm_constant, rel=1e-12)

    def test_refinement_stability(self):
        # halving the spacing moves the results by well under half a percent
        sigma = 1.0
        coarse = gaussian_field(n=32, box=4.0, sigma=sigma)
        fine = gaussian_field(n=64, box=4.0, sigma=sigma)
        d = (1.1, 0.3, 0.0)
        res_c = effective_bhm(uniform_like(coarse, 2.0), uniform_like(coarse, 1e-19),
                              coarse, d)
        res_f = effective_bhm(uniform_like(fine, 2.0), uniform_like(fine, 1e-19),
                              fine, d)
        assert abs(res_c.t - res_f.t) / abs(res_f.t) < 0.005
        assert abs(res_c.u - res_f.u) / abs(res_f.u) < 0.005

    def test_translation_invariance(self):
        # moving the whole grid (field pair plus origin) leaves t unchanged
        phi = gaussian_field(n=32, box=3.5)
        kc = uniform_like(phi, 2.0)
        chi = uniform_like(phi, 1e-19)
        moved = ScalarField3D(phi.values, phi.spacing, (5.0, -2.0, 0.5))
        kc_m = ScalarField3D(kc.values, kc.spacing, moved.origin)
        chi_m = ScalarField3D(chi.values, chi.spacing, moved.origin)
        d = (0.7, 0.0, 0.0)
        a = effective_bhm(kc, chi, phi, d)
        b = effective_bhm(kc_m, chi_m, moved, d)
        assert a.t == b.t and a.u == b.u

    def test_displacement_ratio(self):
        # doubling d multiplies the Gaussian overlap by exp(-3 d^2 / 4 sigma^2)
        sigma = 1.0
        phi = gaussian_field(n=64, box=5.0, sigma=sigma)
        kc = uniform_like(phi, 2.0)
        chi = uniform_like(phi, 1e-19)
        d = 0.8
        t1 = effective_bhm(kc, chi, phi, (d, 0, 0)).t
        t2 = effective_bhm(kc, chi, phi, (2 * d, 0, 0)).t
        assert t2 / t1 == pytest.approx(math.exp(-3 * d * d / (4 * sigma ** 2)),
                                        rel=1e-3)
