import math

import numpy as np
import pytest

from conftest import sector_test2
from pnsat.errors import NumericalError, ValidationError
from pnsat.moments import (
    MomentBasis,
    ScatteringSpectrum,
    assemble_transport,
    dump_moment_table,
    legendre_moments,
    load_moment_table,
    recursion_check,
    scattering_diagonal,
)


def random_directions(n, seed=0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1)[:, None]


class TestMomentBasis:
    def test_dims(self):
        b = MomentBasis.build(13)
        assert b.dim == 196
        assert b.n_odd == 91
        assert b.n_even == 105

    def test_permutation_bijection(self):
        b = MomentBasis.build(6)
        for axis in (1, 2, 3):
            perm = b.permutation(axis)
            assert sorted(perm.tolist()) == list(range(b.dim))
            inv = np.empty_like(perm)
            inv[perm] = np.arange(b.dim)
            np.testing.assert_array_equal(perm[inv[perm]], perm)

    def test_family_partition(self):
        b = MomentBasis.build(4)
        fams = b.family_indices((1, 3))
        assert len(fams) == 4
        all_idx = np.sort(np.concatenate(list(fams.values())))
        np.testing.assert_array_equal(all_idx, np.arange(b.dim))


class TestTransportAssembly:
    def test_symmetry(self, system5):
        for a in system5.a_full:
            assert np.abs(a - a.T).max() < 1e-12

    def test_golden_coupling_row(self, basis2, system2):
        rows, cols = sector_test2(basis2)
        a_hat = system2.a_hat_block(1, rows, cols).ravel()
        np.testing.assert_allclose(
            a_hat,
            [1.0 / math.sqrt(3.0), -1.0 / math.sqrt(15.0), 1.0 / math.sqrt(5.0)],
            atol=1e-13,
        )

    def test_mean_flux_coupling_z(self):
        basis = MomentBasis.build(1)
        system = assemble_transport(basis)
        i, j = basis.pos(1, 0), basis.pos(0, 0)
        assert system.a_full[2][i, j] == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-14)

    def test_mean_mean_entry_zero(self, system5):
        for a in system5.a_full:
            assert abs(a[0, 0]) < 1e-15

    def test_block_purity(self, basis5, system5):
        for axis in (1, 2, 3):
            odd = basis5.odd_positions(axis)
            even = basis5.even_positions(axis)
            a = system5.a_full[axis - 1]
            assert np.abs(a[np.ix_(odd, odd)]).max() < 1e-13
            assert np.abs(a[np.ix_(even, even)]).max() < 1e-13

    def test_tampered_assembly_detected(self, basis2):
        from pnsat.checks import check_block_purity, check_golden_coupling

        system = assemble_transport(basis2)
        bad_full = tuple(a.copy() for a in system.a_full)
        bad_full[0][0, 0] = 0.3  # same-parity entry: breaks the block structure
        tampered = type(system)(basis2, bad_full, system.a_hat)
        assert not check_block_purity(system=tampered).passed
        bad_full2 = tuple(a.copy() for a in system.a_full)
        i, j = basis2.pos(1, 1), basis2.pos(0, 0)
        bad_full2[0][i, j] += 1e-3
        tampered2 = type(system)(basis2, bad_full2, system.a_hat)
        assert not check_golden_coupling(system=tampered2).passed

    @pytest.mark.parametrize("n", range(1, 10))
    def test_spectrum_symmetric_with_kernel(self, n):
        system = assemble_transport(MomentBasis.build(n))
        for axis in (1, 2, 3):
            ev = np.sort(np.linalg.eigvalsh(system.a_full[axis - 1]))
            np.testing.assert_allclose(ev, -ev[::-1], atol=1e-10)
            assert int(np.sum(np.abs(ev) < 1e-10)) == n + 1

    def test_full_row_rank(self):
        system = assemble_transport(MomentBasis.build(13))
        for axis in (1, 2, 3):
            sv = np.linalg.svd(system.a_hat[axis - 1], compute_uv=False)
            assert sv[-1] > 1e-10

    def test_max_speed_below_one(self, system5):
        assert system5.max_speed() < 1.0


class TestRecursion:
    def test_residual_small_random(self, system5):
        dirs = random_directions(100, seed=5)
        for axis in (1, 2, 3):
            assert recursion_check(system5, axis, dirs) < 1e-12

    def test_residual_at_pole(self):
        system = assemble_transport(MomentBasis.build(3))
        assert recursion_check(system, 1, np.array([1.0, 0.0, 0.0])) < 1e-12

    def test_degenerate_order_zero(self):
        system = assemble_transport(MomentBasis.build(0))
        assert recursion_check(system, 3, np.array([0.0, 0.0, 1.0])) == 0.0

    def test_z_axis_closed_form(self):
        # a(l, k) = sqrt(((l+1)^2 - k^2)/((2l+1)(2l+3))) couples (l, k) <-> (l+1, k)
        n = 7
        basis = MomentBasis.build(n)
        system = assemble_transport(basis)
        a3 = system.a_full[2]
        for l in range(n):
            for k in range(-l, l + 1):
                want = math.sqrt(((l + 1.0) ** 2 - k * k) / ((2 * l + 1.0) * (2 * l + 3.0)))
                assert a3[basis.pos(l, k), basis.pos(l + 1, k)] == pytest.approx(want, abs=1e-13)


class TestScattering:
    def test_isotropic_conservation(self):
        basis = MomentBasis.build(4)
        q = scattering_diagonal(ScatteringSpectrum.isotropic(3.0, 4), basis)
        assert q[0] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(q[1:], -3.0, atol=1e-14)

    def test_hg_moment(self):
        basis = MomentBasis.build(4)
        q = scattering_diagonal(ScatteringSpectrum.henyey_greenstein(1.0, 0.5, 4), basis)
        assert q[basis.pos(2, 0)] == pytest.approx(-0.75, abs=1e-14)
        assert q[basis.pos(2, -2)] == pytest.approx(-0.75, abs=1e-14)  # k-independent

    def test_hg_moments_match_quadrature_oracle(self):
        # brute-force Legendre projection of the HG kernel against g^l
        g = 0.37
        def hg(c):
            return (1.0 - g * g) / (4.0 * math.pi * (1.0 + g * g - 2.0 * g * c) ** 1.5)
        mom = legendre_moments(hg, 6)
        np.testing.assert_allclose(mom, g ** np.arange(7), atol=1e-12)

    def test_rejects_amplifying_spectrum(self):
        with pytest.raises(ValidationError):
            ScatteringSpectrum(1.0, np.array([2.0, 0.0]))

    def test_rejects_bad_moment_ordering(self):
        with pytest.raises(ValidationError):
            ScatteringSpectrum(5.0, np.array([1.0, 3.0]))

    def test_all_entries_nonpositive(self):
        basis = MomentBasis.build(6)
        spec = ScatteringSpectrum.henyey_greenstein(0.8, -0.4, 6, sigma_t=1.1)
        q = scattering_diagonal(spec, basis)
        assert np.all(q <= 1e-15)

    def test_table_roundtrip(self, tmp_path):
        spec = ScatteringSpectrum.henyey_greenstein(0.8, 0.3, 5, sigma_t=1.0)
        path = tmp_path / "kernel.txt"
        dump_moment_table(spec, path)
        back = load_moment_table(path)
        assert back.sigma_t == spec.sigma_t
        np.testing.assert_array_equal(back.moments, spec.moments)

    def test_table_requires_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1.0\n1 0.5\n")
        with pytest.raises(ValidationError):
            load_moment_table(path)
