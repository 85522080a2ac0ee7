import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from cavibloch.errors import NumericsError
from cavibloch.wannier_stark import (
    SpatialGrid, compute_ws_basis, cos2_element, export_basis,
    matrix_elements, project_onto_ws, reconstruct,
)

OMEGA_B = 744.5 / 4780.0  # figure-regime Bloch frequency in recoil units


@pytest.fixture(scope="module")
def basis_shallow():
    """Paper regime: s0 = -3.  20 interior sites, generous wall margins."""
    return compute_ws_basis(-3.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 20)


@pytest.fixture(scope="module")
def basis_deep():
    """Well-localized regime where the box ladder is numerically ideal."""
    return compute_ws_basis(-5.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 40)


class TestSpatialGrid:
    def test_from_sites(self):
        g = SpatialGrid.from_sites(64, 16)
        assert g.n_points == 1024
        assert g.n_sites == 64
        assert g.dz == pytest.approx(np.pi / 16)
        z = g.z()
        assert len(z) == 1024
        assert z[0] == pytest.approx(-32 * np.pi)

    def test_power_of_two_required(self):
        with pytest.raises(ValueError):
            SpatialGrid(n_points=1000, z_min=0.0, z_max=1000 * 0.1, dz=0.1)

    def test_integer_periods_required(self):
        with pytest.raises(ValueError):
            SpatialGrid(n_points=1024, z_min=0.0, z_max=1024 * 0.2, dz=0.2)


class TestLadder:
    def test_spacing_shallow(self, basis_shallow):
        # direct consequence of the translated eigenproblem
        spacing = np.diff(basis_shallow.energies)
        assert np.max(np.abs(spacing - OMEGA_B)) / OMEGA_B < 1e-6

    def test_spacing_deep(self, basis_deep):
        spacing = np.diff(basis_deep.energies)
        assert np.max(np.abs(spacing - OMEGA_B)) / OMEGA_B < 1e-8

    def test_orthonormality(self, basis_shallow):
        b = basis_shallow
        overlaps = b.grid.dz * (b.states @ b.states.T)
        assert np.max(np.abs(overlaps - np.eye(b.n_states))) < 1e-8

    def test_translation_deep(self, basis_deep):
        b = basis_deep
        ppp = b.grid.points_per_site
        for i in range(b.n_states - 1):
            shifted = np.zeros_like(b.states[i])
            shifted[ppp:] = b.states[i][:-ppp]
            err = np.sqrt(b.grid.dz * np.sum((shifted - b.states[i + 1]) ** 2))
            assert err < 1e-6

    def test_centroid_steps_by_period(self, basis_deep):
        b = basis_deep
        z = b.grid.z()
        centroids = b.grid.dz * (b.states**2 @ z)
        assert np.max(np.abs(np.diff(centroids) - np.pi)) < 1e-6

    def test_energies_zeroed_at_center(self, basis_shallow):
        b = basis_shallow
        assert b.energies[b.center] == 0.0
        assert b.e0 != 0.0  # raw value is reported

    def test_zero_tilt_rejected(self):
        with pytest.raises(ValueError):
            compute_ws_basis(-3.0, 0.0, SpatialGrid.from_sites(64, 16), 20)

    def test_shallow_lattice_rejected(self):
        with pytest.raises(ValueError):
            compute_ws_basis(-0.5, OMEGA_B, SpatialGrid.from_sites(64, 16), 20)

    def test_insufficient_margin_rejected(self):
        with pytest.raises(ValueError):
            compute_ws_basis(-3.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 52)

    def test_broken_ladder_raises(self):
        # an extreme tilt makes band identification fail outright
        with pytest.raises((NumericsError, ValueError)):
            compute_ws_basis(-1.0, 2.5, SpatialGrid.from_sites(32, 16), 12)


class TestMatrixElements:
    def test_ranges(self, basis_shallow):
        el = matrix_elements(basis_shallow)
        assert 0.0 < el.gamma0 < 1.0
        assert abs(el.gamma1) < el.gamma0

    def test_site_independence(self, basis_shallow):
        b = basis_shallow
        values = [
            matrix_elements(b, site=s) for s in (-3, -1, 0, 2)
        ]
        for attr in ("gamma0", "gamma1", "Z1"):
            vals = [getattr(v, attr) for v in values]
            assert np.ptp(vals) < 1e-4  # shallow regime: residual box mixing
        deep = compute_ws_basis(-5.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 20)
        values = [matrix_elements(deep, site=s) for s in (-3, 0, 3)]
        for attr in ("gamma0", "gamma1", "Z1"):
            vals = [getattr(v, attr) for v in values]
            assert np.ptp(vals) < 1e-6

    def test_deep_lattice_limit(self):
        grid = SpatialGrid.from_sites(64, 16)
        shallow = matrix_elements(compute_ws_basis(-4.0, OMEGA_B, grid, 20))
        deep = matrix_elements(compute_ws_basis(-10.0, OMEGA_B, grid, 20))
        assert deep.gamma0 > shallow.gamma0 > 0.7
        assert abs(deep.gamma1) < abs(shallow.gamma1)
        assert abs(deep.Z1) < abs(shallow.Z1)

    def test_gamma_against_finite_difference_oracle(self, basis_shallow):
        """Independent discretization: 2nd-order FD + Richardson extrapolation.

        The FD eigenstates are found on the same box and identified by
        overlap with the tested states; values must agree to 1e-6.
        """
        b = basis_shallow
        el = matrix_elements(b)
        f = -OMEGA_B / np.pi
        n_dvr = b.grid.n_points
        dz_dvr = b.grid.dz
        wall_lo = b.grid.z_min - dz_dvr  # walls of the tested eigenproblem

        def fd_state(refine, dvr_phi):
            # same walls as the DVR box, spacing dz_dvr/refine
            h = dz_dvr / refine
            m = (n_dvr + 1) * refine  # intervals
            z = wall_lo + h * np.arange(1, m)
            diag = 2.0 / h**2 + (-3.0) * np.cos(z) ** 2 - f * z
            off = np.full(m - 2, -1.0 / h**2)
            window = (b.e0 - 0.45 * OMEGA_B, b.e0 + 1.45 * OMEGA_B)
            _, vecs = eigh_tridiagonal(diag, off, select="v", select_range=window)
            vecs = vecs / np.sqrt(h)
            # rows of the FD grid that coincide with the DVR grid points
            rows = (np.arange(1, n_dvr + 1) * refine) - 1
            on_dvr = vecs[rows, :]
            scores = np.abs(dz_dvr * (dvr_phi @ on_dvr))
            pick = int(np.argmax(scores))
            phi = vecs[:, pick]
            if np.sum(on_dvr[:, pick] * dvr_phi) < 0:
                phi = -phi
            return z, h, phi

        def fd_elements(refine):
            ic = b.center
            z, h, phi0 = fd_state(refine, b.states[ic])
            _, _, phi1 = fd_state(refine, b.states[ic + 1])
            cos2 = np.cos(z) ** 2
            return (
                h * np.sum(phi0**2 * cos2),
                h * np.sum(phi0 * cos2 * phi1),
            )

        g0_a, g1_a = fd_elements(4)
        g0_b, g1_b = fd_elements(8)
        g0 = g0_b + (g0_b - g0_a) / 3.0
        g1 = g1_b + (g1_b - g1_a) / 3.0
        assert el.gamma0 == pytest.approx(g0, abs=1e-6)
        assert el.gamma1 == pytest.approx(g1, abs=1e-6)

    def test_stability_under_grid_doubling(self):
        coarse = matrix_elements(
            compute_ws_basis(-5.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 20)
        )
        fine = matrix_elements(
            compute_ws_basis(-5.0, OMEGA_B, SpatialGrid.from_sites(64, 32), 20)
        )
        assert coarse.gamma0 == pytest.approx(fine.gamma0, abs=1e-6)
        assert coarse.gamma1 == pytest.approx(fine.gamma1, abs=1e-6)
        assert coarse.Z0 == pytest.approx(fine.Z0, abs=1e-6)
        assert coarse.Z1 == pytest.approx(fine.Z1, abs=1e-6)

    def test_beyond_neighbour_element_is_smaller(self, basis_shallow):
        b = basis_shallow
        g1 = cos2_element(b, b.center, b.center + 1)
        g2 = cos2_element(b, b.center, b.center + 2)
        assert abs(g2) < abs(g1)


class TestProjection:
    def test_single_state(self, basis_shallow):
        b = basis_shallow
        c, residual = project_onto_ws(b.states[b.center].astype(complex), b)
        expected = np.zeros(b.n_states)
        expected[b.center] = 1.0
        assert np.max(np.abs(c - expected)) < 1e-8
        assert abs(residual) < 1e-8

    def test_two_state_coherence(self, basis_shallow):
        b = basis_shallow
        psi = (b.states[b.center] + b.states[b.center + 1]) / np.sqrt(2)
        c, _ = project_onto_ws(psi.astype(complex), b)
        sigma1 = abs(np.sum(np.conj(c[:-1]) * c[1:]))
        assert sigma1 == pytest.approx(0.5, abs=1e-8)

    def test_gaussian_envelope_residual(self, basis_shallow):
        b = basis_shallow
        w = np.exp(-2.0 * b.site_indices.astype(float) ** 2 / 8.0**2)
        psi = (w[:, None] * b.states).sum(axis=0).astype(complex)
        psi /= np.sqrt(b.grid.dz * np.sum(np.abs(psi) ** 2))
        c, residual = project_onto_ws(psi, b)
        assert residual < 1e-3
        # completeness: reconstruction error bounded by round-off
        err = reconstruct(c, b) - psi
        assert np.sqrt(b.grid.dz * np.sum(np.abs(err) ** 2)) < 1e-8

    def test_residual_warning(self, basis_shallow):
        b = basis_shallow
        z = b.grid.z()
        psi = np.exp(-((z - 40.0) ** 2))  # mostly outside the kept sites
        psi = psi / np.sqrt(b.grid.dz * np.sum(psi**2))
        with pytest.warns(UserWarning):
            project_onto_ws(psi.astype(complex), b)

    def test_grid_mismatch(self, basis_shallow):
        with pytest.raises(ValueError):
            project_onto_ws(np.zeros(17, dtype=complex), basis_shallow)


def test_export(tmp_path, basis_shallow):
    path = tmp_path / "basis.txt"
    export_basis(basis_shallow, path)
    data = np.loadtxt(path)
    assert data.shape == (basis_shallow.grid.n_points, basis_shallow.n_states + 1)
