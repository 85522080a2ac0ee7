import math

import numpy as np
import pytest

from cavibloch.errors import NumericsError
from cavibloch.meanfield import (
    CavityField, InitialState, SimConfig, WaveFunction,
    effective_detuning, init_wavepacket, lattice_force, overlap_parameter,
    run, steady_field, step,
)
from cavibloch.units import ScaledParams
from cavibloch.wannier_stark import SpatialGrid, compute_ws_basis, matrix_elements

OMEGA_B = 744.5 / 4780.0
KAPPA = 1000.0 / 4780.0
U0 = -1.0 / 4780.0


def make_scaled(delta_over_kappa=1.3, n_atoms=1000, u0=U0, eta=None, delta0=None):
    nu0 = n_atoms * u0
    if delta0 is not None:
        delta_c = delta0  # caller already folded the collective shift in
    else:
        delta_c = delta_over_kappa * KAPPA + nu0
    if eta is None:
        # stationary depth of -3 E_r at detuning ~ delta_c - nu0*gamma0(~0.714)
        d0 = delta_c - nu0 * 0.7142860309
        eta = math.sqrt(abs(-3.0 / u0) * (KAPPA**2 + d0**2))
    return ScaledParams(
        omega_B=OMEGA_B, f=-OMEGA_B / math.pi, kappa=KAPPA, eta=eta,
        delta_c=delta_c, u0=u0, n_atoms=n_atoms, recoil_freq=2 * math.pi * 4780.0,
    )


@pytest.fixture(scope="module")
def basis64():
    return compute_ws_basis(-3.0, OMEGA_B, SpatialGrid.from_sites(64, 16), 41)


class TestInitWavepacket:
    def test_localized_has_zero_coherence(self, basis64):
        psi = init_wavepacket(basis64, "localized", center_site=0)
        c = basis64.grid.dz * (basis64.states @ psi.values)
        sigma1 = abs(np.sum(np.conj(c[:-1]) * c[1:]))
        assert sigma1 < 1e-12  # zero up to projection round-off
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)

    def test_delocalized_coherence(self, basis64):
        psi = init_wavepacket(basis64, "delocalized", 0, 20.0)
        c = basis64.grid.dz * (basis64.states @ psi.values)
        sigma1 = abs(np.sum(np.conj(c[:-1]) * c[1:]))
        assert sigma1 > 0.9
        # oracle: coherence of the Gaussian weights themselves
        w = np.exp(-2.0 * basis64.site_indices.astype(float) ** 2 / 20.0**2)
        w /= np.sqrt(np.sum(w**2))
        assert sigma1 == pytest.approx(np.sum(w[:-1] * w[1:]), rel=1e-3)

    def test_delocalized_centroid(self, basis64):
        el = matrix_elements(basis64)
        b = basis64
        psi = init_wavepacket(b, "delocalized", 0, 20.0)
        c = b.grid.dz * (b.states @ psi.values)
        sigma1 = abs(np.sum(np.conj(c[:-1]) * c[1:]))
        # exact identity: grid centroid equals the full position matrix in
        # the WS basis (completeness of the expansion)
        z_matrix = b.grid.dz * (b.states * b.grid.z()) @ b.states.T
        from_matrix = float(np.real(np.conj(c) @ z_matrix @ c))
        assert psi.centroid() == pytest.approx(from_matrix, abs=1e-6)
        # the symmetric envelope kills the site-population term; the
        # nearest-neighbour coherence term dominates what remains
        nn_prediction = el.Z0 + 2 * el.Z1 * sigma1
        assert psi.centroid() == pytest.approx(nn_prediction, rel=0.15)
        # and everything stays within one site of the centre state
        assert abs(psi.centroid() - el.Z0) < 2 * np.pi

    def test_width_exceeding_interior(self, basis64):
        with pytest.raises(ValueError):
            init_wavepacket(basis64, "delocalized", 0, 60.0)

    def test_missing_site(self, basis64):
        with pytest.raises(ValueError):
            init_wavepacket(basis64, "localized", center_site=100)

    def test_custom_weights(self, basis64):
        w = np.zeros(basis64.n_states)
        w[basis64.center] = 1.0
        psi = init_wavepacket(basis64, "custom", weights=w)
        ref = init_wavepacket(basis64, "localized", 0)
        assert np.allclose(psi.values, ref.values)


class TestEffectiveDetuning:
    def test_uniform_cloud(self, basis64):
        grid = basis64.grid
        psi = WaveFunction(
            grid=grid,
            values=np.full(grid.n_points, 1.0 / math.sqrt(grid.n_points * grid.dz), dtype=complex),
        )
        scaled = make_scaled()
        assert overlap_parameter(psi) == pytest.approx(0.5, abs=1e-12)
        assert effective_detuning(psi, scaled) == pytest.approx(
            scaled.delta_c - scaled.nu0 / 2, rel=1e-12
        )

    def test_antinode_cloud(self, basis64):
        grid = basis64.grid
        z = grid.z()
        vals = np.exp(-(z / 0.2) ** 2).astype(complex)
        vals /= math.sqrt(grid.dz * np.sum(np.abs(vals) ** 2))
        psi = WaveFunction(grid=grid, values=vals)
        assert overlap_parameter(psi) > 0.96

    def test_figure_detuning_bookkeeping(self):
        scaled = make_scaled(delta_over_kappa=1.3)
        assert scaled.nu0 == pytest.approx(-KAPPA, rel=1e-12)
        assert scaled.delta_c - scaled.nu0 == pytest.approx(1.3 * KAPPA, rel=1e-12)


class TestLatticeForce:
    def test_symmetric_cloud_feels_nothing(self, basis64):
        grid = basis64.grid
        z = grid.z()
        vals = np.exp(-(z / 2.0) ** 2).astype(complex)  # even about the z=0 antinode
        vals /= math.sqrt(grid.dz * np.sum(np.abs(vals) ** 2))
        psi = WaveFunction(grid=grid, values=vals)
        force = lattice_force(psi, CavityField(alpha=120.0 + 0j), make_scaled())
        assert abs(force) < 1e-10

    def test_dark_cavity(self, basis64):
        psi = init_wavepacket(basis64, "delocalized", 0, 12.0)
        assert lattice_force(psi, CavityField(alpha=0j), make_scaled()) == 0.0


class TestStep:
    def test_free_dispersion(self):
        # no lattice, negligible tilt: momentum distribution is invariant
        grid = SpatialGrid.from_sites(64, 16)
        z = grid.z()
        vals = np.exp(-((z + 10) / 5.0) ** 2 + 1j * 0.7 * z)
        vals /= math.sqrt(grid.dz * np.sum(np.abs(vals) ** 2))
        psi = WaveFunction(grid=grid, values=vals.astype(complex))
        tiny = 1e-12
        scaled = ScaledParams(
            omega_B=tiny, f=-tiny / math.pi, kappa=KAPPA, eta=1.0,
            delta_c=0.0, u0=0.0, n_atoms=1, recoil_freq=3e4,
        )
        field = CavityField(alpha=0j)
        p0 = np.abs(np.fft.fft(psi.values)) ** 2
        for _ in range(50):
            psi, field = step(psi, field, scaled, 1e-3)
        assert np.max(np.abs(np.abs(np.fft.fft(psi.values)) ** 2 - p0)) < 1e-9 * p0.max()
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)

    def test_frozen_atoms_field_matches_closed_form(self, basis64):
        # u0 = 0 freezes the detuning; the field ODE then has an exact solution
        scaled = make_scaled(u0=0.0, eta=5.0)
        psi = init_wavepacket(basis64, "delocalized", 0, 12.0)
        field = CavityField(alpha=0j)
        dt, n_steps = 1e-3, 2000
        for _ in range(n_steps):
            psi, field = step(psi, field, scaled, dt)
        lam = scaled.kappa - 1j * scaled.delta_c
        expected = scaled.eta / lam * (1.0 - np.exp(-lam * n_steps * dt))
        assert abs(field.alpha - expected) < 1e-8 * abs(expected)

    def test_norm_preserved_with_full_coupling(self, basis64):
        scaled = make_scaled()
        psi = init_wavepacket(basis64, "delocalized", 0, 12.0)
        field = CavityField(alpha=steady_field(scaled, effective_detuning(psi, scaled)))
        for _ in range(200):
            psi, field = step(psi, field, scaled, 1e-3)
        assert psi.norm() == pytest.approx(1.0, abs=1e-10)


def short_config(basis, scaled, periods=3.0, width=12.0, backaction=True,
                 steps_per_sample=630, kind="delocalized"):
    period = 2 * math.pi / scaled.omega_B
    dt = period / (64 * steps_per_sample)
    return SimConfig(
        scaled=scaled, grid=basis.grid, dt=dt, t_final=periods * period,
        sample_stride=steps_per_sample,
        initial_state=InitialState(kind=kind, center_site=0, width_sites=width),
        backaction=backaction,
    )


class TestRun:
    def test_static_lattice_bloch_periodicity(self, basis64):
        scaled = make_scaled(delta_over_kappa=-0.7)
        config = short_config(basis64, scaled, periods=3.0, backaction=False)
        trace = run(config, basis64)
        assert np.max(np.abs(trace.norm - 1.0)) < 1e-8
        spp = 64
        drift = np.abs(trace.centroid[2 * spp] - trace.centroid[spp])
        assert drift < 1e-3 * np.pi
        # control run: constant field, constant depth
        assert np.ptp(trace.n_photons) < 1e-8 * trace.n_photons[0]

    def test_determinism(self, basis64):
        scaled = make_scaled()
        config = short_config(basis64, scaled, periods=1.0)
        t1 = run(config, basis64)
        t2 = run(config, basis64)
        assert np.array_equal(t1.centroid, t2.centroid)
        assert np.array_equal(t1.alpha, t2.alpha)

    def test_run_agrees_with_repeated_step(self, basis64):
        scaled = make_scaled()
        period = 2 * math.pi / scaled.omega_B
        config = SimConfig(
            scaled=scaled, grid=basis64.grid, dt=1e-3, t_final=0.05 * period,
            sample_stride=1,
            initial_state=InitialState(kind="delocalized", center_site=0, width_sites=12.0),
        )
        trace = run(config, basis64)
        psi = init_wavepacket(basis64, "delocalized", 0, 12.0)
        field = CavityField(alpha=steady_field(scaled, effective_detuning(psi, scaled)))
        n_steps = int(round(config.t_final / config.dt))
        for _ in range(n_steps):
            psi, field = step(psi, field, scaled, config.dt)
        # the two Strang orderings agree to their shared O(dt^2) accuracy
        assert psi.centroid() == pytest.approx(trace.centroid[-1], abs=1e-6)
        assert abs(field.alpha - trace.alpha[-1]) < 1e-6 * abs(field.alpha)

    def test_energy_bookkeeping(self, basis64):
        # only the explicit time dependence of the potential does work:
        # dE/dt = u0 d|alpha|^2/dt * C
        scaled = make_scaled(delta_over_kappa=-0.7)
        config = short_config(basis64, scaled, periods=2.0)
        trace = run(config, basis64)
        dn_dt = np.gradient(trace.n_photons, trace.times)
        rhs = scaled.u0 * dn_dt * trace.overlap
        lhs_total = trace.energy[-1] - trace.energy[0]
        rhs_total = np.trapezoid(rhs, trace.times)
        scale_ref = np.max(np.abs(trace.energy - trace.energy[0]))
        assert lhs_total == pytest.approx(rhs_total, abs=0.02 * scale_ref)

    def test_edge_violation_aborts(self):
        # free fall with the lattice off slams the cloud into the wall
        grid = SpatialGrid.from_sites(32, 16)
        basis = compute_ws_basis(-3.0, OMEGA_B, grid, 16)
        scaled = make_scaled(u0=0.0, eta=1.0)
        config = short_config(basis, scaled, periods=2.0, width=6.0)
        with pytest.raises(NumericsError, match="edge"):
            run(config, basis)

    def test_dt_stability_validated(self, basis64):
        scaled = make_scaled()
        with pytest.raises(ValueError, match="dt"):
            SimConfig(
                scaled=scaled, grid=basis64.grid, dt=5e-3, t_final=1.0,
                sample_stride=10, initial_state=InitialState(),
            )

    def test_sampling_rate_validated(self, basis64):
        scaled = make_scaled()
        with pytest.raises(ValueError, match="samples"):
            SimConfig(
                scaled=scaled, grid=basis64.grid, dt=1e-3, t_final=100.0,
                sample_stride=5000, initial_state=InitialState(),
            )
