"""Scenario execution: resolve a configuration, run, analyse, write files.

A resolved run fixes the dimensionless parameters, the Wannier-Stark basis
at the stationary depth, and the commensurate time base
dt = T_B / (samples_per_period * steps_per_sample), which puts omega_B
exactly on a spectral bin.  Detunings given relative to the collective shift
(delta0_over_kappa) and pump strengths given as a target depth are resolved
through gamma0 of the basis itself; when only eta is known the stationary
depth is found by fixed-point iteration on a small probe basis.

Outputs per run: trace.csv, ladder_trace.csv, spectrum.csv, loop.csv,
metrology.csv and manifest.json.  Sweeps add velocity.csv with one row per
detuning, written in sorted order regardless of worker scheduling, so runs
are reproducible bit for bit on one platform.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis
from .config import RunConfig, SweepSpec, config_to_dict
from .errors import ConfigError
from .ladder import ladder_state_from_coeffs, run_ladder
from .meanfield import InitialState, SimConfig, TraceRecord, init_wavepacket, run
from .units import HBAR, PhysicalParams, ScaledParams
from .wannier_stark import (
    MatrixElements, SpatialGrid, WSBasis, compute_ws_basis, matrix_elements,
    project_onto_ws,
)

_TWO_PI = 2 * math.pi
TRANSIENT_KAPPAS = 3.0  # discard 3/kappa before spectral and velocity fits


@dataclass(frozen=True, eq=False)
class ResolvedRun:
    """Everything needed to execute one run, after parameter resolution."""

    config: RunConfig
    physical: PhysicalParams
    scaled: ScaledParams
    grid: SpatialGrid
    basis: WSBasis
    elements: MatrixElements
    sim: SimConfig
    s_basis: float
    delta0: float
    sigma1: float
    theta1: float
    alpha0: complex


def _probe_gamma0(s0: float, omega_B: float) -> float:
    grid = SpatialGrid.from_sites(32, 16)
    basis = compute_ws_basis(s0, omega_B, grid, 16)
    return matrix_elements(basis).gamma0


def resolve(config: RunConfig, basis: WSBasis | None = None) -> ResolvedRun:
    """Turn configured laboratory numbers into a runnable parameter set.

    An existing basis with matching grid and depth may be passed to avoid a
    repeated eigensolve (sweeps share one basis).
    """
    phys = config.physical
    num = config.numerics
    mass = phys.atom_mass_kg
    lam = phys.lattice_wavelength_nm * 1e-9
    k_r = _TWO_PI / lam
    omega_r = HBAR * k_r**2 / (2 * mass)

    bias = phys.bias_force()
    omega_b = abs(bias) * (lam / 2) / HBAR / omega_r
    kappa = _TWO_PI * phys.kappa_hz / omega_r
    u0 = _TWO_PI * phys.u0_hz / omega_r
    nu0 = phys.n_atoms * u0

    # stationary depth that fixes the Wannier-Stark basis
    if phys.pump_kind == "target_depth_er":
        s_basis = phys.pump_value
    else:
        eta = _TWO_PI * phys.pump_value / omega_r
        if phys.delta_kind == "delta0_over_kappa":
            delta0 = phys.delta_value * kappa
            s_basis = u0 * eta**2 / (kappa**2 + delta0**2)
        else:
            s_basis = u0 * eta**2 / kappa**2  # start on resonance
            for _ in range(60):
                gamma0 = _probe_gamma0(s_basis, omega_b)
                if phys.delta_kind == "delta_c_hz":
                    delta_c = _TWO_PI * phys.delta_value / omega_r
                else:
                    delta_c = phys.delta_value * kappa + nu0
                delta0 = delta_c - nu0 * gamma0
                s_new = u0 * eta**2 / (kappa**2 + delta0**2)
                if abs(s_new - s_basis) < 1e-12 * abs(s_new):
                    s_basis = s_new
                    break
                s_basis = s_new

    grid = SpatialGrid.from_sites(num.sites, num.points_per_site)
    n_basis = num.sites - 2 * num.basis_margin_sites
    if n_basis % 2 == 0:
        n_basis -= 1  # symmetric site range about the box centre
    if basis is None or basis.s0 != s_basis or basis.grid.n_points != grid.n_points:
        basis = compute_ws_basis(s_basis, omega_b, grid, n_basis)
    elements = matrix_elements(basis)

    if phys.delta_kind == "delta_c_hz":
        delta_c = _TWO_PI * phys.delta_value / omega_r
    elif phys.delta_kind == "delta_c_minus_nu0_over_kappa":
        delta_c = phys.delta_value * kappa + nu0
    else:
        delta_c = phys.delta_value * kappa + nu0 * elements.gamma0
    delta0 = delta_c - nu0 * elements.gamma0

    if phys.pump_kind == "eta_hz":
        eta = _TWO_PI * phys.pump_value / omega_r
    else:
        alpha0_sq = abs(phys.pump_value / u0)
        eta = math.sqrt(alpha0_sq * (kappa**2 + delta0**2))
    alpha0 = eta / (kappa - 1j * delta0)

    scaled = ScaledParams(
        omega_B=omega_b, f=-omega_b / math.pi, kappa=kappa, eta=eta,
        delta_c=delta_c, u0=u0, n_atoms=phys.n_atoms, recoil_freq=omega_r,
    )
    physical = PhysicalParams(
        atom_mass=mass, lattice_wavelength=lam, bias_force=bias,
        cavity_decay=kappa * omega_r, pump_rate=eta * omega_r,
        cavity_detuning=delta_c * omega_r, atom_light_shift=u0 * omega_r,
        atom_number=phys.n_atoms,
        atomic_linewidth=_TWO_PI * phys.linewidth_hz,
        atom_detuning=_TWO_PI * phys.atom_detuning_hz,
    )

    period = _TWO_PI / omega_b
    dt = period / (num.samples_per_period * num.steps_per_sample)
    sim = SimConfig(
        scaled=scaled, grid=grid, dt=dt,
        t_final=num.periods * period,
        sample_stride=num.steps_per_sample,
        initial_state=InitialState(
            kind=config.initial.kind,
            center_site=config.initial.center_site,
            width_sites=config.initial.width_sites,
            weights=None if config.initial.weights is None
            else np.asarray(config.initial.weights, dtype=complex),
        ),
        backaction=num.backaction,
    )

    psi0 = init_wavepacket(
        basis, sim.initial_state.kind, sim.initial_state.center_site,
        sim.initial_state.width_sites, sim.initial_state.weights,
    )
    coeffs, _residual = project_onto_ws(psi0.values, basis)
    b1 = complex(np.sum(np.conj(coeffs[:-1]) * coeffs[1:]))
    return ResolvedRun(
        config=config, physical=physical, scaled=scaled, grid=grid,
        basis=basis, elements=elements, sim=sim, s_basis=s_basis,
        delta0=delta0, sigma1=abs(b1), theta1=float(np.angle(b1)),
        alpha0=alpha0,
    )


@dataclass(frozen=True, eq=False)
class RunProduct:
    resolved: ResolvedRun
    trace: TraceRecord
    ladder_trace: object | None
    spectrum: analysis.Spectrum | None
    v_numeric: float | None
    prediction: analysis.VelocityPrediction
    p_plus: float | None
    p_minus: float | None
    loop_works: np.ndarray | None
    metrology: analysis.MetrologyEstimate


def execute(resolved: ResolvedRun) -> RunProduct:
    """Run the full model (plus the reduced ladder) and post-process."""
    num = resolved.config.numerics
    scaled = resolved.scaled
    trace = run(resolved.sim, resolved.basis)

    ladder_trace = None
    if num.run_ladder:
        psi0 = init_wavepacket(
            resolved.basis, resolved.sim.initial_state.kind,
            resolved.sim.initial_state.center_site,
            resolved.sim.initial_state.width_sites,
            resolved.sim.initial_state.weights,
        )
        coeffs, _ = project_onto_ws(psi0.values, resolved.basis)
        state = ladder_state_from_coeffs(
            coeffs, resolved.basis.site_indices, scaled, resolved.elements
        )
        period = scaled.bloch_period
        ladder_dt = period / (num.samples_per_period * num.ladder_steps_per_sample)
        ladder_trace = run_ladder(
            state, resolved.sim.t_final, ladder_dt, num.ladder_steps_per_sample
        )

    discard = TRANSIENT_KAPPAS / scaled.kappa
    prediction = analysis.analytic_transport_velocity(
        scaled, resolved.elements, resolved.sigma1, resolved.alpha0
    )

    spectrum = p_plus = p_minus = None
    v_numeric = None
    loop_works = None
    keep = trace.times >= discard
    n_periods_left = int(
        (trace.times[-1] - discard) / scaled.bloch_period
    )
    if n_periods_left >= 1:
        resolution = scaled.omega_B / min(100, n_periods_left)
        spectrum = analysis.psd(
            trace.alpha[keep], trace.dt_sample, scaled.omega_B, resolution
        )
        if n_periods_left >= 3:  # +-omega_B not resolved below that
            p_plus, p_minus = analysis.sideband_powers(spectrum, scaled.omega_B)
        loop_works = analysis.loop_work(
            trace.centroid, trace.force, scaled.omega_B, trace.times, discard
        )
    if n_periods_left >= 5:
        v_numeric = analysis.numeric_transport_velocity(
            trace.times, trace.centroid, scaled.omega_B, discard
        )

    mean_photons = float(np.mean(trace.n_photons[keep] if keep.any() else trace.n_photons))
    mean_delta_f = float(
        np.mean(scaled.delta_c - scaled.nu0 * trace.overlap[keep if keep.any() else slice(None)])
    ) * scaled.recoil_freq
    metrology = analysis.coherence_time(resolved.physical, mean_photons, mean_delta_f)

    return RunProduct(
        resolved=resolved, trace=trace, ladder_trace=ladder_trace,
        spectrum=spectrum, v_numeric=v_numeric, prediction=prediction,
        p_plus=p_plus, p_minus=p_minus, loop_works=loop_works,
        metrology=metrology,
    )


def _write_manifest(resolved: ResolvedRun, outdir: Path) -> None:
    payload = config_to_dict(resolved.config)
    payload["output"] = {"dir": str(resolved.config.output_dir)}
    payload["meta"] = {
        "resolved": {
            "omega_B": resolved.scaled.omega_B,
            "kappa": resolved.scaled.kappa,
            "eta": resolved.scaled.eta,
            "delta_c": resolved.scaled.delta_c,
            "u0": resolved.scaled.u0,
            "n_atoms": resolved.scaled.n_atoms,
            "recoil_freq_rad_s": resolved.scaled.recoil_freq,
            "stationary_depth_er": resolved.s_basis,
            "delta0": resolved.delta0,
            "gamma0": resolved.elements.gamma0,
            "gamma1": resolved.elements.gamma1,
            "Z0": resolved.elements.Z0,
            "Z1": resolved.elements.Z1,
            "sigma1": resolved.sigma1,
            "theta1": resolved.theta1,
            "dt": resolved.sim.dt,
            "t_final": resolved.sim.t_final,
        },
    }
    (outdir / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def write_products(product: RunProduct, outdir: str | Path) -> None:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    resolved = product.resolved
    scaled = resolved.scaled
    product.trace.to_csv(outdir / "trace.csv")
    if product.ladder_trace is not None:
        product.ladder_trace.to_csv(outdir / "ladder_trace.csv")
    if product.spectrum is not None:
        np.savetxt(
            outdir / "spectrum.csv",
            np.column_stack([product.spectrum.frequencies, product.spectrum.psd]),
            header="freq,psd", delimiter=",", comments="# ",
        )
    # loop data, trimmed to whole periods after the transient
    discard = TRANSIENT_KAPPAS / scaled.kappa
    keep = product.trace.times >= discard
    times = product.trace.times[keep]
    if len(times) > 1:
        spp = int(round(scaled.bloch_period / product.trace.dt_sample))
        n_loops = len(times) // spp
        if n_loops >= 1:
            sl = slice(0, n_loops * spp)
            period_index = np.repeat(np.arange(n_loops), spp)
            np.savetxt(
                outdir / "loop.csv",
                np.column_stack([
                    times[sl], product.trace.centroid[keep][sl],
                    product.trace.force[keep][sl], period_index,
                ]),
                header="t,centroid,force,period", delimiter=",", comments="# ",
            )
    met = product.metrology
    np.savetxt(
        outdir / "metrology.csv",
        np.array([[met.coherence_time, met.tau_sp, met.cooperativity,
                   met.chi_prime, met.wavelength_shift_fraction]]),
        header="tau,tau_sp,cooperativity,chi_prime,wavelength_shift_fraction",
        delimiter=",", comments="# ",
    )
    _write_manifest(resolved, outdir)


def _sweep_point(args):
    config, value, basis = args
    point = replace(
        config,
        physical=replace(config.physical, delta_kind="delta0_over_kappa",
                         delta_value=value,
                         pump_kind="target_depth_er",
                         pump_value=config.sweep.target_depth_er),
        sweep=None,
        name=f"{config.name}[delta0={value:+g}k]",
    )
    resolved = resolve(point, basis=basis)
    product = execute(resolved)
    subdir = Path(config.output_dir) / f"delta0_{value:+.3f}".replace("+", "p").replace("-", "m")
    write_products(product, subdir)
    work = float(np.mean(product.loop_works)) if product.loop_works is not None else float("nan")
    return analysis.TransportResult(
        delta0=resolved.delta0,
        v_numeric=product.v_numeric if product.v_numeric is not None else float("nan"),
        v_analytic=product.prediction.v_t,
        p_plus=product.p_plus if product.p_plus is not None else float("nan"),
        p_minus=product.p_minus if product.p_minus is not None else float("nan"),
        loop_work=work,
    )


def run_sweep(config: RunConfig, threads: int | None = None) -> list[analysis.TransportResult]:
    """Execute every sweep point (worker pool) and write velocity.csv.

    Results are sorted by detuning before writing, so the file does not
    depend on scheduling order.
    """
    sweep: SweepSpec = config.sweep
    if sweep is None:
        raise ConfigError("run_sweep called without a sweep section")
    base = replace(config, sweep=None)
    probe = replace(
        base,
        physical=replace(config.physical, delta_kind="delta0_over_kappa",
                         delta_value=sweep.values[0],
                         pump_kind="target_depth_er",
                         pump_value=sweep.target_depth_er),
    )
    shared_basis = resolve(probe).basis

    jobs = [(replace(config, sweep=sweep), v, shared_basis) for v in sweep.values]
    if threads is None:
        threads = min(len(jobs), os.cpu_count() or 1)
    if threads <= 1:
        results = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_point, jobs))
    results.sort(key=lambda r: r.delta0)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        outdir / "velocity.csv",
        np.array([
            [r.delta0, r.v_numeric, r.v_analytic, r.p_plus, r.p_minus, r.loop_work]
            for r in results
        ]),
        header="delta0,v_numeric,v_analytic,P_plus,P_minus,loop_work",
        delimiter=",", comments="# ",
    )
    return results


def run_scenario(config: RunConfig, threads: int | None = None) -> None:
    """Basis -> simulation -> analysis -> files, for any scenario shape."""
    if config.branches:
        for _name, branch in config.branches:
            run_scenario(branch, threads=threads)
        return
    if config.sweep is not None:
        run_sweep(config, threads=threads)
        return
    resolved = resolve(config)
    product = execute(resolved)
    write_products(product, config.output_dir)
