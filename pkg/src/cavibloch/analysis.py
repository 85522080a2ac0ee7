"""Post-processing of traces and the closed-form transport results.

Spectra use the physical frequency axis: a component of the intracavity
amplitude rotating as e^{-i nu t} belongs to a laboratory field at
omega_L + nu, so it appears at +nu in the spectrum and the carrier sits at
zero.  With that convention the strong sideband lies at +omega_B for
downhill transport (energy extracted from the atoms up-converts pump
photons) and at -omega_B for uphill transport.

The analytic transport velocity comes from the nearest-neighbour response of
the cavity to the coherence drive u1 cos(omega_B t + theta1),
u1 = 2 N u0 gamma1 sigma1.  Solving the field equation for t >> 1/kappa and
averaging the drift of the ladder population gives a constant rate

    c1 = 2 kappa u0 |alpha0|^2 gamma1 sigma1 omega_B J0(x) J1(x)
         * [ 1/(kappa^2+delta_1^2) - 1/(kappa^2+delta_-1^2) ],  x = u1/omega_B

with delta_{+-1} = delta0 -+ omega_B; the drift per Bloch period in units of
the lattice spacing is v = 2 pi c1 / omega_B.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from .errors import NumericsError, RegimeWarning
from .units import PhysicalParams, ScaledParams
from .wannier_stark import MatrixElements


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Two-sided power spectral density on the physical frequency axis."""

    frequencies: np.ndarray  # rad per scaled time, ascending, 0 = pump
    psd: np.ndarray
    bin_width: float

    def power_at(self, freq: float, half_window_bins: int = 2) -> float:
        """Integrated power in a +-half_window_bins window around freq."""
        idx = int(np.argmin(np.abs(self.frequencies - freq)))
        lo = max(0, idx - half_window_bins)
        hi = min(len(self.psd), idx + half_window_bins + 1)
        return float(np.sum(self.psd[lo:hi]) * self.bin_width)


@dataclass(frozen=True)
class VelocityPrediction:
    """Closed-form transport velocity in lattice sites per Bloch period."""

    v_t: float           # pooled-denominator form
    v_sideband: float    # sideband-difference form (algebraically identical)
    u1: float
    delta0: float
    delta_plus: float    # delta0 - omega_B
    delta_minus: float   # delta0 + omega_B


@dataclass(frozen=True)
class TransportResult:
    """One row of a detuning sweep."""

    delta0: float
    v_numeric: float
    v_analytic: float
    p_plus: float
    p_minus: float
    loop_work: float


@dataclass(frozen=True)
class MetrologyEstimate:
    """Force-metrology budget for a run, in laboratory units."""

    coherence_time: float             # s
    tau_sp: float                     # s
    cooperativity: float
    chi_prime: float
    wavelength_shift_fraction: float  # 2 kappa / omega_L


def psd(series: np.ndarray, dt: float, omega_B: float, resolution: float | None = None) -> Spectrum:
    """Periodogram of a complex series, trimmed to whole Bloch periods.

    A rectangular window on an integer number of periods keeps the carrier
    from leaking into the +-omega_B bins and puts omega_B exactly on a bin
    when the sampling is commensurate.  resolution (default omega_B/100) is
    the largest acceptable bin width; the series must be long enough.
    Normalized so sum(psd) * bin_width equals the mean power of the
    windowed series.
    """
    if resolution is None:
        resolution = omega_B / 100.0
    needed = int(np.ceil(2 * np.pi / (resolution * dt)))
    if len(series) < needed:
        raise ValueError(
            f"series of {len(series)} samples cannot reach resolution "
            f"{resolution:.3e}; need {needed}"
        )
    period_samples = 2 * np.pi / (omega_B * dt)
    n_periods = int(np.floor(len(series) / period_samples))
    m = int(round(n_periods * period_samples))
    x = series[:m]
    # e^{-i nu t} components must land at +nu: analyse the conjugate series
    amplitude = np.fft.fft(np.conj(x))
    bin_width = 2 * np.pi / (m * dt)
    values = np.abs(amplitude) ** 2 / (m**2 * bin_width)
    freqs = 2 * np.pi * np.fft.fftfreq(m, d=dt)
    order = np.fft.fftshift(np.arange(m))
    return Spectrum(frequencies=freqs[order], psd=values[order], bin_width=bin_width)


def sideband_powers(spec: Spectrum, omega_B: float) -> tuple[float, float]:
    """Integrated power (P_plus, P_minus) in +-2-bin windows at +-omega_B.

    Warns when either sideband does not rise above the typical (median)
    spectral floor.
    """
    if omega_B < 2 * spec.bin_width:
        raise ValueError("spectrum does not resolve omega_B")
    p_plus = spec.power_at(+omega_B)
    p_minus = spec.power_at(-omega_B)
    # a resolved sideband must stand well above the typical 5-bin window power
    floor = 3.0 * float(np.median(spec.psd)) * 5 * spec.bin_width
    if p_plus < floor or p_minus < floor:
        warnings.warn("sideband at +-omega_B is below the noise floor", stacklevel=2)
    return p_plus, p_minus


def dominant_frequency(spec: Spectrum, exclude_bins: int = 3) -> float:
    """|frequency| of the strongest spectral line away from the carrier."""
    mask = np.abs(spec.frequencies) > (exclude_bins - 0.5) * spec.bin_width
    idx = np.argmax(np.where(mask, spec.psd, -np.inf))
    return float(abs(spec.frequencies[idx]))


def numeric_transport_velocity(
    times: np.ndarray,
    centroid: np.ndarray,
    omega_B: float,
    discard_time: float = 0.0,
) -> float:
    """Net centroid drift per Bloch period in units of the lattice spacing.

    Averages the centroid over each complete Bloch period after the
    transient discard, fits period-averaged position against period index
    and divides the slope by pi.  Warns when the fit residual exceeds 20% of
    the per-period slope (non-steady transport).
    """
    period = 2 * np.pi / omega_B
    keep = times >= discard_time
    t, x = times[keep], centroid[keep]
    dt = t[1] - t[0]
    samples_per_period = int(round(period / dt))
    n_periods = len(x) // samples_per_period
    if n_periods < 5:
        raise ValueError(f"need >= 5 whole Bloch periods after discard, have {n_periods}")
    chunks = x[: n_periods * samples_per_period].reshape(n_periods, samples_per_period)
    averages = chunks.mean(axis=1)
    index = np.arange(n_periods)
    slope, intercept = np.polyfit(index, averages, 1)
    residual = np.sqrt(np.mean((averages - (slope * index + intercept)) ** 2))
    if abs(slope) > 1e-3 * np.pi and residual > 0.2 * abs(slope):
        warnings.warn(
            f"period-averaged centroid is not linear (residual {residual:.2e} "
            f"vs slope {slope:.2e}); transport not steady", stacklevel=2,
        )
    return float(slope / np.pi)


def analytic_transport_velocity(
    scaled: ScaledParams,
    elements: MatrixElements,
    sigma1: float,
    alpha0: complex,
) -> VelocityPrediction:
    """Closed-form drift per Bloch period in lattice sites (see module notes).

    Evaluates both algebraic forms, checks them against each other to
    1e-12, and warns when |u1/omega_B| >= 1 (outside the nearest-neighbour
    perturbative regime).
    """
    wb, kappa = scaled.omega_B, scaled.kappa
    delta0 = scaled.delta_c - scaled.nu0 * elements.gamma0
    u1 = 2.0 * scaled.nu0 * elements.gamma1 * sigma1
    x = u1 / wb
    if abs(x) >= 1.0:
        warnings.warn(
            f"|u1/omega_B| = {abs(x):.2f} >= 1: outside the validity regime",
            RegimeWarning, stacklevel=2,
        )
    d_p = delta0 - wb
    d_m = delta0 + wb
    s0 = scaled.u0 * abs(alpha0) ** 2
    bessel = jv(0, x) * jv(1, x)
    lorentz_p = kappa**2 + d_p**2
    lorentz_m = kappa**2 + d_m**2
    v_sideband = (
        4 * np.pi * kappa * s0 * elements.gamma1 * sigma1 * bessel
        * (1.0 / lorentz_p - 1.0 / lorentz_m)
    )
    v_t = (
        16 * np.pi * kappa * wb * delta0 * s0 * elements.gamma1 * sigma1 * bessel
        / (lorentz_p * lorentz_m)
    )
    if abs(v_t - v_sideband) > 1e-12 * max(1.0, abs(v_t)):
        raise NumericsError("sideband and pooled forms of the velocity disagree")
    return VelocityPrediction(
        v_t=v_t, v_sideband=v_sideband, u1=u1,
        delta0=delta0, delta_plus=d_p, delta_minus=d_m,
    )


def jacobi_anger_field(
    t: np.ndarray,
    u1: float,
    theta1: float,
    alpha0: complex,
    kappa: float,
    delta0: float,
    omega_B: float,
    tail: float = 1e-10,
) -> np.ndarray:
    """Asymptotic (t >> 1/kappa) cavity fluctuation under a coherence drive.

    Bessel-series solution of the fluctuation equation driven by
    u1 cos(omega_B t + theta1); the sum is truncated once |J_n| drops below
    `tail`.  The n-th term rotates as e^{i n omega_B t} with sideband
    amplitude 1/(kappa - i(delta0 - n omega_B)).
    """
    t = np.asarray(t, dtype=float)
    x = u1 / omega_B
    n_max = 1
    while abs(jv(n_max, x)) > tail and n_max < 200:
        n_max += 1
    phase = omega_B * t + theta1
    total = np.zeros(t.shape, dtype=complex)
    for n in range(-n_max, n_max + 1):
        if n == 0:
            continue
        total += (
            1j * n * omega_B * jv(n, x) * np.exp(1j * n * phase)
            / (kappa - 1j * (delta0 - n * omega_B))
        )
    return -alpha0 * np.exp(-1j * x * np.sin(phase)) * total


def mean_fluctuation_power(
    u1: float, alpha0: complex, kappa: float, delta0: float, omega_B: float
) -> float:
    """Time-averaged |Delta alpha|^2 keeping only the n = +-1 sidebands."""
    x = u1 / omega_B
    return float(
        abs(alpha0) ** 2 * jv(1, x) ** 2 * omega_B**2
        * (
            1.0 / (kappa**2 + (delta0 - omega_B) ** 2)
            + 1.0 / (kappa**2 + (delta0 + omega_B) ** 2)
        )
    )


def loop_work(
    centroid: np.ndarray,
    force: np.ndarray,
    omega_B: float,
    times: np.ndarray,
    discard_time: float = 0.0,
) -> np.ndarray:
    """Work done on the atoms by the lattice, per Bloch period.

    Closed-loop integral of force over displacement for each complete period
    (trapezoid, with the wrap segment included).  Positive work corresponds
    to a clockwise loop in the (centroid, force) plane and uphill transport.
    Warns when a loop fails to close to within 5% of its extent.
    """
    keep = times >= discard_time
    t, x, f = times[keep], centroid[keep], force[keep]
    dt = t[1] - t[0]
    samples_per_period = int(round(2 * np.pi / (omega_B * dt)))
    n_periods = len(x) // samples_per_period
    if n_periods < 1:
        raise ValueError("need at least one complete Bloch period")
    works = np.empty(n_periods)
    for k in range(n_periods):
        sl = slice(k * samples_per_period, (k + 1) * samples_per_period + 1)
        xs, fs = x[sl], f[sl]
        if len(xs) < samples_per_period + 1:  # last loop: close on itself
            xs = np.append(xs, x[k * samples_per_period])
            fs = np.append(fs, f[k * samples_per_period])
        gap = abs(xs[-1] - xs[0])
        extent = np.ptp(xs)
        if extent > 0 and gap > 0.05 * extent:
            warnings.warn(
                f"loop {k} does not close (gap {gap:.2e} vs extent {extent:.2e})",
                stacklevel=2,
            )
        works[k] = np.sum(0.5 * (fs[1:] + fs[:-1]) * np.diff(xs))
    return works


def cosine_fit(times: np.ndarray, series: np.ndarray, omega: float):
    """Least-squares fit of A cos(omega t + phase) + offset.

    Returns (amplitude, phase, rms_residual).
    """
    design = np.column_stack([np.cos(omega * times), np.sin(omega * times), np.ones_like(times)])
    coeffs, *_ = np.linalg.lstsq(design, series, rcond=None)
    a, b, _ = coeffs
    amplitude = float(np.hypot(a, b))
    phase = float(np.arctan2(-b, a))
    residual = float(np.sqrt(np.mean((series - design @ coeffs) ** 2)))
    return amplitude, phase, residual


def fit_frequency(times: np.ndarray, series: np.ndarray, omega_guess: float, span: float = 0.02):
    """Frequency of the best cosine fit, scanned within +-span around the guess.

    Returns (omega, amplitude, rms_residual); parabolic refinement on the
    residual minimum gives resolution far below the scan step.
    """
    omegas = omega_guess * np.linspace(1 - span, 1 + span, 201)
    residuals = np.array([cosine_fit(times, series, w)[2] for w in omegas])
    i = int(np.argmin(residuals))
    if 0 < i < len(omegas) - 1:
        r_m, r_0, r_p = residuals[i - 1 : i + 2]
        denom = r_m - 2 * r_0 + r_p
        shift = 0.5 * (r_m - r_p) / denom if denom > 0 else 0.0
        omega = omegas[i] + shift * (omegas[1] - omegas[0])
    else:
        omega = omegas[i]
    amplitude, _, residual = cosine_fit(times, series, omega)
    return float(omega), amplitude, residual


def coherence_time(
    physical: PhysicalParams, mean_photons: float, mean_delta_f: float
) -> MetrologyEstimate:
    """Spontaneous-emission-limited coherence time of the Bloch signal.

    tau_sp is the single-atom scattering time at an antinode,
    1/tau_sp = 2 gamma n_photons Omega_0^2 / Delta_a^2; cavity backaction
    shortens it by the diffusion enhancement 1 + 2C <sin^2(2kz)> kappa^2 /
    (kappa^2 + Delta_f^2) with <sin^2(2kz)> -> 1/2 and Delta_f its
    time-averaged value (rad/s).  The coherence time is reached when the
    momentum spread covers half the Brillouin zone.
    """
    if physical.atom_detuning == 0:
        raise ValueError("atom_detuning must be nonzero")
    gamma = physical.atomic_linewidth
    kappa = physical.cavity_decay
    omega0_sq = physical.rabi_frequency_sq
    rate_sp = 2.0 * gamma * mean_photons * omega0_sq / physical.atom_detuning**2
    tau_sp = 1.0 / rate_sp
    coop = physical.cooperativity
    enhancement = 1.0 + 2.0 * coop * 0.5 * kappa**2 / (kappa**2 + mean_delta_f**2)
    chi_prime, shift = refractive_estimate(physical, mean_photons)
    return MetrologyEstimate(
        coherence_time=tau_sp / enhancement,
        tau_sp=tau_sp,
        cooperativity=coop,
        chi_prime=chi_prime,
        wavelength_shift_fraction=shift,
    )


def refractive_estimate(
    physical: PhysicalParams, mean_photons: float
) -> tuple[float, float]:
    """Atomic susceptibility chi' and the linewidth-equivalent index shift.

    Treats the cloud as a dilute two-level medium filling the mode volume
    (V_c/V = 1): chi' = -N U0/omega_c corrected by the saturation
    denominator Delta_a^2/(Delta_a^2 + gamma^2/4 + Omega_0^2 n/2).  The
    returned shift 2 kappa / omega_L is the index change that would move the
    resonance by one linewidth, for comparison.
    """
    delta_a = physical.atom_detuning
    gamma = physical.atomic_linewidth
    saturation = delta_a**2 / (
        delta_a**2 + gamma**2 / 4.0 + physical.rabi_frequency_sq * mean_photons / 2.0
    )
    chi_prime = (
        -physical.atom_number * physical.atom_light_shift / physical.pump_frequency
    ) * saturation
    shift = 2.0 * physical.cavity_decay / physical.pump_frequency
    return float(chi_prime), float(shift)


def tilt_energy_per_period(v_sites_per_period: float, scaled: ScaledParams) -> float:
    """Tilt-potential change over one period of steady transport.

    Drift of v sites per period raises the tilt energy -f z by
    |f| * pi * v, which steady-state bookkeeping charges to the lattice.
    """
    return abs(scaled.f) * np.pi * v_sites_per_period
