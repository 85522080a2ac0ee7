"""Laboratory parameters and their conversion to recoil units.

Everything downstream of this module works in the dimensionless system built
from the lattice photon recoil:

    length   -> 1/k_r      (lattice period is pi)
    energy   -> E_r = (hbar k_r)^2 / 2m
    rates    -> omega_r = E_r / hbar
    time     -> 1/omega_r

kappa is stored as the *field-amplitude* decay rate (2*kappa is the cavity
energy damping rate); all laboratory rates are angular frequencies in rad/s.
The bias force is negative by convention, so the Bloch frequency
omega_B = |F| d / hbar is positive and the dimensionless tilt is
f = -omega_B/pi < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

HBAR = 1.054571817e-34  # J s
ATOMIC_MASS = 1.66053906660e-27  # kg
SPEED_OF_LIGHT = 299792458.0  # m/s
G_STANDARD = 9.80665  # m/s^2

SR88_MASS = 87.9056121 * ATOMIC_MASS
SR_LATTICE_WAVELENGTH = 689e-9  # m, 1S0-3P1 intercombination line
SR_LINEWIDTH = 2 * math.pi * 7.6e3  # rad/s, gamma (amplitude decay)


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory description of the atom-cavity system (SI, rates in rad/s)."""

    atom_mass: float            # kg
    lattice_wavelength: float   # m; lattice period d = lambda/2
    bias_force: float           # N, <= 0 (strictly < 0 for any dynamics)
    cavity_decay: float         # rad/s, field amplitude decay kappa
    pump_rate: float            # rad/s, eta = sqrt(J kappa)
    cavity_detuning: float      # rad/s, Delta_c = omega_L - omega_c
    atom_light_shift: float     # rad/s, U0 = Omega0^2 / Delta_a
    atom_number: int            # N
    atomic_linewidth: float = SR_LINEWIDTH   # rad/s, gamma
    atom_detuning: float = -2 * math.pi * 1e7  # rad/s, Delta_a
    pump_frequency: float = 0.0  # rad/s, omega_L; 0 means derive from wavelength

    def __post_init__(self):
        if self.atom_mass <= 0:
            raise ValueError("atom_mass must be positive")
        if self.lattice_wavelength <= 0:
            raise ValueError("lattice_wavelength must be positive")
        if self.cavity_decay <= 0:
            raise ValueError("cavity_decay must be positive")
        if self.atom_number < 1:
            raise ValueError("atom_number must be >= 1")
        if self.bias_force > 0:
            raise ValueError("bias_force must be <= 0 (force points downhill)")
        if self.pump_frequency == 0.0:
            object.__setattr__(
                self, "pump_frequency",
                2 * math.pi * SPEED_OF_LIGHT / self.lattice_wavelength,
            )

    @property
    def lattice_period(self) -> float:
        return self.lattice_wavelength / 2.0

    @property
    def recoil_wavenumber(self) -> float:
        return 2 * math.pi / self.lattice_wavelength

    @property
    def rabi_frequency_sq(self) -> float:
        """Omega_0^2 = |U0 * Delta_a| (single-photon Rabi frequency squared)."""
        return abs(self.atom_light_shift * self.atom_detuning)

    @property
    def cooperativity(self) -> float:
        """C = Omega_0^2 / (2 kappa gamma)."""
        return self.rabi_frequency_sq / (2 * self.cavity_decay * self.atomic_linewidth)


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless simulation constants in recoil units."""

    omega_B: float      # Bloch frequency / omega_r, > 0
    f: float            # tilt, exactly -omega_B/pi
    kappa: float        # cavity field decay / omega_r
    eta: float          # pump rate / omega_r
    delta_c: float      # cavity detuning / omega_r
    u0: float           # light shift / omega_r
    n_atoms: int
    recoil_freq: float  # omega_r in rad/s, kept to unscale outputs

    def __post_init__(self):
        if self.omega_B <= 0:
            raise ValueError("omega_B must be positive (no tilt, no Bloch ladder)")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if abs(self.f + self.omega_B / math.pi) > 1e-12 * self.omega_B:
            raise ValueError("f must equal -omega_B/pi")

    @property
    def bloch_period(self) -> float:
        return 2 * math.pi / self.omega_B

    @property
    def nu0(self) -> float:
        """Collective dispersive shift N*u0."""
        return self.n_atoms * self.u0


def bloch_frequency(physical: PhysicalParams) -> float:
    """omega_B = |F| d / hbar in rad/s (zero only for zero force)."""
    return abs(physical.bias_force) * physical.lattice_period / HBAR


def recoil_frequency(physical: PhysicalParams) -> float:
    """omega_r = hbar k_r^2 / 2m in rad/s."""
    k = physical.recoil_wavenumber
    return HBAR * k * k / (2 * physical.atom_mass)


def scale(physical: PhysicalParams) -> ScaledParams:
    """Divide every laboratory rate by omega_r; reject the untilted case."""
    wr = recoil_frequency(physical)
    wb = bloch_frequency(physical) / wr
    if wb == 0.0:
        raise ValueError("zero bias force gives no Bloch frequency; cannot scale")
    return ScaledParams(
        omega_B=wb,
        f=-wb / math.pi,
        kappa=physical.cavity_decay / wr,
        eta=physical.pump_rate / wr,
        delta_c=physical.cavity_detuning / wr,
        u0=physical.atom_light_shift / wr,
        n_atoms=physical.atom_number,
        recoil_freq=wr,
    )


def unscale(
    scaled: ScaledParams,
    lattice_wavelength: float = SR_LATTICE_WAVELENGTH,
    atomic_linewidth: float = SR_LINEWIDTH,
    atom_detuning: float = -2 * math.pi * 1e7,
) -> PhysicalParams:
    """Reconstruct laboratory parameters from scaled ones.

    omega_r alone does not fix both mass and wavelength, so the wavelength is
    supplied (Sr intercombination line by default) and the mass follows from
    omega_r = hbar k^2 / 2m.  scale(unscale(s)) reproduces s exactly up to
    floating-point round-off.
    """
    k = 2 * math.pi / lattice_wavelength
    wr = scaled.recoil_freq
    mass = HBAR * k * k / (2 * wr)
    force = -scaled.omega_B * wr * HBAR / (lattice_wavelength / 2.0)
    return PhysicalParams(
        atom_mass=mass,
        lattice_wavelength=lattice_wavelength,
        bias_force=force,
        cavity_decay=scaled.kappa * wr,
        pump_rate=scaled.eta * wr,
        cavity_detuning=scaled.delta_c * wr,
        atom_light_shift=scaled.u0 * wr,
        atom_number=scaled.n_atoms,
        atomic_linewidth=atomic_linewidth,
        atom_detuning=atom_detuning,
    )


def rescale_detuning(physical: PhysicalParams, r: float) -> PhysicalParams:
    """Scale Delta_a by r, N by r and eta by sqrt(r) at fixed Omega_0.

    U0 = Omega_0^2/Delta_a shrinks by 1/r, N*U0 and the stationary lattice
    depth are unchanged, so the scaled dynamics is invariant while the
    spontaneous-emission budget improves.
    """
    if r <= 0:
        raise ValueError("rescaling factor must be positive")
    return replace(
        physical,
        atom_detuning=physical.atom_detuning * r,
        atom_light_shift=physical.atom_light_shift / r,
        atom_number=int(round(physical.atom_number * r)),
        pump_rate=physical.pump_rate * math.sqrt(r),
    )
