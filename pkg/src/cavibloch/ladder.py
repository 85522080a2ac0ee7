"""Reduced Wannier-Stark ladder model of the coupled dynamics.

Keeping only first-band WS states and nearest-neighbour overlaps, the
mean-field equations collapse to amplitudes d_n (normalized to
sum |d_n|^2 = N) and the cavity fluctuation Delta_alpha around the static
solution alpha_0 = eta/(kappa - i delta_0), delta_0 = Delta_c - N u0 gamma0:

    d(Dalpha)/dt = (-kappa + i delta_0) Dalpha
                   - i u0 gamma1 (alpha_0 + Dalpha) * sum_n (d_n d*_{n+1} + c.c.)
    i d(d_n)/dt  = n omega_B d_n + u0 gamma1 Dn(t) (d_{n+1} + d_{n-1})

with the photon-number fluctuation kept exact (no linearization):
Dn = alpha_0* Dalpha + alpha_0 Dalpha* + |Dalpha|^2.

The amplitudes d_n carry the full ladder phases e^{-i n omega_B t} (the
site-independent global phase is already eliminated and never stored), so
the site-to-site coherence <b_M> = sum d*_n d_{n+1} rotates at omega_B and
the centroid follows directly from the matrix elements without any extra
oscillatory factor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericsError
from .units import ScaledParams
from .wannier_stark import MatrixElements

EDGE_POPULATION_LIMIT = 1e-6  # fraction of N allowed on the two outermost sites


@dataclass(frozen=True, eq=False)
class LadderState:
    """Reduced-model state: WS amplitudes plus the cavity fluctuation."""

    d: np.ndarray            # complex amplitudes, sum |d_n|^2 = N
    delta_alpha: complex
    time: float
    alpha0: complex
    site_indices: np.ndarray
    elements: MatrixElements
    scaled: ScaledParams

    def atom_number(self) -> float:
        return float(np.sum(np.abs(self.d) ** 2))


@dataclass(frozen=True)
class BlochOscillatorObservables:
    """Collective ladder observables of one state."""

    n_M: float        # sum_n n |d_n|^2
    b_M: complex      # sum_n d*_n d_{n+1}
    sigma1: float     # |b_M| / N
    theta1: float     # arg b_M


def static_field(eta: float, kappa: float, delta0: float) -> complex:
    """alpha_0 = eta / (kappa - i delta_0)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return eta / (kappa - 1j * delta0)


def photon_fluctuation(state: LadderState) -> float:
    """Dn = alpha_0* Dalpha + c.c. + |Dalpha|^2, the exact photon-number change."""
    da = state.delta_alpha
    return float(2.0 * np.real(np.conj(state.alpha0) * da) + abs(da) ** 2)


def observables(state: LadderState) -> BlochOscillatorObservables:
    d = state.d
    n_atoms = state.atom_number()
    b_m = complex(np.sum(np.conj(d[:-1]) * d[1:]))
    return BlochOscillatorObservables(
        n_M=float(np.sum(state.site_indices * np.abs(d) ** 2)),
        b_M=b_m,
        sigma1=abs(b_m) / n_atoms,
        theta1=float(np.angle(b_m)),
    )


def ladder_state_from_coeffs(
    c: np.ndarray,
    site_indices: np.ndarray,
    scaled: ScaledParams,
    elements: MatrixElements,
) -> LadderState:
    """Initial reduced state from unit-norm WS coefficients c_n.

    d_n = sqrt(N) c_n, Delta_alpha(0) = 0 and alpha_0 from the static
    solution at delta_0 = Delta_c - N u0 gamma0.
    """
    delta0 = scaled.delta_c - scaled.nu0 * elements.gamma0
    alpha0 = static_field(scaled.eta, scaled.kappa, delta0)
    return LadderState(
        d=np.sqrt(scaled.n_atoms) * np.asarray(c, dtype=complex),
        delta_alpha=0.0 + 0.0j,
        time=0.0,
        alpha0=alpha0,
        site_indices=np.asarray(site_indices),
        elements=elements,
        scaled=scaled,
    )


def _rhs(d, da, n_omega, alpha0, u0g1, kappa, delta0):
    coherence = 2.0 * np.real(np.sum(np.conj(d[:-1]) * d[1:]))
    da_dot = (-kappa + 1j * delta0) * da - 1j * u0g1 * (alpha0 + da) * coherence
    dn = 2.0 * np.real(np.conj(alpha0) * da) + abs(da) ** 2
    neighbours = np.zeros_like(d)
    neighbours[:-1] += d[1:]
    neighbours[1:] += d[:-1]
    d_dot = -1j * (n_omega * d + u0g1 * dn * neighbours)
    return d_dot, da_dot


def evolve_ladder(state: LadderState, dt: float) -> LadderState:
    """One classical 4th-order step of the coupled ladder equations."""
    scaled, el = state.scaled, state.elements
    if dt * scaled.omega_B * np.max(np.abs(state.site_indices)) >= 0.5:
        raise ValueError("dt too large for the outermost ladder phases")
    n_omega = state.site_indices * scaled.omega_B
    delta0 = scaled.delta_c - scaled.nu0 * el.gamma0
    u0g1 = scaled.u0 * el.gamma1

    d, da = state.d, state.delta_alpha
    k1d, k1a = _rhs(d, da, n_omega, state.alpha0, u0g1, scaled.kappa, delta0)
    k2d, k2a = _rhs(d + 0.5 * dt * k1d, da + 0.5 * dt * k1a, n_omega, state.alpha0, u0g1, scaled.kappa, delta0)
    k3d, k3a = _rhs(d + 0.5 * dt * k2d, da + 0.5 * dt * k2a, n_omega, state.alpha0, u0g1, scaled.kappa, delta0)
    k4d, k4a = _rhs(d + dt * k3d, da + dt * k3a, n_omega, state.alpha0, u0g1, scaled.kappa, delta0)
    d_new = d + (dt / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d)
    da_new = da + (dt / 6.0) * (k1a + 2 * k2a + 2 * k3a + k4a)
    if not np.all(np.isfinite(d_new)) or not np.isfinite(da_new):
        raise NumericsError(f"non-finite ladder state at t = {state.time + dt:.4f}")
    return replace(state, d=d_new, delta_alpha=complex(da_new), time=state.time + dt)


def position_from_ladder(state: LadderState, elements: MatrixElements | None = None) -> float:
    """Centroid per atom: Z0 + pi * n_M/N + Z1 * (b_M + b_M*)/N.

    The stored amplitudes already rotate with their ladder phases, so the
    coherence term oscillates at omega_B by itself; in a frame where the
    phases are factored out the same term reads d*_n d_{n+1} e^{-i omega_B t}.
    The paper's lattice constant d becomes pi in scaled units.
    """
    el = elements if elements is not None else state.elements
    obs = observables(state)
    n_atoms = state.atom_number()
    return float(
        el.Z0 + np.pi * obs.n_M / n_atoms + el.Z1 * 2.0 * np.real(obs.b_M) / n_atoms
    )


@dataclass(frozen=True, eq=False)
class LadderTrace:
    """Sampled reduced-model observables."""

    times: np.ndarray
    n_M: np.ndarray          # per atom
    b_M: np.ndarray          # complex, per atom
    delta_alpha: np.ndarray  # complex
    delta_n: np.ndarray
    centroid: np.ndarray
    atom_norm: np.ndarray    # sum |d_n|^2 (should stay at N)
    scaled: ScaledParams

    def to_csv(self, path) -> None:
        data = np.column_stack([
            self.times, self.n_M, self.b_M.real, self.b_M.imag,
            self.delta_alpha.real, self.delta_alpha.imag, self.delta_n,
        ])
        np.savetxt(
            path, data,
            header="t,n_M,re_bM,im_bM,re_delta_alpha,im_delta_alpha,delta_n",
            delimiter=",", comments="# ",
        )


def run_ladder(
    state: LadderState, t_final: float, dt: float, sample_stride: int
) -> LadderTrace:
    """Integrate the reduced model, sampling every sample_stride steps.

    Single inlined RK4 loop, equivalent to repeated evolve_ladder calls.
    Aborts if population reaches the two outermost sites (truncated ladder
    too small for the transport distance).
    """
    scaled, el = state.scaled, state.elements
    if dt * scaled.omega_B * np.max(np.abs(state.site_indices)) >= 0.5:
        raise ValueError("dt too large for the outermost ladder phases")
    n_omega = state.site_indices * scaled.omega_B
    sites = state.site_indices.astype(float)
    delta0 = scaled.delta_c - scaled.nu0 * el.gamma0
    u0g1 = scaled.u0 * el.gamma1
    alpha0 = state.alpha0
    kappa = scaled.kappa
    n_atoms = float(scaled.n_atoms)

    n_steps = int(round(t_final / dt))
    n_samples = n_steps // sample_stride + 1
    times = np.empty(n_samples)
    n_m = np.empty(n_samples)
    b_m = np.empty(n_samples, dtype=complex)
    d_alpha = np.empty(n_samples, dtype=complex)
    d_n = np.empty(n_samples)
    centroid = np.empty(n_samples)
    atom_norm = np.empty(n_samples)

    d = state.d.copy()
    da = complex(state.delta_alpha)
    t = state.time

    def record(i):
        pops = d.real**2 + d.imag**2
        total = float(np.sum(pops))
        bm = complex(np.sum(np.conj(d[:-1]) * d[1:]))
        dn = 2.0 * (np.conj(alpha0) * da).real + abs(da) ** 2
        times[i] = t
        n_m[i] = float(np.sum(sites * pops)) / n_atoms
        b_m[i] = bm / n_atoms
        d_alpha[i] = da
        d_n[i] = dn
        centroid[i] = el.Z0 + np.pi * n_m[i] * n_atoms / total + el.Z1 * 2.0 * bm.real / total
        atom_norm[i] = total
        if pops[0] + pops[-1] > EDGE_POPULATION_LIMIT * n_atoms:
            raise NumericsError(
                f"population reached the ladder edge at t = {t:.4f}; widen the site range"
            )
        if not np.isfinite(total) or not np.isfinite(dn):
            raise NumericsError(f"non-finite ladder state at t = {t:.4f}")

    record(0)
    sample = 1
    sixth = dt / 6.0
    for i in range(n_steps):
        k1d, k1a = _rhs(d, da, n_omega, alpha0, u0g1, kappa, delta0)
        k2d, k2a = _rhs(d + 0.5 * dt * k1d, da + 0.5 * dt * k1a, n_omega, alpha0, u0g1, kappa, delta0)
        k3d, k3a = _rhs(d + 0.5 * dt * k2d, da + 0.5 * dt * k2a, n_omega, alpha0, u0g1, kappa, delta0)
        k4d, k4a = _rhs(d + dt * k3d, da + dt * k3a, n_omega, alpha0, u0g1, kappa, delta0)
        d += sixth * (k1d + 2 * k2d + 2 * k3d + k4d)
        da += sixth * (k1a + 2 * k2a + 2 * k3a + k4a)
        t += dt
        if (i + 1) % sample_stride == 0:
            record(sample)
            sample += 1
    return LadderTrace(
        times=times[:sample], n_M=n_m[:sample], b_M=b_m[:sample],
        delta_alpha=d_alpha[:sample], delta_n=d_n[:sample],
        centroid=centroid[:sample], atom_norm=atom_norm[:sample],
        scaled=scaled,
    )
