"""Bloch oscillations of a cold-atom cloud inside a driven optical cavity.

Simulation engine for the coupled mean-field dynamics of atoms Bloch
oscillating in the intracavity standing wave, the reduced Wannier-Stark
ladder model, and the closed-form transport and sideband results, with a
batch CLI for reproducible parameter sweeps.
"""

from .analysis import (
    MetrologyEstimate, Spectrum, TransportResult, VelocityPrediction,
    analytic_transport_velocity, coherence_time, cosine_fit,
    dominant_frequency, fit_frequency, jacobi_anger_field, loop_work,
    mean_fluctuation_power, numeric_transport_velocity, psd,
    refractive_estimate, sideband_powers, tilt_energy_per_period,
)
from .config import (
    PRESETS, RunConfig, list_presets, load_config, preset_config,
)
from .errors import ConfigError, NumericsError, RegimeWarning
from .ladder import (
    BlochOscillatorObservables, LadderState, LadderTrace, evolve_ladder,
    ladder_state_from_coeffs, observables, photon_fluctuation,
    position_from_ladder, run_ladder, static_field,
)
from .meanfield import (
    CavityField, InitialState, SimConfig, TraceRecord, WaveFunction,
    effective_detuning, init_wavepacket, lattice_force, overlap_parameter,
    run, steady_field, step,
)
from .runner import ResolvedRun, RunProduct, execute, resolve, run_scenario, run_sweep
from .units import (
    PhysicalParams, ScaledParams, bloch_frequency, recoil_frequency,
    rescale_detuning, scale, unscale,
)
from .wannier_stark import (
    MatrixElements, SpatialGrid, WSBasis, compute_ws_basis, export_basis,
    matrix_elements, project_onto_ws, reconstruct,
)

__version__ = "0.1.0"
