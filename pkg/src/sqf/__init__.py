"""Sub-Rayleigh fringe toolkit for an unseeded high-gain parametric amplifier.

Simulates the two-mode squeezed vacuum through phase shift, decoherence and
polarizing-beam-splitter stages, evaluates multi-photon coincidence fringes
with three mutually validating backends (Gaussian moments, truncated Fock
oracle, Monte Carlo clicks), and fits the standard calibration curves.
"""

__version__ = "0.1.0"

from .analytic import (
    FringeKind,
    RateParams,
    excitation_rate,
    fringe_closed_form,
    gain_from_pump,
    mean_photons,
    visibility_closed_form,
)
from .errors import ConfigError, PhysicalityError, TruncationError
from .fock import (
    DenseFockState,
    OpaParams,
    apply_mode_unitary,
    build_tmsv_dense,
    joint_photon_pmf,
    normal_moment_dense,
    required_cutoff,
)
from .gaussian import (
    GaussianState,
    apply_displacement,
    apply_loss,
    apply_passive_unitary,
    apply_two_mode_squeeze,
    gaussian_vacuum,
    split_temporal_mode,
    wick_normal_moment,
)
from .fitting import FitResult, fit_fringe, fit_rate_vs_gain, fit_visibility_vs_gain
from .montecarlo import (
    CountsTable,
    exact_click_probabilities,
    rotation_amplitudes,
    sample_pulse,
    simulate_counts,
)
from .pipeline import (
    CoherentInput,
    Decoherence,
    DetectorCombo,
    FockBackend,
    FringeScan,
    GaussianBackend,
    MonteCarloBackend,
    PipelineConfig,
    VacuumInput,
    build_output_state,
    dominant_harmonic,
    evaluate_coincidence,
    run_fringe_scan,
    uniform_phase_grid,
    visibility_of_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
