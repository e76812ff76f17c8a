"""Experiment pipeline: source, decoherence, phase + PBS, loss, detection.

A :class:`PipelineConfig` describes one interferometer run; the functions
here turn it into detector-mode states, coincidence values and phase scans
under any of the three backends (Gaussian moments, truncated Fock oracle,
or Monte Carlo click sampling).

Stage order mirrors the optical path: the amplifier (or a coherent seed)
feeds the decoherence element, then the analyzer phase is applied between
the +/- polarizations and the PBS maps onto the two detector arms, where
loss and photon counting act.  With no decoherence the phase + PBS stage
composes exactly into the two detector-arm operators c_1, c_2.
"""

from __future__ import annotations

import enum
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fock, gaussian
from ._linops import HV_TO_PM, detector_mode_map, temporal_split_map
from .errors import ConfigError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class VacuumInput:
    kind: str = "vacuum"


@dataclass(frozen=True)
class CoherentInput:
    alpha: complex
    pol: str = "H"
    kind: str = "coherent"

    def __post_init__(self) -> None:
        if self.pol not in ("H", "V"):
            raise ConfigError(f"coherent polarization must be 'H' or 'V', got {self.pol!r}")


@dataclass(frozen=True)
class Decoherence:
    basis: str
    overlap: float

    def __post_init__(self) -> None:
        if self.basis not in ("HV", "PM"):
            raise ConfigError(f"decoherence basis must be 'HV' or 'PM', got {self.basis!r}")
        if not 0.0 <= self.overlap <= 1.0:
            raise ConfigError(f"overlap must lie in [0, 1], got {self.overlap}")


@dataclass(frozen=True)
class GaussianBackend:
    name: str = "gaussian"


@dataclass(frozen=True)
class FockBackend:
    cutoff: int
    tail_tol: float = 1e-10
    name: str = "fock"

    def __post_init__(self) -> None:
        if self.cutoff < 0:
            raise ConfigError(f"fock cutoff must be >= 0, got {self.cutoff}")


@dataclass(frozen=True)
class MonteCarloBackend:
    shots: int
    seed: int
    chunk_size: int = 1 << 16
    name: str = "montecarlo"

    def __post_init__(self) -> None:
        if self.shots < 1:
            raise ConfigError(f"shots must be >= 1, got {self.shots}")
        if self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be >= 1, got {self.chunk_size}")


Backend = GaussianBackend | FockBackend | MonteCarloBackend


class DetectorCombo(enum.Enum):
    """Detector combinations read out by the experiment."""

    D1A = "D1A"
    D1A_D1B = "D1A_D1B"
    D1A_D1B_D1C = "D1A_D1B_D1C"
    D1A_D2 = "D1A_D2"

    @property
    def order(self) -> int:
        return {"D1A": 1, "D1A_D1B": 2, "D1A_D1B_D1C": 3, "D1A_D2": 2}[self.value]

    @property
    def arm_pattern(self) -> tuple[int, ...]:
        """Detector arm (1 or 2) of each detected photon."""
        return {
            "D1A": (1,),
            "D1A_D1B": (1, 1),
            "D1A_D1B_D1C": (1, 1, 1),
            "D1A_D2": (1, 2),
        }[self.value]


@dataclass(frozen=True)
class PipelineConfig:
    """Full description of one interferometer experiment."""

    gain: float
    input: VacuumInput | CoherentInput = field(default_factory=VacuumInput)
    decoherence: Decoherence | None = None
    phase_offset_delta: float = 0.0
    detector_efficiency: float = 1.0
    backend: Backend = field(default_factory=GaussianBackend)
    wavelength_nm: float = 795.0  # metadata only; the physics lives in phi

    def __post_init__(self) -> None:
        if not np.isfinite(self.gain) or self.gain < 0.0:
            raise ConfigError(f"gain must be finite and non-negative, got {self.gain}")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ConfigError(
                f"detector efficiency must lie in (0, 1], got {self.detector_efficiency}"
            )
        if isinstance(self.backend, FockBackend):
            if self.decoherence is not None:
                raise ConfigError("the fock backend supports two modes only (no decoherence)")
            if isinstance(self.input, CoherentInput) and self.gain > 0.0:
                raise ConfigError("the fock backend cannot amplify a coherent seed")
        if isinstance(self.backend, MonteCarloBackend):
            if isinstance(self.input, CoherentInput):
                raise ConfigError("the montecarlo backend supports vacuum input only")
            if self.decoherence is not None and self.decoherence.overlap not in (0.0,):
                raise ConfigError(
                    "the montecarlo backend supports decoherence only at overlap 0"
                )


@dataclass(frozen=True)
class FringeScan:
    """A (phi, value[, stderr]) series plus the configuration that produced it."""

    phi: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None
    combo: DetectorCombo
    backend_tag: str
    config: PipelineConfig
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if phi.ndim != 1 or phi.shape != values.shape:
            raise ValueError("phi and values must be 1-d arrays of equal length")
        if np.any(np.diff(phi) <= 0.0):
            raise ValueError("phi grid must be strictly increasing")
        if np.any(values < -1e-9):
            raise ValueError("coincidence values must be non-negative")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            stderr = np.asarray(self.stderr, dtype=float)
            if stderr.shape != values.shape:
                raise ValueError("stderr must match values in shape")
            object.__setattr__(self, "stderr", stderr)


def uniform_phase_grid(points: int, span: float = TWO_PI, start: float = 0.0) -> np.ndarray:
    """Endpoint-exclusive uniform grid of ``points`` phases from ``start``."""
    if points < 1:
        raise ValueError("grid needs at least one point")
    return start + span * np.arange(points) / points


# ---------------------------------------------------------------------------
# state construction


def _embed(u: np.ndarray, modes: tuple[int, ...], total: int) -> np.ndarray:
    full = np.eye(total, dtype=complex)
    full[np.ix_(modes, modes)] = u
    return full


def _gaussian_output(config: PipelineConfig, phi: float) -> gaussian.GaussianState:
    decohered = config.decoherence is not None
    n_modes = 4 if decohered else 2
    labels = (("H", 0), ("V", 0), ("H", 1), ("V", 1))[:n_modes]
    state = gaussian.gaussian_vacuum(n_modes, labels)
    if isinstance(config.input, CoherentInput):
        mode = 0 if config.input.pol == "H" else 1
        state = gaussian.apply_displacement(state, mode, config.input.alpha)
    if config.gain > 0.0:
        state = gaussian.apply_two_mode_squeeze(state, 0, 1, config.gain)

    if decohered:
        basis = config.decoherence.basis
        split = _embed(
            temporal_split_map(config.decoherence.overlap).astype(complex), (1, 3), 4
        )
        if basis == "HV":
            u_total = split
        else:
            w_blocks = _embed(HV_TO_PM.astype(complex), (0, 1), 4) @ _embed(
                HV_TO_PM.astype(complex), (2, 3), 4
            )
            u_total = w_blocks @ split @ w_blocks
        state = gaussian.apply_passive_unitary(state, u_total)

    pbs = detector_mode_map(phi + config.phase_offset_delta)
    state = gaussian.apply_passive_unitary(state, pbs, modes=(0, 1))
    if decohered:
        state = gaussian.apply_passive_unitary(state, pbs, modes=(2, 3))
    det_labels = tuple(("derived", t) for t in ((0, 0, 1, 1)[:n_modes]))
    state = replace(state, mode_labels=det_labels)

    eta = config.detector_efficiency
    if eta < 1.0:
        for mode in range(state.mode_count):
            state = gaussian.apply_loss(state, mode, eta)
    return state


def _fock_output(config: PipelineConfig, phi: float) -> fock.DenseFockState:
    backend = config.backend
    if isinstance(config.input, CoherentInput):
        if abs(config.input.alpha) ** 2 > backend.cutoff / 4.0:
            raise ConfigError(
                "coherent amplitude too large for the fock cutoff "
                f"(|alpha|^2 ={abs(config.input.alpha) ** 2:.2f} > cutoff/4)"
            )
        state = fock.build_coherent_dense(
            config.input.alpha, config.input.pol, backend.cutoff, backend.tail_tol
        )
    else:
        state = fock.build_tmsv_dense(
            fock.OpaParams(config.gain), backend.cutoff, backend.tail_tol
        )
    return fock.apply_mode_unitary(state, detector_mode_map(phi + config.phase_offset_delta))


def build_output_state(config: PipelineConfig, phi: float):
    """State over the detector modes, by the exact backend selected in the config.

    Gaussian backend: a :class:`~sqf.gaussian.GaussianState` whose even mode
    indices belong to detector arm 1 and odd indices to arm 2 (temporal modes
    interleaved), with detector loss already applied.  Fock backend: a
    :class:`~sqf.fock.DenseFockState` over the two arm modes, lossless (the
    symmetric efficiency is folded in at moment evaluation).
    """
    if isinstance(config.backend, GaussianBackend):
        return _gaussian_output(config, phi)
    if isinstance(config.backend, FockBackend):
        return _fock_output(config, phi)
    raise ConfigError("the montecarlo backend evaluates sample paths, not states")


def _arm_modes(state: gaussian.GaussianState, arm: int) -> tuple[int, ...]:
    # Detector arm 1 occupies the even mode indices by construction.
    offset = 0 if arm == 1 else 1
    return tuple(range(offset, state.mode_count, 2))


def _gaussian_coincidence(state: gaussian.GaussianState, combo: DetectorCombo) -> float:
    """Normal-ordered product of the summed arm number operators.

    A detector integrates over its temporal modes, so the k-fold moment is a
    sum of Wick moments over all assignments of temporal modes to the k
    detected photons.
    """
    groups = [_arm_modes(state, arm) for arm in combo.arm_pattern]
    value = 0.0 + 0.0j
    for modes in itertools.product(*groups):
        value += gaussian.wick_normal_moment(state, modes, modes)
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise ArithmeticError(f"coincidence moment is not real: {value}")
    return float(value.real)


_FOCK_MOMENTS = {
    DetectorCombo.D1A: (1, 0, 1, 0),
    DetectorCombo.D1A_D1B: (2, 0, 2, 0),
    DetectorCombo.D1A_D1B_D1C: (3, 0, 3, 0),
    DetectorCombo.D1A_D2: (1, 1, 1, 1),
}


def evaluate_coincidence(config: PipelineConfig, combo: DetectorCombo, phi: float):
    """Coincidence figure for one phase point.

    Exact backends return the normal-ordered moment G^(k) as a float (the
    symmetric detector efficiency scales it by eta^k).  The Monte Carlo
    backend returns ``(click_rate, stderr)`` for the combo's k-fold
    coincidence click probability per pulse.
    """
    if isinstance(config.backend, MonteCarloBackend):
        from .montecarlo import simulate_counts

        table = simulate_counts(config, [phi], config.backend.shots, config.backend.seed)
        rates = table.combo_rate(combo)
        return float(rates[0][0]), float(rates[1][0])
    state = build_output_state(config, phi)
    if isinstance(config.backend, GaussianBackend):
        return _gaussian_coincidence(state, combo)
    p, q, r, s = _FOCK_MOMENTS[combo]
    moment = fock.normal_moment_dense(state, p, q, r, s)
    if abs(moment.imag) > 1e-9 * max(1.0, abs(moment.real)):
        raise ArithmeticError(f"coincidence moment is not real: {moment}")
    return float(moment.real) * config.detector_efficiency ** combo.order


def _thread_count() -> int:
    raw = os.environ.get("SQF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_fringe_scan(
    config: PipelineConfig, phi_grid: np.ndarray, combo: DetectorCombo
) -> FringeScan:
    """Evaluate the coincidence figure across a strictly increasing phase grid.

    Deterministic given the config (including any Monte Carlo seed); exact
    backends may evaluate points on up to SQF_THREADS threads with results
    identical to serial evaluation.
    """
    phi_grid = np.asarray(phi_grid, dtype=float)
    if phi_grid.ndim != 1 or phi_grid.size == 0:
        raise ValueError("phase grid must be a non-empty 1-d array")
    if np.any(np.diff(phi_grid) <= 0.0):
        raise ValueError("phase grid must be strictly increasing")
    metadata = {
        "combo": combo.value,
        "order": combo.order,
        "same_mode_fanout": "per-mode moments; detector fan-out constants are "
        "absorbed into the cross-section scales",
    }
    if isinstance(config.backend, MonteCarloBackend):
        from .montecarlo import simulate_counts

        table = simulate_counts(config, phi_grid, config.backend.shots, config.backend.seed)
        rates, stderr = table.combo_rate(combo)
        metadata.update(table.metadata)
        return FringeScan(phi_grid, rates, stderr, combo, "montecarlo", config, metadata)

    workers = _thread_count()
    if workers > 1 and phi_grid.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda p: evaluate_coincidence(config, combo, p), phi_grid))
    else:
        values = [evaluate_coincidence(config, combo, p) for p in phi_grid]
    tag = config.backend.name
    return FringeScan(phi_grid, np.asarray(values), None, combo, tag, config, metadata)


def _expected_period(scan: FringeScan) -> float:
    return TWO_PI if isinstance(scan.config.input, CoherentInput) else np.pi


def visibility_of_scan(scan: FringeScan, method: str = "extrema"):
    """Fringe visibility of a scan, with uncertainty when estimated by fit.

    'extrema' returns (max-min)/(max+min) over the scan points (None
    uncertainty); 'fit' delegates to the fringe fitter and returns the
    amplitude/offset ratio with propagated standard error.
    """
    span = scan.phi[-1] - scan.phi[0]
    step = float(np.median(np.diff(scan.phi))) if scan.phi.size > 1 else 0.0
    if span + step < _expected_period(scan) * (1.0 - 1e-9):
        raise ValueError("scan does not cover a full period of its expected harmonic")
    if method == "extrema":
        hi = float(np.max(scan.values))
        lo = float(np.min(scan.values))
        if hi + lo == 0.0:
            return 0.0, None
        return (hi - lo) / (hi + lo), None
    if method == "fit":
        from .fitting import fit_fringe

        weights = None
        if scan.stderr is not None:
            floor = np.max(scan.stderr) * 1e-6 + 1e-300
            weights = 1.0 / np.maximum(scan.stderr, floor) ** 2
        result = fit_fringe(scan.phi, scan.values, weights)
        if not result.converged:
            raise ArithmeticError("fringe fit did not converge")
        return result.parameters["visibility"], result.stderr["visibility"]
    raise ValueError(f"unknown visibility method {method!r}")


def dominant_harmonic(scan: FringeScan) -> int:
    """Frequency index (cycles per 2*pi of phi) of the strongest Fourier component.

    Requires a uniform grid covering exactly [0, 2*pi).
    """
    n = scan.phi.size
    if n < 4 or not np.allclose(scan.phi, TWO_PI * np.arange(n) / n, atol=1e-9):
        raise ValueError("harmonic analysis needs a uniform grid over [0, 2*pi)")
    spectrum = np.abs(np.fft.rfft(scan.values))
    if spectrum.size < 2:
        raise ValueError("grid too coarse for harmonic analysis")
    nonzero = spectrum[1:]
    scale = max(float(np.max(np.abs(scan.values))), 1.0)
    if float(np.max(nonzero)) < 1e-12 * n * scale:
        raise ValueError("scan is flat; no dominant harmonic")
    return int(np.argmax(nonzero)) + 1
