import math
import os

import numpy as np
import pytest

from sqf.analytic import FringeKind, fringe_closed_form, visibility_closed_form
from sqf.errors import ConfigError
from sqf.fock import required_cutoff
from sqf.pipeline import (
    CoherentInput,
    Decoherence,
    DetectorCombo,
    FockBackend,
    FringeScan,
    MonteCarloBackend,
    PipelineConfig,
    build_output_state,
    dominant_harmonic,
    evaluate_coincidence,
    run_fringe_scan,
    uniform_phase_grid,
    visibility_of_scan,
)

GRID64 = uniform_phase_grid(64)

COMBO_KIND = {
    DetectorCombo.D1A_D1B: FringeKind(2, "same"),
    DetectorCombo.D1A_D2: FringeKind(2, "cross"),
    DetectorCombo.D1A_D1B_D1C: FringeKind(3, "same"),
}


class TestConfigValidation:
    def test_negative_gain(self):
        with pytest.raises(ConfigError):
            PipelineConfig(gain=-0.1)

    def test_zero_efficiency(self):
        with pytest.raises(ConfigError):
            PipelineConfig(gain=0.1, detector_efficiency=0.0)

    def test_fock_with_decoherence(self):
        with pytest.raises(ConfigError):
            PipelineConfig(
                gain=0.1,
                decoherence=Decoherence("HV", 0.0),
                backend=FockBackend(cutoff=10),
            )

    def test_fock_cannot_amplify_seed(self):
        with pytest.raises(ConfigError):
            PipelineConfig(
                gain=0.5, input=CoherentInput(1.0), backend=FockBackend(cutoff=20)
            )

    def test_montecarlo_coherent_rejected(self):
        with pytest.raises(ConfigError):
            PipelineConfig(
                gain=0.0,
                input=CoherentInput(1.0),
                backend=MonteCarloBackend(shots=10, seed=0),
            )

    def test_montecarlo_partial_overlap_rejected(self):
        with pytest.raises(ConfigError):
            PipelineConfig(
                gain=0.5,
                decoherence=Decoherence("PM", 0.5),
                backend=MonteCarloBackend(shots=10, seed=0),
            )

    def test_bad_overlap(self):
        with pytest.raises(ConfigError):
            Decoherence("HV", -0.2)


class TestBuildOutputState:
    def test_vacuum_zero_gain(self):
        state = build_output_state(PipelineConfig(gain=0.0), 0.3)
        assert np.max(np.abs(state.n_mat)) == 0.0
        for combo in DetectorCombo:
            assert evaluate_coincidence(PipelineConfig(gain=0.0), combo, 0.3) == 0.0

    def test_singles_flat_in_phi(self):
        cfg = PipelineConfig(gain=1.4)
        n_bar = math.sinh(1.4) ** 2
        values = [evaluate_coincidence(cfg, DetectorCombo.D1A, p) for p in GRID64[:9]]
        assert np.max(np.abs(np.asarray(values) - n_bar)) < 1e-12

    def test_coherent_singles_fringe(self):
        cfg = PipelineConfig(gain=0.0, input=CoherentInput(1.0), phase_offset_delta=0.4)
        for phi in (0.0, 0.8, 2.5):
            got = evaluate_coincidence(cfg, DetectorCombo.D1A, phi)
            assert got == pytest.approx(math.cos((phi + 0.4) / 2) ** 2, abs=1e-12)

    def test_fock_coherent_amplitude_cap(self):
        cfg = PipelineConfig(
            gain=0.0, input=CoherentInput(4.0), backend=FockBackend(cutoff=20)
        )
        with pytest.raises(ConfigError):
            build_output_state(cfg, 0.1)

    def test_montecarlo_has_no_state(self):
        cfg = PipelineConfig(gain=0.1, backend=MonteCarloBackend(shots=10, seed=1))
        with pytest.raises(ConfigError):
            build_output_state(cfg, 0.0)


class TestClosedFormAgreement:
    @pytest.mark.parametrize("g", [0.2, 0.8, 1.4, 2.5])
    def test_gaussian_matches_formulas(self, g):
        n_bar = math.sinh(g) ** 2
        cfg = PipelineConfig(gain=g)
        for combo, kind in COMBO_KIND.items():
            scan = run_fringe_scan(cfg, GRID64, combo)
            expected = np.array([fringe_closed_form(kind, p, n_bar) for p in GRID64])
            np.testing.assert_allclose(scan.values, expected, rtol=1e-10)

    def test_fock_matches_gaussian(self):
        g = 0.6
        cutoff = required_cutoff(g, order=6, tol=1e-12)
        fock_cfg = PipelineConfig(gain=g, backend=FockBackend(cutoff=cutoff))
        gauss_cfg = PipelineConfig(gain=g)
        for combo in DetectorCombo:
            for phi in uniform_phase_grid(8):
                a = evaluate_coincidence(fock_cfg, combo, phi)
                b = evaluate_coincidence(gauss_cfg, combo, phi)
                assert a == pytest.approx(b, rel=1e-8, abs=1e-10)

    def test_fock_efficiency_scaling(self):
        g, phi = 0.5, 0.9
        cutoff = required_cutoff(g, order=4, tol=1e-10)
        full = PipelineConfig(gain=g, backend=FockBackend(cutoff=cutoff))
        lossy = PipelineConfig(
            gain=g, detector_efficiency=0.25, backend=FockBackend(cutoff=cutoff)
        )
        for combo, power in [(DetectorCombo.D1A, 1), (DetectorCombo.D1A_D1B, 2)]:
            assert evaluate_coincidence(lossy, combo, phi) == pytest.approx(
                0.25**power * evaluate_coincidence(full, combo, phi), rel=1e-12
            )


class TestDecoherence:
    def test_full_overlap_reproduces_plain_scan(self):
        plain = run_fringe_scan(PipelineConfig(gain=1.4), GRID64, DetectorCombo.D1A_D1B)
        kept = run_fringe_scan(
            PipelineConfig(gain=1.4, decoherence=Decoherence("HV", 1.0)),
            GRID64,
            DetectorCombo.D1A_D1B,
        )
        np.testing.assert_allclose(kept.values, plain.values, atol=1e-12)

    def test_hv_overlap_zero_fringe(self):
        g = 1.4
        n_bar = math.sinh(g) ** 2
        cfg = PipelineConfig(gain=g, decoherence=Decoherence("HV", 0.0))
        scan = run_fringe_scan(cfg, GRID64, DetectorCombo.D1A_D1B)
        expected = np.array(
            [fringe_closed_form(FringeKind(2, "same", "HV"), p, n_bar) for p in GRID64]
        )
        np.testing.assert_allclose(scan.values, expected, rtol=1e-10)
        vis, _ = visibility_of_scan(scan)
        assert vis == pytest.approx(1.0 / (8.0 * n_bar + 1.0), rel=1e-9)

    def test_pm_overlap_zero_flat(self):
        g = 1.4
        n_bar = math.sinh(g) ** 2
        cfg = PipelineConfig(gain=g, decoherence=Decoherence("PM", 0.0))
        scan = run_fringe_scan(cfg, GRID64, DetectorCombo.D1A_D1B)
        assert scan.values.max() - scan.values.min() < 1e-12
        assert scan.values[0] == pytest.approx(2 * n_bar**2 + n_bar / 2, rel=1e-10)
        with pytest.raises(ValueError):
            dominant_harmonic(scan)

    def test_partial_overlap_interpolates(self):
        g = 1.0
        cfg_half = PipelineConfig(gain=g, decoherence=Decoherence("HV", 0.5))
        scan = run_fringe_scan(cfg_half, GRID64, DetectorCombo.D1A_D1B)
        vis_half, _ = visibility_of_scan(scan)
        n_bar = math.sinh(g) ** 2
        vis_full = visibility_closed_form(FringeKind(2, "same"), n_bar)
        vis_none = visibility_closed_form(FringeKind(2, "same", "HV"), n_bar)
        assert vis_none < vis_half < vis_full

    def test_cross_combo_hv_decohered_runs(self):
        cfg = PipelineConfig(gain=0.9, decoherence=Decoherence("HV", 0.0))
        value = evaluate_coincidence(cfg, DetectorCombo.D1A_D2, 0.7)
        assert value > 0.0


class TestScansAndDiagnostics:
    def test_phase_offset_covariance(self):
        delta = 0.37
        base = run_fringe_scan(PipelineConfig(gain=0.9), GRID64 + delta, DetectorCombo.D1A_D1B)
        shifted = run_fringe_scan(
            PipelineConfig(gain=0.9, phase_offset_delta=delta), GRID64, DetectorCombo.D1A_D1B
        )
        np.testing.assert_allclose(shifted.values, base.values, atol=1e-12)

    def test_grid_validation(self):
        cfg = PipelineConfig(gain=0.2)
        with pytest.raises(ValueError):
            run_fringe_scan(cfg, np.array([]), DetectorCombo.D1A)
        with pytest.raises(ValueError):
            run_fringe_scan(cfg, np.array([0.0, 0.0, 1.0]), DetectorCombo.D1A)

    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_efficiency_invariance_of_visibility(self, eta):
        cfg = PipelineConfig(gain=1.4, detector_efficiency=eta)
        for combo in (DetectorCombo.D1A_D1B, DetectorCombo.D1A_D2):
            scan = run_fringe_scan(cfg, GRID64, combo)
            vis, _ = visibility_of_scan(scan)
            kind = COMBO_KIND[combo]
            assert vis == pytest.approx(
                visibility_closed_form(kind, math.sinh(1.4) ** 2), abs=1e-10
            )

    def test_visibility_extrema_and_fit_agree(self):
        scan = run_fringe_scan(PipelineConfig(gain=0.8), GRID64, DetectorCombo.D1A_D1B)
        v_ext, err_ext = visibility_of_scan(scan, "extrema")
        v_fit, err_fit = visibility_of_scan(scan, "fit")
        assert err_ext is None
        assert v_fit == pytest.approx(v_ext, abs=1e-9)
        assert err_fit is not None and err_fit < 1e-6

    def test_flat_scan_visibility_zero(self):
        scan = FringeScan(
            GRID64, np.full(64, 3.0), None, DetectorCombo.D1A, "gaussian",
            PipelineConfig(gain=0.0),
        )
        vis, _ = visibility_of_scan(scan)
        assert vis == 0.0

    def test_scan_too_short(self):
        short = uniform_phase_grid(16, span=1.0)
        scan = run_fringe_scan(PipelineConfig(gain=0.5), short, DetectorCombo.D1A_D1B)
        with pytest.raises(ValueError):
            visibility_of_scan(scan)

    def test_dominant_harmonic_values(self):
        coherent = PipelineConfig(gain=0.0, input=CoherentInput(1.0))
        scan1 = run_fringe_scan(coherent, GRID64, DetectorCombo.D1A)
        assert dominant_harmonic(scan1) == 1
        for g in (0.3, 1.4):
            for combo in COMBO_KIND:
                scan = run_fringe_scan(PipelineConfig(gain=g), GRID64, combo)
                assert dominant_harmonic(scan) == 2

    def test_dominant_harmonic_needs_canonical_grid(self):
        scan = run_fringe_scan(
            PipelineConfig(gain=0.5), uniform_phase_grid(32, span=math.pi), DetectorCombo.D1A_D1B
        )
        with pytest.raises(ValueError):
            dominant_harmonic(scan)

    def test_thread_env_matches_serial(self):
        cfg = PipelineConfig(gain=1.1)
        serial = run_fringe_scan(cfg, GRID64, DetectorCombo.D1A_D2)
        old = os.environ.get("SQF_THREADS")
        os.environ["SQF_THREADS"] = "4"
        try:
            threaded = run_fringe_scan(cfg, GRID64, DetectorCombo.D1A_D2)
        finally:
            if old is None:
                del os.environ["SQF_THREADS"]
            else:
                os.environ["SQF_THREADS"] = old
        assert np.array_equal(threaded.values, serial.values)


class TestMonteCarloBackendIntegration:
    def test_scan_carries_stderr_and_reproduces(self):
        cfg = PipelineConfig(
            gain=0.8,
            detector_efficiency=0.2,
            backend=MonteCarloBackend(shots=20_000, seed=3),
        )
        grid = uniform_phase_grid(8)
        scan1 = run_fringe_scan(cfg, grid, DetectorCombo.D1A_D1B)
        scan2 = run_fringe_scan(cfg, grid, DetectorCombo.D1A_D1B)
        assert scan1.stderr is not None
        assert np.array_equal(scan1.values, scan2.values)
        assert np.array_equal(scan1.stderr, scan2.stderr)

    def test_evaluate_returns_rate_and_stderr(self):
        cfg = PipelineConfig(
            gain=0.6, detector_efficiency=0.3, backend=MonteCarloBackend(shots=5_000, seed=9)
        )
        rate, err = evaluate_coincidence(cfg, DetectorCombo.D1A_D2, 0.4)
        assert 0.0 <= rate <= 1.0
        assert err > 0.0
