import math

import numpy as np
import pytest

from sqf.errors import TruncationError
from sqf.fock import (
    DenseFockState,
    OpaParams,
    apply_mode_unitary,
    build_tmsv_dense,
    joint_photon_pmf,
    normal_moment_dense,
    required_cutoff,
    total_number_distribution,
)
from sqf._linops import HV_TO_PM


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng: np.random.Generator, cutoff: int) -> DenseFockState:
    amps = rng.normal(size=(cutoff + 1, cutoff + 1)) + 1j * rng.normal(
        size=(cutoff + 1, cutoff + 1)
    )
    amps /= np.linalg.norm(amps)
    return DenseFockState(cutoff, amps)


def hom_map(phi: float) -> np.ndarray:
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, 1j * s], [1j * s, c]])


class TestOpaParams:
    def test_derived_quantities(self):
        p = OpaParams(0.6)
        assert p.gamma == pytest.approx(math.tanh(0.6), abs=0)
        assert p.c_norm == pytest.approx(math.cosh(0.6), abs=0)
        assert p.n_bar == pytest.approx(math.sinh(0.6) ** 2, rel=1e-15)
        # gamma^2 = n_bar / (n_bar + 1)
        assert p.gamma**2 == pytest.approx(p.n_bar / (p.n_bar + 1.0), rel=1e-14)

    @pytest.mark.parametrize("bad", [-0.1, float("nan"), float("inf")])
    def test_rejects_bad_gain(self, bad):
        with pytest.raises(ValueError):
            OpaParams(bad)


class TestBuildTmsv:
    def test_zero_gain_is_vacuum(self):
        state = build_tmsv_dense(OpaParams(0.0), 4)
        expected = np.zeros((5, 5))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(state.amplitudes, expected)
        assert state.norm_deficit == pytest.approx(0.0, abs=1e-15)

    def test_schmidt_coefficients(self):
        # Direct evaluation of the closed form at g = 0.6.
        state = build_tmsv_dense(OpaParams(0.6), 30)
        assert state.amplitudes[0, 0].real == pytest.approx(0.8435506876218067, rel=1e-12)
        pmf = joint_photon_pmf(state)
        assert pmf[0, 0] == pytest.approx(0.7115777625872228, rel=1e-12)  # 1/(1+n_bar)
        n_bar = OpaParams(0.6).n_bar
        assert pmf[0, 0] == pytest.approx(1.0 / (1.0 + n_bar), rel=1e-12)
        # Geometric ratio tanh^2(0.6) for every n >= 1.
        ratio = math.tanh(0.6) ** 2
        for n in range(1, 31):
            assert pmf[n, n] / pmf[n - 1, n - 1] == pytest.approx(ratio, rel=1e-12)

    def test_off_diagonal_exactly_zero(self):
        state = build_tmsv_dense(OpaParams(0.6), 12, tail_tol=1e-6)
        off = state.amplitudes[~np.eye(13, dtype=bool)]
        assert np.all(off == 0.0)

    def test_norm_deficit_is_geometric_tail(self):
        state = build_tmsv_dense(OpaParams(0.6), 20)
        assert state.norm_deficit == pytest.approx(math.tanh(0.6) ** 42, abs=1e-14)

    def test_insufficient_cutoff_rejected(self):
        with pytest.raises(TruncationError):
            build_tmsv_dense(OpaParams(0.5), 12, tail_tol=1e-10)

    def test_norm_invariant(self):
        state = build_tmsv_dense(OpaParams(0.8), 40, tail_tol=1e-6)
        total = float(np.sum(np.abs(state.amplitudes) ** 2))
        assert total <= 1.0 + 1e-12
        assert state.norm_deficit == pytest.approx(1.0 - total, abs=1e-12)


class TestRequiredCutoff:
    def test_norm_tail_bound_holds(self):
        for g in (0.2, 0.6, 0.8):
            c = required_cutoff(g, order=0, tol=1e-12)
            assert math.tanh(g) ** (2 * (c + 1)) <= 1e-12
            # minimality within one step
            assert math.tanh(g) ** (2 * c) > 1e-12

    def test_moment_weight_increases_cutoff(self):
        assert required_cutoff(0.8, order=6, tol=1e-12) > required_cutoff(
            0.8, order=0, tol=1e-12
        )

    def test_vacuum(self):
        assert required_cutoff(0.0, order=2, tol=1e-12) >= 0


class TestModeUnitary:
    def test_identity_preserves_amplitudes(self):
        state = build_tmsv_dense(OpaParams(0.4), 10, tail_tol=1e-6)
        out = apply_mode_unitary(state, np.eye(2))
        embedded = state.expanded(out.cutoff)
        np.testing.assert_allclose(out.amplitudes, embedded.amplitudes, atol=1e-12)

    def test_hong_ou_mandel_null(self):
        # |1,1> through the phi = pi/2 map: P(1,1) = cos^2(phi) = 0,
        # P(2,0) = P(0,2) = 1/2 (two-photon amplitude algebra).
        amps = np.zeros((3, 3), dtype=complex)
        amps[1, 1] = 1.0
        out = apply_mode_unitary(DenseFockState(2, amps), hom_map(np.pi / 2))
        pmf = joint_photon_pmf(out)
        assert pmf[1, 1] == pytest.approx(0.0, abs=1e-24)
        assert pmf[2, 0] == pytest.approx(0.5, rel=1e-12)
        assert pmf[0, 2] == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("phi", [0.3, 1.1, 2.0])
    def test_two_photon_coincidence_cos2(self, phi):
        amps = np.zeros((3, 3), dtype=complex)
        amps[1, 1] = 1.0
        out = apply_mode_unitary(DenseFockState(2, amps), hom_map(phi))
        assert joint_photon_pmf(out)[1, 1] == pytest.approx(np.cos(phi) ** 2, abs=1e-12)

    def test_even_parity_in_pm_basis(self):
        state = build_tmsv_dense(OpaParams(0.5), 18, tail_tol=1e-5)
        rotated = apply_mode_unitary(state, HV_TO_PM)
        idx = np.indices(rotated.amplitudes.shape)
        odd = (idx[0] % 2 == 1) | (idx[1] % 2 == 1)
        assert np.max(np.abs(rotated.amplitudes[odd])) < 1e-12

    def test_total_number_distribution_invariant(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            state = random_state(rng, 6)
            before = total_number_distribution(state)
            after = total_number_distribution(apply_mode_unitary(state, random_unitary(rng)))
            np.testing.assert_allclose(after[: before.size], before, atol=1e-12)
            assert np.max(np.abs(after[before.size :])) < 1e-12 if after.size > before.size else True

    def test_norm_preserved(self):
        rng = np.random.default_rng(3)
        state = random_state(rng, 8)
        out = apply_mode_unitary(state, random_unitary(rng))
        assert abs(out.norm_deficit - state.norm_deficit) < 1e-12

    def test_composition(self):
        rng = np.random.default_rng(5)
        u1, u2 = random_unitary(rng), random_unitary(rng)
        state = build_tmsv_dense(OpaParams(0.5), 14, tail_tol=1e-4)
        sequential = apply_mode_unitary(apply_mode_unitary(state, u1), u2)
        direct = apply_mode_unitary(state, u2 @ u1)
        np.testing.assert_allclose(
            sequential.amplitudes,
            direct.expanded(sequential.cutoff).amplitudes,
            atol=1e-10,
        )

    def test_non_unitary_rejected(self):
        state = build_tmsv_dense(OpaParams(0.2), 6, tail_tol=1e-4)
        with pytest.raises(ValueError):
            apply_mode_unitary(state, np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestNormalMoments:
    def test_vacuum_moments_vanish(self):
        vac = build_tmsv_dense(OpaParams(0.0), 4)
        for orders in [(1, 0, 1, 0), (1, 1, 1, 1), (2, 0, 2, 0), (0, 1, 0, 0)]:
            assert normal_moment_dense(vac, *orders) == 0.0

    def test_pair_correlation_against_pmf(self):
        # <n_H n_V> evaluated two ways: operator action vs pmf summation.
        state = build_tmsv_dense(OpaParams(0.6), 35, tail_tol=1e-8)
        moment = normal_moment_dense(state, 1, 1, 1, 1)
        pmf = joint_photon_pmf(state)
        n = np.arange(36)
        direct = float(np.sum(pmf * n[:, None] * n[None, :]))
        assert moment.real == pytest.approx(direct, rel=1e-12)
        n_bar = OpaParams(0.6).n_bar
        assert moment.real == pytest.approx(2 * n_bar**2 + n_bar, rel=1e-9)
        assert abs(moment.imag) < 1e-12

    def test_same_mode_second_moment(self):
        state = build_tmsv_dense(OpaParams(0.6), 35, tail_tol=1e-8)
        n_bar = OpaParams(0.6).n_bar
        moment = normal_moment_dense(state, 2, 0, 2, 0)
        assert moment.real == pytest.approx(2 * n_bar**2, rel=1e-9)

    def test_order_cap(self):
        state = build_tmsv_dense(OpaParams(0.2), 6, tail_tol=1e-4)
        with pytest.raises(ValueError):
            normal_moment_dense(state, 3, 2, 3, 1)

    def test_moment_higher_than_support_is_zero(self):
        vac = build_tmsv_dense(OpaParams(0.0), 2)
        assert normal_moment_dense(vac, 2, 0, 2, 0) == 0.0


class TestJointPmf:
    def test_vacuum_single_entry(self):
        pmf = joint_photon_pmf(build_tmsv_dense(OpaParams(0.0), 3))
        assert pmf[0, 0] == 1.0
        assert np.sum(pmf) == 1.0

    def test_sum_matches_norm(self):
        state = build_tmsv_dense(OpaParams(0.7), 30, tail_tol=1e-5)
        assert float(np.sum(joint_photon_pmf(state))) == pytest.approx(
            1.0 - state.norm_deficit, abs=1e-12
        )

    def test_sum_unchanged_by_unitary(self):
        rng = np.random.default_rng(9)
        state = build_tmsv_dense(OpaParams(0.6), 20, tail_tol=1e-6)
        out = apply_mode_unitary(state, random_unitary(rng))
        assert float(np.sum(joint_photon_pmf(out))) == pytest.approx(
            float(np.sum(joint_photon_pmf(state))), abs=1e-12
        )
