"""Multimode Gaussian states with normal-ordered moment evaluation.

States are parameterized by the coherent displacements <a_i> together with
the normal-ordered fluctuation matrices N_ij = <da_i^dag da_j> and
M_ij = <da_i da_j>.  Every observable in this package is a normal-ordered
correlation, so this parameterization needs no reordering corrections and
moments reduce to explicit Wick sums over pair contractions plus mean-value
singletons.  Valid at any gain; this is the scalable backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cosh, sinh

import numpy as np

from .errors import PhysicalityError
from ._linops import require_unitary, temporal_split_map

MAX_MOMENT_ORDER = 8

ModeLabel = tuple[str, int]  # (polarization tag, temporal index)


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state of ``mode_count`` bosonic modes.

    mean[i] = <a_i>, n_mat[i, j] = <da_i^dag da_j>, m_mat[i, j] = <da_i da_j>.
    mode_labels carries (polarization, temporal index) bookkeeping; operations
    do not interpret it except where documented.
    """

    mean: np.ndarray
    n_mat: np.ndarray
    m_mat: np.ndarray
    mode_labels: tuple[ModeLabel, ...]

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=complex)
        n_mat = np.asarray(self.n_mat, dtype=complex)
        m_mat = np.asarray(self.m_mat, dtype=complex)
        m = mean.shape[0]
        if n_mat.shape != (m, m) or m_mat.shape != (m, m):
            raise ValueError("mean, n_mat and m_mat have inconsistent shapes")
        if len(self.mode_labels) != m:
            raise ValueError(f"expected {m} mode labels, got {len(self.mode_labels)}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "n_mat", n_mat)
        object.__setattr__(self, "m_mat", m_mat)
        object.__setattr__(self, "mode_labels", tuple(self.mode_labels))

    @property
    def mode_count(self) -> int:
        return self.mean.shape[0]

    def validate(self, tol: float = 1e-10) -> None:
        """Check Hermiticity/symmetry and positivity of the fluctuation matrices."""
        n_mat, m_mat = self.n_mat, self.m_mat
        if np.max(np.abs(n_mat - n_mat.conj().T)) > tol:
            raise PhysicalityError("N matrix is not Hermitian")
        if np.max(np.abs(m_mat - m_mat.T)) > tol:
            raise PhysicalityError("M matrix is not symmetric")
        eye = np.eye(self.mode_count)
        block = np.block(
            [[n_mat + eye, m_mat], [m_mat.conj(), n_mat.conj()]]
        )
        block = 0.5 * (block + block.conj().T)
        lowest = float(np.linalg.eigvalsh(block)[0])
        if lowest < -tol:
            raise PhysicalityError(
                f"state violates positivity (lowest eigenvalue {lowest:.3e})"
            )


def gaussian_vacuum(m: int, labels: tuple[ModeLabel, ...] | None = None) -> GaussianState:
    """Vacuum on ``m`` modes."""
    if m < 1:
        raise ValueError(f"mode count must be >= 1, got {m}")
    if labels is None:
        labels = tuple(("derived", 0) for _ in range(m))
    return GaussianState(
        mean=np.zeros(m, dtype=complex),
        n_mat=np.zeros((m, m), dtype=complex),
        m_mat=np.zeros((m, m), dtype=complex),
        mode_labels=tuple(labels),
    )


def apply_two_mode_squeeze(state: GaussianState, i: int, j: int, g: float) -> GaussianState:
    """Pair-creating amplifier interaction between modes i and j at gain g.

    Requires vacuum fluctuations on both modes (the amplifier is unseeded, or
    seeded with a coherent state); the displacement transforms along.
    """
    if i == j:
        raise ValueError("two-mode squeezing needs two distinct modes")
    if g < 0.0:
        raise ValueError(f"gain must be non-negative, got {g}")
    m = state.mode_count
    for idx in (i, j):
        if not 0 <= idx < m:
            raise ValueError(f"mode index {idx} out of range for {m} modes")
    fluct = max(
        np.max(np.abs(state.n_mat[[i, j], :])),
        np.max(np.abs(state.n_mat[:, [i, j]])),
        np.max(np.abs(state.m_mat[[i, j], :])),
        np.max(np.abs(state.m_mat[:, [i, j]])),
    )
    if fluct > 1e-12:
        raise ValueError("squeezed modes must start with vacuum fluctuations")
    c, s = cosh(g), sinh(g)
    mean = state.mean.copy()
    mean[i] = c * state.mean[i] + s * np.conj(state.mean[j])
    mean[j] = c * state.mean[j] + s * np.conj(state.mean[i])
    n_mat = state.n_mat.copy()
    m_mat = state.m_mat.copy()
    n_mat[i, i] = n_mat[j, j] = s * s
    m_mat[i, j] = m_mat[j, i] = s * c
    return GaussianState(mean, n_mat, m_mat, state.mode_labels)


def apply_passive_unitary(
    state: GaussianState, u: np.ndarray, modes: tuple[int, ...] | None = None
) -> GaussianState:
    """Linear-optics map c_i = sum_j u[i,j] a_j on a subset of modes.

    The total mean photon number is conserved.  Mode labels are left
    untouched; callers that change the physical meaning of a mode are
    responsible for relabeling.
    """
    u = require_unitary(u)
    m = state.mode_count
    if modes is None:
        modes = tuple(range(m))
    if u.shape[0] != len(modes):
        raise ValueError(f"map of shape {u.shape} cannot act on modes {modes}")
    full = np.eye(m, dtype=complex)
    sub = np.asarray(modes)
    full[np.ix_(sub, sub)] = u
    mean = full @ state.mean
    n_mat = full.conj() @ state.n_mat @ full.T
    m_mat = full @ state.m_mat @ full.T
    return GaussianState(mean, n_mat, m_mat, state.mode_labels)


def apply_displacement(state: GaussianState, i: int, alpha: complex) -> GaussianState:
    """Coherent displacement <a_i> += alpha; fluctuations untouched."""
    if not 0 <= i < state.mode_count:
        raise ValueError(f"mode index {i} out of range")
    mean = state.mean.copy()
    mean[i] += alpha
    return GaussianState(mean, state.n_mat, state.m_mat, state.mode_labels)


def apply_loss(state: GaussianState, i: int, eta: float) -> GaussianState:
    """Transmission eta in [0, 1] on mode i (beamsplitter to an unobserved port)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    if not 0 <= i < state.mode_count:
        raise ValueError(f"mode index {i} out of range")
    scale = np.ones(state.mode_count)
    scale[i] = np.sqrt(eta)
    mean = scale * state.mean
    n_mat = scale[:, None] * state.n_mat * scale[None, :]
    m_mat = scale[:, None] * state.m_mat * scale[None, :]
    return GaussianState(mean, n_mat, m_mat, state.mode_labels)


def split_temporal_mode(state: GaussianState, i: int, overlap: float) -> GaussianState:
    """Move part of mode i into a fresh temporal-mode ancilla.

    Appends a vacuum mode carrying temporal index 1 (same polarization tag)
    and applies the rotation a_i -> sqrt(overlap) a_i + sqrt(1-overlap) a_anc.
    overlap=1 appends a decoupled vacuum ancilla; overlap=0 moves the field
    entirely into the new temporal mode.
    """
    if not 0 <= i < state.mode_count:
        raise ValueError(f"mode index {i} out of range")
    split = temporal_split_map(overlap)
    m = state.mode_count
    mean = np.concatenate([state.mean, [0.0]])
    n_mat = np.zeros((m + 1, m + 1), dtype=complex)
    m_mat = np.zeros((m + 1, m + 1), dtype=complex)
    n_mat[:m, :m] = state.n_mat
    m_mat[:m, :m] = state.m_mat
    labels = state.mode_labels + ((state.mode_labels[i][0], 1),)
    grown = GaussianState(mean, n_mat, m_mat, labels)
    return apply_passive_unitary(grown, split, modes=(i, m))


def _contraction(state: GaussianState, kind0: int, i0: int, kind1: int, i1: int) -> complex:
    # kind 0 = creation, 1 = annihilation; creation operators always precede
    # annihilation operators in the normal-ordered product.
    if kind0 == 0 and kind1 == 0:
        return np.conj(state.m_mat[i0, i1])
    if kind0 == 0 and kind1 == 1:
        return state.n_mat[i0, i1]
    if kind0 == 1 and kind1 == 1:
        return state.m_mat[i0, i1]
    raise AssertionError("operators out of normal order")


def _wick_sum(state: GaussianState, ops: tuple[tuple[int, int], ...], use_mean: bool) -> complex:
    if not ops:
        return 1.0 + 0.0j
    (kind0, i0), rest = ops[0], ops[1:]
    total = 0.0 + 0.0j
    if use_mean:
        single = np.conj(state.mean[i0]) if kind0 == 0 else state.mean[i0]
        if single != 0.0:
            total += single * _wick_sum(state, rest, use_mean)
    for pos, (kind1, i1) in enumerate(rest):
        pair = _contraction(state, kind0, i0, kind1, i1)
        if pair != 0.0:
            total += pair * _wick_sum(state, rest[:pos] + rest[pos + 1 :], use_mean)
    return total


def wick_normal_moment(
    state: GaussianState,
    creators: tuple[int, ...] | list[int],
    annihilators: tuple[int, ...] | list[int],
) -> complex:
    """Normal-ordered moment <prod a_c^dag prod a_d> by explicit Wick expansion.

    Sums every partition of the operator list into contraction pairs
    (a^dag a -> N, a a -> M, a^dag a^dag -> conj M) and mean-value
    singletons; exact for Gaussian states.  Total order is capped at 8
    (105 pairings at the top order).
    """
    creators = tuple(int(c) for c in creators)
    annihilators = tuple(int(a) for a in annihilators)
    order = len(creators) + len(annihilators)
    if order > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {order} exceeds the supported {MAX_MOMENT_ORDER}")
    m = state.mode_count
    for idx in creators + annihilators:
        if not 0 <= idx < m:
            raise ValueError(f"mode index {idx} out of range for {m} modes")
    ops = tuple((0, i) for i in creators) + tuple((1, i) for i in annihilators)
    use_mean = bool(np.any(state.mean != 0.0))
    return complex(_wick_sum(state, ops, use_mean))


def mean_photon_total(state: GaussianState) -> float:
    """Sum of <a_i^dag a_i> over all modes."""
    return float(np.real(np.trace(state.n_mat) + np.vdot(state.mean, state.mean)))
