"""Truncated two-mode Fock-space engine.

This is the brute-force oracle backing the Gaussian backend: states are
dense complex amplitude grids over photon numbers (n_H, n_V), built from
the Schmidt coefficients of the two-mode squeezed vacuum, transformed by
passive two-mode optics sector-by-sector in total photon number, and
interrogated through normal-ordered moments evaluated by direct operator
action.  Everything is exact up to the stored truncation tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, logm

from .errors import TruncationError
from ._linops import require_unitary

MAX_MOMENT_ORDER = 8


@dataclass(frozen=True)
class OpaParams:
    """Nonlinear gain of the unseeded amplifier and its derived quantities.

    The coupling strength and interaction time of the pump are absorbed
    into the single dimensionless gain ``g``.
    """

    g: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.g):
            raise ValueError(f"gain must be finite, got {self.g}")
        if self.g < 0.0:
            raise ValueError(f"gain must be non-negative, got {self.g}")

    @property
    def gamma(self) -> float:
        """tanh g, the geometric ratio of the Schmidt coefficients."""
        return math.tanh(self.g)

    @property
    def c_norm(self) -> float:
        """cosh g, the normalization of the squeezed-vacuum expansion."""
        return math.cosh(self.g)

    @property
    def n_bar(self) -> float:
        """sinh^2 g, mean photon number per polarization mode."""
        return math.sinh(self.g) ** 2


@dataclass(frozen=True)
class DenseFockState:
    """Two-mode pure state on the grid 0 <= n_H, n_V <= cutoff."""

    cutoff: int
    amplitudes: np.ndarray
    norm_deficit: float = field(init=False)

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.cutoff < 0:
            raise ValueError(f"cutoff must be >= 0, got {self.cutoff}")
        dim = self.cutoff + 1
        if amps.shape != (dim, dim):
            raise ValueError(f"amplitude grid must be {(dim, dim)}, got {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if norm > 1.0 + 1e-12:
            raise ValueError(f"amplitude norm {norm} exceeds 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "norm_deficit", 1.0 - norm)

    def expanded(self, cutoff: int) -> "DenseFockState":
        """Same state embedded in a grid with a larger cutoff."""
        if cutoff < self.cutoff:
            raise ValueError("cannot shrink a state's cutoff")
        out = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        out[: self.cutoff + 1, : self.cutoff + 1] = self.amplitudes
        return DenseFockState(cutoff, out)


def required_cutoff(g: float, order: int = 0, tol: float = 1e-10) -> int:
    """Smallest cutoff c with sum_{n>c} n^order p_n <= tol.

    p_n = (1 - G^2) G^(2n) with G = tanh g is the photon-pair number law of
    the squeezed vacuum; the n^order weight guards moments up to the given
    total operator order against truncation bias (a conservative bound: an
    order-k moment weights the tail by at most n^k).
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    x = math.tanh(g) ** 2
    if x == 0.0:
        return max(order, 1)
    # Sum the weighted tail far enough out that the geometric remainder is
    # negligible, then report the first admissible cutoff.
    n_max = 64
    while True:
        n_max *= 2
        remainder = (n_max**order) * x**n_max / (1.0 - x)
        if remainder < tol * 1e-6 or n_max > 2**22:
            break
    n = np.arange(n_max + 1, dtype=float)
    weights = (1.0 - x) * np.exp(order * np.log(np.maximum(n, 1.0)) + n * math.log(x))
    tails = np.cumsum(weights[::-1])[::-1]  # tails[c+1] = sum_{n>=c+1}
    admissible = np.nonzero(tails <= tol)[0]
    if len(admissible) == 0:
        raise TruncationError(
            f"no cutoff below {n_max} reaches tail {tol:.1e} at g={g}, order={order}"
        )
    return max(int(admissible[0]) - 1, 0)


def build_tmsv_dense(
    params: OpaParams, cutoff: int, tail_tol: float = 1e-10
) -> DenseFockState:
    """Two-mode squeezed vacuum sum_n (G^n / cosh g) |n, n> on a truncated grid.

    The discarded probability is the geometric tail G^(2(cutoff+1)); the
    call is rejected when that exceeds ``tail_tol``.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")
    gamma = params.gamma
    deficit = gamma ** (2 * (cutoff + 1))
    if deficit > tail_tol:
        raise TruncationError(
            f"truncation insufficient: tail {deficit:.3e} > {tail_tol:.1e} "
            f"(g={params.g}, cutoff={cutoff})"
        )
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    n = np.arange(cutoff + 1)
    amps[n, n] = gamma ** n.astype(float) / params.c_norm
    return DenseFockState(cutoff, amps)


def build_coherent_dense(
    alpha: complex, pol: str, cutoff: int, tail_tol: float = 1e-10
) -> DenseFockState:
    """Coherent state of amplitude ``alpha`` in mode 'H' or 'V', vacuum elsewhere."""
    if pol not in ("H", "V"):
        raise ValueError(f"polarization must be 'H' or 'V', got {pol!r}")
    n = np.arange(cutoff + 1)
    if alpha == 0:
        coeffs = np.zeros(cutoff + 1, dtype=complex)
        coeffs[0] = 1.0
    else:
        log_fact = np.cumsum(np.log(np.maximum(n, 1)))
        coeffs = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(complex(alpha)) - 0.5 * log_fact)
    deficit = 1.0 - float(np.sum(np.abs(coeffs) ** 2))
    if deficit > tail_tol:
        raise TruncationError(
            f"truncation insufficient for coherent amplitude |alpha|={abs(alpha):.3f}"
        )
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    if pol == "H":
        amps[:, 0] = coeffs
    else:
        amps[0, :] = coeffs
    return DenseFockState(cutoff, amps)


def _mode_generator(u: np.ndarray) -> np.ndarray:
    """Hermitian 2x2 h with exp(-i h) = u."""
    h = 1j * logm(u)
    return 0.5 * (h + h.conj().T)


def _sector_apply(h: np.ndarray, total: int, vec: np.ndarray) -> np.ndarray:
    """Apply the induced unitary of exp(-i dGamma(h)) within one total-photon sector.

    Basis ordering is |k, total-k> for k = 0..total.  The sector generator is
    Hermitian tridiagonal; a diagonal phase gauge makes it real so the matrix
    exponential reduces to a real symmetric tridiagonal eigenproblem.
    """
    if total == 0:
        return vec.copy()
    k = np.arange(total + 1, dtype=float)
    diag = h[0, 0].real * k + h[1, 1].real * (total - k)
    # <k+1, T-k-1| dGamma(h) |k, T-k> = h[0,1] sqrt((k+1)(T-k))
    coupling = h[0, 1] * np.sqrt((k[:-1] + 1.0) * (total - k[:-1]))
    strength = np.abs(coupling)
    if np.max(strength) == 0.0:
        return np.exp(-1j * diag) * vec
    # Gauge away the common phase of the couplings: H = D A D^dagger.
    psi = math.atan2(h[0, 1].imag, h[0, 1].real)
    gauge = np.exp(1j * psi * k)
    evals, evecs = eigh_tridiagonal(diag, strength)
    rotated = evecs.T @ (gauge.conj() * vec)
    return gauge * (evecs @ (np.exp(-1j * evals) * rotated))


def apply_mode_unitary(state: DenseFockState, u: np.ndarray) -> DenseFockState:
    """Transform the state by the passive two-mode map c_i = sum_j u[i,j] a_j.

    Total photon number is conserved sector-by-sector, so no amplitude can
    leak past the truncation; the output grid is grown (at most to the
    largest populated total photon number) so that every populated sector is
    represented in full.
    """
    u = require_unitary(u)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 mode map, got shape {u.shape}")
    amps = state.amplitudes
    populated = np.argwhere(np.abs(amps) > 0.0)
    t_max = int(populated.sum(axis=1).max()) if len(populated) else 0
    cutoff_out = max(state.cutoff, t_max)
    h = _mode_generator(u)
    out = np.zeros((cutoff_out + 1, cutoff_out + 1), dtype=complex)
    for total in range(t_max + 1):
        k_in = np.arange(max(0, total - state.cutoff), min(total, state.cutoff) + 1)
        vec = np.zeros(total + 1, dtype=complex)
        vec[k_in] = amps[k_in, total - k_in]
        if not np.any(vec):
            continue
        new_vec = _sector_apply(h, total, vec)
        k_out = np.arange(total + 1)
        out[k_out, total - k_out] = new_vec
    return DenseFockState(cutoff_out, out)


def _lowered(amps: np.ndarray, r: int, s: int) -> np.ndarray:
    """Amplitude grid of a_H^r a_V^s |psi>, indexed by the remaining photon numbers."""
    dim = amps.shape[0]
    if r >= dim or s >= dim:
        return np.zeros((max(dim - r, 0) or 1, max(dim - s, 0) or 1), dtype=complex)
    out = amps[r:, s:].copy()
    n_h = np.arange(out.shape[0], dtype=float)
    n_v = np.arange(out.shape[1], dtype=float)
    w_h = np.ones_like(n_h)
    for i in range(1, r + 1):
        w_h *= n_h + i
    w_v = np.ones_like(n_v)
    for i in range(1, s + 1):
        w_v *= n_v + i
    out *= np.sqrt(w_h)[:, None] * np.sqrt(w_v)[None, :]
    return out


def normal_moment_dense(state: DenseFockState, p: int, q: int, r: int, s: int) -> complex:
    """Exact normal-ordered moment <a_H^dag^p a_V^dag^q a_H^r a_V^s> on the grid."""
    orders = (p, q, r, s)
    if any(o < 0 for o in orders):
        raise ValueError(f"moment orders must be non-negative, got {orders}")
    if sum(orders) > MAX_MOMENT_ORDER:
        raise ValueError(
            f"total moment order {sum(orders)} exceeds the supported {MAX_MOMENT_ORDER}"
        )
    ket = _lowered(state.amplitudes, r, s)
    bra = _lowered(state.amplitudes, p, q)
    rows = min(ket.shape[0], bra.shape[0])
    cols = min(ket.shape[1], bra.shape[1])
    return complex(np.sum(bra[:rows, :cols].conj() * ket[:rows, :cols]))


def joint_photon_pmf(state: DenseFockState) -> np.ndarray:
    """Probability grid over (n_H, n_V); sums to 1 - norm_deficit."""
    return np.abs(state.amplitudes) ** 2


def total_number_distribution(state: DenseFockState) -> np.ndarray:
    """Probability of each total photon number 0..2*cutoff."""
    pmf = joint_photon_pmf(state)
    dim = state.cutoff + 1
    out = np.zeros(2 * dim - 1)
    for total in range(2 * dim - 1):
        k = np.arange(max(0, total - dim + 1), min(total, dim - 1) + 1)
        out[total] = pmf[k, total - k].sum()
    return out
