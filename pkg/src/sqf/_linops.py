"""Small shared mode-map constructions and checks.

All two-mode maps here follow the annihilation-operator convention: a map
``u`` sends the mode operators to ``c_i = sum_j u[i, j] a_j``.
"""

from __future__ import annotations

import numpy as np

#: H/V -> +/- basis change, self-inverse.
HV_TO_PM = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def require_unitary(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Return ``u`` as a complex array, raising ValueError if it is not unitary."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    defect = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if not defect < tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e} > {tol:.1e})")
    return u


def detector_mode_map(phi: float) -> np.ndarray:
    """Phase shift ``phi`` between the +/- polarizations followed by an H/V PBS.

    The composition acts on (a_H, a_V) and yields the two detector-arm
    operators: c_1 = e^{-i phi/2} (cos(phi/2) a_H + i sin(phi/2) a_V) and the
    matching c_2 with the roles of H and V swapped.
    """
    phase = np.diag([1.0, np.exp(-1j * phi)])
    return HV_TO_PM @ phase @ HV_TO_PM


def temporal_split_map(overlap: float) -> np.ndarray:
    """Rotation coupling a mode to a fresh temporal-mode ancilla.

    ``overlap`` is the squared amplitude remaining in the original temporal
    mode; 1 leaves the ancilla decoupled, 0 moves the field entirely.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    t = np.sqrt(overlap)
    r = np.sqrt(1.0 - overlap)
    return np.array([[t, r], [-r, t]])
