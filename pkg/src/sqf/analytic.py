"""Closed-form fringe, visibility and rate laws for the amplifier output.

These are the reference curves the numerical backends are checked against
and the model functions used by the calibration fits.  All fringes are
functions of the analyzer phase phi at mean photon number n_bar per
polarization mode; vacuum-seeded fringes oscillate in 2*phi (half-wavelength
period).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "FringeKind",
    "RateParams",
    "mean_photons",
    "gain_from_pump",
    "fringe_closed_form",
    "visibility_closed_form",
    "excitation_rate",
]


@dataclass(frozen=True)
class FringeKind:
    """Selector for one fringe family.

    order: number of detected photons (2 or 3).
    combo: 'same' for one detector arm, 'cross' for the two-arm coincidence.
    decohered_basis: 'none', or 'HV'/'PM' for full temporal decoherence
    introduced between those polarization components.
    """

    order: int = 2
    combo: str = "same"
    decohered_basis: str = "none"

    def __post_init__(self) -> None:
        if self.order not in (2, 3):
            raise ValueError(f"order must be 2 or 3, got {self.order}")
        if self.combo not in ("same", "cross"):
            raise ValueError(f"combo must be 'same' or 'cross', got {self.combo!r}")
        if self.decohered_basis not in ("none", "HV", "PM"):
            raise ValueError(f"unknown decohered_basis {self.decohered_basis!r}")
        if self.order == 3 and self.combo != "same":
            raise ValueError("three-photon fringes are same-detector only")


@dataclass(frozen=True)
class RateParams:
    """Free scale factors of the empirical rate and visibility laws."""

    sigma2: float = 1.0
    sigma3: float = 1.0
    v_max: float = 1.0
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.sigma2 <= 0.0 or self.sigma3 <= 0.0:
            raise ValueError("cross sections must be positive")
        if not 0.0 < self.v_max <= 1.0:
            raise ValueError(f"v_max must lie in (0, 1], got {self.v_max}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def mean_photons(g: float) -> float:
    """Mean photons per polarization mode, sinh^2 g."""
    if not math.isfinite(g) or g < 0.0:
        raise ValueError(f"gain must be finite and non-negative, got {g}")
    return math.sinh(g) ** 2


def gain_from_pump(p_uv: float, kappa: float) -> float:
    """Gain grows with the square root of the pump power: g = kappa * sqrt(P)."""
    if p_uv < 0.0:
        raise ValueError(f"pump power must be non-negative, got {p_uv}")
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    return kappa * math.sqrt(p_uv)


def _check_n_bar(n_bar: float) -> None:
    if not math.isfinite(n_bar) or n_bar < 0.0:
        raise ValueError(f"n_bar must be finite and non-negative, got {n_bar}")


def fringe_closed_form(kind: FringeKind, phi: float, n_bar: float) -> float:
    """Closed-form coincidence fringe value for the given kind."""
    _check_n_bar(n_bar)
    if kind.decohered_basis == "none":
        if kind.order == 2 and kind.combo == "cross":
            return n_bar**2 + 0.5 * (n_bar**2 + n_bar) * (1.0 + math.cos(2.0 * phi))
        if kind.order == 2 and kind.combo == "same":
            return 2.0 * n_bar**2 + 0.5 * (n_bar**2 + n_bar) * (1.0 - math.cos(2.0 * phi))
        if kind.order == 3:
            return 6.0 * n_bar**3 + 9.0 * n_bar**2 * (n_bar + 1.0) * math.sin(phi) ** 2
    if kind.order == 2 and kind.combo == "same":
        if kind.decohered_basis == "HV":
            return 2.0 * n_bar**2 + 0.5 * n_bar * math.sin(phi) ** 2
        if kind.decohered_basis == "PM":
            return 2.0 * n_bar**2 + 0.5 * n_bar
    raise ValueError(f"no closed form for {kind}")


def visibility_closed_form(kind: FringeKind, n_bar: float) -> float:
    """Fringe visibility (max-min)/(max+min) over one period for the given kind."""
    _check_n_bar(n_bar)
    if kind.decohered_basis == "none":
        if kind.order == 2 and kind.combo == "same":
            return (n_bar + 1.0) / (5.0 * n_bar + 1.0)
        if kind.order == 2 and kind.combo == "cross":
            return (n_bar + 1.0) / (3.0 * n_bar + 1.0)
        if kind.order == 3:
            return (3.0 * n_bar + 3.0) / (7.0 * n_bar + 3.0)
    if kind == FringeKind(2, "same", "HV"):
        return 1.0 / (8.0 * n_bar + 1.0)
    raise ValueError(f"no closed-form visibility for {kind}")


def excitation_rate(order: int, n_bar: float, params: RateParams) -> float:
    """Phase-averaged multi-photon excitation rate law.

    order 2: 2 sigma2 (n_bar + 5 n_bar^2); order 3: 12 sigma3 (7 n_bar^3 + 3 n_bar^2).
    These equal 4 sigma2 resp. 8 sigma3 times the phase average of the matching
    same-detector fringe.
    """
    _check_n_bar(n_bar)
    if order == 2:
        return 2.0 * params.sigma2 * (n_bar + 5.0 * n_bar**2)
    if order == 3:
        return 12.0 * params.sigma3 * (7.0 * n_bar**3 + 3.0 * n_bar**2)
    raise ValueError(f"unsupported rate order {order}")
