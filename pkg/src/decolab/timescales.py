"""Closed-form coherence-length and timescale formulas.

Everything here is a pure function of scalar inputs; this module is the
analytic ground truth that the grid simulator is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# SI defaults (2019 redefinition values; h and k are exact).
HBAR_SI = 6.62607015e-34 / (2.0 * math.pi)  # J s
BOLTZMANN_SI = 1.380649e-23                 # J / K


@dataclass(frozen=True)
class PhysicalParams:
    """Particle mass, bath coupling rate, temperature, and constants.

    ``hbar`` and ``boltzmann`` default to SI values but are ordinary
    fields: classical-limit sweeps rescale ``hbar`` freely.  ``gamma`` is
    the momentum relaxation rate constant; ``gamma = 0`` is the closed
    (bath-free) system.
    """

    mass: float
    gamma: float
    temperature: float
    hbar: float = HBAR_SI
    boltzmann: float = BOLTZMANN_SI

    def __post_init__(self):
        if not self.mass > 0.0:
            raise DomainError(f"mass must be positive, got {self.mass}")
        if self.gamma < 0.0:
            raise DomainError(f"gamma must be nonnegative, got {self.gamma}")
        if not self.temperature > 0.0:
            raise DomainError(
                f"temperature must be positive, got {self.temperature}")
        if not self.hbar > 0.0:
            raise DomainError(f"hbar must be positive, got {self.hbar}")
        if not self.boltzmann > 0.0:
            raise DomainError(
                f"boltzmann must be positive, got {self.boltzmann}")

    @property
    def viscosity(self) -> float:
        """Friction coefficient eta = 2 m gamma."""
        return 2.0 * self.mass * self.gamma


@dataclass(frozen=True)
class TimescalePair:
    """A relaxation timescale tau and a decorrelation timescale theta."""

    tau: float
    theta: float

    def __post_init__(self):
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not self.theta > 0.0:
            raise DomainError(f"theta must be positive, got {self.theta}")
        if not math.isfinite(self.tau / self.theta):
            raise DomainError("tau/theta must be finite")

    @property
    def ratio(self) -> float:
        """tau / theta."""
        return self.tau / self.theta


def thermal_de_broglie(params: PhysicalParams) -> float:
    """Thermal coherence length hbar / sqrt(4 m k T).

    This is the convention used throughout the package; see
    :func:`popular_thermal_wavelength` for the textbook variant.
    """
    return params.hbar / math.sqrt(
        4.0 * params.mass * params.boltzmann * params.temperature)


def popular_thermal_wavelength(params: PhysicalParams) -> float:
    """Textbook thermal wavelength lambda_T with lambda_dB^2 = (2/pi) lambda_T^2."""
    return thermal_de_broglie(params) * math.sqrt(math.pi / 2.0)


def decoherence_time(tau: float, delta_x: float, params: PhysicalParams) -> float:
    """Coherence lifetime tau * (lambda_dB / delta_x)^2 for separation delta_x.

    ``delta_x = 0`` is rejected: an infinite coherence time is not
    representable and callers must special-case coincident branches.
    """
    if not tau > 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    if not delta_x > 0.0:
        raise DomainError(f"delta_x must be positive, got {delta_x}")
    lam = thermal_de_broglie(params)
    return tau * (lam / delta_x) ** 2


def timescale_ratio(delta_x: float, delta: float) -> float:
    """Rate ratio (delta_x / delta)^2; pass delta = lambda_dB for the headline form."""
    if not delta > 0.0:
        raise DomainError(f"delta must be positive, got {delta}")
    return (delta_x / delta) ** 2


@dataclass(frozen=True)
class HbarSweepRow:
    hbar: float
    lambda_db: float
    theta: float
    theta_over_tau: float


def classical_limit_sweep(params: PhysicalParams, hbar_values: list[float],
                          delta_x: float, tau: float) -> list[HbarSweepRow]:
    """Tabulate lambda_dB and theta as hbar is swept toward zero.

    ``hbar_values`` must be strictly positive and sorted descending; theta
    scales as hbar^2, so theta/tau shrinks monotonically down the table.
    """
    if len(hbar_values) == 0:
        raise DomainError("hbar_values must be non-empty")
    if any(not h > 0.0 for h in hbar_values):
        raise DomainError("hbar_values must be strictly positive")
    if any(b >= a for a, b in zip(hbar_values, hbar_values[1:])):
        raise DomainError("hbar_values must be sorted strictly descending")
    rows = []
    for hbar in hbar_values:
        p = PhysicalParams(mass=params.mass, gamma=params.gamma,
                           temperature=params.temperature, hbar=hbar,
                           boltzmann=params.boltzmann)
        lam = thermal_de_broglie(p)
        theta = decoherence_time(tau, delta_x, p)
        rows.append(HbarSweepRow(hbar, lam, theta, theta / tau))
    return rows
