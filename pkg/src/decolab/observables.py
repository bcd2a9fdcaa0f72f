"""Scalar probes over density matrices and rate extraction from trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import (ConfigurationError, DegenerateStateError, DomainError,
                     RunTooShortError)
from .grids import DensityGrid
from .evolution import DecoherenceCoefficient, EvolutionConfig, evolve
from .timescales import PhysicalParams

R_SQUARED_CONFIDENT = 0.98
COHERENCE_FIT_WINDOW = (0.2, 0.9)


@dataclass
class Trajectory:
    """Time series of scalar observables sampled during one evolution."""

    times: np.ndarray
    series: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ConfigurationError("trajectory times must strictly increase")
        for name, col in self.series.items():
            if len(col) != len(self.times):
                raise ConfigurationError(
                    f"series {name} length {len(col)} != {len(self.times)}")

    def column(self, name: str) -> np.ndarray:
        if name not in self.series:
            raise DomainError(f"no series named {name!r}; have "
                              f"{sorted(self.series)}")
        return self.series[name]

    def to_csv(self, path: str | Path, header_comment: str | None = None,
               truncated: str | None = None):
        names = sorted(self.series)
        with open(path, "w", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(",".join(["time_s", *names]) + "\n")
            for i, t in enumerate(self.times):
                row = [f"{t:.16e}"] + [f"{self.series[n][i]:.16e}"
                                       for n in names]
                fh.write(",".join(row) + "\n")
            if truncated:
                fh.write(f"# truncated: {truncated}\n")


@dataclass(frozen=True)
class Probe:
    name: str
    fn: object

    def __call__(self, rho: DensityGrid) -> float:
        return self.fn(rho)


@dataclass(frozen=True)
class RateFit:
    """Least-squares exponential decay fit over a time window."""

    rate: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    low_confidence: bool = False


def coherence_peak(rho: DensityGrid, delta_x: float) -> float:
    """Normalized off-diagonal magnitude between branches delta_x apart.

    Evaluates |rho(x, -x)| / sqrt(rho(x, x) rho(-x, -x)) at the grid point
    x nearest delta_x / 2.  Equals 1 for any pure state and decays to 0 as
    the branches decohere; reading at the fixed branch separation keeps
    the pure-localization decay exactly exp(-D delta_x^2 t).
    """
    if not delta_x > 0.0:
        raise DomainError(f"delta_x must be positive, got {delta_x}")
    i = rho.grid.index_of(0.5 * delta_x)
    j = rho.grid.index_of(-0.5 * delta_x)
    d_hi = float(rho.values[i, i].real)
    d_lo = float(rho.values[j, j].real)
    if d_hi < 1e-300 or d_lo < 1e-300:
        raise DegenerateStateError(
            f"diagonal density underflows at +-{0.5 * delta_x}: "
            f"{d_hi:.3e}, {d_lo:.3e}")
    return float(np.abs(rho.values[i, j]) / math.sqrt(d_hi * d_lo))


def momentum_expectation(rho: DensityGrid, params: PhysicalParams) -> float:
    """<p> from the spectral x-derivative of rho along the diagonal.

    The imaginary part of the underlying sum is a Hermiticity defect and is
    discarded; see tests for the diagnostic bound.
    """
    k = rho.grid.wavenumbers()
    drho = sfft.ifft(1j * k[:, None] * sfft.fft(rho.values, axis=0), axis=0)
    total = -1j * params.hbar * np.sum(np.diagonal(drho)) * rho.grid.spacing
    return float(total.real)


def position_distribution(rho: DensityGrid) -> np.ndarray:
    """Diagonal rho(x, x): the probability density over position."""
    return rho.diagonal()


def position_moments(rho: DensityGrid) -> tuple[float, float]:
    """Mean and variance of the position distribution."""
    x = rho.grid.positions()
    d = rho.diagonal()
    h = rho.grid.spacing
    norm = float(np.sum(d) * h)
    mean = float(np.sum(x * d) * h / norm)
    var = float(np.sum((x - mean) ** 2 * d) * h / norm)
    return mean, var


def purity(rho: DensityGrid) -> float:
    """Tr(rho^2) on the grid: spacing^2 * sum |rho|^2; 1 for pure states."""
    h = rho.grid.spacing
    return float(np.sum(np.abs(rho.values) ** 2) * h * h)


def standard_probes(params: PhysicalParams,
                    delta_x: float | None = None) -> list[Probe]:
    """Purity, momentum, position variance, and (for cats) coherence."""
    probes = [
        Probe("purity", purity),
        Probe("p_expect", lambda rho: momentum_expectation(rho, params)),
        Probe("x_variance", lambda rho: position_moments(rho)[1]),
    ]
    if delta_x is not None:
        probes.insert(0, Probe("coherence",
                               lambda rho: coherence_peak(rho, delta_x)))
    return probes


def fit_exponential_rate(traj: Trajectory, series_name: str,
                         window: tuple[float, float]) -> RateFit:
    """Fit s(t) ~ intercept * exp(-rate * t) by least squares on ln s.

    Requires at least 8 strictly positive samples inside the window.  A fit
    with r^2 < 0.98 is returned with ``low_confidence`` set.
    """
    t_lo, t_hi = window
    times = traj.times
    values = traj.column(series_name)
    sel = (times >= t_lo) & (times <= t_hi)
    t_w, s_w = times[sel], values[sel]
    if len(t_w) < 8:
        raise DomainError(
            f"need >= 8 samples in window [{t_lo}, {t_hi}], got {len(t_w)}")
    if np.any(s_w <= 0.0):
        raise DomainError(
            f"series {series_name} must be positive in the fit window")
    log_s = np.log(s_w)
    slope, b = np.polyfit(t_w, log_s, 1)
    fitted = slope * t_w + b
    ss_res = float(np.sum((log_s - fitted) ** 2))
    ss_tot = float(np.sum((log_s - np.mean(log_s)) ** 2))
    r_sq = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(rate=float(-slope), intercept=float(np.exp(b)),
                   r_squared=r_sq, window=(float(t_w[0]), float(t_w[-1])),
                   low_confidence=r_sq < R_SQUARED_CONFIDENT)


@dataclass(frozen=True)
class MeasuredTimescales:
    """Result of one coherence-decay measurement run."""

    theta_fit: RateFit
    theta: float
    tau_operational: float
    ratio: float
    trajectory: Trajectory


def measure_timescales(rho0: DensityGrid, params: PhysicalParams,
                       config: EvolutionConfig) -> MeasuredTimescales:
    """Fit the coherence decay time of a two-branch state and compare to tau.

    theta^-1 is the fitted decay rate of the coherence peak over the window
    where it lies in [0.2, 0.9]; tau is fixed operationally as 1 / (2 gamma),
    the momentum-damping e-folding time of the damping term.  The returned
    ratio is tau / theta.
    """
    if rho0.cat_info is None:
        raise DomainError(
            "measure_timescales needs a cat state with recorded separation")
    if not params.gamma > 0.0:
        raise DomainError("tau = 1/(2 gamma) undefined for gamma = 0")
    delta_x = rho0.cat_info.delta_x
    traj = evolve(rho0, params, config,
                  probes=[Probe("coherence",
                                lambda rho: coherence_peak(rho, delta_x))])
    c = traj.column("coherence")
    lo, hi = COHERENCE_FIT_WINDOW
    below_hi = np.nonzero(c <= hi)[0]
    d_coeff = DecoherenceCoefficient.from_params(
        params, config.coefficient_pi_variant).d_value
    suggestion = _suggest_steps(d_coeff, delta_x, config)
    if len(below_hi) == 0:
        raise RunTooShortError(
            f"coherence never dropped below {hi} in {config.n_steps} steps; "
            f"try n_steps >= {suggestion}", suggested_n_steps=suggestion)
    start = below_hi[0]
    below_lo = np.nonzero(c < lo)[0]
    stop = below_lo[0] if len(below_lo) else len(c) - 1
    if stop - start + 1 < 8:
        raise RunTooShortError(
            f"only {stop - start + 1} samples with coherence in "
            f"[{lo}, {hi}]; try n_steps >= {suggestion}",
            suggested_n_steps=suggestion)
    fit = fit_exponential_rate(
        traj, "coherence", (float(traj.times[start]), float(traj.times[stop])))
    theta = 1.0 / fit.rate
    tau_op = 1.0 / (2.0 * params.gamma)
    return MeasuredTimescales(theta_fit=fit, theta=theta,
                              tau_operational=tau_op, ratio=tau_op / theta,
                              trajectory=traj)


def _suggest_steps(d_coeff: float, delta_x: float,
                   config: EvolutionConfig) -> int:
    if d_coeff <= 0.0 or delta_x <= 0.0:
        return 2 * config.n_steps
    t_needed = 2.5 / (d_coeff * delta_x ** 2)
    spans = math.ceil(t_needed / (config.dt * config.sample_every))
    return max(config.n_steps * 2, spans * config.sample_every)
