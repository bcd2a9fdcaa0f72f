"""Split-step propagator for the high-temperature master equation.

The generator acting on rho(x, y) has three terms: the free kinetic
commutator, momentum damping at rate 2*gamma, and position-localizing
decay with coefficient D = 2 m gamma k T / hbar^2:

    drho/dt = (i hbar / 2m) (d^2/dx^2 - d^2/dy^2) rho
              - gamma (x - y) (d/dx - d/dy) rho
              - D (x - y)^2 rho

One step composes them symmetrically (half kinetic, half damping, full
localization, half damping, half kinetic), which is second order in dt.
Each sub-step is applied in the representation where it is exact:

* kinetic: multiply by exp(-i hbar dt (kx^2 - ky^2) / 2m) in the 2-D
  Fourier domain; the sign is fixed by requiring free packets to
  disperse.
* damping: in u = x - y, v = x + y the generator is -2 gamma u d/du, so
  the solution is rho(u, v) <- rho(u e^{-2 gamma dt}, v).  On the (x, y)
  grid this is factored into two one-axis affine resamples evaluated on
  the trigonometric interpolant (band-limited, no numerical diffusion);
  the diagonal u = 0 maps onto grid points and is preserved exactly.
* localization: pointwise multiply by exp(-D (x-y)^2 dt), exact and
  unconditionally stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy.signal import CZT

from .errors import ConfigurationError, TraceDriftError
from .grids import DensityGrid, SpatialGrid
from .timescales import PhysicalParams

MAX_STEP_PHASE = 0.25 * math.pi
TRACE_DRIFT_LIMIT = 1e-4


@dataclass(frozen=True)
class DecoherenceCoefficient:
    """Spatial decay coefficient D in the localization term, units 1/(m^2 s)."""

    d_value: float

    def __post_init__(self):
        if self.d_value < 0.0:
            raise ConfigurationError(
                f"decoherence coefficient must be nonnegative, got {self.d_value}")

    @classmethod
    def from_params(cls, params: PhysicalParams,
                    pi_variant: bool = False) -> "DecoherenceCoefficient":
        """D = 2 m gamma k T / hbar^2, which equals gamma / (2 lambda_dB^2).

        ``pi_variant`` substitutes pi (per unit time) for gamma, giving the
        alternative coefficient convention 2 m pi k T / hbar^2 for
        side-by-side comparison runs.
        """
        rate = math.pi if pi_variant else params.gamma
        d = 2.0 * params.mass * rate * params.boltzmann * params.temperature \
            / params.hbar ** 2
        return cls(d_value=d)


@dataclass
class EvolutionConfig:
    """Time-step plan with per-term toggles.

    ``sample_every`` must divide ``n_steps``; probes run at t = 0 and after
    every ``sample_every`` steps.  ``validate`` bounds the largest
    single-step phase (or decay exponent) over the enabled sub-steps by
    pi/4, which keeps the splitting error well below fitting tolerances.
    """

    dt: float
    n_steps: int
    enable_kinetic: bool = True
    enable_dissipation: bool = True
    enable_decoherence: bool = True
    sample_every: int = 1
    renormalize: bool = False
    coefficient_pi_variant: bool = False

    def validate(self, grid: SpatialGrid, params: PhysicalParams):
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigurationError(
                f"n_steps must be >= 1, got {self.n_steps}")
        if self.sample_every < 1 or self.n_steps % self.sample_every != 0:
            raise ConfigurationError(
                f"sample_every {self.sample_every} must divide "
                f"n_steps {self.n_steps}")
        for name, phase in self.step_phases(grid, params).items():
            if phase > MAX_STEP_PHASE + 1e-12:
                raise ConfigurationError(
                    f"dt {self.dt} too large: {name} single-step phase "
                    f"{phase:.3f} exceeds pi/4; reduce dt below "
                    f"{self.dt * MAX_STEP_PHASE / phase:.3e}")

    def step_phases(self, grid: SpatialGrid,
                    params: PhysicalParams) -> dict[str, float]:
        """Largest single-step phase magnitude for each enabled term.

        The u-dependent terms are capped at u = extent/2: separations
        beyond half the periodic domain are not representable, and states
        honoring the boundary-margin rule never reach them.
        """
        k_max = math.pi / grid.spacing
        u_max = 0.5 * grid.extent
        phases = {}
        if self.enable_kinetic:
            phases["kinetic"] = params.hbar * self.dt * k_max ** 2 \
                / (2.0 * params.mass)
        if self.enable_dissipation and params.gamma > 0.0:
            # farthest point moves by a * u_max per half-step resample
            a = 0.5 * (1.0 - math.exp(-params.gamma * self.dt))
            phases["dissipation"] = k_max * a * u_max
        if self.enable_decoherence:
            d = DecoherenceCoefficient.from_params(
                params, self.coefficient_pi_variant).d_value
            phases["decoherence"] = d * u_max ** 2 * self.dt
        return phases


class _AffineAxisResampler:
    """Band-limited evaluation of grid lines at x' = alpha * x + beta_line.

    The trigonometric interpolant of each line (row or column) is evaluated
    at affine-mapped points via a chirp-z transform; with 0 < alpha <= 1
    and |beta| <= (1 - alpha) * extent / 2 all target points stay inside
    the domain, so no periodic wrap-around is ever sampled.

    The top n/16 wavenumber bins are zeroed on each application.  Resolved
    states have no content there (their spectra decay far below machine
    precision first), but without the guard band the slightly non-normal
    resampling iteration slowly amplifies rounding noise born at the
    Nyquist edge.
    """

    def __init__(self, grid: SpatialGrid, alpha: float, betas: np.ndarray,
                 axis: int):
        n = grid.n_points
        k = grid.wavenumbers()
        off = betas + (1.0 - alpha) * 0.5 * grid.extent
        bins = np.fft.fftfreq(n, 1.0 / n)
        guard = (np.abs(bins) <= n // 2 - max(1, n // 16)).astype(float)
        if axis == 1:
            pre = np.exp(1j * np.multiply.outer(off, k)) * guard[None, :] / n
        else:
            pre = np.exp(1j * np.multiply.outer(k, off)) * guard[:, None] / n
        self.axis = axis
        self.pre = pre
        self.post = np.exp(-1j * math.pi * alpha * np.arange(n))
        if axis == 0:
            self.post = self.post[:, None]
        self.plan = CZT(n=n, m=n, w=np.exp(2j * math.pi * alpha / n), a=1.0)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.axis == 1:
            h = sfft.fft(values, axis=-1) * self.pre
            h = np.fft.fftshift(h, axes=-1)
            return self.plan(h, axis=-1) * self.post
        h = sfft.fft(values, axis=-2) * self.pre
        h = np.fft.fftshift(h, axes=-2)
        ht = np.ascontiguousarray(np.swapaxes(h, -1, -2))
        out = np.swapaxes(self.plan(ht, axis=-1), -1, -2)
        return out * self.post


class Evolver:
    """Precomputed propagators for one (grid, params, config) combination.

    Operates on complex arrays of shape (..., n, n); leading dimensions
    batch independent matrices (used by the measurement chain, which
    evolves four system-indexed blocks under the same superoperator).  All
    array operations are sequential numpy/scipy kernels with a fixed
    reduction order, so repeated runs are bit-identical.
    """

    def __init__(self, grid: SpatialGrid, params: PhysicalParams,
                 config: EvolutionConfig):
        config.validate(grid, params)
        self.grid = grid
        self.params = params
        self.config = config
        self.coeff = DecoherenceCoefficient.from_params(
            params, config.coefficient_pi_variant)
        dt = config.dt
        n = grid.n_points
        x = grid.positions()
        k = grid.wavenumbers()
        # 2-D spectral guard matching the resampler's per-axis band; the
        # dissipation shear couples the axes, so corner noise (both axes
        # near Nyquist) must be wiped once per step or it slowly compounds.
        bins = np.fft.fftfreq(n, 1.0 / n)
        g1 = (np.abs(bins) <= n // 2 - max(1, n // 16)).astype(float)
        guard2d = np.multiply.outer(g1, g1)
        self._dissipate = config.enable_dissipation and params.gamma > 0.0
        if config.enable_kinetic:
            w = params.hbar * np.subtract.outer(k * k, k * k) \
                / (2.0 * params.mass)
            self._kin_half = np.exp(-0.5j * dt * w)
            if self._dissipate:
                self._kin_half = self._kin_half * guard2d
            self._kin_full = self._kin_half * self._kin_half
        if config.enable_decoherence:
            u_sq = np.subtract.outer(x, x) ** 2
            self._dec_full = np.exp(-self.coeff.d_value * u_sq * dt)
        # band projection for dissipative runs without the kinetic term
        self._project = guard2d if (self._dissipate
                                    and not config.enable_kinetic) else None
        if self._dissipate:
            c = math.exp(-params.gamma * dt)  # u-contraction per half-step
            a = 0.5 * (1.0 - c)
            b = a / (1.0 - a)
            self._map_y = _AffineAxisResampler(grid, 1.0 - b, b * x, axis=1)
            self._map_x = _AffineAxisResampler(grid, 1.0 - a, a * x, axis=0)

    # -- sub-steps ---------------------------------------------------------

    def kinetic(self, values: np.ndarray, half: bool) -> np.ndarray:
        phase = self._kin_half if half else self._kin_full
        spec = sfft.fft2(values, axes=(-2, -1))
        spec *= phase
        return sfft.ifft2(spec, axes=(-2, -1), overwrite_x=True)

    def dissipation_half(self, values: np.ndarray) -> np.ndarray:
        # The exact flow leaves rho(x, x) invariant (the contraction is a
        # fixed point on the diagonal), and the resampler evaluates those
        # entries at exact grid nodes; writing the input diagonal back
        # removes the last rounding bias of the two chirp transforms.
        diag = np.diagonal(values, axis1=-2, axis2=-1).copy()
        out = self._map_x(self._map_y(values))
        idx = np.arange(values.shape[-1])
        out[..., idx, idx] = diag
        return out

    def decoherence(self, values: np.ndarray) -> np.ndarray:
        return values * self._dec_full

    def _band_project(self, values: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(values, axes=(-2, -1))
        spec *= self._project
        return sfft.ifft2(spec, axes=(-2, -1), overwrite_x=True)

    def step(self, values: np.ndarray) -> np.ndarray:
        """One symmetric step: K/2, G/2, C, G/2, K/2."""
        c = self.config
        if c.enable_kinetic:
            values = self.kinetic(values, half=True)
        if self._dissipate:
            values = self.dissipation_half(values)
        if c.enable_decoherence:
            values = self.decoherence(values)
        if self._dissipate:
            values = self.dissipation_half(values)
        if c.enable_kinetic:
            values = self.kinetic(values, half=True)
        if self._project is not None:
            values = self._band_project(values)
        return values

    def _span(self, values: np.ndarray, m: int) -> np.ndarray:
        """m consecutive steps with adjacent half kinetic kicks fused."""
        c = self.config
        if c.enable_kinetic:
            values = self.kinetic(values, half=True)
        for i in range(m):
            if self._dissipate:
                values = self.dissipation_half(values)
            if c.enable_decoherence:
                values = self.decoherence(values)
            if self._dissipate:
                values = self.dissipation_half(values)
            if self._project is not None:
                values = self._band_project(values)
            if c.enable_kinetic and i + 1 < m:
                values = self.kinetic(values, half=False)
        if c.enable_kinetic:
            values = self.kinetic(values, half=True)
        return values

    def run(self, values: np.ndarray, trace_fn, on_sample):
        """Run n_steps, sampling at t = 0 and after every sample span.

        ``trace_fn(values)`` supplies the conserved trace for drift
        monitoring; ``on_sample(time, values, trace)`` records probes.
        Returns (final values, renormalization log).
        """
        cfg = self.config
        renorm_log = []
        tr = trace_fn(values)
        on_sample(0.0, values, tr)
        tr_prev = tr
        n_spans = cfg.n_steps // cfg.sample_every
        for span in range(1, n_spans + 1):
            values = self._span(values, cfg.sample_every)
            t = span * cfg.sample_every * cfg.dt
            tr = trace_fn(values)
            if abs(tr - tr_prev) > TRACE_DRIFT_LIMIT:
                raise TraceDriftError(
                    f"trace drifted by {abs(tr - tr_prev):.3e} between "
                    f"samples at t = {t:.6g}; dt too large or state "
                    "touching the boundary")
            if cfg.renormalize:
                renorm_log.append((t, abs(1.0 - tr)))
                values = values / tr
                tr = 1.0
            on_sample(t, values, tr)
            tr_prev = tr
        return values, renorm_log


# -- single-application operations on DensityGrid ---------------------------

def kinetic_step(rho: DensityGrid, params: PhysicalParams,
                 dt: float) -> DensityGrid:
    """Free-particle commutator step over dt (exact, trace preserving)."""
    if dt == 0.0:
        return DensityGrid(rho.grid, rho.values.copy(), rho.cat_info)
    k = rho.grid.wavenumbers()
    w = params.hbar * np.subtract.outer(k * k, k * k) / (2.0 * params.mass)
    spec = sfft.fft2(rho.values) * np.exp(-1j * dt * w)
    return DensityGrid(rho.grid, sfft.ifft2(spec, overwrite_x=True),
                       rho.cat_info)


def dissipation_step(rho: DensityGrid, params: PhysicalParams,
                     dt: float) -> DensityGrid:
    """Momentum-damping step rho(u, v) <- rho(u e^{-2 gamma dt}, v)."""
    if dt == 0.0 or params.gamma == 0.0:
        return DensityGrid(rho.grid, rho.values.copy(), rho.cat_info)
    x = rho.grid.positions()
    c = math.exp(-2.0 * params.gamma * dt)
    a = 0.5 * (1.0 - c)
    b = a / (1.0 - a)
    map_y = _AffineAxisResampler(rho.grid, 1.0 - b, b * x, axis=1)
    map_x = _AffineAxisResampler(rho.grid, 1.0 - a, a * x, axis=0)
    out = map_x(map_y(rho.values))
    idx = np.arange(rho.grid.n_points)
    out[idx, idx] = np.diagonal(rho.values)  # exact fixed line u = 0
    return DensityGrid(rho.grid, out, rho.cat_info)


def decoherence_step(rho: DensityGrid, coeff: DecoherenceCoefficient,
                     dt: float) -> DensityGrid:
    """Localization step rho <- rho * exp(-D (x-y)^2 dt); diagonal unchanged."""
    x = rho.grid.positions()
    decay = np.exp(-coeff.d_value * np.subtract.outer(x, x) ** 2 * dt)
    return DensityGrid(rho.grid, rho.values * decay, rho.cat_info)


def pure_decoherence_exact(rho0: DensityGrid, coeff: DecoherenceCoefficient,
                           t: float) -> DensityGrid:
    """Closed-form solution when only the localization term acts.

    rho(x, y, t) = rho(x, y, 0) exp(-D (x-y)^2 t): off-diagonal entries die
    while the diagonal is exactly constant, leaving a position mixture.
    """
    return decoherence_step(rho0, coeff, t)


def evolve(rho0: DensityGrid, params: PhysicalParams, config: EvolutionConfig,
           probes) -> "Trajectory":
    """Propagate rho0 and record scalar probes; returns the trajectory.

    ``probes`` is a sequence of (name, fn) pairs or Probe objects, each fn
    mapping a DensityGrid to a float.  The series ``trace`` is always
    recorded.  Raises TraceDriftError (partial trajectory attached) if the
    trace moves more than 1e-4 between samples.
    """
    from .observables import Trajectory

    probes = list(probes)
    names = [getattr(p, "name", None) or p[0] for p in probes]
    fns = [getattr(p, "fn", None) or p[1] for p in probes]
    if len(set(names)) != len(names) or "trace" in names:
        raise ConfigurationError(f"probe names must be unique, not 'trace': {names}")
    evolver = Evolver(rho0.grid, params, config)
    times, columns = [], {name: [] for name in [*names, "trace"]}

    def on_sample(t, values, tr):
        snapshot = DensityGrid(rho0.grid, values, rho0.cat_info)
        times.append(t)
        for name, fn in zip(names, fns):
            columns[name].append(float(fn(snapshot)))
        columns["trace"].append(tr)

    def make_traj(renorm_log, truncated=None):
        meta = {
            "dt": config.dt, "n_steps": config.n_steps,
            "sample_every": config.sample_every,
            "renormalize": config.renormalize,
            "renormalization_log": renorm_log,
        }
        if truncated:
            meta["truncated"] = truncated
        return Trajectory(times=np.array(times),
                          series={k: np.array(v) for k, v in columns.items()},
                          metadata=meta)

    try:
        _, renorm_log = evolver.run(rho0.values, _density_trace(rho0.grid),
                                    on_sample)
    except TraceDriftError as err:
        err.trajectory = make_traj([], truncated=str(err))
        raise
    return make_traj(renorm_log)


def _density_trace(grid: SpatialGrid):
    h = grid.spacing

    def trace_fn(values):
        return float(np.real(np.trace(values)) * h)

    return trace_fn


