"""Impulsive von Neumann coupling of a two-level system to the apparatus.

The measured operator has eigenvalues 0 and 1; the coupling translates the
free-particle apparatus by delta_x conditioned on the eigenvalue, after
which the bath monitors the apparatus position.  The joint state is four
apparatus-sized blocks rho_ss'(x, y) indexed by system eigenvalues, each
evolving independently under the same master equation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, DomainError, RegimeWarning, TraceDriftError
from .evolution import Evolver, EvolutionConfig
from .grids import DensityGrid, SpatialGrid, WavefunctionGrid
from .observables import Trajectory
from .states import incoherent_mixture, pure_density
from .timescales import PhysicalParams, thermal_de_broglie

BOUNDARY_BAND_CELLS = 4
BOUNDARY_LEAK_LIMIT = 1e-9


@dataclass(frozen=True)
class SystemState:
    """Two-level state written in the measured operator's eigenbasis."""

    p0_amplitude: complex
    p1_amplitude: complex

    def __post_init__(self):
        norm = abs(self.p0_amplitude) ** 2 + abs(self.p1_amplitude) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(f"system amplitudes have norm {norm}, not 1")

    @classmethod
    def equal_superposition(cls) -> "SystemState":
        r = 1.0 / math.sqrt(2.0)
        return cls(r, r)

    @classmethod
    def from_weight(cls, p1_weight: float, phase: float = 0.0) -> "SystemState":
        if not 0.0 <= p1_weight <= 1.0:
            raise DomainError(f"p1_weight must be in [0, 1], got {p1_weight}")
        return cls(math.sqrt(1.0 - p1_weight),
                   math.sqrt(p1_weight) * complex(math.cos(phase),
                                                  math.sin(phase)))


@dataclass
class JointState:
    """2x2 system-indexed blocks of apparatus density matrices."""

    grid: SpatialGrid
    blocks: np.ndarray  # shape (2, 2, n, n)

    def total_trace(self) -> float:
        h = self.grid.spacing
        return float((np.trace(self.blocks[0, 0]).real
                      + np.trace(self.blocks[1, 1]).real) * h)

    def outcome_weights(self) -> tuple[float, float]:
        h = self.grid.spacing
        return (float(np.trace(self.blocks[0, 0]).real * h),
                float(np.trace(self.blocks[1, 1]).real * h))

    def cross_norm(self) -> float:
        """Integrated |rho_01|: the surviving system-apparatus coherence."""
        h = self.grid.spacing
        return float(np.sum(np.abs(self.blocks[0, 1])) * h * h)

    def cross_hs_norm(self) -> float:
        """Hilbert-Schmidt norm of rho_01 (invariant under unitary steps)."""
        h = self.grid.spacing
        return float(np.sqrt(np.sum(np.abs(self.blocks[0, 1]) ** 2)) * h)

    def coherence_distance(self) -> float:
        """Integrated absolute difference from the decohered block-diagonal
        mixture with the same branch blocks (both cross blocks counted)."""
        h = self.grid.spacing
        return float((np.sum(np.abs(self.blocks[0, 1]))
                      + np.sum(np.abs(self.blocks[1, 0]))) * h * h)

    def validate(self):
        n = self.grid.n_points
        if self.blocks.shape != (2, 2, n, n):
            raise ConfigurationError("joint state blocks do not match grid")
        for s in (0, 1):
            for sp in (0, 1):
                defect = np.max(np.abs(
                    self.blocks[s, sp] - self.blocks[sp, s].conj().T))
                if defect > 1e-10:
                    raise ConfigurationError(
                        f"joint state violates Hermiticity in block "
                        f"({s},{sp}): defect {defect:.3e}")
        tr = self.total_trace()
        if abs(tr - 1.0) > 1e-8:
            raise ConfigurationError(f"joint state trace {tr} != 1")


def _shifted(values: np.ndarray, grid: SpatialGrid, dx_x: float,
             dx_y: float) -> np.ndarray:
    """Spectral translation rho(x, y) -> rho(x - dx_x, y - dx_y)."""
    k = grid.wavenumbers()
    out = values
    if dx_x != 0.0:
        out = sfft.ifft(sfft.fft(out, axis=0)
                        * np.exp(-1j * k * dx_x)[:, None], axis=0)
    if dx_y != 0.0:
        out = sfft.ifft(sfft.fft(out, axis=1)
                        * np.exp(-1j * k * dx_y)[None, :], axis=1)
    return out


def _boundary_leak(diag: np.ndarray) -> float:
    band = BOUNDARY_BAND_CELLS
    return float(np.sum(np.abs(diag[:band])) + np.sum(np.abs(diag[-band:])))


def impulsive_coupling(apparatus: DensityGrid | WavefunctionGrid,
                       system: SystemState, delta_x: float) -> JointState:
    """Entangle the apparatus with the system by a conditional translation.

    The eigenvalue-1 component of the system rigidly shifts the apparatus
    by delta_x (spectral shift); block (s, s') of the result is
    a_s conj(a_s') times the apparatus matrix with its x argument shifted
    by s * delta_x and its y argument by s' * delta_x.
    """
    if isinstance(apparatus, WavefunctionGrid):
        apparatus = pure_density(apparatus)
    grid = apparatus.grid
    amps = (system.p0_amplitude, system.p1_amplitude)
    n = grid.n_points
    blocks = np.zeros((2, 2, n, n), dtype=complex)
    for s in (0, 1):
        for sp in (0, 1):
            w = amps[s] * np.conj(amps[sp])
            if w == 0.0:
                continue
            blocks[s, sp] = w * _shifted(apparatus.values, grid,
                                         s * delta_x, sp * delta_x)
    state = JointState(grid=grid, blocks=blocks)
    if amps[1] != 0:
        shifted_diag = np.real(np.diagonal(blocks[1, 1])) / abs(amps[1]) ** 2
        leak = _boundary_leak(shifted_diag) * grid.spacing
        if leak > BOUNDARY_LEAK_LIMIT:
            raise ConfigurationError(
                f"shift by {delta_x} pushes apparatus support into the "
                f"boundary band (leak {leak:.3e}); enlarge the grid or "
                "reduce delta_x")
    return state


def evolve_joint(state: JointState, params: PhysicalParams,
                 config: EvolutionConfig) -> tuple[JointState, Trajectory]:
    """Evolve all four blocks under the apparatus master equation.

    The system Hamiltonian is zero after the impulse, so the bath acts on
    each block independently and the outcome weights are conserved.
    Recorded series: cross01_norm (integrated |rho_01|), cross01_hs (its
    Hilbert-Schmidt norm), diag0_trace, diag1_trace, mixture_distance
    (integrated absolute size of both cross blocks), and trace.
    """
    evolver = Evolver(state.grid, params, config)
    h = state.grid.spacing
    stack = state.blocks.reshape(4, state.grid.n_points, state.grid.n_points)

    def trace_fn(values):
        return float((np.trace(values[0]).real + np.trace(values[3]).real) * h)

    times, cols = [], {"cross01_norm": [], "cross01_hs": [],
                       "diag0_trace": [], "diag1_trace": [],
                       "mixture_distance": [], "trace": []}

    def on_sample(t, values, tr):
        times.append(t)
        cols["cross01_norm"].append(float(np.sum(np.abs(values[1])) * h * h))
        cols["cross01_hs"].append(
            float(np.sqrt(np.sum(np.abs(values[1]) ** 2)) * h))
        cols["diag0_trace"].append(float(np.trace(values[0]).real * h))
        cols["diag1_trace"].append(float(np.trace(values[3]).real * h))
        cols["mixture_distance"].append(
            float((np.sum(np.abs(values[1])) + np.sum(np.abs(values[2])))
                  * h * h))
        cols["trace"].append(tr)

    def make_traj(truncated=None):
        meta = {"dt": config.dt, "n_steps": config.n_steps,
                "sample_every": config.sample_every}
        if truncated:
            meta["truncated"] = truncated
        return Trajectory(times=np.array(times),
                          series={k: np.array(v) for k, v in cols.items()},
                          metadata=meta)

    try:
        final, _ = evolver.run(stack, trace_fn, on_sample)
    except TraceDriftError as err:
        err.trajectory = make_traj(truncated=str(err))
        raise
    out = JointState(grid=state.grid, blocks=final.reshape(2, 2,
                                                           state.grid.n_points,
                                                           state.grid.n_points))
    return out, make_traj()


def prepared_apparatus(grid: SpatialGrid, sigma: float,
                       params: PhysicalParams,
                       delta_x: float | None = None) -> DensityGrid:
    """Apparatus state after a position measurement of accuracy sigma.

    Returns the incoherent mixture of thermal-wavelength-sized wavelets
    spread over sigma.  Warns when the parameters leave the regime
    delta_x >> sigma >> lambda the preparation picture assumes.
    """
    lam = thermal_de_broglie(params)
    if sigma < 3.0 * lam:
        warnings.warn(
            f"sigma = {sigma} is not >> thermal wavelength {lam:.3g}; "
            "the wavelet-mixture picture is marginal here", RegimeWarning,
            stacklevel=2)
    if delta_x is not None and delta_x < 3.0 * sigma:
        warnings.warn(
            f"delta_x = {delta_x} is not >> sigma = {sigma}; pointer "
            "readout may not resolve the shift", RegimeWarning, stacklevel=2)
    return incoherent_mixture(grid, sigma, lam)
