"""Constructors for wavepackets, superpositions, and incoherent mixtures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StateDiagnosticError
from .grids import CatInfo, DensityGrid, SpatialGrid, WavefunctionGrid

# Constructors reject states whose 5-sigma support touches the boundary;
# the spectral evolution steps impose periodic wrap-around there.
SUPPORT_SIGMAS = 5.0


def _check_margins(grid: SpatialGrid, center: float, halfwidth: float):
    if halfwidth < 2.0 * grid.spacing:
        raise ConfigurationError(
            f"halfwidth {halfwidth} unresolvable: need >= 2 * spacing "
            f"= {2.0 * grid.spacing}")
    reach = abs(center) + SUPPORT_SIGMAS * halfwidth
    if reach > 0.5 * grid.extent:
        raise ConfigurationError(
            f"packet at center {center} with halfwidth {halfwidth} reaches "
            f"{reach}, beyond the boundary margin extent/2 = {0.5 * grid.extent}")


def _raw_gaussian(grid: SpatialGrid, center: float, halfwidth: float,
                  momentum: float, hbar: float) -> np.ndarray:
    x = grid.positions()
    psi = (2.0 * np.pi * halfwidth ** 2) ** -0.25 \
        * np.exp(-((x - center) ** 2) / (4.0 * halfwidth ** 2))
    if momentum != 0.0:
        psi = psi * np.exp(1j * momentum * x / hbar)
    return psi.astype(complex)


def _normalized(grid: SpatialGrid, amplitudes: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(np.abs(amplitudes) ** 2) * grid.spacing)
    return amplitudes / norm


def gaussian_packet(grid: SpatialGrid, center: float, halfwidth: float,
                    momentum: float = 0.0, hbar: float = 1.0) -> WavefunctionGrid:
    """Normalized Gaussian wavepacket exp(-(x - center)^2 / 4 halfwidth^2).

    ``halfwidth`` is the standard deviation of the position distribution.
    A nonzero ``momentum`` adds the plane phase exp(i p x / hbar); pass the
    run's hbar when kicking packets (default 1, the natural-unit value).
    """
    _check_margins(grid, center, halfwidth)
    psi = _normalized(grid, _raw_gaussian(grid, center, halfwidth, momentum, hbar))
    return WavefunctionGrid(grid=grid, amplitudes=psi)


def cat_state(grid: SpatialGrid, delta_x: float,
              halfwidth: float) -> WavefunctionGrid:
    """Even superposition of two packets centered at +delta_x/2 and -delta_x/2.

    Normalization is done on the summed amplitudes, which applies the exact
    overlap correction; the idealized 1/sqrt(2) is only recovered for well
    separated branches.
    """
    if delta_x < 0.0:
        raise ConfigurationError(f"delta_x must be nonnegative, got {delta_x}")
    _check_margins(grid, 0.5 * delta_x, halfwidth)
    plus = _raw_gaussian(grid, 0.5 * delta_x, halfwidth, 0.0, 1.0)
    minus = _raw_gaussian(grid, -0.5 * delta_x, halfwidth, 0.0, 1.0)
    psi = _normalized(grid, plus + minus)
    return WavefunctionGrid(grid=grid, amplitudes=psi,
                            cat_info=CatInfo(delta_x=delta_x, halfwidth=halfwidth))


def pure_density(psi: WavefunctionGrid) -> DensityGrid:
    """Projector rho(x, y) = psi(x) conj(psi(y)) of a normalized pure state."""
    values = np.outer(psi.amplitudes, psi.amplitudes.conj())
    return DensityGrid(grid=psi.grid, values=values, cat_info=psi.cat_info)


def incoherent_mixture(grid: SpatialGrid, sigma: float,
                       halfwidth: float) -> DensityGrid:
    """Equal-weight mixture of n = round(sigma/halfwidth) Gaussian wavelets.

    Wavelet centers are spaced uniformly across [-sigma/2, +sigma/2].
    Adjacent wavelets therefore overlap at spacing ~ halfwidth; purity is
    1/n only in the idealized orthogonal limit.
    """
    if not sigma >= halfwidth:
        raise ConfigurationError(
            f"sigma {sigma} must be >= halfwidth {halfwidth}")
    n = max(1, round(sigma / halfwidth))
    if n == 1:
        centers = np.array([0.0])
    else:
        centers = np.linspace(-0.5 * sigma, 0.5 * sigma, n)
    _check_margins(grid, 0.5 * sigma, halfwidth)
    values = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    for c in centers:
        psi = _normalized(grid, _raw_gaussian(grid, c, halfwidth, 0.0, 1.0))
        values += np.outer(psi, psi.conj()) / n
    return DensityGrid(grid=grid, values=values)


@dataclass(frozen=True)
class Extremum:
    x: float
    y: float
    magnitude: float


@dataclass(frozen=True)
class ExtremaSet:
    diagonal: tuple[Extremum, Extremum]
    off_diagonal: tuple[Extremum, Extremum]


def locate_extrema(rho: DensityGrid) -> ExtremaSet:
    """Find the four |rho| extrema characteristic of a two-branch state.

    Returns the two largest local maxima on the diagonal and the two
    largest off-diagonal local maxima (a Hermitian-conjugate pair).  Raises
    if the state does not show that structure.
    """
    x = rho.grid.positions()
    absrho = np.abs(rho.values)

    diag = np.abs(np.diagonal(rho.values))
    interior = np.arange(1, len(diag) - 1)
    is_max = (diag[interior] > diag[interior - 1]) & \
             (diag[interior] >= diag[interior + 1])
    diag_idx = interior[is_max]
    if len(diag_idx) < 2:
        raise StateDiagnosticError(
            f"found {len(diag_idx)} diagonal maxima, need 2: not a "
            "two-branch state")
    diag_idx = diag_idx[np.argsort(diag[diag_idx])[::-1][:2]]
    diag_pair = tuple(Extremum(x[i], x[i], float(diag[i])) for i in diag_idx)

    # Off-diagonal search: strict 8-neighbor local maxima away from the
    # diagonal ridge, on the x > y side; partners come from Hermiticity.
    n = rho.grid.n_points
    core = absrho[1:-1, 1:-1]
    neigh = [absrho[1 + di:n - 1 + di, 1 + dj:n - 1 + dj]
             for di in (-1, 0, 1) for dj in (-1, 0, 1)
             if not (di == 0 and dj == 0)]
    local_max = np.ones_like(core, dtype=bool)
    for m in neigh:
        local_max &= core >= m
    ii, jj = np.nonzero(local_max)
    ii, jj = ii + 1, jj + 1
    off = (x[ii] - x[jj]) > 2.0 * rho.grid.spacing
    ii, jj = ii[off], jj[off]
    if len(ii) == 0:
        raise StateDiagnosticError(
            "no off-diagonal maxima found: not a two-branch state")
    best = np.argmax(absrho[ii, jj])
    i, j = int(ii[best]), int(jj[best])
    off_pair = (Extremum(x[i], x[j], float(absrho[i, j])),
                Extremum(x[j], x[i], float(absrho[j, i])))
    return ExtremaSet(diagonal=diag_pair, off_diagonal=off_pair)
