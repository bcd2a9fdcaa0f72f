"""Spatial grids and the wavefunction / density-matrix containers.

All simulator state lives on a uniform periodic grid of ``n_points``
(power of two) spanning ``[-extent/2, extent/2)``; the same axis is used
for both arguments of a density matrix rho(x, y).  Normalization is the
Riemann sum: sum |psi|^2 dx = 1 and trace = sum rho(x, x) dx = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

HERMITICITY_ATOL = 1e-10
TRACE_ATOL = 1e-8
NORM_ATOL = 1e-10


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1-D discretization shared by the x and y axes."""

    n_points: int
    extent: float

    def __post_init__(self):
        n = self.n_points
        if n < 16 or (n & (n - 1)) != 0:
            raise ConfigurationError(
                f"n_points must be a power of two >= 16, got {n}")
        if not self.extent > 0.0:
            raise ConfigurationError(
                f"extent must be positive, got {self.extent}")

    @property
    def spacing(self) -> float:
        return self.extent / self.n_points

    def positions(self) -> np.ndarray:
        """Grid coordinates x_i = -extent/2 + i * spacing."""
        return -0.5 * self.extent + self.spacing * np.arange(self.n_points)

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers matching numpy FFT bin ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def index_of(self, x: float) -> int:
        """Index of the grid point nearest to coordinate x."""
        i = int(round((x + 0.5 * self.extent) / self.spacing))
        return i % self.n_points


@dataclass(frozen=True)
class CatInfo:
    """Construction record for a two-branch superposition state."""

    delta_x: float
    halfwidth: float


@dataclass
class WavefunctionGrid:
    """A pure state psi(x_i) on a grid; units of amplitudes are m^-1/2."""

    grid: SpatialGrid
    amplitudes: np.ndarray
    cat_info: CatInfo | None = None

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.spacing)

    def validate(self):
        if self.amplitudes.shape != (self.grid.n_points,):
            raise ConfigurationError("amplitude vector does not match grid")
        if abs(self.norm_squared() - 1.0) > NORM_ATOL:
            raise ConfigurationError(
                f"wavefunction norm {self.norm_squared()} != 1")


@dataclass
class DensityGrid:
    """rho(x_i, y_j) as a complex n x n matrix, units 1/m.

    Treated as immutable after construction; evolution always produces a
    new instance.  Validation tolerances are absolute and assume O(1)
    natural units (the simulator's working units).
    """

    grid: SpatialGrid
    values: np.ndarray
    cat_info: CatInfo | None = None

    def trace(self) -> float:
        return float(np.real(np.trace(self.values)) * self.grid.spacing)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diagonal(self.values)).copy()

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def validate(self, check_psd: bool = False):
        n = self.grid.n_points
        if self.values.shape != (n, n):
            raise ConfigurationError("density matrix does not match grid")
        defect = self.hermiticity_defect()
        if defect > HERMITICITY_ATOL:
            raise ConfigurationError(
                f"density matrix not Hermitian: defect {defect:.3e}")
        tr = self.trace()
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ConfigurationError(f"trace {tr} != 1")
        if check_psd:
            # Diagnostic only: convex mixtures of pure states are PSD by
            # construction, so this is not part of routine validation.
            eigs = np.linalg.eigvalsh(self.values)
            if eigs.min() < -1e-8 * max(1.0, eigs.max()):
                raise ConfigurationError(
                    f"density matrix has negative eigenvalue {eigs.min():.3e}")


_HEADER_FLOATS = 2


def save_density(rho: DensityGrid, path: str | Path):
    """Write the binary checkpoint layout.

    Header: n_points and extent as two float64 values, then the matrix
    row-major as interleaved real/imaginary float64 pairs.
    """
    n = rho.grid.n_points
    out = np.empty(_HEADER_FLOATS + 2 * n * n, dtype=np.float64)
    out[0] = float(n)
    out[1] = rho.grid.extent
    inter = out[_HEADER_FLOATS:].reshape(n, n, 2)
    inter[:, :, 0] = rho.values.real
    inter[:, :, 1] = rho.values.imag
    out.tofile(str(path))


def load_density(path: str | Path) -> DensityGrid:
    raw = np.fromfile(str(path), dtype=np.float64)
    if raw.size < _HEADER_FLOATS:
        raise ConfigurationError(f"{path}: truncated density file")
    n = int(raw[0])
    extent = float(raw[1])
    if raw.size != _HEADER_FLOATS + 2 * n * n:
        raise ConfigurationError(
            f"{path}: expected {_HEADER_FLOATS + 2 * n * n} floats, "
            f"got {raw.size}")
    inter = raw[_HEADER_FLOATS:].reshape(n, n, 2)
    values = inter[:, :, 0] + 1j * inter[:, :, 1]
    return DensityGrid(grid=SpatialGrid(n, extent), values=values)


def export_diagonal_csv(rho: DensityGrid, path: str | Path):
    """Write the position distribution rho(x, x) as a two-column CSV."""
    x = rho.grid.positions()
    d = rho.diagonal()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,density\n")
        for xi, di in zip(x, d):
            fh.write(f"{xi:.16e},{di:.16e}\n")
