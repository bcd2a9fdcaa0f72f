"""Plain-text run configuration: one ``key = value`` per line.

Dotted keys group related settings (``grid.n_points``), ``#`` starts a
comment, and unknown keys are rejected so typos cannot silently fall back
to defaults.  The format is deliberately trivial to parse and diff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError
from .evolution import EvolutionConfig
from .grids import SpatialGrid
from .timescales import BOLTZMANN_SI, HBAR_SI, PhysicalParams


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigurationError(f"expected a boolean, got {raw!r}")


def _parse_float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


def _parse_int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in raw.split(",") if tok.strip())


_SCHEMA = {
    "physical.mass": float,
    "physical.gamma": float,
    "physical.temperature": float,
    "physical.hbar": float,
    "physical.boltzmann": float,
    "grid.n_points": int,
    "grid.extent": float,
    "evolution.dt": float,
    "evolution.n_steps": int,
    "evolution.sample_every": int,
    "evolution.enable_kinetic": _parse_bool,
    "evolution.enable_dissipation": _parse_bool,
    "evolution.enable_decoherence": _parse_bool,
    "evolution.renormalize": _parse_bool,
    "evolution.coefficient_pi_variant": _parse_bool,
    "evolution.checkpoint_every": int,
    "state.kind": str,
    "state.delta_x": float,
    "state.halfwidth": float,
    "state.center": float,
    "state.momentum": float,
    "state.sigma": float,
    "timescales.delta_x": float,
    "timescales.tau": float,
    "sweep.n_values": _parse_int_list,
    "sweep.hbar_values": _parse_float_list,
    "sweep.simulate": _parse_bool,
    "sweep.max_steps": int,
    "measure.delta_x": float,
    "measure.p1_weight": float,
    "measure.apparatus": str,
    "measure.sigma": float,
}

_STATE_KINDS = ("cat", "packet", "mixture")
_APPARATUS_KINDS = ("packet", "mixture")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key = value lines into a typed dictionary."""
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{source}:{lineno}: expected 'key = value', got {raw_line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigurationError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _SCHEMA[key](raw)
        except ConfigurationError:
            raise
        except ValueError as err:
            raise ConfigurationError(
                f"{source}:{lineno}: bad value for {key}: {err}") from err
    return values


def load_config_file(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config_text(text, source=str(path))


def load_preset(name: str) -> dict:
    """Load a named preset shipped with the package."""
    try:
        text = (resources.files("decolab") / "presets" / f"{name}.cfg") \
            .read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"unknown preset {name!r}") from None
    return parse_config_text(text, source=f"preset:{name}")


@dataclass
class RunConfig:
    """Typed configuration bag with builders for the domain objects."""

    values: dict = field(default_factory=dict)

    def merged_with(self, other: dict) -> "RunConfig":
        merged = dict(self.values)
        merged.update(other)
        return RunConfig(values=merged)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigurationError(f"missing required config key: {key}")
        return self.values[key]

    def echo(self) -> str:
        """Canonical one-line rendering of the resolved configuration."""
        parts = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple):
                val = ", ".join(str(v) for v in val)
            parts.append(f"{key} = {val}")
        return "; ".join(parts)

    # -- builders -----------------------------------------------------------

    def physical_params(self, need_gamma: bool = True) -> PhysicalParams:
        gamma = self.require("physical.gamma") if need_gamma \
            else self.get("physical.gamma", 0.0)
        return PhysicalParams(
            mass=self.require("physical.mass"),
            gamma=gamma,
            temperature=self.require("physical.temperature"),
            hbar=self.get("physical.hbar", HBAR_SI),
            boltzmann=self.get("physical.boltzmann", BOLTZMANN_SI))

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(n_points=self.require("grid.n_points"),
                           extent=self.require("grid.extent"))

    def evolution_config(self, n_steps: int | None = None) -> EvolutionConfig:
        return EvolutionConfig(
            dt=self.require("evolution.dt"),
            n_steps=n_steps if n_steps is not None
            else self.require("evolution.n_steps"),
            enable_kinetic=self.get("evolution.enable_kinetic", True),
            enable_dissipation=self.get("evolution.enable_dissipation", True),
            enable_decoherence=self.get("evolution.enable_decoherence", True),
            sample_every=self.get("evolution.sample_every", 1),
            renormalize=self.get("evolution.renormalize", False),
            coefficient_pi_variant=self.get(
                "evolution.coefficient_pi_variant", False))

    def initial_state(self, grid: SpatialGrid):
        """Build the configured initial state; returns a DensityGrid."""
        from .states import cat_state, gaussian_packet, incoherent_mixture, \
            pure_density

        kind = self.get("state.kind", "cat")
        if kind not in _STATE_KINDS:
            raise ConfigurationError(
                f"state.kind must be one of {_STATE_KINDS}, got {kind!r}")
        if kind == "cat":
            psi = cat_state(grid, delta_x=self.require("state.delta_x"),
                            halfwidth=self.require("state.halfwidth"))
            return pure_density(psi)
        if kind == "packet":
            psi = gaussian_packet(
                grid, center=self.get("state.center", 0.0),
                halfwidth=self.require("state.halfwidth"),
                momentum=self.get("state.momentum", 0.0),
                hbar=self.get("physical.hbar", HBAR_SI))
            return pure_density(psi)
        return incoherent_mixture(grid, sigma=self.require("state.sigma"),
                                  halfwidth=self.require("state.halfwidth"))
