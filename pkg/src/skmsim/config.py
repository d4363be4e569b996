"""Run configuration: physics constants, scale presets, and fingerprints.

Two presets share every physical constant and differ only in sampling and
trial count. The full-scale preset uses the 1024-point grid and 20,000
trials per symbol; the desk preset drops to 256 points over the same
physical window and 200 trials so the whole pipeline runs on a laptop.
Configs round-trip through JSON, and a SHA-256 fingerprint of the canonical
serialization guards persisted sample stores against mismatched reuse.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .fields import BeamSpec, SamplingGrid
from .propagation import LinkGeometry, NoiseSpec
from .topology import MaskSpec
from .turbulence import TurbulenceProfile

__all__ = [
    "PAPER_LEVELS",
    "BeamConfig",
    "RunConfig",
    "paper_config",
    "desk_config",
    "load_config",
]

# weak / moderate / strong structure constants, m^(-2/3)
PAPER_LEVELS = (1e-15, 2.5e-14, 1e-13)

_DEFAULT_SEED = 1234


@dataclass(frozen=True)
class BeamConfig:
    """Wavelength, waist, and the largest azimuthal index in play."""

    wavelength: float = 850e-9
    w0: float = 0.016
    ell_max: int = 8

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.w0 > 0:
            raise ValueError(f"waist must be positive, got {self.w0}")
        if not 1 <= self.ell_max <= 8:
            raise ValueError(f"ell_max must lie in 1..8, got {self.ell_max}")

    def spec(self) -> BeamSpec:
        return BeamSpec(wavelength=self.wavelength, w0=self.w0)


@dataclass(frozen=True)
class RunConfig:
    """Everything one simulation run depends on.

    ``mask`` selects a fixed mask recorded alongside the built-in sweeps;
    None means no extra mask (the characterization step then tunes over the
    swept candidates). ``levels`` lists the structure constants to run.
    """

    beam: BeamConfig
    grid: SamplingGrid
    link: LinkGeometry
    levels: tuple[float, ...]
    l0: float = 5e-3
    L0: float = 20.0
    mask: MaskSpec | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    trials: int = 200
    base_seed: int = _DEFAULT_SEED
    preset: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        if not self.levels:
            raise ValueError("at least one turbulence level is required")
        if any(v < 0 for v in self.levels):
            raise ValueError(f"structure constants must be non-negative: {self.levels}")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"duplicate turbulence levels: {self.levels}")
        if not 0 < self.l0 < self.L0:
            raise ValueError(f"scales must satisfy 0 < l0 < L0, got {self.l0}, {self.L0}")
        if not self.link.step > self.L0:
            raise ValueError(
                f"step {self.link.step} m must exceed the outer scale {self.L0} m "
                "so successive screens stay uncorrelated"
            )
        if self.trials < 0:
            raise ValueError(f"trials must be non-negative, got {self.trials}")

    @property
    def symbols(self) -> tuple[int, ...]:
        m = self.beam.ell_max
        return tuple(range(-m, 0)) + tuple(range(1, m + 1))

    def profile(self, cn2: float) -> TurbulenceProfile:
        return TurbulenceProfile(
            cn2=cn2,
            l0=self.l0,
            L0=self.L0,
            screen_spacing=self.link.step,
            n_screens=self.link.n_steps,
        )

    def with_overrides(
        self,
        trials: int | None = None,
        base_seed: int | None = None,
        levels: tuple[float, ...] | None = None,
        mask: MaskSpec | None = None,
    ) -> "RunConfig":
        cfg = self
        if trials is not None:
            cfg = replace(cfg, trials=trials)
        if base_seed is not None:
            cfg = replace(cfg, base_seed=base_seed)
        if levels is not None:
            cfg = replace(cfg, levels=tuple(levels))
        if mask is not None:
            cfg = replace(cfg, mask=mask)
        return cfg

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "beam": {
                "wavelength": self.beam.wavelength,
                "w0": self.beam.w0,
                "ell_max": self.beam.ell_max,
            },
            "grid": {"n_points": self.grid.n_points, "spacing": self.grid.spacing},
            "link": {
                "distance": self.link.distance,
                "n_steps": self.link.n_steps,
                "step": self.link.step,
                "aperture_diameter": self.link.aperture_diameter,
            },
            "turbulence": {"levels": list(self.levels), "l0": self.l0, "L0": self.L0},
            "mask": None if self.mask is None else self.mask.label,
            "noise": {"enabled": self.noise.enabled, "sigma_eta": self.noise.sigma_eta},
            "trials": self.trials,
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        mask = data.get("mask")
        return cls(
            beam=BeamConfig(**data["beam"]),
            grid=SamplingGrid(**data["grid"]),
            link=LinkGeometry(**data["link"]),
            levels=tuple(data["turbulence"]["levels"]),
            l0=data["turbulence"]["l0"],
            L0=data["turbulence"]["L0"],
            mask=None if mask is None else MaskSpec.from_label(mask),
            noise=NoiseSpec(**data["noise"]),
            trials=data["trials"],
            base_seed=data["base_seed"],
            preset=data.get("preset", "custom"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @property
    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def paper_config(trials: int = 20_000, base_seed: int = _DEFAULT_SEED, **overrides) -> RunConfig:
    """Full-scale parameter set: 1024-point grid, 20,000 trials per symbol."""
    cfg = RunConfig(
        beam=BeamConfig(),
        grid=SamplingGrid(n_points=1024, spacing=0.733e-3),
        link=LinkGeometry(distance=1000.0, n_steps=20, step=50.0, aperture_diameter=0.1397),
        levels=PAPER_LEVELS,
        trials=trials,
        base_seed=base_seed,
        preset="paper",
    )
    return replace(cfg, **overrides) if overrides else cfg


def desk_config(
    trials: int = 200,
    base_seed: int = _DEFAULT_SEED,
    ell_max: int = 8,
    **overrides,
) -> RunConfig:
    """Laptop-scale parameter set over the same physical window.

    256 points at 2.93 mm span the same 0.75 m window as the full grid;
    everything physical (wavelength, waist, path, aperture, levels) is
    identical. ``ell_max`` can be lowered to 4 for quick runs.
    """
    cfg = RunConfig(
        beam=BeamConfig(ell_max=ell_max),
        grid=SamplingGrid(n_points=256, spacing=2.93e-3),
        link=LinkGeometry(distance=1000.0, n_steps=20, step=50.0, aperture_diameter=0.1397),
        levels=PAPER_LEVELS,
        trials=trials,
        base_seed=base_seed,
        preset="desk",
    )
    return replace(cfg, **overrides) if overrides else cfg


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))
