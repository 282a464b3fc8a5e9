"""
Configuration models.

All settings are pydantic models that reject unknown fields, so a typo in a
scenario file fails loudly instead of silently falling back to a default.
Tolerance profiles are plain dictionaries merged with SmartOptions.
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from smartseeds import SmartOptions

PipelineName = Literal["certify", "components", "sheets", "hm-study", "decay-study"]
ProfileName = Literal["strict", "default", "fast"]

# ============================================================
# MONTE CARLO
# ============================================================


class WoSConfig(BaseModel):
    """Walk-on-spheres settings.

    The absorption shell is either given absolutely (shell_eps) or relative to
    the outer radius of the domain being sampled (shell_eps_rel).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    shell_eps: Optional[float] = Field(default=None, gt=0, description="Absolute absorption shell")
    shell_eps_rel: float = Field(default=1e-4, gt=0, lt=0.1, description="Shell / outer radius")
    max_steps: int = Field(default=2000, ge=10, description="Steps before a path is abandoned")
    samples: int = Field(default=20_000, ge=1000, description="Paths per estimate")
    seed: int = Field(ge=0, lt=2**64, description="Mandatory 64-bit seed")
    block_size: int = Field(default=4096, ge=64, description="Paths per RNG stream")
    workers: int = Field(default=1, ge=1, description="Threads sharing the blocks")

    def eps_for(self, outer_radius: float) -> float:
        """Absorption shell for a domain with the given outer radius."""
        if self.shell_eps is not None:
            return self.shell_eps
        return self.shell_eps_rel * outer_radius

    def with_seed(self, seed: int) -> "WoSConfig":
        return self.model_copy(update={"seed": int(seed)})


# ============================================================
# TOLERANCES AND SAMPLING
# ============================================================


class Tolerances(BaseModel):
    """Acceptance tolerances shared by every check."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sigma: float = Field(default=3.0, gt=0, description="Standard errors allowed below a bound")
    quarter: float = Field(default=0.25, gt=0, le=1, description="Harmonic measure lower bound")
    hm3_gap: float = Field(default=1e-6, gt=0, description="Gap realizing the strict 4/12 bound")
    convergence: float = Field(default=2e-2, gt=0, description="Final sup-gap of approximants")
    contour: float = Field(default=1e-9, gt=0, description="Contour quadrature tolerance")
    area_rel: float = Field(default=1e-2, gt=0, description="Relative area quadrature tolerance")
    obstruction_rel: float = Field(default=0.05, gt=0, description="Contour/area agreement")
    sheet_rel: float = Field(default=1e-10, gt=0, description="Sheet identity residual")
    monodromy: float = Field(default=1e-8, gt=0, description="Monodromy landing error")
    decay_threshold: float = Field(default=0.1, gt=0, lt=1, description="Final exterior measure")
    push_margin: float = Field(default=1e-10, ge=0, description="Pushforward margin slack")
    propagation_levels: Tuple[float, ...] = Field(default=(1.0, 10.0, 100.0, 1000.0))


class SamplingConfig(BaseModel):
    """Sizes of the deterministic point clouds and search schedules."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    cloud_seed: int = Field(default=0, ge=0, lt=2**32, description="Halton scrambling seed")
    normalize_samples: int = Field(default=4096, ge=64)
    union_samples_per_disk: int = Field(default=64, ge=8)
    thinness_depth: int = Field(default=12, ge=1, le=48)
    thinness_per_annulus: int = Field(default=256, ge=8)
    grid_resolution: int = Field(default=512, ge=16)
    component_resolution: int = Field(default=512, ge=16)
    v1_points: int = Field(default=10, ge=1)
    v_samples: int = Field(default=200, ge=8)
    circle_samples: int = Field(default=720, ge=16)
    rho_start: float = Field(default=0.1, gt=0, lt=0.5)
    rho_factor: float = Field(default=0.8, gt=0, lt=1)
    rho_count: int = Field(default=40, ge=1)
    r1_factor: float = Field(default=0.9, gt=0, lt=1)
    r1_count: int = Field(default=80, ge=1)

    def rho_schedule(self) -> List[float]:
        """Decreasing radii tried when selecting the circle around p."""
        return [self.rho_start * self.rho_factor**k for k in range(self.rho_count)]

    def r1_schedule(self, rho: float) -> List[float]:
        """Decreasing radii tried for the quarter-bound disk inside D(p, rho)."""
        return [rho * self.r1_factor**k for k in range(1, self.r1_count + 1)]


# ============================================================
# TOLERANCE PROFILES
# ============================================================

TOLERANCE_PROFILES: Dict[str, Dict[str, Any]] = {
    "strict": {"samples": 100_000, "grid_resolution": 1024, "normalize_samples": 8192, "sigma": 3.0},
    "default": {"samples": 20_000, "grid_resolution": 512, "normalize_samples": 4096, "sigma": 3.0},
    "fast": {"samples": 2_000, "grid_resolution": 128, "normalize_samples": 1024, "sigma": 3.0},
}


def resolve_profile(
    profile: str = "default",
    *,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    resolution: Optional[int] = None,
) -> SmartOptions:
    """Merge command-line overrides over a tolerance profile.

    Args:
        profile: One of 'strict', 'default', 'fast'.
        samples: Override for WoS samples.
        seed: Override for the WoS seed.
        resolution: Override for the grid resolution.

    Returns:
        SmartOptions exposing samples, seed, grid_resolution, normalize_samples, sigma.

    Raises:
        ValueError: If the profile name is unknown.
    """
    try:
        defaults = dict(TOLERANCE_PROFILES[profile])
    except KeyError:
        available = ", ".join(sorted(TOLERANCE_PROFILES))
        raise ValueError(f"Unknown tolerance profile {profile!r}. Available: {available}")
    defaults.setdefault("seed", None)
    incoming = {
        key: value
        for key, value in {"samples": samples, "seed": seed, "grid_resolution": resolution}.items()
        if value is not None
    }
    return SmartOptions(incoming=incoming, defaults=defaults)


# ============================================================
# SCENARIO FILE SCHEMA
# ============================================================

Pair = Tuple[float, float]


class ScenarioSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    pipeline: PipelineName
    label: str = "scenario"
    profile: ProfileName = "default"


class FunctionSection(BaseModel):
    """[function]: which member of the function zoo the scenario uses."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["borel", "cauchy", "sqrt", "entire"] = "borel"
    density: float = Field(default=1.0, description="Cauchy: constant density on U")
    coefficients: List[Pair] = Field(default_factory=lambda: [(0.0, 0.0), (1.0, 0.0)])
    segments: List[Tuple[float, float, float, float]] = Field(default_factory=list)
    weights: List[Pair] = Field(default_factory=list)
    flips: int = Field(default=1, ge=0)
    stages: int = Field(default=0, ge=0, description="Approximant stages (0 = one per term)")
    resolution: int = Field(default=64, ge=4, description="Cauchy: cells per disk diameter")

    @model_validator(mode="after")
    def _check_sqrt(self) -> "FunctionSection":
        if self.kind == "sqrt":
            if not self.segments:
                raise ValueError("kind 'sqrt' needs at least one segment")
            if self.weights and len(self.weights) != len(self.segments):
                raise ValueError("weights must match segments in length")
        return self


class GeometrySection(BaseModel):
    """[geometry]: the boundary point, the fine neighbourhood and its thin set."""

    model_config = ConfigDict(extra="forbid")

    target_angle: float = 0.0
    radius: float = Field(default=0.5, gt=0, lt=1)
    union: Literal["spiral", "explicit", "empty"] = "spiral"
    count: int = Field(default=12, ge=0)
    spiral_turns: float = Field(default=3.0, gt=0)
    spiral_gap: float = Field(default=0.5, gt=0)
    spiral_decay: float = Field(default=0.8, gt=0, lt=1)
    points: List[Pair] = Field(default_factory=list)
    weight_ratio: float = Field(default=0.5, gt=0, lt=1)
    ambient_radius: float = Field(default=0.5, gt=0)
    exhaustion: List[float] = Field(default_factory=lambda: [0.5, 0.75, 0.9])

    @model_validator(mode="after")
    def _check_exhaustion(self) -> "GeometrySection":
        fractions = self.exhaustion
        if any(not 0 < f <= 1 for f in fractions):
            raise ValueError("exhaustion fractions must lie in (0, 1]")
        if list(fractions) != sorted(fractions):
            raise ValueError("exhaustion fractions must increase")
        return self


class StudySection(BaseModel):
    """[study]: parameters of hm-study and decay-study."""

    model_config = ConfigDict(extra="forbid")

    points: List[Pair] = Field(default_factory=list)
    disk_radius: float = Field(default=1.0, gt=0)
    arc_start: float = 0.0
    arc_sweep: float = Field(default=3.141592653589793, gt=0)
    k_center: Pair = (-2.0, 0.0)
    k_radius: float = Field(default=0.5, gt=0)
    p: Pair = (0.0, 0.0)
    arms: int = Field(default=6, ge=1)
    arm_inner: float = Field(default=0.05, gt=0)
    arm_outer: float = Field(default=1.0, gt=0)
    arm_width: float = Field(default=0.02, gt=0)
    stages: int = Field(default=6, ge=0, description="Exhaustion stages of the decay study")


class ScenarioFile(BaseModel):
    """Top-level schema of a scenario file."""

    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioSection
    function: FunctionSection = Field(default_factory=FunctionSection)
    geometry: GeometrySection = Field(default_factory=GeometrySection)
    study: StudySection = Field(default_factory=StudySection)
    wos: WoSConfig
    tolerances: Tolerances = Field(default_factory=Tolerances)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
