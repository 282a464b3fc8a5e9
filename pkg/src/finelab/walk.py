"""
Walk-on-spheres engine.

A walk starts at z, jumps to a uniform point on the largest circle around
its position that stays in the domain, and is absorbed once it comes within
the shell of the boundary. The absorbing component is the nearest one, and a
target decides whether the absorption counts as a hit.

Samples are cut into blocks of ``block_size`` paths. Block b draws from
Generator(Philox(SeedSequence([seed, b]))), so estimates depend only on
(seed, samples, block_size) and never on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from .config import WoSConfig
from .errors import PreconditionError
from .geometry import TWO_PI, CircArc, Disk

logger = logging.getLogger(__name__)

UNRELIABLE_FRACTION = 0.01


def derive_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for item ``index`` of a run seeded with ``seed``."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


class WalkDomain(Protocol):
    """What the engine needs from a domain."""

    outer: Optional[Disk]

    @property
    def scale(self) -> float: ...

    def boundary_distances(self, z: NDArray) -> Tuple[NDArray, NDArray]: ...


# ============================================================
# TARGETS
# ============================================================


@dataclass(frozen=True)
class ArcTarget:
    """Open arc of the outer circle; endpoints count as misses."""

    arc: CircArc

    def hits(self, domain: WalkDomain, z: NDArray, comp: NDArray) -> NDArray:
        angle = np.angle(z - domain.outer.center)
        return (comp == -1) & self.arc.contains_angle(angle, strict=True)

    def describe(self) -> str:
        return f"arc[{self.arc.start:.4f}, +{self.arc.sweep:.4f}]"


@dataclass(frozen=True)
class ObstacleTarget:
    """Boundary of obstacle ``index``."""

    index: int

    def hits(self, domain: WalkDomain, z: NDArray, comp: NDArray) -> NDArray:
        return comp == self.index

    def describe(self) -> str:
        return f"obstacle[{self.index}]"


@dataclass(frozen=True)
class OuterRemainder:
    """Outer boundary minus an optional open arc (its endpoints included)."""

    excluded: Optional[CircArc] = None

    def hits(self, domain: WalkDomain, z: NDArray, comp: NDArray) -> NDArray:
        on_outer = comp == -1
        if self.excluded is None:
            return on_outer
        angle = np.angle(z - domain.outer.center)
        return on_outer & ~self.excluded.contains_angle(angle, strict=True)

    def describe(self) -> str:
        return "outer" if self.excluded is None else "outer-remainder"


Target = Union[ArcTarget, ObstacleTarget, OuterRemainder]


# ============================================================
# ESTIMATES
# ============================================================


@dataclass(frozen=True)
class HMEstimate:
    """Monte Carlo harmonic measure.

    Paths abandoned after max_steps count as misses and are reported in
    ``max_step_paths``; ``killed_on`` holds the fraction of paths absorbed on
    each boundary component (-1 is the outer boundary).
    """

    value: float
    std_error: float
    samples_used: int
    hits: int
    killed_on: Dict[int, float] = field(default_factory=dict)
    max_step_paths: int = 0
    seed: int = 0

    @property
    def reliable(self) -> bool:
        return self.max_step_paths <= UNRELIABLE_FRACTION * self.samples_used

    def lower(self, sigma: float = 3.0) -> float:
        return self.value - sigma * self.std_error

    def upper(self, sigma: float = 3.0) -> float:
        return self.value + sigma * self.std_error


@dataclass
class _BlockResult:
    hits: int = 0
    stuck: int = 0
    absorbed: Counter = field(default_factory=Counter)


def _run_block(
    domain: WalkDomain, target: Target, z: complex, n: int, eps: float, max_steps: int, seed: int, block: int
) -> _BlockResult:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
    pos = np.full(n, z, dtype=complex)
    alive = np.arange(n)
    out = _BlockResult()
    for _ in range(max_steps):
        if alive.size == 0:
            break
        here = pos[alive]
        d, comp = domain.boundary_distances(here)
        done = d < eps
        if done.any():
            zs, cs = here[done], comp[done]
            out.hits += int(np.count_nonzero(target.hits(domain, zs, cs)))
            out.absorbed.update(cs.tolist())
            alive = alive[~done]
            d = d[~done]
        if alive.size:
            theta = rng.uniform(0.0, TWO_PI, alive.size)
            pos[alive] += d * np.exp(1j * theta)
    out.stuck = int(alive.size)
    return out


def hm_estimate(domain: WalkDomain, target: Target, z: complex, cfg: WoSConfig) -> HMEstimate:
    """Estimate the harmonic measure of target seen from z.

    Raises:
        PreconditionError: If z is within the absorption shell of the boundary.
    """
    z = complex(z)
    eps = cfg.eps_for(domain.scale)
    d0, _ = domain.boundary_distances(np.array([z]))
    if not d0[0] > eps:
        raise PreconditionError(
            f"start point {z!r} is within {eps:.3g} of the boundary (distance {d0[0]:.3g})", witness=z
        )

    blocks = [
        (b, min(cfg.block_size, cfg.samples - b * cfg.block_size))
        for b in range(math.ceil(cfg.samples / cfg.block_size))
    ]

    def work(item):
        b, n = item
        return _run_block(domain, target, z, n, eps, cfg.max_steps, cfg.seed, b)

    if cfg.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(item) for item in blocks]

    hits = stuck = 0
    absorbed: Counter = Counter()
    for res in results:
        hits += res.hits
        stuck += res.stuck
        absorbed.update(res.absorbed)

    n = cfg.samples
    value = hits / n
    estimate = HMEstimate(
        value=value,
        std_error=math.sqrt(value * (1.0 - value) / n),
        samples_used=n,
        hits=hits,
        killed_on={int(k): v / n for k, v in sorted(absorbed.items())},
        max_step_paths=stuck,
        seed=cfg.seed,
    )
    if not estimate.reliable:
        logger.warning(
            "UNRELIABLE estimate at %r: %d of %d paths hit max_steps=%d", z, stuck, n, cfg.max_steps
        )
    logger.debug(
        "%s from %r: %.5f ± %.5f over %d blocks", target.describe(), z, value, estimate.std_error, len(blocks)
    )
    return estimate
