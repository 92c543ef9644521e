"""2.5D height-scan sensor and the observation-corruption model.

The height scan is the policy's only exteroception: a yaw-aligned grid of top
surface heights around the base, relative to the ground under the robot and
clipped to [0, 1] m. The corruption model emulates the artifacts of an onboard
elevation-mapping pipeline: outliers, occlusion dropouts, drift and jitter.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import WorldState, raycast_down_batch
from .robot import yaw_of_quat


@dataclass(frozen=True)
class HeightScanSpec:
    """Scan geometry: a size_x by size_y grid at fixed resolution, shifted forward."""

    size_x: float = 2.4
    size_y: float = 1.6
    resolution: float = 0.1
    forward_offset: float = 0.2
    clip_lo: float = 0.0
    clip_hi: float = 1.0

    def __post_init__(self):
        nx = self.size_x / self.resolution
        ny = self.size_y / self.resolution
        if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
            raise ValueError("resolution must divide both scan sizes")

    @property
    def nx(self) -> int:
        return int(round(self.size_x / self.resolution))

    @property
    def ny(self) -> int:
        return int(round(self.size_y / self.resolution))

    @property
    def num_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers_base(self) -> np.ndarray:
        """Cell centers in the base frame, (num_cells, 2), row-major with x-major rows.

        Cell (i, j) center = (forward_offset - size_x/2 + (i+0.5)*res,
                              -size_y/2 + (j+0.5)*res); flat index = i*ny + j.
        """
        i = np.arange(self.nx)
        j = np.arange(self.ny)
        x = self.forward_offset - self.size_x / 2 + (i + 0.5) * self.resolution
        y = -self.size_y / 2 + (j + 0.5) * self.resolution
        xx, yy = np.meshgrid(x, y, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)


@dataclass(frozen=True)
class ScanNoiseSpec:
    """Corruption model: exclusive per-cell outlier/dropout events plus drift and jitter.

    Per cell one uniform u decides the event: u < p_outlier -> replace with a
    uniform draw from outlier_range; next p_dropout of mass -> zero; otherwise
    the value passes through with the shared drift offset and per-cell jitter.
    Exclusive events keep both marginal rates exact.
    """

    p_outlier: float = 0.05
    outlier_range: tuple = (0.0, 1.3)
    p_dropout: float = 0.3
    drift_range: tuple = (-0.05, 0.05)
    jitter_range: tuple = (-0.02, 0.02)

    def __post_init__(self):
        if not (0.0 <= self.p_outlier <= 1.0 and 0.0 <= self.p_dropout <= 1.0):
            raise ValueError("probabilities must be in [0, 1]")
        if self.p_outlier + self.p_dropout > 1.0:
            raise ValueError("p_outlier + p_dropout must not exceed 1")

    @staticmethod
    def disabled() -> "ScanNoiseSpec":
        return ScanNoiseSpec(p_outlier=0.0, p_dropout=0.0, drift_range=(0.0, 0.0), jitter_range=(0.0, 0.0))

    def draw_drift(self, rng: np.random.Generator) -> float:
        """One per-episode drift offset."""
        return float(rng.uniform(*self.drift_range))


def sample_height_scan(world: WorldState, base_pos, base_quat, spec: HeightScanSpec) -> np.ndarray:
    """Noise-free height scan around the given base pose, flat (num_cells,).

    The grid is centered at the base xy, shifted forward along the base
    heading and aligned to the base yaw. Values are top-surface heights
    relative to the terrain directly beneath the base, clipped to the
    observation range.
    """
    base_pos = np.asarray(base_pos, dtype=float)
    yaw = yaw_of_quat(np.asarray(base_quat, dtype=float))
    centers = spec.cell_centers_base()
    c, s = np.cos(yaw), np.sin(yaw)
    world_xy = np.stack(
        [
            base_pos[0] + c * centers[:, 0] - s * centers[:, 1],
            base_pos[1] + s * centers[:, 0] + c * centers[:, 1],
        ],
        axis=1,
    )
    heights = raycast_down_batch(world, world_xy)
    ground_ref = float(world.terrain.height_at(base_pos[:2]))
    return np.clip(heights - ground_ref, spec.clip_lo, spec.clip_hi)


def corrupt_scan(scan: np.ndarray, noise: ScanNoiseSpec, rng: np.random.Generator, drift: float | None = None,
                 clip_lo: float = 0.0, clip_hi: float = 1.0) -> np.ndarray:
    """Apply the corruption model to a scan. Pure given the RNG state.

    drift, when given, is the per-episode constant offset; otherwise one draw
    is taken from the spec's drift range for this call.
    """
    scan = np.asarray(scan, dtype=float)
    n = scan.shape[0]
    u = rng.uniform(0.0, 1.0, size=n)
    outlier_vals = rng.uniform(noise.outlier_range[0], noise.outlier_range[1], size=n)
    jitter = rng.uniform(noise.jitter_range[0], noise.jitter_range[1], size=n)
    if drift is None:
        drift = noise.draw_drift(rng)

    out = scan + drift + jitter
    is_outlier = u < noise.p_outlier
    is_dropout = (~is_outlier) & (u < noise.p_outlier + noise.p_dropout)
    out[is_outlier] = outlier_vals[is_outlier]
    out[is_dropout] = 0.0
    return np.clip(out, clip_lo, clip_hi)
