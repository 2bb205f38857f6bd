"""Elevation maps, synthetic terrain, slope scoring and map file I/O.

Grid convention: ``heights[i, j]`` is row ``i`` (world y) and column ``j``
(world x). The center of cell ``(i, j)`` sits at
``(origin[0] + j * resolution, origin[1] + i * resolution)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ElevationMap",
    "SteepnessMap",
    "FootprintKernel",
    "TerrainSpec",
    "TerrainError",
    "MapFormatError",
    "generate_terrain",
    "sobel_gradient",
    "aggregate_steepness",
    "steepness_map",
    "height_at",
    "load_map",
    "save_map",
    "write_pgm",
]

# Planner footprint: 1.8 m forward x 1.2 m lateral at 5 cm.
DEFAULT_RESOLUTION = 0.05
DEFAULT_WIDTH_CELLS = 36
DEFAULT_LENGTH_CELLS = 24


class TerrainError(ValueError):
    """Invalid terrain geometry or an out-of-bounds query."""


class MapFormatError(TerrainError):
    """Malformed EMAP file."""


@dataclass(frozen=True, eq=False)
class ElevationMap:
    origin: tuple[float, float]
    resolution: float
    heights: np.ndarray

    def __post_init__(self):
        h = np.array(self.heights, dtype=np.float64, copy=True)
        if h.ndim != 2 or h.size == 0:
            raise TerrainError(f"heights must be a non-empty 2D grid, got shape {h.shape}")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise TerrainError(f"resolution must be positive, got {self.resolution}")
        if not np.all(np.isfinite(h)):
            raise TerrainError("heights contain non-finite values")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def width_cells(self) -> int:
        return self.heights.shape[1]

    @property
    def length_cells(self) -> int:
        return self.heights.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.heights.shape

    def world_of(self, i, j):
        """World (x, y) of the center of cell ``(i, j)``."""
        return (self.origin[0] + np.asarray(j, dtype=np.float64) * self.resolution,
                self.origin[1] + np.asarray(i, dtype=np.float64) * self.resolution)

    def cell_of(self, x, y):
        """Nearest cell ``(i, j)`` for a world point; may be out of range."""
        j = np.floor((np.asarray(x, dtype=np.float64) - self.origin[0]) / self.resolution + 0.5)
        i = np.floor((np.asarray(y, dtype=np.float64) - self.origin[1]) / self.resolution + 0.5)
        return i.astype(np.int64), j.astype(np.int64)

    def contains(self, x, y):
        i, j = self.cell_of(x, y)
        return (i >= 0) & (i < self.length_cells) & (j >= 0) & (j < self.width_cells)

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax) of the covered area, cell edges included."""
        half = 0.5 * self.resolution
        x0, y0 = self.origin
        return (x0 - half, x0 + (self.width_cells - 0.5) * self.resolution,
                y0 - half, y0 + (self.length_cells - 0.5) * self.resolution)

    def same_grid(self, other) -> bool:
        return (self.shape == other.shape and self.origin == other.origin
                and self.resolution == other.resolution)


@dataclass(frozen=True, eq=False)
class SteepnessMap:
    """Per-cell slope score on the grid of its source map. Higher is worse."""

    origin: tuple[float, float]
    resolution: float
    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64, copy=True)
        if s.ndim != 2:
            raise TerrainError("scores must be 2D")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise TerrainError("steepness scores must be finite and non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape


@dataclass(frozen=True)
class FootprintKernel:
    """Box kernel sized to the sole of the foot.

    ``foot_length`` runs along x (columns), ``foot_width`` along y (rows).
    """

    foot_length: float = 0.15
    foot_width: float = 0.10

    def __post_init__(self):
        if not (self.foot_length > 0 and self.foot_width > 0):
            raise TerrainError("foot dimensions must be positive")

    @staticmethod
    def _odd_cells(extent: float, resolution: float) -> int:
        # tolerate 0.15 / 0.05 == 3.0000000000000004
        n = max(1, math.ceil(extent / resolution - 1e-9))
        return n if n % 2 == 1 else n + 1

    def extents(self, resolution: float) -> tuple[int, int]:
        """(rows, cols) of the kernel at ``resolution``; both odd."""
        return (self._odd_cells(self.foot_width, resolution),
                self._odd_cells(self.foot_length, resolution))


@dataclass(frozen=True)
class TerrainSpec:
    kind: str = "flat"
    width_cells: int = DEFAULT_WIDTH_CELLS
    length_cells: int = DEFAULT_LENGTH_CELLS
    resolution: float = DEFAULT_RESOLUTION
    step_height: float = 0.0
    tread_depth: float = 0.30
    num_steps: int = 5
    roughness_amplitude: float = 0.0
    seed: int = 0
    center: tuple[float, float] = field(default=(0.0, 0.0))

    def validate(self):
        if self.kind not in ("flat", "pyramid_stairs", "rough"):
            raise TerrainError(f"unknown terrain kind {self.kind!r}")
        if self.width_cells <= 0 or self.length_cells <= 0:
            raise TerrainError("map dimensions must be positive")
        if not self.resolution > 0:
            raise TerrainError("resolution must be positive")
        if self.step_height < 0:
            raise TerrainError("step_height must be >= 0")
        if self.roughness_amplitude < 0:
            raise TerrainError("roughness_amplitude must be >= 0")
        if self.kind == "pyramid_stairs":
            if self.tread_depth < self.resolution:
                raise TerrainError("tread_depth must be at least one cell")
            if self.num_steps < 0:
                raise TerrainError("num_steps must be >= 0")


def generate_terrain(spec: TerrainSpec) -> ElevationMap:
    """Build a synthetic map centered on ``spec.center``.

    ``pyramid_stairs`` is a stepped pit: the band at Chebyshev distance
    ``[n * tread, (n + 1) * tread)`` from the center has height
    ``n * step_height``, capped at ``num_steps``. Walkers starting in the
    middle climb in every direction.
    """
    spec.validate()
    res = spec.resolution
    origin = (spec.center[0] - 0.5 * (spec.width_cells - 1) * res,
              spec.center[1] - 0.5 * (spec.length_cells - 1) * res)
    shape = (spec.length_cells, spec.width_cells)

    if spec.kind == "flat":
        heights = np.zeros(shape)
    elif spec.kind == "pyramid_stairs":
        heights = pyramid_band(shape, spec.tread_depth / res, spec.num_steps) * spec.step_height
    else:
        rng = np.random.default_rng(spec.seed)
        heights = rng.uniform(0.0, spec.roughness_amplitude, size=shape)
    return ElevationMap(origin, res, heights)


def pyramid_band(shape, tread_cells: float, num_steps: int) -> np.ndarray:
    """Integer band index of every cell of a grid centered pyramid."""
    rows, cols = shape
    # distances in cells from the grid center, measured to cell centers
    dy = np.abs(np.arange(rows) - 0.5 * (rows - 1))
    dx = np.abs(np.arange(cols) - 0.5 * (cols - 1))
    cheb = np.maximum(dy[:, None], dx[None, :])
    return np.minimum(np.floor(cheb / tread_cells), num_steps)


def sobel_gradient(emap: ElevationMap) -> np.ndarray:
    """Slope magnitude from the 3x3 Sobel pair, replicate-padded.

    Both kernels are divided by ``8 * resolution`` so a plane ``h = s * x``
    gives exactly ``|s|`` in the interior.
    """
    h = emap.heights
    if h.shape[0] < 3 or h.shape[1] < 3:
        raise TerrainError(f"Sobel needs at least a 3x3 map, got {h.shape}")
    p = np.pad(h, 1, mode="edge")
    up, mid, down = p[2:, :], p[1:-1, :], p[:-2, :]
    # column differences smoothed along rows, and vice versa
    dcol = lambda a: a[:, 2:] - a[:, :-2]
    gx = dcol(down) + 2.0 * dcol(mid) + dcol(up)
    left, center, right = p[:, :-2], p[:, 1:-1], p[:, 2:]
    drow = lambda a: a[2:, :] - a[:-2, :]
    gy = drow(left) + 2.0 * drow(center) + drow(right)
    scale = 1.0 / (8.0 * emap.resolution)
    return np.hypot(gx * scale, gy * scale)


def aggregate_steepness(gradient, kernel: FootprintKernel, resolution: float,
                        origin=(0.0, 0.0)) -> SteepnessMap:
    """Box-mean of ``gradient`` over the foot kernel with replicate padding."""
    g = np.asarray(gradient, dtype=np.float64)
    kr, kc = kernel.extents(resolution)
    if kr > g.shape[0] or kc > g.shape[1]:
        raise TerrainError(f"kernel {kr}x{kc} larger than grid {g.shape}")
    pr, pc = kr // 2, kc // 2
    p = np.pad(g, ((pr, pr), (pc, pc)), mode="edge")
    acc = np.zeros_like(g)
    for di in range(kr):
        for dj in range(kc):
            acc += p[di:di + g.shape[0], dj:dj + g.shape[1]]
    return SteepnessMap(origin, resolution, acc / (kr * kc))


def steepness_map(emap: ElevationMap, kernel: FootprintKernel | None = None) -> SteepnessMap:
    """Sobel followed by foot-sized aggregation."""
    kernel = kernel or FootprintKernel()
    return aggregate_steepness(sobel_gradient(emap), kernel, emap.resolution, emap.origin)


def height_at(emap: ElevationMap, xy) -> float:
    """Terrain height of the cell containing ``xy`` (nearest cell, no interpolation)."""
    x, y = float(xy[0]), float(xy[1])
    i, j = emap.cell_of(x, y)
    if not (0 <= i < emap.length_cells and 0 <= j < emap.width_cells):
        raise TerrainError(f"point ({x:.4f}, {y:.4f}) lies outside the map")
    return float(emap.heights[i, j])


def save_map(emap: ElevationMap, path) -> None:
    lines = ["EMAP 1",
             f"{emap.origin[0]!r} {emap.origin[1]!r} {emap.resolution!r} "
             f"{emap.width_cells} {emap.length_cells}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in emap.heights)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_map(path) -> ElevationMap:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or lines[0].split() != ["EMAP", "1"]:
        raise MapFormatError(f"{path}: missing 'EMAP 1' header")
    head = lines[1].split()
    if len(head) != 5:
        raise MapFormatError(f"{path}: header needs 5 fields, got {len(head)}")
    try:
        ox, oy, res = (float(v) for v in head[:3])
        width, length = int(head[3]), int(head[4])
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad header: {exc}") from None
    if width <= 0 or length <= 0:
        raise MapFormatError(f"{path}: non-positive dimensions {width}x{length}")
    rows = lines[2:]
    if len(rows) != length:
        raise MapFormatError(f"{path}: header declares {length} rows, found {len(rows)}")
    fields = [row.split() for row in rows]
    if any(len(f) != width for f in fields):
        raise MapFormatError(f"{path}: header declares {width} columns per row")
    try:
        heights = np.array([[float(v) for v in f] for f in fields], dtype=np.float64)
    except ValueError as exc:
        raise MapFormatError(f"{path}: bad height value: {exc}") from None
    if not np.all(np.isfinite(heights)):
        raise MapFormatError(f"{path}: non-finite height")
    try:
        return ElevationMap((ox, oy), res, heights)
    except TerrainError as exc:
        raise MapFormatError(f"{path}: {exc}") from None


def write_pgm(grid, path, mark=None) -> None:
    """Write a binary 8-bit PGM, min-max scaled, +y pointing up.

    ``mark`` is an optional ``(i, j)`` cell drawn at full white while the
    rest of the image is scaled into ``[0, 223]``.
    """
    g = np.asarray(grid, dtype=np.float64)
    lo, hi = float(g.min()), float(g.max())
    top = 223.0 if mark is not None else 255.0
    img = np.zeros(g.shape) if hi == lo else (g - lo) / (hi - lo) * top
    img = np.round(img).astype(np.uint8)
    if mark is not None:
        img[mark[0], mark[1]] = 255
    img = img[::-1]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())
