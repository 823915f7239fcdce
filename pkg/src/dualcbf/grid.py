"""Occupancy grids, signed distance fields and frontier clusters.

Cell arrays are indexed ``cells[iy, ix]`` with row 0 at minimum y. Cell
``(ix, iy)`` has its center at ``origin + resolution * (ix, iy)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels


class CellState(enum.IntEnum):
    UNKNOWN = -1
    FREE = 0
    OCCUPIED = 100


class SdfKind(enum.Enum):
    OBSTACLE = "obstacle"
    FRONTIER = "frontier"


_CHAR_TO_STATE = {"#": CellState.OCCUPIED, ".": CellState.FREE, "?": CellState.UNKNOWN}
_STATE_TO_CHAR = {int(v): k for k, v in _CHAR_TO_STATE.items()}

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class OccupancyGrid:
    """Discrete map; ``cells`` holds the ``{-1, 0, 100}`` state codes."""

    cells: np.ndarray
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int8, copy=True)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError(f"grid must be a non-empty 2-D array, got shape {cells.shape}")
        if not (self.resolution > 0):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        valid = np.isin(cells, (CellState.UNKNOWN, CellState.FREE, CellState.OCCUPIED))
        if not valid.all():
            raise ValueError("cells must be one of -1 (unknown), 0 (free), 100 (occupied)")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, resolution: float, state=CellState.UNKNOWN,
               origin=(0.0, 0.0)) -> OccupancyGrid:
        return cls(np.full((height, width), int(state), dtype=np.int8), resolution, origin)

    def cell_center(self, ix, iy) -> np.ndarray:
        return np.array([self.origin[0] + ix * self.resolution,
                         self.origin[1] + iy * self.resolution])

    def world_to_cell(self, point) -> tuple[int, int]:
        """Index of the cell whose square contains ``point`` (may be out of bounds)."""
        fx = (point[0] - self.origin[0]) / self.resolution
        fy = (point[1] - self.origin[1]) / self.resolution
        return math.floor(fx + 0.5), math.floor(fy + 0.5)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def known_count(self) -> int:
        return int(np.count_nonzero(self.cells != CellState.UNKNOWN))

    def to_text(self) -> str:
        lines = [f"{self.width} {self.height} {self.resolution!r}"]
        for row in self.cells:
            lines.append("".join(_STATE_TO_CHAR[int(c)] for c in row))
        return "\n".join(lines) + "\n"


def parse_grid_lines(lines: list[str]) -> tuple[OccupancyGrid, list[str]]:
    """Parse the grid text format; returns the grid and the remaining lines.

    First line ``width height resolution``, then ``height`` rows of ``#``/``.``/``?``.
    The first row listed is row 0 (minimum y).
    """
    lines = [ln.rstrip("\r\n") for ln in lines]
    body = [ln for ln in lines if ln.strip() and not ln.lstrip().startswith(";")]
    if not body:
        raise ValueError("empty grid text")
    try:
        w_s, h_s, r_s = body[0].split()
        width, height, resolution = int(w_s), int(h_s), float(r_s)
    except ValueError as exc:
        raise ValueError(f"bad grid header {body[0]!r}; expected 'width height resolution'") from exc
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {width}x{height}")
    rows = body[1:1 + height]
    if len(rows) != height:
        raise ValueError(f"expected {height} grid rows, found {len(rows)}")
    cells = np.empty((height, width), dtype=np.int8)
    for iy, row in enumerate(rows):
        row = row.strip()
        if len(row) != width:
            raise ValueError(f"grid row {iy} has {len(row)} characters, expected {width}")
        try:
            cells[iy] = [int(_CHAR_TO_STATE[ch]) for ch in row]
        except KeyError as exc:
            raise ValueError(f"grid row {iy}: unknown cell character {exc.args[0]!r}") from None
    return OccupancyGrid(cells, resolution), body[1 + height:]


def parse_grid_text(text: str) -> OccupancyGrid:
    grid, rest = parse_grid_lines(text.splitlines())
    if rest:
        raise ValueError(f"unexpected trailing content after grid: {rest[0]!r}")
    return grid


@dataclass(frozen=True)
class SignedDistanceField:
    values: np.ndarray
    kind: SdfKind
    resolution: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SdfSample:
    value: float
    gradient: np.ndarray
    degenerate: bool
    raw_norm: float = 0.0


@dataclass(frozen=True)
class FrontierCluster:
    cells: np.ndarray  # (k, 2) integer (ix, iy) pairs
    size: int
    centroid: np.ndarray  # world meters


@dataclass(frozen=True)
class FrontierClusterSet:
    clusters: tuple[FrontierCluster, ...] = ()
    mask: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def __getitem__(self, i) -> FrontierCluster:
        return self.clusters[i]


def distance_cap(width: int, height: int, resolution: float) -> float:
    """Largest cell-center distance inside the grid, used when one side of the sign split is empty."""
    return resolution * max(math.sqrt((width - 1) ** 2 + (height - 1) ** 2), 1.0)


def signed_distance(negative: np.ndarray, resolution: float) -> np.ndarray:
    """Signed cell-center EDT: positive outside ``negative``, negative inside it.

    Magnitudes are ``resolution * sqrt(d2)`` with ``d2`` the exact integer
    squared distance to the nearest cell of the opposite region.
    """
    negative = np.ascontiguousarray(negative, dtype=np.uint8)
    h, w = negative.shape
    cap = distance_cap(w, h, resolution)
    outside = np.sqrt(_kernels.edt_sq(negative)) * resolution
    inside = np.sqrt(_kernels.edt_sq(np.ascontiguousarray(1 - negative))) * resolution
    neg = negative.astype(bool)
    values = np.where(neg, -inside, outside)
    values[np.isinf(values)] = np.copysign(cap, values[np.isinf(values)])
    return values


def compute_obstacle_sdf(grid: OccupancyGrid) -> SignedDistanceField:
    """Obstacle SDF; unknown cells count as non-obstacle."""
    occupied = grid.cells == CellState.OCCUPIED
    return SignedDistanceField(signed_distance(occupied, grid.resolution), SdfKind.OBSTACLE,
                               grid.resolution, grid.origin)


def extract_frontier_clusters(grid: OccupancyGrid, n_min: int) -> FrontierClusterSet:
    """8-connected components of unknown cells with at least ``n_min`` cells, in scan order."""
    if n_min < 1:
        raise ValueError(f"n_min must be >= 1, got {n_min}")
    return _components(grid.cells == CellState.UNKNOWN, grid, n_min)


def _components(mask: np.ndarray, grid: OccupancyGrid, min_cells: int) -> FrontierClusterSet:
    labels, _ = ndimage.label(mask, structure=EIGHT_CONNECTED)
    return _labelled_components(labels, grid, min_cells)


def _labelled_components(labels: np.ndarray, grid: OccupancyGrid, min_cells: int) -> FrontierClusterSet:
    """Clusters from a label image (0 = background), ordered by label, small ones dropped."""
    count = int(labels.max()) if labels.size else 0
    mask = labels > 0
    if count == 0:
        return FrontierClusterSet((), np.zeros_like(mask))
    flat = labels.ravel()
    sizes = np.bincount(flat, minlength=count + 1)
    keep = np.flatnonzero(sizes >= min_cells)
    keep = keep[keep > 0]
    if keep.size == 0:
        return FrontierClusterSet((), np.zeros_like(mask))
    keep_lookup = np.zeros(count + 1, dtype=bool)
    keep_lookup[keep] = True
    kept = keep_lookup[labels]
    idx = np.flatnonzero(kept.ravel())
    lab = flat[idx]
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    splits = np.flatnonzero(np.diff(lab)) + 1
    w = grid.width
    clusters = []
    for part in np.split(idx, splits):
        iy, ix = np.divmod(part, w)
        cells = np.column_stack([ix, iy])
        centroid = np.array([grid.origin[0] + grid.resolution * ix.mean(),
                             grid.origin[1] + grid.resolution * iy.mean()])
        clusters.append(FrontierCluster(cells, int(part.size), centroid))
    return FrontierClusterSet(tuple(clusters), kept)


def extract_frontier_edges(grid: OccupancyGrid, clusters: FrontierClusterSet,
                           min_cells: int = 3, tile: int = 10) -> FrontierClusterSet:
    """Frontier ribbons: cells of significant unknown clusters with a known-free 4-neighbor.

    Ribbons are cut along a ``tile`` x ``tile`` cell lattice and split into
    8-connected pieces of at least ``min_cells`` cells, so every piece is
    short and its centroid stays close to the explored boundary. Such
    centroids make better straight-line goals than the centroid of a large
    unknown region, which often sits behind a wall.
    """
    if min_cells < 1 or tile < 1:
        raise ValueError(f"min_cells and tile must be >= 1, got {min_cells}, {tile}")
    if len(clusters) == 0 or clusters.mask is None:
        return FrontierClusterSet((), np.zeros(grid.cells.shape, dtype=bool))
    free = grid.cells == CellState.FREE
    ribbon = clusters.mask & ndimage.binary_dilation(free, structure=FOUR_CONNECTED)
    # separate tiles by blank lines so no component crosses a tile border
    h, w = ribbon.shape
    rows = np.arange(tile, h, tile)
    cols = np.arange(tile, w, tile)
    padded = np.insert(np.insert(ribbon, rows, False, axis=0), cols, False, axis=1)
    labels, _ = ndimage.label(padded, structure=EIGHT_CONNECTED)
    keep_r = np.ones(padded.shape[0], dtype=bool)
    keep_r[rows + np.arange(rows.size)] = False
    keep_c = np.ones(padded.shape[1], dtype=bool)
    keep_c[cols + np.arange(cols.size)] = False
    labels = labels[keep_r][:, keep_c]
    return _labelled_components(labels, grid, min_cells)


def compute_frontier_sdf(grid: OccupancyGrid, clusters: FrontierClusterSet) -> SignedDistanceField | None:
    """Frontier SDF with cluster cells as the negative region; ``None`` without clusters."""
    if len(clusters) == 0:
        return None
    if clusters.mask is not None:
        mask = clusters.mask
    else:
        mask = np.zeros(grid.cells.shape, dtype=bool)
        for c in clusters:
            mask[c.cells[:, 1], c.cells[:, 0]] = True
    return SignedDistanceField(signed_distance(mask, grid.resolution), SdfKind.FRONTIER,
                               grid.resolution, grid.origin)


def sample(sdf: SignedDistanceField, point) -> SdfSample:
    """Bilinear value and unit central-difference gradient at a world point.

    Points outside the grid are clamped to the boundary. The gradient is taken
    at the enclosing cell; one-sided differences are used on the grid edge.
    """
    vals = sdf.values
    h, w = vals.shape
    r = sdf.resolution
    fx = (float(point[0]) - sdf.origin[0]) / r
    fy = (float(point[1]) - sdf.origin[1]) / r
    fx = min(max(fx, 0.0), w - 1.0)
    fy = min(max(fy, 0.0), h - 1.0)
    i0 = min(int(fx), max(w - 2, 0))
    j0 = min(int(fy), max(h - 2, 0))
    i1 = min(i0 + 1, w - 1)
    j1 = min(j0 + 1, h - 1)
    tx = fx - i0
    ty = fy - j0
    v00 = vals[j0, i0]
    v10 = vals[j0, i1]
    v01 = vals[j1, i0]
    v11 = vals[j1, i1]
    value = float((v00 * (1.0 - tx) + v10 * tx) * (1.0 - ty) + (v01 * (1.0 - tx) + v11 * tx) * ty)

    ci = int(fx + 0.5)
    cj = int(fy + 0.5)
    gx = _central(vals[cj], ci, w, r)
    gy = _central(vals[:, ci], cj, h, r)
    norm = math.hypot(gx, gy)
    if norm > 1e-6:
        return SdfSample(value, np.array([gx / norm, gy / norm]), False, norm)
    return SdfSample(value, np.zeros(2), True, norm)


def _central(line, i: int, n: int, r: float) -> float:
    if n < 2:
        return 0.0
    if i == 0:
        return float(line[1] - line[0]) / r
    if i == n - 1:
        return float(line[n - 1] - line[n - 2]) / r
    return float(line[i + 1] - line[i - 1]) / (2.0 * r)


def raw_gradient_norm(sdf: SignedDistanceField) -> np.ndarray:
    """Unnormalized central-difference gradient norm at every cell."""
    gy, gx = np.gradient(sdf.values, sdf.resolution)
    return np.hypot(gx, gy)


def _disc_window(grid: OccupancyGrid, center, radius: float):
    r = grid.resolution
    cx = (float(center[0]) - grid.origin[0]) / r
    cy = (float(center[1]) - grid.origin[1]) / r
    rc = radius / r
    x0 = max(math.ceil(cx - rc), 0)
    x1 = min(math.floor(cx + rc), grid.width - 1)
    y0 = max(math.ceil(cy - rc), 0)
    y1 = min(math.floor(cy + rc), grid.height - 1)
    if x1 < x0 or y1 < y0:
        return None
    xs = grid.origin[0] + r * np.arange(x0, x1 + 1) - float(center[0])
    ys = grid.origin[1] + r * np.arange(y0, y1 + 1) - float(center[1])
    inside = ys[:, None] ** 2 + xs[None, :] ** 2 <= radius * radius
    return inside, grid.cells[y0:y1 + 1, x0:x1 + 1]


def uncertainty_density(grid: OccupancyGrid, center, radius: float) -> float:
    """Fraction of cells with centers inside the disc that are unknown (0 if none)."""
    if not (radius > 0):
        raise ValueError(f"radius must be positive, got {radius}")
    win = _disc_window(grid, center, radius)
    if win is None:
        return 0.0
    inside, cells = win
    total = int(np.count_nonzero(inside))
    if total == 0:
        return 0.0
    unknown = int(np.count_nonzero(inside & (cells == CellState.UNKNOWN)))
    return unknown / total
