"""Discretized coverage map: grid geometry, cells, RSRP layers and the
derived best/second-best server maps, plus the distance (TA) and bearing
(AoA) zone partitions used to project per-cell KPIs onto pixels.

Conventions
-----------
* Pixel ``(i, j)`` has its center at ``origin + (i + 0.5, j + 0.5) * pixel_size``
  with axis 0 (``i``) along world x and axis 1 (``j``) along world y, so pixel
  ``(0, 0)`` sits at the lower-left corner of the map.
* Bearings and antenna azimuths are radians clockwise from geographic North:
  due North is 0, due East is pi/2.
* ``NaN`` in an RSRP layer means "no coverage from this cell at this pixel".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Distance resolution of the timing-advance counter and the number of rings
# it is binned into (the last ring is open-ended).
TA_GRANULARITY_M = 78.25
TA_ZONE_COUNT = 6

# Half-width of the boresight bearing sector; offsets within +-pi/6 of the
# antenna azimuth fall in zone 0, larger offsets in zones +1 / -1.
AOA_BORESIGHT_HALF_WIDTH = math.pi / 6.0

UNCOVERED = -1
NO_SECOND = -1


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a square m x m pixel grid."""

    m: int
    pixel_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"grid needs at least 2x2 pixels, got m={self.m}")
        if self.pixel_size <= 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

    @property
    def extent(self) -> float:
        """Side length of the map in meters."""
        return self.m * self.pixel_size

    def pixel_center(self, i: int, j: int) -> tuple[float, float]:
        x0, y0 = self.origin
        return (x0 + (i + 0.5) * self.pixel_size, y0 + (j + 0.5) * self.pixel_size)

    def center_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of all pixel centers as two (m, m) arrays."""
        idx = np.arange(self.m, dtype=np.float64) + 0.5
        x = self.origin[0] + idx * self.pixel_size
        y = self.origin[1] + idx * self.pixel_size
        return np.meshgrid(x, y, indexing="ij")

    def contains_pixel(self, i: int, j: int) -> bool:
        return 0 <= i < self.m and 0 <= j < self.m


@dataclass(frozen=True)
class CellInfo:
    """One sector: site position, boresight azimuth and configured neighbors.

    ``azimuth`` is radians clockwise from North in [0, 2*pi). ``neighbors``
    is the ordered list of cell ids eligible as handover candidates.
    """

    cell_id: str
    site_position: tuple[float, float]
    azimuth: float
    neighbors: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.azimuth < 2.0 * math.pi:
            object.__setattr__(self, "azimuth", self.azimuth % (2.0 * math.pi))
        if self.cell_id in self.neighbors:
            raise ValueError(f"cell {self.cell_id!r} lists itself as a neighbor")


@dataclass
class CoverageGrid:
    """Per-cell RSRP layers over a common grid.

    ``rsrp`` has shape (n_cells, m, m) in dBm with NaN marking pixels the
    cell does not cover. ``q_rxlevmin`` is the admission threshold: pixels
    whose best-server RSRP falls below it count as uncovered.
    """

    spec: GridSpec
    cells: list[CellInfo]
    rsrp: np.ndarray
    q_rxlevmin: float

    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n, m = len(self.cells), self.spec.m
        if n < 1:
            raise ValueError("coverage grid needs at least one cell")
        if self.rsrp.shape != (n, m, m):
            raise ValueError(
                f"rsrp shape {self.rsrp.shape} does not match {n} cells on a {m}x{m} grid"
            )
        if np.isinf(self.rsrp).any():
            raise ValueError("rsrp values must be finite or NaN")
        self._index = {c.cell_id: k for k, c in enumerate(self.cells)}
        if len(self._index) != n:
            raise ValueError("duplicate cell ids")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_index(self, cell_id: str) -> int:
        return self._index[cell_id]


@dataclass(frozen=True)
class ServerMaps:
    """Per-pixel best and second-best serving cell indices.

    ``best`` is UNCOVERED (-1) where no cell reaches the admission threshold;
    ``second`` is NO_SECOND (-1) where fewer than two cells have any signal
    or where the pixel itself is uncovered.
    """

    best: np.ndarray
    second: np.ndarray

    def uncovered_mask(self) -> np.ndarray:
        return self.best == UNCOVERED


def compute_server_maps(grid: CoverageGrid) -> ServerMaps:
    """Derive best/second-best server maps from the RSRP layers.

    The best server is the argmax of RSRP over cells (ties broken by lowest
    cell index); a pixel is uncovered when its best RSRP is below
    ``q_rxlevmin`` or no cell has signal there. The runner-up is the argmax
    over the remaining cells, without the admission threshold.
    """
    filled = np.where(np.isnan(grid.rsrp), -np.inf, grid.rsrp)
    best = np.argmax(filled, axis=0).astype(np.int32)
    best_val = np.take_along_axis(filled, best[None].astype(np.intp), axis=0)[0]
    uncovered = ~np.isfinite(best_val) | (best_val < grid.q_rxlevmin)

    runner = filled.copy()
    ii, jj = np.meshgrid(np.arange(grid.spec.m), np.arange(grid.spec.m), indexing="ij")
    runner[best, ii, jj] = -np.inf
    second = np.argmax(runner, axis=0).astype(np.int32)
    second_val = np.take_along_axis(runner, second[None].astype(np.intp), axis=0)[0]
    second[~np.isfinite(second_val)] = NO_SECOND

    best[uncovered] = UNCOVERED
    second[uncovered] = NO_SECOND
    return ServerMaps(best=best, second=second)


def angle_and_distance(
    cell: CellInfo, pixel: tuple[float, float]
) -> tuple[float, float]:
    """Bearing (radians clockwise from North) and Euclidean distance from the
    cell site to a world-coordinate point. A zero-length offset has bearing 0
    by convention."""
    dx = pixel[0] - cell.site_position[0]
    dy = pixel[1] - cell.site_position[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0:
        return 0.0, 0.0
    bearing = math.atan2(dx, dy) % (2.0 * math.pi)
    return bearing, dist


def ta_zone(spec: GridSpec, cell: CellInfo, pixel: tuple[int, int]) -> int:
    """Timing-advance ring of a pixel in a cell: floor(distance / 78.25 m),
    clamped to the open-ended last ring (index 5)."""
    if not spec.contains_pixel(*pixel):
        raise ValueError(f"pixel {pixel} outside {spec.m}x{spec.m} grid")
    center = spec.pixel_center(*pixel)
    _, dist = angle_and_distance(cell, center)
    return min(int(dist / TA_GRANULARITY_M), TA_ZONE_COUNT - 1)


def _wrap_pi(angle: float) -> float:
    """Wrap to the half-open interval (-pi, pi]."""
    # In-range angles pass through untouched; the modulo arithmetic below
    # can shift them by a few ulp, enough to cross a closed zone boundary.
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = angle % (2.0 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    return wrapped


def aoa_zone(spec: GridSpec, cell: CellInfo, pixel: tuple[int, int]) -> int:
    """Bearing sector of a pixel relative to the cell boresight.

    Returns 0 when the bearing offset from the azimuth lies in
    [-pi/6, pi/6], +1 for offsets in (pi/6, pi] and -1 for offsets in
    (-pi, -pi/6). A pixel centered exactly on the site gets zone 0.
    """
    if not spec.contains_pixel(*pixel):
        raise ValueError(f"pixel {pixel} outside {spec.m}x{spec.m} grid")
    center = spec.pixel_center(*pixel)
    bearing, dist = angle_and_distance(cell, center)
    if dist == 0.0:
        return 0
    delta = _wrap_pi(bearing - cell.azimuth)
    if -AOA_BORESIGHT_HALF_WIDTH <= delta <= AOA_BORESIGHT_HALF_WIDTH:
        return 0
    return 1 if delta > 0 else -1


def ta_zone_layer(spec: GridSpec, cell: CellInfo) -> np.ndarray:
    """Vectorized TA ring index for every pixel, shape (m, m), dtype int8."""
    cx, cy = spec.center_coords()
    dist = np.hypot(cx - cell.site_position[0], cy - cell.site_position[1])
    zones = np.minimum((dist / TA_GRANULARITY_M).astype(np.int64), TA_ZONE_COUNT - 1)
    return zones.astype(np.int8)


def aoa_zone_layer(spec: GridSpec, cell: CellInfo) -> np.ndarray:
    """Vectorized AoA sector index (-1, 0, 1) for every pixel, dtype int8."""
    cx, cy = spec.center_coords()
    dx = cx - cell.site_position[0]
    dy = cy - cell.site_position[1]
    bearing = np.arctan2(dx, dy)
    delta = (bearing - cell.azimuth + math.pi) % (2.0 * math.pi) - math.pi
    # The modulo above yields [-pi, pi); fold -pi onto +pi to match the
    # scalar (-pi, pi] convention.
    delta = np.where(delta == -math.pi, math.pi, delta)
    zones = np.where(delta > AOA_BORESIGHT_HALF_WIDTH, 1, 0).astype(np.int8)
    zones = np.where(delta < -AOA_BORESIGHT_HALF_WIDTH, -1, zones).astype(np.int8)
    zones[(dx == 0.0) & (dy == 0.0)] = 0
    return zones


# ---------------------------------------------------------------------------
# Coverage grid file format
#
# Plain-text, single file:
#   line 1: "hotloc-grid,1"                      (magic, format version)
#   header rows: m,<int> / pixel_size,<float> / origin,<x>,<y> /
#                q_rxlevmin,<float> / cells,<count>
#   cell rows:   cell,<id>,<x>,<y>,<azimuth_deg>,<nb1;nb2;...>
#   marker row:  rsrp
#   layer rows:  <cell_id>,<i>,<j>,<rsrp_dbm>    (absent pair = no coverage)
# ---------------------------------------------------------------------------

_GRID_MAGIC = "hotloc-grid,1"


def save_grid(grid: CoverageGrid, path: str | Path) -> None:
    """Write a coverage grid to its CSV-based interchange format."""
    spec = grid.spec
    lines = [_GRID_MAGIC]
    lines.append(f"m,{spec.m}")
    lines.append(f"pixel_size,{spec.pixel_size!r}")
    lines.append(f"origin,{spec.origin[0]!r},{spec.origin[1]!r}")
    lines.append(f"q_rxlevmin,{grid.q_rxlevmin!r}")
    lines.append(f"cells,{grid.n_cells}")
    for cell in grid.cells:
        az_deg = math.degrees(cell.azimuth)
        nbs = ";".join(cell.neighbors)
        lines.append(
            f"cell,{cell.cell_id},{cell.site_position[0]!r},"
            f"{cell.site_position[1]!r},{az_deg!r},{nbs}"
        )
    lines.append("rsrp")
    for k, cell in enumerate(grid.cells):
        layer = grid.rsrp[k]
        ii, jj = np.nonzero(~np.isnan(layer))
        for i, j, value in zip(ii.tolist(), jj.tolist(), layer[ii, jj].tolist()):
            lines.append(f"{cell.cell_id},{i},{j},{value!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid(path: str | Path) -> CoverageGrid:
    """Read a coverage grid written by :func:`save_grid`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _GRID_MAGIC:
        raise ValueError(f"{path}: not a hotloc coverage grid file")

    header: dict[str, list[str]] = {}
    cells: list[CellInfo] = []
    row = 1
    while row < len(lines) and lines[row] != "rsrp":
        parts = lines[row].split(",")
        if parts[0] == "cell":
            _, cell_id, x, y, az_deg, nbs = parts
            neighbors = tuple(n for n in nbs.split(";") if n)
            cells.append(
                CellInfo(
                    cell_id=cell_id,
                    site_position=(float(x), float(y)),
                    azimuth=math.radians(float(az_deg)) % (2.0 * math.pi),
                    neighbors=neighbors,
                )
            )
        else:
            header[parts[0]] = parts[1:]
        row += 1
    if row == len(lines):
        raise ValueError(f"{path}: missing rsrp section")

    spec = GridSpec(
        m=int(header["m"][0]),
        pixel_size=float(header["pixel_size"][0]),
        origin=(float(header["origin"][0]), float(header["origin"][1])),
    )
    declared = int(header["cells"][0])
    if declared != len(cells):
        raise ValueError(f"{path}: header declares {declared} cells, found {len(cells)}")

    index = {c.cell_id: k for k, c in enumerate(cells)}
    rsrp = np.full((len(cells), spec.m, spec.m), np.nan)
    for line in lines[row + 1 :]:
        if not line:
            continue
        cell_id, i, j, value = line.split(",")
        rsrp[index[cell_id], int(i), int(j)] = float(value)

    return CoverageGrid(
        spec=spec,
        cells=cells,
        rsrp=rsrp,
        q_rxlevmin=float(header["q_rxlevmin"][0]),
    )
