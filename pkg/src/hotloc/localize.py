"""Projection of per-cell KPIs onto the coverage grid and their fusion
into one smoothed traffic estimate.

Five per-KPI weight maps are built first: TA ring fractions (step 1), AoA
sector fractions (step 2), the neighbor level of each pixel's second-best
server (step 3), averaged load over similarly loaded handover candidates
on congested cells (step 4) and the scaled arithmetic/harmonic throughput
gap split by cell center versus edge (step 5). Step 6 fuses them with
non-negative importance factors and step 7 applies the Gaussian kernel
smoother.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from hotloc.grid import CoverageGrid, ServerMaps, aoa_zone_layer, ta_zone_layer
from hotloc.kpi import KPI_LABELS, LABEL_FUSED, LABEL_SMOOTHED, KpiSet, WeightMap
from hotloc.smoothing import DEFAULT_TAIL, smooth_grid

KPI_COUNT = 5


@dataclass(frozen=True)
class ImportanceVector:
    """Non-negative fusion factors for the five KPI maps, in the order
    TA, AoA, neighbor level, load, throughput gap."""

    values: tuple[float, float, float, float, float]

    def __post_init__(self):
        if len(self.values) != KPI_COUNT:
            raise ValueError(f"importance vector needs {KPI_COUNT} entries")
        if any(v < 0 for v in self.values):
            raise ValueError(f"importance factors must be non-negative, got {self.values}")

    @classmethod
    def of(cls, *values: float) -> "ImportanceVector":
        return cls(tuple(float(v) for v in values))

    @classmethod
    def uniform(cls) -> "ImportanceVector":
        return cls.of(*([1.0 / KPI_COUNT] * KPI_COUNT))

    @classmethod
    def basis(cls, *indices: int) -> "ImportanceVector":
        """Unit weight on the given zero-based KPI indices, zero elsewhere."""
        values = [0.0] * KPI_COUNT
        for idx in indices:
            values[idx] = 1.0
        return cls(tuple(values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


@dataclass(frozen=True)
class LocalizerParams:
    """Thresholds and bandwidths for the localization steps.

    ``epsilon`` bounds the load difference for two cells to count as
    behaving alike; ``lambda_ho_db`` bounds their RSRP difference at a
    pixel (defaults to the handover margin); ``rho_threshold`` marks a
    serving cell as congested. ``rsrp0_dbm`` splits cell center from edge
    (None selects the per-cell median serving RSRP). ``mu0_bps`` scales the
    throughput gap and ``h`` is the smoothing bandwidth in squared
    normalized map units.
    """

    epsilon: float = 0.1
    lambda_ho_db: float = 6.0
    rho_threshold: float = 0.7
    rsrp0_dbm: float | None = None
    mu0_bps: float = 2e6
    h: float = 1e-3
    kernel_tail: float = DEFAULT_TAIL

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0 < self.rho_threshold < 1:
            raise ValueError(f"rho_threshold must be in (0, 1), got {self.rho_threshold}")
        if self.mu0_bps <= 0:
            raise ValueError("mu0_bps must be positive")
        if self.h <= 0:
            raise ValueError("smoothing bandwidth h must be positive")


def _check_kpis(kpis: KpiSet, grid: CoverageGrid) -> None:
    missing = [c.cell_id for c in grid.cells if c.cell_id not in kpis.cells]
    if missing:
        raise ValueError(f"KPI set is missing cells {missing}")


def _kpi_map(values: np.ndarray, grid: CoverageGrid, label: str) -> WeightMap:
    return WeightMap(values, grid.spec.pixel_size, label, grid.spec.origin)


def step1_ta(kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps) -> WeightMap:
    """Each covered pixel gets its serving cell's TA fraction for the ring
    the pixel lies in."""
    _check_kpis(kpis, grid)
    out = np.zeros((grid.spec.m, grid.spec.m))
    for k, cell in enumerate(grid.cells):
        mask = servers.best == k
        if not mask.any():
            continue
        zones = ta_zone_layer(grid.spec, cell)
        out[mask] = kpis.cells[cell.cell_id].ta[zones[mask]]
    return _kpi_map(out, grid, KPI_LABELS[0])


def step2_aoa(kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps) -> WeightMap:
    """Each covered pixel gets its serving cell's AoA fraction for the
    bearing sector the pixel lies in."""
    _check_kpis(kpis, grid)
    out = np.zeros((grid.spec.m, grid.spec.m))
    for k, cell in enumerate(grid.cells):
        mask = servers.best == k
        if not mask.any():
            continue
        zones = aoa_zone_layer(grid.spec, cell) + 1
        out[mask] = kpis.cells[cell.cell_id].aoa[zones[mask]]
    return _kpi_map(out, grid, KPI_LABELS[1])


def step3_neighbor(kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps) -> WeightMap:
    """Each pixel gets the serving cell's neighbor level of the pixel's
    second-best server; zero when there is none or it is not a configured
    neighbor."""
    _check_kpis(kpis, grid)
    out = np.zeros((grid.spec.m, grid.spec.m))
    for k, cell in enumerate(grid.cells):
        mask = servers.best == k
        if not mask.any():
            continue
        levels = kpis.cells[cell.cell_id].neighbor_level
        if not levels:
            continue
        # Lookup table second-best index -> level, zero outside S_k; the
        # spare last slot absorbs the -1 "no second best" sentinel.
        table = np.zeros(grid.n_cells + 1)
        for nb_id, frac in levels.items():
            table[grid.cell_index(nb_id)] = frac
        out[mask] = table[servers.second[mask]]
    return _kpi_map(out, grid, KPI_LABELS[2])


def step4_load(
    kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps, params: LocalizerParams
) -> WeightMap:
    """On pixels of congested cells, average the load over the cells that
    are both similarly loaded and received within the handover margin at
    that pixel; elsewhere zero.

    The serving cell always belongs to that candidate set, so the average
    is well defined.
    """
    _check_kpis(kpis, grid)
    rho = np.array([kpis.cells[c.cell_id].load_time for c in grid.cells])
    out = np.zeros((grid.spec.m, grid.spec.m))
    for k in range(grid.n_cells):
        if rho[k] <= params.rho_threshold:
            continue
        mask = servers.best == k
        if not mask.any():
            continue
        similar = np.flatnonzero(np.abs(rho[k] - rho) < params.epsilon)
        own = grid.rsrp[k][mask]
        rho_sum = np.zeros(own.shape)
        count = np.zeros(own.shape)
        for other in similar:
            diff = np.abs(own - grid.rsrp[other][mask])
            near = np.nan_to_num(diff, nan=np.inf) < params.lambda_ho_db
            rho_sum += np.where(near, rho[other], 0.0)
            count += near
        out[mask] = rho_sum / count
    return _kpi_map(out, grid, KPI_LABELS[3])


def _rsrp0_per_cell(grid: CoverageGrid, servers: ServerMaps, params: LocalizerParams) -> np.ndarray:
    """Center/edge RSRP threshold per cell: the configured value, or the
    median serving RSRP over the cell's covered pixels."""
    if params.rsrp0_dbm is not None:
        return np.full(grid.n_cells, params.rsrp0_dbm)
    thresholds = np.full(grid.n_cells, -np.inf)
    for k in range(grid.n_cells):
        mask = servers.best == k
        if mask.any():
            thresholds[k] = np.median(grid.rsrp[k][mask])
    return thresholds


def step5_throughput(
    kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps, params: LocalizerParams
) -> WeightMap:
    """Scaled throughput gap, assigned directly on cell-center pixels and
    complemented on cell-edge pixels.

    The gap is (AMT - HMT) / mu0 clamped to [0, 1]; pixels whose serving
    RSRP is at or above the center/edge threshold count as center.
    """
    _check_kpis(kpis, grid)
    rsrp0 = _rsrp0_per_cell(grid, servers, params)
    out = np.zeros((grid.spec.m, grid.spec.m))
    for k, cell in enumerate(grid.cells):
        ck = kpis.cells[cell.cell_id]
        if ck.amt_bps < ck.hmt_bps:
            raise ValueError(
                f"invalid KPI pair for cell {cell.cell_id!r}: "
                f"amt={ck.amt_bps} < hmt={ck.hmt_bps}"
            )
        mask = servers.best == k
        if not mask.any():
            continue
        gap = min(max((ck.amt_bps - ck.hmt_bps) / params.mu0_bps, 0.0), 1.0)
        center = grid.rsrp[k][mask] >= rsrp0[k]
        out[mask] = np.where(center, gap, 1.0 - gap)
    return _kpi_map(out, grid, KPI_LABELS[4])


def step6_combine(
    maps: tuple[WeightMap, WeightMap, WeightMap, WeightMap, WeightMap],
    x: ImportanceVector,
    normalize: bool = False,
) -> WeightMap:
    """Fuse the five KPI maps into one weighted sum.

    With ``normalize`` each map is scaled to unit total first (maps with
    zero total stay zero); by default the maps enter as-is.
    """
    if len(maps) != KPI_COUNT:
        raise ValueError(f"expected {KPI_COUNT} maps")
    first = maps[0]
    fused = np.zeros_like(first.values)
    for weight, wmap in zip(x.values, maps):
        if wmap.values.shape != first.values.shape or wmap.pixel_size != first.pixel_size:
            raise ValueError("KPI maps must share one grid")
        values = wmap.values
        if normalize:
            total = values.sum()
            if total > 0:
                values = values / total
        fused = fused + weight * values
    return WeightMap(fused, first.pixel_size, LABEL_FUSED, first.origin)


def step7_smooth(
    fused: WeightMap,
    params: LocalizerParams,
    uncovered_mask: np.ndarray | None = None,
    backend: str | None = None,
) -> WeightMap:
    """Smooth the fused map with the truncated Gaussian kernel average.

    When an uncovered-pixel mask is given, those pixels are zeroed in the
    result since no traffic can originate there.
    """
    smoothed = smooth_grid(fused.values, params.h, params.kernel_tail, backend=backend)
    # The kernel average of non-negative data can pick up sign noise at the
    # float epsilon level; clip to keep the weight-map contract.
    smoothed = np.clip(smoothed, 0.0, None)
    if uncovered_mask is not None:
        smoothed = np.where(uncovered_mask, 0.0, smoothed)
    return WeightMap(smoothed, fused.pixel_size, LABEL_SMOOTHED, fused.origin)


def compute_kpi_maps(
    kpis: KpiSet, grid: CoverageGrid, servers: ServerMaps, params: LocalizerParams
) -> tuple[WeightMap, WeightMap, WeightMap, WeightMap, WeightMap]:
    """Run steps 1 to 5 and return the five per-KPI maps."""
    return (
        step1_ta(kpis, grid, servers),
        step2_aoa(kpis, grid, servers),
        step3_neighbor(kpis, grid, servers),
        step4_load(kpis, grid, servers, params),
        step5_throughput(kpis, grid, servers, params),
    )


@dataclass
class LocalizationResult:
    """All intermediate and final maps of one localization run."""

    kpi_maps: tuple[WeightMap, WeightMap, WeightMap, WeightMap, WeightMap]
    fused: WeightMap
    smoothed: WeightMap
    x: ImportanceVector

    def relabeled_fused(self, label: str) -> WeightMap:
        return replace(self.fused, label=label)


def localize(
    kpis: KpiSet,
    grid: CoverageGrid,
    servers: ServerMaps,
    x: ImportanceVector,
    params: LocalizerParams,
    kpi_maps: tuple[WeightMap, ...] | None = None,
    backend: str | None = None,
) -> LocalizationResult:
    """Full pipeline: per-KPI maps, fusion with ``x`` and smoothing.

    Precomputed KPI maps may be passed to avoid recomputation when the
    fusion factors were just optimized on them.
    """
    if kpi_maps is None:
        kpi_maps = compute_kpi_maps(kpis, grid, servers, params)
    fused = step6_combine(kpi_maps, x)
    smoothed = step7_smooth(fused, params, servers.uncovered_mask(), backend=backend)
    return LocalizationResult(kpi_maps=tuple(kpi_maps), fused=fused, smoothed=smoothed, x=x)
