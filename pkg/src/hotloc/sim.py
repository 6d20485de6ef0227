"""Seeded discrete-event traffic simulator.

An alternative KPI source to the analytic oracle: UEs arrive as a Poisson
stream, are dropped onto pixels sampled from the ground-truth weight map,
download a fixed-size file at a round-robin capacity share, optionally
move at constant speed with specular reflection at the map edges, and hand
over when a configured neighbor beats the serving cell by the margin. The
per-cell counters accumulated along the way are emitted as a KpiSet.

Tick order: arrivals, scheduling (rate share, counter sampling), file
completion, movement, handover checks. All randomness flows from one
seeded generator, so identical inputs give identical output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from hotloc.grid import (
    TA_ZONE_COUNT,
    UNCOVERED,
    CoverageGrid,
    ServerMaps,
    aoa_zone_layer,
    ta_zone_layer,
)
from hotloc.kpi import CellKpis, KpiSet, WeightMap

KPI_SOURCE_SIM = "sim"


@dataclass(frozen=True)
class SimConfig:
    """Simulation knobs.

    ``arrival_rate`` may be zero (an idle network is a valid, if dull,
    run); everything else defining capacity or time must be positive.
    ``max_ue_per_cell`` is the resource-slot cap used both for admission
    and for declaring a tick fully loaded.
    """

    arrival_rate: float
    file_size_bits: float = 1e6
    mobile_fraction: float = 0.2
    speed_kmh: float = 8.33
    handover_margin_db: float = 6.0
    duration_s: float = 3600.0
    tick_s: float = 1.0
    capacity_per_cell_bps: float = 2e7
    mu0_bps: float = 2e6
    max_ue_per_cell: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be non-negative")
        for name in ("file_size_bits", "duration_s", "tick_s", "capacity_per_cell_bps", "mu0_bps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.mobile_fraction <= 1.0:
            raise ValueError("mobile_fraction must lie in [0, 1]")
        if self.speed_kmh < 0 or self.handover_margin_db < 0:
            raise ValueError("speed and handover margin must be non-negative")
        if self.max_ue_per_cell < 1:
            raise ValueError("max_ue_per_cell must be at least 1")

    @property
    def n_ticks(self) -> int:
        return max(1, int(round(self.duration_s / self.tick_s)))


@dataclass
class UeSession:
    """One UE's state while its download is in flight."""

    ue_id: int
    x: float
    y: float
    pixel: tuple[int, int]
    serving: int
    remaining_bits: float
    mobile: bool
    heading: float
    start_tick: int

    def __post_init__(self):
        if self.remaining_bits < 0:
            raise ValueError("remaining bits must be non-negative")


class _EventLog:
    def __init__(self, path: str | None):
        self._fh = open(path, "w", newline="") if path else None
        self._writer = None
        if self._fh:
            self._writer = csv.writer(self._fh)
            self._writer.writerow(["t", "event", "cell_id", "ue_id"])

    def write(self, t: int, event: str, cell_id: str, ue_id: int) -> None:
        if self._writer:
            self._writer.writerow([t, event, cell_id, ue_id])

    def close(self) -> None:
        if self._fh:
            self._fh.close()


def _pixel_of(x: float, y: float, grid: CoverageGrid) -> tuple[int, int]:
    spec = grid.spec
    i = int((x - spec.origin[0]) / spec.pixel_size)
    j = int((y - spec.origin[1]) / spec.pixel_size)
    return (min(max(i, 0), spec.m - 1), min(max(j, 0), spec.m - 1))


def _reflect(pos: float, lo: float, hi: float) -> tuple[float, bool]:
    """Fold a coordinate back into [lo, hi]; the flag reports whether an
    odd number of reflections occurred (the velocity component flips)."""
    span = hi - lo
    flipped = False
    while not lo <= pos <= hi:
        if pos < lo:
            pos = 2 * lo - pos
        else:
            pos = 2 * hi - pos
        flipped = not flipped
        if span <= 0:
            return lo, flipped
    return pos, flipped


def run_simulation(
    config: SimConfig,
    truth: WeightMap,
    grid: CoverageGrid,
    servers: ServerMaps,
    event_log_path: str | None = None,
) -> KpiSet:
    """Run the discrete-event loop and aggregate per-cell counters into a
    KpiSet (source ``"sim"``)."""
    spec = grid.spec
    if truth.values.shape != (spec.m, spec.m):
        raise ValueError("truth map does not match the grid")
    total_weight = truth.total()
    if total_weight <= 0:
        raise ValueError("truth map is all zero, nowhere to place UEs")
    if abs(total_weight - 1.0) > 1e-6:
        raise ValueError("truth map must be normalized")

    n_cells = len(grid.cells)
    rng = np.random.default_rng(config.seed)
    position_cdf = np.cumsum(truth.values.reshape(-1))
    position_cdf /= position_cdf[-1]

    ta_layers = np.stack([ta_zone_layer(spec, c) for c in grid.cells])
    aoa_layers = np.stack([aoa_zone_layer(spec, c) for c in grid.cells])
    rsrp = grid.rsrp
    neighbor_idx = [
        [grid.cell_index(nb) for nb in cell.neighbors] for cell in grid.cells
    ]

    ta_counts = np.zeros((n_cells, TA_ZONE_COUNT), dtype=np.int64)
    aoa_counts = np.zeros((n_cells, 3), dtype=np.int64)
    report_counts: list[dict[int, int]] = [dict() for _ in range(n_cells)]
    full_ticks = np.zeros(n_cells, dtype=np.int64)
    completed: list[list[float]] = [[] for _ in range(n_cells)]

    active: list[UeSession] = []
    attached = np.zeros(n_cells, dtype=np.int64)
    next_ue = 0
    speed_mps = config.speed_kmh / 3.6
    xmin, ymin = spec.origin
    xmax = xmin + spec.m * spec.pixel_size
    ymax = ymin + spec.m * spec.pixel_size
    log = _EventLog(event_log_path)

    try:
        for t in range(config.n_ticks):
            # Arrivals: positions from the traffic weights, admission by
            # coverage and slot availability.
            n_arrivals = int(rng.poisson(config.arrival_rate * config.tick_s))
            if n_arrivals:
                pix = np.searchsorted(position_cdf, rng.random(n_arrivals), side="right")
                pix = np.minimum(pix, position_cdf.size - 1)
                mobile = rng.random(n_arrivals) < config.mobile_fraction
                headings = rng.uniform(0.0, 2.0 * math.pi, n_arrivals)
                for k in range(n_arrivals):
                    i, j = divmod(int(pix[k]), spec.m)
                    best = int(servers.best[i, j])
                    ue_id = next_ue
                    next_ue += 1
                    if best == UNCOVERED:
                        log.write(t, "block", "", ue_id)
                        continue
                    if attached[best] >= config.max_ue_per_cell:
                        log.write(t, "block", grid.cells[best].cell_id, ue_id)
                        continue
                    x, y = spec.pixel_center(i, j)
                    active.append(
                        UeSession(
                            ue_id=ue_id,
                            x=x,
                            y=y,
                            pixel=(i, j),
                            serving=best,
                            remaining_bits=config.file_size_bits,
                            mobile=bool(mobile[k]),
                            heading=float(headings[k]),
                            start_tick=t,
                        )
                    )
                    attached[best] += 1
                    log.write(t, "arrive", grid.cells[best].cell_id, ue_id)

            # Scheduling: equal capacity share capped at mu0; sample the
            # occupancy and load counters while the shares are known.
            full_ticks[attached >= config.max_ue_per_cell] += 1
            for ue in active:
                cell = ue.serving
                i, j = ue.pixel
                ta_counts[cell, ta_layers[cell, i, j]] += 1
                aoa_counts[cell, aoa_layers[cell, i, j] + 1] += 1
                rate = min(config.mu0_bps, config.capacity_per_cell_bps / attached[cell])
                ue.remaining_bits = max(0.0, ue.remaining_bits - rate * config.tick_s)

            # Completions.
            still_active: list[UeSession] = []
            for ue in active:
                if ue.remaining_bits > 0:
                    still_active.append(ue)
                    continue
                elapsed = (t - ue.start_tick + 1) * config.tick_s
                completed[ue.serving].append(config.file_size_bits / elapsed)
                attached[ue.serving] -= 1
                log.write(t, "complete", grid.cells[ue.serving].cell_id, ue.ue_id)
            active = still_active

            # Movement with specular reflection.
            if speed_mps > 0:
                step = speed_mps * config.tick_s
                for ue in active:
                    if not ue.mobile:
                        continue
                    x = ue.x + step * math.sin(ue.heading)
                    y = ue.y + step * math.cos(ue.heading)
                    x, flip_x = _reflect(x, xmin, xmax)
                    y, flip_y = _reflect(y, ymin, ymax)
                    heading = ue.heading
                    if flip_x:
                        heading = -heading
                    if flip_y:
                        heading = math.pi - heading
                    ue.x, ue.y = x, y
                    ue.heading = heading % (2.0 * math.pi)
                    ue.pixel = _pixel_of(x, y, grid)

            # Handover: best configured neighbor beating serving by the
            # margin files a report; the switch needs a free slot.
            for ue in active:
                cell = ue.serving
                nbrs = neighbor_idx[cell]
                if not nbrs:
                    continue
                i, j = ue.pixel
                serving_rsrp = rsrp[cell, i, j]
                if math.isnan(serving_rsrp):
                    serving_rsrp = -math.inf
                target = -1
                target_rsrp = -math.inf
                for nb in nbrs:
                    level = rsrp[nb, i, j]
                    if not math.isnan(level) and level > target_rsrp:
                        target = nb
                        target_rsrp = level
                if target < 0 or target_rsrp <= serving_rsrp + config.handover_margin_db:
                    continue
                counts = report_counts[cell]
                counts[target] = counts.get(target, 0) + 1
                if attached[target] >= config.max_ue_per_cell:
                    continue
                attached[cell] -= 1
                attached[target] += 1
                ue.serving = target
                log.write(t, "handover", grid.cells[target].cell_id, ue.ue_id)
    finally:
        log.close()

    cells_out: dict[str, CellKpis] = {}
    for idx, cell in enumerate(grid.cells):
        occupancy = int(ta_counts[idx].sum())
        if occupancy:
            ta = ta_counts[idx] / occupancy
            aoa = aoa_counts[idx] / occupancy
        else:
            ta = np.zeros(TA_ZONE_COUNT)
            aoa = np.zeros(3)
        reports = report_counts[idx]
        total_reports = sum(reports.values())
        neighbor_level = {
            grid.cells[nb].cell_id: count / total_reports
            for nb, count in sorted(reports.items())
        }
        rates = completed[idx]
        if rates:
            amt = float(np.mean(rates))
            hmt = float(len(rates) / np.sum(1.0 / np.asarray(rates)))
            hmt = min(hmt, amt)
        else:
            amt = hmt = 0.0
        cells_out[cell.cell_id] = CellKpis(
            ta=ta,
            aoa=aoa,
            neighbor_level=neighbor_level,
            load_time=float(full_ticks[idx] / config.n_ticks),
            amt_bps=amt,
            hmt_bps=hmt,
        )

    kpis = KpiSet(cells=cells_out, source=KPI_SOURCE_SIM, window_s=config.duration_s)
    kpis.validate(grid)
    return kpis
