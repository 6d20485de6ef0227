"""Per-cell KPI containers, ground-truth traffic generation, the potential
hotspot prior and the analytic KPI oracle.

The oracle plays the role of an ideal network management export: given the
true pixel traffic weights it computes exactly the per-cell distributions
(TA rings, AoA sectors, handover-candidate levels), the load time and the
arithmetic/harmonic mean throughputs that the localization steps later
invert.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hotloc.grid import (
    CoverageGrid,
    GridSpec,
    ServerMaps,
    TA_ZONE_COUNT,
    aoa_zone_layer,
    ta_zone_layer,
)

DIST_TOL = 1e-9

# WeightMap label vocabulary used by the pipeline stages.
LABEL_TRUTH = "ground_truth"
LABEL_FUSED = "fused"
LABEL_SMOOTHED = "smoothed"
LABEL_POTENTIAL = "potential"
KPI_LABELS = ("q1", "q2", "q3", "q4", "q5")


@dataclass
class CellKpis:
    """The five KPI values reported for one cell.

    ``ta`` holds the six ring fractions (index = ring), ``aoa`` the three
    sector fractions in zone order (-1, 0, +1), ``neighbor_level`` the
    handover-candidate fractions keyed by neighbor cell id. Distribution
    KPIs either sum to 1 or are all zero (empty cell).
    """

    ta: np.ndarray
    aoa: np.ndarray
    neighbor_level: dict[str, float]
    load_time: float
    amt_bps: float
    hmt_bps: float

    def __post_init__(self):
        self.ta = np.asarray(self.ta, dtype=np.float64)
        self.aoa = np.asarray(self.aoa, dtype=np.float64)

    def aoa_fraction(self, zone: int) -> float:
        """Fraction for AoA zone in {-1, 0, 1}."""
        return float(self.aoa[zone + 1])

    def validate(self) -> None:
        if self.ta.shape != (TA_ZONE_COUNT,) or self.aoa.shape != (3,):
            raise ValueError("ta must have 6 entries and aoa 3")
        for name, values in (("ta", self.ta), ("aoa", self.aoa)):
            total = float(values.sum())
            if values.min() < 0 or not (abs(total) <= DIST_TOL or abs(total - 1) <= DIST_TOL):
                raise ValueError(f"{name} fractions must sum to 0 or 1, got {total}")
        if self.neighbor_level:
            total = sum(self.neighbor_level.values())
            if min(self.neighbor_level.values()) < 0 or abs(total - 1) > DIST_TOL:
                raise ValueError(f"neighbor_level must sum to 1, got {total}")
        if not 0.0 <= self.load_time <= 1.0:
            raise ValueError(f"load_time must be in [0, 1], got {self.load_time}")
        if self.amt_bps < 0 or self.hmt_bps < 0 or self.hmt_bps > self.amt_bps:
            raise ValueError(
                f"throughputs need 0 <= hmt <= amt, got amt={self.amt_bps} hmt={self.hmt_bps}"
            )

    @classmethod
    def empty(cls) -> "CellKpis":
        return cls(np.zeros(TA_ZONE_COUNT), np.zeros(3), {}, 0.0, 0.0, 0.0)

    def is_empty(self) -> bool:
        return (
            self.ta.sum() == 0.0
            and self.aoa.sum() == 0.0
            and not self.neighbor_level
            and self.load_time == 0.0
            and self.amt_bps == 0.0
            and self.hmt_bps == 0.0
        )


@dataclass
class KpiSet:
    """KPIs for every cell of a coverage grid plus provenance metadata."""

    cells: dict[str, CellKpis]
    source: str = "oracle"
    window_s: float | None = None

    def validate(self, grid: CoverageGrid | None = None) -> None:
        for cell_id, kpis in self.cells.items():
            try:
                kpis.validate()
            except ValueError as exc:
                raise ValueError(f"cell {cell_id!r}: {exc}") from exc
        if grid is not None:
            expected = {c.cell_id for c in grid.cells}
            if set(self.cells) != expected:
                raise ValueError("KPI set does not cover exactly the grid's cells")

    def all_empty(self) -> bool:
        return all(k.is_empty() for k in self.cells.values())


@dataclass
class WeightMap:
    """A non-negative m x m traffic weight raster with a stage label."""

    values: np.ndarray
    pixel_size: float
    label: str
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"weight map must be square, got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("weight map entries must be finite")
        if self.values.min() < 0:
            raise ValueError("weight map entries must be non-negative")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def total(self) -> float:
        return float(self.values.sum())

    def normalized(self, label: str | None = None) -> "WeightMap":
        """Copy scaled to unit total; raises on an all-zero map."""
        total = self.total()
        if total <= 0:
            raise ValueError("cannot normalize an all-zero weight map")
        return WeightMap(self.values / total, self.pixel_size, label or self.label, self.origin)

    def pixel_center(self, i: int, j: int) -> tuple[float, float]:
        x0, y0 = self.origin
        return (x0 + (i + 0.5) * self.pixel_size, y0 + (j + 0.5) * self.pixel_size)


@dataclass(frozen=True)
class HotspotZone:
    """One potential hotspot region: a disk or an axis-aligned rectangle
    with a non-negative importance weight."""

    shape: str
    importance: float
    center: tuple[float, float] | None = None
    radius: float | None = None
    corners: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if self.importance < 0:
            raise ValueError("zone importance must be non-negative")
        if self.shape == "disk":
            if self.center is None or self.radius is None or self.radius <= 0:
                raise ValueError("disk zone needs a center and a positive radius")
        elif self.shape == "rect":
            if self.corners is None:
                raise ValueError("rect zone needs corners (xmin, ymin, xmax, ymax)")
            xmin, ymin, xmax, ymax = self.corners
            if xmin >= xmax or ymin >= ymax:
                raise ValueError("rect zone corners are degenerate")
        else:
            raise ValueError(f"unknown zone shape {self.shape!r}")


@dataclass
class PotentialHotspotSpec:
    """User-authored list of likely hotspot zones."""

    zones: list[HotspotZone] = field(default_factory=list)


@dataclass(frozen=True)
class TrafficComponent:
    """One traffic concentration: Gaussian bump center, spread and amplitude."""

    center: tuple[float, float]
    sigma: float
    amplitude: float

    def __post_init__(self):
        if self.sigma <= 0 or self.amplitude <= 0:
            raise ValueError("component sigma and amplitude must be positive")


@dataclass
class TrafficModel:
    """Mixture model for synthetic ground-truth traffic.

    The generated weight per pixel is ``exp(sum of Gaussian bumps + noise)
    - 1 + floor``, clipped at zero and normalized, which gives spatially
    clustered weights with a heavy upper tail and one peak per component.
    """

    components: list[TrafficComponent] = field(default_factory=list)
    floor: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.components and self.floor <= 0:
            raise ValueError("traffic model needs at least one component or a positive floor")


def generate_ground_truth(model: TrafficModel, spec: GridSpec, seed: int) -> WeightMap:
    """Sample the normalized ground-truth traffic weight map."""
    cx, cy = spec.center_coords()
    bumps = np.zeros((spec.m, spec.m))
    for comp in model.components:
        d2 = (cx - comp.center[0]) ** 2 + (cy - comp.center[1]) ** 2
        bumps += comp.amplitude * np.exp(-d2 / (2.0 * comp.sigma**2))
    if model.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        bumps += rng.normal(0.0, model.noise_sigma, size=bumps.shape)
    weights = np.clip(np.exp(bumps) - 1.0 + model.floor, 0.0, None)
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate traffic model: generated map is all zero")
    return WeightMap(weights / total, spec.pixel_size, LABEL_TRUTH, spec.origin)


def rasterize_potential_map(spec_zones: PotentialHotspotSpec, spec: GridSpec) -> WeightMap:
    """Paint zone importances onto the grid; overlaps keep the maximum."""
    cx, cy = spec.center_coords()
    values = np.zeros((spec.m, spec.m))
    for zone in spec_zones.zones:
        if zone.shape == "disk":
            d2 = (cx - zone.center[0]) ** 2 + (cy - zone.center[1]) ** 2
            inside = d2 <= zone.radius**2
        else:
            xmin, ymin, xmax, ymax = zone.corners
            inside = (cx >= xmin) & (cx <= xmax) & (cy >= ymin) & (cy <= ymax)
        values[inside] = np.maximum(values[inside], zone.importance)
    return WeightMap(values, spec.pixel_size, LABEL_POTENTIAL, spec.origin)


@dataclass(frozen=True)
class OracleParams:
    """Knobs for the analytic KPI oracle.

    ``rho_cap`` converts a cell's traffic mass into a load time via
    ``min(1, mass / rho_cap)``. The throughput curve is piecewise linear in
    RSRP from ``r_min_bps`` at the admission threshold up to ``mu0_bps`` at
    ``rsrp_hi_dbm`` and flat outside that span.
    """

    rho_cap: float = 0.1
    mu0_bps: float = 2e6
    r_min_bps: float = 1e5
    rsrp_hi_dbm: float = -80.0

    def __post_init__(self):
        if self.rho_cap <= 0 or self.mu0_bps <= 0:
            raise ValueError("rho_cap and mu0_bps must be positive")
        if not 0 < self.r_min_bps <= self.mu0_bps:
            raise ValueError("need 0 < r_min_bps <= mu0_bps")


def throughput_curve(rsrp_dbm: np.ndarray, q_rxlevmin: float, params: OracleParams) -> np.ndarray:
    """Monotone RSRP to per-UE throughput mapping (bit/s)."""
    span = params.rsrp_hi_dbm - q_rxlevmin
    if span <= 0:
        raise ValueError("rsrp_hi_dbm must exceed the admission threshold")
    frac = np.clip((np.asarray(rsrp_dbm, dtype=np.float64) - q_rxlevmin) / span, 0.0, 1.0)
    return params.r_min_bps + (params.mu0_bps - params.r_min_bps) * frac


def oracle_kpis(
    truth: WeightMap,
    grid: CoverageGrid,
    servers: ServerMaps,
    params: OracleParams,
) -> KpiSet:
    """Compute the KPI set an ideal management system would report for a
    known traffic distribution.

    Per cell: TA/AoA fractions are the truth mass per zone over the cell's
    mass; neighbor levels are the mass split by second-best server,
    restricted to the configured neighbor list and renormalized; load time
    is the capped cell mass; the two mean throughputs are the traffic
    weighted arithmetic and harmonic means of the RSRP-derived per-pixel
    throughput. Cells without traffic get all-zero KPIs.
    """
    m = grid.spec.m
    if truth.values.shape != (m, m) or servers.best.shape != (m, m):
        raise ValueError("truth map, grid and server maps must share one grid")

    cells: dict[str, CellKpis] = {}
    for k, cell in enumerate(grid.cells):
        mask = servers.best == k
        w = truth.values[mask]
        total = float(w.sum())
        if total <= 0.0:
            cells[cell.cell_id] = CellKpis.empty()
            continue

        ta_zones = ta_zone_layer(grid.spec, cell)[mask]
        ta = np.bincount(ta_zones, weights=w, minlength=TA_ZONE_COUNT) / total

        aoa_zones = aoa_zone_layer(grid.spec, cell)[mask] + 1
        aoa = np.bincount(aoa_zones, weights=w, minlength=3) / total

        second = servers.second[mask]
        neighbor_level: dict[str, float] = {}
        masses = []
        for nb_id in cell.neighbors:
            nb_idx = grid.cell_index(nb_id)
            masses.append((nb_id, float(w[second == nb_idx].sum())))
        nb_total = sum(mass for _, mass in masses)
        if nb_total > 0:
            neighbor_level = {nb: mass / nb_total for nb, mass in masses}

        load = min(1.0, total / params.rho_cap)

        rates = throughput_curve(grid.rsrp[k][mask], grid.q_rxlevmin, params)
        amt = float((w * rates).sum()) / total
        hmt = total / float((w / rates).sum())
        hmt = min(hmt, amt)

        cells[cell.cell_id] = CellKpis(ta, aoa, neighbor_level, load, amt, hmt)

    return KpiSet(cells=cells, source="oracle", window_s=None)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_WMAP_MAGIC = "hotloc-weightmap,1"


def save_weight_map(wmap: WeightMap, path: str | Path) -> None:
    """Write a weight map as CSV: header rows, then one i,j,weight row per
    pixel in row-major order."""
    lines = [_WMAP_MAGIC]
    lines.append(f"m,{wmap.m}")
    lines.append(f"pixel_size,{wmap.pixel_size!r}")
    lines.append(f"label,{wmap.label}")
    lines.append(f"origin,{wmap.origin[0]!r},{wmap.origin[1]!r}")
    lines.append("i,j,weight")
    for i in range(wmap.m):
        row = wmap.values[i].tolist()
        for j in range(wmap.m):
            lines.append(f"{i},{j},{row[j]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_weight_map(path: str | Path) -> WeightMap:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _WMAP_MAGIC:
        raise ValueError(f"{path}: not a hotloc weight map file")
    header: dict[str, list[str]] = {}
    row = 1
    while row < len(lines) and lines[row] != "i,j,weight":
        parts = lines[row].split(",")
        header[parts[0]] = parts[1:]
        row += 1
    m = int(header["m"][0])
    origin = (0.0, 0.0)
    if "origin" in header:
        origin = (float(header["origin"][0]), float(header["origin"][1]))
    values = np.zeros((m, m))
    for line in lines[row + 1 :]:
        if not line:
            continue
        i, j, value = line.split(",")
        values[int(i), int(j)] = float(value)
    return WeightMap(values, float(header["pixel_size"][0]), header["label"][0], origin)


def save_kpi_set(kpis: KpiSet, path: str | Path) -> None:
    """Write a KPI set as JSON with one object per cell."""
    doc = {
        "source": kpis.source,
        "window_s": kpis.window_s,
        "cells": [
            {
                "cell_id": cell_id,
                "ta": [float(v) for v in k.ta],
                "aoa": [float(v) for v in k.aoa],
                "neighbor_level": {nb: float(v) for nb, v in k.neighbor_level.items()},
                "load_time": float(k.load_time),
                "amt_bps": float(k.amt_bps),
                "hmt_bps": float(k.hmt_bps),
            }
            for cell_id, k in kpis.cells.items()
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_kpi_set(path: str | Path) -> KpiSet:
    doc = json.loads(Path(path).read_text())
    cells = {
        entry["cell_id"]: CellKpis(
            ta=np.array(entry["ta"], dtype=np.float64),
            aoa=np.array(entry["aoa"], dtype=np.float64),
            neighbor_level={nb: float(v) for nb, v in entry["neighbor_level"].items()},
            load_time=float(entry["load_time"]),
            amt_bps=float(entry["amt_bps"]),
            hmt_bps=float(entry["hmt_bps"]),
        )
        for entry in doc["cells"]
    }
    return KpiSet(cells=cells, source=doc["source"], window_s=doc["window_s"])


def save_potential_spec(spec_zones: PotentialHotspotSpec, path: str | Path) -> None:
    zones = []
    for zone in spec_zones.zones:
        entry: dict = {"shape": zone.shape, "importance": zone.importance}
        if zone.shape == "disk":
            entry["center"] = list(zone.center)
            entry["radius"] = zone.radius
        else:
            entry["corners"] = list(zone.corners)
        zones.append(entry)
    Path(path).write_text(json.dumps({"zones": zones}, indent=2) + "\n")


def load_potential_spec(path: str | Path) -> PotentialHotspotSpec:
    doc = json.loads(Path(path).read_text())
    zones = []
    for entry in doc["zones"]:
        if entry["shape"] == "disk":
            zones.append(
                HotspotZone(
                    shape="disk",
                    importance=float(entry["importance"]),
                    center=tuple(entry["center"]),
                    radius=float(entry["radius"]),
                )
            )
        else:
            zones.append(
                HotspotZone(
                    shape="rect",
                    importance=float(entry["importance"]),
                    corners=tuple(entry["corners"]),
                )
            )
    return PotentialHotspotSpec(zones=zones)
