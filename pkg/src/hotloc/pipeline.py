"""End-to-end pipeline: scenario construction, KPI source, importance
fitting, localization and evaluation, with every intermediate written to
the output directory.

Stages run in a fixed order and failures carry the stage name, so a
caller (the CLI in particular) can report exactly where a run died.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hotloc.evaluate import EvalReport, compare_variants, save_report, write_report_csvs
from hotloc.kpi import (
    KPI_LABELS,
    KpiSet,
    WeightMap,
    oracle_kpis,
    rasterize_potential_map,
    save_kpi_set,
    save_potential_spec,
    save_weight_map,
)
from hotloc.grid import save_grid
from hotloc.localize import (
    ImportanceVector,
    LocalizationResult,
    compute_kpi_maps,
    localize,
    step6_combine,
)
from hotloc.nnls import DesignSystem, build_system, solve_nnls
from hotloc.scenario import Scenario, ScenarioConfig, build_scenario
from hotloc.sim import run_simulation

KPI_SOURCE_ORACLE = "oracle"
KPI_SOURCE_SIM = "sim"

VARIANT_TA_ONLY = "ta_only"
VARIANT_TA_NEIGHBOR = "ta_neighbor"
VARIANT_STEP6 = "step6"
VARIANT_STEP7 = "step7"
ALL_VARIANTS = (VARIANT_TA_ONLY, VARIANT_TA_NEIGHBOR, VARIANT_STEP6, VARIANT_STEP7)

# Which KPI-map columns stay active per restricted variant.
VARIANT_COLUMNS = {
    VARIANT_TA_ONLY: (0,),
    VARIANT_TA_NEIGHBOR: (0, 2),
}


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


@dataclass
class PipelineResult:
    scenario: Scenario
    kpis: KpiSet
    kpi_maps: tuple[WeightMap, ...]
    potential_map: WeightMap
    x: ImportanceVector
    fit_residual: float | None
    fit_iterations: int | None
    localization: LocalizationResult
    variant_maps: dict[str, WeightMap]
    report: EvalReport
    out_dir: Path


def _stage(name: str):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, str(exc)) from exc

        return run

    return wrap


def restricted_fit(
    kpi_maps: tuple[WeightMap, ...], potential_map: WeightMap, columns: tuple[int, ...]
) -> ImportanceVector:
    """Importance fit with only the given KPI columns allowed to be
    non-zero (the others are forced out of the model)."""
    A = np.column_stack([kpi_maps[c].values.reshape(-1) for c in columns])
    b = potential_map.values.reshape(-1)
    result = solve_nnls(DesignSystem(A=A, b=b))
    full = np.zeros(len(kpi_maps))
    full[list(columns)] = result.x
    return ImportanceVector(tuple(float(v) for v in full))


@_stage("scenario")
def _run_scenario(config: ScenarioConfig, out: Path) -> tuple[Scenario, WeightMap]:
    scenario = build_scenario(config)
    potential_map = rasterize_potential_map(scenario.potential, config.spec)
    if potential_map.total() <= 0:
        raise ValueError("potential-hotspot spec paints no importance anywhere")
    save_grid(scenario.grid, out / "grid.csv")
    save_weight_map(scenario.truth, out / "truth.csv")
    save_potential_spec(scenario.potential, out / "potential.json")
    save_weight_map(potential_map, out / "potential.csv")
    return scenario, potential_map


@_stage("kpis")
def _run_kpis(
    scenario: Scenario, kpi_source: str, out: Path, event_log: bool
) -> KpiSet:
    config = scenario.config
    if kpi_source == KPI_SOURCE_ORACLE:
        kpis = oracle_kpis(scenario.truth, scenario.grid, scenario.servers, config.oracle)
    elif kpi_source == KPI_SOURCE_SIM:
        log_path = str(out / "events.csv") if event_log else None
        kpis = run_simulation(
            config.sim, scenario.truth, scenario.grid, scenario.servers, log_path
        )
    else:
        raise ValueError(f"unknown KPI source {kpi_source!r}")
    if kpis.all_empty():
        raise ValueError(
            "empty system: no cell accumulated any KPI mass "
            "(zero traffic or nothing admitted)"
        )
    save_kpi_set(kpis, out / "kpis.json")
    return kpis


@_stage("maps")
def _run_maps(scenario: Scenario, kpis: KpiSet, out: Path) -> tuple[WeightMap, ...]:
    maps = compute_kpi_maps(
        kpis, scenario.grid, scenario.servers, scenario.config.localizer
    )
    for label, wmap in zip(KPI_LABELS, maps):
        save_weight_map(wmap, out / f"{label}.csv")
    return maps


@_stage("optimize")
def _run_optimize(
    kpi_maps: tuple[WeightMap, ...],
    potential_map: WeightMap,
    x_override: tuple[float, ...] | None,
    out: Path,
) -> tuple[ImportanceVector, float | None, int | None]:
    if x_override is not None:
        x = ImportanceVector(tuple(float(v) for v in x_override))
        residual = None
        iterations = None
    else:
        system = build_system(tuple(kpi_maps), potential_map)
        result = solve_nnls(system)
        x = result.importance()
        residual = result.residual
        iterations = result.iterations
    total = sum(x.values)
    doc = {
        "x": list(x.values),
        "residual": residual,
        "iterations": iterations,
        "x_normalized": [v / total for v in x.values] if total > 0 else None,
        "fitted": x_override is None,
    }
    with open(out / "importance.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return x, residual, iterations


@_stage("localize")
def _run_localize(
    scenario: Scenario,
    kpis: KpiSet,
    kpi_maps: tuple[WeightMap, ...],
    potential_map: WeightMap,
    x: ImportanceVector,
    out: Path,
) -> tuple[LocalizationResult, dict[str, WeightMap]]:
    result = localize(
        kpis,
        scenario.grid,
        scenario.servers,
        x,
        scenario.config.localizer,
        kpi_maps=kpi_maps,
    )
    save_weight_map(result.fused, out / "fused.csv")
    save_weight_map(result.smoothed, out / "smoothed.csv")
    variant_maps = {
        VARIANT_STEP6: result.relabeled_fused(VARIANT_STEP6),
        VARIANT_STEP7: result.smoothed,
    }
    for name, columns in VARIANT_COLUMNS.items():
        x_restricted = restricted_fit(kpi_maps, potential_map, columns)
        fused = step6_combine(kpi_maps, x_restricted)
        variant_maps[name] = WeightMap(
            fused.values, fused.pixel_size, name, fused.origin
        )
    return result, variant_maps


@_stage("evaluate")
def _run_evaluate(
    scenario: Scenario, variant_maps: dict[str, WeightMap], out: Path
) -> EvalReport:
    report = compare_variants(
        scenario.truth,
        {name: variant_maps[name] for name in ALL_VARIANTS},
        scenario.config.evaluation,
    )
    save_report(report, out / "report.json")
    write_report_csvs(
        report, out / "peaks.csv", out / "detection.csv", out / "cdf.csv"
    )
    return report


def run_pipeline(
    config: ScenarioConfig,
    out_dir: str | Path,
    kpi_source: str = KPI_SOURCE_ORACLE,
    x_override: tuple[float, ...] | None = None,
    event_log: bool = False,
) -> PipelineResult:
    """Run every stage and leave all artifacts in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scenario, potential_map = _run_scenario(config, out)
    kpis = _run_kpis(scenario, kpi_source, out, event_log)
    kpi_maps = _run_maps(scenario, kpis, out)
    x, residual, iterations = _run_optimize(kpi_maps, potential_map, x_override, out)
    localization, variant_maps = _run_localize(
        scenario, kpis, kpi_maps, potential_map, x, out
    )
    report = _run_evaluate(scenario, variant_maps, out)

    return PipelineResult(
        scenario=scenario,
        kpis=kpis,
        kpi_maps=kpi_maps,
        potential_map=potential_map,
        x=x,
        fit_residual=residual,
        fit_iterations=iterations,
        localization=localization,
        variant_maps=variant_maps,
        report=report,
        out_dir=out,
    )
