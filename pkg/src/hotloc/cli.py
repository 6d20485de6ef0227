"""Command-line entry points.

``hotloc pipeline`` drives the whole flow from one config file; the other
subcommands expose the individual stages so artifacts can be regenerated
or swapped out piecemeal. All stage outputs land in ``--out`` and the
stage inputs are read from ``--in`` (default: the output directory), so a
single working directory accumulates the full artifact set.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from hotloc.evaluate import compare_variants, save_report, write_report_csvs
from hotloc.grid import GridSpec, compute_server_maps, load_grid, save_grid
from hotloc.kpi import (
    KPI_LABELS,
    load_kpi_set,
    load_potential_spec,
    load_weight_map,
    oracle_kpis,
    rasterize_potential_map,
    save_kpi_set,
    save_potential_spec,
    save_weight_map,
)
from hotloc.localize import ImportanceVector, compute_kpi_maps, localize
from hotloc.nnls import IterationLimitError, build_system, solve_nnls
from hotloc.pipeline import (
    ALL_VARIANTS,
    KPI_SOURCE_ORACLE,
    KPI_SOURCE_SIM,
    VARIANT_COLUMNS,
    VARIANT_STEP6,
    VARIANT_STEP7,
    StageError,
    restricted_fit,
    run_pipeline,
)
from hotloc.scenario import ConfigError, build_scenario, load_scenario_config
from hotloc.sim import run_simulation

_VARIANT_FLAGS = {"ta-only": "ta_only", "ta-neighbor": "ta_neighbor", "all": "all"}


def _fail(stage: str, message: str) -> None:
    click.echo(f"hotloc: stage {stage}: {message}", err=True)
    sys.exit(1)


def _load_config(path: str, seed: int | None):
    try:
        return load_scenario_config(path, seed_override=seed)
    except ConfigError as exc:
        _fail("config", str(exc))


def _parse_x_override(_ctx, _param, value):
    if value is None:
        return None
    parts = value.split(",")
    if len(parts) != 5:
        raise click.BadParameter("expected five comma-separated values, e.g. 0.2,0.2,0.2,0.2,0.2")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    if any(v < 0 for v in values):
        raise click.BadParameter("importance factors must be non-negative")
    return values


def _parse_seeds(_ctx, _param, value):
    if value is None:
        return None
    try:
        return tuple(int(p) for p in value.split(","))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


config_opt = click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False), help="Scenario configuration (JSON).")
seed_opt = click.option("--seed", type=int, default=None, help="Master seed override.")
out_opt = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
in_opt = click.option("--in", "in_dir", type=click.Path(exists=True, file_okay=False), default=None, help="Input artifact directory (default: the output directory).")


@click.group()
def main() -> None:
    """KPI-driven traffic hotspot localization toolkit."""


def _artifact_dir(in_dir: str | None, out_dir: str) -> Path:
    path = Path(in_dir) if in_dir else Path(out_dir)
    return path


@main.command("gen-scenario")
@config_opt
@seed_opt
@out_opt
def gen_scenario_cmd(config_path: str, seed: int | None, out_dir: str) -> None:
    """Build the synthetic scenario: coverage grid, ground truth and
    potential-hotspot prior."""
    config = _load_config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        scenario = build_scenario(config)
        save_grid(scenario.grid, out / "grid.csv")
        save_weight_map(scenario.truth, out / "truth.csv")
        save_potential_spec(scenario.potential, out / "potential.json")
    except (ConfigError, ValueError, OSError) as exc:
        _fail("scenario", str(exc))
    click.echo(f"scenario written to {out} ({len(scenario.grid.cells)} cells, m={config.spec.m})")


def _load_grid_truth(art: Path):
    grid = load_grid(art / "grid.csv")
    truth = load_weight_map(art / "truth.csv")
    return grid, compute_server_maps(grid), truth


@main.command("oracle-kpis")
@config_opt
@seed_opt
@out_opt
@in_opt
def oracle_kpis_cmd(config_path: str, seed: int | None, out_dir: str, in_dir: str | None) -> None:
    """Derive per-cell KPIs analytically from the ground-truth map."""
    config = _load_config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        grid, servers, truth = _load_grid_truth(_artifact_dir(in_dir, out_dir))
        kpis = oracle_kpis(truth, grid, servers, config.oracle)
        save_kpi_set(kpis, out / "kpis.json")
    except (ValueError, OSError) as exc:
        _fail("kpis", str(exc))
    click.echo(f"oracle KPIs for {len(kpis.cells)} cells written to {out / 'kpis.json'}")


@main.command("simulate")
@config_opt
@seed_opt
@out_opt
@in_opt
@click.option("--events/--no-events", default=False, help="Also write the per-tick event log.")
def simulate_cmd(config_path: str, seed: int | None, out_dir: str, in_dir: str | None, events: bool) -> None:
    """Run the discrete-event simulator and emit its KPI set."""
    config = _load_config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        grid, servers, truth = _load_grid_truth(_artifact_dir(in_dir, out_dir))
        log_path = str(out / "events.csv") if events else None
        kpis = run_simulation(config.sim, truth, grid, servers, log_path)
        save_kpi_set(kpis, out / "kpis.json")
    except (ValueError, OSError) as exc:
        _fail("kpis", str(exc))
    click.echo(f"simulated KPIs for {len(kpis.cells)} cells written to {out / 'kpis.json'}")


@main.command("optimize")
@config_opt
@seed_opt
@out_opt
@in_opt
def optimize_cmd(config_path: str, seed: int | None, out_dir: str, in_dir: str | None) -> None:
    """Fit the importance factors to the potential-hotspot prior."""
    _load_config(config_path, seed)  # validates; optimize itself is config-free
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _artifact_dir(in_dir, out_dir)
    try:
        maps = tuple(load_weight_map(art / f"{label}.csv") for label in KPI_LABELS)
        potential = load_potential_spec(art / "potential.json")
        ref = maps[0]
        spec = GridSpec(m=ref.m, pixel_size=ref.pixel_size, origin=ref.origin)
        potential_map = rasterize_potential_map(potential, spec)
        system = build_system(maps, potential_map)
        result = solve_nnls(system)
    except IterationLimitError as exc:
        _fail("optimize", str(exc))
    except (ValueError, OSError) as exc:
        _fail("optimize", str(exc))
    total = float(sum(result.x))
    doc = {
        "x": [float(v) for v in result.x],
        "residual": result.residual,
        "iterations": result.iterations,
        "x_normalized": [float(v) / total for v in result.x] if total > 0 else None,
        "fitted": True,
    }
    with open(out / "importance.json", "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    click.echo(
        "x = (" + ", ".join(f"{v:.4g}" for v in result.x) + f"), residual {result.residual:.6g}"
    )


@main.command("localize")
@config_opt
@seed_opt
@out_opt
@in_opt
@click.option("--x-override", callback=_parse_x_override, default=None, help="Importance factors a,b,c,d,e (skips the fitted vector).")
@click.option("--variant", type=click.Choice(sorted(_VARIANT_FLAGS)), default="all", help="KPI subset to fuse.")
def localize_cmd(
    config_path: str,
    seed: int | None,
    out_dir: str,
    in_dir: str | None,
    x_override: tuple[float, ...] | None,
    variant: str,
) -> None:
    """Build the per-KPI maps and the fused and smoothed estimates."""
    config = _load_config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _artifact_dir(in_dir, out_dir)
    try:
        grid = load_grid(art / "grid.csv")
        servers = compute_server_maps(grid)
        kpis = load_kpi_set(art / "kpis.json")
        kpi_maps = compute_kpi_maps(kpis, grid, servers, config.localizer)

        variant_key = _VARIANT_FLAGS[variant]
        if variant_key in VARIANT_COLUMNS:
            if x_override is not None:
                raise ValueError("--x-override only applies to --variant all")
            potential = load_potential_spec(art / "potential.json")
            potential_map = rasterize_potential_map(potential, grid.spec)
            x = restricted_fit(kpi_maps, potential_map, VARIANT_COLUMNS[variant_key])
        elif x_override is not None:
            x = ImportanceVector(x_override)
        else:
            importance_path = art / "importance.json"
            if not importance_path.exists():
                raise ValueError(
                    "no importance vector: run optimize first or pass --x-override"
                )
            doc = json.loads(importance_path.read_text())
            x = ImportanceVector(tuple(float(v) for v in doc["x"]))

        result = localize(kpis, grid, servers, x, config.localizer, kpi_maps=kpi_maps)
        for label, wmap in zip(KPI_LABELS, result.kpi_maps):
            save_weight_map(wmap, out / f"{label}.csv")
        save_weight_map(result.fused, out / "fused.csv")
        save_weight_map(result.smoothed, out / "smoothed.csv")
    except (ValueError, OSError) as exc:
        _fail("localize", str(exc))
    click.echo(
        f"fused and smoothed maps written to {out} "
        f"(x = {', '.join(f'{v:.4g}' for v in x.values)})"
    )


@main.command("evaluate")
@config_opt
@seed_opt
@out_opt
@in_opt
def evaluate_cmd(config_path: str, seed: int | None, out_dir: str, in_dir: str | None) -> None:
    """Score the estimated maps in the artifact directory against the
    ground truth."""
    config = _load_config(config_path, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = _artifact_dir(in_dir, out_dir)
    try:
        truth = load_weight_map(art / "truth.csv")
        runs = {}
        for name, filename in ((VARIANT_STEP6, "fused.csv"), (VARIANT_STEP7, "smoothed.csv")):
            path = art / filename
            if path.exists():
                runs[name] = load_weight_map(path)
        if not runs:
            raise ValueError("nothing to evaluate: no fused.csv or smoothed.csv found")
        report = compare_variants(truth, runs, config.evaluation)
        save_report(report, out / "report.json")
        write_report_csvs(report, out / "peaks.csv", out / "detection.csv", out / "cdf.csv")
    except (ValueError, OSError) as exc:
        _fail("evaluate", str(exc))
    means = ", ".join(f"{k}: {v.mean_distance_m:.1f} m" for k, v in sorted(report.variants.items()))
    click.echo(f"report written to {out / 'report.json'} ({means})")


@main.command("pipeline")
@config_opt
@seed_opt
@out_opt
@click.option("--kpi-source", type=click.Choice([KPI_SOURCE_ORACLE, KPI_SOURCE_SIM]), default=KPI_SOURCE_ORACLE, help="Where the per-cell KPIs come from.")
@click.option("--x-override", callback=_parse_x_override, default=None, help="Importance factors a,b,c,d,e (skips optimization).")
@click.option("--events/--no-events", default=False, help="Write the simulator event log.")
@click.option("--seeds", callback=_parse_seeds, default=None, help="Comma-separated seed list: run once per seed into seed-N subdirectories and collect seeds.csv.")
def pipeline_cmd(
    config_path: str,
    seed: int | None,
    out_dir: str,
    kpi_source: str,
    x_override: tuple[float, ...] | None,
    events: bool,
    seeds: tuple[int, ...] | None,
) -> None:
    """Run every stage from scenario generation to the evaluation report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if seeds is not None:
        rows = []
        for s in seeds:
            config = _load_config(config_path, s)
            try:
                result = run_pipeline(
                    config, out / f"seed-{s}", kpi_source=kpi_source,
                    x_override=x_override, event_log=events,
                )
            except StageError as exc:
                _fail(exc.stage, f"(seed {s}) {exc}")
            for label, variant in sorted(result.report.variants.items()):
                for p, detected in sorted(variant.detection.items()):
                    rows.append((s, label, variant.mean_distance_m, p, detected))
        with open(out / "seeds.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "variant", "mean_distance_m", "p", "detected"])
            for row in rows:
                writer.writerow([row[0], row[1], repr(row[2]), repr(row[3]), repr(row[4])])
        click.echo(f"{len(seeds)} runs under {out}, per-seed rows in {out / 'seeds.csv'}")
        return

    config = _load_config(config_path, seed)
    try:
        result = run_pipeline(
            config, out, kpi_source=kpi_source, x_override=x_override, event_log=events
        )
    except StageError as exc:
        _fail(exc.stage, str(exc))
    x_str = ", ".join(f"{v:.4g}" for v in result.x.values)
    click.echo(f"x = ({x_str})")
    for label in ALL_VARIANTS:
        variant = result.report.variants[label]
        click.echo(f"{label}: mean peak distance {variant.mean_distance_m:.1f} m")
    click.echo(f"artifacts in {out}")


if __name__ == "__main__":
    main()
