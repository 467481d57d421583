"""End-to-end run orchestration behind the command-line interface.

A run directory is self-describing: the echoed config, the trace and slice
CSVs, field snapshots, and a machine-readable summary.json. `compare` and
`sweep` consume only those artifacts, never in-memory state, so they work
across processes and sessions.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import postprocess
from .config import (
    PRESET_VERSION,
    ConfigError,
    RunConfig,
    apply_sweep_value,
    parse_config_text,
    serialize_config,
)
from .formulations import AssemblyContext
from .mesh import Mesh, build_geometry, mesh_structured
from .solver import SolutionTrace, run_transient
from .spaces import build_dof_layout
from .vtk_io import snapshot_fields, write_vtk

log = logging.getLogger(__name__)

SUMMARY_NAME = "summary.json"
TRACE_NAME = "trace.csv"
SLICE_NAME = "slices.csv"


def build_mesh(cfg: RunConfig) -> Mesh:
    geom = build_geometry(cfg.geometry)
    return mesh_structured(
        geom, cfg.mesh.n_alpha, cfg.mesh.n_beta, air_grading=cfg.mesh.grading
    )


def execute_run(
    cfg: RunConfig, out_dir: str | Path | None = None, preset: str | None = None
) -> tuple[SolutionTrace, dict]:
    """Run the transient problem of ``cfg`` and write all artifacts."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    wall0 = time.perf_counter()
    mesh = build_mesh(cfg)
    layout = build_dof_layout(mesh, cfg.variant, cfg.voltage_order)
    ctx = AssemblyContext(layout, cfg.materials)
    log.info(
        "run: variant=%s mesh=%dx%d cells=%d dofs=%d",
        cfg.variant.value,
        mesh.n_r - 1,
        mesh.n_z - 1,
        mesh.n_cells,
        layout.n_dofs,
    )
    trace = run_transient(cfg.solver, ctx, cfg.excitation)
    wall = time.perf_counter() - wall0

    series = postprocess.LossSeries(
        times=trace.times,
        p=trace.p,
        frequency=cfg.excitation.frequency,
        variant=cfg.variant.value,
        n_dofs=layout.n_dofs,
        n_turns=cfg.geometry.n_turns,
    )
    # runs shorter than the averaging window report no mean figure
    mean_p = (
        postprocess.mean_losses(series)
        if trace.times[-1] >= 0.5 * cfg.excitation.period
        else None
    )

    (out / "config.txt").write_text(serialize_config(cfg))
    postprocess.write_trace_csv(out / TRACE_NAME, trace)
    postprocess.write_slice_csv(out / SLICE_NAME, trace)
    snap_times = _write_snapshots(out, trace, mesh, layout, cfg)
    max_j_norm = _max_normalized_j(trace, mesh, layout, cfg)

    blocks = {name: sl.stop - sl.start for name, sl in layout.blocks.items()}
    blocks["voltage"] = layout.n_voltage_dofs
    summary = {
        "preset": preset,
        "preset_version": PRESET_VERSION,
        "variant": cfg.variant.value,
        "n_dofs": layout.n_dofs,
        "dof_blocks": blocks,
        "mesh": {
            "n_r": mesh.n_r,
            "n_z": mesh.n_z,
            "n_cells": mesh.n_cells,
            "n_alpha": mesh.n_alpha,
            "n_beta": mesh.n_beta,
        },
        "n_turns": cfg.geometry.n_turns,
        "excitation": {
            "amplitude": cfg.excitation.amplitude,
            "frequency": cfg.excitation.frequency,
        },
        "periods": cfg.solver.periods,
        "accepted_steps": int(len(trace.times) - 1),
        "linsys_count": int(trace.linsys_count),
        "wall_time_s": wall,
        "mean_losses_w": mean_p,
        "peak_losses_w": float(trace.p.max(initial=0.0)),
        "max_j_over_jc_eng": max_j_norm,
        "snapshot_times": snap_times,
    }
    (out / SUMMARY_NAME).write_text(json.dumps(summary, indent=2) + "\n")
    log.info("run artifacts written to %s (P=%s W)", out, mean_p)
    return trace, summary


def _write_snapshots(out, trace, mesh, layout, cfg) -> list[float]:
    """Field exports at peak drive of the last period and at the final time."""
    if trace.states is None or not len(trace.times):
        return []
    period = trace.excitation.period
    t_peak = trace.times[-1] - 0.75 * period
    picks = {int(np.argmin(np.abs(trace.times - t_peak))), len(trace.times) - 1}
    times = []
    for rank, idx in enumerate(sorted(picks)):
        fields = snapshot_fields(trace.states[idx], mesh, layout, cfg.materials)
        write_vtk(
            out / f"fields_{rank}.vtk",
            mesh,
            fields,
            title=f"foilwind {cfg.variant.value} t={trace.times[idx]:.8e} s",
        )
        times.append(float(trace.times[idx]))
    return times


def _max_normalized_j(trace, mesh, layout, cfg) -> float:
    if trace.states is None:
        return float("nan")
    jc_eng = cfg.materials.jc_engineering()
    coil = mesh.coil_cells
    area = mesh.area[coil]
    peak = 0.0
    for w in trace.states:
        x = (layout.curl_basis @ w[: layout.n_field_dofs])[coil]
        peak = max(peak, float(np.max(np.abs(x) / area)) / jc_eng)
    return peak


def load_run(run_dir: str | Path) -> tuple[dict, postprocess.LossSeries]:
    run_dir = Path(run_dir)
    try:
        summary = json.loads((run_dir / SUMMARY_NAME).read_text())
    except OSError as exc:
        raise ConfigError(f"{run_dir} is not a run directory: {exc}") from exc
    data = postprocess.read_trace_csv(run_dir / TRACE_NAME)
    series = postprocess.LossSeries(
        times=data["t"],
        p=data["p"],
        frequency=summary["excitation"]["frequency"],
        variant=summary["variant"],
        n_dofs=summary["n_dofs"],
        n_turns=summary["n_turns"],
    )
    return summary, series


def compare_runs(run_dir: str | Path, ref_dir: str | Path) -> dict:
    """Compare a run against a reference run (second argument)."""
    summary, series = load_run(run_dir)
    ref_summary, ref_series = load_run(ref_dir)
    for key in ("frequency", "amplitude"):
        a = summary["excitation"][key]
        b = ref_summary["excitation"][key]
        if abs(a - b) > 1e-12 * max(abs(b), 1.0):
            raise ConfigError(
                f"incompatible excitations: {key} differs ({a} vs {b})"
            )
    report = postprocess.r_squared(series, ref_series)
    return {
        "r_squared": report.r_squared,
        "one_minus_r2": report.one_minus_r2,
        "rel_err_P": report.rel_err_P,
        "interpolation": report.interpolation,
        "run": {"dir": str(run_dir), "variant": summary["variant"], "n_dofs": summary["n_dofs"]},
        "reference": {
            "dir": str(ref_dir),
            "variant": ref_summary["variant"],
            "n_dofs": ref_summary["n_dofs"],
        },
    }


def _sweep_worker(args: tuple[str, str]) -> str:
    config_text, out_dir = args
    cfg = parse_config_text(config_text, source="<sweep>")
    execute_run(cfg, out_dir)
    return out_dir


def run_sweep(
    cfg: RunConfig,
    parameter: str,
    values: list[float],
    out_root: str | Path,
    jobs: int = 1,
) -> list[dict]:
    """Run one simulation per value; the last value serves as the reference.

    Writes sweep.csv of (value, P, 1-R^2 vs the reference, n_dofs,
    linsys_count) in the given value order.
    """
    if not values:
        raise ConfigError("sweep needs a non-empty value list")
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)

    tasks = []
    for value in values:
        sub = out_root / f"{parameter}_{value:g}"
        point = apply_sweep_value(cfg, parameter, value)
        tasks.append((serialize_config(point), str(sub)))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_sweep_worker, tasks))
    else:
        for task in tasks:
            _sweep_worker(task)

    _, ref_series = load_run(tasks[-1][1])
    rows = []
    for value, (_, sub) in zip(values, tasks):
        summary, series = load_run(sub)
        if sub == tasks[-1][1]:
            one_minus_r2 = 0.0
        else:
            one_minus_r2 = postprocess.r_squared(series, ref_series).one_minus_r2
        rows.append(
            {
                "value": value,
                "P": postprocess.mean_losses(series),
                "one_minus_r2": one_minus_r2,
                "n_dofs": summary["n_dofs"],
                "linsys_count": summary["linsys_count"],
            }
        )
    postprocess.write_sweep_csv(out_root / "sweep.csv", rows)
    return rows
