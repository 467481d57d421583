"""Run orchestration: artifact layout, reload, comparison, sweeps."""

import json
import shutil

import numpy as np
import pytest

from foilwind.config import ConfigError, parse_config_text, serialize_config
from foilwind.runner import compare_runs, execute_run, load_run, run_sweep
from foilwind.variants import FormulationVariant

from helpers import small_config


def _fast(variant, **kw):
    # one full period, capped at 100 steps/period: enough for the mean-loss
    # window and the agreement metric while staying quick
    return small_config(variant, amplitude=96.0, periods=1.0, dt_max=2e-4, **kw)


@pytest.fixture(scope="module")
def run_pair(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    out = {}
    for variant in (FormulationVariant.FCM_T_OMEGA, FormulationVariant.FCM_H_PHI):
        cfg = _fast(variant)
        trace, summary = execute_run(cfg, root / variant.value)
        out[variant] = (root / variant.value, trace, summary)
    return out


def test_artifact_files(run_pair):
    out, trace, summary = run_pair[FormulationVariant.FCM_T_OMEGA]
    for name in ("config.txt", "trace.csv", "slices.csv", "summary.json"):
        assert (out / name).is_file()
    # two snapshots: peak drive of the last period and the final state
    assert (out / "fields_0.vtk").is_file()
    assert (out / "fields_1.vtk").is_file()
    assert len(summary["snapshot_times"]) == 2
    assert summary["snapshot_times"][1] == pytest.approx(trace.times[-1])


def test_summary_contents(run_pair):
    _, trace, summary = run_pair[FormulationVariant.FCM_T_OMEGA]
    assert summary["variant"] == "fcm-t-omega"
    assert summary["preset"] is None
    assert summary["preset_version"] == 1
    assert summary["n_turns"] == 2
    assert summary["accepted_steps"] == len(trace.times) - 1
    assert summary["linsys_count"] == trace.linsys_count
    assert summary["mean_losses_w"] > 0
    assert summary["peak_losses_w"] == pytest.approx(trace.p.max())
    assert summary["excitation"] == {"amplitude": 96.0, "frequency": 50.0}
    assert summary["mesh"]["n_alpha"] == 4 and summary["mesh"]["n_beta"] == 8
    assert summary["dof_blocks"]["voltage"] == 4
    assert summary["n_dofs"] == sum(summary["dof_blocks"].values())
    # the drive never pushes far beyond the critical current
    assert 0 < summary["max_j_over_jc_eng"] < 2.0


def test_config_echo_parses_back(run_pair):
    out, _, _ = run_pair[FormulationVariant.FCM_T_OMEGA]
    echoed = parse_config_text((out / "config.txt").read_text())
    assert echoed == _fast(FormulationVariant.FCM_T_OMEGA)


def test_load_run_round_trip(run_pair):
    out, trace, summary = run_pair[FormulationVariant.FCM_T_OMEGA]
    loaded_summary, series = load_run(out)
    assert loaded_summary == summary
    assert series.variant == "fcm-t-omega"
    assert series.times.size == trace.times.size
    assert np.allclose(series.times, trace.times, rtol=1e-12)
    assert np.allclose(series.p, trace.p, rtol=1e-11, atol=1e-300)


def test_load_run_rejects_non_run_dir(tmp_path):
    with pytest.raises(ConfigError, match="not a run directory"):
        load_run(tmp_path)


def test_compare_runs_cross_variant(run_pair):
    dir_a = run_pair[FormulationVariant.FCM_T_OMEGA][0]
    dir_b = run_pair[FormulationVariant.FCM_H_PHI][0]
    report = compare_runs(dir_a, dir_b)
    assert set(report) >= {"r_squared", "one_minus_r2", "rel_err_P", "run", "reference"}
    assert report["run"]["variant"] == "fcm-t-omega"
    assert report["reference"]["variant"] == "fcm-h-phi"
    # same physics, same mesh: the two homogenized variants nearly coincide
    assert report["one_minus_r2"] < 1e-3
    assert report["rel_err_P"] < 1e-2


def test_compare_runs_rejects_different_drive(run_pair, tmp_path):
    src = run_pair[FormulationVariant.FCM_T_OMEGA][0]
    clone = tmp_path / "clone"
    shutil.copytree(src, clone)
    summary = json.loads((clone / "summary.json").read_text())
    summary["excitation"]["amplitude"] = 48.0
    (clone / "summary.json").write_text(json.dumps(summary))
    with pytest.raises(ConfigError, match="amplitude"):
        compare_runs(clone, src)


def test_short_run_reports_no_mean(tmp_path):
    cfg = small_config(FormulationVariant.FCM_T_OMEGA, periods=0.25, dt_max=2e-4)
    _, summary = execute_run(cfg, tmp_path / "short")
    assert summary["mean_losses_w"] is None
    assert summary["peak_losses_w"] >= 0.0


def test_preset_name_recorded(tmp_path):
    cfg = small_config(FormulationVariant.FCM_T_OMEGA, periods=0.25, dt_max=2e-4)
    _, summary = execute_run(cfg, tmp_path / "tagged", preset="custom_tag")
    assert summary["preset"] == "custom_tag"


def test_sweep_last_value_is_reference(tmp_path):
    cfg = _fast(FormulationVariant.FCM_T_OMEGA)
    rows = run_sweep(cfg, "n_alpha", [4.0, 6.0], tmp_path / "sweep")
    assert (tmp_path / "sweep" / "n_alpha_4").is_dir()
    assert (tmp_path / "sweep" / "n_alpha_6").is_dir()
    assert (tmp_path / "sweep" / "sweep.csv").is_file()
    assert [row["value"] for row in rows] == [4.0, 6.0]
    assert rows[-1]["one_minus_r2"] == 0.0
    assert rows[0]["one_minus_r2"] > 0.0
    assert rows[1]["n_dofs"] > rows[0]["n_dofs"]
    for row in rows:
        assert row["P"] > 0
        assert row["linsys_count"] > 0


def test_sweep_rejects_empty_values(tmp_path):
    cfg = _fast(FormulationVariant.FCM_T_OMEGA)
    with pytest.raises(ConfigError, match="non-empty"):
        run_sweep(cfg, "n_alpha", [], tmp_path / "sweep")
