#!/usr/bin/env python3
"""
Tests for the Monte Carlo lab: seeded processes, the CLT, consistency and
plug-in convergence experiments, coverage, the representation check and
formula arbitration.
Sizes are kept small; the full-size runs go through `main.py simulate`.
"""

import io
import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.asymptotics.models import DistributionModel, GaussianCopula, Lognormal, PointMass, Uniform
from src.display.progress import ProgressTracker, console_callback
from src.errors import ConfigError, DegenerateCrossSection
from src.indices.spec import IndexSpec
from src.montecarlo.experiments import (
    UNDETERMINED,
    _freeze,
    arbitration_experiment,
    clt_experiment,
    consistency_experiment,
    coverage_experiment,
    default_arbitration_cases,
    plugin_convergence,
    representation_check,
    variance_resolution,
)
from src.montecarlo.process import ProcessModel, simulate_panel
from src.panel.dataset import ThresholdSchedule
from src.wmlg_io.config import ExperimentSettings
from src.wmlg_io.logger import RunLogger

TIMES = [1.0, 2.0]
HALF = ThresholdSchedule.constant(0.5, TIMES)


def uniform_process(seed: int = 7, rho: float = 0.6) -> ProcessModel:
    model = DistributionModel.stationary(Uniform(), TIMES, GaussianCopula("exchangeable", rho))
    return ProcessModel(model, seed, "uniform")


def test_process_streams_are_reproducible():
    process = uniform_process()
    first = process.sample(100, 3)
    assert np.array_equal(first, uniform_process().sample(100, 3))
    assert not np.array_equal(first, process.sample(100, 4))
    assert first.shape == (100, 2)
    assert process.to_dict()["seed"] == 7


def test_process_needs_seed():
    model = DistributionModel.stationary(Uniform(), TIMES)
    with pytest.raises(ConfigError):
        ProcessModel(model, None)
    with pytest.raises(ConfigError):
        ProcessModel(model, -1)


def test_simulated_panel_correlation():
    panel = simulate_panel(uniform_process(rho=0.6), 5000)
    assert panel.n == 5000
    assert panel.times.tolist() == TIMES
    assert np.all((panel.values >= 0.0) & (panel.values <= 1.0))
    corr = np.corrcoef(panel.values[:, 0], panel.values[:, 1])[0, 1]
    # Spearman correlation of a Gaussian copula: (6 / pi) asin(rho / 2)
    assert corr == pytest.approx(6 / np.pi * np.arcsin(0.3), abs=0.05)


def test_clt_point_mass_is_exact():
    model = DistributionModel.stationary(PointMass(0.2), TIMES)
    result = clt_experiment(ProcessModel(model, 1), 50, 20, HALF, IndexSpec.thon(), 1.0)
    assert result.passed
    assert result.summary["analytic_variance"] == 0.0
    assert max(abs(v) for v in result.statistics) <= 1e-9


def test_clt_shorrocks_matches_analytic_variance():
    settings = ExperimentSettings(replications=400, sample_size=400, variance_tolerance=0.3,
                                  ks_pvalue_floor=0.001, workers=2)
    run_logger = RunLogger("clt")
    progress = ProgressTracker()
    stream = io.StringIO()
    progress.add_callback(console_callback(stream))

    result = clt_experiment(uniform_process(), 400, 400, HALF, IndexSpec.shorrocks(), 1.0,
                            settings, run_logger=run_logger, progress=progress)
    assert result.reference["Gamma_tt"] == pytest.approx(37 / 180, rel=1e-6)
    assert result.summary["variance_ok"]
    assert result.passed
    assert progress.is_complete()
    assert "clt" in stream.getvalue()

    summary = run_logger.get_run_summary()
    assert summary["experiments_completed"] == 1
    assert summary["seed"] == 7
    assert result.provenance["seed"] == 7


def test_replications_do_not_depend_on_workers():
    serial = clt_experiment(uniform_process(), 100, 30, HALF, IndexSpec.thon(), 2.0,
                            ExperimentSettings(workers=1))
    threaded = clt_experiment(uniform_process(), 100, 30, HALF, IndexSpec.thon(), 2.0,
                              ExperimentSettings(workers=3))
    assert serial.statistics == threaded.statistics


def test_representation_residual_shrinks():
    result = representation_check(uniform_process(), [100, 1600], 60, HALF, IndexSpec.shorrocks(), 1.0)
    assert result.n == [100, 1600]
    rms = result.summary["residual_rms"]
    assert rms["1600"] < rms["100"]
    assert result.summary["monotone_decrease"]
    with pytest.raises(ConfigError):
        representation_check(uniform_process(), [], 10, HALF, IndexSpec.shorrocks(), 1.0)


@pytest.mark.parametrize("marginal, z, spec", [
    (Uniform(), 0.5, IndexSpec.shorrocks()),
    (Lognormal(0.0, 0.5), 1.0, IndexSpec.kakwani(2)),
])
def test_consistency_error_shrinks_with_n(marginal, z, spec):
    model = DistributionModel.stationary(marginal, TIMES, GaussianCopula("exchangeable", 0.3))
    thresholds = ThresholdSchedule.constant(z, TIMES)
    result = consistency_experiment(ProcessModel(model, 13), [100, 1600], 40, thresholds, spec, 1.0)
    medians = result.summary["median_abs_error"]
    assert medians["1600"] < medians["100"]
    assert result.summary["monotone_decrease"]
    assert medians["1600"] < 3.0 * np.sqrt(result.reference["Gamma_tt"] / 1600)
    assert result.passed


def test_consistency_point_mass_is_exact():
    model = DistributionModel.stationary(PointMass(0.2), TIMES)
    result = consistency_experiment(ProcessModel(model, 1), [20, 40], 5, HALF, IndexSpec.thon(), 1.0)
    assert result.passed
    assert max(result.summary["median_abs_error"].values()) == 0.0
    with pytest.raises(ConfigError):
        consistency_experiment(ProcessModel(model, 1), [], 5, HALF, IndexSpec.thon(), 1.0)


def test_plugin_covariance_converges_to_quadrature():
    settings = ExperimentSettings(plugin_relative_error=0.5)
    result = plugin_convergence(uniform_process(17), [200, 3200], 20, HALF, IndexSpec.shorrocks(), 1.0, 2.0,
                                settings=settings)
    tt, ts = result.summary["relative_error_tt"], result.summary["relative_error_ts"]
    assert tt["3200"] < tt["200"]
    assert ts["3200"] < ts["200"]
    assert result.summary["monotone_decrease"]
    assert result.passed
    assert result.reference["Gamma_ts"] > 0.0
    with pytest.raises(ConfigError):
        plugin_convergence(uniform_process(), [200], 5, HALF, IndexSpec.shorrocks(), 1.0, 1.0)


def test_coverage_sanity_rails():
    model = DistributionModel((1.0, 2.0), (Uniform(0.0, 1.0), Uniform(0.0, 2.5)),
                              GaussianCopula("exchangeable", 0.5))
    process = ProcessModel(model, 3)
    never = coverage_experiment(process, 200, 20, HALF, IndexSpec.fgt(0), 1.0, 2.0, variance_override=0.0)
    always = coverage_experiment(process, 200, 20, HALF, IndexSpec.fgt(0), 1.0, 2.0,
                                 variance_override=float("inf"))
    assert never.summary["coverage"] <= 0.1
    assert always.summary["coverage"] == 1.0
    assert not never.passed and not always.passed
    assert never.reference["delta_rj"] == pytest.approx(-0.6, rel=1e-8)


def test_coverage_with_plugin_variance():
    model = DistributionModel((1.0, 2.0), (Uniform(0.0, 1.0), Uniform(0.0, 2.5)),
                              GaussianCopula("exchangeable", 0.5))
    settings = ExperimentSettings(coverage_band=(0.85, 1.0))
    result = coverage_experiment(ProcessModel(model, 11), 500, 100, HALF, IndexSpec.fgt(0), 1.0, 2.0,
                                 settings=settings)
    assert result.passed
    assert result.summary["mean_width"] > 0.0


def test_coverage_skips_replications_with_empty_poor_set():
    # at Z = 0.05 and n = 10 most cross-sections have nobody below the line
    low = ThresholdSchedule.constant(0.05, TIMES)
    for override in (None, 1.0):
        result = coverage_experiment(uniform_process(5), 10, 40, low, IndexSpec.fgt(0), 1.0, 2.0,
                                     variance_override=override)
        summary = result.summary
        assert summary["degenerate_replications"] > 0
        assert summary["usable_replications"] + summary["degenerate_replications"] == 40
        assert len(result.statistics) == summary["usable_replications"]
        assert 0.0 <= summary["coverage"] <= 1.0


def test_coverage_with_only_degenerate_replications_names_the_count():
    hopeless = ThresholdSchedule.constant(1e-6, TIMES)
    with pytest.raises(DegenerateCrossSection, match="all 5 coverage replications"):
        coverage_experiment(uniform_process(), 10, 5, hopeless, IndexSpec.fgt(0), 1.0, 2.0,
                            variance_override=1.0)


def test_arbitration_freezes_clear_cut_questions(tmp_path):
    run_logger = RunLogger("arbitration")
    result = arbitration_experiment(default_arbitration_cases(21), 400, 200, kakwani_k=2,
                                    run_logger=run_logger)
    frozen = result.summary["frozen"]
    assert frozen["kakwani_exponent"] == "k"
    assert frozen["thon_weight"] == "2n-2j+1"
    assert frozen["shorrocks_g"] == "with_gamma"
    assert result.summary["resolution"] == pytest.approx(variance_resolution(200))
    assert set(run_logger.get_run_summary()["frozen_variants"]) == set(frozen)

    data = json.loads(result.save_json(tmp_path / "arbitration.json").read_text())
    assert data["experiment"] == "arbitration"
    assert set(data["summary"]["cases"]) == {"uniform", "lognormal"}


def test_arbitration_separates_kappa_variants_with_enough_replications():
    # Uniform(0, 1), Z = 0.5: the duplicated Gamma_2 term moves Gamma by 13/148, the uncentered kappa by a third
    result = arbitration_experiment(default_arbitration_cases(8), 800, 5000, kakwani_k=2)
    assert result.summary["resolution"] < 13 / 148
    assert result.summary["frozen"]["kappa_centering"] == "centered"
    assert result.summary["checks"]["kappa_centering"]


def test_arbitration_reports_undetermined_with_few_replications():
    result = arbitration_experiment(default_arbitration_cases(8), 50, 3, kakwani_k=2)
    assert result.summary["frozen"]["kappa_centering"] == UNDETERMINED
    assert not result.summary["checks"]["kappa_centering"]
    assert not result.passed


def test_freeze_needs_a_clear_margin():
    sets = [{"centered": 0.20, "uncentered": 0.14, "duplicated_gamma_2": 0.22}]
    scores = {"centered": 0.01, "uncentered": 0.4, "duplicated_gamma_2": 0.09}
    assert _freeze(scores, sets, 0.05) == "centered"
    assert _freeze(scores, sets, 0.2) == UNDETERMINED
    # one set that separates the candidates is enough
    assert _freeze(scores, sets + [{"centered": 0.2, "uncentered": 0.2, "duplicated_gamma_2": 0.2}], 0.05) \
        == "centered"
    assert _freeze(scores, sets, None) == "centered"


def test_arbitration_needs_two_cases():
    with pytest.raises(ConfigError):
        arbitration_experiment(default_arbitration_cases(1)[:1], 100, 10)
