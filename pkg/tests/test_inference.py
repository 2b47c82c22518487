#!/usr/bin/env python3
"""
Tests for variation inference: delta-method variances, confidence intervals
and the target verdict.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.asymptotics.covariance import PLUGIN, CovarianceEstimate
from src.asymptotics.models import DistributionModel, GaussianCopula, Uniform
from src.errors import ConfigError, NegativeVariance, UndefinedRelativeChange
from src.indices.spec import IndexSpec
from src.inference.variation import (
    Verdict,
    confidence_interval,
    delta_variances,
    format_variation_table,
    load_reference_table,
    mdg_check,
    normal_quantile,
    variation_report,
    verdict_for,
)
from src.montecarlo.process import ProcessModel, simulate_panel
from src.panel.dataset import PanelDataset, ThresholdSchedule


def make_cov(g_tt: float, g_ss: float, g_ts: float) -> CovarianceEstimate:
    gamma = np.array([[g_tt, g_ts], [g_ts, g_ss]])
    zeros = np.zeros((2, 2))
    return CovarianceEstimate.from_components([1.0, 2.0], gamma, zeros, zeros, PLUGIN)


def test_gamma_4_cases():
    assert delta_variances(make_cov(0.3, 0.3, 0.3), 0.5, 0.4, 1.0, 2.0).gamma_4 == 0.0
    assert delta_variances(make_cov(1.0, 4.0, 0.0), 0.5, 0.4, 1.0, 2.0).gamma_4 == pytest.approx(5.0)


def test_gamma_5_hand_substitution():
    dv = delta_variances(make_cov(1.0, 1.0, 0.0), 0.5, 0.4, 1.0, 2.0)
    assert dv.a1 == pytest.approx(-1.6)
    assert dv.a2 == pytest.approx(2.0)
    assert dv.gamma_5 == pytest.approx(6.56)


def test_relative_change_needs_nonzero_start():
    with pytest.raises(UndefinedRelativeChange):
        delta_variances(make_cov(1.0, 1.0, 0.0), 0.0, 0.4, 1.0, 2.0)


def test_small_negative_noise_is_clamped():
    dv = delta_variances(make_cov(0.3, 0.3, 0.3 + 1e-12), 0.5, 0.5, 1.0, 2.0)
    assert dv.gamma_4 == 0.0
    with pytest.raises(NegativeVariance):
        delta_variances(make_cov(0.3, 0.3, 0.4), 0.5, 0.5, 1.0, 2.0)


def test_confidence_intervals():
    lo, hi = confidence_interval(0.0, 1.0, 100, 0.05)
    assert (lo, hi) == (pytest.approx(-0.1959964, abs=1e-7), pytest.approx(0.1959964, abs=1e-7))
    lo, hi = confidence_interval(0.0, 1.0, 1, 0.32)
    assert hi == pytest.approx(0.9944579, abs=1e-6)
    assert lo == -hi
    assert confidence_interval(0.25, 0.0, 10, 0.05) == (0.25, 0.25)
    assert normal_quantile(0.05) == pytest.approx(1.959963984540054, abs=1e-10)


def test_confidence_interval_errors():
    with pytest.raises(NegativeVariance):
        confidence_interval(0.0, -1.0, 10, 0.05)
    with pytest.raises(ConfigError):
        confidence_interval(0.0, 1.0, 0, 0.05)
    with pytest.raises(ConfigError):
        confidence_interval(0.0, 1.0, 10, 1.0)


def test_verdicts():
    assert verdict_for((-0.7, -0.55), -0.5) is Verdict.ACHIEVED
    assert verdict_for((-0.6, -0.4), -0.5) is Verdict.INCONCLUSIVE
    assert verdict_for((-0.3, -0.1), -0.5) is Verdict.NOT_ACHIEVED
    assert verdict_for((-0.7, -0.5), -0.5) is Verdict.ACHIEVED


def test_verdict_moves_toward_achieved_when_shifted_down():
    order = [Verdict.NOT_ACHIEVED, Verdict.INCONCLUSIVE, Verdict.ACHIEVED]
    previous = 0
    for shift in np.linspace(0.0, 1.0, 21):
        rank = order.index(verdict_for((-0.3 - shift, -0.1 - shift)))
        assert rank >= previous
        previous = rank


def test_variation_report_identical_waves():
    values = np.random.default_rng(4).uniform(0.0, 20.0, size=(60, 1))
    panel = PanelDataset.from_arrays(np.hstack([values, values]))
    thresholds = ThresholdSchedule.constant(10.0, [1.0, 2.0])
    report = variation_report(panel, thresholds, IndexSpec.thon(), 1.0, 2.0, target=-0.5)
    assert report.delta_j == 0.0
    assert report.delta_rj == 0.0
    assert report.gamma_4 == pytest.approx(0.0, abs=1e-10)
    assert report.interval_absolute[0] <= report.delta_j <= report.interval_absolute[1]
    assert report.verdict == Verdict.NOT_ACHIEVED.value
    assert report.cov_method == PLUGIN


def test_variation_report_halving_scenario():
    """J(s) is 0.4 J(t) under the simulated model, so the relative change is -0.6."""
    model = DistributionModel((1.0, 2.0), (Uniform(0.0, 1.0), Uniform(0.0, 2.5)),
                              GaussianCopula("exchangeable", 0.5))
    thresholds = ThresholdSchedule.constant(0.5, [1.0, 2.0])
    panel = simulate_panel(ProcessModel(model, seed=17), 20000)
    report = variation_report(panel, thresholds, IndexSpec.fgt(0), 1.0, 2.0, target=-0.5)
    assert report.delta_rj == pytest.approx(-0.6, abs=0.03)
    assert report.interval_relative[0] <= report.delta_rj <= report.interval_relative[1]
    assert mdg_check(report, -0.5) is Verdict.ACHIEVED
    assert report.verdict == "achieved"

    analytic = variation_report(panel, thresholds, IndexSpec.fgt(0), 1.0, 2.0,
                                cov_method="analytic", model=model)
    assert analytic.gamma_5 == pytest.approx(report.gamma_5, rel=0.15)


def test_variation_report_arguments():
    panel = PanelDataset.from_arrays(np.random.default_rng(1).uniform(0.0, 20.0, size=(40, 2)))
    thresholds = ThresholdSchedule.constant(10.0, [1.0, 2.0])
    with pytest.raises(ConfigError):
        variation_report(panel, thresholds, IndexSpec.thon(), 1.0, 1.0)
    with pytest.raises(ConfigError):
        variation_report(panel, thresholds, IndexSpec.thon(), 1.0, 2.0, cov_method="analytic")
    with pytest.raises(ConfigError):
        variation_report(panel, thresholds, IndexSpec.thon(), 1.0, 2.0, cov_method="bootstrap")


def test_report_serialization(tmp_path):
    panel = PanelDataset.from_arrays(np.random.default_rng(8).uniform(0.0, 20.0, size=(50, 2)))
    thresholds = ThresholdSchedule.constant(10.0, [1.0, 2.0])
    report = variation_report(panel, thresholds, IndexSpec.kakwani(2), 1.0, 2.0)
    data = json.loads(report.save_json(tmp_path / "variation.json").read_text())
    assert "verdict" not in data and "target" not in data
    assert data["index"] == "kakwani(2)"
    assert data["u"] == pytest.approx(1.959964, abs=1e-6)
    table = format_variation_table([report])
    assert "kakwani(2)" in table
    assert "CI 95%" in table


def test_reference_table_rows():
    table = load_reference_table()
    assert table["level"] == 0.05
    labels = [row["label"] for row in table["rows"]]
    assert labels == ["SHOR", "KAK(1)", "KAK(2)", "FGT(0)", "FGT(1)", "FGT(2)"]
    shor = table["rows"][0]
    assert shor["delta_j"] == pytest.approx(-0.03024621)
    assert shor["gamma_4"] == pytest.approx(0.02353406)
    for row in table["rows"]:
        lo, hi = row["interval"]
        assert lo <= row["delta_j"] <= hi
