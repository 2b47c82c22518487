#!/usr/bin/env python3
"""
Tests for the limit theory: exact indices, limit functions, covariance
matrices and the hypothesis diagnostics.

Closed forms for Uniform(0, 1) with Z = 0.5 and d(u) = u (Shorrocks):
    J = 5/12, g(y) = 2(1 - y)(1 - 2y), psi(u) = -2(1/2 - u)^2 on u <= 1/2,
    Gamma_1 = 247/720, Gamma_2 = 13/720, Gamma_3 = -112/720, Gamma = 37/180.
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add the project root to the path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.asymptotics.bundle import (
    exact_index,
    kakwani_exact_candidates,
    kakwani_literal_k,
    r_k,
    theorem_one_bundle,
)
from src.asymptotics.covariance import (
    ANALYTIC,
    PLUGIN,
    CovarianceEstimate,
    covariance_analytic,
    covariance_plugin,
)
from src.asymptotics.diagnostics import format_diagnostics, hypothesis_diagnostics
from src.asymptotics.empirical import alpha_term, beta_term, quantile_process_term
from src.asymptotics.limits import LimitFunctions, limit_functions
from src.asymptotics.models import DistributionModel, GaussianCopula, Lognormal, PointMass, Uniform
from src.errors import (
    DegenerateCrossSection,
    DegenerateModel,
    InternalError,
    InvalidIndexSpec,
    UnknownTime,
)
from src.indices.core import evaluate_index
from src.indices.cost import CostFunction
from src.indices.spec import IndexSpec
from src.montecarlo.process import ProcessModel, simulate_panel
from src.panel.dataset import CrossSection, PanelDataset, ThresholdSchedule
from src.wmlg_io.config import QuadratureSettings

TIMES = [1.0, 2.0]
HALF = ThresholdSchedule.constant(0.5, TIMES)
UNIFORM = DistributionModel.stationary(Uniform(), TIMES)


def uniform_model(rho: float) -> DistributionModel:
    return DistributionModel.stationary(Uniform(), TIMES, GaussianCopula("exchangeable", rho))


# Exact indices

def test_shorrocks_exact_index():
    assert exact_index(UNIFORM, 1.0, HALF, IndexSpec.shorrocks()) == pytest.approx(5 / 12, rel=1e-8)
    assert exact_index(UNIFORM, 1.0, HALF, IndexSpec.thon()) == pytest.approx(5 / 12, rel=1e-8)


def test_fgt_exact_index():
    # int_0^{1/2} (1 - 2y)^alpha dy = 1 / (2 (alpha + 1))
    for alpha in (0, 1, 2):
        value = exact_index(UNIFORM, 1.0, HALF, IndexSpec.fgt(alpha))
        assert value == pytest.approx(1 / (2 * (alpha + 1)), rel=1e-8)


def test_kakwani_denominator_closed_form():
    for k in (1, 2):
        bundle = theorem_one_bundle(UNIFORM, 1.0, HALF, IndexSpec.kakwani(k))
        assert bundle.H_pi == pytest.approx(0.5 ** k / (k + 1), rel=1e-8)


def test_r_k_closed_forms():
    cost = CostFunction.identity()
    assert r_k(UNIFORM, 1.0, HALF, cost, 0) == pytest.approx(0.25, rel=1e-8)
    assert r_k(UNIFORM, 1.0, HALF, cost, 1) == pytest.approx(1 / 12, rel=1e-8)
    assert r_k(UNIFORM, 1.0, HALF, cost, 2) <= r_k(UNIFORM, 1.0, HALF, cost, 1)
    with pytest.raises(InvalidIndexSpec):
        r_k(UNIFORM, 1.0, HALF, cost, -1)


def test_threshold_below_support():
    shifted = DistributionModel.stationary(Uniform(1.0, 2.0), TIMES)
    assert exact_index(shifted, 1.0, HALF, IndexSpec.kakwani(2)) == 0.0
    assert r_k(shifted, 1.0, HALF, CostFunction.identity(), 1) == 0.0
    with pytest.raises(DegenerateModel):
        theorem_one_bundle(shifted, 1.0, HALF, IndexSpec.shorrocks())


@pytest.mark.parametrize("marginal,z", [(Uniform(), 0.5), (Lognormal(0.0, 0.5), 1.0)])
@pytest.mark.parametrize("k", [1, 2])
def test_kakwani_exponent_consistency(marginal, z, k):
    """The exact index equals the direct quadrature with exponent k, not k - 1."""
    model = DistributionModel.stationary(marginal, TIMES)
    thresholds = ThresholdSchedule.constant(z, TIMES)
    exact = exact_index(model, 1.0, thresholds, IndexSpec.kakwani(k))
    candidates = kakwani_exact_candidates(model, 1.0, thresholds, CostFunction.identity(), k)
    assert candidates["exponent_k"] == pytest.approx(exact, rel=1e-8)
    assert not np.isclose(candidates["exponent_k_minus_1"], exact, rtol=1e-4)


def test_kakwani_k_cross_check():
    check = kakwani_literal_k(UNIFORM, 1.0, HALF, CostFunction.identity(), 1)
    assert check.finite_difference == pytest.approx(check.combination, rel=1e-4, abs=1e-8)
    assert set(check.to_dict()) == {"combination", "literal", "finite_difference", "literal_matches"}


def test_point_mass_is_degenerate():
    model = DistributionModel.stationary(PointMass(0.2), TIMES)
    bundle = theorem_one_bundle(model, 1.0, HALF, IndexSpec.thon())
    assert bundle.degenerate
    assert bundle.J == pytest.approx(0.6)
    assert bundle.variance == 0.0
    with pytest.raises(DegenerateModel):
        r_k(model, 1.0, HALF, CostFunction.identity(), 0)


# Limit functions and Theorem-1 bundle

def test_limit_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.2, 0.9, 100)
    y = x * rng.uniform(0.05, 0.95, 100)
    h = 1e-6
    for lf in (LimitFunctions.kakwani(1), LimitFunctions.kakwani(3), LimitFunctions.shorrocks_thon()):
        assert np.allclose(lf.dc_dy(x, y), (lf.c(x, y + h) - lf.c(x, y - h)) / (2 * h), atol=1e-6)
        assert np.allclose(lf.dc_dx(x, y), (lf.c(x + h, y) - lf.c(x - h, y)) / (2 * h), atol=1e-6)
        if lf.ratio:
            assert np.allclose(lf.dpi_dy(x, y), (lf.pi(x, y + h) - lf.pi(x, y - h)) / (2 * h), atol=1e-6)
            assert np.allclose(lf.dpi_dx(x, y), (lf.pi(x + h, y) - lf.pi(x - h, y)) / (2 * h), atol=1e-6)


def test_general_spec_needs_limit_functions():
    from src.indices.weights import WeightScheme

    spec = IndexSpec.general(WeightScheme.kakwani(2))
    with pytest.raises(InvalidIndexSpec):
        limit_functions(spec)
    with_limit = IndexSpec.general(WeightScheme.kakwani(2), limit=LimitFunctions.kakwani(2))
    assert limit_functions(with_limit).name == "kakwani(2)"


def test_shorrocks_bundle():
    bundle = theorem_one_bundle(UNIFORM, 1.0, HALF, IndexSpec.shorrocks())
    assert bundle.K == 0.0
    assert bundle.nu(0.2)[0] == pytest.approx(-1.2)
    assert bundle.g(0.2)[0] == pytest.approx(2 * 0.8 * 0.6)
    assert bundle.g(0.7)[0] == 0.0
    assert bundle.eta == pytest.approx(bundle.J, rel=1e-8)
    assert bundle.psi(np.array([0.1]))[0] == pytest.approx(-2 * 0.4 ** 2, rel=1e-6)


def test_shorrocks_variance_closed_form():
    bundle = theorem_one_bundle(UNIFORM, 1.0, HALF, IndexSpec.shorrocks())
    parts = bundle.variance_components()
    assert parts["gamma_1"] == pytest.approx(247 / 720, rel=1e-6)
    assert parts["gamma_2"] == pytest.approx(13 / 720, rel=1e-6)
    assert parts["gamma_3"] == pytest.approx(-112 / 720, rel=1e-6)
    assert bundle.variance == pytest.approx(37 / 180, rel=1e-6)


def test_representation_terms_on_a_sample():
    bundle = theorem_one_bundle(UNIFORM, 1.0, HALF, IndexSpec.shorrocks())
    y = np.random.default_rng(11).uniform(size=4000)
    stat = np.sqrt(y.size) * (evaluate_index(CrossSection.from_values(y), 0.5, IndexSpec.shorrocks()) - bundle.J)
    residual = stat - alpha_term(bundle, y) - beta_term(bundle, y)
    assert abs(residual) < 0.1
    assert quantile_process_term(bundle, y) == pytest.approx(beta_term(bundle, y), abs=0.05)


# Covariance

def test_analytic_independence():
    cov = covariance_analytic(uniform_model(0.0), TIMES, HALF, IndexSpec.shorrocks())
    assert cov.method == ANALYTIC
    assert cov.entry(1.0, 1.0) == pytest.approx(37 / 180, rel=1e-6)
    assert cov.entry(1.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert cov.entry(1.0, 2.0, "gamma_2") == pytest.approx(0.0, abs=1e-12)


def test_analytic_comonotone_equals_variance():
    cov = covariance_analytic(uniform_model(1.0), TIMES, HALF, IndexSpec.shorrocks())
    assert cov.entry(1.0, 2.0) == pytest.approx(37 / 180, rel=1e-4)


def test_analytic_gaussian_copula_is_symmetric():
    cov = covariance_analytic(uniform_model(0.6), TIMES, HALF, IndexSpec.kakwani(1), workers=2)
    gamma = cov.matrix()
    assert np.allclose(gamma, gamma.T, atol=1e-10)
    assert 0.0 < gamma[0, 1] < np.sqrt(gamma[0, 0] * gamma[1, 1])
    for component in ("gamma_1", "gamma_2", "gamma_3"):
        assert cov.matrix(component).shape == (2, 2)
    assert cov.diagnostics["centered_kappa"] is True


def test_asymmetric_joint_law_is_an_internal_error(monkeypatch):
    # A correlation that depends on the order of the times breaks Gamma(t, s) = Gamma(s, t)
    monkeypatch.setattr(DistributionModel, "correlation", lambda self, t, s: 0.3 if t < s else 0.6)
    with pytest.raises(InternalError):
        covariance_analytic(uniform_model(0.5), TIMES, HALF, IndexSpec.shorrocks(),
                            QuadratureSettings(joint_nodes=65, max_refinements=0))


def test_stray_term_variant_adds_gamma_2():
    cov = covariance_analytic(uniform_model(0.0), [1.0], HALF, IndexSpec.shorrocks())
    assert cov.stray_term_variant()[0, 0] == pytest.approx((247 + 26 - 112) / 720, rel=1e-6)


def test_plugin_matches_analytic_on_large_sample():
    process = ProcessModel(uniform_model(0.6), seed=5)
    panel = simulate_panel(process, 20000)
    plugin = covariance_plugin(panel, TIMES, HALF, IndexSpec.shorrocks())
    analytic = covariance_analytic(process.model, TIMES, HALF, IndexSpec.shorrocks())
    assert plugin.method == PLUGIN
    assert plugin.entry(1.0, 1.0) == pytest.approx(analytic.entry(1.0, 1.0), rel=0.1)
    assert plugin.entry(1.0, 2.0) == pytest.approx(analytic.entry(1.0, 2.0), rel=0.2)


def test_plugin_duplicated_panel_is_unchanged():
    panel = PanelDataset.from_arrays(np.random.default_rng(2).uniform(size=(200, 2)))
    single = covariance_plugin(panel, TIMES, HALF, IndexSpec.kakwani(2))
    double = covariance_plugin(panel.duplicated(), TIMES, HALF, IndexSpec.kakwani(2))
    assert np.allclose(single.matrix(), double.matrix(), rtol=1e-10, atol=1e-12)


def test_plugin_constant_outcomes():
    panel = PanelDataset.from_arrays(np.full((40, 2), 0.25))
    cov = covariance_plugin(panel, TIMES, HALF, IndexSpec.shorrocks())
    assert np.allclose(cov.matrix("gamma_1"), 0.0)


def test_plugin_empty_poor_set():
    panel = PanelDataset.from_arrays(np.full((40, 2), 0.75))
    with pytest.raises(DegenerateCrossSection):
        covariance_plugin(panel, TIMES, HALF, IndexSpec.shorrocks())


def test_covariance_export(tmp_path):
    cov = CovarianceEstimate.from_components(
        TIMES, np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), PLUGIN, {"n": 10})
    frame = pd.read_csv(cov.to_csv(tmp_path / "cov.csv"), index_col=0)
    assert list(frame.columns) == ["1", "2"]
    assert frame.to_numpy().tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert cov.save_json(tmp_path / "cov.json").exists()
    with pytest.raises(UnknownTime):
        cov.entry(1.0, 3.0)


# Hypothesis diagnostics

def test_constant_threshold_gives_zero_h0():
    report = hypothesis_diagnostics(UNIFORM, TIMES, HALF)
    assert [row["quotient"] for row in report.quantities["H0"]] == [0.0]
    assert report.quantities["HL1"]["holds"]


def test_moving_threshold_quotient():
    times = [0.0, 0.1, 0.2]
    model = DistributionModel.stationary(Uniform(0.0, 2.0), times)
    thresholds = ThresholdSchedule({t: 0.5 + t for t in times})
    report = hypothesis_diagnostics(model, times, thresholds, r=0.25)
    for row in report.quantities["H0"]:
        assert row["quotient"] == pytest.approx(0.1 ** 0.75)


def test_panel_jump_is_flagged():
    values = np.tile([1.0, 1.1, 1.2, 1.3], (5, 1))
    values[0, 2:] += 10.0
    panel = PanelDataset.from_arrays(values)
    report = hypothesis_diagnostics(panel, panel.times.tolist(), ThresholdSchedule.constant(5.0, panel.times))
    flagged = [issue for issue in report.flagged if issue.hypothesis == "H3"]
    assert [issue.pair for issue in flagged] == [(2.0, 3.0)]
    assert "errors" in format_diagnostics(report)


def test_two_time_panel_jump_is_flagged():
    values = np.tile(np.linspace(1.0, 2.0, 10)[:, None], (1, 2))
    values[3, 1] = 11.0
    values[3, 0] = 1.0
    panel = PanelDataset.from_arrays(values)
    report = hypothesis_diagnostics(panel, [1.0, 2.0], ThresholdSchedule.constant(5.0, [1.0, 2.0]))
    h3 = [issue for issue in report.flagged if issue.hypothesis == "H3"]
    assert [issue.pair for issue in h3] == [(1.0, 2.0)]
    assert "jump" in h3[0].message

    steady = PanelDataset.from_arrays(np.column_stack([np.linspace(1.0, 2.0, 10), np.linspace(1.1, 2.1, 10)]))
    calm = hypothesis_diagnostics(steady, [1.0, 2.0], ThresholdSchedule.constant(5.0, [1.0, 2.0]))
    assert not [issue for issue in calm.flagged if issue.hypothesis == "H3"]


def test_quotient_ceiling():
    times = [0.0, 0.1]
    model = DistributionModel.stationary(Uniform(0.0, 2.0), times, GaussianCopula.comonotone())
    thresholds = ThresholdSchedule({0.0: 0.5, 0.1: 0.6})
    assert not hypothesis_diagnostics(model, times, thresholds).flagged
    report = hypothesis_diagnostics(model, times, thresholds, quotient_ceiling=0.1)
    assert [issue.hypothesis for issue in report.flagged if "ceiling" in issue.message] == ["H0"]


def test_diagnostics_bound_checks_and_config():
    report = hypothesis_diagnostics(UNIFORM, TIMES, HALF, spec=IndexSpec.kakwani(1))
    assert report.quantities["HR3"]["1"]["H_pi"] == pytest.approx(0.25, rel=1e-8)
    clamped = hypothesis_diagnostics(UNIFORM, TIMES, HALF, r=0.7)
    assert clamped.r == 0.25
    assert clamped.error_count >= 1
    assert "0.7" in clamped.issues[0].message
    single = hypothesis_diagnostics(UNIFORM, [1.0], HALF)
    assert single.issues[0].severity == "info"
