import numpy as np
import pytest

from holdout import Dataset, ModelError, PredictorSpec, fit, stream, sure_anchor, sure_estimate, sure_variance_estimate
from holdout.simulation import DgpConfig, draw_noise, make_design
from holdout.sure import sure_analysis


def test_sure_estimate_closed_cases():
    assert sure_estimate(0.0, 50, 0.7, 50) == pytest.approx(0.7 * 50)
    assert sure_estimate(0.7 * 50, 0.0, 0.7, 50) == pytest.approx(0.0, abs=1e-12)
    a, b = sure_estimate(3.0, 4.0, 1.0, 20), sure_estimate(3.0, 4.0, 2.0, 20)
    assert sure_estimate(3.0, 4.0, 1.5, 20) == pytest.approx(0.5 * (a + b))  # linear in sigma2


def test_sure_variance_estimate_closed_cases():
    assert sure_variance_estimate(0.0, 30, 1.3, 30) == pytest.approx(2 * 30 * 1.3)
    assert sure_variance_estimate(0.0, 0.0, 0.0, 10) == 0.0


def test_sure_analysis_for_ols_matches_plug_in():
    g = np.random.default_rng(0)
    X = g.standard_normal((60, 4))
    y = X @ [1.0, 0.0, -1.0, 2.0] + g.standard_normal(60)
    s2 = 0.8
    res = sure_analysis(X, y, s2)
    rss = np.sum((fit(PredictorSpec.ols(), X, y).predict(X) - y) ** 2)
    assert res.divergence == pytest.approx(5, abs=1e-6)
    assert res.trace_h_squared == pytest.approx(5, abs=1e-6)
    assert res.sure == pytest.approx(rss + 2 * s2 * 5 - s2 * 60, rel=1e-10)
    assert res.sure_for_sure == pytest.approx(4 * rss + 4 * s2 * 5 - 2 * 60 * s2, rel=1e-10)
    assert res.per_observation == pytest.approx(res.sure / 60)


def test_saturated_ols():
    g = np.random.default_rng(1)
    X = g.standard_normal((4, 3))  # N = p + 1, RSS = 0
    res = sure_analysis(X, g.standard_normal(4), 0.5)
    assert res.per_observation == pytest.approx(0.5 * 4 * 2 / 4 - 0.5, abs=1e-10)


def test_forest_has_no_divergence():
    data = Dataset.from_arrays(np.random.default_rng(2).standard_normal((20, 2)), np.arange(20.0))
    with pytest.raises(ModelError, match="divergence unavailable"):
        sure_anchor(PredictorSpec.random_forest(), data, 1.0)


@pytest.mark.slow
def test_sure_anchor_unbiased_and_sure_for_sure_moments():
    cfg = DgpConfig(n_rows=200, n_features=10, sigma2=1.0)
    design = make_design(cfg, stream(5))
    g = stream(6)
    R, N, p = 3000, 200, 10
    sure, risk, sfs = np.empty(R), np.empty(R), np.empty(R)
    for t in range(R):
        y = design.f_true + draw_noise(design, cfg, g)
        data = Dataset.from_arrays(design.X, y)
        sure[t] = sure_anchor(PredictorSpec.ols(), data, 1.0)
        mu = fit(PredictorSpec.ols(), design.X, y).predict(design.X)
        risk[t] = np.mean((mu - design.f_true) ** 2)
        sfs[t] = sure_analysis(design.X, y, 1.0).sure_for_sure
    se = np.std(sure - risk, ddof=1) / np.sqrt(R)
    assert abs(sure.mean() - risk.mean()) < 3 * se
    # exact expectations for OLS: E[SURE-for-SURE] = 2 N sigma2 while
    # Var(SURE) = Var(RSS) = 2 sigma2^2 (N - p - 1)
    assert abs(sfs.mean() - 2 * N) < 3 * np.std(sfs, ddof=1) / np.sqrt(R)
    v = np.var(sure * N, ddof=1)
    v_se = v * np.sqrt(2 / (R - 1))
    assert abs(v - 2 * (N - p - 1)) < 3 * v_se
