import math

import pytest

import flashce

TRUTH = flashce.ChannelParams(
    lambda_=0.0099, sigma_p=0.05, sigma_e=0.35, gamma_sigma_r=0.0617, gamma_mu_r=-0.5882
)
INIT = flashce.ChannelParams(
    lambda_=0.007, sigma_p=0.1, sigma_e=0.4, gamma_sigma_r=0.04, gamma_mu_r=-0.4
)


def test_params_and_layout():
    assert TRUTH.is_valid()
    assert TRUTH.warnings() == []
    layout = flashce.LevelLayout.default_mlc()
    assert layout.total_cells() == 1_000_000
    assert layout.levels == [0.0, 1.0, 2.0, 3.0]


def test_channel_evaluation():
    layout = flashce.LevelLayout.default_mlc()
    total = flashce.conditional_cdf(TRUTH, 1.0, 0.0, math.inf) - flashce.conditional_cdf(
        TRUTH, 1.0, 0.0, -math.inf
    )
    assert total == pytest.approx(1.0, abs=1e-9)
    assert flashce.mixture_pdf(TRUTH, layout, 0.5) > 0.0
    q = flashce.mixture_quantile(TRUTH, layout, 0.5)
    assert flashce.mixture_cdf(TRUTH, layout, q) == pytest.approx(0.5, abs=1e-8)
    ns = flashce.level_noise(TRUTH, 1.0, 0.0)
    assert ns.mu_r == pytest.approx(-0.5882)
    assert ns.sigma_r == pytest.approx(0.0617)


def test_binning():
    layout = flashce.LevelLayout.default_mlc()
    bins = flashce.equal_probability_bins(TRUTH, layout, 10)
    assert bins.num_bins() == 10
    for i, cut in enumerate(bins.cuts):
        assert flashce.mixture_cdf(TRUTH, layout, cut) == pytest.approx(
            (i + 1) / 10, abs=1e-8
        )
    assert flashce.effective_resolution(TRUTH, layout, bins) == 10
    mmi = flashce.mmi_bins(TRUTH, layout, 10, grid_size=500)
    assert flashce.mutual_information(TRUTH, layout, mmi) >= flashce.mutual_information(
        TRUTH, layout, bins
    ) - 1e-9
    assert flashce.discretization_error(TRUTH, layout, bins) >= 0.0


def test_estimation_round_trip():
    layout = flashce.LevelLayout.default_mlc()
    bins = flashce.equal_probability_bins(TRUTH, layout, 10)
    ctx = flashce.CostContext.analytic(TRUTH, bins, layout)
    assert flashce.cost(TRUTH, ctx) < 1e-18
    report = flashce.solve_lm(ctx, INIT)
    assert report.converged_by_step
    assert flashce.check_convergence(report.estimate, TRUTH)
    assert report.cost_trace[-1] < report.cost_trace[0]


def test_sampling_and_histograms():
    layout = flashce.LevelLayout.default_mlc(1000)
    reads = flashce.sample_reads(TRUTH, layout, seed=3)
    assert len(reads) == 4000
    assert reads == flashce.sample_reads(TRUTH, layout, seed=3)
    bins = flashce.equal_probability_bins(TRUTH, layout, 10)
    hist = flashce.measure_histogram([y for _, y in reads], bins)
    assert hist.total == 4000
    assert sum(hist.counts) == 4000


def test_default_trajectory():
    traj = flashce.default_trajectory()
    assert len(traj) == 14
    pe, params = traj[10]
    assert pe == 3000
    assert params.lambda_ == pytest.approx(0.0099)
    assert params.gamma_mu_r == pytest.approx(-0.5882)
