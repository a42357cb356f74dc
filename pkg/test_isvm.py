#!/usr/bin/env python3
"""
Tests for coefficient inversion, local regression, bootstrap bands and the
per-cluster ISVM fit.

ISVM 反演、局部回歸與自助置信帶測試。
"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import config
from src import isvm
from src import market_data as md
from src import synth
from src.errors import DataError, InsufficientObservationsError
from src.surface import SurfaceCoefficients, evaluate_surface
from src.synth import sabr_smile
from testing_utils import module_tests, run_standalone

T0 = pd.Timestamp("2022-01-23T00:00:00Z")
RHO, NU = -0.3, 1.0


def coeffs(b00=0.05, b01=0.1, b02=0.2):
    return SurfaceCoefficients(b10=0.6, b00=b00, b20=0.0, b01=b01, b11=0.0, b21=0.0, b02=b02)


def sabr_samples(n=40, labels=None, noise=1e-4, seed=0, v_range=(0.4, 1.0)):
    rng = np.random.default_rng(seed)
    tau, k = np.meshgrid(np.array([7, 14, 30, 60]) / 365.0, np.linspace(-0.05, 0.05, 9))
    tau, k = tau.ravel(), k.ravel()
    samples = []
    for i, v in enumerate(np.linspace(*v_range, n)):
        iv = sabr_smile(k, tau, v, RHO, NU) + noise * rng.standard_normal(len(k))
        label = 0 if labels is None else labels[i]
        samples.append(isvm.TimestampSample(timestamp=T0 + i * pd.Timedelta(minutes=20),
                                            tau=tau, k=k, iv=iv, v=float(v), label=label))
    return samples


def small_settings(**overrides):
    values = dict(bootstrap_samples=20, inversion="curvature_consistent")
    values.update(overrides)
    return config.IsvmSettings(**values)


def test_leading_order_inversion():
    gamma, eta2, mu = isvm.invert_coefficients(coeffs(), 0.5, "leading_order")
    assert gamma == pytest.approx(0.1)
    assert eta2 == pytest.approx(0.08)
    assert mu == pytest.approx(0.01)
    _, eta2_cc, _ = isvm.invert_coefficients(coeffs(), 0.5, "curvature_consistent")
    assert eta2_cc == pytest.approx(0.155)
    with pytest.raises(DataError):
        isvm.invert_coefficients(coeffs(), 0.0)
    with pytest.raises(DataError):
        isvm.invert_coefficients(coeffs(), 0.5, "exact")


def test_sabr_surface_inverts_to_model_functions():
    sample = sabr_samples(n=1, v_range=(0.6, 0.6), noise=0.0)
    targets, skipped = isvm.compute_targets(sample, "curvature_consistent")
    assert skipped == []
    v = 0.6
    assert targets.gamma[0] == pytest.approx(RHO * NU * v, rel=0.05)
    assert targets.eta2[0] == pytest.approx((1 - RHO ** 2) * NU ** 2 * v ** 2, rel=0.05)
    print("✅ gamma = rho nu v and eta^2 = (1 - rho^2) nu^2 v^2")


def test_sabr_gamma_sign_and_size_over_seeds():
    tau, k = np.meshgrid(np.array([7, 14, 30]) / 365.0, np.linspace(-0.1, 0.1, 17))
    tau, k = tau.ravel(), k.ravel()
    for seed in range(20):
        rng = np.random.default_rng(seed)
        rho = rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 0.7)
        nu = rng.uniform(0.8, 1.5)
        v = rng.uniform(0.4, 1.0)
        iv = sabr_smile(k, tau, v, rho, nu) + 1e-4 * rng.standard_normal(len(k))
        sample = isvm.TimestampSample(timestamp=T0, tau=tau, k=k, iv=iv, v=v)
        targets, _ = isvm.compute_targets([sample], "leading_order")
        assert np.sign(targets.gamma[0]) == np.sign(rho)
        assert targets.gamma[0] == pytest.approx(rho * nu * v, rel=0.15)


def test_gamma_survives_quote_pipeline_over_seeds():
    moneyness = np.exp(np.linspace(-0.1, 0.1, 17))
    dt = 20.0 / (config.DAYS_PER_YEAR * 24 * 60)
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        rho = rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 0.7)
        nu = rng.uniform(0.8, 1.5)
        schedule = synth.RegimeSchedule([(0, synth.sabr_model(rng.uniform(0.4, 1.0), rho, nu))])
        path = synth.simulate_paths(schedule, dt, dt, seed=seed)
        emitted = synth.emit_quotes(path, schedule, T0, pd.Timedelta(minutes=20), strike_grid=moneyness,
                                    expiry_grid=(7, 14, 30), iv_noise_sd=1e-4, missing_rate=0.0, seed=seed)

        observations = md.normalize(emitted.quotes)
        v_by_timestamp = md.instantaneous_vols(observations)
        kept = md.filter_for_isvm(observations, config.ISVM_TAU_RANGE_DAYS, v_by_timestamp)
        samples = [isvm.TimestampSample(timestamp=ts, tau=np.array([o.tau for o in group]),
                                        k=np.array([o.k for o in group]), iv=np.array([o.iv for o in group]),
                                        v=v_by_timestamp[ts])
                   for ts, group in md.group_by_timestamp(kept).items()]
        targets, skipped = isvm.compute_targets(samples, "leading_order")
        assert skipped == []
        truth = rho * nu * emitted.vol
        assert np.all(np.sign(targets.gamma) == np.sign(rho)), seed
        np.testing.assert_allclose(targets.gamma, truth, rtol=0.15, err_msg=f"seed {seed}")


def test_pooled_fit_equals_single_cluster_fit():
    samples = sabr_samples(noise=2e-3)
    pooled = isvm.fit_isvm(samples, small_settings(), pooled=True).fits[None]
    single = isvm.fit_isvm(samples, small_settings()).fits[0]
    assert pooled.bandwidth == single.bandwidth
    for name in isvm.FUNCTIONS:
        for field_name in ("grid", "mean", "lower", "upper"):
            np.testing.assert_array_equal(getattr(pooled.curves[name], field_name),
                                          getattr(single.curves[name], field_name))


def test_local_regression_reproduces_lines():
    rng = np.random.default_rng(0)
    v = np.sort(rng.uniform(0.3, 1.2, 60))
    grid = np.linspace(0.4, 1.1, 15)
    np.testing.assert_allclose(isvm.local_regression(v, np.full(60, 0.7), grid), 0.7, atol=1e-10)
    np.testing.assert_allclose(isvm.local_regression(v, 2.0 - 3.0 * v, grid), 2.0 - 3.0 * grid, atol=1e-9)
    with pytest.raises(InsufficientObservationsError):
        isvm.local_regression(v[:10], v[:10], grid)


def test_bandwidth_and_grid():
    v = np.linspace(0.5, 0.6, 40)
    assert isvm.silverman_bandwidth(v) >= 0.05 * 0.1 - 1e-15
    assert isvm.silverman_bandwidth(np.full(30, 0.5)) > 0
    grid = isvm.evaluation_grid(np.linspace(0.0, 1.0, 101))
    assert len(grid) == config.GRID_POINTS
    assert grid[0] == pytest.approx(0.05) and grid[-1] == pytest.approx(0.95)


def test_pooled_fit_follows_sabr_gamma():
    result = isvm.fit_isvm(sabr_samples(), small_settings(), pooled=True)
    assert list(result.fits) == [None]
    fit = result.fits[None]
    gamma = fit.curves["gamma"]
    np.testing.assert_allclose(gamma.mean, RHO * NU * gamma.grid, atol=0.01)
    for curve in fit.curves.values():
        assert np.all(curve.lower <= curve.mean + 1e-12)
        assert np.all(curve.upper >= curve.mean - 1e-12)
    assert fit.n_replicates == 20
    assert isvm.positivity_diagnostic(fit) == 0.0


def planted_samples(n=40, noise=0.0, seed=0):
    """Exact surface polynomials with b01 = 0.1, so the leading-order gamma is 0.2 v."""
    rng = np.random.default_rng(seed)
    tau, k = np.meshgrid(np.array([7, 14, 30, 60]) / 365.0, np.linspace(-0.05, 0.05, 9))
    tau, k = tau.ravel(), k.ravel()
    samples = []
    for i, v in enumerate(rng.uniform(0.4, 1.0, n)):
        surface = SurfaceCoefficients(b10=v, b00=0.0, b20=0.0, b01=0.1, b11=0.0, b21=0.0, b02=0.2)
        iv = evaluate_surface(surface, tau, k) + noise * rng.standard_normal(len(k))
        samples.append(isvm.TimestampSample(timestamp=T0 + i * pd.Timedelta(minutes=20),
                                            tau=tau, k=k, iv=iv, v=float(v)))
    return samples


def test_zero_noise_bands_collapse():
    fit = isvm.fit_isvm(planted_samples(), small_settings(inversion="leading_order"), pooled=True).fits[None]
    gamma = fit.curves["gamma"]
    np.testing.assert_allclose(gamma.mean, 0.2 * gamma.grid, atol=1e-8)
    for curve in fit.curves.values():
        assert np.max(curve.upper - curve.lower) <= 1e-6


def test_bands_cover_planted_line():
    coverage = []
    for seed in range(20):
        settings = small_settings(inversion="leading_order", bootstrap_samples=500, bootstrap_seed=seed)
        fit = isvm.fit_isvm(planted_samples(noise=1e-3, seed=seed), settings, pooled=True).fits[None]
        gamma = fit.curves["gamma"]
        truth = 0.2 * gamma.grid
        coverage.append(np.mean((gamma.lower <= truth) & (truth <= gamma.upper)))
    print(f"📊 Mean band coverage over 20 seeds: {np.mean(coverage):.3f}")
    assert np.mean(coverage) >= 0.85


def test_bootstrap_is_deterministic_across_threads():
    samples = sabr_samples(noise=5e-3)
    single = isvm.fit_isvm(samples, small_settings(), pooled=True, threads=1).fits[None]
    threaded = isvm.fit_isvm(samples, small_settings(), pooled=True, threads=3).fits[None]
    for name in isvm.FUNCTIONS:
        np.testing.assert_array_equal(single.curves[name].lower, threaded.curves[name].lower)
        np.testing.assert_array_equal(single.curves[name].upper, threaded.curves[name].upper)


def test_small_clusters_are_skipped():
    labels = [0] * 30 + [1] * 10
    with pytest.warns(UserWarning, match="cluster 1 skipped"):
        result = isvm.fit_isvm(sabr_samples(labels=labels), small_settings())
    assert list(result.fits) == [0]
    assert "10 observations" in result.skipped_clusters[1]
    with pytest.raises(InsufficientObservationsError):
        isvm.fit_isvm(sabr_samples(n=20), small_settings(), pooled=True)


def test_degenerate_timestamps_are_reported():
    samples = sabr_samples(n=30)
    broken = samples[0]
    samples[0] = isvm.TimestampSample(timestamp=broken.timestamp, tau=broken.tau[:5], k=broken.k[:5],
                                      iv=broken.iv[:5], v=broken.v)
    with pytest.warns(UserWarning, match="degenerate"):
        result = isvm.fit_isvm(samples, small_settings(), pooled=True)
    assert result.skipped_timestamps == [broken.timestamp]
    assert len(result.fits[None].targets) == 29


def test_curves_frame_layout():
    labels = [0] * 30 + [1] * 30
    result = isvm.fit_isvm(sabr_samples(n=60, labels=labels), small_settings())
    frame = isvm.curves_frame(result, window=2)
    assert list(frame.columns) == ["window", "scope", "cluster", "function", "v", "mean", "lower", "upper"]
    assert set(frame["cluster"]) == {0, 1}
    assert set(frame["scope"]) == {"cluster"}
    assert len(frame) == 2 * len(isvm.FUNCTIONS) * config.GRID_POINTS
    assert (frame["window"] == 2).all()


def main():
    return run_standalone("Testing ISVM", module_tests(globals()))


if __name__ == "__main__":
    sys.exit(main())
