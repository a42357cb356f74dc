#!/usr/bin/env python3
"""
Tests for the per-timestamp implied volatility surface regression.

隱含波動率曲面回歸測試。
"""

import os
import sys
from collections import OrderedDict

import numpy as np
import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from src.errors import DegenerateSurfaceError
from src.market_data import IvObservation
from src.surface import (COEFFICIENT_NAMES, SurfaceCoefficients, evaluate_surface, fit_surface, fit_surface_arrays,
                         fit_surfaces, read_coefficients, write_coefficients)
from testing_utils import module_tests, run_standalone

T0 = pd.Timestamp("2022-01-23T00:00:00Z")
TRUE = SurfaceCoefficients(b10=0.8, b00=0.3, b20=-0.5, b01=-0.1, b11=0.2, b21=0.05, b02=0.4)


def surface_grid():
    tau, k = np.meshgrid(np.array([7, 14, 30, 60]) / 365.0, np.linspace(-0.2, 0.2, 7))
    return tau.ravel(), k.ravel()


def observations(ts=T0, coeffs=TRUE):
    tau, k = surface_grid()
    iv = evaluate_surface(coeffs, tau, k)
    return [IvObservation(timestamp=ts, tau=t, k=x, iv=y, instrument_id=f"I{i}")
            for i, (t, x, y) in enumerate(zip(tau, k, iv))]


def test_exact_polynomial_is_recovered():
    fitted = fit_surface(observations())
    np.testing.assert_allclose(fitted.as_array(), TRUE.as_array(), atol=1e-8)
    assert fitted.n_obs == 28
    assert fitted.residual_rmse < 1e-12
    assert fitted.timestamp == T0
    print("✅ Seven coefficients recovered")


def test_noisy_fit_is_close():
    tau, k = surface_grid()
    rng = np.random.default_rng(0)
    iv = evaluate_surface(TRUE, tau, k) + 1e-4 * rng.standard_normal(len(tau))
    fitted = fit_surface_arrays(tau, k, iv)
    assert abs(fitted.b10 - TRUE.b10) < 1e-3
    assert abs(fitted.b01 - TRUE.b01) < 1e-2
    assert fitted.residual_rmse == pytest.approx(1e-4, rel=0.5)


def test_degenerate_samples():
    tau, k = surface_grid()
    with pytest.raises(DegenerateSurfaceError, match="6 observations"):
        fit_surface_arrays(tau[:6], k[:6], np.full(6, 0.8))
    # one maturity: tau columns are collinear with the intercept
    single = np.full(10, 30 / 365.0)
    with pytest.raises(DegenerateSurfaceError, match="rank deficient"):
        fit_surface_arrays(single, np.linspace(-0.1, 0.1, 10), np.full(10, 0.8))


def test_evaluate_surface_flags_non_positive_values():
    assert evaluate_surface(TRUE, 0.0, 0.0) == pytest.approx(0.8)
    negative = SurfaceCoefficients(b10=-0.1, b00=0.0, b20=0.0, b01=0.0, b11=0.0, b21=0.0, b02=0.0)
    with pytest.warns(UserWarning, match="non-positive"):
        assert evaluate_surface(negative, 0.1, 0.0) == pytest.approx(-0.1)


def test_fit_surfaces_skips_degenerate_timestamps():
    later = T0 + pd.Timedelta(minutes=20)
    groups = OrderedDict([(T0, observations()), (later, observations(ts=later)[:5])])
    for threads in (1, 3):
        fitted, skipped = fit_surfaces(groups, threads=threads)
        assert [c.timestamp for c in fitted] == [T0]
        assert [e.timestamp for e in skipped] == [later]


def test_coefficient_file_round_trip(tmp_path):
    fitted = fit_surface(observations())
    path = os.path.join(str(tmp_path), "surfaces.csv")
    write_coefficients([fitted], path, "abc")
    frame = pd.read_csv(path, comment="#")
    assert list(frame.columns) == ["timestamp", *COEFFICIENT_NAMES, "n_obs", "rmse"]
    loaded = read_coefficients(path)[0]
    np.testing.assert_allclose(loaded.as_array(), fitted.as_array(), rtol=1e-11)
    assert loaded.timestamp == T0


def main():
    return run_standalone("Testing Surface Regression", module_tests(globals()))


if __name__ == "__main__":
    sys.exit(main())
