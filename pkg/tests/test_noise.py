import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nvdecoherence import noise as N
from nvdecoherence.errors import InvalidParam


def test_static_moments():
    m = N.StaticGaussian(0.7)
    b = N.sample_static(m, 123, size=10 ** 6)
    assert abs(b.mean()) < 4 * 0.7 / 1e3
    assert b.var() == pytest.approx(0.49, rel=0.01)


def test_static_deterministic():
    m = N.StaticGaussian(1.0)
    assert N.sample_static(m, 99) == N.sample_static(m, 99)
    assert N.sample_static(m, 99) != N.sample_static(m, 100)


def test_static_from_gauss():
    m = N.StaticGaussian.from_gauss(0.2)
    assert m.sigma_b == pytest.approx(2 * math.pi * 2.8025 * 0.2)
    assert m.sigma_b == pytest.approx(3.5217, abs=1e-4)


def test_invalid_models():
    with pytest.raises(InvalidParam):
        N.StaticGaussian(-1.0)
    with pytest.raises(InvalidParam):
        N.OrnsteinUhlenbeck(1.0, 0.0)


def test_path_rng_independent_of_order():
    a = [N.path_rng(5, k).standard_normal() for k in range(4)]
    b = [N.path_rng(5, k).standard_normal() for k in reversed(range(4))][::-1]
    assert a == b


def test_ou_white_limit():
    m = N.OrnsteinUhlenbeck(1.3, 1e3)
    p = N.sample_ou_path(m, np.arange(200) * 1.0, 3, n_paths=2000)
    v = p.values
    assert v.var() == pytest.approx(1.69, rel=0.03)
    lag1 = np.mean(v[:, :-1] * v[:, 1:])
    assert abs(lag1) < 0.02


def test_ou_lag_covariance():
    l, R, dt = 1.5, 2.0, 0.1
    m = N.OrnsteinUhlenbeck(l, R)
    v = N.sample_ou_path(m, np.arange(11) * dt, 7, n_paths=10 ** 5).values
    for k in range(11):
        assert np.mean(v[:, 0] * v[:, k]) == pytest.approx(l * l * math.exp(-R * k * dt), rel=0.02)
    # stationarity
    np.testing.assert_allclose(v.var(axis=0), l * l, rtol=0.02)


def test_ou_static_limit():
    m = N.OrnsteinUhlenbeck(0.8, 1e-9)
    v = N.sample_ou_path(m, np.linspace(0, 1, 50), 4, n_paths=500).values
    assert np.abs(np.diff(v, axis=1)).max() < 1e-3
    assert v[:, 0].std() == pytest.approx(0.8, rel=0.1)


def test_ou_path_deterministic_and_csv(tmp_path):
    m = N.OrnsteinUhlenbeck(1.0, 1.0)
    a = N.sample_ou_path(m, np.linspace(0, 1, 21), 42)
    b = N.sample_ou_path(m, np.linspace(0, 1, 21), 42)
    np.testing.assert_array_equal(a.values, b.values)
    a.to_csv(tmp_path / "path.csv")
    lines = (tmp_path / "path.csv").read_text().splitlines()
    assert lines[1] == "time_us,b_rad_per_us"
    assert len(lines) == 23


def test_ou_grid_validation():
    m = N.OrnsteinUhlenbeck(1.0, 1.0)
    with pytest.raises(InvalidParam):
        N.sample_ou_path(m, [0.0, 0.2, 0.1], 1)
    with pytest.raises(InvalidParam):
        N.sample_ou_path(m, [0.0, 0.1, 0.3], 1)


def test_spectral_density_points():
    m = N.OrnsteinUhlenbeck(0.9, 2.5)
    assert N.spectral_density(m, 0.0) == pytest.approx(2 * 0.81 / 2.5)
    assert N.spectral_density(m, 2.5) == pytest.approx(0.81 / 2.5)


def test_spectral_density_total_variance():
    m = N.OrnsteinUhlenbeck(0.9, 2.5)
    total = 2 * integrate.quad(lambda w: N.spectral_density(m, w), 0, np.inf)[0] / (2 * math.pi)
    assert total == pytest.approx(0.81, rel=1e-8)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0])
def test_wiener_khinchin(t):
    m = N.OrnsteinUhlenbeck(0.9, 2.5)
    val = integrate.quad(lambda w: N.spectral_density(m, w), 0, np.inf, weight="cos", wvar=t)[0] / math.pi
    assert val == pytest.approx(m.correlation(t), rel=1e-6)


def test_segment_step_joint_law():
    l, R, h, b0 = 1.2, 3.0, 0.4, 0.5
    m = N.OrnsteinUhlenbeck(l, R)
    rng = np.random.default_rng(0)
    n = 400_000
    end, integral = N.ou_segment_step(m, np.full(n, b0), h, rng.standard_normal(n), rng.standard_normal(n))
    a = math.exp(-R * h)
    assert end.mean() == pytest.approx(a * b0, abs=4 * l / math.sqrt(n))
    assert end.var() == pytest.approx(l * l * (1 - a * a), rel=0.01)
    assert integral.mean() == pytest.approx(b0 * (1 - a) / R, abs=0.003)
    # conditional on b0: Var(int) = (l/R)^2 (2x - 3 + 4a - a^2)
    x = R * h
    assert integral.var() == pytest.approx((l / R) ** 2 * (2 * x - 3 + 4 * a - a * a), rel=0.01)
    cov = np.mean((integral - integral.mean()) * (end - end.mean()))
    assert cov == pytest.approx(l * l / R * (1 - a) ** 2, rel=0.02)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 50.0))
def test_bridge_residual_variance_nonnegative_continuous(x):
    v = N._bridge_residual_variance(np.array([x, x * (1 + 1e-9)]))
    assert v[0] >= 0
    assert abs(v[1] - v[0]) <= 1e-6 * max(v[0], 1e-12) + 1e-15


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(0, 10 ** 6))
def test_path_rng_deterministic(seed, idx):
    assert N.path_rng(seed, idx).standard_normal() == N.path_rng(seed, idx).standard_normal()
