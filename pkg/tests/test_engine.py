import math

import numpy as np
import pytest
from scipy.optimize import least_squares

from nvdecoherence import qmat
from nvdecoherence.config import drive_period_dt
from nvdecoherence.engine import (
    SimulationSpec,
    evolve_trajectory,
    fit_gaussian_decay,
    run_ensemble,
    sweep,
)
from nvdecoherence.errors import DimensionMismatch, InsufficientData, InvalidParam
from nvdecoherence.model import NVParams, QuditModel, effective_qudit_model
from nvdecoherence.noise import OrnsteinUhlenbeck, StaticGaussian, path_rng
from nvdecoherence.schedule import (
    analytic_t2,
    build_amplify_schedule,
    build_one_channel_schedule,
    build_two_channel_schedule,
    one_channel_coefficients,
)

SIGMA = StaticGaussian.from_gauss(0.2)
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
EQUAL3 = np.ones(3) / math.sqrt(3)


def qubit_spec(lam=0.0, trajectories=2000, n=150, dt=0.002, seed=3, noise=SIGMA, stride=1, mu=None):
    model = QuditModel.pure_dephasing(2, "pm")
    if mu is None:
        sched = build_amplify_schedule(lam, dt, n, dim=2)
    else:
        sched = build_one_channel_schedule(lam, mu, dt, n, dim=2)
    return SimulationSpec(model, sched, noise, PLUS, trajectories, stride, seed)


def test_spec_validation():
    model = QuditModel.pure_dephasing(2)
    sched = build_amplify_schedule(0.0, 0.01, 5, dim=2)
    with pytest.raises(InvalidParam):
        SimulationSpec(model, sched, SIGMA, np.array([1.0, 1.0]), 10)
    with pytest.raises(InvalidParam):
        SimulationSpec(model, sched, SIGMA, PLUS, 0)
    with pytest.raises(DimensionMismatch):
        SimulationSpec(model, sched, SIGMA, EQUAL3, 10)
    with pytest.raises(InvalidParam):
        SimulationSpec(model, sched, SIGMA, PLUS, 10, master_seed=2 ** 64)


def test_noiseless_static_system_is_frozen():
    spec = qubit_spec(lam=1.0, noise=StaticGaussian(0.0), trajectories=3)
    res = run_ensemble(spec)
    np.testing.assert_array_equal(res.rho, np.broadcast_to(res.rho[0], res.rho.shape))


def test_single_trajectory_phase_is_2b_1_plus_lambda_t():
    lam = 1.5
    spec = qubit_spec(lam=lam, trajectories=5)
    times, rho = evolve_trajectory(spec, 4)
    b = SIGMA.sigma_b * path_rng(spec.master_seed, 4).standard_normal()
    expected = 0.5 * np.exp(-2j * b * (1 + lam) * times)
    np.testing.assert_allclose(rho[:, 0, 1], expected, atol=1e-12)


def test_single_trajectory_purity():
    model = QuditModel(np.array([0.4, 0.0, -0.3]), np.array([[0, 2.0, 0], [2.0, 0, 1.0], [0, 1.0, 0]]),
                       [1.0, 0.0, -1.0])
    for noise in (SIGMA, OrnsteinUhlenbeck(3.0, 2.0)):
        sched = build_two_channel_schedule(1.0, 0.2, 0.6, 0.01, 40)
        spec = SimulationSpec(model, sched, noise, EQUAL3, 3)
        _, rho = evolve_trajectory(spec, 1)
        purity = np.real(np.einsum("tij,tji->t", rho, rho))
        np.testing.assert_allclose(purity, 1.0, atol=1e-12)


def test_static_ensemble_matches_gaussian_decay_law():
    for lam in (0.0, 1.0):
        spec = qubit_spec(lam=lam, trajectories=10_000, n=200, stride=10)
        s = run_ensemble(spec).series(0, 1)
        exact = 0.5 * np.exp(-2 * SIGMA.sigma_b ** 2 * (1 + lam) ** 2 * s.times ** 2)
        z = np.abs(s.magnitude - exact) / np.maximum(s.stderr, 1e-300)
        assert np.all(z[1:] < 3), z


def test_populations_constant_without_system_hamiltonian():
    model = QuditModel.pure_dephasing(3)
    sched = build_two_channel_schedule(1.0, 0.3, 0.6, 0.01, 30)
    res = run_ensemble(SimulationSpec(model, sched, SIGMA, np.array([0.6, 0.0, 0.8]), 300))
    np.testing.assert_allclose(res.populations, np.broadcast_to([0.36, 0.0, 0.64], res.populations.shape),
                               atol=1e-14)


def test_ou_free_induction_envelope():
    noise = OrnsteinUhlenbeck(2.0, 5.0)
    spec = qubit_spec(noise=noise, trajectories=10_000, n=50, dt=0.02)
    s = run_ensemble(spec).series(0, 1)
    x = noise.R * s.times
    chi = (noise.l / noise.R) ** 2 * (np.exp(-x) + x - 1)
    # {+1, -1} coherence accumulates phase at twice the field
    exact = 0.5 * np.exp(-4 * chi)
    z = np.abs(s.magnitude - exact)[1:] / s.stderr[1:]
    assert np.all(z < 3), z


def test_ensemble_mean_is_density_matrix():
    model = QuditModel(np.array([0.5, 0.0, -0.5]), np.array([[0, 3.0, 0], [3.0, 0, 0], [0, 0, 0]]), [1, 0, -1])
    sched = build_one_channel_schedule(1.0, 0.4, 0.01, 60)
    res = run_ensemble(SimulationSpec(model, sched, SIGMA, EQUAL3, 500, 5))
    for rho in res.rho:
        qmat.validate_density(rho, tol_herm=1e-8, tol_trace=1e-8, tol_psd=1e-8)


def test_worker_count_does_not_change_results():
    spec = qubit_spec(lam=0.5, trajectories=700, n=40)
    a = run_ensemble(spec, workers=1)
    b = run_ensemble(spec, workers=2)
    assert a.rho.tobytes() == b.rho.tobytes()
    assert a.stderr.tobytes() == b.stderr.tobytes()


def test_stderr_scales_with_root_trajectories():
    small = run_ensemble(qubit_spec(trajectories=5000, n=60, stride=6)).series(0, 1)
    large = run_ensemble(qubit_spec(trajectories=10_000, n=60, stride=6)).series(0, 1)
    ratio = small.stderr[1:] / large.stderr[1:]
    assert np.all(np.abs(ratio / math.sqrt(2) - 1) < 0.10), ratio


def test_coherence_never_grows_spuriously():
    s = run_ensemble(qubit_spec(lam=1.0, trajectories=1000, n=150)).series(0, 1)
    assert np.all(s.magnitude <= s.magnitude[0] + 3 * s.stderr)


# --- fitting ----------------------------------------------------------------

def test_fit_recovers_synthetic_gaussian():
    t = np.linspace(0, 3, 40)
    f = fit_gaussian_decay((t, np.exp(-(t / 2) ** 2)))
    assert abs(f.t2 - 2.0) < 1e-6
    assert f.amplitude == pytest.approx(1.0, abs=1e-9)
    assert f.points_used >= 5
    assert not f.non_decaying


def test_fit_constant_series_is_non_decaying():
    t = np.linspace(0, 1, 20)
    f = fit_gaussian_decay((t, np.full(20, 0.5)))
    assert f.non_decaying
    assert f.t2 == math.inf


def test_fit_needs_five_points():
    t = np.linspace(0, 10, 20)
    with pytest.raises(InsufficientData):
        fit_gaussian_decay((t, np.exp(-t ** 2)))


def test_fit_uses_leading_run_above_floor():
    t = np.linspace(0, 4, 41)
    v = np.exp(-t ** 2)
    v[-5:] = 0.5  # rebound after the signal has died
    f = fit_gaussian_decay((t, v))
    assert f.t2 == pytest.approx(1.0, rel=1e-9)


def test_fitted_t2_at_lambda_zero():
    spec = qubit_spec(trajectories=10_000, n=300)
    f = fit_gaussian_decay(run_ensemble(spec).series(0, 1))
    assert f.t2 == pytest.approx(0.2008, rel=0.03)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_three_level_fits_match_analytic(lam):
    model = QuditModel.pure_dephasing(3)
    for tau in (0.0, 0.5, 1.0):
        mu = tau * lam / 2
        t2 = [analytic_t2(c, SIGMA.sigma_b) for c in one_channel_coefficients(lam, mu)]
        dt = min(t2) / 40
        n = int(math.ceil(2 * max(t2) / dt))
        sched = build_one_channel_schedule(lam, mu, dt, n)
        res = run_ensemble(SimulationSpec(model, sched, SIGMA, EQUAL3, 10_000, max(1, n // 150), 11))
        for k, pair in enumerate([(0, 1), (0, 2), (1, 2)]):
            f = fit_gaussian_decay(res.series(*pair))
            assert abs(f.t2 - t2[k]) <= max(0.03 * t2[k], 3 * f.t2_stderr), (lam, tau, pair, f.t2, t2[k])


# --- lab frame ----------------------------------------------------------------

def fig1_nv(detuning_mhz=0.0):
    p = NVParams.from_lab_units(2.87, 100.0, B1_gauss=1.717)
    e = p.level_energies
    return NVParams(p.D, p.Bz, p.gamma, p.B1, 0.0, e[0] - e[1] - 2 * math.pi * detuning_mhz, 0.0)


def lab_populations(p, window):
    dt = drive_period_dt(p, 0.0025)
    sched = build_amplify_schedule(0.0, dt, int(math.ceil(window / dt)))
    spec = SimulationSpec(p, sched, StaticGaussian(0.0), np.array([0.0, 1.0, 0.0]), 1)
    res = run_ensemble(spec)
    return res.times, res.populations


def test_lab_frame_rabi_period():
    p = fig1_nv()
    J = effective_qudit_model(p).J[0, 1]
    t, pops = lab_populations(p, 1.0)

    def residual(x):
        a, w, phi = x
        return a * (1 - np.cos(w * t + phi)) / 2 - pops[:, 0]

    w = least_squares(residual, [1.0, 2 * J, 0.0]).x[1]
    period = 2 * math.pi / w
    assert period == pytest.approx(2 * math.pi / (2 * J), rel=0.02)


def test_lab_frame_matches_rwa_populations():
    p = fig1_nv(detuning_mhz=1.9)
    assert p.gamma * p.B1 <= 0.01 * p.D
    t, pops = lab_populations(p, 0.6)
    H = effective_qudit_model(p).hamiltonian()
    psi0 = np.array([0.0, 1.0, 0.0])
    rwa = np.array([np.abs(qmat.expm_hermitian(H, tk) @ psi0) ** 2 for tk in t])
    assert np.abs(pops - rwa).max() < 0.02


# --- sweeps -------------------------------------------------------------------

def test_sweep_lambda_monotone():
    rows = sweep(qubit_spec(trajectories=2000, n=300), "lambda", [0, 0.25, 0.5, 0.75, 1, 2, 3])
    t2 = [r.fits[(0, 1)].t2 for r in rows]
    assert all(a > b for a, b in zip(t2, t2[1:])), t2
    assert [r.value for r in rows] == [0, 0.25, 0.5, 0.75, 1, 2, 3]
    assert rows[0].analytic[(0, 1)] == pytest.approx(0.2008, abs=5e-5)


def test_sweep_tau_increases_t2():
    template = qubit_spec(lam=1.0, trajectories=2000, n=300, mu=0.0)
    rows = sweep(template, "tau", [0.0, 0.25, 0.5, 0.75, 1.0])
    t2 = [r.fits[(0, 1)].t2 for r in rows]
    assert all(a < b for a, b in zip(t2, t2[1:])), t2


def test_single_value_sweep_is_single_run():
    template = qubit_spec(lam=0.0, trajectories=500, n=100)
    row = sweep(template, "lambda", [1.0], keep_results=True)[0]
    direct = run_ensemble(qubit_spec(lam=1.0, trajectories=500, n=100))
    assert row.result.rho.tobytes() == direct.rho.tobytes()
    assert row.fits[(0, 1)].t2 == fit_gaussian_decay(direct.series(0, 1)).t2


def test_sweep_flags_infeasible_two_channel_points():
    model = QuditModel.pure_dephasing(3)
    sched = build_two_channel_schedule(1.0, 0.0, 0.5, 0.005, 100)
    template = SimulationSpec(model, sched, SIGMA, EQUAL3, 200, 5)
    rows = sweep(template, "tau1", [0.5, 1.5])
    assert not rows[0].infeasible and rows[0].fits
    assert rows[1].infeasible and not rows[1].fits
    # closed form still reported: c12 = 1 + lambda - (mu1 - mu2) with mu1 = 0.75, mu2 = 0.5
    assert rows[1].analytic[(0, 1)] == pytest.approx(analytic_t2(1.75, SIGMA.sigma_b))


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(InvalidParam):
        sweep(qubit_spec(trajectories=10, n=10), "dt", [0.1])
