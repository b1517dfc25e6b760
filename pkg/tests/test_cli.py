import json

import numpy as np
import pytest

from nvdecoherence import io
from nvdecoherence.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from nvdecoherence.config import load_config
from nvdecoherence.errors import ConfigError

MINIMAL = {
    "mode": "simulate",
    "model": {"type": "qudit", "dim": 2},
    "schedule": {"kind": "amplify", "lambda": 1.0, "dt_us": 0.01, "n": 40},
    "noise": {"type": "static", "sigma_b_gauss": 0.2},
    "trajectories": 300,
    "master_seed": 11,
    "output": {"name": "mini"},
}

# column sets of the preset outputs; changing any of these is a schema break
GOLDEN_HEADERS = {
    "fig1a_lambda_0": "time_us,re_rho_12,im_rho_12,abs_rho_12,stderr_12,pop_1,pop_2",
    "fig1b_t2_vs_lambda": "lambda,t2_fit_us,t2_fit_stderr_us,t2_analytic_us",
    "fig1c_lambda_0": ("time_us,re_rho_12,im_rho_12,abs_rho_12,stderr_12,re_rho_13,im_rho_13,abs_rho_13,"
                       "stderr_13,re_rho_23,im_rho_23,abs_rho_23,stderr_23,pop_1,pop_2,pop_3"),
    "fig1d_t2_vs_lambda": "lambda,detuning_mhz,dt_us,t2_fit_13_us,t2_fit_stderr_13_us,t2_pure_dephasing_13_us",
    "fig2a_tau_0": "time_us,re_rho_12,im_rho_12,abs_rho_12,stderr_12,pop_1,pop_2",
    "fig2b_t2_vs_tau": "tau,mu,t2_fit_us,t2_fit_stderr_us,t2_analytic_us",
    "fig2c_spectral_m1": "omega_per_us,C_omega,fsq_tau_0,fsq_tau_0.5,fsq_tau_1",
    "fig2d_envelope": ("time_us,chi_tau_0,W_tau_0,tail_bound_tau_0,chi_tau_0.5,W_tau_0.5,tail_bound_tau_0.5,"
                       "chi_tau_1,W_tau_1,tail_bound_tau_1"),
    "fig3a_t2_vs_tau": ("tau,mu,t2_fit_12_us,t2_fit_stderr_12_us,t2_analytic_12_us,t2_fit_13_us,"
                        "t2_fit_stderr_13_us,t2_analytic_13_us,t2_fit_23_us,t2_fit_stderr_23_us,t2_analytic_23_us"),
    "fig3bcd_t2_maps": ("tau1,tau2,mu1,mu2,feasible,t2_fit_12_us,t2_analytic_12_us,t2_fit_13_us,"
                        "t2_analytic_13_us,t2_fit_23_us,t2_analytic_23_us"),
}


def write_config(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def header(path):
    return next(line for line in path.read_text().splitlines() if not line.startswith("#"))


def test_minimal_config_writes_series(tmp_path, capsys):
    code = main(["--config", str(write_config(tmp_path, MINIMAL)), "--out", str(tmp_path / "o")])
    assert code == EXIT_OK
    series = tmp_path / "o" / "mini_series.csv"
    meta, cols, data = io.read_csv(series)
    assert cols == io.series_columns(2)
    assert data.shape == (41, len(cols))
    assert meta["config"]["master_seed"] == 11
    assert np.all(data[:, cols.index("abs_rho_12")] <= 0.5 + 1e-12)
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["master_seed"] == 11
    assert "mini_series.csv" in manifest["outputs"]
    assert manifest["config"]["schedule"] == MINIMAL["schedule"]
    assert "version" in manifest and "runtimes_s" in manifest
    assert str(series) in capsys.readouterr().out


def test_same_seed_same_bytes(tmp_path):
    path = write_config(tmp_path, MINIMAL)
    bodies = []
    for k in range(2):
        assert main(["--config", str(path), "--out", str(tmp_path / f"o{k}")]) == EXIT_OK
        bodies.append(io.csv_body((tmp_path / f"o{k}" / "mini_series.csv").read_text()))
    assert bodies[0] == bodies[1]


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, MINIMAL)
    main(["--config", str(path), "--out", str(tmp_path / "a")])
    main(["--config", str(path), "--out", str(tmp_path / "b"), "--seed", "12"])
    a = io.csv_body((tmp_path / "a" / "mini_series.csv").read_text())
    b = io.csv_body((tmp_path / "b" / "mini_series.csv").read_text())
    assert a != b


def test_trajectories_zero_is_config_error(tmp_path, capsys):
    path = write_config(tmp_path, {**MINIMAL, "trajectories": 0})
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "trajectories" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="trajectories"):
        load_config({**MINIMAL, "trajectories": 0})


def test_trajectories_flag_rejects_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--preset", "fig1a", "--trajectories", "0"])
    assert exc.value.code == 2


@pytest.mark.parametrize("bad, field", [
    ({"noise": {"type": "static", "sigma_b": 0.2}}, "noise.sigma_b"),
    ({"schedule": {"kind": "amplify", "lambda": 1.0, "n": 4}}, "schedule.dt_us"),
    ({"mode": "teleport"}, "mode"),
    ({"model": {"type": "qudit", "dim": 9}}, "model.dim"),
])
def test_config_errors_name_the_field(tmp_path, capsys, bad, field):
    path = write_config(tmp_path, {**MINIMAL, **bad})
    assert main(["--config", str(path)]) == EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_runtime_error_exit_code(tmp_path, capsys):
    # the out path is a file, so writing results fails after validation
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    path = write_config(tmp_path, MINIMAL)
    assert main(["--config", str(path), "--out", str(blocker / "sub")]) == EXIT_RUNTIME
    assert "runtime error" in capsys.readouterr().err


def test_unknown_preset_rejected():
    with pytest.raises(SystemExit) as exc:
        main(["--preset", "fig9"])
    assert exc.value.code == 2


def test_config_and_preset_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        main(["--config", str(write_config(tmp_path, MINIMAL)), "--preset", "fig1a"])


def test_json_format(tmp_path):
    path = write_config(tmp_path, MINIMAL)
    assert main(["--config", str(path), "--out", str(tmp_path), "--format", "json"]) == EXIT_OK
    data = json.loads((tmp_path / "mini_series.json").read_text())
    assert data["columns"] == io.series_columns(2)
    assert len(data["data"]["time_us"]) == 41
    assert data["meta"]["config"]["mode"] == "simulate"


def test_analytic_mode(tmp_path):
    cfg = {**MINIMAL, "mode": "analytic",
           "schedule": {"kind": "one_channel", "lambda": 1.0, "tau": 0.5, "dt_us": 0.01, "n": 40}}
    assert main(["--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_OK
    _, cols, data = io.read_csv(tmp_path / "mini_curves.csv")
    assert cols == ["time_us", "abs_rho_12"]
    assert data[0, 1] == pytest.approx(0.5)
    text = (tmp_path / "mini_coefficients.csv").read_text().splitlines()
    assert text[1] == "pair,c,t2_analytic_us"
    assert text[2].startswith("12,3.0,")  # (+1) - (-1) doubles 1 + lambda - 2 mu


def test_filter_mode(tmp_path):
    cfg = {"mode": "filter", "model": {"type": "qudit", "dim": 2},
           "noise": {"type": "ou", "l_gauss": 0.2, "R_per_us": 1.0},
           "filter": {"kind": "periodic", "lambda": 1.0, "tau": 0.5, "dt_us": 0.02, "periods": 20,
                      "omega_points": 50, "t_points": 5},
           "output": {"name": "ff"}}
    assert main(["--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_OK
    _, cols, data = io.read_csv(tmp_path / "ff_chi.csv")
    assert cols == ["time_us", "chi", "truncation_bound", "W"]
    assert np.all(np.diff(data[:, 1]) >= 0)
    np.testing.assert_allclose(data[:, 3], np.exp(-data[:, 1]))
    _, cols, _ = io.read_csv(tmp_path / "ff_spectral.csv")
    assert cols == ["omega_per_us", "C_omega", "fsq_numeric", "fsq_closed"]


def test_sweep_mode(tmp_path):
    cfg = {**MINIMAL, "mode": "sweep", "sweep": {"param": "lambda", "values": [0.0, 1.0]}}
    assert main(["--config", str(write_config(tmp_path, cfg)), "--out", str(tmp_path)]) == EXIT_OK
    _, cols, data = io.read_csv(tmp_path / "mini_sweep.csv")
    assert cols[:2] == ["value", "infeasible"]
    assert data[:, 0].tolist() == [0.0, 1.0]


def test_dsl_program_file(tmp_path):
    (tmp_path / "seq.txt").write_text("dim 2\ndt 0.01\nrepeat 40 { sys on dt; sys off dt }")
    cfg = {**MINIMAL, "schedule": {"kind": "dsl", "program_file": "seq.txt"}}
    a = load_config(write_config(tmp_path, cfg))
    b = load_config(MINIMAL)
    assert a.schedule == b.schedule
    cfg["schedule"] = {"kind": "dsl", "program_file": "missing.txt"}
    with pytest.raises(ConfigError, match="program_file"):
        load_config(write_config(tmp_path, cfg))


@pytest.mark.parametrize("preset", ["fig1a", "fig1b", "fig2ab", "fig2cd", "fig3a"])
def test_preset_golden_headers(tmp_path, preset):
    assert main(["--preset", preset, "--out", str(tmp_path), "--trajectories", "4"]) == EXIT_OK
    found = 0
    for stem, expected in GOLDEN_HEADERS.items():
        path = tmp_path / f"{stem}.csv"
        if path.exists():
            assert header(path) == expected, stem
            found += 1
    assert found >= 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["preset"] == preset
    assert manifest["config"]["trajectories"] == 4
    assert preset in manifest["runtimes_s"]


def test_fig1cd_and_fig3bcd_headers(tmp_path):
    from nvdecoherence import presets

    files = presets.fig1cd(tmp_path, 2, 0, 1, "csv")
    names = {f.stem for f in files}
    assert {"fig1c_lambda_0", "fig1d_t2_vs_lambda"} <= names
    for stem in ("fig1c_lambda_0", "fig1d_t2_vs_lambda"):
        assert header(tmp_path / f"{stem}.csv") == GOLDEN_HEADERS[stem]
    files = presets.fig3bcd(tmp_path, 2, 0, 1, "csv", monte_carlo=False)
    assert header(files[0]) == GOLDEN_HEADERS["fig3bcd_t2_maps"]
    _, cols, data = io.read_csv(files[0])
    assert data.shape[0] == 21 * 21
    feasible = data[:, cols.index("feasible")]
    assert np.array_equal(feasible == 1, data[:, 2] <= data[:, 3])


def test_fig3_map_peaks_near_full_windows(tmp_path):
    from nvdecoherence import presets

    _, cols, data = io.read_csv(presets.fig3bcd(tmp_path, 2, 0, 1, "csv", monte_carlo=False)[0])
    t13 = data[:, cols.index("t2_analytic_13_us")]
    mu1, mu2 = data[:, cols.index("mu1")], data[:, cols.index("mu2")]
    best = np.argmax(np.where(np.isfinite(t13), t13, -1))
    assert mu1[best] == pytest.approx(1.0) and mu2[best] == pytest.approx(1.0)


def test_fig2ab_tau0_matches_fig1a(tmp_path):
    main(["--preset", "fig1a", "--out", str(tmp_path / "a"), "--trajectories", "64", "--seed", "3"])
    main(["--preset", "fig2ab", "--out", str(tmp_path / "b"), "--trajectories", "64", "--seed", "3"])
    _, _, a = io.read_csv(tmp_path / "a" / "fig1a_lambda_1.csv")
    _, _, b = io.read_csv(tmp_path / "b" / "fig2a_tau_0.csv")
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_preset_json_config(tmp_path):
    cfg = write_config(tmp_path, {"mode": "preset", "preset": "fig2cd"})
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "fig2d_envelope.csv").exists()
    cfg = write_config(tmp_path, {"mode": "preset", "preset": "fig7"}, "bad.json")
    assert main(["--config", str(cfg)]) == EXIT_CONFIG
