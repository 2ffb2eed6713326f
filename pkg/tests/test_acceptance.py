"""End-to-end acceptance suite.

Twelve property-based criteria, one test each, run at stated tolerances.
Each test is independent and prints a single pass/fail line under -v.
"""

import json
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from meanrev.analysis import (
    corr_sensitivity,
    lambda_closed_form,
    matrix_calculus_checks,
    phi_diagonal,
    psi_closed_form,
    psi_property,
)
from meanrev.cli import main
from meanrev.control import optimal_strategy, solve_value, value_function
from meanrev.misspec import EstimatedParams, misspec_sweep, misspecified_strategy, p_epsilon, solve_Q
from meanrev.model import OUParams, Preferences
from meanrev.riccati import (
    d_common_kappa,
    d_scalar_closed_form,
    d_single_mr,
    d_uncorrelated,
    single_mr_blowup_tau,
    solve_A,
    solve_D,
)
from meanrev.wealth import decompose, simulate

from conftest import random_params, two_asset


def pair_corr(rho):
    return np.array([[1.0, rho], [rho, 1.0]])


def make_params(kappa, corr):
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.size
    return OUParams(n=n, kappa=kappa, sigma=np.ones(n), theta=np.zeros(n), corr=corr)


def test_criterion_01_closed_form_oracle_suite():
    start = time.perf_counter()
    taus = np.linspace(0.0, 3.0, 61)
    worst = 0.0
    for delta in (0.2, 1.0, 2.0):
        prefs = Preferences.from_delta(delta)

        scalar = make_params([0.8], np.eye(1))
        sol = solve_D(scalar, prefs, 3.0)
        for tau in taus:
            worst = max(worst, abs(sol.interpolate(tau)[0, 0]
                                   - d_scalar_closed_form(0.8, delta, tau)))

        uncorr = make_params([1.0, 0.5, 2.0], np.eye(3))
        sol = solve_D(uncorr, prefs, 3.0)
        for tau in taus:
            worst = max(worst, np.max(np.abs(
                sol.interpolate(tau) - d_uncorrelated(uncorr.kappa, delta, tau))))

        for rho in (-0.8, 0.0, 0.5, 0.9):
            corr = pair_corr(rho)

            common = make_params([0.7, 0.7], corr)
            sol = solve_D(common, prefs, 3.0)
            for tau in taus:
                worst = max(worst, np.max(np.abs(
                    sol.interpolate(tau) - d_common_kappa(0.7, corr, delta, tau))))

            single = make_params([1.0, 0.0], corr)
            pole = single_mr_blowup_tau(1.0, corr, prefs.gamma)
            tau_max = 3.0 if pole is None or pole > 3.4 else 0.9 * pole
            sol = solve_D(single, prefs, min(3.0, tau_max / 0.9 * 0.95))
            for tau in taus[taus <= tau_max]:
                worst = max(worst, np.max(np.abs(
                    sol.interpolate(tau) - d_single_mr(1.0, corr, prefs.gamma, tau))))

    elapsed = time.perf_counter() - start
    assert worst < 1e-8, f"max oracle error {worst:.2e}"
    assert elapsed < 10.0, f"oracle suite took {elapsed:.1f} s"


def test_criterion_02_log_utility_static():
    params = two_asset(rho=0.5, kappa=(1.0, 0.5))
    sol = solve_D(params, Preferences(gamma=0.0), 3.0)
    fixed = np.linalg.inv(params.corr) @ np.diag(params.kappa)
    for tau in np.linspace(0.0, 3.0, 31):
        assert np.max(np.abs(sol.interpolate(tau) - fixed)) < 1e-10


def test_criterion_03_a_d_consistency(rng):
    for _ in range(20):
        n = int(rng.integers(1, 4))
        params = random_params(rng, n, normalized=True)
        prefs = Preferences(gamma=float(rng.choice([-4.0, -1.0, 0.5])))
        delta = prefs.delta
        a = solve_A(params, prefs, 2.0)
        d = solve_D(params, prefs, 2.0)
        base = delta * np.linalg.inv(params.corr) @ np.diag(params.kappa)
        for tau in np.linspace(0.0, 2.0, 9):
            am = a.interpolate(tau)
            assert np.max(np.abs(base - (am + am.T) - d.interpolate(tau))) < 1e-8


def test_criterion_04_antisymmetry_time_independent():
    for rho in (-0.6, 0.3, 0.8):
        params = two_asset(rho=rho, kappa=(1.0, 0.4))
        for gamma in (-4.0, -1.0, 0.5):
            prefs = Preferences(gamma=gamma)
            sol = solve_D(params, prefs, 3.0)
            corr_inv = np.linalg.inv(params.corr)
            expected = prefs.delta * corr_inv[0, 1] * (params.kappa[1] - params.kappa[0])
            for tau in sol.tau_grid:
                m = sol.interpolate(tau)
                assert abs((m[0, 1] - m[1, 0]) - expected) < 1e-8


@pytest.mark.parametrize("gamma,n", [(-4.0, 1), (-4.0, 2), (-1.0, 2)])
def test_criterion_05_mc_value(gamma, n):
    start = time.perf_counter()
    kappa = [1.0] if n == 1 else [1.0, 0.5]
    corr = np.eye(1) if n == 1 else pair_corr(0.5)
    params = make_params(kappa, corr)
    prefs = Preferences(gamma=gamma)
    horizon = 3.0
    spec = optimal_strategy(params, prefs, horizon)
    ens = simulate(params, prefs, spec, horizon, 1536, 100_000, 7,
                   x0=np.zeros(n), store_paths=False)
    assert ens.n_excluded == 0
    mean, se = ens.utility_estimate(gamma)
    a = solve_value(params, prefs, horizon)
    j = value_function(1.0, np.zeros(n), 0.0, a, prefs, params).total
    elapsed = time.perf_counter() - start
    assert abs(mean - j) < 3.0 * se, f"MC {mean:.5g} +- {se:.2g} vs analytic {j:.5g}"
    assert elapsed < 60.0, f"case took {elapsed:.1f} s"


def test_criterion_06_wealth_decomposition():
    prefs = Preferences(gamma=-4.0)
    params = two_asset(rho=0.6, kappa=(1.0, 0.4))
    spec = optimal_strategy(params, prefs, 1.0)
    residuals = []
    for n_steps in (128, 256, 512):
        ens = simulate(params, prefs, spec, 1.0, n_steps, 4, 23,
                       x0=np.array([0.5, -0.3]), store_paths=True)
        residuals.append(max(
            abs(decompose(ens, p, 0.0, 1.0, delta=prefs.delta).residual)
            for p in range(4)))
    assert residuals[1] < 0.7 * residuals[0]
    assert residuals[2] < 0.7 * residuals[1]

    for special in (two_asset(rho=0.0, kappa=(1.0, 0.4)),
                    two_asset(rho=0.7, kappa=(0.8, 0.8))):
        spec = optimal_strategy(special, prefs, 1.0)
        ens = simulate(special, prefs, spec, 1.0, 64, 3, 7,
                       x0=np.array([0.5, -0.3]), store_paths=True)
        for p in range(3):
            assert decompose(ens, p, 0.0, 1.0, delta=prefs.delta).term_c == 0.0


def test_criterion_07_misspecification_framework():
    params = two_asset(rho=0.4, kappa=(1.0, 2.0), sigma=(0.3, 0.5), theta=(0.1, -0.2))
    prefs = Preferences(gamma=-1.0)
    horizon = 1.0

    # Truth reproduces the value function.
    q = solve_Q(prefs.gamma, params, EstimatedParams.from_params(params), prefs, horizon)
    a = solve_value(params, prefs, horizon)
    for t, x in ((0.0, params.theta), (0.4, params.theta + 0.2)):
        p = p_epsilon(1.5, x, t, prefs.gamma, q, params).p_value
        j = value_function(1.5, x, t, a, prefs, params).total
        assert abs(p - j) < 1e-8 * abs(j)

    # First and second moments against Monte Carlo under three wrong estimates.
    estimates = (
        EstimatedParams(kappa_hat=params.kappa * 1.5, sigma_hat=params.sigma,
                        corr_hat=params.corr),
        EstimatedParams(kappa_hat=params.kappa, sigma_hat=params.sigma * 1.2,
                        corr_hat=params.corr),
        EstimatedParams(kappa_hat=params.kappa, sigma_hat=params.sigma,
                        corr_hat=pair_corr(-0.2)),
    )
    x0 = params.theta + np.array([0.15, -0.1])
    for k, est in enumerate(estimates):
        spec = misspecified_strategy(params, est, prefs, horizon)
        ens = simulate(params, prefs, spec, horizon, 512, 8000, 100 + k,
                       x0=x0, store_paths=False)
        for eps in (1.0, 2.0):
            qe = solve_Q(eps, params, est, prefs, horizon)
            analytic = p_epsilon(1.0, x0, 0.0, eps, qe, params).p_value
            mc, se = ens.moment_estimate(eps)
            assert abs(mc - analytic) < 3.0 * se

    # Sweep: zero at the truth, non-positive everywhere, and overestimating
    # the reversion rates costs more than underestimating them.
    sweep_params = two_asset(rho=0.7)
    grid = misspec_sweep(sweep_params, Preferences(gamma=-4.0), 0.5,
                         [0.5, 1.0, 2.0], [0.5, 1.0, 2.0])
    assert not grid.failures
    assert abs(grid.cells[1, 1]) < 1e-8
    assert np.nanmax(grid.cells) <= 1e-8
    assert grid.cells[2, 2] < grid.cells[0, 0]


def test_criterion_08_correlation_sensitivity_signs():
    for gamma in (-4.0, 0.5):
        prefs = Preferences(gamma=gamma)
        for kpair in ((1.0, 0.5), (1.0, 1.0)):
            params = make_params(kpair, np.eye(2))
            r = corr_sensitivity(params, prefs, 2.0, (0, 1))
            assert abs(r.first_derivative) <= max(5.0 * r.first_error, 1e-9)
            if kpair[0] == kpair[1]:
                assert abs(r.log_second_derivative) <= max(5.0 * r.log_second_error, 1e-9)
            else:
                assert r.second_derivative > 0.0
                assert np.sign(r.log_second_derivative) == np.sign(gamma)
        # Mixed second partials across distinct pairs vanish.
        params3 = make_params([1.0, 0.5, 2.0], np.eye(3))
        r = corr_sensitivity(params3, prefs, 1.5, (0, 1))
        assert r.mixed_derivatives
        for key, val in r.mixed_derivatives.items():
            assert abs(val) <= max(5.0 * r.mixed_errors[key], 1e-8)


def test_criterion_09_auxiliary_closed_forms():
    h = 1e-5
    for delta in (0.2, 2.0, 4.0):
        for kappa in (0.5, 1.0):
            taus = np.linspace(h, 3.0, 150)
            psi = psi_closed_form(kappa, delta, taus)
            dnum = (psi_closed_form(kappa, delta, taus + h)
                    - psi_closed_form(kappa, delta, taus - h)) / (2.0 * h)
            resid = dnum - (2.0 * psi**2 - 2.0 * delta * kappa * psi
                            + 0.5 * delta * (delta - 1.0) * kappa**2)
            assert np.max(np.abs(resid)) < 1e-8

    for delta in (0.2, 1.0, 2.0, 4.0):
        taus = np.linspace(0.0, 3.0, 100)
        lhs = psi_closed_form(1.3, delta, taus) + 0.5 * (1.0 - delta) * 1.3
        assert np.max(np.abs(lhs - psi_property(1.3, delta, taus))) < 1e-12

    for (ki, kj) in ((1.0, 0.4), (0.5, 1.7)):
        for delta in (0.2, 4.0):
            def rhs(tau, y):
                return [
                    y[0] * (2.0 * psi_closed_form(ki, delta, tau)
                            + 2.0 * psi_closed_form(kj, delta, tau)
                            - delta * (ki + kj))
                    - delta * (ki - kj) * psi_property(ki, delta, tau)
                ]
            res = solve_ivp(rhs, (0.0, 3.0), [0.0], rtol=1e-12, atol=1e-14,
                            dense_output=True)
            sup = max(abs(res.sol(tau)[0] - lambda_closed_form(ki, kj, delta, tau))
                      for tau in np.linspace(0.0, 3.0, 31))
            assert sup < 1e-8

    assert phi_diagonal(1.0, 0.5, 4.0, 3.0)[2] > 0.0
    assert phi_diagonal(1.0, 0.5, 0.2, 3.0)[2] < 0.0
    assert abs(phi_diagonal(1.0, 0.5, 1.0, 3.0)[2]) < 1e-10
    assert abs(phi_diagonal(0.8, 0.8, 4.0, 3.0)[2]) < 1e-10


def test_criterion_10_matrix_calculus_identities():
    rep = matrix_calculus_checks(np.array([1.0, 0.5, 2.0]), (0, 1), (1, 2),
                                 h=1e-4, tol=1e-6)
    assert rep.all_passed
    for check in rep.checks:
        assert check.max_error < 1e-6, f"{check.name}: {check.max_error:.2e}"


def test_criterion_11_figure_qualitative_via_cli(tmp_path):
    cfg = {
        "model": {
            "n": 2,
            "kappa": [1.0, 0.5],
            "sigma": [1.0, 1.0],
            "theta": [0.0, 0.0],
            "corr": [[1.0, 0.0], [0.0, 1.0]],
        },
        "gamma": -4.0,
        "horizon": 3.0,
        "seed": 0,
        "kappa_sweep": {
            "kappa2_grid": sorted(np.linspace(0.2, 3.0, 10).tolist() + [1.0]),
            "rho_grid": [0.0, 0.5, 0.9],
            "gammas": [-4.0, 0.0, 0.5],
            "times": np.linspace(0.0, 3.0, 31).tolist(),
        },
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["--config", str(cfg_path), "--output-dir", str(out),
                 "--plot", "kappa-sweep"]) == 0
    assert (out / "value_surface.svg").exists()
    assert (out / "d_curves.svg").exists()

    body = [ln for ln in (out / "value_surface.csv").read_text().splitlines()
            if ln and not ln.startswith("#")]
    surface = {}
    for ln in body[1:]:
        k2, rho, val = (float(v) for v in ln.split(","))
        surface[(k2, rho)] = val
    kappa2_grid = sorted({k for k, _ in surface})
    # rho = 0: desirability improves monotonically with the second rate.
    col0 = [surface[(k, 0.0)] for k in kappa2_grid]
    assert all(b > a for a, b in zip(col0, col0[1:]))
    # High correlation: interior desirability minimum in kappa2.
    hi = [surface[(k, 0.9)] for k in kappa2_grid]
    assert any(hi[i] < hi[i - 1] and hi[i] < hi[i + 1] for i in range(1, len(hi) - 1))
    # Common reversion rates: value does not depend on correlation.
    k1 = min(kappa2_grid, key=lambda k: abs(k - 1.0))
    common_vals = [surface[(k1, r)] for r in (0.0, 0.9)]
    assert abs(common_vals[0] - common_vals[1]) < 1e-8 * abs(common_vals[0])

    body = [ln for ln in (out / "d_curves.csv").read_text().splitlines()
            if ln and not ln.startswith("#")]
    curves = {}
    for ln in body[1:]:
        g, t, d = (float(v) for v in ln.split(","))
        curves.setdefault(g, []).append((t, d))
    neg = [d for _, d in sorted(curves[-4.0])]
    log_curve = [d for _, d in sorted(curves[0.0])]
    pos = [d for _, d in sorted(curves[0.5])]
    assert all(b < a for a, b in zip(neg, neg[1:]))
    assert max(log_curve) == min(log_curve)
    assert all(b > a for a, b in zip(pos, pos[1:]))


def test_criterion_12_csv_determinism(tmp_path):
    cfg = {
        "model": {
            "n": 2,
            "kappa": [1.0, 0.5],
            "sigma": [1.0, 1.0],
            "theta": [0.0, 0.0],
            "corr": [[1.0, 0.5], [0.5, 1.0]],
        },
        "gamma": -4.0,
        "horizon": 1.0,
        "seed": 11,
        "simulate": {"n_paths": 50, "n_steps": 32},
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    for d in ("run1", "run2"):
        assert main(["--config", str(cfg_path),
                     "--output-dir", str(tmp_path / d), "simulate"]) == 0
        assert main(["--config", str(cfg_path),
                     "--output-dir", str(tmp_path / d), "solve"]) == 0
    for name in ("terminal_wealth.csv", "d_solution.csv", "a_solution.csv"):
        a = (tmp_path / "run1" / name).read_bytes()
        b = (tmp_path / "run2" / name).read_bytes()
        assert a == b, f"{name} differs between identical runs"
