import json

import numpy as np
import pytest

from sharpopt.analysis import (
    BoundInputs,
    central_difference_gradient,
    check_oracle_inequalities,
    convergence_bound,
    empirical_avg_sq_grad,
    estimate_sharpness,
    fit_rate,
    gradient_audit,
    perturbed_convergence_bound,
)
from sharpopt.core import (
    ConfigurationError,
    ContractViolationError,
    StochasticOracle,
    VacuousBoundError,
    ZeroGradientError,
    make_rng,
    norm,
)
from sharpopt.harness import run_bound_grid, BoundGridSpec
from sharpopt.optim import StepRecord
from sharpopt.problems import diagonal_quadratic, quadratic_oracle
from sharpopt.runlog import RunLog

# hand-computed before the library: nu = 0.975, bracket = 1 + 0.5 + 0.03
# + 0.0002 = 1.5302, bound = 1.5302/0.975
WORKED = BoundInputs(lipschitz=1.0, sigma=1.0, rho0=1.0, eta0=0.1,
                     f0=1.0, f_inf=0.0, steps=100)
WORKED_BOUND = 1.5694358974358975
WORKED_PERTURBED = 3.158871794871795


def linear_oracle(c):
    c = np.asarray(c, dtype=np.float64)
    return StochasticOracle(
        dimension=c.size,
        loss_at=lambda x: float(c @ x),
        stochastic_gradient=lambda x, batch: c.copy(),
        next_batch=lambda rng: None,
        full_gradient=lambda x: c.copy(),
    )


def runlog_with_full_norms(norms, perturbed=None, fingerprint="cell", seed=0):
    records = []
    for i, g in enumerate(norms):
        records.append(StepRecord(
            step_index=i, loss=0.0, grad_norm=g, learning_rate=0.1,
            full_grad_norm=g,
            full_pert_grad_norm=None if perturbed is None else perturbed[i],
        ))
    return RunLog(optimizer="samar", problem="quadratic", seed=seed,
                  steps_per_epoch=len(norms), fingerprint=fingerprint,
                  records=records)


# --------------------------------------------------------------------- bounds

def test_worked_bound_value():
    assert convergence_bound(WORKED) == pytest.approx(WORKED_BOUND, rel=1e-12)


def test_worked_perturbed_bound_value():
    assert perturbed_convergence_bound(WORKED) == pytest.approx(
        WORKED_PERTURBED, rel=1e-12
    )


def test_bound_vanishes_in_the_easy_limit():
    inp = BoundInputs(lipschitz=1.0, sigma=0.0, rho0=1e-9, eta0=0.1,
                      f0=2.0, f_inf=2.0, steps=100)
    assert convergence_bound(inp) < 1e-15


def test_bound_linear_in_initial_gap():
    base = convergence_bound(WORKED)
    shifted = BoundInputs(lipschitz=1.0, sigma=1.0, rho0=1.0, eta0=0.1,
                          f0=3.0, f_inf=0.0, steps=100)
    delta = 2.0
    expect = base + delta / (WORKED.nu * WORKED.eta0 * np.sqrt(WORKED.steps))
    assert convergence_bound(shifted) == pytest.approx(expect, rel=1e-12)


def test_perturbed_bound_identity_random_inputs():
    rng = make_rng(21)
    for _ in range(50):
        inp = BoundInputs(
            lipschitz=float(rng.uniform(0.2, 3.0)),
            sigma=float(rng.uniform(0.0, 2.0)),
            rho0=float(rng.uniform(0.01, 1.0)),
            eta0=float(rng.uniform(0.01, 0.2)),
            f0=float(rng.uniform(0.0, 5.0)),
            f_inf=-1.0,
            steps=int(rng.integers(50, 5000)),
        )
        if inp.nu <= 0:
            continue
        expect = (2 * convergence_bound(inp)
                  + 2 * inp.lipschitz**2 * inp.rho0**2 / inp.steps)
        assert perturbed_convergence_bound(inp) == pytest.approx(expect, rel=1e-12)


def test_vacuous_bound_rejected():
    inp = BoundInputs(lipschitz=10.0, sigma=1.0, rho0=1.0, eta0=1.0,
                      f0=1.0, f_inf=0.0, steps=4)
    assert inp.nu <= 0
    with pytest.raises(VacuousBoundError):
        convergence_bound(inp)


# ------------------------------------------------------- empirical average

def test_avg_sq_grad_constant_sequence():
    log = runlog_with_full_norms([3.0] * 10)
    assert empirical_avg_sq_grad([log]) == pytest.approx(9.0, rel=1e-12)


def test_avg_sq_grad_seed_mean():
    a = runlog_with_full_norms([2.0] * 4, seed=1)   # per-run average 4
    b = runlog_with_full_norms([4.0] * 4, seed=2)   # per-run average 16
    assert empirical_avg_sq_grad([a, b]) == pytest.approx(10.0, rel=1e-12)


def test_avg_sq_grad_contraction_hand_value():
    # SGD on f = 0.5||x||^2 from (1,0) with eta 0.1: norms 1, 0.9, 0.81
    from sharpopt.optim import make_driver

    oracle = quadratic_oracle(diagonal_quadratic(2, 1.0, 1.0), make_rng(0))
    drv = make_driver("sgd", np.array([1.0, 0.0]), {}, record_full_gradient=True)
    records = [drv.step(oracle, 0.1) for _ in range(3)]
    log = RunLog(optimizer="sgd", problem="quadratic", seed=0,
                 steps_per_epoch=3, fingerprint="f", records=records)
    expect = (1.0 + 0.81 + 0.6561) / 3.0
    assert empirical_avg_sq_grad([log]) == pytest.approx(expect, rel=1e-12)


def test_avg_sq_grad_rejects_mixed_cells():
    a = runlog_with_full_norms([1.0], fingerprint="x")
    b = runlog_with_full_norms([1.0], fingerprint="y")
    with pytest.raises(ContractViolationError):
        empirical_avg_sq_grad([a, b])


def test_avg_sq_grad_perturbed_series():
    log = runlog_with_full_norms([1.0, 1.0], perturbed=[2.0, 4.0])
    assert empirical_avg_sq_grad([log], perturbed=True) == pytest.approx(10.0,
                                                                         rel=1e-12)


# ----------------------------------------------------------------- rate fits

def test_fit_rate_exact_half_power():
    ks = np.array([100.0, 400.0, 1600.0, 6400.0])
    fit = fit_rate(ks, 3.0 / np.sqrt(ks))
    assert fit.slope == pytest.approx(-0.5, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_exact_first_power():
    ks = np.array([100.0, 400.0, 1600.0])
    fit = fit_rate(ks, 5.0 / ks)
    assert fit.slope == pytest.approx(-1.0, rel=1e-12)


def test_fit_rate_input_validation():
    with pytest.raises(ContractViolationError):
        fit_rate([100, 400], [1.0, 0.5])
    with pytest.raises(ContractViolationError):
        fit_rate([100, 400, 1600], [1.0, -0.5, 0.2])
    with pytest.raises(ContractViolationError):
        fit_rate([100, 100, 400], [1.0, 1.0, 0.5])


def test_fit_rate_under_multiplicative_noise():
    # 5% noise on c/sqrt(K): at least 95 of 100 fits stay in [-0.6, -0.4]
    rng = make_rng(33)
    ks = np.array([100.0, 400.0, 1600.0, 6400.0])
    hits = 0
    for _ in range(100):
        values = (2.0 / np.sqrt(ks)) * (1.0 + 0.05 * rng.normal(size=4))
        if -0.6 <= fit_rate(ks, values).slope <= -0.4:
            hits += 1
    assert hits >= 95


# ---------------------------------------------------------------- sharpness

def test_sharpness_hand_value_on_sphere():
    oracle = quadratic_oracle(diagonal_quadratic(2, 1.0, 1.0), make_rng(0))
    val = estimate_sharpness(oracle, np.array([1.0, 0.0]), 0.1)
    assert val == pytest.approx(0.5 * (1.1**2 - 1.0), rel=1e-12)


def test_sharpness_zero_rho():
    oracle = quadratic_oracle(diagonal_quadratic(2, 1.0, 1.0), make_rng(0))
    assert estimate_sharpness(oracle, np.array([1.0, 0.0]), 0.0) == 0.0


def test_sharpness_linear_loss_closed_form():
    c = np.array([3.0, -4.0])
    oracle = linear_oracle(c)
    for x in (np.zeros(2), np.array([5.0, 2.0])):
        assert estimate_sharpness(oracle, x, 0.25) == pytest.approx(
            0.25 * norm(c), rel=1e-12
        )


def test_sharpness_zero_gradient_raises():
    oracle = quadratic_oracle(diagonal_quadratic(2, 1.0, 1.0), make_rng(0))
    with pytest.raises(ZeroGradientError):
        estimate_sharpness(oracle, np.zeros(2), 0.1)


def test_sharpness_nonnegative_on_convex_probes():
    oracle = quadratic_oracle(diagonal_quadratic(4, 0.5, 3.0), make_rng(0))
    rng = make_rng(14)
    for _ in range(20):
        x = rng.normal(size=4) * 2
        if norm(oracle.full_gradient(x)) < 1e-6:
            continue
        assert estimate_sharpness(oracle, x, 0.2) >= 0.0


def test_sharpness_never_exceeds_exact_ball_maximum():
    # 2-d quadratic: compare the surrogate against a dense sweep of the
    # rho-sphere, which brackets the true max closely
    p = diagonal_quadratic(2, 0.5, 2.0)
    oracle = quadratic_oracle(p, make_rng(0))
    rho = 0.3
    angles = np.linspace(0.0, 2 * np.pi, 20001)
    offsets = rho * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rng = make_rng(2)
    for _ in range(10):
        x = rng.normal(size=2) * 2
        if norm(oracle.full_gradient(x)) < 1e-6:
            continue
        f0 = oracle.loss_at(x)
        exact = max(oracle.loss_at(x + off) for off in offsets) - f0
        assert estimate_sharpness(oracle, x, rho) <= exact * (1 + 1e-9) + 1e-12


# ------------------------------------------------------------- inequalities

def probe_points(dim, n, seed, spread=2.0):
    rng = make_rng(seed)
    return [rng.normal(size=dim) * spread for _ in range(n)]


def test_inequalities_pass_on_noiseless_quadratic():
    oracle = quadratic_oracle(diagonal_quadratic(3, 0.5, 2.0), make_rng(0))
    report = check_oracle_inequalities(
        oracle, probe_points(3, 20, 1), rho=0.3, n_samples=200, rng=make_rng(2)
    )
    assert report.all_passed
    # zero noise makes the variance identity exact, margin ~ 0
    var = next(c for c in report.checks if "variance" in c.name)
    assert abs(var.worst_margin) < 1e-10


def test_inequalities_pass_with_gaussian_noise():
    oracle = quadratic_oracle(
        diagonal_quadratic(2, 1.0, 2.0, noise_sigma=0.1), make_rng(0)
    )
    report = check_oracle_inequalities(
        oracle, probe_points(2, 10, 3), rho=0.2, n_samples=4000, rng=make_rng(4)
    )
    assert report.all_passed


def test_inequalities_require_declared_constants():
    oracle = linear_oracle([1.0, 1.0])  # no L, no sigma declared
    with pytest.raises(ConfigurationError):
        check_oracle_inequalities(oracle, probe_points(2, 3, 5), rho=0.1,
                                  n_samples=10, rng=make_rng(0))


# ----------------------------------------------------- finite differences

def test_central_difference_on_quadratic():
    p = diagonal_quadratic(3, 0.5, 2.0)
    x = np.array([1.0, -1.0, 2.0])
    fd = central_difference_gradient(p.loss, x, h=1e-5)
    np.testing.assert_allclose(fd, p.grad(x), rtol=1e-8, atol=1e-8)


def test_gradient_audit_reports_worst_relative_error():
    p = diagonal_quadratic(4, 1.0, 2.0)
    pts = probe_points(4, 5, 6)
    worst = gradient_audit(p.loss, p.grad, pts)
    assert worst < 1e-8

    def bad_grad(x):
        return p.grad(x) * 1.01

    assert gradient_audit(p.loss, bad_grad, pts) > 1e-3


# -------------------------------------------------------------- bound grids

def test_bound_grid_report_serializes(tmp_path):
    from sharpopt.analysis import write_bound_report

    grid = BoundGridSpec(ks=(100,), seeds=(1, 2), dim=5)
    report = run_bound_grid(grid)
    assert report.all_passed
    out = tmp_path / "bounds.json"
    write_bound_report(report, out)
    data = json.loads(out.read_text())
    assert data["problem"]
    assert len(data["cells"]) == 1
    cell = data["cells"][0]
    assert cell["empirical"] <= cell["bound"] * (1 + grid.slack)
