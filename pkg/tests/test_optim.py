import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from bregsub import (BlockedVector, BlockPolynomialKernel, CoordPolynomialKernel,
                     EuclideanKernel, L1Regularizer, NonNegative, OptimizerState,
                     RunAborted, Sampler, WholeSpace, ZeroRegularizer, run)
from bregsub.diagnostics import lyapunov_msbg, oscillation
from bregsub.optim import (check_tau, imsbg_step, imsbg_update, msbg_step, msbg_update,
                           sbg_precond_step, sbg_precond_update, sbg_step, sbg_update,
                           sbpg_step, sbpg_update)
from bregsub.problems import make_l1_regression, make_quadratic
from bregsub.prox import CertificateError
from bregsub.schedules import (Constant, EpochConstant, LogDecay, PolyTolerance, StagedDecay,
                               make_schedule, schedule_eval)

from conftest import bisect_root

POLY = BlockPolynomialKernel(2, 0.01, 4)


# ---- single updates --------------------------------------------------------

def test_sbg_euclidean_is_sgd(rng):
    k = EuclideanKernel(4)
    for _ in range(50):
        x, g, eta = rng.standard_normal(4), rng.standard_normal(4), rng.uniform(1e-3, 1)
        xp, res, _ = sbg_update(k, x, g, eta)
        assert_array_equal(xp, x - eta * g)


def test_sbg_block_poly_example():
    x, g = np.array([3.0, 4.0]), np.array([0.6, 0.8])
    t = bisect_root(lambda t: 0.01 * t ** 3 + t - 5.25, 0.0, 5.25)
    xp, res, _ = sbg_update(POLY, x, g, 1.0, nu=1e-9)
    assert_allclose(xp, np.array([3.15, 4.2]) * t / 5.25, rtol=1e-12)
    assert res <= 1e-9


def test_zero_element_is_fixed_point(rng):
    x = rng.standard_normal(2) * 5
    assert_array_equal(sbg_update(EuclideanKernel(2), x, np.zeros(2), 0.5)[0], x)
    assert_allclose(sbg_update(POLY, x, np.zeros(2), 0.5)[0], x, rtol=1e-13)
    assert_array_equal(sbg_precond_update(POLY, x, np.zeros(2), 0.5)[0], x)


def test_dual_step_identity(rng):
    for _ in range(50):
        x, g = rng.standard_normal(2) * 10, rng.standard_normal(2)
        eta = rng.uniform(1e-3, 1)
        xp, res, dsn = sbg_update(POLY, x, g, eta)
        assert np.linalg.norm(POLY.grad(xp) - POLY.grad(x) + eta * g) <= \
            1e-12 * (1 + np.linalg.norm(POLY.grad(x))) * 10
        assert dsn * eta == pytest.approx(eta * np.linalg.norm(g), rel=1e-9)


def test_sbg_certificate_enforced(monkeypatch):
    k = BlockPolynomialKernel(2, 0.01, 4)
    real = k._grad_conj
    monkeypatch.setattr(k, "_grad_conj", lambda y, tol, it: real(y, tol, it) * (1 + 1e-6))
    with pytest.raises(CertificateError):
        sbg_update(k, np.array([3.0, 4.0]), np.array([0.6, 0.8]), 1.0, nu=1e-9)
    sbg_update(k, np.array([3.0, 4.0]), np.array([0.6, 0.8]), 1.0)


def test_precond_euclidean_is_sgd(rng):
    x, g = rng.standard_normal(3), rng.standard_normal(3)
    assert_array_equal(sbg_precond_update(EuclideanKernel(3), x, g, 0.1)[0], x - 0.1 * g)


def test_precond_residual_shrinks_linearly_in_eta(rng):
    # grad(x+) - grad(x) = -eta g + O(eta^2), so the residual is O(eta) and
    # residual / eta settles to a finite constant.
    x, g = rng.standard_normal(2) * 3, rng.standard_normal(2)
    res = [sbg_precond_update(POLY, x, g, eta)[1] for eta in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(res, res[1:]))
    assert res[3] / 1e-4 == pytest.approx(res[2] / 1e-3, rel=1e-3)


def test_msbg_zero_momentum_start():
    x, g = np.array([1.0, -2.0]), np.array([0.5, 0.25])
    xp, mp, _, _ = msbg_update(EuclideanKernel(2), x, np.zeros(2), g, 0.3, 1.0)
    assert_array_equal(xp, x)
    assert_array_equal(mp, g)


def test_msbg_euclidean_heavy_ball_identity(rng):
    for _ in range(50):
        x, m, g = rng.standard_normal((3, 4))
        eta, theta = rng.uniform(0.01, 1, 2)
        xp, mp, _, _ = msbg_update(EuclideanKernel(4), x, m, g, eta, theta)
        assert_array_equal(xp, x - eta * m)
        assert_array_equal(mp, m - theta * (m - g))
        assert_allclose(mp, (1 - theta) * m + theta * g, rtol=1e-14, atol=1e-15)


def test_msbg_uses_pre_update_point(rng):
    x, m, g = rng.standard_normal((3, 2)) * 3
    _, mp, _, _ = msbg_update(POLY, x, m, g, 0.2, 0.4)
    assert_allclose(mp, m - 0.4 * np.linalg.solve(_dense(x), m - g), rtol=1e-12)


def _dense(x):
    t = np.linalg.norm(x)
    return (1 + 0.01 * t * t) * np.eye(2) + 0.02 * np.outer(x, x)


def test_imsbg_euclidean_equals_msbg(rng):
    k = EuclideanKernel(3)
    for _ in range(50):
        x, m, g = rng.standard_normal((3, 3))
        a = msbg_update(k, x, m, g, 0.1, 0.3)
        b = imsbg_update(k, x, m, g, 0.1, 0.3)
        assert_array_equal(a[0], b[0])
        assert_array_equal(a[1], b[1])


def test_imsbg_approaches_msbg_as_eta_shrinks(rng):
    x, m, g = rng.standard_normal((3, 2)) * 2
    ratio = {}
    for eta in (1e-2, 1e-4):
        a = msbg_update(POLY, x, m, g, eta, 0.1)[0]
        b = imsbg_update(POLY, x, m, g, eta, 0.1)[0]
        ratio[eta] = np.linalg.norm(a - b) / eta
    assert ratio[1e-4] < ratio[1e-2]


def test_imsbg_zero_momentum_keeps_x(rng):
    x, g = rng.standard_normal((2, 2))
    assert_array_equal(imsbg_update(POLY, x, np.zeros(2), g, 0.5, 0.5)[0], x)


def test_sbpg_reduces_to_sbg(rng):
    k = EuclideanKernel(3)
    x, g = rng.standard_normal((2, 3))
    a = sbg_update(k, x, g, 0.25)[0]
    b, cert, _ = sbpg_update(k, ZeroRegularizer(), WholeSpace(), x, g, 0.25, 1e-12)
    assert_array_equal(a, b)
    assert cert.ok


# ---- steps through a sampler ----------------------------------------------

def test_step_functions_advance_state():
    obj, _ = make_l1_regression(6, 2, seed=0, oracle=False)
    k = EuclideanKernel(2)
    s0 = OptimizerState.initial(BlockedVector([0.1, -0.2]))
    for step, extra in ((sbg_step, (0.1,)), (sbg_precond_step, (0.1,)),
                        (msbg_step, (0.1, 0.5)), (imsbg_step, (0.1, 0.5)),
                        (sbpg_step, (ZeroRegularizer(), WholeSpace(), 0.1, 1e-9))):
        sampler = Sampler(6, "reshuffle", seed=1)
        st = s0
        for _ in range(7):
            st = step(st, k, obj, sampler, *extra)
        assert (st.k, st.epoch) == (7, 1)
        assert s0.k == 0 and s0.x.data[0] == 0.1


# ---- schedules -------------------------------------------------------------

def test_schedule_examples():
    assert schedule_eval(LogDecay(0.1), 0) == 0.1
    assert LogDecay(0.1)(9) == pytest.approx(0.1 / (1 + math.log(10) ** 1.1), rel=1e-14)
    assert LogDecay(0.1)(9) == pytest.approx(0.028546, rel=1e-4)
    s = StagedDecay(2.0, 150, 300)
    assert s(149) == 2.0 and s(150) == pytest.approx(0.2) and s(299) == pytest.approx(0.2)
    assert s(300) == pytest.approx(0.02)
    assert s(301) == pytest.approx(0.02)
    assert s(310) == pytest.approx(0.02 / (1 + math.log(10) ** 1.1))
    assert Constant(0.3)(1000) == 0.3
    assert EpochConstant(LogDecay(1.0), 5).at_iteration(12) == LogDecay(1.0)(2)
    assert PolyTolerance(1e-3)(0) == 1e-3
    assert PolyTolerance(1e-3)(31) == pytest.approx(1e-3 / 32 ** 0.6)
    with pytest.raises(ValueError):
        make_schedule("cosine", 0.1)
    with pytest.raises(ValueError):
        LogDecay(0.1)(-1)


def test_same_decay_keeps_ratio_constant():
    eta, theta = LogDecay(0.4), LogDecay(0.001)
    assert all(theta(s) / eta(s) == pytest.approx(0.0025, rel=1e-14) for s in range(1000))
    assert check_tau(eta, theta, 0.0025, 500) is None
    assert "drifts" in check_tau(LogDecay(0.4), Constant(0.001), 0.0025, 500)


# ---- whole runs ------------------------------------------------------------

def _l1_run(method="sbg", epochs=20, seed=0, **kw):
    obj, spec = make_l1_regression(50, 2, seed=7)
    kernel = kw.pop("kernel", EuclideanKernel(2))
    res = run(obj, kernel, method, x0=np.zeros(2), eta=LogDecay(0.4), epochs=epochs,
              sampler=Sampler(50, "reshuffle", seed), **kw)
    return res, spec


def test_budget_zero_gives_initial_record_only():
    res, _ = _l1_run(epochs=0)
    assert len(res.trace) == 1 and res.trace[0].iter == 0
    assert res.state.k == 0


def test_runs_are_deterministic():
    a, _ = _l1_run("msbg", theta=LogDecay(0.001), tau=0.0025, kernel=POLY)
    b, _ = _l1_run("msbg", theta=LogDecay(0.001), tau=0.0025, kernel=POLY)
    strip = lambda t: [r.__dict__ | {"wall_ns": 0} for r in t]
    assert strip(a.trace) == strip(b.trace)


def test_sbg_l1_reaches_oracle():
    res, spec = _l1_run(epochs=200)
    assert res.trace[-1].f_value - spec.f_star <= 1e-2


def test_stride_and_early_stop():
    res, _ = _l1_run(epochs=4, stride=30)
    assert [r.iter for r in res.trace] == [0, 30, 60, 90, 120, 150, 180, 200]
    res, _ = _l1_run(epochs=50, target=10.0, window=5)
    assert res.stopped_early and res.trace[-1].iter == 5


def test_momentum_vanishes_on_quadratic():
    # f = |x|^2/2, constant steps: the iteration matrix [[1, -eta], [theta, 1-theta]]
    # has spectral radius below one, so x and m decay geometrically.
    eta, theta = 0.1, 0.5
    M = np.array([[1, -eta], [theta, 1 - theta]])
    rho = max(abs(np.linalg.eigvals(M)))
    assert rho < 1 and rho ** 500 < 1e-9
    obj, _ = make_quadratic(2)
    res = run(obj, EuclideanKernel(2), "msbg", x0=np.ones(2), eta=Constant(eta),
              theta=Constant(theta), epochs=500, sampler=Sampler(1, "full"))
    assert res.state.m.norm() <= 1e-6 and res.state.x.norm() <= 1e-4


def test_lyapunov_step_identity():
    # For f = |x|^2/2 with the Euclidean kernel and tau = theta/eta:
    # h+ - h = -eta (1 - eta/2) |m|^2 + (eta theta / 2) |m - x|^2.
    eta, theta = 0.01, 0.3
    tau = theta / eta
    obj, _ = make_quadratic(3)
    x, m = np.array([1.0, -0.5, 2.0]), np.array([0.2, 0.1, -0.3])
    xp, mp, _, _ = msbg_update(EuclideanKernel(3), x, m, x, eta, theta)
    h = lambda x, m: lyapunov_msbg(obj.value(x), m, tau)
    expect = -eta * (1 - eta / 2) * m @ m + eta * theta / 2 * (m - x) @ (m - x)
    assert h(xp, mp) - h(x, m) == pytest.approx(expect, rel=1e-10)


def test_lyapunov_nonincreasing_on_quadratic():
    eta, theta = 0.01, 0.5
    tau = theta / eta
    obj, _ = make_quadratic(3)
    for kernel in (EuclideanKernel(3), CoordPolynomialKernel(3, 0.01, 4)):
        res = run(obj, kernel, "msbg", x0=np.ones(3), eta=Constant(eta), theta=Constant(theta),
                  tau=tau, epochs=2000, sampler=Sampler(1, "full"))
        h = [r.f_value + r.m_norm ** 2 / (2 * tau) for r in res.trace]
        # the first step only loads the momentum (m0 = 0) and lifts h by about
        # eta theta |grad f(x0)|^2 / 2; from then on h does not increase
        assert h[1] - h[0] <= eta * theta * 3 / 2 + 1e-12
        assert all(b <= a + 1e-8 for a, b in zip(h[1:], h[2:]))


def test_function_values_settle_on_deterministic_run():
    obj, _ = make_quadratic(2, 4, seed=1)
    res = run(obj, POLY, "sbg", x0=np.ones(2), eta=LogDecay(0.5), epochs=400,
              sampler=Sampler(4, "full"))
    assert oscillation([r.f_value for r in res.trace]) <= 1e-3


def test_sbpg_run_stays_feasible():
    from bregsub.problems import make_lasso_lad
    obj, R, X, spec = make_lasso_lad(20, 2, 0.1, seed=3)
    res = run(obj, EuclideanKernel(2), "sbpg", x0=-np.ones(2), eta=Constant(0.005), epochs=100,
              sampler=Sampler(20, "reshuffle", 0), nu=PolyTolerance(1e-3),
              regularizer=R, constraint=X)
    assert X.contains(res.state.x)
    assert res.trace[-1].f_value - spec.f_star <= 1e-2


def test_run_argument_errors():
    obj, _ = make_l1_regression(5, 2, oracle=False)
    base = dict(x0=np.zeros(2), eta=Constant(0.1), epochs=1, sampler=Sampler(5))
    with pytest.raises(ValueError):
        run(obj, EuclideanKernel(2), "adam", **base)
    with pytest.raises(ValueError):
        run(obj, EuclideanKernel(2), "msbg", **base)
    with pytest.raises(ValueError):
        run(obj, EuclideanKernel(2), "sbg", regularizer=L1Regularizer(0.1), **base)
    with pytest.raises(ValueError):
        run(obj, EuclideanKernel(2), "sbg", constraint=NonNegative(), **base)


def test_failed_step_keeps_partial_trace(monkeypatch):
    import bregsub.optim as optim
    calls = {"n": 0}
    real = optim.sbg_update

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 8:
            raise CertificateError("forced")
        return real(*a, **kw)

    monkeypatch.setattr(optim, "sbg_update", flaky)
    with pytest.raises(RunAborted) as info:
        _l1_run(epochs=1, stride=2)
    part = info.value.partial
    assert [r.iter for r in part.trace] == [0, 2, 4, 6]
    assert isinstance(info.value.__cause__, CertificateError)


def test_tau_warning_recorded():
    res, _ = _l1_run("msbg", epochs=3, theta=Constant(0.001), tau=0.0025)
    assert res.warnings and "drifts" in res.warnings[0]


def test_nonregular_scalar_sbg_reaches_minimum():
    from bregsub.problems import make_nonregular_scalar
    obj, spec = make_nonregular_scalar()
    grid = np.linspace(-3, 3, 600001)
    f_grid = np.min(grid ** 2 - np.abs(grid) + 1)
    assert spec.f_star == pytest.approx(f_grid, abs=1e-10)
    res = run(obj, EuclideanKernel(1), "sbg", x0=np.array([2.0]), eta=LogDecay(0.1),
              epochs=500, sampler=Sampler(1, "full"))
    assert res.trace[-1].f_value <= 0.7501
