import copy
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldma.array import ArrayGeometry, steering_vector
from ldma.beampattern import DesiredPattern, PolarGrid, desired_on_grid
from ldma.metrics import pattern_mse
from ldma.optimizer import (
    ConfigError,
    DesignProblem,
    InfeasibleDesignError,
    Tolerances,
    constraint_jacobian,
    constraint_residuals,
    gradient,
    multistart_initializer,
    objective,
    optimal_weights,
    pack,
    solve,
    solve_shared,
    unpack,
)

OMNI = DesiredPattern(0, 0.0, (1.0,))
CARDIOID = DesiredPattern(1, 0.0, (0.5, 0.5))


def problem(mics=5, order=2, theta_d=math.pi, frequency=1000.0, **kw):
    desired = DesiredPattern.from_preset(order, "max-DF", theta_d)
    return DesignProblem(mics, desired, frequency, **kw)


def central_difference(f, x, rel_step=1e-6):
    """Central differences with step ``rel_step * max(|x_i|, 1e-2)`` per coordinate."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        step = rel_step * max(abs(x[i]), 1e-2)
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * step))
    return np.array(cols).T


def rel_error(analytic, numeric):
    return np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-300)


def random_instance(seed, mics):
    r = np.random.default_rng(seed)
    theta_d = r.uniform(0, 2 * math.pi)
    freq = r.uniform(100, 4000)
    order = int(r.integers(0, mics))
    desired = DesiredPattern.from_preset(order, "max-DF", theta_d)
    dmax = min(0.15, 0.9 * 340 / (2 * freq))
    p = DesignProblem(mics, desired, freq, delta_max=dmax)
    h = r.standard_normal(mics) + 1j * r.standard_normal(mics)
    x = pack(h, r.uniform(0, dmax, mics - 1))
    return p, x


# ---- packing and evaluation ---------------------------------------------


def test_pack_round_trip(rng):
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    s = rng.uniform(0, 0.1, 3)
    x = pack(h, s)
    assert x.size == 11
    h2, s2 = unpack(x, 4)
    np.testing.assert_array_equal(h2, h)
    np.testing.assert_array_equal(s2, s)
    np.testing.assert_array_equal(pack(h2, s2), x)
    with pytest.raises(ValueError):
        unpack(x, 5)


def test_objective_examples():
    p_omni = DesignProblem(1, OMNI, 1000.0)
    p_card = DesignProblem(2, CARDIOID, 1000.0)
    assert objective(pack([1.0], []), p_omni) == 0.0
    # one mic, h=[1] against the cardioid: mean of (1/2 - cos/2)^2 is 3/8
    assert objective(pack([1.0, 0.0], [0.05]), p_card) == pytest.approx(0.375, abs=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_objective_equals_pattern_mse(seed, mics):
    p, x = random_instance(seed, mics)
    h, s = unpack(x, mics)
    expected = pattern_mse(ArrayGeometry(tuple(s)), h, p.omega, p.desired, p.grid)
    assert objective(x, p) == pytest.approx(expected, rel=1e-12)


def test_constraint_residual_examples():
    assert constraint_residuals(pack([1.0], []), DesignProblem(1, OMNI, 500.0)).tolist() == [0.0, 0.0]
    broadside = DesignProblem(2, DesiredPattern(0, math.pi / 2, (1.0,)), 1000.0)
    np.testing.assert_allclose(constraint_residuals(pack([0.5, 0.5], [0.1]), broadside), [0, 0], atol=1e-15)
    np.testing.assert_allclose(constraint_residuals(pack([1.0, 1.0], [0.1]), broadside), [1, 0], atol=1e-15)


def test_gradient_vanishes_at_exact_fit():
    p = DesignProblem(3, OMNI, 2000.0, delta_max=0.05)
    x = pack([1.0, 0.0, 0.0], [0.03, 0.02])
    assert np.linalg.norm(gradient(x, p)) < 1e-10


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_gradient_matches_finite_differences(seed, mics):
    p, x = random_instance(seed, mics)
    numeric = central_difference(lambda y: objective(y, p), x)
    assert rel_error(gradient(x, p), numeric) < 1e-6


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_constraint_jacobian_matches_finite_differences(seed, mics):
    p, x = random_instance(seed, mics)
    numeric = central_difference(lambda y: constraint_residuals(y, p), x)
    assert rel_error(constraint_jacobian(x, p), numeric) < 1e-6


def test_weight_gradient_from_normal_equations(rng):
    p = problem(mics=4, order=2, theta_d=0.7, frequency=1700.0, delta_max=0.09)
    spacings = rng.uniform(0, 0.09, 3)
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    delays = np.concatenate([[0.0], np.cumsum(spacings) / 340.0])
    basis = np.exp(1j * p.omega * np.outer(np.cos(p.grid.angles), delays))
    target = desired_on_grid(p.desired, p.grid)
    gram = basis.conj().T @ basis / p.grid.size
    rhs = basis.conj().T @ target / p.grid.size
    # J = h^H G h - 2 Re(rhs^H h) + const, so dJ/dRe h = 2 Re(Gh - rhs), dJ/dIm h = 2 Im(Gh - rhs)
    expected = np.concatenate([2 * (gram @ h - rhs).real, 2 * (gram @ h - rhs).imag])
    np.testing.assert_allclose(gradient(pack(h, spacings), p)[:8], expected, rtol=1e-10, atol=1e-12)


def test_broadside_jacobian_rows():
    p = DesignProblem(3, DesiredPattern(0, math.pi / 2, (1.0,)), 1000.0)
    jac = constraint_jacobian(pack([0.2 + 0.1j, 0.5, 0.3j], [0.05, 0.1]), p)
    np.testing.assert_allclose(jac[0, :3], 1.0, atol=1e-15)
    np.testing.assert_allclose(jac[0, 3:6], 0.0, atol=1e-15)


def test_jacobian_spacing_columns_vanish_at_dc():
    p, x = random_instance(7, 4)
    # DesignProblem rejects f = 0, so bypass validation on a copy
    dc = copy.copy(p)
    object.__setattr__(dc, "frequency", 0.0)
    np.testing.assert_array_equal(constraint_jacobian(x, dc)[:, 8:], 0.0)


# ---- problem validation -------------------------------------------------


@pytest.mark.parametrize(
    "kwargs,fragment",
    [
        (dict(mics=2), r"M >= N\+1 required"),
        (dict(delta_max=0.2), "half a wavelength"),
        (dict(delta_min=0.1, delta_max=0.05), "delta_min <= delta_max"),
        (dict(frequency=0.0), "frequency"),
        (dict(restarts=0), "restarts"),
        (dict(seed=-1), "seed"),
    ],
)
def test_problem_validation(kwargs, fragment):
    with pytest.raises(ConfigError, match=fragment):
        problem(**kwargs)


def test_problem_validation_lists_every_violation():
    with pytest.raises(ConfigError) as info:
        problem(mics=1, delta_max=0.5, restarts=0)
    assert len(info.value.violations) == 3


def test_capped_problem():
    p = problem(frequency=1000.0)
    assert p.capped(4000.0).delta_max == pytest.approx(0.999 * 340 / 8000)
    assert p.capped(500.0).delta_max == 0.15


# ---- initializer ---------------------------------------------------------


def test_restart_zero_rule():
    p = problem()
    x = multistart_initializer(p, 0)
    h, s = unpack(x, 5)
    np.testing.assert_array_equal(s, [0.075] * 4)
    d = steering_vector(ArrayGeometry(tuple(s)), p.omega, math.pi)
    np.testing.assert_allclose(h, d / 5, atol=1e-15)
    assert np.linalg.norm(constraint_residuals(x, p)) <= 1e-12


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.integers(1, 7))
def test_initializer_deterministic_and_feasible(seed, index):
    p = problem(restarts=8, seed=seed)
    a = multistart_initializer(p, index)
    np.testing.assert_array_equal(a, multistart_initializer(p, index))
    other = 2 if index == 1 else 1
    assert not np.array_equal(a, multistart_initializer(p, other))
    h, s = unpack(a, 5)
    assert np.all((s >= 0) & (s <= 0.15))
    assert np.linalg.norm(constraint_residuals(a, p)) < 1e-12


def test_initializer_index_out_of_range():
    with pytest.raises(ValueError):
        multistart_initializer(problem(restarts=2), 2)


# ---- solving -------------------------------------------------------------


def test_optimal_weights_beat_perturbations(rng):
    p = problem(mics=4, order=2, theta_d=0.3, frequency=1500.0, delta_max=0.1)
    s = rng.uniform(0.01, 0.1, 3)
    h = optimal_weights(s, p)
    base = objective(pack(h, s), p)
    d = steering_vector(ArrayGeometry(tuple(s)), p.omega, 0.3)
    for _ in range(20):
        z = h + 1e-3 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        z = z + d * (1 - np.vdot(d, z)) / 4
        assert objective(pack(z, s), p) >= base - 1e-12


@pytest.mark.parametrize("mics", [1, 3])
def test_omnidirectional_exactness(mics):
    p = DesignProblem(mics, DesiredPattern(0, 1.0, (1.0,)), 1000.0, restarts=2)
    r = solve(p)
    assert r.converged
    assert r.objective_value <= 1e-10
    assert r.metrics.distortionless_residual <= 1e-8


@pytest.fixture(scope="module")
def first_order_result():
    return solve(DesignProblem(3, DesiredPattern.from_preset(1, "max-DF", 0.0), 1000.0, restarts=3))


def test_result_invariants(first_order_result):
    r = first_order_result
    p = r.problem
    assert r.converged
    assert r.metrics.distortionless_residual <= 1e-8
    assert all(p.delta_min - 1e-9 <= s <= p.delta_max + 1e-9 for s in r.geometry.spacings)
    assert r.metrics.pattern_mse < 1e-4
    # objective runs on the 360-point grid, metrics on 3600 points; both integrate exactly here
    assert objective(r.params, p) == pytest.approx(r.metrics.pattern_mse, abs=1e-12)


def test_monotone_multistart():
    base = problem(mics=3, order=1, theta_d=0.0, frequency=2000.0, delta_max=0.08)
    values = [solve(replace(base, restarts=k)).objective_value for k in (1, 2, 3)]
    assert values[1] <= values[0] and values[2] <= values[1]


def test_restarts_are_prefix_stable():
    base = problem(mics=3, order=1, theta_d=0.0, frequency=2000.0, delta_max=0.08)
    for k in range(3):
        np.testing.assert_array_equal(
            multistart_initializer(replace(base, restarts=3), k),
            multistart_initializer(replace(base, restarts=5), k),
        )


def test_non_finite_objective_skips_restart(monkeypatch):
    import ldma.optimizer as opt

    calls = {"n": 0}
    original = opt._Model.objective

    def flaky(self, params):
        calls["n"] += 1
        return math.nan if calls["n"] == 1 else original(self, params)

    monkeypatch.setattr(opt._Model, "objective", flaky)
    r = solve(DesignProblem(2, DesiredPattern(0, 0.0, (1.0,)), 1000.0, restarts=2))
    assert r.restart_index == 1


def test_infeasible_report(monkeypatch):
    import ldma.optimizer as opt

    monkeypatch.setattr(opt, "project_weights", lambda h, d: h + 1.0)
    monkeypatch.setattr(opt, "optimal_weights", lambda s, p: np.full(p.mics, 5.0 + 0j))
    p = DesignProblem(2, DesiredPattern(0, 0.0, (1.0,)), 1000.0, restarts=1,
                      tolerances=Tolerances(max_iterations=5))
    with pytest.raises(InfeasibleDesignError) as info:
        solve(p)
    assert info.value.best_attempt is not None
    assert not info.value.best_attempt.converged


def test_linear_array_cannot_fit_odd_part():
    """Every linear-array pattern is even in theta, so the odd part of an
    off-axis target is a hard floor on the achievable MSE."""
    grid = PolarGrid(3600)
    for order, floor in [(2, 0.12), (3, 3 / 49)]:
        p = DesiredPattern.from_preset(order, "max-DF", math.pi / 3)
        target = desired_on_grid(p, grid)
        mirrored = np.roll(target[::-1], 1)
        odd = (target - mirrored) / 2
        assert np.mean(odd**2) == pytest.approx(floor, rel=1e-9)


@pytest.mark.slow
def test_shared_geometry_mode():
    base = problem(mics=4, order=2, theta_d=0.0, frequency=500.0, restarts=2)
    freqs = [500.0, 1500.0, 3000.0]
    results = solve_shared(base, freqs)
    assert len(results) == 3
    cap = 0.999 * 340 / (2 * 3000.0)
    geometries = {r.geometry.spacings for r in results}
    assert len(geometries) == 1
    for r, f in zip(results, freqs):
        assert r.problem.frequency == f
        assert r.converged
        assert r.metrics.distortionless_residual <= 1e-8
        assert max(r.geometry.spacings) <= cap + 1e-9
        assert r.metrics.pattern_mse < 0.005
