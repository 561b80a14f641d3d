"""Joint optimization of filter weights and microphone spacings.

The decision vector packs the complex weights and the spacings into one real
array::

    [Re H_1 .. Re H_M, Im H_1 .. Im H_M, delta_1 .. delta_{M-1}]

The objective is the grid-averaged squared error between the synthesized and
desired patterns; it is minimized subject to ``d(omega, theta_d)^H h = 1`` and
box bounds on every spacing. Gradients and the constraint Jacobian are exact.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .array import SOUND_SPEED, ArrayGeometry, _cumulative
from .beampattern import DesiredPattern, FilterWeights, PolarGrid, desired_on_grid
from .metrics import FEASIBILITY_TOL, DesignMetrics, evaluate_design

log = logging.getLogger(__name__)

ALIASING_MARGIN = 0.999
# SLSQP exit modes that count as a finished run: KKT tolerance met, line
# search cannot improve further, iteration cap reached.
_FINISHED_MODES = (0, 8, 9)


class ConfigError(ValueError):
    """Problem definition violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InfeasibleDesignError(RuntimeError):
    """No restart produced a feasible, finished design."""

    def __init__(self, message, best_attempt=None):
        super().__init__(message)
        self.best_attempt = best_attempt


@dataclass(frozen=True)
class Tolerances:
    constraint_tol: float = 1e-8
    objective_tol: float = 1e-12
    max_iterations: int = 500


def aliasing_limit(frequency: float, sound_speed: float = SOUND_SPEED) -> float:
    """Half a wavelength at ``frequency``."""
    return sound_speed / (2.0 * frequency)


@dataclass(frozen=True)
class DesignProblem:
    mics: int
    desired: DesiredPattern
    frequency: float
    delta_min: float = 0.0
    delta_max: float = 0.15
    sound_speed: float = SOUND_SPEED
    grid: PolarGrid = PolarGrid(360)
    restarts: int = 8
    seed: int = 0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def violations(self) -> list[str]:
        out = []
        n = self.desired.order
        if int(self.mics) != self.mics or self.mics < 1:
            out.append(f"mics must be a positive integer, got {self.mics}")
        elif self.mics < n + 1:
            out.append(f"M >= N+1 required (M={self.mics}, N={n})")
        if not (math.isfinite(self.frequency) and self.frequency > 0):
            out.append(f"frequency must be positive, got {self.frequency}")
        if not (0 <= self.delta_min <= self.delta_max and math.isfinite(self.delta_max)):
            out.append(
                f"0 <= delta_min <= delta_max required, got [{self.delta_min}, {self.delta_max}]"
            )
        if not self.sound_speed > 0:
            out.append(f"sound_speed must be positive, got {self.sound_speed}")
        elif self.frequency > 0 and self.delta_max >= aliasing_limit(self.frequency, self.sound_speed):
            out.append(
                f"delta_max={self.delta_max} m must stay below half a wavelength "
                f"({aliasing_limit(self.frequency, self.sound_speed):.6g} m at "
                f"{self.frequency} Hz) to avoid spatial aliasing"
            )
        if int(self.restarts) != self.restarts or self.restarts < 1:
            out.append(f"restarts must be >= 1, got {self.restarts}")
        if int(self.seed) != self.seed or self.seed < 0:
            out.append(f"seed must be a non-negative integer, got {self.seed}")
        tol = self.tolerances
        if not (tol.constraint_tol > 0 and tol.objective_tol > 0 and tol.max_iterations >= 1):
            out.append(f"tolerances must be positive, got {tol}")
        return out

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def num_params(self) -> int:
        return 3 * self.mics - 1

    def capped(self, frequency: float) -> "DesignProblem":
        """Same problem at ``frequency`` with ``delta_max`` pulled under lambda/2."""
        cap = ALIASING_MARGIN * aliasing_limit(frequency, self.sound_speed)
        return replace(self, frequency=frequency, delta_max=min(self.delta_max, cap))


@dataclass(frozen=True)
class DesignResult:
    geometry: ArrayGeometry
    weights: FilterWeights
    metrics: DesignMetrics
    objective_value: float
    converged: bool
    iterations: int
    restart_index: int
    problem: DesignProblem
    message: str = ""

    @property
    def params(self) -> np.ndarray:
        return pack(self.weights.weights, self.geometry.spacings)


def pack(h, spacings) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    return np.concatenate([h.real, h.imag, np.asarray(spacings, dtype=float)])


def unpack(params, mics: int):
    """Split a decision vector into ``(weights, spacings)``."""
    params = np.asarray(params, dtype=float)
    if params.size != 3 * mics - 1:
        raise ValueError(f"expected {3 * mics - 1} parameters for M={mics}, got {params.size}")
    h = params[:mics] + 1j * params[mics : 2 * mics]
    return h, params[2 * mics :]


def _delay_to_spacing(grad_delays, sound_speed):
    # D_m depends on every spacing before it, so d/d delta_i sums over m > i
    return np.cumsum(grad_delays[::-1])[::-1][1:] / sound_speed


class _Model:
    """Objective pieces for one problem with the grid terms precomputed."""

    def __init__(self, problem: DesignProblem):
        self.problem = problem
        self.cos_grid = np.cos(problem.grid.angles)
        self.target = desired_on_grid(problem.desired, problem.grid)
        self.cos_look = math.cos(problem.desired.steer_angle)
        self._key = None
        self._value = None

    def _residual(self, params):
        p = self.problem
        h, spacings = unpack(params, p.mics)
        delays = _cumulative(spacings, p.sound_speed)
        basis = np.exp(1j * p.omega * np.multiply.outer(self.cos_grid, delays))
        return h, basis, basis @ h - self.target

    def evaluate(self, params):
        """Objective value and gradient, memoized on the last point."""
        key = np.asarray(params, dtype=float).tobytes()
        if key == self._key:
            return self._value
        p = self.problem
        h, basis, r = self._residual(params)
        k = r.size
        value = float(np.vdot(r, r).real) / k
        # dJ/dz = (2/K) Re(conj(r) dr/dz) for each real coordinate z
        weighted = (2.0 / k) * (np.conj(r) @ basis)
        grad_re = weighted.real
        grad_im = -weighted.imag
        grad_delays = ((2.0 / k) * (np.conj(r) * self.cos_grid) @ basis * h * 1j * p.omega).real
        grad = np.concatenate([grad_re, grad_im, _delay_to_spacing(grad_delays, p.sound_speed)])
        self._key, self._value = key, (value, grad)
        return value, grad

    def objective(self, params):
        return self.evaluate(params)[0]

    def gradient(self, params):
        return self.evaluate(params)[1]

    def look_response(self, params):
        p = self.problem
        h, spacings = unpack(params, p.mics)
        e = np.exp(1j * p.omega * self.cos_look * _cumulative(spacings, p.sound_speed))
        return h, spacings, e

    def constraints(self, params):
        h, _, e = self.look_response(params)
        v = e @ h
        return np.array([v.real - 1.0, v.imag])

    def constraint_jacobian(self, params):
        p = self.problem
        h, _, e = self.look_response(params)
        grad_delays = h * e * 1j * p.omega * self.cos_look
        grad_spacing = _delay_to_spacing(grad_delays, p.sound_speed)
        row_re = np.concatenate([e.real, -e.imag, grad_spacing.real])
        row_im = np.concatenate([e.imag, e.real, grad_spacing.imag])
        return np.vstack([row_re, row_im])


def objective(params, problem: DesignProblem) -> float:
    """Grid-averaged ``|B_M - B_d|**2`` for a packed decision vector."""
    return _Model(problem).objective(params)


def gradient(params, problem: DesignProblem) -> np.ndarray:
    return _Model(problem).gradient(params)


def constraint_residuals(params, problem: DesignProblem) -> np.ndarray:
    """``[Re(d^H h) - 1, Im(d^H h)]`` at the look direction."""
    return _Model(problem).constraints(params)


def constraint_jacobian(params, problem: DesignProblem) -> np.ndarray:
    """2 x (3M - 1) Jacobian of :func:`constraint_residuals`."""
    return _Model(problem).constraint_jacobian(params)


def look_steering(spacings, problem: DesignProblem) -> np.ndarray:
    delays = _cumulative(spacings, problem.sound_speed)
    return np.exp(-1j * problem.omega * math.cos(problem.desired.steer_angle) * delays)


def project_weights(h, d) -> np.ndarray:
    """Minimum-norm correction of ``h`` onto ``d^H h = 1``."""
    h = np.asarray(h, dtype=complex)
    return h + d * (1.0 - np.vdot(d, h)) / np.vdot(d, d).real


def optimal_weights(spacings, problem: DesignProblem) -> np.ndarray:
    """Best distortionless weights for fixed spacings.

    With the geometry frozen the objective is a Hermitian quadratic in ``h``
    and the constraint is linear, so the minimizer solves one bordered
    (KKT) linear system.
    """
    delays = _cumulative(spacings, problem.sound_speed)
    cos_grid = np.cos(problem.grid.angles)
    basis = np.exp(1j * problem.omega * np.multiply.outer(cos_grid, delays))
    target = desired_on_grid(problem.desired, problem.grid)
    k = cos_grid.size
    m = problem.mics
    d = look_steering(spacings, problem)
    kkt = np.zeros((m + 1, m + 1), dtype=complex)
    kkt[:m, :m] = basis.conj().T @ basis / k
    kkt[:m, m] = d
    kkt[m, :m] = d.conj()
    rhs = np.concatenate([basis.conj().T @ target / k, [1.0]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return project_weights(sol[:m], d)


def multistart_initializer(problem: DesignProblem, restart_index: int, seed: int | None = None):
    """Deterministic starting point for one restart.

    Restart 0 places every microphone ``delta_max / 2`` apart with
    ``h = d(omega, theta_d) / M``. Later restarts draw spacings uniformly in
    the bounds and perturb ``d / M`` with complex Gaussian noise before
    projecting back onto the distortionless constraint. The random stream is
    keyed on ``(seed, restart_index)`` so restarts are independent of each
    other and of how many are run.
    """
    if not 0 <= restart_index < problem.restarts:
        raise ValueError(f"restart_index {restart_index} outside 0..{problem.restarts - 1}")
    seed = problem.seed if seed is None else seed
    m = problem.mics
    if restart_index == 0:
        spacings = np.full(m - 1, max(problem.delta_max / 2.0, problem.delta_min))
        d = look_steering(spacings, problem)
        return pack(d / m, spacings)
    rng = np.random.default_rng([seed, restart_index])
    spacings = rng.uniform(problem.delta_min, problem.delta_max, m - 1)
    d = look_steering(spacings, problem)
    noise = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / (m * math.sqrt(2.0))
    return pack(project_weights(d / m + noise, d), spacings)


class _NonFinite(Exception):
    pass


def _finish(problem, model, x, iterations, restart_index, finished, message):
    """Clip, project and refit weights; return the resulting DesignResult."""
    m = problem.mics
    h, spacings = unpack(x, m)
    spacings = np.clip(spacings, problem.delta_min, problem.delta_max)
    d = look_steering(spacings, problem)
    h = project_weights(h, d)
    best = pack(h, spacings)
    best_value = model.objective(best)
    refit = pack(optimal_weights(spacings, problem), spacings)
    refit_value = model.objective(refit)
    if np.all(np.isfinite(refit)) and refit_value < best_value:
        best, best_value = refit, refit_value
    h, spacings = unpack(best, m)
    geometry = ArrayGeometry(tuple(spacings), problem.sound_speed)
    metrics = evaluate_design(
        geometry, h, problem.frequency, problem.desired, problem.delta_min, problem.delta_max
    )
    residual = float(np.hypot(*model.constraints(best)))
    feasible = (
        residual <= problem.tolerances.constraint_tol
        and metrics.max_spacing_violation <= FEASIBILITY_TOL
    )
    return DesignResult(
        geometry=geometry,
        weights=FilterWeights(h, problem.frequency),
        metrics=metrics,
        objective_value=best_value,
        converged=bool(feasible and finished),
        iterations=int(iterations),
        restart_index=restart_index,
        problem=problem,
        message=message,
    )


def _run_restart(problem: DesignProblem, model: _Model, restart_index: int) -> DesignResult:
    x0 = multistart_initializer(problem, restart_index)
    m = problem.mics

    def fun(x):
        value = model.objective(x)
        if not math.isfinite(value):
            raise _NonFinite
        return value

    bounds = [(None, None)] * (2 * m) + [(problem.delta_min, problem.delta_max)] * (m - 1)
    with warnings.catch_warnings():
        # SLSQP clips trial points to the bounds and warns each time
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            fun,
            x0,
            jac=model.gradient,
            method="SLSQP",
            bounds=bounds,
            constraints=[
                {"type": "eq", "fun": model.constraints, "jac": model.constraint_jacobian}
            ],
            options={
                "maxiter": problem.tolerances.max_iterations,
                "ftol": problem.tolerances.objective_tol,
            },
        )
    return _finish(
        problem, model, res.x, res.nit, restart_index, res.status in _FINISHED_MODES, res.message
    )


def _better(candidate, incumbent):
    if incumbent is None:
        return True
    if candidate.converged != incumbent.converged:
        return candidate.converged
    return candidate.objective_value < incumbent.objective_value


def solve(problem: DesignProblem) -> DesignResult:
    """Best design over ``problem.restarts`` SLSQP runs.

    Raises
    ------
    InfeasibleDesignError
        When no restart ends feasible; ``best_attempt`` holds the closest one.
    """
    model = _Model(problem)
    best = None
    for index in range(problem.restarts):
        try:
            result = _run_restart(problem, model, index)
        except _NonFinite:
            log.warning("restart %d hit a non-finite objective; skipped", index)
            continue
        log.debug(
            "restart %d: objective %.3e after %d iterations (%s)",
            index, result.objective_value, result.iterations, result.message,
        )
        if _better(result, best):
            best = result
    if best is None or not best.converged:
        raise InfeasibleDesignError(
            f"no feasible design at {problem.frequency} Hz after {problem.restarts} restarts",
            best,
        )
    return best


def solve_shared(problem: DesignProblem, frequencies) -> list[DesignResult]:
    """One geometry for the whole band with per-frequency weights.

    For fixed spacings the per-frequency weights have a closed form
    (:func:`optimal_weights`), so only the spacings are searched; the reduced
    objective is the mean per-frequency MSE and its gradient follows from the
    Lagrangian at the optimal weights. ``delta_max`` is capped below half a
    wavelength at the highest frequency.
    """
    frequencies = sorted(float(f) for f in frequencies)
    per_freq = [problem.capped(f) for f in frequencies]
    cap = min(p.delta_max for p in per_freq)
    per_freq = [replace(p, delta_max=cap) for p in per_freq]
    models = [_Model(p) for p in per_freq]
    m = problem.mics

    def reduced(spacings):
        total, grad = 0.0, np.zeros(m - 1)
        for p, model in zip(per_freq, models):
            x = pack(optimal_weights(spacings, p), spacings)
            value, g = model.evaluate(x)
            jac = model.constraint_jacobian(x)
            lam = np.linalg.lstsq(jac[:, : 2 * m].T, -g[: 2 * m], rcond=None)[0]
            total += value
            grad += g[2 * m :] + lam @ jac[:, 2 * m :]
        n = len(per_freq)
        if not math.isfinite(total):
            raise _NonFinite
        return total / n, grad / n

    best = None
    for index in range(problem.restarts):
        start = unpack(multistart_initializer(per_freq[-1], index), m)[1]
        try:
            res = minimize(
                reduced,
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=[(problem.delta_min, cap)] * (m - 1),
                options={
                    "maxiter": problem.tolerances.max_iterations,
                    "ftol": problem.tolerances.objective_tol,
                },
            )
        except _NonFinite:
            log.warning("shared restart %d hit a non-finite objective; skipped", index)
            continue
        # 0 converged, 1 iteration cap, 2 line-search stall
        finished = res.status in (0, 1, 2)
        spacings = np.clip(res.x, problem.delta_min, cap)
        results = [
            _finish(
                p, model, pack(optimal_weights(spacings, p), spacings), res.nit, index,
                finished, str(res.message),
            )
            for p, model in zip(per_freq, models)
        ]
        score = sum(r.objective_value for r in results)
        all_converged = all(r.converged for r in results)
        if best is None or (all_converged, -score) > (best[0], -best[1]):
            best = (all_converged, score, results)
    if best is None:
        raise InfeasibleDesignError("every shared-geometry restart failed")
    return best[2]
