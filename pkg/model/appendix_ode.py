""" Norm-preserving linear flows and the inhomogeneous perturbation bound.

For x' = A(t) x with A(t) anti-Hermitian, the flow gamma_t preserves the norm,
and the solution of y' = A(t) y + B(t), y(0) = y0 obeys

    ||y(t) - gamma_t(y0)|| <= int_0^t ||B(s)|| ds.

States are matrices (vectors are n x 1); the generator acts on the row-major
flattening of the state, so both left multiplication y -> A y and derivations
y -> i[H, y] fit the same form. Norms are Hilbert-Schmidt norms of the state.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, quad_vec, solve_ivp

from model.dynamics import PAULI, is_hermitian

logger = logging.getLogger(__name__)

ODE_RTOL = 1e-9
ODE_ATOL = 1e-12
QUAD_TOL = 1e-10
BOUND_SLACK = 1e-7
SATURATION_TOL = 1e-9
VOC_TOL = 1e-7
NORM_TOL = 1e-8
GENERATOR_SAMPLES = 16


class OdeIntegrationError(RuntimeError):
    """Raised when adaptive step control gives up; carries the failing interval."""

    def __init__(self, problem, start, stop, message):
        super().__init__(f"Integration of '{problem}' failed on [{start:.6g}, {stop:.6g}]: {message}")
        self.interval = (start, stop)


def left_action(matrix, columns):
    """Generator of y -> A y on row-major flattened n x columns states."""
    return np.kron(matrix, np.eye(columns))


def commutator_action(h):
    """Generator of y -> i[H, y] on row-major flattened states."""
    eye = np.eye(h.shape[0])
    return 1j * (np.kron(h, eye) - np.kron(eye, h.T))


@dataclass
class OdeProblem:
    """
    OdeProblem

    Attributes:
        name (str): label used in reports.
        generator (callable): t -> anti-Hermitian matrix acting on the flattened state.
        forcing (callable): t -> state-shaped matrix B(t).
        x0 (ndarray): initial value of the homogeneous flow.
        y0 (ndarray): initial value of the forced equation.
        horizon (float): T, largest time the problem is posed on.
        rtol (float), atol (float): integrator step control.
        saturating (bool): the bound is expected to hold with equality.
    """
    name: str
    generator: Callable
    forcing: Callable
    x0: np.ndarray
    y0: np.ndarray
    horizon: float
    rtol: float = ODE_RTOL
    atol: float = ODE_ATOL
    saturating: bool = False
    description: str = ''

    def __post_init__(self):
        self.x0 = np.atleast_2d(np.asarray(self.x0, dtype=complex))
        self.y0 = np.atleast_2d(np.asarray(self.y0, dtype=complex))
        if self.x0.shape != self.y0.shape:
            raise ValueError(f"x0 {self.x0.shape} and y0 {self.y0.shape} must have the same shape")
        if not self.horizon > 0:
            raise ValueError(f"Horizon must be positive, got {self.horizon}")
        size = self.x0.size
        for t in np.linspace(0.0, self.horizon, GENERATOR_SAMPLES):
            a = np.asarray(self.generator(t), dtype=complex)
            if a.shape != (size, size):
                raise ValueError(f"Generator of '{self.name}' has shape {a.shape}, expected {(size, size)}")
            # A + A^* = 0 <=> iA is Hermitian
            if not is_hermitian(1j * a):
                raise ValueError(f"Generator of '{self.name}' is not anti-Hermitian at t={t:.6g}")

    @property
    def shape(self):
        return self.x0.shape

    def read(self):
        return {
            'name': self.name,
            'shape': list(self.shape),
            'horizon': self.horizon,
            'rtol': self.rtol,
            'atol': self.atol,
            'saturating': self.saturating,
            'description': self.description,
        }


def _check_time(problem, t):
    if not 0 <= t <= problem.horizon:
        raise ValueError(f"t={t} is outside [0, {problem.horizon}] for '{problem.name}'")


def _trajectory(problem, initial, times, forced):
    """States at each requested time (ascending, nonnegative) of x' = A x (+ B)."""
    times = np.asarray(times, dtype=float)
    shape = problem.shape
    start = initial.reshape(-1)
    if times.size == 0:
        return []
    stop = float(times.max())
    if stop == 0:
        return [initial.copy() for _ in times]

    def rhs(s, y):
        dy = np.asarray(problem.generator(s)) @ y
        if forced:
            dy = dy + np.asarray(problem.forcing(s), dtype=complex).reshape(-1)
        return dy

    solution = solve_ivp(rhs, (0.0, stop), start, method='DOP853', t_eval=times,
                         rtol=problem.rtol, atol=problem.atol)
    if not solution.success:
        reached = float(solution.t[-1]) if solution.t.size else 0.0
        raise OdeIntegrationError(problem.name, reached, stop, solution.message)
    return [solution.y[:, k].reshape(shape) for k in range(times.size)]


def propagate_homogeneous(problem, t, initial=None):
    """gamma_t(x0), or gamma_t(initial) when given."""
    _check_time(problem, t)
    initial = problem.x0 if initial is None else np.atleast_2d(np.asarray(initial, dtype=complex))
    if t == 0:
        return initial.copy()
    return _trajectory(problem, initial, [t], forced=False)[0]


def solve_inhomogeneous(problem, t):
    """y(t) for y' = A(t) y + B(t), y(0) = y0, by direct integration."""
    _check_time(problem, t)
    if t == 0:
        return problem.y0.copy()
    return _trajectory(problem, problem.y0, [t], forced=True)[0]


def fundamental_solution(problem, t):
    """Dense-output solution of Gamma' = A(t) Gamma, Gamma(0) = 1, on [0, t]."""
    size = problem.x0.size

    def rhs(s, g):
        return (np.asarray(problem.generator(s)) @ g.reshape(size, size)).reshape(-1)

    solution = solve_ivp(rhs, (0.0, t), np.eye(size, dtype=complex).reshape(-1), method='DOP853',
                         dense_output=True, rtol=problem.rtol, atol=problem.atol)
    if not solution.success:
        raise OdeIntegrationError(problem.name, float(solution.t[-1]), t, solution.message)
    return lambda s: solution.sol(s).reshape(size, size)


def variation_of_constants(problem, t):
    """y(t) = Gamma(t) (y0 + int_0^t Gamma(s)^-1 B(s) ds), the integral by vector quadrature."""
    _check_time(problem, t)
    if t == 0:
        return problem.y0.copy()
    gamma = fundamental_solution(problem, t)
    size = problem.y0.size

    def integrand(s):
        pulled = np.linalg.solve(gamma(s), np.asarray(problem.forcing(s), dtype=complex).reshape(-1))
        return np.concatenate([pulled.real, pulled.imag])

    stacked, _ = quad_vec(integrand, 0.0, t, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
    pulled = stacked[:size] + 1j * stacked[size:]
    return (gamma(t) @ (problem.y0.reshape(-1) + pulled)).reshape(problem.shape)


def forcing_integral(problem, t):
    """int_0^t ||B(s)|| ds by adaptive quadrature."""
    _check_time(problem, t)
    if t == 0:
        return 0.0
    value, _ = quad(lambda s: np.linalg.norm(problem.forcing(s)), 0.0, t,
                    epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return float(value)


@dataclass
class OdeReport:
    """
    OdeReport

    One entry per time: lhs = ||y(t) - gamma_t(y0)||, rhs = int_0^t ||B||, margin = rhs - lhs,
    the variation-of-constants disagreement and the norm drift of gamma_t(x0).
    """
    problem: OdeProblem
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(row['passed'] for row in self.rows)

    def read(self):
        return {'problem': self.problem.read(), 'passed': self.passed, 'rows': self.rows}

    def __str__(self):
        return json.dumps(self.read())


def verify_bound(problem, t_grid, slack=BOUND_SLACK, voc_tol=VOC_TOL, norm_tol=NORM_TOL,
                 saturation_tol=SATURATION_TOL):
    """Checks the perturbation bound, norm preservation and the variation-of-constants cross-check on a grid."""
    times = sorted(float(t) for t in t_grid)
    for t in times:
        _check_time(problem, t)
    forced = _trajectory(problem, problem.y0, times, forced=True)
    free = _trajectory(problem, problem.y0, times, forced=False)
    flow = _trajectory(problem, problem.x0, times, forced=False)
    start_norm = float(np.linalg.norm(problem.x0))

    report = OdeReport(problem)
    for t, y, gamma_y0, gamma_x0 in zip(times, forced, free, flow):
        lhs = float(np.linalg.norm(y - gamma_y0))
        rhs = forcing_integral(problem, t)
        voc_error = float(np.linalg.norm(variation_of_constants(problem, t) - y))
        norm_drift = abs(float(np.linalg.norm(gamma_x0)) - start_norm)
        row = {
            't': t,
            'lhs': lhs,
            'rhs': rhs,
            'margin': rhs - lhs,
            'voc_error': voc_error,
            'norm_drift': norm_drift,
            'bound_ok': lhs <= rhs + slack,
            'voc_ok': voc_error <= voc_tol,
            'norm_ok': norm_drift <= norm_tol,
        }
        if problem.saturating:
            row['saturation_gap'] = abs(rhs - lhs)
            row['saturation_ok'] = row['saturation_gap'] <= saturation_tol
        row['passed'] = row['bound_ok'] and row['voc_ok'] and row['norm_ok'] and row.get('saturation_ok', True)
        if not row['passed']:
            logger.error(f"Perturbation bound check failed for '{problem.name}' at t={t}: {row}")
        report.rows.append(row)
    logger.info(f"Checked '{problem.name}' at {len(times)} times: {'pass' if report.passed else 'FAIL'}")
    return report


""" Built-in problem suite """

def _random_hermitian(rng, n):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (m + m.conj().T) / 2


def builtin_problems(seed=0):
    """Ordered suite of test problems, all of dimension <= 8."""
    sx, sy, sz, eye = PAULI['x'], PAULI['y'], PAULI['z'], PAULI['i']
    zero = np.zeros((4, 4), dtype=complex)
    rng = np.random.default_rng(seed)

    h0 = _random_hermitian(rng, 8) / 4
    h1 = _random_hermitian(rng, 8) / 4
    f1 = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
    f2 = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
    x8 = rng.standard_normal((8, 1)) + 1j * rng.standard_normal((8, 1))
    x8 /= np.linalg.norm(x8)

    zz = np.kron(sz, sz)
    transverse = np.kron(sx, eye) + np.kron(eye, sx)

    return [
        OdeProblem(
            name='zero_generator_constant_forcing',
            generator=lambda t: zero,
            forcing=lambda t: sx,
            x0=eye, y0=eye, horizon=2.0, saturating=True,
            description='A = 0, B = sigma_x; y(t) = y0 + t B saturates the bound',
        ),
        OdeProblem(
            name='pauli_z_constant_forcing',
            generator=lambda t: left_action(1j * sz, 2),
            forcing=lambda t: sx,
            x0=eye, y0=(eye + sz) / 2, horizon=2.0,
            description='A = i sigma_z acting by left multiplication, B = sigma_x',
        ),
        OdeProblem(
            name='rotating_qubit_sinusoidal',
            generator=lambda t: 1j * (np.cos(t) * sx + np.sin(t) * sy),
            forcing=lambda t: np.array([[np.sin(2 * t)], [0.5]], dtype=complex),
            x0=np.array([[1.0], [0.0]]), y0=np.array([[0.0], [1.0]]), horizon=3.0,
            description='time-dependent rotation generator with sinusoidal forcing on C^2',
        ),
        OdeProblem(
            name='random_eight_level',
            generator=lambda t: 1j * (h0 + np.cos(t) * h1),
            forcing=lambda t: np.cos(t) * f1 + np.sin(3 * t) * f2,
            x0=x8, y0=x8, horizon=2.0,
            description=f'seeded (seed={seed}) time-dependent anti-Hermitian generator on C^8',
        ),
        OdeProblem(
            name='commutator_derivation',
            generator=lambda t: commutator_action(zz + np.cos(t) * transverse),
            forcing=lambda t: np.sin(t) * np.kron(sx, sz),
            x0=np.kron(sz, eye), y0=np.kron(sz, eye), horizon=2.0,
            description='derivation y -> i[H(t), y] on two-qubit operators',
        ),
    ]
