""" Exact Heisenberg dynamics on small volumes.

Observables are dense matrices tagged with their support; tensor factors are
ordered by ascending vertex id. Evolution uses one Hermitian eigendecomposition
per Hamiltonian, so sweeping a grid of times costs a few matrix products per point.
"""
import json
import logging
from functools import reduce

import numpy as np
from scipy.integrate import quad
from scipy.stats import unitary_group

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION_CAP = 4096
ALGEBRA_TOL = 1e-10
HERMITIAN_TOL = 1e-12

PAULI = {
    'i': np.eye(2, dtype=complex),
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'z': np.array([[1, 0], [0, -1]], dtype=complex),
}

STATE_PRESETS = {
    'up': np.array([[1, 0], [0, 0]], dtype=complex),
    'down': np.array([[0, 0], [0, 1]], dtype=complex),
    'maximally_mixed': np.eye(2, dtype=complex) / 2,
}


class SupportError(ValueError):
    """Raised when supports are not contained in a volume, or overlap where they must not."""


class DimensionCapError(ValueError):
    """Raised when a dense matrix would exceed the configured Hilbert dimension cap."""

    def __init__(self, dimension, cap):
        super().__init__(f"Hilbert dimension {dimension} exceeds the cap of {cap}")
        self.dimension = dimension
        self.cap = cap


def _check_cap(dimension, cap):
    if cap is not None and dimension > cap:
        raise DimensionCapError(dimension, cap)


def is_hermitian(matrix, tol=HERMITIAN_TOL):
    scale = max(1.0, float(np.abs(matrix).max(initial=0.0)))
    return float(np.abs(matrix - matrix.conj().T).max(initial=0.0)) <= tol * scale


class LocalObservable:
    """
    LocalObservable

    A matrix acting on the tensor product of the on-site spaces of its support.

    Attributes:
        support (tuple): vertex ids the matrix acts on, ascending.
        matrix (ndarray): complex square matrix of size prod(dims).
        dims (tuple): on-site dimensions, aligned with support.
        footprint (tuple): smallest support the observable is known to live on; after
            embedding into a volume this still records the original X.
    """

    def __init__(self, support, matrix, dims=None, footprint=None):
        support = tuple(support)
        if len(set(support)) != len(support):
            raise SupportError(f"Repeated site in support {support}")
        order = sorted(range(len(support)), key=lambda i: support[i])
        dims = tuple(dims) if dims is not None else (2,) * len(support)
        matrix = np.asarray(matrix, dtype=complex)
        expected = int(np.prod(dims)) if dims else 1
        if matrix.shape != (expected, expected):
            raise ValueError(f"Matrix shape {matrix.shape} does not match support {support} with dims {dims}")
        if order != list(range(len(support))):
            matrix = _permute_factors(matrix, dims, order)
            support = tuple(support[i] for i in order)
            dims = tuple(dims[i] for i in order)
        self._support = support
        self._dims = dims
        self._matrix = matrix
        self._footprint = tuple(sorted(footprint)) if footprint is not None else support

    @property
    def support(self):
        return self._support

    @property
    def matrix(self):
        return self._matrix

    @property
    def dims(self):
        return self._dims

    @property
    def footprint(self):
        return self._footprint

    @property
    def dimension(self):
        return self._matrix.shape[0]

    def with_matrix(self, matrix):
        return LocalObservable(self._support, matrix, self._dims, footprint=self._footprint)

    def __matmul__(self, other):
        if self._support != other.support:
            raise SupportError(f"Product needs a common volume, got {self._support} and {other.support}")
        footprint = set(self._footprint) | set(other.footprint)
        return LocalObservable(self._support, self._matrix @ other.matrix, self._dims, footprint=footprint)

    def __sub__(self, other):
        if self._support != other.support:
            raise SupportError(f"Difference needs a common volume, got {self._support} and {other.support}")
        footprint = set(self._footprint) | set(other.footprint)
        return LocalObservable(self._support, self._matrix - other.matrix, self._dims, footprint=footprint)

    def read(self):
        return {
            'support': [list(v) if isinstance(v, tuple) else v for v in self._support],
            'footprint': [list(v) if isinstance(v, tuple) else v for v in self._footprint],
            'dimension': self.dimension,
        }

    def __str__(self):
        return json.dumps(self.read())


def _permute_factors(matrix, dims, order):
    """Reorders tensor factors so that new factor k is old factor order[k]."""
    n = len(dims)
    tensor = matrix.reshape(tuple(dims) * 2)
    axes = list(order) + [n + i for i in order]
    new_dim = matrix.shape[0]
    return tensor.transpose(axes).reshape(new_dim, new_dim)


def pauli_observable(site, label):
    label = label.lower()
    if label not in PAULI:
        raise ValueError(f"Unknown Pauli label '{label}', expected one of x, y, z, i")
    return LocalObservable((site,), PAULI[label])


def vertex_from_record(value):
    """JSON lists name grid vertices; everything else is used as is."""
    return tuple(value) if isinstance(value, list) else value


def matrix_from_entries(entries, dimension):
    """Row-major entries, each a number or an [re, im] pair."""
    values = []
    for entry in entries:
        if isinstance(entry, (list, tuple)):
            values.append(complex(entry[0], entry[1] if len(entry) > 1 else 0.0))
        else:
            values.append(complex(entry))
    if len(values) != dimension * dimension:
        raise ValueError(f"Expected {dimension * dimension} matrix entries, got {len(values)}")
    return np.array(values, dtype=complex).reshape(dimension, dimension)


def observable_from_config(entry):
    """{"site": id, "pauli": "x"|"y"|"z"} or {"support": [...], "matrix": [...]}"""
    if 'pauli' in entry:
        return pauli_observable(vertex_from_record(entry['site']), entry['pauli'])
    support = [vertex_from_record(v) for v in entry['support']]
    return LocalObservable(support, matrix_from_entries(entry['matrix'], 2 ** len(support)))


def identity(volume, dims=None):
    dims = tuple(dims) if dims is not None else (2,) * len(volume)
    return LocalObservable(volume, np.eye(int(np.prod(dims)), dtype=complex), dims)


def embed(obs, volume, dims_of=None, dimension_cap=DEFAULT_DIMENSION_CAP):
    """obs (x) identity on volume minus support, factors in ascending site order."""
    volume = tuple(sorted(set(volume)))
    if not set(obs.support) <= set(volume):
        missing = sorted(set(obs.support) - set(volume))
        raise SupportError(f"Support {obs.support} is not contained in volume {volume}; missing {missing}")
    if volume == obs.support:
        return obs
    site_dim = dict(zip(obs.support, obs.dims))
    rest = [v for v in volume if v not in site_dim]
    rest_dims = [dims_of(v) if dims_of else 2 for v in rest]
    total = obs.dimension * int(np.prod(rest_dims))
    _check_cap(total, dimension_cap)
    full = np.kron(obs.matrix, np.eye(int(np.prod(rest_dims)), dtype=complex))
    current = list(obs.support) + rest
    current_dims = list(obs.dims) + rest_dims
    order = sorted(range(len(current)), key=lambda i: current[i])
    matrix = _permute_factors(full, current_dims, order)
    dims = tuple(current_dims[i] for i in order)
    return LocalObservable(volume, matrix, dims, footprint=obs.footprint)


def operator_norm(obs):
    """Largest singular value."""
    matrix = obs.matrix if isinstance(obs, LocalObservable) else np.asarray(obs)
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def commutator(a, b):
    return a.with_matrix(a.matrix @ b.matrix - b.matrix @ a.matrix)


class HeisenbergEvolution:
    """
    Heisenberg picture evolution tau_t(A) = exp(itH) A exp(-itH) for a fixed Hamiltonian.

    The eigendecomposition H = V diag(E) V^* is computed once; in the eigenbasis the
    evolution multiplies matrix elements by exp(i (E_j - E_k) t).
    """

    def __init__(self, h):
        if not is_hermitian(h.matrix):
            raise ValueError("Hamiltonian is not Hermitian")
        self.h = h
        self.energies, self.vectors = np.linalg.eigh(h.matrix)
        self._gaps = self.energies[:, None] - self.energies[None, :]

    @property
    def volume(self):
        return self.h.support

    def to_eigenbasis(self, matrix):
        return self.vectors.conj().T @ matrix @ self.vectors

    def from_eigenbasis(self, matrix):
        return self.vectors @ matrix @ self.vectors.conj().T

    def phases(self, t):
        return np.exp(1j * self._gaps * t)

    def unitary(self, t):
        """exp(-itH)"""
        return (self.vectors * np.exp(-1j * self.energies * t)) @ self.vectors.conj().T

    def evolve(self, obs, t):
        if obs.support != self.volume:
            obs = embed(obs, self.volume, dimension_cap=None)
        if t == 0:
            return obs
        u = self.unitary(t)
        drift = float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())
        if drift > ALGEBRA_TOL:
            raise ValueError(f"Propagator lost unitarity by {drift:.3e} at t={t}")
        return obs.with_matrix(u.conj().T @ obs.matrix @ u)


def heisenberg_evolve(obs, h, t):
    return HeisenbergEvolution(h).evolve(obs, t)


def commutator_norm(a, b, h, t, evolution=None):
    """||[tau_t(A), B]|| in the volume of h."""
    evolution = evolution or HeisenbergEvolution(h)
    evolved = evolution.evolve(a, t)
    b = embed(b, evolution.volume, dimension_cap=None)
    return operator_norm(commutator(evolved, b))


""" Partial traces and Haar averages """

def partial_trace(obs, keep):
    """Tr over support minus keep; returns an observable on keep."""
    keep = tuple(sorted(set(keep)))
    if not set(keep) <= set(obs.support):
        raise SupportError(f"Cannot keep {keep}: not inside support {obs.support}")
    n = len(obs.support)
    kept = [i for i, v in enumerate(obs.support) if v in keep]
    traced = [i for i in range(n) if i not in kept]
    order = kept + traced
    matrix = _permute_factors(obs.matrix, obs.dims, order)
    keep_dim = int(np.prod([obs.dims[i] for i in kept])) if kept else 1
    trace_dim = int(np.prod([obs.dims[i] for i in traced])) if traced else 1
    reduced = np.einsum('ajbj->ab', matrix.reshape(keep_dim, trace_dim, keep_dim, trace_dim))
    return LocalObservable(keep, reduced, tuple(obs.dims[i] for i in kept))


def haar_conditional_expectation(obs, x_set, volume):
    """<A>_{X^c} = (Tr_{X^c} A / dim H_{X^c}) (x) 1_{X^c}, returned on the full volume."""
    volume = tuple(sorted(set(volume)))
    x_set = tuple(sorted(set(x_set)))
    if not set(x_set) <= set(volume):
        raise SupportError(f"Set {x_set} is not contained in volume {volume}")
    obs = embed(obs, volume, dimension_cap=None)
    if x_set == volume:
        return obs
    complement_dim = int(np.prod([d for v, d in zip(obs.support, obs.dims) if v not in x_set]))
    if not x_set:
        scalar = np.trace(obs.matrix) / complement_dim
        return obs.with_matrix(scalar * np.eye(obs.dimension, dtype=complex))
    reduced = partial_trace(obs, x_set)
    reduced = reduced.with_matrix(reduced.matrix / complement_dim)
    site_dim = dict(zip(obs.support, obs.dims))
    result = embed(reduced, volume, dims_of=site_dim.get, dimension_cap=None)
    return LocalObservable(result.support, result.matrix, result.dims, footprint=x_set)


def haar_average_sample(obs, x_set, volume, samples=200, seed=0):
    """Monte-Carlo estimate of the Haar twirl over unitaries on X^c (test oracle)."""
    volume = tuple(sorted(set(volume)))
    obs = embed(obs, volume, dimension_cap=None)
    complement = tuple(v for v in volume if v not in set(x_set))
    if not complement:
        return obs
    site_dim = dict(zip(obs.support, obs.dims))
    complement_dims = tuple(site_dim[v] for v in complement)
    dim = int(np.prod(complement_dims))
    rng = np.random.default_rng(seed)
    total = np.zeros_like(obs.matrix)
    for _ in range(samples):
        if dim == 1:
            u = np.eye(1, dtype=complex)
        else:
            u = unitary_group.rvs(dim, random_state=rng)
        full = embed(LocalObservable(complement, u, complement_dims), volume, dims_of=site_dim.get, dimension_cap=None)
        total += full.matrix.conj().T @ obs.matrix @ full.matrix
    return obs.with_matrix(total / samples)


""" Product states and correlations """

class ProductState:
    """
    ProductState

    Omega = (x)_x Omega_x, one density matrix per vertex.

    Attributes:
        factors (dict): vertex id -> density matrix (unit trace, positive semidefinite).
    """

    def __init__(self, factors):
        self._factors = {}
        for vertex, rho in factors.items():
            rho = np.asarray(rho, dtype=complex)
            if abs(np.trace(rho) - 1) > HERMITIAN_TOL:
                raise ValueError(f"State at site {vertex!r} has trace {np.trace(rho):.6g}, expected 1")
            if not is_hermitian(rho):
                raise ValueError(f"State at site {vertex!r} is not Hermitian")
            if np.linalg.eigvalsh(rho).min() < -HERMITIAN_TOL:
                raise ValueError(f"State at site {vertex!r} is not positive semidefinite")
            self._factors[vertex] = rho

    @classmethod
    def uniform(cls, vertices, preset='up'):
        return cls({v: STATE_PRESETS[preset] for v in vertices})

    @property
    def factors(self):
        return dict(self._factors)

    def density(self, volume):
        missing = [v for v in volume if v not in self._factors]
        if missing:
            raise SupportError(f"Product state has no factor for sites {missing}")
        return reduce(np.kron, (self._factors[v] for v in sorted(volume)))

    def read(self):
        return {str(v): np.real_if_close(rho).tolist() for v, rho in self._factors.items()}


def _site_state(value):
    if isinstance(value, str):
        if value not in STATE_PRESETS:
            raise ValueError(f"Unknown state preset '{value}', expected one of {sorted(STATE_PRESETS)}")
        return STATE_PRESETS[value]
    return matrix_from_entries(value, 2)


def product_state_from_config(entry, vertices):
    """
    "up" | {"default": preset, "sites": [{"site": id, "state": preset or 4 entries}, ...]}
    """
    if isinstance(entry, str):
        entry = {'default': entry}
    default = _site_state(entry.get('default', 'up'))
    factors = {v: default for v in vertices}
    for record in entry.get('sites', []):
        factors[vertex_from_record(record['site'])] = _site_state(record['state'])
    return ProductState(factors)


def expectation(obs, omega):
    """<A> = Tr(rho_support A)"""
    return complex(np.trace(omega.density(obs.support) @ obs.matrix))


def _require_disjoint(a, b):
    overlap = set(a.footprint) & set(b.footprint)
    if overlap:
        raise SupportError(f"Observables must have disjoint supports, both contain {sorted(overlap)}")


def dynamic_correlation(a, b, h, omega, t, evolution=None):
    """
    <tau_t(AB)> - <tau_t(A)><tau_t(B)> under the product state.

    Returns (real part, modulus).
    """
    _require_disjoint(a, b)
    evolution = evolution or HeisenbergEvolution(h)
    evolved_a = evolution.evolve(a, t)
    evolved_b = evolution.evolve(b, t)
    joint = expectation(evolved_a @ evolved_b, omega)
    value = joint - expectation(evolved_a, omega) * expectation(evolved_b, omega)
    return float(value.real), float(abs(value))


def crossing_commutator_integrals(obs, decoupled, h_crossing, times):
    """
    Integrals int_0^|t| ||[H_2, tau^(1)_{+-s}(O)]|| ds for every t, in input order.

    Works in the eigenbasis of the decoupled Hamiltonian, where evolving O only
    rescales matrix elements by phases; each interval is integrated by adaptive quadrature.
    """
    obs = embed(obs, decoupled.volume, dimension_cap=None)
    h2 = embed(h_crossing, decoupled.volume, dimension_cap=None)
    obs_eig = decoupled.to_eigenbasis(obs.matrix)
    h2_eig = decoupled.to_eigenbasis(h2.matrix)

    hermitian = is_hermitian(obs.matrix)

    def integrand(s):
        evolved = obs_eig * decoupled.phases(s)
        bracket = h2_eig @ evolved - evolved @ h2_eig
        if hermitian:
            # i[H_2, O] is Hermitian when O is
            return float(np.abs(np.linalg.eigvalsh(1j * bracket)).max(initial=0.0))
        return float(np.linalg.norm(bracket, 2))

    times = [float(t) for t in times]
    cumulative = {}
    for sign in (1.0, -1.0):
        spans = sorted({abs(t) for t in times if (t >= 0) == (sign > 0)})
        total, previous = 0.0, 0.0
        for span in spans:
            if span > previous:
                piece, _ = quad(lambda s: integrand(sign * s), previous, span, epsabs=1e-10, epsrel=1e-10, limit=200)
                total += piece
                previous = span
            cumulative[(sign, span)] = total
    return [cumulative[(1.0 if t >= 0 else -1.0, abs(t))] for t in times]


def decoupled_drift(obs, full, decoupled, h_crossing, t):
    """
    Returns (||tau_t(O) - tau^(1)_t(O)||, int_0^|t| ||[H_2, tau^(1)_s(O)]|| ds); the first
    never exceeds the second when the dropped terms H_2 = H - H_1.
    """
    drift = operator_norm(full.evolve(obs, t) - decoupled.evolve(obs, t))
    integral = crossing_commutator_integrals(obs, decoupled, h_crossing, [t])[0]
    return drift, integral
