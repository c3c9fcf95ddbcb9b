""" Interactions Phi: Hermitian terms on finite vertex subsets.

Covers the tilted interaction norm, Hamiltonian assembly on a volume, partial
Hamiltonians H_Y, and the half-distance decoupling split Phi = Phi_1 + Phi_2.
"""
import json
import logging
from dataclasses import dataclass

import numpy as np

from model.dynamics import (
    DEFAULT_DIMENSION_CAP,
    PAULI,
    DimensionCapError,
    LocalObservable,
    SupportError,
    embed,
    is_hermitian,
    matrix_from_entries,
    operator_norm,
    vertex_from_record,
)

logger = logging.getLogger(__name__)

MODELS = ('tfim', 'heisenberg', 'custom')


class Interaction:
    """
    Interaction

    A finite map from vertex subsets X to Hermitian matrices Phi(X) on H_X.

    Attributes:
        lattice (MetricLattice): lattice the supports live in.
        terms (dict): support tuple (ascending) -> LocalObservable; terms with equal support are summed.
        site_dims (dict): vertex -> on-site dimension (2 when absent).
    """

    def __init__(self, lattice, terms=(), site_dims=None):
        self._lattice = lattice
        self._site_dims = dict(site_dims or {})
        self._terms = {}
        for support, matrix in terms:
            self._add_term(support, matrix)
        self._norms = None

    def _add_term(self, support, matrix):
        support = tuple(support)
        missing = [v for v in support if v not in self._lattice]
        if missing:
            raise SupportError(f"Term support {support} has sites {missing} outside lattice {self._lattice.lattice_id}")
        term = LocalObservable(support, matrix, [self.site_dim(v) for v in support])
        if not is_hermitian(term.matrix):
            raise ValueError(f"Interaction term on {term.support} is not Hermitian")
        if term.support in self._terms:
            existing = self._terms[term.support]
            term = existing.with_matrix(existing.matrix + term.matrix)
        self._terms[term.support] = term

    @property
    def lattice(self):
        return self._lattice

    @property
    def terms(self):
        return dict(self._terms)

    @property
    def supports(self):
        return list(self._terms)

    @property
    def site_dims(self):
        return dict(self._site_dims)

    def site_dim(self, vertex):
        return self._site_dims.get(vertex, 2)

    def __len__(self):
        return len(self._terms)

    def norms(self):
        """Operator norm of every term, largest singular value."""
        if self._norms is None:
            self._norms = {support: operator_norm(term) for support, term in self._terms.items()}
        return dict(self._norms)

    def _derived(self, supports):
        return Interaction(
            self._lattice,
            ((s, self._terms[s].matrix) for s in supports),
            self._site_dims,
        )

    def scaled(self, factor):
        return Interaction(
            self._lattice,
            ((s, factor * t.matrix) for s, t in self._terms.items()),
            self._site_dims,
        )

    def restrict(self, volume):
        """Terms whose support lies inside the volume."""
        volume = set(volume)
        return self._derived([s for s in self._terms if set(s) <= volume])

    def to_records(self):
        """[{support: [...], matrix: row-major [[re, im], ...]}]"""
        records = []
        for support, term in self._terms.items():
            entries = term.matrix.reshape(-1)
            records.append({
                'support': [list(v) if isinstance(v, tuple) else v for v in support],
                'matrix': [[float(z.real), float(z.imag)] for z in entries],
            })
        return records

    def read(self):
        return {
            'lattice': self._lattice.lattice_id,
            'terms': len(self._terms),
            'supports': [[list(v) if isinstance(v, tuple) else v for v in s] for s in self._terms],
        }

    def __str__(self):
        return json.dumps(self.read())


@dataclass(frozen=True)
class DecoupledSplit:
    """
    DecoupledSplit

    Attributes:
        phi1 (Interaction): terms that stay inside S or inside its complement.
        phi2 (Interaction): terms crossing the boundary of S.
        separating_set (tuple): S = {v : d(v, X) <= d(X, Y) / 2}.
    """
    phi1: Interaction
    phi2: Interaction
    separating_set: tuple

    def read(self):
        return {
            'separating_set': [list(v) if isinstance(v, tuple) else v for v in self.separating_set],
            'phi1': self.phi1.read(),
            'phi2': self.phi2.read(),
        }


""" Presets and interchange """

def interaction_from_records(lattice, records, site_dims=None):
    site_dims = site_dims or {}
    terms = []
    for record in records:
        support = [vertex_from_record(v) for v in record['support']]
        dimension = int(np.prod([site_dims.get(v, 2) for v in support]))
        terms.append((support, matrix_from_entries(record['matrix'], dimension)))
    return Interaction(lattice, terms, site_dims)


def _edges(lattice):
    table = lattice.distances
    vertices = lattice.vertices
    return [
        (vertices[i], vertices[j])
        for i in range(lattice.size)
        for j in range(i + 1, lattice.size)
        if table[i, j] == 1
    ]


def tfim(lattice, J=1.0, h=1.0):
    """Transverse-field Ising: J sz sz on every edge, h sx on every site."""
    zz = J * np.kron(PAULI['z'], PAULI['z'])
    terms = [((x, y), zz) for x, y in _edges(lattice)]
    if h != 0:
        terms += [((v,), h * PAULI['x']) for v in lattice.vertices]
    return Interaction(lattice, terms)


def heisenberg(lattice, J=1.0, h=0.0):
    """Isotropic Heisenberg: J (sx sx + sy sy + sz sz) on every edge, optional h sz field."""
    exchange = J * sum(np.kron(PAULI[k], PAULI[k]) for k in 'xyz')
    terms = [((x, y), exchange) for x, y in _edges(lattice)]
    if h != 0:
        terms += [((v,), h * PAULI['z']) for v in lattice.vertices]
    return Interaction(lattice, terms)


def interaction_from_config(lattice, entry):
    """{"model": "tfim"|"heisenberg"|"custom", "J": number, "h": number, "terms": [...]}"""
    model = entry.get('model', 'tfim')
    if model == 'tfim':
        return tfim(lattice, J=float(entry.get('J', 1.0)), h=float(entry.get('h', 1.0)))
    if model == 'heisenberg':
        return heisenberg(lattice, J=float(entry.get('J', 1.0)), h=float(entry.get('h', 0.0)))
    if model == 'custom':
        return interaction_from_records(lattice, entry.get('terms', []))
    raise ValueError(f"Unknown model '{model}', expected one of {MODELS}")


""" Norms and Hamiltonians """

def pair_weights(phi, lattice):
    """W[x, y] = sum over terms X containing x and y of ||Phi(X)||, diagonal included."""
    weights = np.zeros((lattice.size, lattice.size))
    for support, norm in phi.norms().items():
        idx = lattice.indices(support)
        weights[np.ix_(idx, idx)] += norm
    return weights


def phi_a_norm(phi, lattice, f):
    """||Phi||_a = sup_{x,y} sum_{X contains x,y} ||Phi(X)|| / F_a(d(x,y))."""
    if len(phi) == 0:
        return 0.0
    weights = pair_weights(phi, lattice)
    # pairs no term covers contribute 0, whatever the tilt
    mask = weights > 0
    if not mask.any():
        return 0.0
    distances = lattice.distances[mask]
    # 1 / F_a(r) = exp(a r) / F(r)
    scaled = weights[mask] * np.exp(f.a * distances) / f.base(distances)
    return float(scaled.max())


def _assemble(terms, volume, phi, dimension_cap):
    volume = tuple(sorted(set(volume)))
    missing = [v for v in volume if v not in phi.lattice]
    if missing:
        raise SupportError(f"Volume sites {missing} are outside lattice {phi.lattice.lattice_id}")
    dims = tuple(phi.site_dim(v) for v in volume)
    dimension = int(np.prod(dims)) if dims else 1
    if dimension_cap is not None and dimension > dimension_cap:
        raise DimensionCapError(dimension, dimension_cap)
    matrix = np.zeros((dimension, dimension), dtype=complex)
    for term in terms:
        matrix += embed(term, volume, dims_of=phi.site_dim, dimension_cap=None).matrix
    return LocalObservable(volume, matrix, dims)


def build_hamiltonian(phi, volume, dimension_cap=DEFAULT_DIMENSION_CAP):
    """H = sum over terms with support inside the volume."""
    volume_set = set(volume)
    terms = [t for s, t in phi.terms.items() if set(s) <= volume_set]
    return _assemble(terms, volume, phi, dimension_cap)


def partial_hamiltonian(phi, volume, y_set, dimension_cap=DEFAULT_DIMENSION_CAP):
    """H_Y = sum over terms inside the volume that meet Y."""
    volume_set, y_set = set(volume), set(y_set)
    terms = [t for s, t in phi.terms.items() if set(s) <= volume_set and set(s) & y_set]
    return _assemble(terms, volume, phi, dimension_cap)


def boundary_terms(phi, inner, outer):
    """Terms inside outer but not inside inner: H_outer - H_inner."""
    inner, outer = set(inner), set(outer)
    return phi._derived([s for s in phi.supports if set(s) <= outer and not set(s) <= inner])


def decouple(phi, lattice, x_set, y_set):
    """Splits off the terms crossing the boundary of the half-distance ball around X."""
    separation = lattice.set_distance(x_set, y_set)
    if separation <= 0:
        raise SupportError(f"Decoupling needs d(X, Y) > 0, got {separation} for X={sorted(x_set)}, Y={sorted(y_set)}")
    separating = lattice.ball(x_set, separation / 2)
    inside = set(separating)
    crossing = [s for s in phi.supports if set(s) & inside and set(s) - inside]
    crossing_set = set(crossing)
    kept = [s for s in phi.supports if s not in crossing_set]
    logger.debug(f"Decoupling at radius {separation / 2}: {len(crossing)} crossing terms")
    return DecoupledSplit(phi1=phi._derived(kept), phi2=phi._derived(crossing), separating_set=separating)
