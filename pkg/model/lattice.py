""" Finite metric lattices and the decay profiles F used by every certificate.

A lattice is a connected graph together with its dense graph-distance table.
Vertex ids are ints for paths and rings and coordinate tuples for grids; the
global site order used for tensor factors is ascending vertex id.
"""
import json
import logging
import math
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np
from scipy.special import comb

logger = logging.getLogger(__name__)

LATTICE_KINDS = ('path', 'ring', 'grid')
F_PROFILES = ('power', 'exponential')

# Sum over |n| <= ZD_CUTOFF when evaluating the Z^d reference constant
ZD_CUTOFF = 10_000


class LatticeError(ValueError):
    """Raised for graphs or distance tables that do not define a metric lattice."""


class MetricLattice:
    """
    MetricLattice

    A finite vertex set with a symmetric, nonnegative distance table.

    Attributes:
        vertices (tuple): vertex ids in ascending order.
        distances (ndarray): dense |V| x |V| table, distances[i, j] = d(vertices[i], vertices[j]).
        kind (str): builder that produced the lattice ('path', 'ring', 'grid' or 'custom').
        dims (tuple): builder dimensions, e.g. (8,) or (4, 4).
    """

    def __init__(self, vertices, distances, kind='custom', dims=()):
        self._vertices = tuple(vertices)
        self._index = {v: i for i, v in enumerate(self._vertices)}
        if len(self._index) != len(self._vertices):
            raise LatticeError("Duplicate vertex ids in lattice")
        table = np.array(distances, dtype=float)
        if table.shape != (len(self._vertices), len(self._vertices)):
            raise LatticeError(f"Distance table shape {table.shape} does not match {len(self._vertices)} vertices")
        self._validate_metric(table)
        table.setflags(write=False)
        self._distances = table
        self._kind = kind
        self._dims = tuple(dims)

    @staticmethod
    def _validate_metric(table):
        if not np.all(np.isfinite(table)):
            raise LatticeError("Distance table has non-finite entries (lattice is not connected)")
        if np.any(table < 0):
            raise LatticeError("Distance table has negative entries")
        if np.any(np.diag(table) != 0):
            raise LatticeError("d(x, x) must be 0 for every vertex")
        if not np.array_equal(table, table.T):
            raise LatticeError("Distance table is not symmetric")
        # d(i, j) <= d(i, k) + d(k, j) for all k
        through = table[:, :, None] + table[None, :, :]
        if np.any(table[:, None, :] > through + 1e-12):
            raise LatticeError("Distance table violates the triangle inequality")

    @property
    def vertices(self):
        return self._vertices

    @property
    def distances(self):
        return self._distances

    @property
    def kind(self):
        return self._kind

    @property
    def dims(self):
        return self._dims

    @property
    def size(self):
        return len(self._vertices)

    @property
    def dimension(self):
        """Geometric dimension used for the default profile exponent p = d + 1."""
        if self._kind == 'grid':
            return len(self._dims)
        return 1

    @property
    def lattice_id(self):
        dims = 'x'.join(str(d) for d in self._dims)
        return f"{self._kind}-{dims}" if dims else self._kind

    def __contains__(self, vertex):
        return vertex in self._index

    def index_of(self, vertex):
        try:
            return self._index[vertex]
        except KeyError:
            raise LatticeError(f"Vertex {vertex!r} is not in lattice {self.lattice_id}") from None

    def indices(self, vertex_set):
        return np.array([self.index_of(v) for v in sorted(vertex_set)], dtype=int)

    def sorted_subset(self, vertex_set):
        """Returns the vertex set as a tuple in global site order, checking membership."""
        return tuple(self._vertices[i] for i in sorted(self.index_of(v) for v in set(vertex_set)))

    def d(self, x, y):
        return float(self._distances[self.index_of(x), self.index_of(y)])

    def distance_to_set(self, vertex, vertex_set):
        return float(self._distances[self.index_of(vertex), self.indices(vertex_set)].min())

    def set_distance(self, x_set, y_set):
        """d(X, Y) = min over x in X, y in Y of d(x, y)."""
        block = self._distances[np.ix_(self.indices(x_set), self.indices(y_set))]
        return float(block.min())

    def ball(self, x_set, radius):
        """Vertices v with d(v, X) <= radius, boundary included."""
        to_set = self._distances[:, self.indices(x_set)].min(axis=1)
        return tuple(v for v, r in zip(self._vertices, to_set) if r <= radius)

    def read(self):
        return {
            'kind': self._kind,
            'dims': list(self._dims),
            'vertices': [list(v) if isinstance(v, tuple) else v for v in self._vertices],
            'diameter': float(self._distances.max()) if self.size else 0.0,
        }

    def __str__(self):
        return json.dumps(self.read())

    def __repr__(self):
        return f"MetricLattice({self.lattice_id}, {self.size} vertices)"


@dataclass(frozen=True)
class FFunction:
    """
    FFunction

    Non-increasing decay profile F with exponential tilt a: F_a(r) = exp(-a r) F(r).

    Attributes:
        profile (str): 'power' for F(r) = (1 + r)^(-p), 'exponential' for F(r) = 1 (so F_a is purely exponential).
        p (float): power-law exponent, p > 0.
        a (float): tilt, a >= 0, in inverse distance units.
    """
    profile: str = 'power'
    p: float = 2.0
    a: float = 0.0

    def __post_init__(self):
        if self.profile not in F_PROFILES:
            raise ValueError(f"Unknown F profile '{self.profile}', expected one of {F_PROFILES}")
        if not self.p > 0:
            raise ValueError(f"Profile exponent p must be positive, got {self.p}")
        if not self.a >= 0:
            raise ValueError(f"Tilt a must be nonnegative, got {self.a}")

    def base(self, r):
        r = np.asarray(r, dtype=float)
        if self.profile == 'exponential':
            return np.ones_like(r)
        return (1.0 + r) ** (-self.p)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.a * r) * self.base(r)

    def tilted(self, a):
        return replace(self, a=float(a))

    def read(self):
        return {'profile': self.profile, 'p': self.p, 'a': self.a}


""" Builders """

def path_graph(n):
    return nx.path_graph(n)


def ring_graph(n):
    return nx.cycle_graph(n)


def grid_graph(dims):
    """Rectangular grid on coordinate tuples; neighbours differ by one in a single coordinate."""
    # networkx orders tuple coordinates from the last dimension
    graph = nx.grid_graph(dim=list(reversed(dims)))
    if len(dims) == 1:
        graph = nx.relabel_nodes(graph, {v: (v,) for v in graph.nodes})
    return graph


def graph_distance(graph, kind='custom', dims=()):
    """Builds the full distance table of a connected graph by breadth-first search."""
    if graph.number_of_nodes() == 0:
        raise LatticeError("Graph has no vertices")
    components = list(nx.connected_components(graph))
    if len(components) > 1:
        listing = '; '.join(str(sorted(c)) for c in components)
        raise LatticeError(f"Graph is disconnected with {len(components)} components: {listing}")
    vertices = sorted(graph.nodes)
    index = {v: i for i, v in enumerate(vertices)}
    table = np.zeros((len(vertices), len(vertices)))
    for source, lengths in nx.all_pairs_shortest_path_length(graph):
        for target, length in lengths.items():
            table[index[source], index[target]] = length
    logger.debug(f"Built {kind} lattice with {len(vertices)} vertices")
    return MetricLattice(vertices, table, kind=kind, dims=dims)


def build_lattice(kind, dims):
    dims = tuple(int(n) for n in dims)
    if kind not in LATTICE_KINDS:
        raise LatticeError(f"Unknown lattice kind '{kind}', expected one of {LATTICE_KINDS}")
    if not dims or any(n < 1 for n in dims):
        raise LatticeError(f"Lattice dims must be positive integers, got {list(dims)}")
    if kind in ('path', 'ring') and len(dims) != 1:
        raise LatticeError(f"A {kind} takes a single dimension, got {list(dims)}")
    if kind == 'path':
        graph = path_graph(dims[0])
    elif kind == 'ring':
        graph = ring_graph(dims[0])
    else:
        graph = grid_graph(dims)
    return graph_distance(graph, kind=kind, dims=dims)


def lattice_from_config(entry):
    """{"kind": "path"|"ring"|"grid", "dims": [...]} -> MetricLattice"""
    return build_lattice(entry['kind'], entry['dims'])


def f_function_from_config(entry, dimension=1):
    """{"profile": "power", "p": number, "a": number}; p defaults to dimension + 1."""
    return FFunction(
        profile=entry.get('profile', 'power'),
        p=float(entry.get('p', dimension + 1)),
        a=float(entry.get('a', 0.0)),
    )


""" Geometric constants """

def f_norm(lattice, f):
    """||F_a|| = sup_x sum_y F_a(d(x, y)), diagonal included."""
    return float(f(lattice.distances).sum(axis=1).max())


def convolution_constant(lattice, f, include_diagonal=True):
    """
    C_a = sup_{x,y} sum_z F_a(d(x,z)) F_a(d(z,y)) / F_a(d(x,y)).

    The tilt enters as exp(-a [d(x,z) + d(z,y) - d(x,y)]); the exponent is
    nonnegative by the triangle inequality, so C_a <= C holds term by term.
    """
    table = lattice.distances
    base = f.base(table)
    if np.any(base <= 0):
        raise ValueError("F vanishes at a lattice distance; the convolution constant is undefined")
    excess = table[:, :, None] + table[None, :, :] - table[:, None, :]
    # excess[x, z, y] = d(x,z) + d(z,y) - d(x,y)
    terms = np.exp(-f.a * excess) * base[:, :, None] * base[None, :, :]
    ratios = terms.sum(axis=1) / base
    if not include_diagonal:
        if lattice.size == 1:
            return 0.0
        ratios = np.where(np.eye(lattice.size, dtype=bool), -np.inf, ratios)
    return float(ratios.max())


def exponential_counterexample_ratio(path_length, a=1.0):
    """
    sum_z G(d(x,z)) G(d(z,y)) / G(d(x,y)) for G(r) = exp(-a r) and the endpoints
    x, y of a path with n + 1 vertices. Every vertex is on the geodesic and adds 1.
    """
    if path_length < 1:
        raise ValueError(f"Path length must be at least 1, got {path_length}")
    if not a > 0:
        raise ValueError(f"The exponential profile needs a > 0, got {a}")
    lattice = build_lattice('path', [path_length + 1])
    x, y = 0, lattice.size - 1
    table = lattice.distances
    excess = table[x, :] + table[:, y] - table[x, y]
    return float(np.exp(-a * excess).sum())


def _l1_shell_counts(dimension, radii):
    """Number of n in Z^d with |n|_1 = k, for each k in radii."""
    radii = np.asarray(radii, dtype=float)
    counts = np.zeros_like(radii)
    for i in range(1, dimension + 1):
        counts += 2.0 ** i * comb(dimension, i) * comb(radii - 1, i - 1)
    return np.where(radii == 0, 1.0, counts)


def zd_convolution_reference(dimension, epsilon, cutoff=ZD_CUTOFF):
    """
    Reference bound on C for Z^d with F(r) = (1 + r)^(-d-eps):
    2^(d+eps+1) sum_{n in Z^d} (1 + |n|)^(-d-eps), summed over l1 shells |n| <= cutoff.

    Returns (value, remainder) where remainder bounds the dropped shells using
    s_d(k) <= 2^d d^(d-1) (1+k)^(d-1) / (d-1)!.
    """
    if dimension < 1:
        raise ValueError(f"Dimension must be at least 1, got {dimension}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    exponent = dimension + epsilon
    radii = np.arange(cutoff + 1)
    total = float(np.sum(_l1_shell_counts(dimension, radii) * (1.0 + radii) ** (-exponent)))
    prefactor = 2.0 ** (exponent + 1)
    shell_bound = 2.0 ** dimension * dimension ** (dimension - 1) / math.factorial(dimension - 1)
    remainder = prefactor * shell_bound * (1.0 + cutoff) ** (-epsilon) / epsilon
    return prefactor * total, remainder
