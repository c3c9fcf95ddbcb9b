import math

import networkx as nx
import numpy as np
import pytest

from model.lattice import (
    FFunction,
    LatticeError,
    MetricLattice,
    build_lattice,
    convolution_constant,
    exponential_counterexample_ratio,
    f_function_from_config,
    f_norm,
    graph_distance,
    lattice_from_config,
    zd_convolution_reference,
)


def test_path_distance():
    lattice = build_lattice('path', [5])
    assert lattice.d(0, 4) == 4
    assert all(lattice.d(v, v) == 0 for v in lattice.vertices)


def test_grid_distance_is_manhattan():
    lattice = build_lattice('grid', [3, 3])
    assert lattice.d((0, 0), (2, 2)) == 4
    assert lattice.d((0, 2), (2, 0)) == 4
    assert lattice.dimension == 2


def test_grid_vertex_ids_follow_dims():
    rectangle = build_lattice('grid', [2, 3])
    assert list(rectangle.vertices) == [(i, j) for i in range(2) for j in range(3)]
    assert rectangle.d((0, 0), (1, 2)) == 3
    line = build_lattice('grid', [4])
    assert list(line.vertices) == [(0,), (1,), (2,), (3,)]
    assert line.d((0,), (3,)) == 3
    cube = build_lattice('grid', [2, 2, 2])
    assert len(cube.vertices) == 8
    assert cube.d((0, 0, 0), (1, 1, 1)) == 3


def test_ring_wraps_around():
    lattice = build_lattice('ring', [6])
    assert lattice.d(0, 5) == 1
    assert lattice.d(0, 3) == 3


def test_disconnected_graph_names_components():
    graph = nx.Graph()
    graph.add_edges_from([(0, 1), (2, 3)])
    with pytest.raises(LatticeError, match=r"2 components: \[0, 1\]; \[2, 3\]"):
        graph_distance(graph)


def test_metric_validation():
    with pytest.raises(LatticeError, match="symmetric"):
        MetricLattice([0, 1], [[0, 1], [2, 0]])
    with pytest.raises(LatticeError, match="triangle"):
        MetricLattice([0, 1, 2], [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(LatticeError, match="d\\(x, x\\)"):
        MetricLattice([0], [[1]])


def test_set_helpers():
    lattice = build_lattice('path', [8])
    assert lattice.set_distance({0}, {7}) == 7
    assert lattice.ball({0}, 3.5) == (0, 1, 2, 3)
    assert lattice.ball({0, 7}, 0) == (0, 7)
    assert lattice.distance_to_set(4, {0, 6}) == 2


def test_config_builders():
    lattice = lattice_from_config({'kind': 'grid', 'dims': [2, 3]})
    assert lattice.size == 6
    f = f_function_from_config({}, dimension=lattice.dimension)
    assert f.p == 3.0 and f.a == 0.0
    with pytest.raises(LatticeError):
        lattice_from_config({'kind': 'torus', 'dims': [4]})


def test_tilt_is_exact():
    f = FFunction(p=2.0, a=0.7)
    r = np.arange(10.0)
    np.testing.assert_array_equal(f(r), np.exp(-0.7 * r) * (1 + r) ** -2.0)


def test_invalid_profiles():
    with pytest.raises(ValueError):
        FFunction(p=0)
    with pytest.raises(ValueError):
        FFunction(a=-1)
    with pytest.raises(ValueError):
        FFunction(profile='gaussian')


def test_f_norm_examples():
    lattice = build_lattice('path', [3])
    assert f_norm(lattice, FFunction(p=2.0)) == pytest.approx(1.5)
    # attained at the center: 1 + 2 * (1/2) * (1/4)
    assert f_norm(lattice, FFunction(p=2.0, a=math.log(2))) == pytest.approx(1.25)
    assert f_norm(build_lattice('path', [1]), FFunction(p=2.0)) == 1.0


def test_convolution_constant_examples():
    f = FFunction(p=2.0)
    assert convolution_constant(build_lattice('path', [2]), f) == pytest.approx(2.0)
    assert convolution_constant(build_lattice('path', [1]), f) == pytest.approx(1.0)


def test_offdiagonal_variant_never_exceeds_full_sup():
    lattice = build_lattice('path', [6])
    f = FFunction(p=2.0, a=0.5)
    assert convolution_constant(lattice, f, include_diagonal=False) <= convolution_constant(lattice, f)


@pytest.mark.parametrize('kind, dims', [('path', [16]), ('grid', [4, 4])])
def test_tilted_constants_shrink(kind, dims):
    lattice = build_lattice(kind, dims)
    base = FFunction(p=lattice.dimension + 1.0)
    f0, c0 = f_norm(lattice, base), convolution_constant(lattice, base)
    for a in np.arange(0, 2.25, 0.25):
        tilted = base.tilted(a)
        assert f_norm(lattice, tilted) <= f0
        assert convolution_constant(lattice, tilted) <= c0


def test_counterexample_ratio_grows_without_bound():
    assert exponential_counterexample_ratio(1) == pytest.approx(2.0)
    ratios = [exponential_counterexample_ratio(n) for n in range(1, 21)]
    for n, ratio in enumerate(ratios, start=1):
        assert ratio >= n + 1 - 1e-12
    assert exponential_counterexample_ratio(20) > exponential_counterexample_ratio(10)


def test_zd_reference_in_one_dimension():
    value, remainder = zd_convolution_reference(1, 1.0)
    exact = 8 * (math.pi ** 2 / 3 - 1)
    assert value <= exact <= value + remainder


def test_zd_reference_rejects_bad_input():
    with pytest.raises(ValueError):
        zd_convolution_reference(0, 1.0)
    with pytest.raises(ValueError):
        zd_convolution_reference(1, 0.0)


def test_path_constants_converge_below_reference():
    f = FFunction(p=2.0)
    reference, _ = zd_convolution_reference(1, 1.0)
    constants = [convolution_constant(build_lattice('path', [n]), f) for n in (8, 16, 32, 64)]
    assert all(b >= a - 1e-12 for a, b in zip(constants, constants[1:]))
    assert constants[-1] <= reference
