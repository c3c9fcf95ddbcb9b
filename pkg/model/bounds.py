""" Certificates: evaluated right-hand sides of the propagation bounds.

Each certificate records every input it was computed from so that a report row
can be audited without re-running the scenario.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from model.interaction import pair_weights, phi_a_norm
from model.lattice import convolution_constant, f_norm

logger = logging.getLogger(__name__)

CERTIFICATE_KINDS = ('lr', 'lr_exp', 'localization', 'convergence', 'correlation_simple', 'correlation_tail', 'decoupling')

# Velocity search window and refinement
VELOCITY_A_MIN = 1e-3
VELOCITY_A_MAX = 10.0
VELOCITY_GRID_POINTS = 64
VELOCITY_RTOL = 1e-6
DENSE_SCAN_POINTS = 10_000

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


def _vertex_list(vertex_set):
    return [list(v) if isinstance(v, tuple) else v for v in sorted(vertex_set)]


@dataclass(frozen=True)
class LatticeConstants:
    """
    LatticeConstants

    Geometric and interaction constants at one tilt, computed once and shared by all certificates.

    Attributes:
        a (float): tilt.
        f_norm (float): ||F|| (untilted).
        f_a_norm (float): ||F_a||.
        c_a (float): C_a, diagonal included.
        phi_a_norm (float): ||Phi||_a.
        lattice_id (str): lattice the constants were computed on.
    """
    a: float
    f_norm: float
    f_a_norm: float
    c_a: float
    phi_a_norm: float
    lattice_id: str = ''

    @classmethod
    def compute(cls, lattice, f, phi, a=None):
        a = f.a if a is None else float(a)
        tilted = f.tilted(a)
        constants = cls(
            a=a,
            f_norm=f_norm(lattice, f.tilted(0.0)),
            f_a_norm=f_norm(lattice, tilted),
            c_a=convolution_constant(lattice, tilted),
            phi_a_norm=phi_a_norm(phi, lattice, tilted),
            lattice_id=lattice.lattice_id,
        )
        logger.debug(f"Constants at a={a}: {constants.read()}")
        return constants

    @property
    def kappa(self):
        """||Phi||_a C_a, the exponential growth rate of g_a over 2."""
        return self.phi_a_norm * self.c_a

    def read(self):
        return {
            'a': self.a,
            'f_norm': self.f_norm,
            'f_a_norm': self.f_a_norm,
            'c_a': self.c_a,
            'phi_a_norm': self.phi_a_norm,
            'lattice': self.lattice_id,
        }


@dataclass(frozen=True)
class BoundCertificate:
    """
    BoundCertificate

    Attributes:
        kind (str): one of CERTIFICATE_KINDS.
        value (float): the bound, nonnegative.
        inputs (dict): provenance (a, t, supports, norms, constants, lattice id).
        region (tuple): vertex set attached to the bound (the ball B_t(eps) for localization).
    """
    kind: str
    value: float
    inputs: dict = field(default_factory=dict)
    region: tuple = ()

    def __post_init__(self):
        if self.kind not in CERTIFICATE_KINDS:
            raise ValueError(f"Unknown certificate kind '{self.kind}'")
        if not self.value >= 0:
            raise ValueError(f"Certificate {self.kind} evaluated to {self.value}, expected a nonnegative number")

    def read(self):
        data = {'kind': self.kind, 'value': self.value, 'inputs': self.inputs}
        if self.region:
            data['region'] = _vertex_list(self.region)
        return data

    def __str__(self):
        return json.dumps(self.read())


def _provenance(constants, t, **extra):
    inputs = constants.read()
    inputs['t'] = float(t)
    for key, value in extra.items():
        if isinstance(value, (set, frozenset, tuple)) and key.endswith('_set'):
            value = _vertex_list(value)
        inputs[key] = value
    return inputs


def _require_c_a(constants):
    if not constants.c_a > 0:
        raise ValueError(f"C_a must be positive, got {constants.c_a}")


def _tilted_block(lattice, f, a, rows, cols):
    block = lattice.distances[np.ix_(lattice.indices(rows), lattice.indices(cols))]
    return f.tilted(a)(block)


""" g_a and its integral """

def g_factor(phi_a_norm, c_a, t, separated):
    """g_a(t) = exp(2 ||Phi||_a C_a |t|) - 1 when d(X,Y) > 0, the bare exponential otherwise."""
    exponent = 2.0 * phi_a_norm * c_a * abs(t)
    return math.expm1(exponent) if separated else math.exp(exponent)


def integrated_g(phi_a_norm, c_a, t, separated=True):
    """
    int_0^|t| g_a(s) ds in closed form, kappa = ||Phi||_a C_a:
    (exp(2 kappa |t|) - 1) / (2 kappa) - |t| for the separated branch,
    (exp(2 kappa |t|) - 1) / (2 kappa) otherwise.
    """
    span = abs(t)
    kappa = phi_a_norm * c_a
    if kappa == 0:
        return 0.0 if separated else span
    value = math.expm1(2.0 * kappa * span) / (2.0 * kappa)
    return max(value - span, 0.0) if separated else value


def correlation_growth(constants, t, separated=True):
    """
    G_a(t) = ((C_a + ||F_a||) / C_a) ||Phi||_a int_0^|t| g_a.

    The separated branch of g_a applies when no dropped term touches the observable.
    """
    _require_c_a(constants)
    return ((constants.c_a + constants.f_a_norm) / constants.c_a) * constants.phi_a_norm * integrated_g(
        constants.phi_a_norm, constants.c_a, t, separated)


""" Lieb-Robinson bounds """

def lr_certificate(constants, t, x_set, y_set, norms, lattice, f):
    """(2 ||A|| ||B|| / C_a) g_a(t) sum_{x in X} sum_{y in Y} F_a(d(x, y))"""
    _require_c_a(constants)
    norm_a, norm_b = norms
    separated = lattice.set_distance(x_set, y_set) > 0
    double_sum = float(_tilted_block(lattice, f, constants.a, x_set, y_set).sum())
    g = g_factor(constants.phi_a_norm, constants.c_a, t, separated)
    value = 2.0 * norm_a * norm_b / constants.c_a * g * double_sum
    return BoundCertificate('lr', value, _provenance(
        constants, t, x_set=x_set, y_set=y_set, norm_a=norm_a, norm_b=norm_b,
        separated=separated, pair_sum=double_sum))


def lr_certificate_exponential(constants, t, x_set, y_set, norms, lattice, f):
    """(2 ||A|| ||B|| / C_a) ||F|| min(|X|,|Y|) exp(-a [d(X,Y) - (2 ||Phi||_a C_a / a) |t|])"""
    if not constants.a > 0:
        raise ValueError("The exponential form needs a > 0")
    _require_c_a(constants)
    norm_a, norm_b = norms
    separation = lattice.set_distance(x_set, y_set)
    exponent = 2.0 * constants.kappa * abs(t) - constants.a * separation
    value = (2.0 * norm_a * norm_b / constants.c_a * constants.f_norm
             * min(len(set(x_set)), len(set(y_set))) * math.exp(exponent))
    return BoundCertificate('lr_exp', value, _provenance(
        constants, t, x_set=x_set, y_set=y_set, norm_a=norm_a, norm_b=norm_b, separation=separation))


def localization_certificate(constants, t, epsilon, x_set, norm_a, lattice):
    """
    Ball B_t(eps) = {v : d(v, X) <= (2 ||Phi||_a C_a / a) |t| + eps} and the bound
    (2 ||A|| |X| / C_a) ||F|| exp(-a eps) on ||tau_t(A) - <tau_t(A)>_{B^c}||.
    """
    if not constants.a > 0:
        raise ValueError("Localization needs a > 0")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    _require_c_a(constants)
    radius = 2.0 * constants.kappa / constants.a * abs(t) + epsilon
    region = lattice.ball(x_set, radius)
    value = 2.0 * norm_a * len(set(x_set)) / constants.c_a * constants.f_norm * math.exp(-constants.a * epsilon)
    return BoundCertificate('localization', value, _provenance(
        constants, t, x_set=x_set, norm_a=norm_a, epsilon=float(epsilon), radius=radius), region=region)


""" Existence of the dynamics """

def _crossing_meets(phi, inner, outer, y_set):
    inner, outer, y_set = set(inner), set(outer), set(y_set)
    for support in phi.supports:
        s = set(support)
        if s <= outer and s - inner and s & y_set:
            return True
    return False


def convergence_certificate(constants, t, y_set, inner, outer, norm_a, lattice, f, phi):
    """
    Bound on ||tau_t^outer(A) - tau_t^inner(A)|| for A supported in Y inside inner:
    2 ||A|| ||Phi||_a C_a (int_0^|t| g_a) |Y| sup_{z in Y} sum_{x in outer \\ inner} F_a(d(x, z)).

    The separated branch of g_a is used when no term reaching outside inner meets Y.
    """
    inner, outer, y_set = set(inner), set(outer), set(y_set)
    if not inner <= outer:
        raise ValueError(f"Volumes are not nested: {sorted(inner - outer)} are in the inner volume only")
    if not outer <= set(lattice.vertices):
        raise ValueError("Outer volume leaves the lattice")
    if not y_set <= inner:
        raise ValueError(f"Support {sorted(y_set)} is not inside the inner volume")
    shell = outer - inner
    if shell:
        tail = float(_tilted_block(lattice, f, constants.a, y_set, shell).sum(axis=1).max())
    else:
        tail = 0.0
    separated = not _crossing_meets(phi, inner, outer, y_set)
    integral = integrated_g(constants.phi_a_norm, constants.c_a, t, separated)
    value = 2.0 * norm_a * constants.kappa * integral * len(y_set) * tail
    return BoundCertificate('convergence', value, _provenance(
        constants, t, y_set=y_set, inner_set=inner, outer_set=outer, norm_a=norm_a,
        separated=separated, shell_sum=tail))


""" Growth of correlations """

def _require_separated(lattice, x_set, y_set):
    separation = lattice.set_distance(x_set, y_set)
    if separation <= 0:
        raise ValueError(f"Correlation bounds need d(X, Y) > 0, got {separation}")
    return separation


def _tail_sum(lattice, f, a, o_set, separation):
    """sum_{o in O} sum_{x : 2 d(x, o) >= d(X, Y)} F_a(d(x, o))"""
    block = lattice.distances[lattice.indices(o_set), :]
    return float(np.where(2.0 * block >= separation, f.tilted(a)(block), 0.0).sum())


def correlation_certificate_simple(constants, t, x_set, y_set, norms, lattice, separated=True):
    """4 ||A|| ||B|| ||F|| (|X| + |Y|) G_a(t) exp(-a d(X, Y))"""
    separation = _require_separated(lattice, x_set, y_set)
    norm_a, norm_b = norms
    growth = correlation_growth(constants, t, separated)
    value = (4.0 * norm_a * norm_b * constants.f_norm * (len(set(x_set)) + len(set(y_set)))
             * growth * math.exp(-constants.a * separation))
    return BoundCertificate('correlation_simple', value, _provenance(
        constants, t, x_set=x_set, y_set=y_set, norm_a=norm_a, norm_b=norm_b,
        separation=separation, separated=separated, growth=growth))


def correlation_certificate_tail(constants, t, x_set, y_set, norms, lattice, f, separated=True):
    """4 ||A|| ||B|| G_a(t) [tail sum over X + tail sum over Y], tails at distance >= d(X, Y) / 2"""
    separation = _require_separated(lattice, x_set, y_set)
    norm_a, norm_b = norms
    growth = correlation_growth(constants, t, separated)
    tail_x = _tail_sum(lattice, f, constants.a, x_set, separation)
    tail_y = _tail_sum(lattice, f, constants.a, y_set, separation)
    value = 4.0 * norm_a * norm_b * growth * (tail_x + tail_y)
    return BoundCertificate('correlation_tail', value, _provenance(
        constants, t, x_set=x_set, y_set=y_set, norm_a=norm_a, norm_b=norm_b,
        separation=separation, separated=separated, growth=growth, tail_x=tail_x, tail_y=tail_y))


def decoupling_certificate(constants, t, o_set, x_set, y_set, norm_o, lattice, f, separated=True):
    """Bound on int_0^|t| ||[H_2, tau^(1)_s(O)]|| ds: 2 ||O|| G_a(t) sum_{o in O} sum_{x: 2d(x,o) >= d(X,Y)} F_a(d(x,o))"""
    separation = _require_separated(lattice, x_set, y_set)
    growth = correlation_growth(constants, t, separated)
    tail = _tail_sum(lattice, f, constants.a, o_set, separation)
    value = 2.0 * norm_o * growth * tail
    return BoundCertificate('decoupling', value, _provenance(
        constants, t, o_set=o_set, x_set=x_set, y_set=y_set, norm_o=norm_o,
        separation=separation, separated=separated, growth=growth, tail=tail))


""" Velocity """

class VelocityProfile:
    """
    h(a) = 2 ||Phi||_a C_a / a for a fixed interaction, lattice and base profile.

    Everything that does not depend on a is precomputed, so evaluating h is a few
    vectorised exponentials.
    """

    def __init__(self, phi, lattice, f):
        table = lattice.distances
        base = f.base(table)
        weights = pair_weights(phi, lattice)
        self._mask = weights > 0
        # only covered pairs, so exp(a d) never multiplies a zero weight
        self._weights_over_base = weights[self._mask] / base[self._mask]
        self._covered_distances = table[self._mask]
        self._excess = table[:, :, None] + table[None, :, :] - table[:, None, :]
        self._products = base[:, :, None] * base[None, :, :] / base[:, None, :]

    def phi_norm(self, a):
        if not self._mask.any():
            return 0.0
        return float((self._weights_over_base * np.exp(a * self._covered_distances)).max())

    def convolution(self, a):
        return float((np.exp(-a * self._excess) * self._products).sum(axis=1).max())

    def __call__(self, a):
        if a <= 0:
            return math.inf
        return 2.0 * self.phi_norm(a) * self.convolution(a) / a


def _golden_section(h, lo, hi, rtol):
    """Golden-section search on [lo, hi]; returns every evaluated (a, h(a)) pair."""
    evaluated = []
    c = lo + INV_PHI_SQUARE * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    hc, hd = h(c), h(d)
    evaluated += [(c, hc), (d, hd)]
    while hi - lo > rtol * max(abs(c), abs(d)):
        if hc < hd:
            hi, d, hd = d, c, hc
            c = lo + INV_PHI_SQUARE * (hi - lo)
            hc = h(c)
            evaluated.append((c, hc))
        else:
            lo, c, hc = c, d, hd
            d = lo + INV_PHI * (hi - lo)
            hd = h(d)
            evaluated.append((d, hd))
    return evaluated


def velocity(phi, lattice, f, a_min=VELOCITY_A_MIN, a_max=VELOCITY_A_MAX,
             grid_points=VELOCITY_GRID_POINTS, rtol=VELOCITY_RTOL):
    """
    V = inf_{a > 0} 2 ||Phi||_a C_a / a over [a_min, a_max]: logarithmic grid scan,
    then golden-section refinement around the best grid point. Returns (v, a_star).
    """
    profile = VelocityProfile(phi, lattice, f)
    grid = np.geomspace(a_min, a_max, grid_points)
    values = np.array([profile(a) for a in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise ValueError("h(a) = 2 ||Phi||_a C_a / a is not finite anywhere on the search grid")
    best = int(np.argmin(np.where(finite, values, np.inf)))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid_points - 1)]
    candidates = list(zip(grid, values)) + _golden_section(profile, lo, hi, rtol)
    a_star, v = min(((a, h) for a, h in candidates if math.isfinite(h)), key=lambda pair: pair[1])
    logger.info(f"Velocity {v:.6g} at a*={a_star:.6g} after {len(candidates)} evaluations")
    return float(v), float(a_star)


def dense_velocity_scan(phi, lattice, f, points=DENSE_SCAN_POINTS, a_min=VELOCITY_A_MIN, a_max=VELOCITY_A_MAX):
    """Brute-force minimum of h over a logarithmic grid; returns (min value, minimizer)."""
    profile = VelocityProfile(phi, lattice, f)
    grid = np.geomspace(a_min, a_max, points)
    values = np.array([profile(a) for a in grid])
    best = int(np.argmin(values))
    return float(values[best]), float(grid[best])
