""" Scenario runner: evaluates measured quantities next to their certificates.

Each subcommand returns ReportRow objects; a gated row whose measured value
exceeds its certificate by more than the slack is a violation.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from api.scenario import ConfigError
from model import appendix_ode
from model.bounds import (
    VELOCITY_RTOL,
    LatticeConstants,
    correlation_certificate_simple,
    correlation_certificate_tail,
    convergence_certificate,
    decoupling_certificate,
    dense_velocity_scan,
    localization_certificate,
    lr_certificate,
    lr_certificate_exponential,
    velocity,
)
from model.dynamics import (
    ALGEBRA_TOL,
    DEFAULT_DIMENSION_CAP,
    HeisenbergEvolution,
    commutator_norm,
    crossing_commutator_integrals,
    dynamic_correlation,
    embed,
    haar_conditional_expectation,
    operator_norm,
)
from model.interaction import build_hamiltonian, decouple, phi_a_norm
from model.lattice import convolution_constant, f_norm, zd_convolution_reference

logger = logging.getLogger(__name__)

ODE_GRID_POINTS = 11


@dataclass
class RunSettings:
    """
    RunSettings

    Attributes:
        slack (float): numerical slack on gated inequalities.
        dimension_cap (int): Hilbert dimension cap for dense matrices.
        seed (int): RNG seed.
        ode_rtol (float), ode_atol (float): integrator step control for ode-check.
    """
    slack: float = 1e-10
    dimension_cap: int = DEFAULT_DIMENSION_CAP
    seed: int = 0
    ode_rtol: float = appendix_ode.ODE_RTOL
    ode_atol: float = appendix_ode.ODE_ATOL

    @classmethod
    def from_app(cls, app_config, config=None, seed=None):
        """Command-line seed, then the scenario's, then the app default."""
        if seed is None:
            seed = config.seed if config is not None else app_config['SEED']
        cap = config.dimension_cap if config is not None and config.dimension_cap else app_config['DIMENSION_CAP']
        return cls(
            slack=app_config['SLACK'],
            dimension_cap=cap,
            seed=int(seed),
            ode_rtol=app_config['ODE_RTOL'],
            ode_atol=app_config['ODE_ATOL'],
        )


def ratio(measured, certificate):
    """measured / certificate; 0/0 is 0 and x/0 is inf for x > 0."""
    if certificate > 0:
        return measured / certificate
    return 0.0 if measured == 0 else math.inf


@dataclass
class ReportRow:
    t: float
    a: float
    kind: str
    measured: float
    certificate: float
    ratio: float
    gated: bool = True
    violation: bool = False
    provenance: dict = field(default_factory=dict)

    def read(self):
        return {
            't': self.t,
            'a': self.a,
            'kind': self.kind,
            'measured': self.measured,
            'certificate': self.certificate,
            'ratio': self.ratio,
            'gated': self.gated,
            'violation': self.violation,
            'provenance': self.provenance,
        }


def make_row(kind, t, a, measured, certificate, gated, slack, provenance=None):
    measured, certificate = float(measured), float(certificate)
    violation = bool(gated and measured > certificate + slack)
    row = ReportRow(
        t=float(t), a=float(a), kind=kind, measured=measured, certificate=certificate,
        ratio=ratio(measured, certificate), gated=bool(gated), violation=violation,
        provenance=provenance or {},
    )
    if violation:
        logger.error(f"{kind} violated at t={t}, a={a}: measured {measured:.12g} > certificate {certificate:.12g}")
    return row


def certificate_row(certificate, measured, settings, gated=True, kind=None):
    inputs = certificate.inputs
    return make_row(kind or certificate.kind, inputs['t'], inputs['a'], measured, certificate.value,
                    gated, settings.slack, certificate.read())


""" Subcommands """

def _model(config):
    return config.metric_lattice, config.f_function(), config.interaction()


def _full_evolution(config, phi, settings):
    lattice = config.metric_lattice
    h = build_hamiltonian(phi, lattice.vertices, dimension_cap=settings.dimension_cap)
    return h, HeisenbergEvolution(h)


def run_constants(config, settings):
    lattice, f, phi = _model(config)
    base = f.tilted(0.0)
    f0 = f_norm(lattice, base)
    c0 = convolution_constant(lattice, base)
    phi0 = phi_a_norm(phi, lattice, base)
    rows = []
    for a in config.tilts:
        tilted = f.tilted(a)
        c_a = convolution_constant(lattice, tilted)
        provenance = {'lattice': lattice.lattice_id, 'f': tilted.read()}
        rows += [
            make_row('f_norm', 0.0, a, f_norm(lattice, tilted), f0, True, settings.slack, provenance),
            make_row('convolution_constant', 0.0, a, c_a, c0, True, settings.slack, provenance),
            make_row('convolution_constant_offdiag', 0.0, a,
                     convolution_constant(lattice, tilted, include_diagonal=False), c_a, False,
                     settings.slack, provenance),
            make_row('phi_a_norm', 0.0, a, phi0, phi_a_norm(phi, lattice, tilted), False,
                     settings.slack, provenance),
        ]
    epsilon = f.p - lattice.dimension
    if f.profile == 'power' and epsilon > 0:
        reference, remainder = zd_convolution_reference(lattice.dimension, epsilon)
        # ring distances are not those of Z^d
        gated = lattice.kind in ('path', 'grid')
        rows.append(make_row('zd_reference', 0.0, 0.0, c0, reference, gated, settings.slack, {
            'lattice': lattice.lattice_id, 'epsilon': epsilon, 'remainder': remainder,
        }))
    return rows


def run_lr_check(config, settings):
    lattice, f, phi = _model(config)
    a_obs, b_obs = config.observable('A'), config.observable('B')
    h, evolution = _full_evolution(config, phi, settings)
    measured = {t: commutator_norm(a_obs, b_obs, h, t, evolution) for t in config.times}
    norms = (operator_norm(a_obs), operator_norm(b_obs))
    rows = []
    for a in config.tilts:
        constants = LatticeConstants.compute(lattice, f, phi, a)
        for t in config.times:
            certificate = lr_certificate(constants, t, a_obs.support, b_obs.support, norms, lattice, f)
            rows.append(certificate_row(certificate, measured[t], settings))
            if a > 0:
                certificate = lr_certificate_exponential(constants, t, a_obs.support, b_obs.support, norms, lattice, f)
                rows.append(certificate_row(certificate, measured[t], settings))
    return rows


def _require_separated(lattice, a_obs, b_obs):
    if lattice.set_distance(a_obs.support, b_obs.support) <= 0:
        raise ConfigError('.observables', "A and B must have separated supports for correlation runs")


def run_correlations(config, settings):
    lattice, f, phi = _model(config)
    a_obs, b_obs = config.observable('A'), config.observable('B')
    _require_separated(lattice, a_obs, b_obs)
    x_set, y_set = a_obs.support, b_obs.support
    omega = config.product_state()
    h, evolution = _full_evolution(config, phi, settings)

    split = decouple(phi, lattice, x_set, y_set)
    volume = lattice.vertices
    decoupled = HeisenbergEvolution(build_hamiltonian(split.phi1, volume, dimension_cap=settings.dimension_cap))
    h2 = build_hamiltonian(split.phi2, volume, dimension_cap=settings.dimension_cap)
    touches_a = any(set(s) & set(x_set) for s in split.phi2.supports)
    touches_b = any(set(s) & set(y_set) for s in split.phi2.supports)

    times = config.times
    norms = (operator_norm(a_obs), operator_norm(b_obs))
    correlation = {t: dynamic_correlation(a_obs, b_obs, h, omega, t, evolution)[1] for t in times}
    integrals = {
        'A': dict(zip(times, crossing_commutator_integrals(a_obs, decoupled, h2, times))),
        'B': dict(zip(times, crossing_commutator_integrals(b_obs, decoupled, h2, times))),
    }
    split_info = split.read()
    rows = []
    for t in times:
        factorized = dynamic_correlation(a_obs, b_obs, decoupled.h, omega, t, decoupled)[1]
        rows.append(make_row('factorization', t, 0.0, factorized, ALGEBRA_TOL, True, 0.0, split_info))
        for label, obs in (('A', a_obs), ('B', b_obs)):
            drift = operator_norm(evolution.evolve(obs, t) - decoupled.evolve(obs, t))
            rows.append(make_row(f'drift_{label}', t, 0.0, drift, integrals[label][t], True, settings.slack,
                                 split_info))

    for a in config.tilts:
        constants = LatticeConstants.compute(lattice, f, phi, a)
        for t in times:
            pair_separated = not (touches_a or touches_b)
            tail = correlation_certificate_tail(constants, t, x_set, y_set, norms, lattice, f, pair_separated)
            rows.append(certificate_row(tail, correlation[t], settings))
            simple = correlation_certificate_simple(constants, t, x_set, y_set, norms, lattice, pair_separated)
            rows.append(certificate_row(simple, correlation[t], settings, gated=False))
            for label, obs, touches in (('A', a_obs, touches_a), ('B', b_obs, touches_b)):
                certificate = decoupling_certificate(constants, t, obs.support, x_set, y_set, operator_norm(obs),
                                                     lattice, f, separated=not touches)
                rows.append(certificate_row(certificate, integrals[label][t], settings, kind=f'decoupling_{label}'))
    return rows


def run_converge(config, settings):
    lattice, f, phi = _model(config)
    volumes = config.volume_sets()
    if len(volumes) < 2:
        raise ConfigError('.volumes', "converge needs at least two nested volumes")
    a_obs = config.observable('A')
    if not set(a_obs.support) <= set(volumes[0]):
        raise ConfigError('.observables.A', f"support {list(a_obs.support)} is not inside the smallest volume")
    outermost = tuple(sorted(volumes[-1]))
    evolutions = [
        HeisenbergEvolution(build_hamiltonian(phi, volume, dimension_cap=settings.dimension_cap))
        for volume in volumes
    ]
    norm_a = operator_norm(a_obs)
    constants = {a: LatticeConstants.compute(lattice, f, phi, a) for a in config.tilts}
    rows = []
    for t in config.times:
        evolved = [embed(e.evolve(a_obs, t), outermost, dimension_cap=None) for e in evolutions]
        for i in range(len(volumes)):
            for j in range(i + 1, len(volumes)):
                difference = operator_norm(evolved[j] - evolved[i])
                for a in config.tilts:
                    certificate = convergence_certificate(constants[a], t, a_obs.support, volumes[i], volumes[j],
                                                          norm_a, lattice, f, phi)
                    rows.append(certificate_row(certificate, difference, settings))
        # difference to the outermost volume shrinks as the inner volume grows
        last = len(volumes) - 1
        for i in range(1, last):
            larger = operator_norm(evolved[last] - evolved[i])
            smaller = operator_norm(evolved[last] - evolved[i - 1])
            rows.append(make_row('convergence_monotone', t, 0.0, larger, smaller, True, settings.slack, {
                'inner': [list(v) if isinstance(v, tuple) else v for v in sorted(volumes[i])],
                'previous': [list(v) if isinstance(v, tuple) else v for v in sorted(volumes[i - 1])],
            }))
    return rows


def run_velocity(config, settings):
    lattice, f, phi = _model(config)
    v, a_star = velocity(phi, lattice, f)
    dense, a_dense = dense_velocity_scan(phi, lattice, f)
    return [make_row('velocity', 0.0, a_star, v, dense * (1 + VELOCITY_RTOL), True, settings.slack, {
        'lattice': lattice.lattice_id, 'f': f.read(), 'a_star': a_star, 'dense_min': dense, 'dense_argmin': a_dense,
    })]


def run_localize(config, settings):
    lattice, f, phi = _model(config)
    a_obs = config.observable('A')
    _, evolution = _full_evolution(config, phi, settings)
    norm_a = operator_norm(a_obs)
    volume = lattice.vertices
    rows = []
    for a in config.tilts:
        if a <= 0:
            logger.info("Skipping a=0 for localization")
            continue
        constants = LatticeConstants.compute(lattice, f, phi, a)
        for t in config.times:
            evolved = evolution.evolve(a_obs, t)
            for epsilon in config.epsilons:
                certificate = localization_certificate(constants, t, epsilon, a_obs.support, norm_a, lattice)
                averaged = haar_conditional_expectation(evolved, certificate.region, volume)
                rows.append(certificate_row(certificate, operator_norm(evolved - averaged), settings))
    return rows


def run_ode_check(config, settings):
    rows = []
    for index, problem in enumerate(appendix_ode.builtin_problems(settings.seed)):
        problem.rtol, problem.atol = settings.ode_rtol, settings.ode_atol
        report = appendix_ode.verify_bound(problem, np.linspace(0.0, problem.horizon, ODE_GRID_POINTS))
        info = problem.read()
        for entry in report.rows:
            t = entry['t']
            provenance = dict(info, **{k: entry[k] for k in ('lhs', 'rhs', 'margin')})
            rows += [
                make_row('ode_bound', t, index, entry['lhs'], entry['rhs'], True,
                         appendix_ode.BOUND_SLACK, provenance),
                make_row('ode_voc', t, index, entry['voc_error'], appendix_ode.VOC_TOL, True, 0.0, provenance),
                make_row('ode_norm', t, index, entry['norm_drift'], appendix_ode.NORM_TOL, True, 0.0, provenance),
            ]
            if problem.saturating:
                rows.append(make_row('ode_saturation', t, index, entry['saturation_gap'],
                                     appendix_ode.SATURATION_TOL, True, 0.0, provenance))
    return rows


SUBCOMMANDS = {
    'constants': run_constants,
    'lr-check': run_lr_check,
    'correlations': run_correlations,
    'converge': run_converge,
    'velocity': run_velocity,
    'localize': run_localize,
    'ode-check': run_ode_check,
}


def run_scenario(config, subcommand, settings=None):
    """Runs one subcommand; rows come back ordered by (kind, a, t)."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"Unknown subcommand '{subcommand}', expected one of {list(SUBCOMMANDS)}")
    if config is None and subcommand != 'ode-check':
        raise ConfigError('.', f"{subcommand} needs a scenario config")
    settings = settings or RunSettings(seed=config.seed if config is not None else 0)
    name = config.name if config is not None else 'builtin'
    logger.info(f"Running {subcommand} on '{name}'")
    rows = SUBCOMMANDS[subcommand](config, settings)
    rows.sort(key=lambda row: (row.kind, row.a, row.t))
    violations = sum(row.violation for row in rows)
    logger.info(f"{subcommand}: {len(rows)} rows, {violations} violations")
    return rows
