""" Scenario configs: JSON documents naming a lattice, a model and what to measure.

parse_config validates a document and fills in defaults; errors carry the JSON
path of the offending field. See docs/config_schema.md for the schema.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from model.dynamics import observable_from_config, product_state_from_config, vertex_from_record
from model.interaction import MODELS, interaction_from_config
from model.lattice import f_function_from_config, lattice_from_config

logger = logging.getLogger(__name__)

DEFAULT_TILTS = [0.0, 0.5, 1.0]
DEFAULT_TIMES = {'start': 0.0, 'stop': 3.0, 'points': 50}
DEFAULT_EPSILONS = [0.0, 1.0, 2.0, 3.0]
REPORT_FORMATS = ('csv', 'json', 'both')


class ConfigError(ValueError):
    """Invalid scenario config; path is the JSON path of the offending field."""

    def __init__(self, path, message, valid=None):
        detail = f"{path}: {message}"
        if valid is not None:
            detail += f" (valid ids: {valid})"
        super().__init__(detail)
        self.path = path
        self.valid = valid


@dataclass
class ScenarioConfig:
    """
    ScenarioConfig

    Normalized JSON form of a scenario; builders turn it into model objects.

    Attributes:
        name (str): report file stem.
        lattice (dict): {"kind", "dims"}.
        f (dict): {"profile", "p"}; p defaults to dimension + 1.
        model (dict): {"model", "J", "h"} or {"model": "custom", "terms": [...]}.
        observables (dict): {"A": entry, "B": entry}.
        state (dict): {"default": preset, "sites": [...]}.
        tilts (list): values of a.
        times (list): strictly increasing time grid.
        volumes (list): nested vertex lists for convergence runs.
        epsilons (list): localization margins.
        outputs (dict): {"dir", "format"}; empty values fall back to app config.
        seed (int): RNG seed.
        dimension_cap (int): Hilbert dimension cap, None for the app default.
    """
    name: str
    lattice: dict
    f: dict
    model: dict
    observables: dict
    state: dict
    tilts: list = field(default_factory=lambda: list(DEFAULT_TILTS))
    times: list = field(default_factory=list)
    volumes: list = field(default_factory=list)
    epsilons: list = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    dimension_cap: int = None

    @cached_property
    def metric_lattice(self):
        return lattice_from_config(self.lattice)

    def f_function(self):
        return f_function_from_config(self.f, self.metric_lattice.dimension)

    def interaction(self):
        return interaction_from_config(self.metric_lattice, self.model)

    def observable(self, label):
        return observable_from_config(self.observables[label])

    def product_state(self):
        return product_state_from_config(self.state, self.metric_lattice.vertices)

    def volume_sets(self):
        return [tuple(vertex_from_record(v) for v in volume) for volume in self.volumes]

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


""" Validation helpers """

def _require(document, key, kind, path):
    if key not in document:
        raise ConfigError(path, "missing required field")
    value = document[key]
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _number(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError(path, f"expected a finite number, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _number_list(values, path, minimum=None):
    if not isinstance(values, list) or not values:
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [_number(v, f"{path}[{i}]", minimum) for i, v in enumerate(values)]


def _valid_ids(lattice):
    return [list(v) if isinstance(v, tuple) else v for v in lattice.vertices]


def _site(lattice, value, path):
    vertex = vertex_from_record(value)
    try:
        known = vertex in lattice
    except TypeError:
        known = False
    if not known:
        raise ConfigError(path, f"site {value!r} is not in the lattice", valid=_valid_ids(lattice))
    return value


def _times(entry, path):
    if isinstance(entry, dict):
        start = _number(entry.get('start', DEFAULT_TIMES['start']), f"{path}.start")
        stop = _number(entry.get('stop', DEFAULT_TIMES['stop']), f"{path}.stop")
        points = entry.get('points', DEFAULT_TIMES['points'])
        if isinstance(points, bool) or not isinstance(points, int) or points < 1:
            raise ConfigError(f"{path}.points", f"expected a positive integer, got {points!r}")
        times = [float(t) for t in np.linspace(start, stop, points)]
    else:
        times = _number_list(entry, path)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError(path, "time grid must be strictly increasing")
    return times


def _observable(lattice, entry, path):
    if not isinstance(entry, dict):
        raise ConfigError(path, "expected an object")
    if 'pauli' in entry:
        site = _site(lattice, _require(entry, 'site', (int, list, str), f"{path}.site"), f"{path}.site")
        label = _require(entry, 'pauli', str, f"{path}.pauli").lower()
        if label not in ('x', 'y', 'z', 'i'):
            raise ConfigError(f"{path}.pauli", f"unknown Pauli label '{label}'")
        normalized = {'site': site, 'pauli': label}
    else:
        support = _require(entry, 'support', list, f"{path}.support")
        if not support:
            raise ConfigError(f"{path}.support", "support must not be empty")
        support = [_site(lattice, v, f"{path}.support[{i}]") for i, v in enumerate(support)]
        matrix = _require(entry, 'matrix', list, f"{path}.matrix")
        normalized = {'support': support, 'matrix': matrix}
    try:
        observable_from_config(normalized)
    except ValueError as e:
        raise ConfigError(path, str(e)) from e
    return normalized


def _state(lattice, entry, path):
    if entry is None:
        entry = 'up'
    if isinstance(entry, str):
        entry = {'default': entry}
    if not isinstance(entry, dict):
        raise ConfigError(path, "expected a preset name or an object")
    normalized = {'default': entry.get('default', 'up'), 'sites': []}
    for i, record in enumerate(entry.get('sites', [])):
        site = _site(lattice, _require(record, 'site', (int, list, str), f"{path}.sites[{i}].site"),
                     f"{path}.sites[{i}].site")
        normalized['sites'].append({'site': site, 'state': record.get('state', 'up')})
    try:
        product_state_from_config(normalized, lattice.vertices)
    except ValueError as e:
        raise ConfigError(path, str(e)) from e
    return normalized


def _volumes(lattice, entry, path):
    volumes = []
    for i, volume in enumerate(entry):
        if not isinstance(volume, list) or not volume:
            raise ConfigError(f"{path}[{i}]", "expected a nonempty list of sites")
        volumes.append([_site(lattice, v, f"{path}[{i}][{j}]") for j, v in enumerate(volume)])
    as_sets = [{vertex_from_record(v) for v in volume} for volume in volumes]
    for i, (inner, outer) in enumerate(zip(as_sets, as_sets[1:])):
        if not inner <= outer:
            raise ConfigError(f"{path}[{i + 1}]", f"volume must contain {path}[{i}]")
    return volumes


def _model(lattice, entry, path):
    model = entry.get('model', 'tfim')
    if model not in MODELS:
        raise ConfigError(f"{path}.model", f"unknown model '{model}', expected one of {list(MODELS)}")
    normalized = dict(entry, model=model)
    if model == 'custom':
        terms = _require(entry, 'terms', list, f"{path}.terms")
        for i, term in enumerate(terms):
            if not isinstance(term, dict):
                raise ConfigError(f"{path}.terms[{i}]", "expected an object")
            support = _require(term, 'support', list, f"{path}.terms[{i}].support")
            for j, v in enumerate(support):
                _site(lattice, v, f"{path}.terms[{i}].support[{j}]")
            _require(term, 'matrix', list, f"{path}.terms[{i}].matrix")
    else:
        for key in ('J', 'h'):
            if key in entry:
                normalized[key] = _number(entry[key], f"{path}.{key}")
    try:
        interaction_from_config(lattice, normalized)
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise ConfigError(path, str(e)) from e
    return normalized


def parse_config(text, seed=None):
    """
    Parses and validates a UTF-8 JSON scenario document.

    Defaults: p = dimension + 1, tilts [0, 0.5, 1], 50 times on [0, 3],
    all-up product state, seed 0 (or the given seed when the document has none).
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError('.', f"invalid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError('.', "top level must be an object")

    lattice_spec = _require(document, 'lattice', dict, '.lattice')
    try:
        lattice = lattice_from_config(lattice_spec)
    except KeyError as e:
        raise ConfigError(f".lattice.{e.args[0]}", "missing required field") from e
    except (TypeError, ValueError) as e:
        raise ConfigError('.lattice', str(e)) from e
    lattice_spec = {'kind': lattice.kind, 'dims': list(lattice.dims)}

    f_spec = dict(document.get('f', {}))
    f_spec.setdefault('profile', 'power')
    f_spec.setdefault('p', lattice.dimension + 1)
    f_spec['p'] = _number(f_spec['p'], '.f.p')
    f_spec.pop('a', None)
    try:
        f_function_from_config(f_spec, lattice.dimension)
    except ValueError as e:
        raise ConfigError('.f', str(e)) from e

    observables = document.get('observables', {})
    if not isinstance(observables, dict):
        raise ConfigError('.observables', "expected an object")
    first, last = _valid_ids(lattice)[0], _valid_ids(lattice)[-1]
    observables = {
        'A': _observable(lattice, observables.get('A', {'site': first, 'pauli': 'z'}), '.observables.A'),
        'B': _observable(lattice, observables.get('B', {'site': last, 'pauli': 'z'}), '.observables.B'),
    }

    outputs = dict(document.get('outputs', {}))
    if outputs.get('format') not in (None,) + REPORT_FORMATS:
        raise ConfigError('.outputs.format', f"expected one of {list(REPORT_FORMATS)}, got {outputs['format']!r}")

    if 'seed' in document:
        seed_value = document['seed']
        if isinstance(seed_value, bool) or not isinstance(seed_value, int):
            raise ConfigError('.seed', f"expected an integer, got {seed_value!r}")
    else:
        seed_value = 0 if seed is None else int(seed)

    cap = document.get('dimension_cap')
    if cap is not None and (isinstance(cap, bool) or not isinstance(cap, int) or cap < 1):
        raise ConfigError('.dimension_cap', f"expected a positive integer, got {cap!r}")

    config = ScenarioConfig(
        name=str(document.get('name', lattice.lattice_id)),
        lattice=lattice_spec,
        f=f_spec,
        model=_model(lattice, document.get('model', {}), '.model'),
        observables=observables,
        state=_state(lattice, document.get('state'), '.state'),
        tilts=_number_list(document.get('tilts', DEFAULT_TILTS), '.tilts', minimum=0.0),
        times=_times(document.get('times', DEFAULT_TIMES), '.times'),
        volumes=_volumes(lattice, document.get('volumes', []), '.volumes'),
        epsilons=_number_list(document.get('epsilons', DEFAULT_EPSILONS), '.epsilons', minimum=0.0),
        outputs=outputs,
        seed=seed_value,
        dimension_cap=cap,
    )
    logger.debug(f"Parsed scenario '{config.name}' on {lattice.lattice_id}")
    return config


def load_config(path, seed=None):
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise ConfigError('.', f"cannot read {path}: {e}") from e
    return parse_config(text, seed=seed)
