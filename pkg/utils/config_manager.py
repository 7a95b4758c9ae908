import copy
import difflib
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import ruamel.yaml
from ruamel.yaml.error import YAMLError

from physics.errors import ParseError, ValidationError
from physics.geometry import (DetectorPlane, Mask, OpticalLayout, QuantumMirror, ThinLens, mirror_radius)
from physics.kinematics import CrystalMedium, speed_of_light

KINDS = ('phasematch', 'twm', 'mirror', 'diffract', 'ghost-image', 'ghost-diffract', 'direct-qm')
MONTE_CARLO_KINDS = ('ghost-image', 'ghost-diffract', 'direct-qm')
FORMATS = ('csv', 'json')

# None marks a value without default; nested dicts are sections.
SCHEMA = {
    'kind': None,
    'seed': None,
    'output_directory': 'outputs',
    'output_format': 'csv',
    'natural_units': False,
    'csv_precision': 9,
    'log_directory': None,
    'log_plot_frequency': 1,
    'workers': 1,
    'shards': 1,
    'progress': False,
    'checks': None,
    'source': {
        'pump_omega': None,
        'pump_wavelength': None,
        'signal_fraction': 0.5,
        'sigma_q': None,
        'sigma_theta': None,
        'pump_waist': None,
        'helicity': 1,
    },
    'medium': {
        'dispersion_file': None,
        'refractive_index': 1.0,
        'coupling': [0.0, 0.0],
        'thickness': 1.0e-3,
    },
    'sweep': {
        'signal_fraction': None,
        'g_abs': None,
        'g_phase': None,
        'delta_k': None,
        'L': None,
        'steps': 1024,
    },
    'slit': {
        'a': None,
        'd_sep': 0.0,
        'wavelength': None,
        'z2': None,
        'gamma': 1.0,
        'gamma_schedule': None,
        'controls': None,
        'scan': None,
        'n_sources': 10000,
    },
    'monte_carlo': {
        'trials': None,
        'efficiency_d1': 1.0,
        'efficiency_d2': 1.0,
        'background_rate': 0.0,
        'focus_step': 0.02,
        'focus_points': 0,
    },
    'object': {
        'z_s': None,
        'height': 1.0e-3,
        'max_angle': 1.0e-3,
        'beta_ps': 0.0,
        'image_scan': None,
        'coincidence_enabled': False,
    },
    'layout': [],
}

ELEMENT_SCHEMA = {
    'lens': {'position': None, 'focal_length': None},
    'mask': {'position': None, 'pitch': None, 'transmission': None, 'center': 0.0},
    'slit': {'position': None, 'a': None, 'd_sep': 0.0},
    'quantum_mirror': {'position': None, 'radius': None, 'pump_lens': {'focal_length': None, 'distance': None}},
    'detector': {'position': None, 'pitch': None, 'bins': 201, 'center': 0.0},
}


def _closest(key: str, options) -> Optional[str]:
    found = difflib.get_close_matches(str(key), [str(o) for o in options], n=1)
    return found[0] if found else None


def _fill(defaults: dict, given: Optional[dict], where: str) -> dict:
    """ Recursively fills defaults, rejecting keys the schema does not know. """
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ValidationError(where, f'{where} must be a mapping, got {type(given).__name__}')
    for key in given:
        if key not in defaults:
            name = f'{where}.{key}' if where else str(key)
            raise ValidationError(str(key), f'unknown key {name!r}', suggestion=_closest(key, defaults))
    filled = {}
    for key, default in defaults.items():
        name = f'{where}.{key}' if where else key
        if isinstance(default, dict):
            filled[key] = _fill(default, given.get(key), name)
        else:
            filled[key] = copy.deepcopy(given.get(key, default))
    return filled


def _fill_layout(elements) -> List[dict]:
    if elements is None:
        return []
    if not isinstance(elements, list):
        raise ValidationError('layout', 'layout must be a list of elements')
    filled = []
    for i, element in enumerate(elements):
        if not isinstance(element, dict) or len(element) != 1:
            raise ValidationError('layout', f'layout entry {i} must be a single-key mapping like "- lens: {{...}}"')
        (kind, params), = element.items()
        if kind not in ELEMENT_SCHEMA:
            raise ValidationError(str(kind), f'unknown layout element {kind!r}',
                                  suggestion=_closest(kind, ELEMENT_SCHEMA))
        params = _fill(ELEMENT_SCHEMA[kind], params, f'layout[{i}].{kind}')
        missing = [k for k, v in params.items() if v is None and k not in ('radius', 'pump_lens')]
        if missing:
            raise ValidationError(missing[0], f'layout element {kind!r} needs {missing[0]!r}')
        filled.append({kind: params})
    return filled


def _merge_overrides(config: dict, overrides: Optional[dict]) -> dict:
    merged = copy.deepcopy(config)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge_overrides(merged[key], value)
        else:
            merged[key] = value
    return merged


class ExperimentConfig:
    """ Validated experiment configuration with the builders the runner needs. """

    def __init__(self, config: dict, config_path: Union[str, Path] = None):
        self.config_path = Path(config_path) if config_path is not None else None
        self.yaml = ruamel.yaml.YAML(typ='safe')
        self.yaml.default_flow_style = None
        self.config = self._validate(config)

    # validation

    @staticmethod
    def _validate(raw: dict) -> dict:
        if not isinstance(raw, dict):
            raise ValidationError('config', 'top level of the config must be a mapping')
        layout = raw.get('layout')
        schema = {k: v for k, v in SCHEMA.items() if k != 'layout'}
        config = _fill(schema, {k: v for k, v in raw.items() if k != 'layout'}, '')
        config['layout'] = _fill_layout(layout)
        kind = config['kind']
        if kind not in KINDS:
            raise ValidationError('kind', f'kind must be one of {KINDS}, got {kind!r}', suggestion=_closest(kind, KINDS))
        if config['output_format'] not in FORMATS:
            raise ValidationError('output_format', f'output_format must be one of {FORMATS}')
        if not isinstance(config['log_plot_frequency'], int) or config['log_plot_frequency'] < 1:
            raise ValidationError('log_plot_frequency', 'log_plot_frequency must be a positive integer')
        if kind in MONTE_CARLO_KINDS:
            if config['seed'] is None:
                raise ValidationError('seed', f'{kind} is a Monte Carlo kind and needs a seed')
            if config['monte_carlo']['trials'] is None:
                raise ValidationError('trials', f'{kind} needs monte_carlo.trials')
        source = config['source']
        if kind != 'twm' and source['pump_omega'] is None and source['pump_wavelength'] is None \
                and not (kind == 'diffract' and config['slit']['wavelength'] is not None):
            raise ValidationError('pump_omega', f'{kind} needs source.pump_omega or source.pump_wavelength')
        if kind in ('ghost-image', 'ghost-diffract') and source['sigma_q'] is None and source['sigma_theta'] is None:
            raise ValidationError('sigma_q', f'{kind} needs source.sigma_q or source.sigma_theta')
        if kind in ('mirror', 'direct-qm', 'ghost-image', 'ghost-diffract'):
            if not any('quantum_mirror' in e for e in config['layout']):
                raise ValidationError('quantum_mirror', f'{kind} needs a quantum_mirror in the layout')
        if kind == 'mirror' and config['object']['z_s'] is None:
            raise ValidationError('z_s', 'mirror needs object.z_s')
        if kind == 'diffract':
            for key in ('a', 'z2', 'scan'):
                if config['slit'][key] is None:
                    raise ValidationError(key, f'diffract needs slit.{key}')
        return config

    # accessors

    @property
    def kind(self) -> str:
        return self.config['kind']

    @property
    def seed(self) -> Optional[int]:
        return self.config['seed']

    @property
    def c(self) -> float:
        return speed_of_light(self.config['natural_units'])

    @property
    def output_directory(self) -> Path:
        return Path(self.config['output_directory'])

    @property
    def output_format(self) -> str:
        return self.config['output_format']

    @property
    def pump_omega(self) -> float:
        source = self.config['source']
        if source['pump_omega'] is not None:
            return float(source['pump_omega'])
        if source['pump_wavelength'] is None:
            raise ValidationError('pump_omega', 'no pump frequency configured')
        return 2 * np.pi * self.c / float(source['pump_wavelength'])

    @property
    def omega_s(self) -> float:
        return self.pump_omega * float(self.config['source']['signal_fraction'])

    @property
    def omega_i(self) -> float:
        return self.pump_omega - self.omega_s

    def medium(self) -> CrystalMedium:
        section = self.config['medium']
        g = complex(*section['coupling'])
        if section['dispersion_file'] is not None:
            path = Path(section['dispersion_file'])
            if not path.is_absolute() and self.config_path is not None:
                path = self.config_path.parent / path
            return CrystalMedium.from_file(path, g=g, L=section['thickness'], c=self.c)
        return CrystalMedium.constant(n=section['refractive_index'], g=g, L=section['thickness'], c=self.c)

    def sigma_q(self) -> Optional[float]:
        """ Transverse-momentum spread, given directly or as an angular spread of the signal. """
        source = self.config['source']
        if source['sigma_q'] is not None:
            return float(source['sigma_q'])
        if source['sigma_theta'] is None:
            return None
        return float(source['sigma_theta']) * float(self.medium().wavenumber(self.omega_s))

    def build_layout(self) -> OpticalLayout:
        elements = []
        for entry in self.config['layout']:
            (kind, p), = entry.items()
            if kind == 'lens':
                elements.append(ThinLens(position=p['position'], focal_length=p['focal_length']))
            elif kind == 'mask':
                elements.append(Mask(position=p['position'], pitch=p['pitch'], transmission=p['transmission'],
                                     center=p['center']))
            elif kind == 'slit':
                elements.append(Mask.slits(position=p['position'], a=p['a'], d_sep=p['d_sep']))
            elif kind == 'quantum_mirror':
                elements.append(QuantumMirror(position=p['position'], pump_omega=self.pump_omega,
                                              radius=self._mirror_radius(p)))
            elif kind == 'detector':
                elements.append(DetectorPlane(position=p['position'], pitch=p['pitch'], bins=int(p['bins']),
                                              center=p['center']))
        return OpticalLayout(tuple(elements))

    @staticmethod
    def _mirror_radius(params: dict) -> float:
        pump_lens = params['pump_lens']
        if pump_lens['focal_length'] is not None and pump_lens['distance'] is not None:
            if params['radius'] is not None:
                raise ValidationError('radius', 'give either radius or pump_lens for a quantum_mirror, not both')
            return mirror_radius(pump_lens['focal_length'], pump_lens['distance'])
        if params['radius'] is None:
            return np.inf
        return float(params['radius'])

    # echo

    @staticmethod
    def _print_dict_values(values, key_name, level=0, tab_size=2):
        tab = level * tab_size * ' '
        print(tab + '-', key_name, ':', values)

    def _print_dictionary(self, dictionary, recursion_level=0):
        for key in dictionary.keys():
            if isinstance(dictionary[key], dict):
                self._print_dict_values('', key_name=key, level=recursion_level)
                self._print_dictionary(dictionary[key], recursion_level + 1)
            else:
                self._print_dict_values(dictionary[key], key_name=key, level=recursion_level)

    def print_config(self):
        print('\nCONFIGURATION', self.kind)
        self._print_dictionary(self.config)

    def dump_config(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as config_yaml:
            self.yaml.dump(self.config, config_yaml)
        return path


def load_config(path: Union[str, Path], overrides: Dict[str, Any] = None) -> ExperimentConfig:
    """ Reads one experiment YAML, applies CLI overrides, fills defaults and validates. """
    path = Path(path)
    yaml = ruamel.yaml.YAML(typ='safe')
    try:
        with open(path, 'rb') as config_yaml:
            raw = yaml.load(config_yaml)
    except FileNotFoundError as e:
        raise ParseError(f'config file not found: {path}') from e
    except YAMLError as e:
        raise ParseError(f'could not parse {path}: {e}') from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError(f'{path} does not hold a mapping at the top level')
    overrides = dict(overrides or {})
    if raw.get('kind') is not None and overrides.get('kind') is not None and raw['kind'] != overrides['kind']:
        raise ValidationError('kind', f"config {path} is for {raw['kind']!r}, not {overrides['kind']!r}")
    return ExperimentConfig(_merge_overrides(raw, overrides), config_path=path)
