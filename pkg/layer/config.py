"""
Run configuration files.

    [run]
    mode = pole
    l = 2

    [params]
    alpha = 0
    beta = 0.5

Each section is validated by its serializer in ``layer.serializer``; the
result is a frozen ``RunConfig`` with every default filled in.
"""
import dataclasses
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from rest_framework import serializers

from layer.exceptions import ConfigError, GeometryError, ThresholdCollisionError
from layer.geometry import surface_from_spec
from layer.serializer import (
    NumericsSerializer, OutputSerializer, ParamsSerializer, RunSerializer, SurfaceSerializer,
)
from layer.specfun import SpectralParams

logger = logging.getLogger(__name__)

SECTION_SERIALIZERS = {
    'run': RunSerializer,
    'params': ParamsSerializer,
    'surface': SurfaceSerializer,
    'numerics': NumericsSerializer,
    'output': OutputSerializer,
}
SECTION = re.compile(r'^\[\s*(?P<name>[^\]]+?)\s*\]$')
COMMENT_CHARS = ('#', ';')


class ConfigDocument:
    """Raw sections of a config file, remembering where every key came from."""

    def __init__(self):
        self.sections = {}
        self.section_lines = {}
        self.key_lines = {}

    def line_of(self, section, key=None):
        if key is not None and (section, key) in self.key_lines:
            return self.key_lines[(section, key)]
        return self.section_lines.get(section)

    @classmethod
    def parse(cls, text):
        document = cls()
        current = None
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith(COMMENT_CHARS):
                continue
            match = SECTION.match(line)
            if match:
                current = match.group('name').lower()
                if current not in SECTION_SERIALIZERS:
                    raise ConfigError(f'unknown section [{current}]', key=current, line=number)
                if current in document.sections:
                    raise ConfigError(f'section [{current}] appears twice', key=current, line=number)
                document.sections[current] = {}
                document.section_lines[current] = number
                continue
            if '=' not in line:
                raise ConfigError(f'expected "key = value", got {line!r}', line=number)
            key, value = (part.strip() for part in line.split('=', 1))
            key = key.lower()
            if not key:
                raise ConfigError('missing key before "="', line=number)
            if current is None:
                raise ConfigError(f'key {key!r} appears before any [section]', key=key, line=number)
            if key in document.sections[current]:
                raise ConfigError(f'duplicate key {key!r}', key=key, line=number)
            document.sections[current][key] = value
            document.key_lines[(current, key)] = number
        return document


@dataclass(frozen=True)
class SurfaceConfig:
    family: str
    options: dict = field(default_factory=dict)
    delta: float = 1.0
    deltas: Optional[tuple] = None
    seed_from_previous: bool = False

    def build(self):
        return surface_from_spec(self.family, **self.options)

    def as_dict(self):
        out = {'family': self.family}
        out.update({key: list(value) if isinstance(value, tuple) else value for key, value in self.options.items()})
        out.update({
            'delta': self.delta,
            'deltas': list(self.deltas) if self.deltas else None,
            'seed_from_previous': self.seed_from_previous,
        })
        return out


@dataclass(frozen=True)
class NumericsConfig:
    quad_order: int
    tail_tol: float
    root_tol: float
    threads: int
    n_max: Optional[int] = None
    neumann_terms: int = 1
    bilinear_closed_form: bool = False


@dataclass(frozen=True)
class OutputConfig:
    path: str = 'layer.csv'
    format: str = 'csv'
    emit_plot_script: bool = False

    @property
    def plot_script_path(self):
        return f'{self.path}.gp'


@dataclass(frozen=True)
class RunConfig:
    mode: str
    params: Optional[SpectralParams]
    surface: Optional[SurfaceConfig]
    numerics: NumericsConfig
    output: OutputConfig
    l: Optional[int] = None
    n_range: int = 10
    seed: Optional[complex] = None

    def as_dict(self):
        return {
            'run': {
                'mode': self.mode,
                'l': self.l,
                'n_range': self.n_range,
                'seed': None if self.seed is None else [self.seed.real, self.seed.imag],
            },
            'params': None if self.params is None else {
                'alpha': self.params.alpha,
                'beta': self.params.beta,
                'xi_alpha': self.params.xi_alpha,
            },
            'surface': None if self.surface is None else self.surface.as_dict(),
            'numerics': dataclasses.asdict(self.numerics),
            'output': dataclasses.asdict(self.output),
        }

    def with_overrides(self, threads=None, quad_order=None, seed=None, output=None):
        """Apply command-line overrides on top of the file."""
        numerics = self.numerics
        if threads is not None:
            numerics = dataclasses.replace(numerics, threads=threads)
        if quad_order is not None:
            numerics = dataclasses.replace(numerics, quad_order=quad_order)
        config = dataclasses.replace(self, numerics=numerics)
        if seed is not None:
            config = dataclasses.replace(config, seed=complex(seed))
        if output is not None:
            config = dataclasses.replace(config, output=dataclasses.replace(self.output, path=str(output)))
        return config


def _validated(document, section, required=True):
    if section not in document.sections:
        if required:
            raise ConfigError(f'missing section [{section}]', key=section)
        data = {}
    else:
        data = document.sections[section]
    serializer = SECTION_SERIALIZERS[section](data=data)
    try:
        serializer.is_valid(raise_exception=True)
    except serializers.ValidationError as exc:
        key, messages = next(iter(exc.detail.items()))
        if key == 'non_field_errors':
            key = None
        message = ' '.join(str(m) for m in messages) if isinstance(messages, list) else str(messages)
        label = f'[{section}] {key}' if key else f'[{section}]'
        raise ConfigError(f'{label}: {message}', key=key, line=document.line_of(section, key)) from exc
    return serializer.validated_data


def _surface_config(document, data):
    options = {key: value for key, value in data.items() if key not in ('family', 'delta', 'deltas',
                                                                          'seed_from_previous')}
    surface = SurfaceConfig(
        family=data['family'],
        options=options,
        delta=data['delta'],
        deltas=data.get('deltas'),
        seed_from_previous=data['seed_from_previous'],
    )
    try:
        surface.build()
    except (GeometryError, OSError) as exc:
        raise ConfigError(f'[surface] {exc}', key='family', line=document.line_of('surface', 'family')) from exc
    return surface


def parse_config(text):
    """Parse and fully validate a run configuration."""
    document = ConfigDocument.parse(text)
    run = _validated(document, 'run')
    mode = run['mode']
    needs_surface = mode in ('pole', 'sweep')

    params = None
    if mode != 'validate':
        values = _validated(document, 'params')
        params = SpectralParams(values['alpha'], values['beta'])

    surface = None
    if needs_surface:
        surface = _surface_config(document, _validated(document, 'surface'))
    elif 'surface' in document.sections:
        logger.warning('mode %s ignores the [surface] section', mode)

    numerics = NumericsConfig(**_validated(document, 'numerics', required=False))
    output = OutputConfig(**_validated(document, 'output', required=False))

    if needs_surface:
        try:
            window = params.window(run['l'])
        except ThresholdCollisionError as exc:
            raise ConfigError(str(exc), key='l', line=document.line_of('run', 'l')) from exc
        if window is None:
            raise ConfigError(f"epsilon_{run['l']} = {params.epsilon(run['l']):.6g} is a discrete eigenvalue, "
                              'not an embedded one', key='l', line=document.line_of('run', 'l'))

    seed = complex(run['seed_re'], run['seed_im']) if 'seed_re' in run else None
    return RunConfig(
        mode=mode, params=params, surface=surface, numerics=numerics, output=output,
        l=run.get('l'), n_range=run['n_range'], seed=seed,
    )


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f'cannot read {path}: {exc.strerror}') from exc
    return parse_config(text)
