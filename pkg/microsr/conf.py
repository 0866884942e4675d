"""
Configuration layer.

GP hyperparameters resolve in this order, later sources winning: :py:class:`microsr.genetic.GPConfig` defaults, the
``MICROSR_GP`` Django setting, a flat ``key = value`` config file, and command-line overrides.
"""

import os

from dataclasses import fields, replace

from django.conf import settings

from .errors import ConfigurationError, StructuralError
from .exprtree import FunctionSet
from .genetic import GPConfig

__all__ = [
    'get_setting',
    'gp_config',
    'parse_config_file',
    'parse_overrides',
]

DEFAULTS = {
    'MICROSR_GP': {},
    'MICROSR_WORKERS': 1,
    'MICROSR_TOP_K': 10,
}


def get_setting(name):
    """Value of a MICROSR_* setting, falling back to the built-in default (also when Django isn't configured)."""

    if settings.configured:
        return getattr(settings, name, DEFAULTS[name])
    return DEFAULTS[name]


def _coerce(name, raw):
    field_type = {f.name: f.type for f in fields(GPConfig)}[name]
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if name == 'function_set':
            return FunctionSet.from_spec(text)
        if name == 'constant_range':
            low, high = (float(v) for v in text.split(','))
            return (low, high)
        if name == 'seed':
            return None if text.lower() in ('', 'none') else int(text)
        if field_type in (int, 'int'):
            return int(text)
        if field_type in (float, 'float'):
            return float(text)
    except (ValueError, StructuralError):
        raise ConfigurationError(f'invalid value for {name}: {raw!r}', key=name, value=raw)
    return text


def _apply(cfg, mapping, source):
    known = set(GPConfig.field_names())
    unknown = sorted(k for k in mapping if k not in known)
    if unknown:
        raise ConfigurationError(f'unknown configuration key(s) in {source}: {", ".join(unknown)}',
                                 keys=unknown, source=source)
    if not mapping:
        return cfg
    return replace(cfg, **{k: _coerce(k, v) for k, v in mapping.items()})


def parse_config_file(path):
    """
    Read a flat key-value file: one ``key = value`` per line; blank lines and ``#`` comments are ignored. Returns the
    raw string values keyed by name.
    """

    if not os.path.isfile(path):
        raise ConfigurationError(f'no such config file: {path}', path=str(path))
    mapping = {}
    with open(path, encoding='utf-8') as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigurationError(f'expected "key = value" on line {lineno} of {path}', line=lineno)
            key, value = (part.strip() for part in line.split('=', 1))
            if key in mapping:
                raise ConfigurationError(f'duplicate key {key} on line {lineno} of {path}', key=key, line=lineno)
            mapping[key] = value
    return mapping


def parse_overrides(pairs):
    """Turn ``['key=value', ...]`` command-line overrides into a mapping."""

    mapping = {}
    for pair in pairs or ():
        if '=' not in pair:
            raise ConfigurationError(f'override must look like key=value, got {pair!r}', override=pair)
        key, value = (part.strip() for part in pair.split('=', 1))
        mapping[key] = value
    return mapping


def gp_config(config_path=None, overrides=None):
    """Resolve a GPConfig from the settings, an optional config file and command-line overrides."""

    cfg = _apply(GPConfig(), dict(get_setting('MICROSR_GP')), 'settings.MICROSR_GP')
    if config_path:
        cfg = _apply(cfg, parse_config_file(config_path), str(config_path))
    return _apply(cfg, dict(overrides or {}), 'command line')
