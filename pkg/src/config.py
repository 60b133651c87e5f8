"""
Run configuration: dataclass defaults, overridden by a flat KEY=value file
(read with python-dotenv, never through os.environ), overridden by CLI flags.
"""
import os
import typing
import logging
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Optional, Tuple

from dotenv import dotenv_values

from corpus import DEFAULT_STOPWORDS_PATH, MAX_SOURCE_TOKENS
from vocab import DEFAULT_MAX_SIZE
from model import ModelConfig
from train import TrainConfig
from decode import DecodeConfig

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
TRUE_VALUES = ('true', '1', 'yes', 'on')
FALSE_VALUES = ('false', '0', 'no', 'off')


class ConfigError(ValueError):
    """Invalid configuration key or value"""

    def __init__(self, key: str, value: Any, reason: str):
        self.key = key
        self.value = value
        super().__init__(f"{key}={value!r}: {reason}")


@dataclass
class PathConfig:
    dataset: Optional[str] = None
    vocab: Optional[str] = None
    checkpoint: Optional[str] = None
    checkpoint_dir: str = 'checkpoints'
    keyphrase_file: Optional[str] = None
    ranking_file: Optional[str] = None
    stopwords: str = DEFAULT_STOPWORDS_PATH

    def validate(self):
        return self


@dataclass
class GeneralConfig:
    log_level: str = 'INFO'
    ignore_keyphrase_scores: bool = False
    keyphrase_top_k: Optional[int] = None
    max_vocab_size: int = DEFAULT_MAX_SIZE
    budget: int = MAX_SOURCE_TOKENS

    def validate(self):
        if self.log_level.upper() not in LOG_LEVELS:
            raise ConfigError('log_level', self.log_level, f"must be one of {', '.join(LOG_LEVELS)}")
        self.log_level = self.log_level.upper()
        if self.keyphrase_top_k is not None and self.keyphrase_top_k <= 0:
            raise ConfigError('keyphrase_top_k', self.keyphrase_top_k, "must be positive")
        if self.max_vocab_size <= 0:
            raise ConfigError('max_vocab_size', self.max_vocab_size, "must be positive")
        if self.max_vocab_size > DEFAULT_MAX_SIZE:
            raise ConfigError('max_vocab_size', self.max_vocab_size, f"must be at most {DEFAULT_MAX_SIZE}")
        if not 0 < self.budget <= MAX_SOURCE_TOKENS:
            raise ConfigError('budget', self.budget, f"must lie in 1..{MAX_SOURCE_TOKENS}")
        return self


SECTIONS = ('model', 'train', 'decode', 'paths', 'general')


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    paths: PathConfig = field(default_factory=PathConfig)
    general: GeneralConfig = field(default_factory=GeneralConfig)

    def validate(self) -> 'RunConfig':
        for section in SECTIONS:
            try:
                getattr(self, section).validate()
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(section, '', str(e))
        return self

    def as_dict(self) -> Dict[str, Any]:
        values = {}
        for section in SECTIONS:
            obj = getattr(self, section)
            for f in fields(obj):
                values[f.name] = getattr(obj, f.name)
        return values


def config_keys() -> Dict[str, Tuple[str, Any]]:
    """key -> (section, declared type)"""
    keys = {}
    defaults = RunConfig()
    for section in SECTIONS:
        hints = typing.get_type_hints(type(getattr(defaults, section)))
        for f in fields(getattr(defaults, section)):
            keys[f.name] = (section, hints[f.name])
    return keys


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in TRUE_VALUES:
        return True
    if text in FALSE_VALUES:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def coerce(key: str, value: Any, declared: Any) -> Any:
    optional = typing.get_origin(declared) is typing.Union and type(None) in typing.get_args(declared)
    if optional:
        declared = next(t for t in typing.get_args(declared) if t is not type(None))
        if value is None or str(value).strip().lower() in ('', 'none'):
            return None
    try:
        if declared is bool:
            return parse_bool(value)
        if declared is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if declared is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, value, f"expected {declared.__name__} ({e})")


def load_config_file(path: str) -> Dict[str, str]:
    """Flat KEY=value file; keys are case-insensitive"""
    if not os.path.exists(path):
        raise ConfigError('config', path, "config file does not exist")
    known = config_keys()
    values = {}
    for raw_key, value in dotenv_values(path).items():
        key = raw_key.strip().lower()
        if key not in known:
            raise ConfigError(key, value, f"unknown configuration key in {path}")
        values[key] = value
    logger.debug(f"Read {len(values)} settings from {path}")
    return values


def resolve_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults < config file < overrides (None-valued overrides are ignored)"""
    known = config_keys()
    layered: Dict[str, Any] = {}
    if config_path:
        layered.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(key, value, "unknown configuration key")
        layered[key] = value

    config = RunConfig()
    for key, value in layered.items():
        section, declared = known[key]
        setattr(getattr(config, section), key, coerce(key, value, declared))

    # A lone w1 implies its complement
    if 'w1' in layered and 'w2' not in layered:
        config.model.w2 = round(1.0 - config.model.w1, 12)

    return config.validate()


def format_config(config: RunConfig) -> str:
    return '\n'.join(f"{key} = {value}" for key, value in sorted(config.as_dict().items()))


def add_config_arguments(parser, keys=None):
    """One --kebab-case flag per configuration key, all defaulting to None"""
    known = config_keys()
    for key in (keys or sorted(known)):
        _, declared = known[key]
        flag = '--' + key.replace('_', '-')
        if declared is bool:
            parser.add_argument(flag, dest=key, type=parse_bool, nargs='?', const=True, default=None,
                                metavar='BOOL')
        else:
            parser.add_argument(flag, dest=key, default=None, metavar=key.upper())


def overrides_from_args(args) -> Dict[str, Any]:
    return {key: getattr(args, key) for key in config_keys() if hasattr(args, key)}
