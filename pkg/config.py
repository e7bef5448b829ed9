# Configuration settings for the correlation network pipeline

import os
import logging
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Optional

import yaml

from correlation import DissimilarityKind
from errors import ConfigError
from filtering import FilterKind

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = 'NETFILTER_OUTPUT_DIR'
ENV_MASTER_SEED = 'NETFILTER_MASTER_SEED'
ENV_PROFILE = 'NETFILTER_ENV'


class Config:
    """Base configuration class with the defaults used by every profile."""
    # Data layout
    DATA_DIR = 'data'
    TAXONOMY_PATH = 'data/taxonomy.csv'
    OUTPUT_DIR = 'output'

    # Time horizons in seconds
    BASE_HORIZON_S = 15
    HORIZONS_S = [15, 60, 900, 3600, 14400, 86400]
    FILL_BEFORE_RESAMPLE = True
    ADF_LAG = None  # None selects the Schwert rule

    # Filtering
    DISSIMILARITY_KIND = 'power'
    FILTERS = ['MST', 'TMFG']

    # Validation
    BOOTSTRAP_REPLICAS = 1000
    SHUFFLE_COUNT = 100
    BOOTSTRAP_THRESHOLD = 0.95
    RETAIN_NULL_SAMPLES = True

    # Summaries
    PERCENTILE_LEVELS = [10.0, 50.0, 90.0]
    TABLE_PERCENTILES = [25.0, 75.0]
    HISTOGRAM_BINS = 40

    # Runtime
    MASTER_SEED = 42
    WORKERS = 4
    EXPORT_FORMATS = ['graphml', 'dot']
    LOG_LEVEL = 'INFO'


class DevelopmentConfig(Config):
    """Development profile: verbose logging, reduced validation effort."""
    LOG_LEVEL = 'DEBUG'
    BOOTSTRAP_REPLICAS = 200
    SHUFFLE_COUNT = 20


class TestingConfig(Config):
    """Testing profile: tiny replica counts and serial execution."""
    BOOTSTRAP_REPLICAS = 20
    SHUFFLE_COUNT = 10
    WORKERS = 1
    HISTOGRAM_BINS = 10
    LOG_LEVEL = 'WARNING'


# Configuration dictionary
config = {
    'production': Config,
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'default': Config
}


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for one pipeline run."""
    data_dir: str
    taxonomy_path: str
    output_dir: str
    base_horizon_s: int
    horizons_s: List[int]
    dissimilarity_kind: DissimilarityKind
    filters: List[FilterKind]
    bootstrap_replicas: int
    shuffle_count: int
    bootstrap_threshold: float
    percentile_levels: List[float]
    table_percentiles: List[float]
    master_seed: int
    workers: int = 1
    fill_before_resample: bool = True
    adf_lag: Optional[int] = None
    retain_null_samples: bool = True
    histogram_bins: int = 40
    export_formats: List[str] = field(default_factory=lambda: ['graphml', 'dot'])
    log_level: str = 'INFO'

    @classmethod
    def from_profile(cls, profile: str = 'default') -> 'PipelineConfig':
        """Build a config from one of the profile classes."""
        if profile not in config:
            raise ConfigError(f"Unknown profile '{profile}', expected one of {sorted(config)}")
        base = config[profile]
        raw = {
            'data_dir': base.DATA_DIR,
            'taxonomy_path': base.TAXONOMY_PATH,
            'output_dir': base.OUTPUT_DIR,
            'base_horizon_s': base.BASE_HORIZON_S,
            'horizons_s': list(base.HORIZONS_S),
            'dissimilarity_kind': base.DISSIMILARITY_KIND,
            'filters': list(base.FILTERS),
            'bootstrap_replicas': base.BOOTSTRAP_REPLICAS,
            'shuffle_count': base.SHUFFLE_COUNT,
            'bootstrap_threshold': base.BOOTSTRAP_THRESHOLD,
            'percentile_levels': list(base.PERCENTILE_LEVELS),
            'table_percentiles': list(base.TABLE_PERCENTILES),
            'master_seed': base.MASTER_SEED,
            'workers': base.WORKERS,
            'fill_before_resample': base.FILL_BEFORE_RESAMPLE,
            'adf_lag': base.ADF_LAG,
            'retain_null_samples': base.RETAIN_NULL_SAMPLES,
            'histogram_bins': base.HISTOGRAM_BINS,
            'export_formats': list(base.EXPORT_FORMATS),
            'log_level': base.LOG_LEVEL,
        }
        return _coerce(raw)

    def with_overrides(self, **overrides: Any) -> 'PipelineConfig':
        """Return a validated copy with some keys replaced."""
        merged = self.to_dict()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return _coerce(merged)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['dissimilarity_kind'] = self.dissimilarity_kind.value
        data['filters'] = [kind.value for kind in self.filters]
        return data


def _coerce(raw: Dict[str, Any]) -> PipelineConfig:
    """Convert loose values into a PipelineConfig and enforce its invariants."""
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

    try:
        values = dict(raw)
        values['base_horizon_s'] = int(values['base_horizon_s'])
        values['horizons_s'] = sorted({int(h) for h in _as_list(values['horizons_s'])})
        values['dissimilarity_kind'] = DissimilarityKind.parse(values['dissimilarity_kind'])
        values['filters'] = sorted({FilterKind.parse(f) for f in _as_list(values['filters'])},
                                   key=lambda kind: kind.order)
        values['bootstrap_replicas'] = int(values['bootstrap_replicas'])
        values['shuffle_count'] = int(values['shuffle_count'])
        values['bootstrap_threshold'] = float(values['bootstrap_threshold'])
        values['percentile_levels'] = [float(p) for p in _as_list(values['percentile_levels'])]
        values['table_percentiles'] = [float(p) for p in _as_list(values['table_percentiles'])]
        values['master_seed'] = int(values['master_seed'])
        values['workers'] = int(values.get('workers', 1))
        values['histogram_bins'] = int(values.get('histogram_bins', 40))
        if values.get('adf_lag') is not None:
            values['adf_lag'] = int(values['adf_lag'])
        values['export_formats'] = [str(f).lower() for f in _as_list(values.get('export_formats', ['graphml', 'dot']))]
        values['data_dir'] = str(values['data_dir'])
        values['taxonomy_path'] = str(values['taxonomy_path'])
        values['output_dir'] = str(values['output_dir'])
    except KeyError as e:
        raise ConfigError(f"Missing config key: {e}") from e
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid config value: {e}") from e

    cfg = PipelineConfig(**values)
    validate(cfg)
    return cfg


def _as_list(value: Any) -> List[Any]:
    if isinstance(value, str):
        return [part.strip() for part in value.split(',') if part.strip()]
    if isinstance(value, (list, tuple, set)):
        return list(value)
    return [value]


def validate(cfg: PipelineConfig) -> None:
    """Check the cross-field invariants of a pipeline config."""
    if cfg.base_horizon_s <= 0:
        raise ConfigError('base_horizon_s must be positive')
    if not cfg.horizons_s:
        raise ConfigError('horizons_s must not be empty')
    bad = [h for h in cfg.horizons_s if h <= 0 or h % cfg.base_horizon_s != 0]
    if bad:
        raise ConfigError(f"Horizons {bad} are not positive multiples of base horizon {cfg.base_horizon_s}s")
    if not cfg.filters:
        raise ConfigError('filters must name at least one of MST, PMFG, TMFG')
    if cfg.bootstrap_replicas < 1 or cfg.shuffle_count < 1:
        raise ConfigError('bootstrap_replicas and shuffle_count must be at least 1')
    if not 0.0 < cfg.bootstrap_threshold <= 1.0:
        raise ConfigError('bootstrap_threshold must lie in (0, 1]')
    for level in list(cfg.percentile_levels) + list(cfg.table_percentiles):
        if not 0.0 < level < 100.0:
            raise ConfigError(f"Percentile level {level} outside (0, 100)")
    if cfg.workers < 1:
        raise ConfigError('workers must be at least 1')
    unsupported = set(cfg.export_formats) - {'graphml', 'dot'}
    if unsupported:
        raise ConfigError(f"Unsupported export formats: {sorted(unsupported)}")
    if not isinstance(logging.getLevelName(cfg.log_level.upper()), int):
        raise ConfigError(f"Unknown log level {cfg.log_level}")


def load_config(path: Optional[str] = None, **overrides: Any) -> PipelineConfig:
    """Load a flat YAML config file on top of the active profile.

    Args:
        path: YAML file with keys named like PipelineConfig fields, or None
        overrides: values taken from the command line; None entries are ignored

    Returns:
        PipelineConfig: validated configuration
    """
    profile = os.environ.get(ENV_PROFILE, 'default')
    base = PipelineConfig.from_profile(profile).to_dict()

    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                loaded = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"Config file {path} must hold a flat mapping")
        nested = [k for k, v in loaded.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"Config keys must be flat, got nested sections: {nested}")
        base.update(loaded)

    # Environment overrides output_dir and master_seed only
    if os.environ.get(ENV_OUTPUT_DIR):
        base['output_dir'] = os.environ[ENV_OUTPUT_DIR]
    if os.environ.get(ENV_MASTER_SEED):
        base['master_seed'] = os.environ[ENV_MASTER_SEED]

    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = _coerce(base)
    logger.debug(f"Loaded config (profile={profile}): {cfg.to_dict()}")
    return cfg


def dump_config(cfg: PipelineConfig, path: str) -> None:
    """Write a config snapshot that load_config can read back."""
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=True)
