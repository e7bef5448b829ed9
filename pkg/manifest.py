"""
Run manifest: the index of every file a pipeline run wrote.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from errors import IncompleteManifest

logger = logging.getLogger(__name__)

TOOL_VERSION = '1.0.0'
MANIFEST_FILE = 'manifest.json'


@dataclass
class HorizonArtifacts:
    """Files produced for one horizon, paths relative to the output directory.

    A horizon that failed part way keeps the files it wrote, with complete=False.
    """
    horizon_s: int
    report: Optional[str] = None
    correlation: Optional[str] = None
    dissimilarity: Optional[str] = None
    graphs: Dict[str, str] = field(default_factory=dict)
    exports: Dict[str, Dict[str, str]] = field(default_factory=dict)
    seconds: float = 0.0
    complete: bool = True

    def files(self) -> List[str]:
        paths = [p for p in (self.report, self.correlation, self.dissimilarity) if p]
        paths.extend(self.graphs.values())
        for by_format in self.exports.values():
            paths.extend(by_format.values())
        return paths

    def to_dict(self) -> Dict[str, Any]:
        return {
            'horizon_s': self.horizon_s,
            'report': self.report,
            'correlation': self.correlation,
            'dissimilarity': self.dissimilarity,
            'graphs': dict(self.graphs),
            'exports': {kind: dict(paths) for kind, paths in self.exports.items()},
            'seconds': self.seconds,
            'complete': self.complete,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HorizonArtifacts':
        return cls(
            horizon_s=int(data['horizon_s']),
            report=data.get('report'),
            correlation=data.get('correlation'),
            dissimilarity=data.get('dissimilarity'),
            graphs=dict(data.get('graphs') or {}),
            exports={k: dict(v) for k, v in (data.get('exports') or {}).items()},
            seconds=float(data.get('seconds', 0.0)),
            complete=bool(data.get('complete', True)),
        )


@dataclass
class RunManifest:
    output_dir: str
    config: Dict[str, Any]
    seed: int
    tool_version: str = TOOL_VERSION
    horizons: List[HorizonArtifacts] = field(default_factory=list)
    tables: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    started_at: str = ''
    config_file: Optional[str] = None
    complete: bool = False
    errors: List[str] = field(default_factory=list)

    def path(self, relative: str) -> str:
        return os.path.join(self.output_dir, relative)

    def files(self) -> List[str]:
        paths = [self.config_file] if self.config_file else []
        for artifacts in self.horizons:
            paths.extend(artifacts.files())
        paths.extend(self.tables)
        return paths

    def missing_files(self) -> List[str]:
        return [p for p in self.files() if not os.path.exists(self.path(p))]

    def require_complete(self) -> None:
        if not self.complete:
            raise IncompleteManifest(f"Run in {self.output_dir} did not finish: {'; '.join(self.errors) or 'no reason'}")
        if not self.config.get('filters'):
            raise IncompleteManifest('Run was configured without filters')
        if not self.horizons or any(a.report is None or not a.complete for a in self.horizons):
            raise IncompleteManifest('Manifest lacks horizon reports')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'tool_version': self.tool_version,
            'seed': self.seed,
            'started_at': self.started_at,
            'config_file': self.config_file,
            'complete': self.complete,
            'errors': list(self.errors),
            'config': self.config,
            'horizons': [a.to_dict() for a in self.horizons],
            'tables': list(self.tables),
            'timings': dict(self.timings),
        }


def write_manifest(manifest: RunManifest) -> str:
    """Write manifest.json after checking every listed file exists."""
    missing = manifest.missing_files()
    if missing:
        raise IncompleteManifest(f"Manifest references missing files: {missing}")
    path = manifest.path(MANIFEST_FILE)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest.to_dict(), f, indent=2)
    logger.info(f"Manifest written to {path}")
    return path


def load_manifest(path: str) -> RunManifest:
    """Read a manifest.json file or the directory containing one."""
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_FILE)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IncompleteManifest(f"Cannot read manifest {path}: {e}") from e
    return RunManifest(
        output_dir=os.path.dirname(os.path.abspath(path)),
        config=data.get('config', {}),
        seed=int(data.get('seed', 0)),
        tool_version=data.get('tool_version', TOOL_VERSION),
        horizons=[HorizonArtifacts.from_dict(h) for h in data.get('horizons', [])],
        tables=list(data.get('tables', [])),
        timings=dict(data.get('timings', {})),
        started_at=data.get('started_at', ''),
        config_file=data.get('config_file'),
        complete=bool(data.get('complete', False)),
        errors=list(data.get('errors', [])),
    )
