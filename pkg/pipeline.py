"""
End-to-end pipeline: ingestion, horizons, correlations, filters,
validation, analysis, exports and the run manifest.
"""

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from analysis import build_horizon_report
from config import PipelineConfig, dump_config
from correlation import pearson_matrix, to_dissimilarity, write_matrix_csv
from errors import (
    AllMissing, DegenerateSeries, ExportError, HorizonError, InsufficientSamples, MissingData,
    NetworkAnalysisError,
)
from filtering import FilteredGraph, build_filtered_graph
from manifest import HorizonArtifacts, RunManifest, load_manifest, write_manifest
from market_data import (
    AdfResult, BarSeries, ReturnPanel, SectorTaxonomy, adf_test, build_panel, load_symbol_series,
    load_taxonomy, series_at_horizon,
)
from reporting import EXPORT_FORMATS, export_graph, report_tables
from validation import bootstrap_stability, shuffle_null

logger = logging.getLogger(__name__)

CONFIG_SNAPSHOT = 'config.yaml'
PANELS_DIR = 'panels'


def horizon_dir(horizon_s: int) -> str:
    return f"h{horizon_s}s"


def horizon_seeds(master_seed: int, horizon_s: int, count: int) -> List[int]:
    """Seeds for one horizon, independent of which other horizons run."""
    state = np.random.SeedSequence([master_seed, horizon_s]).generate_state(count)
    return [int(s) for s in state]


def load_base_series(cfg: PipelineConfig) -> Tuple[SectorTaxonomy, Dict[str, BarSeries]]:
    """Taxonomy plus the base-horizon bars of every symbol it lists."""
    taxonomy = load_taxonomy(cfg.taxonomy_path)
    series = {}
    for symbol in sorted(taxonomy.sectors):
        series[symbol] = load_symbol_series(cfg.data_dir, symbol, cfg.base_horizon_s)
    logger.info(f"Loaded {len(series)} symbols at {cfg.base_horizon_s}s from {cfg.data_dir}")
    return taxonomy, series


def horizon_panel(cfg: PipelineConfig, horizon_s: int, base: Dict[str, BarSeries],
                  taxonomy: SectorTaxonomy) -> Tuple[ReturnPanel, Dict[str, int]]:
    """Gap-free series at horizon_s aligned into a return panel."""
    series, filled = {}, {}
    for symbol, bars in base.items():
        try:
            series[symbol], filled[symbol] = series_at_horizon(bars, horizon_s, cfg.fill_before_resample)
        except AllMissing as e:
            raise MissingData(symbol, horizon_s, reason=str(e)) from e
    return build_panel(series, taxonomy, sorted(series)), filled


def stationarity(panel: ReturnPanel, lag_order: Optional[int] = None) -> Dict[str, AdfResult]:
    """ADF result per return series; failures are logged and skipped."""
    results = {}
    for row, symbol in enumerate(panel.symbols):
        try:
            result = adf_test(panel.returns[row], lag_order)
        except (InsufficientSamples, DegenerateSeries) as e:
            logger.warning(f"ADF skipped for {symbol} at {panel.horizon_s}s: {e}")
            continue
        if not result.reject_unit_root_5pct:
            logger.warning(f"ADF does not reject a unit root for {symbol} at {panel.horizon_s}s "
                           f"(stat {result.statistic:.3f}, 5% critical {result.critical_5pct:.3f})")
        results[symbol] = result
    return results


def _write_json(payload: Any, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2)


def run_horizon(cfg: PipelineConfig, horizon_s: int, base: Dict[str, BarSeries],
                taxonomy: SectorTaxonomy, artifacts: Optional[HorizonArtifacts] = None) -> HorizonArtifacts:
    """Run every stage for one horizon and write its files.

    Each file is recorded on artifacts as soon as it is written, so a caller
    holding artifacts sees everything written before a failure.
    """
    started = time.perf_counter()
    rel_dir = horizon_dir(horizon_s)
    os.makedirs(os.path.join(cfg.output_dir, rel_dir), exist_ok=True)
    if artifacts is None:
        artifacts = HorizonArtifacts(horizon_s)
    artifacts.complete = False

    def out(name: str) -> str:
        return os.path.join(rel_dir, name)

    def full(rel: str) -> str:
        return os.path.join(cfg.output_dir, rel)

    logger.info(f"Horizon {horizon_s}s started")
    panel, filled = horizon_panel(cfg, horizon_s, base, taxonomy)
    adf = stationarity(panel, cfg.adf_lag)

    corr = pearson_matrix(panel)
    dissim = to_dissimilarity(corr, cfg.dissimilarity_kind)
    write_matrix_csv(corr, full(out('correlation.csv')))
    artifacts.correlation = out('correlation.csv')
    write_matrix_csv(dissim, full(out('dissimilarity.csv')))
    artifacts.dissimilarity = out('dissimilarity.csv')

    seeds = horizon_seeds(cfg.master_seed, horizon_s, len(cfg.filters) + 1)
    graphs: Dict[str, FilteredGraph] = {}
    bootstraps = {}
    for kind, seed in zip(cfg.filters, seeds[1:]):
        graph = build_filtered_graph(kind, dissim, corr)
        graphs[kind.value] = graph
        rel = out(f"{kind.value.lower()}.json")
        _write_json(graph.to_dict(), full(rel))
        artifacts.graphs[kind.value] = rel
        artifacts.exports[kind.value] = {}
        for fmt in cfg.export_formats:
            rel = out(f"{kind.value.lower()}.{fmt}")
            export_graph(graph, taxonomy, fmt, full(rel), horizon_s)
            artifacts.exports[kind.value][fmt] = rel
        logger.info(f"Built {kind.value} at {horizon_s}s: {len(graph.edges)} edges")
        bootstraps[kind.value] = bootstrap_stability(
            panel, kind, cfg.bootstrap_replicas, seed, cfg.dissimilarity_kind,
            cfg.bootstrap_threshold, cfg.workers, empirical=graph)

    envelope = shuffle_null(panel, cfg.shuffle_count, seeds[0], cfg.retain_null_samples, cfg.workers)
    report = build_horizon_report(
        panel, corr, graphs, taxonomy, cfg.percentile_levels, cfg.table_percentiles,
        envelope=envelope, bootstraps=bootstraps, adf=adf, filled_slots=filled,
        histogram_bins=cfg.histogram_bins)
    _write_json(report.to_dict(), full(out('report.json')))
    artifacts.report = out('report.json')

    artifacts.seconds = time.perf_counter() - started
    artifacts.complete = True
    logger.info(f"Horizon {horizon_s}s finished in {artifacts.seconds:.1f}s")
    return artifacts


def _guarded_horizon(cfg: PipelineConfig, horizon_s: int, base: Dict[str, BarSeries],
                     taxonomy: SectorTaxonomy) -> HorizonArtifacts:
    artifacts = HorizonArtifacts(horizon_s, complete=False)
    try:
        return run_horizon(cfg, horizon_s, base, taxonomy, artifacts)
    except NetworkAnalysisError as e:
        logger.error(f"Horizon {horizon_s}s failed after writing {len(artifacts.files())} files: {e}")
        raise HorizonError(horizon_s, e, artifacts=artifacts) from e


def run_pipeline(cfg: PipelineConfig) -> RunManifest:
    """Run all configured horizons and write reports, tables and the manifest.

    Horizons run concurrently on cfg.workers threads. When any horizon
    fails the manifest is still written, marked incomplete, and the first
    error is re-raised. Files a failed horizon already wrote stay listed
    under that horizon, which is flagged incomplete.
    """
    started = time.perf_counter()
    os.makedirs(cfg.output_dir, exist_ok=True)
    manifest = RunManifest(cfg.output_dir, cfg.to_dict(), cfg.master_seed,
                           started_at=datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ'))
    dump_config(cfg, os.path.join(cfg.output_dir, CONFIG_SNAPSHOT))
    manifest.config_file = CONFIG_SNAPSHOT

    try:
        taxonomy, base = load_base_series(cfg)
    except NetworkAnalysisError as e:
        logger.error(f"Ingestion failed: {e}")
        manifest.errors.append(str(e))
        write_manifest(manifest)
        raise

    failures: List[HorizonError] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        futures = [executor.submit(_guarded_horizon, cfg, h, base, taxonomy) for h in cfg.horizons_s]
        for horizon_s, future in zip(cfg.horizons_s, futures):
            try:
                artifacts = future.result()
            except HorizonError as e:
                failures.append(e)
                manifest.errors.append(str(e))
                if e.artifacts is not None and e.artifacts.files():
                    manifest.horizons.append(e.artifacts)
                continue
            manifest.horizons.append(artifacts)
            manifest.timings[str(horizon_s)] = artifacts.seconds

    if failures:
        manifest.timings['total'] = time.perf_counter() - started
        write_manifest(manifest)
        raise failures[0]

    manifest.complete = True
    manifest.tables = report_tables(manifest)
    manifest.timings['total'] = time.perf_counter() - started
    write_manifest(manifest)
    return manifest


def ingest(cfg: PipelineConfig) -> List[str]:
    """Validate, resample and gap-fill the inputs, then write one return panel per horizon."""
    taxonomy, base = load_base_series(cfg)
    panel_dir = os.path.join(cfg.output_dir, PANELS_DIR)
    os.makedirs(panel_dir, exist_ok=True)
    written = []
    summary = {}
    for horizon_s in cfg.horizons_s:
        try:
            panel, filled = horizon_panel(cfg, horizon_s, base, taxonomy)
        except NetworkAnalysisError as e:
            logger.error(f"Ingestion failed at {horizon_s}s: {e}")
            raise HorizonError(horizon_s, e) from e
        path = os.path.join(panel_dir, f"returns_{horizon_s}s.csv")
        frame = panel.to_frame()
        frame.index.name = 'timestamp'
        frame.to_csv(path, float_format='%.17g', date_format='%Y-%m-%dT%H:%M:%SZ', lineterminator='\n')
        written.append(path)
        summary[str(horizon_s)] = {'t_len': panel.t_len, 'filled_slots': filled}
        logger.info(f"Panel at {horizon_s}s: {panel.n} symbols x {panel.t_len} returns")
    summary_path = os.path.join(panel_dir, 'ingest.json')
    _write_json(summary, summary_path)
    written.append(summary_path)
    return written


def reexport(manifest_path: str, formats: List[str], taxonomy_path: Optional[str] = None) -> List[str]:
    """Re-export the graphs of a finished run in the given formats."""
    unsupported = sorted(set(formats) - set(EXPORT_FORMATS))
    if unsupported or not formats:
        raise ExportError(f"Unsupported export formats {unsupported}, expected a subset of {list(EXPORT_FORMATS)}")
    manifest = load_manifest(manifest_path)
    taxonomy = load_taxonomy(taxonomy_path or manifest.config['taxonomy_path'])
    written = []
    for artifacts in manifest.horizons:
        for kind, rel in artifacts.graphs.items():
            with open(manifest.path(rel), 'r', encoding='utf-8') as f:
                graph = FilteredGraph.from_dict(json.load(f))
            for fmt in formats:
                target = os.path.join(horizon_dir(artifacts.horizon_s), f"{kind.lower()}.{fmt}")
                export_graph(graph, taxonomy, fmt, manifest.path(target), artifacts.horizon_s)
                artifacts.exports.setdefault(kind, {})[fmt] = target
                written.append(manifest.path(target))
    write_manifest(manifest)
    return written
