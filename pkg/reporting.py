"""
Graph exports and report tables.

Graphs are written as GraphML (networkx) or DOT (Jinja2 template) with
sector, colour and hub attributes on nodes and sign styling on edges.
Tables and figure series are read back from the per-horizon report files
listed in a run manifest.
"""

import json
import logging
import os
import re
from typing import Any, Dict, List, Optional, Set, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader

from errors import ExportError, IncompleteManifest, UnsupportedFormat
from filtering import FilteredGraph
from manifest import RunManifest
from market_data import OTHER_SECTOR, SectorTaxonomy

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'templates')
DOT_TEMPLATE = 'graph.dot.j2'
EXPORT_FORMATS = ('graphml', 'dot')
HUB_PERCENTILE = 90.0
TABLES_DIR = 'tables'

SECTOR_COLORS = {
    'currencies': 'red',
    'smart contract platforms': 'green',
    'stablecoins': 'blue',
    'centralized exchanges': 'pink',
    'scaling': 'orange',
    'decentralized exchanges': 'turquoise',
    'lending': 'fuchsia',
    OTHER_SECTOR: 'yellow',
}
NEGATIVE_EDGE = {'style': 'dashed', 'color': 'red'}
POSITIVE_EDGE = {'style': 'solid', 'color': 'black'}

_DOT_EDGE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)"\s*--\s*"((?:[^"\\]|\\.)*)"')


def _dot_escape(value: Any) -> str:
    return str(value).replace('\\', '\\\\').replace('"', '\\"')


def _dot_unescape(value: str) -> str:
    return re.sub(r'\\(.)', r'\1', value)


def _environment() -> Environment:
    env = Environment(loader=FileSystemLoader(TEMPLATE_DIR), autoescape=False,
                      trim_blocks=True, lstrip_blocks=True, keep_trailing_newline=True)
    env.filters['dot_escape'] = _dot_escape
    env.filters['real'] = lambda x: repr(float(x))
    return env


def sector_color(sector: str) -> str:
    key = sector.lower().replace('_', ' ').replace('-', ' ').strip()
    return SECTOR_COLORS.get(key, SECTOR_COLORS[OTHER_SECTOR])


def hub_symbols(graph: FilteredGraph) -> Set[str]:
    """Nodes whose degree lies strictly above the 90th percentile."""
    degrees = graph.degrees()
    if not degrees:
        return set()
    cut = np.percentile(list(degrees.values()), HUB_PERCENTILE, method='linear')
    return {symbol for symbol, degree in degrees.items() if degree > cut}


def graph_attributes(graph: FilteredGraph, taxonomy: SectorTaxonomy) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
    """Node and edge attribute records shared by both export formats."""
    degrees = graph.degrees()
    hubs = hub_symbols(graph)
    nodes = []
    for symbol in graph.symbols:
        sector = taxonomy.sector_of(symbol, graph.symbols)
        nodes.append({'symbol': symbol, 'sector': sector, 'color': sector_color(sector),
                      'degree': degrees[symbol], 'hub': symbol in hubs})
    edges = []
    for e in graph.edges:
        styling = NEGATIVE_EDGE if e.negative else POSITIVE_EDGE
        edges.append({'source': graph.symbols[e.i], 'target': graph.symbols[e.j],
                      'correlation': e.correlation, 'dissimilarity': e.dissimilarity,
                      'negative': e.negative, **styling})
    return nodes, edges


def export_graph(graph: FilteredGraph, taxonomy: SectorTaxonomy, fmt: str, path: str,
                 horizon_s: Optional[int] = None) -> str:
    """Write a filtered graph as GraphML or DOT.

    Args:
        graph: filtered network to write
        taxonomy: sector labels for the nodes
        fmt: 'graphml' or 'dot'
        path: target file
        horizon_s: recorded as a graph attribute when given

    Returns:
        str: the written path
    """
    fmt = fmt.lower()
    if fmt not in EXPORT_FORMATS:
        raise UnsupportedFormat(f"Unsupported export format '{fmt}', expected one of {EXPORT_FORMATS}")
    nodes, edges = graph_attributes(graph, taxonomy)
    try:
        if fmt == 'graphml':
            g = nx.Graph(kind=graph.kind.value, horizon=str(horizon_s or ''))
            for node in nodes:
                g.add_node(node['symbol'], **node)
            for edge in edges:
                attrs = {k: v for k, v in edge.items() if k not in ('source', 'target')}
                g.add_edge(edge['source'], edge['target'], **attrs)
            nx.write_graphml(g, path)
        else:
            template = _environment().get_template(DOT_TEMPLATE)
            text = template.render(kind=graph.kind.value, horizon=horizon_s or '', nodes=nodes, edges=edges)
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text)
    except OSError as e:
        logger.error(f"Failed to export {graph.kind.value} graph to {path}: {e}")
        raise ExportError(f"Cannot write {path}: {e}") from e
    logger.debug(f"Exported {graph.kind.value} graph ({len(edges)} edges) to {path}")
    return path


def read_dot_edges(path: str) -> Set[Tuple[str, str]]:
    """Undirected edge set of a DOT file written by export_graph."""
    edges = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            match = _DOT_EDGE.match(line)
            if match:
                a, b = _dot_unescape(match.group(1)), _dot_unescape(match.group(2))
                edges.add(tuple(sorted((a, b))))
    return edges


def _load_reports(manifest: RunManifest) -> List[Dict[str, Any]]:
    reports = []
    for artifacts in sorted(manifest.horizons, key=lambda a: a.horizon_s):
        path = manifest.path(artifacts.report)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                reports.append(json.load(f))
        except (OSError, json.JSONDecodeError) as e:
            raise IncompleteManifest(f"Cannot read horizon report {path}: {e}") from e
    return reports


def _structures(manifest: RunManifest) -> List[str]:
    return ['C'] + list(manifest.config['filters'])


def _level_key(level: float) -> str:
    return f"{float(level):g}"


def _structure_summary(report: Dict[str, Any], structure: str) -> Tuple[Dict[str, Any], Optional[Dict[str, Any]]]:
    if structure == 'C':
        return report['pairwise_abs'], report.get('significance')
    stats = report['graphs'][structure]
    return stats['filtered_correlation'], stats.get('significance')


def table_abs_correlation(manifest: RunManifest, reports: List[Dict[str, Any]]) -> pd.DataFrame:
    """Horizon rows; mean |rho| with stars and |rho| percentiles per structure."""
    levels = [_level_key(p) for p in manifest.config['table_percentiles']]
    rows = []
    for report in reports:
        row: Dict[str, Any] = {'dt': report['horizon_s']}
        for structure in _structures(manifest):
            summary, significance = _structure_summary(report, structure)
            stars = significance['stars'] if significance else ''
            row[f"{structure} <|rho|>"] = f"{summary['mean_abs']:.2f}{stars}"
            for level in levels:
                row[f"{structure} {level}%"] = round(summary['percentiles'][level], 2)
        rows.append(row)
    return pd.DataFrame(rows)


def table_bootstrap_support(manifest: RunManifest, reports: List[Dict[str, Any]]) -> pd.DataFrame:
    """Horizon rows; percentage of edges with support above the threshold."""
    rows = []
    for report in reports:
        row: Dict[str, Any] = {'dt': report['horizon_s']}
        for kind in manifest.config['filters']:
            bootstrap = report['graphs'][kind].get('bootstrap')
            row[f"{kind} %"] = round(100.0 * bootstrap['frac_edges_above_threshold'], 1) if bootstrap else None
        rows.append(row)
    return pd.DataFrame(rows)


def table_null_envelope(manifest: RunManifest, reports: List[Dict[str, Any]]) -> pd.DataFrame:
    """Horizon rows; links inside the shuffled-null envelope per structure."""
    rows = []
    for report in reports:
        row: Dict[str, Any] = {'dt': report['horizon_s']}
        for structure in _structures(manifest):
            _, significance = _structure_summary(report, structure)
            row[f"{structure} within"] = significance['links_within_envelope'] if significance else None
            row[f"{structure} total"] = significance['total_links'] if significance else None
        rows.append(row)
    return pd.DataFrame(rows)


def correlation_series(reports: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Mean and percentiles of rho per horizon, overall and per sector."""
    sectors = sorted({s for r in reports for s in r['per_sector']})
    return {
        'horizons': [r['horizon_s'] for r in reports],
        'pairwise': [{'mean': r['pairwise']['mean'], 'percentiles': r['pairwise']['percentiles']} for r in reports],
        'per_sector': {
            sector: [{'mean': r['per_sector'][sector]['mean'], 'percentiles': r['per_sector'][sector]['percentiles']}
                     if sector in r['per_sector'] else None for r in reports]
            for sector in sectors
        },
    }


def centrality_series(manifest: RunManifest, reports: List[Dict[str, Any]]) -> Dict[str, Any]:
    """Per-node degree centrality and raw degree per horizon and filter."""
    series: Dict[str, Any] = {}
    for kind in manifest.config['filters']:
        symbols = sorted({s for r in reports for s in r['graphs'][kind]['per_node_degree']})
        series[kind] = {
            symbol: {
                'centrality': [r['graphs'][kind]['per_node_degree_centrality'].get(symbol) for r in reports],
                'degree': [r['graphs'][kind]['per_node_degree'].get(symbol) for r in reports],
            }
            for symbol in symbols
        }
    return {'horizons': [r['horizon_s'] for r in reports], 'series': series}


def path_length_series(manifest: RunManifest, reports: List[Dict[str, Any]]) -> Dict[str, Any]:
    return {
        'horizons': [r['horizon_s'] for r in reports],
        'series': {kind: [r['graphs'][kind]['avg_shortest_path'] for r in reports]
                   for kind in manifest.config['filters']},
    }


def group_centrality_series(manifest: RunManifest, reports: List[Dict[str, Any]]) -> Dict[str, Any]:
    series: Dict[str, Any] = {}
    for kind in manifest.config['filters']:
        sectors = sorted({s for r in reports for s in r['graphs'][kind]['group_degree_centrality']})
        series[kind] = {sector: [r['graphs'][kind]['group_degree_centrality'].get(sector) for r in reports]
                        for sector in sectors}
    return {'horizons': [r['horizon_s'] for r in reports], 'series': series}


def _write_json(payload: Any, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2)


def report_tables(manifest: RunManifest) -> List[str]:
    """Write the table CSV/JSON files and figure series of a finished run.

    Returns:
        List[str]: written paths relative to the run's output directory
    """
    manifest.require_complete()
    reports = _load_reports(manifest)
    os.makedirs(manifest.path(TABLES_DIR), exist_ok=True)
    written: List[str] = []

    tables = {
        'abs_correlation': table_abs_correlation(manifest, reports),
        'bootstrap_support': table_bootstrap_support(manifest, reports),
        'null_envelope': table_null_envelope(manifest, reports),
    }
    for name, frame in tables.items():
        csv_rel = os.path.join(TABLES_DIR, f"{name}.csv")
        json_rel = os.path.join(TABLES_DIR, f"{name}.json")
        frame.to_csv(manifest.path(csv_rel), index=False, lineterminator='\n')
        _write_json(frame.to_dict(orient='records'), manifest.path(json_rel))
        written.extend([csv_rel, json_rel])

    series = {
        'correlation_by_horizon': correlation_series(reports),
        'degree_centrality_by_horizon': centrality_series(manifest, reports),
        'shortest_path_by_horizon': path_length_series(manifest, reports),
        'group_centrality_by_horizon': group_centrality_series(manifest, reports),
        'coefficient_densities': {str(r['horizon_s']): r.get('distributions') for r in reports},
    }
    for name, payload in series.items():
        rel = os.path.join(TABLES_DIR, f"{name}.json")
        _write_json(payload, manifest.path(rel))
        written.append(rel)

    logger.info(f"Wrote {len(written)} table and series files under {manifest.path(TABLES_DIR)}")
    return written
