"""
Network descriptive statistics across sampling horizons.

Degree based centralities, hop-count path lengths, summaries of the
coefficients kept by each filter and the per-horizon correlation curves.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import networkx as nx
import numpy as np

from correlation import (
    DEFAULT_PERCENTILES, CorrelationMatrix, CorrelationSummary, pairwise_summary,
    pearson_matrix, sector_summaries, summarize,
)
from errors import (
    Disconnected, EdgelessGraph, EmptyGroup, GroupIsEntireGraph, InconsistentUniverse, TooFewHorizons, TooFewNodes,
    UnknownGroupMember,
)
from filtering import FilteredGraph, FilterKind, enumerate_cliques
from market_data import AdfResult, ReturnPanel, SectorTaxonomy
from validation import BootstrapReport, NullEnvelope, SignificanceAnnotation, annotate_significance

logger = logging.getLogger(__name__)

TABLE_PERCENTILES = [25.0, 75.0]
DEFAULT_BINS = 40


@dataclass
class EppsPoint:
    horizon_s: int
    pairwise: CorrelationSummary
    per_sector: Dict[str, CorrelationSummary]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'horizon_s': self.horizon_s,
            'pairwise': self.pairwise.to_dict(),
            'per_sector': {sector: s.to_dict() for sector, s in self.per_sector.items()},
        }


@dataclass
class GraphStats:
    """Everything reported about one filtered graph at one horizon."""
    kind: FilterKind
    edge_count: int
    avg_shortest_path: float
    per_node_degree_centrality: Dict[str, float]
    per_node_degree: Dict[str, int]
    group_degree_centrality: Dict[str, float]
    filtered_correlation: CorrelationSummary
    total_dissimilarity: float
    three_cliques: int = 0
    four_cliques: int = 0
    significance: Optional[SignificanceAnnotation] = None
    bootstrap: Optional[BootstrapReport] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'edge_count': self.edge_count,
            'avg_shortest_path': self.avg_shortest_path,
            'per_node_degree_centrality': dict(self.per_node_degree_centrality),
            'per_node_degree': dict(self.per_node_degree),
            'group_degree_centrality': dict(self.group_degree_centrality),
            'filtered_correlation': self.filtered_correlation.to_dict(),
            'total_dissimilarity': self.total_dissimilarity,
            'three_cliques': self.three_cliques,
            'four_cliques': self.four_cliques,
            # 3-cliques counted once per containing 4-clique
            'triangle_multiplicity': 4 * self.four_cliques,
            'significance': self.significance.to_dict() if self.significance else None,
            'bootstrap': self.bootstrap.to_dict() if self.bootstrap else None,
        }


@dataclass
class HorizonReport:
    """Per-horizon results backing the tables and figure series."""
    horizon_s: int
    t_len: int
    pairwise: CorrelationSummary
    pairwise_abs: CorrelationSummary
    per_sector: Dict[str, CorrelationSummary]
    graph_stats: Dict[str, GraphStats] = field(default_factory=dict)
    significance: Optional[SignificanceAnnotation] = None
    envelope: Optional[NullEnvelope] = None
    adf: Dict[str, AdfResult] = field(default_factory=dict)
    filled_slots: Dict[str, int] = field(default_factory=dict)
    distributions: Optional[Dict[str, Any]] = None

    @property
    def mst_stats(self) -> Optional[GraphStats]:
        return self.graph_stats.get(FilterKind.MST.value)

    @property
    def tmfg_stats(self) -> Optional[GraphStats]:
        return self.graph_stats.get(FilterKind.TMFG.value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'horizon_s': self.horizon_s,
            't_len': self.t_len,
            'pairwise': self.pairwise.to_dict(),
            'pairwise_abs': self.pairwise_abs.to_dict(),
            'per_sector': {sector: s.to_dict() for sector, s in self.per_sector.items()},
            'graphs': {kind: stats.to_dict() for kind, stats in self.graph_stats.items()},
            'significance': self.significance.to_dict() if self.significance else None,
            'envelope': self.envelope.to_dict() if self.envelope else None,
            'adf': {symbol: asdict(result) for symbol, result in sorted(self.adf.items())},
            'filled_slots': dict(sorted(self.filled_slots.items())),
            'distributions': self.distributions,
        }


def degree_centrality(graph: FilteredGraph) -> Dict[str, float]:
    """Degree over n - 1 for every node."""
    if graph.n < 2:
        raise TooFewNodes(f"Degree centrality needs at least 2 nodes, got {graph.n}")
    return nx.degree_centrality(graph.to_networkx())


def group_degree_centrality(graph: FilteredGraph, group: Sequence[str]) -> float:
    """Fraction of non-group nodes adjacent to at least one group member."""
    members = set(group)
    if not members:
        raise EmptyGroup('Group has no members')
    unknown = members.difference(graph.symbols)
    if unknown:
        raise UnknownGroupMember(f"Group members not in graph: {sorted(unknown)}")
    if len(members) == graph.n:
        raise GroupIsEntireGraph('Group covers every node, no outside members to reach')
    return float(nx.group_degree_centrality(graph.to_networkx(), members))


def sector_group_centrality(graph: FilteredGraph, taxonomy: SectorTaxonomy) -> Dict[str, float]:
    """Group degree centrality of every sector group that leaves nodes outside."""
    result = {}
    for sector, members in taxonomy.groups(graph.symbols).items():
        if len(members) < graph.n:
            result[sector] = group_degree_centrality(graph, members)
    return result


def average_shortest_path(graph: FilteredGraph) -> float:
    """Mean hop count over all unordered node pairs."""
    g = graph.to_networkx()
    if graph.n < 2 or not nx.is_connected(g):
        raise Disconnected(f"{graph.kind.value} graph over {graph.n} nodes is not connected")
    return float(nx.average_shortest_path_length(g))


def filtered_correlation_summary(graph: FilteredGraph,
                                 percentile_levels: Sequence[float] = TABLE_PERCENTILES) -> CorrelationSummary:
    """Mean |rho| and |rho| percentiles over the edges a filter kept."""
    if not graph.edges:
        raise EdgelessGraph(f"{graph.kind.value} graph has no edges")
    return summarize(graph.correlations(), percentile_levels, absolute_percentiles=True)


def epps_curve(panels: Mapping[int, ReturnPanel], taxonomy: SectorTaxonomy,
               percentile_levels: Sequence[float] = DEFAULT_PERCENTILES) -> List[EppsPoint]:
    """Pairwise and per-sector summaries ordered by horizon.

    Rows are put in symbol order first, so the result does not depend on
    how each panel happens to be ordered.
    """
    if len(panels) < 2:
        raise TooFewHorizons(f"Correlation curve needs at least 2 horizons, got {len(panels)}")
    horizons = sorted(panels)
    universe = sorted(panels[horizons[0]].symbols)
    for horizon in horizons[1:]:
        if sorted(panels[horizon].symbols) != universe:
            raise InconsistentUniverse(f"Panel at {horizon}s has a different symbol set than at {horizons[0]}s")

    points = []
    for horizon in horizons:
        corr = pearson_matrix(panels[horizon].reorder(universe))
        points.append(EppsPoint(horizon, pairwise_summary(corr, percentile_levels),
                                sector_summaries(corr, taxonomy, percentile_levels)))
        logger.debug(f"Mean correlation at {horizon}s: {points[-1].pairwise.mean:.4f}")
    return points


def _density(values: np.ndarray, edges: np.ndarray) -> List[float]:
    if values.size == 0:
        return [0.0] * (edges.size - 1)
    density, _ = np.histogram(values, bins=edges, density=True)
    return density.tolist()


def coefficient_distributions(corr: CorrelationMatrix, graphs: Mapping[str, FilteredGraph],
                              envelope: Optional[NullEnvelope] = None,
                              bins: int = DEFAULT_BINS) -> Dict[str, Any]:
    """Probability densities of coefficients on a shared grid over [-1, 1].

    Covers all pairs, each filtered graph and, when the envelope kept its
    samples, the shuffled null.
    """
    edges = np.linspace(-1.0, 1.0, bins + 1)
    densities = {'C': _density(corr.upper_triangle(), edges)}
    for kind, graph in graphs.items():
        densities[kind] = _density(graph.correlations(), edges)
    if envelope is not None and envelope.null_coeff_samples is not None:
        densities['shuffled'] = _density(envelope.null_coeff_samples, edges)
    return {'bin_edges': edges.tolist(), 'densities': densities}


def describe_graph(graph: FilteredGraph, taxonomy: SectorTaxonomy,
                   table_percentiles: Sequence[float] = TABLE_PERCENTILES,
                   envelope: Optional[NullEnvelope] = None,
                   bootstrap: Optional[BootstrapReport] = None) -> GraphStats:
    degrees = graph.degrees()
    # sum of degrees is twice the edge count
    assert sum(degrees.values()) == 2 * len(graph.edges)
    cliques = enumerate_cliques(graph)
    return GraphStats(
        kind=graph.kind,
        edge_count=len(graph.edges),
        avg_shortest_path=average_shortest_path(graph),
        per_node_degree_centrality=degree_centrality(graph),
        per_node_degree=degrees,
        group_degree_centrality=sector_group_centrality(graph, taxonomy),
        filtered_correlation=filtered_correlation_summary(graph, table_percentiles),
        total_dissimilarity=graph.total_dissimilarity(),
        three_cliques=cliques.three_count,
        four_cliques=cliques.four_count,
        significance=annotate_significance(graph.correlations(), envelope) if envelope else None,
        bootstrap=bootstrap,
    )


def build_horizon_report(panel: ReturnPanel, corr: CorrelationMatrix,
                         graphs: Mapping[Union[str, FilterKind], FilteredGraph],
                         taxonomy: SectorTaxonomy,
                         percentile_levels: Sequence[float] = DEFAULT_PERCENTILES,
                         table_percentiles: Sequence[float] = TABLE_PERCENTILES,
                         envelope: Optional[NullEnvelope] = None,
                         bootstraps: Optional[Mapping[Union[str, FilterKind], BootstrapReport]] = None,
                         adf: Optional[Dict[str, AdfResult]] = None,
                         filled_slots: Optional[Dict[str, int]] = None,
                         histogram_bins: Optional[int] = DEFAULT_BINS) -> HorizonReport:
    """Assemble the report for one horizon.

    Args:
        panel: return panel the matrix was computed from
        corr: Pearson matrix of the panel
        graphs: filtered graphs keyed by filter kind
        taxonomy: sector labels for per-sector and group statistics
        percentile_levels: levels for the signed pairwise summaries
        table_percentiles: levels for the |rho| summaries
        envelope: shuffled-null envelope, enables significance annotations
        bootstraps: bootstrap reports keyed by filter kind
        adf: stationarity results per symbol
        filled_slots: number of repaired bins per symbol
        histogram_bins: bins for the coefficient densities, None to skip

    Returns:
        HorizonReport: statistics for the horizon
    """
    by_kind = {FilterKind.parse(k): g for k, g in graphs.items()}
    boots = {FilterKind.parse(k): b for k, b in (bootstraps or {}).items()}
    stats = {}
    for kind in sorted(by_kind, key=lambda k: k.order):
        stats[kind.value] = describe_graph(by_kind[kind], taxonomy, table_percentiles, envelope, boots.get(kind))

    distributions = None
    if histogram_bins:
        distributions = coefficient_distributions(
            corr, {k.value: g for k, g in by_kind.items()}, envelope, histogram_bins)

    report = HorizonReport(
        horizon_s=panel.horizon_s,
        t_len=panel.t_len,
        pairwise=pairwise_summary(corr, percentile_levels),
        pairwise_abs=pairwise_summary(corr, table_percentiles, absolute_percentiles=True),
        per_sector=sector_summaries(corr, taxonomy, percentile_levels),
        graph_stats=stats,
        significance=annotate_significance(corr.upper_triangle(), envelope) if envelope else None,
        envelope=envelope,
        adf=dict(adf or {}),
        filled_slots=dict(filled_slots or {}),
        distributions=distributions,
    )
    logger.info(f"Horizon {panel.horizon_s}s report: mean rho {report.pairwise.mean:.4f} over {panel.n} assets")
    return report
