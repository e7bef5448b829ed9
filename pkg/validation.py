"""
Statistical validation of filtered links.

Bootstrap replicas measure how often each empirical edge survives
resampling of the time rows; independent time shuffles of every series
give a null envelope of correlation values.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple, TypeVar

import numpy as np

from correlation import DissimilarityKind, pearson_matrix, to_dissimilarity
from errors import DegenerateReplica, EmptyLinkList, InvalidResampleCount, ZeroVariance
from filtering import FilteredGraph, FilterKind, build_filtered_graph
from market_data import ReturnPanel

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.95
MAX_REDRAWS = 10

# (p-value ceiling, marker), tightest first
STAR_THRESHOLDS = [(0.001, '***'), (0.01, '**'), (0.05, '*')]

T = TypeVar('T')


@dataclass
class BootstrapReport:
    kind: FilterKind
    replica_count: int
    per_edge_support: Dict[Tuple[str, str], float]
    frac_edges_above_threshold: float
    threshold: float = DEFAULT_THRESHOLD
    redrawn_replicas: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'replica_count': self.replica_count,
            'threshold': self.threshold,
            'frac_edges_above_threshold': self.frac_edges_above_threshold,
            'redrawn_replicas': self.redrawn_replicas,
            'per_edge_support': [{'source': a, 'target': b, 'support': s}
                                 for (a, b), s in sorted(self.per_edge_support.items())],
        }


@dataclass
class NullEnvelope:
    shuffle_count: int
    min_coeff: float
    max_coeff: float
    null_coeff_samples: Optional[np.ndarray] = None

    def inside(self, values: Sequence[float]) -> np.ndarray:
        """Strict interior; values equal to a bound count as outside."""
        data = np.asarray(values, dtype=float)
        return (data > self.min_coeff) & (data < self.max_coeff)

    def to_dict(self) -> Dict[str, Any]:
        return {'shuffle_count': self.shuffle_count, 'min_coeff': self.min_coeff, 'max_coeff': self.max_coeff}


@dataclass
class SignificanceAnnotation:
    links_within_envelope: int
    total_links: int
    p_value: float
    stars: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'links_within_envelope': self.links_within_envelope,
            'total_links': self.total_links,
            'p_value': self.p_value,
            'stars': self.stars,
        }


def significance_stars(p_value: float) -> str:
    for ceiling, marker in STAR_THRESHOLDS:
        if p_value <= ceiling:
            return marker
    return ''


def _run_indexed(task: Callable[[int], T], count: int, workers: int) -> List[T]:
    """Run task(0..count-1) and return results in index order."""
    if workers <= 1:
        return [task(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(task, range(count)))


def _replica_edges(panel: ReturnPanel, kind: FilterKind, dissimilarity_kind: DissimilarityKind,
                   seed_seq: np.random.SeedSequence, max_redraws: int) -> Tuple[Set[Tuple[str, str]], int]:
    rng = np.random.default_rng(seed_seq)
    t_len = panel.t_len
    for attempt in range(max_redraws + 1):
        rows = rng.integers(0, t_len, size=t_len)
        replica = panel.with_returns(panel.returns[:, rows])
        try:
            corr = pearson_matrix(replica)
        except ZeroVariance as e:
            logger.warning(f"Bootstrap replica drew a flat series ({e}), redrawing")
            continue
        graph = build_filtered_graph(kind, to_dissimilarity(corr, dissimilarity_kind), corr)
        return graph.symbol_edge_set(), attempt
    raise DegenerateReplica(f"Replica stayed degenerate after {max_redraws} redraws")


def bootstrap_stability(panel: ReturnPanel, kind: FilterKind, replicas: int, seed: int,
                        dissimilarity_kind: DissimilarityKind = DissimilarityKind.POWER,
                        threshold: float = DEFAULT_THRESHOLD, workers: int = 1,
                        empirical: Optional[FilteredGraph] = None,
                        max_redraws: int = MAX_REDRAWS) -> BootstrapReport:
    """Fraction of bootstrap replicas that contain each empirical edge.

    Each replica draws T time indices with replacement and keeps whole
    cross-sectional rows, so replicas have the empirical length. Replica k
    uses the k-th child of the master seed, which makes serial and
    parallel runs identical.

    Args:
        panel: empirical return panel
        kind: filter to rebuild on every replica
        replicas: number of replicas, at least 1
        seed: master seed
        dissimilarity_kind: transform applied before filtering
        threshold: support level counted in frac_edges_above_threshold
        workers: thread count
        empirical: prebuilt empirical graph, rebuilt from the panel when omitted

    Returns:
        BootstrapReport: per-edge supports and the share above threshold
    """
    kind = FilterKind.parse(kind)
    if replicas < 1:
        raise InvalidResampleCount(f"Bootstrap needs at least 1 replica, got {replicas}")
    if empirical is None:
        corr = pearson_matrix(panel)
        empirical = build_filtered_graph(kind, to_dissimilarity(corr, dissimilarity_kind), corr)

    children = np.random.SeedSequence(seed).spawn(replicas)
    results = _run_indexed(
        lambda k: _replica_edges(panel, kind, dissimilarity_kind, children[k], max_redraws),
        replicas, workers)

    edges = sorted(empirical.symbol_edge_set())
    counts = {edge: 0 for edge in edges}
    redrawn = 0
    for edge_set, attempts in results:
        redrawn += 1 if attempts else 0
        for edge in edges:
            if edge in edge_set:
                counts[edge] += 1

    support = {edge: counts[edge] / replicas for edge in edges}
    above = sum(1 for value in support.values() if value > threshold)
    frac = above / len(edges) if edges else 0.0
    logger.info(f"Bootstrap {kind.value} at {panel.horizon_s}s: {above}/{len(edges)} edges above {threshold:.0%} "
                f"over {replicas} replicas")
    return BootstrapReport(kind, replicas, support, frac, threshold, redrawn)


def shuffle_null(panel: ReturnPanel, shuffles: int, seed: int, retain_samples: bool = False,
                 workers: int = 1) -> NullEnvelope:
    """Min and max off-diagonal coefficient over independently time-shuffled panels.

    Every series is permuted on its own, which destroys cross-correlation
    while keeping each marginal distribution.
    """
    if shuffles < 1:
        raise InvalidResampleCount(f"Shuffle null needs at least 1 shuffle, got {shuffles}")
    children = np.random.SeedSequence(seed).spawn(shuffles)

    def one_shuffle(k: int) -> np.ndarray:
        rng = np.random.default_rng(children[k])
        shuffled = panel.with_returns(rng.permuted(panel.returns, axis=1))
        return pearson_matrix(shuffled).upper_triangle()

    samples = _run_indexed(one_shuffle, shuffles, workers)
    pooled = np.concatenate(samples)
    envelope = NullEnvelope(shuffles, float(pooled.min()), float(pooled.max()),
                            pooled if retain_samples else None)
    logger.debug(f"Null envelope at {panel.horizon_s}s: [{envelope.min_coeff:.4f}, {envelope.max_coeff:.4f}]")
    return envelope


def annotate_significance(links: Sequence[float], envelope: NullEnvelope) -> SignificanceAnnotation:
    """Share of links consistent with the shuffled null, read as a p-value."""
    values = np.asarray(links, dtype=float)
    if values.size == 0:
        raise EmptyLinkList('No links to annotate')
    within = int(envelope.inside(values).sum())
    p_value = within / values.size
    return SignificanceAnnotation(within, int(values.size), p_value, significance_stars(p_value))
