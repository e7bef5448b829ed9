"""
Filtered correlation networks: MST, PMFG and TMFG builders together with
the planarity, chordality and clique checks used to verify them.

All three builders scan candidate edges in the same deterministic order:
ascending dissimilarity, ties broken by the (i, j) index pair.
"""

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from correlation import CorrelationMatrix, DissimilarityMatrix
from errors import DimensionMismatch, TooFewNodes, UnknownKind

logger = logging.getLogger(__name__)

Face = Tuple[int, int, int]
EdgePair = Tuple[int, int]


class FilterKind(Enum):
    MST = 'MST'
    PMFG = 'PMFG'
    TMFG = 'TMFG'

    @property
    def order(self) -> int:
        return list(FilterKind).index(self)

    @classmethod
    def parse(cls, value: Union[str, 'FilterKind']) -> 'FilterKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise UnknownKind(f"Unknown filter '{value}', expected MST, PMFG or TMFG") from None


@dataclass(frozen=True)
class FilteredEdge:
    i: int
    j: int
    correlation: float
    dissimilarity: float

    @property
    def negative(self) -> bool:
        return self.correlation < 0


@dataclass
class FilteredGraph:
    """Undirected filtered network; edges are kept in acceptance order."""
    kind: FilterKind
    symbols: List[str]
    edges: List[FilteredEdge]
    seed: Tuple[int, ...] = ()
    insertions: List[Tuple[int, Face]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.symbols)

    def edge_set(self) -> Set[EdgePair]:
        return {(min(e.i, e.j), max(e.i, e.j)) for e in self.edges}

    def symbol_edge_set(self) -> Set[Tuple[str, str]]:
        return {tuple(sorted((self.symbols[e.i], self.symbols[e.j]))) for e in self.edges}

    def correlations(self) -> np.ndarray:
        return np.array([e.correlation for e in self.edges], dtype=float)

    def total_dissimilarity(self) -> float:
        return float(sum(e.dissimilarity for e in self.edges))

    def degrees(self) -> Dict[str, int]:
        counts = {symbol: 0 for symbol in self.symbols}
        for e in self.edges:
            counts[self.symbols[e.i]] += 1
            counts[self.symbols[e.j]] += 1
        return counts

    def to_networkx(self) -> nx.Graph:
        """Graph keyed by symbol with correlation, dissimilarity and sign on edges."""
        graph = nx.Graph(kind=self.kind.value)
        graph.add_nodes_from(self.symbols)
        for e in self.edges:
            graph.add_edge(self.symbols[e.i], self.symbols[e.j], correlation=e.correlation,
                           dissimilarity=e.dissimilarity, negative=e.negative)
        return graph

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'symbols': list(self.symbols),
            'edges': [{'source': self.symbols[e.i], 'target': self.symbols[e.j],
                       'correlation': e.correlation, 'dissimilarity': e.dissimilarity,
                       'negative': e.negative} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FilteredGraph':
        symbols = list(data['symbols'])
        index = {symbol: pos for pos, symbol in enumerate(symbols)}
        edges = []
        for item in data['edges']:
            i, j = index[item['source']], index[item['target']]
            edges.append(FilteredEdge(min(i, j), max(i, j), float(item['correlation']),
                                      float(item['dissimilarity'])))
        return cls(FilterKind.parse(data['kind']), symbols, edges)


@dataclass
class CliqueReport:
    three_cliques: List[Tuple[str, ...]]
    four_cliques: List[Tuple[str, ...]]

    @property
    def three_count(self) -> int:
        return len(self.three_cliques)

    @property
    def four_count(self) -> int:
        return len(self.four_cliques)

    @property
    def triangle_multiplicity(self) -> int:
        """Triangles counted once per containing 4-clique."""
        return 4 * len(self.four_cliques)


@dataclass
class PlanarityResult:
    is_planar: bool
    embedding: Optional[Dict[Any, List[Any]]] = None
    witness: Optional[List[EdgePair]] = None
    witness_kind: Optional[str] = None

    def __bool__(self) -> bool:
        return self.is_planar


@dataclass
class ChordalityResult:
    is_chordal: bool
    elimination_order: Optional[List[int]] = None
    chordless_cycle: Optional[List[int]] = None

    def __bool__(self) -> bool:
        return self.is_chordal


def _check_inputs(dissim: DissimilarityMatrix, corr: CorrelationMatrix, minimum: int) -> int:
    n = dissim.n
    if list(dissim.symbols) != list(corr.symbols):
        raise DimensionMismatch('Dissimilarity and correlation matrices list different symbols')
    if dissim.values.shape != (n, n) or corr.values.shape != (n, n):
        raise DimensionMismatch(f"Expected {n}x{n} matrices, got {dissim.values.shape} and {corr.values.shape}")
    if n < minimum:
        raise TooFewNodes(f"Filter needs at least {minimum} nodes, got {n}")
    return n


def sorted_candidates(dissim: np.ndarray) -> List[EdgePair]:
    """All pairs i < j ordered by (dissimilarity, i, j)."""
    rows, cols = np.triu_indices(dissim.shape[0], k=1)
    order = np.lexsort((cols, rows, dissim[rows, cols]))
    return [(int(rows[k]), int(cols[k])) for k in order]


def _edge(i: int, j: int, dissim: DissimilarityMatrix, corr: CorrelationMatrix) -> FilteredEdge:
    a, b = min(i, j), max(i, j)
    return FilteredEdge(a, b, float(corr.values[a, b]), float(dissim.values[a, b]))


def build_mst(dissim: DissimilarityMatrix, corr: CorrelationMatrix) -> FilteredGraph:
    """Minimum spanning tree by sorted-edge scan with cycle rejection."""
    n = _check_inputs(dissim, corr, 2)
    components = DisjointSet(range(n))
    edges: List[FilteredEdge] = []
    for i, j in sorted_candidates(dissim.values):
        if components.merge(i, j):
            edges.append(_edge(i, j, dissim, corr))
            if len(edges) == n - 1:
                break
    logger.debug(f"MST on {n} nodes: {len(edges)} edges")
    return FilteredGraph(FilterKind.MST, list(dissim.symbols), edges)


class _FaceIndex:
    """Faces of a fixed planar embedding, kept as vertex cycles."""

    def __init__(self, embedding: nx.PlanarEmbedding):
        self.faces: Dict[int, List[int]] = {}
        self.incident: Dict[int, Set[int]] = defaultdict(set)
        self._next_id = 0
        marked: Set[EdgePair] = set()
        for u, v in embedding.edges():
            if (u, v) not in marked:
                self._add(embedding.traverse_face(u, v, mark_half_edges=marked))

    def _add(self, cycle: List[int]) -> None:
        face_id = self._next_id
        self._next_id += 1
        self.faces[face_id] = cycle
        for v in cycle:
            self.incident[v].add(face_id)

    def shared_face(self, u: int, v: int) -> Optional[int]:
        common = self.incident[u] & self.incident[v]
        return min(common) if common else None

    def split(self, face_id: int, u: int, v: int) -> None:
        """Draw the chord u-v through a face, replacing it by two faces."""
        cycle = self.faces.pop(face_id)
        for w in cycle:
            self.incident[w].discard(face_id)
        a, b = sorted((cycle.index(u), cycle.index(v)))
        self._add(cycle[a:b + 1])
        self._add(cycle[b:] + cycle[:a + 1])


def _block_is_planar(graph: nx.Graph, i: int, j: int) -> bool:
    """Planarity of the biconnected block holding edge i-j; the other blocks are unchanged."""
    block = next(c for c in nx.biconnected_components(graph) if i in c and j in c)
    return nx.check_planarity(graph.subgraph(block))[0]


def _is_triconnected(graph: nx.Graph) -> bool:
    if graph.number_of_nodes() < 5 or min(d for _, d in graph.degree()) < 3:
        return False
    return all(nx.is_biconnected(nx.restricted_view(graph, [v], [])) for v in graph)


def build_pmfg(dissim: DissimilarityMatrix, corr: CorrelationMatrix) -> FilteredGraph:
    """Planar maximally filtered graph.

    Candidates are accepted in sorted order while the graph stays planar,
    until 3(n - 2) edges are in. An edge joining two components is always
    accepted; otherwise only the block it closes is tested. Once the graph
    is 3-connected its embedding is unique, and a candidate is planar
    exactly when both endpoints lie on a common face of that embedding.
    """
    n = _check_inputs(dissim, corr, 3)
    target = 3 * (n - 2)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    components = DisjointSet(range(n))
    faces: Optional[_FaceIndex] = None
    edges: List[FilteredEdge] = []
    rejected = planarity_tests = 0
    for i, j in sorted_candidates(dissim.values):
        if faces is not None:
            face_id = faces.shared_face(i, j)
            if face_id is None:
                rejected += 1
                continue
            faces.split(face_id, i, j)
            graph.add_edge(i, j)
        else:
            graph.add_edge(i, j)
            joins_components = components.merge(i, j)
            # any graph with at most 8 edges is planar
            if not joins_components and graph.number_of_edges() > 8:
                planarity_tests += 1
                if not _block_is_planar(graph, i, j):
                    graph.remove_edge(i, j)
                    rejected += 1
                    continue
        edges.append(_edge(i, j, dissim, corr))
        if len(edges) == target:
            break
        if faces is None and components.n_subsets == 1 and _is_triconnected(graph):
            faces = _FaceIndex(nx.check_planarity(graph)[1])
    logger.debug(f"PMFG on {n} nodes: {len(edges)} edges, {rejected} candidates rejected, "
                 f"{planarity_tests} planarity tests")
    return FilteredGraph(FilterKind.PMFG, list(dissim.symbols), edges)


def build_tmfg(dissim: DissimilarityMatrix, corr: CorrelationMatrix) -> FilteredGraph:
    """Triangulated maximally filtered graph.

    Seeds a tetrahedron on the four nodes with the lowest dissimilarity
    sums, then repeatedly inserts the (vertex, face) pair with the lowest
    sum of the vertex's dissimilarities to the face corners.
    """
    n = _check_inputs(dissim, corr, 4)
    d = dissim.values
    strength = d.sum(axis=1)
    seed = tuple(sorted(int(v) for v in np.lexsort((np.arange(n), strength))[:4]))

    edges = [_edge(a, b, dissim, corr) for a, b in itertools.combinations(seed, 2)]
    faces: List[Face] = [tuple(face) for face in itertools.combinations(seed, 3)]
    remaining = [v for v in range(n) if v not in seed]
    insertions: List[Tuple[int, Face]] = []

    while remaining:
        face_array = np.array(faces)
        rem = np.array(remaining)
        gains = d[np.ix_(face_array[:, 0], rem)] + d[np.ix_(face_array[:, 1], rem)] + d[np.ix_(face_array[:, 2], rem)]
        best = gains.min()
        ties = np.argwhere(gains == best)
        face_pos, rem_pos = min(((int(f), int(r)) for f, r in ties),
                                key=lambda fr: (remaining[fr[1]], faces[fr[0]]))
        vertex = remaining[rem_pos]
        a, b, c = faces[face_pos]

        edges.extend(_edge(vertex, corner, dissim, corr) for corner in (a, b, c))
        faces.pop(face_pos)
        faces.extend(tuple(sorted(pair + (vertex,))) for pair in ((a, b), (a, c), (b, c)))
        remaining.remove(vertex)
        insertions.append((vertex, (a, b, c)))

    logger.debug(f"TMFG on {n} nodes: seed {seed}, {len(edges)} edges, {len(faces)} faces")
    return FilteredGraph(FilterKind.TMFG, list(dissim.symbols), edges, seed=seed, insertions=insertions)


BUILDERS = {
    FilterKind.MST: build_mst,
    FilterKind.PMFG: build_pmfg,
    FilterKind.TMFG: build_tmfg,
}


def build_filtered_graph(kind: FilterKind, dissim: DissimilarityMatrix, corr: CorrelationMatrix) -> FilteredGraph:
    return BUILDERS[FilterKind.parse(kind)](dissim, corr)


def _edge_pairs(edges: Iterable[Union[EdgePair, FilteredEdge]]) -> List[EdgePair]:
    pairs = []
    for edge in edges:
        if isinstance(edge, FilteredEdge):
            pairs.append((edge.i, edge.j))
        else:
            i, j = edge
            pairs.append((int(i), int(j)))
    return pairs


def _index_graph(edges: Iterable[Union[EdgePair, FilteredEdge]], n: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(_edge_pairs(edges))
    return graph


def is_planar(edges: Iterable[Union[EdgePair, FilteredEdge]], n: int) -> PlanarityResult:
    """Left-right planarity test.

    Returns the combinatorial embedding when planar, otherwise a Kuratowski
    subgraph labelled 'K5' or 'K3,3' by its branch-vertex degrees.
    """
    graph = _index_graph(edges, n)
    planar, certificate = nx.check_planarity(graph, counterexample=True)
    if planar:
        return PlanarityResult(True, embedding=certificate.get_data())

    witness = sorted(tuple(sorted(e)) for e in certificate.edges())
    degrees = [d for _, d in certificate.degree() if d >= 3]
    kind = 'K5' if len(degrees) == 5 and all(d == 4 for d in degrees) else 'K3,3'
    return PlanarityResult(False, witness=witness, witness_kind=kind)


def maximum_cardinality_search(graph: nx.Graph) -> List[int]:
    """Visit order of MCS; ties go to the smallest node index."""
    weight = {v: 0 for v in graph.nodes}
    unvisited = set(graph.nodes)
    order = []
    while unvisited:
        v = max(sorted(unvisited), key=lambda u: weight[u])
        order.append(v)
        unvisited.remove(v)
        for u in graph.neighbors(v):
            if u in unvisited:
                weight[u] += 1
    return order


def _find_chordless_cycle(graph: nx.Graph, start: Optional[int] = None) -> Optional[List[int]]:
    """Chordless cycle of length >= 4 through some vertex, or None.

    For a vertex v with non-adjacent neighbours u and w, a shortest u-w path
    avoiding the rest of N[v] closes an induced cycle through v.
    """
    vertices = sorted(graph.nodes)
    if start is not None:
        vertices.remove(start)
        vertices.insert(0, start)
    for v in vertices:
        neighbours = sorted(graph.neighbors(v))
        for u, w in itertools.combinations(neighbours, 2):
            if graph.has_edge(u, w):
                continue
            blocked = (set(neighbours) | {v}) - {u, w}
            allowed = graph.subgraph(x for x in graph.nodes if x not in blocked)
            try:
                path = nx.shortest_path(allowed, u, w)
            except nx.NetworkXNoPath:
                continue
            return [v] + path
    return None


def is_chordal(edges: Iterable[Union[EdgePair, FilteredEdge]], n: int) -> ChordalityResult:
    """Chordality via maximum cardinality search and elimination-order check.

    The reverse MCS order is a perfect elimination ordering exactly when the
    graph is chordal; otherwise a chordless cycle is returned as witness.
    """
    graph = _index_graph(edges, n)
    elimination = list(reversed(maximum_cardinality_search(graph)))
    position = {v: k for k, v in enumerate(elimination)}

    for v in elimination:
        later = [u for u in graph.neighbors(v) if position[u] > position[v]]
        if len(later) < 2:
            continue
        parent = min(later, key=position.__getitem__)
        for u in later:
            if u != parent and not graph.has_edge(parent, u):
                cycle = _find_chordless_cycle(graph, start=v)
                return ChordalityResult(False, chordless_cycle=cycle)
    return ChordalityResult(True, elimination_order=elimination)


def enumerate_cliques(graph: FilteredGraph) -> CliqueReport:
    """All distinct 3-vertex and 4-vertex complete subgraphs."""
    index_graph = _index_graph(graph.edges, graph.n)
    threes: List[Tuple[str, ...]] = []
    fours: List[Tuple[str, ...]] = []
    for clique in nx.enumerate_all_cliques(index_graph):
        if len(clique) > 4:
            break
        labelled = tuple(sorted(graph.symbols[v] for v in clique))
        if len(clique) == 3:
            threes.append(labelled)
        elif len(clique) == 4:
            fours.append(labelled)
    return CliqueReport(sorted(threes), sorted(fours))


def is_connected(graph: FilteredGraph) -> bool:
    return graph.n > 0 and nx.is_connected(_index_graph(graph.edges, graph.n))
