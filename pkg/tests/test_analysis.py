import json

import numpy as np
import pytest

from analysis import (
    average_shortest_path, build_horizon_report, coefficient_distributions, degree_centrality, describe_graph,
    epps_curve, filtered_correlation_summary, group_degree_centrality, sector_group_centrality,
)
from correlation import pairwise_summary, pearson_matrix, to_dissimilarity
from errors import (
    Disconnected, EdgelessGraph, EmptyGroup, GroupIsEntireGraph, InconsistentUniverse, TooFewHorizons, TooFewNodes,
    UnknownGroupMember,
)
from filtering import FilteredEdge, FilteredGraph, FilterKind, build_mst, build_tmfg
from market_data import ReturnPanel, SectorTaxonomy
from synth import FactorModelSpec, gen_factor_panel
from validation import shuffle_null


def graph_of(symbols, pairs, rho=0.5, kind=FilterKind.MST):
    index = {s: k for k, s in enumerate(symbols)}
    edges = []
    for a, b in pairs:
        i, j = sorted((index[a], index[b]))
        edges.append(FilteredEdge(i, j, rho, 1.0 - rho * rho))
    return FilteredGraph(kind, list(symbols), edges)


def star(n):
    symbols = [f"v{k}" for k in range(n)]
    return graph_of(symbols, [('v0', s) for s in symbols[1:]])


def path(symbols):
    return graph_of(symbols, list(zip(symbols, symbols[1:])))


def complete(n):
    symbols = [f"v{k}" for k in range(n)]
    pairs = [(a, b) for k, a in enumerate(symbols) for b in symbols[k + 1:]]
    return graph_of(symbols, pairs, kind=FilterKind.TMFG)


class TestDegreeCentrality:
    def test_star(self):
        centrality = degree_centrality(star(6))
        assert centrality['v0'] == 1.0
        assert centrality['v3'] == pytest.approx(1 / 5)

    def test_path(self):
        centrality = degree_centrality(path(['a', 'b', 'c']))
        assert centrality == {'a': 0.5, 'b': 1.0, 'c': 0.5}

    def test_single_node(self):
        with pytest.raises(TooFewNodes):
            degree_centrality(FilteredGraph(FilterKind.MST, ['a'], []))


class TestGroupCentrality:
    def test_star_center(self):
        assert group_degree_centrality(star(5), ['v0']) == 1.0

    def test_star_leaf_matches_degree(self):
        graph = star(5)
        assert group_degree_centrality(graph, ['v2']) == pytest.approx(degree_centrality(graph)['v2'])

    def test_path_end(self):
        assert group_degree_centrality(path(['a', 'b', 'c', 'd']), ['a']) == pytest.approx(1 / 3)

    def test_closed_group(self):
        graph = graph_of(['a', 'b', 'c', 'd'], [('a', 'b'), ('c', 'd')])
        assert group_degree_centrality(graph, ['a', 'b']) == 0.0

    def test_errors(self):
        graph = path(['a', 'b', 'c'])
        with pytest.raises(EmptyGroup):
            group_degree_centrality(graph, [])
        with pytest.raises(GroupIsEntireGraph):
            group_degree_centrality(graph, ['a', 'b', 'c'])
        with pytest.raises(UnknownGroupMember):
            group_degree_centrality(graph, ['z'])

    def test_sector_groups(self):
        graph = path(['a', 'b', 'c', 'd'])
        taxonomy = SectorTaxonomy({'a': 'x', 'b': 'x', 'c': 'y', 'd': 'z'})
        result = sector_group_centrality(graph, taxonomy)
        assert result == {'x': pytest.approx(0.5), 'other': pytest.approx(0.5)}


class TestShortestPath:
    def test_complete(self):
        assert average_shortest_path(complete(4)) == 1.0

    def test_path_of_three(self):
        assert average_shortest_path(path(['a', 'b', 'c'])) == pytest.approx(4 / 3)

    def test_disconnected(self):
        with pytest.raises(Disconnected):
            average_shortest_path(graph_of(['a', 'b', 'c', 'd'], [('a', 'b'), ('c', 'd')]))

    @pytest.mark.parametrize('seed', range(50))
    def test_tree_paths_longer_than_tmfg(self, random_matrices, seed):
        corr, dissim = random_matrices(25, seed, 100)
        mst = average_shortest_path(build_mst(dissim, corr))
        tmfg = average_shortest_path(build_tmfg(dissim, corr))
        assert mst >= tmfg >= 1.0


class TestFilteredCorrelation:
    def test_single_negative_edge(self):
        graph = graph_of(['a', 'b'], [('a', 'b')], rho=-0.4)
        summary = filtered_correlation_summary(graph)
        assert summary.mean_abs == pytest.approx(0.4)
        assert summary.mean == pytest.approx(-0.4)

    def test_edgeless(self):
        with pytest.raises(EdgelessGraph):
            filtered_correlation_summary(FilteredGraph(FilterKind.MST, ['a', 'b'], []))

    @pytest.mark.parametrize('seed', range(50))
    def test_filters_keep_strongest_links(self, two_block_spec, seed):
        two_block_spec.seed = seed
        corr = pearson_matrix(gen_factor_panel(two_block_spec).panel)
        dissim = to_dissimilarity(corr)
        mst = filtered_correlation_summary(build_mst(dissim, corr)).mean_abs
        tmfg = filtered_correlation_summary(build_tmfg(dissim, corr)).mean_abs
        assert mst >= tmfg >= pairwise_summary(corr).mean_abs


class TestDescribe:
    def test_degree_sums(self, random_matrices):
        corr, dissim = random_matrices(12, 4)
        taxonomy = SectorTaxonomy({s: 'all' for s in corr.symbols})
        mst = describe_graph(build_mst(dissim, corr), taxonomy)
        tmfg = describe_graph(build_tmfg(dissim, corr), taxonomy)
        assert sum(mst.per_node_degree.values()) == 2 * 11
        assert sum(tmfg.per_node_degree.values()) == 2 * (3 * 12 - 6)
        assert all(0.0 <= c <= 1.0 for c in tmfg.per_node_degree_centrality.values())
        assert tmfg.four_cliques == 12 - 3
        assert mst.group_degree_centrality == {}


class TestEppsCurve:
    @staticmethod
    def aggregated(panel, factors):
        panels = {}
        for k in factors:
            bins = panel.t_len // k
            summed = panel.returns[:, :bins * k].reshape(panel.n, bins, k).sum(axis=2)
            panels[panel.horizon_s * k] = ReturnPanel(panel.horizon_s * k, list(panel.symbols), summed,
                                                      panel.sectors)
        return panels

    def test_synchronous_data_is_flat(self):
        spec = FactorModelSpec(n_assets=6, blocks=[(3, 0.8), (3, 0.8)], idiosyncratic_sigma=0.6,
                               t_len=16_000, seed=3)
        panel = gen_factor_panel(spec).panel
        points = epps_curve(self.aggregated(panel, [1, 4, 16]), panel.sectors)
        assert [p.horizon_s for p in points] == [15, 60, 240]
        means = [p.pairwise.mean for p in points]
        assert max(means) - min(means) < 0.05
        assert set(points[0].per_sector) == {'block0', 'block1'}

    def test_permutation_invariant(self):
        spec = FactorModelSpec(n_assets=6, blocks=[(3, 0.8), (3, 0.8)], idiosyncratic_sigma=0.6,
                               t_len=800, seed=4)
        panel = gen_factor_panel(spec).panel
        panels = self.aggregated(panel, [1, 2])
        shuffled = {h: p.reorder(list(reversed(p.symbols))) for h, p in panels.items()}
        original = [p.to_dict() for p in epps_curve(panels, panel.sectors)]
        permuted = [p.to_dict() for p in epps_curve(shuffled, panel.sectors)]
        assert original == permuted

    def test_inconsistent_universe(self, make_panel):
        rows = np.random.default_rng(0).standard_normal((3, 30))
        panels = {15: make_panel(rows, symbols=['A', 'B', 'C']),
                  60: make_panel(rows, symbols=['A', 'B', 'D'], horizon_s=60)}
        with pytest.raises(InconsistentUniverse):
            epps_curve(panels, SectorTaxonomy())

    def test_single_horizon(self, make_panel):
        with pytest.raises(TooFewHorizons):
            epps_curve({15: make_panel(np.random.default_rng(0).standard_normal((3, 30)))}, SectorTaxonomy())


class TestReport:
    def test_densities_integrate_to_one(self, random_matrices):
        corr, dissim = random_matrices(10, 2)
        graphs = {'MST': build_mst(dissim, corr), 'TMFG': build_tmfg(dissim, corr)}
        result = coefficient_distributions(corr, graphs, bins=20)
        width = np.diff(result['bin_edges'])
        for name in ('C', 'MST', 'TMFG'):
            assert float(np.sum(np.array(result['densities'][name]) * width)) == pytest.approx(1.0)
        assert 'shuffled' not in result['densities']

    def test_horizon_report(self, two_block_spec):
        panel = gen_factor_panel(two_block_spec).panel
        corr = pearson_matrix(panel)
        dissim = to_dissimilarity(corr)
        graphs = {FilterKind.TMFG: build_tmfg(dissim, corr), 'MST': build_mst(dissim, corr)}
        envelope = shuffle_null(panel, shuffles=10, seed=1, retain_samples=True)
        report = build_horizon_report(panel, corr, graphs, panel.sectors, envelope=envelope)

        assert list(report.graph_stats) == ['MST', 'TMFG']
        assert report.mst_stats.edge_count == 5
        assert report.tmfg_stats.edge_count == 12
        assert report.mst_stats.avg_shortest_path >= 1.0
        assert report.significance.total_links == 15
        assert report.pairwise.count == 15

        payload = report.to_dict()
        assert payload['graphs']['TMFG']['triangle_multiplicity'] == 4 * payload['graphs']['TMFG']['four_cliques']
        assert 'shuffled' in payload['distributions']['densities']
        json.dumps(payload)
