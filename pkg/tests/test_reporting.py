import networkx as nx
import pytest

from errors import ExportError, IncompleteManifest, UnsupportedFormat
from filtering import FilteredEdge, FilteredGraph, FilterKind, build_tmfg
from manifest import HorizonArtifacts, RunManifest
from market_data import SectorTaxonomy
from reporting import export_graph, hub_symbols, read_dot_edges, report_tables, sector_color


def negative_pair():
    """Four coins, one negative link between BTC and USDT."""
    edges = [FilteredEdge(0, 1, 0.8, 0.36), FilteredEdge(0, 2, -0.5, 0.75), FilteredEdge(2, 3, 0.9, 0.19)]
    return FilteredGraph(FilterKind.MST, ['BTC', 'ETH', 'USDT', 'USDC'], edges)


def star(n=6):
    symbols = [f"v{k}" for k in range(n)]
    return FilteredGraph(FilterKind.MST, symbols, [FilteredEdge(0, k, 0.4, 0.84) for k in range(1, n)])


TAXONOMY = SectorTaxonomy({'BTC': 'currencies', 'ETH': 'currencies', 'USDT': 'stablecoins',
                           'USDC': 'stablecoins'})


class TestExport:
    def test_negative_edge_dot(self, tmp_path):
        path = export_graph(negative_pair(), TAXONOMY, 'dot', str(tmp_path / 'g.dot'))
        text = open(path, encoding='utf-8').read()
        assert text.count('style=dashed') == 1
        assert text.count('negative=true') == 1
        negative_line = next(line for line in text.splitlines() if '"BTC" -- "USDT"' in line)
        assert 'style=dashed' in negative_line and 'color=red' in negative_line
        assert 'sector="stablecoins"' in text

    def test_singleton_sector_pooled(self, tmp_path):
        graph = FilteredGraph(FilterKind.MST, ['BTC', 'USDT'], [FilteredEdge(0, 1, -0.5, 0.75)])
        path = export_graph(graph, TAXONOMY, 'dot', str(tmp_path / 'g.dot'))
        text = open(path, encoding='utf-8').read()
        assert text.count('sector="other"') == 2
        assert 'style=dashed' in text

    def test_negative_edge_graphml(self, tmp_path):
        path = export_graph(negative_pair(), TAXONOMY, 'graphml', str(tmp_path / 'g.graphml'), horizon_s=15)
        graph = nx.read_graphml(path)
        attrs = graph.edges['BTC', 'USDT']
        assert attrs['style'] == 'dashed'
        assert attrs['correlation'] == -0.5
        assert graph.edges['BTC', 'ETH']['style'] == 'solid'
        assert graph.nodes['BTC']['sector'] == 'currencies'
        assert graph.graph['horizon'] == '15'

    def test_positive_edge_solid(self, tmp_path):
        path = export_graph(star(3), SectorTaxonomy(), 'dot', str(tmp_path / 'g.dot'))
        text = open(path, encoding='utf-8').read()
        assert 'style=dashed' not in text
        assert text.count('style=solid') == 2

    def test_star_center_is_only_hub(self):
        assert hub_symbols(star(6)) == {'v0'}

    def test_hub_labels_in_dot(self, tmp_path):
        path = export_graph(star(6), SectorTaxonomy(), 'dot', str(tmp_path / 'g.dot'))
        text = open(path, encoding='utf-8').read()
        assert text.count('hub=true') == 1
        assert '"v0" [' in text and 'label="v0"' in text

    def test_dot_reads_back(self, random_matrices, tmp_path):
        corr, dissim = random_matrices(10, 3)
        graph = build_tmfg(dissim, corr)
        path = export_graph(graph, SectorTaxonomy(), 'dot', str(tmp_path / 'tmfg.dot'))
        assert read_dot_edges(path) == graph.symbol_edge_set()

    def test_quoted_symbols(self, tmp_path):
        graph = FilteredGraph(FilterKind.MST, ['A"B', 'C\\D'], [FilteredEdge(0, 1, 0.3, 0.91)])
        path = export_graph(graph, SectorTaxonomy(), 'dot', str(tmp_path / 'g.dot'))
        assert read_dot_edges(path) == {('A"B', 'C\\D')}

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(ExportError):
            export_graph(negative_pair(), TAXONOMY, 'dot', str(tmp_path / 'missing' / 'g.dot'))

    def test_unknown_format(self, tmp_path):
        with pytest.raises(UnsupportedFormat):
            export_graph(negative_pair(), TAXONOMY, 'svg', str(tmp_path / 'g.svg'))


class TestColors:
    def test_known_sector(self):
        assert sector_color('Smart-Contract Platforms') == 'green'

    def test_unknown_sector_uses_other(self):
        assert sector_color('memecoins') == sector_color('other')


class TestTables:
    def test_incomplete_run(self, tmp_path):
        manifest = RunManifest(str(tmp_path), {'filters': ['MST']}, 1,
                               horizons=[HorizonArtifacts(15, report='h15s/report.json')])
        with pytest.raises(IncompleteManifest):
            report_tables(manifest)

    def test_no_filters(self, tmp_path):
        manifest = RunManifest(str(tmp_path), {'filters': []}, 1, complete=True,
                               horizons=[HorizonArtifacts(15, report='h15s/report.json')])
        with pytest.raises(IncompleteManifest):
            report_tables(manifest)

    def test_missing_report(self, tmp_path):
        manifest = RunManifest(str(tmp_path), {'filters': ['MST'], 'table_percentiles': [25, 75]}, 1,
                               complete=True, horizons=[HorizonArtifacts(15, report='h15s/report.json')])
        with pytest.raises(IncompleteManifest):
            report_tables(manifest)
