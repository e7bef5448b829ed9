import os

import numpy as np
import pytest

from correlation import pairwise_summary, pearson_matrix
from errors import InvalidSpec, NonDivisibleHorizon
from market_data import load_symbol_series, load_taxonomy
from synth import (
    AsyncModelSpec, FactorModelSpec, async_price_bars, factor_price_bars, gen_async_panel, gen_factor_panel,
    load_synth_spec, parse_synth_spec, synthesize_to_dir, write_panel_csvs,
)

EPPS_HORIZONS = [15, 60, 900, 3600]


def intra_block_rhos(result, block):
    members = result.block_members(block)
    corr = pearson_matrix(result.panel).subset(members)
    return corr.upper_triangle()


def mean_rho(panel):
    return pairwise_summary(pearson_matrix(panel)).mean


class TestFactorModel:
    def test_no_loading_means_no_correlation(self):
        t_len = 5000
        result = gen_factor_panel(FactorModelSpec(4, [(4, 0.0)], 1.0, t_len, seed=1))
        assert np.all(np.abs(intra_block_rhos(result, 0)) < 4 / np.sqrt(t_len))

    def test_factor_dominates(self):
        result = gen_factor_panel(FactorModelSpec(3, [(3, 1.0)], 1e-6, 500, seed=2))
        assert np.all(intra_block_rhos(result, 0) > 0.999)

    def test_closed_form_target(self):
        result = gen_factor_panel(FactorModelSpec(6, [(3, 0.8), (3, 0.8)], 0.6, 20_000, seed=3))
        assert result.theoretical_rho == [pytest.approx(0.64), pytest.approx(0.64)]
        for block in (0, 1):
            assert intra_block_rhos(result, block).mean() == pytest.approx(0.64, abs=0.02)

    def test_blocks_independent(self):
        t_len = 5000
        result = gen_factor_panel(FactorModelSpec(6, [(3, 0.8), (3, 0.8)], 0.6, t_len, seed=4))
        corr = pearson_matrix(result.panel)
        inter = corr.values[np.ix_([0, 1, 2], [3, 4, 5])]
        assert np.all(np.abs(inter) < 4 / np.sqrt(t_len))

    def test_reproducible(self, two_block_spec):
        a = gen_factor_panel(two_block_spec).panel.returns
        b = gen_factor_panel(two_block_spec).panel.returns
        assert np.array_equal(a, b)

    def test_sectors_follow_blocks(self, two_block_spec):
        result = gen_factor_panel(two_block_spec)
        assert result.block_of == [0, 0, 0, 1, 1, 1]
        assert result.panel.sectors.sector_of('S04') == 'block1'

    @pytest.mark.parametrize('kwargs', [
        dict(n_assets=4, blocks=[(3, 0.5)], idiosyncratic_sigma=1.0, t_len=100, seed=0),
        dict(n_assets=2, blocks=[(2, 1.5)], idiosyncratic_sigma=1.0, t_len=100, seed=0),
        dict(n_assets=2, blocks=[(2, 0.5)], idiosyncratic_sigma=0.0, t_len=100, seed=0),
        dict(n_assets=2, blocks=[], idiosyncratic_sigma=1.0, t_len=100, seed=0),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidSpec):
            gen_factor_panel(FactorModelSpec(**kwargs))


class TestAsyncModel:
    def test_uncorrelated_latent(self):
        panels = gen_async_panel(AsyncModelSpec(4, 0.0, 0.3, 15, 100_000, seed=5), [15, 60])
        for panel in panels.values():
            assert abs(mean_rho(panel)) < 0.02

    @pytest.mark.slow
    def test_no_staleness_is_flat(self):
        panels = gen_async_panel(AsyncModelSpec(4, 0.6, 1.0, 15, 1_200_000, seed=6), EPPS_HORIZONS)
        for panel in panels.values():
            assert mean_rho(panel) == pytest.approx(0.6, abs=0.02)

    @pytest.mark.slow
    def test_staleness_depresses_fine_horizons(self):
        panels = gen_async_panel(AsyncModelSpec(4, 0.6, 0.1, 15, 1_200_000, seed=6), EPPS_HORIZONS)
        means = [mean_rho(panels[h]) for h in EPPS_HORIZONS]
        assert all(a < b for a, b in zip(means, means[1:]))
        assert means[-1] == pytest.approx(0.6, abs=0.05)

    def test_returns_per_horizon(self):
        panels = gen_async_panel(AsyncModelSpec(3, 0.5, 0.5, 15, 1000, seed=7), [15, 60])
        assert sorted(panels) == [15, 60]
        assert panels[15].t_len == 999
        assert panels[60].t_len == 249
        assert panels[60].timestamps[0].value // 10**9 - panels[15].timestamps[0].value // 10**9 == 45

    def test_reproducible(self):
        spec = AsyncModelSpec(3, 0.5, 0.2, 15, 5000, seed=8)
        a = gen_async_panel(spec, [60])[60].returns
        b = gen_async_panel(spec, [60])[60].returns
        assert np.array_equal(a, b)

    def test_non_divisible_horizon(self):
        with pytest.raises(NonDivisibleHorizon):
            gen_async_panel(AsyncModelSpec(3, 0.5, 0.5, 15, 1000, seed=0), [40])

    def test_too_few_bins(self):
        with pytest.raises(InvalidSpec):
            gen_async_panel(AsyncModelSpec(3, 0.5, 0.5, 15, 100, seed=0), [900])

    @pytest.mark.parametrize('latent_corr, probability', [(-0.2, 0.5), (1.2, 0.5), (0.5, 0.0), (0.5, 1.5)])
    def test_invalid(self, latent_corr, probability):
        with pytest.raises(InvalidSpec):
            gen_async_panel(AsyncModelSpec(3, latent_corr, probability, 15, 1000, seed=0), [15])

    def test_stale_ticks_have_no_volume(self):
        bars = async_price_bars(AsyncModelSpec(2, 0.5, 0.3, 15, 200, seed=9))
        frame = bars['S00'].bars
        moved = frame['close'].diff().fillna(1.0) != 0
        assert (frame['volume'][~moved] == 0).all()


class TestOutput:
    def test_csvs_load_back(self, two_block_spec, tmp_path):
        result = gen_factor_panel(two_block_spec)
        bars = factor_price_bars(result)
        written = write_panel_csvs(bars, result.panel.sectors, str(tmp_path))
        assert len(written) == 7
        loaded = load_symbol_series(str(tmp_path), 'S02', 15)
        np.testing.assert_allclose(loaded.closes, bars['S02'].closes, rtol=1e-15)
        taxonomy = load_taxonomy(os.path.join(str(tmp_path), 'taxonomy.csv'))
        assert taxonomy.raw_sector('S05') == 'block1'

    def test_prices_reproduce_returns(self, two_block_spec):
        result = gen_factor_panel(two_block_spec)
        closes = factor_price_bars(result)['S00'].closes
        np.testing.assert_allclose(np.diff(np.log(closes)), result.panel.returns[0, 1:], atol=1e-12)

    def test_parse_factor_spec(self):
        spec = parse_synth_spec({'model': 'factor', 'n_assets': 4, 'blocks': [[2, 0.7], [2, 0.3]],
                                 'idiosyncratic_sigma': 0.5, 't_len': 100, 'seed': 3})
        assert isinstance(spec, FactorModelSpec)
        assert spec.blocks == [(2, 0.7), (2, 0.3)]

    def test_parse_async_spec(self, tmp_path):
        path = tmp_path / 'synth.yaml'
        path.write_text('model: async\nn_assets: 3\nlatent_corr: 0.6\nupdate_probability_per_tick: 0.1\n'
                        'base_tick_s: 15\nt_len_ticks: 400\nseed: 1\n', encoding='utf-8')
        spec = load_synth_spec(str(path))
        assert isinstance(spec, AsyncModelSpec)
        written = synthesize_to_dir(spec, str(tmp_path / 'out'))
        assert len(written) == 4

    @pytest.mark.parametrize('raw', [
        [1, 2],
        {'model': 'garch'},
        {'model': 'factor', 'n_assets': 2, 'blocks': [[2, 0.5]], 'idiosyncratic_sigma': 1.0, 't_len': 10,
         'seed': 0, 'colour': 'red'},
    ])
    def test_parse_rejects(self, raw):
        with pytest.raises(InvalidSpec):
            parse_synth_spec(raw)
