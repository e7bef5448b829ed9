"""Shared fixtures for the test suite."""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
import pytest

from correlation import CorrelationMatrix, DissimilarityKind, DissimilarityMatrix, pearson_matrix, to_dissimilarity
from market_data import BarSeries, ReturnPanel, SectorTaxonomy
from synth import FactorModelSpec, factor_price_bars, gen_factor_panel, write_panel_csvs

# 2021-01-01T00:00:00Z, on every grid used in the tests
GRID_ORIGIN = 1_609_459_200


@pytest.fixture(autouse=True)
def quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ('NETFILTER_OUTPUT_DIR', 'NETFILTER_MASTER_SEED', 'NETFILTER_ENV'):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def make_series() -> Callable[..., BarSeries]:
    """Build a BarSeries from closes placed at given grid offsets."""
    def build(closes: Sequence[float], horizon_s: int = 15, offsets: Optional[Sequence[int]] = None,
              volumes: Optional[Sequence[float]] = None, highs: Optional[Sequence[float]] = None,
              symbol: str = 'AAA') -> BarSeries:
        closes = np.asarray(closes, dtype=float)
        if offsets is None:
            offsets = [k * horizon_s for k in range(len(closes))]
        index = pd.to_datetime([GRID_ORIGIN + o for o in offsets], unit='s', utc=True)
        index.name = 'timestamp'
        volume = np.ones_like(closes) if volumes is None else np.asarray(volumes, dtype=float)
        high = closes if highs is None else np.asarray(highs, dtype=float)
        frame = pd.DataFrame({'open': closes, 'high': high, 'low': np.minimum(closes, high),
                              'close': closes, 'volume': volume}, index=index)
        return BarSeries(symbol, horizon_s, frame)
    return build


@pytest.fixture
def make_panel() -> Callable[..., ReturnPanel]:
    def build(rows: Sequence[Sequence[float]], symbols: Optional[List[str]] = None,
              horizon_s: int = 15, sectors: Optional[dict] = None) -> ReturnPanel:
        rows = np.asarray(rows, dtype=float)
        names = symbols or [f"S{i:02d}" for i in range(rows.shape[0])]
        return ReturnPanel(horizon_s, names, rows, SectorTaxonomy(sectors or {}))
    return build


@pytest.fixture
def random_matrices() -> Callable[[int, int], tuple]:
    """Correlation and Power dissimilarity of a random Gaussian panel."""
    def build(n: int, seed: int, t_len: Optional[int] = None) -> tuple:
        rng = np.random.default_rng(seed)
        returns = rng.standard_normal((n, t_len or max(3 * n, 20)))
        panel = ReturnPanel(15, [f"S{i:02d}" for i in range(n)], returns)
        corr = pearson_matrix(panel)
        return corr, to_dissimilarity(corr)
    return build


@pytest.fixture
def matrices_from_dissimilarity() -> Callable[[np.ndarray], tuple]:
    """Wrap a hand-written dissimilarity matrix together with a matching correlation."""
    def build(values: np.ndarray) -> tuple:
        values = np.asarray(values, dtype=float)
        symbols = [f"S{i:02d}" for i in range(values.shape[0])]
        corr_values = np.sqrt(np.clip(1.0 - values, 0.0, 1.0))
        np.fill_diagonal(corr_values, 1.0)
        return (CorrelationMatrix(symbols, corr_values, 10),
                DissimilarityMatrix(symbols, values, DissimilarityKind.POWER))
    return build


@pytest.fixture
def two_block_spec() -> FactorModelSpec:
    return FactorModelSpec(n_assets=6, blocks=[(3, 0.8), (3, 0.8)], idiosyncratic_sigma=0.6,
                           t_len=400, seed=7)


@pytest.fixture
def synth_data_dir(tmp_path, two_block_spec) -> str:
    """Factor-model OHLCV files plus taxonomy in the ingestion format."""
    data_dir = tmp_path / 'data'
    result = gen_factor_panel(two_block_spec)
    write_panel_csvs(factor_price_bars(result), result.panel.sectors, str(data_dir))
    return str(data_dir)
