"""
Synthetic return data with known ground truth.

Two generators: a block one-factor model with closed-form intra-block
correlation, and an asynchronous price-adjustment model where each asset
only catches up with a latent correlated price at random ticks, which
depresses measured correlation at fine horizons.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import yaml

from errors import InvalidSpec, NonDivisibleHorizon
from market_data import OHLCV_COLUMNS, BarSeries, ReturnPanel, SectorTaxonomy, write_ohlcv, write_taxonomy

logger = logging.getLogger(__name__)

SYNTH_START = pd.Timestamp('2022-01-01T00:00:00Z')
START_PRICE = 100.0
TICK_VOLATILITY = 1e-3
TAXONOMY_FILE = 'taxonomy.csv'


@dataclass
class FactorModelSpec:
    n_assets: int
    blocks: List[Tuple[int, float]]
    idiosyncratic_sigma: float
    t_len: int
    seed: int
    horizon_s: int = 15

    def validate(self) -> None:
        if self.n_assets < 2:
            raise InvalidSpec(f"n_assets must be at least 2, got {self.n_assets}")
        if not self.blocks:
            raise InvalidSpec('At least one block is required')
        if sum(count for count, _ in self.blocks) != self.n_assets:
            raise InvalidSpec(f"Block sizes {[c for c, _ in self.blocks]} do not sum to {self.n_assets}")
        for count, beta in self.blocks:
            if count < 1:
                raise InvalidSpec(f"Block size must be positive, got {count}")
            if not 0.0 <= beta <= 1.0:
                raise InvalidSpec(f"Block loading {beta} outside [0, 1]")
        if not self.idiosyncratic_sigma > 0:
            raise InvalidSpec('idiosyncratic_sigma must be positive')
        if self.t_len < 3:
            raise InvalidSpec(f"t_len must be at least 3, got {self.t_len}")
        if self.horizon_s <= 0:
            raise InvalidSpec('horizon_s must be positive')


@dataclass
class AsyncModelSpec:
    n_assets: int
    latent_corr: float
    update_probability_per_tick: float
    base_tick_s: int
    t_len_ticks: int
    seed: int

    def validate(self) -> None:
        if self.n_assets < 2:
            raise InvalidSpec(f"n_assets must be at least 2, got {self.n_assets}")
        if not 0.0 <= self.latent_corr <= 1.0:
            raise InvalidSpec(f"latent_corr {self.latent_corr} outside [0, 1] for a one-factor latent process")
        if not 0.0 < self.update_probability_per_tick <= 1.0:
            raise InvalidSpec(f"update_probability_per_tick {self.update_probability_per_tick} outside (0, 1]")
        if self.base_tick_s <= 0:
            raise InvalidSpec('base_tick_s must be positive')
        if self.t_len_ticks < 4:
            raise InvalidSpec(f"t_len_ticks must be at least 4, got {self.t_len_ticks}")


@dataclass
class FactorPanel:
    """Generated panel with the correlation each block should show."""
    panel: ReturnPanel
    block_of: List[int]
    theoretical_rho: List[float] = field(default_factory=list)

    def block_members(self, block: int) -> List[str]:
        return [s for s, b in zip(self.panel.symbols, self.block_of) if b == block]


def asset_symbols(n_assets: int) -> List[str]:
    width = max(2, len(str(n_assets - 1)))
    return [f"S{i:0{width}d}" for i in range(n_assets)]


def theoretical_correlation(beta: float, sigma: float) -> float:
    return beta ** 2 / (beta ** 2 + sigma ** 2)


def gen_factor_panel(spec: FactorModelSpec) -> FactorPanel:
    """Returns beta_b f_b(t) + sigma e_i(t) for asset i in block b.

    Factors and noise are independent standard normals drawn from one
    generator seeded with spec.seed.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    block_of = np.repeat(np.arange(len(spec.blocks)), [count for count, _ in spec.blocks])
    betas = np.array([beta for _, beta in spec.blocks])[block_of]

    factors = rng.standard_normal((len(spec.blocks), spec.t_len))
    noise = rng.standard_normal((spec.n_assets, spec.t_len))
    returns = betas[:, None] * factors[block_of] + spec.idiosyncratic_sigma * noise

    symbols = asset_symbols(spec.n_assets)
    taxonomy = SectorTaxonomy({s: f"block{b}" for s, b in zip(symbols, block_of)})
    timestamps = pd.date_range(SYNTH_START, periods=spec.t_len, freq=f"{spec.horizon_s}s")
    panel = ReturnPanel(spec.horizon_s, symbols, returns, taxonomy, timestamps)
    rho = [theoretical_correlation(beta, spec.idiosyncratic_sigma) for _, beta in spec.blocks]
    logger.debug(f"Factor panel {spec.n_assets}x{spec.t_len}, intra-block rho {rho}")
    return FactorPanel(panel, block_of.tolist(), rho)


def _async_paths(spec: AsyncModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Latent and observed log-price paths, n x t_len_ticks.

    The latent path and the update draws come from separate child seeds,
    so changing the update probability keeps the latent path intact.
    """
    latent_seq, update_seq = np.random.SeedSequence(spec.seed).spawn(2)
    latent_rng = np.random.default_rng(latent_seq)
    update_rng = np.random.default_rng(update_seq)
    n, ticks = spec.n_assets, spec.t_len_ticks

    common = latent_rng.standard_normal(ticks)
    own = latent_rng.standard_normal((n, ticks))
    increments = np.sqrt(spec.latent_corr) * common + np.sqrt(1.0 - spec.latent_corr) * own
    latent = np.cumsum(TICK_VOLATILITY * increments, axis=1)

    updates = update_rng.random((n, ticks)) < spec.update_probability_per_tick
    updates[:, 0] = True
    tick_index = np.broadcast_to(np.arange(ticks), (n, ticks))
    last_update = np.maximum.accumulate(np.where(updates, tick_index, 0), axis=1)
    observed = np.take_along_axis(latent, last_update, axis=1)
    return latent, observed


def gen_async_panel(spec: AsyncModelSpec, horizons: Sequence[int]) -> Dict[int, ReturnPanel]:
    """Observed prices sampled at the end of every horizon bin and differenced.

    Args:
        spec: model parameters
        horizons: sampling horizons in seconds, multiples of spec.base_tick_s

    Returns:
        Dict[int, ReturnPanel]: one panel per horizon
    """
    spec.validate()
    if not horizons:
        raise InvalidSpec('At least one horizon is required')
    for horizon in horizons:
        if horizon <= 0 or horizon % spec.base_tick_s != 0:
            raise NonDivisibleHorizon(f"Horizon {horizon}s is not a multiple of the {spec.base_tick_s}s tick")
        if spec.t_len_ticks // (horizon // spec.base_tick_s) < 4:
            raise InvalidSpec(f"{spec.t_len_ticks} ticks give fewer than 4 bins at {horizon}s")

    _, observed = _async_paths(spec)
    symbols = asset_symbols(spec.n_assets)
    taxonomy = SectorTaxonomy({s: 'synthetic' for s in symbols})

    panels = {}
    for horizon in sorted(set(horizons)):
        step = horizon // spec.base_tick_s
        bins = spec.t_len_ticks // step
        closes = observed[:, step - 1:bins * step:step]
        timestamps = pd.date_range(SYNTH_START, periods=bins, freq=f"{horizon}s")[1:]
        panels[horizon] = ReturnPanel(horizon, symbols, np.diff(closes, axis=1), taxonomy, timestamps)
        logger.debug(f"Async panel at {horizon}s: {bins - 1} returns per asset")
    return panels


def gen_price_bars(symbols: Sequence[str], log_prices: np.ndarray, horizon_s: int,
                   volumes: Optional[np.ndarray] = None,
                   start: pd.Timestamp = SYNTH_START) -> Dict[str, BarSeries]:
    """OHLCV bars whose close follows START_PRICE * exp(log_prices).

    Each bar opens at the previous close; high and low bracket open and close.
    """
    closes = START_PRICE * np.exp(np.asarray(log_prices, dtype=float))
    index = pd.date_range(start, periods=closes.shape[1], freq=f"{horizon_s}s", name='timestamp')
    result = {}
    for row, symbol in enumerate(symbols):
        close = closes[row]
        open_ = np.concatenate([[START_PRICE], close[:-1]])
        volume = np.ones_like(close) if volumes is None else np.asarray(volumes[row], dtype=float)
        frame = pd.DataFrame({
            'open': open_,
            'high': np.maximum(open_, close),
            'low': np.minimum(open_, close),
            'close': close,
            'volume': volume,
        }, index=index)
        result[symbol] = BarSeries(symbol, horizon_s, frame[OHLCV_COLUMNS[1:]])
    return result


def async_price_bars(spec: AsyncModelSpec) -> Dict[str, BarSeries]:
    """Observed prices at the base tick, volume 1 on ticks where the asset updated."""
    spec.validate()
    _, observed = _async_paths(spec)
    changed = np.concatenate([np.ones((spec.n_assets, 1)), (np.diff(observed, axis=1) != 0)], axis=1)
    return gen_price_bars(asset_symbols(spec.n_assets), observed, spec.base_tick_s, volumes=changed)


def factor_price_bars(result: FactorPanel) -> Dict[str, BarSeries]:
    panel = result.panel
    return gen_price_bars(panel.symbols, np.cumsum(panel.returns, axis=1), panel.horizon_s)


def write_panel_csvs(bars: Dict[str, BarSeries], taxonomy: SectorTaxonomy, out_dir: str) -> List[str]:
    """Write one ingestion CSV per symbol plus the taxonomy file."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for symbol in sorted(bars):
        path = os.path.join(out_dir, f"{symbol}.csv")
        write_ohlcv(bars[symbol], path)
        written.append(path)
    taxonomy_path = os.path.join(out_dir, TAXONOMY_FILE)
    write_taxonomy(taxonomy.restrict(sorted(bars)), taxonomy_path)
    written.append(taxonomy_path)
    logger.info(f"Wrote {len(bars)} synthetic series to {out_dir}")
    return written


def load_synth_spec(path: str) -> Union[FactorModelSpec, AsyncModelSpec]:
    """Read a YAML generator spec; `model` selects factor or async."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise InvalidSpec(f"Cannot read synth spec {path}: {e}") from e
    return parse_synth_spec(raw)


def parse_synth_spec(raw: Any) -> Union[FactorModelSpec, AsyncModelSpec]:
    if not isinstance(raw, dict):
        raise InvalidSpec('Synth spec must be a mapping')
    params = dict(raw)
    model = str(params.pop('model', 'factor')).lower()
    try:
        if model == 'factor':
            params['blocks'] = [(int(count), float(beta)) for count, beta in params.get('blocks', [])]
            spec: Union[FactorModelSpec, AsyncModelSpec] = FactorModelSpec(**params)
        elif model == 'async':
            spec = AsyncModelSpec(**params)
        else:
            raise InvalidSpec(f"Unknown synth model '{model}', expected factor or async")
    except TypeError as e:
        raise InvalidSpec(f"Bad synth spec fields: {e}") from e
    spec.validate()
    return spec


def synthesize_to_dir(spec: Union[FactorModelSpec, AsyncModelSpec], out_dir: str) -> List[str]:
    """Generate price bars for a spec and write them in the ingestion format."""
    if isinstance(spec, FactorModelSpec):
        result = gen_factor_panel(spec)
        return write_panel_csvs(factor_price_bars(result), result.panel.sectors, out_dir)
    bars = async_price_bars(spec)
    taxonomy = SectorTaxonomy({s: 'synthetic' for s in bars})
    return write_panel_csvs(bars, taxonomy, out_dir)
