"""
OHLCV ingestion for the correlation network pipeline.

Reads per-symbol bar files, resamples them onto coarser epoch-anchored
grids, repairs missing bins, builds synchronized log-return panels and
runs the stationarity check on each return series.
"""

import csv
import io
import os
import math
import logging
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from statsmodels.tsa.stattools import adfuller

from errors import (
    AllMissing, DegenerateSeries, EmptyInput, InsufficientSamples,
    InvalidPanel, MalformedRow, MissingData, NonDivisibleHorizon, NonMonotonicTimestamps,
    NonPositivePrice, OhlcInconsistent, TooShort,
)

logger = logging.getLogger(__name__)

OHLCV_COLUMNS = ['timestamp', 'open', 'high', 'low', 'close', 'volume']
PRICE_COLUMNS = ['open', 'high', 'low', 'close']
TAXONOMY_COLUMNS = ['symbol', 'sector']
TIMESTAMP_FORMAT = '%Y-%m-%dT%H:%M:%SZ'
OTHER_SECTOR = 'other'


@dataclass(frozen=True)
class OhlcvBar:
    """One time bin; the timestamp marks the bin start."""
    timestamp: pd.Timestamp
    open: float
    high: float
    low: float
    close: float
    volume: float

    def is_consistent(self) -> bool:
        return (self.low <= min(self.open, self.close)
                and self.high >= max(self.open, self.close)
                and self.volume >= 0)


@dataclass
class BarSeries:
    """Time-ordered bars of one symbol on a fixed grid.

    Bars live in a DataFrame indexed by UTC bin start. A row whose close is
    NaN is a gap left by resampling; fill_gaps replaces it.
    """
    symbol: str
    horizon_s: int
    bars: pd.DataFrame

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def closes(self) -> np.ndarray:
        return self.bars['close'].to_numpy(dtype=float)

    @property
    def gap_count(self) -> int:
        return int(self.bars['close'].isna().sum())

    def iter_bars(self) -> Iterator[OhlcvBar]:
        for ts, row in self.bars.dropna(subset=['close']).iterrows():
            yield OhlcvBar(ts, row['open'], row['high'], row['low'], row['close'], row['volume'])


@dataclass
class SectorTaxonomy:
    """Symbol to sector mapping.

    Sectors represented by a single symbol are reported under the shared
    'other' group, matching how small sectors are pooled in the analysis.
    """
    sectors: Dict[str, str] = field(default_factory=dict)

    def raw_sector(self, symbol: str) -> str:
        return self.sectors.get(symbol, OTHER_SECTOR)

    def groups(self, universe: Optional[Sequence[str]] = None) -> Dict[str, List[str]]:
        """Sector name to sorted member list, singletons pooled into 'other'."""
        symbols = list(universe) if universe is not None else list(self.sectors)
        raw: Dict[str, List[str]] = {}
        for symbol in symbols:
            raw.setdefault(self.raw_sector(symbol), []).append(symbol)

        grouped: Dict[str, List[str]] = {}
        for sector, members in raw.items():
            target = sector if len(members) > 1 else OTHER_SECTOR
            grouped.setdefault(target, []).extend(members)
        return {sector: sorted(members) for sector, members in sorted(grouped.items())}

    def sector_of(self, symbol: str, universe: Optional[Sequence[str]] = None) -> str:
        for sector, members in self.groups(universe).items():
            if symbol in members:
                return sector
        return OTHER_SECTOR

    def restrict(self, symbols: Sequence[str]) -> 'SectorTaxonomy':
        return SectorTaxonomy({s: self.raw_sector(s) for s in symbols})


@dataclass
class ReturnPanel:
    """Synchronized log-returns, one row per symbol."""
    horizon_s: int
    symbols: List[str]
    returns: np.ndarray
    sectors: SectorTaxonomy = field(default_factory=SectorTaxonomy)
    timestamps: Optional[pd.DatetimeIndex] = None

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.returns.ndim != 2:
            raise InvalidPanel(f"Returns must be a 2-d array, got shape {self.returns.shape}")
        if self.returns.shape[0] != len(self.symbols):
            raise InvalidPanel(f"{len(self.symbols)} symbols but {self.returns.shape[0]} return rows")
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidPanel('Duplicate symbols in panel')
        if self.returns.shape[1] < 2:
            raise TooShort(f"Panel needs at least 2 observations, got {self.returns.shape[1]}")
        if not np.isfinite(self.returns).all():
            raise InvalidPanel('Panel contains non-finite returns')

    @property
    def n(self) -> int:
        return self.returns.shape[0]

    @property
    def t_len(self) -> int:
        return self.returns.shape[1]

    def with_returns(self, returns: np.ndarray) -> 'ReturnPanel':
        """Same labels, different observations (used by resampling schemes)."""
        return ReturnPanel(self.horizon_s, list(self.symbols), returns, self.sectors)

    def reorder(self, symbols: Sequence[str]) -> 'ReturnPanel':
        index = [self.symbols.index(s) for s in symbols]
        return ReturnPanel(self.horizon_s, list(symbols), self.returns[index], self.sectors, self.timestamps)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.returns.T, columns=self.symbols, index=self.timestamps)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    lag_order: int
    critical_1pct: float
    critical_5pct: float
    critical_10pct: float
    reject_unit_root_5pct: bool
    p_value: float = float('nan')
    nobs: int = 0


def _scan_records(text: str, columns: List[str], path: Optional[str]) -> List[int]:
    """File line of every data record.

    Checks the header, the field count of each record and blank lines
    between records, so later errors can name the line they came from.
    Trailing blank lines are ignored.
    """
    reader = csv.reader(io.StringIO(text, newline=''))
    lines: List[int] = []
    blank_line: Optional[int] = None
    header_seen = False
    for record in reader:
        line = reader.line_num
        if not record:
            if blank_line is None:
                blank_line = line
            continue
        if blank_line is not None:
            raise MalformedRow('Blank line between records', path=path, row=blank_line, column=columns[0])
        if not header_seen:
            header = [c.strip() for c in record]
            if header != columns:
                first_bad = next((k for k, name in enumerate(header[:len(columns)]) if name != columns[k]),
                                 min(len(header), len(columns) - 1))
                raise MalformedRow(f"Header must be {','.join(columns)}, got {','.join(header)}",
                                   path=path, row=line, column=columns[first_bad])
            header_seen = True
            continue
        if len(record) != len(columns):
            column = columns[len(record)] if len(record) < len(columns) else columns[-1]
            raise MalformedRow(f"Expected {len(columns)} fields, got {len(record)}",
                               path=path, row=line, column=column)
        lines.append(line)
    if not header_seen:
        raise EmptyInput('Input has no header and no rows', path=path)
    if not lines:
        raise EmptyInput('Input has a header but no data rows', path=path)
    return lines


def _decode(raw: bytes, path: Optional[str]) -> str:
    try:
        return raw.decode('utf-8-sig')
    except UnicodeDecodeError as e:
        raise MalformedRow(f"Input is not UTF-8: {e.reason}", path=path,
                           row=raw[:e.start].count(b'\n') + 1) from e


def parse_ohlcv(source: Union[bytes, BinaryIO], symbol: str, horizon_s: int,
                path: Optional[str] = None) -> BarSeries:
    """Parse a `timestamp,open,high,low,close,volume` CSV into a BarSeries.

    Args:
        source: raw bytes or a binary stream
        symbol: asset identifier stored on the series
        horizon_s: seconds per bin, timestamps must sit on this grid
        path: file name used in error messages

    Returns:
        BarSeries: validated bars in file order
    """
    raw = source if isinstance(source, bytes) else source.read()
    text = _decode(raw, path)
    record_lines = _scan_records(text, OHLCV_COLUMNS, path)
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise MalformedRow(f"Cannot tokenize input: {e}", path=path) from e
    frame.columns = OHLCV_COLUMNS

    parsed = pd.DataFrame(index=frame.index)
    parsed['timestamp'] = pd.to_datetime(frame['timestamp'].str.strip(), utc=True,
                                         format='ISO8601', errors='coerce')
    for column in OHLCV_COLUMNS[1:]:
        parsed[column] = pd.to_numeric(frame[column].str.strip(), errors='coerce')

    bad = parsed.isna()
    numeric = OHLCV_COLUMNS[1:]
    bad[numeric] = bad[numeric] | ~np.isfinite(parsed[numeric].fillna(0.0))
    if bad.to_numpy().any():
        row_pos = int(np.flatnonzero(bad.to_numpy().any(axis=1))[0])
        column = bad.columns[bad.iloc[row_pos].to_numpy()][0]
        value = frame.iloc[row_pos][column]
        raise MalformedRow(f"Cannot parse value '{value}'", path=path,
                           row=record_lines[row_pos], column=column)

    # correctly rounded decimal conversion
    for column in numeric:
        parsed[column] = frame[column].str.strip().astype(float)

    stamps = parsed['timestamp']
    steps = stamps.diff().iloc[1:]
    non_increasing = np.flatnonzero((steps <= pd.Timedelta(0)).to_numpy())
    if non_increasing.size:
        row_pos = int(non_increasing[0]) + 1
        raise NonMonotonicTimestamps(f"Timestamp {stamps.iloc[row_pos]} does not follow {stamps.iloc[row_pos - 1]}",
                                     path=path, row=record_lines[row_pos], column='timestamp')

    since_epoch = stamps - pd.Timestamp(0, tz='UTC')
    off_grid = np.flatnonzero((since_epoch % pd.Timedelta(seconds=horizon_s) != pd.Timedelta(0)).to_numpy())
    if off_grid.size:
        row_pos = int(off_grid[0])
        raise MalformedRow(f"Timestamp {stamps.iloc[row_pos]} is not aligned to the {horizon_s}s grid",
                           path=path, row=record_lines[row_pos], column='timestamp')

    low_bad = parsed['low'] > parsed[['open', 'close']].min(axis=1)
    high_bad = parsed['high'] < parsed[['open', 'close']].max(axis=1)
    volume_bad = parsed['volume'] < 0
    for mask, column in ((low_bad, 'low'), (high_bad, 'high'), (volume_bad, 'volume')):
        hits = np.flatnonzero(mask.to_numpy())
        if hits.size:
            row_pos = int(hits[0])
            raise OhlcInconsistent(f"Bar violates {column} bound", path=path,
                                   row=record_lines[row_pos], column=column)

    bars = parsed.set_index('timestamp')[numeric]
    logger.debug(f"Parsed {len(bars)} bars for {symbol} at {horizon_s}s")
    return BarSeries(symbol, horizon_s, bars)


def write_ohlcv(series: BarSeries, target: Union[str, io.TextIOBase], decimals: Optional[int] = None) -> None:
    """Serialize the non-gap bars of a series in the ingestion CSV format."""
    valid = series.bars.dropna(subset=['close'])
    out = valid.reset_index()
    out.columns = OHLCV_COLUMNS
    out['timestamp'] = valid.index.strftime(TIMESTAMP_FORMAT)
    float_format = f"%.{decimals}f" if decimals is not None else None
    out.to_csv(target, index=False, float_format=float_format, lineterminator='\n')


def load_symbol_series(data_dir: str, symbol: str, horizon_s: int) -> BarSeries:
    """Read `<data_dir>/<symbol>.csv` at the base horizon."""
    path = os.path.join(data_dir, f"{symbol}.csv")
    if not os.path.exists(path):
        raise MissingData(symbol, horizon_s, reason=f"file {path} not found")
    with open(path, 'rb') as f:
        return parse_ohlcv(f, symbol, horizon_s, path=path)


def load_taxonomy(path: str) -> SectorTaxonomy:
    """Load a `symbol,sector` CSV."""
    try:
        with open(path, 'rb') as f:
            raw = f.read()
    except OSError as e:
        raise MissingData('taxonomy', reason=str(e)) from e
    text = _decode(raw, path)
    record_lines = _scan_records(text, TAXONOMY_COLUMNS, path)
    frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    frame.columns = TAXONOMY_COLUMNS

    sectors: Dict[str, str] = {}
    for row, symbol, sector in zip(record_lines, frame['symbol'], frame['sector']):
        symbol, sector = symbol.strip(), sector.strip()
        if not symbol:
            raise MalformedRow('Empty symbol', path=path, row=row, column='symbol')
        if not sector:
            raise MalformedRow('Empty sector', path=path, row=row, column='sector')
        if symbol in sectors:
            raise MalformedRow(f"Duplicate symbol {symbol}", path=path, row=row, column='symbol')
        sectors[symbol] = sector
    return SectorTaxonomy(sectors)


def write_taxonomy(taxonomy: SectorTaxonomy, path: str) -> None:
    frame = pd.DataFrame(sorted(taxonomy.sectors.items()), columns=TAXONOMY_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')


def resample(series: BarSeries, target_horizon_s: int) -> BarSeries:
    """Aggregate bars into epoch-anchored bins of target_horizon_s seconds.

    Bins without any source bar come out as NaN rows for fill_gaps.
    """
    if target_horizon_s <= 0 or target_horizon_s % series.horizon_s != 0:
        raise NonDivisibleHorizon(f"Target horizon {target_horizon_s}s is not a multiple of {series.horizon_s}s")
    if target_horizon_s == series.horizon_s:
        return BarSeries(series.symbol, series.horizon_s, series.bars.copy())

    valid = series.bars.dropna(subset=['close'])
    if valid.empty:
        raise AllMissing(f"{series.symbol} has no valid bars to resample")
    grouped = valid.resample(f"{target_horizon_s}s", origin='epoch', label='left', closed='left')
    bars = grouped.agg({'open': 'first', 'high': 'max', 'low': 'min', 'close': 'last', 'volume': 'sum'})
    bars.loc[bars['close'].isna(), 'volume'] = np.nan
    bars.index.name = 'timestamp'
    return BarSeries(series.symbol, target_horizon_s, bars[OHLCV_COLUMNS[1:]])


def fill_gaps(series: BarSeries) -> Tuple[BarSeries, int]:
    """Populate every grid slot between the first and last bar.

    A missing slot copies the close of the nearest valid bar in time; on a
    tie the earlier bar wins. Filled bars are flat with zero volume.

    Returns:
        Tuple[BarSeries, int]: repaired series and number of filled slots
    """
    bars = series.bars
    if bars.empty or not bars['close'].notna().any():
        raise AllMissing(f"{series.symbol} has no valid bar")

    grid = pd.date_range(bars.index.min(), bars.index.max(), freq=f"{series.horizon_s}s")
    full = bars.reindex(grid)
    valid = full['close'].notna()
    missing = ~valid
    filled_count = int(missing.sum())
    if filled_count == 0:
        full.index.name = 'timestamp'
        return BarSeries(series.symbol, series.horizon_s, full), 0

    stamps = pd.Series(grid, index=grid)
    prev_ts = stamps.where(valid).ffill()
    next_ts = stamps.where(valid).bfill()
    prev_close = full['close'].ffill()
    next_close = full['close'].bfill()
    use_prev = next_ts.isna() | (prev_ts.notna() & ((stamps - prev_ts) <= (next_ts - stamps)))
    nearest = prev_close.where(use_prev, next_close)

    for column in PRICE_COLUMNS:
        full.loc[missing, column] = nearest[missing]
    full.loc[missing, 'volume'] = 0.0
    full.index.name = 'timestamp'

    logger.warning(f"Filled {filled_count} missing {series.horizon_s}s bins for {series.symbol}")
    return BarSeries(series.symbol, series.horizon_s, full), filled_count


def series_at_horizon(base: BarSeries, horizon_s: int, fill_before_resample: bool = True) -> Tuple[BarSeries, int]:
    """Gap-free series at horizon_s, filled at the base grid first by default."""
    if fill_before_resample:
        base, filled = fill_gaps(base)
        coarse, extra = fill_gaps(resample(base, horizon_s))
        return coarse, filled + extra
    return fill_gaps(resample(base, horizon_s))


def log_returns(closes: Sequence[float], horizon_s: Optional[int] = None) -> np.ndarray:
    """ln p(t) - ln p(t-1) over consecutive grid steps."""
    prices = np.asarray(closes, dtype=float)
    if prices.size < 2:
        raise TooShort(f"Need at least 2 prices, got {prices.size}")
    if not np.isfinite(prices).all() or (prices <= 0).any():
        raise NonPositivePrice('Log-returns need strictly positive finite prices')
    return np.diff(np.log(prices))


def schwert_lag(t_len: int) -> int:
    return int(math.floor(12.0 * (t_len / 100.0) ** 0.25))


def adf_test(x: Sequence[float], lag_order: Optional[int] = None) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant and no trend.

    The statistic is the t-ratio of the lagged level in the regression of
    the first difference on a constant, the lagged level and lag_order
    lagged differences. Critical values come from MacKinnon's
    response surface.
    """
    series = np.asarray(x, dtype=float)
    lag = schwert_lag(series.size) if lag_order is None else int(lag_order)
    if lag < 0:
        raise InsufficientSamples('lag_order must be non-negative')
    if series.size < lag + 10:
        raise InsufficientSamples(f"ADF with {lag} lags needs at least {lag + 10} samples, got {series.size}")
    if not np.isfinite(series).all():
        raise DegenerateSeries('Series contains non-finite values')
    if np.ptp(series) == 0.0:
        raise DegenerateSeries('Series has zero variance')

    try:
        statistic, p_value, used_lag, nobs, critical = adfuller(series, maxlag=lag, regression='c', autolag=None)
    except (ValueError, np.linalg.LinAlgError) as e:
        raise InsufficientSamples(f"ADF regression failed: {e}") from e

    return AdfResult(
        statistic=float(statistic),
        lag_order=int(used_lag),
        critical_1pct=float(critical['1%']),
        critical_5pct=float(critical['5%']),
        critical_10pct=float(critical['10%']),
        reject_unit_root_5pct=bool(statistic < critical['5%']),
        p_value=float(p_value),
        nobs=int(nobs),
    )


def build_panel(series_by_symbol: Dict[str, BarSeries], taxonomy: SectorTaxonomy,
                symbols: Optional[Sequence[str]] = None) -> ReturnPanel:
    """Align gap-free series on their common window and take log-returns.

    Args:
        series_by_symbol: one gap-free BarSeries per symbol, same horizon
        taxonomy: sector labels carried by the panel
        symbols: row order, defaults to sorted symbol names

    Returns:
        ReturnPanel: n x (T-1) log-returns over the shared grid window
    """
    order = list(symbols) if symbols is not None else sorted(series_by_symbol)
    if not order:
        raise InvalidPanel('No symbols to build a panel from')
    horizons = {series_by_symbol[s].horizon_s for s in order if s in series_by_symbol}
    if len(horizons) > 1:
        raise InvalidPanel(f"Series have mixed horizons {sorted(horizons)}")

    closes = {}
    for symbol in order:
        series = series_by_symbol.get(symbol)
        if series is None or series.bars['close'].notna().sum() == 0:
            raise MissingData(symbol, next(iter(horizons), None))
        if series.gap_count:
            raise InvalidPanel(f"{symbol} still has {series.gap_count} gaps, run fill_gaps first")
        closes[symbol] = series.bars['close']

    horizon_s = horizons.pop()
    frame = pd.concat(closes, axis=1, join='inner')[order]
    if len(frame) < 3:
        raise TooShort(f"Common window at {horizon_s}s holds {len(frame)} bins, need at least 3")
    expected = pd.Timedelta(seconds=horizon_s)
    if (frame.index.to_series().diff().iloc[1:] != expected).any():
        raise InvalidPanel(f"Common window at {horizon_s}s is not contiguous")

    returns = np.vstack([log_returns(frame[s].to_numpy(), horizon_s) for s in order])
    return ReturnPanel(horizon_s, order, returns, taxonomy.restrict(order), frame.index[1:])
