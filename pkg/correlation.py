"""
Pearson correlation matrices, dissimilarity transforms and the summary
statistics reported per horizon and per sector.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from errors import (
    DimensionMismatch, EmptyPercentileList, SectorTooSmall, TooFewSamples,
    UnknownKind, UnknownSector, ZeroVariance,
)
from market_data import OTHER_SECTOR, ReturnPanel, SectorTaxonomy

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILES = [10.0, 50.0, 90.0]


class DissimilarityKind(Enum):
    EUCLIDEAN = 'euclidean'
    POWER = 'power'

    @classmethod
    def parse(cls, value: Union[str, 'DissimilarityKind']) -> 'DissimilarityKind':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise UnknownKind(f"Unknown dissimilarity '{value}', expected euclidean or power") from None


@dataclass
class CorrelationMatrix:
    """Symmetric Pearson matrix with an exact unit diagonal."""
    symbols: List[str]
    values: np.ndarray
    t_len: int

    @property
    def n(self) -> int:
        return len(self.symbols)

    def upper_triangle(self) -> np.ndarray:
        """Each unordered pair once, row-major over i < j."""
        rows, cols = np.triu_indices(self.n, k=1)
        return self.values[rows, cols]

    def subset(self, symbols: Sequence[str]) -> 'CorrelationMatrix':
        index = [self.symbols.index(s) for s in symbols]
        return CorrelationMatrix(list(symbols), self.values[np.ix_(index, index)], self.t_len)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.symbols, columns=self.symbols)


@dataclass
class DissimilarityMatrix:
    symbols: List[str]
    values: np.ndarray
    kind: DissimilarityKind

    @property
    def n(self) -> int:
        return len(self.symbols)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.symbols, columns=self.symbols)


@dataclass
class CorrelationSummary:
    mean: float
    mean_abs: float
    percentiles: Dict[float, float] = field(default_factory=dict)
    count: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': self.mean,
            'mean_abs': self.mean_abs,
            'percentiles': {f"{level:g}": value for level, value in self.percentiles.items()},
            'count': self.count,
        }


def _symmetrize(upper_source: np.ndarray, diagonal: float) -> np.ndarray:
    upper = np.triu(upper_source, k=1)
    values = upper + upper.T
    np.fill_diagonal(values, diagonal)
    return values


def pearson_matrix(panel: ReturnPanel) -> CorrelationMatrix:
    """Pearson coefficients between every pair of panel rows.

    The upper triangle is computed once and mirrored, so symmetry and the
    unit diagonal hold exactly. Rounding overshoot is clamped into [-1, 1].
    """
    returns = panel.returns
    if panel.t_len < 3:
        raise TooFewSamples(f"Correlation needs at least 3 observations, got {panel.t_len}")

    centered = returns - returns.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum('ij,ij->i', centered, centered))
    flat = np.flatnonzero(norms == 0.0)
    if flat.size:
        index = int(flat[0])
        raise ZeroVariance(index, panel.symbols[index])

    covariance = centered @ centered.T
    coefficients = np.clip(covariance / np.outer(norms, norms), -1.0, 1.0)
    return CorrelationMatrix(list(panel.symbols), _symmetrize(coefficients, 1.0), panel.t_len)


def to_dissimilarity(corr: CorrelationMatrix,
                     kind: DissimilarityKind = DissimilarityKind.POWER) -> DissimilarityMatrix:
    """Euclidean: sqrt(2(1 - rho)); Power: 1 - rho^2."""
    kind = DissimilarityKind.parse(kind)
    rho = corr.values
    if kind is DissimilarityKind.EUCLIDEAN:
        values = np.sqrt(np.clip(2.0 * (1.0 - rho), 0.0, 4.0))
    else:
        values = np.clip(1.0 - rho ** 2, 0.0, 1.0)
    return DissimilarityMatrix(list(corr.symbols), _symmetrize(values, 0.0), kind)


def summarize(values: Sequence[float], percentile_levels: Sequence[float],
              absolute_percentiles: bool = False) -> CorrelationSummary:
    """Mean, mean |rho| and linear-interpolation percentiles of coefficients.

    Percentiles are taken on signed values unless absolute_percentiles is set.
    """
    levels = [float(p) for p in percentile_levels]
    if not levels:
        raise EmptyPercentileList('At least one percentile level is required')
    data = np.asarray(values, dtype=float)
    basis = np.abs(data) if absolute_percentiles else data
    points = np.percentile(basis, sorted(levels), method='linear')
    return CorrelationSummary(
        mean=float(data.mean()),
        mean_abs=float(np.abs(data).mean()),
        percentiles={level: float(value) for level, value in zip(sorted(levels), points)},
        count=int(data.size),
    )


def pairwise_summary(corr: CorrelationMatrix, percentile_levels: Sequence[float] = DEFAULT_PERCENTILES,
                     absolute_percentiles: bool = False) -> CorrelationSummary:
    """Summary over the n(n-1)/2 off-diagonal coefficients."""
    if corr.n < 2:
        raise DimensionMismatch('Pairwise summary needs at least 2 assets')
    return summarize(corr.upper_triangle(), percentile_levels, absolute_percentiles)


def sector_members(corr: CorrelationMatrix, taxonomy: SectorTaxonomy, sector: str) -> List[str]:
    if sector == OTHER_SECTOR:
        members = taxonomy.groups(corr.symbols).get(OTHER_SECTOR, [])
    else:
        members = [s for s in corr.symbols if taxonomy.raw_sector(s) == sector]
    if not members:
        raise UnknownSector(f"Sector '{sector}' has no members among {corr.n} assets")
    if len(members) < 2:
        raise SectorTooSmall(f"Sector '{sector}' has {len(members)} member, need at least 2")
    return members


def sector_summary(corr: CorrelationMatrix, taxonomy: SectorTaxonomy, sector: str,
                   percentile_levels: Sequence[float] = DEFAULT_PERCENTILES) -> CorrelationSummary:
    """Summary over the n_s(n_s-1)/2 coefficients inside one sector."""
    members = sector_members(corr, taxonomy, sector)
    return pairwise_summary(corr.subset(members), percentile_levels)


def sector_summaries(corr: CorrelationMatrix, taxonomy: SectorTaxonomy,
                     percentile_levels: Sequence[float] = DEFAULT_PERCENTILES) -> Dict[str, CorrelationSummary]:
    """Summaries for every sector group with at least two members."""
    result = {}
    for sector, members in taxonomy.groups(corr.symbols).items():
        if len(members) >= 2:
            result[sector] = pairwise_summary(corr.subset(members), percentile_levels)
    return result


def matrix_to_dict(matrix: Union[CorrelationMatrix, DissimilarityMatrix]) -> Dict[str, Any]:
    payload: Dict[str, Any] = {'symbols': list(matrix.symbols), 'values': matrix.values.tolist()}
    if isinstance(matrix, CorrelationMatrix):
        payload['t_len'] = matrix.t_len
    else:
        payload['kind'] = matrix.kind.value
    return payload


def write_matrix_csv(matrix: Union[CorrelationMatrix, DissimilarityMatrix], path: str) -> None:
    """CSV with the symbols as header row and as first column."""
    frame = matrix.to_frame()
    frame.index.name = 'symbol'
    frame.to_csv(path, float_format='%.17g', lineterminator='\n')


def write_matrix_json(matrix: Union[CorrelationMatrix, DissimilarityMatrix], path: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(matrix_to_dict(matrix), f, indent=2)


def read_matrix_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, index_col=0, float_precision='round_trip')
