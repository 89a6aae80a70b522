"""Market data ingestion and the classical side of the SVD-entropy indicator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

from .encoding import Case, TargetEncoding, classify_case, extend_case2, target_distributions


class MarketDataError(ValueError):
    pass


_DATE_FORMATS = ("%b %y", "%Y-%m", "%Y-%m-%d", "%b %Y")


def _parse_label(label: str) -> datetime | None:
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(label.strip(), fmt)
        except ValueError:
            pass
    return None


@dataclass
class StockSeries:
    symbols: list[str]
    dates: list[str]
    prices: np.ndarray  # (n_stocks, n_dates)

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.shape != (len(self.symbols), len(self.dates)):
            raise MarketDataError(
                f"price matrix {self.prices.shape} does not match "
                f"{len(self.symbols)} symbols x {len(self.dates)} dates"
            )
        if len(set(self.symbols)) != len(self.symbols):
            raise MarketDataError("duplicate symbols")
        if np.any(~np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise MarketDataError("prices must be finite and positive")
        parsed = [_parse_label(d) for d in self.dates]
        if all(p is not None for p in parsed) and any(b <= a for a, b in zip(parsed, parsed[1:])):
            raise MarketDataError("dates are not strictly increasing")


def load_prices(source) -> StockSeries:
    """Parse ``Symbol,<month>,<month>,...`` CSV text, a path, or a file object."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "," not in source):
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise MarketDataError("need a header row and at least one symbol row")
    header, body = rows[0], rows[1:]
    dates = [h.strip() for h in header[1:]]
    symbols, prices = [], []
    for row in body:
        if len(row) != len(header):
            raise MarketDataError(f"row {row[0]!r} has {len(row) - 1} prices, expected {len(dates)}")
        symbols.append(row[0].strip())
        try:
            prices.append([float(c) for c in row[1:]])
        except ValueError as exc:
            raise MarketDataError(f"bad price in row {row[0]!r}: {exc}") from None
    return StockSeries(symbols, dates, np.array(prices))


def bundled_dataset(name: str) -> StockSeries:
    """``"table2"`` (4 stocks) or ``"table4"`` (8 stocks), Apr 2008 - Mar 2009."""
    text = resources.files("aae.data").joinpath(f"{name}.csv").read_text()
    return load_prices(text)


def log_returns(series: StockSeries) -> np.ndarray:
    if series.prices.shape[1] < 2:
        raise MarketDataError("need at least two dates for returns")
    return np.diff(np.log(series.prices), axis=1)


def window_coefficients(returns) -> tuple[np.ndarray, np.ndarray]:
    """Standardized coefficients ``a`` and correlation matrix ``C = a a^T`` (trace 1).

    Uses the population (1/T) standard deviation per stock.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2 or r.shape[1] < 2:
        raise MarketDataError("need a (stocks x T) return window with T >= 2")
    n_s, T = r.shape
    centered = r - r.mean(axis=1, keepdims=True)
    sigma = np.sqrt((centered**2).mean(axis=1))
    flat = sigma <= 1e-15 * np.maximum(1.0, np.abs(r).max(axis=1))
    if np.any(flat):
        raise MarketDataError(f"zero variance in window for stock rows {np.flatnonzero(flat).tolist()}")
    a = centered / (sigma[:, None] * math.sqrt(n_s * T))
    return a, a @ a.T


def exact_svd_entropy(C) -> float:
    """Entropy ``-sum l ln l`` of the eigenvalues of a trace-one PSD matrix."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise MarketDataError("correlation matrix must be square")
    if np.max(np.abs(C - C.T), initial=0.0) > 1e-9:
        raise MarketDataError("correlation matrix is not symmetric")
    lam = np.linalg.eigvalsh(C)
    if lam.min() < -1e-9:
        raise MarketDataError(f"correlation matrix has a negative eigenvalue {lam.min():.3g}")
    lam = lam[lam > 1e-12]
    return float(-np.sum(lam * np.log(lam))) + 0.0  # no negative zero


def register_sizes(n_stocks: int, n_times: int) -> tuple[int, int]:
    """Qubits for the stock and time registers (each padded to a power of two)."""
    return max(1, (n_stocks - 1).bit_length()), max(1, (n_times - 1).bit_length())


def data_matrix(a) -> np.ndarray:
    """``a`` zero-padded to power-of-two rows and columns."""
    a = np.asarray(a, dtype=float)
    n_s, n_t = register_sizes(*a.shape)
    out = np.zeros((1 << n_s, 1 << n_t))
    out[: a.shape[0], : a.shape[1]] = a
    return out


def build_data_vector(a) -> TargetEncoding:
    """Stock-major flattening of the padded coefficients into a training target.

    Index ``j * T' + t`` carries ``a[j, t]``; with mixed signs the sign
    ancilla becomes the least significant bit.
    """
    d = data_matrix(a).ravel()
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-9:
        raise MarketDataError(f"coefficients have norm {norm}, expected 1")
    d = d / norm
    case = classify_case(d)
    enc = TargetEncoding(d=d, case=case, d_bar=extend_case2(d) if case is Case.MIXED_SIGN else None)
    enc.p, enc.p_hadamard = target_distributions(enc)
    return enc


@dataclass
class MarketWindow:
    label: str
    returns: np.ndarray
    a: np.ndarray
    C: np.ndarray

    @property
    def exact_entropy(self) -> float:
        return exact_svd_entropy(self.C)


def sliding_windows(series: StockSeries, window: int = 5, step: int = 1) -> list[MarketWindow]:
    """Windows of ``window`` consecutive prices (``window - 1`` returns), labelled
    by their last month."""
    out = []
    for label, ret in term_returns(series, window, step):
        a, C = window_coefficients(ret)
        out.append(MarketWindow(label, ret, a, C))
    return out


def term_returns(series: StockSeries, window: int = 5, step: int = 1) -> list[tuple[str, np.ndarray]]:
    if window < 3:
        raise MarketDataError("window must span at least 3 prices (2 returns)")
    n_dates = len(series.dates)
    if n_dates < window:
        raise MarketDataError(f"{n_dates} dates is fewer than the window length {window}")
    r = log_returns(series)
    return [
        (series.dates[start + window - 1], r[:, start : start + window - 1])
        for start in range(0, n_dates - window + 1, step)
    ]
