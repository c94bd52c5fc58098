"""Market indicator features computed from minute bars.

All statistics are causal: a feature at index t sees closes/volumes up to t
only. Standard deviations are population (not sample), and zero-variance
windows yield a z-score of 0 rather than NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySeries, IndexOutOfRange, InsufficientHistory, WindowTooShort
from .types import TickBar


@dataclass(frozen=True)
class IndicatorConfig:
    window_n: int = 20        # z-score / SMA window
    ema_n: int = 20           # EMA smoothing window
    volatility_m: int = 10    # volatility lookback steps
    history_h: int = 30       # raw closes carried in the state

    def __post_init__(self):
        if min(self.window_n, self.ema_n, self.volatility_m, self.history_h) < 1:
            raise ValueError("all indicator windows must be >= 1")
        if self.history_h < self.window_n:
            raise ValueError("history_h must be >= window_n")

    @property
    def warmup(self) -> int:
        # change features need >= 2 prior change values to z-score against
        return max(self.history_h, self.window_n + 2, self.volatility_m)


@dataclass(frozen=True)
class FeatureVector:
    price_level_z: float
    price_change_z: float
    volume_level_z: float
    volume_change_z: float
    volatility: float
    raw_prices: np.ndarray    # h most recent closes, oldest first

    def scalars(self) -> np.ndarray:
        return np.array([self.price_level_z, self.price_change_z,
                         self.volume_level_z, self.volume_change_z,
                         self.volatility])


def zscore(x: float, window: Sequence[float]) -> float:
    """(x - mean) / population stddev of the window; 0 on zero variance."""
    window = np.asarray(window, dtype=float)
    if window.size < 2:
        raise WindowTooShort(f"z-score window needs >= 2 points, got {window.size}")
    std = window.std()
    if std == 0:
        return 0.0
    return float((x - window.mean()) / std)


def _sma_prior(values: np.ndarray, t: int, n: int) -> float:
    # mean of the n points strictly before t
    return float(values[t - n:t].mean())


def price_change(t: int, n: int, closes: Sequence[float]) -> float:
    """Relative gap of the close at t over the SMA of the n closes before it."""
    closes = np.asarray(closes, dtype=float)
    if t < n or t >= len(closes):
        raise IndexOutOfRange(f"price_change needs n <= t < len, got t={t}, n={n}")
    return float(closes[t] / _sma_prior(closes, t, n) - 1.0)


def volume_change(t: int, n: int, volumes: Sequence[float]) -> float:
    """Same as price_change with traded volumes; defined as 0 on a dead window."""
    volumes = np.asarray(volumes, dtype=float)
    if t < n or t >= len(volumes):
        raise IndexOutOfRange(f"volume_change needs n <= t < len, got t={t}, n={n}")
    sma = _sma_prior(volumes, t, n)
    if sma == 0:
        return 0.0
    return float(volumes[t] / sma - 1.0)


def ema(closes: Sequence[float], n: int) -> np.ndarray:
    """Recursive EMA with smoothing 2/(n+1); element t sees only the prefix."""
    closes = np.asarray(closes, dtype=float)
    if closes.size == 0:
        raise EmptySeries("ema needs at least one value")
    alpha = 2.0 / (n + 1)
    out = np.empty_like(closes)
    out[0] = closes[0]
    for t in range(1, closes.size):
        out[t] = alpha * closes[t] + (1 - alpha) * out[t - 1]
    return out


def volatility(closes: Sequence[float], ema_n: int, m: int, t: int) -> float:
    """Relative EMA drift over the last m steps."""
    closes = np.asarray(closes, dtype=float)
    if t < m or t >= len(closes):
        raise IndexOutOfRange(f"volatility needs m <= t < len, got t={t}, m={m}")
    series = ema(closes[:t + 1], ema_n)
    base = series[t - m]
    if base == 0:
        raise ZeroDivisionError("EMA base is zero")
    return float((series[t] - base) / base)


def _change_series(values: np.ndarray, n: int, upto: int, dead_zero: bool) -> np.ndarray:
    """Change values for indices n..upto inclusive (causal rolling SMA)."""
    csum = np.concatenate([[0.0], np.cumsum(values[:upto + 1])])
    idx = np.arange(n, upto + 1)
    sma = (csum[idx] - csum[idx - n]) / n
    if dead_zero:
        out = np.zeros(idx.size)
        nz = sma != 0
        out[nz] = values[idx[nz]] / sma[nz] - 1.0
        return out
    return values[idx] / sma - 1.0


def _assemble(t: int, closes: np.ndarray, volumes: np.ndarray,
              ema_series: np.ndarray, pc: np.ndarray, vc: np.ndarray,
              cfg: IndicatorConfig) -> FeatureVector:
    n = cfg.window_n
    plz = zscore(closes[t], closes[t - n:t])
    vlz = zscore(volumes[t], volumes[t - n:t])
    i = t - n  # change-series offset: pc[0] sits at bar index n
    pcz = zscore(pc[i], pc[:i])
    vcz = zscore(vc[i], vc[:i])
    base = ema_series[t - cfg.volatility_m]
    vol = float((ema_series[t] - base) / base)
    raw = closes[t - cfg.history_h + 1:t + 1].copy()
    fv = FeatureVector(plz, pcz, vlz, vcz, vol, raw)
    if not (np.isfinite(fv.scalars()).all() and np.isfinite(raw).all()):
        raise ValueError(f"non-finite feature at t={t}")
    return fv


def featurize(bars: Sequence[TickBar], t: int, cfg: IndicatorConfig) -> FeatureVector:
    """Assemble the indicator state at bar index t.

    Level features are z-scored against the n bars before t (the fixed
    window of the z_t^n formula); change features are z-scored against
    their own full history up to t. Raises ``InsufficientHistory`` below
    the warm-up index.
    """
    if t < cfg.warmup or t >= len(bars):
        raise InsufficientHistory(
            f"featurize needs {cfg.warmup} <= t < {len(bars)}, got {t}")
    closes = np.array([b.close for b in bars[:t + 1]])
    volumes = np.array([b.volume for b in bars[:t + 1]])
    return _assemble(
        t, closes, volumes,
        ema(closes, cfg.ema_n),
        _change_series(closes, cfg.window_n, t, dead_zero=False),
        _change_series(volumes, cfg.window_n, t, dead_zero=True),
        cfg)


def featurize_all(bars: Sequence[TickBar], cfg: IndicatorConfig) -> list[FeatureVector]:
    """Feature vectors for every index from warm-up to the last bar.

    Hoists the EMA and change series (both causal recursions, so the values
    match per-index ``featurize`` exactly) and assembles each index from
    the shared arrays.
    """
    if len(bars) <= cfg.warmup:
        raise InsufficientHistory(
            f"need more than {cfg.warmup} bars, got {len(bars)}")
    closes = np.array([b.close for b in bars])
    volumes = np.array([b.volume for b in bars])
    last = len(bars) - 1
    ema_series = ema(closes, cfg.ema_n)
    pc = _change_series(closes, cfg.window_n, last, dead_zero=False)
    vc = _change_series(volumes, cfg.window_n, last, dead_zero=True)
    return [_assemble(t, closes, volumes, ema_series, pc, vc, cfg)
            for t in range(cfg.warmup, len(bars))]


FEATURE_CSV_HEADER = "t,price_level_z,price_change_z,volume_level_z,volume_change_z,volatility"


def write_feature_csv(bars: Sequence[TickBar], cfg: IndicatorConfig, sink) -> None:
    sink.write(FEATURE_CSV_HEADER + "\n")
    for t in range(cfg.warmup, len(bars)):
        fv = featurize(bars, t, cfg)
        sink.write(f"{t},{fv.price_level_z},{fv.price_change_z},"
                   f"{fv.volume_level_z},{fv.volume_change_z},{fv.volatility}\n")
