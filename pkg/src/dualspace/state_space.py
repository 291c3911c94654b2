"""Interday correlation state space over price buckets.

A state row for the day pair (t, t+1) holds, per bucket, the Pearson
correlation between the two days' fine sub-cell volume profiles inside
that bucket.  Correlations live in [-1, 1] whatever the trading
intensity, which keeps the state comparable across calm and busy days;
a bucket whose profile is flat on either day contributes 0.  The
attenuation helper quantifies how much measurement noise on both series
biases such a correlation toward zero.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bucket_panel import DailyPanel, PanelSeries, imbalance_profile
from .corrstats import rowwise_pearson


class VolumeMode(enum.Enum):
    BUY = "buy"
    SELL = "sell"
    IMBALANCE = "imbalance"


@dataclass
class StateMatrix:
    values: np.ndarray  # (T, n_buckets), entries in [-1, 1]
    mode: VolumeMode
    dates: list[dt.date]  # later day of each pair; length T

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != len(self.dates):
            raise ValueError("values rows must match dates")

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]


def _profiles(panel: DailyPanel, mode: VolumeMode, geometric: bool) -> np.ndarray:
    if mode is VolumeMode.BUY:
        return panel.fine_buy
    if mode is VolumeMode.SELL:
        return panel.fine_sell
    return imbalance_profile(panel.fine_buy, panel.fine_sell, geometric=geometric)


def corr_vector(panel_t: DailyPanel, panel_t1: DailyPanel, mode: VolumeMode,
                geometric: bool = False) -> np.ndarray:
    """Per-bucket profile correlation between two days (0 where flat)."""
    a = _profiles(panel_t, mode, geometric)
    b = _profiles(panel_t1, mode, geometric)
    if a.shape != b.shape:
        raise ValueError("panels have mismatched bucket configs")
    return rowwise_pearson(b, a, undefined=0.0)


def state_matrix(series: PanelSeries, mode: VolumeMode) -> StateMatrix:
    """Stack corr_vector over all consecutive day pairs (T = days - 1)."""
    if len(series) < 2:
        raise ValueError("need at least 2 days of panels")
    geometric = series.config.geometric_imbalance
    rows = [corr_vector(series.panels[t], series.panels[t + 1], mode, geometric)
            for t in range(len(series) - 1)]
    return StateMatrix(np.vstack(rows), mode, series.dates[1:])


class Attenuation(NamedTuple):
    approx: float  # second-order expansion in the noise-to-signal ratios
    exact: float


def attenuation(rho: float, nsr1: float, nsr2: float) -> Attenuation:
    """Predicted noisy correlation given noise-to-signal variance ratios.

    Additive noise, uncorrelated with both signals, shrinks an estimated
    correlation by 1/sqrt((1+nsr1)(1+nsr2)); the approx field carries
    the small-noise expansion rho * (1 - (nsr1 + nsr2)/2).
    """
    if nsr1 < 0 or nsr2 < 0:
        raise ValueError("noise-to-signal ratios must be >= 0")
    if abs(rho) > 1:
        raise ValueError("|rho| must be <= 1")
    approx = rho * (1.0 - 0.5 * (nsr1 + nsr2))
    exact = rho / np.sqrt((1.0 + nsr1) * (1.0 + nsr2))
    return Attenuation(float(approx), float(exact))


def write_state_csv(states: StateMatrix, handle) -> None:
    nb = states.values.shape[1]
    cols = ",".join(f"b{k}" for k in range(nb))
    handle.write(f"date,mode,{cols}\n")
    for day, row in zip(states.dates, states.values):
        vals = ",".join(repr(v) for v in row.tolist())
        handle.write(f"{day.isoformat()},{states.mode.value},{vals}\n")


def read_state_csv(handle) -> StateMatrix:
    dates: list[dt.date] = []
    rows: list[list[float]] = []
    mode = VolumeMode.IMBALANCE
    header_seen = False
    for line in handle:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            continue
        fields = line.split(",")
        dates.append(dt.date.fromisoformat(fields[0]))
        mode = VolumeMode(fields[1])
        rows.append([float(v) for v in fields[2:]])
    if not rows:
        raise ValueError("empty state matrix file")
    return StateMatrix(np.array(rows, dtype=float), mode, dates)
