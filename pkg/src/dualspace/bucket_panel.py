"""Daily allocation of trade volume into price-change buckets.

Each trading day gets a reference price (the prior day's tape-wide
VWAP); every trade lands in bucket k = floor(|price - ref| / delta),
with sixteen 0.5-CNY buckets by default.  Day-over-day changes beyond
16 buckets (8 CNY) essentially never happen, so wider moves are counted
and discarded.  Within a bucket, volume is further profiled into fine
sub-cells (0.01 CNY by default); those profiles are what the interday
correlation state space is built from.  Trades without a B/S stamp are
kept out of both sides but tracked for volume conservation.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .tape_io import Side, TapeRecord

# Guard against float round-off right at a bucket/sub-cell edge: prices
# are cent-quantized, so a 1e-9 nudge on the division never misassigns
# a genuinely interior trade.
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class BucketConfig:
    delta: float = 0.5
    n_buckets: int = 16
    n_subcells: int = 50
    geometric_imbalance: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.n_buckets < 1 or self.n_subcells < 1:
            raise ValueError("n_buckets and n_subcells must be >= 1")

    @property
    def subcell_width(self) -> float:
        return self.delta / self.n_subcells


@dataclass
class DailyPanel:
    date: dt.date
    ref_price: float
    buy_vol: np.ndarray  # (n_buckets,) shares
    sell_vol: np.ndarray
    imb_vol: np.ndarray  # buy - sell, per bucket
    buy_vwap: np.ndarray  # (n_buckets,) CNY, 0 where the side is empty
    sell_vwap: np.ndarray
    fine_buy: np.ndarray  # (n_buckets, n_subcells) shares
    fine_sell: np.ndarray
    discarded_trades: int = 0
    discarded_volume: float = 0.0
    unknown_volume: float = 0.0

    def total_volume(self) -> float:
        return float(self.buy_vol.sum() + self.sell_vol.sum()
                     + self.discarded_volume + self.unknown_volume)

    def empty_quote_buckets(self, side: Side) -> np.ndarray:
        vol = self.buy_vol if side is Side.BUY else self.sell_vol
        return np.flatnonzero(vol == 0)


@dataclass
class PanelSeries:
    panels: list[DailyPanel]
    config: BucketConfig
    discarded_trades: int = 0
    dates: list[dt.date] = field(init=False)

    def __post_init__(self):
        self.dates = [p.date for p in self.panels]
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("panel dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.panels)


def imbalance_profile(buy: np.ndarray, sell: np.ndarray, geometric: bool = False) -> np.ndarray:
    """Buy-minus-sell volume; geometric mode uses sign(B-S)*sqrt(B*S)."""
    if geometric:
        return np.sign(buy - sell) * np.sqrt(buy * sell)
    return buy - sell


def _group_days(records: list[TapeRecord]):
    recs = sorted(records, key=lambda r: r.date)
    days: list[dt.date] = []
    groups: list[list[TapeRecord]] = []
    for rec in recs:
        if not days or rec.date != days[-1]:
            days.append(rec.date)
            groups.append([])
        groups[-1].append(rec)
    return days, groups


def reference_prices(records: list[TapeRecord]) -> dict[dt.date, float]:
    """Per-day reference price: the prior trading day's all-trade VWAP.

    The first day references its own VWAP; a zero-volume day carries the
    previous reference forward.
    """
    days, groups = _group_days(records)
    if not days:
        raise ValueError("no records")
    vwaps: list[float | None] = []
    prev = None
    for recs in groups:
        total = sum(r.volume for r in recs)
        if total > 0:
            prev = sum(r.price * r.volume for r in recs) / total
        vwaps.append(prev)  # zero-volume day keeps the last seen VWAP
    first_known = next((v for v in vwaps if v is not None), 0.0)
    refs: dict[dt.date, float] = {}
    for i, day in enumerate(days):
        ref = vwaps[i - 1] if i > 0 else vwaps[0]
        refs[day] = float(ref) if ref is not None else float(first_known)
    return refs


def build_panels(records: list[TapeRecord], config: BucketConfig = BucketConfig()) -> PanelSeries:
    """Bucket every day's trades and build the panel series.

    Per trade: c = |price - ref|, bucket floor(c/delta), sub-cell
    floor within the bucket clamped to the last cell.  Trades at or
    beyond n_buckets are discarded (counted); Unknown-side volume is
    excluded from both sides but tracked.
    """
    days, groups = _group_days(records)
    if len(days) < 2:
        raise ValueError("records must span at least 2 days")
    refs = reference_prices(records)

    nb, ns = config.n_buckets, config.n_subcells
    panels = []
    total_discarded = 0
    for day, recs in zip(days, groups):
        ref = refs[day]
        prices = np.array([r.price for r in recs], dtype=float)
        volumes = np.array([r.volume for r in recs], dtype=float)
        sides = np.array([1 if r.side is Side.BUY else -1 if r.side is Side.SELL else 0
                          for r in recs], dtype=np.int8)

        c = np.abs(prices - ref)
        bucket = np.floor(c / config.delta + _EDGE_EPS).astype(np.int64)
        keep = bucket < nb
        known = sides != 0
        unknown_volume = float(volumes[~known].sum())
        discard_mask = ~keep & known
        n_discarded = int(discard_mask.sum())
        discarded_volume = float(volumes[discard_mask].sum())

        fine = np.zeros((2, nb, ns))
        price_sum = np.zeros((2, nb))
        vol_sum = np.zeros((2, nb))
        use = keep & known
        if use.any():
            kb = bucket[use]
            within = c[use] - kb * config.delta
            cell = np.floor(within / config.subcell_width + _EDGE_EPS).astype(np.int64)
            cell = np.clip(cell, 0, ns - 1)
            side_ix = (sides[use] < 0).astype(np.int64)  # 0 = buy, 1 = sell
            np.add.at(fine, (side_ix, kb, cell), volumes[use])
            np.add.at(price_sum, (side_ix, kb), prices[use] * volumes[use])
            np.add.at(vol_sum, (side_ix, kb), volumes[use])

        with np.errstate(invalid="ignore"):
            vwap = np.where(vol_sum > 0, price_sum / np.where(vol_sum > 0, vol_sum, 1.0), 0.0)

        buy_vol = fine[0].sum(axis=1)
        sell_vol = fine[1].sum(axis=1)
        panels.append(DailyPanel(
            date=day,
            ref_price=float(ref),
            buy_vol=buy_vol,
            sell_vol=sell_vol,
            imb_vol=buy_vol - sell_vol,
            buy_vwap=vwap[0],
            sell_vwap=vwap[1],
            fine_buy=fine[0],
            fine_sell=fine[1],
            discarded_trades=n_discarded,
            discarded_volume=discarded_volume,
            unknown_volume=unknown_volume,
        ))
        total_discarded += n_discarded

    return PanelSeries(panels, config, discarded_trades=total_discarded)


def write_panels_csv(series: PanelSeries, handle) -> None:
    """Long-format export: one row per (date, bucket)."""
    handle.write("date,bucket,buy_vol,sell_vol,imb_vol,buy_vwap,sell_vwap\n")
    for panel in series.panels:
        for k in range(series.config.n_buckets):
            handle.write(
                f"{panel.date.isoformat()},{k},{panel.buy_vol[k]!r},{panel.sell_vol[k]!r},"
                f"{panel.imb_vol[k]!r},{panel.buy_vwap[k]!r},{panel.sell_vwap[k]!r}\n"
            )


def write_fine_csv(series: PanelSeries, handle) -> None:
    """Wide export of the sub-cell volume profiles (buy and sell rows)."""
    ns = series.config.n_subcells
    cells = ",".join(f"c{j}" for j in range(ns))
    handle.write(f"date,side,bucket,{cells}\n")
    for panel in series.panels:
        for label, fine in (("B", panel.fine_buy), ("S", panel.fine_sell)):
            for k in range(series.config.n_buckets):
                row = ",".join(repr(v) for v in fine[k].tolist())
                handle.write(f"{panel.date.isoformat()},{label},{k},{row}\n")
