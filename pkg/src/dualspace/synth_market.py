"""Seeded synthetic market generator with planted ground truth.

Emits multi-trader daily tapes in the canonical format.  All traders
sample the same market: a shared price level walk, a shared set of
"anchor" price displacements (persistent crowd price points, with
slowly drifting popularity weights), and shared daily buy probabilities.
Idiosyncrasy comes from each trader's own draws and from a diffuse
(non-anchored) trade component; the anchored fraction is the
signal-to-noise knob.

The planted index couplings work through the order flow: each day's
buy probability is tilted by the standardized monthly index values.
Buys concentrate close to the reference (small price-change buckets)
while sells reach further out, so a tilt changes per-bucket trade
intensity and imbalance-profile structure in a signed, bucket-patterned
way that survives into the correlation state space.  Buys print half a
spread above the level and sells below it, giving bucket-level ask/bid
proxies for the liquidity measures.  Shock windows rescale volumes and
the spread for event-study power tests.

Calibration targets (loose, order-of-magnitude): a few times 1e4
trades per tape over ~485 days, prices around 9 CNY, order 1e4 shares
of volume per day.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import tape_io
from .calendars import month_key, trading_days
from .residual_study import IndexSeries
from .tape_io import Side, TapeRecord


@dataclass(frozen=True)
class PriceLevelParams:
    # the band sits above the widest anchor offset so mirrored trade
    # legs never hit the price floor
    start: float = 12.0
    step_sigma: float = 0.02
    floor: float = 9.0
    ceiling: float = 16.0


@dataclass(frozen=True)
class Couplings:
    g_sent: float = 0.0
    g_ret: float = 0.0
    g_yield: float = 0.0

    def __post_init__(self):
        for g in (self.g_sent, self.g_ret, self.g_yield):
            if abs(g) > 1:
                raise ValueError("couplings must lie in [-1, 1]")


@dataclass(frozen=True)
class IndexARParams:
    sentiment_ar: float = 0.7
    return_ar: float = 0.3
    yield_ar: float = 0.8
    return_on_sentiment: float = 0.5  # cross-loading of returns on sentiment


@dataclass(frozen=True)
class AnchorParams:
    """Persistent crowd price points in price-change space."""

    n_anchors: int = 64
    max_offset: float = 7.8   # CNY; keeps anchors inside the 16-bucket range
    scatter: float = 0.04     # CNY; local spread of trades around an anchor
    weight_ar: float = 0.85   # day-to-day persistence of anchor popularity
    weight_sigma: float = 0.25
    buy_reach: float = 0.7    # CNY; buys prefer anchors near the reference
    sell_reach: float = 1.6   # sells reach further out
    affinity_sigma: float = 0.8  # fixed per-anchor buy-vs-sell preference (log scale)


@dataclass(frozen=True)
class ShockSpec:
    start_day: int
    end_day: int  # half-open [start_day, end_day)
    volume_mult: float = 1.0
    spread_mult: float = 1.0


@dataclass(frozen=True)
class MarketConfig:
    n_traders: int = 5
    n_days: int = 485
    trades_per_day_mean: float = 180.0
    price_level: PriceLevelParams = PriceLevelParams()
    volume_lognormal: tuple[float, float] = (4.7, 0.6)  # (mu, sigma) of per-trade shares
    spread: float = 0.04
    couplings: Couplings = Couplings()
    index_ar: IndexARParams = IndexARParams()
    anchors: AnchorParams = AnchorParams()
    anchored_fraction: float = 0.9  # share of trades on common anchors (the SNR knob)
    buy_width: float = 0.5    # diffuse-component displacement scale, buy side
    sell_width: float = 1.2   # diffuse sells scatter wider
    width_ar: float = 0.6     # persistence of the shared diffuse-width state
    width_sigma: float = 0.25
    volume_concentration: float = 1.2  # CNY; volume decays away from the reference
    unknown_side_rate: float = 0.05
    shared_market: bool = True  # False = independent level/anchor streams per trader
    seed: int = 0
    start_date: dt.date = dt.date(2009, 1, 5)
    shocks: tuple[ShockSpec, ...] = ()

    def __post_init__(self):
        if self.n_days < 2:
            raise ValueError("n_days must be >= 2")
        if not 0.0 <= self.anchored_fraction <= 1.0:
            raise ValueError("anchored_fraction must lie in [0, 1]")
        if self.trades_per_day_mean < 0:
            raise ValueError("trades_per_day_mean must be nonnegative")


def snr_to_anchored_fraction(snr: float) -> float:
    """Map a signal-to-noise ratio to the anchored trade fraction."""
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    return snr / (1.0 + snr)


@dataclass
class GroundTruth:
    trading_dates: list[dt.date]
    months: list[str]
    sentiment: list[float]
    stock_return: list[float]
    bond_yield: list[float]
    daily_tilt: list[float]  # planted buy-probability tilt per day, in [-1, 1]
    shock_windows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "trading_dates": [d.isoformat() for d in self.trading_dates],
            "months": self.months,
            "sentiment": self.sentiment,
            "stock_return": self.stock_return,
            "bond_yield": self.bond_yield,
            "daily_tilt": self.daily_tilt,
            "shock_windows": self.shock_windows,
        }


@dataclass
class SynthTape:
    trader_id: str
    records: list[TapeRecord]
    text: str


@dataclass
class SynthMarket:
    config: MarketConfig
    indexes: dict[str, IndexSeries]
    tapes: list[SynthTape]
    truth: GroundTruth


def _seed_children(config: MarketConfig):
    # child 0: indexes, child 1: shared market streams, 2+i: trader i
    return np.random.SeedSequence(config.seed).spawn(2 + config.n_traders)


def _ar1(rng: np.random.Generator, n: int, ar: float) -> np.ndarray:
    innov = rng.standard_normal(n)
    out = np.empty(n)
    scale = 1.0 / np.sqrt(1.0 - ar**2) if abs(ar) < 1 else 1.0
    out[0] = innov[0] * scale
    for i in range(1, n):
        out[i] = ar * out[i - 1] + innov[i]
    return out


def _orthogonalize(series: np.ndarray, *others: np.ndarray) -> np.ndarray:
    """Project out the sample components of `others` (and the mean),
    then restore the original mean and standard deviation."""
    mean, std = series.mean(), series.std()
    basis = np.column_stack([np.ones(series.size), *others])
    resid = series - basis @ np.linalg.lstsq(basis, series, rcond=None)[0]
    if resid.std() > 0:
        resid = resid / resid.std() * std
    return resid + mean


def gen_indexes(config: MarketConfig) -> tuple[dict[str, IndexSeries], GroundTruth]:
    """Monthly AR(1) indexes over the months spanned by the day calendar."""
    dates = trading_days(config.start_date, config.n_days)
    months = sorted({month_key(d) for d in dates})
    rng = np.random.default_rng(_seed_children(config)[0])
    n = len(months)
    p = config.index_ar
    sentiment = _ar1(rng, n, p.sentiment_ar)
    own_return = _ar1(rng, n, p.return_ar)
    sent_std = (sentiment - sentiment.mean()) / (sentiment.std() or 1.0)
    stock_return = p.return_on_sentiment * sent_std + own_return
    # The yield series is decorrelated from the other two in-sample:
    # "uncoupled" must hold for the emitted months, not just in
    # expectation, or short-sample spurious correlation would leak
    # through any planted flow coupling.
    bond_yield = _orthogonalize(_ar1(rng, n, p.yield_ar), sentiment, stock_return)

    indexes = {
        "sentiment": IndexSeries("sentiment", months, sentiment),
        "stock_return": IndexSeries("stock_return", months, stock_return),
        "bond_yield": IndexSeries("bond_yield", months, bond_yield),
    }
    truth = GroundTruth(
        trading_dates=dates,
        months=months,
        sentiment=[float(v) for v in sentiment],
        stock_return=[float(v) for v in stock_return],
        bond_yield=[float(v) for v in bond_yield],
        daily_tilt=[0.0] * config.n_days,
        shock_windows=[{"start_day": s.start_day, "end_day": s.end_day,
                        "volume_mult": s.volume_mult, "spread_mult": s.spread_mult}
                       for s in config.shocks],
    )
    return indexes, truth


class _MarketStreams:
    """Shared (or per-trader) market structure drawn from one generator."""

    def __init__(self, rng: np.random.Generator, config: MarketConfig):
        lp = config.price_level
        steps = rng.standard_normal(config.n_days) * lp.step_sigma
        level = np.empty(config.n_days)
        x = lp.start
        for i, step in enumerate(steps):
            x += step
            while x < lp.floor or x > lp.ceiling:  # reflect back into band
                if x < lp.floor:
                    x = 2 * lp.floor - x
                if x > lp.ceiling:
                    x = 2 * lp.ceiling - x
            level[i] = x
        self.level = level

        u = _ar1(rng, config.n_days, config.width_ar) * config.width_sigma
        self.width_mult = np.exp(u - u.var() / 2.0)

        a = config.anchors
        offsets = rng.uniform(0.0, a.max_offset, size=a.n_anchors)
        affinity = rng.standard_normal(a.n_anchors) * a.affinity_sigma
        drift = np.vstack([_ar1(rng, config.n_days, a.weight_ar)
                           for _ in range(a.n_anchors)]) * a.weight_sigma
        weights = np.exp(drift)  # (n_anchors, n_days)
        self.anchor_offsets = offsets
        self.buy_weights = weights * np.exp(-offsets / a.buy_reach + affinity)[:, None]
        self.sell_weights = weights * np.exp(-offsets / a.sell_reach - affinity)[:, None]
        self.buy_weights /= self.buy_weights.sum(axis=0, keepdims=True)
        self.sell_weights /= self.sell_weights.sum(axis=0, keepdims=True)


def _standardized(series: IndexSeries) -> np.ndarray:
    v = series.values
    return (v - v.mean()) / (v.std() or 1.0)


def gen_tapes(config: MarketConfig,
              indexes: dict[str, IndexSeries]) -> tuple[list[SynthTape], GroundTruth]:
    """Generate one tape per trader, deterministic in (config, seed)."""
    children = _seed_children(config)
    dates = trading_days(config.start_date, config.n_days)
    months = indexes["sentiment"].months
    month_ix = np.array([months.index(month_key(d)) for d in dates])

    g = config.couplings
    tilt_m = (g.g_sent * _standardized(indexes["sentiment"])
              + g.g_ret * _standardized(indexes["stock_return"])
              + g.g_yield * _standardized(indexes["bond_yield"]))
    daily_tilt = np.clip(tilt_m[month_ix], -0.9, 0.9)
    p_buy = np.clip(0.5 + 0.5 * daily_tilt, 0.05, 0.95)

    volume_mult = np.ones(config.n_days)
    spread_mult = np.ones(config.n_days)
    for shock in config.shocks:
        volume_mult[shock.start_day:shock.end_day] = shock.volume_mult
        spread_mult[shock.start_day:shock.end_day] = shock.spread_mult

    shared = _MarketStreams(np.random.default_rng(children[1]), config)
    mu, sigma = config.volume_lognormal
    scatter = config.anchors.scatter

    tapes = []
    for t in range(config.n_traders):
        rng = np.random.default_rng(children[2 + t])
        streams = shared if config.shared_market else _MarketStreams(rng, config)
        records: list[TapeRecord] = []
        for d, day in enumerate(dates):
            # Trades are emitted in +/- displacement pairs of equal volume,
            # so displacement contributions cancel out of the daily VWAP
            # and the next day's reference tracks the level walk closely.
            n = int(rng.poisson(config.trades_per_day_mean / 2.0))
            if n == 0:
                continue
            is_buy = rng.random(n) < p_buy[d]
            anchored = rng.random(n) < config.anchored_fraction

            disp = np.empty(n)
            for side_mask, weights, width in (
                    (is_buy, streams.buy_weights[:, d], config.buy_width),
                    (~is_buy, streams.sell_weights[:, d], config.sell_width)):
                on_anchor = side_mask & anchored
                k = int(on_anchor.sum())
                if k:
                    picks = rng.choice(streams.anchor_offsets.size, size=k, p=weights)
                    disp[on_anchor] = (streams.anchor_offsets[picks]
                                       + rng.standard_normal(k) * scatter)
                diffuse = side_mask & ~anchored
                k = int(diffuse.sum())
                if k:
                    disp[diffuse] = np.abs(rng.standard_normal(k)) * width * streams.width_mult[d]

            half_spread = 0.5 * config.spread * spread_mult[d]
            base = streams.level[d] + np.where(is_buy, half_spread, -half_spread)
            concentration = np.exp(-np.abs(disp) / config.volume_concentration)
            volumes = np.rint(rng.lognormal(mu, sigma, size=n) * concentration
                              * volume_mult[d]).astype(int)
            hide_side = rng.random((n, 2)) < config.unknown_side_rate
            for i in range(n):
                if volumes[i] <= 0:
                    continue  # zero-volume shocks silence the window
                true_side = Side.BUY if is_buy[i] else Side.SELL
                for leg, offset in enumerate((disp[i], -disp[i])):
                    price = float(f"{max(base[i] + offset, 0.01):.2f}")
                    side = Side.UNKNOWN if hide_side[i, leg] else true_side
                    records.append(TapeRecord(day, price, side, int(volumes[i])))
        tapes.append(SynthTape(f"t{t}", records, tape_io.serialize(records)))

    _, truth = gen_indexes(config)
    truth.daily_tilt = [float(v) for v in daily_tilt]
    return tapes, truth


def gen_market(config: MarketConfig = MarketConfig()) -> SynthMarket:
    indexes, _ = gen_indexes(config)
    tapes, truth = gen_tapes(config, indexes)
    return SynthMarket(config, indexes, tapes, truth)


def inject_shock(config: MarketConfig, window: tuple[int, int],
                 volume_mult: float = 1.0, spread_mult: float = 1.0) -> MarketConfig:
    """Return a config with an extra shock window; overlaps are refused."""
    start, end = window
    if not (0 <= start < end <= config.n_days):
        raise ValueError("shock window must lie within the sample")
    for s in config.shocks:
        if start < s.end_day and s.start_day < end:
            raise ValueError("overlapping shock windows")
    shock = ShockSpec(start, end, volume_mult, spread_mult)
    return replace(config, shocks=config.shocks + (shock,))


def write_market(market: SynthMarket, outdir) -> dict[str, str]:
    """Write tapes, index CSVs, and the ground-truth JSON; returns paths."""
    import os

    from .residual_study import write_index_csv

    os.makedirs(outdir, exist_ok=True)
    paths = {}
    for tape in market.tapes:
        path = os.path.join(outdir, f"{tape.trader_id}.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(tape.text)
        paths[tape.trader_id] = path
    for name, index in market.indexes.items():
        path = os.path.join(outdir, f"{name}.csv")
        with open(path, "w", encoding="utf-8") as handle:
            write_index_csv(index, handle)
        paths[name] = path
    truth_path = os.path.join(outdir, "ground_truth.json")
    with open(truth_path, "w", encoding="utf-8") as handle:
        json.dump(market.truth.to_dict(), handle, sort_keys=True, indent=1)
    paths["ground_truth"] = truth_path
    return paths
