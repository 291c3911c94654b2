"""Trading cost, dynamic Amihud lambda, and the liquidity event study.

Per bucket and day, the cost of trading marks today's buys to
yesterday's ask and today's sells to yesterday's bid,

    pi[i] = ask(t-1, i) * buy_vol(t, i) - bid(t-1, i) * sell_vol(t, i),

with the bucket's prior-day buy-side VWAP standing in for the ask and
the sell-side VWAP for the bid (the tapes carry no quotes; buys execute
at the ask).  In a balanced book with a constant spread the bucket sum
reduces to spread times daily turnover.  The dynamic Amihud measure

    lambda[i] = |pi[i]| / ((buy_vol(t, i) + sell_vol(t-1, i)) / 2)

is the roundtrip cost per share inside one bucket.  The event study
splits the sample into 60-day periods, trains a CNN to read a monthly
index from monthly lambda images on two adjacent training periods, and
tests per 120-day prediction window whether that window's
prediction-index correlation matches the full-sample correlation of
the average-lambda series with the index (Fisher z for Pearson; a
random month-subset draw for Spearman).
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import neural_kit
from .bucket_panel import DailyPanel, PanelSeries
from .calendars import month_key
from .corrstats import fisher_z_pvalue, pearson, spearman, standardize
from .residual_study import WINDOW_DAYS, IndexSeries, monthly_windows


@dataclass
class CostSeries:
    dates: list[dt.date]      # day t of each (t-1, t) pair
    pi: np.ndarray            # (T-1, n_buckets) CNY*shares
    lam: np.ndarray           # (T-1, n_buckets) CNY per share, >= 0
    lambda_avg: np.ndarray    # (T-1,) per-day mean of lam across buckets
    day_positions: np.ndarray  # (T-1,) position of day t in the panel series
    no_quote: list[tuple[dt.date, int]] = field(default_factory=list)
    illiquid: list[tuple[dt.date, int]] = field(default_factory=list)


def trading_cost(panel_prev: DailyPanel, panel_cur: DailyPanel) -> tuple[np.ndarray, np.ndarray]:
    """Per-bucket cost vector; also returns the no-quote bucket mask.

    A bucket with an empty prior-day side has no usable quote proxy:
    that term contributes 0 and the bucket is flagged.
    """
    if panel_prev.date >= panel_cur.date:
        raise ValueError("panels must be consecutive (prev before cur)")
    if panel_prev.buy_vol.shape != panel_cur.buy_vol.shape:
        raise ValueError("panels have mismatched bucket configs")
    pi = (panel_prev.buy_vwap * panel_cur.buy_vol
          - panel_prev.sell_vwap * panel_cur.sell_vol)
    no_quote = (panel_prev.buy_vol == 0) | (panel_prev.sell_vol == 0)
    return pi, no_quote


def amihud_lambda(pi: np.ndarray, panel_prev: DailyPanel,
                  panel_cur: DailyPanel) -> tuple[np.ndarray, np.ndarray]:
    """Roundtrip cost per share; zero-denominator buckets flagged illiquid."""
    denom = 0.5 * (panel_cur.buy_vol + panel_prev.sell_vol)
    illiquid = denom == 0
    lam = np.zeros_like(pi)
    lam[~illiquid] = np.abs(pi[~illiquid]) / denom[~illiquid]
    return lam, illiquid


def cost_series(series: PanelSeries) -> CostSeries:
    """Apply trading_cost and amihud_lambda over all consecutive day pairs."""
    if len(series) < 2:
        raise ValueError("need at least 2 days of panels")
    dates, pis, lams, no_quote, illiquid = [], [], [], [], []
    for t in range(1, len(series)):
        prev, cur = series.panels[t - 1], series.panels[t]
        pi, nq = trading_cost(prev, cur)
        lam, ill = amihud_lambda(pi, prev, cur)
        dates.append(cur.date)
        pis.append(pi)
        lams.append(lam)
        no_quote.extend((cur.date, int(k)) for k in np.flatnonzero(nq))
        illiquid.extend((cur.date, int(k)) for k in np.flatnonzero(ill))
    pi = np.vstack(pis)
    lam = np.vstack(lams)
    return CostSeries(
        dates=dates, pi=pi, lam=lam, lambda_avg=lam.mean(axis=1),
        day_positions=np.arange(1, len(series)),
        no_quote=no_quote, illiquid=illiquid)


# ── event study ────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EventStudyConfig:
    period_length: int = 60
    n_periods: int = 8
    training_periods: tuple[int, int] = (0, 1)  # adjacent period indices
    prediction_windows: tuple[tuple[int, int], ...] = ()  # () = default five
    n_permutations: int = 10_000
    rounds: int = 150
    learning_rate: float = 0.05
    activation: str = "tanh"

    def resolved_windows(self) -> list[tuple[int, int]]:
        if self.prediction_windows:
            return [tuple(w) for w in self.prediction_windows]
        lo, hi = self.training_periods
        if hi != lo + 1:
            raise ValueError("training periods must be adjacent")
        span = self.period_length
        windows = []
        for start_period in range(self.n_periods - 1):
            if start_period in (lo, hi) or start_period + 1 in (lo, hi):
                continue
            windows.append((start_period * span, (start_period + 2) * span))
        return windows

    def training_range(self) -> tuple[int, int]:
        lo, hi = self.training_periods
        return lo * self.period_length, (hi + 1) * self.period_length


@dataclass
class WindowResult:
    day_range: tuple[int, int]
    months: list[str]
    r_pearson: float
    p_pearson: float | None
    r_spearman: float
    p_spearman: float | None
    degenerate: bool = False


@dataclass
class HypothesisReport:
    windows: list[WindowResult]
    reference_pearson: float   # full-sample prediction-vs-index correlation
    reference_spearman: float
    index_name: str
    seeds: list[int]
    avg_lambda_pearson: float = float("nan")  # diagnostic: raw average-lambda series

    def to_dict(self) -> dict:
        return {
            "index": self.index_name,
            "seeds": list(self.seeds),
            "reference_pearson": self.reference_pearson,
            "reference_spearman": self.reference_spearman,
            "avg_lambda_pearson": None if np.isnan(self.avg_lambda_pearson)
                                  else self.avg_lambda_pearson,
            "windows": [
                {
                    "days": list(w.day_range),
                    "months": w.months,
                    "r_pearson": None if np.isnan(w.r_pearson) else w.r_pearson,
                    "p_pearson": w.p_pearson,
                    "r_spearman": None if np.isnan(w.r_spearman) else w.r_spearman,
                    "p_spearman": w.p_spearman,
                    "degenerate": w.degenerate,
                }
                for w in self.windows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def write_report_csv(report: HypothesisReport, handle) -> None:
    handle.write("days,p_pearson,p_spearman\n")
    for w in report.windows:
        p1 = "NA" if w.p_pearson is None else repr(w.p_pearson)
        p2 = "NA" if w.p_spearman is None else repr(w.p_spearman)
        handle.write(f"{w.day_range[0]}-{w.day_range[1]},{p1},{p2}\n")


def _months_by_majority(dates: list[dt.date], positions: np.ndarray,
                        day_range: tuple[int, int]) -> list[str]:
    """Months whose trading days fall mostly inside the day range."""
    inside: dict[str, int] = {}
    total: dict[str, int] = {}
    for day, pos in zip(dates, positions):
        key = month_key(day)
        total[key] = total.get(key, 0) + 1
        if day_range[0] <= pos < day_range[1]:
            inside[key] = inside.get(key, 0) + 1
    return [m for m in total if inside.get(m, 0) * 2 > total[m]]


def event_study(cost: CostSeries, index: IndexSeries,
                config: EventStudyConfig = EventStudyConfig(),
                net_spec: neural_kit.NetSpec | None = None,
                seeds: tuple[int, ...] = (1, 2, 3)) -> HypothesisReport:
    """Train on the training periods' lambda images, test each window.

    H0 per window: the window's prediction-index correlation equals the
    correlation obtained from the lambda data of the whole sample, i.e.
    predictions from window slices carry nothing beyond the average
    behavior.  Pearson p comes from a Fisher z comparison of the window
    against the full-sample prediction correlation; Spearman p from
    drawing random month subsets of the window's size (months are
    exchangeable under H0).  Subsets are drawn from the months outside
    the tested window, so a local anomaly cannot contaminate its own
    null distribution.  Constant predictions are reported NA.  The raw
    bucket-averaged lambda series' index correlation is kept as a
    diagnostic.
    """
    n_days_total = config.n_periods * config.period_length
    if cost.day_positions[-1] + 1 < n_days_total:
        raise ValueError(f"lambda series covers {cost.day_positions[-1] + 1} days, "
                         f"event study needs {n_days_total}")

    all_windows = monthly_windows(cost.lam, cost.dates)
    months = all_windows.months
    targets = np.array([index.value_for(m) for m in months])

    # training set: months mostly inside the training range
    train_months = _months_by_majority(cost.dates, cost.day_positions,
                                       config.training_range())
    train_ix = [months.index(m) for m in train_months]
    if len(train_ix) < 3:
        raise ValueError("training range covers fewer than 3 months")

    x_all, x_mean, x_scale = standardize(all_windows.images[train_ix].ravel())
    images = (all_windows.images - x_mean) / x_scale
    t_std, t_mean, t_scale = standardize(targets[train_ix])

    shape = images.shape[1:]
    base = net_spec or neural_kit.cnn7_spec(input_shape=shape, activation=config.activation)
    preds = np.zeros(len(months))
    for seed in seeds:
        net = neural_kit.init_net(neural_kit.NetSpec(base.layers, base.activation,
                                                     seed, base.input_shape))
        net = neural_kit.train(net, images[train_ix], t_std,
                               rounds=config.rounds, learning_rate=config.learning_rate)
        preds += neural_kit.forward_batch(net, images)
    preds = preds / len(seeds) * t_scale + t_mean

    monthly_lambda = np.array([
        cost.lambda_avg[[i for i, d in enumerate(cost.dates) if month_key(d) == m]].mean()
        for m in months])
    avg_lambda_pearson = pearson(monthly_lambda, targets)
    ref_pearson = pearson(preds, targets)
    ref_spearman = spearman(preds, targets)

    rng = np.random.default_rng(np.random.SeedSequence([max(seeds), 7]))
    results = []
    for day_range in config.resolved_windows():
        w_months = _months_by_majority(cost.dates, cost.day_positions, day_range)
        ix = np.array([months.index(m) for m in w_months])
        w_pred, w_idx = preds[ix], targets[ix]
        if np.ptp(w_pred) == 0.0 or np.ptp(w_idx) == 0.0:
            results.append(WindowResult(day_range, w_months, float("nan"), None,
                                        float("nan"), None, degenerate=True))
            continue
        r_p = pearson(w_pred, w_idx)
        p_p = fisher_z_pvalue(r_p, len(ix), ref_pearson, len(months))
        r_s = spearman(w_pred, w_idx)
        outside = np.array([j for j in range(len(months)) if j not in set(ix)])
        p_s = _subset_draw_pvalue(preds[outside], targets[outside], len(ix), r_s,
                                  ref_spearman, config.n_permutations, rng)
        results.append(WindowResult(day_range, w_months, r_p,
                                    None if np.isnan(p_p) else p_p, r_s, p_s))
    return HypothesisReport(results, ref_pearson, ref_spearman, index.name,
                            list(seeds), avg_lambda_pearson=avg_lambda_pearson)


def _subset_draw_pvalue(preds: np.ndarray, targets: np.ndarray, k: int,
                        observed: float, reference: float,
                        n_draws: int, rng: np.random.Generator) -> float:
    """P(|rho_s(random month subset) - ref| >= |observed - ref|)."""
    n = preds.size
    draws = np.argsort(rng.random((n_draws, n)), axis=1)[:, :k]
    pr = stats.rankdata(preds[draws], axis=1)
    tr = stats.rankdata(targets[draws], axis=1)
    pr = pr - pr.mean(axis=1, keepdims=True)
    tr = tr - tr.mean(axis=1, keepdims=True)
    denom = np.sqrt((pr * pr).sum(axis=1) * (tr * tr).sum(axis=1))
    ok = denom > 0
    rho = np.zeros(n_draws)
    rho[ok] = (pr * tr).sum(axis=1)[ok] / denom[ok]
    exceed = np.abs(rho - reference) >= abs(observed - reference) - 1e-12
    return float((1 + exceed.sum()) / (1 + n_draws))


# ── exports ────────────────────────────────────────────────────────────

def write_lambda_csv(cost: CostSeries, handle) -> None:
    handle.write("date,bucket,lambda\n")
    for i, day in enumerate(cost.dates):
        for k in range(cost.lam.shape[1]):
            handle.write(f"{day.isoformat()},{k},{float(cost.lam[i, k])!r}\n")


def write_lambda_daily_csv(cost: CostSeries, handle) -> None:
    handle.write("date,value\n")
    for day, value in zip(cost.dates, cost.lambda_avg):
        handle.write(f"{day.isoformat()},{float(value)!r}\n")


def write_pi_csv(cost: CostSeries, handle) -> None:
    handle.write("date,bucket,pi\n")
    for i, day in enumerate(cost.dates):
        for k in range(cost.pi.shape[1]):
            handle.write(f"{day.isoformat()},{k},{float(cost.pi[i, k])!r}\n")
