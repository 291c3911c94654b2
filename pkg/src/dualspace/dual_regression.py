"""Evolution-operator regression in the Fourier dual of the state space.

The day-over-day change of each state row is regressed on the previous
row after a discrete Fourier transform across buckets: with z_t the
32-dim stacking of the transform's real and imaginary parts,

    z_{t+1} - z_t = alpha + B z_t + e_t,

fit by least squares through a pseudoinverse of the Gram matrix (the
stacking makes several coordinates identically zero, so the normal
equations are always rank-deficient).  Predictions and residuals are
mapped back to bucket space by the inverse transform; the tiny
imaginary part this leaves is tracked and must stay below tolerance.
The remaining ops are the diagnostics built on that fit: the
predictor/residual variance split per bucket, cross-tape operator
similarity, and the prediction-vs-residual determination matrix.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .corrstats import pearson
from .state_space import StateMatrix

#: Relative singular-value cutoff for the Gram pseudoinverse.
PINV_RCOND = 1e-12

#: Largest tolerated |imaginary part| after inverse transforms.
IMAG_TOL = 1e-9


class NonRealReconstructionError(RuntimeError):
    """Inverse transform produced an imaginary part above tolerance."""


@dataclass(frozen=True)
class DualVector:
    re: np.ndarray
    im: np.ndarray

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, values: np.ndarray) -> "DualVector":
        return cls(np.ascontiguousarray(values.real), np.ascontiguousarray(values.imag))


@dataclass(frozen=True)
class BetaMatrix:
    values: np.ndarray  # (2n, 2n) real;  real/imaginary parts stacked

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] % 2:
            raise ValueError("beta matrix must be square with even size")
        if not np.isfinite(v).all():
            raise ValueError("beta matrix entries must be finite")

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass
class RegressionOutput:
    predictions: np.ndarray  # (T-1, n_buckets) real
    residuals: np.ndarray    # (T-1, n_buckets); dependent minus predicted
    max_imag: float
    beta: BetaMatrix
    intercept: np.ndarray    # (2n,) dual-space intercept
    gram_rank: int
    dates: list[dt.date]


@dataclass
class VarianceSplit:
    predictor: np.ndarray  # share of dependent variance carried by the fit
    residual: np.ndarray
    degenerate_buckets: list[int] = field(default_factory=list)


def forward_dual(row: np.ndarray) -> DualVector:
    """Unnormalized DFT of one state row: sum_k x_k exp(-2 pi i wk/n)."""
    row = np.asarray(row, dtype=float)
    if not np.isfinite(row).all():
        raise ValueError("state row must be finite")
    return DualVector.from_complex(np.fft.fft(row))


def inverse_dual(v: DualVector, tol: float = IMAG_TOL) -> tuple[np.ndarray, float]:
    """Inverse DFT (1/n normalized); returns (real part, max |imag|)."""
    values = np.fft.ifft(v.to_complex())
    max_imag = float(np.abs(values.imag).max()) if values.size else 0.0
    if max_imag > tol:
        raise NonRealReconstructionError(
            f"non-real reconstruction: max imaginary part {max_imag:g} exceeds {tol:g}")
    return values.real, max_imag


def stack_dual(spectra: np.ndarray) -> np.ndarray:
    """(T, n) complex -> (T, 2n) real with [Re | Im] layout."""
    return np.hstack([spectra.real, spectra.imag])


def unstack_dual(stacked: np.ndarray) -> np.ndarray:
    n = stacked.shape[-1] // 2
    return stacked[..., :n] + 1j * stacked[..., n:]


def fit_beta(states: StateMatrix, imag_tol: float = IMAG_TOL) -> RegressionOutput:
    """Least-squares fit of the dual-space evolution operator.

    Solves the normal equations with a pseudoinverse (relative cutoff
    1e-12) so rank deficiency from the stacking symmetry reports a rank
    instead of failing.  An intercept column is included: dropping it
    would leave residual means unconstrained and break the exact
    orthogonality between fitted values and residuals that the
    downstream variance diagnostics rely on.  Residual rows are
    dependent-minus-predicted exactly, in bucket space.
    """
    x = np.asarray(states.values, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a state matrix with at least 2 rows")
    if not np.isfinite(x).all():
        raise ValueError("state matrix must be finite")

    z = stack_dual(np.fft.fft(x, axis=1))
    deps = z[1:] - z[:-1]
    design = np.hstack([np.ones((z.shape[0] - 1, 1)), z[:-1]])

    gram = design.T @ design
    coef = np.linalg.pinv(gram, rcond=PINV_RCOND) @ design.T @ deps
    gram_rank = int(np.linalg.matrix_rank(gram, rtol=PINV_RCOND, hermitian=True))

    pred_dual = design @ coef
    pred_complex = np.fft.ifft(unstack_dual(pred_dual), axis=1)
    dep_complex = np.fft.ifft(unstack_dual(deps), axis=1)
    max_imag = float(max(np.abs(pred_complex.imag).max(), np.abs(dep_complex.imag).max()))
    if max_imag > imag_tol:
        raise NonRealReconstructionError(
            f"non-real reconstruction: max imaginary part {max_imag:g} exceeds {imag_tol:g}")

    predictions = pred_complex.real
    residuals = (x[1:] - x[:-1]) - predictions
    return RegressionOutput(
        predictions=predictions,
        residuals=residuals,
        max_imag=max_imag,
        beta=BetaMatrix(coef[1:].T.copy()),
        intercept=coef[0].copy(),
        gram_rank=gram_rank,
        dates=list(states.dates[1:]),
    )


def variance_split(output: RegressionOutput, states: StateMatrix) -> VarianceSplit:
    """Per-bucket share of dependent variance in the fit vs the residual.

    The denominator is the dependent variable (the day-over-day state
    change), so predictor + residual shares sum to one exactly by
    least-squares orthogonality; buckets with zero dependent variance
    are reported as degenerate with both shares 0.
    """
    x = np.asarray(states.values, dtype=float)
    delta = x[1:] - x[:-1]
    if delta.shape != output.predictions.shape:
        raise ValueError("regression output is not aligned with the state matrix")
    denom = (delta**2).sum(axis=0)
    pred_ss = (output.predictions**2).sum(axis=0)
    resid_ss = (output.residuals**2).sum(axis=0)
    ok = denom > 0
    p = np.zeros_like(denom)
    f = np.zeros_like(denom)
    p[ok] = pred_ss[ok] / denom[ok]
    f[ok] = resid_ss[ok] / denom[ok]
    return VarianceSplit(p, f, degenerate_buckets=list(np.flatnonzero(~ok)))


class BetaSimilarity(NamedTuple):
    col_corr: float
    row_corr: float


def beta_similarity(a: BetaMatrix, b: BetaMatrix) -> BetaSimilarity:
    """Mean per-column and per-row Pearson correlation of two operators.

    Vector pairs where either side is constant (the identically-zero
    rows forced by the stacking symmetry) are skipped.
    """
    av, bv = a.values, b.values
    if av.shape != bv.shape:
        raise ValueError("beta matrices must have equal shapes")

    def mean_corr(rows_a, rows_b):
        vals = [pearson(ra, rb)
                for ra, rb in zip(rows_a, rows_b)
                if np.ptp(ra) > 0 and np.ptp(rb) > 0]
        return float(np.mean(vals)) if vals else 0.0

    return BetaSimilarity(col_corr=mean_corr(av.T, bv.T), row_corr=mean_corr(av, bv))


def determination_matrix(outputs: list[RegressionOutput]) -> np.ndarray:
    """Squared correlations between daily prediction and residual variances.

    Entry (i, j) is r^2 where r correlates, over days, the cross-bucket
    variance of tape i's prediction rows with that of tape j's residual
    rows.  All outputs must cover the same dates.
    """
    if not outputs:
        raise ValueError("need at least one regression output")
    dates = outputs[0].dates
    for out in outputs[1:]:
        if out.dates != dates:
            raise ValueError("regression outputs cover different dates")
    pred_var = [out.predictions.var(axis=1) for out in outputs]
    resid_var = [out.residuals.var(axis=1) for out in outputs]
    n = len(outputs)
    result = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            result[i, j] = pearson(pred_var[i], resid_var[j]) ** 2
    return result


def residual_autocorrelation(output: RegressionOutput, lag: int = 1) -> np.ndarray:
    """Per-bucket autocorrelation of residuals at the given lag."""
    r = output.residuals
    if lag <= 0 or lag >= r.shape[0]:
        raise ValueError("lag must be in [1, T-2]")
    return np.array([pearson(r[:-lag, k], r[lag:, k]) for k in range(r.shape[1])])


# ── artifact serialization ─────────────────────────────────────────────

def write_beta_csv(beta: BetaMatrix, handle) -> None:
    for row in beta.values:
        handle.write(",".join(repr(v) for v in row.tolist()) + "\n")


def read_beta_csv(handle) -> BetaMatrix:
    rows = [[float(v) for v in line.strip().split(",")]
            for line in handle if line.strip() and not line.startswith("#")]
    return BetaMatrix(np.array(rows, dtype=float))


def write_rows_csv(dates: list[dt.date], matrix: np.ndarray, handle) -> None:
    nb = matrix.shape[1]
    handle.write("date," + ",".join(f"b{k}" for k in range(nb)) + "\n")
    for day, row in zip(dates, matrix):
        handle.write(day.isoformat() + "," + ",".join(repr(v) for v in row.tolist()) + "\n")


def read_rows_csv(handle) -> tuple[list[dt.date], np.ndarray]:
    dates: list[dt.date] = []
    rows: list[list[float]] = []
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
        rows.append([float(v) for v in fields[1:]])
    if not rows:
        raise ValueError("empty rows file")
    return dates, np.array(rows, dtype=float)


def diagnostics(output: RegressionOutput, split: VarianceSplit) -> dict:
    return {
        "max_imag": output.max_imag,
        "gram_rank": output.gram_rank,
        "max_abs_residual": float(np.abs(output.residuals).max()),
        "predictor_share": [float(v) for v in split.predictor],
        "residual_share": [float(v) for v in split.residual],
        "degenerate_buckets": [int(k) for k in split.degenerate_buckets],
    }
