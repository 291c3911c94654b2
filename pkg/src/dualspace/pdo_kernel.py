"""Spectral evolution numerics: constant-coefficient diffusion symbols,
periodic-grid propagation, and the matrix-exponential state propagator.

A drift-diffusion generator with drift a and diffusion matrix S acts in
Fourier space as multiplication by exp((i k.a - k'Sk) t); evolving an
initial condition is transform, multiply, inverse transform.  The same
propagator idea applies to the fitted dual-space operator: the discrete
regression corresponds in continuous time to dX = B X dt + de, whose
solution is a matrix-exponential moving average over the noise path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual_regression import BetaMatrix


@dataclass(frozen=True)
class DiffusionParams:
    drift: np.ndarray      # (n,)
    diffusion: np.ndarray  # (n, n) symmetric positive semidefinite

    def __post_init__(self):
        drift = np.atleast_1d(np.asarray(self.drift, dtype=float))
        diff = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diff)
        if diff.shape != (drift.size, drift.size):
            raise ValueError("diffusion matrix must be n x n for n-dim drift")
        if not np.allclose(diff, diff.T, atol=1e-12):
            raise ValueError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(diff).min() < -1e-12:
            raise ValueError("diffusion matrix must be positive semidefinite")


@dataclass
class SpectralGrid:
    points: np.ndarray  # uniform 1-D grid
    values: np.ndarray  # complex samples

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.points.ndim != 1 or self.points.size != self.values.size:
            raise ValueError("need one value per grid point")
        if self.points.size >= 2:
            steps = np.diff(self.points)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise ValueError("grid must be uniform")

    @property
    def spacing(self) -> float:
        return float(self.points[1] - self.points[0])

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points.size, d=self.spacing)


def diffusion_symbol(params: DiffusionParams, k, t: float) -> complex | np.ndarray:
    """exp((i k.a - k'Sk) t) for a wavenumber vector (or scalar, n=1)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    k = np.asarray(k, dtype=float)
    if k.ndim <= 1 and k.size == params.drift.size:
        kv = k.reshape(-1)
        exponent = (1j * kv @ params.drift - kv @ params.diffusion @ kv) * t
        return complex(np.exp(exponent))
    # vectorized over many wavenumbers (rows of k), 1-D case included
    kv = np.atleast_2d(k.reshape(-1, params.drift.size))
    quad = np.einsum("ki,ij,kj->k", kv, params.diffusion, kv)
    return np.exp((1j * kv @ params.drift - quad) * t).reshape(k.shape[:1] or ())


def pdo_evolve(grid: SpectralGrid, params: DiffusionParams, t: float) -> SpectralGrid:
    """Evolve grid samples under the diffusion symbol for time t.

    Periodic boundary conditions are implied by the discrete transform;
    the grid must be wide enough that wraparound of the evolved profile
    is negligible for the caller's purposes.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if params.drift.size != 1:
        raise ValueError("grid evolution is implemented for 1-D problems")
    multiplier = diffusion_symbol(params, grid.wavenumbers.reshape(-1, 1), t)
    evolved = np.fft.ifft(np.fft.fft(grid.values) * multiplier)
    return SpectralGrid(grid.points.copy(), evolved)


def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a truncated series."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite")
    norm = np.abs(m).sum(axis=1).max()
    squarings = max(0, int(np.ceil(np.log2(norm)))) + 1 if norm > 0 else 0
    a = m / (2.0**squarings)
    result = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for order in range(1, 41):
        term = term @ a / order
        result = result + term
        if np.abs(term).max() < 1e-18 * max(1.0, np.abs(result).max()):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def _as_matrix(beta) -> np.ndarray:
    return beta.values if isinstance(beta, BetaMatrix) else np.asarray(beta, dtype=float)


def propagate_state(x0: np.ndarray, beta, noise, n_steps: int, dt: float) -> np.ndarray:
    """Discrete moving-average propagation of dX = B X dt + de.

    Returns exp(B n dt) x0 + sum_t exp(B (n-t) dt) noise_t dt, with the
    noise indexed t = 1..n.  Computed by stepping with the single-step
    exponential, which is algebraically the same sum.
    """
    b = _as_matrix(beta)
    x = np.asarray(x0, dtype=float).copy()
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    noise = [] if noise is None else list(noise)
    if noise and len(noise) != n_steps:
        raise ValueError("need one noise vector per step")
    step = matrix_exp(b * dt)
    for t in range(n_steps):
        x = step @ x
        if noise:
            x = x + np.asarray(noise[t], dtype=float) * dt
    return x


def beta_symbol(beta, t: float, horizon: float) -> np.ndarray:
    """Propagator matrix exp(B (T - t)); the summable operator symbol."""
    if horizon < t:
        raise ValueError("horizon must be >= t")
    return matrix_exp(_as_matrix(beta) * (horizon - t))


# ── I/O ────────────────────────────────────────────────────────────────

def write_symbol_csv(matrix: np.ndarray, handle) -> None:
    for row in np.asarray(matrix, dtype=float):
        handle.write(",".join(repr(float(v)) for v in row) + "\n")


def write_grid_csv(grid: SpectralGrid, handle) -> None:
    handle.write("point,re,im\n")
    for x, v in zip(grid.points, grid.values):
        handle.write(f"{float(x)!r},{float(v.real)!r},{float(v.imag)!r}\n")


def read_grid_csv(handle) -> SpectralGrid:
    points, values = [], []
    header_seen = False
    for line in handle:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            continue
        x, re, im = line.split(",")
        points.append(float(x))
        values.append(float(re) + 1j * float(im))
    if not points:
        raise ValueError("empty grid file")
    return SpectralGrid(np.array(points), np.array(values))
