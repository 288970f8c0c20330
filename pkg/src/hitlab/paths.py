"""One-dimensional sample paths: Brownian motion, Bessel(3), fractional
Brownian motion, and Bessel/Brownian mixtures.

All samplers are exact in law at the grid points (no Euler discretisation
bias) and are pure functions of their :class:`~hitlab.rng.RngStream`
argument, so batches may be generated in parallel without affecting
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

#: largest number of grid points accepted by the dense-Cholesky fBM sampler
CHOLESKY_MAX_POINTS = 2**13

#: circulant eigenvalues down to -tol * max(eig) are clamped to zero;
#: anything lower makes the embedding invalid
CIRCULANT_EIG_TOL = 1e-10


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("times must be a one-dimensional, non-empty array")
        if not np.all(np.isfinite(t)):
            raise ValueError("times must be finite")
        if t[0] != 0.0:
            raise ValueError("times must start at 0")
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise ValueError("times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon: float, steps: int) -> "TimeGrid":
        """Constant-step grid with `steps` intervals on [0, horizon]."""
        if horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if steps < 1:
            raise ValueError("steps must be at least 1")
        return cls(np.linspace(0.0, float(horizon), int(steps) + 1))

    @classmethod
    def geometric(
        cls,
        smallest: float,
        largest: float,
        points_per_decade: int = 32,
        include=(),
    ) -> "TimeGrid":
        """0 plus geometrically spaced times from `smallest` to `largest`.

        Resolution proportional to the time scale, suited to probing
        small-time behaviour.  Extra times in `include` are merged in.
        """
        if not 0.0 < smallest < largest:
            raise ValueError("need 0 < smallest < largest")
        if points_per_decade < 1:
            raise ValueError("points_per_decade must be at least 1")
        decades = math.log10(largest / smallest)
        n = max(2, int(math.ceil(decades * points_per_decade)) + 1)
        t = np.geomspace(smallest, largest, n)
        extra = np.asarray(list(include), dtype=float)
        if extra.size and (np.any(extra <= 0.0) or np.any(extra > largest)):
            raise ValueError("included times must lie in (0, largest]")
        t = np.unique(np.concatenate([[0.0], t, extra]))
        return cls(t)

    @property
    def n_points(self) -> int:
        return int(self.times.size)

    @property
    def n_steps(self) -> int:
        return int(self.times.size) - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def is_uniform(self, rel_tol: float = 1e-9) -> bool:
        d = self.dt
        if d.size == 0:
            return True
        return bool(np.max(np.abs(d - d[0])) <= rel_tol * d[0])


@dataclass(frozen=True)
class Path:
    """Sampled values of a 1-D process on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.times.shape:
            raise ValueError("values must have one entry per grid time")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def value_at(self, t) -> np.ndarray:
        """Linear interpolation of the path at times within the grid span."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.grid.times[-1]):
            raise ValueError("requested time outside the grid span")
        return np.interp(t, self.grid.times, self.values)

    def to_csv(self, stream) -> None:
        """Write the path as CSV with columns t,value."""
        stream.write("t,value\n")
        for t, v in zip(self.grid.times, self.values):
            stream.write(f"{t!r},{v!r}\n")


def _require_sampling_grid(grid: TimeGrid) -> None:
    if grid.n_points < 2:
        raise ValueError("grid must have at least 2 points to sample a path")


def _bm_batch(gen: np.random.Generator, dt: np.ndarray, count: int) -> np.ndarray:
    """(count, len(dt)+1) Brownian values with a leading zero column."""
    z = gen.standard_normal((count, dt.size))
    out = np.empty((count, dt.size + 1))
    out[:, 0] = 0.0
    np.cumsum(z * np.sqrt(dt), axis=1, out=out[:, 1:])
    return out


def _bes3_batch(gen: np.random.Generator, dt: np.ndarray, count: int) -> np.ndarray:
    comps = _bm_batch(gen, dt, 3 * count).reshape(count, 3, dt.size + 1)
    return np.sqrt(np.einsum("ikj,ikj->ij", comps, comps))


def sample_bm(grid: TimeGrid, rng: RngStream) -> Path:
    """Standard Brownian motion, exact in law at the grid points.

    Increments over consecutive grid intervals are independent centred
    Gaussians with variance equal to the interval length.
    """
    _require_sampling_grid(grid)
    return Path(grid, _bm_batch(rng.generator(), grid.dt, 1)[0])


def sample_bm_batch(grid: TimeGrid, count: int, rng: RngStream) -> np.ndarray:
    """`count` independent Brownian paths as a (count, n_points) array."""
    _require_sampling_grid(grid)
    if count < 1:
        raise ValueError("count must be positive")
    return _bm_batch(rng.generator(), grid.dt, count)


def sample_bes3(grid: TimeGrid, rng: RngStream) -> Path:
    """Bessel(3) process from 0: the norm of three independent Brownian motions.

    Exact in law at the grid points; all values are non-negative.
    """
    _require_sampling_grid(grid)
    return Path(grid, _bes3_batch(rng.generator(), grid.dt, 1)[0])


def sample_bes3_batch(grid: TimeGrid, count: int, rng: RngStream) -> np.ndarray:
    _require_sampling_grid(grid)
    if count < 1:
        raise ValueError("count must be positive")
    return _bes3_batch(rng.generator(), grid.dt, count)


def sample_mixture(alpha: float, grid: TimeGrid, rng: RngStream) -> Path:
    """alpha * Bessel(3) + sqrt(1 - alpha^2) * (independent Brownian motion)."""
    _require_sampling_grid(grid)
    return Path(grid, _mixture_batch(alpha, rng.generator(), grid.dt, 1)[0])


def sample_mixture_batch(alpha: float, grid: TimeGrid, count: int, rng: RngStream) -> np.ndarray:
    _require_sampling_grid(grid)
    if count < 1:
        raise ValueError("count must be positive")
    return _mixture_batch(alpha, rng.generator(), grid.dt, count)


def _mixture_batch(alpha: float, gen: np.random.Generator, dt: np.ndarray, count: int) -> np.ndarray:
    alpha = float(alpha)
    if not abs(alpha) < 1.0:
        raise ValueError("alpha must satisfy |alpha| < 1")
    r = _bes3_batch(gen, dt, count)
    m = _bm_batch(gen, dt, count)
    return alpha * r + math.sqrt(1.0 - alpha * alpha) * m


# ---------------------------------------------------------------------------
# fractional Brownian motion


def fgn_autocov(hurst: float, lags: np.ndarray) -> np.ndarray:
    """Autocovariance of unit-spacing fractional Gaussian noise at integer lags."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def fbm_cov(hurst: float, s, t) -> np.ndarray:
    """Covariance of fractional Brownian motion values at times s and t."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)


def circulant_eigenvalues(hurst: float, n: int) -> np.ndarray:
    """Eigenvalues of the circulant embedding of the length-n fGn covariance."""
    gamma = fgn_autocov(hurst, np.arange(n + 1))
    first_row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(first_row).real


def _fgn_circulant(gen: np.random.Generator, eigs: np.ndarray, n: int, count: int) -> np.ndarray:
    m = 2 * n
    scale = np.sqrt(np.clip(eigs, 0.0, None))
    z = gen.standard_normal((count, m))
    v = np.zeros((count, m), dtype=complex)
    v[:, 0] = scale[0] * z[:, 0]
    v[:, n] = scale[n] * z[:, 1]
    if n > 1:
        half = scale[1:n] / math.sqrt(2.0)
        v[:, 1:n] = half * (z[:, 2 : n + 1] + 1j * z[:, n + 1 :])
        v[:, n + 1 :] = np.conj(v[:, n - 1 : 0 : -1])
    return np.fft.fft(v, axis=1).real[:, :n] / math.sqrt(m)


def _fgn_cholesky(gen: np.random.Generator, hurst: float, n: int, count: int) -> np.ndarray:
    from scipy.linalg import toeplitz

    cov = toeplitz(fgn_autocov(hurst, np.arange(n)))
    chol = np.linalg.cholesky(cov)
    z = gen.standard_normal((count, n))
    return z @ chol.T


def _fbm_batch(hurst: float, grid: TimeGrid, count: int, gen: np.random.Generator, method: str) -> np.ndarray:
    if not 0.0 < hurst < 1.0:
        raise ValueError("hurst must lie strictly between 0 and 1")
    if not grid.is_uniform():
        raise ValueError("fractional Brownian motion requires a uniform grid")
    n = grid.n_steps
    if n < 1:
        raise ValueError("grid must have at least one step")
    pow2 = n & (n - 1) == 0
    if method not in ("auto", "circulant", "cholesky"):
        raise ValueError("method must be 'auto', 'circulant' or 'cholesky'")

    if method == "circulant" and not pow2:
        raise ValueError("circulant sampling requires a power-of-two step count")
    if method in ("auto", "circulant") and pow2:
        eigs = circulant_eigenvalues(hurst, n)
        if eigs.min() >= -CIRCULANT_EIG_TOL * eigs.max():
            fgn = _fgn_circulant(gen, eigs, n, count)
        elif method == "circulant":
            raise ValueError("circulant embedding is not non-negative definite here")
        else:
            fgn = None
    else:
        fgn = None
    if fgn is None:
        if grid.n_points > CHOLESKY_MAX_POINTS:
            raise ValueError(
                f"dense Cholesky sampling is capped at {CHOLESKY_MAX_POINTS} grid points"
            )
        fgn = _fgn_cholesky(gen, hurst, n, count)

    dt = float(grid.times[-1]) / n
    out = np.empty((count, n + 1))
    out[:, 0] = 0.0
    np.cumsum(fgn * dt**hurst, axis=1, out=out[:, 1:])
    return out


def sample_fbm(hurst: float, grid: TimeGrid, rng: RngStream, method: str = "auto") -> Path:
    """Fractional Brownian motion with the exact covariance
    ``0.5 * (s^{2H} + t^{2H} - |t - s|^{2H})`` at the grid points.

    Parameters
    ----------
    hurst : float
        Hurst parameter, strictly between 0 and 1.
    grid : TimeGrid
        Uniform grid.  The default circulant sampler needs a power-of-two
        step count; the dense Cholesky sampler accepts any uniform grid up
        to ``CHOLESKY_MAX_POINTS`` points.
    method : {"auto", "circulant", "cholesky"}
        "auto" uses the circulant embedding when applicable and falls back
        to Cholesky when the embedding fails or the step count is not a
        power of two.
    """
    _require_sampling_grid(grid)
    return Path(grid, _fbm_batch(hurst, grid, 1, rng.generator(), method)[0])


def sample_fbm_batch(
    hurst: float, grid: TimeGrid, count: int, rng: RngStream, method: str = "auto"
) -> np.ndarray:
    _require_sampling_grid(grid)
    if count < 1:
        raise ValueError("count must be positive")
    return _fbm_batch(hurst, grid, count, rng.generator(), method)
