"""Karhunen-Loeve path sampling of periodic stationary processes.

Real processes are synthesized from the two-sided expansion
X(t) = sqrt(mu_0) xi_0 + sum_{k>=1} sqrt(mu_k) (a_k sqrt2 cos(kt) + b_k sqrt2 sin(kt))
with independent standard normal a_k, b_k; proper complex processes from
X(t) = sum_k sqrt(mu_k) xi_k e^{ikt} with spherical complex xi_k
(re/im parts independent N(0, 1/2)).  Uniform grids go through the FFT.

All randomness comes from counter-based Philox streams keyed by the user
seed, with the stream counter indexed by the path number, so batches are
bit-reproducible and embarrassingly partitionable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SpectrumError
from .spectra import DiscreteSpectrum
from .weights import PERIODIC, Weight

GENERATOR_ID = "philox4x64"

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PathSample:
    """One sampled path on a grid in [0, 2*pi)."""

    grid: np.ndarray
    values: np.ndarray
    seed: int
    truncation: int
    kind: str                   # "real" | "proper"
    generator: str = GENERATOR_ID

    def __post_init__(self) -> None:
        if self.grid.shape != self.values.shape:
            raise InputError("grid and values must have matching shapes")


def _path_rng(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=path_index << 192))


def _uniform_grid(grid: int | np.ndarray) -> tuple[np.ndarray, int | None]:
    """Accept a point count (uniform open grid on [0, 2*pi)) or explicit points."""
    if isinstance(grid, (int, np.integer)):
        if grid < 4:
            raise InputError("need at least 4 grid points")
        return TWO_PI * np.arange(int(grid)) / int(grid), int(grid)
    pts = np.asarray(grid, dtype=float)
    if pts.ndim != 1 or len(pts) < 2:
        raise InputError("grid must be a 1-D array of at least 2 points")
    return pts, None


def _real_coefficients(spec: DiscreteSpectrum, K: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Complex mode coefficients c_k, k = -K..K, of one real path draw."""
    mu = spec.masses(np.arange(0, K + 1))
    g0 = rng.standard_normal()
    # xi_k = a + ib with Var(a) = Var(b) = 1/2 so that sqrt2*a has unit variance
    re = rng.standard_normal(K) * np.sqrt(0.5)
    im = rng.standard_normal(K) * np.sqrt(0.5)
    c = np.zeros(2 * K + 1, dtype=complex)
    c[K] = math.sqrt(mu[0]) * g0
    pos = np.sqrt(mu[1:]) * (re + 1j * im)
    c[K + 1:] = pos
    c[:K] = np.conj(pos[::-1])
    return c


def _proper_coefficients(spec: DiscreteSpectrum, K: int,
                         rng: np.random.Generator) -> np.ndarray:
    ks = np.arange(-K, K + 1)
    mu = spec.masses(ks)
    re = rng.standard_normal(2 * K + 1) * np.sqrt(0.5)
    im = rng.standard_normal(2 * K + 1) * np.sqrt(0.5)
    return np.sqrt(mu) * (re + 1j * im)


def _synthesize(coeffs: np.ndarray, grid_pts: np.ndarray, n_uniform: int | None) -> np.ndarray:
    """Evaluate sum_k c_k e^{ikt}; FFT on uniform grids, direct product otherwise."""
    K = (len(coeffs) - 1) // 2
    if n_uniform is not None and n_uniform > 2 * K:
        buf = np.zeros(n_uniform, dtype=complex)
        ks = np.arange(-K, K + 1)
        buf[ks % n_uniform] = coeffs
        return np.fft.ifft(buf) * n_uniform
    ks = np.arange(-K, K + 1)
    return np.exp(1j * np.outer(grid_pts, ks)) @ coeffs


def sample_real_periodic(spec: DiscreteSpectrum, K: int, grid: int | np.ndarray,
                         seed: int, path_index: int = 0) -> PathSample:
    """Sample a real path of the 2*pi-periodic process with spectrum mu.

    Requires an even spectrum; the synthesized complex series is checked to be
    real to machine tolerance and returned as floats.
    """
    if not spec.even:
        raise SpectrumError("real-path sampling requires an even spectrum (mu_{-k} = mu_k)")
    if K < 1:
        raise InputError("mode cutoff K must be >= 1")
    pts, n_uniform = _uniform_grid(grid)
    rng = _path_rng(seed, path_index)
    coeffs = _real_coefficients(spec, K, rng)
    vals = _synthesize(coeffs, pts, n_uniform)
    scale = float(np.max(np.abs(vals))) or 1.0
    if float(np.max(np.abs(vals.imag))) > 1e-10 * scale:
        raise InputError("real synthesis produced a non-negligible imaginary part")
    return PathSample(grid=pts, values=vals.real.copy(), seed=int(seed),
                      truncation=int(K), kind="real")


def sample_proper_periodic(spec: DiscreteSpectrum, K: int, grid: int | np.ndarray,
                           seed: int, path_index: int = 0) -> PathSample:
    """Sample a proper (circular) complex path: independent spherical complex
    coefficients on every mode, E X(t)^2 = 0 by construction."""
    if K < 1:
        raise InputError("mode cutoff K must be >= 1")
    pts, n_uniform = _uniform_grid(grid)
    rng = _path_rng(seed, path_index)
    coeffs = _proper_coefficients(spec, K, rng)
    vals = _synthesize(coeffs, pts, n_uniform)
    return PathSample(grid=pts, values=vals, seed=int(seed), truncation=int(K), kind="proper")


@dataclass(frozen=True)
class NormSquared:
    plain: float                # int_0^{2pi} q |X|^2 dt
    normalized: float           # the same integral against dt/2pi


def weighted_norm_sq(path: PathSample, w: Weight) -> NormSquared:
    """Quadrature of q |X|^2 over the path grid, in both measure conventions.

    Uniform open grids use the periodic rectangle rule (the trapezoid rule of
    the periodic extension); explicit grids use the trapezoid rule as given.
    """
    if w.domain != PERIODIC or abs(w.period - TWO_PI) > 1e-12:
        raise InputError("path norms need a weight of period 2*pi")
    pts = path.grid
    integrand = np.asarray(w(pts), dtype=float) * np.abs(path.values) ** 2
    n = len(pts)
    uniform = np.allclose(np.diff(pts), TWO_PI / n, rtol=1e-9, atol=1e-12) and \
        abs(pts[0]) < 1e-12
    if uniform:
        plain = float(np.sum(integrand) * TWO_PI / n)
    else:
        plain = float(np.trapezoid(integrand, pts))
    return NormSquared(plain=plain, normalized=plain / TWO_PI)


def batch_norms(spec: DiscreteSpectrum, w: Weight, K: int, grid_n: int,
                n_paths: int, seed: int, kind: str = "real") -> np.ndarray:
    """Weighted squared norms of ``n_paths`` independent paths.

    Every path draws from its own counter stream, so any partitioning of the
    path indices across workers reproduces the same numbers.
    """
    if kind not in ("real", "proper"):
        raise InputError(f"unknown path kind '{kind}'")
    if n_paths < 1:
        raise InputError("need n_paths >= 1")
    pts, n_uniform = _uniform_grid(grid_n)
    if n_uniform is None:
        raise InputError("batch sampling needs a uniform grid size")
    q_vals = np.asarray(w(pts), dtype=float)
    out = np.empty(n_paths)
    for i in range(n_paths):
        rng = _path_rng(seed, i)
        if kind == "real":
            coeffs = _real_coefficients(spec, K, rng)
        else:
            coeffs = _proper_coefficients(spec, K, rng)
        vals = _synthesize(coeffs, pts, n_uniform)
        out[i] = float(np.sum(q_vals * np.abs(vals) ** 2) * TWO_PI / n_uniform)
    return out


def export_path_csv(path: PathSample, dest: str) -> None:
    """CSV columns (t, re, im)."""
    vals = np.asarray(path.values)
    data = np.column_stack([path.grid, vals.real, vals.imag if np.iscomplexobj(vals)
                            else np.zeros_like(path.grid)])
    np.savetxt(dest, data, delimiter=",", fmt="%.17g", header="t,re,im", comments="")


def export_norms_csv(norms: np.ndarray, dest: str) -> None:
    """CSV columns (sample_id, norm_sq)."""
    ids = np.arange(len(norms))
    np.savetxt(dest, np.column_stack([ids, norms]), delimiter=",",
               fmt=["%d", "%.17g"], header="sample_id,norm_sq", comments="")
