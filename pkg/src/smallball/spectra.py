"""Spectral models of stationary Gaussian processes.

Two families are supported: discrete two-sided mass sequences (mu_k)_{k in Z}
for periodic processes, and spectral densities m(u) on the real line for
continuous-time processes.  Every model carries a power-law tail descriptor
(r, M-, M+) with |k|^r mu_k -> M_{+-} (resp. |u|^r m(u) -> M_{+-}), which is
all the closed-form small-deviation constants need.  Models whose density has
no usable closed form are supported as tail-only models; operator assembly is
refused for those with a distinct error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DivergenceError, OperatorError, SpectrumError

# Default symmetric cutoff for series evaluation; the analytic tail remainder
# is attached to every truncated sum so truncation error stays a reported
# quantity rather than a silent one.
DEFAULT_TRUNCATION = 100_000

# Built-in models must reproduce their declared tail constant to 1% at the
# largest evaluated indices.
TAIL_CHECK_RTOL = 0.01


@dataclass(frozen=True)
class TailDescriptor:
    """Power-law tail (r, M-, M+) of a spectral measure or density."""

    r: float
    m_minus: float
    m_plus: float

    def __post_init__(self) -> None:
        if not self.r > 1:
            raise SpectrumError(f"tail exponent must satisfy r > 1, got r={self.r}")
        if self.m_minus < 0 or self.m_plus < 0:
            raise SpectrumError("tail constants must be non-negative")
        if self.m_minus + self.m_plus <= 0:
            raise SpectrumError("at least one tail constant must be positive")

    @property
    def symmetric(self) -> bool:
        scale = max(self.m_minus, self.m_plus)
        return abs(self.m_minus - self.m_plus) <= 1e-12 * scale

    def to_json_dict(self) -> dict:
        return {"r": self.r, "m_minus": self.m_minus, "m_plus": self.m_plus}


@dataclass(frozen=True)
class SeriesSum:
    """A truncated series value with its analytic tail remainder estimate."""

    value: float
    tail_bound: float
    converged: bool = True


@dataclass(frozen=True)
class DiscreteSpectrum:
    """Two-sided spectral mass sequence k -> mu_k with power-law tail.

    ``mass`` must accept integer numpy arrays.  ``even`` declares the
    real-process symmetry mu_{-k} = mu_k; builders set it, tables are probed.
    """

    mass: Callable[[np.ndarray], np.ndarray]
    tail: TailDescriptor
    truncation: int = DEFAULT_TRUNCATION
    even: bool = False
    name: str = "discrete"

    def masses(self, k: np.ndarray | int) -> np.ndarray:
        k = np.asarray(k)
        mu = np.asarray(self.mass(k), dtype=float)
        if np.any(mu < 0):
            raise SpectrumError(f"model {self.name}: negative spectral mass")
        return mu

    def check_tail(self, rtol: float = TAIL_CHECK_RTOL, n_probe: int = 10) -> None:
        """Verify |k|^r mu_k against the declared constants at the largest indices."""
        ks = np.arange(self.truncation - n_probe + 1, self.truncation + 1)
        for sign, m_decl in ((1, self.tail.m_plus), (-1, self.tail.m_minus)):
            ratios = np.abs(sign * ks) ** self.tail.r * self.masses(sign * ks)
            if m_decl == 0:
                if np.any(ratios > rtol):
                    raise SpectrumError(f"model {self.name}: tail not vanishing as declared")
            elif np.any(np.abs(ratios / m_decl - 1) > rtol):
                raise SpectrumError(
                    f"model {self.name}: tail ratio {ratios[-1]:.6g} deviates from "
                    f"declared {m_decl:.6g} by more than {rtol:.0%}"
                )


@dataclass(frozen=True)
class ContinuousSpectrum:
    """Spectral density u -> m(u) on the real line, or a tail-only stand-in.

    Tail-only models (``density_available`` False) still feed every
    closed-form constant; operator assembly refuses them.
    """

    density: Callable[[np.ndarray], np.ndarray] | None
    tail: TailDescriptor
    density_available: bool
    kernel_exact: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "continuous"

    def density_values(self, u: np.ndarray | float) -> np.ndarray:
        if not self.density_available:
            raise OperatorError(
                f"model {self.name} is tail-only: no spectral density is available"
            )
        u = np.asarray(u, dtype=float)
        m = np.asarray(self.density(u), dtype=float)
        if np.any(m < 0):
            raise SpectrumError(f"model {self.name}: negative spectral density")
        return m

    def kernel(self, s: np.ndarray | float) -> np.ndarray:
        """Covariance K(s) = integral of e^{ius} m(u) du (real for even densities)."""
        if self.kernel_exact is not None:
            return np.asarray(self.kernel_exact(np.asarray(s, dtype=float)))
        if not self.density_available:
            raise OperatorError(
                f"model {self.name} is tail-only: covariance kernel unavailable"
            )
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        for i, si in enumerate(s_arr):
            # even-density assumption: K(s) = 2 * int_0^inf m(u) cos(us) du
            if abs(si) < 1e-300:
                val, _ = integrate.quad(lambda u: float(self.density_values(u)),
                                        0.0, np.inf, limit=400)
            else:
                val, _ = integrate.quad(lambda u: float(self.density_values(u)),
                                        0.0, np.inf, weight="cos", wvar=float(abs(si)))
            out[i] = 2.0 * val
        return out if np.ndim(s) else float(out[0])

    def total_mass(self, horizon: float = 1e6) -> SeriesSum:
        """Integral of the density plus the analytic power-law tail remainder."""
        if not self.density_available:
            raise OperatorError(f"model {self.name} is tail-only")
        body, _ = integrate.quad(lambda u: float(self.density_values(u)),
                                 -horizon, horizon, limit=800)
        r = self.tail.r
        tail = (self.tail.m_minus + self.tail.m_plus) * horizon ** (1 - r) / (r - 1)
        return SeriesSum(value=body, tail_bound=tail)

    def check_tail(self, horizon: float = 1e6, rtol: float = TAIL_CHECK_RTOL) -> None:
        us = horizon * (1 - np.arange(10) / 100.0)
        for sign, m_decl in ((1, self.tail.m_plus), (-1, self.tail.m_minus)):
            ratios = np.abs(us) ** self.tail.r * self.density_values(sign * us)
            if m_decl == 0:
                if np.any(ratios > rtol):
                    raise SpectrumError(f"model {self.name}: tail not vanishing as declared")
            elif np.any(np.abs(ratios / m_decl - 1) > rtol):
                raise SpectrumError(f"model {self.name}: density tail deviates from declared constant")


# ---------------------------------------------------------------------------
# Built-in discrete models
# ---------------------------------------------------------------------------

def bogoliubov_spectrum(omega: float, truncation: int = DEFAULT_TRUNCATION) -> DiscreteSpectrum:
    """Spectrum mu_k = 1/(omega^2 + (2 pi k)^2) of the rate-omega Bogoliubov process.

    The mass sequence serves both the 1-periodic process and its 2pi-periodic
    reparametrization; the tail is (r=2, M = 1/(2 pi)^2).
    """
    if not omega > 0:
        raise SpectrumError(f"omega must be positive, got {omega}")
    omega2 = float(omega) ** 2

    def mass(k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return 1.0 / (omega2 + (2.0 * np.pi * k) ** 2)

    m = 1.0 / (2.0 * np.pi) ** 2
    return DiscreteSpectrum(
        mass=mass, tail=TailDescriptor(2.0, m, m), truncation=truncation,
        even=True, name=f"bogoliubov(omega={omega})",
    )


def integrated_bridge_spectrum(m: int, truncation: int = DEFAULT_TRUNCATION) -> DiscreteSpectrum:
    """Spectrum (2 pi |k|)^{-2m} (zero mass at k=0) of the m-times
    integrated centered Brownian bridge; tail (r = 2m, M = (2 pi)^{-2m})."""
    if not (isinstance(m, (int, np.integer)) and m >= 1):
        raise SpectrumError(f"integration order m must be an integer >= 1, got {m}")
    two_m = 2 * int(m)

    def mass(k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        out = np.zeros_like(k)
        nz = k != 0
        out[nz] = (2.0 * np.pi * np.abs(k[nz])) ** (-two_m)
        return out

    mconst = (2.0 * np.pi) ** (-two_m)
    return DiscreteSpectrum(
        mass=mass, tail=TailDescriptor(float(two_m), mconst, mconst),
        truncation=truncation, even=True, name=f"integrated_bridge(m={m})",
    )


def discrete_table_spectrum(entries: list[tuple[int, float]], tail: TailDescriptor,
                            name: str = "discrete_table") -> DiscreteSpectrum:
    """Spectrum from explicit (k, mu_k) pairs; mass is zero off the table."""
    ks = np.array([int(k) for k, _ in entries])
    mus = np.array([float(v) for _, v in entries])
    if np.any(mus < 0):
        raise SpectrumError("table masses must be non-negative")
    if len(np.unique(ks)) != len(ks):
        raise SpectrumError("duplicate k in spectral table")
    lookup = dict(zip(ks.tolist(), mus.tolist()))

    def mass(k: np.ndarray) -> np.ndarray:
        flat = np.atleast_1d(np.asarray(k)).ravel()
        out = np.array([lookup.get(int(kk), 0.0) for kk in flat])
        return out.reshape(np.shape(k)) if np.ndim(k) else out[0]

    even = all(lookup.get(-k, 0.0) == v for k, v in lookup.items())
    return DiscreteSpectrum(mass=mass, tail=tail, truncation=int(np.abs(ks).max()) if len(ks) else 1,
                            even=even, name=name)


# ---------------------------------------------------------------------------
# Built-in continuous models: the fractional Ornstein-Uhlenbeck chain
# ---------------------------------------------------------------------------

def _fractional_part(h: float) -> float:
    hh = float(h)
    if hh <= 0:
        raise SpectrumError(f"level h must be positive, got {h}")
    frac = hh - math.floor(hh)
    if frac == 0.0:
        raise SpectrumError(f"level h must be non-integer, got {h}")
    return frac


def fou_tail(h: float) -> TailDescriptor:
    """Tail descriptor (r = 2h+1, M = Gamma(2H+1) sin(pi H) / (2 pi)) of the
    level-h stationary fractional Ornstein-Uhlenbeck process, H = frac(h)."""
    big_h = _fractional_part(h)
    m = math.gamma(2.0 * big_h + 1.0) * math.sin(math.pi * big_h) / (2.0 * math.pi)
    return TailDescriptor(r=2.0 * float(h) + 1.0, m_minus=m, m_plus=m)


def fou_density_step(parent_density: Callable[[np.ndarray], np.ndarray],
                     h: float) -> Callable[[np.ndarray], np.ndarray]:
    """One integration step of the density recursion: m_h(u) = m_{h-1}(u) / (u^2 + h^2)."""
    h2 = float(h) ** 2

    def stepped(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.asarray(parent_density(u)) / (u * u + h2)

    return stepped


def ou_spectral_density(u: np.ndarray) -> np.ndarray:
    """Exact spectral density (1/2pi) / (1/4 + u^2) of the classical
    Ornstein-Uhlenbeck process with covariance e^{-|s|/2}."""
    u = np.asarray(u, dtype=float)
    return (1.0 / (2.0 * np.pi)) / (0.25 + u * u)


def fou_spectrum(h: float) -> ContinuousSpectrum:
    """Level-h fractional Ornstein-Uhlenbeck model.

    For fractional part H = 1/2 the chain starts from the exact OU density and
    the density recursion gives a closed form at every level, including an
    exact covariance kernel (a finite combination of exponentials via partial
    fractions).  Other H have no closed-form density and come back tail-only.
    """
    big_h = _fractional_part(h)
    tail = fou_tail(h)
    name = f"fou(h={h})"
    if abs(big_h - 0.5) > 1e-12:
        return ContinuousSpectrum(density=None, tail=tail, density_available=False, name=name)

    levels = [0.5 + j for j in range(1, int(math.floor(h)) + 1)]
    density: Callable[[np.ndarray], np.ndarray] = ou_spectral_density
    for lev in levels:
        density = fou_density_step(density, lev)

    # K(s) = sum_j A_j e^{-a_j|s|} / (2 a_j) with 1/prod(u^2+a_j^2) = sum_j A_j/(u^2+a_j^2)
    rates = np.array([0.5] + levels)
    coeffs = np.array([
        1.0 / np.prod([ai**2 - aj**2 for ai in rates if ai != aj]) for aj in rates
    ])

    def kernel(s: np.ndarray) -> np.ndarray:
        s = np.abs(np.asarray(s, dtype=float))
        acc = np.zeros_like(s)
        for a_j, c_j in zip(rates, coeffs):
            acc = acc + c_j / (2.0 * a_j) * np.exp(-a_j * s)
        return acc

    return ContinuousSpectrum(density=density, tail=tail, density_available=True,
                              kernel_exact=kernel, name=name)


def density_table_spectrum(entries: list[tuple[float, float]], tail: TailDescriptor,
                           name: str = "density_table") -> ContinuousSpectrum:
    """Density from (u, m(u)) samples, linearly interpolated inside the table
    and extended by the declared power-law tail outside it."""
    us = np.array([float(u) for u, _ in entries])
    ms = np.array([float(v) for _, v in entries])
    order = np.argsort(us)
    us, ms = us[order], ms[order]
    if np.any(ms < 0):
        raise SpectrumError("table density values must be non-negative")
    u_lo, u_hi = us[0], us[-1]

    def density(u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.interp(u, us, ms)
        out = np.where(u > u_hi, tail.m_plus * np.abs(u) ** (-tail.r), out)
        out = np.where(u < u_lo, tail.m_minus * np.abs(u) ** (-tail.r), out)
        return out

    return ContinuousSpectrum(density=density, tail=tail, density_available=True, name=name)


def tail_only_spectrum(tail: TailDescriptor, name: str = "tail_only") -> ContinuousSpectrum:
    return ContinuousSpectrum(density=None, tail=tail, density_available=False, name=name)


# ---------------------------------------------------------------------------
# Series services
# ---------------------------------------------------------------------------

def discrete_total_mass(spec: DiscreteSpectrum) -> SeriesSum:
    """Total mass sum_k mu_k over |k| <= truncation plus the analytic remainder
    (M- + M+) * int_{truncation}^inf x^{-r} dx.

    Flags divergence when the partial sums fail a Cauchy test against the
    analytic remainder at half the truncation.
    """
    kmax = spec.truncation
    ks = np.arange(-kmax, kmax + 1)
    mus = spec.masses(ks)
    total = float(np.sum(mus))
    r = spec.tail.r
    m_sum = spec.tail.m_minus + spec.tail.m_plus

    def remainder(k0: int) -> float:
        return m_sum * k0 ** (1.0 - r) / (r - 1.0)

    half = float(np.sum(mus[np.abs(ks) <= kmax // 2]))
    converged = (total - half) <= 2.0 * remainder(kmax // 2) + 1e-15 * max(total, 1.0)
    return SeriesSum(value=total, tail_bound=remainder(kmax), converged=bool(converged))


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------

def _tail_from_json(doc: dict) -> TailDescriptor:
    try:
        return TailDescriptor(r=float(doc["r"]), m_minus=float(doc["m_minus"]),
                              m_plus=float(doc["m_plus"]))
    except KeyError as exc:
        raise SpectrumError(f"tail descriptor missing field {exc}") from exc


def model_from_json(doc: dict) -> DiscreteSpectrum | ContinuousSpectrum:
    """Build a spectral model from its JSON declaration.

    Kinds: bogoliubov | integrated_bridge | fou | discrete_table |
    density_table | tail_only.
    """
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SpectrumError("spectral model JSON must be an object with a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "bogoliubov":
            return bogoliubov_spectrum(float(doc["omega"]),
                                       truncation=int(doc.get("truncation", DEFAULT_TRUNCATION)))
        if kind == "integrated_bridge":
            return integrated_bridge_spectrum(int(doc["m"]),
                                              truncation=int(doc.get("truncation", DEFAULT_TRUNCATION)))
        if kind == "fou":
            return fou_spectrum(float(doc["h"]))
        if kind == "discrete_table":
            return discrete_table_spectrum([(int(k), float(v)) for k, v in doc["entries"]],
                                           _tail_from_json(doc["tail"]))
        if kind == "density_table":
            return density_table_spectrum([(float(u), float(v)) for u, v in doc["entries"]],
                                          _tail_from_json(doc["tail"]))
        if kind == "tail_only":
            return tail_only_spectrum(_tail_from_json(doc))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SpectrumError):
            raise
        raise SpectrumError(f"bad parameters for spectral model kind '{kind}': {exc}") from exc
    raise SpectrumError(f"unknown spectral model kind '{kind}'")
