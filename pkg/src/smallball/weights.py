"""Weight functions q >= 0 on a periodic interval [0, L] or on the real line.

Provides the integral services the small-deviation constants consume:
fractional-power integrals of q, Fourier coefficients of sqrt(q) and of q,
the unit-cell L1 summability trace on the real line, and the logarithmic
pullback rho(t) = q(ln t) / t^{2h+1}.

Every weight carries a scalar ``scale`` that is factored out of all integral
services, so rescaling q -> c*q transforms results exactly (up to one float
power) rather than through re-run quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DivergenceError, WeightError

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-12

PERIODIC = "periodic"
REAL_LINE = "real_line"


@dataclass(frozen=True)
class Weight:
    """Non-negative weight with evaluation, support and Fourier services.

    ``support`` is the closed interval outside which q vanishes (None means
    unbounded); ``breakpoints`` are interior discontinuities quadrature panels
    must align to.
    """

    kind: str
    domain: str
    base: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)
    scale: float = 1.0
    period: float | None = None
    support: tuple[float, float] | None = None
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.domain not in (PERIODIC, REAL_LINE):
            raise WeightError(f"unknown weight domain '{self.domain}'")
        if self.domain == PERIODIC and not (self.period and self.period > 0):
            raise WeightError("periodic weights need a positive period")
        if self.scale < 0:
            raise WeightError("weight scale must be non-negative")

    def __call__(self, t: np.ndarray | float) -> np.ndarray | float:
        t = np.asarray(t, dtype=float)
        if self.domain == PERIODIC:
            t = np.mod(t, self.period)
        vals = self.scale * np.asarray(self.base(t), dtype=float)
        if np.any(vals < -1e-15 * max(self.scale, 1.0)):
            raise WeightError(f"weight '{self.kind}' evaluated negative")
        return np.maximum(vals, 0.0)

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        dom = f"[0,{self.period:g}]" if self.domain == PERIODIC else "R"
        sc = f", scale={self.scale:g}" if self.scale != 1.0 else ""
        return f"{self.kind}({inner}){sc} on {dom}"


def scale_weight(w: Weight, c: float) -> Weight:
    if c < 0:
        raise WeightError("scale factor must be non-negative")
    return replace(w, scale=w.scale * float(c))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def constant_weight(c: float, period: float | None = 2.0 * np.pi) -> Weight:
    """q(t) = c on [0, period].  Constants on the whole line are not summable."""
    if c < 0:
        raise WeightError("constant weight must be non-negative")
    if period is None:
        raise WeightError("a constant weight on the real line is not integrable")
    return Weight(kind="constant", domain=PERIODIC, base=lambda t: np.ones_like(np.asarray(t, dtype=float)),
                  params={"c": float(c)}, scale=float(c), period=float(period),
                  support=(0.0, float(period)))


def exponential_weight(a: float, period: float = 2.0 * np.pi) -> Weight:
    """q(t) = e^{2 a t} on [0, period] (periodically extended, with a jump at 0)."""
    a = float(a)
    return Weight(kind="exponential", domain=PERIODIC,
                  base=lambda t: np.exp(2.0 * a * np.asarray(t, dtype=float)),
                  params={"a": a}, period=float(period), support=(0.0, float(period)),
                  breakpoints=())


def indicator_weight(lo: float, hi: float, period: float | None = None) -> Weight:
    """q = 1 on [lo, hi], 0 elsewhere; real-line domain unless a period is given."""
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise WeightError(f"indicator needs hi > lo, got [{lo}, {hi}]")

    def base(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return ((t >= lo) & (t <= hi)).astype(float)

    domain = REAL_LINE if period is None else PERIODIC
    return Weight(kind="indicator", domain=domain, base=base, params={"lo": lo, "hi": hi},
                  period=period, support=(lo, hi), breakpoints=(lo, hi))


def tabulated_weight(grid: np.ndarray, values: np.ndarray,
                     period: float | None = None) -> Weight:
    """Piecewise-linear weight through (t_i, q_i); zero outside the grid range."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
        raise WeightError("tabulated weight needs matching 1-D t and q arrays, length >= 2")
    if np.any(np.diff(grid) <= 0):
        raise WeightError("tabulated weight grid must be strictly increasing")
    if np.any(values < 0):
        raise WeightError("tabulated weight values must be non-negative")

    def base(t: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), grid, values, left=0.0, right=0.0)

    return Weight(kind="tabulated", domain=REAL_LINE if period is None else PERIODIC,
                  base=base, params={"n_points": len(grid), "t_min": float(grid[0]),
                                     "t_max": float(grid[-1])},
                  period=period, support=(float(grid[0]), float(grid[-1])),
                  breakpoints=tuple(float(t) for t in grid))


def custom_weight(fn: Callable[[np.ndarray], np.ndarray], domain: str = REAL_LINE,
                  period: float | None = None, support: tuple[float, float] | None = None,
                  breakpoints: tuple[float, ...] = (), name: str = "custom") -> Weight:
    """Arbitrary callable weight, for library use (not part of the JSON schema)."""
    return Weight(kind=name, domain=domain, base=fn, params={}, period=period,
                  support=support, breakpoints=breakpoints)


def log_pullback_weight(q: Weight, h: float) -> Weight:
    """rho(t) = q(ln t) / t^{2h+1} on (0, inf), for a base weight q on the line.

    Under t = e^x this carries weighted-norm statements for the stationary
    level-h process to its self-similar companion on (0, inf).
    """
    if not h > 0:
        raise WeightError(f"pullback level h must be positive, got {h}")
    if q.domain != REAL_LINE:
        raise WeightError("log pullback applies to weights on the real line")
    power = 2.0 * float(h) + 1.0

    def base(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise WeightError("log-pullback weight is defined on (0, inf) only")
        return np.asarray(q.base(np.log(t)), dtype=float) * t ** (-power)

    if q.support is not None:
        support = (math.exp(q.support[0]), math.exp(q.support[1]))
    else:
        support = None
    bps = tuple(math.exp(b) for b in q.breakpoints)
    return Weight(kind="log_pullback", domain=REAL_LINE, base=base,
                  params={"h": float(h), "base": q.describe()}, scale=q.scale,
                  support=support, breakpoints=bps)


# ---------------------------------------------------------------------------
# Integral services
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_bound: float


def _quad_panels(fn: Callable[[float], float], lo: float, hi: float,
                 breakpoints: tuple[float, ...]) -> tuple[float, float]:
    cuts = sorted({lo, hi, *(b for b in breakpoints if lo < b < hi)})
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        # the achieved-accuracy estimate is returned to the caller; quad's
        # roundoff warnings add nothing on kinked integrands
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts[:-1], cuts[1:]):
            v, e = integrate.quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=300)
            total += v
            err += e
    return total, err


def integral_q_power(w: Weight, r: float) -> IntegralResult:
    """Integral of q(t)^{1/r} over the weight's domain.

    Analytic for constant, indicator, and exponential weights; adaptive
    quadrature otherwise; trapezoid with an O(h^2) bound for tabulated ones.
    q^{1/r} is taken as 0 wherever q vanishes.
    """
    if not r > 1:
        raise WeightError(f"power integral needs r > 1, got r={r}")
    s = w.scale ** (1.0 / r)

    if w.kind == "constant":
        return IntegralResult(s * w.period, 0.0)
    if w.kind == "indicator":
        lo, hi = w.params["lo"], w.params["hi"]
        if w.domain == PERIODIC:
            lo, hi = max(lo, 0.0), min(hi, w.period)
        return IntegralResult(s * (hi - lo), 0.0)
    if w.kind == "exponential":
        a, length = w.params["a"], w.period
        if abs(a) < 1e-300:
            return IntegralResult(s * length, 0.0)
        # int_0^L e^{2at/r} dt
        return IntegralResult(s * (math.expm1(2.0 * a * length / r)) * r / (2.0 * a), 0.0)

    def integrand(t: float) -> float:
        v = float(np.asarray(w.base(t), dtype=float))
        return v ** (1.0 / r) if v > 0 else 0.0

    if w.kind == "tabulated":
        # trapezoid on the tabulation grid; error bound from the second
        # difference of the integrand
        lo, hi = w.support
        n = max(4 * w.params["n_points"], 512)
        ts = np.linspace(lo, hi, n)
        vals = np.asarray(w.base(ts), dtype=float) ** (1.0 / r)
        h = ts[1] - ts[0]
        val = float(np.trapezoid(vals, ts))
        curv = float(np.abs(np.diff(vals, 2)).max(initial=0.0)) / h**2
        bound = (hi - lo) * h**2 * curv / 12.0
        return IntegralResult(s * val, s * bound)

    if w.domain == PERIODIC:
        val, err = _quad_panels(integrand, 0.0, w.period, w.breakpoints)
        return IntegralResult(s * val, s * err)

    if w.support is not None:
        val, err = _quad_panels(integrand, w.support[0], w.support[1], w.breakpoints)
        return IntegralResult(s * val, s * err)

    # unbounded support: split at the breakpoints and stretch to infinity
    cuts = sorted(set(w.breakpoints)) or [0.0]
    val, err = _quad_panels(integrand, cuts[0], cuts[-1], tuple(cuts)) if len(cuts) > 1 else (0.0, 0.0)
    v_lo, e_lo = integrate.quad(integrand, -np.inf, cuts[0], epsabs=QUAD_EPSABS, limit=300)
    v_hi, e_hi = integrate.quad(integrand, cuts[-1], np.inf, epsabs=QUAD_EPSABS, limit=300)
    total = val + v_lo + v_hi
    if not np.isfinite(total) or total > 1e12:
        raise DivergenceError(f"integral of q^(1/r) diverges for weight {w.describe()}")
    return IntegralResult(s * total, s * (err + e_lo + e_hi))


def integral_q(w: Weight) -> IntegralResult:
    """Plain integral of q, via the same panel machinery."""
    if w.kind == "constant":
        return IntegralResult(w.scale * w.period, 0.0)
    if w.kind == "indicator":
        lo, hi = w.params["lo"], w.params["hi"]
        if w.domain == PERIODIC:
            lo, hi = max(lo, 0.0), min(hi, w.period)
        return IntegralResult(w.scale * (hi - lo), 0.0)
    if w.kind == "exponential":
        a, length = w.params["a"], w.period
        if abs(a) < 1e-300:
            return IntegralResult(w.scale * length, 0.0)
        return IntegralResult(w.scale * math.expm1(2.0 * a * length) / (2.0 * a), 0.0)

    def integrand(t: float) -> float:
        return float(np.asarray(w.base(t), dtype=float))

    if w.domain == PERIODIC:
        val, err = _quad_panels(integrand, 0.0, w.period, w.breakpoints)
    elif w.support is not None:
        val, err = _quad_panels(integrand, w.support[0], w.support[1], w.breakpoints)
    else:
        val, err = integrate.quad(integrand, -np.inf, np.inf, epsabs=QUAD_EPSABS, limit=400)
    if not np.isfinite(val):
        raise DivergenceError(f"integral of q diverges for weight {w.describe()}")
    return IntegralResult(w.scale * val, w.scale * err)


def effective_support(w: Weight, mass_rtol: float = 1e-8) -> tuple[float, float, float]:
    """Interval [-T, T] (or the native support) holding all but ``mass_rtol``
    of the weight's mass; returns (lo, hi, discarded_mass)."""
    if w.support is not None:
        return (w.support[0], w.support[1], 0.0)
    total = integral_q(w).value
    if total <= 0:
        raise WeightError("weight has zero total mass")

    def integrand(t: float) -> float:
        return float(np.asarray(w.base(t), dtype=float)) * w.scale

    t_half = 1.0
    for _ in range(60):
        out_lo, _ = integrate.quad(integrand, -np.inf, -t_half, epsabs=QUAD_EPSABS, limit=200)
        out_hi, _ = integrate.quad(integrand, t_half, np.inf, epsabs=QUAD_EPSABS, limit=200)
        if out_lo + out_hi < mass_rtol * total:
            return (-t_half, t_half, out_lo + out_hi)
        t_half *= 2.0
    raise DivergenceError("could not truncate weight support: tail mass does not decay")


# ---------------------------------------------------------------------------
# Fourier services (period 2 pi)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SqrtQCoefficients:
    """Fourier table q_m = (1/2pi) int_0^{2pi} sqrt(q) e^{-imt} dt, |m| <= n_modes."""

    coeffs: np.ndarray          # index m + n_modes, m in [-n_modes, n_modes]
    n_modes: int
    grid_size: int
    parseval_sum: float         # sum |q_m|^2 over the table
    parseval_target: float      # (1/2pi) int q
    parseval_defect: float

    def coeff(self, m: int) -> complex:
        if abs(m) > self.n_modes:
            raise IndexError(f"mode {m} outside computed range {self.n_modes}")
        return complex(self.coeffs[m + self.n_modes])


def _require_2pi(w: Weight) -> None:
    if w.domain != PERIODIC or abs(w.period - 2.0 * np.pi) > 1e-12:
        raise WeightError("Fourier services need a periodic weight of period 2*pi")


def fourier_coefficients_sqrt_q(w: Weight, n_modes: int, grid_factor: int = 8) -> SqrtQCoefficients:
    """FFT Fourier coefficients of sqrt(q) on a grid of >= grid_factor*n_modes points,
    with the Parseval gap sum|q_m|^2 vs (1/2pi) int q reported."""
    _require_2pi(w)
    if n_modes < 1:
        raise WeightError("n_modes must be >= 1")
    n_grid = 1 << int(np.ceil(np.log2(max(grid_factor * n_modes, 64))))
    t = 2.0 * np.pi * np.arange(n_grid) / n_grid
    f = np.sqrt(np.asarray(w(t), dtype=float))
    c = np.fft.fft(f) / n_grid
    ms = np.arange(-n_modes, n_modes + 1)
    coeffs = c[ms % n_grid]
    psum = float(np.sum(np.abs(coeffs) ** 2))
    ptarget = integral_q(w).value / (2.0 * np.pi)
    return SqrtQCoefficients(coeffs=coeffs, n_modes=int(n_modes), grid_size=n_grid,
                             parseval_sum=psum, parseval_target=ptarget,
                             parseval_defect=abs(ptarget - psum))


def fourier_coefficients_q(w: Weight, n_modes: int) -> np.ndarray:
    """Fourier coefficients of q itself: (1/2pi) int_0^{2pi} q e^{-imt} dt for
    |m| <= n_modes; analytic for the closed-form kinds, FFT otherwise.

    These are exactly the cross-correlations sum_j q_{j} conj(q_{j-m}) of the
    sqrt(q) coefficients, which is what the mode-space operator assembly needs.
    """
    _require_2pi(w)
    ms = np.arange(-n_modes, n_modes + 1)
    if w.kind == "constant":
        out = np.zeros(2 * n_modes + 1, dtype=complex)
        out[n_modes] = w.scale
        return out
    if w.kind == "exponential":
        a = w.params["a"]
        if a == 0:
            out = np.zeros(2 * n_modes + 1, dtype=complex)
            out[n_modes] = w.scale
            return out
        c = 2.0 * a
        # (1/2pi) int_0^{2pi} e^{ct} e^{-imt} dt = (e^{2 pi c} - 1) / (2 pi (c - im))
        return w.scale * np.expm1(2.0 * np.pi * c) / (2.0 * np.pi * (c - 1j * ms))
    if w.kind == "indicator":
        lo = max(w.params["lo"], 0.0)
        hi = min(w.params["hi"], w.period)
        out = np.empty(2 * n_modes + 1, dtype=complex)
        nz = ms != 0
        out[~nz] = (hi - lo) / (2.0 * np.pi)
        mnz = ms[nz]
        out[nz] = (np.exp(-1j * mnz * lo) - np.exp(-1j * mnz * hi)) / (2j * np.pi * mnz)
        return w.scale * out

    n_grid = 1 << int(np.ceil(np.log2(max(16 * n_modes, 4096))))
    t = 2.0 * np.pi * np.arange(n_grid) / n_grid
    c = np.fft.fft(np.asarray(w(t), dtype=float)) / n_grid
    return c[ms % n_grid]


# ---------------------------------------------------------------------------
# Unit-cell summability trace on the real line
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeminormTrace:
    """Partial sums S_J = sum_{|j|<=J} ||q||_{L1(j,j+1)}^{1/r} and a decay verdict."""

    partial_sums: np.ndarray    # S_0 .. S_{j_max}
    increments: np.ndarray      # S_J - S_{J-1}
    verdict: str                # converged | diverged | inconclusive
    r: float

    @property
    def last(self) -> float:
        return float(self.partial_sums[-1])


def _cell_mass(w: Weight, a: float, b: float) -> float:
    if w.support is not None and (b <= w.support[0] or a >= w.support[1]):
        return 0.0
    val, _ = _quad_panels(lambda t: float(np.asarray(w.base(t), dtype=float)),
                          a, b, w.breakpoints)
    return w.scale * max(val, 0.0)


def q_r_seminorm(w: Weight, r: float, j_max: int = 50) -> SeminormTrace:
    """Summability trace of the unit-cell norms sum_j ||q||_{L1(j,j+1)}^{1/r}.

    Convergence is not decidable from finitely many cells; the verdict is a
    decay-rate heuristic (geometric fit => converged, power-law fit with
    exponent near or below 1 => diverged) and may be "inconclusive".
    """
    if w.domain != REAL_LINE:
        raise WeightError("the cell-summability trace applies to real-line weights")
    if not r > 1:
        raise WeightError(f"seminorm needs r > 1, got r={r}")
    if j_max < 4:
        raise WeightError("j_max too small for a meaningful trace")

    # cell j covers (j, j+1); the window |j| <= J adds cells (J, J+1) and (-J, 1-J)
    inc = np.zeros(j_max + 1)
    inc[0] = _cell_mass(w, 0.0, 1.0) ** (1.0 / r)
    for j in range(1, j_max + 1):
        inc[j] = (_cell_mass(w, j, j + 1.0) ** (1.0 / r)
                  + _cell_mass(w, -float(j), 1.0 - j) ** (1.0 / r))
    sums = np.cumsum(inc)

    verdict = _decay_verdict(inc)
    return SeminormTrace(partial_sums=sums, increments=inc, verdict=verdict, r=r)


def _decay_verdict(inc: np.ndarray) -> str:
    j_max = len(inc) - 1
    lo = max(2, j_max - j_max // 2)
    js = np.arange(lo, j_max + 1)
    vals = inc[lo:]
    if np.all(vals == 0.0):
        return "converged"
    if np.any(vals == 0.0):
        return "inconclusive"
    ln_v = np.log(vals)
    # geometric hypothesis: ln I_j linear in j
    g_slope, g_icept = np.polyfit(js, ln_v, 1)
    g_res = float(np.mean((ln_v - (g_slope * js + g_icept)) ** 2))
    # power hypothesis: ln I_j linear in ln j
    p_slope, p_icept = np.polyfit(np.log(js), ln_v, 1)
    p_res = float(np.mean((ln_v - (p_slope * np.log(js) + p_icept)) ** 2))
    if g_res <= p_res and g_slope < -1e-3:
        return "converged"
    a = -p_slope
    if a > 1.2:
        return "converged"
    if a < 1.05:
        return "diverged"
    return "inconclusive"


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------

def weight_from_json(doc: dict) -> Weight:
    """Build a weight from its JSON declaration.

    Kinds: constant | exponential | indicator | tabulated | log_pullback.
    ``domain`` is either {"periodic": L} or "real_line"; kinds have natural
    defaults (constant/exponential periodic 2*pi, indicator real line).
    """
    if not isinstance(doc, dict) or "kind" not in doc:
        raise WeightError("weight JSON must be an object with a 'kind' field")
    kind = doc["kind"]
    dom = doc.get("domain")
    period: float | None
    if dom is None:
        period = 2.0 * np.pi if kind in ("constant", "exponential") else None
    elif dom == "real_line":
        period = None
    elif isinstance(dom, dict) and "periodic" in dom:
        period = float(dom["periodic"])
    else:
        raise WeightError(f"bad weight domain {dom!r}")

    try:
        if kind == "constant":
            w = constant_weight(float(doc["c"]), period=period)
        elif kind == "exponential":
            if period is None:
                raise WeightError("exponential weights are periodic-only (not summable on R)")
            w = exponential_weight(float(doc["a"]), period=period)
        elif kind == "indicator":
            w = indicator_weight(float(doc["lo"]), float(doc["hi"]), period=period)
        elif kind == "tabulated":
            w = tabulated_weight(np.asarray(doc["t"], dtype=float),
                                 np.asarray(doc["q"], dtype=float), period=period)
        elif kind == "log_pullback":
            w = log_pullback_weight(weight_from_json(doc["base"]), float(doc["h"]))
        else:
            raise WeightError(f"unknown weight kind '{kind}'")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, WeightError):
            raise
        raise WeightError(f"bad parameters for weight kind '{kind}': {exc}") from exc
    if "scale" in doc:
        w = scale_weight(w, float(doc["scale"]))
    return w
