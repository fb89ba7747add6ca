"""Small-deviation computations for weighted L2 norms.

Three independent routes to ln P(||.||^2 <= eps^2):

* closed-form coefficients K and exponents gamma of the law
  ln P ~ -K * eps^{-gamma}, built from a spectral tail (r, M-, M+) and a
  weight integral;
* the Chernoff/saddle-point bound inf_{s>0} [s eps^2 - 1/2 sum ln(1+2 s l_n)]
  over an eigenvalue sequence, optionally augmented with the analytic
  power-law tail of the spectrum -- the numerical oracle the closed forms are
  validated against;
* exponentially tilted Monte Carlo over the diagonal chi-squared form.

All eps-convention bookkeeping (plain vs normalized measure, unit vs 2*pi
period) is carried explicitly in the prediction record and converted only by
``rescale_epsilon``; nothing is converted implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .eigensolve import EigenSequence, PowerLawFit
from .errors import DivergenceError, InputError, NonConvergenceError
from .spectra import TailDescriptor
from .weights import REAL_LINE, Weight, integral_q_power, q_r_seminorm

# the law coefficient blows up as r -> 1+; refuse below this floor
R_MIN = 1.01

TWO_PI = 2.0 * math.pi

# tilted-MC reach: below this log-probability the linear-scale estimate is
# meaningless and the MC column is suppressed
MC_LOG_REACH = -200.0


def b_r(r: float) -> float:
    """Universal factor (r-1)/2 * (pi / (r sin(pi/r)))^{r/(r-1)} converting an
    eigenvalue power law C n^{-r} into the small-ball exponent."""
    if not r >= R_MIN:
        raise InputError(f"law factor needs r >= {R_MIN}, got r={r}")
    return (r - 1.0) / 2.0 * (math.pi / (r * math.sin(math.pi / r))) ** (r / (r - 1.0))


def logprob_from_fit(fit: PowerLawFit | tuple[float, float], eps: float) -> float:
    """ln P(||Z|| <= eps) ~ -B_r (C / eps^2)^{1/(r-1)} for lambda_n ~ C n^{-r}."""
    c, r = (fit.c_hat, fit.r_hat) if isinstance(fit, PowerLawFit) else map(float, fit)
    if c <= 0:
        raise InputError(f"prefactor must be positive, got {c}")
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")
    return -b_r(r) * (c / eps**2) ** (1.0 / (r - 1.0))


# ---------------------------------------------------------------------------
# Closed-form law coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmallBallPrediction:
    """The law ln P(||.||^2 <= eps^2) ~ -coefficient * eps^{-exponent}.

    ``epsilon_convention`` names the squared norm the eps^2 bounds; it changes
    only through ``rescale_epsilon``.
    """

    coefficient: float
    exponent: float
    provenance: str
    epsilon_convention: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.coefficient > 0 and self.exponent > 0):
            raise InputError("prediction needs positive coefficient and exponent")

    def logprob(self, eps: float) -> float:
        if eps <= 0:
            raise InputError(f"eps must be positive, got {eps}")
        return -self.coefficient * float(eps) ** (-self.exponent)

    def to_json_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "provenance": self.provenance,
            "epsilon_convention": self.epsilon_convention,
            "diagnostics": self.diagnostics,
        }


def _positive_integral(w: Weight, r: float) -> float:
    res = integral_q_power(w, r)
    if not res.value > 0:
        raise InputError(f"weight integral is zero for {w.describe()}")
    return res.value


def _require_symmetric(tail: TailDescriptor) -> float:
    if not tail.symmetric:
        raise InputError(
            "real-process law needs a symmetric spectral tail (M- = M+); "
            "use the proper-process variant for one-sided spectra"
        )
    if tail.m_plus <= 0:
        raise InputError("real-process law needs M > 0")
    return tail.m_plus


def _check_r(r: float) -> float:
    if not r >= R_MIN:
        raise InputError(f"tail exponent r must be >= {R_MIN}, got {r}")
    return float(r)


def constant_periodic_real(tail: TailDescriptor, w: Weight) -> SmallBallPrediction:
    """Law coefficient for a real 2*pi-periodic stationary process with
    mu_k ~ M |k|^{-r}: eps^2 bounds the plain integral of q |X|^2 over [0, 2*pi].

    K = (M^{1/r} / (r sin(pi/r)) * int q^{1/r})^{r/(r-1)} * (r-1) (2 pi)^{1/(r-1)} / 2.
    """
    m = _require_symmetric(tail)
    r = _check_r(tail.r)
    integral = _positive_integral(w, r)
    bracket = m ** (1.0 / r) / (r * math.sin(math.pi / r)) * integral
    coeff = bracket ** (r / (r - 1.0)) * (r - 1.0) * TWO_PI ** (1.0 / (r - 1.0)) / 2.0
    return SmallBallPrediction(
        coefficient=coeff, exponent=2.0 / (r - 1.0), provenance="periodic-real",
        epsilon_convention="plain[0,2pi]",
        diagnostics={"r": r, "m": m, "weight_integral": integral},
    )


def constant_periodic_proper(tail: TailDescriptor, w: Weight) -> SmallBallPrediction:
    """Law coefficient for a proper (circular) complex periodic process; the
    one-sided tails enter through (M-^{1/r} + M+^{1/r}) / (2 r sin(pi/r)) and
    the trailing 1/2 of the real case is absent."""
    r = _check_r(tail.r)
    integral = _positive_integral(w, r)
    bracket = ((tail.m_minus ** (1.0 / r) + tail.m_plus ** (1.0 / r))
               / (2.0 * r * math.sin(math.pi / r)) * integral)
    coeff = bracket ** (r / (r - 1.0)) * (r - 1.0) * TWO_PI ** (1.0 / (r - 1.0))
    return SmallBallPrediction(
        coefficient=coeff, exponent=2.0 / (r - 1.0), provenance="periodic-proper",
        epsilon_convention="plain[0,2pi]",
        diagnostics={"r": r, "m_minus": tail.m_minus, "m_plus": tail.m_plus,
                     "weight_integral": integral},
    )


def sequence_symbol_integral(a: np.ndarray, p: float) -> float:
    """Integral over [0, 2*pi] of |a(t)|^{1/p} for the filter symbol
    a(t) = sum_k a_k e^{ikt} (the coefficient block's offset is immaterial)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or len(a) == 0 or not np.all(np.isfinite(a)):
        raise InputError("filter coefficients must be a finite 1-D array")
    if len(a) == 1:
        return TWO_PI * abs(a[0]) ** (1.0 / p)
    js = np.arange(len(a))

    def integrand(t: float) -> float:
        return abs(np.sum(a * np.exp(1j * js * t))) ** (1.0 / p)

    val, _ = integrate.quad(integrand, 0.0, TWO_PI, epsabs=1e-12, epsrel=1e-12, limit=400)
    return val


def constant_sequence(p: float, d_minus: float, d_plus: float,
                      a: np.ndarray) -> SmallBallPrediction:
    """Law coefficient for the weighted stationary sequence sum d_k^2 U_k^2,
    where U is a moving average with filter ``a`` and |k|^p d_k -> d_{+-}.

    K = ((d-^{1/p} + d+^{1/p}) / (4 p sin(pi/2p)) * int |a(t)|^{1/p})^{2p/(2p-1)}
        * (2p - 1) / 2;  the decay exponent is gamma = 2/(2p-1).
    """
    p = float(p)
    if not p > 0.5:
        raise InputError(f"weight decay exponent p must exceed 1/2, got {p}")
    if d_minus < 0 or d_plus < 0 or d_minus + d_plus <= 0:
        raise InputError("need d- , d+ >= 0 with at least one positive")
    integral = sequence_symbol_integral(a, p)
    if not integral > 0:
        raise InputError("filter symbol integral is zero")
    bracket = ((d_minus ** (1.0 / p) + d_plus ** (1.0 / p))
               / (4.0 * p * math.sin(math.pi / (2.0 * p))) * integral)
    coeff = bracket ** (2.0 * p / (2.0 * p - 1.0)) * (2.0 * p - 1.0) / 2.0
    return SmallBallPrediction(
        coefficient=coeff, exponent=2.0 / (2.0 * p - 1.0), provenance="sequence",
        epsilon_convention="sequence-l2",
        diagnostics={"p": p, "d_minus": d_minus, "d_plus": d_plus,
                     "symbol_integral": integral},
    )


def _gate_summability(w: Weight, r: float, j_max: int = 50) -> str:
    trace = q_r_seminorm(w, r, j_max=j_max)
    if trace.verdict == "diverged":
        raise DivergenceError(
            f"unit-cell sums of q^(1/r) diverge (r={r}, S_{j_max}={trace.last:.6g}); "
            "the continuous-spectrum law does not apply to this weight"
        )
    return trace.verdict


def constant_continuous_real(tail: TailDescriptor, w: Weight) -> SmallBallPrediction:
    """Law coefficient for a real stationary process on the line with spectral
    density m(u) ~ M |u|^{-r}; same structure as the periodic case with the
    weight integrated over R, and eps^2 bounding the plain L2 integral."""
    m = _require_symmetric(tail)
    r = _check_r(tail.r)
    if w.domain != REAL_LINE:
        raise InputError("continuous-spectrum law needs a weight on the real line")
    verdict = _gate_summability(w, r)
    integral = _positive_integral(w, r)
    bracket = m ** (1.0 / r) / (r * math.sin(math.pi / r)) * integral
    coeff = bracket ** (r / (r - 1.0)) * (r - 1.0) * TWO_PI ** (1.0 / (r - 1.0)) / 2.0
    return SmallBallPrediction(
        coefficient=coeff, exponent=2.0 / (r - 1.0), provenance="continuous-real",
        epsilon_convention="plain[R]",
        diagnostics={"r": r, "m": m, "weight_integral": integral,
                     "summability_verdict": verdict},
    )


def constant_continuous_proper(tail: TailDescriptor, w: Weight) -> SmallBallPrediction:
    """Proper complex process on the line; bracket and trailing factor as in
    the periodic proper case, weight integrated over R."""
    r = _check_r(tail.r)
    if w.domain != REAL_LINE:
        raise InputError("continuous-spectrum law needs a weight on the real line")
    verdict = _gate_summability(w, r)
    integral = _positive_integral(w, r)
    bracket = ((tail.m_minus ** (1.0 / r) + tail.m_plus ** (1.0 / r))
               / (2.0 * r * math.sin(math.pi / r)) * integral)
    coeff = bracket ** (r / (r - 1.0)) * (r - 1.0) * TWO_PI ** (1.0 / (r - 1.0))
    return SmallBallPrediction(
        coefficient=coeff, exponent=2.0 / (r - 1.0), provenance="continuous-proper",
        epsilon_convention="plain[R]",
        diagnostics={"r": r, "m_minus": tail.m_minus, "m_plus": tail.m_plus,
                     "weight_integral": integral, "summability_verdict": verdict},
    )


def constant_fou(h: float, w: Weight) -> SmallBallPrediction:
    """Law coefficient for the level-h fractional Ornstein-Uhlenbeck process:

    K = (int q^{1/(2h+1)} / ((2h+1) sin(pi/(2h+1))))^{(2h+1)/(2h)}
        * h * (Gamma(2H+1) sin(pi H))^{1/(2h)},   gamma = 1/h,  H = frac(h).

    Must agree with the generic continuous-spectrum law fed the level-h tail;
    the two code paths are kept separate precisely for that cross-check.
    """
    h = float(h)
    if h <= 0 or h == math.floor(h):
        raise InputError(f"level h must be positive and non-integer, got {h}")
    big_h = h - math.floor(h)
    r = 2.0 * h + 1.0
    if w.domain != REAL_LINE:
        raise InputError("the fractional OU law needs a weight on the real line")
    verdict = _gate_summability(w, r)
    integral = _positive_integral(w, r)
    bracket = integral / (r * math.sin(math.pi / r))
    coeff = (bracket ** (r / (2.0 * h))
             * h * (math.gamma(2.0 * big_h + 1.0) * math.sin(math.pi * big_h)) ** (1.0 / (2.0 * h)))
    return SmallBallPrediction(
        coefficient=coeff, exponent=1.0 / h, provenance="fou",
        epsilon_convention="plain[R]",
        diagnostics={"h": h, "fractional_part": big_h, "weight_integral": integral,
                     "summability_verdict": verdict},
    )


def prediction_from_fit(fit: PowerLawFit | tuple[float, float],
                        epsilon_convention: str) -> SmallBallPrediction:
    """Turn a fitted eigenvalue power law (C, r) into a prediction record
    through the chi-squared-sum law K = B_r C^{1/(r-1)}, gamma = 2/(r-1)."""
    c, r = (fit.c_hat, fit.r_hat) if isinstance(fit, PowerLawFit) else map(float, fit)
    if c <= 0:
        raise InputError(f"prefactor must be positive, got {c}")
    coeff = b_r(r) * c ** (1.0 / (r - 1.0))
    diag = {"c": c, "r": r}
    if isinstance(fit, PowerLawFit):
        diag["fit_window"] = list(fit.window)
        diag["fit_residual"] = fit.residual
    return SmallBallPrediction(coefficient=coeff, exponent=2.0 / (r - 1.0),
                               provenance="power-law-fit",
                               epsilon_convention=epsilon_convention, diagnostics=diag)


def rescale_epsilon(pred: SmallBallPrediction, c: float) -> SmallBallPrediction:
    """Reparametrize the bound eps^2 -> c * eps^2: the coefficient picks up
    c^{-gamma/2} and the convention string records the change."""
    if not c > 0:
        raise InputError(f"norm-scale factor must be positive, got {c}")
    coeff = pred.coefficient * float(c) ** (-pred.exponent / 2.0)
    convention = pred.epsilon_convention + f"|eps2*={c:.17g}"
    return replace(pred, coefficient=coeff, epsilon_convention=convention)


# ---------------------------------------------------------------------------
# Chernoff / saddle-point oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChernoffBound:
    """inf_{s>0} [s eps^2 - 1/2 sum ln(1+2 s lambda_n)] and its minimizer."""

    value: float
    s_star: float
    eps: float
    truncated: bool             # True when no analytic tail extended the sum
    n_terms: int
    trivial: bool = False       # eps^2 at or above the mean: bound is 0 at s=0


def _tail_transform(s: float, c: float, r: float, n0: float) -> tuple[float, float]:
    """Substitution scale for the analytic tail integrals: alpha^{1/r} and the
    reduced lower endpoint z = n0 * alpha^{-1/r}, alpha = 2 s c."""
    alpha = 2.0 * s * c
    u = alpha ** (1.0 / r)
    return u, n0 / u


def _reduced_tail_mass(z: float, r: float) -> float:
    """H(z) = int_z^inf dy / (1 + y^r), through finite intervals only:
    the far part maps to int_0^{1/max(z,1)} v^{r-2}/(1+v^r) dv under y -> 1/v."""
    zc = max(z, 1.0)
    far, _ = integrate.quad(lambda v: v ** (r - 2.0) / (1.0 + v**r), 0.0, 1.0 / zc,
                            epsabs=1e-13, epsrel=1e-11, limit=200)
    if z >= 1.0:
        return far
    near, _ = integrate.quad(lambda y: 1.0 / (1.0 + y**r), z, 1.0,
                             epsabs=1e-13, epsrel=1e-11, limit=200)
    return near + far


def _tail_log_integral(s: float, c: float, r: float, n0: float) -> float:
    """int_{n0}^inf ln(1 + 2 s c x^{-r}) dx.

    By parts, the reduced form G(z) = int_z^inf ln(1+y^{-r}) dy equals
    -z ln(1+z^{-r}) + r H(z), leaving only well-behaved finite quadratures.
    """
    if s == 0.0 or c == 0.0:
        return 0.0
    u, z = _tail_transform(s, c, r, n0)
    boundary = -z * math.log1p(z ** (-r)) if z > 0 else 0.0
    return u * (boundary + r * _reduced_tail_mass(z, r))


def _tail_dlog_integral(s: float, c: float, r: float, n0: float) -> float:
    """d/ds of half the tail log-integral times 2: int_{n0}^inf c x^{-r}/(1+2 s c x^{-r}) dx."""
    if s == 0.0 or c == 0.0:
        return 0.0
    u, z = _tail_transform(s, c, r, n0)
    return u / (2.0 * s) * _reduced_tail_mass(z, r)


def chernoff_logprob(eig: EigenSequence | np.ndarray, eps: float,
                     tail: PowerLawFit | tuple[float, float] | None = None,
                     tail_start: int | None = None,
                     s_max: float = 1e60) -> ChernoffBound:
    """Upper bound on ln P(sum lambda_n xi_n^2 <= eps^2) by convex minimization
    of F(s) = s eps^2 - 1/2 sum ln(1 + 2 s lambda_n) over s > 0.

    The derivative eps^2 - sum lambda_n/(1+2 s lambda_n) is monotone, so the
    minimizer is bracketed by a geometric scan and pinned by bisection to
    relative 1e-10.  With an analytic tail (C, r) the sum over n > tail_start
    is replaced by the integral 1/2 int ln(1 + 2 s C x^{-r}) dx.
    """
    lam = eig.values if isinstance(eig, EigenSequence) else np.asarray(eig, dtype=float)
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")
    if np.any(lam < 0):
        raise InputError("eigenvalues must be non-negative")
    lam = lam[lam > 0.0]
    if len(lam) == 0 and tail is None:
        raise InputError("all eigenvalues are zero: the quadratic form is degenerate")

    if tail is not None:
        c_t, r_t = (tail.c_hat, tail.r_hat) if isinstance(tail, PowerLawFit) else map(float, tail)
        n0 = float(tail_start if tail_start is not None else len(lam))
        if n0 < 1:
            raise InputError("tail_start must be >= 1")
    else:
        c_t = r_t = n0 = 0.0

    eps2 = float(eps) ** 2

    def dF(s: float) -> float:
        body = float(np.sum(lam / (1.0 + 2.0 * s * lam)))
        if tail is not None:
            body += _tail_dlog_integral(s, c_t, r_t, n0)
        return eps2 - body

    def F(s: float) -> float:
        body = float(np.sum(np.log1p(2.0 * s * lam)))
        if tail is not None:
            body += _tail_log_integral(s, c_t, r_t, n0)
        return s * eps2 - 0.5 * body

    s_lo = 1e-12
    if dF(s_lo) >= 0.0:
        # eps^2 >= mean energy: the infimum is approached at s -> 0 with F -> 0
        return ChernoffBound(value=0.0, s_star=0.0, eps=float(eps),
                             truncated=tail is None, n_terms=len(lam), trivial=True)
    s_hi = s_lo
    while dF(s_hi) < 0.0:
        s_hi *= 8.0
        if s_hi > s_max:
            raise NonConvergenceError(
                f"saddle point not bracketed: derivative still negative at s={s_hi:.3e} "
                f"(bracket [{s_lo:.3e}, {s_max:.3e}], eps={eps:.3e})"
            )
    s_lo = s_hi / 8.0
    while s_hi - s_lo > 1e-10 * s_lo:
        mid = math.sqrt(s_lo * s_hi)
        if dF(mid) < 0.0:
            s_lo = mid
        else:
            s_hi = mid
    s_star = math.sqrt(s_lo * s_hi)
    return ChernoffBound(value=F(s_star), s_star=s_star, eps=float(eps),
                         truncated=tail is None, n_terms=len(lam))


# ---------------------------------------------------------------------------
# Monte Carlo with exponential tilting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McEstimate:
    """Probability estimate with a normal-approximation 95% interval."""

    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    ess: float
    n_samples: int
    seed: int
    workers: int
    tilt: float
    low_ess_warning: bool

    def to_json_dict(self) -> dict:
        return {
            "estimate": self.estimate, "stderr": self.stderr,
            "ci_low": self.ci_low, "ci_high": self.ci_high, "ess": self.ess,
            "n_samples": self.n_samples, "seed": self.seed, "workers": self.workers,
            "tilt": self.tilt, "low_ess_warning": self.low_ess_warning,
        }


def _worker_rng(seed: int, worker: int) -> np.random.Generator:
    # disjoint counter blocks per worker: the high counter word is the worker id
    return np.random.Generator(np.random.Philox(key=seed, counter=worker << 192))


def mc_smallball(eig: EigenSequence | np.ndarray, eps: float, n_samples: int,
                 seed: int, tilt: float | str | None = "auto",
                 workers: int = 1) -> McEstimate:
    """Monte Carlo estimate of P(sum lambda_n xi_n^2 <= eps^2).

    With tilt s the xi_n are drawn with variance (1+2 s lambda_n)^{-1} and the
    indicator is reweighted by exp(s Q) prod(1+2 s lambda_n)^{-1/2}, which is
    bounded on the event; ``tilt="auto"`` uses the Chernoff saddle point.
    Samples are partitioned across ``workers`` counter-based streams derived
    from the seed, so results are deterministic per (seed, workers).
    """
    lam = eig.values if isinstance(eig, EigenSequence) else np.asarray(eig, dtype=float)
    lam = lam[lam > 0.0]
    if len(lam) == 0:
        raise InputError("all eigenvalues are zero: nothing to sample")
    if n_samples < 1000:
        raise InputError(f"need n_samples >= 1000, got {n_samples}")
    if eps <= 0:
        raise InputError(f"eps must be positive, got {eps}")
    if workers < 1:
        raise InputError("workers must be >= 1")

    if tilt == "auto":
        s = chernoff_logprob(lam, eps).s_star
    elif tilt in (None, "none"):
        s = 0.0
    else:
        s = float(tilt)
        if s < 0:
            raise InputError("tilt must be non-negative")

    eps2 = float(eps) ** 2
    sigma = 1.0 / np.sqrt(1.0 + 2.0 * s * lam)
    log_norm = -0.5 * float(np.sum(np.log1p(2.0 * s * lam)))

    counts = [n_samples // workers] * workers
    counts[0] += n_samples - sum(counts)
    block_rows = max(1, 2_000_000 // len(lam))

    sum_w = 0.0
    sum_w2 = 0.0
    for worker, count in enumerate(counts):
        rng = _worker_rng(seed, worker)
        remaining = count
        while remaining > 0:
            rows = min(block_rows, remaining)
            g = rng.standard_normal((rows, len(lam)))
            if s > 0:
                g *= sigma
            q = (g * g) @ lam
            hit = q <= eps2
            if s > 0:
                w = np.where(hit, np.exp(s * q + log_norm), 0.0)
            else:
                w = hit.astype(float)
            sum_w += float(w.sum())
            sum_w2 += float((w * w).sum())
            remaining -= rows

    estimate = sum_w / n_samples
    var = max(sum_w2 / n_samples - estimate**2, 0.0)
    stderr = math.sqrt(var / n_samples)
    ess = (sum_w**2 / sum_w2) if sum_w2 > 0 else 0.0
    return McEstimate(
        estimate=estimate, stderr=stderr,
        ci_low=estimate - 1.96 * stderr, ci_high=estimate + 1.96 * stderr,
        ess=ess, n_samples=int(n_samples), seed=int(seed), workers=int(workers),
        tilt=float(s), low_ess_warning=bool(ess < 50.0),
    )
