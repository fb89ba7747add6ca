"""Full-spectrum eigensolves, power-law tail fits, and the index-count
plateau functional of a sorted eigenvalue sequence."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .operators import OperatorMatrix

# eigenvalues below this multiple of the largest are eigensolver noise on
# positive-semidefinite inputs and get clipped to zero
CLIP_RTOL = 1e-14
# tolerated negativity before the matrix is declared not non-negative definite
NEGATIVITY_RTOL = 1e-10

# trusted index window for tail fits: the first eigenvalues are
# pre-asymptotic, the deep tail is corrupted by discretization
TRUSTED_LO_FRACTION = 1.0 / 20.0
TRUSTED_HI_FRACTION = 1.0 / 4.0


@dataclass(frozen=True)
class EigenSequence:
    """Sorted non-increasing eigenvalues with discretization provenance."""

    values: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 1 or len(v) == 0:
            raise InputError("eigenvalue sequence must be a non-empty 1-D array")
        if np.any(np.diff(v) > 0):
            raise InputError("eigenvalue sequence must be sorted non-increasing")
        if v[-1] < 0:
            raise InputError("eigenvalue sequence must be non-negative after clipping")

    def __len__(self) -> int:
        return len(self.values)

    def trusted_window(self) -> tuple[int, int]:
        n = len(self.values)
        lo = max(1, int(n * TRUSTED_LO_FRACTION))
        hi = max(lo + 1, int(n * TRUSTED_HI_FRACTION))
        return lo, hi


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit lambda_n ~ c_hat * n^{-r_hat} on a log-log window."""

    r_hat: float
    c_hat: float
    window: tuple[int, int]
    residual: float             # max |lambda_n n^r_hat / c_hat - 1| on the window


@dataclass(frozen=True)
class PlateauEstimate:
    """Median and spread of n * lambda_n^theta over the trusted window."""

    value: float
    spread: float
    theta: float
    window: tuple[int, int]


def synthetic_sequence(c: float, r: float, n: int, source: str = "synthetic") -> EigenSequence:
    """The exact power law lambda_n = c * n^{-r}, n = 1..n."""
    if c <= 0 or r <= 0 or n < 1:
        raise InputError("synthetic sequence needs c > 0, r > 0, n >= 1")
    ns = np.arange(1, n + 1, dtype=float)
    return EigenSequence(values=c * ns ** (-r), source={"kind": source, "c": c, "r": r})


def eigenvalues(mat: OperatorMatrix) -> EigenSequence:
    """All eigenvalues of a symmetric/Hermitian matrix, sorted non-increasing,
    with sub-noise negatives clipped to zero.

    Raises if entries are non-finite or the matrix fails the non-negative
    definiteness tolerance (smallest eigenvalue < -1e-10 * largest).
    """
    a = mat.entries
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    vals = np.linalg.eigvalsh(a)[::-1].copy()
    top = float(vals[0]) if len(vals) else 0.0
    if top < 0:
        raise NumericalError("matrix is negative definite; not a covariance discretization")
    if len(vals) and vals[-1] < -NEGATIVITY_RTOL * max(top, 1e-300):
        raise NumericalError(
            f"matrix violates non-negativity: min eigenvalue {vals[-1]:.3e} "
            f"vs largest {top:.3e}"
        )
    vals[vals < CLIP_RTOL * top] = 0.0
    return EigenSequence(values=vals, source={"setting": mat.setting, **{
        k: v for k, v in mat.meta.items() if not isinstance(v, np.ndarray)}})


def _check_window(eig: EigenSequence, window: tuple[int, int] | None,
                  enforce_trusted: bool = True) -> tuple[int, int]:
    n = len(eig)
    if window is None:
        return eig.trusted_window()
    lo, hi = int(window[0]), int(window[1])
    if not (1 <= lo < hi <= n):
        raise InputError(f"window {window} out of range for {n} eigenvalues")
    if enforce_trusted and hi > n // 4:
        raise InputError(
            f"window upper end {hi} beyond the trusted quarter ({n // 4}) of the "
            "discretization; the deep tail is untrusted"
        )
    return lo, hi


def fit_power_law(eig: EigenSequence, window: tuple[int, int] | None = None,
                  enforce_trusted: bool = True) -> PowerLawFit:
    """Unweighted least squares of ln(lambda_n) on ln(n) over the window.

    The residual (max relative deviation of lambda_n n^r_hat / c_hat from 1)
    is always reported, never folded into the estimate.
    """
    lo, hi = _check_window(eig, window, enforce_trusted)
    ns = np.arange(lo, hi + 1, dtype=float)
    lam = eig.values[lo - 1: hi]
    if np.any(lam <= 0):
        raise NumericalError(f"zero eigenvalue inside fit window [{lo}, {hi}]")
    slope, intercept = np.polyfit(np.log(ns), np.log(lam), 1)
    r_hat = -float(slope)
    c_hat = float(np.exp(intercept))
    residual = float(np.max(np.abs(lam * ns ** r_hat / c_hat - 1.0)))
    return PowerLawFit(r_hat=r_hat, c_hat=c_hat, window=(lo, hi), residual=residual)


def delta_theta(eig: EigenSequence, theta: float,
                window: tuple[int, int] | None = None,
                enforce_trusted: bool = True) -> PlateauEstimate:
    """Plateau estimate of lim lambda^theta N(lambda): evaluates n * lambda_n^theta
    on the trusted window (using N(lambda_n) = n) and reports median and spread."""
    if not theta > 0:
        raise InputError(f"theta must be positive, got {theta}")
    lo, hi = _check_window(eig, window, enforce_trusted)
    ns = np.arange(lo, hi + 1, dtype=float)
    lam = eig.values[lo - 1: hi]
    if np.any(lam <= 0):
        raise NumericalError(f"zero eigenvalue inside window [{lo}, {hi}]")
    seq = ns * lam ** theta
    med = float(np.median(seq))
    spread = float(np.max(np.abs(seq - med)))
    return PlateauEstimate(value=med, spread=spread, theta=float(theta), window=(lo, hi))


def proper_doubling(eig: EigenSequence) -> EigenSequence:
    """Interleave (l1/2, l1/2, l2/2, l2/2, ...): the eigenvalue sequence of the
    real quadratic form carried by a properly complex Gaussian element.

    Turns a power law C n^{-r} into 2^{r-1} C n^{-r}.
    """
    doubled = np.repeat(eig.values / 2.0, 2)
    return EigenSequence(values=doubled, source={**eig.source, "doubled": True})


def export_eigenvalues_csv(eig: EigenSequence, path: str, r: float | None = None) -> None:
    """CSV columns (n, lambda_n, n_pow_r_lambda); the third column uses the
    supplied exponent (a fitted r_hat, typically) or the trusted-window fit."""
    if r is None:
        r = fit_power_law(eig).r_hat
    ns = np.arange(1, len(eig) + 1, dtype=float)
    scaled = eig.values * ns ** r
    data = np.column_stack([ns, eig.values, scaled])
    np.savetxt(path, data, delimiter=",", fmt=["%d", "%.17g", "%.17g"],
               header="n,lambda_n,n_pow_r_lambda", comments="")
