"""Command-line interface: constant | eigs | smallball | mc | sample | verify.

Structured records go to stdout as JSON (sorted keys), sequences as CSV.
Outputs are byte-deterministic for a fixed (config, seed, workers); the
worker count is recorded in every JSON record.  Exit codes: 0 success,
1 numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import deviations, eigensolve, operators, sampling, spectra, weights
from .errors import InputError, NumericalError, SmallBallError

TWO_PI = 2.0 * math.pi


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("SMALLBALL_WORKERS", "1")))
    except ValueError:
        return 1


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _parse_eps_list(text: str) -> list[float]:
    try:
        eps = [float(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise InputError(f"bad eps list {text!r}") from exc
    if not eps or any(e <= 0 for e in eps):
        raise InputError("eps list must contain positive values")
    return eps


def _parse_filter(text: str) -> np.ndarray:
    if text == "delta0":
        return np.array([1.0])
    try:
        return np.array([float(tok) for tok in text.split(",") if tok])
    except ValueError as exc:
        raise InputError(f"bad filter coefficients {text!r}") from exc


def _parse_rescale(text: str) -> float:
    if text == "2pi":
        return TWO_PI
    try:
        c = float(text)
    except ValueError as exc:
        raise InputError(f"bad rescale factor {text!r} (use '2pi' or a number)") from exc
    if c <= 0:
        raise InputError("rescale factor must be positive")
    return c


def _parse_window(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        lo, hi = (int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise InputError(f"bad window {text!r} (expected 'lo,hi')") from exc
    return lo, hi


# ---------------------------------------------------------------------------
# constant
# ---------------------------------------------------------------------------

def _cmd_constant(args: argparse.Namespace) -> int:
    theorem = args.theorem
    if theorem == "sequence":
        if args.p is None:
            raise InputError("the sequence law needs --p")
        if args.d_sym is not None:
            d_minus = d_plus = float(args.d_sym)
        else:
            d_minus = float(args.d_minus if args.d_minus is not None else 0.0)
            d_plus = float(args.d_plus if args.d_plus is not None else 0.0)
        pred = deviations.constant_sequence(float(args.p), d_minus, d_plus,
                                            _parse_filter(args.a))
    else:
        if args.model is None or args.weight is None:
            raise InputError(f"the {theorem} law needs --model and --weight")
        model_doc = _load_json(args.model)
        w = weights.weight_from_json(_load_json(args.weight))
        if theorem == "fou":
            if model_doc.get("kind") != "fou":
                raise InputError("the fou law needs a model of kind 'fou'")
            pred = deviations.constant_fou(float(model_doc["h"]), w)
        else:
            model = spectra.model_from_json(model_doc)
            tail = model.tail
            fn = {
                "periodic-real": deviations.constant_periodic_real,
                "periodic-proper": deviations.constant_periodic_proper,
                "continuous-real": deviations.constant_continuous_real,
                "continuous-proper": deviations.constant_continuous_proper,
            }[theorem]
            pred = fn(tail, w)
    if args.rescale is not None:
        pred = deviations.rescale_epsilon(pred, _parse_rescale(args.rescale))
    _emit({**pred.to_json_dict(), "workers": args.workers})
    return 0


# ---------------------------------------------------------------------------
# eigenvalue pipelines
# ---------------------------------------------------------------------------

def _sequence_d(args: argparse.Namespace, K: int) -> np.ndarray:
    p = float(args.d_power if args.d_power is not None else 1.0)
    ks = np.arange(-K, K + 1)
    with np.errstate(divide="ignore"):
        d = np.where(ks == 0, 0.0, np.abs(ks, dtype=float) ** (-p))
    return d


def _eig_from_args(args: argparse.Namespace) -> tuple[eigensolve.EigenSequence, str]:
    """Build the eigenvalue sequence named by --setting; returns (eig, convention)."""
    setting = args.setting
    if setting == "periodic":
        model = spectra.model_from_json(_load_json(args.model))
        if not isinstance(model, spectra.DiscreteSpectrum):
            raise InputError("periodic assembly needs a discrete spectral model")
        w = (weights.weight_from_json(_load_json(args.weight)) if args.weight
             else weights.constant_weight(1.0))
        mat = operators.assemble_periodic(model, w, int(args.K))
        return eigensolve.eigenvalues(mat), "normalized[0,2pi]"
    if setting == "nystrom":
        model = spectra.model_from_json(_load_json(args.model))
        if not isinstance(model, spectra.ContinuousSpectrum):
            raise InputError("Nystrom assembly needs a continuous spectral model")
        if args.weight is None:
            raise InputError("Nystrom assembly needs --weight")
        w = weights.weight_from_json(_load_json(args.weight))
        kernel = operators.kernel_of_model(model)
        mat = operators.assemble_nystrom(kernel, w, int(args.grid_size))
        return eigensolve.eigenvalues(mat), "plain[R]"
    if setting == "sequence":
        a = _parse_filter(args.a)
        K = int(args.K)
        mat = operators.assemble_sequence(a, _sequence_d(args, K), K)
        return eigensolve.eigenvalues(mat), "sequence-l2"
    raise InputError(f"unknown setting '{setting}'")


def _cmd_eigs(args: argparse.Namespace) -> int:
    eig, convention = _eig_from_args(args)
    window = _parse_window(args.window)
    fit = eigensolve.fit_power_law(eig, window=window)
    theta = float(args.theta) if args.theta is not None else 1.0 / fit.r_hat
    plateau = eigensolve.delta_theta(eig, theta, window=window)
    if args.out:
        eigensolve.export_eigenvalues_csv(eig, args.out, r=fit.r_hat)
    _emit({
        "n_eigenvalues": len(eig),
        "convention": convention,
        "fit": {"r_hat": fit.r_hat, "c_hat": fit.c_hat,
                "window": list(fit.window), "residual": fit.residual},
        "delta_theta": {"theta": plateau.theta, "value": plateau.value,
                        "spread": plateau.spread, "window": list(plateau.window)},
        "csv": args.out, "workers": args.workers,
    })
    return 0


# ---------------------------------------------------------------------------
# smallball comparison table
# ---------------------------------------------------------------------------

def _read_eigs_csv(path: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read eigenvalue CSV {path}: {exc}") from exc
    vals = np.sort(data[:, 1])[::-1]
    return vals


def _cmd_smallball(args: argparse.Namespace) -> int:
    window = _parse_window(args.window)
    if args.synthetic:
        try:
            c, r, n = args.synthetic.split(",")
            c, r, n = float(c), float(r), int(n)
        except ValueError as exc:
            raise InputError("--synthetic expects 'C,r,N'") from exc
        eig = eigensolve.synthetic_sequence(c, r, n)
        tail = (c, r)
        fit_c, fit_r = c, r
    else:
        if args.eigs_csv:
            eig = eigensolve.EigenSequence(values=_read_eigs_csv(args.eigs_csv),
                                           source={"csv": args.eigs_csv})
            convention = "as-loaded"
        else:
            if not args.setting:
                raise InputError("need --synthetic, --eigs-csv, or a --setting pipeline")
            eig, convention = _eig_from_args(args)
        fit = eigensolve.fit_power_law(eig, window=window)
        tail = fit
        fit_c, fit_r = fit.c_hat, fit.r_hat

    eps_list = _parse_eps_list(args.eps)
    rows = []
    for eps in eps_list:
        theorem_val = deviations.logprob_from_fit((fit_c, fit_r), eps)
        bound = deviations.chernoff_logprob(eig, eps, tail=tail)
        ratio = bound.value / theorem_val if theorem_val != 0 else math.nan
        row = {"eps": eps, "theorem_logprob": theorem_val,
               "chernoff_logprob": bound.value, "ratio": ratio,
               "mc_estimate": None, "mc_ci_low": None, "mc_ci_high": None,
               "mc_ess": None}
        if args.mc_samples and bound.value >= deviations.MC_LOG_REACH:
            est = deviations.mc_smallball(eig, eps, int(args.mc_samples),
                                          seed=int(args.seed), workers=args.workers)
            row.update(mc_estimate=est.estimate, mc_ci_low=est.ci_low,
                       mc_ci_high=est.ci_high, mc_ess=est.ess)
        rows.append(row)

    if args.format == "json":
        _emit({"rows": rows, "fit": {"c": fit_c, "r": fit_r},
               "seed": int(args.seed), "workers": args.workers})
    else:
        cols = ["eps", "theorem_logprob", "chernoff_logprob", "ratio",
                "mc_estimate", "mc_ci_low", "mc_ci_high", "mc_ess"]
        sys.stdout.write(",".join(cols) + "\n")
        for row in rows:
            cells = [("" if row[c] is None else _fmt(row[c])) for c in cols]
            sys.stdout.write(",".join(cells) + "\n")
    return 0


# ---------------------------------------------------------------------------
# mc
# ---------------------------------------------------------------------------

def _cmd_mc(args: argparse.Namespace) -> int:
    if args.lambdas:
        lam = np.array([float(tok) for tok in args.lambdas.split(",") if tok])
    elif args.eigs_csv:
        lam = _read_eigs_csv(args.eigs_csv)
    elif args.synthetic:
        try:
            c, r, n = args.synthetic.split(",")
            lam = eigensolve.synthetic_sequence(float(c), float(r), int(n)).values
        except ValueError as exc:
            raise InputError("--synthetic expects 'C,r,N'") from exc
    else:
        raise InputError("need --lambdas, --eigs-csv, or --synthetic")
    tilt: float | str | None = args.tilt
    if tilt not in ("auto", "none"):
        tilt = float(tilt)
    est = deviations.mc_smallball(lam, float(args.eps), int(args.samples),
                                  seed=int(args.seed), tilt=tilt, workers=args.workers)
    _emit(est.to_json_dict())
    return 0


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def _cmd_sample(args: argparse.Namespace) -> int:
    model = spectra.model_from_json(_load_json(args.model))
    if not isinstance(model, spectra.DiscreteSpectrum):
        raise InputError("path sampling needs a discrete spectral model")
    if args.norms:
        if args.weight is None or args.out is None:
            raise InputError("norm batches need --weight and --out")
        w = weights.weight_from_json(_load_json(args.weight))
        norms = sampling.batch_norms(model, w, int(args.K), int(args.grid),
                                     int(args.norms), seed=int(args.seed),
                                     kind=args.kind)
        sampling.export_norms_csv(norms, args.out)
        _emit({"n_paths": int(args.norms), "csv": args.out, "seed": int(args.seed),
               "kind": args.kind, "K": int(args.K), "grid": int(args.grid),
               "workers": args.workers})
        return 0
    sampler = (sampling.sample_real_periodic if args.kind == "real"
               else sampling.sample_proper_periodic)
    path = sampler(model, int(args.K), int(args.grid), seed=int(args.seed),
                   path_index=int(args.path_index))
    if args.out:
        sampling.export_path_csv(path, args.out)
    _emit({"kind": path.kind, "K": path.truncation, "grid": len(path.grid),
           "seed": path.seed, "generator": path.generator, "csv": args.out,
           "workers": args.workers})
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _cmd_verify(args: argparse.Namespace) -> int:
    from . import acceptance

    results = acceptance.run_criteria(only=args.only)
    if not results:
        raise InputError(f"no acceptance criterion matches --only {args.only!r}")
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        sys.stdout.write(f"{status} {res.criterion}: {res.detail}\n")
        failed += 0 if res.passed else 1
    sys.stdout.write(f"{len(results) - failed}/{len(results)} criteria passed\n")
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smallball",
        description="Small-deviation asymptotics of weighted L2 norms of "
                    "stationary Gaussian processes",
    )
    parser.add_argument("--workers", type=int, default=_default_workers(),
                        help="worker count for Monte Carlo partitioning "
                             "(default: SMALLBALL_WORKERS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constant", help="closed-form law coefficient")
    p.add_argument("--theorem", required=True,
                   choices=["periodic-real", "periodic-proper", "sequence",
                            "continuous-real", "continuous-proper", "fou"])
    p.add_argument("--model", help="spectral model JSON file")
    p.add_argument("--weight", help="weight JSON file")
    p.add_argument("--rescale", help="replace eps^2 by c*eps^2 ('2pi' or a number)")
    p.add_argument("--p", type=float, help="sequence law: weight decay exponent")
    p.add_argument("--a", default="delta0",
                   help="filter coefficients: 'delta0' or comma-separated floats")
    p.add_argument("--d-sym", dest="d_sym", help="sequence law: d- = d+ = value")
    p.add_argument("--d-minus", dest="d_minus", help="sequence law: d-")
    p.add_argument("--d-plus", dest="d_plus", help="sequence law: d+")
    p.set_defaults(func=_cmd_constant)

    p = sub.add_parser("eigs", help="assemble, diagonalize, fit the tail")
    p.add_argument("--setting", required=True, choices=["periodic", "nystrom", "sequence"])
    p.add_argument("--model", help="spectral model JSON file")
    p.add_argument("--weight", help="weight JSON file")
    p.add_argument("--K", type=int, default=4096, help="mode/index cutoff")
    p.add_argument("--grid-size", dest="grid_size", type=int, default=800,
                   help="Nystrom node budget")
    p.add_argument("--a", default="delta0", help="sequence filter coefficients")
    p.add_argument("--d-power", dest="d_power", type=float,
                   help="sequence weights d_k = |k|^-p (d_0 = 0); default p=1")
    p.add_argument("--window", help="fit window 'lo,hi' (default: trusted window)")
    p.add_argument("--theta", type=float, help="plateau exponent (default 1/r_hat)")
    p.add_argument("--out", help="eigenvalue CSV destination")
    p.set_defaults(func=_cmd_eigs)

    p = sub.add_parser("smallball", help="law vs oracle comparison over an eps list")
    p.add_argument("--eps", required=True, help="comma-separated eps values")
    p.add_argument("--synthetic", help="'C,r,N': lambda_n = C n^-r, n <= N")
    p.add_argument("--eigs-csv", dest="eigs_csv", help="eigenvalue CSV from 'eigs'")
    p.add_argument("--setting", choices=["periodic", "nystrom", "sequence"])
    p.add_argument("--model", help="spectral model JSON file")
    p.add_argument("--weight", help="weight JSON file")
    p.add_argument("--K", type=int, default=4096)
    p.add_argument("--grid-size", dest="grid_size", type=int, default=800)
    p.add_argument("--a", default="delta0")
    p.add_argument("--d-power", dest="d_power", type=float)
    p.add_argument("--window", help="fit window 'lo,hi'")
    p.add_argument("--mc-samples", dest="mc_samples", type=int,
                   help="add a Monte Carlo column where within reach")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=_cmd_smallball)

    p = sub.add_parser("mc", help="tilted Monte Carlo for the chi-squared form")
    p.add_argument("--lambdas", help="comma-separated eigenvalues")
    p.add_argument("--eigs-csv", dest="eigs_csv")
    p.add_argument("--synthetic", help="'C,r,N'")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tilt", default="auto", help="'auto', 'none', or a tilt value")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("sample", help="Karhunen-Loeve path or norm-batch sampling")
    p.add_argument("--model", required=True, help="discrete spectral model JSON")
    p.add_argument("--kind", choices=["real", "proper"], default="real")
    p.add_argument("--K", type=int, default=256, help="mode cutoff")
    p.add_argument("--grid", type=int, default=1024, help="uniform grid size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--path-index", dest="path_index", type=int, default=0)
    p.add_argument("--norms", type=int, help="sample this many weighted norms instead")
    p.add_argument("--weight", help="weight JSON (for --norms)")
    p.add_argument("--out", help="CSV destination")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--only", help="run only criteria whose id contains this substring")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 1
    except SmallBallError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
