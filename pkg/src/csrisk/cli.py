"""Command-line interface: ``csrisk <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.
Every CSV output gets a JSON sidecar (same stem, ``.json``) unless a path
is given. Existing output files are only replaced with ``--force``.
"""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .dataset import read_dataset, write_dataset
from .estimators import naive, read_estimate, scaled_naive, truncated_naive, write_estimate
from .exceptions import InfeasibleEstimateError, InvalidInputError, NonConvergenceError
from .limit import LocalParams, diagnostics, mle_limit, naive_limit, sample_paths, symmetric_grid
from .mle import kkt_residual, mle
from .simulation import DEFAULT_GRID, ModelSpec, gen_data, local_params_at, localized_processes, mse_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONV = 0, 1, 2, 3
ESTIMATOR_NAMES = ("mle", "naive", "scaled-naive", "truncated-naive")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _sidecar(explicit, csv_path):
    """JSON path written next to ``csv_path`` unless one is given."""
    if explicit:
        return explicit
    root, ext = os.path.splitext(str(csv_path))
    return (root if ext.lower() == ".csv" else str(csv_path)) + ".json"


def _check_writable(paths, force):
    for path in paths:
        if path and os.path.exists(path) and not force:
            raise UsageError(f"{path} exists; pass --force to overwrite")


def _finite(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_finite(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _model_from(args, config=None):
    """Model from flags, falling back to ``config['model']`` and then the two-cause example."""
    base = ModelSpec.example().to_dict()
    if config and "model" in config:
        base.update(config["model"])
    if args.obs_rate is not None:
        base["obs_rate"] = args.obs_rate
    if args.cause_probs is not None:
        base["cause_probs"] = args.cause_probs
    if args.cond_rates is not None:
        base["cond_rates"] = args.cond_rates
    return ModelSpec(base["obs_rate"], tuple(base["cause_probs"]), tuple(base["cond_rates"]))


def _add_model_flags(p):
    p.add_argument("--obs-rate", type=float, help="rate of the exponential observation times")
    p.add_argument("--cause-probs", type=_floats, help="P(Y = k) for k = 1..K, comma separated")
    p.add_argument("--cond-rates", type=_floats, help="exponential rate of X given Y = k")


def _estimate(d, name, s0, tol, max_iter):
    if name == "mle":
        return mle(d, tol=tol, max_iter=max_iter)
    if name == "naive":
        return naive(d)
    if name == "scaled-naive":
        return scaled_naive(d, s0)
    return truncated_naive(d)


def cmd_estimate(args):
    cert_path = _sidecar(args.cert, args.out)
    _check_writable([args.out, cert_path], args.force)
    d = read_dataset(args.data, args.K)
    est = _estimate(d, args.estimator, args.s0, args.tol, args.max_iter)
    write_estimate(est, args.out)
    if args.estimator == "mle":
        res = est.kkt_residual
    else:
        try:
            res = kkt_residual(d, est)
        except InfeasibleEstimateError:
            res = None
    cert = {"loglik": est.loglik, "kkt_residual": res, "iterations": est.iterations,
            "converged": est.converged, "estimator": args.estimator, "K": d.K, "n": d.n}
    _write_json(cert, cert_path)
    return EXIT_OK


def cmd_check(args):
    d = read_dataset(args.data, args.K)
    est = read_estimate(args.estimate, d.K)
    res = kkt_residual(d, est)
    print(f"kkt_residual {res:.6e}")
    return EXIT_OK if res <= args.tol else EXIT_NONCONV


def cmd_gen_data(args):
    meta_path = _sidecar(args.meta, args.out)
    _check_writable([args.out, meta_path], args.force)
    m = _model_from(args)
    d = gen_data(m, args.n, args.seed)
    write_dataset(d, args.out)
    _write_json({"model": m.to_dict(), "n": args.n, "seed": args.seed,
                 "cause_counts": np.bincount(d.cause, minlength=m.K + 2)[1:].tolist()}, meta_path)
    return EXIT_OK


def _progress(message):
    print(message, file=sys.stderr)


def cmd_simulate_mse(args):
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    sizes = args.sizes or config.get("sizes", [250, 2500])
    reps = args.reps if args.reps is not None else config.get("reps", 200)
    estimators = args.estimators if args.estimators is not None else config.get(
        "estimators", ["mle", "naive", "scaled_naive", "truncated_naive"])
    estimators = [e.replace("-", "_") for e in estimators]
    seed = args.seed if args.seed is not None else config.get("seed")
    s0 = args.s0 if args.s0 is not None else config.get("s0", 3.0)
    grid_spec = config.get("grid", {})
    step = args.grid_step if args.grid_step is not None else grid_spec.get("step", 0.01)
    stop = args.grid_max if args.grid_max is not None else grid_spec.get("max", 3.0)
    if seed is None:
        raise UsageError("a seed is required (--seed or config 'seed')")
    if reps < 2:
        raise UsageError("reps must be at least 2")
    if not estimators:
        raise UsageError("estimator list is empty")
    if not sizes or min(sizes) < 1:
        raise UsageError("sizes must be positive")
    meta_path = _sidecar(args.meta, args.out)
    _check_writable([args.out, meta_path], args.force)
    m = _model_from(args, config)
    if step == 0.01 and stop == 3.0:
        grid = DEFAULT_GRID
    else:
        grid = np.round(np.arange(int(round(stop / step)) + 1) * step, 10)
    table = mse_experiment(m, sizes=tuple(sizes), reps=reps, grid=grid, estimators=tuple(estimators),
                           seed=seed, s0=s0, threads=args.threads, progress=_progress)
    table.to_csv(args.out)
    _write_json({"model": m.to_dict(), "sizes": list(sizes), "reps": reps, "seed": seed,
                     "estimators": estimators, "s0": s0, "grid": {"step": step, "max": stop}}, meta_path)
    return EXIT_OK


def _median_or_none(values):
    vals = np.asarray([v for v in values if v is not None], dtype=float)
    vals = vals[np.isfinite(vals)]
    return float(np.median(vals)) if vals.size else None


def _limit_params(args):
    if args.F0 is not None or args.f0 is not None or args.g0 is not None:
        if args.F0 is None or args.f0 is None or args.g0 is None:
            raise UsageError("--F0, --f0 and --g0 must be given together")
        return LocalParams(args.t0, args.F0, args.f0, args.g0)
    return local_params_at(_model_from(args), args.t0)


def _limit_replication(job):
    """One limit-process replication; never raises on non-convergence."""
    p, seq, c, h, tol, max_iter, scheme, zero_noise = job
    grid = symmetric_grid(2 * c, h)
    paths = sample_paths(p, grid, np.random.default_rng(seq), window=c, zero_noise=zero_noise)
    Ht, Ft = naive_limit(paths)
    try:
        fit = mle_limit(p, paths, tol=tol, max_iter=max_iter, scheme=scheme)
        converged, err = True, None
    except NonConvergenceError as exc:
        fit, converged, err = exc.best, False, str(exc)
    diag = diagnostics(p, paths, fit, Htilde=Ht, seed=int(seq.generate_state(1)[0]))
    diag.update({"converged": converged, "iterations": fit.iterations, "residual": fit.residual,
                 "rate": fit.rate, "error": err})
    inner = paths.inner
    cols = {"t": grid[inner]}
    for name, arr in (("V", paths.V), ("Hhat", fit.H), ("Fhat", fit.F), ("Htilde", Ht), ("Ftilde", Ft)):
        for k in range(p.K):
            cols[f"{name}_{k + 1}"] = arr[k, inner]
    return cols, diag


def cmd_simulate_limit(args):
    p = _limit_params(args)
    if args.reps < 1:
        raise UsageError("reps must be at least 1")
    os.makedirs(args.out_dir, exist_ok=True)
    summary_path = os.path.join(args.out_dir, "summary.json")
    _check_writable([summary_path], args.force)
    seqs = np.random.SeedSequence(args.seed).spawn(args.reps)
    jobs = [(p, s, args.c, args.h, args.tol, args.max_iter, args.scheme, args.zero_noise) for s in seqs]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_limit_replication, jobs))
    else:
        results = [_limit_replication(j) for j in jobs]
    failures, sum_bound, naive_bound, rates, iters = 0, 0, 0, [], []
    width = len(str(args.reps - 1))
    for r, (cols, diag) in enumerate(results):
        stem = os.path.join(args.out_dir, f"rep{r:0{width}d}")
        with open(stem + ".csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            names = list(cols)
            w.writerow(names)
            for row in zip(*(cols[c].tolist() for c in names)):
                w.writerow([repr(v) for v in row])
        _write_json(diag, stem + ".json")
        failures += not diag["converged"]
        sum_bound += diag["sum_bound_max_violation"] > args.law_tol
        naive_bound += diag["naive_bound_max_violation"] > args.law_tol
        rates.append(diag["rate"])
        iters.append(diag["iterations"])
        print(f"replication {r + 1}/{args.reps}", file=sys.stderr)
    summary = {"reps": args.reps, "seed": args.seed, "params": {"t0": p.t0, "F0": list(p.F0),
               "f0": list(p.f0), "g0": p.g0}, "grid": {"c": args.c, "h": args.h},
               "nonconverged": failures, "sum_bound_violations": sum_bound, "naive_bound_violations": naive_bound,
               "law_tol": args.law_tol, "median_rate": _median_or_none(rates),
               "median_iterations": float(np.median(iters))}
    _write_json(summary, summary_path)
    return EXIT_OK


def cmd_localize(args):
    summary_path = _sidecar(args.summary, args.out)
    _check_writable([args.out, summary_path], args.force)
    m = _model_from(args)
    d = read_dataset(args.data, m.K)
    p = local_params_at(m, args.t0)
    fit = mle(d, tol=args.tol)
    t = symmetric_grid(args.c, args.h)
    lp = localized_processes(d, p, fit, m, t)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        K = d.K
        head = ["t"] + [f"{n}_{k}" for n in ("F", "V", "Hbar", "Hhat", "gap") for k in range(1, K + 1)]
        w.writerow(head)
        for j in range(t.size):
            row = [t[j]]
            for arr in (lp.F, lp.V, lp.Hbar, lp.Hhat, lp.gap):
                row.extend(arr[:, j])
            w.writerow([repr(float(v)) for v in row])
    _write_json(lp.summary(), summary_path)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="csrisk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="fit an estimator to a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--estimator", choices=ESTIMATOR_NAMES, default="mle")
    p.add_argument("--s0", type=float, default=3.0, help="scaling point of scaled-naive")
    p.add_argument("--out", required=True, help="estimate CSV")
    p.add_argument("--cert", help="certificate JSON (default: next to --out)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--K", type=int, help="number of causes (default: max cause - 1)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("check", help="print the optimality residual of an estimate")
    p.add_argument("--data", required=True)
    p.add_argument("--estimate", required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--K", type=int)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen-data", help="simulate a dataset CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--meta", help="JSON with model, n, seed and cause counts (default: next to --out)")
    p.add_argument("--force", action="store_true")
    _add_model_flags(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("simulate-mse", help="Monte-Carlo MSE comparison of the estimators")
    p.add_argument("--config", help="JSON with model, sizes, reps, grid, estimators, seed")
    p.add_argument("--sizes", type=_ints)
    p.add_argument("--reps", type=int)
    p.add_argument("--estimators", type=_names)
    p.add_argument("--seed", type=int)
    p.add_argument("--s0", type=float)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--meta", help="JSON echo of the resolved configuration (default: next to --out)")
    p.add_argument("--force", action="store_true")
    _add_model_flags(p)
    p.set_defaults(func=cmd_simulate_mse)

    p = sub.add_parser("simulate-limit", help="simulate the limit processes")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--F0", type=_floats)
    p.add_argument("--f0", type=_floats)
    p.add_argument("--g0", type=float)
    p.add_argument("--c", type=float, default=4.0, help="half-width of the analysis window")
    p.add_argument("--h", type=float, default=0.005, help="grid step")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--scheme", choices=("block", "damped"), default="block")
    p.add_argument("--law-tol", type=float, default=1e-6)
    p.add_argument("--zero-noise", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--force", action="store_true")
    _add_model_flags(p)
    p.set_defaults(func=cmd_simulate_limit)

    p = sub.add_parser("localize", help="localized processes of the MLE around t0")
    p.add_argument("--data", required=True)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--c", type=float, default=4.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="summary JSON (default: next to --out)")
    p.add_argument("--force", action="store_true")
    _add_model_flags(p)
    p.set_defaults(func=cmd_localize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"csrisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"csrisk: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (InvalidInputError, InfeasibleEstimateError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"csrisk: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
