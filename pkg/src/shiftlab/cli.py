"""``shiftlab`` command line.

Exit codes: 0 success, 2 configuration / input error, 3 property failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from shiftlab import harness
from shiftlab.bounds import BoundConfig, bounds_report, tightness_ratios
from shiftlab.empirical import MatrixDataset, binary_experiment, write_classification_csv
from shiftlab.errors import PropertyFailure, ShiftlabError
from shiftlab.interpolator import DEFAULT_TOL, mni_fit
from shiftlab.risk import decompose_instance, monte_carlo_excess_risk
from shiftlab.sampling import RNG_ALGORITHM, RegressionInstance, SeedSpec, make_instance
from shiftlab.spectra import (
    DEFAULT_B,
    R_table,
    Spectrum,
    SpectrumPair,
    benign_report,
    rho_table,
    source_from_dict,
)
from shiftlab.taxonomy import classify_general, classify_multiplicative

EXIT_OK, EXIT_CONFIG, EXIT_PROPERTY = 0, 2, 3


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _dumps(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    def clean(o):
        # JSON has no inf/nan; emit them as strings
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, default=default)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _write_matrix(path: Path, a: np.ndarray) -> None:
    np.savetxt(path, np.atleast_1d(a), delimiter=",", fmt="%.17g")


def _read_vector(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=1)


# --------------------------------------------------------------------------
# source spectrum flags (shared by spectrum / generate)


def _add_source_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--spiked", metavar="K,DELTA,EPS,P", help="spiked spectrum")
    g.add_argument("--decay", metavar="LAW:P", help="power_log:a,b:P | power:a:P | log_self:P")
    g.add_argument("--spectrum-file", metavar="FILE", help="lambda CSV or JSON array")


def _source_dict(args) -> dict:
    try:
        if args.spiked:
            k, delta, eps, p = args.spiked.split(",")
            return {"kind": "spiked", "k": int(k), "delta": float(delta), "eps": float(eps), "p": int(p)}
        if args.decay:
            parts = args.decay.split(":")
            law = parts[0]
            if law == "log_self":
                return {"kind": "log_self", "p": int(parts[1])}
            if law == "power":
                return {"kind": "power", "a": float(parts[1]), "p": int(parts[2])}
            if law == "power_log":
                a, b = parts[1].split(",")
                return {"kind": "power_log", "a": float(a), "b": float(b), "p": int(parts[2])}
            raise _ArgError(f"unknown decay law {law!r}")
    except (ValueError, IndexError) as exc:
        raise _ArgError(f"malformed source flag: {exc}") from exc
    spec = Spectrum.load(args.spectrum_file)
    return {"kind": "values", "values": [float(v) for v in spec.values]}


# --------------------------------------------------------------------------
# subcommands


def cmd_spectrum(args) -> int:
    d = _source_dict(args)
    spec = source_from_dict(d)
    out = {"source": d, "p": spec.p, "trace": spec.trace()}
    if args.n is not None:
        out["benign"] = benign_report(spec, args.n, args.b).as_dict()
        out["rho_k"] = rho_table(spec, args.n)[: args.max_k]
    out["R_k"] = R_table(spec)[: args.max_k]
    _emit(_dumps(out), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    if not args.out:
        raise _ArgError("generate needs --out DIR")
    d = _source_dict(args)
    spec = source_from_dict(d)
    seed = SeedSpec(args.seed, args.stream)
    inst = make_instance(args.n, spec, seed, args.noise_variance)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix(out / "X.csv", inst.X)
    _write_matrix(out / "y.csv", inst.y)
    _write_matrix(out / "theta.csv", inst.theta_source)
    meta = {
        "n": args.n,
        "p": spec.p,
        "source": d,
        "noise_variance": args.noise_variance,
        "seed": seed.as_dict(),
        "rng": RNG_ALGORITHM,
    }
    (out / "meta.json").write_text(_dumps(meta) + "\n")
    return EXIT_OK


def _load_xy(args) -> tuple[np.ndarray, np.ndarray]:
    d = Path(args.dir) if args.dir else None
    xp = args.X or (d / "X.csv" if d else None)
    yp = args.y or (d / "y.csv" if d else None)
    if xp is None or yp is None:
        raise _ArgError("need --dir or both --X and --y")
    return np.loadtxt(xp, delimiter=",", ndmin=2), _read_vector(yp)


def cmd_fit(args) -> int:
    X, y = _load_xy(args)
    res = mni_fit(X, y, args.tol, args.method)
    out = Path(args.out or args.dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix(out / "theta_hat.csv", res.theta_hat)
    (out / "fit_meta.json").write_text(_dumps({**res.meta(), "tol": args.tol}) + "\n")
    return EXIT_OK


def _load_instance(directory: Path, theta_target_path=None) -> tuple[RegressionInstance, dict]:
    meta = json.loads((directory / "meta.json").read_text())
    X = np.loadtxt(directory / "X.csv", delimiter=",", ndmin=2)
    y = _read_vector(directory / "y.csv")
    theta = _read_vector(directory / "theta.csv")
    tt = theta.copy() if theta_target_path is None else _read_vector(theta_target_path)
    noise = y - X @ theta
    return RegressionInstance(X, y, theta, tt, noise, float(meta["noise_variance"])), meta


def cmd_risk(args) -> int:
    directory = Path(args.dir)
    target = Spectrum.load(args.target)
    inst, meta = _load_instance(directory, args.theta_target)
    if args.mc_trials is None:
        rep = decompose_instance(inst, target, args.tol)
        _emit(_dumps(rep.as_dict()), args.out)
        return EXIT_OK
    source = source_from_dict(meta["source"])
    tt = inst.theta_target if args.theta_target else None

    def make_trial(seed):
        return make_instance(inst.n, source, seed, inst.noise_variance, tt), target

    summ, _ = monte_carlo_excess_risk(
        make_trial, args.mc_trials, SeedSpec(args.seed, args.stream), args.threads, args.tol
    )
    text = "trials,mean,stderr\n" + f"{summ.trials},{summ.mean:.17g},{summ.stderr:.17g}\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    pair = SpectrumPair.from_json(Path(args.pair).read_text())
    cfg = BoundConfig(args.n, args.k, args.c, args.b)
    theta = _read_vector(args.theta) if args.theta else None
    rep = bounds_report(pair, cfg, theta)
    out = rep.as_dict()
    status = EXIT_OK
    if rep.benign_ok:
        tr = tightness_ratios(pair, theta, BoundConfig(args.n, rep.k, args.c, args.b), check=False)
        out["tightness"] = tr.as_dict()
        if tr.k_is_minimal:
            try:
                tr.check()
            except PropertyFailure as exc:
                out["property_failure"] = str(exc)
                status = EXIT_PROPERTY
    _emit(_dumps(out), args.out)
    return status


def cmd_classify_shift(args) -> int:
    spec = Spectrum.load(args.spectrum)
    if args.factors:
        f = json.loads(Path(args.factors).read_text())
        rep = classify_general(spec, args.k, args.n, f["alpha"], f["beta"], args.tol_rel, args.band, args.b)
    else:
        if args.alpha is None or args.beta is None:
            raise _ArgError("need --alpha and --beta, or --factors FILE")
        rep = classify_multiplicative(spec, args.k, args.n, args.alpha, args.beta, args.tol_rel, args.band, args.b)
    _emit(_dumps(rep.as_dict()), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    train = MatrixDataset.load(args.train, args.train_labels, "train")
    tests = []
    for item in args.test:
        try:
            name, paths = item.split("=", 1)
            xp, lp = paths.split(":", 1)
        except ValueError as exc:
            raise _ArgError(f"--test expects NAME=X.csv:labels.csv, got {item!r}") from exc
        tests.append(MatrixDataset.load(xp, lp, name))
    rows = binary_experiment(
        train, tests, args.flip_prob, args.trials, SeedSpec(args.seed), args.n_train, args.center, args.tol
    )
    if args.out:
        write_classification_csv(rows, args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["test_name", "flip_prob", "mean_excess_error", "stderr", "trials"])
        for r in rows:
            w.writerow([r.test_name, repr(r.flip_prob), f"{r.mean_excess_error:.17g}", f"{r.stderr:.17g}", r.trials])
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.dump_preset:
        _emit(harness.preset(args.dump_preset).to_json(), args.out)
        return EXIT_OK
    if bool(args.preset) == bool(args.config):
        raise _ArgError("sweep needs exactly one of --preset NAME or --config FILE")
    if args.preset:
        cfg = harness.preset(args.preset)
    else:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise _ArgError(f"cannot read config: {exc}") from exc
        cfg = harness.SweepConfig.from_json(text)
    overrides = {}
    if args.seed_given:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.risk_mode is not None:
        overrides["risk_mode"] = args.risk_mode
    if overrides:
        cfg = harness.SweepConfig.from_dict({**cfg.to_dict(), **overrides})
    table = harness.run_sweep(cfg, workers=args.threads)
    out = args.out or cfg.output
    if out:
        harness.emit_csv(table, out)
    else:
        sys.stdout.write(harness.to_csv_text(table))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    glob = _Parser(add_help=False)
    glob.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    glob.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    glob.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")

    p = _Parser(prog="shiftlab", parents=[glob], description="Covariate shift and the minimum-norm interpolator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", parents=[glob], help="effective-rank diagnostics")
    _add_source_flags(s)
    s.add_argument("--n", type=int)
    s.add_argument("--b", type=float, default=DEFAULT_B)
    s.add_argument("--max-k", type=int, default=None)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("generate", parents=[glob], help="sample a regression instance")
    _add_source_flags(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--noise-variance", type=float, default=1.0)
    s.add_argument("--stream", type=int, default=0)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("fit", parents=[glob], help="minimum-norm interpolator")
    s.add_argument("--dir")
    s.add_argument("--X")
    s.add_argument("--y")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--method", choices=["svd", "gram"], default="svd")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("risk", parents=[glob], help="excess-risk decomposition")
    s.add_argument("--dir", required=True, help="instance directory written by generate")
    s.add_argument("--target", required=True, help="target spectrum file")
    s.add_argument("--theta-target")
    s.add_argument("--mc-trials", type=int)
    s.add_argument("--stream", type=int, default=1)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.set_defaults(func=cmd_risk)

    s = sub.add_parser("bounds", parents=[glob], help="variance / bias bounds")
    s.add_argument("--pair", required=True, help='JSON {"source": [...], "target": [...]}')
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--c", type=float, default=1.0)
    s.add_argument("--b", type=float, default=DEFAULT_B)
    s.add_argument("--theta", help="source model vector (enables bias bounds)")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("classify-shift", parents=[glob], help="beneficial / malignant verdict")
    s.add_argument("--spectrum", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--factors", help='JSON {"alpha": [...], "beta": [...]}')
    s.add_argument("--tol-rel", type=float, default=0.05)
    s.add_argument("--band", type=float, default=0.10)
    s.add_argument("--b", type=float, default=DEFAULT_B)
    s.set_defaults(func=cmd_classify_shift)

    s = sub.add_parser("classify", parents=[glob], help="binary label-noise experiment")
    s.add_argument("--train", required=True)
    s.add_argument("--train-labels", required=True)
    s.add_argument("--test", action="append", required=True, metavar="NAME=X.csv:labels.csv")
    s.add_argument("--flip-prob", type=float, action="append", required=True)
    s.add_argument("--trials", type=int, default=10)
    s.add_argument("--n-train", type=int)
    s.add_argument("--center", action="store_true")
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("sweep", parents=[glob], help="Monte-Carlo sweep")
    s.add_argument("--preset", choices=harness.PRESETS)
    s.add_argument("--config")
    s.add_argument("--dump-preset", choices=harness.PRESETS)
    s.add_argument("--trials", type=int)
    s.add_argument("--risk-mode", choices=harness.RISK_MODES)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed_given = hasattr(args, "seed")
        args.seed = getattr(args, "seed", 0)
        args.threads = max(1, getattr(args, "threads", 1))
        args.out = getattr(args, "out", None)
        return args.func(args)
    except PropertyFailure as exc:
        print(f"shiftlab: property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except (_ArgError, ShiftlabError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"shiftlab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
