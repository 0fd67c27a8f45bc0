import argparse
import sys
import time

from shiftlab.harness import SweepConfig, emit_csv, preset, run_sweep


def run_preset(name: str, default_out: str, argv=None) -> None:
    ap = argparse.ArgumentParser(description=f"{name} sweep")
    ap.add_argument("--out", default=default_out)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--source", help="override source as JSON, e.g. '{\"kind\": \"power\", \"a\": 2, \"p\": 2000}'")
    args = ap.parse_args(argv)

    d = preset(name).to_dict()
    if args.trials is not None:
        d["trials"] = args.trials
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.source:
        import json

        d["source"] = json.loads(args.source)
    cfg = SweepConfig.from_dict(d)
    t0 = time.perf_counter()
    table = run_sweep(cfg, workers=args.threads)
    emit_csv(table, args.out)
    print(f"{name}: {len(table)} rows x {cfg.trials} trials -> {args.out} ({time.perf_counter() - t0:.1f}s)", file=sys.stderr)
