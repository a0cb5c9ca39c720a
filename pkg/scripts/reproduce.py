"""Run the full experiment pipeline through the CLI.

Trains PGNC for several seeds and a GRAPE baseline at the nominal condition,
then produces the evaluation tables: per-condition fidelity distributions,
the off-grid condition scan, the detuning map and the per-condition benchmark.

    python scripts/reproduce.py --out runs/repro            # full budget, about an hour
    python scripts/reproduce.py --out runs/quick --quick    # small grid, a few minutes
"""

import argparse
import sys
import time
from pathlib import Path

from pgnc.cli import main as cli

QUICK = """\
[device]
n_steps = 20

[train]
epochs = 40

[grape]
epochs = 40

[eval]
n_states = 16

[scan]
c_i = [0.0, 0.25, 3]
c_q = [0.0, 0.25, 3]
n_states = 8
detuning_points = 5
"""


def step(argv):
    t0 = time.perf_counter()
    code = cli(argv)
    print(f"[{time.perf_counter() - t0:7.1f}s] pgnc {' '.join(argv)} -> {code}", file=sys.stderr)
    if code != 0:
        raise SystemExit(code)


def run(out, seeds, config):
    out = Path(out)
    base = ["--config", config]
    step(["oracle-check", *base, "--out", str(out / "checks")])
    step(["gradcheck", *base, "--out", str(out / "checks")])
    for s in seeds:
        step(["train-pgnc", *base, "--seed", str(s), "--out", str(out / f"pgnc_seed{s}")])
    step(["train-grape", *base, "--seed", str(seeds[0]), "--out", str(out / "grape_c0")])
    ckpt = str(out / f"pgnc_seed{seeds[0]}" / "pgnc.ckpt")
    grape = str(out / "grape_c0" / "grape.ckpt")
    for s in seeds:
        step(["eval", *base, "--out", str(out / f"eval_seed{s}"), "--checkpoint", str(out / f"pgnc_seed{s}" / "pgnc.ckpt"), "--grape", grape, "--oracle"])
    step(["scan-condition", *base, "--out", str(out / "scan_condition"), "--checkpoint", ckpt, "--grape", grape])
    step(["scan-detuning", *base, "--out", str(out / "scan_detuning"), "--checkpoint", ckpt, "--grape", grape, "--oracle"])
    step(["bench-per-condition", *base, "--out", str(out / "bench"), "--checkpoint", ckpt])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/repro")
    ap.add_argument("--seeds", default="0,1,2", help="comma-separated PGNC training seeds")
    ap.add_argument("--config", default="default")
    ap.add_argument("--quick", action="store_true", help="coarse grid and short budgets")
    args = ap.parse_args()
    config = args.config
    if args.quick:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        config = str(Path(args.out) / "quick.toml")
        Path(config).write_text(QUICK)
    run(args.out, [int(s) for s in args.seeds.split(",")], config)
