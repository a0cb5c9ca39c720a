"""Print a compact report from a reproduce.py output directory."""

import argparse
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from pgnc.io import read_csv


def table(path):
    header, rows = read_csv(path)
    return [dict(zip(header, r)) for r in rows]


def report(root):
    root = Path(root)
    for d in sorted(root.glob("eval_seed*")):
        print(f"== {d.name}: average fidelity per condition (leakage)")
        for r in table(d / "eval_summary.csv"):
            cond = f"({float(r['c_i']):.2f}, {float(r['c_q']):.2f}, {float(r['c_f']):.2f})"
            print(f"  {r['controller']:>10} c{r['condition']} {cond}  avgF={float(r['avg_fidelity']):.5f}  p5={float(r['p5_fidelity']):.5f}  leak={float(r['leakage']):.1e}")
    scan = root / "scan_condition" / "scan_condition.csv"
    if scan.exists():
        rows = table(scan)
        print("== off-grid scan: PGNC minus baseline, per c_f plane")
        for key in [k for k in rows[0] if k.startswith("delta_")]:
            by_plane = defaultdict(list)
            for r in rows:
                by_plane[float(r["c_f"])].append(float(r[key]))
            for cf, vals in sorted(by_plane.items()):
                print(f"  {key:>14} c_f={cf:+.2f}: mean {np.mean(vals):+.5f}  min {np.min(vals):+.5f}  max {np.max(vals):+.5f}")
    det = root / "scan_detuning" / "scan_detuning.json"
    if det.exists():
        doc = json.loads(det.read_text())
        print("== detuning map: cells above threshold", doc["cells_above_threshold"])
    bench = root / "bench" / "bench_per_condition.json"
    if bench.exists():
        print("== per-condition benchmark")
        for r in json.loads(bench.read_text())["avg_fidelity"]:
            print(f"  c{r['condition']} {r['controller']:>6} avgF={r['avg_fidelity']:.5f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", nargs="?", default="runs/repro")
    report(ap.parse_args().root)
