"""Mesh-refinement study for the minimizer pipeline on a smooth exponent field.

Solves the variable-exponent problem on each mesh of a ladder, measures the
reverse-Hoelder constant and the Phi-modular ratios, and writes both tables.

    python3 scripts/refinement_study.py --ladder 32 64 128 --out results/refinement
"""

import argparse
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from musielak.control import check_log_holder, composite_condition_check
from musielak.minimize import Problem, phi_gain_report, scan_family
from musielak.nfunction import SamplingPlan
from musielak.varexp import PField, log_holder_modulus, make_varexp


@dataclass
class StudyConfig:
    ladder: tuple = (32, 64, 128)
    eps_grid: tuple = (0.0, 0.1, 0.2, 0.5, 1.0)
    p0: float = 2.5
    amplitude: float = 0.3
    stability: float = 0.1
    out: Path = field(default_factory=lambda: Path("results/refinement"))


def boundary_data(x):
    return np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])


def run(cfg):
    pf = PField("smooth", 2, p0=cfg.p0, amplitude=cfg.amplitude)
    bundle = make_varexp(pf)
    pair = (bundle.controls["A"], bundle.controls["A*"])

    coarse = min(cfg.ladder)
    cubes = scan_family(pf.domain, coarse, 3)
    lh = log_holder_modulus(pf, depths=())
    rho = check_log_holder(bundle.region_control, cubes, float(np.exp(pf.n * lh.L)))
    comp = composite_condition_check(bundle.A, cubes, 1.0, SamplingPlan.lattice(pf.domain, 8),
                                     family=bundle.region_controls, global_pair=pair)
    print(f"log-Hoelder L = {lh.L:.4f} (verdict {lh.verdict}), sup rho = {rho.sup_rho:.4f}")
    print(f"composite conditions hold: {comp.all_hold}")

    start = time.perf_counter()
    rep = phi_gain_report(Problem(bundle.A, coarse, boundary_data), cfg.ladder, cfg.eps_grid, pair,
                          stability=cfg.stability, checks=[rho, comp])
    print(f"solved {len(cfg.ladder)} meshes in {time.perf_counter() - start:.1f} s")

    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "phi_gain.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mesh", "eps", "lhs_modular", "rhs", "ratio", "verdict"])
        w.writerows(rep.csv_rows())
    with open(cfg.out / "reverse_holder.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mesh", "b"])
        w.writerows(sorted(rep.b_per_mesh.items()))

    print("\nmesh   b")
    for m, b in sorted(rep.b_per_mesh.items()):
        print(f"{m:5d}  {b:.4f}")
    print("\neps    " + "  ".join(f"m={m:<6d}" for m in cfg.ladder) + "  stable")
    for e in rep.eps_grid:
        rs = [r["ratio"] for r in rep.rows if r["eps"] == e]
        print(f"{e:<5g}  " + "  ".join(f"{r:<8.4f}" for r in rs) + f"  {rep.verdict[e]}")
    print(f"\nlargest stable eps: {rep.eps_star}")
    return rep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ladder", type=int, nargs="+", default=list(StudyConfig.ladder))
    ap.add_argument("--eps", type=float, nargs="+", default=list(StudyConfig.eps_grid))
    ap.add_argument("--amplitude", type=float, default=StudyConfig.amplitude)
    ap.add_argument("--out", type=Path, default=Path("results/refinement"))
    args = ap.parse_args()
    run(StudyConfig(ladder=tuple(args.ladder), eps_grid=tuple(args.eps),
                    amplitude=args.amplitude, out=args.out))


if __name__ == "__main__":
    main()
