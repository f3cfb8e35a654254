"""Survey of the log-Hoelder modulus and control ratios for each exponent-field kind.

For every kind the script reports the sampled modulus L, whether the scan
is still growing at the finest scales, and the worst control ratio at each
dyadic depth. Jump fields should blow up; the others should stay bounded.

    python3 scripts/log_holder_survey.py --out results/log_holder
"""

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from musielak.control import check_log_holder
from musielak.cube import dyadic_cubes
from musielak.varexp import PField, log_holder_modulus, make_varexp


@dataclass
class SurveyConfig:
    n: int = 2
    max_depth: int = 6
    out: Path = Path("results/log_holder")


FIELDS = {
    "constant": dict(kind="constant", p0=2.5),
    "smooth": dict(kind="smooth", p0=2.5, amplitude=0.3),
    "cusp": dict(kind="log_holder", p0=2.5, amplitude=0.3),
    "jump": dict(kind="jump", p0=2.3, jump=0.5),
}


def survey(cfg):
    cfg.out.mkdir(parents=True, exist_ok=True)
    summary = []
    for label, kw in FIELDS.items():
        pf = PField(n=cfg.n, **kw)
        lh = log_holder_modulus(pf, depths=range(1, cfg.max_depth + 1))
        ctrl = make_varexp(pf).region_control
        per_depth = [check_log_holder(ctrl, dyadic_cubes(pf.domain, d), np.inf).sup_rho
                     for d in range(1, cfg.max_depth + 1)]
        summary.append((label, lh.L, lh.growth, lh.verdict, lh.cube_verdict, *per_depth))
        with open(cfg.out / f"modulus_{label}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "L"])
            w.writerows(lh.csv_rows())
    header = ["field", "L", "growth", "finite", "cube_check"] + [f"rho_d{d}" for d in range(1, cfg.max_depth + 1)]
    with open(cfg.out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(summary)
    print("  ".join(f"{h:>9s}" for h in header))
    for row in summary:
        print("  ".join(f"{v:>9.4g}" if isinstance(v, float) else f"{str(v):>9s}" for v in row))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--max-depth", type=int, default=6)
    ap.add_argument("--out", type=Path, default=SurveyConfig.out)
    args = ap.parse_args()
    survey(SurveyConfig(args.n, args.max_depth, args.out))


if __name__ == "__main__":
    main()
