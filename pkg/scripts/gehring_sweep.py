"""Slack of the integrated Gehring inequality across power-law test cases.

With B = t^(p-1) and h = t^(-beta) the level-set hypothesis is an identity
for a = beta/(beta+1-p), and the integrated bound is sharp: the slack column
measures quadrature error, not room in the inequality.

    python3 scripts/gehring_sweep.py --step 1e-4
"""

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from musielak.czg import gehring_check


@dataclass
class SweepConfig:
    cases: tuple = ((2, 3), (2, 4), (3, 5), (1.5, 2), (4, 8))
    fractions: tuple = (0.0, 0.25, 0.5, 0.75, 0.9)
    step: float = 1e-4
    log_span: float = 80.0
    rule: str = "trapezoid"
    out: Path = Path("results/gehring")


def sweep(cfg):
    t = np.exp(np.arange(0.0, cfg.log_span, cfg.step))
    rows = []
    for p, beta in cfg.cases:
        a = beta / (beta + 1 - p)
        eps = [f / (a - 1) for f in cfg.fractions]
        rep = gehring_check(t, lambda s: s ** -float(beta), np.zeros(t.size),
                            lambda s: s ** (p - 1.0), a, 0.0, eps, rule=cfg.rule)
        for f, r in zip(cfg.fractions, rep.rows):
            exact = beta / (beta - (p - 1) * (1 + r["eps"]))
            rows.append((p, beta, a, f, r["eps"], r["lhs"], r["rhs"], exact, r["lhs"] / exact - 1, r["holds"]))
    cfg.out.mkdir(parents=True, exist_ok=True)
    header = ["p", "beta", "a", "fraction", "eps", "lhs", "rhs", "exact", "rel_err", "holds"]
    with open(cfg.out / f"sweep_{cfg.rule}.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"{'p':>4} {'beta':>4} {'eps':>8} {'lhs':>12} {'rhs':>12} {'rel err':>10}  holds")
    for p, beta, _, _, e, lhs, rhs, _, err, ok in rows:
        print(f"{p:>4g} {beta:>4g} {e:>8.4f} {lhs:>12.8f} {rhs:>12.8f} {err:>10.2e}  {ok}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=SweepConfig.step, help="spacing in log t")
    ap.add_argument("--rule", choices=("trapezoid", "right"), default="trapezoid")
    ap.add_argument("--out", type=Path, default=SweepConfig.out)
    args = ap.parse_args()
    sweep(SweepConfig(step=args.step, rule=args.rule, out=args.out))


if __name__ == "__main__":
    main()
