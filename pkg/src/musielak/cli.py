"""Command-line front end: config files, experiment dispatch and report files.

Config files hold ``key = value`` lines, ``#`` comments and ``[section]``
headers. Top-level keys come before the first header::

    experiment = minimize
    seed = 7

    [pfield]
    kind = smooth
    amplitude = 0.3

    [grid]
    m = 64
    ladder = 32, 64
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

EXPERIMENTS = ("calculus", "verify", "minimize", "gehring", "example")


class ConfigError(ValueError):
    """Malformed or invalid configuration (usage error)."""


@dataclass
class NFunSpec:
    kind: str = "power"
    p: float = 2.0
    p_high: float = 3.0
    n: int = 1


@dataclass
class PFieldSpec:
    kind: str = "smooth"
    n: int = 2
    p0: float = 2.5
    amplitude: float = 0.3
    frequency: float = 1.0
    jump: float = 0.5
    jump_at: float = 1.0 / 3.0
    L_target: float = 0.0


@dataclass
class GridSpec:
    m: int = 64
    depth: int = 3
    ladder: tuple = (32, 64)


@dataclass
class GehringSpec:
    p: float = 2.0
    beta: float = 3.0
    eps: tuple = (0.5,)
    C: float = 0.0


@dataclass
class Tolerances:
    solve: float = 1e-10
    stieltjes: float = 1e-6
    conjugate: float = 1e-6
    stability: float = 0.1


@dataclass
class Config:
    experiment: str = "calculus"
    seed: int = 0
    out: str = "results"
    eps_grid: tuple = (0.0, 0.1, 0.2, 0.5)
    nfun: NFunSpec = field(default_factory=NFunSpec)
    pfield: PFieldSpec = field(default_factory=PFieldSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    gehring: GehringSpec = field(default_factory=GehringSpec)
    tol: Tolerances = field(default_factory=Tolerances)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for m in (self.grid.m, *self.grid.ladder):
            if m < 2 or m & (m - 1):
                raise ConfigError(f"m={m} is not a power of two")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return self


_SECTIONS = {f.name for f in fields(Config) if f.default_factory is not dataclasses.MISSING}


def _convert(raw, proto, where):
    try:
        if isinstance(proto, bool):
            if raw.lower() not in ("true", "false"):
                raise ValueError
            return raw.lower() == "true"
        if isinstance(proto, int):
            return int(raw)
        if isinstance(proto, float):
            return float(raw)
        if isinstance(proto, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            kind = type(proto[0]) if proto else float
            return tuple(kind(x) for x in items)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(proto).__name__}") from None


def parse_config(text):
    """Strict parse: unknown sections or keys are errors that name the line."""
    cfg = Config()
    target = cfg
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            target = getattr(cfg, section)
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (x.strip() for x in s.split("=", 1))
        names = {f.name for f in fields(target)}
        if key not in names or (target is cfg and key in _SECTIONS):
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"line {lineno}: unknown key {key!r} in {where}")
        proto = getattr(target, key)
        setattr(target, key, _convert(raw, proto, f"line {lineno}"))
    return cfg.validate()


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg):
    lines = []
    for f in fields(cfg):
        if f.name not in _SECTIONS:
            lines.append(f"{f.name} = {_fmt(getattr(cfg, f.name))}")
    for name in sorted(_SECTIONS):
        lines.append("")
        lines.append(f"[{name}]")
        sub = getattr(cfg, name)
        for f in fields(sub):
            lines.append(f"{f.name} = {_fmt(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- output helpers

class _Run:
    def __init__(self, out):
        self.out = out
        os.makedirs(out, exist_ok=True)
        self.verdicts = []

    def csv(self, name, header, rows):
        with open(os.path.join(self.out, name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])

    def verdict(self, label, ok, detail=""):
        self.verdicts.append((label, bool(ok), detail))

    def summary(self, cfg):
        lines = [f"experiment: {cfg.experiment}", f"seed: {cfg.seed}", ""]
        for label, ok, detail in self.verdicts:
            lines.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        with open(os.path.join(self.out, "summary.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        return all(ok for _, ok, _ in self.verdicts)


def _nfun(spec):
    from . import nfunction as nf

    if spec.kind == "power":
        return nf.power(spec.p, spec.n)
    if spec.kind == "exp":
        return nf.exp_type(spec.n)
    if spec.kind == "broken_power":
        return nf.broken_power(spec.p, spec.p_high, spec.n)
    raise ConfigError(f"unknown nfun kind {spec.kind!r}")


def _pfield(spec):
    from .varexp import PField

    return PField(spec.kind, spec.n, p0=spec.p0, amplitude=spec.amplitude, frequency=spec.frequency,
                  jump=spec.jump, jump_at=spec.jump_at, L_target=spec.L_target or None)


# ---------------------------------------------------------------- experiments

def _calculus(cfg, run):
    from .errors import ConditionError, UnsupportedCaseError
    from .nfunction import musielak_derivative, sobolev_conjugate, upper_conjugate, young_conjugate

    A = _nfun(cfg.nfun)
    x = np.array(A.domain.center)
    t = np.geomspace(1e-3, 1e3, 61)
    At = young_conjugate(A)
    Att = young_conjugate(At)
    a, b = A(x, t), Att(x, t)
    rel = np.abs(b - a) / a
    s = musielak_derivative(A, x, t)
    gap = np.abs(A(x, t) + At(x, s) - s * t) / (s * t)
    rows = [(tt, aa, bb, rr, gg) for tt, aa, bb, rr, gg in zip(t, a, b, rel, gap)]
    run.csv("calculus.csv", ["t", "A", "A_biconjugate", "rel_err", "young_equality_gap"], rows)
    run.verdict("Young biconjugate", np.max(rel) <= cfg.tol.conjugate, f"max rel err {np.max(rel):.3g}")
    run.verdict("Young equality at s = a(t)", np.max(gap) <= cfg.tol.conjugate, f"max gap {np.max(gap):.3g}")
    try:
        up = upper_conjugate(A)
        back = sobolev_conjugate(up)
        tt = np.geomspace(1e-2, 1e2, 41)
        err = float(np.max(np.abs(back(x, tt) - A(x, tt)) / A(x, tt)))
        run.verdict("Sobolev conjugate of the upper conjugate", err <= 1e-4, f"max rel err {err:.3g}")
    except (ConditionError, UnsupportedCaseError) as exc:
        run.verdict("Sobolev conjugate of the upper conjugate", True, f"not applicable: {exc}")


def _verify(cfg, run):
    from .control import check_log_holder
    from .cube import dyadic_cubes
    from .varexp import closed_form_crosscheck, log_holder_modulus, make_varexp

    p = _pfield(cfg.pfield)
    rep = closed_form_crosscheck(p, tol=cfg.tol.conjugate, seed=cfg.seed)
    run.csv("crosscheck.csv", ["check", "verdict", "witness"],
            [(name, ok, repr(w)) for name, ok, w, _ in rep.rows()])
    for name, ok, w, _ in rep.rows():
        run.verdict(f"closed form: {name}", ok)
    lh = log_holder_modulus(p)
    run.csv("log_holder_scales.csv", ["scale", "L"], lh.csv_rows())
    bundle = make_varexp(p)
    cubes = [q for d in range(1, cfg.grid.depth + 1) for q in dyadic_cubes(p.domain, d)]
    rho = check_log_holder(bundle.region_control, cubes, float(np.exp(p.n * lh.L)))
    run.csv("log_holder.csv", ["R", "rho", "verdict"], rho.csv_rows())
    run.verdict("log-Hoelder modulus finite", lh.verdict, f"L = {lh.L:.4g}, growth {lh.growth:.3g}")
    run.verdict("control ratio bound on dyadic cubes", rho.verdict, f"sup rho = {rho.sup_rho:.4g}")


def _minimize(cfg, run):
    from .control import check_log_holder, composite_condition_check
    from .minimize import (Problem, caccioppoli_scan, certificate, phi_gain_report,
                           reverse_holder_scan, scan_family, solve)
    from .nfunction import SamplingPlan
    from .varexp import log_holder_modulus, make_varexp

    p = _pfield(cfg.pfield)
    B = make_varexp(p)
    pair = (B.controls["A"], B.controls["A*"])
    data = lambda x: np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., -1])
    P = Problem(B.A, cfg.grid.m, data)
    sol = solve(P, tol=cfg.tol.solve)
    sol.save(os.path.join(run.out, "solution.mogrid"))
    run.csv("energy_trace.csv", ["iteration", "energy"], list(enumerate(sol.energy_trace)))
    run.verdict("solver converged", sol.converged, f"{sol.iterations} iterations")
    run.verdict("energy trace nonincreasing", bool(np.all(np.diff(sol.energy_trace) <= 0)))
    cert = certificate(sol, seed=cfg.seed)
    run.verdict("discrete local minimizer", cert.passed, f"worst drop {cert.worst_drop:.3g}")

    cubes = scan_family(p.domain, cfg.grid.m, cfg.grid.depth)
    cac = caccioppoli_scan(sol.u, B.A, cubes)
    run.csv("caccioppoli.csv", ["cube", "R", "lhs", "rhs0", "c5", "theta"],
            [(r["cube"], r["R"], r["lhs"], r["rhs0"], r["c5"], r["theta"]) for r in cac.rows])
    run.verdict("Caccioppoli constant finite", np.isfinite(cac.envelope(0.0)), f"c5 = {cac.envelope(0.0):.4g}")

    lh = log_holder_modulus(p, depths=())
    rho = check_log_holder(B.region_control, cubes, float(np.exp(p.n * lh.L)))
    plan = SamplingPlan.lattice(p.domain, 8)
    comp = composite_condition_check(B.A, cubes, 1.0, plan, family=B.region_controls, global_pair=pair)
    run.verdict("log-Hoelder prerequisite", rho.verdict)
    run.verdict("composite N-function prerequisite", comp.all_hold)
    b = reverse_holder_scan(sol.u, B.A, pair, cubes, checks=[rho, comp])
    run.verdict("reverse-Hoelder constant finite", np.isfinite(b), f"b = {b:.4g}")

    rep = phi_gain_report(P, cfg.grid.ladder, cfg.eps_grid, pair, stability=cfg.tol.stability,
                          solve_opts={"tol": cfg.tol.solve}, scan_depth=cfg.grid.depth)
    run.csv("phi_gain.csv", ["mesh", "eps", "lhs_modular", "rhs", "ratio", "verdict"], rep.csv_rows())
    run.csv("reverse_holder.csv", ["mesh", "b"], sorted(rep.b_per_mesh.items()))
    run.verdict("Phi-modular gain at some eps > 0", rep.eps_star is not None and rep.eps_star > 0,
                f"eps* = {rep.eps_star}")


def _gehring(cfg, run):
    from .czg import gehring_check

    g = cfg.gehring
    a = g.beta / (g.beta + 1 - g.p)
    t = np.exp(np.arange(0.0, 100.0, 1e-4))
    rep = gehring_check(t, lambda s: s ** -g.beta, lambda s: 0.0 * s, lambda s: s ** (g.p - 1),
                        a, g.C, g.eps, tol=cfg.tol.stieltjes)
    run.csv("gehring.csv", ["eps", "lhs", "rhs", "slack", "coef_main", "coef_tail", "holds"],
            [(r["eps"], r["lhs"], r["rhs"], r["slack"], r["coef_main"], r["coef_tail"], r["holds"])
             for r in rep.rows])
    run.verdict("level-set hypothesis", rep.hypothesis_ok, f"a = {a:.6g}, worst ratio {rep.worst_hypothesis_ratio:.9g}")
    for r in rep.rows:
        run.verdict(f"integrated conclusion at eps = {r['eps']:g}", r["holds"], f"slack {r['slack']:.3g}")


def _example(cfg, run):
    from .varexp import closed_form_crosscheck, make_varexp

    p = _pfield(cfg.pfield)
    B = make_varexp(p)
    x = np.array(p.domain.center)
    t = np.geomspace(1e-2, 1e2, 41)
    cols = [("A", B.A), ("A_upper", B.upper), ("A_young", B.young)]
    if B.sobolev is not None:
        cols.append(("A_sobolev", B.sobolev))
    vals = [F(x, t) for _, F in cols]
    run.csv("example_nfunctions.csv", ["t"] + [c for c, _ in cols], zip(t, *vals))
    alpha = np.geomspace(1e-2, 1e2, 41)
    names = sorted(B.controls)
    run.csv("example_controls.csv", ["alpha"] + names, zip(alpha, *[B.controls[k](alpha) for k in names]))
    for name, ok, w, _ in closed_form_crosscheck(p, tol=cfg.tol.conjugate, seed=cfg.seed).rows():
        run.verdict(f"closed form: {name}", ok)


_DISPATCH = {"calculus": _calculus, "verify": _verify, "minimize": _minimize,
             "gehring": _gehring, "example": _example}


def run(cfg):
    """Run one experiment; returns the exit status (0 all pass, 1 failure)."""
    from .errors import ConditionError, NumericError, UnsupportedCaseError

    r = _Run(cfg.out)
    try:
        _DISPATCH[cfg.experiment](cfg, r)
    except (ConditionError, NumericError, UnsupportedCaseError) as exc:
        r.verdict("numerical pipeline", False, f"{type(exc).__name__}: {exc}")
    return 0 if r.summary(cfg) else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="musielak", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="config file (key = value lines)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit RNG seed")
    args = parser.parse_args(argv)
    try:
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        else:
            cfg = Config()
        cfg.experiment = args.experiment
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
    except (OSError, ConfigError) as exc:
        print(f"musielak: {exc}", file=sys.stderr)
        return 2
    status = run(cfg)
    with open(os.path.join(cfg.out, "summary.txt"), encoding="utf-8") as fh:
        print(fh.read(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
