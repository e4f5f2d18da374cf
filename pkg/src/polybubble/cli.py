"""Batch front-end: ``polybubble <subcommand> --config run.ini --out DIR``.

Each subcommand writes ``<name>.json`` (versioned report), ``<name>.csv``
(flat table) and appends to ``manifest.txt``.  The exit status is the
number of failed checks (capped at 100), 2 for an invalid config.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import AnsatzSpec, CutoffSpec
from .ansatz_error import error_scaling_fit
from .core import Case, DimensionTooSmallError, DoubleCircleConfig, make_regime, make_space_spec
from .fitting import local_slopes
from .lattice import branch_scaling, fit_A_constants
from .pohozaev import pohozaev_residual
from .potentials import builtin_model
from .quadrature import (POWER_DLAMBDA, POWER_MSTAR, POWER_TWO, MomentSpec, QuadratureSpec,
                         moment_closed_form, moment_quadrature)
from .reduced import balance_sweep, mass_leading_order, pairing_sweep

SCHEMA_VERSION = "1"
SUBCOMMANDS = ("integrals", "lattice", "error-norm", "energy", "balance", "pohozaev", "mass")
OUTPUT_ENV = "POLYBUBBLE_OUTPUT_DIR"

EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config

def _floats(s):
    return [float(x) for x in s.replace(",", " ").split()] if s and s.strip() else []


def _ints(s):
    return [int(x) for x in s.replace(",", " ").split()] if s and s.strip() else []


def _opt_float(sec, key):
    v = sec.get(key, "").strip()
    return float(v) if v else None


@dataclass
class RunConfig:
    N: int
    m: int
    regime: dict
    potential: dict
    sweep: dict
    quadrature: dict
    output_dir: str

    @property
    def digest(self) -> str:
        """Hash of the effective configuration (defaults filled in, output path excluded)."""
        eff = {"N": self.N, "m": self.m, "regime": self.regime, "potential": self.potential,
               "sweep": self.sweep, "quadrature": self.quadrature}
        return hashlib.sha256(json.dumps(eff, sort_keys=True).encode()).hexdigest()

    def space(self):
        return make_space_spec(self.N, self.m)

    def regime_params(self):
        r = self.regime
        return make_regime(self.space(), r["case"], iota=r.get("iota"), a=r.get("a"),
                           **{k: r[k] for k in ("M1", "M2", "L0", "L1", "vartheta") if r.get(k) is not None})

    def pot(self):
        return builtin_model(self.space(), **self.potential)


DEFAULTS = {
    "space": {"N": "6", "m": "1"},
    "regime": {"case": "Case2", "iota": "", "a": "", "M1": "", "M2": "", "L0": "", "L1": "", "vartheta": "0.1"},
    "potential": {"model": "builtin", "r0": "1.0", "v0": "1.0", "v1": "0.0", "v2": "0.0",
                  "c": "0.5", "b": "0.0", "bw": "0.0", "p": ""},
    "sweep": {"k": "64 128 256 512 1024", "lambdas": "25 50 100 200 400 800",
              "error_k": "4 8 16 32 64", "energy_k": "64 128 256",
              "pohozaev_lambdas": "10 20 40 80", "mass_lambdas": "20 40 80 160 320", "mass_k": "1 8",
              "lattice_k": "64 128 256 512 1024 2048 4096", "gammas": "0.5 1 4", "t": "1.0"},
    "quadrature": {"rel_tol": "1e-10", "qmc_log2_n": "14", "sample_budget": "4000"},
    "output": {"dir": "polybubble-out"},
}


def load_config(path: str | None) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    if path:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e}") from None
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        N, m = cp.getint("space", "N"), cp.getint("space", "m")
        rg = cp["regime"]
        regime = {"case": rg.get("case").strip()}
        for key in ("iota", "a", "M1", "M2", "L0", "L1", "vartheta"):
            regime[key] = _opt_float(rg, key)
        pt = cp["potential"]
        if pt.get("model").strip() != "builtin":
            raise ConfigError(f"unknown potential model {pt.get('model')!r}; only 'builtin' is available")
        pot = {k: float(pt.get(k)) for k in ("r0", "v0", "v1", "v2", "c", "b", "bw")}
        if pt.get("p").strip():
            pot["p"] = int(pt.get("p"))
        sw = cp["sweep"]
        sweep = {k: _ints(sw.get(k)) for k in ("k", "error_k", "energy_k", "mass_k", "lattice_k")}
        sweep.update({k: _floats(sw.get(k)) for k in ("lambdas", "pohozaev_lambdas", "mass_lambdas", "gammas")})
        sweep["t"] = float(sw.get("t"))
        qd = cp["quadrature"]
        quad = {"rel_tol": float(qd.get("rel_tol")), "qmc_log2_n": int(qd.get("qmc_log2_n")),
                "sample_budget": int(qd.get("sample_budget"))}
    except ValueError as e:
        raise ConfigError(f"bad value: {e}") from None
    cfg = RunConfig(N, m, regime, pot, sweep, quad, cp.get("output", "dir"))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Run every precondition before any computation; raise naming the violated constraint."""
    try:
        space = cfg.space()
    except DimensionTooSmallError as e:
        raise ConfigError(str(e)) from None
    try:
        Case(cfg.regime["case"])
    except ValueError:
        raise ConfigError(f"unknown case {cfg.regime['case']!r}; expected Case1, Case2 or Case3") from None
    try:
        cfg.regime_params()
        builtin_model(space, **cfg.potential)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if not 0 < cfg.quadrature["rel_tol"] < 1:
        raise ConfigError("quadrature rel_tol must lie in (0, 1)")
    if not 8 <= cfg.quadrature["qmc_log2_n"] <= 22:
        raise ConfigError("qmc_log2_n must lie in [8, 22]")
    for key in ("k", "error_k", "energy_k", "mass_k", "lattice_k"):
        if any(k < 1 for k in cfg.sweep[key]):
            raise ConfigError(f"sweep.{key} must hold positive integers")
    if len(cfg.sweep["k"]) < 2:
        raise ConfigError("sweep.k needs at least two values")
    if len(cfg.sweep["lambdas"]) < 5:
        raise ConfigError("sweep.lambdas needs at least five values")
    if len(cfg.sweep["energy_k"]) < 2:
        raise ConfigError("sweep.energy_k needs at least two values")
    for key in ("error_k", "lattice_k"):
        if len(cfg.sweep[key]) < 5:
            raise ConfigError(f"sweep.{key} needs at least five values for the log-log fit")
    for key in ("pohozaev_lambdas", "mass_lambdas"):
        if len(cfg.sweep[key]) < 2:
            raise ConfigError(f"sweep.{key} needs at least two values")
    for key in ("lambdas", "pohozaev_lambdas", "mass_lambdas"):
        if any(not v > 0 for v in cfg.sweep[key]):
            raise ConfigError(f"sweep.{key} must be positive")


# ----------------------------------------------------------------- results

@dataclass
class Result:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)    # (claim, passed, detail)
    report: dict = field(default_factory=dict)

    def check(self, claim: str, passed: bool, detail: str):
        self.checks.append({"claim": claim, "passed": bool(passed), "detail": detail})

    @property
    def failures(self) -> int:
        return sum(not c["passed"] for c in self.checks)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def csv_text(res: Result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.columns)
    for row in res.rows:
        w.writerow([_fmt(row.get(c, "")) for c in res.columns])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if hasattr(o, "value") and isinstance(getattr(o, "value"), str):
        return o.value
    return o


# ------------------------------------------------------------- subcommands

def run_integrals(cfg: RunConfig, seed: int) -> Result:
    space = cfg.space()
    res = Result("integrals", ["claim", "power", "alpha", "closed", "quad", "diff", "tol", "passed"])
    qspec = QuadratureSpec(rel_tol=min(cfg.quadrature["rel_tol"], 1e-8))
    N, m = space.N, space.m
    items = [(POWER_TWO, None), (POWER_MSTAR, None), (POWER_DLAMBDA, None)]
    for i in range(N):
        for j in range(i, N):
            a = [0] * N
            if m == 1:
                a[i] += 1
                a[j] += 1
                items.append((POWER_MSTAR, tuple(a)))
            else:
                a[i] += 2
                a[j] += 2
                items.append((POWER_MSTAR, tuple(a)))
    odd = [0] * N
    odd[0] = 1
    items.append((POWER_MSTAR, tuple(odd)))
    odd3 = [0] * N
    odd3[1], odd3[2] = 2 * m - 1, 1
    items.append((POWER_MSTAR, tuple(odd3)))
    for power, alpha in items:
        spec = MomentSpec(space, power, alpha if alpha is not None else tuple([0] * N))
        closed = moment_closed_form(spec)
        quad = moment_quadrature(spec, qspec)
        is_odd = any(x % 2 for x in spec.multi_index)
        if is_odd:
            diff, tol, claim = abs(quad - closed), 1e-9, "moment-odd-vanishes"
        elif closed == 0.0:
            # exact cancellation; measured against the m* mass
            scale = moment_closed_form(MomentSpec(space, POWER_MSTAR, tuple([0] * N)))
            diff, tol, claim = abs(quad) / scale, 1e-9, "moment-zero"
        else:
            diff, tol, claim = abs(quad - closed) / abs(closed), 1e-6, "moment-closed-form"
        ok = diff <= tol
        res.rows.append({"claim": claim, "power": power, "alpha": "-".join(map(str, spec.multi_index)),
                         "closed": closed, "quad": quad, "diff": diff, "tol": tol, "passed": ok})
        res.check(claim, ok, f"{power} {spec.multi_index}: diff {diff:.3g} <= {tol:g}")
    return res


def run_lattice(cfg: RunConfig, seed: int) -> Result:
    space = cfg.space()
    g = space.gamma
    res = Result("lattice", ["claim", "quantity", "gamma", "k", "value", "predicted", "passed"])
    ks = cfg.sweep["lattice_k"]
    A1, A2 = fit_A_constants(space, ks)
    ok = abs(A1.exponent - g) <= 0.02 * g
    res.check("lattice-growth", ok, f"exponent {A1.exponent:.6f} vs {g}")
    for k, v in zip(ks, A1.sequence):
        res.rows.append({"claim": "lattice-A1-prefactor", "quantity": "A1_prefactor", "gamma": g, "k": k,
                         "value": v, "predicted": A1.meta["predicted"], "passed": ""})
    ratios = [r for r in A1.meta["difference_ratios"] if math.isfinite(r)]
    ok_r = len(ratios) > 0 and min(ratios) >= 2.0
    res.check("lattice-A1-cauchy", ok_r, f"min difference ratio {min(ratios) if ratios else float('nan'):.4g}")
    res.rows.append({"claim": "lattice-growth", "quantity": "growth_exponent", "gamma": g, "k": "",
                     "value": A1.exponent, "predicted": float(g), "passed": ok})
    res.rows.append({"claim": "lattice-A1-cauchy", "quantity": "min_difference_ratio", "gamma": g, "k": "",
                     "value": min(ratios) if ratios else float("nan"), "predicted": 2.0, "passed": ok_r})
    for k, v in zip(ks, A2.sequence):
        res.rows.append({"claim": "lattice-A2-prefactor", "quantity": "A2_prefactor", "gamma": g, "k": k,
                         "value": v, "predicted": A2.meta["predicted"], "passed": ""})
    for gam in cfg.sweep["gammas"]:
        br = branch_scaling(gam, ks)
        res.rows.append({"claim": f"lattice-branch-{br.branch.value}", "quantity": "branch_limit", "gamma": gam,
                         "k": "", "value": br.estimate, "predicted": br.predicted, "passed": br.passed_3pct})
        res.check(f"lattice-branch-{br.branch.value}", br.passed_3pct,
                  f"gamma {gam}: {br.estimate:.6g} vs {br.predicted:.6g}")
    res.report = {"A1": A1.as_dict(), "A2": A2.as_dict()}
    return res


def _case1_regime(cfg: RunConfig):
    r = cfg.regime
    if r["case"] == Case.CASE1.value:
        return cfg.regime_params()
    return make_regime(cfg.space(), Case.CASE1, iota=0.5, M1=0.3, L0=1e-3, L1=1e3)


def run_error_norm(cfg: RunConfig, seed: int) -> Result:
    space, pot = cfg.space(), cfg.pot()
    regime = _case1_regime(cfg)
    res = Result("error-norm", ["claim", "k", "lam", "norm", "argmax_term", "slope_to_date", "bound"])
    fit = error_scaling_fit(space, pot, regime, cfg.sweep["error_k"], t=cfg.sweep["t"],
                            sample_budget=cfg.quadrature["sample_budget"], seed=seed)
    lams, norms = fit.meta["lambdas"], fit.meta["norms"]
    for i, (k, lam, nrm) in enumerate(zip(cfg.sweep["error_k"], lams, norms)):
        slope = float(np.polyfit(np.log(lams[:i + 1]), np.log(norms[:i + 1]), 1)[0]) if i else ""
        terms = fit.meta["terms"][i]
        top = max(terms, key=lambda t: terms[t])
        res.rows.append({"claim": "error-norm-slope", "k": k, "lam": lam, "norm": nrm, "argmax_term": top,
                         "slope_to_date": slope, "bound": fit.meta["bound"]})
    res.check("error-norm-slope", fit.meta["passed"], f"slope {fit.exponent:.4f} <= {fit.meta['bound']:.4f}")
    res.report = {"fit": fit.as_dict()}
    return res


def run_energy(cfg: RunConfig, seed: int) -> Result:
    space, pot = cfg.space(), cfg.pot()
    regime = cfg.regime_params()
    res = Result("energy", ["claim", "k", "lam", "h_bar", "I3", "I4", "I5", "B3_k"])
    ee = pairing_sweep(space, pot, regime, cfg.sweep["energy_k"], t=cfg.sweep["t"],
                       lams=np.array(cfg.sweep["lambdas"]), log2_n=cfg.quadrature["qmc_log2_n"], seed=seed)
    for row in ee.raw_pairings:
        claim = "energy-interaction" if "I5" in row else "energy-B1-sweep"
        res.rows.append({"claim": claim, **row})
    target = -(2 * space.m + 1)
    ok_e = abs(ee.lam_exponent - target) <= 0.05 * abs(target)
    ok_b = abs(ee.B1_tilde / ee.B1_tilde_analytic - 1) <= 0.10
    res.check("energy-lambda-exponent", ok_e, f"{ee.lam_exponent:.5f} vs {target}")
    res.check("energy-B1-tilde", ok_b, f"fitted {ee.B1_tilde:.6g} vs analytic {ee.B1_tilde_analytic:.6g}")
    res.report = {"B1_tilde": ee.B1_tilde, "B1_tilde_analytic": ee.B1_tilde_analytic,
                  "lam_exponent": ee.lam_exponent, "B3_tilde": ee.B3_tilde, "B4_tilde": ee.B4_tilde,
                  "B1": ee.B1, "B2": str(ee.B2), "B3_analytic": ee.B3_analytic,
                  "B3_fitted": ee.B3_fitted}
    return res


def run_balance(cfg: RunConfig, seed: int) -> Result:
    space, pot = cfg.space(), cfg.pot()
    regime = cfg.regime_params()
    res = Result("balance", ["claim", "k", "t_k", "lam_k", "slope_to_date", "h_bar", "t_model", "de_lam"])
    sols, fit = balance_sweep(space, pot, regime, cfg.sweep["k"])
    ks = np.array([s.k for s in sols], dtype=float)
    lams = np.array([s.lam for s in sols])
    for i, s in enumerate(sols):
        slope = float(np.polyfit(np.log(ks[:i + 1]), np.log(lams[:i + 1]), 1)[0]) if i else ""
        res.rows.append({"claim": f"balance-{regime.case_id.value}", "k": s.k, "t_k": s.t, "lam_k": s.lam,
                         "slope_to_date": slope, "h_bar": s.h_bar,
                         "t_model": s.t_model if s.t_model is not None else "",
                         "de_lam": s.residuals["de_lam"]})
    target = float(regime.k_exponent)
    ok = abs(fit.exponent / target - 1) <= 0.03
    res.check(f"balance-{regime.case_id.value}-slope", ok, f"slope {fit.exponent:.5f} vs {target:.5f}")
    res.report = {"slope": fit.exponent, "target": target, "index": sols[0].index,
                  "local_slopes": [float(v) for v in local_slopes(ks, lams)]}
    return res


def run_pohozaev(cfg: RunConfig, seed: int) -> Result:
    space = cfg.space()
    pot = cfg.pot()
    res = Result("pohozaev", ["claim", "identity", "k", "lam", "volume_lhs", "predicted_rhs", "gap", "err_est"])
    cut = CutoffSpec.default(space, pot.r0, tuple(pot.w0))
    rho = 3.0 * cut.delta
    k = cfg.sweep["mass_k"][-1] if cfg.sweep["mass_k"] else 1
    gaps = []
    for lam in cfg.sweep["pohozaev_lambdas"]:
        a = AnsatzSpec(DoubleCircleConfig(pot.r0, 0.5, tuple(pot.w0), k, lam), cut)
        for ident, i in (("translational", 0), ("radial", None)):
            r = pohozaev_residual(a, pot, rho, ident, i=i, log2_n=cfg.quadrature["qmc_log2_n"], seed=seed)
            res.rows.append({"claim": f"pohozaev-{ident}", "identity": ident, "k": k, "lam": lam,
                             "volume_lhs": r.volume_lhs, "predicted_rhs": r.predicted_rhs, "gap": r.gap,
                             "err_est": r.err_est})
            if ident == "translational":
                gaps.append(abs(r.gap))
    # only meaningful when the residual is resolved above the sampling error
    mono = all(b < a for a, b in zip(gaps, gaps[1:]))
    res.check("pohozaev-translational-decay", mono, "|gap| " + " ".join(f"{g:.3g}" for g in gaps))
    return res


def run_mass(cfg: RunConfig, seed: int) -> Result:
    space = cfg.space()
    pot = cfg.pot()
    res = Result("mass", ["claim", "power", "k", "lam", "lhs", "predicted", "deviation", "err_est"])
    one = lambda r, w: np.ones_like(r)
    for power in (POWER_TWO, POWER_MSTAR):
        lams = cfg.sweep["mass_lambdas"] if power == POWER_TWO else [l / 4 for l in cfg.sweep["mass_lambdas"]]
        log2_n = cfg.quadrature["qmc_log2_n"] + (2 if power == POWER_MSTAR else 0)
        for k in cfg.sweep["mass_k"]:
            devs = []
            for lam in lams:
                c = DoubleCircleConfig(pot.r0, 0.5, tuple(pot.w0), k, lam)
                lhs, pred, err = mass_leading_order(space, c, one, power, log2_n=log2_n, seed=seed)
                d = abs(lhs / pred - 1)
                devs.append(d)
                res.rows.append({"claim": f"mass-{power}", "power": power, "k": k, "lam": lam, "lhs": lhs,
                                 "predicted": pred, "deviation": d, "err_est": err})
            ratios = [a / b for a, b in zip(devs, devs[1:])]
            ok = all(r >= 2.0 for r in ratios)
            res.check(f"mass-{power}-k{k}", ok, "deviation ratios " + " ".join(f"{r:.3g}" for r in ratios))
    return res


RUNNERS = {"integrals": run_integrals, "lattice": run_lattice, "error-norm": run_error_norm,
           "energy": run_energy, "balance": run_balance, "pohozaev": run_pohozaev, "mass": run_mass}


# -------------------------------------------------------------------- main

def write_outputs(out: Path, results: list, cfg: RunConfig, seed: int, subcommand: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        (out / f"{res.name}.csv").write_text(csv_text(res))
        report = {"schema_version": SCHEMA_VERSION, "subcommand": res.name, "seed": seed,
                  "config_sha256": cfg.digest, "version": __version__,
                  "checks": res.checks, "report": _jsonable(res.report),
                  "rows": _jsonable(res.rows)}
        (out / f"{res.name}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"tool: polybubble {__version__}", f"schema_version: {SCHEMA_VERSION}",
             f"subcommand: {subcommand}", f"config_sha256: {cfg.digest}", f"seed: {seed}",
             f"timestamp: {stamp}"]
    lines += [f"file: {r.name}.csv failures={r.failures}" for r in results]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polybubble", description="Numerical checks for polyharmonic multi-bubble constructions.")
    p.add_argument("subcommand", choices=SUBCOMMANDS + ("all",))
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    p.add_argument("--seed", type=int, default=0, help="seed for all sampling (u64)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for 'all'")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2 ** 64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"error: invalid config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    names = list(SUBCOMMANDS) if args.subcommand == "all" else [args.subcommand]
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        futures = [pool.submit(RUNNERS[n], cfg, args.seed) for n in names]
        results = []
        for n, fut in zip(names, futures):
            try:
                results.append(fut.result())
            except Exception as e:   # keep partial results of the other subcommands
                r = Result(n, ["claim", "error"])
                r.rows.append({"claim": "run", "error": f"{type(e).__name__}: {e}"})
                r.check("run", False, f"{type(e).__name__}: {e}")
                results.append(r)
    write_outputs(out, results, cfg, args.seed, args.subcommand)
    failures = sum(r.failures for r in results)
    for r in results:
        for c in r.checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {r.name}: {c['claim']}: {c['detail']}")
    return min(failures, 100)


if __name__ == "__main__":
    sys.exit(main())
