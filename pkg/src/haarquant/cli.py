"""Config-driven experiment runner.

    haarquant run <config.yaml> [--out DIR] [--threads N] [--dump-paths] [--check]
    haarquant check <config.yaml> [--out DIR] [--threads N]

Exit codes: 0 success, 2 invalid config, 3 runtime error, 4 failed check.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__, cppq, fquant, io, quant1d, ratelab
from .errors import DomainError, HaarQuantError
from .haar import TimeGrid
from .procsim import (
    FBM,
    THREADS_ENV,
    Brownian,
    Gamma,
    Poisson,
    Stable,
    jump_paths_on_grid,
    set_default_threads,
    simulate_jump_batch,
    simulate_paths,
    spec_from_dict,
)
from .rng import BLOCK_SIZE, as_factory

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4

KINDS = ("scalar-pierce", "haar-curve", "cpp-curve", "regularity", "report")

DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "process": {"family": "brownian"},
    "r": 2.0,
    "p": 2.0,
    "rho": 2.0,
    "delta": 0.5,
    "eps": cppq.DEFAULT_EPS,
    "budgets": [2**k for k in range(6, 15)],
    "phi": None,
    "fill": True,
    "center_singletons": False,
    "train_paths": fquant.DEFAULT_TRAIN_PATHS,
    "eval_paths": 20_000,
    "reg_paths": 2000,
    "h_ladder": None,
    "level": fquant.DEFAULT_LEVEL,
    "law": "gaussian",
    "samples": 100_000,
    "dump_paths": 4,
    "out": None,
    "threads": None,
}

PROCESS_KEYS = {
    "brownian": {"T"},
    "fbm": {"T", "H"},
    "stable": {"T", "alpha"},
    "gamma": {"T", "alpha"},
    "poisson": {"T", "lam"},
    "compound_poisson": {"T", "lam", "jump"},
}

PIERCE_LAWS = {
    "gaussian": (lambda g, n: g.standard_normal(n), "gaussian"),
    "uniform": (lambda g, n: g.random(n), "uniform"),
    "exponential": (lambda g, n: g.exponential(1.0, n), "exponential"),
}


class ConfigError(Exception):
    def __init__(self, key: str, msg: str):
        super().__init__(f"config key '{key}': {msg}")
        self.key = key


# -- config ----------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return validate(raw)


def _number(cfg, key, lo=None, integer=False, strict=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    if lo is not None and (v <= lo if strict else v < lo):
        raise ConfigError(key, f"must be {'>' if strict else '>='} {lo}, got {v!r}")
    cfg[key] = int(v) if integer else float(v)


def validate(raw: dict) -> dict:
    """Fill defaults and check every key before any work starts."""
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    cfg = {**DEFAULTS, **raw}
    if cfg["experiment"] not in KINDS:
        raise ConfigError("experiment", f"must be one of {', '.join(KINDS)}")
    for key in ("r", "p", "rho", "delta", "eps"):
        _number(cfg, key, 0, strict=True)
    for key in ("r", "p"):
        if cfg[key] < 1:
            raise ConfigError(key, f"must be >= 1, got {cfg[key]:g}")
    for key, lo in (("seed", 0), ("train_paths", 1), ("eval_paths", 2), ("reg_paths", 2),
                    ("samples", 2), ("dump_paths", 0), ("level", 4)):
        _number(cfg, key, lo, integer=True)
    if cfg["level"] > 16:
        raise ConfigError("level", "must be <= 16")
    if cfg["threads"] is not None:
        _number(cfg, "threads", 1, integer=True)
    for key in ("fill", "center_singletons"):
        if not isinstance(cfg[key], bool):
            raise ConfigError(key, "expected true or false")
    b = cfg["budgets"]
    if not isinstance(b, list) or not b or any(isinstance(x, bool) or not isinstance(x, int) for x in b):
        raise ConfigError("budgets", "expected a non-empty list of integers")
    if any(x < 2 for x in b) or any(y <= x for x, y in zip(b, b[1:])):
        raise ConfigError("budgets", "must be increasing and >= 2")
    if cfg["phi"] is not None:
        _number(cfg, "phi", 0)
    if cfg["h_ladder"] is not None:
        if not isinstance(cfg["h_ladder"], list):
            raise ConfigError("h_ladder", "expected a list")
    if cfg["law"] not in PIERCE_LAWS:
        raise ConfigError("law", f"must be one of {', '.join(PIERCE_LAWS)}")
    cfg["process"] = _validate_process(cfg["process"], cfg["seed"])
    spec = build_spec(cfg)
    if cfg["experiment"] == "cpp-curve" and not isinstance(spec, Poisson):
        raise ConfigError("process.family", "cpp-curve needs poisson or compound_poisson")
    if isinstance(spec, Poisson) and cfg["experiment"] in ("cpp-curve", "report") and cfg["p"] > cfg["r"]:
        raise ConfigError("p", f"must satisfy p <= r for jump quantizers, got p={cfg['p']:g} > r={cfg['r']:g}")
    if cfg["experiment"] in ("cpp-curve", "report") and isinstance(spec, Poisson):
        try:
            cppq.budget_split(max(cfg["budgets"]), cfg["r"], cfg["p"], cfg["eps"])
        except HaarQuantError as exc:
            raise ConfigError("eps", str(exc)) from None
    if cfg["h_ladder"] is not None:
        try:
            ratelab._ladder_steps(cfg["h_ladder"], spec.T)
        except (HaarQuantError, TypeError, ValueError) as exc:
            raise ConfigError("h_ladder", str(exc)) from None
    return cfg


def _validate_process(proc, seed) -> dict:
    if not isinstance(proc, dict):
        raise ConfigError("process", "expected a mapping")
    fam = proc.get("family")
    if fam not in PROCESS_KEYS:
        raise ConfigError("process.family", f"must be one of {', '.join(PROCESS_KEYS)}")
    unknown = sorted(set(proc) - PROCESS_KEYS[fam] - {"family"})
    if unknown:
        raise ConfigError(f"process.{unknown[0]}", f"unknown key for {fam}")
    proc = dict(proc)
    for k, v in proc.items():
        if k not in ("family", "jump") and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError(f"process.{k}", f"expected a number, got {v!r}")
    if "jump" in proc:
        j = proc["jump"]
        if not isinstance(j, dict) or set(j) - {"kind", "params"}:
            raise ConfigError("process.jump", "expected a mapping with 'kind' and optional 'params'")
    try:
        spec_from_dict({**proc, "seed": seed})
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError("process", str(exc)) from None
    return proc


def build_spec(cfg: dict):
    return spec_from_dict({**cfg["process"], "seed": cfg["seed"]})


# -- expectations used by check --------------------------------------------------


def expected_rate(spec, p: float):
    """``(low, high)`` window for the fitted polylog exponent, or None."""
    if isinstance(spec, Brownian):
        return 0.35, 0.65
    if isinstance(spec, FBM):
        return spec.H - 0.15, spec.H + 0.15
    if isinstance(spec, Stable):
        return 1 / spec.alpha - 0.15, 1 / spec.alpha + 0.15
    if isinstance(spec, Gamma):
        return 1 / p - 0.15, 1 / p + 0.05
    return None


def expected_regularity(spec, rho: float):
    """``(target, tol)`` for the regularity exponent, or None where no closed form applies."""
    if rho < 1:
        return None
    if isinstance(spec, Brownian):
        return 0.5, 0.05
    if isinstance(spec, FBM):
        return spec.H, 0.05
    if isinstance(spec, Stable):
        return (1 / spec.alpha, 0.07) if rho < spec.alpha else None
    if isinstance(spec, (Poisson, Gamma)):
        return 1 / rho, 0.1
    return None


def regularity_exponent(spec) -> float:
    """Allocation exponent ``b`` of ``phi(u) = u**b`` when none is configured."""
    if isinstance(spec, FBM):
        return spec.H
    if isinstance(spec, Stable):
        return 1 / spec.alpha
    if isinstance(spec, Gamma):
        return 1.0
    return 0.5


@dataclass
class Outcome:
    files: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def add(self, name, ok, value, target):
        self.checks.append((name, bool(ok), value, target))


def _synthetic_check(out: Outcome):
    N = np.array([2.0**k for k in range(4, 12)])
    fit = ratelab.fit_polylog(np.column_stack([N, 3 * np.log(N) ** -0.75]))
    out.add("synthetic polylog recovery", abs(fit.param - 0.75) < 1e-10 and abs(fit.C - 3) < 1e-10,
            f"b={fit.param:.12f}", "0.75")


def _monotone_check(out: Outcome, curve):
    ok = all(b.estimate <= a.estimate + 2 * math.hypot(a.stderr, b.stderr) for a, b in zip(curve, curve[1:]))
    out.add("curve non-increasing (2 stderr)", ok, "", "")


# -- experiments -----------------------------------------------------------------


def _fit_csv(fits) -> str:
    rows = ["model,param,C,R2,N_min,N_max"]
    rows += [f"{f.model},{io.fmt(f.param)},{io.fmt(f.C)},{io.fmt(f.r2)},{f.N_range[0]},{f.N_range[1]}" for f in fits]
    return "\n".join(rows) + "\n"


def run_scalar_pierce(cfg, out: Outcome):
    sampler, name = PIERCE_LAWS[cfg["law"]]
    r = cfg["r"]
    rows = quant1d.pierce_curve(sampler, r, cfg["delta"], cfg["budgets"], cfg["samples"], as_factory(cfg["seed"]))
    if name == "uniform":
        const = quant1d.uniform_constant(r)
    elif name == "gaussian":
        from scipy.stats import norm

        const = quant1d.zador_constant(norm.pdf, r)
    else:
        const = quant1d.zador_constant(lambda x: math.exp(-x), r, (0, np.inf))
    text = "N,r,e,N_e,zador\n" + "".join(
        f"{int(N)},{r:g},{io.fmt(e)},{io.fmt(ne)},{io.fmt(const)}\n" for N, e, ne in rows
    )
    out.files["pierce.csv"] = text
    tol = 0.01 if name == "uniform" else 0.10
    for N, _, ne in rows:
        out.add(f"N e_N vs limit, N={int(N)}", abs(ne / const - 1) <= tol, f"{ne:.6f}", f"{const:.6f} +-{tol:.0%}")


def _persist(out: Outcome, paths, root: Path):
    for pth in paths:
        out.files[str(Path(pth).relative_to(root))] = None


def run_haar_curve(cfg, out: Outcome, root: Path):
    spec = build_spec(cfg)
    phi = cfg["phi"] if cfg["phi"] is not None else regularity_exponent(spec)
    factory = as_factory(cfg["seed"])
    qs = fquant.build_for_budgets(spec, phi, cfg["r"], cfg["budgets"], cfg["train_paths"], factory,
                                  cfg["level"], cfg["fill"], cfg["center_singletons"])
    curve = fquant._evaluate(qs, spec, cfg["r"], cfg["p"], cfg["eval_paths"], factory, cfg["level"], "eval")
    out.files["curve.csv"] = io.curve_csv(curve)
    for q in qs:
        _persist(out, io.save_product_quantizer(q, root / "quantizers" / str(q.plan.N)), root)
    fit = ratelab.fit_polylog(curve)
    fits = [fit] + ([ratelab.fit_subexp(curve)] if min(cfg["budgets"]) >= 16 else [])
    out.files["fit.csv"] = _fit_csv(fits)
    win = expected_rate(spec, cfg["p"])
    if win:
        out.add("polylog exponent", win[0] <= fit.param <= win[1], f"{fit.param:.4f}", f"[{win[0]:.3f}, {win[1]:.3f}]")
    _monotone_check(out, curve)
    if isinstance(spec, Brownian) and cfg["r"] == cfg["p"] == 2 and spec.T == 1 and 4096 in cfg["budgets"]:
        bound = 2 * math.sqrt(2) / (math.pi * math.sqrt(12 * math.log(2)))
        e = next(c.estimate for c in curve if c.N == 4096)
        out.add("Brownian e_4096 within x2 of sharp constant", e <= bound, f"{e:.4f}", f"<= {bound:.4f}")
    return spec, factory, TimeGrid(spec.T, max(fquant.eval_level(q, cfg["level"]) for q in qs))


def run_cpp_curve(cfg, out: Outcome, root: Path):
    spec = build_spec(cfg)
    factory = as_factory(cfg["seed"])
    curve, qs = cppq.cpp_distortion_curve(spec.lam, spec.T, spec.jump_law, cfg["r"], cfg["p"], cfg["delta"],
                                          cfg["budgets"], cfg["eval_paths"], factory, cfg["train_paths"],
                                          cfg["eps"], return_quantizers=True)
    out.files["curve.csv"] = io.curve_csv(curve)
    for q in qs:
        _persist(out, io.save_poisson_quantizer(q, root / "quantizers" / str(q.N)), root)
    fits = [ratelab.fit_polylog(curve)]
    if min(cfg["budgets"]) >= 16:
        fits.append(ratelab.fit_subexp(curve))
        sub = fits[-1]
        out.add("subexp fit R2 > 0.9", sub.r2 > 0.9, f"{sub.r2:.4f}", "> 0.9")
        out.add("subexp constant c > 0", sub.param > 0, f"{sub.param:.4f}", "> 0")
    out.files["fit.csv"] = _fit_csv(fits)
    _monotone_check(out, curve)
    return spec, factory, TimeGrid(spec.T, cfg["level"])


def _regularity_csv(est) -> str:
    return "h,phi\n" + "".join(f"{io.fmt(h)},{io.fmt(v)}\n" for h, v in zip(est.h, est.phi))


def run_regularity(cfg, out: Outcome):
    spec = build_spec(cfg)
    est = ratelab.estimate_regularity(spec, cfg["rho"], cfg["h_ladder"], cfg["reg_paths"],
                                      as_factory(cfg["seed"]).child("regularity"))
    out.files["regularity.csv"] = _regularity_csv(est)
    nan = "nan"
    row = [spec.family, f"{cfg['rho']:g}", f"{cfg['r']:g}", f"{cfg['p']:g}", f"{est.b:.6f}", nan, nan, nan, nan, "na"]
    out.files["report.csv"] = ratelab.REPORT_HEADER + "\n" + ",".join(row) + "\n"
    exp = expected_regularity(spec, cfg["rho"])
    if exp:
        out.add("regularity exponent", abs(est.b - exp[0]) <= exp[1], f"{est.b:.4f}", f"{exp[0]:.4f} +-{exp[1]}")
    return spec


def run_report(cfg, out: Outcome):
    spec = build_spec(cfg)
    rep = ratelab.regularity_rate_report(spec, cfg["rho"], cfg["r"], cfg["p"], cfg["budgets"], as_factory(cfg["seed"]),
                                         cfg["eval_paths"], cfg["train_paths"], cfg["reg_paths"], cfg["h_ladder"],
                                         cfg["delta"])
    out.files["report.csv"] = ratelab.REPORT_HEADER + "\n" + rep.row() + "\n"
    out.files["curve.csv"] = io.curve_csv(rep.curve)
    out.files["regularity.csv"] = _regularity_csv(rep.regularity)
    if isinstance(spec, Poisson):
        out.add("rate and regularity disagree", not rep.agreement, str(rep.agreement).lower(), "false")
    elif not isinstance(spec, Gamma):
        out.add("rate and regularity agree", rep.agreement, str(rep.agreement).lower(), "true")
    return spec


def _dump_paths(cfg, out: Outcome, spec, factory, grid):
    k = min(cfg["dump_paths"], cfg["eval_paths"], BLOCK_SIZE)
    if k == 0:
        return
    n = min(cfg["eval_paths"], BLOCK_SIZE)
    if isinstance(spec, Poisson) and cfg["experiment"] == "cpp-curve":
        batch = simulate_jump_batch(spec, n, factory, "eval")
        paths = jump_paths_on_grid(batch.S[:k], batch.U[:k], spec.lam, grid)
    else:
        paths = simulate_paths(spec, grid, n, factory, "eval")[:k]
    t = grid.times()
    for i in range(k):
        out.files[f"paths/{i:03d}.csv"] = io.path_csv(t, paths[i])


# -- driver ----------------------------------------------------------------------


def execute(cfg: dict, root: Path, dump: bool) -> Outcome:
    out = Outcome()
    root.mkdir(parents=True, exist_ok=True)
    kind = cfg["experiment"]
    if kind == "scalar-pierce":
        run_scalar_pierce(cfg, out)
    elif kind == "haar-curve":
        spec, factory, grid = run_haar_curve(cfg, out, root)
        if dump:
            _dump_paths(cfg, out, spec, factory, grid)
    elif kind == "cpp-curve":
        spec, factory, grid = run_cpp_curve(cfg, out, root)
        if dump:
            _dump_paths(cfg, out, spec, factory, grid)
    elif kind == "regularity":
        spec = run_regularity(cfg, out)
        if dump:
            _dump_paths(cfg, out, spec, as_factory(cfg["seed"]), TimeGrid(spec.T, cfg["level"]))
    else:
        run_report(cfg, out)
    _synthetic_check(out)
    for name, text in out.files.items():
        if text is not None:
            io._write(root / name, text)
    write_manifest(cfg, root, out)
    return out


def versions() -> dict:
    return {
        "haarquant": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
        "python": platform.python_version(),
    }


def write_manifest(cfg: dict, root: Path, out: Outcome) -> Path:
    files = {}
    for name in sorted(out.files):
        data = (root / name).read_bytes()
        files[name] = {"git_blob": io.git_blob_hash(data), "bytes": len(data)}
    echo = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    manifest = {"config": echo, "files": files, "versions": versions()}
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def print_checks(out: Outcome, stream=None) -> bool:
    stream = stream or sys.stdout
    ok = True
    for name, passed, value, target in out.checks:
        ok &= passed
        detail = f" {value}" + (f" (target {target})" if target else "") if value or target else ""
        print(f"{'PASS' if passed else 'FAIL'}  {name}:{detail}", file=stream)
    return ok


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="haarquant", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run an experiment and write its artifacts"),
                        ("check", "run an experiment and evaluate its acceptance thresholds")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--out", help="output directory (default: config 'out' or results/<config name>)")
        p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--dump-paths", action="store_true", help="write a few evaluation paths as t,value CSVs")
        if name == "run":
            p.add_argument("--check", action="store_true", help="also evaluate thresholds; exit 4 on failure")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        threads = args.threads if args.threads is not None else cfg["threads"]
        if threads is not None:
            if threads < 1:
                raise ConfigError("threads", "must be >= 1")
            set_default_threads(threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(args.out or cfg["out"] or Path("results") / Path(args.config).stem)
    try:
        out = execute(cfg, root, args.dump_paths)
    except (HaarQuantError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(out.files)} files and manifest.json to {root}")
    if args.command == "check" or getattr(args, "check", False):
        return EXIT_OK if print_checks(out) else EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
