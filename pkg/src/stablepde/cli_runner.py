"""Config-driven experiments.

    stablepde run CONFIG.yaml [--set problem.n=256 ...] [--out DIR]

Exit status: 0 all checks passed, 1 a configured assertion failed,
2 the config is invalid, 3 the kernel or lower-order term violates its
structural assumptions.  ``STABLEPDE_OUTPUT_DIR`` overrides the output
directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field as PField, ValidationError, model_validator

SCHEMA_VERSION = 1
OUTPUT_ENV = "STABLEPDE_OUTPUT_DIR"
COMMANDS = ("kernel-table", "solve", "verify-estimates", "embed-check", "simulate", "feynman-kac",
            "certify-operators")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ProblemBlock(_Strict):
    alpha: float = PField(1.5, gt=0, lt=2)
    d: Literal[1, 2] = 1
    L: float = PField(float(np.pi), gt=0)
    n: int = PField(128, ge=4)
    T: float = PField(1.0, gt=0)
    n_t: int = PField(128, ge=2)
    lam: float = PField(0.0, ge=0, alias="lambda")
    p: float = PField(2.0, ge=2)

    @model_validator(mode="after")
    def _power_of_two(self):
        if self.n & (self.n - 1):
            raise ValueError("n must be a power of two")
        return self


class KernelBlock(_Strict):
    preset: Optional[Literal["constant", "half-sphere", "hoelder-mix"]] = "constant"
    table: Optional[str] = None
    value: float = PField(1.0, gt=0)
    beta: Optional[float] = PField(None, gt=0, le=1)
    K_upper: Optional[float] = PField(None, gt=0)


class LowerOrderBlock(_Strict):
    drift: list[float] = []
    atoms: list[tuple[list[float], float]] = []
    eps0: float = PField(1.0, gt=0, le=1)


class MCBlock(_Strict):
    n_paths: int = PField(10_000, ge=1)
    seed: int = PField(0, ge=0, lt=2 ** 64)
    dt: float = PField(1e-3, gt=0)
    eps_cut: float = PField(0.05, gt=0)
    gaussian_correction: bool = True
    s0: float = PField(0.0, ge=0)
    x0: Optional[list[float]] = None
    block_size: int = PField(4096, ge=1)


class SolverBlock(_Strict):
    scheme: Literal["duhamel-constant", "imex-frozen"] = "duhamel-constant"
    reference: Literal["center", "m0"] = "center"
    step: Literal["exponential", "euler"] = "exponential"
    time_order: Literal[1, 3] = 3


class SourceBlock(_Strict):
    kind: Literal["pulse", "mode", "random"] = "pulse"
    width_x: float = PField(0.5, gt=0)
    width_t: Optional[float] = PField(None, gt=0)
    mode: int = 1
    ensemble: int = PField(20, ge=1)
    k_max: int = PField(8, ge=1)


class AssertBlock(_Strict):
    residual_max: float = 1e-3
    plateau_tol: float = 0.10
    sweep_tol: float = 0.20
    ks_min: float = 0.01
    mass_tol: float = 1e-6
    se_factor: float = 3.0


class ExperimentConfig(_Strict):
    command: Literal["kernel-table", "solve", "verify-estimates", "embed-check", "simulate", "feynman-kac",
                     "certify-operators"]
    output_dir: str = "stablepde-out"
    seed: int = PField(0, ge=0, lt=2 ** 64)
    threads: int = PField(1, ge=1)
    convention: Literal["unit", "generator"] = "generator"
    problem: ProblemBlock = ProblemBlock()
    kernel: KernelBlock = KernelBlock()
    lower_order: Optional[LowerOrderBlock] = None
    mc: MCBlock = MCBlock()
    solver: SolverBlock = SolverBlock()
    source: SourceBlock = SourceBlock()
    assertions: AssertBlock = AssertBlock()


# ------------------------------------------------------------------ config handling

class ConfigError(ValueError):
    pass


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        if cur.get(k) is None:
            cur[k] = {}
        cur = cur[k]
        if not isinstance(cur, dict):
            raise ConfigError(f"--set {dotted}: {k} is not a mapping")
    cur[keys[-1]] = value


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("the config must be a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(raw, k.strip(), yaml.safe_load(v))
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(x) for x in first["loc"])
        raise ConfigError(f"invalid config at '{loc}': {first['msg']}") from e


def resolved_config(cfg: ExperimentConfig) -> dict:
    """The full config echo, minus the output location (so reruns elsewhere are identical)."""
    out = cfg.model_dump(mode="json", by_alias=True)
    out.pop("output_dir", None)
    return out


# ------------------------------------------------------------------ builders

def _kernel(cfg: ExperimentConfig):
    from .kernel_model import load_kernel_table, preset, validate_kernel
    pb, kb = cfg.problem, cfg.kernel
    if kb.table:
        spec = load_kernel_table(kb.table, pb.alpha)
    else:
        spec = preset(kb.preset, pb.alpha, pb.d, **({"value": kb.value} if kb.preset == "constant" else {}))
    if spec.d != pb.d:
        raise ConfigError("kernel dimension differs from problem.d")
    from dataclasses import replace
    if kb.beta is not None:
        spec = replace(spec, beta=kb.beta)
    if kb.K_upper is not None:
        spec = replace(spec, K_upper=kb.K_upper)
    validate_kernel(spec, L=pb.L)
    return spec


def _lower(cfg: ExperimentConfig):
    from .kernel_model import LowerOrderSpec, validate_lower_order
    lb = cfg.lower_order
    if lb is None:
        return None
    d = cfg.problem.d
    b = None
    if lb.drift:
        vec = np.asarray(lb.drift, dtype=float)
        if vec.shape != (d,):
            raise ConfigError("lower_order.drift must have d components")
        b = lambda t, x, vec=vec: np.broadcast_to(vec, np.shape(x))
    atoms = tuple((tuple(float(c) for c in y), float(w)) for y, w in lb.atoms)
    low = LowerOrderSpec(d, b=b, atoms=atoms, eps0=lb.eps0)
    K = cfg.kernel.K_upper or 1.0
    validate_lower_order(low, cfg.problem.alpha, max(K, 1.0) * 10)
    return low


def _grid(cfg: ExperimentConfig, n=None):
    from .grid import Grid
    return Grid(cfg.problem.d, cfg.problem.L, n or cfg.problem.n)


def _solver_cfg(cfg: ExperimentConfig, **kw):
    from .cauchy_solver import SolverConfig
    pb, sb = cfg.problem, cfg.solver
    base = dict(lam=pb.lam, T=pb.T, n_t=pb.n_t, p=pb.p, scheme=sb.scheme, reference=sb.reference, step=sb.step,
                time_order=sb.time_order)
    base.update(kw)
    return SolverConfig(**base)


def _source(cfg: ExperimentConfig, grid, scfg):
    from .cauchy_solver import gaussian_pulse, source_from_function
    sb = cfg.source
    if sb.kind == "mode":
        k = sb.mode * np.pi / grid.L
        return source_from_function(lambda t, x: np.cos(k * x[..., 0]) + 0 * t, grid, scfg)
    return gaussian_pulse(grid, scfg, width_x=sb.width_x, width_t=sb.width_t)


def _ensemble(cfg: ExperimentConfig, grid, scfg):
    from .cauchy_solver import random_sources
    return random_sources(grid, scfg, np.random.default_rng(cfg.seed), cfg.source.ensemble, cfg.source.k_max)


def _solve(cfg, spec, low, f, scfg):
    from .cauchy_solver import solve
    return solve(spec, low, f, scfg)


# ------------------------------------------------------------------ output

class Output:
    def __init__(self, root: Path):
        self.root = root
        self.artifacts = []
        root.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, obj) -> Path:
        from .fieldio import write_json
        p = write_json(self.root / name, obj)
        self.artifacts.append(name)
        return p

    def csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        p = self.root / name
        p.write_text(buf.getvalue())
        self.artifacts.append(name)
        return p

    def array(self, name: str, arr, header) -> None:
        from .fieldio import write_array
        write_array(self.root / name, arr, header)
        self.artifacts.extend([name + ".bin", name + ".json"])

    def field(self, name: str, f, extra) -> None:
        from .fieldio import write_field
        write_field(self.root / name, f, extra)
        self.artifacts.extend([name + ".bin", name + ".json"])


def _versions() -> dict:
    import scipy
    from . import __version__
    from .fieldio import FORMAT_VERSION
    return {"stablepde": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "format_version": FORMAT_VERSION}


def _f(x) -> float:
    return float(x)


# ------------------------------------------------------------------ commands

def cmd_kernel_table(cfg, out: Output) -> tuple[dict, bool]:
    from .stable_heat_kernel import build_kernel_table, table_arrays
    pb = cfg.problem
    table = build_kernel_table(pb.alpha, pb.d, convention=cfg.convention)
    arr, header = table_arrays(table)
    out.array("heat_kernel_table", arr, header)
    err = abs(table.mass() - 1.0)
    res = {"mass_error": err, "K0": _f(table.K(np.array([0.0]))[0]), "n_nodes": int(len(table.radii))}
    return res, err <= cfg.assertions.mass_tol


def cmd_solve(cfg, out: Output) -> tuple[dict, bool]:
    from .cauchy_solver import residual
    spec, low = _kernel(cfg), _lower(cfg)
    grid = _grid(cfg)
    scfg = _solver_cfg(cfg)
    f = _source(cfg, grid, scfg)
    u = _solve(cfg, spec, low, f, scfg)
    out.field("solution", u, {"config": resolved_config(cfg)})
    res = residual(spec, low, u, f, scfg)
    return {"residual": res, "max_abs": _f(np.max(np.abs(u.values)))}, res <= cfg.assertions.residual_max


def cmd_verify_estimates(cfg, out: Output) -> tuple[dict, bool]:
    from .cauchy_solver import apriori_ratios, lem0_ratio, solve, lambda_sweep
    from .grid import Field
    spec, low = _kernel(cfg), _lower(cfg)
    scfg = _solver_cfg(cfg)
    table, per_sample = [], []
    n0 = cfg.problem.n
    for n in (n0, 2 * n0, 4 * n0):
        grid = _grid(cfg, n)
        ens = _ensemble(cfg, grid, scfg)
        r1s = []
        lem0 = 0.0
        for i, f in enumerate(ens):
            u = solve(spec, low, f, scfg)
            r = apriori_ratios(u, f, spec.alpha, scfg.p)["R1"]
            r1s.append(r)
            lem0 = max(lem0, lem0_ratio(Field(grid, u.values[-1]), spec.alpha, scfg.p))
            per_sample.append((n, i, r))
        table.append({"n": n, "R1": max(r1s), "lem0": lem0})
    sweep = lambda_sweep(spec, low, _ensemble(cfg, _grid(cfg), scfg), scfg)
    r1 = [row["R1"] for row in table]
    change = max(abs(b - a) / a for a, b in zip(r1[:-1], r1[1:]))
    report = {"ratios": {"R1": r1[-1], "lem0": table[-1]["lem0"], "plateau_change": change},
              "lambda_sweep": sweep, "refinement_table": table}
    out.json("report.json", report)
    out.csv("per_sample.csv", ["n", "sample", "R1"], per_sample)
    ok = change <= cfg.assertions.plateau_tol and sweep["bounded"]
    return {"plateau_change": change, "lambda1": sweep["lambda1"], "bounded": sweep["bounded"],
            "nonincreasing": sweep["nonincreasing"]}, ok


def cmd_embed_check(cfg, out: Output) -> tuple[dict, bool]:
    from .cauchy_solver import holder_embedding_check
    spec, low = _kernel(cfg), _lower(cfg)
    scfg = _solver_cfg(cfg)
    rows = []
    for n in (cfg.problem.n, 2 * cfg.problem.n):
        grid = _grid(cfg, n)
        f = _source(cfg, grid, scfg)
        u = _solve(cfg, spec, low, f, scfg)
        r = holder_embedding_check(u, scfg, spec.alpha, f)
        rows.append({"n": n, "ratio": r["ratio"], "time_ratio": r["time_ratio"], "beta": r["beta"]})
    ch = max(abs(rows[1][k] - rows[0][k]) / rows[0][k] for k in ("ratio", "time_ratio"))
    out.json("report.json", {"rows": rows, "max_change": ch})
    out.csv("embedding.csv", ["n", "ratio", "time_ratio"], [(r["n"], r["ratio"], r["time_ratio"]) for r in rows])
    return {"max_change": ch}, ch <= cfg.assertions.plateau_tol


def _mc_cfg(cfg, **kw):
    from .martingale_mc import MCConfig
    mb = cfg.mc
    base = dict(n_paths=mb.n_paths, seed=mb.seed, dt=mb.dt, T=cfg.problem.T, eps_cut=mb.eps_cut,
                gaussian_correction=mb.gaussian_correction, block_size=mb.block_size)
    base.update(kw)
    return MCConfig(**base)


def _x0(cfg):
    return np.zeros(cfg.problem.d) if cfg.mc.x0 is None else np.asarray(cfg.mc.x0, dtype=float)


def cmd_simulate(cfg, out: Output) -> tuple[dict, bool]:
    from .martingale_mc import ks_stable, ks_stable_radial, mean_se, simulate
    from .stable_heat_kernel import build_kernel_table
    spec, low = _kernel(cfg), _lower(cfg)
    x0 = _x0(cfg)
    ens = simulate(spec, low, spec.alpha, cfg.mc.s0, x0, _mc_cfg(cfg, store_paths=False))
    disp = ens.final - x0
    est, se = zip(*(mean_se(np.clip(disp[:, a], -1, 1)) for a in range(spec.d)))
    ks = None
    ok = True
    if spec.name == "constant" and low is None:
        table = build_kernel_table(spec.alpha, spec.d, convention="generator")
        t_eff = (cfg.problem.T - cfg.mc.s0) * cfg.kernel.value
        ks = ks_stable(disp, spec.alpha, table, t_eff) if spec.d == 1 else ks_stable_radial(disp, table, t_eff)
        ok = ks > cfg.assertions.ks_min
    summary = {"n_paths": ens.n_paths, "seed": ens.seed, "estimates": {"clipped_mean": list(est)},
               "std_errors": {"clipped_mean": list(se)}, "ks_pvalues": {"marginal": ks},
               "ensemble": ens.summary()}
    out.json("ensemble_summary.json", summary)
    return {"ks_pvalue": ks, "digest": ens.digest()}, ok


def cmd_feynman_kac(cfg, out: Output) -> tuple[dict, bool]:
    from .martingale_mc import feynman_kac_check
    spec, low = _kernel(cfg), _lower(cfg)
    scfg = _solver_cfg(cfg, lam=0.0)
    grid = _grid(cfg)
    f = _source(cfg, grid, scfg)
    rep = feynman_kac_check(spec, low, spec.alpha, f, cfg.mc.s0, _x0(cfg), _mc_cfg(cfg), scfg)
    comb = rep["combined_se"]
    ok = abs(rep["mc"] - rep["pde"]) <= cfg.assertions.se_factor * comb
    rep["agree"] = bool(ok)
    out.json("report.json", rep)
    return {"pde": rep["pde"], "mc": rep["mc"], "combined_se": comb}, ok


def cmd_certify_operators(cfg, out: Output) -> tuple[dict, bool]:
    from .singular_integral import certify_sweep, narrowband_ensemble
    spec = _kernel(cfg)
    grid = _grid(cfg)
    ens = narrowband_ensemble(grid, np.random.default_rng(cfg.seed), size=cfg.source.ensemble)
    rows = certify_sweep(spec, spec.alpha, (2.0, 4.0), ens)
    worst = 0.0
    for p in (2.0, 4.0):
        vals = [r["empirical_constant"] for r in rows if r["p"] == p]
        worst = max(worst, (max(vals) - min(vals)) / max(vals))
    out.json("report.json", {"rows": rows, "sweep_variation": worst})
    out.csv("certify.csv", ["epsilon", "p", "empirical_constant", "tail_mass"],
            [(r["epsilon"], r["p"], r["empirical_constant"], r["tail_mass"]) for r in rows])
    return {"sweep_variation": worst}, worst <= cfg.assertions.sweep_tol


DISPATCH = {"kernel-table": cmd_kernel_table, "solve": cmd_solve, "verify-estimates": cmd_verify_estimates,
            "embed-check": cmd_embed_check, "simulate": cmd_simulate, "feynman-kac": cmd_feynman_kac,
            "certify-operators": cmd_certify_operators}


def run(config_path, overrides=(), out_dir=None) -> int:
    """Run one experiment; returns the exit status."""
    from .kernel_model import AssumptionError
    try:
        cfg = load_config(config_path, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    os.environ.setdefault("OMP_NUM_THREADS", str(cfg.threads))
    root = Path(out_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    out = Output(root)
    try:
        results, ok = DISPATCH[cfg.command](cfg, out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except AssumptionError as e:
        print(f"assumption violated: {e}", file=sys.stderr)
        out.json("manifest.json", {"schema_version": SCHEMA_VERSION, "command": cfg.command,
                                   "config": resolved_config(cfg), "versions": _versions(),
                                   "status": "assumption-failure", "error": str(e)})
        return 3
    manifest = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "config": resolved_config(cfg),
                "versions": _versions(), "artifacts": sorted(out.artifacts), "results": results,
                "status": "pass" if ok else "fail"}
    out.json("manifest.json", manifest)
    print(f"{cfg.command}: {'pass' if ok else 'FAIL'} -> {root}")
    return 0 if ok else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="stablepde", description="Stable-like nonlocal Cauchy problem experiments")
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run the experiment described by a YAML config")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--out", default=None, help="output directory")
    args = ap.parse_args(argv)
    return run(args.config, args.set, args.out)


if __name__ == "__main__":
    sys.exit(main())
