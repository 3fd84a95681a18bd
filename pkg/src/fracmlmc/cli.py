"""Command line driver: config parsing, experiment orchestration and CSV output."""

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from .analysis import ReferenceConfig, fit_rate, reference_solution, table_study, work_per_log
from .errors import ConfigError, FracMlmcError
from .fractional import BoundaryMode
from .mc import McConfig, mc_estimate
from .mesh import Grid1D, MeshHierarchy, SolutionField
from .mlmc import MlmcPlan, mlmc_estimate, rate_exponents, work_model
from .model import BlParams, ParamDistribution, make_sample
from .solver import SchemeKind, SolverConfig, solve_with_stats

COMMANDS = ("det-run", "mc-run", "mlmc-run", "convergence-study", "reference-gen", "table-repro")
ESTIMATOR_COMMANDS = ("mc-run", "mlmc-run", "convergence-study", "reference-gen", "table-repro")


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "det-run"
    lam: float = 0.5
    scheme: str = "explicit"
    K: float = 5.0
    N0: int = 41
    L: int = 0
    T: float = 1.0
    cfl: float = 0.2
    seed: int = 0
    Q: int = 30
    boundary: str = "constant"
    flux_speed: str = "interval"
    newton_max_iters: int = 50
    c: float = 0.0
    mu: float = 0.5
    alpha: float = 0.2
    c_min: float = 0.0
    c_max: float = 0.1
    mu_min: float = 0.3
    mu_max: float = 0.7
    alpha_min: float = 0.0
    alpha_max: float = 0.4
    mc_samples: int = 0
    C_mc: float = 2.0
    q_c: int = 9
    q_mu: int = 9
    q_alpha: int = 9
    ref_cells: int = 3321
    reference: str = ""
    rms: bool = False
    output: str = "out"

    def __post_init__(self):
        _validate(self)

    def dist(self) -> ParamDistribution:
        return ParamDistribution(
            (self.c_min, self.c_max), (self.mu_min, self.mu_max), (self.alpha_min, self.alpha_max)
        )

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            scheme=self.scheme, cfl=self.cfl, boundary=self.boundary,
            newton_max_iters=self.newton_max_iters, T=self.T, flux_speed=self.flux_speed,
        )

    def grid(self, level: Optional[int] = None) -> Grid1D:
        return Grid1D(self.K, self.N0 * 3 ** (self.L if level is None else level))


# config key -> (attribute, converter)
KEYS = {
    "command": ("command", str),
    "lambda": ("lam", float),
    "scheme": ("scheme", str),
    "K": ("K", float),
    "N0": ("N0", int),
    "L": ("L", int),
    "T": ("T", float),
    "cfl": ("cfl", float),
    "seed": ("seed", int),
    "Q": ("Q", int),
    "boundary": ("boundary", str),
    "flux_speed": ("flux_speed", str),
    "newton_max_iters": ("newton_max_iters", int),
    "c": ("c", float),
    "mu": ("mu", float),
    "alpha": ("alpha", float),
    "c_min": ("c_min", float),
    "c_max": ("c_max", float),
    "mu_min": ("mu_min", float),
    "mu_max": ("mu_max", float),
    "alpha_min": ("alpha_min", float),
    "alpha_max": ("alpha_max", float),
    "mc_samples": ("mc_samples", int),
    "C_mc": ("C_mc", float),
    "q_c": ("q_c", int),
    "q_mu": ("q_mu", int),
    "q_alpha": ("q_alpha", int),
    "ref_cells": ("ref_cells", int),
    "reference": ("reference", str),
    "rms": ("rms", _bool),
    "output": ("output", str),
}
ATTR_TO_KEY = {attr: key for key, (attr, _) in KEYS.items()}


def _validate(cfg: ExperimentConfig):
    def fail(key, msg):
        raise ConfigError(msg, key=key)

    if cfg.command not in COMMANDS:
        fail("command", f"unknown command {cfg.command!r}; choose one of {', '.join(COMMANDS)}")
    try:
        scheme = SchemeKind.parse(cfg.scheme)
    except FracMlmcError as exc:
        fail("scheme", str(exc))
    object.__setattr__(cfg, "scheme", scheme.value)
    try:
        object.__setattr__(cfg, "boundary", BoundaryMode.parse(cfg.boundary).value)
    except FracMlmcError as exc:
        fail("boundary", str(exc))
    if not (0.0 < cfg.lam < 2.0):
        fail("lambda", f"must lie in (0, 2), got {cfg.lam}")
    if cfg.lam == 1.0 and cfg.command in ESTIMATOR_COMMANDS:
        fail("lambda", "lambda = 1 is the excluded critical case; the sample-count and rate theory needs lambda != 1")
    if not (cfg.K > 0 and math.isfinite(cfg.K)):
        fail("K", f"half width must be positive, got {cfg.K}")
    if cfg.N0 < 1 or cfg.N0 % 2 == 0:
        fail("N0", f"cell count must be a positive odd integer so a cell is centred at 0, got {cfg.N0}")
    if cfg.ref_cells < 1 or cfg.ref_cells % 2 == 0:
        fail("ref_cells", f"reference cell count must be a positive odd integer, got {cfg.ref_cells}")
    if cfg.L < 0:
        fail("L", f"must be nonnegative, got {cfg.L}")
    if cfg.command in ("convergence-study", "table-repro") and cfg.L < 1:
        object.__setattr__(cfg, "L", 4 if scheme is SchemeKind.EXPLICIT else 3)
    if not (cfg.T >= 0 and math.isfinite(cfg.T)):
        fail("T", f"must be finite and nonnegative, got {cfg.T}")
    if not (0.0 < cfg.cfl < 1.0):
        fail("cfl", f"must lie in (0, 1), got {cfg.cfl}")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        fail("seed", f"must be a 64-bit nonnegative integer, got {cfg.seed}")
    if cfg.Q < 1:
        fail("Q", f"must be at least 1, got {cfg.Q}")
    if cfg.newton_max_iters < 1:
        fail("newton_max_iters", "must be at least 1")
    if cfg.flux_speed not in ("interval", "endpoint"):
        fail("flux_speed", f"must be 'interval' or 'endpoint', got {cfg.flux_speed!r}")
    if cfg.mu <= 0:
        fail("mu", f"must be positive, got {cfg.mu}")
    if cfg.alpha < 0:
        fail("alpha", f"must be nonnegative, got {cfg.alpha}")
    for name in ("c", "mu", "alpha"):
        lo, hi = getattr(cfg, name + "_min"), getattr(cfg, name + "_max")
        if lo > hi:
            fail(name + "_min", f"{name}_min = {lo} exceeds {name}_max = {hi}")
    if cfg.mu_min <= 0:
        fail("mu_min", f"must be positive, got {cfg.mu_min}")
    if cfg.alpha_min < 0:
        fail("alpha_min", f"must be nonnegative, got {cfg.alpha_min}")
    if cfg.mc_samples < 0:
        fail("mc_samples", "must be nonnegative (0 selects the automatic rule)")
    if cfg.C_mc <= 0:
        fail("C_mc", "must be positive")
    for key in ("q_c", "q_mu", "q_alpha"):
        if getattr(cfg, key) < 1:
            fail(key, "must be at least 1")


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse 'key = value' lines ('#' starts a comment); ``overrides`` win over the text."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key; valid keys: {', '.join(KEYS)}", line=lineno, key=key)
        attr, conv = KEYS[key]
        try:
            values[attr] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"cannot convert {value!r}: {exc}", line=lineno, key=key) from None
    for key, value in (overrides or {}).items():
        if value is not None:
            values[KEYS[key][0]] = value
    return ExperimentConfig(**values)


def header_lines(cfg: ExperimentConfig) -> List[str]:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            v = repr(v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"# {ATTR_TO_KEY[f.name]} = {v}")
    return lines


def parse_header(text: str) -> ExperimentConfig:
    """Recover the config from the '# key = value' header of an output file."""
    body = []
    for line in text.splitlines():
        if line.startswith("#!") or not line.startswith("#"):
            continue
        body.append(line[1:])
    return parse_config("\n".join(body))


def _fmt(v) -> str:
    return f"{v:.17g}"


def write_field_csv(path: Path, header: List[str], columns: List[tuple]):
    """columns: (name, array); the first column is x."""
    names = ",".join(name for name, _ in columns)
    arrays = [np.asarray(a, dtype=float) for _, a in columns]
    rows = [",".join(_fmt(v) for v in vals) for vals in zip(*arrays)]
    path.write_text("\n".join(header + [names] + rows) + "\n")


def _result_lines(**items) -> List[str]:
    out = []
    for key, value in items.items():
        if isinstance(value, (list, tuple)):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = _fmt(value)
        out.append(f"#! {key} = {value}")
    return out


def _write_timing(out: Path, seconds: float):
    # kept out of the CSVs so their bytes depend only on the configuration
    (out / "timing.txt").write_text(f"wall_time_s = {seconds:.6f}\n")


def cmd_det_run(cfg, out, workers):
    grid = cfg.grid()
    sample = make_sample(BlParams(cfg.c, cfg.mu, cfg.alpha))
    t0 = time.perf_counter()
    field, stats = solve_with_stats(sample, grid, cfg.lam, cfg.solver_config())
    _write_timing(out, time.perf_counter() - t0)
    extra = _result_lines(
        N=grid.n_cells, steps=stats.steps, newton_iterations=stats.newton_iterations,
        critical_lambda="true" if stats.critical_lambda else "false",
    )
    write_field_csv(out / "solution.csv", header_lines(cfg) + extra,
                    [("x", grid.centers), ("value", field.values)])


def _write_estimate(cfg, out, res, extra):
    grid = res.mean.grid
    head = header_lines(cfg) + extra
    write_field_csv(out / "mean.csv", head, [("x", grid.centers), ("value", res.mean.values)])
    write_field_csv(out / "variance.csv", head, [("x", grid.centers), ("value", res.variance.values)])
    _write_timing(out, res.wall_time)


def cmd_mc_run(cfg, out, workers):
    grid = cfg.grid()
    mc_cfg = McConfig(cfg.mc_samples or None, cfg.C_mc, cfg.seed)
    res = mc_estimate(grid, cfg.lam, cfg.dist(), cfg.solver_config(), mc_cfg, workers=workers)
    _write_estimate(cfg, out, res, _result_lines(N=grid.n_cells, M=res.samples_per_level,
                                                 steps=res.step_counts))


def cmd_mlmc_run(cfg, out, workers):
    exps = rate_exponents(cfg.lam, cfg.scheme)
    plan = MlmcPlan.build(MeshHierarchy(cfg.grid(0), cfg.L), exps)
    res = mlmc_estimate(plan, cfg.dist(), cfg.lam, cfg.solver_config(), cfg.seed, workers=workers)
    extra = _result_lines(
        N_L=plan.hierarchy.finest.n_cells, M=plan.M, epsilon=plan.epsilon,
        work_model=work_model(plan), steps=res.step_counts,
    )
    _write_estimate(cfg, out, res, extra)


def _reference_config(cfg):
    return ReferenceConfig(cfg.q_c, cfg.q_mu, cfg.q_alpha, Grid1D(cfg.K, cfg.ref_cells),
                           cfg.solver_config(), cfg.dist())


def cmd_reference_gen(cfg, out, workers):
    t0 = time.perf_counter()
    ref = reference_solution(_reference_config(cfg), cfg.lam, workers=workers)
    _write_timing(out, time.perf_counter() - t0)
    write_field_csv(out / "reference.csv", header_lines(cfg), [("x", ref.grid.centers), ("value", ref.values)])


def load_field_csv(path, grid: Grid1D) -> SolutionField:
    rows = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    values = [float(r.split(",")[1]) for r in rows[1:]]
    return SolutionField(grid, values)


def _table(cfg, out, workers, with_rms):
    reference = None
    if with_rms:
        if cfg.reference:
            reference = load_field_csv(cfg.reference, Grid1D(cfg.K, cfg.ref_cells))
        else:
            reference = reference_solution(_reference_config(cfg), cfg.lam, workers=workers)
    rows = table_study(
        cfg.lam, cfg.scheme, range(1, cfg.L + 1), n0=cfg.N0, K=cfg.K, Q=cfg.Q, seed=cfg.seed,
        dist=cfg.dist(), solver_config=cfg.solver_config(), reference=reference,
        run_estimates=with_rms, workers=workers,
    )
    lines = header_lines(cfg) + ["L,M,N_L,RMS,runtime_s,work_model"]
    for r in rows:
        rms = "nan" if r.rms is None else _fmt(r.rms)
        rt = _fmt(r.runtime_s) if with_rms else "nan"
        lines.append(f"{r.L},{' '.join(str(m) for m in r.M)},{r.N_L},{rms},{rt},{_fmt(r.work_model)}")
    if with_rms and len(rows) >= 2:
        n = [r.N_L for r in rows]
        e = [r.rms for r in rows]
        rt = [r.runtime_s for r in rows]
        wm = [r.work_model for r in rows]
        implicit = SchemeKind.parse(cfg.scheme) is SchemeKind.EXPLICIT_IMPLICIT
        lines += _result_lines(
            r1=fit_rate(n, e),
            r2=fit_rate(work_per_log(rt) if implicit and min(rt) > 1 else rt, e),
            r2_raw_runtime=fit_rate(rt, e),
            r2_work_model=fit_rate(work_per_log(wm) if implicit else wm, e),
        )
    (out / "table.csv").write_text("\n".join(lines) + "\n")
    return rows


def cmd_table_repro(cfg, out, workers):
    _table(cfg, out, workers, cfg.rms)


def cmd_convergence_study(cfg, out, workers):
    _table(cfg, out, workers, True)


HANDLERS = {
    "det-run": cmd_det_run,
    "mc-run": cmd_mc_run,
    "mlmc-run": cmd_mlmc_run,
    "convergence-study": cmd_convergence_study,
    "reference-gen": cmd_reference_gen,
    "table-repro": cmd_table_repro,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fracmlmc",
        description="Monotone finite differences and (multilevel) Monte Carlo for fractional "
        "convection-diffusion with random Buckley-Leverett data.",
    )
    p.add_argument("command", nargs="?", choices=COMMANDS, help="experiment to run (default: from config, else det-run)")
    p.add_argument("--config", type=Path, help="'key = value' configuration file")
    p.add_argument("--lambda", dest="lam", type=float, help="fractional exponent in (0, 2)")
    p.add_argument("--scheme", choices=[s.value for s in SchemeKind])
    p.add_argument("--levels", type=int, help="number of refinement levels L")
    p.add_argument("--n0", type=int, help="cells on the coarsest grid (odd)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes (default: all cores)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
        overrides = {
            "command": args.command, "lambda": args.lam, "scheme": args.scheme, "L": args.levels,
            "N0": args.n0, "seed": args.seed, "output": None if args.out is None else str(args.out),
        }
        cfg = parse_config(text, overrides)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[cfg.command](cfg, out, max(1, args.workers))
    except (FracMlmcError, OSError, ValueError) as exc:
        chain = []
        e = exc
        while e is not None:
            chain.append(f"{type(e).__name__}: {e}")
            e = e.__cause__
        print("error: " + "\n  caused by ".join(chain), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
