"""Command-line front end: validate | solve | mesh | verify.

Exit codes: 0 ok, 1 validation failure, 2 solver failure, 3 I/O error.
Wall-clock timing goes to the log stream, never into artifacts, so repeated
single-worker runs of one config write byte-identical files.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, defaults
from .analysis import (
    blowup_error,
    delaunay_axis,
    end_alpha,
    end_report,
    loglog_slope,
    richardson_limit,
)
from .artifacts import RunArtifact, RunConfig
from .errors import ConfigError, ContinuationError, ConvergenceError, DpwError
from .immersion import AnnulusPatch, Surface, mesh, save_diagnostics, save_obj
from .solver import ContinuationConfig, MonodromyProblem, SolutionStep, solve
from .weierstrass import jorge_meeks, nondegeneracy_rank, periods

OK, FAIL_VALIDATION, FAIL_SOLVER, FAIL_IO = 0, 1, 2, 3


def _log(msg: str):
    print(msg, file=sys.stderr)


def _parse_t(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float.fromhex(text)


def _check(lines, name, measured, tol, larger_is_worse=True):
    good = measured <= tol if larger_is_worse else measured >= tol
    lines.append(f"CHECK {name} measured={measured:.6e} tol={tol:.6e} "
                 f"{'PASS' if good else 'FAIL'}")
    return good


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    overrides = {}
    if args.t is not None:
        overrides["t_values"] = tuple(_parse_t(v) for v in args.t.split(","))
    if args.truncation is not None:
        overrides["truncation"] = args.truncation
    if args.rho is not None:
        overrides["rho"] = args.rho
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        base = {
            "family": cfg.family, "t_values": cfg.t_values,
            "truncation": cfg.truncation, "rho": cfg.rho,
            "ode_tol": cfg.ode_tol, "solver_tol": cfg.solver_tol,
            "quad_tol": cfg.quad_tol, "iwasawa_tol": cfg.iwasawa_tol,
            "grid": cfg.grid, "workers": cfg.workers,
        }
        base.update(overrides)
        cfg = RunConfig(**base)
    return cfg


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    lines = []
    ok = True
    if cfg.is_delaunay:
        t = float(cfg.family.get("t", 0.01))
        ok &= _check(lines, "delaunay-parameter-range", abs(t), 1.0 / 16.0)
        print("\n".join(lines))
        return OK if ok else FAIL_VALIDATION
    try:
        x0 = cfg.build_params()
    except DpwError as err:
        print(f"CHECK parameter-construction FAIL: {err}")
        return FAIL_VALIDATION
    table = periods(x0.central(), quad_tol=cfg.quad_tol)
    ok &= _check(lines, "period-closing-re-q", float(np.max(np.abs(table.Q.real))), 1e-9)
    ok &= _check(lines, "period-sum-identity",
                 float(np.max(np.abs(table.P_all.sum(axis=0)))), 1e-9)
    rank, sv = nondegeneracy_rank(x0)
    want = 3 * x0.n - 3
    lines.append(f"CHECK nondegeneracy-rank measured={rank} tol={want} "
                 f"{'PASS' if rank == want else 'FAIL'}")
    lines.append("  singular values: " + " ".join(f"{v:.3e}" for v in sv))
    ok &= rank == want
    problem = MonodromyProblem(x0, degree=cfg.truncation, ode_tol=cfg.ode_tol,
                               solver_tol=cfg.solver_tol, quad_tol=cfg.quad_tol,
                               check_rank=False)
    res0 = problem.residual(0.0, x0).max_norm()
    ok &= _check(lines, "monodromy-residual-at-zero", res0, 100 * cfg.quad_tol)
    print("\n".join(lines))
    return OK if ok else FAIL_VALIDATION


def _solve_branch(problem, x0, targets, cfg, resume_steps):
    """Continuation for one sign, reusing solved resume steps when present."""
    done = [s for s in resume_steps
            if s.is_target and s.t != 0.0 and np.sign(s.t) == np.sign(targets[0])]
    remaining = [t for t in targets if all(s.t != t for s in done)]
    merged = list(done)
    if remaining:
        start = None
        candidates = [s for s in resume_steps
                      if s.t == 0.0 or np.sign(s.t) == np.sign(targets[0])]
        candidates = [s for s in candidates if abs(s.t) < abs(remaining[0])]
        if candidates:
            start = max(candidates, key=lambda s: abs(s.t))
        fresh = solve(remaining, x0, problem,
                      ContinuationConfig(dt_init=min(1e-4, abs(remaining[0]))),
                      start=start)
        merged.extend(s for s in fresh if s.t != 0.0)
    return merged


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.is_delaunay:
        _log("delaunay family has no unknowns; writing an empty artifact")
        artifact = RunArtifact(cfg, (), provenance={"package_version": __version__})
        artifact.save(out_dir / "artifact.json")
        return OK
    resume_steps = []
    if args.resume:
        try:
            resume_steps = list(RunArtifact.load(args.resume).steps)
        except ConfigError as err:
            _log(str(err))
            return FAIL_IO
    began = time.time()
    try:
        x0 = cfg.build_params()
        problem = MonodromyProblem(x0, degree=cfg.truncation, ode_tol=cfg.ode_tol,
                                   solver_tol=cfg.solver_tol, quad_tol=cfg.quad_tol)
        all_steps = [s for s in resume_steps if s.t == 0.0]
        if not all_steps:
            baseline = solve([0.0], x0, problem)
            # the t = 0 record is a target only when explicitly requested
            wanted = 0.0 in cfg.t_values
            all_steps = [SolutionStep(s.t, s.x, s.residual_norm, s.iterations,
                                      is_target=wanted, dt_after=s.dt_after)
                         for s in baseline]
        for sign in (+1.0, -1.0):
            targets = sorted([t for t in cfg.t_values if t * sign > 0], key=abs)
            if targets:
                all_steps.extend(_solve_branch(problem, x0, targets, cfg, resume_steps))
    except (ContinuationError, ConvergenceError, DpwError) as err:
        _log(f"solver failed: {err}")
        return FAIL_SOLVER
    all_steps.sort(key=lambda s: (np.sign(s.t), abs(s.t)))
    artifact = RunArtifact(cfg, tuple(all_steps),
                           provenance={"package_version": __version__})
    artifact.save(out_dir / "artifact.json")
    _log(f"solved {sum(s.is_target for s in all_steps)} targets "
         f"in {time.time() - began:.1f}s -> {out_dir / 'artifact.json'}")
    return OK


def _patches_for(cfg, x0):
    from .weierstrass import period_contour_radius

    cp = x0.central()
    eps = period_contour_radius(cp)
    g = cfg.grid
    patches = [AnnulusPatch(center=0.0, r_in=0.1 * eps, r_out=1.0 - 4.0 * eps / 3.0,
                            rings=int(g.get("core_rings", 10)),
                            sectors=int(g.get("core_sectors", 32)), name="core")]
    for i in range(x0.n):
        patches.append(AnnulusPatch(
            center=0.0, r_in=float(g.get("end_inner", 1e-4)) * eps, r_out=eps,
            rings=int(g.get("end_rings", 12)), sectors=int(g.get("end_sectors", 24)),
            chart_end=i, name=f"end{i}"))
    return patches


def cmd_mesh(args) -> int:
    try:
        artifact = RunArtifact.load(args.artifact)
    except ConfigError as err:
        _log(str(err))
        return FAIL_IO
    cfg = artifact.config
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = _parse_t(args.t) if args.t is not None else None
    try:
        if cfg.is_delaunay:
            surf = Surface.delaunay(float(cfg.family.get("t", 0.05 if t is None else t)),
                                    degree=cfg.truncation, ode_tol=cfg.ode_tol)
            g = cfg.grid
            patches = [AnnulusPatch(center=0.0, r_in=0.4, r_out=2.5,
                                    rings=int(g.get("core_rings", 24)),
                                    sectors=int(g.get("core_sectors", 48)),
                                    name="annulus")]
            m = mesh(surf, patches, workers=cfg.workers)
        else:
            step = artifact.step_at(t)
            surf = Surface.nnoid(step.t, step.x, degree=cfg.truncation)
            surf.ode_tol = cfg.ode_tol
            m = mesh(surf, _patches_for(cfg, step.x), workers=cfg.workers)
    except DpwError as err:
        _log(f"mesh failed: {err}")
        return FAIL_SOLVER
    save_obj(m, out_dir / "surface.obj")
    save_diagnostics(m, out_dir / "surface_diagnostics.tsv")
    _log(f"wrote {m.vertex_count} vertices -> {out_dir / 'surface.obj'}")
    return OK


def cmd_verify(args) -> int:
    try:
        artifact = RunArtifact.load(args.artifact)
    except ConfigError as err:
        _log(str(err))
        return FAIL_IO
    cfg = artifact.config
    lines = []
    ok = True
    if cfg.is_delaunay:
        axis = delaunay_axis(np.eye(2))
        ok &= _check(lines, "delaunay-axis-e1",
                     float(np.max(np.abs(axis - np.array([1.0, 0, 0])))), 1e-14)
        print("\n".join(lines))
        return OK if ok else FAIL_VALIDATION
    x0 = cfg.build_params()
    steps = artifact.targets()
    if not steps:
        zero = [s for s in artifact.steps if s.t == 0.0]
        if zero:
            ok &= _check(lines, "baseline-residual", zero[0].residual_norm,
                         100 * cfg.quad_tol)
        print("\n".join(lines))
        return OK if ok else FAIL_VALIDATION
    problem = MonodromyProblem(x0, degree=cfg.truncation, ode_tol=cfg.ode_tol,
                               solver_tol=cfg.solver_tol, quad_tol=cfg.quad_tol,
                               check_rank=False)
    for s in steps:
        res = problem.residual(s.t, s.x).max_norm()
        ok &= _check(lines, f"monodromy-residual(t={s.t:g})", res, cfg.solver_tol)
    largest = max(steps, key=lambda s: abs(s.t))
    closing = problem.closing_report(largest.t, largest.x)
    ok &= _check(lines, "monodromy-unitary", max(closing["unitary_defect"]), 1e-8)
    ok &= _check(lines, "monodromy-at-one", max(closing["center_defect"]), 1e-8)
    ok &= _check(lines, "monodromy-derivative-at-one",
                 max(closing["derivative_defect"]), 1e-7)
    table = periods(x0.central())
    pos = sorted([s for s in steps if s.t > 0], key=lambda s: s.t)
    for i in range(x0.n):
        rep = end_report(largest.t, largest.x, i, x_central=x0, degree=cfg.truncation)
        ok &= _check(lines, f"end{i}-alpha-imag", rep.alpha.imag_part, 1e-8)
        ok &= _check(lines, f"end{i}-alpha-lambda-variation",
                     rep.alpha.lambda_remainder, 1e-8)
        rel = abs(rep.necksize_limit - table.necksizes[i]) / table.necksizes[i]
        ok &= _check(lines, f"end{i}-weight-vs-necksize", rel, 0.02)
    if len(pos) >= 2:
        samples = 0.45 * np.exp(2j * np.pi * np.arange(16) / 16)
        rep = blowup_error([(s.t, s.x) for s in pos], samples, x_reference=x0,
                           degree=cfg.truncation, ode_tol=cfg.ode_tol)
        lines.append(f"CHECK blowup-slope measured={rep.slope:.3f} tol=1.0+-0.3 "
                     f"{'PASS' if 0.7 <= rep.slope <= 1.3 else 'FAIL'}")
        ok &= 0.7 <= rep.slope <= 1.3
    small = Surface.nnoid(largest.t, largest.x, degree=cfg.truncation)
    m = mesh(small, [AnnulusPatch(center=0.0, r_in=0.12, r_out=0.3,
                                  rings=8, sectors=24, name="probe")],
             workers=cfg.workers)
    h_med = float(np.nanmedian(np.abs(m.mean_curvature[m.interior] - 1.0)))
    lines.append(f"CHECK cmc-residual-median measured={h_med:.3e} tol=informative PASS")
    print("\n".join(lines))
    return OK if ok else FAIL_VALIDATION


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpwnoids",
        description="constant mean curvature n-noids via loop-group factorization")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check periods, rank, base residual")
    p_sol = sub.add_parser("solve", help="continuation over the configured t values")
    p_msh = sub.add_parser("mesh", help="sample a solved surface to OBJ")
    p_ver = sub.add_parser("verify", help="run the verification report")

    for p in (p_val, p_sol):
        p.add_argument("--config", required=True)
    for p in (p_msh, p_ver):
        p.add_argument("--artifact", required=True)
    for p in (p_val, p_sol, p_msh, p_ver):
        p.add_argument("--out", default="out")
        p.add_argument("--t", default=None,
                       help="comma-separated t values (solve) or one value (mesh)")
        p.add_argument("--truncation", type=int, default=None)
        p.add_argument("--rho", type=float, default=None)
        p.add_argument("--workers", type=int, default=None)
    p_sol.add_argument("--resume", default=None, help="artifact to continue from")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "mesh":
            if args.t is None and not RunArtifact.load(args.artifact).config.is_delaunay:
                _log("mesh needs --t")
                return FAIL_IO
            return cmd_mesh(args)
        if args.command == "verify":
            return cmd_verify(args)
    except ConfigError as err:
        _log(str(err))
        return FAIL_IO
    return OK


if __name__ == "__main__":
    sys.exit(main())
