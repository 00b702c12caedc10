"""Configuration-driven experiment driver.

Subcommands reproduce the benchmark data as CSV/JSON: ``solve`` (the
second-time-level tested system), ``sweep-omega``, ``spectrum``, ``evolve``
(conservation traces), and ``bench`` (solver comparison).  All outputs are
deterministic for a fixed config and seed except wall-time columns.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .blocksys import BlockSystem, assemble_rhs, complex_to_block, dense_R
from .krylov import arnoldi_ritz, gmres
from .licd import (
    GridSpec,
    SolverConfig,
    evolve,
    startup_step,
    _lagged_diag,
)
from .nass_iter import ExtentMethod, lambda_extents, sigma_bound
from .precond import apply_cnas, build_cnas, build_nass, dense_f_cnas, dense_f_nass
from .structured import CirculantKind

__all__ = ["main", "ExperimentConfig", "load_config", "benchmark_systems",
           "initial_data", "ConfigError", "SolverFailure"]

_DENSE_SPECTRUM_CAP = 1600


class ConfigError(ValueError):
    """Invalid or missing configuration (exit code 2)."""


class SolverFailure(RuntimeError):
    """A requested solve did not converge (exit code 3)."""


@dataclass
class ExperimentConfig:
    model: str                      # "dnls" | "cnls"
    grid: GridSpec
    solver: SolverConfig
    sweep: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)
    evolve: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)   # verbatim JSON for the manifest


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    model = raw.get("model")
    if model not in ("dnls", "cnls"):
        raise ConfigError(f"field 'model' must be 'dnls' or 'cnls', got {model!r}")
    if "grid" not in raw:
        raise ConfigError("missing required section 'grid'")
    try:
        grid = GridSpec(**raw["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'grid' section: {exc}")
    if model == "cnls" and grid.beta < 0:
        raise ConfigError("cnls model needs beta >= 0")

    sol = dict(raw.get("solver", {}))
    if "circulant" in sol:
        try:
            sol["circulant"] = CirculantKind(sol["circulant"])
        except ValueError:
            raise ConfigError(f"unknown circulant kind {sol['circulant']!r}")
    try:
        solver = SolverConfig(**sol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid 'solver' section: {exc}")
    if not (0.0 < solver.tol < 1.0):
        raise ConfigError(f"field 'solver.tol' must lie in (0, 1), got {solver.tol}")
    if isinstance(solver.omega, str) and solver.omega != "auto":
        raise ConfigError(f"field 'solver.omega' must be a number or 'auto'")

    sweep = dict(raw.get("sweep", {}))
    if sweep and sweep.get("step", 0.01) <= 0:
        raise ConfigError("field 'sweep.step' must be positive")

    return ExperimentConfig(model=model, grid=grid, solver=solver,
                            sweep=sweep, spectrum=dict(raw.get("spectrum", {})),
                            evolve=dict(raw.get("evolve", {})),
                            bench=dict(raw.get("bench", {})), raw=raw)


def initial_data(model: str, grid: GridSpec):
    """Soliton initial data on the interior nodes for each model."""
    x = grid.nodes
    if model == "dnls":
        return 1.0 / np.cosh(x) * np.exp(2j * x), None
    u0 = 1.0 / np.cosh(x + 5.0) * np.exp(3j * x)
    v0 = 1.0 / np.cosh(x - 5.0) * np.exp(-3j * x)
    return u0, v0


def benchmark_systems(grid: GridSpec, model: str,
                      startup_tol: float = 1e-13) -> list[BlockSystem]:
    """The tested block systems at the second time level (startup step first)."""
    u0, v0 = initial_data(model, grid)
    startup = SolverConfig(tol=startup_tol, omega=0.3)
    state, _ = startup_step(u0, v0, grid, solver_config=startup)
    T = grid.toeplitz()
    pairs = [(state.u_curr, state.v_curr, state.u_prev)]
    if state.coupled:
        pairs.append((state.v_curr, state.u_curr, state.v_prev))
    systems = []
    for own, other, prev in pairs:
        D = _lagged_diag(grid, own, other)
        b = assemble_rhs(prev, T, D)
        systems.append(BlockSystem(T=T, D=D, f=complex_to_block(b)))
    return systems


# ---------------------------------------------------------------------------
# output plumbing

def _config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.raw, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_csv(path: Path, cfg_hash: str, header: list[str], rows: list[list]):
    lines = [f"# config_sha256={cfg_hash} version={__version__}",
             ",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else
                              (f"{v:.17g}" if isinstance(v, float) else str(v))
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig,
                    seed: int, threads: int, outputs: list[str],
                    extra: dict | None = None, wall: float = 0.0):
    manifest = {
        "command": command,
        "config_sha256": _config_hash(cfg),
        "config": cfg.raw,
        "version": __version__,
        "seed": seed,
        "threads": threads,
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    # wall time last so the deterministic prefix is contiguous
    manifest["wall_time_s"] = wall
    (out / "run.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _resolved_omega(cfg: ExperimentConfig, sys_T):
    if cfg.solver.omega == "auto":
        from .nass_iter import optimal_omega
        _, lmax = lambda_extents(sys_T, ExtentMethod.POWER, alpha=cfg.grid.alpha)
        return optimal_omega(lmax)
    return float(cfg.solver.omega)


def _solve_system(sys: BlockSystem, kind: str, omega: float, cfg: ExperimentConfig):
    """Solve one benchmark block system, returning (iterations, report)."""
    tol, max_it = cfg.solver.tol, cfg.solver.max_it
    if kind == "gmres":
        return gmres(sys.apply, sys.f, tol=tol, max_it=max_it)
    if kind == "cnas-gmres":
        P = build_cnas(sys.T, sys.D, omega, kind=cfg.solver.circulant)
        return gmres(sys.apply, sys.f, apply_M=P.apply, tol=tol, max_it=max_it)
    if kind == "nass-gmres":
        P = build_nass(sys.T, sys.D, omega, kind=cfg.solver.circulant)
        return gmres(sys.apply, sys.f, apply_M=P.apply, tol=tol, max_it=max_it)
    if kind == "nass-iter":
        from .nass_iter import NassParams, nass_solve
        from .krylov import SolveReport
        t0 = time.perf_counter()
        x, history = nass_solve(sys, NassParams(omega=omega, tol=tol,
                                                max_iters=max_it))
        return x, SolveReport(len(history) - 1, True, history[-1], history,
                              time.perf_counter() - t0)
    if kind == "dense":
        from .krylov import SolveReport
        t0 = time.perf_counter()
        R = dense_R(sys.T, sys.D)
        x = np.linalg.solve(R, sys.f)
        relres = float(np.linalg.norm(sys.f - R @ x)
                       / max(np.linalg.norm(sys.f), 1e-300))
        return x, SolveReport(0, True, relres, [relres],
                              time.perf_counter() - t0)
    raise ConfigError(f"unknown solver kind {kind!r}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> int:
    t0 = time.perf_counter()
    systems = benchmark_systems(cfg.grid, cfg.model)
    omega = _resolved_omega(cfg, systems[0].T)
    rows, failed = [], False
    for name, sys in zip(("u", "v"), systems):
        _, rep = _solve_system(sys, cfg.solver.kind, omega, cfg)
        failed = failed or not rep.converged
        rows.append([name, cfg.solver.kind, cfg.grid.M, cfg.grid.alpha, omega,
                     rep.iterations, rep.converged, rep.final_relres,
                     rep.wall_time * 1e3])
    _write_csv(out / "solve.csv", _config_hash(cfg),
               ["field", "solver", "M", "alpha", "omega", "iterations",
                "converged", "final_relres", "wall_ms"], rows)
    _write_manifest(out, "solve", cfg, seed, threads, ["solve.csv"],
                    extra={"total_iterations": sum(r[5] for r in rows)},
                    wall=time.perf_counter() - t0)
    if failed:
        raise SolverFailure("solver did not converge on the tested system")
    return 0


def cmd_sweep_omega(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> int:
    t0 = time.perf_counter()
    lo = float(cfg.sweep.get("lo", 0.01))
    hi = float(cfg.sweep.get("hi", 4.0))
    step = float(cfg.sweep.get("step", 0.01))
    if not (0.0 < lo <= hi):
        raise ConfigError("sweep bounds must satisfy 0 < lo <= hi")
    omegas = np.arange(lo, hi + 0.5 * step, step)
    systems = benchmark_systems(cfg.grid, cfg.model)

    def run(w: float):
        total, ok, wall = 0, True, 0.0
        for sys in systems:
            _, rep = _solve_system(sys, cfg.solver.kind, w, cfg)
            total += rep.iterations
            ok = ok and rep.converged
            wall += rep.wall_time
        return total, ok, wall * 1e3

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, omegas))
    else:
        results = [run(w) for w in omegas]

    rows = [[float(w), it, ok, wall] for w, (it, ok, wall) in zip(omegas, results)]
    _write_csv(out / "sweep.csv", _config_hash(cfg),
               ["omega", "it_total", "converged", "wall_ms"], rows)
    best = min(it for it, ok, _ in results if ok) if any(r[1] for r in results) \
        else None
    argmin = [float(w) for w, (it, ok, _) in zip(omegas, results)
              if ok and it == best]
    _write_manifest(out, "sweep-omega", cfg, seed, threads, ["sweep.csv"],
                    extra={"min_it": best,
                           "argmin_omega_set": argmin,
                           "argmin_omega_interval":
                               [min(argmin), max(argmin)] if argmin else None},
                    wall=time.perf_counter() - t0)
    return 0


def cmd_spectrum(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> int:
    t0 = time.perf_counter()
    mode = cfg.spectrum.get("mode", "dense")
    which = cfg.spectrum.get("matrices", ["R", "nass", "cnas"])
    M = cfg.grid.M
    if mode == "dense" and M > _DENSE_SPECTRUM_CAP:
        raise ConfigError(
            f"dense spectrum mode capped at M={_DENSE_SPECTRUM_CAP}, got {M}")
    if mode not in ("dense", "ritz"):
        raise ConfigError(f"field 'spectrum.mode' must be 'dense' or 'ritz'")
    systems = benchmark_systems(cfg.grid, cfg.model)
    sys0 = systems[0]
    omega = _resolved_omega(cfg, sys0.T)

    rows = []
    if mode == "dense":
        R = dense_R(sys0.T, sys0.D)
        mats = {"R": R}
        if "nass" in which:
            F = dense_f_nass(sys0.T, sys0.D, omega, scaled=True)
            mats["nass"] = np.linalg.solve(F, R)
        if "cnas" in which:
            from .precond import default_circulant
            C = default_circulant(sys0.T, cfg.solver.circulant)
            F = dense_f_cnas(C, sys0.D, omega, scaled=True)
            mats["cnas"] = np.linalg.solve(F, R)
        for name in which:
            for lam in np.sort_complex(np.linalg.eigvals(mats[name])):
                rows.append([name, float(lam.real), float(lam.imag)])
        eigs_T = np.linalg.eigvalsh(sys0.T.dense())
        sigma = sigma_bound(omega, eigs_T[eigs_T > 0])
    else:
        m = int(cfg.spectrum.get("arnoldi_steps", 200))
        ops = {"R": sys0.apply}
        if "nass" in which:
            P = build_nass(sys0.T, sys0.D, omega)
            ops["nass"] = lambda v, P=P: apply_prec_then_R(sys0, P.apply, v, omega)
        if "cnas" in which:
            P = build_cnas(sys0.T, sys0.D, omega, kind=cfg.solver.circulant)
            ops["cnas"] = lambda v, P=P: apply_prec_then_R(sys0, P.apply, v, omega)
        for name in which:
            ritz = arnoldi_ritz(ops[name], 2 * M, min(m, 2 * M), seed=seed)
            for lam in np.sort_complex(ritz):
                rows.append([name, float(lam.real), float(lam.imag)])
        _, lmax = lambda_extents(sys0.T, ExtentMethod.POWER, alpha=cfg.grid.alpha)
        sigma = sigma_bound(omega, [lmax])

    rows.append(["circle_center", 1.0, 0.0])
    rows.append(["circle_radius", float(sigma), 0.0])
    _write_csv(out / "spectrum.csv", _config_hash(cfg),
               ["matrix", "re", "im"], rows)
    _write_manifest(out, "spectrum", cfg, seed, threads, ["spectrum.csv"],
                    extra={"omega": omega, "sigma": float(sigma), "mode": mode},
                    wall=time.perf_counter() - t0)
    return 0


def apply_prec_then_R(sys: BlockSystem, apply_M, v: np.ndarray, omega: float
                      ) -> np.ndarray:
    """Operator v -> (2 omega) R F^{-1} v whose spectrum matches the scaled
    preconditioned matrix (right-preconditioned form, same eigenvalues)."""
    return 2.0 * omega * sys.apply(apply_M(v))


def cmd_evolve(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> int:
    t0 = time.perf_counter()
    u0, v0 = initial_data(cfg.model, cfg.grid)
    stride = int(cfg.evolve.get("snapshot_stride", 0))
    startup_tol = float(cfg.evolve.get("startup_tol", 1e-13))
    startup = SolverConfig(tol=startup_tol, omega=0.3)
    try:
        result = evolve(cfg.grid, u0, v0, solver_config=cfg.solver,
                        startup_config=startup, snapshot_stride=stride)
    except RuntimeError as exc:
        raise SolverFailure(str(exc))

    cons = result.conservation
    rows = []
    for k in range(len(cons.t)):
        reps = result.reports[k]
        it_u = sum(r.iterations for r in reps[0::2]) if k == 0 \
            else reps[0].iterations
        if cfg.model == "cnls":
            it_v = sum(r.iterations for r in reps[1::2]) if k == 0 \
                else reps[1].iterations
        else:
            it_v = None
        wall = sum(r.wall_time for r in reps) * 1e3
        rows.append([k + 1, float(cons.t[k]), float(cons.Q1[k]),
                     None if cons.Q2 is None else float(cons.Q2[k]),
                     float(cons.E[k]), float(cons.rel_err_Q1[k]),
                     None if cons.rel_err_Q2 is None
                     else float(cons.rel_err_Q2[k]),
                     float(cons.rel_err_E[k]), it_u, it_v, wall])
    _write_csv(out / "conservation.csv", _config_hash(cfg),
               ["n", "t", "Q1", "Q2", "E", "relerr_Q1", "relerr_Q2",
                "relerr_E", "IT_u", "IT_v", "wall_ms"], rows)
    outputs = ["conservation.csv"]

    if stride:
        snap_rows = []
        for n, t, u, v in result.snapshots:
            for j in range(len(u)):
                snap_rows.append([n, float(t), j + 1,
                                  float(u[j].real), float(u[j].imag),
                                  float(abs(u[j])),
                                  None if v is None else float(v[j].real),
                                  None if v is None else float(v[j].imag),
                                  None if v is None else float(abs(v[j]))])
        _write_csv(out / "snapshots.csv", _config_hash(cfg),
                   ["n", "t", "j", "re_u", "im_u", "abs_u",
                    "re_v", "im_v", "abs_v"], snap_rows)
        outputs.append("snapshots.csv")

    _write_manifest(out, "evolve", cfg, seed, threads, outputs,
                    extra={"max_relerr_Q1": float(np.max(cons.rel_err_Q1)),
                           "max_relerr_Q2":
                               None if cons.rel_err_Q2 is None
                               else float(np.max(cons.rel_err_Q2)),
                           "max_relerr_E": float(np.max(cons.rel_err_E))},
                    wall=time.perf_counter() - t0)
    return 0


def cmd_bench(cfg: ExperimentConfig, out: Path, seed: int, threads: int) -> int:
    t0 = time.perf_counter()
    solvers = cfg.bench.get("solvers", ["gmres", "cnas-gmres"])
    m_list = cfg.bench.get("M", [cfg.grid.M])
    dense_cap = int(cfg.bench.get("dense_cap", 6400))
    rows, skipped = [], []
    for M in m_list:
        grid = dataclasses.replace(cfg.grid, M=int(M))
        systems = benchmark_systems(grid, cfg.model)
        omega = _resolved_omega(cfg, systems[0].T)
        for kind in solvers:
            if kind == "dense" and grid.M > dense_cap:
                skipped.append({"solver": kind, "M": grid.M,
                                "reason": f"dense capped at M<={dense_cap}"})
                continue
            total, ok, wall = 0, True, 0.0
            error = None
            try:
                for sys in systems:
                    _, rep = _solve_system(sys, kind, omega, cfg)
                    total += rep.iterations
                    ok = ok and rep.converged
                    wall += rep.wall_time
            except RuntimeError as exc:   # per-row failure capture
                ok, error = False, str(exc)
            rows.append([kind, grid.M, grid.alpha, total, ok,
                         wall * 1e3, error])
    _write_csv(out / "bench.csv", _config_hash(cfg),
               ["solver", "M", "alpha", "it_total", "converged",
                "wall_ms", "error"], rows)
    _write_manifest(out, "bench", cfg, seed, threads, ["bench.csv"],
                    extra={"skipped": skipped},
                    wall=time.perf_counter() - t0)
    return 0


# ---------------------------------------------------------------------------

_COMMANDS = {
    "solve": cmd_solve,
    "sweep-omega": cmd_sweep_omega,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "bench": cmd_bench,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracnls",
        description="Structured solvers for fractional NLS time stepping: "
                    "experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for independent rows")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return _COMMANDS[args.command](cfg, out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
