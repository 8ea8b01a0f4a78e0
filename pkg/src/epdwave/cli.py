#!/usr/bin/env python3
"""
cli.py

Experiment runner: special-function validation, linear decay studies,
single-impulse inhomogeneous runs, the nonlinear Picard construction and
(mu, p) scans.

Outputs (under --out, default data/runs/):
  - validation.csv            # validate-specfun: one row per check
  - linear_decay.csv          # t, norm_Z12, norm_dZ12, energy, linf, ks_ratio, zone_a1..a3
  - decay.svg                 # norms against t with reference slopes
  - inhomogeneous.csv         # tau, t, norm_Z12, norm_dZ12
  - inhomogeneous.svg
  - convergence.csv           # iter, diff_xnorm, ratio, xnorm
  - convergence.svg
  - phase_scan.csv            # mu, p, eps, status, iters, xnorm_final
  - snapshots.bin             # lattice states of linear-decay / nonlinear runs
  - summary_<command>.json    # fits, checks and run parameters

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 divergence.
"""

from __future__ import annotations

import argparse
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from epdwave.config import COMMANDS, ExperimentConfig, pool_workers, resolve_config
from epdwave.errors import ConfigError, EpdwError, FitError
from epdwave.fields import PROFILES, CauchyData, GridSpec, SpectralState, time_lattice
from epdwave.norms import (
    MIN_FIT_SAMPLES,
    ContractionParams,
    DecayFit,
    data_norms,
    decay_fit,
    dz_norm,
    energy,
    energy_dissipation,
    ks_ratio,
    linf,
    x_norm,
    z_norm,
    zone_norms,
)
from epdwave.propagator import DampingParams, fujita_exponent, strauss_exponent
from epdwave.reporting import CsvSink, reference_slope, render_line_chart, write_summary
from epdwave.snapshots import append_snapshots
from epdwave.solver import (
    contraction_ratio,
    linear_evolve,
    linear_iterate,
    linear_trajectory,
    make_cache,
    solve_semilinear,
)
from epdwave.validation import REPORT_COLUMNS, run_specfun_suite

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3

LATTICE_SAMPLES = 40
FIT_START = 10.0
PICARD_TOL = 1e-9
MAX_PICARD_ITER = 30
CONTRACTION_PAIRS = 5
TAU_VALUES = (1.0, 2.0, 4.0, 8.0)
FIT_SLACK = 0.1
ENERGY_STEP = 1e-4          # centered difference step, relative to t
ENERGY_RATE_TOL = 0.01
ENERGY_MONOTONE_TOL = 1e-10
WEIGHTED_RATIO_MAX = 3.0
KS_RATIO_MAX = 2.0

LINEAR_COLUMNS = ["t", "norm_Z12", "norm_dZ12", "energy", "linf", "ks_ratio", "zone_a1", "zone_a2", "zone_a3"]
INHOMOGENEOUS_COLUMNS = ["tau", "t", "norm_Z12", "norm_dZ12"]
CONVERGENCE_COLUMNS = ["iter", "diff_xnorm", "ratio", "xnorm"]
SCAN_COLUMNS = ["mu", "p", "eps", "status", "iters", "xnorm_final"]


# --- Shared helpers
def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fresh_snapshots(out: Path) -> Path:
    path = out / "snapshots.bin"
    path.unlink(missing_ok=True)
    return path


def _fit_window(times: np.ndarray, hi: float, lo: float = FIT_START) -> Tuple[float, float]:
    inside = int(np.count_nonzero((times >= lo) & (times <= hi)))
    if inside >= MIN_FIT_SAMPLES:
        return lo, hi
    start = float(times[-MIN_FIT_SAMPLES]) if len(times) >= MIN_FIT_SAMPLES else float(times[0])
    logger.warning(f"fit window [{lo:g}, {hi:g}] holds {inside} samples; using [{start:g}, {hi:g}]")
    return start, hi


def _safe_fit(times: Sequence[float], values: Sequence[float], window: Tuple[float, float], label: str) -> Optional[DecayFit]:
    try:
        fit = decay_fit(times, values, window)
    except FitError as e:
        logger.warning(f"{label}: no decay fit ({e})")
        return None
    logger.info(f"{label}: exponent {fit.exponent:.4f} on [{fit.window[0]:g}, {fit.window[1]:g}] ({fit.samples} samples)")
    return fit


def _check(name: str, value: Optional[float], bound: float) -> Dict[str, Any]:
    passed = None if value is None or not math.isfinite(value) else bool(value <= bound)
    mark = "➖" if passed is None else ("✅" if passed else "❌")
    shown = "n/a" if value is None else f"{value:.4g}"
    print(f"{mark} {name}: {shown} (bound {bound:.4g})")
    return {"check": name, "value": value, "bound": bound, "passed": passed}


def _fit_summary(fit: Optional[DecayFit]) -> Optional[Dict[str, Any]]:
    if fit is None:
        return None
    return {"exponent": fit.exponent, "intercept": fit.intercept, "rms_residual": fit.rms_residual,
            "window": list(fit.window), "samples": fit.samples}


# --- validate-specfun
def cmd_validate_specfun(cfg: ExperimentConfig) -> int:
    out = _out_dir(cfg)
    report = run_specfun_suite(samples=cfg.samples, seed=cfg.seed, tol=cfg.tol)
    sink = CsvSink(out / "validation.csv", REPORT_COLUMNS)
    for row in report.to_dict(orient="records"):
        sink.write(row)
    print(report.to_string(index=False))
    print(f"💾 Wrote {sink.rows} checks → {sink.path}")

    failed = report.loc[~report["passed"], "check"].tolist()
    write_summary(out / "summary_validate-specfun.json", {"config": cfg.as_dict(), "failed": failed})
    if failed:
        print(f"❌ Failed checks: {', '.join(failed)}")
        return EXIT_VALIDATION
    print("✅ All checks passed")
    return EXIT_OK


# --- linear-decay
def _energy_rate_gap(start: SpectralState, state: SpectralState, params: DampingParams, cache) -> Optional[float]:
    """|dE/dt + (mu/t)||dt v||^2| / ((mu/t)||dt v||^2), dE/dt by a centered difference."""
    t = state.time
    rate = energy_dissipation(state, params.mu)
    if rate <= 0.0:
        return None
    h = ENERGY_STEP * t
    e_plus = energy(linear_evolve(start, t + h, params, cache))
    e_minus = energy(linear_evolve(start, t - h, params, cache))
    return abs((e_plus - e_minus) / (2.0 * h) + rate) / rate


def cmd_linear_decay(cfg: ExperimentConfig) -> int:
    command = "linear-decay"
    params = cfg.damping_params()
    cparams = cfg.contraction_params()
    grid = cfg.grid_spec(command)
    tmax = cfg.resolved_tmax(command)
    out = _out_dir(cfg)
    print(f"🌊 linear-decay: mu={params.mu:g} case={cfg.case} n={grid.n} L={grid.L:g} T={tmax:g}")

    data = CauchyData.from_case(grid, cfg.case)
    cache = make_cache(params, grid)
    start = data.initial_state(params.epsilon)
    times = time_lattice(tmax, LATTICE_SAMPLES)
    sink = CsvSink(out / "linear_decay.csv", LINEAR_COLUMNS)
    snapshots = _fresh_snapshots(out)

    columns: Dict[str, List[float]] = {c: [] for c in LINEAR_COLUMNS}
    rate_gaps: List[float] = []
    for t in times:
        state = linear_evolve(start, float(t), params, cache)
        z = z_norm(state, 1).value
        dz = dz_norm(state, params.mu)
        a1, a2, a3 = zone_norms(state)
        row = {
            "t": float(t), "norm_Z12": z, "norm_dZ12": dz, "energy": energy(state), "linf": linf(state),
            "ks_ratio": ks_ratio(state, params.mu, z=z, dz=dz), "zone_a1": a1, "zone_a2": a2, "zone_a3": a3,
        }
        sink.write(row)
        append_snapshots(snapshots, [state], params.mu)
        for c in LINEAR_COLUMNS:
            columns[c].append(row[c])
        if t >= 2.0:
            gap = _energy_rate_gap(start, state, params, cache)
            if gap is not None:
                rate_gaps.append(gap)
    print(f"💾 Wrote {sink.rows} rows → {sink.path}")

    t_arr = np.asarray(columns["t"])
    z_arr = np.asarray(columns["norm_Z12"])
    window = _fit_window(t_arr, tmax)
    fit_z = _safe_fit(t_arr, z_arr, window, "norm_Z12")
    fit_dz = _safe_fit(t_arr, columns["norm_dZ12"], window, "norm_dZ12")

    dz_bound = (-params.mu / 2.0 if cfg.case == "cancel" else -1.0) + FIT_SLACK
    checks = [
        _check("dZ12_exponent", None if fit_dz is None else fit_dz.exponent, dz_bound),
        _check("Z12_exponent", None if fit_z is None else fit_z.exponent, cparams.delta - 1.0 + FIT_SLACK),
    ]

    # weighted boundedness t^(1-delta) ||v||_{Z,1,2} from t = 2 on
    later = t_arr >= 2.0
    weighted = t_arr[later] ** (1.0 - cparams.delta) * z_arr[later]
    weighted_ratio = float(weighted.max() / weighted[0]) if weighted.size and weighted[0] > 0.0 else None
    checks.append(_check("weighted_Z12_ratio", weighted_ratio, WEIGHTED_RATIO_MAX))

    ks = np.asarray(columns["ks_ratio"])
    checks.append(_check("ks_ratio_growth", float(ks.max() / ks[0]) if ks[0] > 0.0 else None, KS_RATIO_MAX))

    e_arr = np.asarray(columns["energy"])
    increases = np.diff(e_arr) / np.maximum(e_arr[:-1], np.finfo(float).tiny)
    checks.append(_check("energy_increase", float(increases.max()) if e_arr[0] > 0.0 and increases.size else None,
                         ENERGY_MONOTONE_TOL))
    checks.append(_check("energy_rate_mismatch", max(rate_gaps) if rate_gaps else None, ENERGY_RATE_TOL))

    series = {"norm_Z12": (t_arr, z_arr), "norm_dZ12": (t_arr, columns["norm_dZ12"])}
    if z_arr[0] > 0.0:
        series["ref t^(delta-1)"] = (t_arr, reference_slope(t_arr, z_arr[0], cparams.delta - 1.0))
        series[f"ref t^({dz_bound - FIT_SLACK:g})"] = (t_arr, reference_slope(t_arr, columns["norm_dZ12"][0], dz_bound - FIT_SLACK))
    chart = render_line_chart(out / "decay.svg", series, title=f"linear decay, mu={params.mu:g}, {cfg.case}", y_label="norm")
    if chart:
        print(f"📈 Wrote {chart}")

    write_summary(out / "summary_linear-decay.json", {
        "config": cfg.as_dict(), "grid": {"n": grid.n, "L": grid.L}, "delta": cparams.delta,
        "fit_Z12": _fit_summary(fit_z), "fit_dZ12": _fit_summary(fit_dz), "checks": checks,
        "cache": cache.stats(),
    })
    return EXIT_OK


# --- inhomogeneous
def cmd_inhomogeneous(cfg: ExperimentConfig) -> int:
    """Velocity impulse eps*u1 launched at tau; w(t) = Psi1(t, tau, D) eps*u1 for t >= tau."""
    command = "inhomogeneous"
    params = cfg.damping_params()
    grid = cfg.grid_spec(command)
    tmax = cfg.resolved_tmax(command)
    out = _out_dir(cfg)
    print(f"🎯 inhomogeneous: mu={params.mu:g} case={cfg.case} n={grid.n} T={tmax:g}")

    data = CauchyData.from_case(grid, cfg.case)
    cache = make_cache(params, grid)
    zero = np.zeros((grid.n, grid.n))
    sink = CsvSink(out / "inhomogeneous.csv", INHOMOGENEOUS_COLUMNS)

    taus = [tau for tau in TAU_VALUES if tau < tmax]
    final_norms: List[float] = []
    series: Dict[str, Tuple[List[float], List[float]]] = {}
    first_run: Dict[str, List[float]] = {"t": [], "norm_dZ12": []}
    for tau in taus:
        impulse = SpectralState.from_physical(tau, zero, params.epsilon * data.u1, grid)
        ts, zs = [], []
        for t in time_lattice(tmax, LATTICE_SAMPLES, t0=tau):
            state = linear_evolve(impulse, float(t), params, cache)
            z = z_norm(state, 1).value
            dz = dz_norm(state, params.mu)
            sink.write({"tau": tau, "t": float(t), "norm_Z12": z, "norm_dZ12": dz})
            ts.append(float(t))
            zs.append(z)
            if tau == taus[0]:
                first_run["t"].append(float(t))
                first_run["norm_dZ12"].append(dz)
        final_norms.append(zs[-1])
        series[f"tau={tau:g}"] = (ts, zs)
    print(f"💾 Wrote {sink.rows} rows → {sink.path}")

    slope = None
    finals = np.asarray(final_norms)
    if len(taus) >= 2 and np.all(finals > 0.0):
        slope = float(np.polyfit(np.log(taus), np.log(finals), 1)[0])
    else:
        logger.warning("tau scaling: need two or more taus with nonzero norms; skipped")
    t_first = np.asarray(first_run["t"])
    fit_dw = _safe_fit(t_first, first_run["norm_dZ12"], _fit_window(t_first, tmax), "impulse norm_dZ12")

    checks = [
        _check("tau_slope", slope, 1.0 + FIT_SLACK),
        _check("dZ12_exponent", None if fit_dw is None else fit_dw.exponent, -1.0 + FIT_SLACK),
    ]
    chart = render_line_chart(out / "inhomogeneous.svg", series, title=f"impulse response, mu={params.mu:g}", y_label="norm_Z12")
    if chart:
        print(f"📈 Wrote {chart}")
    write_summary(out / "summary_inhomogeneous.json", {
        "config": cfg.as_dict(), "taus": taus, "norm_Z12_at_T": final_norms, "tau_slope": slope,
        "fit_dZ12": _fit_summary(fit_dw), "checks": checks,
    })
    return EXIT_OK


# --- nonlinear
def _ball_pairs(solution, other, budget: float, cparams: ContractionParams, rng: np.random.Generator, count: int):
    """Pairs (a*solution, b*other) of lattice iterates with X-norms drawn uniformly from (0.1, 1) * budget."""
    x_sol = x_norm(solution.traj, cparams)
    x_other = x_norm(other.traj, cparams)
    if x_sol == 0.0 or x_other == 0.0:
        return
    for _ in range(count):
        a, b = rng.uniform(0.1, 1.0, 2)
        yield solution.scaled(a * budget / x_sol), other.scaled(b * budget / x_other)


def _linear_constant(grid: GridSpec, case: str, params: DampingParams, times: np.ndarray, cparams: ContractionParams,
                     cache) -> float:
    """C in ||eps (Psi0 u0 + Psi1 u1)||_X <= C eps ||(u0, u1)||, read off the unit-amplitude solution for `case`."""
    data = CauchyData.from_case(grid, case)
    unit = DampingParams(mu=params.mu, p_exponent=params.p_exponent, epsilon=1.0)
    total = data_norms(data, params.mu, params.p_exponent, params.epsilon, cparams)["total"]
    if total <= 0.0:
        return math.nan
    return x_norm(linear_trajectory(data, unit, times, cache), cparams) / total


def cmd_nonlinear(cfg: ExperimentConfig) -> int:
    command = "nonlinear"
    params = cfg.damping_params()
    cparams = cfg.contraction_params()
    grid = cfg.grid_spec(command)
    tmax = cfg.resolved_tmax(command)
    tol = cfg.tol if cfg.tol is not None else PICARD_TOL
    out = _out_dir(cfg)
    print(f"🔁 nonlinear: mu={params.mu:g} p={params.p_exponent:g} eps={params.epsilon:g} "
          f"eps1={cparams.eps1:.4g} n={grid.n} T={tmax:g}")

    data = CauchyData.from_case(grid, cfg.case)
    cache = make_cache(params, grid)
    sink = CsvSink(out / "convergence.csv", CONVERGENCE_COLUMNS)

    def on_iteration(k: int, diff: float, ratio: float, xnorm: float) -> None:
        sink.write({"iter": k, "diff_xnorm": diff, "ratio": ratio, "xnorm": xnorm})

    traj, report = solve_semilinear(
        data, params, tmax, tol, MAX_PICARD_ITER, samples=LATTICE_SAMPLES,
        cparams=cparams, cache=cache, on_iteration=on_iteration,
    )
    print(f"💾 Wrote {sink.rows} rows → {sink.path}")
    append_snapshots(_fresh_snapshots(out), traj.states, params.mu)

    # M = 3 C ||(u0, u1)||; C comes from the other profile so this run's own data cannot set it
    terms = data_norms(data, params.mu, params.p_exponent, params.epsilon, cparams)
    other_case = next(c for c in PROFILES if c != cfg.case)
    fitted_c = _linear_constant(grid, other_case, params, traj.times, cparams, cache)
    own_c = _linear_constant(grid, cfg.case, params, traj.times, cparams, cache)
    budget = 3.0 * fitted_c * terms["total"] * params.epsilon

    ratios: List[float] = []
    if report.converged and params.epsilon > 0.0 and report.iterate is not None:
        other = linear_iterate(CauchyData.from_case(grid, other_case), params, traj.times, report.refine, cache)
        rng = np.random.default_rng(cfg.seed)
        for u, v in _ball_pairs(report.iterate, other, budget, cparams, rng, CONTRACTION_PAIRS):
            ratios.append(contraction_ratio(u, v, data, params, cparams, cache=cache))
        logger.info(f"contraction ratios on {len(ratios)} pairs: {[f'{r:.3g}' for r in ratios]}")

    checks = [
        _check("picard_max_ratio", report.max_ratio if report.converged and math.isfinite(report.max_ratio) else None, 0.5),
        _check("pair_contraction", max(ratios) if ratios else None, 0.5),
        # sanity bound: passes whenever the nonlinear part is small and C changes by < 3x between profiles
        _check("xnorm_sanity_bound", report.final_xnorm / budget if budget > 0.0 else None, 1.0),
    ]
    if len(report.diff_xnorms) >= 1:
        iters = list(range(1, len(report.diff_xnorms) + 1))
        chart = render_line_chart(out / "convergence.svg", {"diff_xnorm": (iters, report.diff_xnorms)},
                                  title="Picard differences", log_x=False, x_label="iteration")
        if chart:
            print(f"📈 Wrote {chart}")

    write_summary(out / "summary_nonlinear.json", {
        "config": cfg.as_dict(), "status": report.status, "iterations": report.iterations,
        "message": report.message, "ratios": report.ratios, "final_xnorm": report.final_xnorm,
        "residual": report.residual, "data_norms": terms, "fitted_C": fitted_c, "fitted_C_case": other_case,
        "own_C": own_c, "budget": budget, "quadrature_estimate": report.quadrature_estimate,
        "quadrature_refine": report.refine,
        "pair_ratios": ratios, "checks": checks, "eps1": cparams.eps1, "delta": cparams.delta,
    })
    if not report.converged:
        print(f"❌ Picard iteration diverged: {report.message}")
        return EXIT_DIVERGED
    print(f"✅ Converged in {report.iterations} iterations; X-norm {report.final_xnorm:.4e}, residual {report.residual:.2e}")
    return EXIT_OK


# --- phase-scan
def _scan_cell(job: Dict[str, Any]) -> Dict[str, Any]:
    """One (mu, p) cell; EpdwError is recorded as status 'error'."""
    mu, p, eps = job["mu"], job["p"], job["eps"]
    row = {"mu": mu, "p": p, "eps": eps, "status": "error", "iters": 0, "xnorm_final": math.nan}
    try:
        params = DampingParams.exploratory(mu, p, eps)
        grid = GridSpec(n=job["n"], domain_half_width=job["L"])
        data = CauchyData.from_case(grid, job["case"])
        cparams = ContractionParams(eps1=job["eps1"]) if job["eps1"] is not None else ContractionParams.default_for(p)
        _, report = solve_semilinear(data, params, job["tmax"], job["tol"], MAX_PICARD_ITER,
                                     samples=LATTICE_SAMPLES, cparams=cparams)
        row.update(status=report.status, iters=report.iterations, xnorm_final=report.final_xnorm)
    except EpdwError as e:
        logger.warning(f"cell mu={mu:g} p={p:g}: {type(e).__name__}: {e}")
    return row


def _scan_rows(jobs: List[Dict[str, Any]], workers: int) -> Iterable[Dict[str, Any]]:
    if workers <= 1:
        yield from map(_scan_cell, jobs)
        return
    pool = ProcessPoolExecutor(max_workers=workers)
    try:
        yield from pool.map(_scan_cell, jobs)
    finally:
        pool.shutdown()


def cmd_phase_scan(cfg: ExperimentConfig) -> int:
    command = "phase-scan"
    grid = cfg.grid_spec(command)
    tmax = cfg.resolved_tmax(command)
    out = _out_dir(cfg)
    workers = pool_workers()
    tol = cfg.tol if cfg.tol is not None else PICARD_TOL

    jobs = [
        {"mu": float(mu), "p": float(p), "eps": cfg.eps, "eps1": cfg.eps1, "n": grid.n, "L": grid.L,
         "tmax": tmax, "tol": tol, "case": cfg.case}
        for mu in cfg.mu_values()
        for p in cfg.p_values()
    ]
    p_fujita = fujita_exponent(2.0)
    for job in jobs:
        p_strauss = strauss_exponent(2.0 + job["mu"])
        logger.info(f"cell mu={job['mu']:g} p={job['p']:g}: above p_f(2)={p_fujita:g}: {job['p'] > p_fujita}; "
                    f"above p_s(2+mu)={p_strauss:.4g}: {job['p'] > p_strauss}")
    print(f"🗺️ phase-scan: {len(jobs)} cells, eps={cfg.eps:g}, n={grid.n}, T={tmax:g}, workers={workers}")

    sink = CsvSink(out / "phase_scan.csv", SCAN_COLUMNS)
    counts: Dict[str, int] = {}
    for row in _scan_rows(jobs, workers):
        sink.write(row)
        counts[row["status"]] = counts.get(row["status"], 0) + 1
        print(f"   mu={row['mu']:g} p={row['p']:g}: {row['status']} ({row['iters']} iterations)")
    print(f"💾 Wrote {sink.rows} cells → {sink.path}")
    write_summary(out / "summary_phase-scan.json", {"config": cfg.as_dict(), "counts": counts, "workers": workers})
    return EXIT_OK


COMMAND_HELP = {
    "validate-specfun": "Check Bessel/Hankel evaluation and the propagator against identities and the RK oracle",
    "linear-decay": "Evolve bump data linearly and fit decay exponents",
    "inhomogeneous": "Impulse responses launched at several source times",
    "nonlinear": "Picard iteration for the semilinear problem",
    "phase-scan": "Picard outcome over a (mu, p) grid",
}

HANDLERS: Dict[str, Callable[[ExperimentConfig], int]] = {
    "validate-specfun": cmd_validate_specfun,
    "linear-decay": cmd_linear_decay,
    "inhomogeneous": cmd_inhomogeneous,
    "nonlinear": cmd_nonlinear,
    "phase-scan": cmd_phase_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mu", type=float, help="Damping coefficient, 2 < mu < 3")
    common.add_argument("--p", type=float, help="Nonlinearity power (> 2; > 1 in phase-scan)")
    common.add_argument("--eps", type=float, help="Data amplitude epsilon >= 0")
    common.add_argument("--eps1", type=float, help="Weight exponent eps1 in (0, 1) (default: derived from p)")
    common.add_argument("--grid", type=int, help="Grid points per side, power of two >= 64")
    common.add_argument("--domain", type=float, help="Half-width L of the periodic box (default: 2(1+T))")
    common.add_argument("--tmax", type=float, help="Final time T > 1")
    common.add_argument("--tol", type=float, help="Check threshold (validate-specfun) or Picard tolerance")
    common.add_argument("--case", type=str, help=f"Initial data profile: {', '.join(PROFILES)}")
    common.add_argument("--samples", type=int, help="Random samples per validation check")
    common.add_argument("--seed", type=int, help="Seed for randomized samples")
    common.add_argument("--out", type=str, help="Output directory (default: data/runs)")
    common.add_argument("--mu-range", dest="mu_range", type=str, help="phase-scan mu grid a:b:n")
    common.add_argument("--p-range", dest="p_range", type=str, help="phase-scan p grid a:b:n")

    parser = argparse.ArgumentParser(description="Damped wave equation experiments (Euler-Poisson-Darboux damping)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK

    command = args.command
    values = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = resolve_config(values)
        cfg.validate(command)
    except ConfigError as e:
        logger.error(f"config error: {e}")
        print(f"⚠️ {e}")
        return EXIT_CONFIG

    try:
        return HANDLERS[command](cfg)
    except ConfigError as e:
        logger.error(f"config error: {e}")
        print(f"⚠️ {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
