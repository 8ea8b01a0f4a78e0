"""
solver.py

Field-level evolution on the periodic grid.

  - linear_evolve     : (vhat, vthat) -> S(t_new, t) (vhat, vthat), per mode
  - duhamel           : w(t) = int_1^t Psi1(t, tau, D) F(tau) dtau and its time derivative
  - apply_nonlinearity: |u|^p with 2x padding
  - picard_map        : N u = eps (Psi0 u0 + Psi1 u1) + int_1^t Psi1 |u|^p dtau on a time lattice
  - solve_semilinear  : u <- N u from the linear solution until the sup-in-time Z-norm update is below tol
  - contraction_ratio : ||N u - N v||_X / ||u - v||_X for a pair of lattice trajectories

Duhamel integrals are taken in s = log(tau), where the geometric lattice is uniform.
Sampled forcing is integrated panel by panel: the exact propagator carries the
running integral from one quadrature node to the next, so the cost grows
linearly with the node count. The iteration runs on `refine` quadrature nodes
per lattice interval and reports states on the lattice only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from epdwave.errors import GridMismatchError, PropagatorDomainError, QuadratureError
from epdwave.fields import (
    CauchyData,
    GridSpec,
    SpectralState,
    Trajectory,
    dealiased_power_hat,
    refine_lattice,
    time_lattice,
)
from epdwave.norms import ContractionParams, MixedNormSpec, L2, x_norm, x_norm_terms, x_weighted, z_norm
from epdwave.propagator import DampingParams, RadialCache

logger = logging.getLogger(__name__)

PhysicalForcing = Callable[[float], np.ndarray]
Pair = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class QuadSpec:
    tol: float = 1e-7
    nodes: int = 9          # initial node count for callable forcing
    max_levels: int = 8
    strict: bool = True
    refine: int = 4         # quadrature nodes per lattice interval in the Picard iteration
    max_refine: int = 8

    def __post_init__(self) -> None:
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError(f"QuadSpec.nodes must be odd and >= 3; got {self.nodes!r}")
        if not (self.tol > 0.0):
            raise ValueError(f"QuadSpec.tol must be > 0; got {self.tol!r}")
        if self.refine < 1 or self.max_refine < self.refine:
            raise ValueError(f"QuadSpec needs 1 <= refine <= max_refine; got {self.refine!r}, {self.max_refine!r}")


@dataclass(frozen=True)
class SampledForcing:
    """Spectra of F at quadrature nodes uniform in log t (the stored |u|^p snapshots)."""

    times: np.ndarray
    spectra: Tuple[np.ndarray, ...]


@dataclass(frozen=True)
class LatticeIterate:
    """
    A trajectory on the output lattice together with |u|^p at every quadrature
    node. Lattice time k is quadrature node k * stride.
    """

    traj: Trajectory
    forcing: SampledForcing
    stride: int
    p_exponent: float

    def __post_init__(self) -> None:
        if len(self.forcing.times) != (len(self.traj) - 1) * self.stride + 1:
            raise GridMismatchError(
                f"{len(self.traj)} lattice states do not fit {len(self.forcing.times)} nodes at stride {self.stride}"
            )

    @classmethod
    def from_trajectory(cls, traj: Trajectory, p: float) -> "LatticeIterate":
        """Use the trajectory's own lattice as the quadrature nodes."""
        spectra = tuple(dealiased_power_hat(st.displacement(), p) for st in traj.states)
        forcing = SampledForcing(times=np.asarray(traj.times, dtype=float), spectra=spectra)
        return cls(traj=traj, forcing=forcing, stride=1, p_exponent=p)

    def scaled(self, c: float) -> "LatticeIterate":
        factor = abs(c) ** self.p_exponent
        forcing = replace(self.forcing, spectra=tuple(factor * f for f in self.forcing.spectra))
        return replace(self, traj=self.traj.scaled(c), forcing=forcing)


@dataclass(frozen=True)
class DuhamelResult:
    state: SpectralState
    error_estimate: float
    history: Tuple[float, ...]
    nodes: int


@dataclass
class ConvergenceReport:
    status: str = "running"           # converged | diverged
    iterations: int = 0
    diff_xnorms: List[float] = field(default_factory=list)
    diff_sup: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    xnorms: List[float] = field(default_factory=list)
    final_xnorm: float = math.nan
    residual: float = math.nan
    quadrature_estimate: float = 0.0  # worst over all iterations
    refine: int = 1
    message: str = ""
    iterate: Optional[LatticeIterate] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def max_ratio(self) -> float:
        finite = [r for r in self.ratios if math.isfinite(r)]
        return max(finite) if finite else math.nan


def make_cache(params: DampingParams, grid: GridSpec, max_entries: int = 2048) -> RadialCache:
    return RadialCache(params, grid.kmag, max_entries=max_entries, key=grid)


def _cache_for(params: DampingParams, grid: GridSpec, cache: Optional[RadialCache]) -> RadialCache:
    if cache is None:
        return make_cache(params, grid)
    if cache.key != grid:
        raise GridMismatchError(f"radial cache built for {cache.key}, state lives on {grid}")
    if cache.params.mu != params.mu:
        raise GridMismatchError(f"radial cache built for mu={cache.params.mu}, asked for mu={params.mu}")
    return cache


# ---- Linear evolution
def linear_evolve(
    state: SpectralState,
    t_new: float,
    params: DampingParams,
    cache: Optional[RadialCache] = None,
) -> SpectralState:
    if t_new < state.time:
        raise PropagatorDomainError(f"t_new={t_new!r} is before the state time {state.time!r}")
    cache = _cache_for(params, state.grid, cache)
    if t_new == state.time:
        return SpectralState(time=state.time, vhat=state.vhat.copy(), vthat=state.vthat.copy(), grid=state.grid)
    p00, p01, p10, p11 = cache.matrix(t_new, state.time)
    return SpectralState(
        time=float(t_new),
        vhat=p00 * state.vhat + p01 * state.vthat,
        vthat=p10 * state.vhat + p11 * state.vthat,
        grid=state.grid,
    )


def linear_trajectory(
    data: CauchyData,
    params: DampingParams,
    times: np.ndarray,
    cache: Optional[RadialCache] = None,
) -> Trajectory:
    """eps-scaled linear solution on the lattice, each time evolved directly from t = 1."""
    cache = _cache_for(params, data.grid, cache)
    start = data.initial_state(params.epsilon)
    states = tuple(linear_evolve(start, float(t), params, cache) for t in times)
    return Trajectory(times=np.asarray(times, dtype=float), states=states, mu=params.mu)


def linear_iterate(
    data: CauchyData,
    params: DampingParams,
    times: np.ndarray,
    refine: int = 1,
    cache: Optional[RadialCache] = None,
) -> LatticeIterate:
    """The linear solution on `times` with |u|^p at `refine` quadrature nodes per interval."""
    cache = _cache_for(params, data.grid, cache)
    nodes = refine_lattice(times, refine)
    start = data.initial_state(params.epsilon)
    spectra = tuple(
        dealiased_power_hat(linear_evolve(start, float(t), params, cache).displacement(), params.p_exponent)
        for t in nodes
    )
    return LatticeIterate(
        traj=linear_trajectory(data, params, nodes[::refine], cache),
        forcing=SampledForcing(times=nodes, spectra=spectra),
        stride=refine,
        p_exponent=params.p_exponent,
    )


# ---- Duhamel
def _zero_result(t: float, grid: GridSpec) -> DuhamelResult:
    return DuhamelResult(state=SpectralState.zeros(t, grid), error_estimate=0.0, history=(0.0,), nodes=1)


def _relative_gap(fine: Sequence[np.ndarray], coarse: Sequence[np.ndarray]) -> float:
    num = sum(float(np.linalg.norm(a - b)) for a, b in zip(fine, coarse))
    den = sum(float(np.linalg.norm(a)) for a in fine)
    return 0.0 if den == 0.0 else num / den / 15.0


def _duhamel_adaptive(
    forcing: PhysicalForcing,
    t: float,
    quad: QuadSpec,
    grid: GridSpec,
    cache: RadialCache,
) -> DuhamelResult:
    # trapezoid sums on nested grids in s; Simpson = (4 T_h - T_2h) / 3
    b = math.log(t)

    def integrand(s: float) -> Tuple[np.ndarray, np.ndarray]:
        tau = min(math.exp(s), t)
        fhat = np.fft.fft2(forcing(tau))
        psi1, dpsi1 = cache.velocity(t, tau)
        return tau * psi1 * fhat, tau * dpsi1 * fhat

    intervals = quad.nodes - 1
    h = b / intervals
    values = [integrand(i * h) for i in range(intervals)] + [integrand(b)]
    coarse_h = 2.0 * h
    trap_coarse = tuple(
        coarse_h * (0.5 * values[0][c] + sum(values[i][c] for i in range(2, intervals, 2)) + 0.5 * values[-1][c])
        for c in (0, 1)
    )
    trap = tuple(h * (0.5 * values[0][c] + sum(values[i][c] for i in range(1, intervals)) + 0.5 * values[-1][c]) for c in (0, 1))
    simpson = tuple((4.0 * f - g) / 3.0 for f, g in zip(trap, trap_coarse))
    del values

    history: List[float] = []
    for level in range(1, quad.max_levels + 1):
        h *= 0.5
        intervals *= 2
        mids = [integrand((2 * i + 1) * h) for i in range(intervals // 2)]
        new_trap = tuple(0.5 * trap[c] + h * sum(m[c] for m in mids) for c in (0, 1))
        new_simpson = tuple((4.0 * f - g) / 3.0 for f, g in zip(new_trap, trap))
        est = _relative_gap(new_simpson, simpson)
        history.append(est)
        trap, simpson_prev, simpson = new_trap, simpson, new_simpson
        if est <= quad.tol:
            value = simpson[0] + (simpson[0] - simpson_prev[0]) / 15.0
            deriv = simpson[1] + (simpson[1] - simpson_prev[1]) / 15.0
            state = SpectralState(time=float(t), vhat=value, vthat=deriv, grid=grid)
            return DuhamelResult(state=state, error_estimate=est, history=tuple(history), nodes=intervals + 1)

    if quad.strict:
        raise QuadratureError(
            f"Duhamel quadrature at t={t:g} did not reach tol={quad.tol:g} in {quad.max_levels} levels",
            history,
        )
    logger.warning(f"Duhamel at t={t:g}: estimate {history[-1]:.2e} above tol {quad.tol:g}; keeping last level")
    state = SpectralState(time=float(t), vhat=simpson[0], vthat=simpson[1], grid=grid)
    return DuhamelResult(state=state, error_estimate=history[-1], history=tuple(history), nodes=intervals + 1)


def _log_step(times: np.ndarray) -> float:
    spacing = np.diff(np.log(times))
    h = float(spacing.mean())
    if not np.allclose(spacing, h, rtol=1e-9, atol=0.0):
        raise ValueError("sampled Duhamel forcing must sit on a geometric lattice")
    return h


def _kick(t: float, tau: float, fhat: np.ndarray, cache: RadialCache):
    """tau * (Psi1, dPsi1)(t, tau) * F(tau), the Duhamel integrand in s = log tau."""
    if tau == t:
        return 0.0, t * fhat
    psi1, dpsi1 = cache.velocity(t, tau)
    return tau * psi1 * fhat, tau * dpsi1 * fhat


def _carry(w: Pair, t_new: float, t_old: float, cache: RadialCache) -> Pair:
    p00, p01, p10, p11 = cache.matrix(t_new, t_old)
    return p00 * w[0] + p01 * w[1], p10 * w[0] + p11 * w[1]


def _apply_rule(weights: Sequence[float], kicks, carried: Pair) -> Pair:
    return tuple(carried[c] + sum(wt * k[c] for wt, k in zip(weights, kicks)) for c in (0, 1))  # type: ignore[return-value]


def _midpoint_forcing(spectra: Sequence[np.ndarray], i0: int, i1: int, step: int) -> np.ndarray:
    # quadratic in s through three neighbouring nodes, evaluated half way from i0 to i1
    ahead, behind = i1 + step, i0 - step
    if ahead < len(spectra):
        return (3.0 * spectra[i0] + 6.0 * spectra[i1] - spectra[ahead]) / 8.0
    if behind >= 0:
        return (-spectra[behind] + 6.0 * spectra[i0] + 3.0 * spectra[i1]) / 8.0
    return 0.5 * (spectra[i0] + spectra[i1])


def _march(
    times: np.ndarray,
    spectra: Sequence[np.ndarray],
    h: float,
    step: int,
    upto: int,
    cache: RadialCache,
) -> Iterator[Tuple[int, Pair]]:
    """
    Duhamel value and derivative at nodes 0, step, 2*step, ... <= upto. Even
    positions close a Simpson panel; odd positions close a half panel whose
    midpoint forcing is interpolated.
    """
    idx = list(range(0, upto + 1, step))
    width = step * h
    zero = np.zeros(spectra[0].shape, dtype=complex)
    w: Pair = (zero, zero)
    yield 0, w
    j = 0
    while j + 1 < len(idx):
        i0, i1 = idx[j], idx[j + 1]
        t0, t1 = float(times[i0]), float(times[i1])
        mid = _midpoint_forcing(spectra, i0, i1, step)
        kicks = (
            _kick(t1, t0, spectra[i0], cache),
            _kick(t1, math.sqrt(t0 * t1), mid, cache),
            _kick(t1, t1, spectra[i1], cache),
        )
        yield i1, _apply_rule((width / 6.0, 4.0 * width / 6.0, width / 6.0), kicks, _carry(w, t1, t0, cache))
        if j + 2 >= len(idx):
            return
        i2 = idx[j + 2]
        t2 = float(times[i2])
        kicks = (
            _kick(t2, t0, spectra[i0], cache),
            _kick(t2, t1, spectra[i1], cache),
            _kick(t2, t2, spectra[i2], cache),
        )
        w = _apply_rule((width / 3.0, 4.0 * width / 3.0, width / 3.0), kicks, _carry(w, t2, t0, cache))
        yield i2, w
        j += 2


def _lattice_duhamel(forcing: SampledForcing, upto: int, cache: RadialCache) -> Iterator[Tuple[int, Pair, float]]:
    """
    (node, value, gap) for nodes 0..upto. Even nodes are compared with a pass at
    twice the spacing; odd nodes have no gap of their own (nan). Nodes that are
    multiples of 4 close Simpson panels in both passes and get the Richardson
    value fine + (fine - coarse) / 15.
    """
    times = np.asarray(forcing.times, dtype=float)
    h = _log_step(times) if times.size > 1 else 0.0
    coarse = _march(times, forcing.spectra, h, 2, upto, cache)
    for i, w in _march(times, forcing.spectra, h, 1, upto, cache):
        if i % 2:
            yield i, w, math.nan
            continue
        _, wc = next(coarse)
        gap = _relative_gap(w, wc)
        if i % 4 == 0 and i > 0:
            w = (w[0] + (w[0] - wc[0]) / 15.0, w[1] + (w[1] - wc[1]) / 15.0)
        yield i, w, gap


def _node_estimates(gaps: Sequence[float]) -> List[float]:
    """Odd nodes take the larger gap of their even neighbours after the start node."""
    out = list(gaps)
    for i in range(1, len(gaps), 2):
        near = [gaps[k] for k in (i - 1, i + 1) if 0 < k < len(gaps)]
        out[i] = max(near) if near else math.nan
    return out


def _worst(estimates: Sequence[float]) -> float:
    if any(math.isnan(e) for e in estimates):
        return math.nan
    return max(estimates, default=0.0)


def _check_estimate(where: str, estimate: float, quad: QuadSpec) -> None:
    if estimate <= quad.tol:
        return
    message = f"{where}: lattice quadrature estimate {estimate:.2e} above tol {quad.tol:g}"
    if quad.strict:
        raise QuadratureError(message, [estimate])
    logger.warning(message)


def _duhamel_sampled(forcing: SampledForcing, m: int, quad: QuadSpec, grid: GridSpec, cache: RadialCache) -> DuhamelResult:
    t = float(forcing.times[m])
    if m == 0:
        return _zero_result(t, grid)
    gaps: List[float] = []
    value: Optional[Pair] = None
    for i, w, gap in _lattice_duhamel(forcing, min(m + 1, len(forcing.times) - 1), cache):
        gaps.append(gap)
        if i == m:
            value = w
    assert value is not None
    est = _node_estimates(gaps)[m]
    _check_estimate(f"lattice Duhamel at t={t:g}", est, quad)
    state = SpectralState(time=t, vhat=value[0], vthat=value[1], grid=grid)
    return DuhamelResult(state=state, error_estimate=est, history=(est,), nodes=m + 1)


def duhamel_with_estimate(
    forcing: Union[PhysicalForcing, SampledForcing],
    t: float,
    quad: QuadSpec,
    grid: GridSpec,
    params: DampingParams,
    cache: Optional[RadialCache] = None,
) -> DuhamelResult:
    if t < 1.0:
        raise PropagatorDomainError(f"Duhamel time must be >= 1; got {t!r}")
    cache = _cache_for(params, grid, cache)
    if isinstance(forcing, SampledForcing):
        hits = np.flatnonzero(np.asarray(forcing.times) == t)
        if hits.size == 0:
            raise ValueError(f"t={t!r} is not a lattice time of the sampled forcing")
        return _duhamel_sampled(forcing, int(hits[0]), quad, grid, cache)
    if t == 1.0:
        return _zero_result(t, grid)
    return _duhamel_adaptive(forcing, t, quad, grid, cache)


def duhamel(
    forcing: Union[PhysicalForcing, SampledForcing],
    t: float,
    quad: QuadSpec,
    grid: GridSpec,
    params: DampingParams,
    cache: Optional[RadialCache] = None,
) -> SpectralState:
    return duhamel_with_estimate(forcing, t, quad, grid, params, cache).state


# ---- Nonlinearity
def apply_nonlinearity(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^p on the physical grid, dealiased by 2x padding; |0|^p = 0."""
    if p <= 0.0:
        raise ValueError(f"p must be > 0; got {p!r}")
    return np.fft.ifft2(dealiased_power_hat(np.asarray(u, dtype=float), p)).real


# ---- Picard iteration
def _picard_step(
    forcing: SampledForcing,
    stride: int,
    data: CauchyData,
    params: DampingParams,
    cache: RadialCache,
    linear: Optional[Trajectory] = None,
) -> Tuple[Trajectory, SampledForcing, float]:
    # N u on every stride-th node, |N u|^p on all nodes, worst quadrature estimate
    grid = data.grid
    times = np.asarray(forcing.times, dtype=float)
    start = data.initial_state(params.epsilon)
    states: List[SpectralState] = []
    spectra: List[np.ndarray] = []
    gaps: List[float] = []
    for i, (value, deriv), gap in _lattice_duhamel(forcing, len(times) - 1, cache):
        t = float(times[i])
        lin = linear.states[i] if linear is not None else linear_evolve(start, t, params, cache)
        state = SpectralState(time=t, vhat=lin.vhat + value, vthat=lin.vthat + deriv, grid=grid)
        spectra.append(dealiased_power_hat(state.displacement(), params.p_exponent))
        if i % stride == 0:
            states.append(replace(state, forcing_hat=forcing.spectra[i], forced=True))
        gaps.append(gap)
    traj = Trajectory(times=times[::stride], states=tuple(states), mu=params.mu)
    return traj, SampledForcing(times=times, spectra=tuple(spectra)), _worst(_node_estimates(gaps))


def picard_iterate(
    u: LatticeIterate,
    data: CauchyData,
    params: DampingParams,
    cache: Optional[RadialCache] = None,
) -> Tuple[LatticeIterate, float]:
    """N u on the quadrature nodes of u, and the worst Duhamel estimate over them."""
    if u.traj.grid != data.grid:
        raise GridMismatchError(f"trajectory grid {u.traj.grid} differs from data grid {data.grid}")
    cache = _cache_for(params, data.grid, cache)
    traj, forcing, worst = _picard_step(u.forcing, u.stride, data, params, cache)
    return LatticeIterate(traj=traj, forcing=forcing, stride=u.stride, p_exponent=params.p_exponent), worst


def picard_map(
    u_traj: Trajectory,
    data: CauchyData,
    params: DampingParams,
    quad: Optional[QuadSpec] = None,
    cache: Optional[RadialCache] = None,
    linear: Optional[Trajectory] = None,
) -> Trajectory:
    """
    N u with the lattice of u_traj as quadrature nodes. Each output state carries
    |u|^p at its time so that dt^2 (N u) can be formed later. A lattice too
    coarse for quad.tol logs a warning (or raises when quad.strict).
    """
    quad = quad or QuadSpec(strict=False)
    grid = data.grid
    if u_traj.grid != grid:
        raise GridMismatchError(f"trajectory grid {u_traj.grid} differs from data grid {grid}")
    if linear is not None and not np.array_equal(linear.times, u_traj.times):
        raise GridMismatchError("linear trajectory lives on another lattice")
    cache = _cache_for(params, grid, cache)
    iterate = LatticeIterate.from_trajectory(u_traj, params.p_exponent)
    traj, _, worst = _picard_step(iterate.forcing, 1, data, params, cache, linear)
    _check_estimate("picard_map", worst, quad)
    return traj


def _record_estimate(report: ConvergenceReport, estimate: float) -> None:
    if not math.isnan(estimate):
        report.quadrature_estimate = max(report.quadrature_estimate, estimate)


def solve_semilinear(
    data: CauchyData,
    params: DampingParams,
    T: float,
    tol: float,
    max_iter: int,
    samples: int = 40,
    cparams: Optional[ContractionParams] = None,
    quad: Optional[QuadSpec] = None,
    cache: Optional[RadialCache] = None,
    spec: MixedNormSpec = L2,
    on_iteration: Optional[Callable[[int, float, float, float], None]] = None,
) -> Tuple[Trajectory, ConvergenceReport]:
    """
    Picard iteration from the linear solution. Stops when
    sup_m ||u_{k+1} - u_k||_{Z,1,2}(t_m) <= tol (converged), on a non-finite
    iterate, on two consecutive contraction ratios above 1, or at max_iter
    (diverged). `on_iteration(k, diff_xnorm, ratio, xnorm)` sees every iteration.

    The quadrature nodes start at quad.refine per lattice interval and double,
    up to quad.max_refine, until the first iterate meets quad.tol. The worst
    estimate over the run lands in report.quadrature_estimate.
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1; got {max_iter!r}")
    grid = data.grid
    grid.check_final_time(T)
    cparams = cparams or ContractionParams.default_for(params.p_exponent)
    quad = quad or QuadSpec(strict=False)
    cache = _cache_for(params, grid, cache)
    times = time_lattice(T, samples)

    refine = quad.refine
    while True:
        linear = linear_iterate(data, params, times, refine, cache)
        with np.errstate(all="ignore"):
            first, worst = picard_iterate(linear, data, params, cache)
        if not worst > quad.tol or 2 * refine > quad.max_refine:
            break
        logger.info(f"solve_semilinear: quadrature estimate {worst:.2e} at refine={refine}; doubling")
        refine *= 2

    report = ConvergenceReport(refine=refine)
    u = linear
    above_one = 0

    for it in range(1, max_iter + 1):
        if it == 1:
            new = first
        else:
            with np.errstate(all="ignore"):
                new, worst = picard_iterate(u, data, params, cache)
        report.iterations = it
        _record_estimate(report, worst)
        if not new.traj.is_finite():
            report.status = "diverged"
            report.message = f"non-finite iterate at iteration {it}"
            break

        with np.errstate(all="ignore"):
            z_u, z_du = x_norm_terms(new.traj.minus(u.traj), spec)
            d_x = float(np.max(x_weighted(times, z_u, z_du, cparams)))
            n_u, n_du = x_norm_terms(new.traj, spec)
            xnorm = float(np.max(x_weighted(times, n_u, n_du, cparams)))
        d_sup = float(np.max(z_u))
        prev = report.diff_xnorms[-1] if report.diff_xnorms else math.nan
        ratio = d_x / prev if (math.isfinite(prev) and prev > 0.0) else math.nan

        report.diff_xnorms.append(d_x)
        report.diff_sup.append(d_sup)
        report.ratios.append(ratio)
        report.xnorms.append(xnorm)
        logger.info(f"picard {it}: diff_x={d_x:.3e} sup_z={d_sup:.3e} ratio={ratio:.3g} xnorm={xnorm:.3e}")
        if on_iteration is not None:
            on_iteration(it, d_x, ratio, xnorm)
        u = new

        if not (math.isfinite(d_x) and math.isfinite(xnorm)):
            report.status = "diverged"
            report.message = f"non-finite norm at iteration {it}"
            break
        if d_sup <= tol:
            report.status = "converged"
            break
        above_one = above_one + 1 if ratio > 1.0 else 0
        if above_one >= 2:
            report.status = "diverged"
            report.message = f"contraction ratio above 1 twice in a row (last {ratio:.3g})"
            break
    else:
        report.status = "diverged"
        report.message = f"no convergence in {max_iter} iterations"

    report.final_xnorm = report.xnorms[-1] if report.xnorms else math.nan
    report.iterate = u
    if report.converged:
        with np.errstate(all="ignore"):
            again, worst = picard_iterate(u, data, params, cache)
        _record_estimate(report, worst)
        report.residual = max(z_norm(st, 1, spec).value for st in again.traj.minus(u.traj).states)
        _check_estimate(f"solve_semilinear (refine={refine})", report.quadrature_estimate, quad)
    elif report.quadrature_estimate > quad.tol:
        logger.warning(f"solve_semilinear: quadrature estimate {report.quadrature_estimate:.2e} above tol {quad.tol:g}")
    return u.traj, report


def contraction_ratio(
    u: Union[Trajectory, LatticeIterate],
    v: Union[Trajectory, LatticeIterate],
    data: CauchyData,
    params: DampingParams,
    cparams: ContractionParams,
    quad: Optional[QuadSpec] = None,
    cache: Optional[RadialCache] = None,
    spec: MixedNormSpec = L2,
) -> float:
    """
    ||N u - N v||_X / ||u - v||_X on the shared lattice; nan when u == v.
    Plain trajectories use their own lattice as quadrature nodes.
    """
    quad = quad or QuadSpec(strict=False)
    cache = _cache_for(params, data.grid, cache)
    a, b = (x if isinstance(x, LatticeIterate) else LatticeIterate.from_trajectory(x, params.p_exponent) for x in (u, v))
    if a.stride != b.stride or not np.array_equal(a.forcing.times, b.forcing.times):
        raise GridMismatchError("contraction pair lives on different quadrature lattices")
    with np.errstate(all="ignore"):
        gap_in = x_norm(a.traj.minus(b.traj), cparams, spec)
        if gap_in == 0.0:
            return math.nan
        na, est_a = picard_iterate(a, data, params, cache)
        nb, est_b = picard_iterate(b, data, params, cache)
        _check_estimate("contraction_ratio", _worst([est_a, est_b]), quad)
        return x_norm(na.traj.minus(nb.traj), cparams, spec) / gap_in
