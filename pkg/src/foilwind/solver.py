"""Implicit transient driver: backward Euler with damped Newton iterations.

System sizes stay small enough (a few thousand unknowns in 2D) that a sparse
direct factorization per Newton iteration is both robust against the
power-law's extreme stiffness and cheap; no iterative solvers are attempted.

Convergence is judged on a block-scaled Euclidean residual norm: field rows
and current-constraint rows carry different units, so each block is
normalized by the largest leading-assembly magnitude seen so far in the run.
The scales are touched only by iteration-zero assemblies, never by trial
points of the line search, which keeps a diverging iterate from poisoning
the stopping test.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import splu

from .formulations import AssembledSystem, AssemblyContext, Excitation

log = logging.getLogger(__name__)

MAX_BACKTRACKS = 8
DT_GROWTH = 1.2
FAST_STEP_ITERS = 3


class NonConvergenceError(RuntimeError):
    """Newton failed to reach tolerance; the stepper may retry with smaller dt."""

    def __init__(self, message: str, stats: "NewtonStats | None" = None):
        super().__init__(message)
        self.stats = stats


class SingularMatrixError(RuntimeError):
    """The linearized system factorization failed."""


@dataclass(frozen=True)
class SolverConfig:
    # abs_tol must sit above the LU roundoff floor of the scaled residual
    # (~2e-13 on the reference saddle systems) or Newton can stall just shy
    # of a tolerance it cannot reach in double precision.
    newton_tol_rel: float = 1e-11
    newton_tol_abs: float = 5e-12
    max_newton_iters: int = 25
    dt_init: float = 2e-5
    dt_min: float = 2e-9
    dt_max: float = 1e-4
    periods: float = 2.0
    damping: float = 0.5

    def __post_init__(self) -> None:
        if self.newton_tol_rel <= 0 or self.newton_tol_abs <= 0:
            raise ValueError("Newton tolerances must be positive")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if self.periods <= 0:
            raise ValueError("periods must be positive")


@dataclass
class NewtonStats:
    iterations: int = 0
    residual_norms: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residual_norms[-1] if self.residual_norms else float("nan")


@dataclass
class TransientState:
    t: float
    dt: float
    u: np.ndarray
    u_prev: np.ndarray
    newton_stats: NewtonStats | None = None
    linsys_count: int = 0

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.u.shape != self.u_prev.shape:
            raise ValueError("u and u_prev layouts differ")


class BlockScales:
    """Residual normalization for the two unit families of the system.

    Field rows and current-constraint rows carry different units, so each
    family is normalized by the largest term magnitude it has shown in the
    run. Finer splits would starve row groups that are physically near zero
    in some regimes (e.g. radial-field rows early in a ramp), whose roundoff
    is set by the globally coupled solve, not by their own magnitude.

    Scales absorb the assembly's per-row term magnitudes (which dominate the
    residual entrywise), and only from non-diverging iterates so a runaway
    trial point cannot loosen the stopping test.
    """

    def __init__(self, blocks: dict[str, slice]):
        n = max(sl.stop for sl in blocks.values())
        voltage = blocks.get("voltage", slice(n, n))
        self.slices = [sl for sl in (slice(0, voltage.start), voltage) if sl.stop > sl.start]
        self.scale = np.zeros(len(self.slices))

    def absorb(self, row_scale: np.ndarray) -> None:
        for i, sl in enumerate(self.slices):
            self.scale[i] = max(self.scale[i], float(np.linalg.norm(row_scale[sl])))

    def norm(self, residual: np.ndarray) -> float:
        if not np.all(np.isfinite(residual)):
            return float("inf")
        # floor guards families that never carried signal from roundoff blowup
        floor = max(1e-8 * self.scale.max(initial=0.0), 1e-300)
        acc = 0.0
        for i, sl in enumerate(self.slices):
            b = float(np.linalg.norm(residual[sl])) / max(self.scale[i], floor)
            acc += b * b
        return float(np.sqrt(acc))


def newton_solve(
    system_fn,
    u0: np.ndarray,
    config: SolverConfig,
    scales: BlockScales | None = None,
) -> tuple[np.ndarray, NewtonStats]:
    """Damped Newton on ``system_fn``'s residual, starting at ``u0``.

    Stops when the scaled residual drops under
    max(newton_tol_abs, newton_tol_rel * |r0|). A trial point whose residual
    does not decrease is halved up to MAX_BACKTRACKS times; then the last
    trial is accepted anyway and the outer iteration continues.
    """
    stats = NewtonStats()
    u = np.asarray(u0, dtype=float).copy()
    system = system_fn(u)
    if scales is None:
        scales = BlockScales(system.blocks)
    scales.absorb(system.row_scale)
    r_norm = scales.norm(system.residual)
    stats.residual_norms.append(r_norm)
    tol = max(config.newton_tol_abs, config.newton_tol_rel * r_norm)
    if r_norm <= tol:
        stats.converged = True
        return u, stats

    for _ in range(config.max_newton_iters):
        try:
            lu = splu(system.jacobian)
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        du = lu.solve(-system.residual)
        stats.iterations += 1

        step = 1.0
        for _bt in range(MAX_BACKTRACKS + 1):
            u_trial = u + step * du
            system_trial = system_fn(u_trial)
            r_trial = scales.norm(system_trial.residual)
            if r_trial < r_norm:
                scales.absorb(system_trial.row_scale)
                r_trial = scales.norm(system_trial.residual)
                break
            step *= config.damping
        if not np.isfinite(r_trial):
            raise NonConvergenceError(
                f"residual not finite after {MAX_BACKTRACKS} backtracks", stats
            )
        u, system, r_norm = u_trial, system_trial, r_trial
        stats.residual_norms.append(r_norm)
        if r_norm <= tol:
            stats.converged = True
            return u, stats

    raise NonConvergenceError(
        f"no convergence in {config.max_newton_iters} iterations "
        f"(residual {r_norm:.3e}, tol {tol:.3e})",
        stats,
    )


def step(
    state: TransientState,
    formulation: AssemblyContext,
    excitation: Excitation,
    config: SolverConfig,
    scales: BlockScales | None = None,
) -> TransientState:
    """Advance one backward-Euler step with adaptive dt.

    Halves dt (not below dt_min) on Newton failure; grows it by 1.2 after
    fast convergence. Linear solves of rejected attempts still count.
    """
    dt = state.dt
    linsys = state.linsys_count
    while True:
        t_new = state.t + dt

        def system_fn(u, _t=t_new, _dt=dt):
            return formulation.assemble(u, state.u, _dt, _t, excitation)

        try:
            u_new, stats = newton_solve(system_fn, state.u, config, scales)
        except NonConvergenceError as exc:
            if exc.stats is not None:
                linsys += exc.stats.iterations
            if dt <= config.dt_min * (1 + 1e-12):
                raise NonConvergenceError(
                    f"dt underflow at t={state.t:.6e}: already at dt_min="
                    f"{config.dt_min:.3e}; residual history "
                    f"{[f'{r:.3e}' for r in (exc.stats.residual_norms if exc.stats else [])]}",
                    exc.stats,
                ) from exc
            dt = max(0.5 * dt, config.dt_min)
            log.info("newton failed at t=%.6e, retrying with dt=%.3e", t_new, dt)
            continue

        linsys += stats.iterations
        dt_next = dt
        if stats.iterations <= FAST_STEP_ITERS:
            dt_next = min(dt * DT_GROWTH, config.dt_max)
        return TransientState(
            t=t_new,
            dt=dt_next,
            u=u_new,
            u_prev=state.u,
            newton_stats=stats,
            linsys_count=linsys,
        )


@dataclass
class SolutionTrace:
    """Accepted-step history of one transient run (full-device quantities)."""

    times: np.ndarray
    p: np.ndarray
    i_target: np.ndarray
    slice_currents: np.ndarray  # (n_samples, n_slices)
    newton_iters: np.ndarray
    dt: np.ndarray
    states: list[np.ndarray] | None
    linsys_count: int
    wall_time: float
    excitation: Excitation
    variant: str
    n_dofs: int

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")


def run_transient(
    config: SolverConfig,
    formulation: AssemblyContext,
    excitation: Excitation,
    store_states: bool = True,
) -> SolutionTrace:
    """Simulate ``config.periods`` periods from the zero state."""
    layout = formulation.layout
    t_end = config.periods * excitation.period
    t0 = time.perf_counter()

    u = np.zeros(layout.n_dofs)
    state = TransientState(t=0.0, dt=config.dt_init, u=u, u_prev=u.copy())
    scales = BlockScales(formulation.block_slices())

    times = [0.0]
    p = [0.0]
    i_target = [excitation.current(0.0)]
    slices = [formulation.slice_currents(u)]
    iters = [0]
    dts = [config.dt_init]
    states = [u.copy()] if store_states else None
    n_steps = 0
    dt_ctrl = config.dt_init

    while state.t < t_end * (1.0 - 1e-12):
        t_prev = state.t
        expected = min(dt_ctrl, t_end - t_prev)
        state = step(replace(state, dt=expected), formulation, excitation, config, scales)
        applied = state.t - t_prev
        if applied >= expected * (1.0 - 1e-12):
            # landing clip only; grow the controller, not the clipped value
            if state.newton_stats.iterations <= FAST_STEP_ITERS:
                dt_ctrl = min(dt_ctrl * DT_GROWTH, config.dt_max)
        else:
            dt_ctrl = state.dt  # step halved dt; adopt its recovery value
        state.dt = dt_ctrl
        n_steps += 1

        times.append(state.t)
        p.append(formulation.mesh.symmetry_factor * formulation.dissipation(state.u, state.u_prev))
        i_target.append(excitation.current(state.t))
        slices.append(formulation.slice_currents(state.u))
        iters.append(state.newton_stats.iterations)
        dts.append(applied)
        if store_states:
            states.append(state.u.copy())
        log.info(
            "step %d: t=%.6e dt=%.3e newton=%d residual=%.3e",
            n_steps,
            state.t,
            applied,
            state.newton_stats.iterations,
            state.newton_stats.final_residual,
        )

    wall = time.perf_counter() - t0
    log.info(
        "run complete: %d steps, %d linear solves, %.2f s wall",
        n_steps,
        state.linsys_count,
        wall,
    )
    return SolutionTrace(
        times=np.array(times),
        p=np.array(p),
        i_target=np.array(i_target),
        slice_currents=np.array(slices),
        newton_iters=np.array(iters),
        dt=np.array(dts),
        states=states,
        linsys_count=state.linsys_count,
        wall_time=wall,
        excitation=excitation,
        variant=layout.variant.value,
        n_dofs=layout.n_dofs,
    )
