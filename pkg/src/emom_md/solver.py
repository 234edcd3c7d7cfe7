"""Explicit time stepping of the integral fixed-point problem.

The solute concentrations satisfy

    c_i(t) = m_i(t)/V - (rho_i/V) * integral V_i(xi(0, y, t)) q0(y) dy,

which the solver discretizes with quadrature over the initial support and
explicit stepping along the closed-form characteristics: each step advances
all characteristic states with rates frozen at the current concentrations,
then recomputes both concentrations from the advanced states.  Cost is
O(n_points) per step; the discrete mass balance

    V * C_{i,k} + rho_i * sum_l V_i(xi_l,k) q0(x_l) w_l = m_i(t_k)

holds to machine precision by construction at every step.

All reductions are blockwise with a fixed block size and summed in block
order, so results are bitwise independent of the thread count.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .characteristics import CharacteristicField
from .exceptions import ConfigError, NumericsError
from .model import (FOUR_THIRDS_PI, ConcentrationPath, GrowthLaw,
                    InitialDensity, ProcessConfig, Quadrature,
                    build_quadrature, calibrated_feed_mass)

BLOCK = 65536
_THREAD_MIN_POINTS = 2 * BLOCK


@dataclass(frozen=True)
class EmomGridSpec:
    """Discretization sizes for the fixed-point solver."""

    n_time: int
    resolution: tuple
    rule: str = "midpoint"

    def __post_init__(self):
        if self.n_time < 1:
            raise ConfigError("n_time must be >= 1")


@dataclass
class SolverState:
    """Characteristic slice plus concentrations at one time index."""

    index: int
    time: float
    radii: np.ndarray
    composition: np.ndarray
    concentrations: tuple
    q0_weights: np.ndarray
    feed: Callable

    def states(self) -> np.ndarray:
        return np.column_stack([self.radii, self.composition])


@dataclass
class SolveResult:
    path: ConcentrationPath
    quadrature: Quadrature
    feed_values: np.ndarray        # (n_times, 2)
    final_states: np.ndarray       # (n_points, 2)
    config: ProcessConfig
    law: GrowthLaw
    initial_density: InitialDensity
    negative_concentration_steps: int = 0
    characteristics: CharacteristicField | None = None

    @property
    def dof(self) -> int:
        return self.path.n_times * self.quadrature.n_points


def _block_slices(n: int):
    return [slice(i, min(i + BLOCK, n)) for i in range(0, n, BLOCK)]


def _volume_sums_default(x1, x2, q0w, slices):
    """Blockwise sums of V_i over the population for the default sphere-split
    volume maps (deterministic regardless of how blocks are dispatched)."""
    s_tot = np.empty(len(slices))
    s_1 = np.empty(len(slices))
    for b, sl in enumerate(slices):
        u = x1[sl] ** 3 * q0w[sl]
        s_tot[b] = np.sum(u)
        s_1[b] = np.sum(u * x2[sl])
    tot = float(np.sum(s_tot))
    one = float(np.sum(s_1))
    return FOUR_THIRDS_PI * one, FOUR_THIRDS_PI * (tot - one)


def _volume_sums_custom(cfg, x1, x2, q0w, slices):
    s1 = np.empty(len(slices))
    s2 = np.empty(len(slices))
    for b, sl in enumerate(slices):
        s1[b] = np.sum(cfg.component_volume(1, x1[sl], x2[sl]) * q0w[sl])
        s2[b] = np.sum(cfg.component_volume(2, x1[sl], x2[sl]) * q0w[sl])
    return float(np.sum(s1)), float(np.sum(s2))


def _volume_sums(cfg, x1, x2, q0w, slices):
    if cfg.has_default_volumes():
        return _volume_sums_default(x1, x2, q0w, slices)
    return _volume_sums_custom(cfg, x1, x2, q0w, slices)


def _q0_weights(q0: InitialDensity, quad: Quadrature) -> np.ndarray:
    if q0.is_dirac:
        return quad.weights.copy()  # the dirac count is folded into the weight
    return q0(quad.x1, quad.x2) * quad.weights


def initialize(cfg: ProcessConfig, q0: InitialDensity, quad: Quadrature
               ) -> SolverState:
    """Initialization step: characteristic states at the quadrature points
    and the initial concentrations from the discrete mass balance.

    With auto-calibrated feed (``cfg.feed_mass is None``) the initial
    concentrations equal the configured ones exactly.  An explicit feed that
    yields a negative initial concentration is an infeasible balance and
    raises :class:`ConfigError`.
    """
    if not np.all(quad.x1 >= cfg.x_min):
        raise ConfigError("quadrature points below the minimal radius x_min")
    x1 = quad.x1.astype(float, copy=True)
    x2 = quad.x2.astype(float, copy=True)
    q0w = _q0_weights(q0, quad)
    s1, s2 = _volume_sums(cfg, x1, x2, q0w, _block_slices(x1.size))
    if cfg.feed_mass is None:
        m_const = calibrated_feed_mass(cfg, (s1, s2))
        feed = lambda t: m_const  # noqa: E731
    else:
        feed = cfg.feed_mass
    m1, m2 = feed(0.0)
    vol = cfg.reactor_volume
    c1 = (m1 - cfg.densities[0] * s1) / vol
    c2 = (m2 - cfg.densities[1] * s2) / vol
    if c1 < 0.0 or c2 < 0.0:
        raise ConfigError(
            f"infeasible initial mass balance: c(0) = ({c1}, {c2})")
    return SolverState(index=0, time=0.0, radii=x1, composition=x2,
                       concentrations=(c1, c2), q0_weights=q0w, feed=feed)


def _rates_for_step(law, cfg, c1, c2, k):
    if (c1 < 0.0 or c2 < 0.0) and cfg.on_negative_concentration == "abort":
        raise NumericsError(
            f"negative concentration ({c1}, {c2}) at step {k}", step_index=k)
    return law.rates(c1, c2, clamp=True)


def step(state: SolverState, cfg: ProcessConfig, law: GrowthLaw, dt: float
         ) -> SolverState:
    """One explicit step: advance every characteristic state with rates
    frozen at the current concentrations, then recompute the concentrations
    from the advanced states.  Returns a new state; the input is untouched."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    g1, g2 = _rates_for_step(law, cfg, *state.concentrations, state.index)
    omn = 1.0 - law.exponent_n
    p = state.radii ** omn
    x2 = state.composition.copy()
    g1_dt = g1 * dt
    g_dt = (g1 + g2) * dt
    inv = 1.0 / p
    x2 = (3.0 * g1_dt * inv + x2) * np.exp((-3.0 * g_dt) * inv)
    p += omn * g_dt
    if omn * g_dt < 0.0 and np.any(p <= 0.0):
        raise NumericsError("radius blowup/negative radicand",
                            step_index=state.index + 1,
                            point_index=int(np.argmax(p <= 0.0)))
    x1 = p if law.exponent_n == 0.0 else p ** (1.0 / omn)
    s1, s2 = _volume_sums(cfg, x1, x2, state.q0_weights,
                          _block_slices(x1.size))
    t_next = state.time + dt
    m1, m2 = state.feed(t_next)
    vol = cfg.reactor_volume
    c1 = (m1 - cfg.densities[0] * s1) / vol
    c2 = (m2 - cfg.densities[1] * s2) / vol
    if not (np.isfinite(c1) and np.isfinite(c2)):
        raise NumericsError(f"concentrations diverged at step "
                            f"{state.index + 1}", step_index=state.index + 1)
    return SolverState(index=state.index + 1, time=t_next, radii=x1,
                       composition=x2, concentrations=(c1, c2),
                       q0_weights=state.q0_weights, feed=state.feed)


def _run_loop(cfg, law, t_grid, p, x2, q0w, feed, c1, c2, threads,
              store_characteristics):
    n_t = t_grid.size
    omn = 1.0 - law.exponent_n
    inv_omn = 1.0 / omn
    n_is_zero = law.exponent_n == 0.0
    default_vols = cfg.has_default_volumes()
    vol = cfg.reactor_volume
    rho1, rho2 = cfg.densities
    slices = _block_slices(p.size)

    conc = np.empty((n_t, 2))
    feed_vals = np.empty((n_t, 2))
    conc[0] = (c1, c2)
    feed_vals[0] = feed(float(t_grid[0]))
    history = None
    if store_characteristics:
        history = np.empty((n_t, p.size, 2))
        history[0, :, 0] = p if n_is_zero else p ** inv_omn
        history[0, :, 1] = x2

    def advance_block(sl, g1_dt, g_dt):
        pv = p[sl]
        inv = 1.0 / pv
        x2[sl] = (3.0 * g1_dt * inv + x2[sl]) * np.exp((-3.0 * g_dt) * inv)
        pv += omn * g_dt
        x1v = pv if n_is_zero else pv ** inv_omn
        u = x1v * x1v * x1v * q0w[sl]
        return float(np.sum(u)), float(np.sum(u * x2[sl]))

    executor = None
    if threads > 1 and p.size >= _THREAD_MIN_POINTS and default_vols:
        from concurrent.futures import ThreadPoolExecutor
        executor = ThreadPoolExecutor(max_workers=threads)

    negative_steps = 0
    try:
        for k in range(n_t - 1):
            if c1 < 0.0 or c2 < 0.0:
                negative_steps += 1
            g1, g2 = _rates_for_step(law, cfg, c1, c2, k)
            dt = float(t_grid[k + 1] - t_grid[k])
            g1_dt = g1 * dt
            g_dt = (g1 + g2) * dt
            if default_vols:
                if executor is not None:
                    parts = list(executor.map(
                        lambda sl: advance_block(sl, g1_dt, g_dt), slices))
                else:
                    parts = [advance_block(sl, g1_dt, g_dt) for sl in slices]
                tot = float(np.sum(np.fromiter((a for a, _ in parts), float,
                                               len(parts))))
                one = float(np.sum(np.fromiter((b for _, b in parts), float,
                                               len(parts))))
                s1 = FOUR_THIRDS_PI * one
                s2 = FOUR_THIRDS_PI * (tot - one)
            else:
                inv = 1.0 / p
                x2[:] = (3.0 * g1_dt * inv + x2) * np.exp((-3.0 * g_dt) * inv)
                p += omn * g_dt
                x1 = p if n_is_zero else p ** inv_omn
                s1, s2 = _volume_sums_custom(cfg, x1, x2, q0w, slices)
            if omn * g_dt < 0.0 and np.any(p <= 0.0):
                raise NumericsError("radius blowup/negative radicand",
                                    step_index=k + 1,
                                    point_index=int(np.argmax(p <= 0.0)))
            m1, m2 = feed(float(t_grid[k + 1]))
            c1 = (m1 - rho1 * s1) / vol
            c2 = (m2 - rho2 * s2) / vol
            if not (np.isfinite(c1) and np.isfinite(c2)):
                raise NumericsError(
                    f"concentrations diverged at step {k + 1}",
                    step_index=k + 1)
            conc[k + 1] = (c1, c2)
            feed_vals[k + 1] = (m1, m2)
            if history is not None:
                history[k + 1, :, 0] = p if n_is_zero else p ** inv_omn
                history[k + 1, :, 1] = x2
    finally:
        if executor is not None:
            executor.shutdown(wait=False)
    return conc, feed_vals, history, negative_steps


def solve(cfg: ProcessConfig, q0: InitialDensity, law: GrowthLaw,
          grid: EmomGridSpec, *, time_grid=None, quadrature=None,
          threads: int = 1, store_characteristics: bool = False
          ) -> SolveResult:
    """Run the full fixed-point scheme and return the concentration path.

    The time grid is uniform on [0, horizon] with ``grid.n_time`` points
    unless an explicit strictly-increasing ``time_grid`` is given.  Results
    are deterministic (bitwise) for fixed inputs, independent of ``threads``.

    ``store_characteristics=True`` keeps the full characteristic history
    (n_time x n_points x 2); intended for tests and small runs.
    """
    if time_grid is None:
        if grid.n_time == 1 or cfg.horizon == 0.0:
            t_grid = np.array([0.0])
        else:
            t_grid = np.linspace(0.0, cfg.horizon, grid.n_time)
    else:
        t_grid = np.asarray(time_grid, dtype=float)
        if t_grid[0] != 0.0 or abs(t_grid[-1] - cfg.horizon) > 1e-12 * max(
                cfg.horizon, 1.0):
            raise ConfigError("time grid must run from 0 to the horizon")
        if t_grid.size > 1 and np.any(np.diff(t_grid) <= 0.0):
            raise ConfigError("time grid must be strictly increasing")
    quad = quadrature if quadrature is not None else build_quadrature(
        q0, grid.resolution, grid.rule)
    state0 = initialize(cfg, q0, quad)
    omn = 1.0 - law.exponent_n
    p = state0.radii if law.exponent_n == 0.0 else state0.radii ** omn
    x2 = state0.composition
    conc, feed_vals, history, negative_steps = _run_loop(
        cfg, law, t_grid, p, x2, state0.q0_weights, state0.feed,
        state0.concentrations[0], state0.concentrations[1], threads,
        store_characteristics)
    if negative_steps:
        warnings.warn(
            f"concentrations overshot below zero on {negative_steps} steps; "
            "rates were evaluated at max(c, 0)", RuntimeWarning,
            stacklevel=2)
    x1_final = p if law.exponent_n == 0.0 else p ** (1.0 / omn)
    return SolveResult(
        path=ConcentrationPath(times=t_grid, values=conc),
        quadrature=quad,
        feed_values=feed_vals,
        final_states=np.column_stack([x1_final, x2]),
        config=cfg, law=law, initial_density=q0,
        negative_concentration_steps=negative_steps,
        characteristics=CharacteristicField(history)
        if history is not None else None)
