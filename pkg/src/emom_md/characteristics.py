"""Closed-form characteristics of the growth ODE and their discrete flow.

The growth ODE

    dx1/dt = (G1 + G2) x1^n,
    dx2/dt = 3 (G1 - (G1 + G2) x2) x1^(n-1),

has an analytical solution for given time-dependent rates.  Working in the
power coordinate ``p = x1^(1-n)`` the radius sub-flow is a plain translation,
so the discrete flow over a time grid composes one-step updates

    p   <- p + (1 - n) * Gdt,
    x2  <- (3 * G1dt / p + x2) * exp(-3 * Gdt / p),

with ``Gdt = (G1 + G2) * dt`` evaluated at the step's left endpoint.  The
multi-step flow is the exact composition of these updates (the discrete
semigroup property holds in exact arithmetic) and is invertible step by step,
which is what backward evaluation uses.  Keeping ``p`` as the state avoids
repeated powering, so the radius accumulates rate increments in a single
running sum.

Backward evaluation can fail to produce a state inside the admissible set
(nonpositive radicand, radius below the minimal radius, composition outside
[0, 1]).  That is a legitimate outcome -- the queried state has no ancestor
in the initial population -- and is reported as ``None`` (scalar API) or via
a validity mask (vectorized API), never as an exception.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import NumericsError
from .model import ConcentrationPath, DisperseState, GrowthLaw

# slack for classifying backward pre-images as inside/outside the admissible
# set; covers floating-point drift of exact round trips
_COMP_TOL = 1e-9
_RADIUS_TOL = 1e-12


def step_radius(x1, total_rate_increment, n: float):
    """One discrete radius update: ``(x1^(1-n) + (1-n) * inc)^(1/(1-n))``.

    ``total_rate_increment`` is the accumulated ``(G1 + G2) * dt``.  Scalar or
    array ``x1``.  A nonpositive radicand (possible only for negative rates or
    n > 1) raises :class:`NumericsError` carrying the offending index.
    """
    if n == 1.0:
        raise ValueError("size exponent n = 1 is not supported")
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 <= 0.0):
        raise ValueError("radius update requires x1 > 0")
    omn = 1.0 - n
    radicand = x1 ** omn + omn * np.asarray(total_rate_increment)
    bad = radicand <= 0.0
    if np.any(bad):
        idx = int(np.argmax(bad)) if radicand.ndim else None
        raise NumericsError(
            "radius update produced a nonpositive radicand "
            "(negative rate increment or finite-time blowup)",
            point_index=idx)
    out = radicand ** (1.0 / omn)
    return float(out) if out.ndim == 0 else out


def step_composition(x1, x2, g1_increment, total_increment, n: float):
    """One discrete composition update:
    ``(3 g1_inc / x1^(1-n) + x2) * exp(-3 total_inc / x1^(1-n))``.

    For nonnegative increments with ``g1_increment <= total_increment`` and
    ``x2`` in [0, 1] the result stays in [0, 1].
    """
    pw = np.asarray(x1, dtype=float) ** (1.0 - n)
    out = (3.0 * np.asarray(g1_increment) / pw + np.asarray(x2)) \
        * np.exp(-3.0 * np.asarray(total_increment) / pw)
    return float(out) if out.ndim == 0 else out


def path_increments(path: ConcentrationPath, law: GrowthLaw, clamp: bool = True):
    """Per-step rate increments (G1*dt, (G1+G2)*dt) along a concentration path.

    Concentrations are clamped at 0 before rate evaluation by default,
    matching the solver's treatment of explicit-Euler overshoot.
    """
    c1 = path.c1[:-1]
    c2 = path.c2[:-1]
    if clamp:
        c1 = np.maximum(c1, 0.0)
        c2 = np.maximum(c2, 0.0)
    g1 = _eval_rate(law.rate1, c1)
    g2 = _eval_rate(law.rate2, c2)
    if not (np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))):
        raise ValueError("non-finite growth rate along the path")
    if not law.allow_negative_rates and (np.any(g1 < 0.0) or np.any(g2 < 0.0)):
        raise ValueError("negative growth rate along the path")
    dt = path.deltas
    return g1 * dt, (g1 + g2) * dt


def _eval_rate(rate: Callable, c: np.ndarray) -> np.ndarray:
    vals = np.asarray(rate(c), dtype=float)
    if vals.shape != c.shape:  # scalar-only user callable
        vals = np.array([float(rate(ci)) for ci in c])
    return vals


def _forward_sweep(p, x2, g1_dt, g_dt, omn, k_start, k_end, want_psi=False):
    """Advance states (vectorized over points) from time index k_start to
    k_end > k_start.  Returns (p, x2, psi_log); psi_log accumulates
    ``3 * sum Gdt_l / p_l`` along the trajectory (the log of the forward
    Jacobian correction)."""
    psi_log = np.zeros_like(p) if want_psi else None
    for ell in range(k_start, k_end):
        gd = g_dt[ell]
        inv = 1.0 / p
        if want_psi:
            psi_log += (3.0 * gd) * inv
        x2 = (3.0 * g1_dt[ell] * inv + x2) * np.exp((-3.0 * gd) * inv)
        p = p + omn * gd
        if omn * gd < 0.0 and np.any(p <= 0.0):
            raise NumericsError(
                "radius power coordinate became nonpositive during forward "
                "propagation", step_index=ell,
                point_index=int(np.argmax(p <= 0.0)))
    return p, x2, psi_log


def _backward_sweep(p, x2, g1_dt, g_dt, omn, k_start, k_end, want_psi=False):
    """Invert the discrete flow from time index k_start down to k_end < k_start.

    Lanes whose radius radicand turns nonpositive are flagged invalid; their
    values are garbage and must be masked by the caller."""
    valid = np.ones(p.shape, dtype=bool)
    psi_log = np.zeros_like(p) if want_psi else None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for ell in range(k_start - 1, k_end - 1, -1):
            gd = g_dt[ell]
            p = p - omn * gd
            ok = p > 0.0
            valid &= ok
            inv = np.where(ok, 1.0 / np.where(ok, p, 1.0), 0.0)
            if want_psi:
                psi_log += (3.0 * gd) * inv
            x2 = x2 * np.exp((3.0 * gd) * inv) - 3.0 * g1_dt[ell] * inv
    return p, x2, psi_log, valid


def _x1_from_p(p, valid, omn):
    safe = np.where(valid, p, 1.0)
    return np.where(valid, safe ** (1.0 / omn), np.nan)


def _finalize_backward(p, x2, valid, omn, x_min):
    valid = valid & np.isfinite(x2) \
        & (x2 >= -_COMP_TOL) & (x2 <= 1.0 + _COMP_TOL)
    x1 = _x1_from_p(p, valid, omn)
    if x_min is not None:
        valid = valid & (x1 >= x_min * (1.0 - _RADIUS_TOL))
        x1 = np.where(valid, x1, np.nan)
    x2 = np.where(valid, x2, np.nan)
    return x1, x2, valid


def xi_multi_step_many(k: int, x1, x2, i: int, path: ConcentrationPath,
                       law: GrowthLaw, x_min: float | None = None):
    """Discrete characteristic flow from time index ``k`` to ``i`` (0-based),
    vectorized over states.  Returns ``(x1, x2, valid)``.

    Forward (k <= i) evaluation always succeeds for nonnegative rates and is
    the exact composition of the one-step updates.  Backward (k > i)
    evaluation inverts the forward flow on the same grid; lanes without an
    admissible ancestor come back invalid (NaN states).
    """
    n_t = path.n_times
    if not (0 <= k < n_t and 0 <= i < n_t):
        raise IndexError(f"time indices must lie in [0, {n_t - 1}]")
    x1 = np.atleast_1d(np.asarray(x1, dtype=float)).copy()
    x2 = np.atleast_1d(np.asarray(x2, dtype=float)).copy()
    if np.any(x1 <= 0.0):
        raise ValueError("characteristic evaluation requires x1 > 0")
    omn = 1.0 - law.exponent_n
    g1_dt, g_dt = path_increments(path, law)
    p = x1 ** omn
    if k <= i:
        p, x2, _ = _forward_sweep(p, x2, g1_dt, g_dt, omn, k, i)
        valid = np.ones(p.shape, dtype=bool)
        return _x1_from_p(p, valid, omn), x2, valid
    p, x2, _, valid = _backward_sweep(p, x2, g1_dt, g_dt, omn, k, i)
    return _finalize_backward(p, x2, valid, omn, x_min)


def xi_multi_step(k: int, state, i: int, path: ConcentrationPath,
                  law: GrowthLaw, x_min: float | None = None):
    """Scalar wrapper of :func:`xi_multi_step_many`.

    Returns the mapped :class:`DisperseState`, or ``None`` when a backward
    evaluation has no ancestor in the admissible set (nonpositive radicand,
    radius below ``x_min``, or composition outside [0, 1]).
    """
    x1, x2, valid = xi_multi_step_many(k, state[0], state[1], i, path, law, x_min)
    if not valid[0]:
        return None
    return DisperseState(float(x1[0]), float(x2[0]))


class DensityFactor(NamedTuple):
    """Jacobian factors of the backward characteristic map.

    The number density at (t_k, x) is q0(pre-image) * radius_factor * psi,
    with ``radius_factor = (xi1(k, x, 0) / x1)^n``.
    """

    psi: float
    radius_factor: float

    @property
    def determinant(self) -> float:
        return self.psi * self.radius_factor


def jacobian_factor_many(k: int, x1, x2, path: ConcentrationPath,
                         law: GrowthLaw, x_min: float | None = None):
    """Vectorized backward sweep returning, per state, the pre-image at time
    index 0 plus the density factors: ``(x1_0, x2_0, psi, radius_factor,
    valid)``."""
    n_t = path.n_times
    if not 0 <= k < n_t:
        raise IndexError(f"time index must lie in [0, {n_t - 1}]")
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float)).copy()
    if np.any(x1 <= 0.0):
        raise ValueError("characteristic evaluation requires x1 > 0")
    omn = 1.0 - law.exponent_n
    g1_dt, g_dt = path_increments(path, law)
    p = x1 ** omn
    p0, x20, psi_log, valid = _backward_sweep(
        p, x2, g1_dt, g_dt, omn, k, 0, want_psi=True)
    x1_0, x2_0, valid = _finalize_backward(p0, x20, valid, omn, x_min)
    with np.errstate(over="ignore", invalid="ignore"):
        psi = np.where(valid, np.exp(psi_log), np.nan)
        ratio = np.where(valid, (x1_0 / x1) ** law.exponent_n, np.nan)
    return x1_0, x2_0, psi, ratio, valid


def jacobian_factor(k: int, state, path: ConcentrationPath, law: GrowthLaw,
                    x_min: float | None = None):
    """Density factors for backward evaluation at (time index k, state).

    Returns a :class:`DensityFactor` or ``None`` when the state has no
    ancestor in the admissible set.  ``psi`` is
    ``exp(3 sum_{l<k} Gdt_l / xi1(k, x, l)^(1-n))`` accumulated along the
    backward radius trajectory; ``radius_factor`` is ``(xi1(k,x,0)/x1)^n``.
    """
    _, _, psi, ratio, valid = jacobian_factor_many(
        k, state[0], state[1], path, law, x_min)
    if not valid[0]:
        return None
    return DensityFactor(float(psi[0]), float(ratio[0]))


def forward_density_data(k: int, x1, x2, path: ConcentrationPath,
                         law: GrowthLaw):
    """Forward sweep from time index 0 to k, vectorized over states.

    Returns ``(x1_k, x2_k, psi, radius_factor)`` where the density pushed
    forward from q0 is ``q0(x) * radius_factor * psi`` evaluated at the mapped
    state: ``psi = exp(-3 sum Gdt_l / p_l)`` and
    ``radius_factor = (x1 / x1_k)^n``.  (The forward map's Jacobian
    determinant is the reciprocal of that product.)
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float)).copy()
    if np.any(x1 <= 0.0):
        raise ValueError("characteristic evaluation requires x1 > 0")
    omn = 1.0 - law.exponent_n
    g1_dt, g_dt = path_increments(path, law)
    p = x1 ** omn
    p, x2k, psi_log = _forward_sweep(p, x2, g1_dt, g_dt, omn, 0, k,
                                     want_psi=True)
    x1k = p ** (1.0 / omn)
    psi = np.exp(psi_log)
    ratio = (x1 / x1k) ** law.exponent_n
    return x1k, x2k, psi, ratio


def radius_trajectory(state, path: ConcentrationPath, law: GrowthLaw):
    """Radius values ``xi1(0, x, k)`` for every time index k (vectorized via
    the accumulated-increment form of the radius update)."""
    if state[0] <= 0.0:
        raise ValueError("characteristic evaluation requires x1 > 0")
    omn = 1.0 - law.exponent_n
    _, g_dt = path_increments(path, law)
    p = np.empty(path.n_times)
    p[0] = state[0] ** omn
    np.cumsum(omn * g_dt, out=p[1:])
    p[1:] += p[0]
    if np.any(p <= 0.0):
        raise NumericsError("radius power coordinate became nonpositive",
                            step_index=int(np.argmax(p <= 0.0)))
    return p ** (1.0 / omn)


def trajectory(state, path: ConcentrationPath, law: GrowthLaw):
    """Full discrete trajectory from (time 0, state): arrays (x1, x2) of
    length ``path.n_times``.  Equivalent to composing the one-step updates."""
    omn = 1.0 - law.exponent_n
    g1_dt, g_dt = path_increments(path, law)
    p = np.array([float(state[0]) ** omn])
    x2 = np.array([float(state[1])])
    n_t = path.n_times
    x1_out = np.empty(n_t)
    x2_out = np.empty(n_t)
    x1_out[0], x2_out[0] = state[0], state[1]
    for k in range(n_t - 1):
        p, x2, _ = _forward_sweep(p, x2, g1_dt, g_dt, omn, k, k + 1)
        x1_out[k + 1] = p[0] ** (1.0 / omn)
        x2_out[k + 1] = x2[0]
    return x1_out, x2_out


@dataclass(frozen=True)
class CharacteristicField:
    """Characteristic states per quadrature point and time index,
    shape (n_times, n_points, 2)."""

    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 3 or self.states.shape[2] != 2:
            raise ValueError("states must have shape (n_times, n_points, 2)")

    @property
    def n_times(self) -> int:
        return self.states.shape[0]

    @property
    def n_points(self) -> int:
        return self.states.shape[1]

    def slice(self, k: int) -> np.ndarray:
        return self.states[k]


def _segment_nodes(times, t_from, t_to):
    """Breakpoints of a piecewise-constant path lying strictly between
    t_from and t_to, ordered in integration direction."""
    lo, hi = (t_from, t_to) if t_to >= t_from else (t_to, t_from)
    inner = times[(times > lo) & (times < hi)]
    return inner if t_to >= t_from else inner[::-1]


def ode_oracle(t_start: float, state, t_end: float, concentration,
               law: GrowthLaw, tol: float = 1e-10):
    """Reference integrator for the characteristic ODE (tests only).

    Integrates dx/dt = growth velocity with an adaptive embedded Runge-Kutta
    method (scipy RK45) at local tolerance ``tol``.  ``concentration`` may be
    a callable ``t -> (c1, c2)``, a constant pair, or a
    :class:`ConcentrationPath` (interpreted as piecewise constant on its
    grid, integrated segment by segment so the discontinuities are honored).
    """
    from scipy.integrate import solve_ivp

    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    y = [float(state[0]), float(state[1])]
    if t_end == t_start:
        return DisperseState(*y)
    n = law.exponent_n

    def rhs_factory(conc_at):
        def rhs(t, y):
            c1, c2 = conc_at(t)
            g1, g2 = law.rates(float(c1), float(c2))
            tot = g1 + g2
            return [tot * y[0] ** n,
                    3.0 * (g1 - tot * y[1]) * y[0] ** (n - 1.0)]
        return rhs

    if isinstance(concentration, ConcentrationPath):
        times = concentration.times
        vals = concentration.values
        nodes = _segment_nodes(times, t_start, t_end)
        checkpoints = [t_start, *nodes, t_end]

        def conc_at_factory(t_mid):
            ell = min(max(np.searchsorted(times, t_mid, side="right") - 1, 0),
                      len(times) - 2 if len(times) > 1 else 0)
            c = (float(vals[ell, 0]), float(vals[ell, 1]))
            return lambda t: c
    elif callable(concentration):
        checkpoints = [t_start, t_end]

        def conc_at_factory(t_mid):
            return concentration
    else:
        c_const = (float(concentration[0]), float(concentration[1]))
        checkpoints = [t_start, t_end]

        def conc_at_factory(t_mid):
            return lambda t: c_const

    for a, b in zip(checkpoints[:-1], checkpoints[1:]):
        if a == b:
            continue
        sol = solve_ivp(rhs_factory(conc_at_factory(0.5 * (a + b))),
                        (a, b), y, method="RK45", rtol=tol, atol=tol)
        if not sol.success:
            raise NumericsError(f"reference ODE integration failed on "
                                f"[{a}, {b}]: {sol.message}")
        y = [float(sol.y[0, -1]), float(sol.y[1, -1])]
    return DisperseState(*y)
