"""Post-hoc evaluation of the number density and inner-particle structure.

Once the concentration path is known, the full number density follows from
the characteristics: evaluated backward on an arbitrary grid,

    q(t_k, x) = q0(xi(k, x, 0)) * (xi1(k, x, 0) / x1)^n * Psi,

or pushed forward from the initial support,

    q(t_k, xi(0, x, k)) = q0(x) * (x1 / xi1(0, x, k))^n / Psi_fwd,

with the Jacobian factors accumulated along the radius trajectory.  States
whose backward pre-image falls outside the initial population have q = 0.

The inner-particle radial composition of a particle seeded at x0 is the
fraction G1 / (G1 + G2) evaluated at the deposition time of each radial
shell, i.e. along the radius trajectory of the seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .characteristics import (forward_density_data, jacobian_factor_many,
                              radius_trajectory, xi_multi_step_many)
from .exceptions import ConfigError
from .model import (FOUR_THIRDS_PI, Box, ConcentrationPath, DisperseState,
                    GrowthLaw, InitialDensity, ProcessConfig, Quadrature)


@dataclass(frozen=True)
class PsdSnapshot:
    """Density values at one time index, with a number measure per state.

    ``measure`` is the per-state contribution to number integrals, so that
    ``integral f(x) q(t, x) dx ~= sum f(states) * measure``.  For backward
    (grid) snapshots it is value * cell area; for forward snapshots it is
    the initial-population weight carried along the characteristic.
    ``values`` is ``None`` for a Dirac seed (no pointwise density exists).
    """

    time_index: int
    time: float
    mode: str
    x1: np.ndarray
    x2: np.ndarray
    measure: np.ndarray
    values: Optional[np.ndarray] = None
    grid_shape: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("backward-on-grid", "forward-from-support"):
            raise ValueError(f"unknown snapshot mode {self.mode!r}")
        if self.values is not None and np.any(self.values < 0.0):
            raise ValueError("snapshot density values must be >= 0")

    @property
    def n_states(self) -> int:
        return self.x1.size


@dataclass(frozen=True)
class RadialProfile:
    """Component-1 fraction deposited at each radial shell of one particle."""

    seed: DisperseState
    final_index: int
    radii: np.ndarray
    fractions: np.ndarray
    n_undefined: int = 0

    def __post_init__(self):
        if self.radii.shape != self.fractions.shape:
            raise ValueError("radii and fractions must have equal length")
        if np.any((self.fractions < 0.0) | (self.fractions > 1.0)):
            raise ValueError("fractions must lie in [0, 1]")


@dataclass(frozen=True)
class Moments:
    number: float
    mean_radius: float
    mean_composition: float
    volume1: float
    volume2: float
    raw: dict = field(default_factory=dict)


def evaluate_q_backward(k: int, state, path: ConcentrationPath,
                        law: GrowthLaw, q0: InitialDensity,
                        x_min: float | None = None) -> float:
    """Density at (time index k, state) via the backward solution formula.

    Returns 0 when the backward characteristic has no ancestor in the
    support of the initial population.
    """
    vals = evaluate_q_backward_many(k, np.atleast_1d(float(state[0])),
                                    np.atleast_1d(float(state[1])),
                                    path, law, q0, x_min)
    return float(vals[0])


def evaluate_q_backward_many(k: int, x1, x2, path, law,
                             q0: InitialDensity, x_min=None) -> np.ndarray:
    if q0.is_dirac:
        raise ValueError("a Dirac seed has no pointwise density to evaluate")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1_0, x2_0, psi, ratio, valid = jacobian_factor_many(
        k, x1, x2, path, law, x_min)
    out = np.zeros(x1.shape)
    if np.any(valid):
        # clip the tolerated fp drift so q0 sees admissible compositions
        q0_vals = q0(x1_0[valid], np.clip(x2_0[valid], 0.0, 1.0))
        out[valid] = q0_vals * ratio[valid] * psi[valid]
    return out


def evaluate_q_forward(k: int, state, path: ConcentrationPath,
                       law: GrowthLaw, q0: InitialDensity):
    """Push one initial state forward: returns (mapped state, density there).

    Consistent with :func:`evaluate_q_backward` at the mapped state.
    """
    if q0.is_dirac:
        raise ValueError("a Dirac seed has no pointwise density to evaluate")
    x1k, x2k, psi, ratio = forward_density_data(
        k, np.atleast_1d(float(state[0])), np.atleast_1d(float(state[1])),
        path, law)
    value = float(q0(state[0], state[1])) * float(ratio[0]) * float(psi[0])
    return DisperseState(float(x1k[0]), float(x2k[0])), value


def forward_window(k: int, path: ConcentrationPath, law: GrowthLaw,
                   q0: InitialDensity, margin: float = 0.02,
                   boundary_samples: int = 64) -> Box:
    """Bounding box of the forward image of the support box at time index k.

    The characteristic flow is a diffeomorphism, so the image of the support
    boundary bounds the image; the box of the mapped boundary samples is
    expanded by ``margin`` (relative) on each side.
    """
    box = q0.support_box
    s = np.linspace(0.0, 1.0, boundary_samples)
    ones = np.ones_like(s)
    edges_x1 = np.concatenate([
        box.x1_min + s * box.width1, box.x1_min + s * box.width1,
        box.x1_min * ones, box.x1_max * ones])
    edges_x2 = np.concatenate([
        box.x2_min * ones, box.x2_max * ones,
        box.x2_min + s * box.width2, box.x2_min + s * box.width2])
    m1, m2, valid = xi_multi_step_many(0, edges_x1, edges_x2, k, path, law)
    if not np.all(valid):
        raise RuntimeError("forward mapping of the support failed")
    return Box(float(m1.min()), float(m1.max()),
               float(m2.min()), float(m2.max())).expanded(margin)


def snapshot_backward(k: int, path: ConcentrationPath, law: GrowthLaw,
                      q0: InitialDensity, *, window: Box | None = None,
                      shape=(200, 200), x_min: float | None = None
                      ) -> PsdSnapshot:
    """Evaluate the density on a rectangular midpoint grid over ``window``
    (default: the mapped support bounding box)."""
    if q0.is_dirac:
        raise ValueError("a Dirac seed has no pointwise density; use the "
                         "forward snapshot or the radial profile")
    if window is None:
        window = forward_window(k, path, law, q0)
    n1, n2 = int(shape[0]), int(shape[1])
    h1 = window.width1 / n1
    h2 = window.width2 / n2
    g1 = window.x1_min + h1 * (np.arange(n1) + 0.5)
    g2 = window.x2_min + h2 * (np.arange(n2) + 0.5)
    xx1, xx2 = np.meshgrid(g1, g2, indexing="ij")
    vals = evaluate_q_backward_many(k, xx1.ravel(), xx2.ravel(), path, law,
                                    q0, x_min)
    return PsdSnapshot(time_index=k, time=float(path.times[k]),
                       mode="backward-on-grid", x1=xx1.ravel(),
                       x2=xx2.ravel(), values=vals,
                       measure=vals * (h1 * h2), grid_shape=(n1, n2))


def snapshot_forward(k: int, path: ConcentrationPath, law: GrowthLaw,
                     q0: InitialDensity, quad: Quadrature) -> PsdSnapshot:
    """Push the quadrature points forward to time index k.

    The number measure of each mapped state is the initial-population weight
    q0(x_l) * w_l, which the flow transports exactly.  Density values are
    attached for a pointwise datum and omitted for a Dirac seed.
    """
    x1k, x2k, psi, ratio = forward_density_data(
        k, quad.x1, quad.x2, path, law)
    if q0.is_dirac:
        values = None
        measure = quad.weights.copy()
    else:
        q0_vals = q0(quad.x1, quad.x2)
        values = q0_vals * ratio * psi
        measure = q0_vals * quad.weights
    return PsdSnapshot(time_index=k, time=float(path.times[k]),
                       mode="forward-from-support", x1=x1k, x2=x2k,
                       values=values, measure=measure)


def radial_composition(seed, path: ConcentrationPath, law: GrowthLaw
                       ) -> RadialProfile:
    """Radial composition profile of a particle seeded at ``seed``.

    The shell at radius xi1(0, seed, k) was deposited at time t_k with
    component-1 fraction G1 / (G1 + G2) evaluated at the concentrations of
    that instant.  Instants with vanishing total rate leave the fraction
    undefined; they are omitted and counted in ``n_undefined``.
    """
    radii = radius_trajectory(seed, path, law)
    c1 = np.maximum(path.c1, 0.0)
    c2 = np.maximum(path.c2, 0.0)
    from .characteristics import _eval_rate
    g1 = _eval_rate(law.rate1, c1)
    g2 = _eval_rate(law.rate2, c2)
    total = g1 + g2
    defined = total > 0.0
    frac = np.zeros_like(total)
    frac[defined] = g1[defined] / total[defined]
    return RadialProfile(seed=DisperseState(float(seed[0]), float(seed[1])),
                         final_index=path.n_times - 1,
                         radii=radii[defined], fractions=frac[defined],
                         n_undefined=int(np.count_nonzero(~defined)))


def _default_volumes(x1, x2):
    x2c = np.clip(x2, 0.0, 1.0)
    v = FOUR_THIRDS_PI * x1 ** 3
    return v * x2c, v * (1.0 - x2c)


def moments(snapshot: PsdSnapshot, cfg: ProcessConfig | None = None,
            extra_orders=()) -> Moments:
    """Number, mean state, and component-volume totals of a snapshot.

    ``cfg`` supplies the component volume maps when they differ from the
    default sphere split.  ``extra_orders`` requests raw moments
    ``integral x1^a x2^b q dx`` keyed by ``(a, b)``.
    """
    if snapshot.n_states == 0:
        raise ValueError("empty snapshot")
    mu = snapshot.measure
    number = float(np.sum(mu))
    if cfg is not None and not cfg.has_default_volumes():
        v1 = cfg.component_volume(1, snapshot.x1, snapshot.x2)
        v2 = cfg.component_volume(2, snapshot.x1, snapshot.x2)
    else:
        v1, v2 = _default_volumes(snapshot.x1, snapshot.x2)
    raw = {(a, b): float(np.sum(snapshot.x1 ** a * snapshot.x2 ** b * mu))
           for a, b in extra_orders}
    if number == 0.0:
        return Moments(0.0, 0.0, 0.0, 0.0, 0.0, raw)
    return Moments(
        number=number,
        mean_radius=float(np.sum(snapshot.x1 * mu)) / number,
        mean_composition=float(np.sum(snapshot.x2 * mu)) / number,
        volume1=float(np.sum(v1 * mu)),
        volume2=float(np.sum(v2 * mu)),
        raw=raw)
