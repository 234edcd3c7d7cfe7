"""Domain types for the two-component growth model.

A particle is described by two disperse properties: its radius ``x1`` and the
volume fraction ``x2`` of the first chemical component.  Particles grow by
simultaneous deposition of two solute species; the deposition rates are given
by a :class:`GrowthLaw` evaluated at the current solute concentrations.  This
module holds the state/parameter containers, the 2D growth velocity field,
the per-component volume maps, and tensor-product quadrature rules over the
support of the initial number density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import ConfigError

FOUR_THIRDS_PI = 4.0 * math.pi / 3.0


class DisperseState(NamedTuple):
    """A point in disperse-property space: (radius, component-1 fraction)."""

    x1: float
    x2: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in disperse-property space."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def __post_init__(self):
        if self.x1_max < self.x1_min or self.x2_max < self.x2_min:
            raise ConfigError(f"degenerate box: {self}")

    @property
    def width1(self) -> float:
        return self.x1_max - self.x1_min

    @property
    def width2(self) -> float:
        return self.x2_max - self.x2_min

    @property
    def area(self) -> float:
        return self.width1 * self.width2

    def contains(self, x1, x2):
        return (
            (x1 >= self.x1_min) & (x1 <= self.x1_max)
            & (x2 >= self.x2_min) & (x2 <= self.x2_max)
        )

    def expanded(self, rel_margin: float) -> "Box":
        m1 = rel_margin * max(self.width1, 1e-300)
        m2 = rel_margin * max(self.width2, 1e-300)
        return Box(self.x1_min - m1, self.x1_max + m1,
                   self.x2_min - m2, self.x2_max + m2)


@dataclass(frozen=True)
class GrowthLaw:
    """Pair of concentration-to-rate maps plus the size exponent.

    ``rate1``/``rate2`` map a solute concentration to a growth rate; both must
    accept numpy arrays.  ``exponent_n`` is the radius exponent of the radial
    growth speed.  ``exponent_n == 1`` is rejected because the closed-form
    radius update divides by ``1 - n``.

    Rates must be nonnegative on admissible concentrations: the boundedness
    guarantee for the composition update needs it.  Constructing a law with
    ``allow_negative_rates=True`` lifts the runtime check but forfeits the
    guarantee.
    """

    rate1: Callable
    rate2: Callable
    exponent_n: float
    allow_negative_rates: bool = False

    def __post_init__(self):
        if self.exponent_n == 1.0:
            raise ConfigError("size exponent n = 1 is not supported "
                              "(radius update divides by 1 - n)")

    def rates(self, c1: float, c2: float, clamp: bool = True):
        """Evaluate (G1, G2) at the given concentrations.

        ``clamp=True`` evaluates at ``max(c, 0)``, the default guard against
        explicit-Euler overshoot of the consumption step.
        """
        if clamp:
            c1 = c1 if c1 > 0.0 else 0.0
            c2 = c2 if c2 > 0.0 else 0.0
        g1 = float(self.rate1(c1))
        g2 = float(self.rate2(c2))
        if not (math.isfinite(g1) and math.isfinite(g2)):
            raise ValueError(f"non-finite growth rate at c=({c1}, {c2}): "
                             f"G=({g1}, {g2})")
        if not self.allow_negative_rates and (g1 < 0.0 or g2 < 0.0):
            raise ValueError(f"negative growth rate at c=({c1}, {c2}): "
                             f"G=({g1}, {g2}); construct the law with "
                             "allow_negative_rates=True to permit this")
        return g1, g2

    @classmethod
    def linear(cls, a1: float, a2: float, exponent_n: float = 0.0) -> "GrowthLaw":
        """G_i(c) = a_i * c."""
        if a1 < 0.0 or a2 < 0.0:
            raise ConfigError("linear kinetics coefficients must be >= 0")
        return cls(lambda c: a1 * c, lambda c: a2 * c, exponent_n)

    @classmethod
    def power(cls, a1: float, p1: float, a2: float, p2: float,
              exponent_n: float = 0.0) -> "GrowthLaw":
        """G_i(c) = a_i * c**p_i (p_i = 0 gives a constant rate)."""
        if a1 < 0.0 or a2 < 0.0:
            raise ConfigError("power kinetics coefficients must be >= 0")
        return cls(lambda c: a1 * np.power(c, p1),
                   lambda c: a2 * np.power(c, p2), exponent_n)


def _default_feed(cfg: "ProcessConfig"):
    raise ConfigError("feed mass is auto-calibrated; resolve via solver init")


@dataclass(frozen=True)
class ProcessConfig:
    """Reactor and material parameters.

    ``feed_mass`` maps time to the pair of total fed masses ``(m1, m2)``.
    When ``None`` the solver calibrates a constant feed so that the initial
    concentrations come out exactly at ``initial_concentrations`` for the
    discretization in use (batch process).

    ``volume1``/``volume2`` are the per-component volume maps ``V_i(x1, x2)``.
    The defaults split a sphere by the composition fraction,
    ``V1 = (4/3) pi x1^3 x2`` and ``V2 = (4/3) pi x1^3 (1 - x2)``.  They clamp
    the composition to [0, 1] and return 0 for negative radii.

    The solver is unit-agnostic; ``units`` is a free-text annotation only.
    """

    reactor_volume: float
    densities: tuple
    initial_concentrations: tuple
    x_min: float
    horizon: float
    feed_mass: Callable | None = None
    volume1: Callable | None = None
    volume2: Callable | None = None
    on_negative_concentration: str = "clamp"
    units: str = "dimensionless"

    def __post_init__(self):
        if self.reactor_volume <= 0.0:
            raise ConfigError("reactor_volume must be > 0")
        if len(self.densities) != 2 or min(self.densities) <= 0.0:
            raise ConfigError("densities must be two positive numbers")
        if len(self.initial_concentrations) != 2:
            raise ConfigError("initial_concentrations must have two entries")
        if self.x_min <= 0.0:
            raise ConfigError("x_min must be > 0")
        # horizon 0 is allowed: it yields the degenerate one-entry path
        if self.horizon < 0.0 or not math.isfinite(self.horizon):
            raise ConfigError("horizon must be finite and >= 0")
        if self.on_negative_concentration not in ("clamp", "abort"):
            raise ConfigError("on_negative_concentration must be "
                              "'clamp' or 'abort'")

    def component_volume(self, i: int, x1, x2):
        """Volume of component ``i`` (1 or 2) in a particle of shape (x1, x2)."""
        if i not in (1, 2):
            raise ValueError(f"component index must be 1 or 2, got {i}")
        custom = self.volume1 if i == 1 else self.volume2
        if custom is not None:
            return custom(x1, x2)
        x2c = np.clip(x2, 0.0, 1.0)
        frac = x2c if i == 1 else 1.0 - x2c
        vol = FOUR_THIRDS_PI * np.power(x1, 3) * frac
        return np.where(np.asarray(x1) < 0.0, 0.0, vol) if np.ndim(x1) else (
            0.0 if x1 < 0.0 else float(vol))

    def has_default_volumes(self) -> bool:
        return self.volume1 is None and self.volume2 is None

    def validate_state(self, state: DisperseState):
        if not (state.x1 >= self.x_min and 0.0 <= state.x2 <= 1.0):
            raise ValueError(f"state {state} outside the admissible set "
                             f"[{self.x_min}, inf) x [0, 1]")


def component_volume(cfg: ProcessConfig, i: int, state) -> float:
    """Module-level convenience wrapper around ProcessConfig.component_volume."""
    x1, x2 = state
    return float(cfg.component_volume(i, x1, x2))


@dataclass(frozen=True)
class InitialDensity:
    """Initial number density with an explicit bounding box of its support.

    ``density`` evaluates q0 pointwise (vectorized); the value is forced to 0
    outside ``support_box``.  A monodisperse (Dirac) seed is represented by
    ``dirac = (state, count)`` instead of a pointwise density; it is carried
    through the solver as a single weighted quadrature point.
    """

    density: Callable | None
    support_box: Box
    dirac: tuple | None = None

    def __post_init__(self):
        if (self.density is None) == (self.dirac is None):
            raise ConfigError("exactly one of density / dirac must be set")
        if self.dirac is not None and self.dirac[1] <= 0.0:
            raise ConfigError("dirac seed count must be > 0")

    @property
    def is_dirac(self) -> bool:
        return self.dirac is not None

    def __call__(self, x1, x2):
        if self.is_dirac:
            raise ValueError("a Dirac seed has no pointwise density")
        vals = np.asarray(self.density(np.asarray(x1, dtype=float),
                                       np.asarray(x2, dtype=float)),
                          dtype=float)
        vals = np.where(self.support_box.contains(x1, x2), vals, 0.0)
        if np.any(vals < 0.0):
            raise ValueError("initial density returned negative values")
        return vals if vals.ndim else float(vals)

    @classmethod
    def elliptical_bump(cls, center=(0.1, 0.75), halfwidth=(0.05, 0.25),
                        amplitude=1.0) -> "InitialDensity":
        """Compactly supported C^1 bump: amplitude * max(1 - u^2 - v^2, 0)^2
        with u, v the coordinates scaled to the half-widths."""
        cx1, cx2 = center
        d1, d2 = halfwidth
        if d1 <= 0.0 or d2 <= 0.0:
            raise ConfigError("bump halfwidths must be > 0")

        def bump(x1, x2):
            g = 1.0 - ((x1 - cx1) / d1) ** 2 - ((x2 - cx2) / d2) ** 2
            return amplitude * np.maximum(g, 0.0) ** 2

        box = Box(cx1 - d1, cx1 + d1, cx2 - d2, cx2 + d2)
        return cls(density=bump, support_box=box)

    @classmethod
    def dirac_seed(cls, state: DisperseState, count: float) -> "InitialDensity":
        box = Box(state[0], state[0], state[1], state[1])
        return cls(density=None, support_box=box, dirac=(DisperseState(*state), count))


@dataclass(frozen=True)
class Quadrature:
    """Quadrature points and positive weights over the initial support."""

    points: np.ndarray   # (N, 2)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("points must have shape (N, 2)")
        if self.weights.shape != (self.points.shape[0],):
            raise ValueError("weights must have shape (N,)")
        if np.any(self.weights <= 0.0):
            raise ValueError("all quadrature weights must be > 0")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def x1(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def x2(self) -> np.ndarray:
        return self.points[:, 1]


def _midpoint_axis(lo: float, hi: float, n: int):
    h = (hi - lo) / n
    nodes = lo + h * (np.arange(n) + 0.5)
    return nodes, np.full(n, h)


def _gauss_axis(lo: float, hi: float, n: int):
    from scipy.special import roots_legendre
    nodes, w = roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * w


def build_quadrature(q0: InitialDensity, resolution, rule: str = "midpoint") -> Quadrature:
    """Tensor-product quadrature over the support box of ``q0``.

    ``resolution`` is the per-axis point count ``(n1, n2)``.  ``rule`` is
    ``"midpoint"`` (composite, order 2, robust for the C^1 bump datum) or
    ``"gauss"`` (single tensor Gauss-Legendre rule over the box).  Weights sum
    to the box area.  A Dirac seed collapses to one point whose weight is the
    seed count, regardless of ``resolution``.
    """
    if q0.is_dirac:
        state, count = q0.dirac
        return Quadrature(points=np.array([[state.x1, state.x2]]),
                          weights=np.array([count]))
    box = q0.support_box
    if box.area <= 0.0:
        raise ConfigError("support box has zero area; quadrature would be empty")
    try:
        n1, n2 = (int(resolution[0]), int(resolution[1]))
    except TypeError:
        n1 = n2 = int(resolution)
    if n1 < 1 or n2 < 1:
        raise ConfigError("quadrature resolution must be >= 1 per axis")
    axis = {"midpoint": _midpoint_axis, "gauss": _gauss_axis}.get(rule)
    if axis is None:
        raise ConfigError(f"unknown quadrature rule {rule!r}")
    nodes1, w1 = axis(box.x1_min, box.x1_max, n1)
    nodes2, w2 = axis(box.x2_min, box.x2_max, n2)
    p1, p2 = np.meshgrid(nodes1, nodes2, indexing="ij")
    weights = np.outer(w1, w2)
    return Quadrature(points=np.column_stack([p1.ravel(), p2.ravel()]),
                      weights=weights.ravel())


@dataclass(frozen=True)
class ConcentrationPath:
    """Time grid and per-component solute concentrations.

    ``times`` is strictly increasing with ``times[0] == 0``; ``values`` has
    shape ``(n_times, 2)``.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("times must be a non-empty 1D array")
        if t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise ValueError("time grid must be strictly increasing")
        if v.shape != (t.size, 2):
            raise ValueError("values must have shape (n_times, 2)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def n_times(self) -> int:
        return self.times.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def c1(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def c2(self) -> np.ndarray:
        return self.values[:, 1]

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.times)

    @classmethod
    def constant(cls, horizon: float, c1: float, c2: float, n_times: int = 2
                 ) -> "ConcentrationPath":
        """Constant-in-time path, handy for tests and synthetic studies."""
        t = np.linspace(0.0, horizon, n_times)
        return cls(times=t, values=np.tile([c1, c2], (n_times, 1)))


def growth_velocities(law: GrowthLaw, conc, x1, x2):
    """Vectorized 2D growth velocity field at concentrations ``conc``.

    Returns ``(dx1/dt, dx2/dt)`` with
    ``dx1/dt = (G1 + G2) x1^n`` and
    ``dx2/dt = 3 (G1 - (G1 + G2) x2) x1^(n-1)``.
    """
    g1, g2 = law.rates(conc[0], conc[1], clamp=False)
    n = law.exponent_n
    total = g1 + g2
    v1 = total * np.power(x1, n) if n != 0.0 else np.broadcast_to(
        float(total), np.shape(x1)).copy() if np.ndim(x1) else float(total)
    v2 = 3.0 * (g1 - total * np.asarray(x2)) * np.power(x1, n - 1.0)
    return v1, v2


def growth_field(law: GrowthLaw, conc, state: DisperseState):
    """Growth velocity of a single particle state; raises on x1 <= 0."""
    x1, x2 = state
    if x1 <= 0.0:
        raise ValueError(f"growth field undefined at nonpositive radius {x1}")
    v1, v2 = growth_velocities(law, conc, x1, x2)
    return float(v1), float(v2)


def calibrated_feed_mass(cfg: ProcessConfig, q0_weighted_volumes) -> tuple:
    """Constant feed masses that reproduce the configured initial
    concentrations exactly for the discrete initial population:
    ``m_i = V c_i(0) + rho_i * sum_l V_i(x_l) q0(x_l) w_l``."""
    s1, s2 = q0_weighted_volumes
    m1 = cfg.reactor_volume * cfg.initial_concentrations[0] + cfg.densities[0] * s1
    m2 = cfg.reactor_volume * cfg.initial_concentrations[1] + cfg.densities[1] * s2
    return m1, m2
