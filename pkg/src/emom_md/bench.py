"""Error norms, convergence slopes, and refinement/timing studies.

Degrees of freedom are counted as n_time * n_points for the fixed-point
solver and steps * cells for the finite-volume baseline, so both methods are
compared on one axis.  Reported timings wrap the solve call only (no I/O);
the median over a configurable number of repetitions is used.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fvm import FvmGridSpec, fvm_solve
from .model import ConcentrationPath, GrowthLaw, InitialDensity, ProcessConfig
from .solver import EmomGridSpec, solve


@dataclass(frozen=True)
class ErrorNorms:
    linf: tuple  # per component
    l2: tuple

    @property
    def linf_max(self) -> float:
        return max(self.linf)

    @property
    def l2_max(self) -> float:
        return max(self.l2)


def _restricts_to(coarse: np.ndarray, fine: np.ndarray) -> np.ndarray | None:
    """Indices of coarse grid nodes inside the fine grid, or None if the
    coarse grid is not (numerically) a subset of the fine one."""
    idx = np.searchsorted(fine, coarse)
    idx = np.clip(idx, 0, fine.size - 1)
    left = np.clip(idx - 1, 0, fine.size - 1)
    pick = np.where(np.abs(fine[left] - coarse)
                    < np.abs(fine[idx] - coarse), left, idx)
    tol = 1e-9 * max(float(coarse[-1]), 1.0)
    if np.all(np.abs(fine[pick] - coarse) <= tol):
        return pick
    return None


def error_norms(path_a: ConcentrationPath, path_b: ConcentrationPath,
                interpolate: bool = False) -> ErrorNorms:
    """Per-component L-infinity and L2 distances between two concentration
    paths, evaluated on ``path_a``'s grid.

    ``path_b`` (the reference) must contain ``path_a``'s time grid, unless
    ``interpolate=True`` allows linear interpolation of the reference.  The
    L2 norm is the time quadrature (trapezoid) of the squared differences.
    """
    ta = path_a.times
    if path_b.n_times == path_a.n_times and np.allclose(
            path_b.times, ta, rtol=0.0, atol=1e-12 * max(ta[-1], 1.0)):
        ref = path_b.values
    else:
        pick = _restricts_to(ta, path_b.times)
        if pick is not None:
            ref = path_b.values[pick]
        elif interpolate:
            ref = np.column_stack([
                np.interp(ta, path_b.times, path_b.values[:, 0]),
                np.interp(ta, path_b.times, path_b.values[:, 1])])
        else:
            raise ValueError("incompatible time grids; pass interpolate=True")
    diff = path_a.values - ref
    linf = tuple(float(v) for v in np.max(np.abs(diff), axis=0))
    if ta.size > 1:
        l2 = tuple(float(np.sqrt(np.trapezoid(diff[:, i] ** 2, ta)))
                   for i in range(2))
    else:
        l2 = (0.0, 0.0)
    return ErrorNorms(linf=linf, l2=l2)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    ci95: tuple
    n_points: int


def fit_slope(points: Iterable) -> SlopeFit:
    """Least-squares slope of log10(error) against log10(dof).

    ``points`` is a sequence of (dof, error) pairs, at least 3, all positive.
    The confidence interval uses the two-sided Student t quantile.
    """
    pts = [(float(d), float(e)) for d, e in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit a slope")
    if any(d <= 0.0 or e <= 0.0 for d, e in pts):
        raise ValueError("slope fit requires positive sizes and errors")
    x = np.log10([d for d, _ in pts])
    y = np.log10([e for _, e in pts])
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx <= 0.0:
        raise ValueError("degenerate spread: all sizes equal")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof_fit = len(pts) - 2
    stderr = float(np.sqrt(np.sum(resid ** 2) / dof_fit / sxx)) \
        if dof_fit > 0 else 0.0
    from scipy.stats import t as student_t
    tq = float(student_t.ppf(0.975, dof_fit)) if dof_fit > 0 else 0.0
    return SlopeFit(slope=slope, intercept=intercept, stderr=stderr,
                    ci95=(slope - tq * stderr, slope + tq * stderr),
                    n_points=len(pts))


def interp_loglog(x: float, xs: Sequence, ys: Sequence) -> float:
    """Log-log linear interpolation with constant extension outside the hull."""
    lx = np.log10(np.asarray(xs, dtype=float))
    ly = np.log10(np.asarray(ys, dtype=float))
    order = np.argsort(lx)
    return float(10.0 ** np.interp(np.log10(x), lx[order], ly[order]))


def timed(fn, repetitions: int = 1):
    """Median wall-clock seconds over ``repetitions`` calls plus the result
    of the last call."""
    samples = []
    result = None
    for _ in range(max(1, repetitions)):
        t0 = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples)), result


@dataclass
class RefinementRow:
    n_time: int
    n_points: int
    dof: int
    norms: ErrorNorms
    runtime_s: float


def time_refinement_study(cfg: ProcessConfig, q0: InitialDensity,
                          law: GrowthLaw, resolution, ladder: Sequence,
                          reference_n_time: int, rule: str = "midpoint",
                          threads: int = 1):
    """Errors of the concentration path under time refinement at fixed
    quadrature, against a reference on the same quadrature with
    ``reference_n_time`` points.  Returns (rows, slope fit of the
    L-infinity error against n_time)."""
    ref = solve(cfg, q0, law,
                EmomGridSpec(reference_n_time, resolution, rule),
                threads=threads)
    rows = []
    for n_time in ladder:
        spec = EmomGridSpec(int(n_time), resolution, rule)
        runtime, res = timed(lambda: solve(cfg, q0, law, spec,
                                           threads=threads))
        norms = error_norms(res.path, ref.path, interpolate=True)
        rows.append(RefinementRow(
            n_time=int(n_time), n_points=res.quadrature.n_points,
            dof=res.dof, norms=norms, runtime_s=runtime))
    fit = fit_slope([(r.n_time, r.norms.linf_max) for r in rows])
    return rows, fit


@dataclass
class ComparisonRow:
    method: str
    n_time: int          # time points (emom) or steps (fvm)
    n_space: int         # quadrature points (emom) or cells (fvm)
    dof: int
    norms: ErrorNorms
    runtime_s: float


def dof_comparison_study(cfg: ProcessConfig, q0: InitialDensity,
                         law: GrowthLaw, emom_ladder: Sequence,
                         fvm_ladder: Sequence, reference,
                         rule: str = "midpoint", cfl: float = 0.45,
                         repetitions: int = 1, threads: int = 1,
                         r_max: float | None = None):
    """Paired error-vs-DoF study of both methods against a fine fixed-point
    reference.

    ``emom_ladder``: (n_time, n1, n2) triples.  ``fvm_ladder``: (m1, m2)
    pairs.  ``reference``: (n_time, n1, n2) for the reference run.  Returns
    (rows, {method: slope fit of the max-component L2 error vs DoF}).
    """
    rn, r1, r2 = reference
    ref = solve(cfg, q0, law, EmomGridSpec(int(rn), (int(r1), int(r2)), rule),
                threads=threads)
    rows = []
    for n_time, n1, n2 in emom_ladder:
        spec = EmomGridSpec(int(n_time), (int(n1), int(n2)), rule)
        runtime, res = timed(lambda: solve(cfg, q0, law, spec,
                                           threads=threads), repetitions)
        norms = error_norms(res.path, ref.path, interpolate=True)
        rows.append(ComparisonRow("emom", int(n_time),
                                  res.quadrature.n_points, res.dof, norms,
                                  runtime))
    for m1, m2 in fvm_ladder:
        spec = FvmGridSpec(cells=(int(m1), int(m2)), cfl=cfl, r_max=r_max)
        runtime, res = timed(lambda: fvm_solve(cfg, q0, law, spec),
                             repetitions)
        norms = error_norms(res.path, ref.path, interpolate=True)
        rows.append(ComparisonRow("fvm", res.steps, res.grid.q.size,
                                  res.dof, norms, runtime))
    fits = {}
    for method in ("emom", "fvm"):
        pts = [(r.dof, r.norms.l2_max) for r in rows if r.method == method]
        if len(pts) >= 3:
            fits[method] = fit_slope(pts)
    return rows, fits


def complexity_timing_study(cfg: ProcessConfig, q0: InitialDensity,
                            law: GrowthLaw, sizes: Sequence,
                            repetitions: int = 3, rule: str = "midpoint",
                            threads: int = 1):
    """Median wall-clock of the solve against n_time * n_points.

    Returns (rows of (n_time, n_points, dof, seconds), slope fit)."""
    rows = []
    for n_time, n1, n2 in sizes:
        spec = EmomGridSpec(int(n_time), (int(n1), int(n2)), rule)
        runtime, res = timed(lambda: solve(cfg, q0, law, spec,
                                           threads=threads), repetitions)
        rows.append((int(n_time), res.quadrature.n_points, res.dof, runtime))
    fit = fit_slope([(dof, sec) for _, _, dof, sec in rows])
    return rows, fit
