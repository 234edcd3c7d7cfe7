"""Command-line front end.

    emom-md <subcommand> --config <file> --out <dir> [--threads N]
            [--reproducible] [--no-plots]

Subcommands: solve, reconstruct, radial, convergence, compare.  Every run
writes full-precision CSVs, companion PNG figures (unless --no-plots), and a
manifest with grids, versions, and wall-clock.  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import bench, plots, reconstruction
from .config import RunSpec, load_config
from .exceptions import ConfigError, NumericsError
from .output import write_csv, write_manifest
from .solver import solve


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="experiment TOML file")(fn)
    fn = click.option("--out", "out_dir", required=True, type=click.Path(),
                      help="output directory (created if missing)")(fn)
    fn = click.option("--threads", default=1, show_default=True,
                      help="solver worker threads (results are "
                           "thread-count independent)")(fn)
    fn = click.option("--reproducible", is_flag=True,
                      help="record reproducible mode in the manifest "
                           "(outputs are deterministic either way)")(fn)
    fn = click.option("--no-plots", "no_plots", is_flag=True,
                      help="skip figure rendering")(fn)
    return fn


class _Runner:
    def __init__(self, command, config_path, out_dir, threads, reproducible,
                 no_plots):
        self.command = command
        self.config_path = config_path
        self.spec: RunSpec = load_config(config_path)
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.threads = threads
        self.reproducible = reproducible
        self.plots = not no_plots
        self.outputs = []
        self.notes = {}
        self._t0 = time.perf_counter()

    def csv(self, name, header, rows):
        path = write_csv(self.out / name, header, rows)
        self.outputs.append(path.name)
        return path

    def figure(self, name, render):
        if self.plots:
            render(self.out / name)
            self.outputs.append(name)

    def finish(self):
        wall = time.perf_counter() - self._t0
        manifest = write_manifest(
            self.out, command=self.command, config_path=self.config_path,
            config=self.spec.raw, outputs=self.outputs, wall_clock_s=wall,
            flags={"threads": self.threads,
                   "reproducible": self.reproducible,
                   "plots": self.plots},
            notes=self.notes)
        click.echo(f"wrote {len(self.outputs)} files + {manifest.name} "
                   f"to {self.out}")


@click.group()
def cli():
    """Population balance solver kit: fixed-point scheme, finite-volume
    baseline, reconstruction, and convergence benchmarks."""


def _solve_path(runner, n_time=None):
    spec = runner.spec
    grid = spec.emom_grid if n_time is None else type(spec.emom_grid)(
        n_time, spec.emom_grid.resolution, spec.emom_grid.rule)
    return solve(spec.process, spec.initial_density, spec.law, grid,
                 threads=runner.threads)


@cli.command("solve")
@_common_options
def solve_cmd(**kw):
    """Run the fixed-point solver and write the concentration path."""
    runner = _Runner("solve", **kw)
    result = _solve_path(runner)
    path = result.path
    runner.csv("concentrations.csv", ["t", "c1", "c2"],
               zip(path.times, path.c1, path.c2))
    runner.figure("concentrations.png",
                  lambda f: plots.save_concentration_plot(
                      path, f, runner.spec.run.label))
    runner.notes["n_time"] = path.n_times
    runner.notes["n_points"] = result.quadrature.n_points
    runner.notes["negative_concentration_steps"] = \
        result.negative_concentration_steps
    click.echo(f"final concentrations: c1 = {path.c1[-1]:.6g}, "
               f"c2 = {path.c2[-1]:.6g}")
    runner.finish()


@cli.command()
@_common_options
def reconstruct(**kw):
    """Solve, then evaluate the number density on snapshot grids."""
    runner = _Runner("reconstruct", **kw)
    spec = runner.spec
    if spec.initial_density.is_dirac:
        raise ConfigError("a Dirac seed has no pointwise density; use the "
                          "'radial' subcommand for its structure")
    result = _solve_path(runner)
    path = result.path
    times = spec.run.snapshot_times or (
        0.0, spec.process.horizon / 2.0, spec.process.horizon)
    for t_req in times:
        k = int(np.argmin(np.abs(path.times - t_req)))
        snap = reconstruction.snapshot_backward(
            k, path, spec.law, spec.initial_density,
            shape=spec.run.snapshot_grid, x_min=spec.process.x_min)
        runner.csv(f"psd_t{k}.csv", ["x1", "x2", "q"],
                   zip(snap.x1, snap.x2, snap.values))
        runner.figure(f"psd_t{k}.png",
                      lambda f, s=snap: plots.save_psd_plot(s, f))
        mom = reconstruction.moments(snap, spec.process)
        click.echo(f"t = {snap.time:g} (index {k}): number = "
                   f"{mom.number:.6g}, mean radius = {mom.mean_radius:.6g}, "
                   f"mean composition = {mom.mean_composition:.4g}")
    runner.finish()


@cli.command()
@_common_options
def radial(**kw):
    """Solve, then reconstruct the inner-particle radial composition."""
    runner = _Runner("radial", **kw)
    spec = runner.spec
    seed = spec.run.radial_seed
    if seed is None:
        box = spec.initial_density.support_box
        seed = (0.5 * (box.x1_min + box.x1_max),
                0.5 * (box.x2_min + box.x2_max))
    result = _solve_path(runner)
    profile = reconstruction.radial_composition(seed, result.path, spec.law)
    runner.csv("radial_profile.csv", ["radius", "fraction"],
               zip(profile.radii, profile.fractions))
    runner.figure("radial_profile.png",
                  lambda f: plots.save_radial_plot(
                      [(runner.spec.run.label, profile)], f))
    if profile.n_undefined:
        click.echo(f"note: {profile.n_undefined} instants had zero total "
                   "growth rate and were omitted")
    click.echo(f"profile spans radii [{profile.radii[0]:.6g}, "
               f"{profile.radii[-1]:.6g}] over {profile.radii.size} shells")
    runner.finish()


@cli.command()
@_common_options
def convergence(**kw):
    """Time-refinement ladder against a fine reference; fitted error slope."""
    runner = _Runner("convergence", **kw)
    spec = runner.spec
    rows, fit = bench.time_refinement_study(
        spec.process, spec.initial_density, spec.law,
        spec.emom_grid.resolution, spec.run.time_ladder,
        spec.run.reference_n_time, rule=spec.emom_grid.rule,
        threads=runner.threads)
    runner.csv("errors.csv",
               ["n_time", "n_points", "dof", "linf_c1", "linf_c2", "linf",
                "l2_c1", "l2_c2", "l2"],
               [(r.n_time, r.n_points, r.dof, *r.norms.linf,
                 r.norms.linf_max, *r.norms.l2, r.norms.l2_max)
                for r in rows])
    runner.csv("slopes.csv",
               ["quantity", "slope", "stderr", "ci_low", "ci_high",
                "n_points"],
               [("linf_vs_n_time", fit.slope, fit.stderr, *fit.ci95,
                 fit.n_points)])
    runner.figure("convergence.png",
                  lambda f: plots.save_convergence_plot(
                      [r.n_time for r in rows],
                      [r.norms.linf_max for r in rows], fit.slope, f))
    runner.notes["reference_n_time"] = spec.run.reference_n_time
    click.echo(f"fitted L-infinity slope vs n_time: {fit.slope:.3f} "
               f"(95% CI {fit.ci95[0]:.3f} .. {fit.ci95[1]:.3f})")
    runner.finish()


@cli.command()
@_common_options
def compare(**kw):
    """Error-vs-DoF and error-vs-runtime ladders for both methods."""
    runner = _Runner("compare", **kw)
    spec = runner.spec
    cfl = spec.fvm_grid.cfl if spec.fvm_grid is not None else 0.45
    r_max = spec.fvm_grid.r_max if spec.fvm_grid is not None else None
    rows, fits = bench.dof_comparison_study(
        spec.process, spec.initial_density, spec.law,
        spec.run.emom_dof_ladder, spec.run.fvm_dof_ladder,
        spec.run.comparison_reference, rule=spec.emom_grid.rule, cfl=cfl,
        repetitions=spec.run.timing_repetitions, threads=runner.threads,
        r_max=r_max)
    runner.csv("errors.csv",
               ["method", "n_time", "n_space", "dof", "runtime_s",
                "linf_c1", "linf_c2", "linf", "l2_c1", "l2_c2", "l2"],
               [(r.method, r.n_time, r.n_space, r.dof, r.runtime_s,
                 *r.norms.linf, r.norms.linf_max, *r.norms.l2,
                 r.norms.l2_max) for r in rows])
    runner.csv("slopes.csv",
               ["method", "slope", "stderr", "ci_low", "ci_high",
                "n_points"],
               [(m, f.slope, f.stderr, *f.ci95, f.n_points)
                for m, f in sorted(fits.items())])
    runner.figure("comparison.png",
                  lambda f: plots.save_comparison_plot(rows, f))
    runner.notes["comparison_reference"] = list(
        spec.run.comparison_reference)
    runner.notes["fvm_time_integrator"] = \
        "forward Euler, dimension-split, van Leer limited"
    runner.notes["dof_accounting"] = \
        "emom: n_time * n_points; fvm: steps * cells"
    for method, fit in sorted(fits.items()):
        click.echo(f"{method}: L2 error slope vs DoF = {fit.slope:.3f} "
                   f"(95% CI {fit.ci95[0]:.3f} .. {fit.ci95[1]:.3f})")
    runner.finish()


def run_main(argv=None) -> int:
    """Entry point returning the process exit code."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 130
    except click.exceptions.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return 2
    except NumericsError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 3
    return 0


def main():
    sys.exit(run_main())
