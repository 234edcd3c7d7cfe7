"""Experiment configuration: a single TOML file with sections
{process, kinetics, initial_datum, grids, run}.

Unknown keys are rejected with their dotted path (fail fast); values are
validated as they are converted into the typed objects the solvers consume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError
from .fvm import FvmGridSpec
from .model import DisperseState, GrowthLaw, InitialDensity, ProcessConfig
from .solver import EmomGridSpec

_DEFAULT_TIME_LADDER = [100, 316, 1000, 3162, 10000]
_DEFAULT_EMOM_DOF_LADDER = [
    [484, 22, 22], [1024, 32, 32], [2025, 45, 45], [4096, 64, 64],
    [8100, 90, 90], [16384, 128, 128]]
_DEFAULT_FVM_DOF_LADDER = [
    [32, 32], [48, 48], [64, 64], [96, 96], [128, 128],
    [192, 192], [256, 256], [384, 384]]
_DEFAULT_COMPARISON_REFERENCE = [65536, 256, 256]
_DEFAULT_TIMING_SIZES = [[316, 178, 178], [1778, 238, 238], [10000, 316, 316]]


@dataclass(frozen=True)
class RunOptions:
    label: str = "run"
    snapshot_times: tuple = ()
    snapshot_grid: tuple = (200, 200)
    radial_seed: tuple | None = None
    time_ladder: tuple = tuple(_DEFAULT_TIME_LADDER)
    reference_n_time: int = 100000
    emom_dof_ladder: tuple = tuple(map(tuple, _DEFAULT_EMOM_DOF_LADDER))
    fvm_dof_ladder: tuple = tuple(map(tuple, _DEFAULT_FVM_DOF_LADDER))
    comparison_reference: tuple = tuple(_DEFAULT_COMPARISON_REFERENCE)
    timing_sizes: tuple = tuple(map(tuple, _DEFAULT_TIMING_SIZES))
    timing_repetitions: int = 3


@dataclass(frozen=True)
class RunSpec:
    process: ProcessConfig
    law: GrowthLaw
    initial_density: InitialDensity
    emom_grid: EmomGridSpec
    fvm_grid: FvmGridSpec | None
    run: RunOptions
    raw: dict = field(repr=False, default_factory=dict)


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def _check_keys(section: dict, allowed, path: str):
    unknown = set(section) - set(allowed)
    if unknown:
        _fail(f"{path}.{sorted(unknown)[0]}", "unknown key")


def _require(section: dict, key: str, path: str):
    if key not in section:
        _fail(f"{path}.{key}", "missing required key")
    return section[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    return int(value)


def _pair(value, path: str, kind=_number) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(path, f"expected a pair, got {value!r}")
    return (kind(value[0], f"{path}[0]"), kind(value[1], f"{path}[1]"))


def _string(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        _fail(path, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        _fail(path, f"must be one of {sorted(choices)}, got {value!r}")
    return value


def _parse_process(section: dict) -> ProcessConfig:
    path = "process"
    _check_keys(section, {"reactor_volume", "densities",
                          "initial_concentrations", "x_min", "horizon",
                          "units", "on_negative_concentration"}, path)
    try:
        return ProcessConfig(
            reactor_volume=_number(_require(section, "reactor_volume", path),
                                   f"{path}.reactor_volume"),
            densities=_pair(_require(section, "densities", path),
                            f"{path}.densities"),
            initial_concentrations=_pair(
                _require(section, "initial_concentrations", path),
                f"{path}.initial_concentrations"),
            x_min=_number(_require(section, "x_min", path), f"{path}.x_min"),
            horizon=_number(_require(section, "horizon", path),
                            f"{path}.horizon"),
            units=_string(section.get("units", "dimensionless"),
                          f"{path}.units"),
            on_negative_concentration=_string(
                section.get("on_negative_concentration", "clamp"),
                f"{path}.on_negative_concentration", {"clamp", "abort"}))
    except ConfigError:
        raise
    except Exception as exc:  # invariant violations from the dataclass
        _fail(path, str(exc))


def _rate_builder(section: dict, path: str):
    _check_keys(section, {"type", "coefficient", "exponent"}, path)
    kind = _string(_require(section, "type", path), f"{path}.type",
                   {"linear", "power"})
    coeff = _number(_require(section, "coefficient", path),
                    f"{path}.coefficient")
    if coeff < 0.0:
        _fail(f"{path}.coefficient", "must be >= 0 (nonnegative-growth "
              "regime is enforced for configured kinetics)")
    if kind == "linear":
        if "exponent" in section:
            _fail(f"{path}.exponent", "only valid for type = 'power'")
        return lambda c: coeff * c
    exponent = _number(section.get("exponent", 1.0), f"{path}.exponent")
    if exponent < 0.0:
        _fail(f"{path}.exponent", "must be >= 0 so rates stay finite at c = 0")
    import numpy as np
    return lambda c: coeff * np.power(c, exponent)


def _parse_kinetics(section: dict) -> GrowthLaw:
    path = "kinetics"
    _check_keys(section, {"size_exponent", "g1", "g2"}, path)
    n = _number(_require(section, "size_exponent", path),
                f"{path}.size_exponent")
    g1 = _require(section, "g1", path)
    g2 = _require(section, "g2", path)
    if not isinstance(g1, dict) or not isinstance(g2, dict):
        _fail(f"{path}.g1", "expected tables [kinetics.g1] and [kinetics.g2]")
    try:
        return GrowthLaw(rate1=_rate_builder(g1, f"{path}.g1"),
                         rate2=_rate_builder(g2, f"{path}.g2"),
                         exponent_n=n)
    except ConfigError:
        raise
    except Exception as exc:
        _fail(path, str(exc))


def _parse_initial_datum(section: dict, process: ProcessConfig
                         ) -> InitialDensity:
    path = "initial_datum"
    kind = _string(_require(section, "type", path), f"{path}.type",
                   {"bump", "dirac"})
    if kind == "bump":
        _check_keys(section, {"type", "center", "halfwidth", "amplitude"},
                    path)
        center = _pair(_require(section, "center", path), f"{path}.center")
        halfwidth = _pair(_require(section, "halfwidth", path),
                          f"{path}.halfwidth")
        amplitude = _number(section.get("amplitude", 1.0),
                            f"{path}.amplitude")
        if amplitude < 0.0:
            _fail(f"{path}.amplitude", "must be >= 0")
        q0 = InitialDensity.elliptical_bump(center, halfwidth, amplitude)
    else:
        _check_keys(section, {"type", "state", "count"}, path)
        state = _pair(_require(section, "state", path), f"{path}.state")
        count = _number(_require(section, "count", path), f"{path}.count")
        if count <= 0.0:
            _fail(f"{path}.count", "must be > 0")
        q0 = InitialDensity.dirac_seed(DisperseState(*state), count)
    box = q0.support_box
    if box.x1_min < process.x_min:
        _fail(path, f"support starts at {box.x1_min}, below x_min = "
              f"{process.x_min}")
    if box.x2_min < 0.0 or box.x2_max > 1.0:
        _fail(path, "support must lie inside the composition range [0, 1]")
    return q0


def _parse_grids(section: dict):
    path = "grids"
    _check_keys(section, {"emom", "fvm"}, path)
    emom = _require(section, "emom", path)
    _check_keys(emom, {"n_time", "resolution", "rule"}, f"{path}.emom")
    try:
        emom_spec = EmomGridSpec(
            n_time=_integer(_require(emom, "n_time", f"{path}.emom"),
                            f"{path}.emom.n_time"),
            resolution=_pair(_require(emom, "resolution", f"{path}.emom"),
                             f"{path}.emom.resolution", kind=_integer),
            rule=_string(emom.get("rule", "midpoint"), f"{path}.emom.rule",
                         {"midpoint", "gauss"}))
    except ConfigError:
        raise
    except Exception as exc:
        _fail(f"{path}.emom", str(exc))
    fvm_spec = None
    if "fvm" in section:
        fvm = section["fvm"]
        _check_keys(fvm, {"cells", "cfl", "r_max"}, f"{path}.fvm")
        try:
            fvm_spec = FvmGridSpec(
                cells=_pair(_require(fvm, "cells", f"{path}.fvm"),
                            f"{path}.fvm.cells", kind=_integer),
                cfl=_number(fvm.get("cfl", 0.45), f"{path}.fvm.cfl"),
                r_max=_number(fvm["r_max"], f"{path}.fvm.r_max")
                if "r_max" in fvm else None)
        except ConfigError:
            raise
        except Exception as exc:
            _fail(f"{path}.fvm", str(exc))
    return emom_spec, fvm_spec


def _int_list(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        _fail(path, "expected a non-empty list of integers")
    return tuple(_integer(v, f"{path}[{i}]") for i, v in enumerate(value))


def _triple_list(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        _fail(path, "expected a non-empty list of [n_time, n1, n2] triples")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            _fail(f"{path}[{i}]", "expected [n_time, n1, n2]")
        out.append(tuple(_integer(v, f"{path}[{i}][{j}]")
                         for j, v in enumerate(item)))
    return tuple(out)


def _pair_list(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        _fail(path, "expected a non-empty list of [m1, m2] pairs")
    return tuple(_pair(item, f"{path}[{i}]", kind=_integer)
                 for i, item in enumerate(value))


def _parse_run(section: dict) -> RunOptions:
    path = "run"
    _check_keys(section, {"label", "snapshot_times", "snapshot_grid",
                          "radial_seed", "time_ladder", "reference_n_time",
                          "emom_dof_ladder", "fvm_dof_ladder",
                          "comparison_reference", "timing_sizes",
                          "timing_repetitions"}, path)
    kwargs = {}
    if "label" in section:
        kwargs["label"] = _string(section["label"], f"{path}.label")
    if "snapshot_times" in section:
        times = section["snapshot_times"]
        if not isinstance(times, (list, tuple)):
            _fail(f"{path}.snapshot_times", "expected a list of times")
        kwargs["snapshot_times"] = tuple(
            _number(v, f"{path}.snapshot_times[{i}]")
            for i, v in enumerate(times))
    if "snapshot_grid" in section:
        kwargs["snapshot_grid"] = _pair(section["snapshot_grid"],
                                        f"{path}.snapshot_grid",
                                        kind=_integer)
    if "radial_seed" in section:
        kwargs["radial_seed"] = _pair(section["radial_seed"],
                                      f"{path}.radial_seed")
    if "time_ladder" in section:
        kwargs["time_ladder"] = _int_list(section["time_ladder"],
                                          f"{path}.time_ladder")
    if "reference_n_time" in section:
        kwargs["reference_n_time"] = _integer(section["reference_n_time"],
                                              f"{path}.reference_n_time")
    if "emom_dof_ladder" in section:
        kwargs["emom_dof_ladder"] = _triple_list(section["emom_dof_ladder"],
                                                 f"{path}.emom_dof_ladder")
    if "fvm_dof_ladder" in section:
        kwargs["fvm_dof_ladder"] = _pair_list(section["fvm_dof_ladder"],
                                              f"{path}.fvm_dof_ladder")
    if "comparison_reference" in section:
        ref = _triple_list([section["comparison_reference"]],
                           f"{path}.comparison_reference")
        kwargs["comparison_reference"] = ref[0]
    if "timing_sizes" in section:
        kwargs["timing_sizes"] = _triple_list(section["timing_sizes"],
                                              f"{path}.timing_sizes")
    if "timing_repetitions" in section:
        reps = _integer(section["timing_repetitions"],
                        f"{path}.timing_repetitions")
        if reps < 1:
            _fail(f"{path}.timing_repetitions", "must be >= 1")
        kwargs["timing_repetitions"] = reps
    return RunOptions(**kwargs)


def parse_config(data: dict, source: str = "<config>") -> RunSpec:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a table")
    _check_keys(data, {"process", "kinetics", "initial_datum", "grids",
                       "run"}, source)
    for required in ("process", "kinetics", "initial_datum", "grids"):
        if required not in data:
            _fail(f"{source}.{required}", "missing required section")
    process = _parse_process(data["process"])
    law = _parse_kinetics(data["kinetics"])
    q0 = _parse_initial_datum(data["initial_datum"], process)
    emom_grid, fvm_grid = _parse_grids(data["grids"])
    run = _parse_run(data.get("run", {}))
    return RunSpec(process=process, law=law, initial_density=q0,
                   emom_grid=emom_grid, fvm_grid=fvm_grid, run=run, raw=data)


def load_config(path) -> RunSpec:
    """Parse and validate a TOML experiment configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return parse_config(data, source=str(path))
