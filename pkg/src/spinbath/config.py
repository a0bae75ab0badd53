"""Run and sweep configuration: strict TOML schema, fail-closed validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .models import BathSpec, Boundary, CouplingSpec, Family
from .tebd import TEBDParams


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


_MODEL_KEYS = {"family", "n", "j", "gamma", "delta", "lambda", "boundary"}
_COUPLING_KEYS = {"epsilon", "site", "omega_e"}
_TIME_KEYS = {"t_max", "steps"}
_TEBD_KEYS = {"m", "dt", "svd_cutoff"}
_TOP_KEYS = {"model", "coupling", "time", "tebd", "method", "seed", "sweep"}
_SWEEP_KEYS = {"axes", "workers"}
_METHODS = {"determinant", "exact", "tebd"}

DEFAULTS = {
    "model": {"family": "xy", "n": 100, "j": 1.0, "gamma": 1.0, "delta": 0.0,
              "lambda": 0.0, "boundary": "open"},
    "coupling": {"epsilon": 0.25, "site": 1, "omega_e": 0.0},
    "time": {"t_max": 50.0, "steps": 500},
    "tebd": {"m": 100, "dt": 0.01, "svd_cutoff": 1e-10},
    "method": "determinant",
    "seed": 0,
}


@dataclass(frozen=True)
class RunConfig:
    bath: BathSpec
    coupling: CouplingSpec
    t_max: float
    steps: int
    method: str
    tebd: TEBDParams
    seed: int

    def as_dict(self) -> dict:
        return {
            "model": {"family": self.bath.family.value, "n": self.bath.n_spins,
                      "j": self.bath.j, "gamma": self.bath.gamma, "delta": self.bath.delta,
                      "lambda": self.bath.lam, "boundary": self.bath.boundary.value},
            "coupling": {"epsilon": self.coupling.epsilon, "site": self.coupling.site,
                         "omega_e": self.coupling.omega_e},
            "time": {"t_max": self.t_max, "steps": self.steps},
            "tebd": {"m": self.tebd.m, "dt": self.tebd.dt,
                     "svd_cutoff": self.tebd.svd_cutoff},
            "method": self.method,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axes: dict          # dotted parameter path -> list of values
    workers: int = 1


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def _merged(data: dict) -> dict:
    _check_keys(data, _TOP_KEYS, "top level")
    merged = {}
    for section in ("model", "coupling", "time", "tebd"):
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{section}] must be a table")
        allowed = {"model": _MODEL_KEYS, "coupling": _COUPLING_KEYS,
                   "time": _TIME_KEYS, "tebd": _TEBD_KEYS}[section]
        _check_keys(given, allowed, section)
        merged[section] = {**DEFAULTS[section], **given}
    merged["method"] = data.get("method", DEFAULTS["method"])
    merged["seed"] = data.get("seed", DEFAULTS["seed"])
    return merged


def run_config_from_dict(data: dict) -> RunConfig:
    merged = _merged(data)
    model, coup, time_ = merged["model"], merged["coupling"], merged["time"]
    try:
        family = Family(model["family"])
        boundary = Boundary(model["boundary"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        bath = BathSpec(family, int(model["n"]), j=float(model["j"]),
                        gamma=float(model["gamma"]), delta=float(model["delta"]),
                        lam=float(model["lambda"]), boundary=boundary)
        coupling = CouplingSpec(float(coup["epsilon"]), int(coup["site"]),
                                float(coup["omega_e"]))
        tebd = TEBDParams(dt=float(merged["tebd"]["dt"]), m=int(merged["tebd"]["m"]),
                          svd_cutoff=float(merged["tebd"]["svd_cutoff"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    method = merged["method"]
    if method not in _METHODS:
        raise ConfigError(f"method must be one of {sorted(_METHODS)}, got {method!r}")
    if method == "determinant" and (family is not Family.XY or boundary is not Boundary.OPEN):
        raise ConfigError("method 'determinant' requires the XY family with open boundary")
    t_max, steps = float(time_["t_max"]), int(time_["steps"])
    if t_max <= 0 or steps < 2:
        raise ConfigError("time.t_max must be > 0 and time.steps >= 2")
    if method == "tebd":
        spacing = t_max / (steps - 1)
        ratio = spacing / tebd.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("tebd sample spacing t_max/(steps-1) must be a multiple of dt")
    if coupling.site > bath.n_spins:
        raise ConfigError(f"coupling.site {coupling.site} outside chain of {bath.n_spins}")
    return RunConfig(bath, coupling, t_max, steps, method, tebd, int(merged["seed"]))


def sweep_config_from_dict(data: dict) -> SweepConfig:
    sweep = data.get("sweep", {})
    _check_keys(sweep, _SWEEP_KEYS, "sweep")
    axes = sweep.get("axes", {})
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("[sweep.axes] must map parameter paths to value lists")
    workers = int(sweep.get("workers", 1))
    if workers < 1:
        raise ConfigError("sweep.workers must be >= 1")
    base = run_config_from_dict({k: v for k, v in data.items() if k != "sweep"})
    for path, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axis {path!r} must be a non-empty list")
        _apply_override(data, path, values[0])  # validates the path exists
    return SweepConfig(base, {k: list(v) for k, v in axes.items()}, workers)


def _apply_override(data: dict, path: str, value):
    parts = path.split(".")
    section_keys = {"model": _MODEL_KEYS, "coupling": _COUPLING_KEYS,
                    "time": _TIME_KEYS, "tebd": _TEBD_KEYS}
    if len(parts) == 2 and parts[0] in section_keys and parts[1] in section_keys[parts[0]]:
        data.setdefault(parts[0], {})[parts[1]] = value
    elif len(parts) == 1 and parts[0] in ("method", "seed"):
        data[parts[0]] = value
    else:
        raise ConfigError(f"unknown sweep axis {path!r}")


def sweep_points(sweep: SweepConfig, base_data: dict) -> list[RunConfig]:
    """Cartesian product of the axes applied to the base configuration."""
    paths = list(sweep.axes)
    grids = [sweep.axes[p] for p in paths]
    points = []
    shape = [len(g) for g in grids]
    total = math.prod(shape)
    for flat in range(total):
        data = _deep_copy(base_data)
        rem = flat
        for p, grid in zip(paths, grids):
            idx = rem % len(grid)
            rem //= len(grid)
            _apply_override(data, p, grid[idx])
        data.pop("sweep", None)
        points.append(run_config_from_dict(data))
    return points


def _deep_copy(data):
    return {k: (_deep_copy(v) if isinstance(v, dict) else
                (list(v) if isinstance(v, list) else v)) for k, v in data.items()}


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)
