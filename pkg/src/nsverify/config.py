"""Run configuration: flat dotted keys, one `section.key = value` per line.

Parsing is strict: unknown keys, repeated keys and malformed values are
errors carrying the offending line number; range constraints name the key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import GridSpec
from .scenarios import FORCING_PROFILES, SCENARIO_NAMES, Scenario, build_forcing
from .solvers import SolverConfig
from .spectral import DealiasPolicy

_INTEGRATORS = ("explicit_euler", "rk4", "imex_cn")
_DOMAINS = ("torus", "box")
_SOLVERS = ("nse", "reduced")


def _parse_bool(raw: str) -> bool:
    if raw.lower() in ("true", "yes", "1"):
        return True
    if raw.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# key -> (converter, default); required keys carry the _REQUIRED marker
_REQUIRED = object()

_SCHEMA: dict[str, tuple] = {
    "scenario.name": (str, _REQUIRED),
    "scenario.seed": (int, None),
    "scenario.amplitude": (float, 1.0),
    "grid.dims": (int, 2),
    "grid.n": (int, 64),
    "grid.domain": (str, "torus"),
    "grid.length": (float, None),
    "fluid.viscosity": (float, _REQUIRED),
    "time.dt": (float, _REQUIRED),
    "time.t_end": (float, _REQUIRED),
    "time.integrator": (str, "rk4"),
    "time.cfl_guard": (float, 0.9),
    "time.sample_every": (int, 10),
    "spectral.dealias": (str, "two_thirds"),
    "run.solver": (str, "nse"),
    "forcing.profile": (str, "none"),
    "forcing.amplitude": (float, 0.0),
    "forcing.decay_exponent": (float, 2.0),
    "boundary.normal_inflow": (float, 0.0),
    "uniqueness.confirm": (_parse_bool, True),
    "output.dir": (str, None),
    "output.prefix": (str, "run"),
}


@dataclass(frozen=True)
class OutputOptions:
    directory: str
    prefix: str


@dataclass(frozen=True)
class RunPlan:
    scenario: Scenario
    solver_config: SolverConfig
    output: OutputOptions
    sample_every: int
    solver: str
    confirm_uniqueness: bool
    raw: dict


def _read_pairs(path: str) -> dict[str, tuple[str, int]]:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    pairs: dict[str, tuple[str, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"expected `key = value`, got {text!r}", line=lineno)
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _SCHEMA:
                raise ConfigError(f"unknown key {key!r}", line=lineno)
            if key in pairs:
                raise ConfigError(f"key {key!r} repeated (first on line {pairs[key][1]})",
                                  line=lineno)
            pairs[key] = (raw, lineno)
    return pairs


def _convert(pairs) -> dict:
    values = {}
    for key, (convert, default) in _SCHEMA.items():
        if key in pairs:
            raw, lineno = pairs[key]
            try:
                values[key] = convert(raw)
            except (TypeError, ValueError) as err:
                raise ConfigError(f"bad value for {key}: {err}", line=lineno) from err
        elif default is _REQUIRED:
            raise ConfigError(f"missing required key {key}")
        else:
            values[key] = default
    return values


def _constrain(values, pairs):
    def fail(key, message):
        line = pairs[key][1] if key in pairs else None
        raise ConfigError(f"{key}: {message}", line=line)

    if values["scenario.name"] not in SCENARIO_NAMES:
        fail("scenario.name", f"must be one of {', '.join(SCENARIO_NAMES)}")
    if values["grid.dims"] not in (2, 3):
        fail("grid.dims", "must be 2 or 3")
    if values["grid.n"] < 8 or values["grid.n"] & (values["grid.n"] - 1):
        fail("grid.n", "must be a power of two, at least 8")
    if values["grid.domain"] not in _DOMAINS:
        fail("grid.domain", f"must be one of {', '.join(_DOMAINS)}")
    if values["grid.length"] is not None and not values["grid.length"] > 0:
        fail("grid.length", "must be positive")
    if not values["fluid.viscosity"] > 0:
        fail("fluid.viscosity", "must be positive")
    if not values["time.dt"] > 0:
        fail("time.dt", "must be positive")
    if not values["time.t_end"] > 0:
        fail("time.t_end", "must be positive")
    if values["time.integrator"] not in _INTEGRATORS:
        fail("time.integrator", f"must be one of {', '.join(_INTEGRATORS)}")
    if not 0 < values["time.cfl_guard"] <= 1:
        fail("time.cfl_guard", "must lie in (0, 1]")
    if values["time.sample_every"] < 1:
        fail("time.sample_every", "must be at least 1")
    if values["spectral.dealias"] not in ("none", "two_thirds"):
        fail("spectral.dealias", "must be none or two_thirds")
    if values["run.solver"] not in _SOLVERS:
        fail("run.solver", f"must be one of {', '.join(_SOLVERS)}")
    if values["forcing.profile"] not in FORCING_PROFILES:
        fail("forcing.profile", f"must be one of {', '.join(FORCING_PROFILES)}")
    if not values["forcing.decay_exponent"] > 0:
        fail("forcing.decay_exponent", "must be positive")
    if values["scenario.name"] == "random_solenoidal" and values["scenario.seed"] is None:
        fail("scenario.seed", "required for random_solenoidal")
    if not values["scenario.amplitude"] > 0:
        fail("scenario.amplitude", "must be positive")


def parse_config(path: str, out_override: str | None = None) -> RunPlan:
    """Load and validate one run plan; raises ConfigError with line numbers."""
    pairs = _read_pairs(path)
    values = _convert(pairs)
    _constrain(values, pairs)

    domain = values["grid.domain"]
    length = values["grid.length"]
    if length is None:
        length = 2.0 * np.pi if domain == "torus" else 1.0
    kind = "periodic_torus" if domain == "torus" else "bounded_box"
    try:
        grid = GridSpec(values["grid.dims"], (values["grid.n"],) * values["grid.dims"],
                        (length,) * values["grid.dims"], kind)
    except ValueError as err:
        raise ConfigError(str(err)) from err

    forcing = build_forcing(
        values["forcing.profile"], values["forcing.amplitude"],
        values["forcing.decay_exponent"], grid,
    )
    scenario = Scenario(
        name=values["scenario.name"],
        grid=grid,
        viscosity=values["fluid.viscosity"],
        forcing=forcing,
        boundary=None,
        seed=values["scenario.seed"],
        amplitude=values["scenario.amplitude"],
        normal_inflow=values["boundary.normal_inflow"],
    )
    solver_config = SolverConfig(
        viscosity=values["fluid.viscosity"],
        dt=values["time.dt"],
        t_end=values["time.t_end"],
        integrator=values["time.integrator"],
        dealias=DealiasPolicy(values["spectral.dealias"]),
        cfl_guard=values["time.cfl_guard"],
    )
    out_dir = out_override or values["output.dir"] or os.environ.get("NSVERIFY_OUT") or "nsverify_out"
    output = OutputOptions(directory=out_dir, prefix=values["output.prefix"])
    return RunPlan(
        scenario=scenario,
        solver_config=solver_config,
        output=output,
        sample_every=values["time.sample_every"],
        solver=values["run.solver"],
        confirm_uniqueness=values["uniqueness.confirm"],
        raw={k: v for k, v in values.items()},
    )
