"""Scenario configuration: flat text files of `section.key = value` lines.

Grammar
-------
UTF-8 text.  Blank lines and lines starting with `#` are ignored.  Every
other line must read `section.key = value`.  Values are scalars or
comma-separated lists; booleans accept true/false/yes/no/1/0.  When the
same key appears twice the later line wins.  Unknown keys are errors;
missing keys fall back to the defaults below, which describe the bundled
`example1` scenario, so an empty file is a valid config.

Keys and defaults
-----------------
task.mass               = 1.0          moved mass [kg], > 0
task.dt                 = 0.01         step length [s], > 0
task.horizon            = 42           number of steps N, >= 1
task.tau1               = 0.04         first actuation time constant [s]
task.tau2               = 0.04         second actuation time constant [s]
task.sigma_u            = 0.5          control-dependent noise scale, >= 0
task.sigma_omega        = <6 floats>   observation noise scales (p,p,v,v,f,f)
task.p0                 = 0.0, 0.0     start position [m]
task.p_ref              = 0.1, 0.1     target position [m]
human.q_weights         = <8 floats>   human state-cost diagonal, >= 0
human.terminal_only     = true         apply the state cost only at t = N
human.r                 = 2.8388e-07   human control-cost diagonal value, > 0
benchmark.q             = <6 floats>   benchmark automation running-cost diag
benchmark.r             = 0.002        benchmark control-cost diagonal value
benchmark.observer_intensity = 10.0    benchmark disturbance-observer scale
hvroc.preset            = lowvar       highvar | lowvar (used by `optimize`)
hvroc.weights           = auto         auto or 4 floats overriding the preset
hvroc.observer_intensity = 0.1         tuned-automation observer scale
hvroc.init_q            = <6 floats>   optimizer start, state-cost diag
hvroc.init_r            = 5e-06, 5e-06 optimizer start, control-cost diag
optimizer.max_evals     = 2000         objective evaluations per restart
optimizer.restarts      = 3            simplex restarts, >= 1
optimizer.seed          = 0            restart-perturbation seed
mc.samples              = 20000        Monte-Carlo trajectories, >= 2
mc.seed                 = 0            Monte-Carlo seed
metrics.scalarization   = x            x | trace position-variance scalar
metrics.settling_band   = 0.05         settling band as a fraction of p_ref
run.controllers         = <labels>     subset of: human-alone, lqr-benchmark,
                                       hvroc-highvar, hvroc-lowvar
run.out_dir             = .            directory for emitted CSV/report files
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .model import ReachTask

CONTROLLER_LABELS = (
    "human-alone",
    "lqr-benchmark",
    "hvroc-highvar",
    "hvroc-lowvar",
)

BUNDLED_CONFIGS = ("example1", "example2")


class ConfigError(ValueError):
    """Malformed or invalid configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class ScenarioConfig:
    task: ReachTask
    human_q_weights: tuple
    human_terminal_only: bool
    human_r: float
    benchmark_q: tuple
    benchmark_r: float
    benchmark_observer_intensity: float
    hvroc_preset: str
    hvroc_weights: tuple | None
    hvroc_observer_intensity: float
    hvroc_init_q: tuple
    hvroc_init_r: tuple
    optimizer_max_evals: int
    optimizer_restarts: int
    optimizer_seed: int
    mc_samples: int
    mc_seed: int
    scalarization: str
    settling_band: float
    controllers: tuple
    out_dir: str


def _floats(n):
    def conv(raw, key):
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != n:
            raise ConfigError(f"{key}: expected {n} comma-separated values, "
                              f"got {len(parts)}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"{key}: not a list of numbers: {raw!r}") from None
    return conv


def _float(raw, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}") from None


def _int(raw, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {raw!r}") from None


def _bool(raw, key):
    lowered = raw.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: not a boolean: {raw!r}")


def _choice(*options):
    def conv(raw, key):
        if raw not in options:
            raise ConfigError(f"{key}: expected one of {options}, got {raw!r}")
        return raw
    return conv


def _weights_or_auto(raw, key):
    if raw.lower() == "auto":
        return None
    return _floats(4)(raw, key)


def _controllers(raw, key):
    labels = tuple(p.strip() for p in raw.split(","))
    for label in labels:
        if label not in CONTROLLER_LABELS:
            raise ConfigError(f"{key}: unknown controller {label!r}; "
                              f"expected subset of {CONTROLLER_LABELS}")
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{key}: duplicate controller label")
    return labels


def _str(raw, key):
    return raw


_SCHEMA = {
    "task.mass": _float,
    "task.dt": _float,
    "task.horizon": _int,
    "task.tau1": _float,
    "task.tau2": _float,
    "task.sigma_u": _float,
    "task.sigma_omega": _floats(6),
    "task.p0": _floats(2),
    "task.p_ref": _floats(2),
    "human.q_weights": _floats(8),
    "human.terminal_only": _bool,
    "human.r": _float,
    "benchmark.q": _floats(6),
    "benchmark.r": _float,
    "benchmark.observer_intensity": _float,
    "hvroc.preset": _choice("highvar", "lowvar"),
    "hvroc.weights": _weights_or_auto,
    "hvroc.observer_intensity": _float,
    "hvroc.init_q": _floats(6),
    "hvroc.init_r": _floats(2),
    "optimizer.max_evals": _int,
    "optimizer.restarts": _int,
    "optimizer.seed": _int,
    "mc.samples": _int,
    "mc.seed": _int,
    "metrics.scalarization": _choice("x", "trace"),
    "metrics.settling_band": _float,
    "run.controllers": _controllers,
    "run.out_dir": _str,
}

_DEFAULTS = {
    "task.mass": "1.0",
    "task.dt": "0.01",
    "task.horizon": "42",
    "task.tau1": "0.04",
    "task.tau2": "0.04",
    "task.sigma_u": "0.5",
    "task.sigma_omega": ("0.0016553599999999998, 0.0016553599999999998, "
                         "0.016553599999999998, 0.016553599999999998, "
                         "0.082768, 0.082768"),
    "task.p0": "0.0, 0.0",
    "task.p_ref": "0.1, 0.1",
    "human.q_weights": "1.0, 1.0, 0.04, 0.04, 0.0004, 0.0004, 0.0, 0.0",
    "human.terminal_only": "true",
    "human.r": "2.8388e-07",
    "benchmark.q": "1.0, 1.0, 0.04, 0.04, 0.0004, 0.0004",
    "benchmark.r": "0.002",
    "benchmark.observer_intensity": "10.0",
    "hvroc.preset": "lowvar",
    "hvroc.weights": "auto",
    "hvroc.observer_intensity": "0.1",
    "hvroc.init_q": "1.0, 1.0, 0.04, 0.04, 0.0004, 0.0004",
    "hvroc.init_r": "5e-06, 5e-06",
    "optimizer.max_evals": "2000",
    "optimizer.restarts": "3",
    "optimizer.seed": "0",
    "mc.samples": "20000",
    "mc.seed": "0",
    "metrics.scalarization": "x",
    "metrics.settling_band": "0.05",
    "run.controllers": "human-alone, lqr-benchmark, hvroc-highvar, hvroc-lowvar",
    "run.out_dir": ".",
}


def _parse_text(text):
    """Raw key -> (value string, line number) mapping, later lines winning."""
    found = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'section.key = value', got {line!r}",
                              line=lineno)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if not raw:
            raise ConfigError(f"{key}: empty value", line=lineno)
        found[key] = (raw, lineno)
    return found


def _positive(value, key):
    if not value > 0:
        raise ConfigError(f"{key}: must be > 0, got {value}")
    return value


def _nonnegative(value, key):
    if not value >= 0:
        raise ConfigError(f"{key}: must be >= 0, got {value}")
    return value


def parse_config(text: str) -> ScenarioConfig:
    """Parse config text, filling unspecified keys with defaults."""
    found = _parse_text(text)
    values = {}
    for key, conv in _SCHEMA.items():
        if key in found:
            raw, lineno = found[key]
            try:
                values[key] = conv(raw, key)
            except ConfigError as exc:
                raise ConfigError(str(exc), line=lineno) from None
        else:
            values[key] = conv(_DEFAULTS[key], key)

    for key in ("task.mass", "task.dt", "task.tau1", "task.tau2",
                "human.r", "benchmark.r", "metrics.settling_band"):
        _positive(values[key], key)
    for key in ("task.sigma_u", "benchmark.observer_intensity",
                "hvroc.observer_intensity"):
        _nonnegative(values[key], key)
    for key in ("task.sigma_omega", "human.q_weights", "benchmark.q",
                "hvroc.init_q"):
        for v in values[key]:
            _nonnegative(v, key)
    for v in values["hvroc.init_r"]:
        _positive(v, "hvroc.init_r")
    if values["task.horizon"] < 1:
        raise ConfigError("task.horizon: must be >= 1")
    if values["optimizer.max_evals"] < 1:
        raise ConfigError("optimizer.max_evals: must be >= 1")
    if values["optimizer.restarts"] < 1:
        raise ConfigError("optimizer.restarts: must be >= 1")
    if values["mc.samples"] < 2:
        raise ConfigError("mc.samples: must be >= 2")
    for key in ("optimizer.seed", "mc.seed"):
        if values[key] < 0:
            raise ConfigError(f"{key}: must be >= 0")
    if values["hvroc.weights"] is not None:
        w = values["hvroc.weights"]
        if any(v < 0 for v in w) or all(v == 0 for v in w):
            raise ConfigError("hvroc.weights: need >= 0 entries, one positive")

    task = ReachTask(
        mass=values["task.mass"],
        dt=values["task.dt"],
        tau1=values["task.tau1"],
        tau2=values["task.tau2"],
        sigma_u=values["task.sigma_u"],
        sigma_omega_diag=values["task.sigma_omega"],
        p0=values["task.p0"],
        p_ref=values["task.p_ref"],
        N=values["task.horizon"],
    )
    return ScenarioConfig(
        task=task,
        human_q_weights=values["human.q_weights"],
        human_terminal_only=values["human.terminal_only"],
        human_r=values["human.r"],
        benchmark_q=values["benchmark.q"],
        benchmark_r=values["benchmark.r"],
        benchmark_observer_intensity=values["benchmark.observer_intensity"],
        hvroc_preset=values["hvroc.preset"],
        hvroc_weights=values["hvroc.weights"],
        hvroc_observer_intensity=values["hvroc.observer_intensity"],
        hvroc_init_q=values["hvroc.init_q"],
        hvroc_init_r=values["hvroc.init_r"],
        optimizer_max_evals=values["optimizer.max_evals"],
        optimizer_restarts=values["optimizer.restarts"],
        optimizer_seed=values["optimizer.seed"],
        mc_samples=values["mc.samples"],
        mc_seed=values["mc.seed"],
        scalarization=values["metrics.scalarization"],
        settling_band=values["metrics.settling_band"],
        controllers=values["run.controllers"],
        out_dir=values["run.out_dir"],
    )


def load_config(path=None) -> ScenarioConfig:
    """Load a config file; None gives the all-defaults scenario."""
    if path is None:
        return parse_config("")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def bundled_config_text(name: str) -> str:
    """Text of one of the packaged scenario configs."""
    if name not in BUNDLED_CONFIGS:
        raise ConfigError(f"unknown bundled config {name!r}; "
                          f"expected one of {BUNDLED_CONFIGS}")
    return (resources.files("hvroc") / "configs" / f"{name}.cfg").read_text(
        encoding="utf-8")


def load_bundled_config(name: str) -> ScenarioConfig:
    return parse_config(bundled_config_text(name))
