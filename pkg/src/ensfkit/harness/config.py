"""Declarative experiment configuration and strict TOML/JSON loading.

A config file describes one twin experiment (model, observations, filter
method, run lengths, seed) and optionally a ``[sweep]``, ``[compare]``, or
``[scaling]`` section for the other commands. Loading is strict: unknown
keys are rejected, and every violated constraint is reported in a single
error rather than one at a time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..ensf import EnSFConfig
from ..diffusion import DiffusionSchedule
from ..errors import ConfigError
from ..ldyn import Lorenz96Params, ObservationModel, ShockEvent, ShockModel
from ..letkf import LETKFConfig
from ..score import ONE_MINUS_TAU

METHODS = ("ensf", "letkf")
INITIAL_ENSEMBLES = ("standard-normal",)
AGGREGATION_WINDOWS = ("all-assimilation-times", "last-50")

# sweepable knobs per method; schedule fields route into the nested schedule
ENSF_AXES = (
    "eps_alpha",
    "eps_beta",
    "pseudo_steps",
    "batch_size",
    "ensemble_size",
    "prediction_noise_std",
)
LETKF_AXES = ("inflation", "localization", "ensemble_size", "eig_floor")

_MAX_SEED = 2**64


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one seeded twin experiment needs, fully validated."""

    model: Lorenz96Params
    obs: ObservationModel = field(default_factory=ObservationModel)
    method: str = "ensf"
    ensf: EnSFConfig | None = None
    letkf: LETKFConfig | None = None
    shock: ShockModel | None = None
    total_steps: int = 1000
    steps_between_assimilation: int = 10
    repetitions: int = 10
    master_seed: int = 0
    initial_ensemble: str = "standard-normal"
    burn_in: int = 1000
    snapshot_stride: int = 0
    compute_crps: bool = True
    label: str = ""

    def __post_init__(self):
        problems = []
        if self.method not in METHODS:
            problems.append(f"method must be one of {METHODS}, got {self.method!r}")
        if self.total_steps < 1:
            problems.append("total_steps must be at least 1")
        if self.steps_between_assimilation < 1:
            problems.append("steps_between_assimilation must be at least 1")
        elif self.total_steps % self.steps_between_assimilation != 0:
            problems.append(
                "total_steps must be divisible by steps_between_assimilation"
            )
        if self.repetitions < 1:
            problems.append("repetitions must be at least 1")
        if not 0 <= self.master_seed < _MAX_SEED:
            problems.append("master_seed must be an unsigned 64-bit integer")
        if self.initial_ensemble not in INITIAL_ENSEMBLES:
            problems.append(
                f"initial_ensemble must be one of {INITIAL_ENSEMBLES}, "
                f"got {self.initial_ensemble!r}"
            )
        if self.burn_in < 0:
            problems.append("burn_in must be non-negative")
        if self.snapshot_stride < 0:
            problems.append("snapshot_stride must be non-negative")
        if self.method == "ensf" and self.ensf is None:
            object.__setattr__(self, "ensf", EnSFConfig())
        if self.method == "letkf" and self.letkf is None:
            object.__setattr__(self, "letkf", LETKFConfig())
        if problems:
            raise ConfigError(problems)

    @property
    def method_config(self):
        return self.ensf if self.method == "ensf" else self.letkf

    @property
    def display_name(self) -> str:
        return self.label or self.method


@dataclass(frozen=True)
class SweepAxis:
    """One named hyper-parameter and the grid of values to try."""

    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) == 0:
            raise ConfigError(f"sweep axis {self.name!r} has an empty value grid")


@dataclass(frozen=True)
class SweepConfig:
    """A 1- or 2-axis hyper-parameter grid over a base experiment."""

    base: ExperimentConfig
    axis1: SweepAxis
    axis2: SweepAxis | None = None
    window: str = "all-assimilation-times"
    divergence_cap: float = 100.0

    def __post_init__(self):
        problems = []
        valid = ENSF_AXES if self.base.method == "ensf" else LETKF_AXES
        for axis in filter(None, (self.axis1, self.axis2)):
            if axis.name not in valid:
                problems.append(
                    f"axis {axis.name!r} does not exist on method "
                    f"{self.base.method!r}; valid axes: {', '.join(valid)}"
                )
        if self.window not in AGGREGATION_WINDOWS:
            problems.append(
                f"window must be one of {AGGREGATION_WINDOWS}, got {self.window!r}"
            )
        if not (np.isfinite(self.divergence_cap) and self.divergence_cap > 0):
            problems.append("divergence_cap must be positive")
        if problems:
            raise ConfigError(problems)

    @property
    def shape(self) -> tuple:
        return (len(self.axis1.values), len(self.axis2.values) if self.axis2 else 1)


@dataclass(frozen=True)
class ScalingConfig:
    """Timing-study settings: which dimensions, how many timed cycles."""

    base: ExperimentConfig
    dimensions: tuple
    repetitions: int = 20
    warmup: int = 2
    max_dimension: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "dimensions", tuple(int(d) for d in self.dimensions))
        problems = []
        if len(self.dimensions) == 0:
            problems.append("dimensions must be non-empty")
        elif list(self.dimensions) != sorted(self.dimensions):
            problems.append("dimensions must be ascending")
        if any(d < 4 for d in self.dimensions):
            problems.append("every dimension must be at least 4")
        if any(d > self.max_dimension for d in self.dimensions):
            problems.append(
                f"dimension exceeds max_dimension={self.max_dimension}; "
                "raise max_dimension explicitly for larger studies"
            )
        if self.repetitions < 1:
            problems.append("repetitions must be at least 1")
        if self.warmup < 0:
            problems.append("warmup must be non-negative")
        if problems:
            raise ConfigError(problems)


# ---------------------------------------------------------------------------
# strict section reader
# ---------------------------------------------------------------------------

_MISSING = object()

_KIND_CHECKS = {
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "float": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "bool": lambda v: isinstance(v, bool),
    "list": lambda v: isinstance(v, list),
    "table": lambda v: isinstance(v, dict),
}


class _Section:
    """One mapping level of the config file, consumed key by key."""

    def __init__(self, data: dict, name: str, problems: list):
        self.data = data
        self.name = name
        self.problems = problems
        self.seen = set()

    def _label(self, key: str) -> str:
        return f"{self.name}.{key}" if self.name else key

    def take(self, key: str, kind: str, default=_MISSING):
        self.seen.add(key)
        if key not in self.data:
            if default is _MISSING:
                self.problems.append(f"{self._label(key)} is required")
                return None
            return default
        value = self.data[key]
        if not _KIND_CHECKS[kind](value):
            self.problems.append(
                f"{self._label(key)} must be a {kind}, got {type(value).__name__}"
            )
            return None if default is _MISSING else default
        if kind == "float":
            return float(value)
        return value

    def subsection(self, key: str):
        table = self.take(key, "table", default=None)
        if table is None:
            return None
        return _Section(table, self._label(key), self.problems)

    def finish(self):
        unknown = sorted(set(self.data) - self.seen)
        for key in unknown:
            self.problems.append(f"unknown field {self._label(key)!r}")


def _load_raw(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        if suffix == ".json":
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    raise ConfigError(
        f"unsupported config extension {path.suffix!r}; use .toml or .json"
    )


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

TOP_LEVEL_KEYS = (
    "method",
    "run",
    "model",
    "obs",
    "ensf",
    "letkf",
    "shock",
    "sweep",
    "compare",
    "scaling",
)

_DEFAULT_RUN_KWARGS = {
    "total_steps": None,
    "steps_between_assimilation": 10,
    "repetitions": 10,
    "master_seed": 0,
    "initial_ensemble": "standard-normal",
    "burn_in": 1000,
    "snapshot_stride": 0,
    "compute_crps": True,
    "label": "",
}


def _raise_if(problems):
    if problems:
        raise ConfigError(problems)


def _merge_config_error(problems, prefix, exc: ConfigError):
    problems.extend(f"{prefix}: {p}" for p in exc.problems)


def _build_model(sec: _Section | None, problems) -> Lorenz96Params | None:
    if sec is None:
        problems.append("model.dimension is required (no [model] section)")
        return None
    kwargs = {
        "dimension": sec.take("dimension", "int"),
        "forcing": sec.take("forcing", "float", 8.0),
        "dt": sec.take("dt", "float", 0.01),
        "damping_term": sec.take("damping_term", "bool", True),
        "clip_bound": sec.take("clip_bound", "float", 50.0),
    }
    sec.finish()
    if kwargs["dimension"] is None:
        return None
    try:
        return Lorenz96Params(**kwargs)
    except ConfigError as exc:
        _merge_config_error(problems, "model", exc)
        return None


def _build_obs(sec: _Section | None, problems) -> ObservationModel:
    if sec is None:
        return ObservationModel()
    kwargs = {
        "operator": sec.take("operator", "str", "arctan"),
        "sigma_obs": sec.take("sigma_obs", "float", 0.05),
    }
    sec.finish()
    try:
        return ObservationModel(**kwargs)
    except ConfigError as exc:
        _merge_config_error(problems, "obs", exc)
        return ObservationModel()


def _build_ensf(sec: _Section | None, problems) -> EnSFConfig | None:
    if sec is None:
        return None
    sched_kwargs = {
        "eps_alpha": sec.take("eps_alpha", "float", 0.5),
        "eps_beta": sec.take("eps_beta", "float", 0.025),
        "pseudo_steps": sec.take("pseudo_steps", "int", 500),
    }
    damping = sec.data.get("damping", ONE_MINUS_TAU)
    sec.seen.add("damping")
    if isinstance(damping, list):
        damping = np.asarray(damping, dtype=float)
    kwargs = {
        "ensemble_size": sec.take("ensemble_size", "int", 20),
        "batch_size": sec.take("batch_size", "int", 1),
        "prediction_noise_std": sec.take("prediction_noise_std", "float", 0.0),
    }
    sec.finish()
    try:
        schedule = DiffusionSchedule(**sched_kwargs)
    except ConfigError as exc:
        _merge_config_error(problems, "ensf", exc)
        return None
    try:
        return EnSFConfig(schedule=schedule, damping=damping, **kwargs)
    except ConfigError as exc:
        _merge_config_error(problems, "ensf", exc)
        return None


def _build_letkf(sec: _Section | None, problems) -> LETKFConfig | None:
    if sec is None:
        return None
    kwargs = {
        "ensemble_size": sec.take("ensemble_size", "int", 20),
        "inflation": sec.take("inflation", "float", 1.1),
        "localization": sec.take("localization", "float", 4.0),
        "eig_floor": sec.take("eig_floor", "float", 1e-10),
    }
    sec.finish()
    try:
        return LETKFConfig(**kwargs)
    except ConfigError as exc:
        _merge_config_error(problems, "letkf", exc)
        return None


def _build_shock(sec: _Section | None, problems) -> ShockModel | None:
    if sec is None:
        return None
    events_raw = sec.take("events", "list", [])
    sec.finish()
    events = []
    for k, item in enumerate(events_raw):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(v, (int, float)) for v in item)
        ):
            problems.append(
                f"shock.events[{k}] must be a [probability, size] pair of numbers"
            )
            continue
        try:
            events.append(ShockEvent(probability=float(item[0]), size=float(item[1])))
        except ConfigError as exc:
            _merge_config_error(problems, f"shock.events[{k}]", exc)
    return ShockModel(events=tuple(events))


def _build_experiment(raw: dict, problems: list) -> ExperimentConfig | None:
    top = _Section(raw, "", problems)
    method = top.take("method", "str", "ensf")
    model = _build_model(top.subsection("model"), problems)
    obs = _build_obs(top.subsection("obs"), problems)
    ensf_cfg = _build_ensf(top.subsection("ensf"), problems)
    letkf_cfg = _build_letkf(top.subsection("letkf"), problems)
    shock = _build_shock(top.subsection("shock"), problems)

    run = top.subsection("run")
    if run is None:
        problems.append("run.total_steps is required (no [run] section)")
        run_kwargs = None
    else:
        run_kwargs = {
            "total_steps": run.take("total_steps", "int"),
            "steps_between_assimilation": run.take(
                "steps_between_assimilation", "int", 10
            ),
            "repetitions": run.take("repetitions", "int", 10),
            "master_seed": run.take("master_seed", "int", 0),
            "initial_ensemble": run.take(
                "initial_ensemble", "str", "standard-normal"
            ),
            "burn_in": run.take("burn_in", "int", 1000),
            "snapshot_stride": run.take("snapshot_stride", "int", 0),
            "compute_crps": run.take("compute_crps", "bool", True),
            "label": run.take("label", "str", ""),
        }
        run.finish()

    for key in ("sweep", "compare", "scaling"):
        top.seen.add(key)
    top.finish()

    kwargs = dict(
        obs=obs, method=method, ensf=ensf_cfg, letkf=letkf_cfg, shock=shock
    )
    kwargs.update(run_kwargs or _DEFAULT_RUN_KWARGS)
    complete = model is not None and kwargs["total_steps"] is not None
    if not complete:
        # required pieces are missing (already reported); substitute neutral
        # placeholders so the remaining constraints still get checked and the
        # error lists every violation in one pass
        kwargs["model"] = model if model is not None else Lorenz96Params(dimension=4)
        if kwargs["total_steps"] is None:
            between = kwargs["steps_between_assimilation"]
            kwargs["total_steps"] = (
                between if isinstance(between, int) and between >= 1 else 1
            )
    else:
        kwargs["model"] = model
    try:
        cfg = ExperimentConfig(**kwargs)
    except ConfigError as exc:
        problems.extend(exc.problems)
        return None
    return cfg if complete else None


def load_experiment_config(path) -> ExperimentConfig:
    """Parse and fully validate the experiment part of a config file."""
    raw = _load_raw(path)
    problems: list = []
    cfg = _build_experiment(raw, problems)
    _raise_if(problems)
    assert cfg is not None
    return cfg


def _build_axis(sec: _Section, key: str, problems, required: bool):
    table = sec.take(key, "table", None if not required else _MISSING)
    if table is None or not isinstance(table, dict):
        return None
    axis_sec = _Section(table, f"sweep.{key}", problems)
    name = axis_sec.take("name", "str")
    values = axis_sec.take("values", "list", [])
    axis_sec.finish()
    if name is None:
        return None
    cleaned = []
    for k, v in enumerate(values):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            problems.append(f"sweep.{key}.values[{k}] must be a number")
        else:
            cleaned.append(v)
    if not cleaned:
        problems.append(f"sweep.{key}.values must be a non-empty number list")
        return None
    return SweepAxis(name=name, values=tuple(cleaned))


def load_sweep_config(path) -> SweepConfig:
    """Parse a config file carrying a [sweep] section."""
    raw = _load_raw(path)
    problems: list = []
    base = _build_experiment(raw, problems)
    if "sweep" not in raw:
        problems.append("sweep section is required for the sweep command")
        _raise_if(problems)
    sec = _Section(raw["sweep"], "sweep", problems)
    axis1 = _build_axis(sec, "axis1", problems, required=True)
    axis2 = _build_axis(sec, "axis2", problems, required=False)
    window = sec.take("window", "str", "all-assimilation-times")
    cap = sec.take("divergence_cap", "float", 100.0)
    sec.finish()
    if base is None or axis1 is None:
        _raise_if(problems)
    try:
        cfg = SweepConfig(
            base=base, axis1=axis1, axis2=axis2, window=window, divergence_cap=cap
        )
    except ConfigError as exc:
        _merge_config_error(problems, "sweep", exc)
        _raise_if(problems)
    _raise_if(problems)
    return cfg


def load_compare_config(path) -> list:
    """Parse a config file carrying a [compare] section.

    Returns a list of ExperimentConfig sharing truth, observations, and
    seed, one per entry, differing only in filter method and label.
    """
    raw = _load_raw(path)
    problems: list = []
    base = _build_experiment(raw, problems)
    if "compare" not in raw:
        problems.append("compare section is required for the compare command")
        _raise_if(problems)
    sec = _Section(raw["compare"], "compare", problems)
    entries_raw = sec.take("entries", "list", [])
    sec.finish()
    if not entries_raw:
        problems.append("compare.entries must be a non-empty list")

    configs = []
    labels = set()
    for k, item in enumerate(entries_raw):
        where = f"compare.entries[{k}]"
        if not isinstance(item, dict):
            problems.append(f"{where} must be a table")
            continue
        esec = _Section(item, where, problems)
        method = esec.take("method", "str", base.method if base else "ensf")
        label = esec.take("label", "str", f"{method}-{k + 1}")
        ensf_cfg = _build_ensf(esec.subsection("ensf"), problems)
        letkf_cfg = _build_letkf(esec.subsection("letkf"), problems)
        esec.finish()
        if label in labels:
            problems.append(f"{where}: duplicate label {label!r}")
        labels.add(label)
        if base is None:
            continue
        try:
            configs.append(
                replace(
                    base,
                    method=method,
                    ensf=ensf_cfg,
                    letkf=letkf_cfg,
                    label=label,
                )
            )
        except ConfigError as exc:
            _merge_config_error(problems, where, exc)
    _raise_if(problems)
    return configs


def load_scaling_config(path) -> ScalingConfig:
    """Parse a config file carrying a [scaling] section."""
    raw = _load_raw(path)
    problems: list = []
    base = _build_experiment(raw, problems)
    if "scaling" not in raw:
        problems.append("scaling section is required for the scaling command")
        _raise_if(problems)
    sec = _Section(raw["scaling"], "scaling", problems)
    dims = sec.take("dimensions", "list")
    reps = sec.take("repetitions", "int", 20)
    warmup = sec.take("warmup", "int", 2)
    max_dim = sec.take("max_dimension", "int", 100_000)
    sec.finish()
    cleaned = []
    for k, v in enumerate(dims or []):
        if not isinstance(v, int) or isinstance(v, bool):
            problems.append(f"scaling.dimensions[{k}] must be an integer")
        else:
            cleaned.append(v)
    if base is None or not cleaned:
        if not cleaned and dims is not None:
            problems.append("scaling.dimensions must be a non-empty integer list")
        _raise_if(problems)
    try:
        cfg = ScalingConfig(
            base=base,
            dimensions=tuple(cleaned),
            repetitions=reps,
            warmup=warmup,
            max_dimension=max_dim,
        )
    except ConfigError as exc:
        _merge_config_error(problems, "scaling", exc)
        _raise_if(problems)
    _raise_if(problems)
    return cfg


def validate_config_file(path):
    """Validate every section a config file carries.

    Returns ``(experiment_config, section_names)``; raises ConfigError with
    the full problem list if anything is invalid.
    """
    raw = _load_raw(path)
    cfg = load_experiment_config(path)
    sections = ["run"]
    if "sweep" in raw:
        load_sweep_config(path)
        sections.append("sweep")
    if "compare" in raw:
        load_compare_config(path)
        sections.append("compare")
    if "scaling" in raw:
        load_scaling_config(path)
        sections.append("scaling")
    return cfg, sections


# ---------------------------------------------------------------------------
# canonical serialization (digests, metadata)
# ---------------------------------------------------------------------------


def config_as_dict(cfg: ExperimentConfig) -> dict:
    """Plain nested dict view of a config, arrays converted to lists."""

    def convert(value):
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if hasattr(value, "__dataclass_fields__"):
            return {
                f.name: convert(getattr(value, f.name))
                for f in fields(value)
            }
        return value

    return convert(cfg)
