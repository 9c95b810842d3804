"""Line-oriented ``key=value`` experiment configuration.

Blank lines and ``#`` comments are ignored.  An empty value leaves an optional
key unset.  Every key is validated; unknown keys are rejected.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Iterable

from .aoi_mdp import AOI_REWARD_MODES, COMPONENTS, WorldConfig
from .delay_models import KINDS, DelayModel
from .errors import ConfigError, DomainError
from .learner import AGENT_KINDS, MOTIONS, TrainSettings

REPORT_ENV_VAR = "AOIMDP_REPORT_DIR"


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], bool] | None = None
    constraint: str = ""


def _choice(options):
    return lambda v: v in options, "one of " + ", ".join(options)


def _world_keys():
    base = WorldConfig()
    out = []
    for f in fields(WorldConfig):
        default = getattr(base, f.name)
        if f.name == "weights":
            out.append(
                Key("env.weights", _floats, default, lambda v: len(v) == len(COMPONENTS),
                    f"{len(COMPONENTS)} comma-separated weights ({', '.join(COMPONENTS)})")
            )
        elif f.name == "aoi_reward":
            check, text = _choice(AOI_REWARD_MODES)
            out.append(Key("env.aoi_reward", str, default, check, text))
        elif isinstance(default, int):
            out.append(Key(f"env.{f.name}", int, default))
        else:
            out.append(Key(f"env.{f.name}", float, default))
    return out


def _keys() -> dict[str, Key]:
    pos = lambda v: v > 0  # noqa: E731
    nonneg = lambda v: v >= 0  # noqa: E731
    atleast1 = lambda v: v >= 1  # noqa: E731
    delay_kind = _choice(KINDS)
    agent_kind = _choice(AGENT_KINDS)
    motion = _choice(MOTIONS)
    keys = _world_keys() + [
        Key("delay.kind", str, "ssp", *delay_kind),
        Key("delay.rate", float),
        Key("delay.mean", float),
        Key("delay.p", float),
        Key("delay.time_unit", float, 1.0, pos, "> 0"),
        Key("delay.value", float),
        Key("delay.y_lo", float),
        Key("delay.y_hi", float),
        Key("delay.q", float),
        Key("delay.sound_speed", float, 1500.0, pos, "> 0"),
        Key("delay.sample_rate", float, 2000.0, pos, "> 0"),
        Key("delay.snr_db", float, 10.0),
        Key("delay.template_len", int, 32, atleast1, ">= 1"),
        Key("delay.max_range", float, None, pos, "> 0 (unset: arena diagonal)"),
        Key("delay.round_trip", _bool, True),
        Key("delay.template_seed", int, 0),
        Key("agent.kind", str, "q_discrete", *agent_kind),
        Key("agent.motion", str, "nearest", *motion),
        Key("agent.heading", float, 0.0),
        Key("agent.speed", float, None, nonneg, ">= 0 (unset: env.max_speed)"),
        Key("agent.wait", float, 0.0, nonneg, ">= 0"),
        Key("agent.theta", float, 1.0, nonneg, ">= 0"),
        Key("agent.heading_buckets", int, 8, atleast1, ">= 1"),
        Key("agent.speed_buckets", int, 3, atleast1, ">= 1"),
        Key("agent.wait_buckets", int, 6, atleast1, ">= 1"),
        Key("agent.delay_bins", int, 4, atleast1, ">= 1"),
        Key("agent.direction_buckets", int, 8, atleast1, ">= 1"),
        Key("agent.alpha", float, 0.2, lambda v: 0 < v <= 1, "in (0, 1]"),
        Key("agent.gamma", float, 0.9, lambda v: 0 <= v <= 1, "in [0, 1]"),
        Key("agent.eps_start", float, 1.0, lambda v: 0 <= v <= 1, "in [0, 1]"),
        Key("agent.eps_end", float, 0.05, lambda v: 0 <= v <= 1, "in [0, 1]"),
        Key("agent.eps_fraction", float, 0.5, lambda v: 0 <= v <= 1, "in [0, 1]"),
        Key("train.epochs", int, 300, atleast1, ">= 1"),
        Key("train.steps", int, 100, atleast1, ">= 1"),
        Key("train.seed", int, 0, nonneg, ">= 0"),
        Key("train.buffer_capacity", int, 10000, atleast1, ">= 1"),
        Key("train.batch", int, 16, atleast1, ">= 1"),
        Key("train.updates", _bool, True),
        Key("train.eval_episodes", int, 10, atleast1, ">= 1"),
        Key("train.log_episodes", _bool, False),
        Key("report.dir", str, None),
        Key("report.formats", str, "csv", lambda v: v == "csv", "csv"),
    ]
    return {k.name: k for k in keys}


KEYS = _keys()


def _parse_value(key: Key, raw: str):
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = key.parse(raw)
    except ValueError:
        raise ConfigError(
            f"{key.name}={raw!r}: expected {key.parse.__name__.lstrip('_')}"
        ) from None
    if key.check is not None and not key.check(value):
        raise ConfigError(f"{key.name}={raw!r} violates constraint {key.constraint}")
    return value


def _parse_lines(lines: Iterable[str], origin: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {text!r}")
        name, raw = (s.strip() for s in text.split("=", 1))
        if name not in KEYS:
            raise ConfigError(f"{origin}:{lineno}: unknown key {name!r}")
        if name in out:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {name!r}")
        out[name] = raw
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, name):
        return self.values[name]

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with ``{"section.key": value}`` replacements, revalidated."""
        raw = {k: _fmt(v) for k, v in self.values.items()}
        raw.update({k: _fmt(v) for k, v in changes.items()})
        return _resolve(raw)

    # typed views -------------------------------------------------------

    def world_config(self) -> WorldConfig:
        kw = {f.name: self.values[f"env.{f.name}"] for f in fields(WorldConfig)}
        return WorldConfig(**kw)

    def delay_model(self) -> DelayModel:
        kind = self.values["delay.kind"]
        names = {
            "exponential": ("rate",),
            "poisson": ("mean", "time_unit"),
            "geometric": ("p", "time_unit"),
            "constant": ("value",),
            "two_point": ("y_lo", "y_hi", "q"),
            "ssp": (
                "sound_speed", "sample_rate", "snr_db", "template_len",
                "max_range", "round_trip", "template_seed",
            ),
        }[kind]
        params = {n: self.values[f"delay.{n}"] for n in names if self.values[f"delay.{n}"] is not None}
        if kind == "ssp" and "max_range" not in params:
            params["max_range"] = self.world_config().diagonal
        return DelayModel(kind, params)

    def agent_params(self) -> dict:
        kind = self.values["agent.kind"]
        motion = {
            "motion": self.values["agent.motion"],
            "heading": self.values["agent.heading"],
            "speed": self.values["agent.speed"],
        }
        if kind == "zero_wait":
            return motion
        if kind == "fixed_wait":
            return {**motion, "wait": self.values["agent.wait"]}
        if kind == "threshold_wait":
            return {**motion, "theta": self.values["agent.theta"]}
        names = ("heading_buckets", "speed_buckets", "wait_buckets", "delay_bins",
                 "direction_buckets", "alpha", "gamma")
        return {n: self.values[f"agent.{n}"] for n in names}

    def train_settings(self) -> TrainSettings:
        v = self.values
        return TrainSettings(
            epochs=v["train.epochs"],
            steps=v["train.steps"],
            seed=v["train.seed"],
            buffer_capacity=v["train.buffer_capacity"],
            batch=v["train.batch"],
            updates=v["train.updates"],
            eps_start=v["agent.eps_start"],
            eps_end=v["agent.eps_end"],
            eps_fraction=v["agent.eps_fraction"],
        )

    @property
    def report_dir(self) -> Path:
        return Path(self.values["report.dir"])

    def dumps(self) -> str:
        """Resolved configuration in the same ``key=value`` format, sorted by key."""
        return "".join(f"{k}={_fmt(self.values[k])}\n" for k in sorted(self.values))


def _resolve(raw: dict[str, str]) -> ExperimentConfig:
    values = {}
    for name, key in KEYS.items():
        values[name] = _parse_value(key, raw[name]) if name in raw else key.default
    if values["report.dir"] is None:
        values["report.dir"] = os.environ.get(REPORT_ENV_VAR, "reports")
    cfg = ExperimentConfig(values)
    # cross-key validation through the typed views
    try:
        world = cfg.world_config()
        delay = cfg.delay_model()
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if delay.needs_distance and delay.params["max_range"] < world.diagonal:
        raise ConfigError(
            f"delay.max_range={delay.params['max_range']} violates constraint "
            f">= arena diagonal {world.diagonal:.3f}"
        )
    if values["agent.kind"] == "fixed_wait" and values["agent.wait"] > world.z_max:
        raise ConfigError(
            f"agent.wait={values['agent.wait']} violates constraint <= env.z_max={world.z_max}"
        )
    return cfg


def parse_config(path=None, overrides: Iterable[str] = (), text: str | None = None) -> ExperimentConfig:
    """Read ``path`` (or ``text``), apply ``key=value`` overrides, validate."""
    raw: dict[str, str] = {}
    if path is not None:
        raw.update(_parse_lines(Path(path).read_text(encoding="utf-8").splitlines(), str(path)))
    if text is not None:
        raw.update(_parse_lines(text.splitlines(), "<text>"))
    for item in overrides:
        raw.update(_parse_lines([item], "--set"))
    return _resolve(raw)


def write_resolved(cfg: ExperimentConfig, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "resolved.cfg"
    path.write_text(cfg.dumps(), encoding="utf-8")
    return path
