"""Stochastic sources of observation delay.

Parametric kinds draw from a fixed distribution.  The ``ssp`` kind derives the
delay from sonar geometry: the echo from a target at the supplied distance is
synthesized in noise and its delay recovered with the correlator, so the
returned delay carries the estimator's quantization and error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from . import signal_ssp
from .errors import ConfigError, DomainError, UnsupportedOperation

KINDS = ("ssp", "exponential", "poisson", "geometric", "constant", "two_point")

_SSP_DEFAULTS = {
    "sound_speed": 1500.0,
    "sample_rate": 2000.0,
    "snr_db": 10.0,
    "template_len": 32,
    "max_range": 200.0,
    "round_trip": True,
    "template_seed": 0,
}


def _need(kind, params, name, ok, constraint):
    if name not in params:
        raise ConfigError(f"delay.{name} is required for delay.kind={kind}")
    value = params[name]
    if not ok(value):
        raise ConfigError(f"delay.{name}={value!r} violates {constraint}")
    return value


@dataclass(frozen=True)
class DelayModel:
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"delay.kind={self.kind!r} not one of {', '.join(KINDS)}")
        p = dict(self.params)
        if self.kind == "ssp":
            p = {**_SSP_DEFAULTS, **p}
        self._validate(p)
        object.__setattr__(self, "params", MappingProxyType(p))

    def _validate(self, p):
        k = self.kind
        pos = lambda v: v > 0  # noqa: E731
        if k == "exponential":
            _need(k, p, "rate", pos, "rate > 0")
        elif k == "poisson":
            _need(k, p, "mean", pos, "mean > 0")
            _need(k, p, "time_unit", pos, "time_unit > 0")
        elif k == "geometric":
            _need(k, p, "p", lambda v: 0 < v <= 1, "0 < p <= 1")
            _need(k, p, "time_unit", pos, "time_unit > 0")
        elif k == "constant":
            _need(k, p, "value", lambda v: v >= 0, "value >= 0")
        elif k == "two_point":
            lo = _need(k, p, "y_lo", lambda v: v >= 0, "y_lo >= 0")
            _need(k, p, "y_hi", lambda v: v >= lo, "y_hi >= y_lo")
            _need(k, p, "q", lambda v: 0 <= v <= 1, "0 <= q <= 1")
        else:
            for name in ("sound_speed", "sample_rate", "max_range"):
                _need(k, p, name, pos, f"{name} > 0")
            _need(k, p, "template_len", lambda v: int(v) == v and v >= 1, "integer >= 1")

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float) -> "DelayModel":
        return cls("constant", {"value": value})

    @classmethod
    def exponential(cls, rate: float) -> "DelayModel":
        return cls("exponential", {"rate": rate})

    @classmethod
    def poisson(cls, mean: float, time_unit: float = 1.0) -> "DelayModel":
        return cls("poisson", {"mean": mean, "time_unit": time_unit})

    @classmethod
    def geometric(cls, p: float, time_unit: float = 1.0) -> "DelayModel":
        return cls("geometric", {"p": p, "time_unit": time_unit})

    @classmethod
    def two_point(cls, y_lo: float, y_hi: float, q: float) -> "DelayModel":
        return cls("two_point", {"y_lo": y_lo, "y_hi": y_hi, "q": q})

    @classmethod
    def ssp(cls, **params) -> "DelayModel":
        return cls("ssp", params)

    # ssp helpers --------------------------------------------------------

    @cached_property
    def _template(self) -> np.ndarray:
        rng = np.random.default_rng(int(self.params["template_seed"]))
        return signal_ssp.pn_template(int(self.params["template_len"]), rng)

    def _path_factor(self) -> float:
        return 2.0 if self.params["round_trip"] else 1.0

    @cached_property
    def _window(self) -> int:
        p = self.params
        max_shift = math.ceil(self._path_factor() * p["max_range"] / p["sound_speed"] * p["sample_rate"])
        return max_shift + int(p["template_len"])

    @property
    def needs_distance(self) -> bool:
        return self.kind == "ssp"

    # sampling -----------------------------------------------------------

    def sample(self, rng: np.random.Generator, distance: float | None = None) -> float:
        p = self.params
        k = self.kind
        if k == "constant":
            return float(p["value"])
        if k == "exponential":
            return float(rng.exponential(1.0 / p["rate"]))
        if k == "poisson":
            return float(p["time_unit"] * rng.poisson(p["mean"]))
        if k == "geometric":
            return float(p["time_unit"] * rng.geometric(p["p"]))
        if k == "two_point":
            return float(p["y_hi"] if rng.random() < p["q"] else p["y_lo"])
        return self._sample_ssp(rng, distance)

    def _sample_ssp(self, rng, distance):
        if distance is None:
            raise DomainError("ssp delay model needs the current target distance")
        p = self.params
        if not 0 <= distance <= p["max_range"]:
            raise DomainError(f"distance {distance} outside [0, max_range={p['max_range']}]")
        fs = p["sample_rate"]
        shift = round(self._path_factor() * distance / p["sound_speed"] * fs)
        tpl = self._template
        sigma2 = signal_ssp.noise_variance_for_snr(tpl, p["snr_db"])
        echo = signal_ssp.synthesize_echo(tpl, shift, self._window, sigma2, rng)
        est, _ = signal_ssp.correlator_delay_estimate(echo.samples, tpl)
        return est / fs


def sample_delay(model: DelayModel, rng: np.random.Generator, distance: float | None = None) -> float:
    return model.sample(rng, distance)


def model_moments(model: DelayModel) -> tuple[float, float]:
    """Analytic (mean, variance) of a parametric delay model."""
    p = model.params
    k = model.kind
    if k == "constant":
        return float(p["value"]), 0.0
    if k == "exponential":
        return 1.0 / p["rate"], 1.0 / p["rate"] ** 2
    if k == "poisson":
        u = p["time_unit"]
        return u * p["mean"], u * u * p["mean"]
    if k == "geometric":
        u, q = p["time_unit"], p["p"]
        return u / q, u * u * (1 - q) / q**2
    if k == "two_point":
        lo, hi, q = p["y_lo"], p["y_hi"], p["q"]
        return (1 - q) * lo + q * hi, q * (1 - q) * (hi - lo) ** 2
    raise UnsupportedOperation("ssp delays depend on geometry and have no closed-form moments")


def matched_mean(kind: str, mean: float, base: DelayModel | None = None) -> DelayModel:
    """A parametric model of ``kind`` whose mean equals ``mean``.

    Counting kinds use ``time_unit = mean / 4`` so that Poisson has mean count 4
    and the geometric success probability is 1/4.
    """
    if not mean > 0:
        raise DomainError(f"mean must be > 0, got {mean}")
    if kind == "ssp":
        if base is None or base.kind != "ssp":
            raise DomainError("an ssp base model is required")
        return base
    if kind == "exponential":
        return DelayModel.exponential(1.0 / mean)
    if kind == "poisson":
        return DelayModel.poisson(4.0, mean / 4)
    if kind == "geometric":
        return DelayModel.geometric(0.25, mean / 4)
    if kind == "constant":
        return DelayModel.constant(mean)
    raise DomainError(f"no mean-matched construction for kind {kind!r}")


def empirical_quantile_edges(
    model: DelayModel,
    n_bins: int,
    rng: np.random.Generator,
    n_draws: int = 2000,
    distance_sampler: Callable[[np.random.Generator], float] | None = None,
) -> np.ndarray:
    """Inner bin edges splitting the delay distribution into ``n_bins`` quantile bins."""
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}")
    if n_bins == 1:
        return np.empty(0)
    if model.needs_distance and distance_sampler is None:
        raise DomainError("ssp quantiles need a distance sampler")
    draws = np.array(
        [
            model.sample(rng, distance_sampler(rng) if model.needs_distance else None)
            for _ in range(n_draws)
        ]
    )
    return np.quantile(draws, np.arange(1, n_bins) / n_bins)
