"""Sonar signal synthesis and the two classical estimators built on it.

* Time delay: a known template is shifted into a window of white Gaussian
  noise and recovered with a sliding correlator (matched filter).
* Azimuth: a single-tone snapshot across a uniform linear array is scanned
  with a spatial periodogram over a grid of angles in ``(0, pi/2)``.

The two estimates combine into a planar target position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class EchoSignal:
    samples: np.ndarray
    template: np.ndarray
    true_delay: int
    noise_variance: float


@dataclass(frozen=True)
class ArrayParams:
    """Array geometry and tone parameters; ``samples`` are added by synthesis."""

    amplitude: float = 1.0
    phase: float = 0.0
    carrier_hz: float = 375.0
    spacing_m: float = 1.0
    sound_speed: float = 1500.0
    noise_variance: float = 0.0
    n_sensors: int = 64

    def __post_init__(self):
        if self.n_sensors < 2:
            raise DomainError(f"need at least 2 sensors, got {self.n_sensors}")
        if not (self.sound_speed > 0 and self.spacing_m > 0):
            raise DomainError("sound_speed and spacing_m must be positive")
        if self.noise_variance < 0:
            raise DomainError("noise_variance must be >= 0")
        if self.spatial_ratio > 0.5:
            raise DomainError(
                f"F0*d/c = {self.spatial_ratio:g} exceeds 0.5; azimuth would alias"
            )

    @property
    def spatial_ratio(self) -> float:
        """``F0 * d / c``: spatial frequency in cycles per sensor at beta = 0."""
        return self.carrier_hz * self.spacing_m / self.sound_speed


@dataclass(frozen=True)
class ArraySnapshot:
    samples: np.ndarray
    params: ArrayParams


@dataclass(frozen=True)
class Localization:
    range: float
    azimuth: float
    position: np.ndarray


def noise_variance_for_snr(template, snr_db: float) -> float:
    """Per-sample noise variance giving ``snr_db`` for ``template``.

    SNR is the template's mean energy per sample over the noise variance.
    """
    template = np.asarray(template, dtype=float)
    energy = float(np.dot(template, template))
    return energy / (template.size * 10 ** (snr_db / 10))


def pn_template(length: int, rng: np.random.Generator) -> np.ndarray:
    """Pseudo-random +/-1 sequence."""
    return rng.choice(np.array([-1.0, 1.0]), size=length)


def synthesize_echo(template, delay: int, n_total: int, sigma2: float, rng) -> EchoSignal:
    template = np.asarray(template, dtype=float)
    m = template.size
    if m > n_total:
        raise DomainError(f"template length {m} exceeds window {n_total}")
    if not 0 <= delay <= n_total - m:
        raise DomainError(f"delay {delay} outside [0, {n_total - m}]")
    if sigma2 < 0:
        raise DomainError("sigma2 must be >= 0")
    x = np.zeros(n_total)
    x[delay : delay + m] = template
    if sigma2 > 0:
        x += rng.normal(0.0, math.sqrt(sigma2), n_total)
    return EchoSignal(x, template, int(delay), float(sigma2))


def correlator_scores(signal, template) -> np.ndarray:
    """``J[k] = sum_n signal[n] * template[n - k]`` for every admissible shift ``k``."""
    signal = np.asarray(signal, dtype=float)
    template = np.asarray(template, dtype=float)
    if template.size > signal.size:
        raise DomainError(
            f"template length {template.size} exceeds signal length {signal.size}"
        )
    if template.size == 0:
        raise DomainError("empty template")
    return sliding_window_view(signal, template.size) @ template


def correlator_delay_estimate(signal, template) -> tuple[int, np.ndarray]:
    """Integer shift maximizing the correlator; ties go to the smallest shift."""
    scores = correlator_scores(signal, template)
    return int(np.argmax(scores)), scores


def synthesize_array_snapshot(params: ArrayParams, beta: float, rng=None) -> ArraySnapshot:
    if not 0 < beta < HALF_PI:
        raise DomainError(f"beta must lie in (0, pi/2), got {beta}")
    n = np.arange(params.n_sensors)
    freq = params.spatial_ratio * math.cos(beta)
    x = params.amplitude * np.cos(2 * math.pi * freq * n + params.phase)
    if params.noise_variance > 0:
        if rng is None:
            raise DomainError("a random generator is required when noise_variance > 0")
        x = x + rng.normal(0.0, math.sqrt(params.noise_variance), n.size)
    return ArraySnapshot(x, params)


def azimuth_grid(grid_points: int) -> np.ndarray:
    """``grid_points`` evenly spaced interior points of ``(0, pi/2)``."""
    if grid_points < 2:
        raise DomainError(f"grid_points must be >= 2, got {grid_points}")
    return np.arange(1, grid_points + 1) * (HALF_PI / (grid_points + 1))


def periodogram_scores(samples, spatial_ratio: float, betas) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise DomainError("empty snapshot")
    n = np.arange(x.size)
    phase = -2j * math.pi * np.outer(spatial_ratio * np.cos(betas), n)
    return np.abs(np.exp(phase) @ x) ** 2 / x.size


def periodogram_azimuth_estimate(
    snapshot: ArraySnapshot, grid_points: int = 1024
) -> tuple[float, np.ndarray]:
    """Grid maximizer of the spatial periodogram; ties go to the smallest angle."""
    betas = azimuth_grid(grid_points)
    scores = periodogram_scores(snapshot.samples, snapshot.params.spatial_ratio, betas)
    return float(betas[int(np.argmax(scores))]), scores


def localize_target(
    delay_samples: int,
    sample_rate: float,
    sound_speed: float,
    azimuth: float,
    round_trip: bool = True,
) -> Localization:
    if not sample_rate > 0 or not sound_speed > 0:
        raise DomainError("sample_rate and sound_speed must be positive")
    if delay_samples < 0:
        raise DomainError("delay_samples must be >= 0")
    if not 0 < azimuth < HALF_PI:
        raise DomainError(f"azimuth must lie in (0, pi/2), got {azimuth}")
    rng_m = sound_speed * (delay_samples / sample_rate) * (0.5 if round_trip else 1.0)
    pos = rng_m * np.array([math.cos(azimuth), math.sin(azimuth)])
    return Localization(rng_m, azimuth, pos)


def selftest_curve(
    snr_dbs=(0.0, 5.0, 10.0, 20.0),
    trials: int = 200,
    n_total: int = 512,
    template_len: int = 64,
    seed: int = 0,
) -> list[dict]:
    """Monte-Carlo exact-recovery rate of the correlator versus SNR.

    Every SNR level reuses the same templates, delays and unit-variance noise
    draws, so the levels differ only by the noise scale.
    """
    rng = np.random.default_rng(seed)
    templates = [pn_template(template_len, rng) for _ in range(trials)]
    delays = rng.integers(0, n_total - template_len + 1, size=trials)
    unit_noise = rng.standard_normal((trials, n_total))
    rows = []
    for snr in snr_dbs:
        hits = 0
        abs_err = 0.0
        for tpl, k, w in zip(templates, delays, unit_noise):
            sigma2 = noise_variance_for_snr(tpl, snr)
            clean = synthesize_echo(tpl, int(k), n_total, 0.0, None).samples
            est, _ = correlator_delay_estimate(clean + math.sqrt(sigma2) * w, tpl)
            hits += int(est == k)
            abs_err += abs(est - int(k))
        rows.append(
            {
                "snr_db": float(snr),
                "trials": trials,
                "exact_rate": hits / trials,
                "mean_abs_err": abs_err / trials,
            }
        )
    return rows
