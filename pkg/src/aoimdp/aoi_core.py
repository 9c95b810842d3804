"""Age-of-Information sawtooth processes and their time averages.

An update ``i`` is generated at ``T_i`` and received at ``D_i``.  Between
receptions the age grows with slope one and drops to the delay ``D_i - T_i``
at every reception.  Before the first reception the age is ``initial_age + t``.

Two equivalent descriptions are supported:

* :class:`AoIProcess` stores the ``(T_i, D_i)`` pairs directly.
* :class:`DelayWaitTrace` stores delays ``Y_0..Y_N`` and waits ``Z_0..Z_{N-1}``
  with ``T_0 = 0``, ``D_i = T_i + Y_i`` and ``T_{i+1} = D_i + Z_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "AoIProcess",
    "DelayWaitTrace",
    "AgeTracker",
    "instantaneous_aoi",
    "time_avg_aoi_paper",
    "time_avg_aoi_geometric",
    "aoi_area",
    "time_avg_aoi",
    "numeric_integrate_aoi",
]


@dataclass(frozen=True)
class AoIProcess:
    initial_age: float = 0.0
    updates: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.initial_age >= 0:
            raise DomainError(f"initial_age must be >= 0, got {self.initial_age}")
        ups = tuple((float(t), float(d)) for t, d in self.updates)
        object.__setattr__(self, "updates", ups)
        for i, (t, d) in enumerate(ups):
            if d < t:
                raise DomainError(f"update {i}: recv_time {d} precedes gen_time {t}")
            if i:
                pt, pd = ups[i - 1]
                if not d > pd:
                    raise DomainError(f"update {i}: recv_times must strictly increase")
                if t < pt:
                    raise DomainError(f"update {i}: gen_times must be nondecreasing")

    @property
    def gen_times(self) -> np.ndarray:
        return np.array([u[0] for u in self.updates], dtype=float)

    @property
    def recv_times(self) -> np.ndarray:
        return np.array([u[1] for u in self.updates], dtype=float)

    def append(self, gen_time: float, recv_time: float) -> "AoIProcess":
        return AoIProcess(self.initial_age, self.updates + ((gen_time, recv_time),))

    def to_trace(self) -> "DelayWaitTrace":
        """Inverse of :meth:`DelayWaitTrace.to_process`; needs ``T_0 == 0``."""
        if not self.updates:
            raise DomainError("cannot convert an empty process to a trace")
        if self.updates[0][0] != 0.0:
            raise DomainError("trace form requires the first gen_time to be 0")
        t, d = self.gen_times, self.recv_times
        return DelayWaitTrace(
            delays=tuple(d - t), waits=tuple(t[1:] - d[:-1]), initial_age=self.initial_age
        )


@dataclass(frozen=True)
class DelayWaitTrace:
    delays: tuple[float, ...]
    waits: tuple[float, ...] = ()
    initial_age: float = 0.0

    def __post_init__(self):
        y = tuple(float(v) for v in self.delays)
        z = tuple(float(v) for v in self.waits)
        object.__setattr__(self, "delays", y)
        object.__setattr__(self, "waits", z)
        if len(y) != len(z) + 1:
            raise DomainError(
                f"need exactly one more delay than waits, got {len(y)} and {len(z)}"
            )
        if any(not v >= 0 for v in y + z) or not self.initial_age >= 0:
            raise DomainError("delays, waits and initial_age must be nonnegative")

    @property
    def total_time(self) -> float:
        """Reception instant of the last update, ``D_N``."""
        return math.fsum(self.delays) + math.fsum(self.waits)

    def to_process(self) -> AoIProcess:
        ups = []
        t = 0.0
        for i, y in enumerate(self.delays):
            d = t + y
            ups.append((t, d))
            if i < len(self.waits):
                t = d + self.waits[i]
        return AoIProcess(self.initial_age, tuple(ups))


def instantaneous_aoi(process: AoIProcess, t: float) -> float:
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    i = int(np.searchsorted(process.recv_times, t, side="right")) - 1
    if i < 0:
        return process.initial_age + t
    return t - process.updates[i][0]


def time_avg_aoi_paper(trace: DelayWaitTrace) -> float:
    """Literal closed-form average over the delay and wait sequences.

    Note that the initial-ramp term ``S_0`` enters the numerator undoubled,
    so this disagrees with :func:`time_avg_aoi_geometric` whenever ``Y_0 > 0``.
    """
    y = np.asarray(trace.delays)
    z = np.asarray(trace.waits)
    s0 = 0.5 * (2 * trace.initial_age + y[0]) * y[0]
    num = np.sum((2 * y[:-1] + y[1:] + z) * (y[1:] + z)) + s0
    den = 2 * (np.sum(z) + np.sum(y[1:]) + y[0])
    if den <= 0:
        raise DomainError("trace spans zero total time")
    return float(num / den)


def time_avg_aoi_geometric(trace: DelayWaitTrace) -> float:
    """Area under the sawtooth up to ``D_N`` divided by ``D_N``."""
    y = np.asarray(trace.delays)
    z = np.asarray(trace.waits)
    total = trace.total_time
    if total <= 0:
        raise DomainError("trace spans zero total time")
    # initial ramp Δ0 -> Δ0+Y0, then trapezoids Y_{i-1} -> Y_{i-1}+Z_{i-1}+Y_i
    first = (2 * trace.initial_age + y[0]) * y[0]
    width = z + y[1:]
    segs = (2 * y[:-1] + width) * width
    return float((first + np.sum(segs)) / (2 * total))


def aoi_area(process: AoIProcess, horizon: float) -> float:
    """Integral of the age over ``[0, horizon]``."""
    if horizon < 0:
        raise DomainError(f"horizon must be >= 0, got {horizon}")
    t, d = process.gen_times, process.recv_times
    k = int(np.searchsorted(d, horizon, side="right"))
    # segment starts/ends and the generation instant that anchors each one
    starts = np.concatenate(([0.0], d[:k]))
    ends = np.concatenate((d[:k], [horizon]))
    anchors = np.concatenate(([-process.initial_age], t[:k]))
    a0 = starts - anchors
    a1 = ends - anchors
    return float(np.sum((a0 + a1) * (ends - starts)) / 2)


def time_avg_aoi(process: AoIProcess, horizon: float | None = None) -> float:
    """Time-averaged age over ``[0, horizon]`` (default: last reception).

    At ``horizon == 0`` this is the limit ``initial_age``.
    """
    if horizon is None:
        if not process.updates:
            raise DomainError("horizon required for an empty process")
        horizon = process.updates[-1][1]
    if horizon == 0:
        return process.initial_age
    return aoi_area(process, horizon) / horizon


def numeric_integrate_aoi(process: AoIProcess, horizon: float, dt: float) -> float:
    """Left Riemann sum of the age on the grid ``0, dt, 2dt, ...`` over ``[0, horizon]``.

    The last cell is truncated at ``horizon``.  Grid points are grouped by the
    sawtooth segment they fall in; inside a segment the age is ``t - anchor``, so
    the sum over its grid points is an arithmetic series evaluated in closed form.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt}")
    if not horizon > 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    d = process.recv_times
    if d.size and horizon < d[-1]:
        raise DomainError("horizon must not precede the last reception")
    n_pts = math.ceil(horizon / dt)
    bounds = np.concatenate(([0.0], d, [horizon]))
    anchors = np.concatenate(([-process.initial_age], process.gen_times))
    lo = np.ceil(bounds[:-1] / dt).astype(np.int64)
    hi = np.minimum(np.ceil(bounds[1:] / dt).astype(np.int64), n_pts) - 1
    lo[0] = 0
    hi[-1] = n_pts - 1
    cnt = np.maximum(hi - lo + 1, 0)
    ksum = (lo + hi) * cnt / 2.0
    total = dt * np.sum(dt * ksum - cnt * anchors)
    # shrink the last cell to end at the horizon
    k_last = n_pts - 1
    seg_last = int(np.searchsorted(d, k_last * dt, side="right"))
    f_last = k_last * dt - anchors[seg_last]
    total -= (n_pts * dt - horizon) * f_last
    return float(total / horizon)


@dataclass
class AgeTracker:
    """Incremental sawtooth area for online use.

    Receptions must be pushed in time order; queries must not go back in time
    past the last reception.
    """

    initial_age: float = 0.0
    _area: float = field(default=0.0, init=False)
    _t_mark: float = field(default=0.0, init=False)
    _anchor: float = field(default=0.0, init=False)
    n_received: int = field(default=0, init=False)

    def __post_init__(self):
        self._anchor = -self.initial_age

    def _advance(self, t: float):
        if t < self._t_mark:
            raise DomainError("age tracker cannot move backwards in time")
        a0 = self._t_mark - self._anchor
        a1 = t - self._anchor
        self._area += (a0 + a1) * (t - self._t_mark) / 2
        self._t_mark = t

    def receive(self, gen_time: float, recv_time: float):
        self._advance(recv_time)
        self._anchor = gen_time
        self.n_received += 1

    def age(self, t: float) -> float:
        return t - self._anchor

    def area(self, t: float) -> float:
        a0 = self._t_mark - self._anchor
        a1 = t - self._anchor
        return self._area + (a0 + a1) * (t - self._t_mark) / 2

    def average(self, t: float) -> float:
        if t < self._t_mark:
            raise DomainError("age tracker cannot move backwards in time")
        if t == 0:
            return self.initial_age
        return self.area(t) / t

