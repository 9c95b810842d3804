from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoimdp.aoi_core import (
    AgeTracker,
    AoIProcess,
    DelayWaitTrace,
    aoi_area,
    instantaneous_aoi,
    numeric_integrate_aoi,
    time_avg_aoi,
    time_avg_aoi_geometric,
    time_avg_aoi_paper,
)
from aoimdp.errors import DomainError

from oracles import brute_riemann, exact_area, exact_time_avg, trace_pairs

durations = st.one_of(st.just(0.0), st.floats(1e-6, 5))


@st.composite
def traces(draw, min_n=0, max_n=20, y0_zero=False):
    n = draw(st.integers(min_n, max_n))
    ys = draw(st.lists(durations, min_size=n + 1, max_size=n + 1))
    if y0_zero:
        ys[0] = 0.0
    zs = draw(st.lists(durations, min_size=n, max_size=n))
    d0 = draw(durations)
    tr = DelayWaitTrace(tuple(ys), tuple(zs), d0)
    if tr.total_time <= 0:
        tr = DelayWaitTrace((1.0,) + tuple(ys[1:]), tuple(zs), d0)
    return tr


# --- frozen values from the exact oracle ---------------------------------------


def test_two_update_trace_values():
    tr = DelayWaitTrace((1.0, 1.0), (0.0,), 0.0)
    assert exact_time_avg((1, 1), (0,)) == Fraction(1)
    assert time_avg_aoi_geometric(tr) == 1.0
    assert time_avg_aoi_paper(tr) == 0.875


def test_wait_trace_value():
    # T=(0,3), D=(2,4): area = 2 + (2+4)/2*2 = 8 over 4 s
    tr = DelayWaitTrace((2.0, 1.0), (1.0,), 0.0)
    assert exact_time_avg((2, 1), (1,)) == Fraction(2)
    assert time_avg_aoi_geometric(tr) == pytest.approx(2.0, abs=1e-15)


def test_initial_age_ramp_value():
    tr = DelayWaitTrace((2.0,), (), 3.0)
    # age climbs 3 -> 5 over 2 s
    assert exact_time_avg((2,), (), 3) == Fraction(4)
    assert time_avg_aoi_geometric(tr) == 4.0


def test_instantaneous_sawtooth():
    p = AoIProcess(1.0, ((0.0, 2.0), (3.0, 4.0)))
    assert instantaneous_aoi(p, 0.0) == 1.0
    assert instantaneous_aoi(p, 1.5) == 2.5
    assert instantaneous_aoi(p, 2.0) == 2.0
    assert instantaneous_aoi(p, 3.9) == pytest.approx(3.9)
    assert instantaneous_aoi(p, 4.0) == 1.0
    with pytest.raises(DomainError):
        instantaneous_aoi(p, -0.1)


def test_area_against_exact_beyond_last_reception():
    p = AoIProcess(0.5, ((0.0, 1.0), (1.5, 2.25)))
    exact = exact_area(trace_pairs((1, 0.75), (0.5,)), Fraction(1, 2), 5)
    assert aoi_area(p, 5.0) == pytest.approx(float(exact), abs=1e-12)
    assert time_avg_aoi(p, 0.0) == 0.5


def test_domain_errors():
    with pytest.raises(DomainError):
        DelayWaitTrace((1.0, 1.0), ())
    with pytest.raises(DomainError):
        DelayWaitTrace((-1.0,), ())
    with pytest.raises(DomainError):
        AoIProcess(0.0, ((1.0, 0.5),))
    with pytest.raises(DomainError):
        AoIProcess(0.0, ((0.0, 2.0), (1.0, 2.0)))
    with pytest.raises(DomainError):
        time_avg_aoi_geometric(DelayWaitTrace((0.0,), ()))
    with pytest.raises(DomainError):
        numeric_integrate_aoi(AoIProcess(0.0, ((0.0, 1.0),)), 1.0, 0.0)
    with pytest.raises(DomainError):
        AoIProcess().to_trace()


def test_riemann_fast_path_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(0, 15))
        tr = DelayWaitTrace(tuple(rng.uniform(0.01, 5, n + 1)), tuple(rng.uniform(0, 5, n)), rng.uniform(0, 5))
        p = tr.to_process()
        h = p.updates[-1][1]
        for dt in (0.37, 1e-2):
            got = numeric_integrate_aoi(p, h, dt)
            want = brute_riemann(p.updates, tr.initial_age, h, dt)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


# --- properties ---------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(traces())
def test_geometric_matches_exact_oracle(tr):
    want = exact_time_avg(tr.delays, tr.waits, Fraction(tr.initial_age))
    assert time_avg_aoi_geometric(tr) == pytest.approx(float(want), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(traces(y0_zero=True, min_n=1))
def test_literal_form_agrees_when_first_delay_is_zero(tr):
    if tr.total_time <= 0 or tr.delays[0] != 0.0:
        return
    assert time_avg_aoi_paper(tr) == pytest.approx(time_avg_aoi_geometric(tr), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(traces())
def test_average_is_nonnegative_and_bounded(tr):
    avg = time_avg_aoi_geometric(tr)
    assert avg >= 0
    # age never exceeds initial age plus elapsed time
    assert avg <= tr.initial_age + tr.total_time + 1e-9


@settings(max_examples=100, deadline=None)
@given(traces(), st.floats(0, 10))
def test_process_form_agrees_with_trace_form(tr, extra):
    try:
        p = tr.to_process()
    except DomainError:
        return  # zero delay and zero wait collapse two receptions onto one instant
    assert time_avg_aoi(p) == pytest.approx(time_avg_aoi_geometric(tr), rel=1e-9, abs=1e-9)
    h = tr.total_time + extra
    exact = exact_area(trace_pairs(tr.delays, tr.waits), Fraction(tr.initial_age), Fraction(h))
    assert aoi_area(p, h) == pytest.approx(float(exact), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(traces(), st.floats(0, 30))
def test_instantaneous_age_is_nonnegative_and_never_below_delay(tr, t):
    try:
        p = tr.to_process()
    except DomainError:
        return
    a = instantaneous_aoi(p, t)
    assert a >= 0
    i = np.searchsorted(p.recv_times, t, side="right") - 1
    if i >= 0:
        assert a >= tr.delays[i] - 1e-9


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=3, max_size=21).filter(lambda v: len(v) % 2 == 1), st.integers(0, 4))
def test_dyadic_round_trip_is_exact(vals, d0):
    ys = tuple(v / 4 + 0.25 for v in vals[: len(vals) // 2 + 1])
    zs = tuple(v / 8 for v in vals[len(vals) // 2 + 1 :])
    tr = DelayWaitTrace(ys, zs, d0 / 2)
    assert tr.to_process().to_trace() == tr


@settings(max_examples=100, deadline=None)
@given(traces(min_n=1), st.floats(0, 5))
def test_tracker_matches_batch_area(tr, extra):
    try:
        p = tr.to_process()
    except DomainError:
        return
    trk = AgeTracker(tr.initial_age)
    for gen, recv in p.updates:
        trk.receive(gen, recv)
    h = p.updates[-1][1] + extra
    assert trk.area(h) == pytest.approx(aoi_area(p, h), rel=1e-9, abs=1e-9)
    assert trk.age(h) == pytest.approx(instantaneous_aoi(p, h), abs=1e-9)


def test_tracker_refuses_to_go_back():
    trk = AgeTracker()
    trk.receive(0.0, 2.0)
    with pytest.raises(DomainError):
        trk.receive(1.0, 1.5)
    with pytest.raises(DomainError):
        trk.average(1.0)
