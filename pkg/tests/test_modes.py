import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpwgf.geometry import kite_curve, vertical_wall
from qpwgf.modes import (EVANESCENT, GRAZING, PROPAGATING, ProblemConfig, build_mode_table,
                         mode_trace, wood_derivative_trace)

K_STAR = 2 * math.pi / (2.0 * (1 - math.sin(math.pi / 4)))


def kite_cfg(k1):
    return ProblemConfig(k1, 20.0, 1.0, 2.0, math.pi / 4)


def test_config_derived_quantities():
    cfg = kite_cfg(10.68)
    assert cfg.alpha == pytest.approx(10.68 * math.sin(math.pi / 4))
    assert cfg.beta >= 0
    assert abs(abs(cfg.gamma) - 1) < 1e-14


@pytest.mark.parametrize("bad", [dict(k1=-1.0), dict(k2=0.0), dict(eta=float("nan")),
                                 dict(period=0.0), dict(theta_inc=2.0)])
def test_config_validation(bad):
    args = dict(k1=1.0, k2=1.0, eta=1.0, period=1.0, theta_inc=0.0)
    args.update(bad)
    with pytest.raises(ValueError):
        ProblemConfig(**args)


def test_k_star_has_single_grazing_mode():
    assert abs(K_STAR - 10.7261) < 1e-4
    table = build_mode_table(kite_cfg(K_STAR))
    assert table.W == [1]
    assert table.beta_of(1) == 0


def test_c_delta_at_10_68():
    table = build_mode_table(kite_cfg(10.68))
    assert table.C_delta == [-6, -5, 0, 1]
    assert table.beta_of(-6) == pytest.approx(3.6844j, abs=1e-4)
    assert table.beta_of(-5) == pytest.approx(6.8950, abs=1e-4)
    assert table.beta_of(0) == pytest.approx(7.5519, abs=1e-4)
    assert table.beta_of(1) == pytest.approx(0.5370j, abs=1e-4)
    assert table.W == []


def test_normal_incidence_zeroth_order():
    table = build_mode_table(ProblemConfig(3.0, 4.0, 1.0, 1.0, 0.0))
    assert table.beta_of(0) == 3.0 and table.class_of(0) == PROPAGATING


@given(k1=st.floats(0.5, 30.0), theta=st.floats(-1.5, 1.5), period=st.floats(0.3, 5.0))
@settings(max_examples=150, deadline=None)
def test_dispersion_branch_and_partition(k1, theta, period):
    table = build_mode_table(ProblemConfig(k1, 1.0, 1.0, period, theta))
    a, b = table.alpha, table.beta
    ok = np.array([c != GRAZING for c in table.classes])
    assert np.allclose((a**2 + b**2)[ok], k1**2, rtol=1e-12, atol=0)
    assert np.all(b.real >= 0) and np.all(b.imag >= 0)
    for m, c, bm in zip(table.n, table.classes, b):
        if c == PROPAGATING:
            assert bm.imag == 0 and bm.real > 0
        elif c == EVANESCENT:
            assert bm.real == 0 and bm.imag > 0
    assert sorted(table.U + table.V + table.W) == list(table.n)
    # the table reaches far enough that every order outside C_delta has |beta| > delta
    assert abs(b[0]) > table.delta and abs(b[-1]) > table.delta


@given(k1=st.floats(1.0, 20.0), d1=st.floats(0.0, 1.0), d2=st.floats(0.0, 1.0))
@settings(max_examples=100, deadline=None)
def test_c_delta_monotone(k1, d1, d2):
    cfg = kite_cfg(k1)
    lo, hi = sorted((d1, d2))
    small = set(build_mode_table(cfg, lo * k1, n_range=40).C_delta)
    large = set(build_mode_table(cfg, hi * k1, n_range=40).C_delta)
    assert small <= large


def test_c_zero_is_grazing_set():
    table = build_mode_table(kite_cfg(K_STAR), delta=0.0)
    assert set(table.C_delta) <= set(table.W) and table.C_delta == [1]


def test_mode_trace_on_vertical_wall():
    table = build_mode_table(kite_cfg(10.68))
    pts = vertical_wall(-1.0)(np.linspace(-3, 3, 25))
    d, nrm = mode_trace(table, -5, 1, pts)
    assert np.allclose(np.abs(d), 1.0, atol=1e-14)
    assert np.allclose(nrm, 1j * table.alpha_of(-5) * d, atol=1e-13)


def test_mode_trace_formula_on_kite():
    table = build_mode_table(kite_cfg(10.68))
    pts = kite_curve()(np.linspace(0, 2 * np.pi, 20))
    for sign in (1, -1):
        d, nrm = mode_trace(table, 0, sign, pts)
        a, b = table.alpha_of(0), table.beta_of(0)
        x, y = pts.position.T
        assert np.allclose(d, np.exp(1j * a * x + sign * 1j * b * y))
        assert np.allclose(nrm, 1j * (pts.normal[:, 0] * a + pts.normal[:, 1] * sign * b) * d)


def test_grazing_traces_coincide():
    table = build_mode_table(kite_cfg(K_STAR))
    pts = kite_curve()(np.linspace(0, 2 * np.pi, 16))
    up, down = mode_trace(table, 1, 1, pts), mode_trace(table, 1, -1, pts)
    assert np.array_equal(up[0], down[0])


def test_wood_derivative_trace():
    table = build_mode_table(kite_cfg(K_STAR))
    wall = vertical_wall(-1.0)
    pts = wall(np.array([0.0, 0.4, -2.0]))
    d, nrm = wood_derivative_trace(table, 1, pts)
    a = table.alpha_of(1)
    assert d[0] == 0
    assert np.allclose(nrm, -a * pts.position[:, 1] * np.exp(1j * a * -1.0))
    # finite difference in beta of the upward mode traces at beta = 0
    kite = kite_curve()(np.linspace(0, 2 * np.pi, 24))
    from qpwgf.modes import plane_mode
    step = 1e-4
    plus, minus = plane_mode(a, step, 1, kite), plane_mode(a, -step, 1, kite)
    fd = [(p - m) / (2 * step) for p, m in zip(plus, minus)]
    exact = wood_derivative_trace(table, 1, kite)
    for f, e in zip(fd, exact):
        assert np.max(np.abs(f - e)) < 1e-6 * max(1.0, np.max(np.abs(e)))
    with pytest.raises(ValueError):
        wood_derivative_trace(table, 0, pts)
