import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpwgf.assembly import (Discretization, WindowConfig, assemble_cross, obstacle_grid, wall_grid,
                            window_value)
from qpwgf.correction import fourier_upsample
from qpwgf.geometry import bump_wall, circle_curve, kite_curve, vertical_wall, window_with_derivatives
from qpwgf.kernels import kernel, kernel_blocks, mk_self_blocks, potentials
from qpwgf.modes import ProblemConfig, build_mode_table, mode_trace
from qpwgf.scenario import CRYSTAL, KITE, assemble, resolve
from qpwgf.specfun import DomainError

import oracles

K1 = 10.68
LAM = 2 * math.pi / K1


@pytest.fixture(scope="module")
def kite_system():
    return assemble(resolve(KITE.replace(A=4.0)))


@pytest.fixture(scope="module")
def normal_system():
    return assemble(resolve(KITE.replace(A=4.0, theta=0.0, eta=2.5)))


# ---------------------------------------------------------------------------
# window


def test_window_plateau_and_support():
    y = np.array([-3.0, -1.0, 0.0, 0.7, 1.0, 2.0, 2.5])
    w = window_value(y, 1.0, 2.0)
    assert np.array_equal(w, [0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0])


def test_window_midpoint():
    assert abs(window_value(1.5, 1.0, 2.0) - math.exp(-4 * math.exp(-2))) < 1e-15
    # exp(-4 e^-2) = 0.5819672..., i.e. 0.58203 only to four places
    assert abs(window_value(1.5, 1.0, 2.0) - 0.58203) < 1e-4


def test_window_against_oracle_1000_samples():
    rng = np.random.default_rng(3)
    y = rng.uniform(-2.5, 2.5, 1000)
    w = window_value(y, 0.8, 2.1)
    expect = np.array([float(oracles.window(v, mp.mpf(0.8), mp.mpf(2.1))) for v in y])
    assert np.max(np.abs(w - expect)) < 1e-14


def test_window_rejects_bad_limits():
    with pytest.raises(ValueError):
        window_value(0.3, 2.0, 1.0)


@given(st.floats(1.0, 5.0), st.floats(0.05, 0.95))
@settings(max_examples=60, deadline=None)
def test_window_monotone_in_abs_y(y1, c):
    y = np.linspace(0, 1.2 * y1, 400)
    w = window_value(y, c * y1, y1)
    assert np.all(np.diff(w) <= 1e-15) and np.all((0 <= w) & (w <= 1))
    assert np.array_equal(w, window_value(-y, c * y1, y1))


def test_window_config_validation():
    with pytest.raises(ValueError):
        WindowConfig(10.0, c=1.0)
    with pytest.raises(ValueError):
        WindowConfig(-1.0)
    cfg = WindowConfig(10.0)
    assert cfg.h == pytest.approx(4.5) and cfg.plateau == 5.0
    cfg.validate(1.0)
    with pytest.raises(ValueError, match="clear"):
        WindowConfig(10.0, 0.5).validate(6.0)
    with pytest.raises(ValueError, match="between"):
        WindowConfig(10.0, 0.5, h=0.5).validate(1.0)


# ---------------------------------------------------------------------------
# kernels


def test_single_layer_kernel_symmetric():
    a = kite_curve()(np.linspace(0, 6, 9))
    b = circle_curve((3.0, 1.0), 0.5)(np.linspace(0, 6, 7))
    assert np.allclose(kernel("V", 4.0, a, b), kernel("V", 4.0, b, a).T, rtol=1e-15, atol=0)


def test_kernels_reject_coincident_points():
    p = kite_curve()(np.array([0.3, 1.0]))
    for kind in ("V", "K", "Ktilde", "W"):
        with pytest.raises(DomainError):
            kernel(kind, 2.0, p, p)
    with pytest.raises(ValueError):
        kernel("X", 2.0, p, p)


def test_double_layer_is_source_normal_derivative():
    target = kite_curve()(np.array([0.4]))
    src = circle_curve((3.0, 0.5), 0.4)(np.array([1.1]))
    step = 1e-6
    pos = src.position[0]
    n = src.normal[0]

    def g(y):
        r = np.hypot(*(target.position[0] - y))
        return 0.25j * complex(mp.hankel1(0, 3.0 * r))

    fd = (g(pos + step * n) - g(pos - step * n)) / (2 * step)
    assert abs(kernel("K", 3.0, target, src)[0, 0] - fd) < 1e-8


# ---------------------------------------------------------------------------
# wall identities


@pytest.mark.parametrize("wall", [vertical_wall(-1.0), bump_wall(-1.0, 0.15, 2.0, frequency=3.0)])
def test_translated_wall_self_blocks_agree(wall):
    g2 = wall_grid(wall, 3.0, 81)
    g3 = g2.shifted(2.0)
    even, odd = np.arange(0, 81, 2), np.arange(1, 81, 2)
    for kind in ("V", "K", "Ktilde", "W"):
        a = kernel(kind, K1, g2.points.take(even), g2.points.take(odd))
        b = kernel(kind, K1, g3.points.take(even), g3.points.take(odd))
        assert np.max(np.abs(a - b)) < 1e-13


def test_vertical_wall_cross_identities():
    g2 = wall_grid(vertical_wall(-1.0), 3.0, 61)
    g3 = g2.shifted(2.0)
    q23 = kernel_blocks(K1, g2.points, g3.points)
    q32 = kernel_blocks(K1, g3.points, g2.points)
    assert np.max(np.abs(q23["V"] - q32["V"])) < 1e-13
    assert np.max(np.abs(q23["K"] + q32["K"])) < 1e-13
    assert np.max(np.abs(q23["Ktilde"] + q32["Ktilde"])) < 1e-13
    assert np.max(np.abs(q23["W"] - q32["W"])) < 1e-13


def _wall_blocks(system):
    g2 = system.grid2
    g3 = g2.shifted(system.cfg.period)
    w = system.window[system.block(3)]
    return assemble_cross(system.cfg.k1, g3, g2, w), assemble_cross(system.cfg.k1, g2, g3, w)


@pytest.mark.parametrize("fixture", ["kite_system", "normal_system"])
def test_simplified_wall_blocks(fixture, request):
    system = request.getfixturevalue(fixture)
    op = system.operator()
    gam = system.cfg.gamma
    q32, q23 = _wall_blocks(system)
    b3, b4 = system.block(3), system.block(4)
    tol = 1e-13 * max(1.0, np.max(np.abs(op[b3, b3])))
    assert np.max(np.abs(op[b3, b3] + (1 + gam**2) * q32["K"])) < tol
    assert np.max(np.abs(op[b3, b4] - (1 - gam**2) * q32["V"])) < tol
    assert np.max(np.abs(op[b4, b3] + (1 - gam**2) * q23["W"])) < 1e-13 * np.max(np.abs(q23["W"]))
    assert np.max(np.abs(op[b4, b4] - (1 + gam**2) * q32["Ktilde"])) < tol


def test_normal_incidence_kills_off_diagonal_wall_blocks(normal_system):
    s = normal_system
    assert s.cfg.gamma == 1
    op = s.operator()
    assert np.max(np.abs(op[s.block(3), s.block(4)])) == 0
    assert np.max(np.abs(op[s.block(4), s.block(3)])) == 0


def test_window_columns_vanish_at_ends(kite_system):
    s = kite_system
    op = s.operator()
    for block in (3, 4):
        sl = s.block(block)
        assert s.window[sl][0] == 0 and s.window[sl][-1] == 0
        assert np.all(op[:, sl.start] == 0) and np.all(op[:, sl.stop - 1] == 0)


# ---------------------------------------------------------------------------
# obstacle operators


def _circle_eigen(kind, n, k):
    k = mp.mpf(k)
    j, h = mp.besselj(n, k), mp.hankel1(n, k)
    dj = mp.besselj(n, k, 1)
    dh = dj + 1j * mp.bessely(n, k, 1)
    if kind == "V":
        return complex(1j * mp.pi / 2 * j * h)
    if kind in ("K", "Ktilde"):
        return complex(1j * mp.pi * k / 2 * dj * h - mp.mpf(1) / 2)
    return complex(1j * mp.pi * k**2 / 2 * dj * dh)


def test_unit_circle_eigenvalues():
    g = obstacle_grid(circle_curve((0.0, 0.0), 1.0), [64])
    k1, k2 = 3.0, 5.5
    blocks = mk_self_blocks(g.points, g.t, [k1, k2], w_pair=(k1, k2))
    for n in range(8):
        e = np.exp(1j * n * g.t)
        for k in (k1, k2):
            for kind in ("V", "K", "Ktilde"):
                lam = _circle_eigen(kind, n, k)
                assert np.max(np.abs(blocks[(kind, k)] @ e - lam * e)) < 1e-13
        lam = _circle_eigen("W", n, k2) - _circle_eigen("W", n, k1)
        assert np.max(np.abs(blocks["Wdiff"] @ e - lam * e)) < 1e-12 * max(1.0, abs(lam))


def test_static_single_layer_on_unit_circle():
    k = 1e-6
    g = obstacle_grid(circle_curve((0.0, 0.0), 1.0), [32])
    v = mk_self_blocks(g.points, g.t, [k])[("V", k)] @ np.ones(32)
    # -(1/2pi) times the integral of ln|x - x'| over the unit circle is zero, so only the
    # k-dependent constant of the small-argument expansion of (i/4) H0 survives
    constant = 2 * np.pi * (0.25j - (np.log(k / 2) + np.euler_gamma) / (2 * np.pi))
    assert np.max(np.abs(v - constant)) < 1e-9
    assert np.max(np.abs(v - _circle_eigen("V", 0, k))) < 1e-12 * abs(constant)


def _calderon_error(ppw, k=20.0):
    kite = kite_curve()
    n = Discretization(ppw=ppw).obstacle_nodes(kite, k)[0]
    g = obstacle_grid(kite, [n])
    blocks = mk_self_blocks(g.points, g.t, [k])
    d = np.array([math.cos(0.3), -math.sin(0.3)])
    u = np.exp(1j * k * g.points.position @ d)
    dn = 1j * k * (g.points.normal @ d) * u
    return float(np.max(np.abs(0.5 * u + blocks[("K", k)] @ u - blocks[("V", k)] @ dn)))


def test_interior_calderon_identity_converges_spectrally():
    coarse, fine = _calderon_error(8), _calderon_error(16)
    assert fine < 1e-12
    assert fine < 1e-4 * coarse


@pytest.mark.parametrize("side", [1, -1])
def test_double_layer_jump_relation(side):
    kite = kite_curve()
    k, n, factor = 3.0, 64, 256
    g = obstacle_grid(kite, [n])
    phi = np.exp(np.cos(g.t)) + 1j * np.sin(2 * g.t)
    k_phi = mk_self_blocks(g.points, g.t, [k])[("K", k)] @ phi
    fine = obstacle_grid(kite, [n * factor])
    dens = fourier_upsample(phi, factor) * fine.ds
    idx = np.arange(0, n, 8)
    offsets = 0.002 * np.arange(1, 6)
    vals = []
    for d in offsets:
        x = g.points.position[idx] + side * d * g.points.normal[idx]
        vals.append(potentials(k, x, fine.points)[1] @ dens)
    limit = np.linalg.solve(np.vander(offsets, 5, increasing=True), np.array(vals))[0]
    assert np.max(np.abs(limit - (side * 0.5 * phi[idx] + k_phi[idx]))) < 1e-6


# ---------------------------------------------------------------------------
# windowed wall integrals


def _kite_table():
    return build_mode_table(ProblemConfig(K1, 20.0, 1.0, 2.0, math.pi / 4))


def _windowed_single_layer(targets, wall, A, beta):
    g = wall_grid(wall, A, Discretization().wall_nodes(wall, A, K1))
    y = g.points.position[:, 1]
    w = window_with_derivatives(y, 0.5 * A, A)[0]
    s, _ = potentials(K1, targets, g.points)
    return s @ (w * np.exp(1j * beta * y) * g.ds)


def test_windowed_tail_decays_superalgebraically():
    table = _kite_table()
    targets = kite_curve()(np.linspace(0, 2 * np.pi, 8, endpoint=False)).position
    wall = vertical_wall(-1.0)
    checked = 0
    for n in table.U:
        beta = table.beta_of(n).real
        ref = _windowed_single_layer(targets, wall, 160 * LAM, beta)
        err = [np.max(np.abs(_windowed_single_layer(targets, wall, a * LAM, beta) - ref))
               for a in (10, 40, 80)]
        assert err[2] < err[0]
        # tails oscillate at rate k1 - beta_n; once that rate is a fair fraction of k1 the
        # truncation error falls faster than A^-3
        if K1 - beta > K1 / 4:
            assert err[0] / err[1] > 4.0**3
            checked += 1
    assert checked >= 2


def test_mode_green_representation_from_walls():
    table = _kite_table()
    x = np.array([[0.0, 0.3], [0.5, -0.8], [-0.7, 2.0]])
    wall = vertical_wall(-1.0)
    n = -5
    errors = []
    for A in (10 * LAM, 30 * LAM, 60 * LAM):
        g2 = wall_grid(wall, A, Discretization().wall_nodes(wall, A, K1))
        w = window_with_derivatives(g2.points.position[:, 1], 0.5 * A, A)[0]
        for sign in (1, -1):
            total = 0
            for g, s in ((g2, 1), (g2.shifted(2.0), -1)):
                d, dn = mode_trace(table, n, sign, g.points)
                single, double = potentials(K1, x, g.points)
                total = total + s * ((double * d - single * dn) @ (g.ds * w))
            exact = np.exp(1j * table.alpha_of(n) * x[:, 0] + sign * 1j * table.beta_of(n) * x[:, 1])
            errors.append(np.max(np.abs(total - exact)))
    assert errors[5] < 1e-4 and errors[4] < 1e-4
    assert max(errors[4:]) < 1e-2 * max(errors[:2])


# ---------------------------------------------------------------------------
# system structure


def test_e_diagonal_and_sizes(kite_system):
    s = kite_system
    gam = s.cfg.gamma
    n1, n2 = s.n1, s.n2
    assert s.matrix.shape == (2 * n1 + 2 * n2,) * 2 and s.size == 2 * n1 + 2 * n2
    expect = np.concatenate([np.ones(2 * n1), np.full(2 * n2, gam)])
    assert np.array_equal(s.e_diag, expect)
    assert np.all(s.window[: 2 * n1] == 1)


def test_e_diagonal_tm(normal_system):
    s = normal_system
    assert np.all(s.e_diag[s.block(2)] == 0.5 * (1 + 2.5))


def test_normal_incidence_rhs(normal_system):
    s = normal_system
    y = s.grid1.points.position[:, 1]
    f = np.exp(-1j * s.cfg.k1 * y)
    assert np.allclose(s.rhs[s.block(1)], f, rtol=0, atol=1e-14)
    assert np.allclose(s.rhs[s.block(2)], -1j * s.cfg.k1 * s.grid1.points.normal[:, 1] * f,
                       rtol=0, atol=1e-12)
    assert np.all(s.rhs[2 * s.n1:] == 0)


def test_grid_invariants(kite_system):
    g1, g2 = kite_system.grid1, kite_system.grid2
    assert len(g1) % 2 == 0 and np.all(g1.weights > 0) and np.all(g2.weights > 0)
    y = g2.points.position[:, 1]
    assert np.allclose(y, -y[::-1], atol=1e-13)
    assert y[-1] == pytest.approx(kite_system.window_config.A)
    with pytest.raises(ValueError):
        obstacle_grid(kite_curve(), [31])


def test_crystal_unknown_count_scale():
    res = resolve(CRYSTAL)
    g1, g2 = res.discretization.grids(res.cell, res.cfg, res.window)
    unknowns = 2 * len(g1) + 2 * len(g2)
    assert 0.5 * 4920 < unknowns < 1.5 * 4920


def test_near_contact_warning():
    a = obstacle_grid(circle_curve((0.0, 0.0), 1.0), [32])
    b = obstacle_grid(circle_curve((2.05, 0.0), 1.0), [32])
    with pytest.warns(RuntimeWarning, match="spacings"):
        assemble_cross(3.0, a, b)
    far = obstacle_grid(circle_curve((5.0, 0.0), 1.0), [32])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_cross(3.0, a, far)
