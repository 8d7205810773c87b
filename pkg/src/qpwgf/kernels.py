"""Helmholtz layer-potential kernels and their logarithmic splitting.

Kernels are evaluated between a set of target samples and a set of source
samples and returned as (n_target, n_source) arrays. The separation vector is
always R = target - source. Normals enter through the ``normal`` field of
:class:`~qpwgf.geometry.CurvePoint` and follow the (y', -x')/|r'| convention.

Nyström matrices on a closed component use the Martensen-Kussmaul rule: the
weighted kernel is written as A(t, s) ln(4 sin^2((t - s)/2)) + B(t, s), the
logarithmic part is integrated with the spectral weights of
:func:`mk_log_weights` and the remainder with the trapezoidal rule.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .geometry import CurvePoint
from .specfun import EULER_GAMMA, DomainError, log_split_j0

KINDS = ("V", "K", "Ktilde", "W")
_INV_PI = 1.0 / np.pi


def _separation(targets: np.ndarray, sources: np.ndarray):
    rx = targets[:, 0][:, None] - sources[:, 0][None, :]
    ry = targets[:, 1][:, None] - sources[:, 1][None, :]
    return rx, ry, np.hypot(rx, ry)


def _hankels(x):
    return special.j0(x) + 1j * special.y0(x), special.j1(x) + 1j * special.y1(x)


def kernel_blocks(k: float, target: CurvePoint, source: CurvePoint, kinds=KINDS) -> dict:
    """Unweighted kernels Q_V, Q_K, Q_Ktilde, Q_W between disjoint point sets.

    Returns:
        Dict mapping each requested kind to an (n_target, n_source) complex array.

    Raises:
        DomainError: If a target coincides with a source.
    """
    rx, ry, r = _separation(target.position, source.position)
    if np.any(r == 0.0):
        raise DomainError("kernel evaluated at coincident points")
    x = k * r
    h0, h1 = _hankels(x)
    nt, ns = target.normal, source.normal
    out = {}
    if "V" in kinds:
        out["V"] = 0.25j * h0
    if "K" in kinds or "W" in kinds:
        ps = (rx * ns[:, 0][None, :] + ry * ns[:, 1][None, :]) / r
    if "Ktilde" in kinds or "W" in kinds:
        pt = (rx * nt[:, 0][:, None] + ry * nt[:, 1][:, None]) / r
    if "K" in kinds:
        out["K"] = 0.25j * k * h1 * ps
    if "Ktilde" in kinds:
        out["Ktilde"] = -0.25j * k * h1 * pt
    if "W" in kinds:
        a = nt[:, 0][:, None] * ns[:, 0][None, :] + nt[:, 1][:, None] * ns[:, 1][None, :]
        out["W"] = 0.25j * k * (h1 * a / r + (x * h0 - 2.0 * h1) * ps * pt / r)
    return out


def kernel(op_kind: str, k: float, target: CurvePoint, source: CurvePoint) -> np.ndarray:
    """A single kernel matrix; see :func:`kernel_blocks`."""
    if op_kind not in KINDS:
        raise ValueError(f"unknown kernel kind {op_kind!r}")
    return kernel_blocks(k, target, source, (op_kind,))[op_kind]


def w_difference(k_outer: float, k_inner: float, target: CurvePoint, source: CurvePoint) -> np.ndarray:
    """Q_W(k_inner) - Q_W(k_outer) between disjoint point sets, static parts cancelled."""
    rx, ry, r = _separation(target.position, source.position)
    if np.any(r == 0.0):
        raise DomainError("kernel evaluated at coincident points")
    nt, ns = target.normal, source.normal
    a = nt[:, 0][:, None] * ns[:, 0][None, :] + nt[:, 1][:, None] * ns[:, 1][None, :]
    b = ((rx * ns[:, 0][None, :] + ry * ns[:, 1][None, :])
         * (rx * nt[:, 0][:, None] + ry * nt[:, 1][:, None]))
    return _w_regular(k_inner, r, a, b) - _w_regular(k_outer, r, a, b)


def _w_regular(k, r, a, b):
    # Q_W minus its k-independent part a/(2 pi R^2) - b/(pi R^4)
    x = k * r
    h0, h1 = _hankels(x)
    c = 2j * _INV_PI / x
    return 0.25j * k * ((h1 + c) * a / r + (x * h0 - 2.0 * h1 - 2.0 * c) * b / r**3)


# ---------------------------------------------------------------------------
# potentials at arbitrary points


def potentials(k: float, points: np.ndarray, source: CurvePoint, with_dy: bool = False):
    """Single- and double-layer kernels G and dG/dn_src from sources to points.

    Args:
        k: Wavenumber.
        points: (n, 2) evaluation points.
        source: Source samples.
        with_dy: Also return the y-derivatives at the evaluation points.

    Returns:
        ``(S, D)`` or ``(S, D, S_y, D_y)``; each (n_points, n_source).
    """
    rx, ry, r = _separation(np.atleast_2d(points), source.position)
    if np.any(r == 0.0):
        raise DomainError("potential evaluated on a source node")
    x = k * r
    h0, h1 = _hankels(x)
    ns = source.normal
    rn = rx * ns[:, 0][None, :] + ry * ns[:, 1][None, :]
    s = 0.25j * h0
    d = 0.25j * k * h1 * rn / r
    if not with_dy:
        return s, d
    s_y = -0.25j * k * h1 * ry / r
    d_y = 0.25j * k * (h1 * ns[:, 1][None, :] / r + (x * h0 - 2.0 * h1) * ry * rn / r**3)
    return s, d, s_y, d_y


# ---------------------------------------------------------------------------
# Martensen-Kussmaul quadrature


def mk_log_weights(n_nodes: int) -> np.ndarray:
    """Weights R_j(t_i) integrating ln(4 sin^2((t_i - s)/2)) f(s) over [0, 2 pi).

    Args:
        n_nodes: Even number of equispaced nodes t_j = 2 pi j / n_nodes.

    Returns:
        (n_nodes, n_nodes) real matrix, circulant in i - j.
    """
    if n_nodes % 2 or n_nodes < 2:
        raise ValueError("the MK rule needs an even number of nodes")
    n = n_nodes // 2
    s = np.pi * np.arange(n_nodes) / n
    m = np.arange(1, n)
    row = -(2 * np.pi / n) * (np.cos(np.outer(s, m)) / m).sum(axis=1) - (np.pi / n**2) * np.cos(n * s)
    idx = (np.arange(n_nodes)[:, None] - np.arange(n_nodes)[None, :]) % n_nodes
    return row[idx]


def mk_self_blocks(pts: CurvePoint, t: np.ndarray, wavenumbers, w_pair=None) -> dict:
    """Weighted Nyström matrices of V, K, Ktilde on one closed component.

    Args:
        pts: Samples at the equispaced nodes ``t`` (even count).
        t: Node parameters 2 pi j / N.
        wavenumbers: Iterable of wavenumbers k; one set of blocks per k.
        w_pair: Optional (k_outer, k_inner); adds the block for W(k_inner) - W(k_outer)
            under key ``"Wdiff"``.

    Returns:
        Dict with keys (kind, k) for kind in V, K, Ktilde, plus ``"Wdiff"``. Each
        matrix already includes |r'| and quadrature weights, so applying it to
        nodal density values gives the operator values at the nodes.
    """
    n_nodes = len(t)
    log_w = mk_log_weights(n_nodes)
    trap = 2 * np.pi / n_nodes
    rx, ry, r = _separation(pts.position, pts.position)
    diag = np.eye(n_nodes, dtype=bool)
    r[diag] = 1.0
    sin2 = np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    sin2[diag] = 1.0
    log4sin = np.log(4.0 * sin2)
    jac = pts.jacobian
    js = jac[None, :]
    nt, ns = pts.normal, pts.normal
    ps = (rx * ns[:, 0][None, :] + ry * ns[:, 1][None, :]) / r
    pt = (rx * nt[:, 0][:, None] + ry * nt[:, 1][:, None]) / r
    curv = -pts.bend / (4 * np.pi * jac**2)
    out = {}
    for k in wavenumbers:
        x = k * r
        j0, y0s = log_split_j0(x)
        j1 = special.j1(x)
        y1r = special.y1(x) - 2 * _INV_PI * np.log(0.5 * x) * j1
        smooth_log = np.log(x * x / (16.0 * sin2))

        a_v = -j0 / (4 * np.pi) * js
        b_v = (0.25j * j0 - 0.25 * y0s - j0 / (4 * np.pi) * smooth_log) * js
        a_v[diag] = -jac / (4 * np.pi)
        b_v[diag] = (0.25j - EULER_GAMMA / (2 * np.pi) - np.log(0.5 * k * jac) / (2 * np.pi)) * jac

        a_k = -k / (4 * np.pi) * j1 * ps * js
        b_k = (0.25j * k * j1 * ps - 0.25 * k * y1r * ps - k / (4 * np.pi) * j1 * ps * smooth_log) * js
        a_k[diag] = 0.0
        b_k[diag] = curv

        a_t = k / (4 * np.pi) * j1 * pt * js
        b_t = (-0.25j * k * j1 * pt + 0.25 * k * y1r * pt + k / (4 * np.pi) * j1 * pt * smooth_log) * js
        a_t[diag] = 0.0
        b_t[diag] = curv

        out[("V", k)] = log_w * a_v + trap * b_v
        out[("K", k)] = log_w * a_k + trap * b_k
        out[("Ktilde", k)] = log_w * a_t + trap * b_t
    if w_pair is not None:
        k_out, k_in = w_pair
        a = nt[:, 0][:, None] * ns[:, 0][None, :] + nt[:, 1][:, None] * ns[:, 1][None, :]
        b = ps * pt * r * r
        full = (_w_regular(k_in, r, a, b) - _w_regular(k_out, r, a, b)) * js

        def log_coeff(k):
            x = k * r
            j0, j1 = special.j0(x), special.j1(x)
            return -k / (4 * np.pi) * (j1 * a / r + (x * j0 - 2 * j1) * b / r**3)

        a_w = (log_coeff(k_in) - log_coeff(k_out)) * js
        b_w = full - a_w * log4sin
        d2 = k_in**2 - k_out**2

        def static(k):
            return k * k * (np.log(0.5 * k) + EULER_GAMMA - 0.5)

        a_w[diag] = -d2 * jac / (8 * np.pi)
        b_w[diag] = (0.125j * d2 - (static(k_in) - static(k_out)) / (4 * np.pi)
                     - d2 / (4 * np.pi) * np.log(jac)) * jac
        out["Wdiff"] = log_w * a_w + trap * b_w
    return out
