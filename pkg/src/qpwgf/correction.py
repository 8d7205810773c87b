"""Finite-rank radiation-condition correction of the windowed system.

For every nearly grazing order n the correction couples the density to the
Fourier projection of the radiation defect (d/dy -+ i beta_n) u on the lines
y = +-h. Those projections are linear functionals of the density; they are
evaluated with a three-period representation of the scattered field (the
obstacle and its two neighbours, the outer walls at x = x_wall - L and
x_wall + 2L) so that the integration segment never meets a source curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .assembly import CORRECTED, BlockSystem
from .geometry import CurvePoint
from .kernels import potentials
from .modes import GRAZING, plane_mode, wood_derivative_trace

SUPERCELL = "supercell"
CELL = "cell"


def _source_layout(system: BlockSystem, layout: str):
    cfg = system.cfg
    gam, L = cfg.gamma, cfg.period
    if layout == SUPERCELL:
        obstacle = ((0.0, 1.0), (-L, 1 / gam), (L, gam))
        walls = ((-L, 1 / gam), (2 * L, -gam**2))
    elif layout == CELL:
        obstacle = ((0.0, 1.0),)
        walls = ((0.0, 1.0), (L, -gam))
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return obstacle, walls


def fourier_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation of periodic samples (along axis 0) onto factor-times finer nodes."""
    values = np.asarray(values)
    n = values.shape[0]
    spec = np.fft.fft(values, axis=0)
    padded = np.zeros((n * factor,) + values.shape[1:], dtype=complex)
    half = n // 2
    padded[:half] = spec[:half]
    padded[-half:] = spec[-half:]
    # split the Nyquist coefficient symmetrically
    padded[-half] = 0.5 * spec[half]
    padded[half] = 0.5 * spec[half]
    out = np.fft.ifft(padded, axis=0) * factor
    return out.real if np.isrealobj(values) else out


def obstacle_sources(system: BlockSystem, refine: int | None = None):
    """Obstacle samples, arc-length weights and the refinement plan.

    With ``refine`` > 1 each component is resampled at refine times as many
    equispaced nodes; densities follow by :func:`refine_density`.
    """
    g1 = system.grid1
    if not refine or refine == 1:
        return g1.points, g1.ds, None
    pts, ds = [], []
    for comp, sl in enumerate(g1.components):
        n = (sl.stop - sl.start) * refine
        t = 2 * np.pi * np.arange(n) / n
        p = g1.curve(t, comp)
        pts.append(p)
        ds.append(p.jacobian * 2 * np.pi / n)
    return CurvePoint.concat(pts), np.concatenate(ds), (g1.components, refine)


def refine_density(values: np.ndarray, plan) -> np.ndarray:
    """Interpolate obstacle-block values (or matrix rows along axis 0) to the refined nodes."""
    if plan is None:
        return values
    comps, factor = plan
    return np.concatenate([fourier_upsample(values[sl], factor) for sl in comps])


def required_refinement(system: BlockSystem, points, layout: str = SUPERCELL,
                        margin: float = 3.0, max_factor: int = 64) -> int:
    """Smallest power-of-two refinement keeping every point ``margin`` local
    spacings away from each obstacle copy."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    g1 = system.grid1
    obstacle, _ = _source_layout(system, layout)
    need = 0.0
    for shift, _ in obstacle:
        src = g1.points.shifted(shift).position
        for start in range(0, len(points), 512):
            p = points[start:start + 512]
            d = np.hypot(p[:, 0][:, None] - src[:, 0][None, :], p[:, 1][:, None] - src[:, 1][None, :])
            need = max(need, float(np.max(margin * g1.ds[None, :] / d)))
    factor = 1
    while factor < need and factor < max_factor:
        factor *= 2
    return factor


def potential_rows(system: BlockSystem, points, with_dy: bool = False, layout: str = SUPERCELL,
                   refine: int | None = None):
    """Matrices mapping the density to the layer-potential part of u_s.

    The represented field is D phi_1 - eta S phi_2 over the obstacle copies plus
    the wall double- and single-layer terms with the windowed wall densities.

    Args:
        system: Assembled system (grids, window, parameters).
        points: (n, 2) evaluation points in the exterior domain.
        with_dy: Also return the matrix for d/dy.
        layout: ``"supercell"`` (three periods, default) or ``"cell"`` (one period).
        refine: Obstacle refinement factor; by default the smallest one that
            keeps the points three local node spacings away from the obstacle.

    Returns:
        ``value`` or ``(value, dy)``, each (n_points, system.size).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    cfg = system.cfg
    g2 = system.grid2
    k1, eta = cfg.k1, cfg.eta
    obstacle, walls = _source_layout(system, layout)
    if refine is None:
        refine = required_refinement(system, points, layout)
    obs_pts, obs_ds, plan = obstacle_sources(system, refine)
    b1, b2, b3, b4 = (system.block(p) for p in (1, 2, 3, 4))
    w = system.window[b3]
    n_pts = len(points)
    val = np.zeros((n_pts, system.size), dtype=complex)
    dy = np.zeros_like(val) if with_dy else None
    ds2 = (g2.ds * w)[None, :]
    # obstacle rows are formed on the refined nodes and pulled back through the interpolation
    fine = [np.zeros((n_pts, len(obs_ds)), dtype=complex) for _ in range(4 if with_dy else 2)]
    for shift, fac in obstacle:
        pots = potentials(k1, points, obs_pts.shifted(shift), with_dy)
        fine[0] += fac * pots[1]
        fine[1] -= eta * fac * pots[0]
        if with_dy:
            fine[2] += fac * pots[3]
            fine[3] -= eta * fac * pots[2]
    pull = [_pull_back(f * obs_ds[None, :], plan) for f in fine]
    val[:, b1], val[:, b2] = pull[0], pull[1]
    if with_dy:
        dy[:, b1], dy[:, b2] = pull[2], pull[3]
    for shift, fac in walls:
        pots = potentials(k1, points, g2.points.shifted(shift), with_dy)
        val[:, b3] += fac * pots[1] * ds2
        val[:, b4] -= fac * pots[0] * ds2
        if with_dy:
            dy[:, b3] += fac * pots[3] * ds2
            dy[:, b4] -= fac * pots[2] * ds2
    return (val, dy) if with_dy else val


def _pull_back(rows: np.ndarray, plan) -> np.ndarray:
    # rows @ refine_density(phi) == _pull_back(rows) @ phi
    if plan is None:
        return rows
    comps, factor = plan
    out, start = [], 0
    for sl in comps:
        n = sl.stop - sl.start
        eye = np.eye(n)
        out.append(rows[:, start:start + n * factor] @ fourier_upsample(eye, factor))
        start += n * factor
    return np.concatenate(out, axis=1)


def segment_nodes(period: float, k1: float, n_nodes: int | None = None) -> np.ndarray:
    """Trapezoidal nodes on [-L/2, L/2); default count max(64, 8 k1 L / pi)."""
    if n_nodes is None:
        n_nodes = max(64, int(math.ceil(8 * k1 * period / np.pi)))
    return -period / 2 + period * np.arange(n_nodes) / n_nodes


def _check_height(system: BlockSystem, h: float) -> None:
    clear = system.cell.clearance_height
    if not clear < h < system.window_config.plateau:
        raise ValueError(f"functional height h = {h:.6g} must lie strictly between "
                         f"{clear:.6g} and cA = {system.window_config.plateau:.6g}")


@dataclass(frozen=True)
class SegmentData:
    """Potential rows sampled on the segment [-L/2, L/2] x {sign h}."""

    x: np.ndarray
    sign: int
    h: float
    value: np.ndarray
    dy: np.ndarray

    def functional(self, alpha_n: float, beta_n: complex) -> np.ndarray:
        e = np.exp(-1j * alpha_n * self.x) / len(self.x)
        return e @ self.dy - self.sign * 1j * beta_n * (e @ self.value)

    def functional_derivative(self, alpha_n: float) -> np.ndarray:
        e = np.exp(-1j * alpha_n * self.x) / len(self.x)
        return -self.sign * 1j * (e @ self.value)


def segment_data(system: BlockSystem, sign: int, h: float | None = None,
                 n_nodes: int | None = None) -> SegmentData:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    h = system.window_config.h if h is None else h
    _check_height(system, h)
    x = segment_nodes(system.cfg.period, system.cfg.k1, n_nodes)
    pts = np.stack([x, np.full_like(x, sign * h)], axis=1)
    val, dy = potential_rows(system, pts, with_dy=True)
    return SegmentData(x, sign, h, val, dy)


def functional_row(system: BlockSystem, n: int, sign: int, h: float | None = None) -> np.ndarray:
    """Row r with r @ phi = L_n^sign[W_A phi], the projected radiation defect of order n."""
    seg = segment_data(system, sign, h)
    table = system.table
    return seg.functional(table.alpha_of(n), table.beta_of(n))


def functional_derivative_row(system: BlockSystem, n: int, sign: int, h: float | None = None) -> np.ndarray:
    """Row for the beta_n-derivative of L_n^sign at a grazing order."""
    if system.table.class_of(n) != GRAZING:
        raise ValueError(f"mode {n} is not grazing")
    seg = segment_data(system, sign, h)
    return seg.functional_derivative(system.table.alpha_of(n))


@dataclass(frozen=True)
class CorrectionTerm:
    """Rank-two update associated with one nearly grazing order.

    ``column_minus`` holds the obstacle traces of the upward mode u_n^+ and
    ``column_plus`` those of the downward mode u_n^-; both vanish on wall rows.
    Grazing orders (``wood``) also carry the beta-derivative rows and column.
    """

    n: int
    alpha: float
    beta: complex
    wood: bool
    scale: complex
    column_minus: np.ndarray
    column_plus: np.ndarray
    row_minus: np.ndarray
    row_plus: np.ndarray
    d_row_minus: np.ndarray | None = None
    d_row_plus: np.ndarray | None = None
    d_column: np.ndarray | None = None

    def update(self) -> np.ndarray:
        """Dense matrix added to M W_A."""
        if self.wood:
            return 0.5 / 1j * (np.outer(self.column_minus, self.d_row_minus - self.d_row_plus)
                               + np.outer(self.d_column, self.row_minus + self.row_plus))
        return self.scale * (np.outer(self.column_minus, self.row_minus)
                             - np.outer(self.column_plus, self.row_plus))


def _column(system: BlockSystem, dirichlet, neumann) -> np.ndarray:
    col = np.zeros(system.size, dtype=complex)
    col[system.block(1)] = dirichlet
    col[system.block(2)] = neumann
    return col


def correction_terms(system: BlockSystem, modes=None, h: float | None = None,
                     beta_override: dict | None = None) -> list[CorrectionTerm]:
    """Build the correction terms for the orders in ``modes`` (default C_delta).

    Args:
        system: Naive system providing grids and parameters.
        modes: Orders to correct.
        h: Height of the measurement lines; defaults to the window's h.
        beta_override: Optional {n: beta} replacing tabulated beta_n, used to
            probe the behaviour of the regular branch near beta_n = 0.
    """
    table = system.table
    h = system.window_config.h if h is None else h
    modes = table.C_delta if modes is None else list(modes)
    beta_override = beta_override or {}
    if not modes:
        return []
    upper, lower = segment_data(system, 1, h), segment_data(system, -1, h)
    pts = system.grid1.points
    terms = []
    for n in modes:
        a = table.alpha_of(n)
        b = complex(beta_override.get(n, table.beta_of(n)))
        wood = n not in beta_override and table.class_of(n) == GRAZING
        up = _column(system, *plane_mode(a, b, 1, pts))
        down = _column(system, *plane_mode(a, b, -1, pts))
        row_p, row_m = upper.functional(a, b), lower.functional(a, b)
        if wood:
            terms.append(CorrectionTerm(
                n, a, 0j, True, 0j, up, down, row_m, row_p,
                d_row_minus=lower.functional_derivative(a),
                d_row_plus=upper.functional_derivative(a),
                d_column=_column(system, *wood_derivative_trace(table, n, pts))))
        else:
            scale = np.exp(1j * b * h) / (2j * b)
            terms.append(CorrectionTerm(n, a, b, False, scale, up, down, row_m, row_p))
    return terms


def assemble_corrected(system: BlockSystem, h: float | None = None, modes=None) -> BlockSystem:
    """Corrected system E + M_c W_A with M_c = M + sum of correction terms."""
    if system.formulation == CORRECTED:
        raise ValueError("system is already corrected")
    h = system.window_config.h if h is None else h
    terms = correction_terms(system, modes, h)
    mat = system.matrix.copy()
    for term in terms:
        mat += term.update()
    window = replace(system.window_config, h=h)
    return replace(system, matrix=mat, formulation=CORRECTED, corrections=tuple(terms),
                   window_config=window)


__all__ = [
    "CorrectionTerm", "SegmentData", "assemble_corrected", "correction_terms",
    "fourier_upsample", "functional_derivative_row", "functional_row",
    "obstacle_sources", "potential_rows", "refine_density", "required_refinement",
    "segment_data", "segment_nodes",
]
