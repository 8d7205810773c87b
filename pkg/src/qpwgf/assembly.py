"""Quadrature grids, window weights and the windowed block system.

Unknowns are ordered as four blocks: Dirichlet and Neumann data on the
obstacle boundary (N1 nodes each) followed by the scattered-field Dirichlet
and Neumann traces on the left wall (N2 nodes each). The system reads

    (E + M W_A) phi = phi_inc

where E is diagonal, W_A multiplies the wall blocks by the window and M holds
the sixteen operator blocks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import CLOSED, Curve, CurvePoint, GeometryError, UnitCell, window_with_derivatives
from .kernels import kernel_blocks, mk_self_blocks, w_difference
from .modes import ModeTable, ProblemConfig

NAIVE = "naive"
CORRECTED = "corrected"


def window_value(y, y0: float, y1: float):
    """Slow-rise window: 1 for |y| <= y0, 0 for |y| >= y1 and
    exp(2 e^{-1/u}/(u - 1)) with u = (|y| - y0)/(y1 - y0) in between."""
    if not 0 < y0 < y1:
        raise ValueError("window needs 0 < y0 < y1")
    value = window_with_derivatives(y, y0, y1)[0]
    return value if np.ndim(y) else float(value)


@dataclass(frozen=True)
class WindowConfig:
    """Window half-size A, plateau fraction c and measurement height h."""

    A: float
    c: float = 0.5
    h: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.A) and self.A > 0):
            raise ValueError(f"window size A must be positive, got {self.A!r}")
        if not 0 < self.c < 1:
            raise ValueError(f"window fraction c must lie in (0, 1), got {self.c!r}")
        if self.h is None:
            object.__setattr__(self, "h", 0.9 * self.c * self.A)

    @property
    def plateau(self) -> float:
        return self.c * self.A

    def validate(self, clearance: float) -> None:
        """Check cA > clearance and clearance < h < cA.

        Raises:
            ValueError: Naming the violated inequality.
        """
        if not self.plateau > clearance:
            raise ValueError(f"window plateau cA = {self.plateau:.6g} does not clear the "
                             f"obstacle (max height {clearance:.6g})")
        if not clearance < self.h < self.plateau:
            raise ValueError(f"measurement height h = {self.h:.6g} must lie strictly between "
                             f"{clearance:.6g} and cA = {self.plateau:.6g}")


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes on a curve.

    Attributes:
        curve: The sampled curve.
        t: Node parameters.
        weights: Parameter-space quadrature weights (without |r'|).
        points: Samples at the nodes.
        components: Node slices, one per closed component.
    """

    curve: Curve
    t: np.ndarray
    weights: np.ndarray
    points: CurvePoint
    components: tuple = ()

    def __len__(self) -> int:
        return len(self.t)

    @property
    def ds(self) -> np.ndarray:
        """Arc-length weights |r'(t_j)| w_j."""
        return self.points.jacobian * self.weights

    def shifted(self, dx: float) -> "Grid":
        return Grid(self.curve.translated(dx), self.t, self.weights, self.points.shifted(dx),
                    self.components)

    def spacing(self) -> float:
        return float(np.max(self.ds))


def obstacle_grid(curve: Curve, nodes_per_component) -> Grid:
    """Equispaced 2 pi-periodic nodes on each closed component."""
    if curve.kind != CLOSED:
        raise GeometryError("obstacle grid needs a closed curve")
    counts = np.broadcast_to(np.asarray(nodes_per_component, dtype=int), (curve.n_components,))
    ts, ws, pts, slices = [], [], [], []
    start = 0
    for comp, n in enumerate(counts):
        if n % 2 or n < 4:
            raise ValueError("each component needs an even node count >= 4")
        t = 2 * np.pi * np.arange(n) / n
        ts.append(t)
        ws.append(np.full(n, 2 * np.pi / n))
        pts.append(curve(t, comp))
        slices.append(slice(start, start + n))
        start += n
    return Grid(curve, np.concatenate(ts), np.concatenate(ws), CurvePoint.concat(pts), tuple(slices))


def wall_grid(wall: Curve, A: float, n_nodes: int) -> Grid:
    """Uniform nodes in the wall parameter covering heights [-A, A], endpoints included."""
    t_lo, t_hi = wall.parameter_of_height(-A), wall.parameter_of_height(A)
    t = np.linspace(t_lo, t_hi, n_nodes)
    step = (t_hi - t_lo) / (n_nodes - 1)
    return Grid(wall, t, np.full(n_nodes, step), wall(t))


def _even_at_least(x: float, floor: int) -> int:
    n = max(int(math.ceil(x)), floor)
    return n + (n % 2)


@dataclass(frozen=True)
class Discretization:
    """Node-density rules.

    Attributes:
        ppw: Points per wavelength (obstacle: shortest of the two wavelengths).
        min_component_nodes: Lower bound on nodes per closed component.
        wall_spacing: Optional override of the far-field wall spacing in height.
    """

    ppw: float = 8.0
    min_component_nodes: int = 16
    wall_spacing: float | None = None

    def obstacle_nodes(self, curve: Curve, k_max: float) -> list[int]:
        counts = []
        for comp in range(curve.n_components):
            t = 2 * np.pi * np.arange(2048) / 2048
            length = float(np.sum(curve(t, comp).jacobian) * 2 * np.pi / 2048)
            counts.append(_even_at_least(self.ppw * length * k_max / (2 * np.pi),
                                         self.min_component_nodes))
        return counts

    def wall_nodes(self, wall: Curve, A: float, k1: float) -> int:
        step = self.wall_spacing or 2 * np.pi / (k1 * self.ppw)
        span = wall.parameter_of_height(A) - wall.parameter_of_height(-A)
        return int(math.ceil(span / step)) + 1

    def grids(self, cell: UnitCell, cfg: ProblemConfig, window: WindowConfig) -> tuple[Grid, Grid]:
        g1 = obstacle_grid(cell.obstacle, self.obstacle_nodes(cell.obstacle, max(cfg.k1, cfg.k2)))
        g2 = wall_grid(cell.wall, window.A, self.wall_nodes(cell.wall, window.A, cfg.k1))
        return g1, g2


@dataclass(frozen=True)
class BlockSystem:
    """Dense discretization of E + M W_A together with its data.

    Attributes:
        matrix: The full matrix E + M W_A (plus correction terms when corrected).
        e_diag: Diagonal of E.
        window: Window weights per unknown (ones on obstacle blocks).
        rhs: Incident data (f, g, 0, 0).
        corrections: Correction terms applied to ``matrix``.
    """

    cfg: ProblemConfig
    table: ModeTable
    cell: UnitCell
    window_config: WindowConfig
    grid1: Grid
    grid2: Grid
    matrix: np.ndarray
    e_diag: np.ndarray
    window: np.ndarray
    rhs: np.ndarray
    formulation: str = NAIVE
    corrections: tuple = field(default=())

    @property
    def n1(self) -> int:
        return len(self.grid1)

    @property
    def n2(self) -> int:
        return len(self.grid2)

    @property
    def size(self) -> int:
        return 2 * self.n1 + 2 * self.n2

    def block(self, p: int) -> slice:
        """Slice of unknown block p in 1..4."""
        n1, n2 = self.n1, self.n2
        starts = [0, n1, 2 * n1, 2 * n1 + n2, 2 * n1 + 2 * n2]
        return slice(starts[p - 1], starts[p])

    def operator(self) -> np.ndarray:
        """M W_A (without E)."""
        m = self.matrix.copy()
        m[np.diag_indices_from(m)] -= self.e_diag
        return m


def assemble_gamma1_self(grid: Grid, k1: float, k2: float, eta: float) -> dict:
    """Obstacle-to-obstacle blocks K2 - K1, eta V1 - V2, W2 - W1, eta Kt1 - Kt2.

    Self-interaction of each component uses the MK rule; interactions between
    different components use the trapezoidal rule on smooth kernels.
    """
    n = len(grid)
    blocks = {key: np.zeros((n, n), dtype=complex) for key in ("11", "12", "21", "22")}
    for ci, si in enumerate(grid.components):
        pi_ = grid.points.take(si)
        mk = mk_self_blocks(pi_, grid.t[si], (k1, k2), w_pair=(k1, k2))
        blocks["11"][si, si] = mk[("K", k2)] - mk[("K", k1)]
        blocks["12"][si, si] = eta * mk[("V", k1)] - mk[("V", k2)]
        blocks["21"][si, si] = mk["Wdiff"]
        blocks["22"][si, si] = eta * mk[("Ktilde", k1)] - mk[("Ktilde", k2)]
        for cj, sj in enumerate(grid.components):
            if cj == ci:
                continue
            pj = grid.points.take(sj)
            ds = grid.ds[sj][None, :]
            q1 = kernel_blocks(k1, pi_, pj, ("V", "K", "Ktilde"))
            q2 = kernel_blocks(k2, pi_, pj, ("V", "K", "Ktilde"))
            blocks["11"][si, sj] = (q2["K"] - q1["K"]) * ds
            blocks["12"][si, sj] = (eta * q1["V"] - q2["V"]) * ds
            blocks["21"][si, sj] = w_difference(k1, k2, pi_, pj) * ds
            blocks["22"][si, sj] = (eta * q1["Ktilde"] - q2["Ktilde"]) * ds
    return blocks


def assemble_cross(k: float, target: Grid, source: Grid, window: np.ndarray | None = None,
                   kinds=("V", "K", "Ktilde", "W")) -> dict:
    """Trapezoidal Nyström blocks between well-separated curves.

    Args:
        k: Wavenumber.
        target: Target grid.
        source: Source grid.
        window: Optional source-node weights (the window w_A) multiplied into
            the columns.
        kinds: Kernels to assemble.

    Returns:
        Dict of (n_target, n_source) complex matrices.
    """
    blocks = kernel_blocks(k, target.points, source.points, kinds)
    tp, sp = target.points.position, source.points.position
    dist = np.hypot(tp[:, 0][:, None] - sp[:, 0][None, :], tp[:, 1][:, None] - sp[:, 1][None, :])
    # local test against the coarser of the two spacings at each pair
    close = dist < 2 * np.maximum(source.ds[None, :], target.ds[:, None])
    if np.any(close):
        warnings.warn(f"curves come within {np.min(dist[close]):.3g} of each other, below two "
                      f"local grid spacings", RuntimeWarning, stacklevel=2)
    weight = source.ds if window is None else source.ds * window
    return {kind: q * weight[None, :] for kind, q in blocks.items()}


def incident_data(cfg: ProblemConfig, points: CurvePoint):
    """Traces of exp(i alpha x - i beta y) and its normal derivative."""
    x, y = points.position[:, 0], points.position[:, 1]
    f = np.exp(1j * cfg.alpha * x - 1j * cfg.beta * y)
    g = 1j * (cfg.alpha * points.normal[:, 0] - cfg.beta * points.normal[:, 1]) * f
    return f, g


def wall_window(grid2: Grid, window: WindowConfig) -> np.ndarray:
    heights = grid2.curve.height_map(grid2.t)[0]
    return window_with_derivatives(heights, window.plateau, window.A)[0]


def assemble_naive_system(cfg: ProblemConfig, table: ModeTable, cell: UnitCell,
                          window: WindowConfig, grids: tuple[Grid, Grid]) -> BlockSystem:
    """Assemble E + M W_A and the incident right-hand side.

    Raises:
        ValueError: If the window or measurement height is inconsistent with the obstacle.
    """
    window.validate(cell.clearance_height)
    g1, g2 = grids
    g3 = g2.shifted(cfg.period)
    n1, n2 = len(g1), len(g2)
    k1, gam, eta = cfg.k1, cfg.gamma, cfg.eta
    w = wall_window(g2, window)

    size = 2 * n1 + 2 * n2
    mat = np.zeros((size, size), dtype=complex)
    b1, b2 = slice(0, n1), slice(n1, 2 * n1)
    b3, b4 = slice(2 * n1, 2 * n1 + n2), slice(2 * n1 + n2, size)

    own = assemble_gamma1_self(g1, k1, cfg.k2, eta)
    mat[b1, b1], mat[b1, b2] = own["11"], own["12"]
    mat[b2, b1], mat[b2, b2] = own["21"], own["22"]

    # obstacle targets, wall sources (superscript 1,2 and 1,3)
    q12 = assemble_cross(k1, g1, g2, w)
    q13 = assemble_cross(k1, g1, g3, w)
    mat[b1, b3] = gam * q13["K"] - q12["K"]
    mat[b1, b4] = q12["V"] - gam * q13["V"]
    mat[b2, b3] = gam * q13["W"] - q12["W"]
    mat[b2, b4] = q12["Ktilde"] - gam * q13["Ktilde"]
    del q12, q13

    # wall targets, obstacle sources
    q21 = assemble_cross(k1, g2, g1)
    q31 = assemble_cross(k1, g3, g1)
    mat[b3, b1] = -gam * q21["K"] - q31["K"]
    mat[b3, b2] = eta * (gam * q21["V"] + q31["V"])
    mat[b4, b1] = -gam * q21["W"] - q31["W"]
    mat[b4, b2] = eta * (gam * q21["Ktilde"] + q31["Ktilde"])
    del q21, q31

    # wall to wall
    q23 = assemble_cross(k1, g2, g3, w)
    q32 = assemble_cross(k1, g3, g2, w)
    mat[b3, b3] = gam**2 * q23["K"] - q32["K"]
    mat[b3, b4] = q32["V"] - gam**2 * q23["V"]
    mat[b4, b3] = gam**2 * q23["W"] - q32["W"]
    mat[b4, b4] = q32["Ktilde"] - gam**2 * q23["Ktilde"]
    del q23, q32

    e_diag = np.concatenate([np.ones(n1), np.full(n1, 0.5 * (1 + eta)),
                             np.full(2 * n2, gam)]).astype(complex)
    mat[np.diag_indices(size)] += e_diag
    window_all = np.concatenate([np.ones(2 * n1), w, w])
    f, g = incident_data(cfg, g1.points)
    rhs = np.concatenate([f, g, np.zeros(2 * n2, dtype=complex)])
    return BlockSystem(cfg, table, cell, window, g1, g2, mat, e_diag, window_all, rhs, NAIVE)
