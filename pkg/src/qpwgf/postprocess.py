"""Field evaluation, Rayleigh coefficients and accuracy diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .assembly import CORRECTED, BlockSystem
from .correction import (CELL, SUPERCELL, _source_layout, obstacle_sources, refine_density,
                         required_refinement, segment_nodes)
from .geometry import inside
from .kernels import potentials
from .modes import PROPAGATING, ModeTable, ProblemConfig
from .solver import SolveReport

_CHUNK = 512


class NearFieldError(ValueError):
    """Raised when a field is requested too close to a source curve."""


@dataclass(frozen=True)
class Solution:
    """A solved system: density plus the data needed to evaluate fields."""

    system: BlockSystem
    report: SolveReport

    @property
    def density(self) -> np.ndarray:
        return self.report.density

    @property
    def corrected(self) -> bool:
        return self.system.formulation == CORRECTED

    @cached_property
    def modal_amplitudes(self) -> list[tuple]:
        """Per correction term: (term, L+ phi, L- phi, dL+ phi, dL- phi)."""
        phi = self.density
        out = []
        for term in self.system.corrections:
            lp, lm = term.row_plus @ phi, term.row_minus @ phi
            if term.wood:
                out.append((term, lp, lm, term.d_row_plus @ phi, term.d_row_minus @ phi))
            else:
                out.append((term, lp, lm, 0j, 0j))
        return out


def _near_mask(points: np.ndarray, curves: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    # a point is near when it is closer to some node than two local spacings
    near = np.zeros(len(points), dtype=bool)
    for nodes, spacing in curves:
        for start in range(0, len(points), _CHUNK):
            p = points[start:start + _CHUNK]
            d = np.hypot(p[:, 0][:, None] - nodes[:, 0][None, :], p[:, 1][:, None] - nodes[:, 1][None, :])
            near[start:start + len(p)] |= np.any(d < 2 * spacing[None, :], axis=1)
    return near


def _source_curves(system: BlockSystem, layout: str, refine: int | None = None, interior: bool = False):
    obs_pts, obs_ds, _ = obstacle_sources(system, refine)
    obstacle, walls = _source_layout(system, layout)
    if interior:
        return [(obs_pts.position, obs_ds)]
    curves = [(obs_pts.shifted(s).position, obs_ds) for s, _ in obstacle]
    curves += [(system.grid2.points.shifted(s).position, system.grid2.ds) for s, _ in walls]
    return curves


def _check_clearance(points: np.ndarray, curves) -> None:
    if np.any(_near_mask(points, curves)):
        raise NearFieldError("evaluation point within two grid spacings of a source curve")


def _layer_field(solution: Solution, points: np.ndarray, with_dy: bool, layout: str,
                 refine: int | None):
    system = solution.system
    cfg = system.cfg
    phi = solution.density
    k1, eta = cfg.k1, cfg.eta
    b1, b2, b3, b4 = (system.block(p) for p in (1, 2, 3, 4))
    obs_pts, obs_ds, plan = obstacle_sources(system, refine)
    dens_d = refine_density(phi[b1], plan) * obs_ds
    dens_s = -eta * refine_density(phi[b2], plan) * obs_ds
    g2 = system.grid2
    wall_d = phi[b3] * system.window[b3] * g2.ds
    wall_s = -phi[b4] * system.window[b4] * g2.ds
    obstacle, walls = _source_layout(system, layout)
    _check_clearance(points, _source_curves(system, layout, refine))
    val = np.zeros(len(points), dtype=complex)
    dy = np.zeros(len(points), dtype=complex)
    for start in range(0, len(points), _CHUNK):
        p = points[start:start + _CHUNK]
        sl = slice(start, start + len(p))
        for shift, fac in obstacle:
            pots = potentials(k1, p, obs_pts.shifted(shift), with_dy)
            val[sl] += fac * (pots[1] @ dens_d + pots[0] @ dens_s)
            if with_dy:
                dy[sl] += fac * (pots[3] @ dens_d + pots[2] @ dens_s)
        for shift, fac in walls:
            pots = potentials(k1, p, g2.points.shifted(shift), with_dy)
            val[sl] += fac * (pots[1] @ wall_d + pots[0] @ wall_s)
            if with_dy:
                dy[sl] += fac * (pots[3] @ wall_d + pots[2] @ wall_s)
    return val, dy


def _modal_field(solution: Solution, points: np.ndarray):
    x, y = points[:, 0], points[:, 1]
    val = np.zeros(len(points), dtype=complex)
    dy = np.zeros(len(points), dtype=complex)
    for term, lp, lm, dlp, dlm in solution.modal_amplitudes:
        a, b = term.alpha, term.beta
        e = np.exp(1j * a * x)
        if term.wood:
            # (1/2i) d/dbeta {u^- L+ - u^+ L-} at beta = 0
            val += 0.5 / 1j * (e * (dlp - dlm) - 1j * y * e * (lp + lm))
            dy += 0.5 / 1j * (-1j * e * (lp + lm))
        else:
            up = e * np.exp(1j * b * y)
            down = e * np.exp(-1j * b * y)
            val += term.scale * (down * lp - up * lm)
            dy += term.scale * (-1j * b * down * lp - 1j * b * up * lm)
    return val, dy


def scattered_field(solution: Solution, points, corrected: bool | None = None,
                    with_dy: bool = False, layout: str = SUPERCELL, refine: int | None = None):
    """Scattered field u_s at exterior points of the window plateau.

    Args:
        solution: Solved system.
        points: (n, 2) array or a single point.
        corrected: Include the modal terms of the correction; defaults to whether
            the system was corrected.
        with_dy: Also return d u_s / dy.
        layout: ``"supercell"`` uses the three-period representation (robust near
            the cell walls); ``"cell"`` the one-period one.
        refine: Integer factor; obstacle densities are trigonometrically
            interpolated to that many times more nodes, which allows evaluation
            closer to the obstacle. By default the smallest power of two that
            keeps every point three local spacings away is used.

    Raises:
        NearFieldError: If a point lies within two node spacings of a source curve.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if corrected is None:
        corrected = solution.corrected
    if corrected and not solution.corrected:
        raise ValueError("solution has no correction terms")
    if refine is None:
        refine = required_refinement(solution.system, pts, layout)
    val, dy = _layer_field(solution, pts, with_dy, layout, refine)
    if corrected:
        mv, md = _modal_field(solution, pts)
        val, dy = val + mv, dy + md
    if np.ndim(points) == 1:
        return (val[0], dy[0]) if with_dy else val[0]
    return (val, dy) if with_dy else val


def transmitted_field(solution: Solution, points, refine: int | None = None):
    """Field inside the obstacle, u_t = -D_2 phi_1 + S_2 phi_2.

    Raises:
        NearFieldError: If a point lies within two node spacings of the boundary.
    """
    system = solution.system
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    phi = solution.density
    if refine is None:
        refine = required_refinement(system, pts, CELL)
    obs_pts, obs_ds, plan = obstacle_sources(system, refine)
    _check_clearance(pts, _source_curves(system, SUPERCELL, refine, interior=True))
    dens_d = refine_density(phi[system.block(1)], plan) * obs_ds
    dens_s = refine_density(phi[system.block(2)], plan) * obs_ds
    val = np.zeros(len(pts), dtype=complex)
    for start in range(0, len(pts), _CHUNK):
        p = pts[start:start + _CHUNK]
        s, d = potentials(system.cfg.k2, p, obs_pts)
        val[start:start + len(p)] = -d @ dens_d + s @ dens_s
    return val[0] if np.ndim(points) == 1 else val


def incident_field(cfg: ProblemConfig, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.exp(1j * cfg.alpha * pts[:, 0] - 1j * cfg.beta * pts[:, 1])


# ---------------------------------------------------------------------------
# Rayleigh coefficients and energy


@dataclass(frozen=True)
class RayleighSpectrum:
    """Rayleigh coefficients above (B_plus) and below (B_minus) the array."""

    n: np.ndarray
    classes: tuple
    B_plus: np.ndarray
    B_minus: np.ndarray
    energy_balance_error: float
    R: float
    T: float


def energy_and_power(B_plus, B_minus, cfg: ProblemConfig, table: ModeTable):
    """Energy-balance error, reflectance and transmittance from Rayleigh coefficients.

    Args:
        B_plus: Coefficients of the upward modes, indexed like ``table.n``.
        B_minus: Coefficients of the downward modes.
        cfg: Problem parameters (for beta).
        table: Mode table (for the propagating set).

    Returns:
        Tuple ``(error_eb, R, T)``.
    """
    prop = np.array([c == PROPAGATING for c in table.classes])
    weights = np.real(table.beta[prop]) / cfg.beta
    up = float(np.sum(weights * np.abs(np.asarray(B_plus)[prop]) ** 2))
    down = float(np.sum(weights * np.abs(np.asarray(B_minus)[prop]) ** 2))
    b0 = complex(np.asarray(B_minus)[table.index(0)])
    error = abs(2 * b0.real + up + down)
    return error, up, 1.0 + 2 * b0.real + down


def default_quadrature_nodes(cfg: ProblemConfig) -> int:
    return max(128, int(math.ceil(16 * cfg.k1 * cfg.period / np.pi)))


def rayleigh_coefficients(solution: Solution, h: float | None = None,
                          n_quad: int | None = None) -> RayleighSpectrum:
    """Project u_s on the lines y = +-h onto the Rayleigh modes.

    B_n^+- = exp(-i beta_n h) (1/L) sum_x u_s(x, +-h) exp(-i alpha_n x) / n_quad, so that
    u_s = sum B_n^+ exp(i alpha_n x + i beta_n y) above and
    u_s = sum B_n^- exp(i alpha_n x - i beta_n y) below. Evanescent orders whose
    rescaling would overflow are reported as NaN.

    Raises:
        ValueError: If h does not clear the obstacle or exceeds the plateau.
    """
    system = solution.system
    cfg, table = system.cfg, system.table
    h = system.window_config.h if h is None else h
    clear = system.cell.clearance_height
    if not clear < h < system.window_config.plateau:
        raise ValueError(f"h = {h:.6g} must lie strictly between {clear:.6g} and "
                         f"cA = {system.window_config.plateau:.6g}")
    n_quad = default_quadrature_nodes(cfg) if n_quad is None else n_quad
    x = segment_nodes(cfg.period, cfg.k1, n_quad)
    coeffs = {}
    for sign in (1, -1):
        pts = np.stack([x, np.full_like(x, sign * h)], axis=1)
        u = scattered_field(solution, pts)
        proj = np.exp(-1j * np.outer(table.alpha, x)) @ u / n_quad
        growth = np.imag(table.beta) * h
        with np.errstate(over="ignore", invalid="ignore"):
            scale = np.where(growth < 700, np.exp(-1j * table.beta * h), np.nan)
        coeffs[sign] = proj * scale
    err, refl, trans = energy_and_power(coeffs[1], coeffs[-1], cfg, table)
    return RayleighSpectrum(table.n.copy(), table.classes, coeffs[1], coeffs[-1], err, refl, trans)


# ---------------------------------------------------------------------------
# diagnostics


def default_sample_points(system: BlockSystem) -> np.ndarray:
    q, h = system.cfg.period / 4, system.window_config.h
    return np.array([[-q, -h], [q, -h], [-q, h], [q, h]])


def qp_mismatch(solution: Solution, sample_points=None) -> tuple[float, float]:
    """Left and right quasi-periodicity mismatches of the supercell field.

    Returns:
        ``(error_left, error_right)`` with
        error_right = max |u(r) - gamma^{-1} u(r + L e1)| / max |u(r)| and
        error_left = max |u(r) - gamma u(r - L e1)| / max |u(r)|.
    """
    system = solution.system
    pts = default_sample_points(system) if sample_points is None else np.atleast_2d(sample_points)
    L, gam = system.cfg.period, system.cfg.gamma
    shift = np.array([L, 0.0])
    centre = scattered_field(solution, pts)
    right = scattered_field(solution, pts + shift)
    left = scattered_field(solution, pts - shift)
    norm = np.max(np.abs(centre))
    return (float(np.max(np.abs(centre - gam * left)) / norm),
            float(np.max(np.abs(centre - right / gam)) / norm))


def radiation_errors(solution: Solution, h: float | None = None, modes=None,
                     n_quad: int | None = None) -> dict:
    """|(1/L) int (d/dy -+ i beta_n) u_s(x, +-h) exp(-i alpha_n x) dx| per order.

    Returns:
        Dict mapping n to ``(error_plus, error_minus)``.
    """
    system = solution.system
    cfg, table = system.cfg, system.table
    h = system.window_config.h if h is None else h
    modes = table.C_delta if modes is None else list(modes)
    n_quad = default_quadrature_nodes(cfg) if n_quad is None else n_quad
    x = segment_nodes(cfg.period, cfg.k1, n_quad)
    fields = {}
    for sign in (1, -1):
        pts = np.stack([x, np.full_like(x, sign * h)], axis=1)
        fields[sign] = scattered_field(solution, pts, with_dy=True)
    out = {}
    for n in modes:
        a, b = table.alpha_of(n), table.beta_of(n)
        e = np.exp(-1j * a * x) / n_quad
        errs = []
        for sign in (1, -1):
            u, uy = fields[sign]
            errs.append(float(abs(e @ (uy - sign * 1j * b * u))))
        out[n] = tuple(errs)
    return out


@dataclass(frozen=True)
class FieldGrid:
    x: np.ndarray
    y: np.ndarray
    total: np.ndarray
    region: np.ndarray


REGION_EXTERIOR = "exterior"
REGION_INTERIOR = "interior"
REGION_EXCLUDED = "excluded"


def field_grid(solution: Solution, nx: int = 64, ny: int = 128, y_extent: float | None = None) -> FieldGrid:
    """Total field sampled on [-L/2, L/2] x [-cA, cA].

    Points inside the obstacle get the transmitted field, the others the
    scattered plus incident field. Points too close to a source curve are
    marked ``excluded`` and set to NaN.
    """
    system = solution.system
    L = system.cfg.period
    y_extent = system.window_config.plateau if y_extent is None else y_extent
    xs = np.linspace(-L / 2, L / 2, nx)
    ys = np.linspace(-y_extent, y_extent, ny)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inner = inside(system.cell.obstacle, pts)
    near = np.where(inner, _near_mask(pts, _source_curves(system, SUPERCELL, interior=True)),
                    _near_mask(pts, _source_curves(system, SUPERCELL)))
    total = np.full(len(pts), np.nan + 0j)
    region = np.where(inner, REGION_INTERIOR, REGION_EXTERIOR).astype(object)
    region[near] = REGION_EXCLUDED
    ext = ~inner & ~near
    itr = inner & ~near
    if np.any(ext):
        total[ext] = scattered_field(solution, pts[ext]) + incident_field(system.cfg, pts[ext])
    if np.any(itr):
        total[itr] = transmitted_field(solution, pts[itr])
    return FieldGrid(pts[:, 0], pts[:, 1], total, region)


__all__ = [
    "CELL", "SUPERCELL", "FieldGrid", "NearFieldError", "RayleighSpectrum", "Solution",
    "energy_and_power", "field_grid", "incident_field", "qp_mismatch",
    "radiation_errors", "rayleigh_coefficients", "scattered_field", "transmitted_field",
]
