"""Problem parameters, Rayleigh mode table and traces of Rayleigh modes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CurvePoint

PROPAGATING = "U"
EVANESCENT = "V"
GRAZING = "W"


@dataclass(frozen=True)
class ProblemConfig:
    """Wavenumbers, contrast, period and incidence angle.

    Attributes:
        k1: Exterior wavenumber.
        k2: Wavenumber inside the obstacles.
        eta: Transmission contrast for the normal derivative.
        period: Lattice period L.
        theta_inc: Incidence angle in [-pi/2, pi/2]; theta = 0 is normal incidence from above.
    """

    k1: float
    k2: float
    eta: float
    period: float
    theta_inc: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "eta", "period"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        if not abs(self.theta_inc) <= math.pi / 2:
            raise ValueError(f"theta_inc must lie in [-pi/2, pi/2], got {self.theta_inc!r}")

    @property
    def alpha(self) -> float:
        return self.k1 * math.sin(self.theta_inc)

    @property
    def beta(self) -> float:
        return self.k1 * math.cos(self.theta_inc)

    @property
    def gamma(self) -> complex:
        return complex(np.exp(1j * self.alpha * self.period))

    @property
    def wavelength(self) -> float:
        return 2 * math.pi / self.k1


def default_n_range(cfg: ProblemConfig, delta: float) -> int:
    """Smallest N with |alpha_{+-N}| > k1 + 2 delta."""
    step = 2 * math.pi / cfg.period
    n = int(math.ceil((cfg.k1 + 2 * delta + abs(cfg.alpha)) / step))
    while min(abs(cfg.alpha + n * step), abs(cfg.alpha - n * step)) <= cfg.k1 + 2 * delta:
        n += 1
    return n


@dataclass(frozen=True)
class ModeTable:
    """Rayleigh orders n = -N..N with their wavenumbers and classes.

    ``beta`` follows the branch Re >= 0, Im >= 0; orders flagged grazing
    (``"W"``) have beta set to exactly zero.
    """

    cfg: ProblemConfig
    n: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    classes: tuple
    delta: float
    rw_tolerance: float
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_index", {int(m): i for i, m in enumerate(self.n)})

    def _members(self, label) -> list[int]:
        return [int(m) for m, c in zip(self.n, self.classes) if c == label]

    @property
    def U(self) -> list[int]:
        return self._members(PROPAGATING)

    @property
    def V(self) -> list[int]:
        return self._members(EVANESCENT)

    @property
    def W(self) -> list[int]:
        return self._members(GRAZING)

    @property
    def C_delta(self) -> list[int]:
        return [int(m) for m, b in zip(self.n, self.beta) if abs(b) <= self.delta]

    def index(self, n: int) -> int:
        try:
            return self._index[int(n)]
        except KeyError:
            raise KeyError(f"mode {n} is outside the table range") from None

    def alpha_of(self, n: int) -> float:
        return float(self.alpha[self.index(n)])

    def beta_of(self, n: int) -> complex:
        return complex(self.beta[self.index(n)])

    def class_of(self, n: int) -> str:
        return self.classes[self.index(n)]


def build_mode_table(cfg: ProblemConfig, delta: float | None = None, n_range: int | None = None,
                     rw_tolerance: float = 1e-8) -> ModeTable:
    """Tabulate alpha_n, beta_n and the U/V/W classification.

    Args:
        cfg: Problem parameters.
        delta: Threshold for the nearly grazing set C_delta; defaults to 3 k1 / 4.
        n_range: Orders -n_range..n_range are tabulated; by default large enough
            that every order outside has |beta_n| > delta.
        rw_tolerance: Relative tolerance on |k1^2 - alpha_n^2| below which an
            order is treated as grazing.
    """
    if delta is None:
        delta = 0.75 * cfg.k1
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if n_range is None:
        n_range = default_n_range(cfg, delta)
    n = np.arange(-n_range, n_range + 1)
    alpha = cfg.alpha + 2 * np.pi * n / cfg.period
    gap = cfg.k1**2 - alpha**2
    grazing = np.abs(gap) <= rw_tolerance * cfg.k1**2
    beta = np.where(gap >= 0, np.sqrt(np.abs(gap)) + 0j, 1j * np.sqrt(np.abs(gap)))
    beta[grazing] = 0.0
    classes = tuple(GRAZING if g else (PROPAGATING if d > 0 else EVANESCENT)
                    for g, d in zip(grazing, gap))
    return ModeTable(cfg, n, alpha, beta, classes, float(delta), float(rw_tolerance))


def plane_mode(alpha_n: float, beta_n: complex, sign: int, points: CurvePoint):
    """Traces of exp(i alpha_n x + sign i beta_n y) and of its normal derivative."""
    x, y = points.position[:, 0], points.position[:, 1]
    value = np.exp(1j * alpha_n * x + sign * 1j * beta_n * y)
    slope = points.normal[:, 0] * alpha_n + points.normal[:, 1] * sign * beta_n
    return value, 1j * slope * value


def mode_trace(table: ModeTable, n: int, sign: int, points: CurvePoint):
    """Dirichlet and Neumann traces of the Rayleigh mode u_n^sign on curve samples.

    Args:
        table: Mode table holding alpha_n and beta_n.
        n: Rayleigh order.
        sign: +1 for exp(i alpha_n x + i beta_n y), -1 for the downward mode.
        points: Curve samples (positions and unit normals).

    Returns:
        Tuple of complex arrays ``(dirichlet, neumann)``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return plane_mode(table.alpha_of(n), table.beta_of(n), sign, points)


def wood_derivative_trace(table: ModeTable, n: int, points: CurvePoint):
    """Beta-derivative at beta = 0 of the upward mode traces, for a grazing order.

    The Dirichlet part is i y exp(i alpha_n x) and the Neumann part is
    n . (-y alpha_n, i) exp(i alpha_n x).
    """
    if table.class_of(n) != GRAZING:
        raise ValueError(f"mode {n} is not grazing")
    a = table.alpha_of(n)
    x, y = points.position[:, 0], points.position[:, 1]
    e = np.exp(1j * a * x)
    neumann = (points.normal[:, 0] * (-y * a) + points.normal[:, 1] * 1j) * e
    return 1j * y * e, neumann
