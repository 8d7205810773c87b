"""Direct and GMRES solves of the dense block system."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .assembly import BlockSystem

DIRECT = "direct"
GMRES = "gmres"


class SolverError(RuntimeError):
    """Raised when a solve fails; carries whatever diagnostics are available."""

    def __init__(self, message: str, residual: float | None = None,
                 condition_estimate: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.condition_estimate = condition_estimate
        self.iterations = iterations


@dataclass(frozen=True)
class SolveReport:
    """Density and solve diagnostics.

    Attributes:
        density: Solution vector of the block system.
        method: ``"direct"`` or ``"gmres"``.
        iterations: GMRES iterations (0 for direct solves).
        residual: Relative residual ||A phi - b|| / ||b|| of the unpreconditioned system.
        condition_estimate: Optional 2-norm condition estimate.
    """

    density: np.ndarray
    method: str
    iterations: int
    residual: float
    condition_estimate: float | None = None


def relative_residual(system: BlockSystem, density: np.ndarray) -> float:
    return float(np.linalg.norm(system.matrix @ density - system.rhs) / np.linalg.norm(system.rhs))


def _condition_estimate(a: np.ndarray, lu, n_iter: int = 8, seed: int = 7) -> float:
    # power iterations for ||A|| and ||A^{-1}|| using the LU factors
    rng = np.random.default_rng(seed)
    n = a.shape[0]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u = v.copy()
    big = small = 0.0
    for _ in range(n_iter):
        v /= np.linalg.norm(v)
        v = a.conj().T @ (a @ v)
        big = np.sqrt(np.linalg.norm(v))
        u /= np.linalg.norm(u)
        u = sla.lu_solve(lu, sla.lu_solve(lu, u, trans=2))
        small = np.sqrt(np.linalg.norm(u))
    return float(big * small)


def solve_direct(system: BlockSystem, condition: bool = False) -> SolveReport:
    """LU solve of the dense system.

    Raises:
        SolverError: If the matrix is numerically singular.
    """
    a = system.matrix
    try:
        # exact zero pivots are reported below with a condition estimate
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu = sla.lu_factor(a, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SolverError(f"LU factorization failed: {exc}") from exc
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() <= np.finfo(float).eps * pivots.max():
        cond = np.inf if pivots.min() == 0 else _condition_estimate(a, lu)
        raise SolverError("matrix is numerically singular", condition_estimate=cond)
    density = sla.lu_solve(lu, system.rhs)
    cond = _condition_estimate(a, lu) if condition else None
    return SolveReport(density, DIRECT, 0, relative_residual(system, density), cond)


def solve_gmres(system: BlockSystem, tol: float = 1e-6, max_iter: int = 1000,
                precondition: bool = True) -> SolveReport:
    """Unrestarted GMRES on the system, optionally scaled by E^{-1}.

    With ``precondition`` the iteration runs on (I + E^{-1} M W_A) phi = E^{-1} b.
    The tolerance always refers to the unscaled residual; if the scaled stopping
    test is met first the solve is continued with a tighter internal tolerance.

    Raises:
        SolverError: If the residual target is not reached within ``max_iter`` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = system.matrix, system.rhs
    scale = 1.0 / system.e_diag if precondition else np.ones(system.size)
    a_eff = a * scale[:, None]
    b_eff = b * scale
    op = LinearOperator(a.shape, matvec=lambda v: a_eff @ v, dtype=complex)
    total = 0
    x0 = None
    inner_tol = tol
    best = np.inf
    density = np.zeros(system.size, dtype=complex)
    while True:
        count = [0]

        def callback(_, count=count):
            count[0] += 1

        budget = max_iter - total
        if budget <= 0:
            raise SolverError(f"GMRES did not reach {tol:g} in {max_iter} iterations",
                              residual=best, iterations=total)
        x, _ = gmres(op, b_eff, x0=x0, rtol=inner_tol * np.linalg.norm(b) / np.linalg.norm(b_eff),
                     atol=0.0, restart=budget, maxiter=1, callback=callback,
                     callback_type="pr_norm")
        total += count[0]
        res = relative_residual(system, x)
        if res < best:
            best, density = res, x
        if res <= tol:
            return SolveReport(density, GMRES, total, res)
        if count[0] == 0:
            inner_tol *= 0.1
        else:
            inner_tol *= 0.5 * tol / res
        x0 = density
