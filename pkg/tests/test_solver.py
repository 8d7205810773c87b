from dataclasses import replace

import numpy as np
import pytest

from qpwgf.scenario import KITE, assemble, resolve
from qpwgf.solver import SolverError, relative_residual, solve_direct, solve_gmres


@pytest.fixture(scope="module")
def kite():
    return assemble(resolve(KITE.replace(A=8.0)))


def test_identity_perturbation(kite):
    diag = replace(kite, matrix=np.diag(kite.e_diag))
    expect = kite.rhs / kite.e_diag
    assert np.allclose(solve_direct(diag).density, expect, rtol=0, atol=1e-15)
    rep = solve_gmres(diag, tol=1e-12)
    assert np.allclose(rep.density, expect, rtol=0, atol=1e-12) and rep.iterations <= 1


def test_direct_residual_and_report(kite):
    rep = solve_direct(kite, condition=True)
    assert rep.method == "direct" and rep.iterations == 0
    assert rep.residual < 1e-10
    again = np.linalg.norm(kite.matrix @ rep.density - kite.rhs) / np.linalg.norm(kite.rhs)
    assert abs(again - rep.residual) < 1e-14
    assert rep.condition_estimate is not None and rep.condition_estimate > 1


@pytest.mark.parametrize("tol", [1e-6, 1e-10])
def test_gmres_residual_within_tolerance(kite, tol):
    rep = solve_gmres(kite, tol=tol)
    assert rep.method == "gmres" and rep.iterations > 0
    assert relative_residual(kite, rep.density) <= 1.1 * tol


def test_direct_and_gmres_agree(kite):
    direct = solve_direct(kite).density
    cond = solve_direct(kite, condition=True).condition_estimate
    for tol in (1e-6, 1e-10):
        err = np.linalg.norm(solve_gmres(kite, tol=tol).density - direct) / np.linalg.norm(direct)
        assert err <= cond * tol


def test_preconditioned_and_plain_agree():
    system = assemble(resolve(KITE.replace(A=8.0, eta=3.0)))
    a = solve_gmres(system, tol=1e-10, precondition=True)
    b = solve_gmres(system, tol=1e-10, precondition=False)
    assert np.linalg.norm(a.density - b.density) / np.linalg.norm(a.density) < 1e-7
    assert a.iterations <= b.iterations


def test_gmres_non_convergence_reports_best_residual(kite):
    with pytest.raises(SolverError) as info:
        solve_gmres(kite, tol=1e-12, max_iter=3)
    assert info.value.iterations == 3
    assert info.value.residual is not None and 0 < info.value.residual < 1


def test_singular_matrix(kite):
    singular = replace(kite, matrix=np.zeros_like(kite.matrix))
    with pytest.raises(SolverError) as info:
        solve_direct(singular)
    assert info.value.condition_estimate == np.inf
    rank_one = replace(kite, matrix=np.outer(kite.rhs, kite.rhs.conj()))
    with pytest.raises(SolverError) as info:
        solve_direct(rank_one)
    assert info.value.condition_estimate > 1e12


def test_gmres_rejects_bad_tolerance(kite):
    with pytest.raises(ValueError):
        solve_gmres(kite, tol=0.0)
