import numpy as np
import pytest

from fracnls.blocksys import BlockSystem, DiagonalNonneg, dense_R
from fracnls.fracdiff import coefficients
from fracnls.krylov import arnoldi_ritz, gmres
from fracnls.precond import build_cnas
from fracnls.structured import toeplitz_from_coeffs

rng = np.random.default_rng(23)


def frac_T(alpha, M, mu=1.0):
    return toeplitz_from_coeffs(coefficients(alpha, M - 1), M, mu)


def test_identity_converges_in_one_iteration():
    b = rng.standard_normal(40)
    x, rep = gmres(lambda v: v, b, tol=1e-12)
    assert rep.converged and rep.iterations <= 1
    assert np.allclose(x, b)


def test_finite_termination_k_distinct_eigenvalues():
    d = np.repeat([1.0, 2.0, 3.0, 4.0, 5.0], 10)
    b = rng.standard_normal(50)
    _, rep = gmres(lambda v: d * v, b, tol=1e-12)
    assert rep.converged and rep.iterations <= 5


def test_matches_dense_solve():
    n = 50
    A = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-12)
    ref = np.linalg.solve(A, b)
    assert rep.converged
    assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)


def test_residual_history_monotone():
    n = 80
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    _, rep = gmres(lambda v: A @ v, b, tol=1e-12)
    h = np.asarray(rep.residual_history)
    assert np.all(np.diff(h) <= 1e-14)


def test_nonconvergence_reported_not_raised():
    n = 60
    A = np.eye(n) + 0.5 * rng.standard_normal((n, n))
    b = rng.standard_normal(n)
    _, rep = gmres(lambda v: A @ v, b, tol=1e-14, max_it=3)
    assert not rep.converged and rep.iterations == 3


def test_zero_rhs():
    x, rep = gmres(lambda v: 2 * v, np.zeros(10), tol=1e-10)
    assert rep.converged and rep.iterations == 0 and np.allclose(x, 0)


def test_initial_guess_honored():
    n = 30
    A = np.eye(n) * 2.0
    b = rng.standard_normal(n)
    x0 = b / 2.0
    x, rep = gmres(lambda v: A @ v, b, x0=x0, tol=1e-12)
    assert rep.iterations == 0 and np.allclose(x, x0)


def test_right_preconditioning_monitors_true_residual():
    M = 128
    T = frac_T(1.5, M, mu=2.0)
    D = DiagonalNonneg(d=rng.uniform(0, 0.3, M))
    f = rng.standard_normal(2 * M)
    sys = BlockSystem(T=T, D=D, f=f)
    P = build_cnas(T, D, 0.5)
    x, rep = gmres(sys.apply, f, apply_M=P.apply, tol=1e-8)
    true_relres = np.linalg.norm(f - sys.apply(x)) / np.linalg.norm(f)
    assert rep.converged
    assert rep.final_relres == pytest.approx(true_relres, rel=1e-12)
    assert true_relres <= 1e-8


def test_preconditioned_and_plain_agree_on_solution():
    M = 256
    T = frac_T(1.3, M, mu=1.0)
    D = DiagonalNonneg(d=rng.uniform(0, 0.2, M))
    f = rng.standard_normal(2 * M)
    sys = BlockSystem(T=T, D=D, f=f)
    x_plain, _ = gmres(sys.apply, f, tol=1e-12)
    P = build_cnas(T, D, 0.5)
    x_prec, _ = gmres(sys.apply, f, apply_M=P.apply, tol=1e-12)
    assert np.linalg.norm(x_plain - x_prec) <= 1e-8 * np.linalg.norm(x_plain)


def test_arnoldi_basis_orthonormal():
    """Re-run the Arnoldi loop and check the basis it builds."""
    M = 128
    T = frac_T(1.5, M, mu=2.0)
    D = DiagonalNonneg(d=rng.uniform(0, 0.3, M))
    sys = BlockSystem(T=T, D=D, f=np.zeros(2 * M))
    n = 2 * M
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = [v]
    for k in range(40):
        w = sys.apply(V[k])
        for u in V:
            w -= (u @ w) * u
        for u in V:          # second pass, mirrors the threshold path
            w -= (u @ w) * u
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            break
        V.append(w / nw)
    Vm = np.asarray(V)
    G = Vm @ Vm.T
    assert np.max(np.abs(G - np.eye(len(V)))) <= 1e-10


def test_ritz_values_of_diagonal_matrix():
    d = np.arange(1.0, 9.0)
    ritz = arnoldi_ritz(lambda v: d * v, 8, 8, seed=1)
    assert np.allclose(np.sort(ritz.real), d, atol=1e-8)
    assert np.max(np.abs(ritz.imag)) <= 1e-8


def test_ritz_values_of_block_system_have_unit_real_part():
    M = 128
    T = frac_T(1.5, M, mu=1.0)
    D = DiagonalNonneg(d=rng.uniform(0, 0.2, M))
    sys = BlockSystem(T=T, D=D, f=np.zeros(2 * M))
    ritz = arnoldi_ritz(sys.apply, 2 * M, 30, seed=0)
    assert np.allclose(ritz.real, 1.0, atol=1e-8)


def test_ritz_rejects_oversized_subspace():
    with pytest.raises(ValueError):
        arnoldi_ritz(lambda v: v, 4, 5)
