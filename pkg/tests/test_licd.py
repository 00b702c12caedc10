import numpy as np
import pytest

from fracnls.fracdiff import coefficients
from fracnls.licd import (
    GridSpec,
    SolverConfig,
    WaveState,
    energy,
    evolve,
    licd_step,
    mass,
    startup_step,
)

rng = np.random.default_rng(5)


def small_grid(M=64, N=20, alpha=1.5, **kw):
    kw.setdefault("rho", 2.0)
    return GridSpec(a=-20.0, b=20.0, M=M, N=N, t_final=0.2, alpha=alpha, **kw)


def soliton(grid):
    x = grid.nodes
    return 1.0 / np.cosh(x) * np.exp(2j * x)


TIGHT = SolverConfig(kind="cnas-gmres", omega=0.5, tol=1e-13)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(a=-1, b=1, M=8, N=4, t_final=1.0, alpha=0.9)
    with pytest.raises(ValueError):
        GridSpec(a=1, b=-1, M=8, N=4, t_final=1.0, alpha=1.5)
    with pytest.raises(ValueError):
        GridSpec(a=-1, b=1, M=8, N=4, t_final=1.0, alpha=1.5, rho=0.0)


def test_grid_derived_quantities():
    g = GridSpec(a=-20, b=20, M=199, N=100, t_final=1.0, alpha=1.5)
    assert g.h == pytest.approx(0.2)
    assert g.tau == pytest.approx(0.01)
    assert g.mu == pytest.approx(0.01 / 0.2 ** 1.5)
    assert len(g.nodes) == 199
    assert g.nodes[0] == pytest.approx(-20 + g.h)


def test_from_spacing_even_M():
    g = GridSpec.from_spacing(-20, 20, 0.2, N=10, t_final=1.0, alpha=1.5)
    assert g.M % 2 == 0
    assert g.h == pytest.approx(0.2, rel=0.02)


def test_startup_zero_data():
    grid = small_grid()
    state, _ = startup_step(np.zeros(grid.M), None, grid, solver_config=TIGHT)
    assert np.allclose(state.u_curr, 0.0) and state.n == 1


def test_startup_satisfies_midpoint_equation():
    """u1 solves the implicit midpoint step to fixed-point accuracy."""
    grid = small_grid(M=64)
    u0 = soliton(grid)
    state, _ = startup_step(u0, None, grid, solver_config=TIGHT, fp_tol=1e-13)
    u1 = state.u_curr
    ubar = 0.5 * (u1 + u0)
    T = grid.toeplitz()
    lhs = 1j * (u1 - u0)
    rhs = T.matvec(ubar) - grid.rho * grid.tau * np.abs(ubar) ** 2 * ubar
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_startup_second_order_self_convergence():
    """Error against a fine-step reference shrinks ~4x per tau halving."""
    errs = []
    M = 64
    # reference: many tiny midpoint steps to t = 0.08
    grid_fine = GridSpec(a=-20, b=20, M=M, N=8, t_final=0.01, alpha=2.0, rho=2.0)
    u = soliton(grid_fine)
    state = None
    for _ in range(64):
        state, _ = startup_step(u, None, grid_fine, solver_config=TIGHT,
                                fp_tol=1e-13)
        u = state.u_curr
    ref = u  # u(t = 0.08) with tau = 0.00125
    for n_steps in (1, 2, 4):
        g = GridSpec(a=-20, b=20, M=M, N=1, t_final=0.08 / n_steps,
                     alpha=2.0, rho=2.0)
        u = soliton(g)
        for _ in range(n_steps):
            st, _ = startup_step(u, None, g, solver_config=TIGHT, fp_tol=1e-13)
            u = st.u_curr
        errs.append(np.linalg.norm(u - ref))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_startup_mass_drift_small():
    grid = small_grid(M=128)
    u0 = soliton(grid)
    state, _ = startup_step(u0, None, grid, solver_config=TIGHT, fp_tol=1e-13)
    q0 = grid.h * np.sum(np.abs(u0) ** 2)
    q1 = grid.h * np.sum(np.abs(state.u_curr) ** 2)
    assert abs(q1 - q0) / q0 <= 1e-10


def test_step_matches_dense_oracle():
    grid = small_grid(M=32)
    u0 = soliton(grid)
    state, _ = startup_step(u0, None, grid, solver_config=TIGHT)
    T = grid.toeplitz()
    solver = SolverConfig(kind="cnas-gmres", omega=0.5, tol=1e-13).bind(
        T, grid.alpha)
    nxt, _ = licd_step(state, grid, solver)
    # dense reference
    d = grid.rho * grid.tau * np.abs(state.u_curr) ** 2
    A = np.diag(d).astype(complex) - T.dense() + 1j * np.eye(grid.M)
    b = (T.dense() - np.diag(d) + 1j * np.eye(grid.M)) @ state.u_prev
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(nxt.u_curr - ref) <= 1e-10 * np.linalg.norm(ref)


def test_linear_case_norm_preserved():
    """rho -> 0 degenerates to a norm-preserving linear step."""
    grid = GridSpec(a=-20, b=20, M=64, N=10, t_final=0.1, alpha=1.5, rho=1e-30)
    u0 = soliton(grid)
    state, _ = startup_step(u0, None, grid,
                            solver_config=SolverConfig(tol=1e-14, omega=0.5))
    T = grid.toeplitz()
    solver = SolverConfig(kind="cnas-gmres", omega=0.5, tol=1e-14).bind(
        T, grid.alpha)
    norms = [np.linalg.norm(state.u_curr)]
    for _ in range(5):
        state, _ = licd_step(state, grid, solver)
        norms.append(np.linalg.norm(state.u_curr))
    # three-level scheme: ||u^{n+1}|| = ||u^{n-1}|| exactly in the linear case
    for k in range(2, len(norms)):
        assert norms[k] == pytest.approx(norms[k - 2], rel=1e-12)


def test_decoupled_fields_evolve_independently():
    grid = small_grid(M=64, beta=0.0)
    x = grid.nodes
    u0 = soliton(grid)
    v0 = 1.0 / np.cosh(x - 2) * np.exp(-1j * x)
    res_uv = evolve(grid, u0, v0, solver_config=TIGHT, startup_config=TIGHT)
    res_u = evolve(grid, u0, None, solver_config=TIGHT, startup_config=TIGHT)
    diff = np.linalg.norm(res_uv.final_state.u_curr - res_u.final_state.u_curr)
    assert diff <= 1e-13 * np.linalg.norm(res_u.final_state.u_curr)


def test_mass_energy_trivial_zero():
    grid = small_grid(M=16)
    state = WaveState(u_prev=np.zeros(16, complex), u_curr=np.zeros(16, complex),
                      v_prev=None, v_curr=None, n=1)
    assert mass(state.u_curr, state.u_prev, grid.h) == 0.0
    assert energy(state, grid) == 0.0


def test_energy_matches_double_loop_oracle():
    grid = small_grid(M=64, beta=0.7)
    x = grid.nodes
    u_p = soliton(grid)
    u_c = u_p * np.exp(0.1j)
    v_p = 1.0 / np.cosh(x - 1) * np.exp(1j * x)
    v_c = v_p * np.exp(-0.05j)
    state = WaveState(u_prev=u_p, u_curr=u_c, v_prev=v_p, v_curr=v_c, n=1)

    c = coefficients(grid.alpha, grid.M - 1).coeffs
    M = grid.M

    def frac_quad(w):
        # brute-force double sum  sum_j conj(w_j) (Delta_h^alpha w)_j
        total = 0.0
        for j in range(M):
            acc = 0.0
            for k in range(M):
                acc += c[abs(j - k)] * w[k]
            total += (np.conj(w[j]) * acc).real
        return total

    kin = (grid.gamma * grid.h / (4 * grid.h ** grid.alpha)) * (
        frac_quad(u_c) + frac_quad(u_p) + frac_quad(v_c) + frac_quad(v_p))
    pot = (np.sum(np.abs(u_p) ** 2 * np.abs(u_c) ** 2)
           + np.sum(np.abs(v_p) ** 2 * np.abs(v_c) ** 2)
           + grid.beta * np.sum(np.abs(u_p) ** 2 * np.abs(v_c) ** 2
                                + np.abs(v_p) ** 2 * np.abs(u_c) ** 2))
    ref = kin - 0.25 * grid.rho * grid.h * pot
    assert energy(state, grid) == pytest.approx(ref, rel=1e-12)


def test_evolve_zero_data_zero_trajectory():
    grid = small_grid(M=16, N=2)
    res = evolve(grid, np.zeros(16), solver_config=TIGHT, startup_config=TIGHT)
    assert np.allclose(res.final_state.u_curr, 0.0)
    assert np.all(res.conservation.Q1 == 0.0)


def test_evolve_conserves_mass_and_energy():
    grid = GridSpec(a=-20, b=20, M=128, N=40, t_final=0.4, alpha=1.5, rho=2.0)
    res = evolve(grid, soliton(grid),
                 solver_config=SolverConfig(omega=0.5, tol=1e-14),
                 startup_config=SolverConfig(omega=0.5, tol=1e-14))
    assert np.max(res.conservation.rel_err_Q1) <= 1e-12
    assert np.max(res.conservation.rel_err_E) <= 1e-10


def test_evolve_aborts_on_solver_failure():
    grid = small_grid(M=64, N=5)
    bad = SolverConfig(kind="gmres", tol=1e-10, max_it=1)
    with pytest.raises(RuntimeError, match="time level"):
        evolve(grid, soliton(grid), solver_config=bad, startup_config=TIGHT)


def test_evolve_snapshots_stride():
    grid = small_grid(M=32, N=10)
    res = evolve(grid, soliton(grid), solver_config=TIGHT,
                 startup_config=TIGHT, snapshot_stride=5)
    indices = [s[0] for s in res.snapshots]
    assert indices == [0, 5, 10]
