"""Unrestarted GMRES with right preconditioning, plus Arnoldi Ritz values.

Right preconditioning solves A M^{-1} y = b and recovers x = M^{-1} y, so the
least-squares residual tracked by the Givens rotations is the true residual
of A x = b; the stopping rule therefore monitors the true relative residual.
Modified Gram-Schmidt with one threshold-triggered reorthogonalization pass.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveReport", "gmres", "arnoldi_ritz"]

_REORTH_THRESHOLD = 1e-8


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    final_relres: float
    residual_history: list[float] = field(default_factory=list)
    wall_time: float = 0.0


def gmres(
    apply_A,
    b: np.ndarray,
    apply_M=None,
    tol: float = 1e-6,
    max_it: int = 3000,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Full (unrestarted) GMRES on A x = b with optional right preconditioner.

    ``apply_A`` and ``apply_M`` are callables v -> A v and r -> M^{-1} r.
    Non-convergence is reported, never raised; a happy breakdown returns the
    converged solution.
    """
    t0 = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = len(b)
    if apply_M is None:
        apply_M = lambda v: v
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    r = b - apply_A(x) if x.any() else b.copy()
    beta = np.linalg.norm(r)
    history = [float(beta / bnorm)]
    if history[0] <= tol:
        return x, SolveReport(0, True, history[0], history,
                              time.perf_counter() - t0)

    V = np.empty((max_it + 1, n))
    V[0] = r / beta
    H = np.zeros((max_it + 1, max_it))
    cs = np.zeros(max_it)
    sn = np.zeros(max_it)
    g = np.zeros(max_it + 1)
    g[0] = beta

    k = 0
    converged = False
    for k in range(max_it):
        # copy: the operator may return its argument (e.g. the identity map),
        # and the MGS updates below must not write into the stored basis
        w = np.array(apply_A(apply_M(V[k])), dtype=float)
        wnorm0 = np.linalg.norm(w)
        # modified Gram-Schmidt
        for j in range(k + 1):
            hjk = V[j] @ w
            H[j, k] = hjk
            w -= hjk * V[j]
        # one reorthogonalization pass when cancellation is severe
        if np.linalg.norm(w) < _REORTH_THRESHOLD * wnorm0:
            for j in range(k + 1):
                corr = V[j] @ w
                H[j, k] += corr
                w -= corr * V[j]
        hk1 = np.linalg.norm(w)
        H[k + 1, k] = hk1
        happy = hk1 <= 1e-14 * max(wnorm0, 1.0)
        if not happy:
            V[k + 1] = w / hk1
        # apply accumulated Givens rotations to the new column
        for j in range(k):
            tmp = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = tmp
        denom = np.hypot(H[k, k], H[k + 1, k])
        cs[k] = H[k, k] / denom
        sn[k] = H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        relres = abs(g[k + 1]) / bnorm
        history.append(float(relres))
        if relres <= tol or happy:
            converged = relres <= tol or happy
            k += 1
            break
    else:
        k = max_it

    if k > 0:
        y = np.zeros(k)
        # back substitution on the triangularized Hessenberg
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
        x = x + apply_M(V[:k].T @ y)
    final = float(np.linalg.norm(b - apply_A(x)) / bnorm)
    converged = final <= tol or (converged and final <= 10.0 * tol)
    return x, SolveReport(k, bool(converged), final, history,
                          time.perf_counter() - t0)


def arnoldi_ritz(apply_A, n: int, m: int, seed: int = 0) -> np.ndarray:
    """Ritz values from an m-step Arnoldi process with a random unit start.

    Used for spectrum diagnostics when the dimension rules out a dense
    eigensolve.  Early breakdown returns the Ritz values available so far.
    """
    if m > n:
        raise ValueError(f"m={m} exceeds dimension {n}")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = np.empty((m + 1, n))
    V[0] = v
    H = np.zeros((m + 1, m))
    steps = m
    for k in range(m):
        w = np.array(apply_A(V[k]), dtype=float)
        wnorm0 = np.linalg.norm(w)
        for j in range(k + 1):
            H[j, k] = V[j] @ w
            w -= H[j, k] * V[j]
        if np.linalg.norm(w) < _REORTH_THRESHOLD * wnorm0:
            for j in range(k + 1):
                corr = V[j] @ w
                H[j, k] += corr
                w -= corr * V[j]
        hk1 = np.linalg.norm(w)
        H[k + 1, k] = hk1
        if hk1 <= 1e-14 * max(wnorm0, 1.0):
            steps = k + 1
            break
        V[k + 1] = w / hk1
    return np.linalg.eigvals(H[:steps, :steps])
