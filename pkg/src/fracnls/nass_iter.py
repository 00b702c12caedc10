"""Alternating normal/anti-symmetric splitting iteration for R x = f.

One sweep solves the two shifted half-systems

    (w I + Tblk) x^{k+1/2} = (w I - Dblk) x^k + f
    (w I + Dblk) x^{k+1}   = (w I - Tblk) x^{k+1/2} + f

with Tblk = [[I, T], [-T, I]] and Dblk = [[0, -D], [D, 0]].  The iteration
converges unconditionally for any w > 0 with contraction bound

    sigma(w) = max_lambda sqrt(((w-1)^2 + lambda^2) / ((w+1)^2 + lambda^2))

over the eigenvalues of T, minimized at w* = sqrt(lambda_max^2 + 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .blocksys import BlockSystem, apply_R
from .precond import InnerSolveError, default_circulant, solve_normal_block
from .structured import CirculantKind, ToeplitzSym, toeplitz_matvec

__all__ = [
    "NassParams",
    "InnerSolveConfig",
    "ExtentMethod",
    "nass_solve",
    "nass_sweep",
    "sigma_bound",
    "optimal_omega",
    "lambda_extents",
    "estimate_contraction",
]


@dataclass(frozen=True)
class NassParams:
    omega: float
    tol: float = 1e-8
    max_iters: int = 100_000

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not (0 < self.tol < 1):
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")


@dataclass(frozen=True)
class InnerSolveConfig:
    """Inner CG settings for the first half-step's normal-block solve."""

    tol_factor: float = 1e-2   # inner rtol = tol_factor * outer tol, capped below
    tol_cap: float = 1e-14
    maxiter: int = 500
    circulant: CirculantKind = CirculantKind.STRANG


def nass_sweep(
    sys: BlockSystem,
    omega: float,
    x: np.ndarray,
    f: np.ndarray,
    C,
    inner_tol: float,
    inner_maxiter: int,
) -> np.ndarray:
    """One full two-half-step sweep starting from x."""
    M = sys.T.dim
    d = sys.D.d
    wh = omega + 1.0
    x1, x2 = x[:M], x[M:]
    # rhs of the first half-step: (w I - Dblk) x + f
    r1 = omega * x1 + d * x2 + f[:M]
    r2 = omega * x2 - d * x1 + f[M:]
    # factored solve of [[wh I, T], [-T, wh I]]
    y2 = r2 + toeplitz_matvec(sys.T, r1) / wh
    y2 = solve_normal_block(sys.T, C, wh, y2, tol=inner_tol, maxiter=inner_maxiter)
    y1 = (r1 - toeplitz_matvec(sys.T, y2)) / wh
    # rhs of the second half-step: (w I - Tblk) y + f
    s1 = (omega - 1.0) * y1 - toeplitz_matvec(sys.T, y2) + f[:M]
    s2 = toeplitz_matvec(sys.T, y1) + (omega - 1.0) * y2 + f[M:]
    # direct solve of [[w I, -D], [D, w I]]
    det = omega * omega + d * d
    z1 = (omega * s1 + d * s2) / det
    z2 = (omega * s2 - d * s1) / det
    return np.concatenate([z1, z2])


def nass_solve(
    sys: BlockSystem,
    params: NassParams,
    x0: np.ndarray | None = None,
    inner: InnerSolveConfig | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Run the splitting iteration until the true block residual meets tol.

    Returns (x, history) where history[k] is the relative residual after k
    sweeps (history[0] is the initial one).  Raises InnerSolveError on inner
    CG breakdown; outer non-convergence raises RuntimeError.
    """
    inner = inner or InnerSolveConfig()
    M = sys.T.dim
    f = sys.f
    x = np.zeros(2 * M) if x0 is None else np.asarray(x0, dtype=float).copy()
    fnorm = np.linalg.norm(f)
    if fnorm == 0.0:
        fnorm = 1.0
    C = default_circulant(sys.T, inner.circulant)
    inner_tol = max(inner.tol_factor * params.tol, inner.tol_cap)
    history = [float(np.linalg.norm(f - apply_R(sys, x)) / fnorm)]
    if history[0] <= params.tol:
        return x, history
    for _ in range(params.max_iters):
        x = nass_sweep(sys, params.omega, x, f, C, inner_tol, inner.maxiter)
        relres = float(np.linalg.norm(f - apply_R(sys, x)) / fnorm)
        history.append(relres)
        if relres <= params.tol:
            return x, history
    raise RuntimeError(
        f"splitting iteration did not reach tol={params.tol} within "
        f"{params.max_iters} sweeps (last relres {history[-1]:.3e})")


def sigma_bound(omega: float, eigs_T) -> float:
    """Contraction-factor bound over the supplied eigenvalues of T."""
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    lam = np.asarray(eigs_T, dtype=float)
    if lam.size == 0:
        raise ValueError("eigs_T must be nonempty")
    if np.any(lam <= 0):
        raise ValueError("eigenvalues of T must be positive")
    vals = np.sqrt(((omega - 1.0) ** 2 + lam ** 2) / ((omega + 1.0) ** 2 + lam ** 2))
    return float(np.max(vals))


def optimal_omega(lambda_max: float) -> float:
    """Quasi-optimal parameter w* = sqrt(lambda_max^2 + 1)."""
    if lambda_max <= 0:
        raise ValueError(f"lambda_max must be positive, got {lambda_max}")
    return math.sqrt(lambda_max ** 2 + 1.0)


class ExtentMethod(enum.Enum):
    POWER = "power"
    DENSE = "dense"
    GERSHGORIN_BOUND = "gershgorin"


_DENSE_CAP = 1600


def lambda_extents(
    T: ToeplitzSym,
    method: ExtentMethod = ExtentMethod.POWER,
    alpha: float | None = None,
    tol: float = 1e-6,
    maxiter: int = 20_000,
) -> tuple[float, float]:
    """Extremal eigenvalues of the SPD Toeplitz matrix T.

    POWER runs power iteration on T and on (lmax_hat I - T); DENSE is exact
    for M <= 1600; GERSHGORIN_BOUND returns interval endpoints from the row
    sums, falling back to the analytical lower bound (needs ``alpha``) when
    the Gershgorin lower endpoint is nonpositive.
    """
    M = T.dim
    t = T.first_col
    if method is ExtentMethod.DENSE:
        if M > _DENSE_CAP:
            raise ValueError(f"dense extents capped at M={_DENSE_CAP}, got {M}")
        w = np.linalg.eigvalsh(T.dense())
        return float(w[0]), float(w[-1])
    if method is ExtentMethod.GERSHGORIN_BOUND:
        off = 2.0 * np.sum(np.abs(t[1:]))
        upper = float(t[0] + off)
        lower = float(t[0] - off)
        if lower <= 0:
            if alpha is None:
                raise ValueError(
                    "Gershgorin lower endpoint nonpositive; pass alpha for the "
                    "analytical fallback")
            from .structured import toeplitz_eig_interval
            from scipy.special import gamma as _g
            mu = t[0] / (_g(alpha + 1.0) / _g(alpha / 2.0 + 1.0) ** 2)
            lower = toeplitz_eig_interval(alpha, mu, M)[0]
        return lower, upper
    # power iteration
    lmax = _power_largest(lambda v: toeplitz_matvec(T, v), M, tol, maxiter)
    shift = 1.01 * lmax
    gap = _power_largest(lambda v: shift * v - toeplitz_matvec(T, v), M, tol, maxiter)
    return float(shift - gap), float(lmax)


def _power_largest(matvec, n: int, tol: float, maxiter: int) -> float:
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = matvec(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise RuntimeError(f"power iteration stagnated after {maxiter} steps")


def estimate_contraction(
    sys: BlockSystem,
    omega: float,
    restarts: int = 5,
    iters: int = 300,
    inner: InnerSolveConfig | None = None,
    seed: int = 0,
) -> float:
    """Estimate the spectral radius of the error-propagation map.

    Runs power iteration on e -> (one sweep with f = 0) e with several random
    restarts; keeps everything at O(iters * M log M).
    """
    inner = inner or InnerSolveConfig()
    M = sys.T.dim
    C = default_circulant(sys.T, inner.circulant)
    zero = np.zeros(2 * M)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        e = rng.standard_normal(2 * M)
        e /= np.linalg.norm(e)
        rho = 0.0
        for _ in range(iters):
            e_new = nass_sweep(sys, omega, e, zero, C, 1e-14, inner.maxiter)
            rho_new = np.linalg.norm(e_new)
            if rho_new == 0.0:
                rho = 0.0
                break
            e = e_new / rho_new
            if abs(rho_new - rho) <= 1e-8 * rho_new:
                rho = rho_new
                break
            rho = rho_new
        best = max(best, rho)
    return float(best)
