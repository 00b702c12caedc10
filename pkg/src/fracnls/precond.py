"""Splitting-induced preconditioners in factored form.

Two preconditioners for the block system R = [[I, T-D], [D-T, I]]:

* the normal/anti-symmetric (NASS) preconditioner
  F = [[wh I, T], [-T, wh I]] [[w I, -D], [D, w I]], wh = w + 1, whose
  application needs one dense-structured solve with wh I + T^2/wh (done here
  by CG with the circulant preconditioner wh I + C^2/wh), and

* the circulant-improved (CNAS) preconditioner with T replaced by a
  circulant C, applied entirely in the Fourier domain in O(M log M).

Both are applied in unscaled form; the analysis-side scalar 1/(2w) is exposed
separately for spectrum diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .blocksys import DiagonalNonneg
from .fracdiff import theta_constants
from .structured import (
    CirculantKind,
    CirculantSym,
    ToeplitzSym,
    circulant_shifted_block_solve,
    strang_circulant,
    toeplitz_matvec,
    variant_circulant,
)

__all__ = [
    "InnerSolveError",
    "CnasPrecond",
    "NassPrecond",
    "build_cnas",
    "build_nass",
    "apply_cnas",
    "apply_nass",
    "solve_normal_block",
    "dense_f_nass",
    "dense_f_cnas",
    "cnas_perturbation_bounds",
    "default_circulant",
]

_IFFT_IMAG_TOL = 1e-10


class InnerSolveError(RuntimeError):
    """Inner CG for the normal-block solve failed to converge."""


def default_circulant(T: ToeplitzSym, kind: CirculantKind = CirculantKind.STRANG
                      ) -> CirculantSym:
    """Circulant approximation of T; falls back to T. Chan when Strang needs even M."""
    if kind is CirculantKind.STRANG and T.dim % 2 != 0:
        kind = CirculantKind.T_CHAN
    if kind is CirculantKind.STRANG:
        return strang_circulant(T)
    return variant_circulant(T, kind)


def solve_normal_block(
    T: ToeplitzSym,
    C: CirculantSym,
    omega_hat: float,
    rhs: np.ndarray,
    tol: float = 1e-13,
    maxiter: int = 500,
) -> np.ndarray:
    """Solve (wh I + T^2/wh) x = rhs by CG preconditioned with (wh I + C^2/wh)."""
    M = T.dim

    def matvec(x):
        return omega_hat * x + toeplitz_matvec(T, toeplitz_matvec(T, x)) / omega_hat

    sym = omega_hat + C.eigs ** 2 / omega_hat

    def prec(x):
        return np.fft.ifft(np.fft.fft(x) / sym).real

    A = LinearOperator((M, M), matvec=matvec, dtype=float)
    Mop = LinearOperator((M, M), matvec=prec, dtype=float)
    x, info = cg(A, rhs, rtol=tol, atol=0.0, maxiter=maxiter, M=Mop)
    if info != 0:
        raise InnerSolveError(
            f"inner CG did not converge in {maxiter} iterations (info={info})")
    return x


def _anti_block_solve(d: np.ndarray, omega: float, r1: np.ndarray, r2: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Direct O(M) solve of [[w I, -D], [D, w I]] x = r."""
    det = omega * omega + d * d
    x1 = (omega * r1 + d * r2) / det
    x2 = (omega * r2 - d * r1) / det
    return x1, x2


@dataclass
class CnasPrecond:
    """Factored CNAS preconditioner [[wh I, C], [-C, wh I]] [[w I, -D], [D, w I]]."""

    omega: float
    C: CirculantSym
    D: DiagonalNonneg
    omega_hat: float = field(init=False)
    Lambda: np.ndarray = field(init=False)
    U22: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.C.dim != self.D.dim:
            raise ValueError("C and D dimension mismatch")
        self.omega_hat = self.omega + 1.0
        self.Lambda = self.C.eigs
        self.U22 = self.omega + self.D.d ** 2 / self.omega

    @property
    def dim(self) -> int:
        return 2 * self.C.dim

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_cnas(self, r)


@dataclass
class NassPrecond:
    """Factored NASS preconditioner [[wh I, T], [-T, wh I]] [[w I, -D], [D, w I]]."""

    omega: float
    T: ToeplitzSym
    D: DiagonalNonneg
    C: CirculantSym  # inner CG preconditioner
    inner_tol: float = 1e-13
    inner_maxiter: int = 500
    omega_hat: float = field(init=False)
    U22: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        self.omega_hat = self.omega + 1.0
        self.U22 = self.omega + self.D.d ** 2 / self.omega

    @property
    def dim(self) -> int:
        return 2 * self.T.dim

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_nass(self, r)


def build_cnas(
    T: ToeplitzSym,
    D: DiagonalNonneg,
    omega: float,
    kind: CirculantKind = CirculantKind.STRANG,
) -> CnasPrecond:
    """Precompute the CNAS factors for the given circulant variant."""
    return CnasPrecond(omega=omega, C=default_circulant(T, kind), D=D)


def build_nass(
    T: ToeplitzSym,
    D: DiagonalNonneg,
    omega: float,
    kind: CirculantKind = CirculantKind.STRANG,
    inner_tol: float = 1e-13,
    inner_maxiter: int = 500,
) -> NassPrecond:
    return NassPrecond(omega=omega, T=T, D=D, C=default_circulant(T, kind),
                       inner_tol=inner_tol, inner_maxiter=inner_maxiter)


def apply_cnas(P: CnasPrecond, r: np.ndarray) -> np.ndarray:
    """Solve F_CNAS x = r: two FFTs, diagonal block solve, two IFFTs, D-part."""
    M = P.C.dim
    r = np.asarray(r, dtype=float)
    if len(r) != 2 * M:
        raise ValueError(f"expected vector of length {2 * M}, got {len(r)}")
    x1 = np.fft.fft(r[:M])
    x2 = np.fft.fft(r[M:])
    x2 = x2 + P.Lambda * x1 / P.omega_hat  # x2 -= Lt21 x1, Lt21 = -Lambda/wh
    x1, x2 = _solve_fourier_pair(P, x1, x2)
    x1 = np.fft.ifft(x1)
    x2 = np.fft.ifft(x2)
    scale = max(np.linalg.norm(r), 1e-300)
    resid = max(np.max(np.abs(x1.imag)), np.max(np.abs(x2.imag)))
    if resid > _IFFT_IMAG_TOL * scale:
        raise FloatingPointError(f"unexpected imaginary residue {resid:.3e}")
    x1, x2 = x1.real, x2.real
    x2 = x2 - (P.D.d / P.omega) * x1
    x2 = x2 / P.U22
    x1 = (x1 + P.D.d * x2) / P.omega
    return np.concatenate([x1, x2])


def _solve_fourier_pair(P: CnasPrecond, x1: np.ndarray, x2: np.ndarray):
    # Ut22 x2 = x2 then x1 = (x1 - Lambda x2)/wh, componentwise
    x2 = x2 / (P.omega_hat + P.Lambda ** 2 / P.omega_hat)
    x1 = (x1 - P.Lambda * x2) / P.omega_hat
    return x1, x2


def apply_nass(P: NassPrecond, r: np.ndarray) -> np.ndarray:
    """Solve F_NASS x = r; the normal block uses circulant-preconditioned CG."""
    M = P.T.dim
    r = np.asarray(r, dtype=float)
    if len(r) != 2 * M:
        raise ValueError(f"expected vector of length {2 * M}, got {len(r)}")
    r1, r2 = r[:M], r[M:]
    x2 = r2 + toeplitz_matvec(P.T, r1) / P.omega_hat
    x2 = solve_normal_block(P.T, P.C, P.omega_hat, x2,
                            tol=P.inner_tol, maxiter=P.inner_maxiter)
    x1 = (r1 - toeplitz_matvec(P.T, x2)) / P.omega_hat
    x2 = x2 - (P.D.d / P.omega) * x1
    x2 = x2 / P.U22
    x1 = (x1 + P.D.d * x2) / P.omega
    return np.concatenate([x1, x2])


def _dense_factored(B: np.ndarray, d: np.ndarray, omega: float, scaled: bool
                    ) -> np.ndarray:
    M = len(d)
    wh = omega + 1.0
    I = np.eye(M)
    left = np.block([[wh * I, B], [-B, wh * I]])
    right = np.block([[omega * I, -np.diag(d)], [np.diag(d), omega * I]])
    F = left @ right
    if scaled:
        F /= 2.0 * omega
    return F


def dense_f_nass(T: ToeplitzSym, D: DiagonalNonneg, omega: float,
                 scaled: bool = False) -> np.ndarray:
    """Dense assembly of the NASS preconditioner (diagnostics/testing)."""
    return _dense_factored(T.dense(), D.d, omega, scaled)


def dense_f_cnas(C: CirculantSym, D: DiagonalNonneg, omega: float,
                 scaled: bool = False) -> np.ndarray:
    """Dense assembly of the CNAS preconditioner (diagnostics/testing)."""
    return _dense_factored(C.dense(), D.d, omega, scaled)


def cnas_perturbation_bounds(
    alpha: float,
    mu: float,
    M: int,
    omega: float,
    nu: float,
    eps: float | None = None,
    c0: float | None = None,
) -> dict:
    """Numerical bound evaluators for the CNAS-vs-NASS spectral comparison.

    Returns the rank budget 4*k0 and the norm bounds for the low-rank and
    small-norm parts of F_cnas^{-1} R - F_nass^{-1} R.  ``eps`` defaults to
    mu * theta_0, the largest admissible value.
    """
    theta, theta0 = theta_constants(alpha)
    if c0 is None:
        from scipy.special import gamma as _g
        c0 = _g(alpha + 1.0) / _g(alpha / 2.0 + 1.0) ** 2
    if eps is None:
        eps = mu * theta0
    k0 = int(np.ceil((mu * theta0 / eps) ** (1.0 / alpha))) + 1
    lam_c_lo = 2.0 ** (alpha + 1.0) * mu * theta / (M + 1.0) ** alpha
    denom = omega ** 2 * np.sqrt((omega + 1.0) ** 2 + lam_c_lo ** 2)
    common = 2.0 * (omega ** 2 + nu ** 2) * np.sqrt(M) / denom
    p_bound = common * mu * (c0 / 2.0 - theta / (M - 0.5) ** alpha)
    q_bound = common * eps
    return {
        "k0": k0,
        "rank": 4 * k0,
        "low_rank_norm_bound": float(p_bound),
        "small_norm_bound": float(q_bound),
        "eps": float(eps),
    }
