"""Symmetric Toeplitz and circulant matrices with FFT-based fast paths.

The Toeplitz matrix is stored by its first column (already scaled by
mu = gamma*tau/h^alpha); matrix-vector products use circulant embedding of
power-of-two length.  Circulant approximations (Strang, T. Chan, R. Chan,
windowed kernels, superoptimal) are diagonalized once by a forward FFT and
cache their real eigenvalues.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .fracdiff import FracCoeffs, theta_constants

__all__ = [
    "ToeplitzSym",
    "CirculantSym",
    "CirculantKind",
    "toeplitz_from_coeffs",
    "toeplitz_matvec",
    "strang_circulant",
    "variant_circulant",
    "circulant_shifted_block_solve",
    "toeplitz_eig_interval",
    "circulant_eig_interval",
]

_EIG_IMAG_TOL = 1e-12


def _embedding_length(M: int) -> int:
    n = 1
    while n < 2 * M:
        n *= 2
    return n


@dataclass
class ToeplitzSym:
    """Symmetric Toeplitz matrix represented by its first column."""

    first_col: np.ndarray
    _embed_fft: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.first_col = np.asarray(self.first_col, dtype=float)
        M = self.dim
        L = _embedding_length(M)
        embed = np.zeros(L)
        embed[:M] = self.first_col
        embed[L - M + 1:] = self.first_col[1:][::-1]
        self._embed_fft = np.fft.rfft(embed)

    @property
    def dim(self) -> int:
        return len(self.first_col)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return toeplitz_matvec(self, x)

    def dense(self) -> np.ndarray:
        from scipy.linalg import toeplitz
        return toeplitz(self.first_col)


def toeplitz_from_coeffs(coeffs: FracCoeffs, M: int, mu: float) -> ToeplitzSym:
    """Build T with first column mu * c_0..c_{M-1}."""
    if len(coeffs) < M:
        raise ValueError(f"need at least {M} coefficients, got {len(coeffs)}")
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return ToeplitzSym(first_col=mu * coeffs.coeffs[:M])


def toeplitz_matvec(T: ToeplitzSym, x: np.ndarray) -> np.ndarray:
    """T @ x by circulant embedding, O(M log M)."""
    x = np.asarray(x)
    M = T.dim
    if x.shape != (M,):
        raise ValueError(f"expected vector of length {M}, got shape {x.shape}")
    L = _embedding_length(M)
    if np.iscomplexobj(x):
        return toeplitz_matvec(T, x.real) + 1j * toeplitz_matvec(T, x.imag)
    xpad = np.zeros(L)
    xpad[:M] = x
    y = np.fft.irfft(T._embed_fft * np.fft.rfft(xpad), n=L)
    return y[:M]


@dataclass
class CirculantSym:
    """Symmetric circulant matrix with cached real DFT eigenvalues."""

    first_col: np.ndarray
    eigs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.first_col = np.asarray(self.first_col, dtype=float)
        M = self.dim
        if M > 1 and not np.allclose(self.first_col[1:], self.first_col[1:][::-1]):
            raise ValueError("first column does not encode a symmetric circulant")
        lam = np.fft.fft(self.first_col)
        scale = max(np.linalg.norm(self.first_col), 1.0)
        resid = np.max(np.abs(lam.imag))
        if resid > _EIG_IMAG_TOL * scale:
            raise ValueError(
                f"circulant eigenvalues not real: imag residue {resid:.3e}")
        self.eigs = lam.real.copy()

    @property
    def dim(self) -> int:
        return len(self.first_col)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.fft.ifft(self.eigs * np.fft.fft(x)).real if not np.iscomplexobj(x) \
            else np.fft.ifft(self.eigs * np.fft.fft(x))

    def dense(self) -> np.ndarray:
        from scipy.linalg import circulant
        return circulant(self.first_col)


def strang_circulant(T: ToeplitzSym) -> CirculantSym:
    """Strang approximation: copy the central band, zero at offset M/2."""
    M = T.dim
    if M % 2 != 0:
        raise ValueError(f"Strang circulant requires even M, got {M}")
    t = T.first_col
    col = np.empty(M)
    half = M // 2
    col[:half] = t[:half]
    col[half] = 0.0
    col[half + 1:] = t[1:half][::-1]
    return CirculantSym(first_col=col)


class CirculantKind(enum.Enum):
    STRANG = "strang"
    T_CHAN = "tchan"
    R_CHAN = "rchan"
    MODIFIED_DIRICHLET = "modified-dirichlet"
    VON_HANN = "von-hann"
    HAMMING = "hamming"
    SUPEROPTIMAL = "superoptimal"


def _kernel_weights(kind: CirculantKind, M: int) -> np.ndarray:
    """Weight rho(j), j = 0..M-1, defining sigma_k = rho(k) t_k + rho(M-k) t_{M-k}."""
    j = np.arange(M, dtype=float)
    half = M / 2.0
    if kind is CirculantKind.T_CHAN:
        return 1.0 - j / M
    if kind is CirculantKind.R_CHAN:
        return np.ones(M)
    if kind is CirculantKind.STRANG:
        return np.where(j < half, 1.0, 0.0)
    if kind is CirculantKind.MODIFIED_DIRICHLET:
        w = np.where(j < half, 1.0, 0.0)
        w[j == half] = 0.5
        return w
    if kind is CirculantKind.VON_HANN:
        return np.where(j <= half, 0.5 * (1.0 + np.cos(2.0 * np.pi * j / M)), 0.0)
    if kind is CirculantKind.HAMMING:
        return np.where(j <= half, 0.54 + 0.46 * np.cos(2.0 * np.pi * j / M), 0.0)
    raise ValueError(f"unknown circulant kind {kind}")


def _diag_sums_of_square(t: np.ndarray) -> np.ndarray:
    """Plain diagonal sums s_d = sum_j (T^2)_{j+d, j}, d = 0..M-1, in O(M log M).

    With t the first column of symmetric Toeplitz T:
      s_d = (M-d) (t*t)_d + 2 [(M-d) corr1_d - corr2_d],
    where (t*t) is convolution, corr1_d = sum_{v>=1} t_v t_{v+d}, and
    corr2_d = sum_{v>=1} v t_v t_{v+d}.
    """
    from scipy.signal import fftconvolve
    M = len(t)
    d = np.arange(M, dtype=float)
    conv = fftconvolve(t, t)[:M]
    corr_full = fftconvolve(t, t[::-1])[M - 1:]          # sum_{v>=0} t_v t_{v+d}
    corr1 = corr_full - t[0] * t
    w = np.arange(M, dtype=float) * t
    corr2 = fftconvolve(t, w[::-1])[M - 1:]              # sum_{v>=0} v t_v t_{v+d}
    return (M - d) * conv + 2.0 * ((M - d) * corr1 - corr2)


def _tchan_of_square(T: ToeplitzSym) -> np.ndarray:
    """First column of the Frobenius-optimal circulant of T @ T."""
    s = _diag_sums_of_square(T.first_col)
    M = T.dim
    col = np.empty(M)
    col[0] = s[0] / M
    col[1:] = (s[1:] + s[1:][::-1]) / M
    return col


def variant_circulant(T: ToeplitzSym, kind: CirculantKind) -> CirculantSym:
    """Named circulant approximation of T."""
    M = T.dim
    if M < 4:
        raise ValueError(f"circulant variants require M >= 4, got {M}")
    if kind is CirculantKind.SUPEROPTIMAL:
        num = CirculantSym(first_col=_tchan_of_square(T))
        den = variant_circulant(T, CirculantKind.T_CHAN)
        eigs = num.eigs / den.eigs
        col = np.fft.ifft(eigs).real
        col[1:] = 0.5 * (col[1:] + col[1:][::-1])  # symmetrize roundoff
        return CirculantSym(first_col=col)
    rho = _kernel_weights(kind, M)
    t = T.first_col
    col = np.empty(M)
    col[0] = rho[0] * t[0]
    k = np.arange(1, M)
    col[1:] = rho[k] * t[k] + rho[M - k] * t[M - k]
    return CirculantSym(first_col=col)


def circulant_shifted_block_solve(
    C: CirculantSym | np.ndarray,
    omega_hat: float,
    r1: np.ndarray,
    r2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise Fourier-domain solve of [[w I, L], [-L, w I]] x = r.

    ``C`` may be the circulant itself or its eigenvalue vector Lambda; r1, r2
    are Fourier-domain vectors.
    """
    if omega_hat <= 0:
        raise ValueError(f"omega_hat must be positive, got {omega_hat}")
    lam = C.eigs if isinstance(C, CirculantSym) else np.asarray(C)
    x2 = (r2 + lam * r1 / omega_hat) / (omega_hat + lam * lam / omega_hat)
    x1 = (r1 - lam * x2) / omega_hat
    return x1, x2


def toeplitz_eig_interval(alpha: float, mu: float, M: int) -> tuple[float, float]:
    """Open interval containing every eigenvalue of T (valid for M >= 4).

    Expressed through mu and M only: the analytical bounds
    2*gamma*tau*theta/(b-a)^alpha and (2*gamma*tau/h^alpha)[c_0^* - theta h^alpha/(b-a)^alpha]
    reduce to 2*mu*theta/(M+1)^alpha and 2*mu*[c_0^* - theta/(M+1)^alpha].
    """
    theta, _ = theta_constants(alpha)
    c0_star = gamma_fn(alpha + 1.0) / gamma_fn(alpha / 2.0 + 1.0) ** 2
    lo = 2.0 * mu * theta / (M + 1.0) ** alpha
    hi = 2.0 * mu * (c0_star - theta / (M + 1.0) ** alpha)
    return lo, hi


def circulant_eig_interval(alpha: float, mu: float, M: int) -> tuple[float, float]:
    """Open interval containing every eigenvalue of the Strang circulant (M >= 8 even)."""
    theta, _ = theta_constants(alpha)
    c0_star = gamma_fn(alpha + 1.0) / gamma_fn(alpha / 2.0 + 1.0) ** 2
    lo = 2.0 ** (alpha + 1.0) * mu * theta / (M + 1.0) ** alpha
    hi = 2.0 * mu * (c0_star - 2.0 ** alpha * theta / (M + 1.0) ** alpha)
    return lo, hi
