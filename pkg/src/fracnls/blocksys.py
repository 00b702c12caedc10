"""Complex Toeplitz-plus-diagonal systems and their real block form.

Each time level yields A u = b with A = D - T + iI (complex symmetric,
indefinite).  Writing u = y + iz and b = p + iq, the equivalent real system is

    R x = f,   R = [[I, T-D], [D-T, I]],   x = (z; y),   f = (-p; q).

R is never stored densely on the fast path; its action costs one Toeplitz
matvec per half plus diagonal work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structured import ToeplitzSym, toeplitz_matvec

__all__ = [
    "DiagonalNonneg",
    "BlockSystem",
    "assemble_rhs",
    "complex_to_block",
    "block_to_complex",
    "apply_R",
    "dense_R",
]


@dataclass(frozen=True)
class DiagonalNonneg:
    """Nonnegative diagonal matrix (attractive nonlinearity)."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if np.any(d < 0):
            raise ValueError("diagonal entries must be nonnegative")
        object.__setattr__(self, "d", d)

    @property
    def dim(self) -> int:
        return len(self.d)

    @property
    def nu(self) -> float:
        """max_j d_j."""
        return float(np.max(self.d)) if len(self.d) else 0.0


@dataclass(frozen=True)
class BlockSystem:
    """Implicit real block system R x = f of dimension 2M."""

    T: ToeplitzSym
    D: DiagonalNonneg
    f: np.ndarray

    def __post_init__(self):
        if self.T.dim != self.D.dim:
            raise ValueError("T and D dimension mismatch")
        f = np.asarray(self.f, dtype=float)
        if len(f) != 2 * self.T.dim:
            raise ValueError(f"rhs must have length {2 * self.T.dim}")
        object.__setattr__(self, "f", f)

    @property
    def dim(self) -> int:
        return 2 * self.T.dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_R(self, x)


def assemble_rhs(u_prev: np.ndarray, T: ToeplitzSym, D: DiagonalNonneg) -> np.ndarray:
    """Right-hand side b = (T - D + iI) u_prev of the level-(n+1) system.

    The three-level scheme rearranges to (D - T + iI) u_next = (T - D + iI) u_prev.
    """
    u_prev = np.asarray(u_prev, dtype=complex)
    if len(u_prev) != T.dim:
        raise ValueError(f"expected vector of length {T.dim}, got {len(u_prev)}")
    return toeplitz_matvec(T, u_prev) - D.d * u_prev + 1j * u_prev


def complex_to_block(b: np.ndarray) -> np.ndarray:
    """b = p + iq  ->  f = (-p; q)."""
    b = np.asarray(b, dtype=complex)
    return np.concatenate([-b.real, b.imag])


def block_to_complex(x: np.ndarray) -> np.ndarray:
    """x = (z; y)  ->  u = y + iz."""
    x = np.asarray(x, dtype=float)
    M = len(x) // 2
    return x[M:] + 1j * x[:M]


def apply_R(sys: BlockSystem, x: np.ndarray) -> np.ndarray:
    """[[I, T-D], [D-T, I]] x via two Toeplitz matvecs."""
    x = np.asarray(x, dtype=float)
    M = sys.T.dim
    if len(x) != 2 * M:
        raise ValueError(f"expected vector of length {2 * M}, got {len(x)}")
    x1, x2 = x[:M], x[M:]
    w = toeplitz_matvec(sys.T, x2) - sys.D.d * x2
    v = sys.D.d * x1 - toeplitz_matvec(sys.T, x1)
    return np.concatenate([x1 + w, v + x2])


def dense_R(T: ToeplitzSym, D: DiagonalNonneg) -> np.ndarray:
    """Dense assembly of R for diagnostics and small-M testing."""
    M = T.dim
    Td = T.dense()
    S = Td - np.diag(D.d)
    R = np.zeros((2 * M, 2 * M))
    R[:M, :M] = np.eye(M)
    R[M:, M:] = np.eye(M)
    R[:M, M:] = S
    R[M:, :M] = -S
    return R
