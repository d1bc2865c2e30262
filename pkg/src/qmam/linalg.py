"""Dense complex Hermitian kernels with explicit accuracy contracts.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every kernel whose
exact result is Hermitian re-symmetrizes its output via ``(A + A*)/2`` so that
rounding drift never breaks a downstream PSD check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 2.0**-40
UNITARY_TOL = 2.0**-35
DEFAULT_ETA = 2.0**-30

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class LinalgError(ValueError):
    """Raised when an operand violates a kernel's precondition."""


class ConvergenceError(LinalgError):
    """Raised when a decomposition cannot meet its residual contract."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpectralDecomposition:
    unitary: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]

    def reconstruct(self) -> np.ndarray:
        u = self.unitary
        return hermitize((u * self.eigenvalues) @ u.conj().T)


@dataclass(frozen=True)
class DimTriple:
    """Dimensions of the coin, first-message and second-message registers."""

    dW: int
    dY: int
    dX: int = 2

    def __post_init__(self):
        if self.dX != 2:
            raise LinalgError("the coin register must be two-dimensional")
        if self.dW < 1 or self.dY < 1:
            raise LinalgError(f"dimensions must be positive, got dW={self.dW}, dY={self.dY}")

    @property
    def N(self) -> int:
        return self.dX * self.dW * self.dY

    @property
    def M(self) -> int:
        return self.dW


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise LinalgError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermitian_defect(a) <= tol


def _require_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = as_matrix(h)
    defect = hermitian_defect(h)
    # relative to scale, so large well-formed operators are not rejected by rounding
    scale = max(1.0, float(np.max(np.abs(h))))
    if defect > tol * scale:
        raise LinalgError(f"matrix is not Hermitian (max |A - A*| = {defect:.3e})")
    return hermitize(h)


def inner_product(a, b) -> complex:
    """Hilbert-Schmidt inner product ``Tr(A* B)``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise LinalgError(f"incompatible operands: {a.shape} vs {b.shape}")
    return complex(np.sum(a.conj() * b))


def tensor(a, b) -> np.ndarray:
    """Kronecker product with the left factor as the slowest index."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(a, dims: Sequence[int], traced_index: int) -> np.ndarray:
    """Trace out factor ``traced_index`` of an operator on ``dims[0] x dims[1] x ...``."""
    a = as_matrix(a)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or math.prod(dims) != a.shape[0]:
        raise LinalgError(f"factor dimensions {dims} do not multiply to {a.shape[0]}")
    if not 0 <= traced_index < len(dims):
        raise LinalgError(f"traced_index {traced_index} out of range for {len(dims)} factors")
    n = len(dims)
    t = a.reshape(dims + dims)
    t = np.trace(t, axis1=traced_index, axis2=n + traced_index)
    out = a.shape[0] // dims[traced_index]
    return t.reshape(out, out)


def spectral_norm(a) -> float:
    a = np.asarray(a, dtype=complex)
    if not np.any(a):
        return 0.0
    return float(np.linalg.norm(a, ord=2))


def lambda_min(h) -> float:
    return float(np.linalg.eigvalsh(hermitize(as_matrix(h)))[0])


def lambda_max(h) -> float:
    return float(np.linalg.eigvalsh(hermitize(as_matrix(h)))[-1])


def spectral_decomposition(h, eta: float = DEFAULT_ETA) -> SpectralDecomposition:
    """Eigendecomposition with eigenvalues sorted descending.

    Raises ``ConvergenceError`` if the reconstruction residual
    ``||H - U diag(lam) U*||`` is not below ``eta``.
    """
    h = _require_hermitian(h)
    if eta <= 0:
        raise LinalgError("eta must be positive")
    lam, u = np.linalg.eigh(h)
    lam = lam[::-1].copy()
    u = u[:, ::-1].copy()
    dec = SpectralDecomposition(u, lam)
    residual = spectral_norm(h - dec.reconstruct())
    if not residual < eta:
        raise ConvergenceError(
            f"spectral decomposition residual {residual:.3e} does not meet eta={eta:.3e}", residual
        )
    return dec


def exp_term_count(k: float, eta: float) -> int:
    return max(3 * math.ceil(k) + math.ceil(math.log2(1.0 / eta)) + 8, 16)


def matrix_exp(m, eta: float = DEFAULT_ETA, k: float | None = None) -> np.ndarray:
    """Truncated Taylor series with scaling and squaring.

    ``k`` is the promised bound ``||M|| <= k``; when omitted it is taken from
    the computed norm. The argument is scaled by ``2**-s`` until its norm is at
    most 1/2, the series is truncated after ``exp_term_count`` terms and the
    result is squared ``s`` times.
    """
    m = as_matrix(m)
    if eta <= 0:
        raise LinalgError("eta must be positive")
    norm = spectral_norm(m)
    if k is None:
        k = max(1.0, norm)
    elif norm > k * (1 + 1e-12):
        raise LinalgError(f"promise ||M|| <= k violated: ||M|| = {norm:.6g} > k = {k}")
    hermitian = is_hermitian(m, HERMITIAN_TOL * max(1.0, norm))

    squarings = 0
    if norm > 0.5:
        squarings = math.ceil(math.log2(norm / 0.5))
    scaled = m / (2.0**squarings)
    # eta is split across squarings: relative error roughly doubles per squaring
    terms = exp_term_count(min(k, 1.0), eta / 2.0**squarings)

    n = m.shape[0]
    ident = np.eye(n, dtype=complex)
    x = ident.copy()
    # Horner evaluation of sum_{j<terms} scaled^j / j!
    for j in range(terms - 1, 0, -1):
        x = ident + (scaled @ x) / j
    for _ in range(squarings):
        x = x @ x
        if hermitian:
            x = hermitize(x)
    if hermitian:
        x = hermitize(x)
    return x


def log_trace_exp(h) -> float:
    """``log Tr exp(H)`` for Hermitian ``H``, stable for large spectra."""
    h = _require_hermitian(h)
    top = lambda_max(h)
    shifted = matrix_exp(h - top * np.eye(h.shape[0]))
    return top + math.log(float(np.trace(shifted).real))


def positive_projection(h, eta: float = DEFAULT_ETA) -> tuple[np.ndarray, np.ndarray]:
    """Projection onto eigenvectors with eigenvalue strictly above ``eta``.

    Returns ``(Pi, Pi H Pi)``.
    """
    h = _require_hermitian(h)
    dec = spectral_decomposition(h)
    keep = dec.eigenvalues > eta
    v = dec.unitary[:, keep]
    proj = hermitize(v @ v.conj().T)
    positive = hermitize(proj @ h @ proj)
    return proj, positive


def inv_sqrt(q, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(R^-1, R)`` with ``R`` the positive square root of ``Q``.

    Both come from one spectral decomposition of ``Q``; ``||Q - R^2|| <= eps``
    is checked, and ``||R^-1|| <= 1/eps`` is enforced whenever
    ``lambda_min(Q) >= 2 eps``.
    """
    q = _require_hermitian(q)
    lam, u = np.linalg.eigh(q)
    if lam[0] <= 0:
        raise LinalgError(f"Q is not positive definite (lambda_min = {lam[0]:.3e})")
    root = np.sqrt(lam)
    r = hermitize((u * root) @ u.conj().T)
    r_inv = hermitize((u / root) @ u.conj().T)
    residual = spectral_norm(q - r @ r)
    if residual > eps:
        raise ConvergenceError(f"||Q - R^2|| = {residual:.3e} exceeds eps={eps:.3e}", residual)
    if lam[0] >= 2 * eps and spectral_norm(r_inv) > 1 / eps:
        raise LinalgError("||R^-1|| exceeds 1/eps")
    return r_inv, r


def pauli_twirl(p, dz: int) -> np.ndarray:
    """``P + sum_k (s_k x 1) P (s_k x 1)`` over the three Pauli operators on the coin."""
    p = as_matrix(p)
    out = p.copy()
    ident = np.eye(dz)
    for s in (PAULI_X, PAULI_Y, PAULI_Z):
        u = tensor(s, ident)
        out = out + u @ p @ u
    return out
