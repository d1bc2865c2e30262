"""The single-coin Arthur-Merlin semidefinite program.

Index convention (fixed everywhere, including the file format): the coin
index is slowest, then W, then Y, so the flat index of ``|a, w, y>`` is
``a*dW*dY + w*dY + y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import linalg
from .linalg import DimTriple, LinalgError

DEFAULT_PADDING = Fraction(1, 64)
DEFAULT_TOL = 1e-8
MEASUREMENT_TOL = 1e-9
MAX_QINV_NORM = 64.0
# accuracy demanded of R in ||Q - R^2||
ROOT_EPS = 1e-12


class SdpError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolInstance:
    dims: DimTriple
    P0: np.ndarray
    P1: np.ndarray
    padding_eps: Fraction | None = None

    def __post_init__(self):
        n = self.dims.dW * self.dims.dY
        for name, p in (("P0", self.P0), ("P1", self.P1)):
            if p.shape != (n, n):
                raise SdpError(f"{name} must be {n}x{n} on W (x) Y, got {p.shape}")
            if not linalg.is_hermitian(p, MEASUREMENT_TOL):
                raise SdpError(f"{name} is not Hermitian")
            lam = np.linalg.eigvalsh(linalg.hermitize(p))
            if lam[0] < -MEASUREMENT_TOL or lam[-1] > 1 + MEASUREMENT_TOL:
                raise SdpError(f"{name} is not a measurement operator: spectrum in [{lam[0]:.3g}, {lam[-1]:.3g}]")

    @property
    def padded(self) -> bool:
        return self.padding_eps is not None


@dataclass(frozen=True)
class SdpInstance:
    dims: DimTriple
    Q: np.ndarray
    Rinv: np.ndarray
    R: np.ndarray
    qinv_norm: float

    @property
    def N(self) -> int:
        return self.dims.N

    @property
    def M(self) -> int:
        return self.dims.M


@dataclass
class PrimalCandidate:
    X: np.ndarray
    sigma: np.ndarray


@dataclass
class DualCandidate:
    Y: np.ndarray


@dataclass
class ValidationReport:
    feasible: bool
    objective: float
    worst_violation: float
    details: dict = field(default_factory=dict)


def apply_soundness_padding(inst: ProtocolInstance, eps=DEFAULT_PADDING) -> ProtocolInstance:
    """Make Arthur accept outright with probability ``4 eps``.

    ``P_a -> 4 eps 1 + (1 - 4 eps) P_a``; the optimal value maps ``v -> 4 eps + (1 - 4 eps) v``.
    """
    if inst.padded:
        raise SdpError("instance is already padded")
    eps = Fraction(eps)
    if not 0 <= eps <= Fraction(1, 4):
        raise SdpError(f"padding eps must lie in [0, 1/4], got {eps}")
    c = float(4 * eps)
    ident = np.eye(inst.P0.shape[0])
    p0 = c * ident + (1 - c) * inst.P0
    p1 = c * ident + (1 - c) * inst.P1
    return replace(inst, P0=p0, P1=p1, padding_eps=eps)


def unpad_value(value: float, eps) -> float:
    c = float(4 * Fraction(eps))
    return (value - c) / (1 - c)


def pad_value(value: float, eps) -> float:
    c = float(4 * Fraction(eps))
    return c + (1 - c) * value


def build_q(inst: ProtocolInstance) -> np.ndarray:
    e0 = np.diag([1.0, 0.0])
    e1 = np.diag([0.0, 1.0])
    return linalg.hermitize(0.5 * linalg.tensor(e0, inst.P0) + 0.5 * linalg.tensor(e1, inst.P1))


def assemble(inst: ProtocolInstance, max_qinv_norm: float = MAX_QINV_NORM) -> SdpInstance:
    q = build_q(inst)
    lam = np.linalg.eigvalsh(q)
    if lam[0] <= 0 or 1 / lam[0] > max_qinv_norm:
        raise SdpError(
            f"the algorithm requires Q invertible with ||Q^-1|| <= {max_qinv_norm:g}; "
            f"lambda_min(Q) = {lam[0]:.3e} (apply soundness padding first)"
        )
    r_inv, r = linalg.inv_sqrt(q, ROOT_EPS)
    return SdpInstance(inst.dims, q, r_inv, r, float(1 / lam[0]))


def _check_dim(m: np.ndarray, n: int, what: str):
    if m.shape != (n, n):
        raise SdpError(f"{what} must be {n}x{n}, got {m.shape}")


def phi(sdp: SdpInstance, X) -> np.ndarray:
    """``Tr_Y(Q^-1/2 X Q^-1/2)``, an operator on X (x) W."""
    X = np.asarray(X, dtype=complex)
    _check_dim(X, sdp.N, "X")
    d = sdp.dims
    return linalg.partial_trace(sdp.Rinv @ X @ sdp.Rinv, [2 * d.dW, d.dY], 1)


def phi_adjoint(sdp: SdpInstance, Y) -> np.ndarray:
    """``Q^-1/2 (Y (x) 1_Y) Q^-1/2``."""
    Y = np.asarray(Y, dtype=complex)
    d = sdp.dims
    _check_dim(Y, 2 * d.dW, "Y")
    return sdp.Rinv @ linalg.tensor(Y, np.eye(d.dY)) @ sdp.Rinv


def trace_coin(a: np.ndarray, dims: DimTriple) -> np.ndarray:
    """``Tr_X`` of an operator on X (x) W."""
    return linalg.partial_trace(a, [2, dims.dW], 0)


def _min_eig(a: np.ndarray) -> float:
    return linalg.lambda_min(a)


def validate_primal(sdp: SdpInstance, cand: PrimalCandidate, tol: float = DEFAULT_TOL) -> ValidationReport:
    d = sdp.dims
    X = np.asarray(cand.X, dtype=complex)
    sigma = np.asarray(cand.sigma, dtype=complex)
    _check_dim(X, sdp.N, "X")
    _check_dim(sigma, d.M, "sigma")
    herm = max(linalg.hermitian_defect(X), linalg.hermitian_defect(sigma))
    slack = linalg.tensor(np.eye(2), sigma) - phi(sdp, X)
    checks = {
        "hermitian": -herm,
        "constraint": _min_eig(slack),
        "X_psd": _min_eig(X),
        "sigma_psd": _min_eig(sigma),
        "sigma_trace": -abs(float(np.trace(sigma).real) - 1.0),
    }
    worst = min(checks.values())
    return ValidationReport(worst >= -tol, float(np.trace(X).real), worst, checks)


def validate_dual(sdp: SdpInstance, cand: DualCandidate, tol: float = DEFAULT_TOL) -> ValidationReport:
    d = sdp.dims
    Y = np.asarray(cand.Y, dtype=complex)
    _check_dim(Y, 2 * d.dW, "Y")
    checks = {
        "hermitian": -linalg.hermitian_defect(Y),
        "constraint": _min_eig(phi_adjoint(sdp, Y)) - 1.0,
        "Y_psd": _min_eig(Y),
    }
    worst = min(checks.values())
    objective = linalg.spectral_norm(trace_coin(linalg.hermitize(Y), d))
    return ValidationReport(worst >= -tol, objective, worst, checks)


def validate_dual_unscaled(Q, dims: DimTriple, cand: DualCandidate, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Dual check in the original variables, ``Y (x) 1_Y >= Q``; needs no inverse of Q."""
    Y = np.asarray(cand.Y, dtype=complex)
    _check_dim(Y, 2 * dims.dW, "Y")
    Q = np.asarray(Q, dtype=complex)
    _check_dim(Q, dims.N, "Q")
    checks = {
        "hermitian": -linalg.hermitian_defect(Y),
        "constraint": _min_eig(linalg.tensor(Y, np.eye(dims.dY)) - Q),
        "Y_psd": _min_eig(Y),
    }
    worst = min(checks.values())
    objective = linalg.spectral_norm(trace_coin(linalg.hermitize(Y), dims))
    return ValidationReport(worst >= -tol, objective, worst, checks)


def inflate_primal(sdp: SdpInstance, cand: PrimalCandidate) -> PrimalCandidate:
    """Fill the constraint slack so that ``Phi(X) = 1_X (x) sigma`` holds with equality.

    The added term ``R (S (x) 1_Y / dY) R`` is PSD, so ``Tr(X)`` cannot decrease.
    """
    d = sdp.dims
    slack = linalg.hermitize(linalg.tensor(np.eye(2), cand.sigma) - phi(sdp, cand.X))
    lam, u = np.linalg.eigh(slack)
    slack = (u * np.clip(lam, 0, None)) @ u.conj().T
    extra = sdp.R @ linalg.tensor(slack, np.eye(d.dY) / d.dY) @ sdp.R
    return PrimalCandidate(linalg.hermitize(cand.X + extra), cand.sigma)


def strategy_value(inst: ProtocolInstance, rho0, rho1, tol: float = 1e-9) -> float:
    """Acceptance probability ``(<P0, rho0> + <P1, rho1>)/2`` of a Merlin strategy.

    The two post-coin states must agree on W; a mismatch means Merlin would
    have touched W after the coin, and is rejected.
    """
    d = inst.dims
    n = d.dW * d.dY
    rho0 = np.asarray(rho0, dtype=complex)
    rho1 = np.asarray(rho1, dtype=complex)
    for name, rho in (("rho0", rho0), ("rho1", rho1)):
        _check_dim(rho, n, name)
        if abs(np.trace(rho).real - 1) > tol or _min_eig(rho) < -tol or linalg.hermitian_defect(rho) > tol:
            raise SdpError(f"{name} is not a density operator")
    gap = linalg.spectral_norm(
        linalg.partial_trace(rho0, [d.dW, d.dY], 1) - linalg.partial_trace(rho1, [d.dW, d.dY], 1)
    )
    if gap > tol:
        raise SdpError(f"the two states must agree on W: ||Tr_Y(rho0) - Tr_Y(rho1)|| = {gap:.3e}")
    value = 0.5 * linalg.inner_product(inst.P0, rho0).real + 0.5 * linalg.inner_product(inst.P1, rho1).real
    return float(value)


def trivial_dual(sdp: SdpInstance) -> DualCandidate:
    """``Y = 1/2``; feasible whenever every ``P_a <= 1``, with objective 1."""
    return DualCandidate(0.5 * np.eye(2 * sdp.dims.dW, dtype=complex))

