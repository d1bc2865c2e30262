"""Ground truth at desk scale.

Nothing here uses the multiplicative-weights solver. Values come from
closed forms where the marginal constraint collapses, explicit optimal
dual points for planted-no games, and a randomized search over Merlin
strategies that purify a state on W. Every strategy the search touches is
feasible, so its best value is a valid lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import linalg, sdp as sdpm
from .instances import apply_on_y, complex_gaussian, haar_unitary, purification, rng_from_seed
from .sdp import DualCandidate, ProtocolInstance, SdpInstance

STRUCTURE_TOL = 1e-9


class OracleError(ValueError):
    pass


@dataclass
class ValueBracket:
    lower: float
    upper: float
    lower_witness: tuple[np.ndarray, np.ndarray] | None = None
    upper_witness: DualCandidate | None = None
    sources: dict = field(default_factory=dict)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


def _raw_operators(inst: ProtocolInstance) -> tuple[np.ndarray, np.ndarray, Fraction]:
    eps = inst.padding_eps or Fraction(0)
    c = float(4 * eps)
    if c == 1:
        raise OracleError("padding with eps = 1/4 erases the measurement")
    n = inst.P0.shape[0]
    ident = np.eye(n)
    return (inst.P0 - c * ident) / (1 - c), (inst.P1 - c * ident) / (1 - c), eps


def planted_no_projector(inst: ProtocolInstance) -> np.ndarray | None:
    """``Pi_W`` when the raw operators are ``P0 = Pi_W (x) 1_Y`` and ``P1 = 1 - P0``, else None."""
    p0, p1, _ = _raw_operators(inst)
    d = inst.dims
    n = d.dW * d.dY
    proj = linalg.partial_trace(p0, [d.dW, d.dY], 1) / d.dY
    if linalg.spectral_norm(p0 - linalg.tensor(proj, np.eye(d.dY))) > STRUCTURE_TOL:
        return None
    if linalg.spectral_norm(proj @ proj - proj) > STRUCTURE_TOL:
        return None
    if linalg.spectral_norm(p0 + p1 - np.eye(n)) > STRUCTURE_TOL:
        return None
    return linalg.hermitize(proj)


def closed_form_value(inst: ProtocolInstance) -> float | None:
    """Optimal value when the marginal constraint trivializes, else None.

    dW = 1: the branches decouple, ``(l1(P0) + l1(P1))/2``.
    dY = 1: both branches hold the same state, ``l1((P0 + P1)/2)``.
    Planted-no: every strategy scores exactly 1/2.
    Padded instances are mapped through ``v -> 4 eps + (1 - 4 eps) v``.
    """
    p0, p1, eps = _raw_operators(inst)
    d = inst.dims
    if d.dW == 1:
        raw = 0.5 * linalg.lambda_max(p0) + 0.5 * linalg.lambda_max(p1)
    elif d.dY == 1:
        raw = linalg.lambda_max((p0 + p1) / 2)
    elif planted_no_projector(inst) is not None:
        raw = 0.5
    else:
        return None
    return sdpm.pad_value(raw, eps)


def planted_no_value(eps) -> Fraction:
    return Fraction(1, 2) + 2 * Fraction(eps)


def optimal_dual_for_planted_no(inst: ProtocolInstance) -> DualCandidate:
    """``Y* = 1/2 |0><0| (x) P'_W + 1/2 |1><1| (x) (1 - P'_W)`` with padded blocks.

    ``Y* (x) 1_Y = Q`` holds blockwise with equality and ``Tr_X(Y*) = (1/2 + 2 eps) 1_W``.
    """
    proj = planted_no_projector(inst)
    if proj is None:
        raise OracleError("instance does not have the planted-no structure")
    eps = inst.padding_eps or Fraction(0)
    c = float(4 * eps)
    ident = np.eye(inst.dims.dW)
    y0 = c * ident + (1 - c) * proj
    y1 = c * ident + (1 - c) * (ident - proj)
    y = 0.5 * linalg.tensor(np.diag([1.0, 0.0]), y0) + 0.5 * linalg.tensor(np.diag([0.0, 1.0]), y1)
    return DualCandidate(linalg.hermitize(y))


def strategy_from_params(inst: ProtocolInstance, gram: np.ndarray, v0: np.ndarray, v1: np.ndarray):
    """Merlin's states ``rho_a = (1 (x) V_a)|u><u|(1 (x) V_a)*`` for a purification u of ``G G*/Tr``."""
    dW = inst.dims.dW
    sigma = gram @ gram.conj().T
    sigma = sigma / np.trace(sigma).real
    u = purification(sigma, inst.dims.dY)
    a = apply_on_y(u, v0, dW)
    b = apply_on_y(u, v1, dW)
    return np.outer(a, a.conj()), np.outer(b, b.conj())


def _near_unitary(v: np.ndarray, radius: float, rng) -> np.ndarray:
    q, r = np.linalg.qr(v + radius * complex_gaussian(rng, v.shape))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_search(inst: ProtocolInstance, samples: int, seed: int):
    """Best strategy value among ``samples`` seeded proposals, with its witness.

    Even-numbered proposals are fresh draws (Gaussian Gram matrix for sigma,
    Haar unitaries on Y); odd-numbered ones perturb the incumbent with a
    step radius that grows on success and shrinks on failure. The proposal
    sequence depends only on the seed and earlier proposals, so the result is
    nondecreasing in ``samples``.
    """
    d = inst.dims
    if d.dY < d.dW:
        raise OracleError(
            f"strategy search needs dY >= dW to purify a state on W (got dW={d.dW}, dY={d.dY}); "
            "pad Y with an ancilla"
        )
    if samples < 1:
        raise OracleError("samples must be at least 1")
    dW, dY = d.dW, d.dY
    rng = rng_from_seed(seed)
    p0, p1 = inst.P0, inst.P1

    def value(params):
        gram, v0, v1 = params
        sigma = gram @ gram.conj().T
        u = purification(sigma / np.trace(sigma).real, dY)
        a = apply_on_y(u, v0, dW)
        b = apply_on_y(u, v1, dW)
        return 0.5 * np.vdot(a, p0 @ a).real + 0.5 * np.vdot(b, p1 @ b).real

    best, incumbent, radius = -np.inf, None, 0.3
    for i in range(samples):
        local = incumbent is not None and i % 2 == 1
        if local:
            gram, v0, v1 = incumbent
            step = radius * np.linalg.norm(gram) / np.sqrt(dW)
            params = (gram + step * complex_gaussian(rng, gram.shape),
                      _near_unitary(v0, radius, rng), _near_unitary(v1, radius, rng))
        else:
            params = (complex_gaussian(rng, (dW, dW)), haar_unitary(dY, rng), haar_unitary(dY, rng))
        v = value(params)
        improved = v > best
        if improved:
            best, incumbent = v, params
        if local:
            radius = min(1.0, radius * 1.5) if improved else max(1e-4, radius * 0.98)
    rho0, rho1 = strategy_from_params(inst, *incumbent)
    return float(sdpm.strategy_value(inst, rho0, rho1)), (rho0, rho1)


def random_search_lower_bound(inst: ProtocolInstance, samples: int, seed: int) -> float:
    return random_search(inst, samples, seed)[0]


def _dual_bound(report: sdpm.ValidationReport, scaled: bool) -> float:
    if not scaled:
        return report.objective
    # a Y with lambda_min(Phi*(Y)) = 1 - v is exactly feasible after scaling by 1/(1 - v)
    shortfall = min(0.0, report.details["constraint"])
    return report.objective / (1 + shortfall)


def bracket(inst: ProtocolInstance, sdp: SdpInstance | None = None, samples: int = 2000, seed: int = 0,
            duals=(), witnesses=(), tol: float = sdpm.DEFAULT_TOL) -> ValueBracket:
    """Weak-duality sandwich ``lower <= value <= upper`` from independent sources.

    ``duals`` are extra dual candidates (e.g. produced by the solver) and
    ``witnesses`` extra ``(rho0, rho1)`` strategies; only those that
    validate contribute.
    """
    d = inst.dims
    n = d.dW * d.dY
    sources = {}
    mixed = np.eye(n, dtype=complex) / n
    lower, lower_witness = sdpm.strategy_value(inst, mixed, mixed), (mixed, mixed)
    sources["lower"] = "maximally mixed strategy"
    if d.dY >= d.dW:
        value, witness = random_search(inst, samples, seed)
        if value > lower:
            lower, lower_witness = value, witness
            sources["lower"] = f"random search ({samples} samples, seed {seed})"
    for i, (rho0, rho1) in enumerate(witnesses):
        value = sdpm.strategy_value(inst, rho0, rho1)
        if value > lower:
            lower, lower_witness = value, (rho0, rho1)
            sources["lower"] = f"witness {i}"

    q = sdpm.build_q(inst)
    candidates = []
    trivial = DualCandidate(0.5 * np.eye(2 * d.dW, dtype=complex))
    candidates.append(("trivial Y = 1/2", trivial, sdpm.validate_dual_unscaled(q, d, trivial, tol), False))
    if planted_no_projector(inst) is not None:
        opt = optimal_dual_for_planted_no(inst)
        candidates.append(("planted-no optimal dual", opt, sdpm.validate_dual_unscaled(q, d, opt, tol), False))
    for i, cand in enumerate(duals):
        if sdp is None:
            candidates.append((f"dual {i}", cand, sdpm.validate_dual_unscaled(q, d, cand, tol), False))
        else:
            candidates.append((f"dual {i}", cand, sdpm.validate_dual(sdp, cand, tol), True))
    upper, upper_witness = np.inf, None
    for name, cand, report, scaled in candidates:
        if not report.feasible:
            continue
        bound = _dual_bound(report, scaled)
        if bound < upper:
            upper, upper_witness = bound, cand
            sources["upper"] = name
    return ValueBracket(float(lower), float(upper), lower_witness, upper_witness, sources)
