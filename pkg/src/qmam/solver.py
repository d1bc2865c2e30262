"""Matrix multiplicative weights for the single-coin Arthur-Merlin SDP.

Two modes share one iteration:

* ``faithful`` uses gamma = 4/3, eps = 1/64, delta = eps/(2||Q^-1||) and the
  worst-case iteration count T. It is only practical with an overridden T.
* ``certified`` (default) takes a much larger step and stops as soon as it holds
  a certificate that revalidates: a primal point with objective above 5/8
  (accept) or a dual point with objective below 7/8 (reject). Its verdicts
  never rely on the iteration bound.

With ``fixed_point_bits`` set, rho, xi and every projection are stored as
integers over ``2**K`` and beta is computed as an exact rational.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np

from . import linalg, sdp as sdpm
from .sdp import DualCandidate, PrimalCandidate, SdpInstance, ValidationReport

log = logging.getLogger(__name__)

FAITHFUL = "faithful"
CERTIFIED = "certified"

ACCEPT = "accept"
REJECT = "reject"
INCONCLUSIVE = "inconclusive"

ACCEPT_THRESHOLD = Fraction(5, 8)
REJECT_THRESHOLD = Fraction(7, 8)

GAMMA = Fraction(4, 3)
EPS = Fraction(1, 64)
MU = Fraction(1, 1024)
CERTIFIED_STEP = Fraction(1, 10)
CERTIFIED_CAP = 10000
CERTIFIED_REFINE = 300


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    gamma: Fraction
    eps: Fraction
    delta: Fraction
    T: int
    mode: str
    step_scale: Fraction
    iteration_cap: int
    fixed_point_bits: int | None
    mu: Fraction
    seed: int
    projection_eta: float = linalg.DEFAULT_ETA
    validation_tol: float = sdpm.DEFAULT_TOL
    refine_iterations: int = 0

    @property
    def step(self) -> float:
        """The exponent multiplier: ``eps*delta`` (faithful) or ``eps*delta*step_scale``."""
        return float(self.eps * self.delta * self.step_scale)

    def as_dict(self) -> dict:
        return {
            "gamma": str(self.gamma),
            "eps": str(self.eps),
            "delta": str(self.delta),
            "T": self.T,
            "mode": self.mode,
            "step_scale": str(self.step_scale),
            "iteration_cap": self.iteration_cap,
            "fixed_point_bits": self.fixed_point_bits,
            "mu": str(self.mu),
            "seed": self.seed,
            "projection_eta": self.projection_eta,
            "validation_tol": self.validation_tol,
            "refine_iterations": self.refine_iterations,
        }


def iteration_bound(N: int, eps: Fraction, delta: Fraction) -> int:
    """``ceil(4 ln(N) / (eps^3 delta))``, evaluated at 60 significant digits."""
    with mpmath.workdps(60):
        val = 4 * mpmath.log(N) / (mpmath.mpf(eps.numerator) ** 3 / mpmath.mpf(eps.denominator) ** 3
                                  * mpmath.mpf(delta.numerator) / mpmath.mpf(delta.denominator))
        return int(mpmath.ceil(val))


def default_fixed_point_bits(N: int) -> int:
    return 32 * math.ceil(math.log2(N))


def configure(sdp: SdpInstance, mode: str = CERTIFIED, **overrides) -> SolverConfig:
    """Derive delta and T from the instance; apply overrides.

    Faithful mode refuses gamma or eps other than 4/3 and 1/64.
    """
    if mode not in (FAITHFUL, CERTIFIED):
        raise SolverError(f"unknown mode {mode!r}")
    gamma = Fraction(overrides.pop("gamma", GAMMA))
    eps = Fraction(overrides.pop("eps", EPS))
    if mode == FAITHFUL and (gamma != GAMMA or eps != EPS):
        raise SolverError("faithful mode fixes gamma = 4/3 and eps = 1/64")
    if not 0 < eps < 1 or gamma <= 0:
        raise SolverError("need 0 < eps < 1 and gamma > 0")
    delta = eps / (2 * Fraction(sdp.qinv_norm))
    T = iteration_bound(sdp.N, eps, delta)
    if "T" in overrides:
        if mode != FAITHFUL:
            raise SolverError("T can only be overridden in faithful mode")
        T = int(overrides.pop("T"))
    if mode == CERTIFIED:
        step_scale = Fraction(overrides.pop("step_scale", CERTIFIED_STEP / (eps * delta)))
        cap = int(overrides.pop("iteration_cap", CERTIFIED_CAP))
    else:
        if "step_scale" in overrides and Fraction(overrides.pop("step_scale")) != 1:
            raise SolverError("faithful mode uses the step eps*delta")
        overrides.pop("iteration_cap", None)
        step_scale = Fraction(1)
        cap = T
    K = overrides.pop("fixed_point_bits", None)
    if K is True:
        K = default_fixed_point_bits(sdp.N)
    mu = Fraction(overrides.pop("mu", MU))
    seed = int(overrides.pop("seed", 0))
    extra = {}
    for name in ("projection_eta", "validation_tol"):
        if name in overrides:
            extra[name] = float(overrides.pop(name))
    refine = int(overrides.pop("refine_iterations", CERTIFIED_REFINE if mode == CERTIFIED else 0))
    if mode == FAITHFUL and refine:
        raise SolverError("faithful mode runs exactly T iterations; refinement is certified-only")
    extra["refine_iterations"] = refine
    if overrides:
        raise SolverError(f"unknown configuration keys: {sorted(overrides)}")
    if step_scale <= 0 or cap < 0 or T < 1 or mu < 0 or refine < 0:
        raise SolverError("step_scale must be positive, T >= 1, and cap, mu, refine_iterations non-negative")
    if K is not None and int(K) < 1:
        raise SolverError("fixed_point_bits must be positive")
    return SolverConfig(gamma, eps, delta, T, mode, step_scale, cap,
                        None if K is None else int(K), mu, seed, **extra)


def fixed_point_round(a, K: int) -> np.ndarray:
    """Round real and imaginary parts to the nearest multiple of ``2**-K`` (ties to even).

    Every result is exactly representable as a double, whatever ``K`` is.
    """
    a = np.asarray(a, dtype=complex)
    bound = 1 + 2.0**-K
    if np.any(np.abs(a.real) > bound) or np.any(np.abs(a.imag) > bound):
        raise SolverError("fixed-point entries must have real and imaginary parts at most 1 in magnitude")
    scale = 2.0**K
    # np.rint rounds half to even; scaling by a power of two is exact
    return np.rint(a.real * scale) / scale + 1j * (np.rint(a.imag * scale) / scale)


def _store(a: np.ndarray, K: int | None) -> np.ndarray:
    """Round to the K-bit grid, absorbing rounding overshoot of at most 1e-12 beyond magnitude 1."""
    if not K:
        return a
    re = a.real.copy()
    im = a.imag.copy()
    for part in (re, im):
        over = (np.abs(part) > 1) & (np.abs(part) <= 1 + 1e-12)
        part[over] = np.sign(part[over])
    return fixed_point_round(re + 1j * im, K)


def _dyadic(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Exact integer representation ``(re + i im) / 2**shift`` of a float matrix."""
    parts = []
    shift = 0
    for x in np.concatenate([a.real.ravel(), a.imag.ravel()]):
        n, d = float(x).as_integer_ratio()
        parts.append((n, d))
        shift = max(shift, d.bit_length() - 1)
    ints = [n << (shift - (d.bit_length() - 1)) for n, d in parts]
    half = a.size
    re = np.array(ints[:half], dtype=object).reshape(a.shape)
    im = np.array(ints[half:], dtype=object).reshape(a.shape)
    return re, im, shift


def _cmul(a, b):
    ar, ai, sa = a
    br, bi, sb = b
    return ar @ br - ai @ bi, ar @ bi + ai @ br, sa + sb


def exact_beta(sdp: SdpInstance, proj: np.ndarray, rho: np.ndarray) -> Fraction:
    """``<Pi, Phi(rho)> = Tr(Rinv (Pi (x) 1) Rinv rho)`` in exact rational arithmetic."""
    d = sdp.dims
    r = _dyadic(sdp.Rinv)
    p = _dyadic(linalg.tensor(proj, np.eye(d.dY)))
    m = _cmul(_cmul(_cmul(r, p), r), _dyadic(rho))
    total = sum(m[0][i, i] for i in range(sdp.N))
    return Fraction(int(total), 1 << m[2])


@dataclass
class TraceRecord:
    t: int
    beta: float
    rank: int
    dual_objective: float | None = None
    beta_exact: str | None = None

    def as_dict(self) -> dict:
        out = {"t": self.t, "beta": self.beta, "rank": self.rank, "dual_objective": self.dual_objective}
        if self.beta_exact is not None:
            out["beta_exact"] = self.beta_exact
        return out


@dataclass
class IterationState:
    t: int
    rho: np.ndarray
    xi: np.ndarray
    accum: np.ndarray
    trace_log: list[TraceRecord] = field(default_factory=list)
    # projection data of iteration t, filled by project()
    proj: np.ndarray | None = None
    beta: float | Fraction | None = None
    phi_rho: np.ndarray | None = None
    history: list[dict] | None = None


@dataclass
class SolveOutcome:
    verdict: str
    certificate: PrimalCandidate | DualCandidate | None
    objective: float | None
    report: ValidationReport | None
    iterations_used: int
    mode: str
    config: SolverConfig
    trace_log: list[TraceRecord]
    history: list[dict] | None = None
    diagnostics: dict = field(default_factory=dict)


def initial_state(sdp: SdpInstance, config: SolverConfig, record_history: bool = False) -> IterationState:
    N, M = sdp.N, sdp.M
    rho = np.eye(N, dtype=complex) / N
    xi = np.eye(M, dtype=complex) / M
    rho = _store(rho, config.fixed_point_bits)
    xi = _store(xi, config.fixed_point_bits)
    return IterationState(0, rho, xi, np.zeros((2 * M, 2 * M), dtype=complex),
                          history=[] if record_history else None)


def project(sdp: SdpInstance, config: SolverConfig, state: IterationState) -> IterationState:
    """Compute Pi_t (positive eigenspaces of Phi(rho) - gamma 1 (x) xi) and beta_t."""
    if state.proj is not None:
        return state
    phi_rho = linalg.hermitize(sdpm.phi(sdp, state.rho))
    gap = phi_rho - float(config.gamma) * linalg.tensor(np.eye(2), state.xi)
    proj, _ = linalg.positive_projection(gap, config.projection_eta)
    rank = int(round(np.trace(proj).real))
    K = config.fixed_point_bits
    if K:
        proj = _store(proj, K)
        beta = exact_beta(sdp, proj, state.rho)
        record = TraceRecord(state.t, float(beta), rank, beta_exact=str(beta))
    else:
        beta = float(linalg.inner_product(proj, phi_rho).real)
        record = TraceRecord(state.t, beta, rank)
    state.proj, state.beta, state.phi_rho = proj, beta, phi_rho
    state.trace_log.append(record)
    return state


def check_accept(sdp: SdpInstance, config: SolverConfig, state: IterationState) -> PrimalCandidate | None:
    """The accept-path primal point, or None when ``beta_t > eps``.

    ``X = rho / c`` and ``sigma = (gamma xi + 2 Tr_X(Pi Phi(rho) Pi) + (mu/M) 1) / c``
    with ``c = gamma + 2 beta + mu``.
    """
    project(sdp, config, state)
    if state.beta > config.eps:
        return None
    M = sdp.M
    beta = Fraction(state.beta) if isinstance(state.beta, Fraction) else state.beta
    c = float(config.gamma + 2 * Fraction(beta) + config.mu)
    pinned = state.proj @ state.phi_rho @ state.proj
    sigma = (float(config.gamma) * state.xi
             + 2 * sdpm.trace_coin(pinned, sdp.dims)
             + float(config.mu) / M * np.eye(M))
    return PrimalCandidate(linalg.hermitize(state.rho / c), linalg.hermitize(sigma / c))


def _normalized_exp(h: np.ndarray, eta: float) -> np.ndarray:
    top = linalg.lambda_max(h)
    shifted = h - top * np.eye(h.shape[0])
    k = max(1.0, math.ceil(linalg.spectral_norm(shifted)))
    e = linalg.matrix_exp(shifted, eta, k)
    return linalg.hermitize(e / np.trace(e).real)


def iterate(sdp: SdpInstance, config: SolverConfig, state: IterationState) -> IterationState:
    """One multiplicative-weights update; requires ``beta_t > eps``."""
    project(sdp, config, state)
    if not state.beta > config.eps:
        raise SolverError(f"iterate called with beta_t = {float(state.beta):.6g} <= eps; accept first")
    N, M = sdp.N, sdp.M
    s = config.step
    weight = 1 / Fraction(state.beta) if isinstance(state.beta, Fraction) else 1 / state.beta
    increment = state.proj * float(weight)
    accum = linalg.hermitize(state.accum + increment)
    scale_eta = float(config.mu * config.delta)
    rho = _normalized_exp(-s * sdpm.phi_adjoint(sdp, accum), scale_eta / (4 * N))
    xi = _normalized_exp(s * sdpm.trace_coin(accum, sdp.dims), scale_eta / (4 * M))
    rho = _store(rho, config.fixed_point_bits)
    xi = _store(xi, config.fixed_point_bits)
    if state.history is not None:
        state.history.append({
            "t": state.t, "proj": state.proj, "beta": state.beta,
            "rho": state.rho, "xi": state.xi, "accum": state.accum,
        })
    return IterationState(state.t + 1, rho, xi, accum, state.trace_log, history=state.history)


def extract_dual_certificate(sdp: SdpInstance, config: SolverConfig,
                             state: IterationState) -> tuple[DualCandidate, float] | None:
    """Dual point from the accumulated projections.

    Faithful: ``(1 + 2 eps)(1 + 2 mu)/t * accum``. Certified: the running average
    rescaled by ``1/lambda_min(Phi*(avg))``, which makes it feasible by
    construction. Returns None while no candidate exists.
    """
    if state.t < 1:
        return None
    if config.mode == FAITHFUL:
        y = float((1 + 2 * config.eps) * (1 + 2 * config.mu) / state.t) * state.accum
    else:
        avg = state.accum / state.t
        m = linalg.lambda_min(sdpm.phi_adjoint(sdp, avg))
        if m <= 0:
            return None
        y = avg / m
    y = linalg.hermitize(y)
    objective = linalg.spectral_norm(sdpm.trace_coin(y, sdp.dims))
    return DualCandidate(y), objective


def _validated_accept(sdp, config, state, cand) -> SolveOutcome | None:
    report = sdpm.validate_primal(sdp, cand, config.validation_tol)
    if report.feasible and report.objective > ACCEPT_THRESHOLD:
        return SolveOutcome(ACCEPT, cand, report.objective, report, state.t, config.mode, config,
                            state.trace_log, state.history)
    log.warning("accept certificate at t=%d failed revalidation: %s", state.t, report.details)
    return None


def solve(sdp: SdpInstance, config: SolverConfig, *,
          on_record: Callable[[TraceRecord], None] | None = None,
          record_history: bool = False) -> SolveOutcome:
    """Run the iteration until a certificate revalidates or the budget runs out.

    In certified mode the first dual point that revalidates with objective
    below 7/8 settles the verdict; the run then continues for at most
    ``config.refine_iterations`` further steps and returns the best dual point
    seen, which tightens the reported upper bound.
    """
    if sdp.qinv_norm > sdpm.MAX_QINV_NORM * (1 + 1e-12):
        raise SolverError(f"||Q^-1|| = {sdp.qinv_norm:.6g} exceeds {sdpm.MAX_QINV_NORM:g}")
    state = initial_state(sdp, config, record_history)
    budget = config.T if config.mode == FAITHFUL else config.iteration_cap
    emit = on_record or (lambda record: None)
    best = None  # (candidate, report) of the best validated reject certificate
    refine_left = config.refine_iterations
    best_objective = None

    while True:
        project(sdp, config, state)
        record = state.trace_log[-1]
        if best is None:
            cand = check_accept(sdp, config, state)
            if cand is not None:
                emit(record)
                outcome = _validated_accept(sdp, config, state, cand)
                if outcome is not None:
                    return outcome
                break
        elif refine_left <= 0 or not state.beta > config.eps:
            emit(record)
            break
        if state.t >= budget:
            emit(record)
            break
        state = iterate(sdp, config, state)
        if best is not None:
            refine_left -= 1
        if config.mode == CERTIFIED:
            found = extract_dual_certificate(sdp, config, state)
            if found is not None:
                record.dual_objective = found[1]
                if best_objective is None or found[1] < best_objective:
                    best_objective = found[1]
                if found[1] < REJECT_THRESHOLD and (best is None or found[1] < best[1].objective):
                    report = sdpm.validate_dual(sdp, found[0], config.validation_tol)
                    if report.feasible and report.objective < REJECT_THRESHOLD:
                        best = (found[0], report)
        emit(record)

    if best is not None:
        return SolveOutcome(REJECT, best[0], best[1].objective, best[1], state.t, config.mode, config,
                            state.trace_log, state.history)
    if config.mode == FAITHFUL and state.t >= config.T:
        cand, objective = extract_dual_certificate(sdp, config, state)
        report = sdpm.validate_dual(sdp, cand, config.validation_tol)
        if report.feasible and report.objective < REJECT_THRESHOLD:
            return SolveOutcome(REJECT, cand, report.objective, report, state.t, config.mode, config,
                                state.trace_log, state.history)
        best_objective = objective
    return SolveOutcome(INCONCLUSIVE, None, None, None, state.t, config.mode, config, state.trace_log,
                        state.history, {"best_dual_objective": best_objective})


def potential_checks(sdp: SdpInstance, config: SolverConfig, history: list[dict],
                     slack: float = 1e-7) -> list[dict]:
    """Check the per-iteration potential inequalities on explicitly rebuilt W_t and Z_t.

    ``W_t = exp(-s Phi*(sum_{j<t} Pi_j/beta_j))`` and
    ``Z_t = exp(s Tr_X(sum_{j<t} Pi_j/beta_j))``. For every executed iteration:

    * ``Tr W_{t+1} <= Tr W_t (1 - s e^{-e_W} <W_t/Tr W_t, Phi*(Pi_t/beta_t)>) + slack``
    * ``Tr Z_{t+1} <= Tr Z_t exp(s e^{e_Z} / gamma) + slack``

    where ``e_W = s ||Phi*(Pi_t/beta_t)||`` and ``e_Z = s ||Tr_X(Pi_t/beta_t)||``.
    Traces are compared in log space so large exponents cannot overflow.
    """
    s = config.step
    gamma = float(config.gamma)
    log_slack = math.log(slack)
    out = []
    for rec in history:
        a0 = rec["accum"]
        inc = rec["proj"] * float(1 / Fraction(rec["beta"]))
        a1 = a0 + inc
        h = linalg.hermitize(sdpm.phi_adjoint(sdp, inc))
        g = linalg.hermitize(sdpm.trace_coin(inc, sdp.dims))

        w0 = linalg.hermitize(-s * sdpm.phi_adjoint(sdp, a0))
        w1 = linalg.hermitize(-s * sdpm.phi_adjoint(sdp, a1))
        log_w0 = linalg.log_trace_exp(w0)
        log_w1 = linalg.log_trace_exp(w1)
        w_state = _normalized_exp(w0, 1e-14)
        e_w = s * linalg.spectral_norm(h)
        factor = 1 - s * math.exp(-e_w) * linalg.inner_product(w_state, h).real
        w_rhs = np.logaddexp(log_w0 + math.log(factor), log_slack) if factor > 0 else log_slack

        z0 = linalg.hermitize(s * sdpm.trace_coin(a0, sdp.dims))
        z1 = linalg.hermitize(s * sdpm.trace_coin(a1, sdp.dims))
        log_z0 = linalg.log_trace_exp(z0)
        log_z1 = linalg.log_trace_exp(z1)
        e_z = s * linalg.spectral_norm(g)
        z_rhs = np.logaddexp(log_z0 + s * math.exp(e_z) / gamma, log_slack)

        out.append({
            "t": rec["t"],
            "log_trace_W": (log_w0, log_w1, float(w_rhs)),
            "log_trace_Z": (log_z0, log_z1, float(z_rhs)),
            "W_ok": bool(log_w1 <= w_rhs + 1e-12),
            "Z_ok": bool(log_z1 <= z_rhs + 1e-12),
            "trace_x_proj_norm": linalg.spectral_norm(sdpm.trace_coin(rec["proj"], sdp.dims)),
        })
    return out


def accept_path_slack(sdp: SdpInstance, config: SolverConfig, state: IterationState) -> float:
    """``lambda_min(1 (x) (gamma xi + 2 Tr_X(Pi Phi(rho) Pi) + (mu/M) 1) - Phi(rho))``."""
    project(sdp, config, state)
    M = sdp.M
    pinned = state.proj @ state.phi_rho @ state.proj
    bound = (float(config.gamma) * state.xi + 2 * sdpm.trace_coin(pinned, sdp.dims)
             + float(config.mu) / M * np.eye(M))
    return linalg.lambda_min(linalg.tensor(np.eye(2), bound) - state.phi_rho)


def with_mode(config: SolverConfig, **changes) -> SolverConfig:
    return replace(config, **changes)
