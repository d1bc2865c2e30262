"""Seeded instance generators: planted yes/no games and random projective games."""

from __future__ import annotations

import numpy as np

from . import linalg
from .linalg import DimTriple
from .sdp import ProtocolInstance, SdpError, strategy_value


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of R fixed."""
    z = complex_gaussian(rng, (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = complex_gaussian(rng, (n, rank or n))
    rho = g @ g.conj().T
    return linalg.hermitize(rho / np.trace(rho).real)


def random_projection(n: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= rank <= n:
        raise SdpError(f"rank {rank} out of range [0, {n}]")
    v = haar_unitary(n, rng)[:, :rank]
    return linalg.hermitize(v @ v.conj().T)


def purification(sigma: np.ndarray, dY: int) -> np.ndarray:
    """A unit vector in W (x) Y whose reduction to W is ``sigma`` (requires dY >= dW)."""
    dW = sigma.shape[0]
    if dY < dW:
        raise SdpError(f"purifying a state on W needs dY >= dW (got dW={dW}, dY={dY}); pad Y with an ancilla")
    lam, u = np.linalg.eigh(linalg.hermitize(sigma))
    root = (u * np.sqrt(np.clip(lam, 0, None))) @ u.conj().T
    # |u> = (sqrt(sigma) (x) 1) sum_i |i>|i>, with W embedded in the first dW levels of Y
    m = np.zeros((dW, dY), dtype=complex)
    m[:, :dW] = root
    return m.reshape(-1)


def apply_on_y(vec: np.ndarray, v: np.ndarray, dW: int) -> np.ndarray:
    """``(1_W (x) V) |vec>``."""
    dY = v.shape[0]
    return (vec.reshape(dW, dY) @ v.T).reshape(-1)


def bell_planted_yes() -> tuple[ProtocolInstance, tuple[np.ndarray, np.ndarray]]:
    """dW = dY = 2 with P0, P1 the projectors onto (|00>+|11>)/sqrt2 and (|01>+|10>)/sqrt2."""
    psi0 = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    psi1 = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
    p0 = np.outer(psi0, psi0.conj())
    p1 = np.outer(psi1, psi1.conj())
    return ProtocolInstance(DimTriple(2, 2), p0, p1), (p0, p1)


def gen_planted_yes(dW: int, dY: int, seed: int) -> tuple[ProtocolInstance, tuple[np.ndarray, np.ndarray]]:
    """Rank-one acceptance projectors onto two purifications of one full-rank state on W.

    Returns the (unpadded) instance and the witness pair ``(rho0, rho1)`` with
    value exactly 1.
    """
    if dW < 2 or dY < dW:
        raise SdpError(f"planted-yes needs dY >= dW >= 2 (got dW={dW}, dY={dY})")
    rng = rng_from_seed(seed)
    sigma = random_density(dW, rng)
    psi0 = apply_on_y(purification(sigma, dY), haar_unitary(dY, rng), dW)
    psi1 = apply_on_y(psi0, haar_unitary(dY, rng), dW)
    p0 = linalg.hermitize(np.outer(psi0, psi0.conj()))
    p1 = linalg.hermitize(np.outer(psi1, psi1.conj()))
    inst = ProtocolInstance(DimTriple(dW, dY), p0, p1)
    value = strategy_value(inst, p0, p1)
    if abs(value - 1) > 1e-9:
        raise SdpError(f"planted-yes witness check failed (value {value!r})")
    return inst, (p0, p1)


def gen_planted_no(dW: int, dY: int, k: int, seed: int) -> tuple[ProtocolInstance, np.ndarray]:
    """``P0 = Pi_W (x) 1_Y`` for a random rank-k projector, ``P1 = 1 - P0``; value exactly 1/2.

    Returns the instance and ``Pi_W``.
    """
    if not 1 <= k < dW:
        raise SdpError(f"planted-no needs 1 <= k < dW (got k={k}, dW={dW})")
    rng = rng_from_seed(seed)
    proj = random_projection(dW, k, rng)
    p0 = linalg.tensor(proj, np.eye(dY))
    p1 = np.eye(dW * dY) - p0
    return ProtocolInstance(DimTriple(dW, dY), p0, p1), proj


def gen_random(dW: int, dY: int, rank0: int, rank1: int, seed: int) -> ProtocolInstance:
    n = dW * dY
    for r in (rank0, rank1):
        if not 0 <= r <= n:
            raise SdpError(f"rank {r} out of range [0, {n}]")
    rng = rng_from_seed(seed)
    p0 = random_projection(n, rank0, rng)
    p1 = random_projection(n, rank1, rng)
    return ProtocolInstance(DimTriple(dW, dY), p0, p1)


def scalar_instance(dW: int = 2, dY: int = 2) -> ProtocolInstance:
    """``P0 = P1 = 1``, giving ``Q = 1/2``."""
    ident = np.eye(dW * dY, dtype=complex)
    return ProtocolInstance(DimTriple(dW, dY), ident, ident.copy())
