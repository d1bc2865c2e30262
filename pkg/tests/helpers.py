"""Shared random generators for the test suite."""

import numpy as np

from qmam.instances import complex_gaussian, haar_unitary


def rand_herm(rng, n, norm=None):
    g = complex_gaussian(rng, (n, n))
    h = (g + g.conj().T) / 2
    if norm is not None:
        h = h * (norm / np.linalg.norm(h, 2))
    return h


def rand_psd(rng, n, rank=None):
    g = complex_gaussian(rng, (n, rank or n))
    return g @ g.conj().T


def rand_contraction(rng, n):
    """Hermitian P with 0 <= P <= 1 and a spread spectrum including the endpoints sometimes."""
    lam = rng.uniform(0, 1, n)
    if rng.random() < 0.2:
        lam[0], lam[-1] = 0.0, 1.0
    u = haar_unitary(n, rng)
    return (u * lam) @ u.conj().T


def expm_eigh(h):
    lam, u = np.linalg.eigh((h + h.conj().T) / 2)
    return (u * np.exp(lam)) @ u.conj().T


# criterion number -> (title, passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}
