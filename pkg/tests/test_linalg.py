import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmam import linalg
from qmam.instances import rng_from_seed
from qmam.linalg import PAULI_X, PAULI_Z

from helpers import expm_eigh, rand_contraction, rand_herm, rand_psd


def mp_expm(m, dps=64):
    """Reference exponential at roughly four times double precision."""
    with mpmath.workdps(dps):
        e = mpmath.expm(mpmath.matrix(m.tolist()))
        return e


def mp_distance(ref, x, dps=64):
    """Spectral norm of ref - x, with the difference formed in high precision."""
    with mpmath.workdps(dps):
        n = x.shape[0]
        diff = np.array([[complex(ref[i, j] - mpmath.mpc(x[i, j])) for j in range(n)] for i in range(n)])
    return np.linalg.norm(diff, 2)


# --- examples -----------------------------------------------------------

def test_inner_product_examples():
    i2 = np.eye(2)
    assert linalg.inner_product(i2, i2) == 2
    assert linalg.inner_product(PAULI_X, PAULI_Z) == 0
    assert linalg.inner_product(PAULI_X, PAULI_X) == 2


def test_inner_product_is_conjugate_linear_in_first_slot():
    rng = rng_from_seed(3)
    a, b = rand_herm(rng, 3) + 1j * rand_herm(rng, 3), rand_herm(rng, 3)
    assert np.isclose(linalg.inner_product(a, b), np.trace(a.conj().T @ b))


def test_tensor_examples():
    assert np.array_equal(linalg.tensor(PAULI_Z, np.eye(2)), np.diag([1, 1, -1, -1]))
    assert np.array_equal(linalg.tensor(np.eye(2), np.eye(2)), np.eye(4))
    b = np.arange(4.0).reshape(2, 2)
    out = linalg.tensor(np.diag([1.0, 0.0]), b)
    assert np.array_equal(out[:2, :2], b) and not out[2:, :].any() and not out[:, 2:].any()


def test_partial_trace_examples():
    rng = rng_from_seed(1)
    b, c = rand_herm(rng, 3), rand_herm(rng, 3)
    block = linalg.tensor(np.diag([1, 0]), b) + linalg.tensor(np.diag([0, 1]), c)
    assert np.allclose(linalg.partial_trace(block, [2, 3], 0), b + c, atol=1e-14)
    a = rand_herm(rng, 2)
    rho = rand_psd(rng, 3)
    rho /= np.trace(rho)
    assert np.allclose(linalg.partial_trace(linalg.tensor(a, rho), [2, 3], 1), a, atol=1e-14)
    assert np.allclose(linalg.partial_trace(linalg.tensor(np.eye(2), b), [2, 3], 0), 2 * b, atol=1e-14)


def test_partial_trace_middle_factor():
    rng = rng_from_seed(2)
    a, b, c = rand_herm(rng, 2), rand_herm(rng, 3), rand_herm(rng, 2)
    full = linalg.tensor(linalg.tensor(a, b), c)
    assert np.allclose(linalg.partial_trace(full, [2, 3, 2], 1), np.trace(b) * linalg.tensor(a, c))


def test_spectral_norm_examples():
    assert linalg.spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4)
    assert linalg.spectral_norm(PAULI_X) == pytest.approx(1)
    assert linalg.spectral_norm(np.zeros((3, 3))) == 0


def test_spectral_decomposition_examples():
    dec = linalg.spectral_decomposition(PAULI_X)
    assert np.allclose(dec.eigenvalues, [1, -1])
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    assert abs(abs(np.vdot(plus, dec.unitary[:, 0])) - 1) < 1e-12
    assert abs(abs(np.vdot(minus, dec.unitary[:, 1])) - 1) < 1e-12

    dec = linalg.spectral_decomposition(np.diag([5.0, 2.0, 2.0]))
    assert np.allclose(dec.eigenvalues, [5, 2, 2])
    # any orthonormal basis of the degenerate block is fine
    sub = dec.unitary[1:, 1:]
    assert np.allclose(sub.conj().T @ sub, np.eye(2))

    dec = linalg.spectral_decomposition(np.zeros((3, 3)))
    assert np.array_equal(dec.eigenvalues, np.zeros(3))
    assert np.allclose(dec.unitary.conj().T @ dec.unitary, np.eye(3))


def test_spectral_decomposition_rejects_non_hermitian():
    with pytest.raises(linalg.LinalgError):
        linalg.spectral_decomposition(np.array([[0, 1], [0, 0]], dtype=complex))


def test_spectral_decomposition_tiny_eta_raises_convergence_error():
    h = rand_herm(rng_from_seed(5), 6, norm=100.0)
    with pytest.raises(linalg.ConvergenceError) as info:
        linalg.spectral_decomposition(h, eta=1e-300)
    assert info.value.residual > 0


def test_matrix_exp_examples():
    assert np.array_equal(linalg.matrix_exp(np.zeros((3, 3)), k=1), np.eye(3))
    assert np.allclose(linalg.matrix_exp(np.diag([math.log(2), 0.0]), k=1), np.diag([2.0, 1.0]), atol=2**-30)
    assert np.allclose(linalg.matrix_exp(np.diag([1.0, -1.0]), k=1), np.diag([math.e, 1 / math.e]), atol=2**-30)


def test_matrix_exp_promise_violation():
    with pytest.raises(linalg.LinalgError):
        linalg.matrix_exp(np.diag([3.0, 0.0]), k=1)


def test_exp_term_count_rule():
    assert linalg.exp_term_count(0, 0.5) == 16
    assert linalg.exp_term_count(4, 2**-30) == 12 + 30 + 8


def test_positive_projection_examples():
    proj, pos = linalg.positive_projection(np.diag([0.5, -0.3, 0.0]))
    assert np.allclose(proj, np.diag([1, 0, 0]))
    assert np.allclose(pos, np.diag([0.5, 0, 0]))
    proj, pos = linalg.positive_projection(-np.eye(3))
    assert not proj.any() and not pos.any()
    proj, pos = linalg.positive_projection(np.eye(3))
    assert np.allclose(proj, np.eye(3)) and np.allclose(pos, np.eye(3))


def test_positive_projection_threshold_is_strict():
    eta = 2**-30
    proj, _ = linalg.positive_projection(np.diag([eta, 2 * eta, -eta]), eta)
    assert np.allclose(proj, np.diag([0, 1, 0]))


def test_inv_sqrt_examples():
    r_inv, r = linalg.inv_sqrt(4 * np.eye(3), 1e-12)
    assert np.allclose(r, 2 * np.eye(3)) and np.allclose(r_inv, 0.5 * np.eye(3))
    r_inv, _ = linalg.inv_sqrt(np.diag([0.25, 1.0]), 1e-12)
    assert np.allclose(r_inv, np.diag([2.0, 1.0]))
    r_inv, _ = linalg.inv_sqrt(0.5 * np.eye(8), 1e-12)
    assert np.allclose(r_inv, math.sqrt(2) * np.eye(8))


def test_inv_sqrt_rejects_singular():
    with pytest.raises(linalg.LinalgError):
        linalg.inv_sqrt(np.diag([1.0, 0.0]), 1e-12)


def test_inv_sqrt_contract_random():
    rng = rng_from_seed(11)
    for _ in range(20):
        q = rand_psd(rng, 5) + 0.05 * np.eye(5)
        r_inv, r = linalg.inv_sqrt(q, 1e-10)
        assert linalg.spectral_norm(q - r @ r) <= 1e-10
        assert np.allclose(r_inv @ r, np.eye(5), atol=1e-9)
        assert linalg.lambda_min(r) > 0


# --- properties ---------------------------------------------------------

def test_golden_thompson_500():
    rng = rng_from_seed(20)
    for _ in range(500):
        n = int(rng.integers(1, 9))
        a = rand_herm(rng, n, norm=rng.uniform(0, 2))
        b = rand_herm(rng, n, norm=rng.uniform(0, 2))
        lhs = np.trace(linalg.matrix_exp(a + b)).real
        rhs = np.trace(linalg.matrix_exp(a) @ linalg.matrix_exp(b)).real
        assert lhs <= rhs + 1e-8


def test_coin_twirl_bound_500():
    """P <= 2 (1_X (x) Tr_X P) for PSD P on a qubit times Z, and the twirl identity behind it."""
    rng = rng_from_seed(21)
    for _ in range(500):
        dz = int(rng.integers(1, 7))
        p = rand_psd(rng, 2 * dz, rank=int(rng.integers(1, 2 * dz + 1)))
        bound = 2 * linalg.tensor(np.eye(2), linalg.partial_trace(p, [2, dz], 0))
        assert linalg.lambda_min(linalg.hermitize(bound - p)) >= -1e-9
        assert np.max(np.abs(linalg.pauli_twirl(p, dz) - bound)) <= 1e-10


def test_exp_linear_bounds_500():
    """For 0 <= P <= 1: exp(eta P) <= 1 + eta e^eta P and exp(-eta P) <= 1 - eta e^-eta P."""
    rng = rng_from_seed(22)
    for trial in range(500):
        n = int(rng.integers(1, 7))
        p = linalg.hermitize(rand_contraction(rng, n))
        for eta in (0.25, 1.0, 3.0):
            ident = np.eye(n)
            up = ident + eta * math.exp(eta) * p - linalg.matrix_exp(eta * p)
            down = ident - eta * math.exp(-eta) * p - linalg.matrix_exp(-eta * p)
            assert linalg.lambda_min(linalg.hermitize(up)) >= -1e-9, trial
            assert linalg.lambda_min(linalg.hermitize(down)) >= -1e-9, trial


def test_matrix_exp_accuracy_vs_high_precision():
    rng = rng_from_seed(23)
    eta = 2**-30
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        m = rand_herm(rng, n, norm=rng.uniform(0, 8))
        x = linalg.matrix_exp(m, eta, k=8)
        worst = max(worst, mp_distance(mp_expm(m), x))
    assert worst < eta


def test_spectral_decomposition_residual_200():
    rng = rng_from_seed(24)
    eta = 2**-30
    for _ in range(200):
        n = int(rng.integers(1, 9))
        h = rand_herm(rng, n, norm=rng.uniform(0, 10))
        dec = linalg.spectral_decomposition(h, eta)
        assert linalg.spectral_norm(h - dec.reconstruct()) < eta
        assert np.allclose(dec.unitary.conj().T @ dec.unitary, np.eye(n), atol=2**-35)
        assert np.all(np.diff(dec.eigenvalues) <= 0)


def test_matrix_exp_matches_eigh_on_hermitian():
    rng = rng_from_seed(25)
    for _ in range(50):
        m = rand_herm(rng, 4, norm=rng.uniform(0, 5))
        ref = expm_eigh(m)
        assert np.linalg.norm(linalg.matrix_exp(m) - ref, 2) <= 1e-12 * np.linalg.norm(ref, 2)


def test_log_trace_exp_large_spectrum():
    h = np.diag([1000.0, 999.0, -5.0])
    expected = 1000 + math.log(1 + math.exp(-1) + math.exp(-1005))
    assert linalg.log_trace_exp(h) == pytest.approx(expected, rel=1e-14)


seeds = st.integers(0, 2**63 - 1)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, dx=st.integers(1, 3), dz=st.integers(1, 4))
def test_partial_trace_is_adjoint_of_tensoring_identity(seed, dx, dz):
    rng = rng_from_seed(seed)
    a = rand_herm(rng, dx * dz) + 1j * rand_herm(rng, dx * dz)
    b = rand_herm(rng, dz) + 1j * rand_herm(rng, dz)
    lhs = linalg.inner_product(linalg.tensor(np.eye(dx), b), a)
    rhs = linalg.inner_product(b, linalg.partial_trace(a, [dx, dz], 0))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 6))
def test_spectral_norm_submultiplicative(seed, n):
    rng = rng_from_seed(seed)
    a = rand_herm(rng, n) + 1j * rand_herm(rng, n)
    b = rand_herm(rng, n) - 1j * rand_herm(rng, n)
    assert linalg.spectral_norm(a @ b) <= linalg.spectral_norm(a) * linalg.spectral_norm(b) + 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(1, 6))
def test_hermitian_kernels_return_hermitian(seed, n):
    rng = rng_from_seed(seed)
    h = rand_herm(rng, n, norm=3.0)
    for out in (linalg.matrix_exp(h), *linalg.positive_projection(h)):
        assert linalg.hermitian_defect(out) == 0.0
