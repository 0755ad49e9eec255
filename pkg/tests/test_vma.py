import numpy as np
import pytest
from conftest import random_stable_phi
from hypothesis import given, settings
from hypothesis import strategies as st

from spillnet.errors import DecompositionError
from spillnet.var import companion_matrix
from spillnet.vma import vma_coefficients


def companion_oracle(phi, horizon):
    p, m, _ = phi.shape
    a = companion_matrix(phi)
    return np.array([np.linalg.matrix_power(a, h)[:m, :m] for h in range(horizon)])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 12), st.integers(0, 2**31))
def test_matches_companion_powers(m, p, horizon, seed):
    phi = random_stable_phi(np.random.default_rng(seed), m, p)
    np.testing.assert_allclose(vma_coefficients(phi, horizon).psi, companion_oracle(phi, horizon), atol=1e-12)


def test_first_terms():
    phi = np.array([[[0.5, 0.2], [0.1, 0.3]], [[0.1, 0.0], [0.0, 0.1]]])
    psi = vma_coefficients(phi, 3).psi
    np.testing.assert_array_equal(psi[0], np.eye(2))
    np.testing.assert_allclose(psi[1], phi[0])
    np.testing.assert_allclose(psi[2], phi[0] @ phi[0] + phi[1])


def test_horizon_validation():
    with pytest.raises(DecompositionError):
        vma_coefficients(np.zeros((1, 2, 2)), 0)


def test_block_diagonal_preserved():
    phi = np.zeros((1, 4, 4))
    phi[0, :2, :2] = [[0.4, 0.2], [0.3, 0.1]]
    phi[0, 2:, 2:] = [[0.5, -0.2], [0.1, 0.2]]
    psi = vma_coefficients(phi, 8).psi
    assert np.all(psi[:, :2, 2:] == 0) and np.all(psi[:, 2:, :2] == 0)
