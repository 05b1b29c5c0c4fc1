import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from tmgspec.lattice import OMEGA, rotation_matrix
from tmgspec.operators import (
    ModelConfig, build_Dn, build_Hk, build_potential, build_Vn, chiral_operator, constant_vector,
)

alphas = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
layers = st.integers(1, 3)


def test_config_defaults_and_validation():
    c = ModelConfig()
    assert c.n == 2 and c.t == (1.0,) and c.N == 16
    assert ModelConfig(n=3, t=[0.5, 2]).t == (0.5, 2.0)
    for bad in [dict(n=0), dict(n=2, t=(1, 1)), dict(n=2, t=(0,)), dict(N=0)]:
        with pytest.raises(ValueError):
            ModelConfig(**bad)


def test_potential_entries():
    c = ModelConfig(n=1, N=3)
    b = c.basis()
    Up = build_potential(b, 1).dense()
    i1 = b.index(1, 0, 0)  # momentum i in component 1
    i2 = b.constant_index(2)
    # U(z) maps the constant of component 2 to the three waves i omega^j
    col = Up[:, i2]
    assert np.count_nonzero(np.abs(col) > 0) == 3
    assert np.isclose(col[i1], 1.0)
    with pytest.raises(ValueError):
        build_potential(b, 0)


def test_mismatched_n_rejected():
    with pytest.raises(ValueError):
        build_Dn(ModelConfig(n=2), ModelConfig(n=1, N=2).basis())


@settings(max_examples=15, deadline=None)
@given(alphas, layers, st.complex_numbers(max_magnitude=2))
def test_rotation_intertwining(alpha, n, k):
    # C^-1 (D + omega k) C = wbar (D + omega^2 k) is equivalent to D C = wbar C D at k = 0
    c = ModelConfig(n=n, alpha=alpha, N=3)
    b = c.basis()
    C = rotation_matrix(b).dense()
    D = build_Dn(c, b, 0).dense()
    assert np.abs(D @ C - np.conj(OMEGA) * C @ D).max() < 1e-12
    Dk = build_Dn(c, b, OMEGA * k).dense()
    Dk2 = build_Dn(c, b, OMEGA**2 * k).dense()
    assert np.abs(np.linalg.inv(C) @ Dk @ C - np.conj(OMEGA) * Dk2).max() < 1e-12


@settings(max_examples=15, deadline=None)
@given(alphas, layers, st.lists(st.floats(0.2, 3), min_size=2, max_size=2))
def test_protected_kernel_column_exact(alpha, n, t):
    c = ModelConfig(n=n, t=t[: n - 1], alpha=alpha, N=3)
    b = c.basis()
    D = build_Dn(c, b).matrix
    e = constant_vector(b, 2 * n)
    if n >= 2:
        # the e_2n column of D vanishes identically
        assert np.abs(D @ e).max() == 0


def test_hamiltonian_structure():
    c = ModelConfig(n=2, alpha=0.7 + 0.2j, N=3)
    b = c.basis()
    H = build_Hk(c, b, 0.1 - 0.3j).dense()
    W = chiral_operator(b).dense()
    assert np.allclose(H, H.conj().T)
    assert np.allclose(W @ H + H @ W, 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 2.5), st.integers(1, 3), st.complex_numbers(max_magnitude=1.5))
def test_chiral_evenness(alpha, n, k):
    c = ModelConfig(n=n, alpha=alpha, N=3)
    H = build_Hk(c, c.basis(), k).dense()
    ev = np.linalg.eigvalsh(H)
    assert np.abs(np.sort(ev) - np.sort(-ev)).max() < 1e-10


def test_Vn_is_derivative():
    c = ModelConfig(n=2, N=3)
    b = c.basis()
    D0 = build_Dn(c.with_alpha(0), b).dense()
    D1 = build_Dn(c.with_alpha(1.3), b).dense()
    assert np.allclose(D1 - D0, 1.3 * build_Vn(c, b).dense())


def test_free_single_layer_is_diagonal():
    c = ModelConfig(n=1, N=3)
    b = c.basis()
    D = build_Dn(c, b, 0.2 + 0.1j).dense()
    assert np.allclose(D, np.diag(b.momenta + 0.2 + 0.1j))


def test_constant_vector_doubled():
    b = ModelConfig(n=2, N=2).basis()
    v = constant_vector(b, 6, doubled=True)
    assert v.shape == (2 * b.dim,) and v[b.dim + b.constant_index(2)] == 1
    with pytest.raises(ValueError):
        constant_vector(b, 9, doubled=True)
