import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from tmgspec.bands import (
    G_NORM, PRESETS, BandTable, FitOptions, KPath, NotPinned, WindowTooCoarse, band_path, band_values,
    classify, crossing_fit,
)
from tmgspec.lattice import G1, OMEGA
from tmgspec.operators import ModelConfig, build_Hk


# --- band values -----------------------------------------------------------

def test_free_single_layer_values():
    c = ModelConfig(n=1, N=4)
    b = c.basis()
    k = 0.21 - 0.07j
    assert np.allclose(band_values(c, k, 5, b), np.sort(np.abs(b.base_momenta + k))[:5])


def test_dense_and_sparse_agree():
    c = ModelConfig(n=2, alpha=0.8, N=6)
    k = 0.13 + 0.31j
    assert np.allclose(band_values(c, k, 3, method="dense"), band_values(c, k, 3, method="sparse"), atol=1e-10)


def test_pinning_random_draws(rng):
    for _ in range(10):
        n = int(rng.integers(1, 4))
        c = ModelConfig(n=n, t=rng.uniform(0.3, 2.0, n - 1), alpha=rng.uniform(0, 3) + 0.3j * rng.standard_normal(), N=4)
        assert band_values(c, 0, 1)[0] <= 1e-10
        assert band_values(c, -1j, 1)[0] <= 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 3), st.integers(1, 3), st.complex_numbers(max_magnitude=1.5))
def test_rotation_invariance(alpha, n, k):
    c = ModelConfig(n=n, alpha=alpha, N=4)
    b = c.basis()
    assert np.abs(band_values(c, OMEGA * k, 3, b) - band_values(c, k, 3, b)).max() < 1e-10


def test_evenness_sparse_hamiltonian():
    c = ModelConfig(n=2, alpha=1.1, N=8)
    H = build_Hk(c, c.basis(), 0.2 + 0.1j).matrix
    ev = np.sort(spla.eigsh(H, k=8, sigma=1e-3, return_eigenvectors=False))
    pos = np.sort(ev[ev > 0])[:3]
    neg = np.sort(-ev[ev < 0])[:3]
    assert np.abs(pos - neg).max() < 1e-10


def test_periodicity_improves_with_truncation():
    k = 0.2 + 0.15j
    errs = []
    for N in (6, 8):
        c = ModelConfig(n=1, alpha=0.9, N=N)
        errs.append(np.abs(band_values(c, k + G1, 2) - band_values(c, k, 2)).max())
    assert errs[1] < errs[0]


def test_m_too_large():
    c = ModelConfig(n=1, N=1)
    with pytest.raises(ValueError):
        band_values(c, 0.1, c.basis().dim + 1)


# --- paths and tables ---------------------------------------------------------

def test_kpath_parse_and_validation():
    p = KPath.parse("K, Gamma, M, K'", 5)
    assert [n for n, _ in p.waypoints] == ["K", "Gamma", "M", "K'"]
    ks, s = p.points()
    assert len(ks) == 1 + 3 * 4 and np.all(np.diff(s) > 0)
    assert np.isclose(ks[-1], PRESETS["K'"])
    assert KPath.parse("0.1+0.2j,Kp").waypoints[1][1] == -1j
    with pytest.raises(ValueError):
        KPath.parse("K,K")
    with pytest.raises(ValueError):
        KPath.parse("K,M", samples=1)
    with pytest.raises(ValueError):
        KPath.parse("Q")


def test_band_table_csv_roundtrip():
    c = ModelConfig(n=2, alpha=0.4, N=4)
    t = band_path(c, KPath.parse("K,M", 4), 3)
    text = t.to_csv()
    assert text.splitlines()[0] == "s,k_re,k_im,E1,E2,E3"
    back = BandTable.from_csv(text)
    assert np.array_equal(back.E, t.E) and np.array_equal(back.k, t.k)
    assert t.to_svg().count("<polyline") == 3


def test_band_table_rejects_unsorted():
    with pytest.raises(ValueError):
        BandTable(np.zeros(1, complex), np.zeros(1), np.array([[2.0, 1.0]]))


def test_constant_path_rows_identical():
    c = ModelConfig(n=2, alpha=0.7, N=4)
    t = band_path(c, KPath.parse("K"), 2)
    assert len(t.k) == 1 and t.E[0, 0] < 1e-10


def test_parallel_rows_deterministic(monkeypatch):
    c = ModelConfig(n=2, alpha=0.7, N=4)
    p = KPath.parse("K,Gamma,M", 4)
    serial = band_path(c, p, 2, threads=1).to_csv()
    monkeypatch.setenv("MCS_THREADS", "3")
    assert band_path(c, p, 2).to_csv() == serial


def test_flat_band_along_path(alpha1_n16):
    c = ModelConfig(n=1, alpha=alpha1_n16, N=16)
    t = band_path(c, KPath.parse("K,Gamma,M,K'", 4), 2)
    assert t.E[:, 0].max() <= 1e-5


def test_two_cones_along_path(beta1_n12):
    c = ModelConfig(n=2, alpha=beta1_n12, N=12)
    b = c.basis()
    for K in (0, -1j):
        for band in (1, 2):
            assert abs(crossing_fit(c, K, 1, band, basis=b).exponent - 1) < 0.05


# --- crossing fits ----------------------------------------------------------

def test_fit_single_layer_cone():
    assert abs(crossing_fit(ModelConfig(n=1, alpha=1.0, N=10)).exponent - 1) < 0.05


def test_fit_jordan_block_closed_form():
    f = crossing_fit(ModelConfig(n=2, alpha=0.0, t=(1.0,), N=4))
    assert abs(f.exponent - 2) < 0.05 and abs(f.coefficient - 1) < 0.05


def test_fit_directions_agree():
    c = ModelConfig(n=2, alpha=1.0, N=8)
    exps = [crossing_fit(c, 0, d).exponent for d in (1, OMEGA, OMEGA**2, 1j)]
    assert np.ptp(exps) < 0.01


def test_fit_at_second_dirac_point():
    assert abs(crossing_fit(ModelConfig(n=2, alpha=1.0, N=8), -1j).exponent - 2) < 0.05


def test_fit_trilayer_dirac(beta1_n12):
    c = ModelConfig(n=3, alpha=beta1_n12, N=12)
    b = c.basis()
    assert abs(crossing_fit(c, 0, 1, 1, basis=b).exponent - 2) < 0.1
    assert abs(crossing_fit(c, 0, 1, 2, basis=b).exponent - 1) < 0.05


def test_fit_errors():
    c = ModelConfig(n=2, alpha=1.0, N=6)
    with pytest.raises(NotPinned):
        crossing_fit(c, 0, 1, band=2)
    with pytest.raises(NotPinned):
        crossing_fit(c, 0.5)
    # a window straddling the crossover bends the log-log line
    with pytest.raises(WindowTooCoarse):
        crossing_fit(c, 0, 1, 1, FitOptions(window=(1e-3, 0.3), fit_tol=1e-3))


def test_fit_exponent_converges_in_N():
    errs = [abs(crossing_fit(ModelConfig(n=2, alpha=1.0, N=N)).exponent - 2) for N in (4, 8)]
    assert errs[1] <= errs[0] + 1e-6


# --- classification -----------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_classify_generic(n):
    c = classify(ModelConfig(n=n, alpha=1.0, N=10))
    assert c.kind == "Generic" and c.order == n


def test_classify_flat():
    assert classify(ModelConfig(n=2, alpha=0.58566, N=16)).kind == "Flat"


@pytest.mark.parametrize("n", [2, 3])
def test_classify_dirac(n):
    assert classify(ModelConfig(n=n, alpha=1.45282, N=12)).kind == "Dirac"


def test_classify_serialises():
    d = classify(ModelConfig(n=2, alpha=1.0, N=6)).to_dict()
    assert d["class"] == "Generic" and d["order"] == 2 and len(d["fits"]) == 3
