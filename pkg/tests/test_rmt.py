"""Matrix ensembles and empirical probes."""

import numpy as np
import pytest

from brownscope import (BadGamma, Boundary, Chain, EmpiricalSpectrum,
                        SpectralMeasure, eigenvalues, empirical_S,
                        empirical_dSde, multiplicities, sample_atomic_positive,
                        sample_atomic_unitary, sample_b, sample_elliptic,
                        sample_ginibre, sample_haar_unitary,
                        shifted_singular_values, support_report)


# --- reproducible streams -------------------------------------------------------

def test_ginibre_reproducible_and_stream_separated():
    a = sample_ginibre(50, 1.0, seed=7, stream=0)
    b = sample_ginibre(50, 1.0, seed=7, stream=0)
    assert np.array_equal(a, b)
    c = sample_ginibre(50, 1.0, seed=7, stream=1)
    assert not np.allclose(a, c)
    d = sample_ginibre(50, 1.0, seed=8, stream=0)
    assert not np.allclose(a, d)


def test_ginibre_trace_moments():
    n = 400
    g = sample_ginibre(n, 1.0, seed=3)
    assert abs(np.trace(g @ g.conj().T) / n - 1.0) < 0.05
    assert abs(np.trace(g @ g) / n) < 0.05


def test_haar_unitary():
    u = sample_haar_unitary(100, seed=5)
    err = u @ u.conj().T - np.eye(100)
    assert np.max(np.abs(err)) < 1e-12
    assert abs(abs(np.linalg.det(u)) - 1.0) < 1e-9
    assert np.array_equal(u, sample_haar_unitary(100, seed=5))


# --- elliptic family ------------------------------------------------------------

def test_elliptic_hermitian_at_gamma_equals_t():
    g = sample_elliptic(200, 1.0, 1.0, seed=11)
    assert np.max(np.abs(g - g.conj().T)) < 1e-13
    assert np.max(np.abs(np.linalg.eigvals(g).imag)) < 1e-10


def test_elliptic_trace_moments():
    n = 400
    g = sample_elliptic(n, 1.0, 0.5, seed=13)
    assert abs(np.trace(g @ g) / n - 0.5) < 0.05
    assert abs(np.trace(g @ g.conj().T) / n - 1.0) < 0.05
    h = sample_elliptic(n, 1.0, 0.3j, seed=13)
    assert abs(np.trace(h @ h) / n - 0.3j) < 0.05


def test_elliptic_rejects_large_gamma():
    with pytest.raises(BadGamma):
        sample_elliptic(10, 0.5, 0.6, seed=1)


# --- deterministic spectra --------------------------------------------------------

def test_atomic_unitary_exact_multiplicities():
    mu = SpectralMeasure.atomic([1.0, 1j, -1.0, -1j], [0.25] * 4, "circle")
    a = sample_atomic_unitary(400, mu, seed=2)
    eig = eigenvalues(a)
    for root in (1.0, 1j, -1.0, -1j):
        assert np.sum(np.abs(eig - root) < 1e-8) == 100


def test_atomic_positive_exact_spectrum():
    mu = SpectralMeasure.atomic([1.0, 2.0], [0.5, 0.5], "nonneg")
    a = sample_atomic_positive(10, mu, seed=9)
    assert np.max(np.abs(a - a.conj().T)) < 1e-13
    eig = np.linalg.eigvalsh(a)
    assert np.sum(np.abs(eig - 1.0) < 1e-10) == 5
    assert np.sum(np.abs(eig - 2.0) < 1e-10) == 5


def test_multiplicities_largest_remainder():
    assert multiplicities([1, 1, 1], 100).tolist() == [34, 33, 33]
    assert multiplicities([0.5, 0.5], 7).tolist() == [4, 3]
    assert multiplicities([2, 1], 10).tolist() == [7, 3]
    assert multiplicities([0.7, 0.2, 0.1], 1000).sum() == 1000


# --- multiplicative products --------------------------------------------------------

def test_sample_b_identity_at_tiny_time():
    b = sample_b(100, 1e-6, 0.0, k=50, seed=4)
    assert np.max(np.abs(b - np.eye(100))) < 1e-2


def test_sample_b_hermitian_increments_stay_near_circle():
    b = sample_b(200, 1.0, 1.0, k=100, seed=6)
    mods = np.abs(eigenvalues(b))
    frac = np.mean((mods > 0.95) & (mods < 1.05))
    assert frac >= 0.95


def test_sample_b_reproducible():
    b1 = sample_b(30, 0.5, 0.25, k=20, seed=12, stream=3)
    b2 = sample_b(30, 0.5, 0.25, k=20, seed=12, stream=3)
    assert np.array_equal(b1, b2)
    b3 = sample_b(30, 0.5, 0.25, k=20, seed=12, stream=4)
    assert not np.allclose(b1, b3)


# --- probes ----------------------------------------------------------------------

def test_empirical_S_closed_values():
    zero = np.zeros((5, 5), dtype=complex)
    assert empirical_S(zero, 0.0, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert empirical_dSde(zero, 0.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    d = np.diag([1.0 + 0j, 2.0 + 0j])
    assert empirical_S(d, 0.0, 0.0) == pytest.approx(np.log(2.0), abs=1e-12)
    s = shifted_singular_values(d, 0.0)
    assert sorted(s) == pytest.approx([1.0, 2.0])


def test_dSde_matches_finite_difference():
    a = sample_ginibre(50, 1.0, seed=3)
    lam, eps, h = 0.7 + 0.1j, 0.3, 1e-5
    fd = (empirical_S(a, lam, eps + h) - empirical_S(a, lam, eps - h)) / (2 * h)
    assert empirical_dSde(a, lam, eps) == pytest.approx(fd, rel=1e-6)


def test_dSde_decreasing_in_eps():
    a = sample_ginibre(40, 1.0, seed=8)
    eps = np.linspace(0.01, 2.0, 25)
    vals = empirical_dSde(a, 0.3, eps)
    assert vals.shape == eps.shape
    assert np.all(np.diff(vals) < 0)


def test_probe_eps_array_matches_scalars():
    a = sample_ginibre(30, 1.0, seed=10)
    eps = np.array([0.1, 0.5, 1.5])
    sv = empirical_S(a, 1j, eps)
    dv = empirical_dSde(a, 1j, eps)
    for i, e in enumerate(eps):
        assert sv[i] == pytest.approx(empirical_S(a, 1j, float(e)))
        assert dv[i] == pytest.approx(empirical_dSde(a, 1j, float(e)))


# --- reporting --------------------------------------------------------------------

def test_spectrum_json_dict():
    spec = EmpiricalSpectrum(np.array([1 + 2j, -0.5j]), {"kind": "test", "n": 2})
    d = spec.to_json_dict()
    assert d["schema"] == "brownscope-spectrum/1"
    assert d["eigenvalues"] == [[1.0, 2.0], [0.0, -0.5]]
    assert spec.n == 2


def test_support_report_predicates():
    u = sample_haar_unitary(50, seed=1)
    spec = EmpiricalSpectrum(eigenvalues(u), {"kind": "haar", "n": 50})
    assert support_report(spec, region_test=lambda z: abs(z) < 1.01)["fraction"] == 1.0
    assert support_report(spec, region_test=lambda z: abs(z) < 0.5)["inside"] == 0


def test_support_report_boundary_dilation():
    u = sample_haar_unitary(50, seed=1)
    spec = EmpiricalSpectrum(eigenvalues(u), {"kind": "haar", "n": 50})
    ang = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    circle = Boundary([Chain(np.exp(1j * ang), True)], 0.0)
    rep = support_report(spec, dilation=0.02, boundary=circle)
    assert rep["fraction"] == 1.0
    assert rep["dilation"] == 0.02
    with pytest.raises(ValueError):
        support_report(spec)
    with pytest.raises(ValueError):
        support_report(spec, region_test=lambda z: True, dilation=0.1)
