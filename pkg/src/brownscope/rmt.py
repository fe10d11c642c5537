"""Finite-N matrix ensembles used to cross-check the analytic predictions.

Randomness is counter-based: every matrix draw owns a Philox generator
keyed by (seed, stream), so draws are reproducible independently of the
order in which they happen.  Helper streams derived from a base stream
use disjoint high bits, keeping parallel factor draws collision-free.

Normalizations.  The Hermitian (GUE-type) family is scaled so the
normalized trace of the square tends to 1 (semicircle on [-2, 2]).  The
time-t rotation-invariant family has entry variance t/n, so its empirical
spectrum fills the disk of radius sqrt(t).  The elliptic family with
second mixed moment gamma is e^{i arg(gamma)/2} (a X + i b Y) with
a^2 = (t + |gamma|)/2, b^2 = (t - |gamma|)/2 and X, Y independent
Hermitian draws.  The time-t multiplicative family is approximated by the
ordered product of k left factors

    I + i G_j / sqrt(k) - (gamma / (2k)) I,      G_j elliptic(t, gamma) draws

with k = 200 by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BadGamma
from .region import Boundary, distance_to_boundary, point_in_region

_DEFAULT_K = 200
_STREAM_STRIDE = 1 << 20


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(stream & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_ginibre(n: int, t: float, seed: int, stream: int = 0) -> np.ndarray:
    """Rotation-invariant Gaussian matrix with entry variance t/n."""
    rng = _rng(seed, stream)
    scale = np.sqrt(t / (2.0 * n))
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))


def _sample_hermitian(n: int, rng) -> np.ndarray:
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    return (a + a.conj().T) / np.sqrt(2.0 * n)


def sample_elliptic(n: int, t: float, gamma: complex, seed: int,
                    stream: int = 0) -> np.ndarray:
    """Elliptic Gaussian matrix: trace of the square tends to gamma, trace
    of the square modulus to t.  gamma = 0 is the rotation-invariant case,
    gamma = t the Hermitian one."""
    gamma = complex(gamma)
    if abs(gamma) > t * (1 + 1e-12):
        raise BadGamma(f"|gamma| = {abs(gamma):.6g} exceeds t = {t:.6g}")
    rng = _rng(seed, stream)
    a = np.sqrt((t + abs(gamma)) / 2.0)
    b = np.sqrt(max(t - abs(gamma), 0.0) / 2.0)
    theta = 0.5 * np.angle(gamma) if gamma != 0 else 0.0
    x = _sample_hermitian(n, rng)
    y = _sample_hermitian(n, rng)
    return np.exp(1j * theta) * (a * x + 1j * b * y)


def sample_haar_unitary(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Haar-distributed unitary via QR of a Gaussian matrix with the phase
    normalization that makes the factorization unique."""
    rng = _rng(seed, stream)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def multiplicities(weights, n: int) -> np.ndarray:
    """Largest-remainder apportionment of n slots to the given weights."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    raw = w * n
    counts = np.floor(raw).astype(int)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def sample_atomic(n: int, positions, weights, seed: int,
                  stream: int = 0) -> np.ndarray:
    """Deterministic-spectrum normal matrix: a diagonal of the atoms (with
    largest-remainder multiplicities) conjugated by a Haar unitary."""
    pos = np.asarray(positions, dtype=complex)
    counts = multiplicities(weights, n)
    diag = np.repeat(pos, counts)
    u = sample_haar_unitary(n, seed, stream)
    return (u * diag[None, :]) @ u.conj().T


def sample_atomic_unitary(n: int, mu, seed: int, stream: int = 0) -> np.ndarray:
    if mu.support != "circle" or mu.kind != "atomic":
        raise ValueError("needs an atomic circle-supported law")
    return sample_atomic(n, mu.positions, mu.weights, seed, stream)


def sample_atomic_positive(n: int, mu, seed: int, stream: int = 0) -> np.ndarray:
    if mu.support != "nonneg" or mu.kind != "atomic":
        raise ValueError("needs an atomic nonneg-supported law")
    return sample_atomic(n, mu.positions, mu.weights, seed, stream)


def sample_b(n: int, t: float, gamma: complex, k: int = _DEFAULT_K,
             seed: int = 0, stream: int = 0) -> np.ndarray:
    """Multiplicative Gaussian family at time t, product approximation
    with k factors.  Factor j draws its elliptic increment from the
    derived stream, so the draw set is independent of evaluation order."""
    if k < 1:
        raise ValueError("k must be at least 1")
    gamma = complex(gamma)
    out = np.eye(n, dtype=complex)
    drift = gamma / (2.0 * k)
    for j in range(k):
        g = sample_elliptic(n, t, gamma, seed, stream * _STREAM_STRIDE + j + 1)
        factor = np.eye(n, dtype=complex) + 1j * g / np.sqrt(k) \
            - drift * np.eye(n, dtype=complex)
        out = out @ factor
    return out


# ---------------------------------------------------------------------------
# empirical probes
# ---------------------------------------------------------------------------


def shifted_singular_values(a: np.ndarray, lam: complex) -> np.ndarray:
    n = a.shape[0]
    return np.linalg.svd(a - complex(lam) * np.eye(n, dtype=complex),
                         compute_uv=False)


def empirical_S(a: np.ndarray, lam: complex, eps) -> float | np.ndarray:
    """Normalized log determinant probe: mean of log(s_i^2 + eps) over the
    singular values of a - lam.  eps may be an array (one decomposition is
    reused for all values)."""
    s2 = shifted_singular_values(a, lam) ** 2
    eps_arr = np.asarray(eps, dtype=float)
    vals = np.mean(np.log(s2[None, :] + eps_arr.reshape(-1, 1)), axis=1)
    return float(vals[0]) if eps_arr.ndim == 0 else vals.reshape(eps_arr.shape)


def empirical_dSde(a: np.ndarray, lam: complex, eps) -> float | np.ndarray:
    """Normalized resolvent-trace probe: mean of 1/(s_i^2 + eps)."""
    s2 = shifted_singular_values(a, lam) ** 2
    eps_arr = np.asarray(eps, dtype=float)
    vals = np.mean(1.0 / (s2[None, :] + eps_arr.reshape(-1, 1)), axis=1)
    return float(vals[0]) if eps_arr.ndim == 0 else vals.reshape(eps_arr.shape)


@dataclass(frozen=True)
class EmpiricalSpectrum:
    """Eigenvalues of one ensemble draw plus the descriptor that produced
    it (kind, n, t, gamma, k, seed, stream as applicable)."""

    eigenvalues: np.ndarray
    ensemble: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def to_json_dict(self) -> dict:
        return {
            "schema": "brownscope-spectrum/1",
            "ensemble": self.ensemble,
            "eigenvalues": [[float(z.real), float(z.imag)]
                            for z in self.eigenvalues],
        }


def eigenvalues(a: np.ndarray) -> np.ndarray:
    return np.linalg.eigvals(a)


def support_report(spectrum: EmpiricalSpectrum, region_test=None,
                   dilation: float = 0.0,
                   boundary: Boundary | None = None) -> dict:
    """Fraction of eigenvalues inside a region, optionally dilated.

    region_test(z) -> bool is the raw membership predicate; when a
    boundary polyline is supplied the dilation is applied through the
    distance to the polyline (a point within `dilation` of the boundary
    counts as inside), and region_test defaults to the even-odd test
    against that boundary."""
    eig = spectrum.eigenvalues
    if region_test is None:
        if boundary is None:
            raise ValueError("need region_test or boundary")
        inside = point_in_region(boundary, eig)
    else:
        inside = np.asarray([bool(region_test(z)) for z in eig])
    if dilation > 0.0:
        if boundary is None:
            raise ValueError("dilation needs a boundary polyline")
        near = distance_to_boundary(boundary, eig) <= dilation
        inside = inside | near
    frac = float(np.count_nonzero(inside)) / len(eig)
    return {
        "n": int(len(eig)),
        "inside": int(np.count_nonzero(inside)),
        "fraction": frac,
        "dilation": float(dilation),
    }
