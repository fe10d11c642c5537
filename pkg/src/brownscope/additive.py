"""Additive-perturbation lifetime machinery.

For a normal reference operator with spectral law mu, perturbed additively
by a freely independent (elliptic) Gaussian family at time t, the domain of
interest is

    Sigma_t = { lam : T(lam) < t },   T(lam) = 1 / integral |xi - lam|^-2 dmu,

with T = 0 where the integral diverges.  Points outside the closure of
Sigma_t are reached by characteristics of the PDE  dS/dt = eps (dS/deps)^2
that start at eps0 = 0, and along those characteristics the closed forms

    eps(t) = eps0 (1 - t p0)^2,      p(t) = p0 / (1 - t p0)

hold, with p0 the regularized inverse-square integral at eps0.  The product
sqrt(eps) p is conserved.  Everything here works with those closed forms;
no ODE stepping is needed on the additive side.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import region as _region
from .errors import (BadGamma, InsideDomain, InversionFailed,
                     LifetimeExceeded, NegativeEpsilon)
from .measures import (SpectralMeasure, cauchy_transform, neg2_trace,
                       neg4_trace, reg_resolvent, reg_resolvent_deps)

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Time and covariance parameters of the perturbation.

    gamma is the second mixed moment of the elliptic family; |gamma| <= t
    is required (gamma = 0 is the circular case, gamma = t the semicircular
    one)."""

    t: float
    gamma: complex = 0j

    def __post_init__(self):
        if not (self.t > 0):
            raise ValueError("t must be positive")
        if abs(self.gamma) > self.t * (1 + 1e-12):
            raise BadGamma(f"|gamma| = {abs(self.gamma):.6g} exceeds t = {self.t:.6g}")


@dataclass(frozen=True)
class HamiltonState:
    epsilon: float
    p_epsilon: float
    elapsed: float


class Membership(enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Verdict(enum.Enum):
    OUTSIDE_SPECTRUM = "outside-spectrum"
    UNDETERMINED = "undetermined"


def flow_additive(eps0: float, p0: float, t: float) -> HamiltonState:
    """Closed-form characteristic state at time t from (eps0, p0).

    Valid strictly before the lifetime 1/p0; at or past it the flow has
    blown up and LifetimeExceeded is raised.  p0 = 0 freezes the flow.
    """
    if eps0 < 0 or p0 < 0:
        raise ValueError("eps0 and p0 must be nonnegative")
    if p0 > 0 and t >= 1.0 / p0:
        raise LifetimeExceeded(f"t = {t:.6g} is past the lifetime {1.0 / p0:.6g}")
    shrink = 1.0 - t * p0
    return HamiltonState(eps0 * shrink * shrink, p0 / shrink, t)


def T_additive(mu_x: SpectralMeasure, lam):
    """Lifetime of the eps0 -> 0 characteristic at lam: the reciprocal of
    the inverse-square integral, 0 where that integral diverges (IEEE
    1/inf = 0 does the right thing, and the integral is never zero for a
    probability measure)."""
    return 1.0 / neg2_trace(mu_x, lam)


def sigma_additive_membership(mu_x: SpectralMeasure, lam, t: float,
                              tol: float = MEMBERSHIP_TOL) -> Membership:
    """Classify lam against Sigma_t with a relative tolerance band around
    the level T = t."""
    T = float(T_additive(mu_x, lam))
    band = tol * max(abs(t), 1e-300)
    if T < t - band:
        return Membership.INSIDE
    if T > t + band:
        return Membership.OUTSIDE
    return Membership.BOUNDARY


def spectral_test_additive(mu_x: SpectralMeasure, sigma_x_distance, lam,
                           t: float, tol: float = MEMBERSHIP_TOL) -> Verdict:
    """One-sided exclusion test for the spectrum of the perturbed operator:
    a point with positive distance to the reference spectrum AND lifetime
    exceeding t is certified outside.  Everything else is undetermined
    (the test never certifies membership).

    sigma_x_distance(lam) must return the distance from lam to the
    spectrum of the unperturbed operator.
    """
    if sigma_x_distance(lam) <= 0:
        return Verdict.UNDETERMINED
    if sigma_additive_membership(mu_x, lam, t, tol) is Membership.OUTSIDE:
        return Verdict.OUTSIDE_SPECTRUM
    return Verdict.UNDETERMINED


# ---------------------------------------------------------------------------
# analytic extension of the regularized trace across eps = 0
# ---------------------------------------------------------------------------


def _eps_of_eps0(mu_x, lam, t, eps0):
    p = reg_resolvent(mu_x, lam, eps0)
    shrink = 1.0 - t * p
    return eps0 * shrink * shrink, p, shrink


def analytic_extension_trace(mu_x: SpectralMeasure, lam, t: float,
                             eps_samples, max_iter: int = 100):
    """Values of the analytically extended d S / d eps at time t.

    For lam with lifetime T(lam) > t the map eps0 -> eps0 (1 - t p(eps0))^2
    is invertible near 0 (including a margin of small negative eps0, see
    extension_margin); the extension evaluates p / (1 - t p) at the
    preimage eps0 of each requested eps.  Newton iteration with the
    analytic derivative, seeded at eps0 = eps; InversionFailed after
    max_iter steps without convergence.

    Returns a float array shaped like eps_samples.
    """
    eps_arr = np.atleast_1d(np.asarray(eps_samples, dtype=float))
    out = np.empty(eps_arr.shape)
    for idx, eps in enumerate(eps_arr):
        if eps == 0.0:
            p = reg_resolvent(mu_x, lam, 0.0)
            shrink = 1.0 - t * p
            if shrink <= 0:
                raise InversionFailed(
                    "lam is not outside the closed time-t domain")
            out[idx] = p / shrink
            continue
        eps0 = float(eps)
        ok = False
        for _ in range(max_iter):
            try:
                f, p, shrink = _eps_of_eps0(mu_x, lam, t, eps0)
            except NegativeEpsilon as exc:
                raise InversionFailed(
                    f"eps = {eps:.3g} is past the invertibility margin") from exc
            if shrink <= 0:
                raise InversionFailed(
                    f"eps = {eps:.3g} drove the Newton iterate into the domain")
            resid = f - eps
            if abs(resid) <= 1e-15 * (abs(eps) + 1e-30) + 1e-300:
                ok = True
                break
            dp = reg_resolvent_deps(mu_x, lam, eps0)
            deriv = shrink * shrink - 2.0 * eps0 * t * shrink * dp
            if deriv <= 0:
                raise InversionFailed("regularization map lost invertibility")
            step = resid / deriv
            eps0 -= step
            if abs(step) <= 1e-16 * (abs(eps0) + 1e-30):
                ok = True
                break
        f, p, shrink = _eps_of_eps0(mu_x, lam, t, eps0)
        if not ok and abs(f - eps) > 1e-10 * (abs(eps) + 1e-12):
            raise InversionFailed(f"Newton did not converge for eps = {eps:.3g}")
        out[idx] = p / shrink
    if np.ndim(eps_samples) == 0:
        return float(out[0])
    return out


def extension_margin(mu_x: SpectralMeasure, lam, t: float) -> float:
    """Half-width delta of the eps interval around 0 on which the extension
    is defined: the image of the largest interval (eps0_min, 0] on which
    eps0 -> eps(t) stays invertible and the integrand stays bounded.
    Located by bisection on the first failure going down from 0."""
    d = float(np.min(mu_x.min_node_distance(lam)))
    floor = -(d * d) * (1.0 - 1e-9)

    def admissible(e0):
        try:
            p = reg_resolvent(mu_x, lam, e0)
        except NegativeEpsilon:
            return False
        shrink = 1.0 - t * p
        if shrink <= 0:
            return False
        dp = reg_resolvent_deps(mu_x, lam, e0)
        return shrink * shrink - 2.0 * e0 * t * shrink * dp > 0

    if not admissible(0.0):
        return 0.0
    if admissible(floor):
        good = floor
    else:
        bad, good = floor, 0.0
        while good - bad > 1e-14 * abs(floor):
            mid = 0.5 * (bad + good)
            if admissible(mid):
                good = mid
            else:
                bad = mid
    eps_min, _, _ = _eps_of_eps0(mu_x, lam, t, good)
    return abs(eps_min)


# ---------------------------------------------------------------------------
# push-forward map and its image region
# ---------------------------------------------------------------------------


def phi_formula(mu_x: SpectralMeasure, gamma: complex, lam):
    """lam + gamma * G(lam): the exterior evaluation of the push-forward
    map, valid up to (and limiting onto) the domain boundary."""
    arr = np.asarray(lam, dtype=complex)
    out = arr + gamma * cauchy_transform(mu_x, arr)
    return out[()] if arr.ndim == 0 else out


def phi_map(mu_x: SpectralMeasure, params: ModelParams, lam):
    """Push-forward map on the exterior of the closed time-t domain.
    Raises InsideDomain unless lam is strictly outside (boundary included
    in the refusal; use phi_formula for limiting boundary evaluation)."""
    m = sigma_additive_membership(mu_x, lam, params.t)
    if m is not Membership.OUTSIDE:
        raise InsideDomain(f"lam = {lam} is not strictly outside the domain")
    if np.min(mu_x.support_distance(lam)) <= mu_x.guard_band:
        raise InsideDomain(f"lam = {lam} touches the reference support")
    return phi_formula(mu_x, params.gamma, lam)


def e_region(mu_x: SpectralMeasure, params: ModelParams,
             boundary: _region.Boundary) -> _region.Boundary:
    """Image of the domain boundary under the push-forward map, evaluated
    by the exterior formula limiting onto the boundary."""
    return _region.map_boundary(
        boundary, lambda z: phi_formula(mu_x, params.gamma, z))


def sigma_boundary(mu_x: SpectralMeasure, t: float, bounds,
                   nx: int = 512, ny: int = 512) -> _region.Boundary:
    """Marching-squares extraction of the T = t level set."""
    grid = _region.evaluate_grid(lambda z: T_additive(mu_x, z), bounds, nx, ny)
    return _region.extract_levelset(grid, t)


def laplacian_identity_check(mu_x: SpectralMeasure, lam, h: float = 1e-3):
    """Five-point Laplacian of 1/T against the fourth-order inverse moment.

    Returns (lhs, rhs): lhs is the finite-difference Laplacian of the
    inverse lifetime at lam, rhs the integral of |xi - lam|^-4.  The two
    are proportional with a constant factor; the factor is left to the
    caller to measure, not hard-coded here.
    """
    lam = complex(lam)
    stencil = neg2_trace(mu_x, np.array([lam + h, lam - h,
                                         lam + 1j * h, lam - 1j * h, lam]))
    lhs = (stencil[0] + stencil[1] + stencil[2] + stencil[3]
           - 4.0 * stencil[4]) / (h * h)
    rhs = neg4_trace(mu_x, lam)
    return float(lhs), float(rhs)
