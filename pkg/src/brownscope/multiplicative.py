"""Multiplicative-perturbation lifetime machinery.

Two reference situations share this module.  A unitary reference with law
mu_u on the unit circle, multiplied by a free multiplicative Gaussian
family at time t, has lifetime

    T(lam) = (1/ptilde) * log(|lam|^2) / (|lam|^2 - 1),
    ptilde  = integral of |lam - xi|^-2 dmu_u,

with the limiting factor 1 on |lam| = 1, T(0) = +inf, and T = 0 where
ptilde diverges.  A positive reference with law mu_x on the nonnegative
half-line has

    T(lam) = log(|lam|^2 p0 / p2) / (|lam|^2 p0 - p2),
    p0 = integral |xi - lam|^-2 dmu_x,   p2 = integral xi^2 |xi - lam|^-2 dmu_x,

with the limit 1/p2 where the numerator and denominator vanish together.
Both formulas switch to a series branch near the degenerate locus.

The regularized log potential S(t, lam, eps) obeys

    dS/dt = eps p_eps (1 + (|lam|^2 - eps) p_eps - x p_x - y p_y),

and the characteristic system used by hamilton_flow_mult is the standard
Hamiltonian lift of that PDE (H = -dS/dt with momenta substituted),
written in the complex momentum p_lam = (p_x - i p_y)/2:

    dlam/dt  = eps p_eps lam
    deps/dt  = -eps (1 + 2(|lam|^2 - eps) p_eps - 2 Re(lam p_lam))
    dplam/dt = eps p_eps (p_eps conj(lam) - p_lam)
    dpeps/dt = p_eps (1 + (|lam|^2 - 2 eps) p_eps - 2 Re(lam p_lam))

The sign convention is pinned by two facts: the same convention reproduces
the additive closed forms, and at eps0 = 0 the p_eps equation closes into
the Riccati equation dp/dt = p (2 Re J(lam) + |lam|^2 p) whose blow-up time
is exactly the unitary lifetime formula above, for every circle law.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import region as _region
from .additive import MEMBERSHIP_TOL, Membership, ModelParams, Verdict
from .errors import (BlowUp, ContinuationFailed, EvaluationOnSupport,
                     InsideDomain, OriginExcluded, WrongSupportKind)
from .measures import (SpectralMeasure, _blocked_sum, cauchy_transform,
                       herglotz, reg_resolvent)

_SERIES_SWITCH = 1e-8


@dataclass(frozen=True)
class HamiltonStateMult:
    lam: complex
    epsilon: float
    p_lambda: complex
    p_epsilon: float
    elapsed: float


class DRegion(enum.Enum):
    INSIDE_D = "inside-d"
    OUTSIDE_D = "outside-d"


class MultVerdict(enum.Enum):
    OUTSIDE_SPECTRUM = "outside-spectrum"
    UNDETERMINED = "undetermined"
    ZERO_ATOM_CASE = "zero-atom-case"


@dataclass(frozen=True)
class MultTestResult:
    verdict: MultVerdict
    zero_atom: bool | None = None


def _log_ratio_factor(u):
    """log(1 + u) / u with the series branch 1 - u/2 + u^2/3 below the
    switch threshold; handles u = -1 (log 0) and infinite u."""
    u = np.asarray(u, dtype=float)
    small = np.abs(u) < _SERIES_SWITCH
    safe = np.where(small, 1.0, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log1p(safe) / safe
    series = 1.0 - u / 2.0 + u * u / 3.0
    return np.where(small, series, direct)


# ---------------------------------------------------------------------------
# unitary reference
# ---------------------------------------------------------------------------


def p_tilde_unitary(mu_u: SpectralMeasure, lam):
    """Inverse-square integral against a circle law; +inf at atoms."""
    if mu_u.support != "circle":
        raise WrongSupportKind("p_tilde_unitary needs a circle-supported law")
    return reg_resolvent(mu_u, lam, 0.0)


def T_mult_unitary(mu_u: SpectralMeasure, lam):
    """Unitary-case lifetime.  Vectorized; returns +inf at lam = 0 and 0
    where the inverse-square integral diverges."""
    arr = np.asarray(lam, dtype=complex)
    scalar = arr.ndim == 0
    p = np.asarray(p_tilde_unitary(mu_u, arr), dtype=float)
    r2 = np.abs(arr) ** 2
    factor = _log_ratio_factor(r2 - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        T = np.where(np.isinf(p), 0.0, factor / np.where(np.isinf(p), 1.0, p))
    T = np.where(r2 == 0.0, np.inf, T)
    return float(T[()]) if scalar else T


def membership_unitary(mu_u: SpectralMeasure, lam, t: float,
                       tol: float = MEMBERSHIP_TOL) -> Membership:
    T = float(T_mult_unitary(mu_u, lam))
    band = tol * max(abs(t), 1e-300)
    if T < t - band:
        return Membership.INSIDE
    if T > t + band:
        return Membership.OUTSIDE
    return Membership.BOUNDARY


def psi_formula(mu_u: SpectralMeasure, gamma: complex, lam):
    """lam * exp(gamma * J(lam)) with J the half-plane transform of mu_u;
    the exterior evaluation of the unitary push-forward map."""
    arr = np.asarray(lam, dtype=complex)
    out = arr * np.exp(gamma * herglotz(mu_u, arr))
    return out[()] if arr.ndim == 0 else out


def psi_map(mu_u: SpectralMeasure, params: ModelParams, lam):
    """Unitary push-forward map, refused unless lam is strictly outside
    the closed time-t domain (psi_formula is the boundary-limit escape)."""
    if membership_unitary(mu_u, lam, params.t) is not Membership.OUTSIDE:
        raise InsideDomain(f"lam = {lam} is not strictly outside the domain")
    return psi_formula(mu_u, params.gamma, lam)


def sigma_boundary_unitary(mu_u: SpectralMeasure, t: float, bounds,
                           nx: int = 512, ny: int = 512) -> _region.Boundary:
    grid = _region.evaluate_grid(lambda z: T_mult_unitary(mu_u, z),
                                 bounds, nx, ny)
    return _region.extract_levelset(grid, t)


def curvature_check_circle(mu_u: SpectralMeasure, theta: float) -> float:
    """Closed-form second angular derivative of the inverse lifetime along
    the unit circle:

        d^2/dtheta^2 (1/T(e^{i theta}))
            = (1/2) integral (2 + cos(theta - phi)) / (1 - cos(theta - phi))^2 dmu_u,

    strictly positive, so 1/T is strictly convex in the angle between
    atoms.  Refuses evaluation on the support."""
    if mu_u.support != "circle":
        raise WrongSupportKind("curvature check needs a circle-supported law")
    z = np.exp(1j * float(theta))
    if float(np.min(mu_u.min_node_distance(z))) <= mu_u.guard_band:
        raise EvaluationOnSupport(f"theta = {theta:.6g} touches the support")
    phi = np.angle(mu_u.positions)
    c = np.cos(float(theta) - phi)
    val = 0.5 * np.sum(mu_u.prob_weights * (2.0 + c) / (1.0 - c) ** 2)
    return float(val)


# ---------------------------------------------------------------------------
# Hamiltonian flow (unitary-case PDE characteristics)
# ---------------------------------------------------------------------------


def _p_lambda_init(mu: SpectralMeasure, lam0: complex, eps0: float) -> complex:
    # p_lam(0) = - integral conj(xi - lam0) / (|xi - lam0|^2 + eps0) dmu;
    # at eps0 = 0 this is the Cauchy transform at lam0
    return complex(_blocked_sum(
        mu, lam0,
        lambda zb, xb: -np.conj(xb - zb) / (np.abs(xb - zb) ** 2 + eps0)))


def _mult_rhs(_t, y):
    x, yi, eps, plr, pli, pe = y
    r2 = x * x + yi * yi
    re_lp = x * plr - yi * pli  # Re(lam * p_lam)
    inner = 1.0 + (r2 - eps) * pe - 2.0 * re_lp
    dx = eps * pe * x
    dy = eps * pe * yi
    deps = -eps * (inner + (r2 - eps) * pe)
    # dplam/dt = eps pe (pe conj(lam) - plam)
    dplr = eps * pe * (pe * x - plr)
    dpli = eps * pe * (-pe * yi - pli)
    dpe = pe * (inner - eps * pe)
    return [dx, dy, deps, dplr, dpli, dpe]


def hamilton_flow_mult(mu_u: SpectralMeasure, lam0, eps0: float, t: float,
                       tolerance: float = 1e-8, rtol: float = 1e-10,
                       atol: float = 1e-12) -> HamiltonStateMult:
    """Integrate the characteristic system from (lam0, eps0) for time t.

    Initial momenta are read off the regularized log potential itself:
    p_eps(0) is the regularized inverse-square integral and p_lam(0) its
    complex spatial gradient.  Adaptive RK with step rejection (RK45).

    Raises BlowUp when p_eps crosses 1/tolerance before time t; the
    exception carries the estimated blow-up time (event time plus the
    tail of the frozen-coefficient Riccati equation, so the estimate is
    far more precise than the threshold itself).
    """
    lam0 = complex(lam0)
    eps0 = float(eps0)
    if eps0 < 0:
        raise ValueError("eps0 must be nonnegative")
    pe0 = float(reg_resolvent(mu_u, lam0, eps0))
    if np.isinf(pe0):
        raise BlowUp(0.0, "initial momentum already divergent")
    pl0 = _p_lambda_init(mu_u, lam0, eps0)
    y0 = [lam0.real, lam0.imag, eps0, pl0.real, pl0.imag, pe0]
    p_max = 1.0 / float(tolerance)

    def blow_event(_tt, y):
        return y[5] - p_max

    blow_event.terminal = True
    blow_event.direction = 1.0

    sol = solve_ivp(_mult_rhs, (0.0, float(t)), y0, method="RK45",
                    rtol=rtol, atol=atol, events=blow_event)
    if not sol.success and sol.status != 1:
        raise RuntimeError(f"flow integration failed: {sol.message}")
    if sol.status == 1:  # event hit
        te = float(sol.t_events[0][0])
        ye = sol.y_events[0][0]
        x, yi, eps, plr, pli, pe = ye
        r2 = x * x + yi * yi
        c = 1.0 - 2.0 * (x * plr - yi * pli)
        B = r2 - 2.0 * eps
        if B > 0:
            if abs(c) > 1e-300:
                tail = np.log1p(c / (B * pe)) / c
            else:
                tail = 1.0 / (B * pe)
        else:
            tail = 0.0
        raise BlowUp(te + tail)
    yf = sol.y[:, -1]
    return HamiltonStateMult(complex(yf[0], yf[1]), float(yf[2]),
                             complex(yf[3], yf[4]), float(yf[5]), float(t))


def blow_up_time(mu_u: SpectralMeasure, lam0, eps0: float,
                 t_max: float = 50.0, tolerance: float = 1e-8,
                 rtol: float = 1e-10) -> float:
    """Blow-up time of the flow started at (lam0, eps0), +inf if the flow
    survives to t_max."""
    try:
        hamilton_flow_mult(mu_u, lam0, eps0, t_max,
                           tolerance=tolerance, rtol=rtol)
    except BlowUp as b:
        return b.t_detected
    return np.inf


# ---------------------------------------------------------------------------
# positive reference
# ---------------------------------------------------------------------------


def p0_p2_positive(mu_x: SpectralMeasure, lam):
    """The pair (p0, p2): inverse-square integral and xi^2-weighted
    inverse-square integral of a nonnegative-line law.  Extended reals."""
    if mu_x.support != "nonneg":
        raise WrongSupportKind("p0_p2_positive needs a nonneg-supported law")
    with np.errstate(divide="ignore"):
        p0 = _blocked_sum(mu_x, lam,
                          lambda zb, xb: 1.0 / np.abs(xb - zb) ** 2)
        p2 = _blocked_sum(mu_x, lam,
                          lambda zb, xb: (xb.real ** 2) / np.abs(xb - zb) ** 2)
    return p0, p2


def _T_positive_values(mu_x: SpectralMeasure, arr):
    p0, p2 = p0_p2_positive(mu_x, arr)
    p0 = np.asarray(p0, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    a = (np.abs(arr) ** 2) * p0
    diverged = np.isinf(p0) | np.isinf(p2)
    # p2 = 0 only for a pure point mass at 0; the lifetime is then infinite
    degenerate = (p2 == 0.0) & ~diverged
    b = np.where(diverged | degenerate, 1.0, p2)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (a - b) / b
        T = _log_ratio_factor(u) / b
    T = np.where(degenerate, np.inf, T)
    return np.where(diverged, 0.0, T)


def T_mult_positive(mu_x: SpectralMeasure, lam) -> float:
    """Positive-case lifetime at lam != 0: log(a/b)/(a - b) with
    a = |lam|^2 p0 and b = p2, series branch where a and b nearly agree
    (on the circle |lam|^2 p0 = p2 the value is 1/p2).  T = 0 where the
    integrals diverge."""
    arr = np.asarray(lam, dtype=complex)
    if arr.ndim == 0:
        if complex(arr) == 0:
            raise OriginExcluded("the positive-case lifetime excludes lam = 0")
        return float(_T_positive_values(mu_x, arr)[()])
    return _T_positive_values(mu_x, arr)


def membership_positive(mu_x: SpectralMeasure, lam, t: float,
                        tol: float = MEMBERSHIP_TOL) -> Membership:
    T = float(T_mult_positive(mu_x, lam))
    band = tol * max(abs(t), 1e-300)
    if T < t - band:
        return Membership.INSIDE
    if T > t + band:
        return Membership.OUTSIDE
    return Membership.BOUNDARY


def f_gamma_formula(mu_x: SpectralMeasure, gamma: complex, lam):
    """lam * exp(gamma * J(lam)): exterior evaluation of the positive-case
    push-forward map."""
    arr = np.asarray(lam, dtype=complex)
    out = arr * np.exp(gamma * herglotz(mu_x, arr))
    return out[()] if arr.ndim == 0 else out


def f_gamma_map(mu_x: SpectralMeasure, params: ModelParams, lam):
    if complex(lam) != 0 and \
            membership_positive(mu_x, lam, params.t) is not Membership.OUTSIDE:
        raise InsideDomain(f"lam = {lam} is not strictly outside the domain")
    return f_gamma_formula(mu_x, params.gamma, lam)


def _herglotz_dlam(mu_x: SpectralMeasure, lam):
    # dJ/dlam = -G(lam) - lam G'(lam), G'(lam) = -sum w/(lam - xi)^2
    g = cauchy_transform(mu_x, lam)
    gp = _blocked_sum(mu_x, lam, lambda zb, xb: -1.0 / (zb - xb) ** 2)
    return -g - np.asarray(lam) * gp


def _f_gamma_deriv(mu_x, gamma, lam):
    j = herglotz(mu_x, lam)
    return np.exp(gamma * j) * (1.0 + lam * gamma * _herglotz_dlam(mu_x, lam))


def _f_gamma_preimage(mu_x: SpectralMeasure, gamma: complex, t: float, z):
    """Newton path-following for the preimage of z under the positive-case
    push-forward map, seeded at large modulus where the map is a near
    rotation-dilation.  Returns the preimage, or None as soon as the path
    enters the closed time-t domain (then z is not exterior).  Raises
    ContinuationFailed on a stalled path."""
    z = complex(z)
    if z == 0:
        raise OriginExcluded("preimage continuation excludes z = 0")
    r_start = max(10.0 * (mu_x.support_radius() + 1.0), 2.0 * abs(z))
    z_start = z / abs(z) * r_start
    lam = z_start * np.exp(gamma / 2.0)  # at infinity f(lam) ~ lam e^{-gamma/2}

    def newton(target, lam_guess):
        cur = complex(lam_guess)
        for _ in range(40):
            try:
                val = complex(f_gamma_formula(mu_x, gamma, cur))
                err = val - target
                if abs(err) <= 1e-13 * (1.0 + abs(target)):
                    return cur
                d = complex(_f_gamma_deriv(mu_x, gamma, cur))
            except EvaluationOnSupport:
                return None  # iterate wandered onto the reference support
            if d == 0 or not np.isfinite(d):
                return None
            step = err / d
            # cap steps so the iterate cannot tunnel across the domain
            cap = 0.5 * abs(cur) + 0.1
            if abs(step) > cap:
                step *= cap / abs(step)
            cur = cur - step
        return None

    s = 0.0
    ds = 0.25
    while s < 1.0:
        s_next = min(1.0, s + ds)
        target = z_start + s_next * (z - z_start)
        nxt = newton(target, lam)
        if nxt is None:
            ds *= 0.5
            if ds < 1e-6:
                raise ContinuationFailed(
                    f"path from {z_start:.3g} to {z:.3g} stalled at s = {s:.4g}")
            continue
        lam = nxt
        s = s_next
        if float(T_mult_positive(mu_x, lam)) <= t:
            return None
        if ds < 0.25:
            ds *= 2.0
    return lam


def d_region_membership(mu_x: SpectralMeasure, params: ModelParams,
                        z) -> DRegion:
    """Membership of z in the image region D of the positive-case map:
    z is outside D exactly when its preimage path stays exterior to the
    closed time-t domain all the way in from infinity.  A stalled path is
    reported as a warning and counted as inside."""
    try:
        lam = _f_gamma_preimage(mu_x, params.gamma, params.t, z)
    except ContinuationFailed as exc:
        warnings.warn(f"continuation stalled, reporting inside: {exc}")
        return DRegion.INSIDE_D
    if lam is None:
        return DRegion.INSIDE_D
    return DRegion.OUTSIDE_D


def spectral_test_mult(kind: str, mu: SpectralMeasure, point,
                       params: ModelParams,
                       tol: float = MEMBERSHIP_TOL) -> MultTestResult:
    """One-sided spectral exclusion test for multiplicative models.

    kind = "unitary": point is certified outside the perturbed spectrum
    exactly when it is strictly outside the closed time-t domain (this
    includes point = 0, which is never in the spectrum).

    kind = "positive": point 0 is special; when 0 is outside the closed
    domain the zero-atom dichotomy applies and the result reports whether
    the reference law carries an atom at 0.  Other points are resolved
    through the preimage of the push-forward map; points whose preimage
    path enters the domain (or stalls) stay undetermined, as do points in
    the boundary tolerance band.
    """
    if kind == "unitary":
        if membership_unitary(mu, point, params.t, tol) is Membership.OUTSIDE:
            return MultTestResult(MultVerdict.OUTSIDE_SPECTRUM)
        return MultTestResult(MultVerdict.UNDETERMINED)
    if kind != "positive":
        raise ValueError(f"unknown kind {kind!r}")
    z = complex(point)
    if z == 0:
        if _zero_outside_closed_domain(mu, params.t, tol):
            w0 = _atom_mass_at_zero(mu)
            return MultTestResult(MultVerdict.ZERO_ATOM_CASE, w0 > 0)
        return MultTestResult(MultVerdict.UNDETERMINED)
    try:
        lam = _f_gamma_preimage(mu, params.gamma, params.t, z)
    except ContinuationFailed as exc:
        warnings.warn(f"continuation stalled, leaving undetermined: {exc}")
        return MultTestResult(MultVerdict.UNDETERMINED)
    if lam is None:
        return MultTestResult(MultVerdict.UNDETERMINED)
    if membership_positive(mu, lam, params.t, tol) is Membership.OUTSIDE:
        return MultTestResult(MultVerdict.OUTSIDE_SPECTRUM)
    return MultTestResult(MultVerdict.UNDETERMINED)


def _atom_mass_at_zero(mu: SpectralMeasure) -> float:
    if mu.kind != "atomic":
        return 0.0
    at_zero = np.abs(mu.positions) <= 1e-15
    return float(np.sum(mu.weights[at_zero]))


def _zero_outside_closed_domain(mu_x: SpectralMeasure, t: float,
                                tol: float = MEMBERSHIP_TOL) -> bool:
    """Probe whether 0 stays outside the closed time-t domain: lifetime
    values on shrinking rings around 0 must all exceed t, and when the law
    has an atom at 0 the radial limit of the lifetime must too."""
    pos_moduli = np.abs(mu_x.positions)
    nonzero = pos_moduli[pos_moduli > 1e-15]
    r0 = 0.05 * float(np.min(nonzero)) if nonzero.size else 1e-3
    band = tol * max(abs(t), 1e-300)
    for r in (r0, r0 / 4.0, r0 / 16.0):
        ring = r * np.exp(1j * np.linspace(0, 2 * np.pi, 16, endpoint=False))
        T = _T_positive_values(mu_x, ring)
        if np.min(T) <= t + band:
            return False
    w0 = _atom_mass_at_zero(mu_x)
    if w0 > 0:
        b = 1.0 - w0
        if b <= 0:
            return True  # the law is a point mass at 0
        T_limit = float(_log_ratio_factor(np.asarray((w0 - b) / b)) / b)
        if T_limit <= t + band:
            return False
    return True


def sigma_boundary_positive(mu_x: SpectralMeasure, t: float,
                            r_min: float = 1e-6, r_max: float | None = None,
                            n_r: int = 512, n_theta: int = 512
                            ) -> _region.Boundary:
    """Positive-case domain boundary on a log-polar grid (the domain hugs
    the origin at small t near an atom at 0, so uniform rectangular grids
    resolve it poorly).  The disk of radius r_min is excluded.  Chains cut
    by the angular seam are stitched back together in the plane."""
    if r_max is None:
        r_max = 4.0 * (mu_x.support_radius() + 1.0)
    bounds = (np.log(r_min), np.log(r_max), 0.0, 2.0 * np.pi)
    grid = _region.evaluate_grid(
        lambda w: _T_positive_values(mu_x, np.exp(w)), bounds, n_r, n_theta)
    raw = _region.extract_levelset(grid, t)
    cell = max((bounds[1] - bounds[0]) / n_r, 2.0 * np.pi / n_theta)
    chains = [_region.Chain(np.exp(c.points), c.closed) for c in raw.polylines]
    stitched = _stitch_chains(chains, rel_tol=3.0 * cell)
    return _region.Boundary(stitched, float(t))


def _stitch_chains(chains, rel_tol):
    """Join open chains whose endpoints coincide within rel_tol times the
    local modulus (seam repair after a periodic-coordinate extraction),
    then close any chain whose own ends meet."""

    def near(p, q):
        return abs(p - q) < rel_tol * max(abs(p), abs(q), 1e-12)

    open_pts = [list(c.points) for c in chains if not c.closed]
    out = [c for c in chains if c.closed]
    merged = True
    while merged and len(open_pts) > 1:
        merged = False
        for i in range(len(open_pts)):
            for j in range(i + 1, len(open_pts)):
                a, b = open_pts[i], open_pts[j]
                if near(a[-1], b[0]):
                    open_pts[i] = a + b
                elif near(a[-1], b[-1]):
                    open_pts[i] = a + b[::-1]
                elif near(a[0], b[-1]):
                    open_pts[i] = b + a
                elif near(a[0], b[0]):
                    open_pts[i] = b[::-1] + a
                else:
                    continue
                del open_pts[j]
                merged = True
                break
            if merged:
                break
    for pts in open_pts:
        arr = np.asarray(pts, dtype=complex)
        if len(arr) > 2 and near(arr[0], arr[-1]):
            out.append(_region.Chain(arr[:-1], True))
        else:
            out.append(_region.Chain(arr, False))
    return out
