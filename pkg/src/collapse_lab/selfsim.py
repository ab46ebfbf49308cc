"""Exact self-similar solutions of the radial Schroedinger equation in -beta/r**2.

Psi = Y_l^m(theta, phi) * (-chi t)**mu * R(xi),  xi = r / sqrt(-chi t),  chi = hbar/m,

with R solving

    R'' + (2/xi + i xi) R' + (gamma/xi**2 - 2 i mu) R = 0,

    R = xi**(-1/2) [C1 xi**(-i alpha/2) M(a1, b1, z) + C2 xi**(i alpha/2) M(a2, b2, z)],

    z = -i xi**2/2,  a1 = -(1 + i alpha)/4 - mu,  b1 = 1 - i alpha/2,
                     a2 = -(1 - i alpha)/4 - mu,  b2 = 1 + i alpha/2.

At large xi R splits into a power-law group ~ xi**(2 mu) and an oscillatory
group ~ exp(-i xi**2/2) xi**(-3 - 2 mu).  Both exponents already include the
xi**(-1/2) prefactor.  The inner branch kills the oscillatory group and is
normalizable for Re mu < -3/4; the outer branch kills the power-law group and
is normalizable for Re mu > -3/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import complexfn as cf
from .errors import (
    BranchError,
    CollapseConditionError,
    InvalidParameterError,
)

GENERAL = "general"
INNER = "inner_normalizable"
OUTER = "outer_normalizable"

_BRANCH_ALIASES = {
    "inner": INNER, INNER: INNER,
    "outer": OUTER, OUTER: OUTER,
    "general": GENERAL,
}

ORIGIN = "origin"
INFINITY_POWER = "infinity_power"
INFINITY_OSCILLATORY = "infinity_oscillatory"


def canonical_branch(branch: str) -> str:
    try:
        return _BRANCH_ALIASES[branch]
    except KeyError:
        raise InvalidParameterError(f"unknown branch {branch!r}") from None


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimilarityParams:
    hbar: float
    m: float
    beta: float
    ell: int
    mu: complex
    gamma: float
    alpha: float
    chi: float
    nu: float = field(default=0.5)
    s: float = field(default=2.0)

    @property
    def mu_re(self) -> float:
        return self.mu.real

    def kummer_params(self) -> Tuple[complex, complex, complex, complex]:
        """(a1, b1, a2, b2) of the two Kummer functions."""
        al, mu = self.alpha, self.mu
        return (
            -(1 + 1j * al) / 4 - mu,
            1 - 0.5j * al,
            -(1 - 1j * al) / 4 - mu,
            1 + 0.5j * al,
        )


def beta_for_alpha(alpha: float, hbar: float = 1.0, m: float = 1.0, ell: int = 0) -> float:
    """Potential strength giving the requested alpha."""
    gamma = (alpha * alpha + 1.0) / 4.0
    return (gamma + ell * (ell + 1)) * hbar * hbar / (2.0 * m)


def make_params(hbar=1.0, m=1.0, beta=None, ell=0, mu=0.0, alpha=None) -> SimilarityParams:
    """Build similarity data from physical constants.

    Exactly one of ``beta`` and ``alpha`` must be given.  A parameter set
    with l(l+1) >= 2 m beta/hbar**2 - 1/4 cannot collapse and is refused.
    """
    if (beta is None) == (alpha is None):
        raise InvalidParameterError("give exactly one of beta and alpha")
    for name, v in (("hbar", hbar), ("m", m)):
        if not (math.isfinite(v) and v > 0):
            raise InvalidParameterError(f"{name} must be positive and finite, got {v}")
    if int(ell) != ell or ell < 0:
        raise InvalidParameterError(f"ell must be a nonnegative integer, got {ell}")
    ell = int(ell)
    mu = complex(mu)
    if not (math.isfinite(mu.real) and math.isfinite(mu.imag)):
        raise InvalidParameterError("mu must be finite")
    if alpha is not None:
        if not (math.isfinite(alpha) and alpha > 0):
            raise InvalidParameterError(f"alpha must be positive and finite, got {alpha}")
        beta = beta_for_alpha(alpha, hbar, m, ell)
    if not (math.isfinite(beta) and beta > 0):
        raise InvalidParameterError(f"beta must be positive and finite, got {beta}")
    gamma = 2.0 * m * beta / hbar ** 2 - ell * (ell + 1)
    if gamma <= 0.25:
        # classical analogue: 2 m beta > M**2 with M**2 = hbar**2 l(l+1)
        margin = 2.0 * m * beta / hbar ** 2 - 0.25 - ell * (ell + 1)
        raise CollapseConditionError(
            f"l(l+1) = {ell * (ell + 1)} must be below 2 m beta/hbar^2 - 1/4 = "
            f"{2.0 * m * beta / hbar ** 2 - 0.25:.6g} (margin {margin:.6g}; "
            f"classical margin 2 m beta - M^2 = {2.0 * m * beta - hbar ** 2 * ell * (ell + 1):.6g})",
            margin=margin,
        )
    if alpha is None:
        alpha = math.sqrt(4.0 * gamma - 1.0)
    return SimilarityParams(hbar, m, beta, ell, mu, gamma, float(alpha), hbar / m)


# ---------------------------------------------------------------------------
# radial solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialSolution:
    branch: str
    C1: complex
    C2: complex
    C: complex = 1.0 + 0j


def general_solution(C1, C2) -> RadialSolution:
    return RadialSolution(GENERAL, complex(C1), complex(C2), complex("nan+nanj"))


def branch_coefficients(p: SimilarityParams, branch: str, C: complex = 1.0) -> RadialSolution:
    """(C1, C2) killing one large-xi group, scaled by the overall constant C."""
    branch = canonical_branch(branch)
    if branch == GENERAL:
        raise BranchError("branch_coefficients needs the inner or outer branch")
    if p.mu_re == -0.75:
        raise BranchError("mu' = -3/4: the norm diverges logarithmically at large xi on either branch")
    C = complex(C)
    if C == 0:
        return RadialSolution(branch, 0j, 0j, 0j)
    al, mu = p.alpha, p.mu
    base = 0.5j if branch == OUTER else -0.5j
    if branch == OUTER:
        g1 = (5 - 1j * al) / 4 + mu
        g2 = (5 + 1j * al) / 4 + mu
    else:
        g1 = -(1 + 1j * al) / 4 - mu
        g2 = -(1 - 1j * al) / 4 - mu
    lb = np.log(base)
    l1 = -0.25j * al * lb + cf.log_gamma(1 + 0.5j * al) + cf.log_gamma(g1)
    l2 = 0.25j * al * lb + cf.log_gamma(1 - 0.5j * al) + cf.log_gamma(g2)
    C1 = C * np.exp(l1)
    C2 = -C * np.exp(l2)
    return RadialSolution(branch, complex(C1), complex(C2), C)


def _check_xi(xi):
    x = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InvalidParameterError("xi must be positive and finite")
    return x


def radial_derivs(p: SimilarityParams, sol: RadialSolution, xi, order: int = 2,
                  policy: cf.EvalPolicy = cf.DEFAULT_POLICY, with_error: bool = False):
    """[R, R', R''] (up to ``order``) at xi, all analytic.

    Each term T = xi**c F(z) with z = -i xi**2/2 differentiates as

        T'  = xi**(c-1) [c F - i xi**2 F']
        T'' = xi**(c-2) [c(c-1) F - i(2c+1) xi**2 F' - xi**4 F'']

    and F', F'' come from the derivative identity, not from the ODE.
    With ``with_error`` a matching list of absolute error bounds follows.
    """
    if order not in (0, 1, 2):
        raise InvalidParameterError("order must be 0, 1 or 2")
    x = _check_xi(xi)
    shape = x.shape
    xf = np.atleast_1d(x).ravel()
    out = [np.zeros(xf.shape, dtype=complex) for _ in range(order + 1)]
    err = [np.zeros(xf.shape) for _ in range(order + 1)]
    a1, b1, a2, b2 = p.kummer_params()
    z = -0.5j * xf * xf
    lx = np.log(xf)
    for Cj, a, b, sgn in ((sol.C1, a1, b1, -1.0), (sol.C2, a2, b2, 1.0)):
        if Cj == 0:
            continue
        c = -0.5 + sgn * 0.5j * p.alpha
        F, Fe, coef = [], [], 1.0 + 0j
        for k in range(order + 1):
            if k:
                coef *= (a + k - 1) / (b + k - 1)
            r = cf.kummer_eval(a + k, b + k, z, policy)
            F.append(coef * r.value)
            Fe.append(abs(coef) * r.abs_err)
        pw = Cj * np.exp(c * lx)
        out[0] += pw * F[0]
        err[0] += np.abs(pw) * Fe[0]
        x2 = xf * xf
        if order >= 1:
            d1 = pw / xf
            out[1] += d1 * (c * F[0] - 1j * x2 * F[1])
            err[1] += np.abs(d1) * (abs(c) * Fe[0] + x2 * Fe[1])
        if order >= 2:
            d2 = pw / x2
            out[2] += d2 * (c * (c - 1) * F[0] - 1j * (2 * c + 1) * x2 * F[1] - x2 * x2 * F[2])
            err[2] += np.abs(d2) * (abs(c * (c - 1)) * Fe[0] + abs(2 * c + 1) * x2 * Fe[1] + x2 * x2 * Fe[2])
    vals = [o.reshape(shape) for o in out]
    errs = [e.reshape(shape) for e in err]
    if shape == ():
        vals = [complex(v) for v in vals]
        errs = [float(e) for e in errs]
    return (vals, errs) if with_error else vals


def radial_eval(p: SimilarityParams, sol: RadialSolution, xi, policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """(R, dR/dxi) at xi > 0."""
    R, dR = radial_derivs(p, sol, xi, order=1, policy=policy)
    return R, dR


def ode_terms(p: SimilarityParams, R, dR, d2R, xi):
    """The three terms of the radial ODE as separate arrays."""
    x = np.asarray(xi, dtype=float)
    return (
        np.asarray(d2R),
        (2.0 / x + 1j * x) * dR,
        (p.gamma / x ** 2 - 2j * p.mu) * R,
    )


def ode_residual(p: SimilarityParams, sol: RadialSolution, xi, policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """|R'' + (2/xi + i xi) R' + (gamma/xi**2 - 2 i mu) R| over the largest term.

    Returns 0 where all three terms vanish.
    """
    R, dR, d2R = radial_derivs(p, sol, xi, order=2, policy=policy)
    return normalized_residual(*ode_terms(p, R, dR, d2R, xi))


def normalized_residual(*terms):
    total = sum(terms)
    scale = np.maximum.reduce([np.abs(t) for t in terms])
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(scale > 0, np.abs(total) / np.where(scale > 0, scale, 1.0), 0.0)
    return float(res) if np.ndim(res) == 0 else res


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def group_amplitudes(p: SimilarityParams, sol: RadialSolution) -> Tuple[complex, complex]:
    """Amplitudes (V, W) of the power-law and oscillatory large-xi groups.

    R ~ V xi**(2 mu) [1 + ...] + W exp(-i xi**2/2) xi**(-3 - 2 mu) [1 + ...].
    On the outer branch V vanishes, on the inner branch W does.
    """
    a1, b1, a2, b2 = p.kummer_params()
    V = 0j
    W = 0j
    for Cj, a, b in ((sol.C1, a1, b1), (sol.C2, a2, b2)):
        if Cj == 0:
            continue
        lgb = cf.log_gamma(b)
        V += Cj * np.exp(lgb - a * np.log(0.5j)) * cf.rgamma(b - a)
        W += Cj * np.exp(lgb + (a - b) * np.log(-0.5j)) * cf.rgamma(a)
    if sol.branch == OUTER:
        V = 0j
    elif sol.branch == INNER:
        W = 0j
    return complex(V), complex(W)


def _group_series(p: SimilarityParams, xi, n_terms: int):
    """Truncated sums of both large-xi groups (without amplitudes)."""
    a1, b1, a2, b2 = p.kummer_params()
    x = np.asarray(xi, dtype=float)
    w = x ** -2.0
    sv = np.zeros(x.shape, dtype=complex)
    so = np.zeros(x.shape, dtype=complex)
    tv = np.ones(x.shape, dtype=complex)
    to = np.ones(x.shape, dtype=complex)
    for n in range(n_terms):
        sv = sv + tv
        so = so + to
        tv = tv * (a1 + n) * (a1 - b1 + 1 + n) / (n + 1) * (-2j) * w
        to = to * (b1 - a1 + n) * (1 - a1 + n) / (n + 1) * (2j) * w
    return sv, so, np.abs(tv), np.abs(to)


def asymptotic_series(p: SimilarityParams, sol: RadialSolution, xi, n_terms: int = 8):
    """Large-xi expansion of R with ``n_terms`` terms per group.

    Returns (value, abs_err) where the error is the first omitted term.
    Both groups share their Pochhammer coefficients between the C1 and C2
    parts, so the sums are computed once.
    """
    x = _check_xi(xi)
    V, W = group_amplitudes(p, sol)
    sv, so, ev, eo = _group_series(p, x, n_terms)
    pv = V * np.exp(2 * p.mu * np.log(x))
    po = W * np.exp(-0.5j * x * x + (-3 - 2 * p.mu) * np.log(x))
    val = pv * sv + po * so
    err = np.abs(pv) * ev + np.abs(po) * eo
    return val, err


def asymptotic_leading(p: SimilarityParams, sol: RadialSolution, xi, regime: str):
    """Leading behaviour of R at the origin or at infinity.

    origin               C1 xi**(-1/2 - i alpha/2) + C2 xi**(-1/2 + i alpha/2)
    infinity_power       V xi**(2 mu)
    infinity_oscillatory W exp(-i xi**2/2) xi**(-3 - 2 mu)
    """
    x = _check_xi(xi)
    lx = np.log(x)
    if regime == ORIGIN:
        return sol.C1 * np.exp((-0.5 - 0.5j * p.alpha) * lx) + sol.C2 * np.exp((-0.5 + 0.5j * p.alpha) * lx)
    V, W = group_amplitudes(p, sol)
    if regime == INFINITY_POWER:
        if sol.branch == OUTER:
            raise BranchError("the outer branch has no power-law group at large xi")
        return V * np.exp(2 * p.mu * lx)
    if regime == INFINITY_OSCILLATORY:
        if sol.branch == INNER:
            raise BranchError("the inner branch has no oscillatory group at large xi")
        return W * np.exp(-0.5j * x * x + (-3 - 2 * p.mu) * lx)
    raise InvalidParameterError(f"unknown regime {regime!r}")


def large_xi_slope(p: SimilarityParams, sol: RadialSolution) -> float:
    """Log-log slope of |R|**2 at large xi implied by the surviving group."""
    mr = p.mu_re
    if sol.branch == OUTER:
        return -6.0 - 4.0 * mr
    if sol.branch == INNER:
        return 4.0 * mr
    V, _ = group_amplitudes(p, sol)
    # general solution: the slower-decaying group wins
    return max(4.0 * mr, -6.0 - 4.0 * mr) if V != 0 else -6.0 - 4.0 * mr


# ---------------------------------------------------------------------------
# spherical harmonics (closed form, l <= 4, Condon-Shortley phase)
# ---------------------------------------------------------------------------

def _legendre(ell: int, m: int, x, s):
    """Associated Legendre P_l^m(x) for 0 <= m <= l <= 4, s = sqrt(1 - x**2)."""
    table = {
        (0, 0): lambda: np.ones_like(x),
        (1, 0): lambda: x,
        (1, 1): lambda: -s,
        (2, 0): lambda: 0.5 * (3 * x ** 2 - 1),
        (2, 1): lambda: -3 * x * s,
        (2, 2): lambda: 3 * s ** 2,
        (3, 0): lambda: 0.5 * (5 * x ** 3 - 3 * x),
        (3, 1): lambda: -1.5 * (5 * x ** 2 - 1) * s,
        (3, 2): lambda: 15 * x * s ** 2,
        (3, 3): lambda: -15 * s ** 3,
        (4, 0): lambda: 0.125 * (35 * x ** 4 - 30 * x ** 2 + 3),
        (4, 1): lambda: -2.5 * (7 * x ** 3 - 3 * x) * s,
        (4, 2): lambda: 7.5 * (7 * x ** 2 - 1) * s ** 2,
        (4, 3): lambda: -105 * x * s ** 3,
        (4, 4): lambda: 105 * s ** 4,
    }
    return table[(ell, m)]()


def spherical_harmonic(ell: int, m: int, theta, phi):
    """Y_l^m(theta, phi), orthonormal on the sphere, l <= 4."""
    if not (0 <= ell <= 4):
        raise InvalidParameterError(f"spherical harmonics are tabulated for l <= 4, got {ell}")
    if abs(m) > ell:
        raise InvalidParameterError(f"|m| = {abs(m)} exceeds l = {ell}")
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    am = abs(m)
    x, s = np.cos(th), np.sin(th)
    norm = math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - am) / math.factorial(ell + am))
    y = norm * _legendre(ell, am, x, s) * np.exp(1j * am * ph)
    if m < 0:
        y = (-1) ** am * np.conj(y)
    return complex(y) if np.ndim(y) == 0 else y


# ---------------------------------------------------------------------------
# wave function and PDE residual
# ---------------------------------------------------------------------------

def _check_rt(r, t):
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise InvalidParameterError("t = 0 is the collapse instant; the solution does not continue through it")
    if np.any(r <= 0) or not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
        raise InvalidParameterError("r must be positive and r, t finite")
    return r, t


def radial_psi(p: SimilarityParams, sol: RadialSolution, r, t, policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """Radial factor (-chi t)**mu R(r/sqrt(-chi t)) for t < 0.

    For t > 0 the escape solution conj of the collapse one at -t is returned.
    """
    r, t = _check_rt(r, t)
    r, t = np.broadcast_arrays(r, t)
    tau = p.chi * np.abs(t)
    xi = r / np.sqrt(tau)
    R = radial_derivs(p, sol, xi, order=0, policy=policy)[0]
    out = np.exp(p.mu * np.log(tau)) * R
    out = np.where(t > 0, np.conj(out), out)
    return complex(out) if np.ndim(out) == 0 else out


def psi(p: SimilarityParams, sol: RadialSolution, m_quantum: int, r, theta, phi, t,
        policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """Full wave function Y_l^m(theta, phi) (-chi t)**mu R(xi).

    For t > 0 this is conj(Psi)(r, theta, phi, -t), the time-reversed
    collapse solution.
    """
    if int(m_quantum) != m_quantum or abs(m_quantum) > p.ell:
        raise InvalidParameterError(f"m must be an integer with |m| <= l = {p.ell}")
    rad = radial_psi(p, sol, r, t, policy)
    y = spherical_harmonic(p.ell, int(m_quantum), theta, phi)
    tt = np.asarray(t, dtype=float)
    # conjugation acts on the whole Psi, including Y
    y = np.where(tt > 0, np.conj(y), y)
    out = y * rad
    return complex(out) if np.ndim(out) == 0 else out


def pde_terms(p: SimilarityParams, sol: RadialSolution, r, t, policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """Terms of i hbar psi_t = -(hbar^2/2m)(psi_rr + 2 psi_r/r) + (hbar^2 l(l+1)/2m - beta) psi/r^2
    for the radial factor at t < 0, all moved to one side.

    psi_t = Phi chi/(-chi t) (-mu R + xi R'/2),  psi_r = Phi R'/sqrt(-chi t),
    psi_rr = Phi R''/(-chi t).
    """
    r, t = _check_rt(r, t)
    if np.any(t > 0):
        raise InvalidParameterError("pde_terms needs t < 0")
    r, t = np.broadcast_arrays(r, t)
    tau = -p.chi * t
    xi = r / np.sqrt(tau)
    R, dR, d2R = radial_derivs(p, sol, xi, order=2, policy=policy)
    Phi = np.exp(p.mu * np.log(tau))
    k = p.hbar ** 2 / (2 * p.m)
    psi_t = Phi * p.chi / tau * (-p.mu * R + 0.5 * xi * dR)
    psi_r = Phi * dR / np.sqrt(tau)
    psi_rr = Phi * d2R / tau
    psi0 = Phi * R
    return (
        1j * p.hbar * psi_t,
        k * psi_rr,
        2 * k * psi_r / r,
        -(k * p.ell * (p.ell + 1) - p.beta) * psi0 / r ** 2,
    )


def pde_residual(p: SimilarityParams, sol: RadialSolution, r, t, policy: cf.EvalPolicy = cf.DEFAULT_POLICY):
    """Normalized residual of the Schroedinger equation for the radial factor."""
    return normalized_residual(*pde_terms(p, sol, r, t, policy))


def self_similarity_deviation(p: SimilarityParams, sol: RadialSolution, xi, t,
                              policy: cf.EvalPolicy = cf.DEFAULT_POLICY) -> float:
    """max over (xi, t) of |(-chi t)^(-mu) psi(xi sqrt(-chi t), t) - R(xi)| / |R(xi)|."""
    x = _check_xi(xi)
    t = np.asarray(t, dtype=float)
    X, T = np.meshgrid(x, t, indexing="ij")
    tau = -p.chi * T
    rad = radial_psi(p, sol, X * np.sqrt(tau), T, policy)
    scaled = rad * np.exp(-p.mu * np.log(tau))
    R = radial_derivs(p, sol, x, order=0, policy=policy)[0]
    return float(np.max(np.abs(scaled - R[:, None]) / np.abs(R[:, None])))


# ---------------------------------------------------------------------------
# the similarity reduction for general nu and s
# ---------------------------------------------------------------------------

def reduction_coefficients(p: SimilarityParams, nu: float, s: float, z, xi):
    """Coefficients (A2, A1, A0) of A2 R'' + A1 R' + A0 R = 0 obtained by
    inserting Psi = z**mu R(r/z**nu) Y, z = -chi t, into the Schroedinger
    equation with U = -beta/r**s, after dividing by a common factor.

    The equation is independent of z only for nu = 1/2, s = 2.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(xi, dtype=float)
    hb, m = p.hbar, p.m
    e = z ** (1 - 2 * nu)
    A2 = e
    A1 = 2 * (1j * m * nu * x * p.chi / hb + e / x)
    A0 = (2 * p.beta * m * z ** (1 - nu * s) / (hb ** 2 * x ** s)
          - 2j * p.mu * m * p.chi / hb - p.ell * (p.ell + 1) * e / x ** 2)
    return A2, A1, A0


def reduction_defect(p: SimilarityParams, nu: float, s: float, xi, z_values) -> float:
    """Largest relative change of the reduced coefficients across z_values.

    Zero (to rounding) exactly when the reduction is self-similar.
    """
    z = np.asarray(z_values, dtype=float)
    x = np.asarray(xi, dtype=float)
    Z, X = np.meshgrid(z, x, indexing="ij")
    coeffs = reduction_coefficients(p, nu, s, Z, X)
    worst = 0.0
    for A in coeffs:
        A = np.broadcast_to(A, Z.shape)
        ref = A[0]
        scale = np.maximum(np.abs(ref), 1e-300)
        worst = max(worst, float(np.max(np.abs(A - ref) / scale)))
    return worst
