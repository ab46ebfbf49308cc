"""Norms, mean values and the energy functional of the self-similar solutions.

Every integral here has the bilinear form

    J = int_0^inf conj(R) * sum_w c_w xi**q_w R^(d_w)  dxi

and is split into three pieces:

* [0, eps]: R is replaced by its leading origin behaviour
  C1 xi**c1 + C2 xi**c2, which integrates in closed form;
* [eps, xi_cut]: adaptive Gauss-Legendre in u = log xi, where the
  log-periodic oscillation near the origin has constant frequency;
* [xi_cut, inf): only one large-xi group survives on a normalizable branch,
  R = A xi**p exp(i phi) S(xi).  The phase cancels against conj(R), so
  the integrand is a Laurent series in xi with real exponents and the tail
  integrates term by term.

A divergent end raises :class:`DivergenceError` carrying the exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import selfsim as ss
from .errors import DivergenceError, InvalidParameterError

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)

_EPS_ORIGIN = 1e-5


@dataclass
class QuadratureResult:
    value: complex
    abs_err: float
    tail_est: float
    xi_cut: float


@dataclass
class ScalingFit:
    exponent: float
    prefactor: float
    residual: float


# a bilinear integrand: list of (derivative order d, power q, coefficient c)
Form = Sequence[Tuple[int, float, complex]]


# ---------------------------------------------------------------------------
# Laurent series with exponents top, top-1, top-2, ...
# ---------------------------------------------------------------------------

class _Laurent:
    __slots__ = ("top", "c")

    def __init__(self, top, coeffs):
        self.top = float(top)
        self.c = np.asarray(coeffs, dtype=complex)

    def _aligned(self, other):
        top = max(self.top, other.top)
        n = int(max(top - self.top + len(self.c), top - other.top + len(other.c)))
        a = np.zeros(n, dtype=complex)
        b = np.zeros(n, dtype=complex)
        i, j = int(top - self.top), int(top - other.top)
        a[i:i + len(self.c)] = self.c
        b[j:j + len(other.c)] = other.c
        return top, a, b

    def __add__(self, other):
        top, a, b = self._aligned(other)
        return _Laurent(top, a + b)

    def scale(self, k):
        return _Laurent(self.top, k * self.c)

    def shift(self, k):
        return _Laurent(self.top + k, self.c)

    def deriv(self):
        e = self.top - np.arange(len(self.c))
        return _Laurent(self.top - 1, self.c * e)

    def conj(self):
        return _Laurent(self.top, np.conj(self.c))

    def mul(self, other, keep):
        c = np.convolve(self.c, other.c)[:keep]
        return _Laurent(self.top + other.top, c)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        e = self.top - np.arange(len(self.c))
        return np.sum(self.c[:, None] * x[None, :] ** e[:, None], axis=0)


# ---------------------------------------------------------------------------
# pieces of the integral
# ---------------------------------------------------------------------------

def _check_normalizable(sol: ss.RadialSolution):
    if sol.branch not in (ss.INNER, ss.OUTER):
        raise InvalidParameterError("integrals need a normalizable branch (inner or outer)")


def _origin_piece(p: ss.SimilarityParams, sol: ss.RadialSolution, form: Form, eps: float):
    cs = (-0.5 - 0.5j * p.alpha, -0.5 + 0.5j * p.alpha)
    Cs = (sol.C1, sol.C2)
    total = 0j
    for d, q, coef in form:
        for ci, Ci in zip(cs, Cs):
            for cj, Cj in zip(cs, Cs):
                fall = 1.0 + 0j
                for k in range(d):
                    fall *= cj - k
                amp = np.conj(Ci) * Cj * coef * fall
                if amp == 0:
                    continue
                e = np.conj(ci) + cj + q - d
                if e.real <= -1.0:
                    raise DivergenceError(
                        f"integral diverges at the origin: integrand ~ xi^{e.real:g}",
                        exponent=float(e.real), end="origin",
                    )
                total += amp * np.exp((e + 1) * math.log(eps)) / (e + 1)
    return complex(total)


def _tail_setup(p: ss.SimilarityParams, sol: ss.RadialSolution, n_terms: int):
    """(A, p_exp, S, phase') of the surviving group."""
    V, W = ss.group_amplitudes(p, sol)
    a1, b1, _, _ = p.kummer_params()
    coeffs = np.zeros(2 * n_terms - 1, dtype=complex)
    t = 1.0 + 0j
    for n in range(n_terms):
        coeffs[2 * n] = t
        if sol.branch == ss.OUTER:
            t = t * (b1 - a1 + n) * (1 - a1 + n) / (n + 1) * 2j
        else:
            t = t * (a1 + n) * (a1 - b1 + 1 + n) / (n + 1) * (-2j)
    S = _Laurent(0, coeffs)
    if sol.branch == ss.OUTER:
        return W, -3 - 2 * p.mu, S, True
    return V, 2 * p.mu, S, False


def _tail_derivs(pexp, S: _Laurent, oscill: bool, order: int):
    """L_d with R^(d) = A xi**p exp(i phi) L_d, phi = -xi**2/2 when oscillatory."""
    out = [S]
    L = S
    for _ in range(order):
        nxt = L.shift(-1).scale(pexp) + L.deriv()
        if oscill:
            nxt = nxt + L.shift(1).scale(-1j)
        out.append(nxt)
        L = nxt
    return out


def _series_cut(p: ss.SimilarityParams, sol: ss.RadialSolution, n_terms: int, rel: float = 1e-14):
    """Smallest cut where the truncated group series is accurate to ``rel``."""
    _, _, S, _ = _tail_setup(p, sol, n_terms)
    mags = np.abs(S.c[::2])
    for X in (8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0, 70.0, 100.0):
        terms = mags * X ** (-2.0 * np.arange(len(mags)))
        if terms[-1] <= rel and np.all(np.diff(terms[len(terms) // 2:]) <= 0):
            return X
    return 100.0


def _tail_laurent(p, sol, form: Form, n_terms: int):
    A, pexp, S, oscill = _tail_setup(p, sol, n_terms)
    dmax = max(d for d, _, _ in form)
    Ls = _tail_derivs(pexp, S, oscill, dmax)
    keep = len(S.c) + 4
    acc = None
    for d, q, coef in form:
        term = S.conj().mul(Ls[d], keep).shift(q + 2 * pexp.real).scale(coef * abs(A) ** 2)
        acc = term if acc is None else acc + term
    return acc


def _leading_exponent(lau: _Laurent):
    """Exponent of the first coefficient that is not rounding noise.

    The group series is asymptotic, so late coefficients grow without bound;
    only the first few set the scale for what counts as zero.
    """
    head = np.abs(lau.c[:4])
    if head.size == 0 or head.max() == 0.0:
        return None
    nz = np.flatnonzero(np.abs(lau.c) > 1e-12 * head.max())
    return lau.top - nz[0]


def _tail_piece(p, sol, form: Form, X: float, n_terms: int = 30):
    """Analytic tail from X to infinity with a truncation-error estimate."""
    lau = _tail_laurent(p, sol, form, n_terms)
    c = lau.c
    lead = _leading_exponent(lau)
    if lead is None:
        return 0j, 0.0
    if lead >= -1.0:
        raise DivergenceError(
            f"integral diverges at infinity: integrand ~ xi^{lead:g}",
            exponent=float(lead), end="infinity",
        )
    e = lau.top - np.arange(len(c))
    parts = c * X ** (e + 1) / -(e + 1)
    val = complex(np.sum(parts))
    err = float(np.abs(parts[-1]) + np.abs(parts[-2])) + 1e-15 * float(np.sum(np.abs(parts)))
    return val, err


def _form_values(p, sol, form: Form, xi):
    dmax = max(d for d, _, _ in form)
    ders = ss.radial_derivs(p, sol, xi, order=dmax)
    cR = np.conj(ders[0])
    out = np.zeros(np.shape(xi), dtype=complex)
    for d, q, coef in form:
        out += coef * xi ** q * ders[d]
    return cR * out


def _middle_piece(f, u0: float, u1: float, alpha: float, rel_tol: float, max_rounds: int = 12):
    """Adaptive composite Gauss-Legendre on [u0, u1] with bisection of bad panels."""
    h0 = min(0.5, math.pi / max(alpha, 1e-12))
    n = max(4, int(math.ceil((u1 - u0) / h0)))
    edges = np.linspace(u0, u1, n + 1)
    done_val = 0j
    done_err = 0.0
    pending = [(edges[i], edges[i + 1]) for i in range(n)]
    scale = None
    for _ in range(max_rounds):
        if not pending:
            break
        lo = np.array([a for a, _ in pending])
        hi = np.array([b for _, b in pending])
        # panels are independent so evaluate them as one batch
        v_hi, v_lo = _gl_panels(f, lo, hi)
        err = np.abs(v_hi - v_lo)
        if scale is None:
            scale = max(abs(complex(np.sum(v_hi))), float(np.sum(np.abs(v_hi))) * 1e-3, 1e-300)
        budget = rel_tol * scale / max(len(lo), 1)
        ok = err <= budget
        done_val += complex(np.sum(v_hi[ok]))
        done_err += float(np.sum(err[ok]))
        pending = []
        for a, b in zip(lo[~ok], hi[~ok]):
            m = 0.5 * (a + b)
            pending += [(a, m), (m, b)]
    if pending:
        lo = np.array([a for a, _ in pending])
        hi = np.array([b for _, b in pending])
        vh, vl = _gl_panels(f, lo, hi)
        done_val += complex(np.sum(vh))
        done_err += float(np.sum(np.abs(vh - vl)))
    return done_val, done_err


def _gl_panels(f, lo, hi):
    """20- and 10-point Gauss-Legendre sums on each panel [lo_k, hi_k]."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x20, w20 = _GL_HI
    x10, w10 = _GL_LO
    n = len(lo)
    u = np.concatenate([(mid[:, None] + half[:, None] * x20).ravel(), (mid[:, None] + half[:, None] * x10).ravel()])
    fu = f(u)
    f20 = fu[: n * 20].reshape(n, 20)
    f10 = fu[n * 20:].reshape(n, 10)
    return half * (f20 @ w20), half * (f10 @ w10)


def integrate_form(p: ss.SimilarityParams, sol: ss.RadialSolution, form: Form,
                   rel_tol: float = 1e-11, xi_cut: Optional[float] = None) -> QuadratureResult:
    """int_0^inf conj(R) sum c xi**q R^(d) dxi on a normalizable branch."""
    _check_normalizable(sol)
    if sol.C1 == 0 and sol.C2 == 0:
        return QuadratureResult(0j, 0.0, 0.0, float("nan"))
    X = xi_cut if xi_cut is not None else _series_cut(p, sol, 30)
    # the tail decides convergence first; cheap and gives the exponent
    tail, tail_err = _tail_piece(p, sol, form, X)
    head = _origin_piece(p, sol, form, _EPS_ORIGIN)

    def f(u):
        x = np.exp(u)
        return _form_values(p, sol, form, x) * x

    mid, mid_err = _middle_piece(f, math.log(_EPS_ORIGIN), math.log(X), p.alpha, rel_tol)
    total = head + mid + tail
    # neglected next order at the origin is ~ eps**2 relative to the head
    head_err = abs(head) * _EPS_ORIGIN ** 2 * (1 + p.alpha ** 2 + abs(p.mu) ** 2)
    err = mid_err + tail_err + head_err + 1e-15 * (abs(head) + abs(mid) + abs(tail))
    return QuadratureResult(complex(total), float(err), float(abs(tail)), float(X))


def integrate_abs_form(p, sol, form: Form, rel_tol: float = 1e-8) -> QuadratureResult:
    """int_0^inf |conj(R) sum c xi**q R^(d)| dxi (a scale, loosely converged)."""
    _check_normalizable(sol)
    if sol.C1 == 0 and sol.C2 == 0:
        return QuadratureResult(0j, 0.0, 0.0, float("nan"))
    X = _series_cut(p, sol, 30)
    lau = _tail_laurent(p, sol, form, 30)
    c = lau.c
    lead = _leading_exponent(lau)
    if lead is None:
        return QuadratureResult(0j, 0.0, 0.0, float(X))
    if lead >= -1.0:
        raise DivergenceError(
            f"absolute integral diverges at infinity: integrand ~ xi^{lead:g}",
            exponent=float(lead), end="infinity",
        )
    Y = X * 1e4
    # between X and Y integrate |Laurent| numerically, beyond Y keep the lead
    mid_tail, _ = _middle_piece(lambda u: np.abs(lau(np.exp(u))) * np.exp(u), math.log(X), math.log(Y), 1.0, rel_tol)
    far = abs(c[int(lau.top - lead)]) * Y ** (lead + 1) / -(lead + 1)
    head = abs(_origin_abs_bound(p, sol, form, _EPS_ORIGIN))

    def f(u):
        x = np.exp(u)
        return np.abs(_form_values(p, sol, form, x)) * x

    mid, err = _middle_piece(f, math.log(_EPS_ORIGIN), math.log(X), p.alpha, rel_tol)
    tail = mid_tail.real + far
    total = head + mid.real + tail
    return QuadratureResult(complex(total), float(err + 1e-6 * total), float(tail), float(X))


def _origin_abs_bound(p, sol, form: Form, eps: float) -> float:
    # |integrand| <= sum of moduli of the leading terms; fine for a scale
    cs = (-0.5 - 0.5j * p.alpha, -0.5 + 0.5j * p.alpha)
    Cs = (sol.C1, sol.C2)
    total = 0.0
    for d, q, coef in form:
        for ci, Ci in zip(cs, Cs):
            for cj, Cj in zip(cs, Cs):
                fall = 1.0 + 0j
                for k in range(d):
                    fall *= cj - k
                e = (np.conj(ci) + cj + q - d).real
                total += abs(Ci * Cj * coef * fall) * eps ** (e + 1) / (e + 1)
    return total


# ---------------------------------------------------------------------------
# public observables
# ---------------------------------------------------------------------------

NORM_FORM: Form = ((0, 2.0, 1.0),)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t >= 0) or not np.all(np.isfinite(t)):
        raise InvalidParameterError("t must be negative and finite (collapse stage)")
    return t


def norm_exponent(p: ss.SimilarityParams) -> float:
    return 1.5 + 2.0 * p.mu_re


def norm_xi(p: ss.SimilarityParams, sol: ss.RadialSolution, rel_tol: float = 1e-11) -> QuadratureResult:
    """N_xi = int_0^inf |R|^2 xi^2 dxi."""
    _check_normalizable(sol)
    mr = p.mu_re
    if mr == -0.75:
        raise DivergenceError("mu' = -3/4: the norm diverges logarithmically at large xi",
                              exponent=-1.0, end="infinity")
    if sol.branch == ss.INNER and mr > -0.75:
        raise DivergenceError(
            f"inner branch needs mu' < -3/4 (got {mr:g}); |R|^2 xi^2 ~ xi^{4 * mr + 2:g}",
            exponent=4 * mr + 2, end="infinity")
    if sol.branch == ss.OUTER and mr < -0.75:
        raise DivergenceError(
            f"outer branch needs mu' > -3/4 (got {mr:g}); |R|^2 xi^2 ~ xi^{-4 - 4 * mr:g}",
            exponent=-4 - 4 * mr, end="infinity")
    q = integrate_form(p, sol, NORM_FORM, rel_tol)
    q.value = complex(q.value.real, 0.0)
    return q


def norm_flux_identity(p: ss.SimilarityParams, sol: ss.RadialSolution) -> float:
    """Closed form N_xi = alpha (|C1|^2 - |C2|^2) / (3 + 4 mu').

    Follows from the conserved-current identity of the radial equation
    integrated from the origin (where the two log-periodic components carry
    the flux alpha |C_j|^2) to infinity (where it vanishes on either
    normalizable branch).
    """
    return p.alpha * (abs(sol.C1) ** 2 - abs(sol.C2) ** 2) / (3.0 + 4.0 * p.mu_re)


def norm_t(p: ss.SimilarityParams, sol: ss.RadialSolution, t, n_xi: Optional[float] = None):
    """<Psi|Psi>(t) = N_xi (-chi t)^(3/2 + 2 mu')."""
    t = _check_t(t)
    if n_xi is None:
        n_xi = norm_xi(p, sol).value.real
    out = n_xi * (-p.chi * t) ** norm_exponent(p)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MeanReport:
    convention: str
    t: float
    mean_r: float
    mean_pr: complex
    delta_r: float
    delta_pr: float
    c_r: float
    c_p: complex
    scale_product: float
    uncertainty_product: float
    hermitized: bool
    notes: List[str] = field(default_factory=list)


def _pr_form(hermitized: bool) -> Form:
    # p_r = -i hbar d/dr; the Hermitized variant adds -i hbar / r
    f = [(1, 2.0, -1j)]
    if hermitized:
        f.append((0, 1.0, -1j))
    return tuple(f)


def _pr2_form(hermitized: bool) -> Form:
    if hermitized:
        return ((2, 2.0, -1.0), (1, 1.0, -2.0))
    return ((2, 2.0, -1.0),)


def xi_moments(p: ss.SimilarityParams, sol: ss.RadialSolution, hermitized: bool = False):
    """Dimensionless integrals (N, M1, M2, P, P2) with divergent ones as None.

    Returns (values, notes); notes describe each divergence found.
    """
    notes = []
    N = norm_xi(p, sol).value.real
    M1 = integrate_form(p, sol, ((0, 3.0, 1.0),)).value.real
    P = integrate_form(p, sol, _pr_form(hermitized)).value
    try:
        M2 = integrate_form(p, sol, ((0, 4.0, 1.0),)).value.real
    except DivergenceError as e:
        M2 = None
        notes.append(f"<r^2> diverges at {e.end} (exponent {e.exponent:g})")
    try:
        P2 = integrate_form(p, sol, _pr2_form(hermitized)).value
    except DivergenceError as e:
        P2 = None
        notes.append(f"<p_r^2> diverges at {e.end} (exponent {e.exponent:g})")
    return (N, M1, M2, P, P2), notes


def _spread(second, first_sq, name, notes):
    var = second - first_sq
    if var < 0:
        # without the instantaneous norm the weight is not a probability
        # measure, and the "variance" can come out negative
        notes.append(f"second moment of {name} is below the squared mean; spread undefined")
        return math.nan
    return math.sqrt(var)


def mean_r_pr(p: ss.SimilarityParams, sol: ss.RadialSolution, t: float, convention: str = "ii",
              hermitized: bool = False, moments=None) -> MeanReport:
    """<r>, <p_r> and their spreads at time t < 0.

    Convention "ii" divides by the instantaneous norm, "i" by the norm at
    t = -1/chi.  Spreads come from second moments and are infinite where
    those diverge (<p_r^2> always does at the origin, where |R'|^2 xi^2 ~ 1/xi).
    ``scale_product`` is <r> |<p_r>|, the product of the scales set by the
    means; ``uncertainty_product`` is delta_r * delta_pr.
    """
    if convention not in ("i", "ii"):
        raise InvalidParameterError("convention must be 'i' or 'ii'")
    t = float(_check_t(t))
    if moments is None:
        moments = xi_moments(p, sol, hermitized)
    (N, M1, M2, P, P2), notes = moments
    notes = list(notes)
    tau = -p.chi * t
    w = 1.0 if convention == "ii" else tau ** norm_exponent(p)
    c_r = M1 / N
    c_p = P / N
    mean_r = w * math.sqrt(tau) * c_r
    mean_pr = w * p.hbar / math.sqrt(tau) * c_p
    if M2 is None:
        delta_r = math.inf
    else:
        delta_r = _spread(w * tau * M2 / N, mean_r ** 2, "r", notes)
    if P2 is None:
        delta_pr = math.inf
    else:
        delta_pr = _spread((w * p.hbar ** 2 / tau * P2 / N).real, abs(mean_pr) ** 2, "p_r", notes)
    return MeanReport(
        convention, t, float(mean_r), complex(mean_pr), float(delta_r), float(delta_pr),
        float(c_r), complex(c_p), float(mean_r * abs(mean_pr)), float(delta_r * delta_pr),
        hermitized, list(notes),
    )


@dataclass
class EnergyReport:
    I: complex
    abs_err: float
    abs_integral: float
    im_ratio: float
    norm: float
    identity_deviation: float
    tail_est: float


def energy_form(p: ss.SimilarityParams) -> Form:
    return ((0, 2.0, 2.0 * p.mu), (1, 3.0, -1.0))


def energy_integral(p: ss.SimilarityParams, sol: ss.RadialSolution) -> EnergyReport:
    """I = int conj(R) (2 mu R - xi R') xi^2 dxi and its consistency checks.

    Re I should equal (3/2 + 2 mu') N_xi (d/dt of the norm); the
    vanishing-energy claim is Im I = 0.  ``im_ratio`` is
    |Im I| / int |R| |2 mu R - xi R'| xi^2 dxi.
    """
    _check_normalizable(sol)
    form = energy_form(p)
    if sol.C1 == 0 and sol.C2 == 0:
        return EnergyReport(0j, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    q = integrate_form(p, sol, form)
    a = integrate_abs_form(p, sol, form)
    N = norm_xi(p, sol).value.real
    dev = q.value.real - norm_exponent(p) * N
    return EnergyReport(
        q.value, q.abs_err, a.value.real, abs(q.value.imag) / a.value.real, N, dev, q.tail_est,
    )


def fit_power_law(x, y=None) -> ScalingFit:
    """Least-squares line through (log x, log y).

    Accepts two arrays or a single sequence of (x, y) pairs.  Needs at least
    three samples spanning at least one decade in x.
    """
    if y is None:
        pts = np.asarray(x, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidParameterError("samples must be (x, y) pairs")
        x, y = pts[:, 0], pts[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise InvalidParameterError("need at least 3 samples")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidParameterError("power-law fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    if (lx.max() - lx.min()) < math.log(10.0) * (1 - 1e-12):
        raise InvalidParameterError("samples must span at least one decade")
    slope, icpt = np.polyfit(lx, ly, 1)
    res = float(np.max(np.abs(ly - (slope * lx + icpt))))
    return ScalingFit(float(slope), float(math.exp(icpt)), res)


# ---------------------------------------------------------------------------
# profile structure
# ---------------------------------------------------------------------------

@dataclass
class PhaseLockReport:
    interlaced: bool
    monotone: bool
    n_zeros: int
    n_extrema: int


def _sign_change_points(x, f):
    s = np.sign(f)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    # linear interpolation inside each bracket
    return x[idx] - f[idx] * (x[idx + 1] - x[idx]) / (f[idx + 1] - f[idx])


def phase_lock(p: ss.SimilarityParams, sol: ss.RadialSolution, xi_lo: float, xi_hi: float,
               points: int = 4000) -> PhaseLockReport:
    """Check on [xi_lo, xi_hi] that zeros of Re R alternate with extrema of
    Im R and that |R| is monotone."""
    xi = np.geomspace(xi_lo, xi_hi, points)
    R, dR = ss.radial_eval(p, sol, xi)
    zeros = _sign_change_points(xi, R.real)
    ext = _sign_change_points(xi, dR.imag)
    merged = sorted([(z, 0) for z in zeros] + [(e, 1) for e in ext])
    kinds = [k for _, k in merged]
    interlaced = len(zeros) > 0 and all(kinds[i] != kinds[i + 1] for i in range(len(kinds) - 1))
    # d|R|/dxi = Re(conj(R) R')/|R|
    dmod = (np.conj(R) * dR).real
    monotone = bool(np.all(dmod > 0) or np.all(dmod < 0))
    return PhaseLockReport(interlaced, monotone, len(zeros), len(ext))
