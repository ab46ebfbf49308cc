"""Complex-argument special functions.

Gamma via a Lanczos approximation with reflection, Pochhammer symbols,
principal-branch complex powers, and Kummer's confluent hypergeometric
function 1F1(a; b; z) evaluated either by its power series (optionally in
double-double precision) or by the large-|z| expansion

    1F1(a;b;z) ~ Gamma(b)/Gamma(b-a) (-z)^(-a) G(a, a-b+1, -z)
               + Gamma(b)/Gamma(a) e^z z^(a-b) G(b-a, 1-a, z),

    G(p, q, w) = sum_n (p)_n (q)_n / (n! w^n),

with G truncated at its smallest term.  All functions accept numpy arrays
for the argument ``z`` (parameters ``a`` and ``b`` are scalars) and return
Python scalars for scalar input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _dd
from .errors import (
    GammaPoleError,
    InvalidParameterError,
    SeriesNonConvergence,
    ZeroBaseError,
)

_EPS = np.finfo(float).eps
_DD_EPS = 2.0 ** -104
_TAYLOR_TRIGGER = 1e-12
_ASYM_ACCEPT = 1e-13

# Godfrey's coefficients, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_P = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EvalPolicy:
    """Controls how :func:`kummer_1f1` picks and runs its algorithms.

    ``switch_radius`` is the |z| below which the asymptotic expansion is never
    attempted.  Above it the expansion is used only when its truncation bound
    meets ``series_tol``; otherwise the power series is summed, in
    double-double arithmetic when cancellation would spoil double precision.
    """

    series_tol: float = 1e-15
    switch_radius: float = 25.0
    max_terms: int = 4000
    extended_precision: bool = True

    def __post_init__(self):
        if not self.series_tol > 0:
            raise InvalidParameterError("series_tol must be positive")
        if not self.switch_radius > 0:
            raise InvalidParameterError("switch_radius must be positive")
        if self.max_terms < 1:
            raise InvalidParameterError("max_terms must be >= 1")


DEFAULT_POLICY = EvalPolicy()


def _scalar_out(x, like):
    if np.ndim(like) == 0:
        return complex(np.asarray(x).reshape(()))
    return x


def _is_nonpositive_integer(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.floor(z.real))


def _lanczos_log(z):
    # valid for Re z >= 1/2
    zm = z - 1.0
    x = np.full(z.shape, _LANCZOS_P[0], dtype=complex)
    for i in range(1, len(_LANCZOS_P)):
        x = x + _LANCZOS_P[i] / (zm + i)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(x)


def _log_sin_pi(z):
    """log(sin(pi z)) modulo 2 pi i, safe for large |Im z|."""
    w = np.pi * z
    out = np.empty(w.shape, dtype=complex)
    mid = np.abs(w.imag) < 20.0
    out[mid] = np.log(np.sin(w[mid]))
    up = (~mid) & (w.imag > 0)
    wu = w[up]
    out[up] = -1j * wu + np.log(np.exp(2j * wu) - 1.0) - np.log(2j)
    dn = (~mid) & (w.imag <= 0)
    wd = w[dn]
    out[dn] = 1j * wd + np.log(1.0 - np.exp(-2j * wd)) - np.log(2j)
    return out


def log_gamma(z):
    """log Gamma(z) modulo 2 pi i (fine for ratios and exponentiation).

    Raises :class:`GammaPoleError` at nonpositive integers.
    """
    za = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(_is_nonpositive_integer(za)):
        raise GammaPoleError(f"Gamma has a pole at {za[_is_nonpositive_integer(za)][0]}")
    out = np.empty(za.shape, dtype=complex)
    right = za.real >= 0.5
    out[right] = _lanczos_log(za[right])
    left = ~right
    if np.any(left):
        zl = za[left]
        out[left] = math.log(math.pi) - _log_sin_pi(zl) - _lanczos_log(1.0 - zl)
    return _scalar_out(out.reshape(np.shape(z)), z)


def complex_gamma(z):
    """Euler Gamma function for complex argument.

    Reflection Gamma(z) Gamma(1-z) = pi / sin(pi z) is applied for
    Re z < 1/2.

    >>> abs(complex_gamma(0.5) - math.sqrt(math.pi)) < 1e-14
    True
    """
    return _scalar_out(np.exp(np.asarray(log_gamma(z))), z)


def rgamma(z):
    """1/Gamma(z); exactly zero at the poles of Gamma."""
    za = np.atleast_1d(np.asarray(z, dtype=complex))
    poles = _is_nonpositive_integer(za)
    out = np.zeros(za.shape, dtype=complex)
    if np.any(~poles):
        out[~poles] = np.exp(-np.atleast_1d(log_gamma(za[~poles])))
    return _scalar_out(out.reshape(np.shape(z)), z)


def pochhammer(x, n: int):
    """Rising factorial (x)_n = x (x+1) ... (x+n-1), with (x)_0 = 1."""
    if n < 0 or int(n) != n:
        raise InvalidParameterError("pochhammer needs a nonnegative integer n")
    out = np.ones(np.shape(x), dtype=complex)
    x = np.asarray(x, dtype=complex)
    for k in range(int(n)):
        out = out * (x + k)
    return _scalar_out(out, x)


def principal_power(base, exponent):
    """``base ** exponent`` on the principal branch of the logarithm.

    For a positive real base the result is exp(exponent * log(base)) with a
    real logarithm, so an imaginary exponent gives a unit-modulus value.
    """
    b = np.asarray(base, dtype=complex)
    if np.any(b == 0):
        raise ZeroBaseError("principal_power: zero base")
    out = np.exp(np.asarray(exponent, dtype=complex) * np.log(b))
    if np.ndim(base) == 0 and np.ndim(exponent) == 0:
        return complex(out)
    return out


# ---------------------------------------------------------------------------
# Kummer 1F1
# ---------------------------------------------------------------------------

@dataclass
class KummerResult:
    """Values of 1F1 with absolute error estimates and the method used.

    ``method`` entries: 0 = double series, 1 = double-double series,
    2 = asymptotic expansion, 3 = Taylor continuation along the ray.
    """

    value: np.ndarray
    abs_err: np.ndarray
    method: np.ndarray


SERIES, SERIES_DD, ASYMPTOTIC, TAYLOR = 0, 1, 2, 3


def _series_double(a, b, z, tol, max_terms):
    t = np.ones(z.shape, dtype=complex)
    s = t.copy()
    tmax = np.ones(z.shape)
    az = np.abs(z)
    for n in range(max_terms):
        t = t * ((a + n) / ((b + n) * (n + 1))) * z
        s = s + t
        at = np.abs(t)
        np.maximum(tmax, at, out=tmax)
        if np.all((at <= tol * np.abs(s)) & (n + 1 > az)):
            break
    else:
        raise SeriesNonConvergence(
            "1F1 power series did not converge", partial=s, error_estimate=np.abs(t)
        )
    err = 4.0 * _EPS * tmax * math.sqrt(n + 2) + np.abs(t)
    return s, err


def _series_dd(a, b, z, tol, max_terms):
    shape = z.shape
    t = _dd.ComplexDD.from_complex(np.ones(shape, dtype=complex))
    s = _dd.ComplexDD.from_complex(np.ones(shape, dtype=complex))
    tmax = np.ones(shape)
    az = np.abs(z)
    for n in range(max_terms):
        num = _dd.shifted(a, n, shape)
        den = _dd.shifted(b, n, shape)
        den = den.mul_complex(np.full(shape, float(n + 1), dtype=complex))
        t = (t * num).mul_complex(z).div(den)
        s = s + t
        at = t.abs_hi()
        np.maximum(tmax, at, out=tmax)
        if np.all((at <= tol * 1e-3 * s.abs_hi()) & (n + 1 > az)):
            break
    else:
        raise SeriesNonConvergence(
            "1F1 double-double series did not converge",
            partial=s.to_complex(),
            error_estimate=t.abs_hi(),
        )
    err = 4.0 * _DD_EPS * tmax * math.sqrt(n + 2) + t.abs_hi() + _EPS * s.abs_hi()
    return s.to_complex(), err


def _g_series(p, q, w, max_terms):
    """Optimally truncated G(p, q, w); returns (sum, smallest term)."""
    shape = w.shape
    t = np.ones(shape, dtype=complex)
    partial = t.copy()
    best = np.zeros(shape, dtype=complex)
    tmin = np.ones(shape)
    limit = int(min(max_terms, 4 * np.max(np.abs(w)) + 2 * (abs(p) + abs(q)) + 50))
    done = np.zeros(shape, dtype=bool)
    for n in range(limit):
        t = t * ((p + n) * (q + n) / ((n + 1) * w))
        at = np.abs(t)
        improve = (at < tmin) & ~done
        best = np.where(improve, partial, best)
        tmin = np.where(improve, at, tmin)
        partial = partial + np.where(done, 0, t)
        done |= (tmin <= 1e-18 * np.abs(best)) | (at > 1e8 * tmin) & (n > np.abs(w))
        if np.all(done):
            break
    # a vanished term means the series terminated and best is exact
    best = np.where(tmin == 0, partial, best)
    return best, tmin


def kummer_asymptotic(a, b, z, max_terms=DEFAULT_POLICY.max_terms):
    """Large-|z| expansion of 1F1 with optimal truncation.

    Returns ``(value, abs_err)``; a group whose Gamma prefactor has a pole
    in the denominator is dropped.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    a, b = complex(a), complex(b)
    lgb = log_gamma(b)
    val = np.zeros(z.shape, dtype=complex)
    err = np.zeros(z.shape)
    # rounding in exp(L) costs about eps |L| relative, on top of truncation
    if not _is_nonpositive_integer(b - a):
        lg = log_gamma(b - a)
        L = a * np.log(-z)
        pref = np.exp(lgb - lg - L)
        g, e = _g_series(a, a - b + 1, -z, max_terms)
        val += pref * g
        err += np.abs(pref) * (e + _EPS * np.abs(g) * (4 + abs(lgb) + abs(lg) + np.abs(L)))
    if not _is_nonpositive_integer(a):
        lg = log_gamma(a)
        L = z + (a - b) * np.log(z)
        pref = np.exp(lgb - lg + L)
        g, e = _g_series(b - a, 1 - a, z, max_terms)
        val += pref * g
        err += np.abs(pref) * (e + _EPS * np.abs(g) * (4 + abs(lgb) + abs(lg) + np.abs(L)))
    return val, err


def _taylor_step(a, b, z0, f, df, h, tol):
    """Advance (F, F') of the Kummer equation from z0 to z0 + h by Taylor series."""
    # z w'' + (b - z) w' - a w = 0 gives a two-term recurrence in c_k
    c0, c1 = f, df
    val, der = c0 + c1 * h, c1
    hk = h
    k = 0
    small = 0
    while k < 400:
        c2 = ((k + a) * c0 - (k + 1) * (k + b - z0) * c1) / (z0 * (k + 2) * (k + 1))
        hk1 = hk * h
        tv, td = c2 * hk1, (k + 2) * c2 * hk
        val += tv
        der += td
        if abs(tv) <= tol * abs(val) and abs(td) <= tol * abs(der):
            small += 1
            if small >= 3:
                break
        else:
            small = 0
        c0, c1, hk = c1, c2, hk1
        k += 1
    return val, der


def _taylor_continue(a, b, z, policy, steps=(2.0, 1.0)):
    """1F1 at a single point by analytic continuation along the ray from a
    smaller radius where the double-double series is accurate.

    Returns one value per step size, the relative error of the starting
    data and the number of steps taken with the largest step.
    """
    r = abs(z)
    u = z / r
    r0 = min(0.6 * r, policy.switch_radius)
    while True:
        z0 = np.array([u * r0])
        f, ef = _series_dd(a, b, z0, policy.series_tol, policy.max_terms)
        g, eg = _series_dd(a + 1, b + 1, z0, policy.series_tol, policy.max_terms)
        if ef[0] <= 1e-15 * abs(f[0]) or r0 < 1.0:
            break
        r0 *= 0.7
    f0, df0 = complex(f[0]), complex(a / b * g[0])
    out = []
    for step in steps:
        nsteps = max(1, int(math.ceil((r - r0) / step)))
        h = (z - z0[0]) / nsteps
        zc, fv, dv = complex(z0[0]), f0, df0
        for _ in range(nsteps):
            fv, dv = _taylor_step(a, b, zc, fv, dv, h, _EPS * 0.1)
            zc += h
        out.append(fv)
    start_rel = ef[0] / max(abs(f0), 1e-300) + abs(a / b) * eg[0] / max(abs(df0), 1e-300)
    return out, start_rel, max(1, int(math.ceil((r - r0) / steps[0])))


def kummer_series(a, b, z, policy: EvalPolicy = DEFAULT_POLICY, extended=False):
    """Power series of 1F1; ``extended`` sums in double-double precision."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if extended:
        return _series_dd(complex(a), complex(b), z, policy.series_tol, policy.max_terms)
    return _series_double(complex(a), complex(b), z, policy.series_tol, policy.max_terms)


def kummer_eval(a, b, z, policy: EvalPolicy = DEFAULT_POLICY) -> KummerResult:
    """1F1(a; b; z) with per-point error estimate and method record."""
    a, b = complex(a), complex(b)
    if _is_nonpositive_integer(b):
        raise InvalidParameterError(f"1F1 undefined: b = {b} is a nonpositive integer")
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    val = np.ones(z.shape, dtype=complex)
    err = np.zeros(z.shape)
    method = np.full(z.shape, SERIES, dtype=int)
    nz = z != 0
    large = nz & (np.abs(z) >= policy.switch_radius)
    pending = nz & ~large

    if np.any(large):
        idx = np.flatnonzero(large)
        v, e = kummer_asymptotic(a, b, z[idx], policy.max_terms)
        # the bound includes the rounding floor of the Gamma prefactors,
        # about 1e-14 relative, which the series cannot beat by much either
        ok = np.isfinite(v) & (e <= max(policy.series_tol, _ASYM_ACCEPT) * np.abs(v))
        val[idx[ok]], err[idx[ok]], method[idx[ok]] = v[ok], e[ok], ASYMPTOTIC
        bad = idx[~ok]
        if bad.size:
            # keep the asymptotic answer as fallback; series may do better
            val[bad], err[bad], method[bad] = v[~ok], np.where(np.isfinite(e[~ok]), e[~ok], np.inf), ASYMPTOTIC
            pending[bad] = True

    if np.any(pending):
        idx = np.flatnonzero(pending)
        v, e = _series_double(a, b, z[idx], policy.series_tol, policy.max_terms)
        better = e < err[idx]
        first = method[idx] != ASYMPTOTIC
        take = better | first
        val[idx[take]], err[idx[take]], method[idx[take]] = v[take], e[take], SERIES
        need = idx[err[idx] > policy.series_tol * np.abs(val[idx])]
        if need.size and policy.extended_precision:
            v, e = _series_dd(a, b, z[need], policy.series_tol, policy.max_terms)
            take = e < err[need]
            val[need[take]], err[need[take]], method[need[take]] = v[take], e[take], SERIES_DD
        # last resort in the crossover band where both expansions lose digits
        need = np.flatnonzero(pending & (err > _TAYLOR_TRIGGER * np.abs(val)))
        for i in need:
            (v1, v2), rel1, n1 = _taylor_continue(a, b, z[i], policy)
            e = abs(v1 - v2) + 8.0 * _EPS * math.sqrt(n1) * abs(v1) + rel1 * abs(v1)
            if e < err[i]:
                val[i], err[i], method[i] = v2, e, TAYLOR
    return KummerResult(val, err, method)


def kummer_1f1(a, b, z, policy: EvalPolicy = DEFAULT_POLICY):
    """Kummer confluent hypergeometric function of the first kind.

    ``z`` may be a scalar or an array; ``a`` and ``b`` are scalars.
    """
    res = kummer_eval(a, b, z, policy)
    out = res.value.reshape(np.shape(z))
    return _scalar_out(out, z)


def kummer_derivatives(a, b, z, order: int = 1, policy: EvalPolicy = DEFAULT_POLICY):
    """Return ``[F, F', ..., F^(order)]`` with d/dz 1F1(a;b;z) = (a/b) 1F1(a+1;b+1;z)."""
    a, b = complex(a), complex(b)
    out = []
    coef = 1.0 + 0j
    for k in range(order + 1):
        if k:
            coef *= (a + k - 1) / (b + k - 1)
        if coef == 0:
            out.append(np.zeros(np.shape(z), dtype=complex) if np.ndim(z) else 0j)
            continue
        out.append(coef * kummer_1f1(a + k, b + k, z, policy))
    return out
