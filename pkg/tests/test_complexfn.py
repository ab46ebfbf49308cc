import cmath
import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from collapse_lab import complexfn as cf
from collapse_lab.errors import GammaPoleError, InvalidParameterError, SeriesNonConvergence, ZeroBaseError

import oracles

HERE = os.path.dirname(os.path.abspath(__file__))
SQRT7 = math.sqrt(7.0)


def rel(a, b):
    return abs(a - b) / abs(b)


# --- gamma ----------------------------------------------------------------

def test_gamma_at_one():
    assert rel(cf.complex_gamma(1.0), 1.0) < 1e-15


def test_gamma_at_half():
    assert rel(cf.complex_gamma(0.5), math.sqrt(math.pi)) < 1e-14


def test_gamma_one_plus_i_frozen():
    # mpmath, 50 digits
    ref = 0.49801566811835607 - 0.15494982830181067j
    assert rel(cf.complex_gamma(1 + 1j), ref) < 1e-13
    assert rel(cf.complex_gamma(1 + 1j), oracles.gamma(1 + 1j)) < 1e-13


@pytest.mark.parametrize("z", [0, -1, -7, -40.0])
def test_gamma_poles(z):
    with pytest.raises(GammaPoleError):
        cf.complex_gamma(z)


def test_gamma_reflection_side():
    for z in (-0.5, -3.7 + 0.2j, 0.2 - 4j, -12.5 + 30j):
        assert rel(cf.complex_gamma(z), oracles.gamma(z)) < 1e-12


def test_log_gamma_large_imaginary_part():
    # the Gamma ratios of the branch coefficients need this at alpha = 50
    for z in (1 + 25j, 1 - 25j, 3.1 + 12.5j, -0.25 - 12.5j, -2.25 + 12.5j):
        d = cf.log_gamma(z) - oracles.loggamma(z)
        # equal modulo 2 pi i
        d = d.real + 1j * math.remainder(d.imag, 2 * math.pi)
        assert abs(d) < 1e-12 * max(1.0, abs(oracles.loggamma(z)))


def test_rgamma_zero_at_poles():
    assert cf.rgamma(-3) == 0
    assert rel(cf.rgamma(4.0), 1 / 6) < 1e-13


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30))
def test_log_gamma_matches_scipy(x, y):
    z = complex(x, y)
    if abs(z - round(x)) < 1e-3 and round(x) <= 0:
        return
    ref = complex(special.loggamma(z))
    d = cf.log_gamma(z) - ref
    d = d.real + 1j * math.remainder(d.imag, 2 * math.pi)
    assert abs(d) <= 1e-12 * max(1.0, abs(ref))


# --- pochhammer -------------------------------------------------------------

@pytest.mark.parametrize("x", [0.0, 3.5, -2 + 1j])
def test_pochhammer_zero(x):
    assert cf.pochhammer(x, 0) == 1


def test_pochhammer_examples():
    assert cf.pochhammer(2, 3) == 24
    assert abs(cf.pochhammer(0.5, 2) - 0.75) < 1e-16


def test_pochhammer_rejects_negative_n():
    with pytest.raises(InvalidParameterError):
        cf.pochhammer(1.0, -1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 8), st.floats(-8, 8), st.integers(0, 25))
def test_pochhammer_gamma_consistency(x, y, n):
    z = complex(x, y)
    lhs = cf.pochhammer(z, n) * cf.complex_gamma(z)
    assert rel(lhs, cf.complex_gamma(z + n)) < 1e-10


# --- principal power --------------------------------------------------------

def test_power_of_one():
    assert cf.principal_power(1.0, 0.5j * 30) == 1


@pytest.mark.parametrize("xi", [1e-16, 0.3, 1.0, 7.0, 1e6])
def test_power_of_positive_base_is_a_phase(xi):
    al = 30.0
    v = cf.principal_power(xi, 0.5j * al)
    assert abs(abs(v) - 1) < 1e-15
    assert abs(cmath.phase(v) - math.remainder(0.5 * al * math.log(xi), 2 * math.pi)) < 1e-12


def test_power_complex_base_frozen():
    # mpmath exp(i*30/4 * Log(-i/2)), 50 digits
    ref = 61092.951513566666 + 115589.02596777312j
    assert rel(cf.principal_power(-0.5j, 0.25j * 30), ref) < 1e-14


def test_power_zero_base():
    with pytest.raises(ZeroBaseError):
        cf.principal_power(0.0, 1j)


# --- kummer -----------------------------------------------------------------

def test_kummer_at_zero():
    assert cf.kummer_1f1(-0.3 + 2j, 1 - 5j, 0.0) == 1


def test_kummer_exponential():
    z = 0.5 - 0.3j
    assert rel(cf.kummer_1f1(1, 1, z), cmath.exp(z)) < 1e-15


def test_kummer_radial_example_frozen():
    a, b = -(1 + 1j * SQRT7) / 4, 1 - 0.5j * SQRT7
    ref = 0.8124281620109831 - 0.09256043918164589j  # 50-digit series
    assert rel(cf.kummer_1f1(a, b, -0.5j), ref) < 1e-14


def test_kummer_bad_b():
    with pytest.raises(InvalidParameterError):
        cf.kummer_1f1(0.5, -2, 1.0)


def test_kummer_nonconvergence_reports_partial():
    pol = cf.EvalPolicy(max_terms=5)
    with pytest.raises(SeriesNonConvergence) as ei:
        cf.kummer_series(0.5, 1.5, np.array([10.0]), pol)
    assert ei.value.partial is not None
    assert np.all(np.asarray(ei.value.error_estimate) > 0)


@pytest.mark.parametrize("kw", [dict(series_tol=0), dict(switch_radius=-1), dict(max_terms=0)])
def test_policy_validation(kw):
    with pytest.raises(InvalidParameterError):
        cf.EvalPolicy(**kw)


def test_asymptotic_drops_pole_group():
    # a = -2: 1/Gamma(a) vanishes and the series is a polynomial
    b = 1.5 + 2j
    z = np.array([-30j, 40.0 + 5j])
    val, err = cf.kummer_asymptotic(-2, b, z)
    exact = 1 - 2 * z / b + z * z / (b * (b + 1))
    assert np.all(np.abs(val - exact) <= 1e-13 * np.abs(exact))


def _corpus():
    with open(os.path.join(HERE, "data", "kummer_corpus.json")) as fh:
        return json.load(fh)


def test_corpus_against_oracle():
    pts = _corpus()
    assert len(pts) == 200
    big = sum(abs(complex(*p["z"])) >= cf.DEFAULT_POLICY.switch_radius for p in pts)
    assert 50 <= big <= 150
    worst = 0.0
    for p in pts:
        v = cf.kummer_1f1(complex(*p["a"]), complex(*p["b"]), complex(*p["z"]))
        worst = max(worst, rel(v, complex(*p["ref"])))
    assert worst < 1e-10


def test_error_estimates_are_honest_on_corpus():
    for p in _corpus():
        a, b, z, ref = (complex(*p[k]) for k in ("a", "b", "z", "ref"))
        r = cf.kummer_eval(a, b, z)
        assert abs(r.value[0] - ref) <= 10 * r.abs_err[0] + 1e-15 * abs(ref)


FAMILIES = [(al, mu) for al in (1.0, SQRT7, 10.0, 30.0, 50.0) for mu in (0.0, -2.0, 2.0, -1 + 1j)]


def _families(al, mu):
    yield -(1 + 1j * al) / 4 - mu, 1 - 0.5j * al
    yield -(1 - 1j * al) / 4 - mu, 1 + 0.5j * al


@pytest.mark.parametrize("al,mu", FAMILIES)
def test_contiguous_relation(al, mu):
    # b M(a,b,z) - b M(a-1,b,z) - z M(a,b+1,z) = 0
    z = -0.5j * np.geomspace(1e-2, 12.0, 25) ** 2
    for a, b in _families(al, mu):
        f0 = cf.kummer_1f1(a, b, z)
        f1 = cf.kummer_1f1(a - 1, b, z)
        f2 = cf.kummer_1f1(a, b + 1, z)
        res = b * f0 - b * f1 - z * f2
        scale = np.abs(b * f0) + np.abs(b * f1) + np.abs(z * f2)
        assert np.max(np.abs(res) / scale) < 1e-8


@pytest.mark.parametrize("al,mu", FAMILIES[::3])
def test_derivative_identity_finite_difference(al, mu):
    z = -0.5j * np.array([0.3, 1.0, 3.0, 6.0, 8.0, 10.0]) ** 2
    h = 1e-5
    for a, b in _families(al, mu):
        F, dF = cf.kummer_derivatives(a, b, z, order=1)
        fd = (cf.kummer_1f1(a, b, z + h) - cf.kummer_1f1(a, b, z - h)) / (2 * h)
        assert np.max(np.abs(fd - dF) / np.abs(dF)) < 1e-6


@pytest.mark.parametrize("al,mu", FAMILIES)
def test_regime_agreement(al, mu):
    # on each family, take the band just above where the asymptotic bound is
    # below 1e-10 relative, and compare with the double-double series there
    for a, b in _families(al, mu):
        radii = np.arange(25.0, 120.0, 0.5)
        z = -1j * radii
        v, e = cf.kummer_asymptotic(a, b, z)
        ok = np.flatnonzero(e <= 1e-10 * np.abs(v))
        assert ok.size, "no overlap band"
        band = z[ok[0]: ok[0] + 10]
        va, _ = cf.kummer_asymptotic(a, b, band)
        vs, _ = cf.kummer_series(a, b, band, extended=True)
        assert np.max(np.abs(va - vs) / np.abs(vs)) < 1e-8


def test_methods_recorded():
    al = 30.0
    a, b = -(1 + 1j * al) / 4, 1 - 0.5j * al
    r = cf.kummer_eval(a, b, np.array([-0.5j, -200j]))
    assert r.method[0] in (cf.SERIES, cf.SERIES_DD)
    assert r.method[1] == cf.ASYMPTOTIC


def test_vector_and_scalar_shapes():
    z = np.array([[0.1, -1j], [2.0, 3j]])
    out = cf.kummer_1f1(0.5, 1.5, z)
    assert out.shape == (2, 2)
    assert isinstance(cf.kummer_1f1(0.5, 1.5, 0.1), complex)
