import math

import numpy as np
import pytest

from collapse_lab import observables as ob
from collapse_lab import selfsim as ss
from collapse_lab.errors import DivergenceError, InvalidParameterError

SQRT7 = math.sqrt(7.0)


def sol_for(alpha, mu, branch="outer", C=1.0):
    p = ss.make_params(alpha=alpha, mu=mu)
    return p, ss.branch_coefficients(p, branch, C)


# --- norm ---------------------------------------------------------------------

def test_norm_outer_frozen():
    # mpmath quadrature of |R|^2 xi^2 with a closed-form tail, 20 digits
    p, sol = sol_for(SQRT7, 0.0)
    q = ob.norm_xi(p, sol)
    assert abs(q.value - 0.45667625257829073) < 1e-12
    assert q.value.imag == 0


def test_norm_inner_frozen():
    p, sol = sol_for(SQRT7, -1.0, "inner")
    assert abs(ob.norm_xi(p, sol).value - 1.6583741342086654) < 1e-11


def test_first_moment_frozen():
    p, sol = sol_for(SQRT7, 0.0)
    M1 = ob.integrate_form(p, sol, ((0, 3.0, 1.0),)).value
    assert abs(M1 - 0.60112634654706336) < 1e-12


@pytest.mark.parametrize("alpha", [SQRT7, 10.0, 20.0, 30.0])
@pytest.mark.parametrize("mu,branch", [(0.0, "outer"), (-0.5 + 0.2j, "outer"), (-0.5 - 0.2j, "outer"),
                                       (0.4, "outer"), (-1.0, "inner"), (-1.3 + 0.5j, "inner")])
def test_norm_matches_flux_identity(alpha, mu, branch):
    p, sol = sol_for(alpha, mu, branch)
    q = ob.norm_xi(p, sol)
    ref = ob.norm_flux_identity(p, sol)
    assert abs(q.value.real - ref) <= 1e-9 * abs(ref)
    assert abs(q.value.real - ref) <= 10 * q.abs_err + 1e-13 * abs(ref)


def test_norm_zero_solution():
    p, sol = sol_for(SQRT7, 0.0, C=0)
    assert ob.norm_xi(p, sol).value == 0


def test_norm_scales_with_C():
    p, sol = sol_for(10.0, 0.2, C=2 - 1j)
    _, s1 = sol_for(10.0, 0.2)
    assert ob.norm_xi(p, sol).value.real == pytest.approx(5 * ob.norm_xi(p, s1).value.real, rel=1e-10)


@pytest.mark.parametrize("mu,branch,expo", [(-1.0, "outer", 0.0), (-0.5, "inner", 0.0), (-0.75, "outer", -1.0)])
def test_norm_divergence(mu, branch, expo):
    p = ss.make_params(alpha=SQRT7, mu=mu)
    if mu == -0.75:
        sol = ss.RadialSolution(ss.canonical_branch(branch), 1.0, 0.0)
    else:
        sol = ss.branch_coefficients(p, branch)
    with pytest.raises(DivergenceError) as ei:
        ob.norm_xi(p, sol)
    assert ei.value.end == "infinity"
    assert ei.value.exponent == pytest.approx(expo)


def test_general_branch_has_no_norm():
    p = ss.make_params(alpha=SQRT7)
    with pytest.raises(InvalidParameterError):
        ob.norm_xi(p, ss.general_solution(1.0, 1.0))


def test_norm_time_dependence():
    p, sol = sol_for(SQRT7, 0.75)
    assert ob.norm_exponent(p) == 3.0
    n = ob.norm_xi(p, sol).value.real
    assert ob.norm_t(p, sol, -2.0, n) / ob.norm_t(p, sol, -1.0, n) == pytest.approx(8.0, rel=1e-14)


def test_norm_constant_at_critical_mu():
    p = ss.make_params(alpha=SQRT7, mu=-0.75 + 0.3j)
    sol = ss.RadialSolution(ss.OUTER, 1.0, 0.0)
    assert ob.norm_exponent(p) == 0.0
    v = ob.norm_t(p, sol, np.array([-1.0, -5.0, -30.0]), 1.0)
    assert np.all(v == 1.0)


def test_norm_t_rejects_future():
    p, sol = sol_for(SQRT7, 0.0)
    with pytest.raises(InvalidParameterError):
        ob.norm_t(p, sol, 0.5, 1.0)


# --- means ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def sqrt7_moments():
    p, sol = sol_for(SQRT7, 0.0)
    return p, sol, ob.xi_moments(p, sol)


def test_mean_r_scaling_convention_ii(sqrt7_moments):
    p, sol, mom = sqrt7_moments
    a = ob.mean_r_pr(p, sol, -1.0, "ii", moments=mom)
    b = ob.mean_r_pr(p, sol, -4.0, "ii", moments=mom)
    assert b.mean_r / a.mean_r == pytest.approx(2.0, rel=1e-13)
    assert a.mean_pr / b.mean_pr == pytest.approx(2.0, rel=1e-13)
    assert a.scale_product == pytest.approx(b.scale_product, rel=1e-13)
    assert a.scale_product >= p.hbar / 2


def test_mean_r_scaling_convention_i(sqrt7_moments):
    # tau^(3/2 + 2 mu') sqrt(tau) = tau^2 at mu = 0
    p, sol, mom = sqrt7_moments
    a = ob.mean_r_pr(p, sol, -1.0, "i", moments=mom)
    b = ob.mean_r_pr(p, sol, -2.0, "i", moments=mom)
    assert b.mean_r / a.mean_r == pytest.approx(4.0, rel=1e-13)
    c = ob.mean_r_pr(p, sol, -3.0, "i", moments=mom)
    assert c.scale_product / a.scale_product == pytest.approx(3.0 ** (3 + 4 * p.mu_re), rel=1e-12)


def test_mean_r_value(sqrt7_moments):
    p, sol, mom = sqrt7_moments
    m = ob.mean_r_pr(p, sol, -1.0, moments=mom)
    assert m.mean_r == pytest.approx(0.60112634654706336 / 0.45667625257829073, rel=1e-11)


def test_momentum_spread_diverges_at_origin(sqrt7_moments):
    p, sol, mom = sqrt7_moments
    m = ob.mean_r_pr(p, sol, -1.0, moments=mom)
    assert m.delta_pr == math.inf
    assert any("origin" in n for n in m.notes)
    assert math.isfinite(m.delta_r)


def test_mean_r_diverges_on_slow_inner_branch():
    p, sol = sol_for(SQRT7, -1.0, "inner")
    with pytest.raises(DivergenceError):
        ob.xi_moments(p, sol)


def test_mean_r_hermitized_shift(sqrt7_moments):
    # the Hermitized p_r adds -i hbar <1/r>, a purely imaginary amount
    p, sol, mom = sqrt7_moments
    a = ob.mean_r_pr(p, sol, -1.0, moments=mom)
    b = ob.mean_r_pr(p, sol, -1.0, hermitized=True)
    inv = ob.integrate_form(p, sol, ((0, 1.0, 1.0),)).value.real / mom[0][0]
    assert b.mean_pr.real == pytest.approx(a.mean_pr.real, rel=1e-12)
    assert b.mean_pr.imag == pytest.approx(a.mean_pr.imag - inv, rel=1e-12)


def test_means_bad_convention(sqrt7_moments):
    p, sol, mom = sqrt7_moments
    with pytest.raises(InvalidParameterError):
        ob.mean_r_pr(p, sol, -1.0, "iii", moments=mom)


# --- energy ---------------------------------------------------------------------

@pytest.mark.parametrize("alpha,mu,branch", [(SQRT7, 0.0, "outer"), (30.0, 0.0, "outer"),
                                             (SQRT7, -1.0, "inner"), (10.0, 0.3 - 0.2j, "outer")])
def test_energy_real_part_identity(alpha, mu, branch):
    p, sol = sol_for(alpha, mu, branch)
    e = ob.energy_integral(p, sol)
    assert abs(e.identity_deviation) <= 1e-9 * abs(e.norm)


def test_energy_imaginary_part_against_oracle():
    # mpmath quadrature of Im(-conj(R) R' xi^3) with a 1/X tail, 20 digits
    p, sol = sol_for(SQRT7, 0.0)
    e = ob.energy_integral(p, sol)
    assert abs(e.I.real - 1.5 * 0.45667625257829073) < 1e-12
    assert abs(e.I.imag - 1.8700859812703580) < 1e-9
    assert e.im_ratio == pytest.approx(abs(e.I.imag) / e.abs_integral)


def test_energy_zero_solution():
    p, sol = sol_for(SQRT7, 0.0, C=0)
    assert ob.energy_integral(p, sol).I == 0


# --- power laws -------------------------------------------------------------------

def test_fit_power_law_pairs():
    f = ob.fit_power_law([(1, 1), (10, 100), (100, 10000)])
    assert f.exponent == pytest.approx(2.0, abs=1e-12)
    assert f.prefactor == pytest.approx(1.0, rel=1e-12)


def test_fit_power_law_arrays():
    x = np.geomspace(1, 1e3, 20)
    f = ob.fit_power_law(x, 3 * x ** -1.5)
    assert f.exponent == pytest.approx(-1.5, abs=1e-12)
    assert f.prefactor == pytest.approx(3.0, rel=1e-12)
    assert f.residual < 1e-12


@pytest.mark.parametrize("args", [([(1, 1), (2, 2)],), ([1, 2, 3], [1, 2, 3]), ([1, 10, 100], [1, -1, 1]),
                                  ([1, 2, 3, 4],)])
def test_fit_power_law_rejects(args):
    with pytest.raises(InvalidParameterError):
        ob.fit_power_law(*args)


def test_critical_mu_has_no_branch():
    from collapse_lab.errors import BranchError
    with pytest.raises(BranchError):
        sol_for(SQRT7, -0.75)
