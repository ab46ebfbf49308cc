"""High-precision reference values used by the test suite.

Everything here runs on mpmath and is independent of the package code.
"""

import mpmath as mp


def loggamma(z, dps=50):
    with mp.workdps(dps):
        return complex(mp.loggamma(mp.mpc(z)))


def gamma(z, dps=50):
    with mp.workdps(dps):
        return complex(mp.gamma(mp.mpc(z)))


def hyp1f1_series(a, b, z, digits=25):
    """Direct power series with enough guard digits to absorb the
    cancellation, which costs about |z|/ln(10) + |Im a| digits."""
    a, b, z = complex(a), complex(b), complex(z)
    guard = int(abs(z) / 2.302585 + abs(a.imag) + abs(b.imag)) + 20
    with mp.workdps(digits + guard):
        A, B, Z = mp.mpc(a), mp.mpc(b), mp.mpc(z)
        term = mp.mpc(1)
        s = mp.mpc(1)
        tiny = mp.mpf(10) ** (-(digits + guard))
        n = 0
        while True:
            term = term * (A + n) / ((B + n) * (n + 1)) * Z
            s += term
            n += 1
            if n > abs(z) and abs(term) <= tiny * abs(s):
                break
            if n > 100000:
                raise RuntimeError("oracle series did not converge")
        return complex(s)


def hyp1f1(a, b, z, dps=40):
    """mpmath's own 1F1, used as a second opinion on the series."""
    with mp.workdps(dps):
        return complex(mp.hyp1f1(mp.mpc(a), mp.mpc(b), mp.mpc(z)))


def _radial(alpha, mu, branch, xi, deriv, dps):
    with mp.workdps(dps):
        al, mu, xi = mp.mpf(alpha), mp.mpc(mu), mp.mpf(xi)
        I = mp.mpc(0, 1)
        a1, b1 = -(1 + I * al) / 4 - mu, 1 - I * al / 2
        a2, b2 = -(1 - I * al) / 4 - mu, 1 + I * al / 2
        if branch == "outer":
            base = I / 2
            g1, g2 = (5 - I * al) / 4 + mu, (5 + I * al) / 4 + mu
        else:
            base = -I / 2
            g1, g2 = a1, a2
        C1 = mp.exp(-I * al / 4 * mp.log(base)) * mp.gamma(1 + I * al / 2) * mp.gamma(g1)
        C2 = -mp.exp(I * al / 4 * mp.log(base)) * mp.gamma(1 - I * al / 2) * mp.gamma(g2)
        z = -I * xi ** 2 / 2
        out = 0
        for C, c, a, b in ((C1, -0.5 - I * al / 2, a1, b1), (C2, -0.5 + I * al / 2, a2, b2)):
            M = mp.hyp1f1(a, b, z)
            if not deriv:
                out += C * xi ** c * M
            else:
                dM = a / b * mp.hyp1f1(a + 1, b + 1, z)
                out += C * (c * xi ** (c - 1) * M - I * xi ** (c + 1) * dM)
        return complex(out)


def radial_R(alpha, mu, branch, xi, dps=40):
    """R(xi) for the normalizable branch with C = 1, built from mpmath."""
    return _radial(alpha, mu, branch, xi, False, dps)


def radial_dR(alpha, mu, branch, xi, dps=40):
    """dR/dxi, from d/dz 1F1(a;b;z) = a/b 1F1(a+1;b+1;z)."""
    return _radial(alpha, mu, branch, xi, True, dps)
