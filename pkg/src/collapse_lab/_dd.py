"""Vectorised double-double arithmetic (about 32 significant digits).

Only what the extended-precision Kummer series needs: error-free sums and
products, real dd add/mul/div and a complex wrapper built on top.  All
functions operate elementwise on numpy float64 arrays.

References: Dekker (1971); Hida, Li & Bailey, "Library for double-double
and quad-double arithmetic" (2000).
"""

from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a, b):
    s = a + b
    err = b - (s - a)
    return s, err


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return quick_two_sum(s, e)


def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return quick_two_sum(p, e)


def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e = e + al * b
    return quick_two_sum(p, e)


def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul_d(bh, bl, q1)
    rh, rl = dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = dd_mul_d(bh, bl, q2)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add(q1, q2, q3, np.zeros_like(q3))


class ComplexDD:
    """Complex number with double-double real and imaginary parts."""

    __slots__ = ("rh", "rl", "ih", "il")

    def __init__(self, rh, rl, ih, il):
        self.rh, self.rl, self.ih, self.il = rh, rl, ih, il

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        zero = np.zeros(z.shape)
        return cls(z.real.copy(), zero, z.imag.copy(), zero.copy())

    def to_complex(self):
        return (self.rh + self.rl) + 1j * (self.ih + self.il)

    def __add__(self, other: "ComplexDD") -> "ComplexDD":
        rh, rl = dd_add(self.rh, self.rl, other.rh, other.rl)
        ih, il = dd_add(self.ih, self.il, other.ih, other.il)
        return ComplexDD(rh, rl, ih, il)

    def __mul__(self, other: "ComplexDD") -> "ComplexDD":
        ach, acl = dd_mul(self.rh, self.rl, other.rh, other.rl)
        bdh, bdl = dd_mul(self.ih, self.il, other.ih, other.il)
        adh, adl = dd_mul(self.rh, self.rl, other.ih, other.il)
        bch, bcl = dd_mul(self.ih, self.il, other.rh, other.rl)
        rh, rl = dd_add(ach, acl, -bdh, -bdl)
        ih, il = dd_add(adh, adl, bch, bcl)
        return ComplexDD(rh, rl, ih, il)

    def mul_complex(self, w) -> "ComplexDD":
        """Multiply by a plain complex128 value (exact operand)."""
        w = np.asarray(w, dtype=complex)
        c, d = w.real, w.imag
        ach, acl = dd_mul_d(self.rh, self.rl, c)
        bdh, bdl = dd_mul_d(self.ih, self.il, d)
        adh, adl = dd_mul_d(self.rh, self.rl, d)
        bch, bcl = dd_mul_d(self.ih, self.il, c)
        rh, rl = dd_add(ach, acl, -bdh, -bdl)
        ih, il = dd_add(adh, adl, bch, bcl)
        return ComplexDD(rh, rl, ih, il)

    def div(self, other: "ComplexDD") -> "ComplexDD":
        # x / y = x * conj(y) / |y|^2
        c2h, c2l = dd_mul(other.rh, other.rl, other.rh, other.rl)
        d2h, d2l = dd_mul(other.ih, other.il, other.ih, other.il)
        nh, nl = dd_add(c2h, c2l, d2h, d2l)
        conj = ComplexDD(other.rh, other.rl, -other.ih, -other.il)
        num = self * conj
        rh, rl = dd_div(num.rh, num.rl, nh, nl)
        ih, il = dd_div(num.ih, num.il, nh, nl)
        return ComplexDD(rh, rl, ih, il)

    def abs_hi(self):
        return np.hypot(self.rh, self.ih)

    def where(self, mask, other: "ComplexDD") -> "ComplexDD":
        return ComplexDD(
            np.where(mask, self.rh, other.rh),
            np.where(mask, self.rl, other.rl),
            np.where(mask, self.ih, other.ih),
            np.where(mask, self.il, other.il),
        )


def shifted(x: complex, n: int, shape) -> ComplexDD:
    """Exact double-double representation of ``x + n`` broadcast to ``shape``."""
    rh, rl = two_sum(np.full(shape, float(np.real(x))), np.full(shape, float(n)))
    ih = np.full(shape, float(np.imag(x)))
    return ComplexDD(rh, rl, ih, np.zeros(shape))
