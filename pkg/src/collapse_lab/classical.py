"""Classical fall to the centre in U(r) = -beta/r**2.

With K = 2*m*beta - M**2 > 0 the radial motion integrates in closed form:

    E = 0 :  r**2 = -chi*t (collapse, t <= 0)  or  chi*t (escape, t >= 0)
    E != 0:  r**2 = (K - 4*E**2*t**2) / (2*m*|E|)        for E < 0
             r**2 = (4*E**2*t**2 - K) / (2*m*E)          for E > 0

where chi = 2*sqrt(K)/m.  The E < 0 orbit lives on [-t0, t0]; for E > 0
the two disconnected branches are t <= -t0 (collapse) and t >= t0
(escape), with t0 = sqrt(K)/(2|E|).  p_r = m dr/dt is differentiated by
hand, never numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    BranchNotStarted,
    CollapseConditionError,
    InvalidParameterError,
    ParticleTrapped,
)

E_ZERO_COLLAPSE = "E_zero_collapse"
E_ZERO_ESCAPE = "E_zero_escape"
E_NEGATIVE = "E_negative"
E_POSITIVE_COLLAPSE = "E_positive_collapse"
E_POSITIVE_ESCAPE = "E_positive_escape"

REGIMES = (E_ZERO_COLLAPSE, E_ZERO_ESCAPE, E_NEGATIVE, E_POSITIVE_COLLAPSE, E_POSITIVE_ESCAPE)


@dataclass(frozen=True)
class ClassicalParams:
    m: float
    beta: float
    M: float = 0.0
    E: float = 0.0

    def __post_init__(self):
        for name in ("m", "beta", "M", "E"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        if self.m <= 0:
            raise InvalidParameterError(f"mass must be positive, got {self.m}")
        if self.beta <= 0:
            raise InvalidParameterError(f"beta must be positive, got {self.beta}")
        if self.M < 0:
            raise InvalidParameterError(f"angular momentum must be nonnegative, got {self.M}")

    @property
    def K(self) -> float:
        """2*m*beta - M**2; positive exactly when collapse is possible."""
        return 2.0 * self.m * self.beta - self.M ** 2


@dataclass(frozen=True)
class ClassicalOrbit:
    regime: str
    chi: float
    t0: Optional[float]
    r_max: Optional[float]

    def domain(self):
        """Closed time interval (lo, hi) on which the orbit exists."""
        t0 = self.t0
        return {
            E_ZERO_COLLAPSE: (-math.inf, 0.0),
            E_ZERO_ESCAPE: (0.0, math.inf),
            E_NEGATIVE: (-t0, t0) if t0 is not None else None,
            E_POSITIVE_COLLAPSE: (-math.inf, -t0) if t0 is not None else None,
            E_POSITIVE_ESCAPE: (t0, math.inf) if t0 is not None else None,
        }[self.regime]


def check_collapse_condition(p: ClassicalParams) -> bool:
    return p.K > 0.0


def make_orbit(p: ClassicalParams, branch: str = "collapse") -> ClassicalOrbit:
    """Classify the orbit by energy.  ``branch`` picks collapse or escape
    when E >= 0 and is ignored for bound (E < 0) motion."""
    if not check_collapse_condition(p):
        raise CollapseConditionError(
            f"no fall to the centre: 2*m*beta - M**2 = {p.K:.6g} must be > 0",
            margin=p.K,
        )
    if branch not in ("collapse", "escape"):
        raise InvalidParameterError(f"branch must be 'collapse' or 'escape', got {branch!r}")
    chi = 2.0 * math.sqrt(p.K) / p.m
    if p.E == 0.0:
        regime = E_ZERO_COLLAPSE if branch == "collapse" else E_ZERO_ESCAPE
        return ClassicalOrbit(regime, chi, None, None)
    aE = abs(p.E)
    t0 = math.sqrt(p.K) / (2.0 * aE)
    r_max = math.sqrt(p.K / (2.0 * p.m * aE))
    if p.E < 0:
        regime = E_NEGATIVE
    else:
        regime = E_POSITIVE_COLLAPSE if branch == "collapse" else E_POSITIVE_ESCAPE
    return ClassicalOrbit(regime, chi, t0, r_max)


def _check_domain(o: ClassicalOrbit, t: np.ndarray) -> None:
    lo, hi = o.domain()
    # collapse-type branches end at hi; escape-type branches start at lo
    if np.any(t > hi):
        bad = float(t[t > hi][0])
        raise ParticleTrapped(
            f"t = {bad:.17g} is past the end of the {o.regime} branch at t = {hi:.17g}; "
            "the particle remains trapped at the centre"
        )
    if np.any(t < lo):
        bad = float(t[t < lo][0])
        raise BranchNotStarted(
            f"t = {bad:.17g} precedes the start of the {o.regime} branch at t = {lo:.17g}"
        )


def evaluate_orbit(o: ClassicalOrbit, p: ClassicalParams, t):
    """Return (r, p_r) at time(s) t.  Scalars in, scalars out."""
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(tt)):
        raise InvalidParameterError("time must be finite")
    _check_domain(o, tt)
    K = p.K
    with np.errstate(divide="ignore", invalid="ignore"):
        if o.regime in (E_ZERO_COLLAPSE, E_ZERO_ESCAPE):
            sgn = -1.0 if o.regime == E_ZERO_COLLAPSE else 1.0
            r = np.sqrt(np.maximum(sgn * o.chi * tt, 0.0))
            pr = sgn * p.m * o.chi / (2.0 * r)
        elif o.regime == E_NEGATIVE:
            aE = abs(p.E)
            r = np.sqrt(np.maximum(K - 4.0 * aE ** 2 * tt ** 2, 0.0) / (2.0 * p.m * aE))
            pr = -2.0 * aE * tt / r
        else:
            E = p.E
            r = np.sqrt(np.maximum(4.0 * E ** 2 * tt ** 2 - K, 0.0) / (2.0 * p.m * E))
            pr = 2.0 * E * tt / r
        if o.t0 is not None:
            # the centre is reached exactly at |t| = t0, not up to roundoff
            r = np.where(np.abs(tt) == o.t0, 0.0, r)
        # the turning point has p_r = 0 exactly, not 0/r_max roundoff
        pr = np.where(tt == 0.0, 0.0, pr) if o.regime == E_NEGATIVE else pr
    if scalar:
        return float(r[0]), float(pr[0])
    return r, pr


def energy(p: ClassicalParams, r, pr):
    """p_r**2/(2m) + M**2/(2 m r**2) - beta/r**2."""
    r = np.asarray(r, dtype=float)
    pr = np.asarray(pr, dtype=float)
    return pr ** 2 / (2.0 * p.m) + (p.M ** 2 / (2.0 * p.m) - p.beta) / r ** 2
