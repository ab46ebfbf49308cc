"""Direct time evolution of the radial Schroedinger equation.

For u = r psi the equation reads

    i hbar u_t = -(hbar^2/2m) u_rr + (hbar^2 l(l+1)/(2m) - beta) u / r^2.

Space: linear finite elements with a lumped mass matrix on a graded grid
r = L log(1 + exp(s)), s uniform.  The grid is geometric near the origin,
where solutions oscillate as r**(1/2 +- i alpha/2), and uniform far out.
Time: Crank-Nicolson.  With real potential and homogeneous Dirichlet ends
the weighted norm sum_j m_j |u_j|^2 is conserved to rounding.

The optional inner absorbing layer extends the grid below r_min and adds
-i W with W = eta f(x) / r**2, x running from 0 at r_min to 1 at the inner
edge.  Because W scales like the potential, the layer looks the same at every
scale and absorbs the incoming r**(1/2 - i alpha/2) wave over a fixed number
of decades.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

from .errors import InstabilityError, InvalidParameterError, NumericalError
from .observables import ScalingFit, fit_power_law

DIRICHLET = "dirichlet"
ABSORBING = "absorbing_layer"


@dataclass(frozen=True)
class PotentialParams:
    """The four constants the radial equation needs; no collapse check, so
    sub-threshold controls can be run."""

    hbar: float = 1.0
    m: float = 1.0
    beta: float = 1.0
    ell: int = 0

    @property
    def coupling(self) -> float:
        """Coefficient c of c u / r^2 in the Hamiltonian."""
        return self.hbar ** 2 * self.ell * (self.ell + 1) / (2 * self.m) - self.beta

    @property
    def gamma(self) -> float:
        return 2 * self.m * self.beta / self.hbar ** 2 - self.ell * (self.ell + 1)


def potential_of(p) -> PotentialParams:
    return PotentialParams(float(p.hbar), float(p.m), float(p.beta), int(p.ell))


@dataclass(frozen=True)
class EvolveConfig:
    r_min: float
    r_max: float
    n_r: int
    dt: float
    t_start: float
    t_end: float
    inner_bc: str = DIRICHLET
    ell: int = 0
    grid_scale: float = 1.0
    uniform: bool = False
    layer_decades: float = 8.0
    layer_points: int = 600
    layer_strength: float = 4.0
    snapshot_every: int = 0

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max) or not math.isfinite(self.r_max):
            raise InvalidParameterError("need 0 < r_min < r_max < inf")
        if self.n_r < 3:
            raise InvalidParameterError("n_r must be at least 3")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidParameterError("dt must be positive")
        if not (self.t_start < self.t_end < 0):
            raise InvalidParameterError("need t_start < t_end < 0")
        if self.inner_bc not in (DIRICHLET, ABSORBING):
            raise InvalidParameterError(f"inner_bc must be {DIRICHLET!r} or {ABSORBING!r}")
        if self.grid_scale <= 0 or self.layer_decades <= 0 or self.layer_points < 2:
            raise InvalidParameterError("grid_scale, layer_decades, layer_points must be positive")
        if self.snapshot_every < 0:
            raise InvalidParameterError("snapshot_every must be nonnegative")


@dataclass
class GridProfile:
    t: float
    r: np.ndarray
    u: np.ndarray
    interior: slice = field(default_factory=lambda: slice(None))

    def norm(self, weights: Optional[np.ndarray] = None) -> float:
        w = lumped_mass(self.r) if weights is None else weights
        return float(np.sum(w[self.interior] * np.abs(self.u[self.interior]) ** 2))


# ---------------------------------------------------------------------------
# grid and operators
# ---------------------------------------------------------------------------

def bulk_grid(cfg: EvolveConfig) -> np.ndarray:
    """Nodes on [r_min, r_max], n_r of them."""
    if cfg.uniform:
        return np.linspace(cfg.r_min, cfg.r_max, cfg.n_r)
    L = cfg.grid_scale
    s0 = math.log(math.expm1(cfg.r_min / L))
    s1 = cfg.r_max / L + math.log(-math.expm1(-cfg.r_max / L))
    s = np.linspace(s0, s1, cfg.n_r)
    r = L * np.logaddexp(0.0, s)
    r[0], r[-1] = cfg.r_min, cfg.r_max
    return r


def make_grid(cfg: EvolveConfig) -> Tuple[np.ndarray, int]:
    """Full node array and the index of r_min in it (0 without a layer)."""
    r = bulk_grid(cfg)
    if cfg.inner_bc != ABSORBING:
        return r, 0
    lo = cfg.r_min * 10.0 ** (-cfg.layer_decades)
    layer = np.geomspace(lo, cfg.r_min, cfg.layer_points)[:-1]
    return np.concatenate([layer, r]), len(layer)


def lumped_mass(r: np.ndarray) -> np.ndarray:
    h = np.diff(r)
    w = np.empty_like(r)
    w[1:-1] = 0.5 * (h[:-1] + h[1:])
    w[0] = 0.5 * h[0]
    w[-1] = 0.5 * h[-1]
    return w


def absorber(r: np.ndarray, r_min: float, decades: float, strength: float) -> np.ndarray:
    """W(r) = strength * x^2 / r^2 inside the layer, zero outside."""
    x = np.clip(np.log10(r_min / r) / decades, 0.0, 1.0)
    return strength * x * x / (r * r)


def _operators(r: np.ndarray, pp: PotentialParams, W: Optional[np.ndarray]):
    """Tridiagonal (lower, diag, upper) of H and lumped mass, interior rows only."""
    h = np.diff(r)
    k = pp.hbar ** 2 / (2 * pp.m)
    M = lumped_mass(r)[1:-1]
    diag = k * (1.0 / h[:-1] + 1.0 / h[1:]) + M * pp.coupling / r[1:-1] ** 2
    if W is not None:
        diag = diag - 1j * M * W[1:-1]
    off = -k / h  # off[j] couples nodes j and j+1
    return off, diag.astype(complex), M


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

BoundaryFn = Callable[[float], Tuple[complex, complex]]


def evolve(cfg: EvolveConfig, initial: GridProfile, p, boundary: Optional[BoundaryFn] = None,
           callback: Optional[Callable[[GridProfile], None]] = None) -> List[GridProfile]:
    """Advance ``initial`` from cfg.t_start to cfg.t_end.

    ``boundary(t) -> (u_left, u_right)`` supplies Dirichlet data at the two
    ends of the node array (zero if omitted).  Returns snapshots every
    ``cfg.snapshot_every`` steps (0: only the final state) plus the final
    state; ``callback`` sees every step.
    """
    pp = potential_of(p)
    r, i0 = make_grid(cfg)
    if initial.r.shape != r.shape or not np.allclose(initial.r, r, rtol=1e-13, atol=0):
        raise InvalidParameterError("initial profile is not on the configured grid")
    if not math.isclose(initial.t, cfg.t_start, rel_tol=1e-12, abs_tol=1e-14):
        raise InvalidParameterError("initial.t does not match cfg.t_start")
    W = absorber(r, cfg.r_min, cfg.layer_decades, cfg.layer_strength) if cfg.inner_bc == ABSORBING else None
    off, diag, M = _operators(r, pp, W)
    n_steps = max(1, int(round((cfg.t_end - cfg.t_start) / cfg.dt)))
    dt = (cfg.t_end - cfg.t_start) / n_steps
    c = 0.5j * dt / pp.hbar
    n = len(diag)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = c * off[1:-1]
    ab[1] = M + c * diag
    ab[2, :-1] = c * off[1:-1]
    u = np.array(initial.u, dtype=complex)
    t = cfg.t_start
    interior = slice(i0, None)
    bvals = None
    if boundary is not None and hasattr(boundary, "batch"):
        bvals = boundary.batch(cfg.t_start + dt * np.arange(n_steps + 1))
        gl, gr = bvals[0][0], bvals[1][0]
    else:
        gl, gr = boundary(t) if boundary else (0j, 0j)
    u[0], u[-1] = gl, gr
    homogeneous = boundary is None
    check_norm = homogeneous and W is None
    wfull = lumped_mass(r)
    norm_prev = float(np.sum(M * np.abs(u[1:-1]) ** 2))
    out: List[GridProfile] = []
    for step in range(1, n_steps + 1):
        ui = u[1:-1]
        # B u = M u - c H u
        Hu = diag * ui
        Hu[:-1] += off[1:-1] * ui[1:]
        Hu[1:] += off[1:-1] * ui[:-1]
        Hu[0] += off[0] * u[0]
        Hu[-1] += off[-1] * u[-1]
        rhs = M * ui - c * Hu
        t_new = cfg.t_start + step * dt
        if bvals is not None:
            gl, gr = bvals[0][step], bvals[1][step]
        elif boundary:
            gl, gr = boundary(t_new)
        else:
            gl, gr = 0j, 0j
        rhs[0] -= c * off[0] * gl
        rhs[-1] -= c * off[-1] * gr
        new = solve_banded((1, 1), ab, rhs, check_finite=False)
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"non-finite values at t = {t_new:.6g}")
        u[1:-1] = new
        u[0], u[-1] = gl, gr
        t = t_new
        if check_norm:
            norm_now = float(np.sum(M * np.abs(new) ** 2))
            if norm_prev > 0 and norm_now > norm_prev * (1 + 1e-6):
                raise InstabilityError(
                    f"norm grew by {norm_now / norm_prev - 1:.3g} in one step at t = {t:.6g}"
                )
            norm_prev = norm_now
        if callback is not None:
            callback(GridProfile(t, r, u, interior))
        if cfg.snapshot_every and step % cfg.snapshot_every == 0 and step != n_steps:
            out.append(GridProfile(t, r, u.copy(), interior))
    out.append(GridProfile(t, r, u.copy(), interior))
    return out


def profile_from(cfg: EvolveConfig, fn: Callable[[np.ndarray], np.ndarray], t: Optional[float] = None) -> GridProfile:
    """Sample u = fn(r) on the configured grid (zero inside the layer)."""
    r, i0 = make_grid(cfg)
    u = np.zeros(r.shape, dtype=complex)
    u[i0:] = fn(r[i0:])
    return GridProfile(cfg.t_start if t is None else t, r, u, slice(i0, None))


def selfsim_profile(cfg: EvolveConfig, p, sol, t: float) -> GridProfile:
    """u = r (-chi t)^mu R(r / sqrt(-chi t)) on the configured grid."""
    from .selfsim import radial_psi

    r, i0 = make_grid(cfg)
    u = np.zeros(r.shape, dtype=complex)
    u[i0:] = r[i0:] * radial_psi(p, sol, r[i0:], np.full(len(r) - i0, t))
    return GridProfile(t, r, u, slice(i0, None))


class SelfSimBoundary:
    """Exact Dirichlet data of the self-similar solution at both ends.

    ``batch(times)`` evaluates all step times at once; evolve uses it when
    present.
    """

    def __init__(self, p, sol, r_left: float, r_right: float, left_zero: bool = False):
        self.p, self.sol, self.rl, self.rr = p, sol, float(r_left), float(r_right)
        self.left_zero = left_zero

    def batch(self, times):
        from .selfsim import radial_psi

        t = np.asarray(times, dtype=float)
        if self.left_zero:
            left = np.zeros(t.shape, dtype=complex)
        else:
            left = self.rl * radial_psi(self.p, self.sol, np.full(t.shape, self.rl), t)
        right = self.rr * radial_psi(self.p, self.sol, np.full(t.shape, self.rr), t)
        return np.asarray(left), np.asarray(right)

    def __call__(self, t):
        left, right = self.batch(np.array([t]))
        return complex(left[0]), complex(right[0])


def selfsim_boundary(p, sol, r_left: float, r_right: float, left_zero: bool = False) -> SelfSimBoundary:
    return SelfSimBoundary(p, sol, r_left, r_right, left_zero)


def relative_l2(a: GridProfile, b: np.ndarray) -> float:
    """||a.u - b|| / ||b|| in the lumped-mass norm over the bulk."""
    w = lumped_mass(a.r)[a.interior]
    d = (a.u - b)[a.interior]
    ref = b[a.interior]
    return float(math.sqrt(np.sum(w * np.abs(d) ** 2) / np.sum(w * np.abs(ref) ** 2)))


def discrete_energy(profile: GridProfile, p) -> float:
    """Re(u^H H u) / (u^H M u) with the scheme's own operators (no absorber)."""
    pp = potential_of(p)
    r = profile.r
    off, diag, M = _operators(r, pp, None)
    u = profile.u
    ui = u[1:-1]
    Hu = diag * ui
    Hu[:-1] += off[1:-1] * ui[1:]
    Hu[1:] += off[1:-1] * ui[:-1]
    Hu[0] += off[0] * u[0]
    Hu[-1] += off[-1] * u[-1]
    den = float(np.sum(M * np.abs(ui) ** 2))
    if den == 0:
        return 0.0
    return float(np.real(np.vdot(ui, Hu))) / den


def virial_collapse_time(profile: GridProfile, p, k: float) -> float:
    """Start time that puts the collapse of <r^2> at t = 0.

    For a scale-invariant Hamiltonian d^2<r^2>/dt^2 = 4<E>/m, so with
    <E> = 0 the second moment is linear in t.  For u = f r^(-ik) with real f
    d<r^2>/dt = -2 hbar k / m, hence t_start = -m <r^2>_0 / (2 hbar k).
    """
    if k <= 0:
        raise InvalidParameterError("zero-energy chirp must be positive")
    pp = potential_of(p)
    w = np.abs(profile.u) ** 2
    r = profile.r
    r2 = float(trapezoid(r * r * w, r) / trapezoid(w, r))
    return -pp.m * r2 / (2 * pp.hbar * k)


def ring_profile(cfg: EvolveConfig, p, r0: float, width: float):
    """Ring u = (r/r0) exp(-(r-r0)^2/(2 w^2)) r^(-i k) with <E> = 0.

    The phase r^(-i k) is the classical zero-energy momentum field
    p_r = -hbar k / r; k is solved for so that the discrete energy vanishes.
    When no k achieves that (kinetic energy of the envelope alone beats the
    potential), k = 0 is used.  Returns (profile, k, energy).
    """
    from scipy.optimize import brentq

    if r0 <= 0 or width <= 0:
        raise InvalidParameterError("ring radius and width must be positive")

    def make(k):
        def fn(r):
            return (r / r0) * np.exp(-(r - r0) ** 2 / (2 * width ** 2)) * np.exp(-1j * k * np.log(r))
        return profile_from(cfg, fn)

    def e_of(k):
        return discrete_energy(make(k), p)

    k = 0.0
    if e_of(0.0) < 0:
        hi = 1.0
        while e_of(hi) < 0:
            hi *= 2.0
            if hi > 1e6:
                raise NumericalError("could not bracket the zero-energy chirp")
        k = brentq(e_of, 0.0, hi, xtol=1e-14, rtol=1e-14)
    prof = make(k)
    return prof, k, discrete_energy(prof, p)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def median_radius(profile: GridProfile) -> float:
    """Median of the |u|^2 distribution over the bulk grid."""
    r = profile.r[profile.interior]
    w = lumped_mass(profile.r)[profile.interior] * np.abs(profile.u[profile.interior]) ** 2
    cw = np.cumsum(w)
    if cw[-1] <= 0:
        return math.nan
    return float(np.interp(0.5 * cw[-1], cw, r))


def layer_reflection(profile: GridProfile, p, r_probe: Sequence[float]) -> float:
    """|B/A|^2 for u ~ A r^(1/2 - i a/2) + B r^(1/2 + i a/2) fitted near r_probe.

    A is the incoming (towards the centre) amplitude.  Only meaningful for
    gamma > 1/4 and r_probe well inside the quasi-static region.
    """
    pp = potential_of(p)
    a = math.sqrt(4 * pp.gamma - 1)
    r = profile.r
    rp = np.asarray(r_probe, dtype=float)
    u = np.interp(rp, r, profile.u.real) + 1j * np.interp(rp, r, profile.u.imag)
    basis = np.stack([rp ** (0.5 - 0.5j * a), rp ** (0.5 + 0.5j * a)], axis=1)
    coef, *_ = np.linalg.lstsq(basis, u, rcond=None)
    A, B = coef
    if A == 0:
        return math.inf
    return float(abs(B / A) ** 2)


@dataclass
class AttractorRun:
    times: np.ndarray
    radii: np.ndarray
    fit: ScalingFit
    reliable: bool
    contraction: float
    reflection: float
    notes: List[str] = field(default_factory=list)


def attractor_run(cfg: EvolveConfig, p, initial: GridProfile,
                  window: Optional[Tuple[float, float]] = None, samples: int = 40,
                  max_residual: float = 0.05, boundary: Optional[BoundaryFn] = None) -> AttractorRun:
    """Evolve and fit the median radius L(t) ~ (-t)^nu over ``window``.

    ``window`` defaults to [t_start/2, t_end]; it must span a decade in -t.
    ``contraction`` is L(window end)/L(window start).  A fit is flagged
    unreliable when L does not shrink by at least 20 % or the log-space
    residual exceeds ``max_residual``.
    """
    w0, w1 = window if window is not None else (0.5 * cfg.t_start, cfg.t_end)
    if not (cfg.t_start <= w0 < w1 <= cfg.t_end):
        raise InvalidParameterError("fit window must lie inside [t_start, t_end]")
    if (-w0) / (-w1) < 10.0 * (1 - 1e-12):
        raise InvalidParameterError("fit window must span at least a decade in -t (window too short)")
    targets = -np.geomspace(-w0, -w1, samples)
    times, radii = [], []
    k = [0]

    def cb(prof):
        while k[0] < len(targets) and prof.t >= targets[k[0]] - 1e-9 * abs(targets[k[0]]):
            times.append(prof.t)
            radii.append(median_radius(prof))
            k[0] += 1

    start = initial
    if math.isclose(w0, cfg.t_start):
        cb(initial)
    final = evolve(cfg, start, p, boundary=boundary, callback=cb)[-1]
    times = np.array(times)
    radii = np.array(radii)
    notes = []
    good = np.isfinite(radii) & (radii > 0)
    fit = fit_power_law(-times[good], radii[good])
    contraction = float(radii[good][-1] / radii[good][0])
    reliable = contraction < 0.8 and fit.residual <= max_residual
    if contraction >= 0.8:
        notes.append(f"no sustained contraction: L(end)/L(start) = {contraction:.3g}")
    if fit.residual > max_residual:
        notes.append(f"power law fits poorly: max log residual {fit.residual:.3g}")
    refl = math.nan
    if cfg.inner_bc == ABSORBING and potential_of(p).gamma > 0.25:
        rp = cfg.r_min * np.geomspace(1.5, 4.0, 8)
        refl = layer_reflection(final, p, rp)
        if refl > 0.01:
            notes.append(f"absorbing layer reflects {refl:.3g} of the incident flux")
            warnings.warn(f"reflection contamination: |B/A|^2 = {refl:.3g}", RuntimeWarning, stacklevel=2)
    return AttractorRun(times, radii, fit, reliable, contraction, refl, notes)


def attractor_exponent(cfg: EvolveConfig, p, initial: GridProfile, window=None,
                       boundary: Optional[BoundaryFn] = None) -> ScalingFit:
    return attractor_run(cfg, p, initial, window, boundary=boundary).fit


def ring_experiment(p, r0: float = 4.0, width: float = 3.0, n_r: int = 4000,
                    r_max_factor: float = 8.0, steps: int = 4000, t_start: Optional[float] = None,
                    late: float = 0.01) -> AttractorRun:
    """Zero-energy ring, absorbing inner layer, fit over [t_start/2, late*t_start].

    t_start defaults to the virial collapse time of the ring, or -m r0^2/hbar
    when no zero-energy chirp exists (sub-threshold coupling).
    """
    pp = potential_of(p)
    probe = EvolveConfig(1e-3, r0 * r_max_factor, n_r, 1.0, -2.0, -1.0, inner_bc=ABSORBING, ell=pp.ell)
    prof, k, _ = ring_profile(probe, p, r0, width)
    if t_start is None:
        t_start = virial_collapse_time(prof, p, k) if k > 0 else -pp.m * r0 * r0 / pp.hbar
    cfg = EvolveConfig(1e-3, r0 * r_max_factor, n_r, abs(t_start) / steps, t_start, late * t_start,
                       inner_bc=ABSORBING, ell=pp.ell)
    prof, k, _ = ring_profile(cfg, p, r0, width)
    run = attractor_run(cfg, p, prof, window=(0.5 * t_start, late * t_start))
    run.notes.append(f"ring r0={r0:g} width={width:g} chirp k={k:.6g} t_start={t_start:.6g}")
    return run


# ---------------------------------------------------------------------------
# snapshots on disk
# ---------------------------------------------------------------------------

SNAPSHOT_SCHEMA = "collapse-lab/profile/1"


def write_snapshot(path: str, profile: GridProfile, cfg: EvolveConfig, extra: Optional[dict] = None) -> None:
    """CSV of r, Re u, Im u, |u|^2 plus a JSON sidecar with the config."""
    from ._io import atomic_write_text, format_csv

    rows = np.stack([profile.r, profile.u.real, profile.u.imag, np.abs(profile.u) ** 2], axis=1)
    text = format_csv(["r", "re_u", "im_u", "abs_u2"], rows, SNAPSHOT_SCHEMA)
    atomic_write_text(path, text)
    meta = {"schema": SNAPSHOT_SCHEMA, "t": profile.t, "config": asdict(cfg)}
    if extra:
        meta.update(extra)
    atomic_write_text(os.path.splitext(path)[0] + ".json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
