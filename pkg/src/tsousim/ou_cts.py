"""Exact transition sampling for OU processes driven by a CTS process.

With a = exp(-b*dt), the transition increment of an OU process whose
driving noise is CTS(alpha, beta, c) is the sum of two independent parts:

* a CTS(alpha, beta/a, c*(1 - a^alpha)/(T*alpha*b)) draw, and
* a compound Poisson sum with rate

      lambda_a = c * beta^alpha * Gamma(1-alpha) / (T*b*alpha^2*a^alpha)
                 * (1 - a^alpha + a^alpha * log a^alpha)

  whose jumps are gamma(1-alpha, beta*V) with the mixing factor V on
  [1, 1/a] having density proportional to (v^alpha - 1)/v.

The mixing density is not monotone, so V is generated through
W = -log(V)/log(a), whose density f_W is increasing and convex on [0, 1].
f_W is sampled by rejection from a piecewise-linear (chord) envelope whose
total mass G_L is a trapezoidal overestimate of 1; doubling the number of
chords drives G_L, and with it the expected number of rejection rounds,
as close to 1 as requested, no matter how small ``a`` is.

Two cheap approximate steps are also provided for comparison: dropping
the compound part entirely (``approx_x1_only``) and replacing the whole
increment with a decayed driving-process increment (``approx_scaled_bdlp``).
Both are asymptotically exact as dt -> 0 because lambda_a = O(dt^2) here,
and badly biased for coarse steps.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from ._util import round_sig, segment_sums
from .levy_core import cts_cumulants
from .rand_core import (
    CtsParams,
    RngStream,
    _gamma_shape_rate,
    sample_cts,
    sample_poisson,
)

__all__ = [
    "OuCtsProcess",
    "OuCtsStepLaw",
    "Envelope",
    "build_envelope",
    "step_law_oucts",
    "f_w_density",
    "sample_w",
    "sample_v_oucts",
    "sample_v_alpha0",
    "sample_transition_oucts",
    "simulate_skeleton_oucts",
    "cumulants_oucts",
    "approx_x1_only",
    "approx_scaled_bdlp",
    "x1_only_cumulants",
    "scaled_bdlp_cumulants",
    "jump_moment_oucts",
    "single_chord_mass",
]

DEFAULT_TARGET_G = 1.01

_MAX_PROPOSAL_ROUNDS = 10**6


@dataclass(frozen=True)
class OuCtsProcess:
    """OU process driven by a CTS noise ``bdlp``, reversion rate ``b``, time scale ``T``."""

    bdlp: CtsParams
    b: float
    T: float = 1.0

    def __post_init__(self):
        if not (self.b > 0.0):
            raise ValueError(f"mean-reversion rate must be positive, got {self.b}")
        if not (self.T > 0.0):
            raise ValueError(f"time scale must be positive, got {self.T}")


@dataclass(frozen=True)
class Envelope:
    """Piecewise-linear dominating function for the mixing density f_W.

    Chords over ``segment_count`` intervals of [0, 1]; since f_W is convex,
    every chord lies above it.  ``masses`` are the per-segment areas q_l,
    ``total_mass`` is G_L = sum q_l >= 1 and 1/G_L is the acceptance rate
    of the rejection sampler built on this envelope.
    """

    segment_count: int
    breakpoints: np.ndarray = field(repr=False)
    f_values: np.ndarray = field(repr=False)
    slopes: np.ndarray = field(repr=False)
    masses: np.ndarray = field(repr=False)
    probabilities: np.ndarray = field(repr=False)
    cum_probabilities: np.ndarray = field(repr=False)
    total_mass: float

    def value(self, w):
        """Envelope value g_L(w) on [0, 1]."""
        w = np.asarray(w, dtype=float)
        seg = np.clip(
            np.searchsorted(self.breakpoints, w, side="right") - 1,
            0,
            self.segment_count - 1,
        )
        return self.f_values[seg] + self.slopes[seg] * (w - self.breakpoints[seg])


def _expm1_minus_x(x: float) -> float:
    """exp(x) - 1 - x, series below 1e-4 to dodge the x^2/2 cancellation."""
    if x < 1e-4:
        return x * x / 2.0 * (1.0 + x / 3.0 + x * x / 12.0 + x**3 / 60.0)
    return float(np.expm1(x) - x)


def _theta(a: float, alpha: float) -> float:
    # log(a^-alpha) > 0
    return -alpha * float(np.log(a))


def f_w_density(w, a: float, alpha: float):
    """Density of W = -log(V)/log(a) on [0, 1].

    f_W(w) = theta * (e^(theta w) - 1) / (e^theta - 1 - theta) with
    theta = log a^-alpha; increasing and convex, f_W(0) = 0.  A series is
    used for theta < 1e-6 where the direct form loses all precision.
    """
    th = _theta(a, alpha)
    w = np.asarray(w, dtype=float)
    if th < 1e-6:
        out = 2.0 * w * (1.0 + th * (w / 2.0 - 1.0 / 3.0))
    else:
        out = th * np.expm1(th * w) / _expm1_minus_x(th)
    return out if out.ndim else float(out)


def single_chord_mass(a: float, alpha: float) -> float:
    """Area of the one-chord envelope: log a^-alpha (a^-alpha - 1)
    / (2 (a^-alpha - 1 - log a^-alpha))."""
    th = _theta(a, alpha)
    return float(th * np.expm1(th) / (2.0 * _expm1_minus_x(th)))


def build_envelope(
    alpha: float,
    a: float,
    target_G: float = DEFAULT_TARGET_G,
    *,
    force_segments: int | None = None,
) -> Envelope:
    """Chord envelope over uniform breakpoints, doubling from 4 segments
    until the total mass G_L drops below ``target_G``.

    ``force_segments`` pins the segment count regardless of the target
    (used for diagnostics); otherwise ``target_G`` must exceed 1.
    """
    if force_segments is None and not (target_G > 1.0):
        raise ValueError(f"target_G must exceed 1, got {target_G}")
    n_seg = force_segments if force_segments is not None else 4
    while True:
        w = np.linspace(0.0, 1.0, n_seg + 1)
        f = np.asarray(f_w_density(w, a, alpha), dtype=float)
        dw = 1.0 / n_seg
        masses = 0.5 * (f[:-1] + f[1:]) * dw
        total = float(masses.sum())
        if force_segments is not None or total <= target_G:
            break
        if n_seg >= 2**21:
            raise RuntimeError(
                f"envelope did not reach target_G={target_G} at {n_seg} segments"
            )
        n_seg *= 2
    probs = masses / total
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    slopes = np.diff(f) / dw
    return Envelope(n_seg, w, f, slopes, masses, probs, cum, total)


@dataclass(frozen=True)
class OuCtsStepLaw:
    """Per-step transition decomposition: scale a, CTS component with
    retempered rate beta/a, jump rate lambda_a, and the f_W envelope."""

    a: float
    x1_params: CtsParams
    lambda_a: float
    envelope: Envelope

    def __post_init__(self):
        # a = exp(-b dt) underflows to 0.0 for very large steps; allow it
        if not (0.0 <= self.a < 1.0):
            raise ValueError(f"scale a must be in [0, 1), got {self.a}")
        if not (self.lambda_a >= 0.0):
            raise ValueError(f"jump rate must be nonnegative, got {self.lambda_a}")


def _one_minus_pow(a: float, alpha: float) -> float:
    # 1 - a**alpha without cancellation as a -> 1; a may underflow to 0
    with np.errstate(divide="ignore"):
        return float(-np.expm1(alpha * np.log(a)))


def _lambda_a(p: OuCtsProcess, a: float) -> float:
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    th = _theta(a, alpha)
    # c beta^alpha Gamma(1-alpha) / (T b alpha^2 a^alpha) * (1 - a^alpha + a^alpha log a^alpha)
    # rewritten with theta = log a^-alpha as K * (e^theta - 1 - theta)
    return (
        c
        * beta**alpha
        * gamma_fn(1.0 - alpha)
        / (p.T * p.b * alpha**2)
        * _expm1_minus_x(th)
    )


def step_law_oucts(
    p: OuCtsProcess, dt: float, target_G: float = DEFAULT_TARGET_G
) -> OuCtsStepLaw:
    """Transition decomposition over a step of length ``dt`` (alpha > 0)."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    if alpha == 0.0:
        raise ValueError(
            "alpha = 0 must use the limiting mixing law; see sample_v_alpha0 "
            "and sample_transition_oucts, which handle it directly"
        )
    a = float(np.exp(-p.b * dt))
    x1 = CtsParams(alpha, beta / a, c * _one_minus_pow(a, alpha) / (p.T * alpha * p.b))
    return OuCtsStepLaw(a, x1, _lambda_a(p, a), _envelope_cached(alpha, a, target_G))


_ENVELOPE_CACHE: dict = {}
_ENVELOPE_LOCK = threading.Lock()


def _envelope_cached(alpha: float, a: float, target_G: float) -> Envelope:
    key = (round_sig(alpha), round_sig(a), round_sig(target_G))
    env = _ENVELOPE_CACHE.get(key)
    if env is None:
        env = build_envelope(alpha, a, target_G)
        with _ENVELOPE_LOCK:
            _ENVELOPE_CACHE.setdefault(key, env)
        env = _ENVELOPE_CACHE[key]
    return env


def sample_w(envelope: Envelope, a: float, alpha: float, stream: RngStream, size=None):
    """Draw W from f_W by rejection under the chord envelope.

    Per proposal: pick a segment with the envelope's probabilities, invert
    the chord's quadratic CDF in closed form, accept with probability
    f_W / g_L.  Acceptance rate is exactly 1/G_L.
    """
    g = stream.gen
    n = 1 if size is None else size
    out = np.empty(n)
    pending = np.arange(n)
    rounds = 0
    bp, fv, slopes = envelope.breakpoints, envelope.f_values, envelope.slopes
    masses, cum = envelope.masses, envelope.cum_probabilities
    while pending.size:
        m = pending.size
        seg = np.searchsorted(cum, g.random(m), side="right")
        seg = np.clip(seg, 0, envelope.segment_count - 1)
        y0 = fv[seg]
        q = masses[seg]
        sl = slopes[seg]
        u = g.random(m)
        # solve y0*s + sl*s^2/2 = u*q for the offset s into the segment;
        # the root below is stable for flat chords (sl -> 0 gives u*q/y0)
        s = 2.0 * u * q / (y0 + np.sqrt(y0 * y0 + 2.0 * sl * u * q))
        w = bp[seg] + s
        g_val = y0 + sl * s
        accept = g.random(m) * g_val <= f_w_density(w, a, alpha)
        out[pending[accept]] = w[accept]
        pending = pending[~accept]
        rounds += 1
        if rounds > _MAX_PROPOSAL_ROUNDS:
            raise RuntimeError("envelope rejection did not terminate")
    return float(out[0]) if size is None else out


def sample_v_oucts(law: OuCtsStepLaw, stream: RngStream, size=None):
    """Mixing factor V = a^-W on [1, 1/a], density
    alpha a^alpha (v^alpha - 1) / ((1 - a^alpha + a^alpha log a^alpha) v)."""
    w = sample_w(law.envelope, law.a, law.x1_params.alpha, stream, size)
    v = np.exp(-np.asarray(w, dtype=float) * np.log(law.a))
    return float(v) if size is None else v


def sample_v_alpha0(a: float, stream: RngStream, size=None):
    """alpha -> 0 limit of the mixing factor: density 2 log v / (v log^2 a)
    on [1, 1/a], sampled by inversion as V = a^(-sqrt(U)) (no rejection)."""
    if not (0.0 < a < 1.0):
        raise ValueError(f"a must be in (0, 1), got {a}")
    u = stream.gen.random(1 if size is None else size)
    v = np.exp(-np.sqrt(u) * np.log(a))
    return float(v[0]) if size is None else v


def _compound_jumps_oucts(law: OuCtsStepLaw, stream: RngStream, n: int) -> np.ndarray:
    alpha, beta_over_a = law.x1_params.alpha, law.x1_params.beta
    beta = beta_over_a * law.a
    counts = sample_poisson(law.lambda_a, stream, size=n)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(n)
    v = sample_v_oucts(law, stream, size=total)
    jumps = _gamma_shape_rate(stream, 1.0 - alpha, beta * v, size=total)
    return segment_sums(jumps, counts)


def sample_transition_oucts(
    p: OuCtsProcess,
    x0,
    dt: float,
    stream: RngStream,
    size=None,
    target_G: float = DEFAULT_TARGET_G,
    cts_method: str = "auto",
):
    """One exact draw of X(dt) given X(0) = x0 (vectorised over ``size``).

    alpha = 0 uses the limiting law: gamma(c*dt/T, beta/a) for the CTS part,
    rate c*log(a)^2/(2*T*b) with exponential(beta*V) jumps for the compound
    part, V drawn by :func:`sample_v_alpha0`.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    n = 1 if size is None else size
    a = float(np.exp(-p.b * dt))
    if alpha == 0.0:
        x1 = _gamma_shape_rate(stream, c * dt / p.T, beta / a, size=n)
        lam = c * np.log(a) ** 2 / (2.0 * p.T * p.b)
        counts = sample_poisson(lam, stream, size=n)
        total = int(counts.sum())
        if total:
            v = sample_v_alpha0(a, stream, size=total)
            jumps = _gamma_shape_rate(stream, 1.0, beta * v, size=total)
            x2 = segment_sums(jumps, counts)
        else:
            x2 = np.zeros(n)
    else:
        law = step_law_oucts(p, dt, target_G)
        x1 = sample_cts(law.x1_params, stream, size=n, method=cts_method)
        x2 = _compound_jumps_oucts(law, stream, n)
    out = a * np.asarray(x0, dtype=float) + x1 + x2
    return float(out[0]) if size is None else out


def simulate_skeleton_oucts(
    p: OuCtsProcess,
    x0,
    grid,
    stream: RngStream,
    size=None,
    target_G: float = DEFAULT_TARGET_G,
    cts_method: str = "auto",
):
    """Exact skeleton on an increasing grid; envelopes are cached per
    distinct step length, so mixed-step grids pay each envelope once."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-D array of times")
    steps = np.diff(np.concatenate(([0.0], grid)))
    if np.any(steps <= 0.0):
        raise ValueError("grid times must be strictly increasing and positive")
    shape = (grid.size,) if size is None else (grid.size, size)
    out = np.empty(shape)
    x = x0
    for i, dt in enumerate(steps):
        x = sample_transition_oucts(p, x, float(dt), stream, size, target_G, cts_method)
        out[i] = x
    return out


def cumulants_oucts(p: OuCtsProcess, x0: float, dt: float, k: int) -> float:
    """Closed-form transition cumulant:
    x0 e^(-b dt) [k=1] + c Gamma(k-alpha) (1 - e^(-k b dt)) / (T b k beta^(k-alpha))."""
    if k < 1:
        raise ValueError(f"cumulant order must be >= 1, got {k}")
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    val = (
        c
        * gamma_fn(k - alpha)
        * (1.0 - np.exp(-k * p.b * dt))
        / (p.T * p.b * k * beta ** (k - alpha))
    )
    if k == 1:
        val += x0 * np.exp(-p.b * dt)
    return float(val)


def approx_x1_only(
    p: OuCtsProcess, x0, dt: float, stream: RngStream, size=None, cts_method: str = "auto"
):
    """Approximate step dropping the compound-Poisson part of the increment."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    n = 1 if size is None else size
    a = float(np.exp(-p.b * dt))
    if alpha == 0.0:
        x1 = _gamma_shape_rate(stream, c * dt / p.T, beta / a, size=n)
    else:
        x1 = sample_cts(
            CtsParams(alpha, beta / a, c * _one_minus_pow(a, alpha) / (p.T * alpha * p.b)),
            stream,
            size=n,
            method=cts_method,
        )
    out = a * np.asarray(x0, dtype=float) + x1
    return float(out[0]) if size is None else out


def x1_only_cumulants(p: OuCtsProcess, x0: float, dt: float, k: int) -> float:
    """Analytic cumulants of the x1-only approximation (its own target law)."""
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    a = float(np.exp(-p.b * dt))
    if alpha == 0.0:
        val = c * dt / p.T * gamma_fn(float(k)) / (beta / a) ** k
    else:
        x1 = CtsParams(alpha, beta / a, c * _one_minus_pow(a, alpha) / (p.T * alpha * p.b))
        val = cts_cumulants(x1, k)
    if k == 1:
        val += a * x0
    return float(val)


def approx_scaled_bdlp(
    p: OuCtsProcess, x0, dt: float, stream: RngStream, size=None, cts_method: str = "auto"
):
    """Approximate step replacing the increment with a decayed driving
    increment: a * L(dt) with L(dt) ~ CTS(alpha, beta, c*dt/T)."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    n = 1 if size is None else size
    a = float(np.exp(-p.b * dt))
    incr = sample_cts(CtsParams(alpha, beta, c * dt / p.T), stream, size=n, method=cts_method)
    out = a * (np.asarray(x0, dtype=float) + incr)
    return float(out[0]) if size is None else out


def scaled_bdlp_cumulants(p: OuCtsProcess, x0: float, dt: float, k: int) -> float:
    """Analytic cumulants of the scaled-driving approximation."""
    alpha, beta, c = p.bdlp.alpha, p.bdlp.beta, p.bdlp.c
    a = float(np.exp(-p.b * dt))
    val = a**k * cts_cumulants(CtsParams(alpha, beta, c * dt / p.T), k)
    if k == 1:
        val += a * x0
    return float(val)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def jump_moment_oucts(a: float, alpha: float, beta: float, k: int) -> float:
    """k-th moment of one compound-Poisson jump, by quadrature over the
    mixing density (v^alpha - 1)/v scaled to integrate to one on [1, 1/a].

    The alpha = 0 limit uses density 2 log v / (v log^2 a).
    """
    lo, hi = 1.0, 1.0 / a
    v = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    if alpha == 0.0:
        f_v = 2.0 * np.log(v) / (v * np.log(a) ** 2)
        cond = gamma_fn(1.0 + k) / (beta * v) ** k
    else:
        th = _theta(a, alpha)
        norm = a**alpha * _expm1_minus_x(th)  # 1 - a^alpha + a^alpha log a^alpha
        f_v = alpha * a**alpha * (v**alpha - 1.0) / (norm * v)
        cond = gamma_fn(1.0 - alpha + k) / (gamma_fn(1.0 - alpha) * (beta * v) ** k)
    return float(0.5 * (hi - lo) * np.sum(_GL_WEIGHTS * cond * f_v))
