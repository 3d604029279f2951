"""Exact transition sampling for OU processes with a CTS stationary law.

For a mean-reversion rate b and step dt, write a = exp(-b*dt).  The
transition increment of an OU process whose stationary law is
CTS(alpha, beta, c) splits into two independent parts:

* a CTS(alpha, beta, c*(1 - a^alpha)) draw, and
* a compound Poisson sum with rate
  lambda_a = c * Gamma(1-alpha) * beta^alpha / alpha * (1 - a^alpha)
  whose jumps are gamma(1-alpha, beta*V) with the mixing rate factor V
  drawn on [1, 1/a] by plain inverse transform.

No acceptance-rejection loop appears anywhere in this step besides the
one inside the CTS sampler itself.  The alpha = 0 case (gamma stationary
law) is handled separately: there the driving process is compound Poisson
and the step is a decayed-jump sum, see :func:`gamma_ou_step`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from ._util import segment_sums
from .rand_core import (
    CtsParams,
    RngStream,
    _gamma_shape_rate,
    sample_cts,
    sample_poisson,
)

__all__ = [
    "CtsOuProcess",
    "CtsOuStepLaw",
    "step_law",
    "sample_v_ctsou",
    "sample_transition_ctsou",
    "gamma_ou_step",
    "simulate_skeleton_ctsou",
    "cumulants_ctsou",
    "jump_moment_ctsou",
]


@dataclass(frozen=True)
class CtsOuProcess:
    """OU process with stationary law ``stationary`` and reversion rate ``b``."""

    stationary: CtsParams
    b: float

    def __post_init__(self):
        if not (self.b > 0.0):
            raise ValueError(f"mean-reversion rate must be positive, got {self.b}")


@dataclass(frozen=True)
class CtsOuStepLaw:
    """Per-step transition decomposition: scale a, CTS component, jump rate."""

    a: float
    x1_params: CtsParams
    lambda_a: float

    def __post_init__(self):
        # a = exp(-b dt) underflows to 0.0 for very large steps; allow it
        if not (0.0 <= self.a < 1.0):
            raise ValueError(f"scale a must be in [0, 1), got {self.a}")
        if not (self.lambda_a > 0.0):
            raise ValueError(f"jump rate must be positive, got {self.lambda_a}")


def _one_minus_pow(a: float, alpha: float) -> float:
    # 1 - a**alpha without cancellation as a -> 1; a may underflow to 0
    with np.errstate(divide="ignore"):
        return float(-np.expm1(alpha * np.log(a)))


def step_law(p: CtsOuProcess, dt: float) -> CtsOuStepLaw:
    """Transition decomposition over a step of length ``dt`` (alpha > 0)."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    alpha, beta, c = p.stationary.alpha, p.stationary.beta, p.stationary.c
    if alpha == 0.0:
        raise ValueError(
            "alpha = 0 has a compound-Poisson driving process; use gamma_ou_step"
        )
    a = float(np.exp(-p.b * dt))
    shrink = _one_minus_pow(a, alpha)
    lam = c * gamma_fn(1.0 - alpha) * beta**alpha / alpha * shrink
    return CtsOuStepLaw(a, CtsParams(alpha, beta, c * shrink), lam)


def sample_v_ctsou(a: float, alpha: float, stream: RngStream, size=None):
    """Mixing rate factor V on [1, 1/a], density alpha*v^(alpha-1)/(a^-alpha - 1).

    Plain inverse transform of the CDF F(v) = (v^alpha - 1)/(a^-alpha - 1):
    V = (1 + (a^-alpha - 1) U)^(1/alpha), hitting 1 at U=0 and 1/a at U=1.
    """
    if not (0.0 < a < 1.0):
        raise ValueError(f"a must be in (0, 1), got {a}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    u = stream.gen.random(1 if size is None else size)
    v = (1.0 + (a ** -alpha - 1.0) * u) ** (1.0 / alpha)
    return float(v[0]) if size is None else v


def _compound_jumps(law: CtsOuStepLaw, stream: RngStream, n: int) -> np.ndarray:
    """Vector of compound-Poisson components for n independent transitions.

    Counts are drawn first, then the per-jump uniforms and gamma variates,
    so the stream consumption is a deterministic function of the counts.
    """
    alpha, beta = law.x1_params.alpha, law.x1_params.beta
    counts = sample_poisson(law.lambda_a, stream, size=n)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(n)
    v = sample_v_ctsou(law.a, alpha, stream, size=total)
    jumps = _gamma_shape_rate(stream, 1.0 - alpha, beta * v, size=total)
    return segment_sums(jumps, counts)


def sample_transition_ctsou(
    p: CtsOuProcess, x0, dt: float, stream: RngStream, size=None, cts_method: str = "auto"
):
    """One exact draw of X(dt) given X(0) = x0 (vectorised over ``size``).

    ``x0`` may be a scalar or an array of shape ``size``.  The alpha = 0
    case is routed to :func:`gamma_ou_step`.
    """
    if p.stationary.alpha == 0.0:
        return gamma_ou_step(p, x0, dt, stream, size)
    law = step_law(p, dt)
    n = 1 if size is None else size
    x1 = sample_cts(law.x1_params, stream, size=n, method=cts_method)
    x2 = _compound_jumps(law, stream, n)
    out = law.a * np.asarray(x0, dtype=float) + x1 + x2
    return float(out[0]) if size is None else out


def gamma_ou_step(p: CtsOuProcess, x0, dt: float, stream: RngStream, size=None):
    """Exact gamma-OU transition (alpha = 0): decayed compound-Poisson jumps.

    X(dt) = a*x0 + sum_k J_k exp(-b*dt*U_k) with N ~ Poisson(c*b*dt),
    J_k ~ exponential(beta) and U_k uniform; the uniform time trick replaces
    the ordered Poisson arrival times.
    """
    if p.stationary.alpha != 0.0:
        raise ValueError("gamma_ou_step requires a stationary law with alpha = 0")
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    beta, c = p.stationary.beta, p.stationary.c
    a = float(np.exp(-p.b * dt))
    n = 1 if size is None else size
    counts = sample_poisson(c * p.b * dt, stream, size=n)
    total = int(counts.sum())
    if total:
        u = stream.gen.random(total)
        jumps = stream.gen.standard_exponential(total) / beta
        x2 = segment_sums(jumps * np.exp(-p.b * dt * u), counts)
    else:
        x2 = np.zeros(n)
    out = a * np.asarray(x0, dtype=float) + x2
    return float(out[0]) if size is None else out


def simulate_skeleton_ctsou(
    p: CtsOuProcess, x0, grid, stream: RngStream, size=None, cts_method: str = "auto"
):
    """Exact skeleton X(t_1), ..., X(t_M) from X(0) = x0 on an increasing grid.

    Returns an array of shape (M,) for scalar use or (M, size) when
    ``size`` paths are drawn in lockstep from one stream.
    """
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
        x = sample_transition_ctsou(p, x, float(dt), stream, size, cts_method)
        out[i] = x
    return out


def cumulants_ctsou(p: CtsOuProcess, x0: float, dt: float, k: int) -> float:
    """Closed-form transition cumulant:
    x0 e^(-b dt) [k=1] + c beta^(alpha-k) Gamma(k-alpha) (1 - e^(-k b dt))."""
    if k < 1:
        raise ValueError(f"cumulant order must be >= 1, got {k}")
    alpha, beta, c = p.stationary.alpha, p.stationary.beta, p.stationary.c
    val = c * beta ** (alpha - k) * gamma_fn(k - alpha) * (1.0 - np.exp(-k * p.b * dt))
    if k == 1:
        val += x0 * np.exp(-p.b * dt)
    return float(val)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def jump_moment_ctsou(a: float, alpha: float, beta: float, k: int) -> float:
    """k-th moment of one compound-Poisson jump, by quadrature over the mixing law.

    E[J^k] = int_1^{1/a} Gamma(1-alpha+k) / (Gamma(1-alpha) (beta v)^k)
             * f_V(v) dv with f_V(v) = alpha v^(alpha-1) / (a^-alpha - 1),
    evaluated with 64-node Gauss-Legendre on [1, 1/a].  Deliberately
    independent of the closed-form cumulant path it is used to check.
    """
    lo, hi = 1.0, 1.0 / a
    v = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    f_v = alpha * v ** (alpha - 1.0) / (a ** -alpha - 1.0)
    cond = gamma_fn(1.0 - alpha + k) / (gamma_fn(1.0 - alpha) * (beta * v) ** k)
    return float(0.5 * (hi - lo) * np.sum(_GL_WEIGHTS * cond * f_v))
