"""Monte Carlo experiment engine, cumulant validation tables and reports.

Runs blocks of independent transitions (or short skeletons), estimates the
first four cumulants with batch standard errors, and compares them against
the closed forms of the process modules using the signed percentage error

    err% = 100 * (true - estimated) / true.

Path blocks are the unit of parallelism and of stream assignment: block i
always consumes stream id i of the experiment seed, so results are
bit-identical for any worker count and any run.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import cts_ou, levy_core, ou_cts
from .rand_core import CtsParams, RngStream

__all__ = [
    "BLOCK_SIZE",
    "ExperimentConfig",
    "CumulantVector",
    "ErrTableRow",
    "ErrTable",
    "estimate_cumulants",
    "run_experiment",
    "export_trajectories",
    "validate_suite",
    "ValidationReport",
]

# Paths per stream block; worker counts share this partition, so the block
# layout (and with it every drawn variate) is independent of parallelism.
BLOCK_SIZE = 1 << 16

PROCESS_KINDS = ("cts-ou", "ou-cts")
METHODS = ("exact", "x1-only", "scaled-bdlp")


@dataclass
class ExperimentConfig:
    """One experiment: process parameters, horizon, sampling effort, seed."""

    process: str
    alpha: float
    beta: float
    c: float
    b: float
    dt: float
    paths: int
    seed: int
    T: float = 1.0
    x0: float = 0.0
    steps: int = 1
    method: str = "exact"
    target_G: float = ou_cts.DEFAULT_TARGET_G
    batches: int = 100
    workers: int = 1
    out: Optional[str] = None

    def validate(self, check_batches: bool = True) -> "ExperimentConfig":
        """Parameter-domain checks; ``check_batches=False`` relaxes the
        paths >= batches constraint, which only matters for cumulant runs."""
        if self.process not in PROCESS_KINDS:
            raise ValueError(f"process must be one of {PROCESS_KINDS}, got {self.process!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method != "exact" and self.process != "ou-cts":
            raise ValueError(f"method {self.method!r} is only defined for ou-cts")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise ValueError(f"steps must be nonnegative, got {self.steps}")
        if self.batches < 2:
            raise ValueError(f"need at least 2 batches, got {self.batches}")
        if check_batches and self.paths < self.batches:
            raise ValueError(f"need paths >= batches, got {self.paths} < {self.batches}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        CtsParams(self.alpha, self.beta, self.c)  # parameter-domain check
        if not (self.b > 0.0):
            raise ValueError(f"b must be positive, got {self.b}")
        if not (self.T > 0.0):
            raise ValueError(f"T must be positive, got {self.T}")
        return self

    def params(self) -> CtsParams:
        return CtsParams(self.alpha, self.beta, self.c)

    def process_object(self):
        if self.process == "cts-ou":
            return cts_ou.CtsOuProcess(self.params(), self.b)
        return ou_cts.OuCtsProcess(self.params(), self.b, self.T)


@dataclass(frozen=True)
class CumulantVector:
    """First four cumulants, with batch standard errors when estimated."""

    k1: float
    k2: float
    k3: float
    k4: float
    se1: Optional[float] = None
    se2: Optional[float] = None
    se3: Optional[float] = None
    se4: Optional[float] = None
    provenance: str = "estimated"

    def k(self, order: int) -> float:
        return (self.k1, self.k2, self.k3, self.k4)[order - 1]

    def se(self, order: int) -> Optional[float]:
        return (self.se1, self.se2, self.se3, self.se4)[order - 1]


@dataclass(frozen=True)
class ErrTableRow:
    alpha: float
    dt: float
    method: str
    k_order: int
    true: float
    estimated: float
    err_pct: float
    se: float


_CSV_HEADER = "alpha,dt,method,k_order,true,estimated,err_pct,se"


@dataclass
class ErrTable:
    rows: list
    estimated: CumulantVector
    config: ExperimentConfig

    def row(self, k: int) -> ErrTableRow:
        return self.rows[k - 1]

    def to_csv(self, path: str) -> None:
        try:
            with open(path, "w") as fh:
                fh.write(_CSV_HEADER + "\n")
                for r in self.rows:
                    fh.write(
                        f"{r.alpha!r},{r.dt!r},{r.method},{r.k_order},"
                        f"{r.true!r},{r.estimated!r},{r.err_pct!r},{r.se!r}\n"
                    )
        except OSError as exc:
            raise OSError(f"cannot write err table to {path!r}: {exc}") from exc


def _central_cumulants(x: np.ndarray, axis=None):
    m = np.mean(x, axis=axis, keepdims=axis is not None)
    d = x - m
    m2 = np.mean(d**2, axis=axis)
    m3 = np.mean(d**3, axis=axis)
    m4 = np.mean(d**4, axis=axis)
    k1 = np.squeeze(m, axis=axis) if axis is not None else float(m)
    return k1, m2, m3, m4 - 3.0 * m2 * m2


def estimate_cumulants(samples: np.ndarray, batches: int) -> CumulantVector:
    """Plug-in estimates of k1..k4 with batch standard errors.

    The sample is truncated to a multiple of ``batches``; each batch yields
    its own cumulant estimates, and the SE of each order is the batch
    spread over sqrt(batches).
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if batches < 2:
        raise ValueError(f"need at least 2 batches, got {batches}")
    if samples.size < batches:
        raise ValueError(f"need at least {batches} samples, got {samples.size}")
    per = samples.size // batches
    x = samples[: per * batches]
    full = _central_cumulants(x)
    grid = x.reshape(batches, per)
    bk = _central_cumulants(grid, axis=1)
    ses = tuple(float(np.std(col, ddof=1) / np.sqrt(batches)) for col in bk)
    return CumulantVector(*(float(v) for v in full), *ses, provenance="estimated")


def _step_function(cfg: ExperimentConfig) -> Callable:
    """(x, stream, n) -> next x over one dt, honouring process and method."""
    proc = cfg.process_object()
    if cfg.process == "cts-ou":
        return lambda x, stream, n: cts_ou.sample_transition_ctsou(
            proc, x, cfg.dt, stream, size=n
        )
    if cfg.method == "exact":
        return lambda x, stream, n: ou_cts.sample_transition_oucts(
            proc, x, cfg.dt, stream, size=n, target_G=cfg.target_G
        )
    if cfg.method == "x1-only":
        return lambda x, stream, n: ou_cts.approx_x1_only(proc, x, cfg.dt, stream, size=n)
    return lambda x, stream, n: ou_cts.approx_scaled_bdlp(proc, x, cfg.dt, stream, size=n)


def _block_layout(paths: int):
    return [(i, min(BLOCK_SIZE, paths - i * BLOCK_SIZE)) for i in range((paths + BLOCK_SIZE - 1) // BLOCK_SIZE)]


def _run_blocks(cfg: ExperimentConfig, job: Callable, paths: int) -> list:
    """Run ``job(block_index, block_size)`` over the block layout, in
    parallel when cfg.workers > 1; results come back in block order."""
    layout = _block_layout(paths)
    if cfg.workers == 1 or len(layout) == 1:
        return [job(i, n) for i, n in layout]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(job, i, n) for i, n in layout]
        return [f.result() for f in futures]


def simulate_terminal(cfg: ExperimentConfig) -> np.ndarray:
    """Terminal values X(steps * dt) of cfg.paths independent paths."""
    cfg.validate()
    step = _step_function(cfg)

    def job(block_index: int, n: int) -> np.ndarray:
        stream = RngStream(cfg.seed, block_index)
        x = np.full(n, float(cfg.x0))
        for _ in range(cfg.steps):
            x = step(x, stream, n)
        return x

    return np.concatenate(_run_blocks(cfg, job, cfg.paths))


def true_cumulant(cfg: ExperimentConfig, k: int) -> float:
    """Exact-law transition cumulant at the horizon steps * dt."""
    t_end = cfg.steps * cfg.dt
    if cfg.process == "cts-ou":
        return cts_ou.cumulants_ctsou(cfg.process_object(), cfg.x0, t_end, k)
    return ou_cts.cumulants_oucts(cfg.process_object(), cfg.x0, t_end, k)


def target_cumulant(cfg: ExperimentConfig, k: int) -> float:
    """Analytic cumulant of the law the configured method actually samples.

    Equals :func:`true_cumulant` for the exact method.  For the approximate
    steps the per-step increment cumulants accumulate geometrically along
    the recursion X_m = a X_{m-1} + Z.
    """
    if cfg.method == "exact":
        return true_cumulant(cfg, k)
    proc = cfg.process_object()
    fn = ou_cts.x1_only_cumulants if cfg.method == "x1-only" else ou_cts.scaled_bdlp_cumulants
    z_k = fn(proc, 0.0, cfg.dt, k)
    a = float(np.exp(-cfg.b * cfg.dt))
    m = cfg.steps
    geom = m if a == 1.0 else (1.0 - a ** (k * m)) / (1.0 - a**k)
    val = z_k * geom
    if k == 1:
        val += cfg.x0 * a**m
    return val


def run_experiment(cfg: ExperimentConfig) -> ErrTable:
    """Simulate, estimate cumulants, and emit err% rows against the exact law.

    True values are recomputed from closed forms at output time; they are
    never cached from simulation.  Writes CSV when cfg.out is set.
    """
    samples = simulate_terminal(cfg)
    cv = estimate_cumulants(samples, cfg.batches)
    rows = []
    for k in (1, 2, 3, 4):
        truth = true_cumulant(cfg, k)
        est = cv.k(k)
        err = 100.0 * (truth - est) / truth if truth != 0.0 else float("nan")
        rows.append(
            ErrTableRow(cfg.alpha, cfg.dt, cfg.method, k, truth, est, err, cv.se(k))
        )
    table = ErrTable(rows, cv, cfg)
    if cfg.out:
        table.to_csv(cfg.out)
    return table


def export_trajectories(cfg: ExperimentConfig, count: int) -> str:
    """Write ``count`` skeleton paths on the uniform grid dt, 2dt, ..., steps*dt.

    CSV layout: header ``time,path_0,...,path_{count-1}``, one row per grid
    time including t = 0.  Returns the output path.
    """
    if count < 1:
        raise ValueError(f"need at least one path, got {count}")
    if not cfg.out:
        raise ValueError("config must set an output file for trajectories")
    cfg.validate(check_batches=False)
    step = _step_function(cfg)

    def job(block_index: int, n: int) -> np.ndarray:
        stream = RngStream(cfg.seed, block_index)
        x = np.full(n, float(cfg.x0))
        rows = np.empty((cfg.steps + 1, n))
        rows[0] = x
        for i in range(cfg.steps):
            x = step(x, stream, n)
            rows[i + 1] = x
        return rows

    blocks = _run_blocks(cfg, job, count)
    values = np.concatenate(blocks, axis=1)
    times = cfg.dt * np.arange(cfg.steps + 1)
    try:
        with open(cfg.out, "w") as fh:
            fh.write("time," + ",".join(f"path_{j}" for j in range(count)) + "\n")
            for t, row in zip(times, values):
                fh.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trajectories to {cfg.out!r}: {exc}") from exc
    return cfg.out


@dataclass(frozen=True)
class ReportEntry:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class ValidationReport:
    entries: list = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.entries.append(ReportEntry(name, bool(passed), detail))

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_text(self) -> str:
        lines = [e.line() for e in self.entries]
        lines.append(
            f"overall: {'PASS' if self.passed else 'FAIL'} "
            f"({sum(e.passed for e in self.entries)}/{len(self.entries)} checks)"
        )
        return "\n".join(lines) + "\n"


_REFERENCE_PARAMS = (10.0, 0.8, 1.4)  # (b, c, beta) used across the suite
_ALPHA_GRID = (0.3, 0.5, 0.7, 0.9)


def _check_prop_identity(report: ValidationReport) -> None:
    laws = [
        ("gamma", CtsParams(0.0, 1.0, 1.0)),
        ("cts", CtsParams(0.5, 1.4, 0.8)),
    ]
    for name, params in laws:
        triplet = levy_core.LevyTriplet.from_cts(params)
        worst = 0.0
        for a in (0.9, 0.5, 0.1):
            rem = levy_core.aremainder_triplet(triplet, a)
            for u in (0.25, 0.5, 1.0, 2.0, 4.0):
                lhs = levy_core.lk_log_chf(rem, u)
                rhs = levy_core.cts_log_chf(params, u) - levy_core.cts_log_chf(
                    params, a * u
                )
                worst = max(worst, abs(lhs - rhs))
        report.add(
            f"remainder-triplet identity ({name})",
            worst < 1e-6,
            f"max |quadrature - closed form| = {worst:.3e}",
        )


def _check_decomposition_cumulants(report: ValidationReport) -> None:
    worst = 0.0
    for alpha in _ALPHA_GRID:
        for a in (0.9, 0.5, 0.1):
            params = CtsParams(alpha, 1.4, 0.8)
            dec = levy_core.ts_remainder_decompose(params, a)
            for k in (1, 2, 3, 4):
                lhs = levy_core.cts_cumulants(dec.scaled, k) + dec.lambda_a * (
                    cts_ou.jump_moment_ctsou(a, alpha, params.beta, k)
                )
                rhs = (1.0 - a**k) * levy_core.cts_cumulants(params, k)
                worst = max(worst, abs(lhs / rhs - 1.0))
    report.add(
        "remainder decomposition cumulants",
        worst < 1e-6,
        f"max relative deviation = {worst:.3e}",
    )


def _check_envelopes(
    report: ValidationReport, seed: int, proposals: int, inject_fault: bool
) -> None:
    b = _REFERENCE_PARAMS[0]
    a_cells = (np.exp(-b / 365.0), np.exp(-b * 30.0 / 365.0), 0.05)
    grid = np.linspace(0.0, 1.0, 1001)
    stream = RngStream(seed, 901)
    for alpha in _ALPHA_GRID:
        for a in a_cells:
            env = ou_cts.build_envelope(alpha, a, 1.01)
            gap = float(np.max(ou_cts.f_w_density(grid, a, alpha) - env.value(grid)))
            w = ou_cts.sample_w(env, a, alpha, stream, size=proposals)
            in_range = bool(np.all((w >= 0.0) & (w <= 1.0)))
            accept = proposals / _count_proposals(env, a, alpha, seed, proposals)
            ok = (
                env.total_mass <= 1.01
                and gap <= 0.0
                and accept >= 0.98
                and in_range
            )
            report.add(
                f"envelope alpha={alpha} a={a:.4f}",
                ok,
                f"L={env.segment_count} G_L={env.total_mass:.6f} "
                f"domination gap={gap:.2e} acceptance={accept:.4f}",
            )
    if inject_fault:
        env = ou_cts.build_envelope(0.5, 0.44, 1.001, force_segments=1)
        gap = float(np.max(ou_cts.f_w_density(grid, 0.44, 0.5) - env.value(grid)))
        report.add(
            "envelope fault injection (L=1, target 1.001)",
            False,
            f"domination gap={gap:.2e} (holds) but G_1={env.total_mass:.6f} > 1.001",
        )


def _count_proposals(env, a, alpha, seed, n) -> int:
    """Total proposals consumed to accept n draws (for acceptance-rate measurement)."""
    stream = RngStream(seed, 902)
    g = stream.gen
    made = 0
    remaining = n
    while remaining:
        seg = np.clip(
            np.searchsorted(env.cum_probabilities, g.random(remaining), side="right"),
            0,
            env.segment_count - 1,
        )
        y0 = env.f_values[seg]
        q = env.masses[seg]
        sl = env.slopes[seg]
        u = g.random(remaining)
        s = 2.0 * u * q / (y0 + np.sqrt(y0 * y0 + 2.0 * sl * u * q))
        w = env.breakpoints[seg] + s
        g_val = y0 + sl * s
        accept = g.random(remaining) * g_val <= ou_cts.f_w_density(w, a, alpha)
        made += remaining
        remaining = int((~accept).sum())
    return made


def _check_additivity(report: ValidationReport) -> None:
    b, c, beta = _REFERENCE_PARAMS
    worst_cts, worst_ou = 0.0, 0.0
    for alpha in _ALPHA_GRID:
        for dt in (1.0 / 365.0, 30.0 / 365.0):
            pc = cts_ou.CtsOuProcess(CtsParams(alpha, beta, c), b)
            law = cts_ou.step_law(pc, dt)
            po = ou_cts.OuCtsProcess(CtsParams(alpha, beta, c), b)
            slaw = ou_cts.step_law_oucts(po, dt)
            for k in (1, 2, 3, 4):
                lhs = levy_core.cts_cumulants(law.x1_params, k) + law.lambda_a * (
                    cts_ou.jump_moment_ctsou(law.a, alpha, beta, k)
                )
                worst_cts = max(
                    worst_cts, abs(lhs / cts_ou.cumulants_ctsou(pc, 0.0, dt, k) - 1.0)
                )
                lhs = levy_core.cts_cumulants(slaw.x1_params, k) + slaw.lambda_a * (
                    ou_cts.jump_moment_oucts(slaw.a, alpha, beta, k)
                )
                worst_ou = max(
                    worst_ou, abs(lhs / ou_cts.cumulants_oucts(po, 0.0, dt, k) - 1.0)
                )
    report.add(
        "cumulant additivity (cts-ou)", worst_cts < 1e-6, f"max rel dev = {worst_cts:.3e}"
    )
    report.add(
        "cumulant additivity (ou-cts)", worst_ou < 1e-6, f"max rel dev = {worst_ou:.3e}"
    )


def _check_limits(report: ValidationReport) -> None:
    b, c, beta = _REFERENCE_PARAMS
    alpha = 0.5
    from scipy.special import gamma as gamma_fn

    pc = cts_ou.CtsOuProcess(CtsParams(alpha, beta, c), b)
    lam = cts_ou.step_law(pc, 1e-6).lambda_a
    lim = c * gamma_fn(1.0 - alpha) * b * beta**alpha * 1e-6
    dev1 = abs(lam / lim - 1.0)
    report.add(
        "small-step jump rate, stationary-CTS case",
        dev1 < 1e-3,
        f"lambda/(c G(1-a) b beta^a dt) - 1 = {dev1:.2e}",
    )

    po = ou_cts.OuCtsProcess(CtsParams(alpha, beta, c), b)
    lam = ou_cts.step_law_oucts(po, 1e-4).lambda_a
    lim = c * gamma_fn(1.0 - alpha) * b * beta**alpha * 1e-8 / 2.0
    dev2 = abs(lam / lim - 1.0)
    report.add(
        "small-step jump rate, CTS-driven case",
        dev2 < 1e-3,
        f"2 lambda T/(c G(1-a) b beta^a dt^2) - 1 = {dev2:.2e}",
    )

    a = float(np.exp(-b * 30.0 / 365.0))
    po_small = ou_cts.OuCtsProcess(CtsParams(1e-6, beta, c), b)
    lam = ou_cts._lambda_a(po_small, a)
    lim = c * np.log(a) ** 2 / (2.0 * po_small.T * b)
    dev3 = abs(lam / lim - 1.0)
    report.add(
        "alpha -> 0 jump rate limit", dev3 < 1e-4, f"relative deviation = {dev3:.2e}"
    )

    worst = 0.0
    for alpha_ in _ALPHA_GRID:
        for a_ in (0.97, 0.44, 0.05):
            g1 = ou_cts.build_envelope(alpha_, a_, force_segments=1).total_mass
            worst = max(worst, abs(g1 - ou_cts.single_chord_mass(a_, alpha_)))
    report.add(
        "single-chord envelope mass identity", worst < 1e-12, f"max dev = {worst:.2e}"
    )


def validate_suite(
    inject_envelope_fault: bool = False, seed: int = 1234, proposals: int = 10**5
) -> ValidationReport:
    """Run the module invariant checks and return a pass/fail report.

    ``inject_envelope_fault`` adds a deliberately under-resolved envelope
    cell to demonstrate what a failure report looks like; the overall
    verdict then reports FAIL.
    """
    report = ValidationReport()
    _check_prop_identity(report)
    _check_decomposition_cumulants(report)
    _check_envelopes(report, seed, proposals, inject_envelope_fault)
    _check_additivity(report)
    _check_limits(report)
    return report
