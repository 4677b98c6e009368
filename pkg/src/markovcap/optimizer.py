"""Backtracking gradient ascent on approximating sequences, assumption
checks for the starting constants, and the certified error recursion."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import ObjectiveSequence, PointClass, classify_point

ZERO_GRAD_TOL = 1e-14


class ConfigError(ValueError):
    pass


class BacktrackExhausted(RuntimeError):
    def __init__(self, message: str, trace: "Trace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Algo1Config:
    alpha: float = 0.4
    beta: float = 0.9
    theta0: tuple[float, ...] = (0.5,)
    outer_iters: int = 110
    max_backtracks: int = 200
    # absolute allowance for rounding in the sufficient-increase test
    eval_tol: float = 1e-14

    def __post_init__(self):
        object.__setattr__(self, "theta0", tuple(float(x) for x in np.atleast_1d(self.theta0)))
        if not 0 < self.alpha < 0.5:
            raise ConfigError("alpha must lie in (0,0.5)")
        if not 0 < self.beta < 1:
            raise ConfigError("beta must lie in (0,1)")
        if int(self.outer_iters) != self.outer_iters or self.outer_iters < 1:
            raise ConfigError("outer_iters must be a positive integer")
        if self.max_backtracks < 1:
            raise ConfigError("max_backtracks must be a positive integer")
        if self.eval_tol < 0:
            raise ConfigError("eval_tol must be non-negative")


@dataclass(frozen=True)
class Algo3Config(Algo1Config):
    beta: float = 0.5
    outer_iters: int = 10
    theta0: tuple[float, ...] = (0.2,)
    b: float = 0.5
    y0: Optional[float] = None
    # stop and label the trace when backtracking runs out, instead of raising
    stop_on_exhaust: bool = True

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.b < 1:
            raise ConfigError("b must lie in (0,1)")


@dataclass(frozen=True)
class IterateRecord:
    outer_k: int
    theta: tuple[float, ...]
    f_value: float
    grad_norm: float
    step_t: float
    backtracks: int
    perturbed: bool = False
    floor_active: bool = False


@dataclass
class Trace:
    """Outer iterations of one run, with the starting point and stop cause."""

    algorithm: int
    theta0: tuple[float, ...]
    f0: float
    grad0_norm: float
    records: list[IterateRecord] = field(default_factory=list)
    stop_reason: str = "outer_iters"

    def __iter__(self) -> Iterator[IterateRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def final(self) -> IterateRecord:
        if not self.records:
            raise IndexError("empty trace")
        return self.records[-1]

    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])


def _gradient(seq: ObjectiveSequence, k: int, theta: np.ndarray) -> np.ndarray:
    return seq.gradient(k, theta)


def _check_start(seq: ObjectiveSequence, theta0) -> np.ndarray:
    x = seq.domain.as_point(theta0)
    if classify_point(seq.domain, x) is not PointClass.INTERIOR:
        raise ConfigError(f"theta0={x.tolist()} is not an interior point of the domain")
    return x


def _order_cap(seq: ObjectiveSequence, K: int) -> int:
    k0 = seq.constants.k0
    if seq.max_k is not None and K + k0 > seq.max_k:
        return max(0, seq.max_k - k0)
    return K


def run_algorithm1(seq: ObjectiveSequence, cfg: Algo1Config) -> Trace:
    """Gradient ascent for the strongly concave case.

    Step k uses g_k = f_{k+k0}: the direction is the gradient of g_{k-1} at
    the previous iterate, and t shrinks by beta until the trial point is
    interior and passes the sufficient-increase test with slack
    (N(k+k0)+M) M t rho^(k+k0).
    """
    c = seq.constants
    if c.m is None:
        raise ConfigError("strong-concavity modulus m is required")
    theta = _check_start(seq, cfg.theta0)
    k0, M, rho = c.k0, c.M, c.rho
    grad = _gradient(seq, k0, theta)
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        raise ConfigError("gradient of f_k0 vanishes at theta0; choose another start")
    trace = Trace(1, tuple(theta), seq.value(k0, theta), gnorm)
    K = _order_cap(seq, cfg.outer_iters)
    if K < cfg.outer_iters:
        trace.stop_reason = "max_k"

    for k in range(1, K + 1):
        order = k + k0
        perturbed = gnorm <= ZERO_GRAD_TOL
        if perturbed:
            direction = _gradient(seq, order - 1, theta + rho**order)
        else:
            direction = grad
        base = seq.value(order, theta)
        slack_rate = (c.N(order) + M) * M * rho**order
        gain_rate = cfg.alpha * gnorm**2
        t = 1.0
        for backtracks in range(cfg.max_backtracks + 1):
            tau = theta + t * direction
            if classify_point(seq.domain, tau) is PointClass.INTERIOR:
                f_tau = seq.value(order, tau)
                if f_tau >= base + t * (gain_rate - slack_rate) - cfg.eval_tol:
                    break
            t *= cfg.beta
        else:
            trace.stop_reason = "backtrack_exhausted"
            raise BacktrackExhausted(
                f"no acceptable step after {cfg.max_backtracks} backtracks at k={k}", trace
            )
        theta = tau
        grad = _gradient(seq, order, theta)
        gnorm = float(np.linalg.norm(grad))
        trace.records.append(
            IterateRecord(k, tuple(theta), f_tau, gnorm, t, backtracks, perturbed)
        )
    return trace


def gradient_floor(seq: ObjectiveSequence, order: int, b: float) -> float:
    c = seq.constants
    return 2 * c.N(order) * c.rho ** (order / 3) / (1 - b)


def run_algorithm3(seq: ObjectiveSequence, cfg: Algo3Config) -> Trace:
    """Gradient ascent without concavity.

    Besides interiority and the plain sufficient-increase test, a trial point
    must keep the gradient norm of g_k above 2 N rho^((k+k0)/3) / (1-b).
    """
    c = seq.constants
    theta = _check_start(seq, cfg.theta0)
    k0 = c.k0
    grad = _gradient(seq, k0, theta)
    gnorm = float(np.linalg.norm(grad))
    f0 = seq.value(k0, theta)
    floor0 = gradient_floor(seq, k0, cfg.b)
    if gnorm < floor0:
        raise ConfigError(f"theta0 outside A: gradient norm {gnorm:.6g} below floor {floor0:.6g}")
    if cfg.y0 is not None and f0 < cfg.y0:
        raise ConfigError(f"theta0 outside B: f_k0(theta0)={f0:.9g} below y0={cfg.y0:.9g}")
    trace = Trace(3, tuple(theta), f0, gnorm)
    K = _order_cap(seq, cfg.outer_iters)
    if K < cfg.outer_iters:
        trace.stop_reason = "max_k"

    for k in range(1, K + 1):
        order = k + k0
        base = seq.value(order, theta)
        floor = gradient_floor(seq, order, cfg.b)
        gain_rate = cfg.alpha * gnorm**2
        t = 1.0
        last_reject = None
        for backtracks in range(cfg.max_backtracks + 1):
            tau = theta + t * grad
            if classify_point(seq.domain, tau) is not PointClass.INTERIOR:
                last_reject = "domain"
            else:
                g_tau = _gradient(seq, order, tau)
                n_tau = float(np.linalg.norm(g_tau))
                if n_tau < floor:
                    last_reject = "floor"
                else:
                    f_tau = seq.value(order, tau)
                    if f_tau >= base + t * gain_rate - cfg.eval_tol:
                        break
                    last_reject = "armijo"
            t *= cfg.beta
        else:
            trace.stop_reason = "backtrack_exhausted"
            if cfg.stop_on_exhaust:
                return trace
            raise BacktrackExhausted(
                f"no acceptable step after {cfg.max_backtracks} backtracks at k={k}", trace
            )
        theta, grad, gnorm = tau, g_tau, n_tau
        trace.records.append(
            IterateRecord(k, tuple(theta), f_tau, gnorm, t, backtracks, False, last_reject == "floor")
        )
    return trace


# --------------------------------------------------------------------------
# assumption checks


@dataclass
class Lemma1Report:
    delta_est: float
    y0: float
    k0_checked: int
    cond_a_lhs: tuple[float, float]
    dist_C_boundary: float
    passed: bool
    proxy_k: int = 0
    interior_max: float = math.nan
    boundary_max: float = math.nan
    C_extent: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = None
    failures: list[str] = field(default_factory=list)


@dataclass
class Lemma5Report(Lemma1Report):
    cond_a_rate: float = math.nan
    witness: Optional[tuple[float, ...]] = None


def _level_scan(seq: ObjectiveSequence, grid_points: int):
    """Shared grid work: delta, y0, the set C on the grid and its distance to
    the boundary."""
    if grid_points < 11:
        raise ValueError("grid_points must be at least 11")
    dom = seq.domain
    pts = dom.grid(grid_points)
    on_face = dom.on_face(pts)
    proxy = seq.verification_k
    k0 = seq.constants.k0
    limit_vals = np.array([seq.value(proxy, x) for x in pts])
    interior_max = float(limit_vals.max())
    boundary_max = float(limit_vals[on_face].max())
    delta = interior_max - boundary_max
    y0 = 0.5 * ((boundary_max + delta / 4) + (interior_max - delta / 4))
    start_vals = np.array([seq.value(k0, x) for x in pts])
    in_C = start_vals >= y0 - delta / 8
    in_B = start_vals >= y0
    return pts, on_face, proxy, interior_max, boundary_max, delta, y0, start_vals, in_C, in_B


def _fill_level_checks(report: Lemma1Report, seq, pts, on_face, in_C, in_B) -> None:
    dom = seq.domain
    if report.delta_est <= 0:
        report.failures.append("maximum attained on the boundary (delta <= 0)")
        report.dist_C_boundary = 0.0
        return
    if not in_B.any():
        report.failures.append("B_k0 is empty on the grid")
    if (in_C & on_face).any():
        report.failures.append("C_k0 touches the boundary")
        report.dist_C_boundary = 0.0
    elif in_C.any():
        report.dist_C_boundary = min(dom.distance_to_boundary(x) for x in pts[in_C])
        report.C_extent = (tuple(pts[in_C].min(axis=0)), tuple(pts[in_C].max(axis=0)))
    else:
        report.failures.append("C_k0 is empty on the grid")
        report.dist_C_boundary = 0.0


def verify_lemma1(seq: ObjectiveSequence, grid_points: int = 4001) -> Lemma1Report:
    """Grid check of the starting constants for :func:`run_algorithm1`.

    f is replaced by f at ``seq.verification_k``. The two left-hand sides are
    ((N+M) M rho^(k0+1) + 2 N rho^(k0+1)) / (1-rho) and N rho^k0, each to be
    at most delta/8, with N evaluated at k0.
    """
    c = seq.constants
    pts, on_face, proxy, imax, bmax, delta, y0, _, in_C, in_B = _level_scan(seq, grid_points)
    k0, M, rho = c.k0, c.M, c.rho
    N = c.N(k0)
    lhs1 = ((N + M) * M * rho ** (k0 + 1) + 2 * N * rho ** (k0 + 1)) / (1 - rho)
    lhs2 = N * rho**k0
    report = Lemma1Report(delta, y0, k0, (lhs1, lhs2), 0.0, False, proxy, imax, bmax)
    _fill_level_checks(report, seq, pts, on_face, in_C, in_B)
    if delta > 0:
        if lhs1 > delta / 8:
            report.failures.append(f"condition (a) first term {lhs1:.4g} > delta/8 = {delta / 8:.4g}")
        if lhs2 > delta / 8:
            report.failures.append(f"condition (a) second term {lhs2:.4g} > delta/8 = {delta / 8:.4g}")
    report.passed = not report.failures and report.dist_C_boundary > 0
    return report


def verify_lemma5(seq: ObjectiveSequence, b: float, grid_points: int = 201) -> Lemma5Report:
    """Grid check of the starting constants for :func:`run_algorithm3`,
    including a search for a start point in A_k0 and B_k0."""
    if not 0 < b < 1:
        raise ValueError("b must lie in (0,1)")
    c = seq.constants
    k0, rho = c.k0, c.rho
    pts, on_face, proxy, imax, bmax, delta, y0, start_vals, in_C, in_B = _level_scan(seq, grid_points)
    rate = rho ** (1 / 3) + rho ** (2 * k0 / 3)
    lhs = 2 * c.N(k0) * rho**k0 / (1 - rho)
    report = Lemma5Report(delta, y0, k0, (lhs, lhs), 0.0, False, proxy, imax, bmax, cond_a_rate=rate)
    if rate >= 1:
        report.failures.append(f"rho^(1/3) + rho^(2 k0/3) = {rate:.4g} >= 1")
    _fill_level_checks(report, seq, pts, on_face, in_C, in_B)
    if delta > 0 and lhs > delta / 8:
        report.failures.append(f"condition (a) {lhs:.4g} > delta/8 = {delta / 8:.4g}")
    floor = gradient_floor(seq, k0, b)
    for x, fx, face in zip(pts, start_vals, on_face):
        if face or fx < y0:
            continue
        if classify_point(seq.domain, x) is not PointClass.INTERIOR:
            continue
        if np.linalg.norm(seq.gradient(k0, x)) >= floor:
            report.witness = tuple(float(v) for v in x)
            break
    if report.witness is None:
        report.failures.append("no grid point in A_k0 and B_k0")
    report.passed = not report.failures and report.dist_C_boundary > 0
    return report


# --------------------------------------------------------------------------
# certified interval


@dataclass
class BoundReport:
    eta: float
    gamma_coeff: float
    recursion_bound: float
    tail: float
    interval: tuple[float, float]
    delta0: float
    mode: str = "literal"
    eta_observed: Optional[float] = None
    reference_eta: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def contraction_factor(m: float, M: float, alpha: float, beta: float, dist_C: float) -> float:
    """1 - min(2 m alpha, (dist/M) 2 m alpha beta, 2 m alpha beta / M)."""
    return 1 - min(2 * m * alpha, dist_C / M * 2 * m * alpha * beta, 2 * m * alpha * beta / M)


def certified_bound(
    trace: Trace,
    seq: ObjectiveSequence,
    dist_C: float,
    delta0: Optional[float] = None,
    alpha: float = 0.4,
    beta: float = 0.9,
    mode: str = "literal",
    eval_tol: float = 0.0,
    reference_eta: Optional[float] = None,
) -> BoundReport:
    """Interval for max f from the gap recursion gap_k <= eta gap_{k-1} + gamma_k.

    ``mode="literal"`` uses the worst-case contraction factor. ``mode="observed"``
    uses 1 - 2 m alpha t_k with the step sizes actually accepted, which the
    same sufficient-increase argument justifies step by step.
    ``delta0`` bounds the initial gap and defaults to 2M.
    """
    c = seq.constants
    if c.m is None:
        raise ValueError("strong-concavity modulus m is required")
    if mode not in ("literal", "observed"):
        raise ValueError("mode must be 'literal' or 'observed'")
    if not trace.records:
        raise ValueError("empty trace")
    K = len(trace.records)
    k0, M, m, rho = c.k0, c.M, c.m, c.rho
    N = c.N(K + k0)
    delta0 = 2 * M if delta0 is None else float(delta0)
    eta = contraction_factor(m, M, alpha, beta, dist_C)
    if not 0 < eta < 1:
        raise ValueError("constants inconsistent with convergence guarantee")
    coeff = (N * M + M * M + 2 * N) / rho + 2 * N * M
    gammas = [coeff * rho ** (i + k0 + 1) + eval_tol for i in range(1, K + 1)]

    if mode == "literal":
        factors = [eta] * K
        eta_obs = None
    else:
        factors = [max(0.0, 1 - 2 * m * alpha * r.step_t) for r in trace.records]
        eta_obs = max(factors)
    gap = delta0
    for f_i, g_i in zip(factors, gammas):
        gap = f_i * gap + g_i
    tail = N * rho ** (K + k0)
    fK = trace.final.f_value
    return BoundReport(
        eta=eta,
        gamma_coeff=coeff,
        recursion_bound=gap,
        tail=tail,
        interval=(fK - tail, fK + tail + gap),
        delta0=delta0,
        mode=mode,
        eta_observed=eta_obs,
        reference_eta=reference_eta,
    )


def armijo_residuals(trace: Trace, seq: ObjectiveSequence, alpha: float, slack: bool = True) -> list[float]:
    """Re-evaluate the sufficient-increase inequality for every record.

    Returns g_k(theta_k) - g_k(theta_{k-1}) - alpha t ||grad g_{k-1}||^2 + s_k,
    which must be >= 0 (up to the run's eval_tol); s_k is the Algorithm 1
    slack when ``slack`` is set, else 0.
    """
    c = seq.constants
    out = []
    prev_theta, prev_norm = np.array(trace.theta0), trace.grad0_norm
    for r in trace.records:
        order = r.outer_k + c.k0
        gain = seq.value(order, np.array(r.theta)) - seq.value(order, prev_theta)
        slack_rate = (c.N(order) + c.M) * c.M * c.rho**order if slack else 0.0
        # grouped as in the runner so the rounding matches
        out.append(gain - r.step_t * (alpha * prev_norm**2 - slack_rate))
        prev_theta, prev_norm = np.array(r.theta), r.grad_norm
    return out
