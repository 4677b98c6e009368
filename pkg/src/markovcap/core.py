"""Parameter boxes, objective sequences and finite-difference derivatives."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_MARGIN = 1e-9
MIN_STEP = 2.0**-40


class DimensionError(ValueError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"dimension mismatch: expected d={expected}, got d={actual}")
        self.expected = expected
        self.actual = actual


class BoundaryError(ValueError):
    pass


class PointClass(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class ParamDomain:
    """Axis-aligned box ``[lower, upper]`` in R^d.

    Points closer than ``interior_margin`` to a face count as boundary points,
    which keeps the interior test decidable in floating point.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    interior_margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lower))
        hi = tuple(float(x) for x in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise DimensionError(len(lo), len(hi))
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("lower < upper required in every coordinate")
        if not 0 < self.interior_margin < min(b - a for a, b in zip(lo, hi)) / 2:
            raise ValueError("interior_margin must be positive and below half the box width")

    @classmethod
    def interval(cls, lo: float, hi: float, margin: float = DEFAULT_MARGIN) -> "ParamDomain":
        return cls((lo,), (hi,), margin)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    def as_point(self, theta) -> np.ndarray:
        x = np.atleast_1d(np.asarray(theta, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionError(self.dim, x.size)
        return x

    def distance_to_boundary(self, theta) -> float:
        x = self.as_point(theta)
        return float(min(np.min(x - self.lo), np.min(self.hi - x)))

    def grid(self, points_per_dim: int) -> np.ndarray:
        """Tensor grid including the faces, shape (points_per_dim**d, d)."""
        axes = [np.linspace(a, b, points_per_dim) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def on_face(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.any((pts <= self.lo) | (pts >= self.hi), axis=1)


def classify_point(domain: ParamDomain, theta) -> PointClass:
    x = domain.as_point(theta)
    if np.any(x < domain.lo) or np.any(x > domain.hi):
        return PointClass.OUTSIDE
    m = domain.interior_margin
    if np.all(x >= domain.lo + m) and np.all(x <= domain.hi - m):
        return PointClass.INTERIOR
    return PointClass.BOUNDARY


@dataclass(frozen=True)
class SequenceConstants:
    """Convergence constants of an approximating sequence.

    ``N_poly = (c0, c1, c2)`` gives N(k) = c0 + c1*k + c2*k**2, so that
    |f_k - f_{k-1}| <= N(k) * rho**k (and likewise for the first two
    derivatives). ``m`` is the strong-concavity modulus and may be None when
    only the non-concave runner is used.
    """

    N_poly: tuple[float, float, float]
    rho: float
    M: float
    m: Optional[float]
    k0: int

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.N_poly)
        if len(coeffs) < 3:
            coeffs = coeffs + (0.0,) * (3 - len(coeffs))
        object.__setattr__(self, "N_poly", coeffs)
        if any(c < 0 for c in coeffs) or coeffs[0] <= 0:
            raise ValueError("N(k) must be positive for all k >= 0")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0,1)")
        if self.M <= 0:
            raise ValueError("M must be positive")
        if self.m is not None and not 0 < self.m <= self.M:
            raise ValueError("m must satisfy 0 < m <= M")
        if int(self.k0) != self.k0 or self.k0 < 0:
            raise ValueError("k0 must be a non-negative integer")

    @classmethod
    def constant(cls, N: float, rho: float, M: float, m: Optional[float], k0: int):
        return cls((N, 0.0, 0.0), rho, M, m, k0)

    def N(self, k: int) -> float:
        c0, c1, c2 = self.N_poly
        return c0 + c1 * k + c2 * k * k

    def tail(self, k: int) -> float:
        return self.N(k) * self.rho**k


@dataclass(frozen=True)
class ObjectiveSequence:
    """The family k -> f_k over a box, together with its constants.

    ``eval(k, theta)`` must be a pure function of its arguments. ``grad`` is
    optional; when absent the central-difference gradient is used.
    ``proxy_k`` is the order used in place of the limit f during
    verification scans (defaults to ``k0 + 40``), and ``max_k`` caps the
    orders the objective can evaluate.
    """

    domain: ParamDomain
    constants: SequenceConstants
    eval: Callable[[int, np.ndarray], float]
    grad: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    name: str = "objective"
    proxy_k: Optional[int] = None
    max_k: Optional[int] = None
    params: dict = field(default_factory=dict)

    def value(self, k: int, theta) -> float:
        return float(self.eval(k, self.domain.as_point(theta)))

    def gradient(self, k: int, theta) -> np.ndarray:
        x = self.domain.as_point(theta)
        if self.grad is not None:
            return np.asarray(self.grad(k, x), dtype=float)
        return gradient_fd(self, k, x)[0]

    @property
    def verification_k(self) -> int:
        k = self.proxy_k if self.proxy_k is not None else self.constants.k0 + 40
        return min(k, self.max_k) if self.max_k is not None else k


def default_step(theta: np.ndarray) -> float:
    return 1e-6 * max(1.0, float(np.max(np.abs(theta))))


def gradient_fd(seq: ObjectiveSequence, k: int, theta, h: Optional[float] = None):
    """Central-difference gradient of f_k at ``theta``.

    The step is halved until every probe ``theta +- h e_i`` lies in the
    closed box. Returns ``(gradient, h_used)``.
    """
    dom = seq.domain
    x = dom.as_point(theta)
    if h is None:
        h = default_step(x)
    if h <= 0:
        raise ValueError("h must be positive")
    while np.any(x - h < dom.lo) or np.any(x + h > dom.hi):
        h /= 2
        if h < MIN_STEP:
            raise BoundaryError("point too close to boundary for differentiation")
    g = np.empty(dom.dim)
    for i in range(dom.dim):
        e = np.zeros(dom.dim)
        e[i] = h
        g[i] = (seq.eval(k, x + e) - seq.eval(k, x - e)) / (2 * h)
    return g, h


def hessian_fd(seq: ObjectiveSequence, k: int, theta, h: float) -> np.ndarray:
    dom = seq.domain
    x = dom.as_point(theta)
    if np.any(x - h < dom.lo) or np.any(x + h > dom.hi):
        raise BoundaryError("point too close to boundary for differentiation")
    d = dom.dim
    f0 = seq.eval(k, x)
    H = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        H[i, i] = (seq.eval(k, x + ei) - 2 * f0 + seq.eval(k, x - ei)) / h**2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = h
            H[i, j] = H[j, i] = (
                seq.eval(k, x + ei + ej)
                - seq.eval(k, x + ei - ej)
                - seq.eval(k, x - ei + ej)
                + seq.eval(k, x - ei - ej)
            ) / (4 * h * h)
    return H


def hessian_probe(seq: ObjectiveSequence, k: int, grid: Sequence, h: float = 1e-4):
    """Empirical curvature audit over ``grid``.

    Returns ``(m_est, M_est)``: minus the largest Hessian eigenvalue seen on
    the grid, and the largest eigenvalue modulus. Strong concavity with
    modulus m and the bound M correspond to m_est >= m and M_est <= M.
    """
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    if pts.shape[0] == 1 and seq.domain.dim == 1 and pts.shape[1] != 1:
        pts = pts.T
    if pts.size == 0:
        raise ValueError("grid must be nonempty")
    top = -np.inf
    big = 0.0
    for x in pts:
        eig = np.linalg.eigvalsh(hessian_fd(seq, k, x, h))
        top = max(top, float(eig[-1]))
        big = max(big, float(np.max(np.abs(eig))))
    return -top, big
