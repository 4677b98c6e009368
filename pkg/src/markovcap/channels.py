"""Channel objectives: BEC with a (1,inf)-RLL input, the noiseless two-state
channel, the Gilbert-Elliott channel and a generic small-k finite-state
channel, plus Birch-type lower bounds for second-order inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ObjectiveSequence, ParamDomain, SequenceConstants
from .markov import (
    CostError,
    HiddenMarkovSource,
    MarkovChain,
    binary_entropy,
    build_forbidden_word_adjacency,
    conditional_entropy_forward,
    perron_log_eigenvalue,
    stationary_distribution,
)

RATIO_TOL = 1e-12
GENERIC_K_MAX = 10


def as_scalar(theta) -> float:
    return float(np.asarray(theta, dtype=float).reshape(-1)[0])


def rll_input_matrix(theta: float) -> np.ndarray:
    """First-order (1,inf)-RLL input: symbol 1 never repeats, P(0 -> 1) = theta."""
    return np.array([[1.0 - theta, theta], [1.0, 0.0]])


def rll_stationary(theta: float) -> np.ndarray:
    return np.array([1.0 / (1.0 + theta), theta / (1.0 + theta)])


# --------------------------------------------------------------------------
# BEC under the (1,inf)-RLL constraint


@dataclass(frozen=True)
class BecRllChannel:
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0,1)")


def bec_fk(ch: BecRllChannel, theta: float, k: int) -> float:
    if k < 0:
        raise ValueError("k must be non-negative")
    eps = ch.epsilon
    scale = (1 - eps) ** 2
    denom = 1.0 + theta
    value = scale * binary_entropy(theta) / denom
    w = theta / denom
    eps_pow = 1.0
    neg_pow = theta * theta  # (-theta)**l at l = 2
    for _ in range(2, k + 1):
        eps_pow *= eps
        h_next = binary_entropy((1 + theta * neg_pow) / denom)  # (-theta)**(l+1) = -theta*(-theta)**l
        h_here = binary_entropy((1 - neg_pow) / denom)
        value += scale * eps_pow * (h_next / denom + w * h_here)
        neg_pow *= -theta
    return value


def bec_objective(
    ch: BecRllChannel = BecRllChannel(),
    N: float = 371.0,
    rho: float = 0.1,
    M: float = 5.81,
    m: float = 1.88,
    k0: int = 18,
    domain: tuple[float, float] = (0.2, 0.6),
) -> ObjectiveSequence:
    return ObjectiveSequence(
        domain=ParamDomain.interval(*domain),
        constants=SequenceConstants.constant(N, rho, M, m, k0),
        eval=lambda k, th: bec_fk(ch, as_scalar(th), k),
        name="bec",
        params={"epsilon": ch.epsilon},
    )


def bec_source(theta: float, epsilon: float) -> HiddenMarkovSource:
    """Output of the BEC fed by the first-order RLL input. Output 0 is the
    erasure, outputs 1 and 2 reveal input 0 and 1."""
    emit = [[epsilon, 1 - epsilon, 0.0], [epsilon, 0.0, 1 - epsilon]]
    return HiddenMarkovSource(MarkovChain(rll_input_matrix(theta)), emit, init=rll_stationary(theta))


def bec_output_gap(theta: float, epsilon: float, n: int) -> float:
    """H(Y_n | Y_1^{n-1}) - H(eps), an upper bound on the information rate."""
    return conditional_entropy_forward(bec_source(theta, epsilon), n) - binary_entropy(epsilon)


# --------------------------------------------------------------------------
# noiseless two-state channel, y_n = phi(x_{n-1}, x_n)

PHI = np.array([[1, 0], [0, 0]])


@dataclass(frozen=True)
class NoiselessTwoState:
    phi: np.ndarray = field(default_factory=lambda: PHI.copy(), compare=False)
    forbidden_word: str = "101"


def noiseless_fk(theta: float, k: int, exact_first_term: bool = False) -> float:
    """Truncated unambiguous-symbol series for the output entropy under an
    i.i.d. input with P(X = 0) = theta.

    By default the l = 0 ratio r B^{-1} c / r B^{-1} 1 is taken as 1, which
    drops the theta^3 ln(1/theta) contribution of an immediate repeat of the
    unambiguous symbol. ``exact_first_term=True`` uses the true ratio theta
    instead, and the series then converges to H(Y_n | Y_1^{n-1}).

    Works with the row vector r B^l, updated in place since each row of B
    has at most two nonzero entries.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0,1]")
    a, b, c = 1.0 - theta, 0.0, 0.0
    weight = theta * theta
    value = 0.0
    prev_mass = 1.0
    prev_pair = (theta if exact_first_term else 1.0, 1.0)
    for _ in range(k + 1):
        mass = a + b + c
        if mass > 0:
            ratio = mass / prev_mass
            if ratio > 1 + RATIO_TOL:
                raise ArithmeticError(f"probability ratio {ratio} exceeds 1")
            value -= weight * mass * math.log(ratio)
        hit, total = prev_pair
        if hit > 0:
            ratio = hit / total
            if ratio > 1 + RATIO_TOL:
                raise ArithmeticError(f"probability ratio {ratio} exceeds 1")
            value -= weight * hit * math.log(ratio)
        prev_pair = (b * theta, mass)
        prev_mass = mass
        a, b, c = b * (1 - theta), (a + c) * theta, (a + c) * (1 - theta)
    return value


def noiseless_objective(
    N_poly: Sequence[float] = (46587.2, 6207.73, 374.945),
    rho: float = 0.875,
    M: float = 10.37,
    m: float = 1.2,
    k0: int = 120,
    domain: tuple[float, float] = (0.4, 0.9),
) -> ObjectiveSequence:
    return ObjectiveSequence(
        domain=ParamDomain.interval(*domain),
        constants=SequenceConstants(tuple(N_poly), rho, M, m, k0),
        eval=lambda k, th: noiseless_fk(as_scalar(th), k),
        name="noiseless",
    )


def noiseless_source(theta: float) -> HiddenMarkovSource:
    """Pair chain (x_{n-1}, x_n) over 00, 01, 10, 11 with output phi."""
    row = [theta, 1 - theta]
    P = np.array([row + [0, 0], [0, 0] + row, row + [0, 0], [0, 0] + row])
    init = np.array([theta**2, theta * (1 - theta), theta * (1 - theta), (1 - theta) ** 2])
    emit = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    return HiddenMarkovSource(MarkovChain(P), emit, init=init)


# --------------------------------------------------------------------------
# Gilbert-Elliott channel


@dataclass(frozen=True, eq=False)
class GilbertElliott:
    state_chain: MarkovChain = field(default_factory=lambda: MarkovChain([[0.7, 0.3], [0.3, 0.7]]))
    crossover: tuple[float, float] = (0.01, 0.1)

    def __post_init__(self):
        if not isinstance(self.state_chain, MarkovChain):
            object.__setattr__(self, "state_chain", MarkovChain(self.state_chain))
        if self.state_chain.size != 2 or len(self.crossover) != 2:
            raise ValueError("Gilbert-Elliott channel has exactly two states")
        if not all(0 < e < 1 for e in self.crossover):
            raise ValueError("crossover probabilities must lie in (0,1)")
        object.__setattr__(self, "crossover", tuple(float(e) for e in self.crossover))

    def noise_emission(self) -> np.ndarray:
        return np.array([[1 - e, e] for e in self.crossover])

    def noise_source(self) -> HiddenMarkovSource:
        return HiddenMarkovSource(self.state_chain, self.noise_emission())

    def output_source(self, theta: float) -> HiddenMarkovSource:
        """Hidden state (x_n, s_{n-1}) indexed 2*x + s."""
        P = np.kron(rll_input_matrix(theta), self.state_chain.P)
        init = np.kron(rll_stationary(theta), stationary_distribution(self.state_chain))
        emit = np.zeros((4, 2))
        for x in range(2):
            for s, e in enumerate(self.crossover):
                emit[2 * x + s, x] = 1 - e
                emit[2 * x + s, 1 - x] = e
        return HiddenMarkovSource(MarkovChain(P), emit, init=init)


def ge_fk(ch: GilbertElliott, theta: float, k: int, n_max: int = 22) -> float:
    if k < 1:
        raise ValueError("k must be a positive integer")
    h_out = conditional_entropy_forward(ch.output_source(theta), k, n_max)
    h_noise = conditional_entropy_forward(ch.noise_source(), k, n_max)
    return h_out - h_noise


def ge_objective(
    ch: GilbertElliott = GilbertElliott(),
    N: float = 10.0,
    rho: float = 0.1,
    M: float = 11.0,
    k0: int = 6,
    domain: tuple[float, float] = (0.05, 0.95),
    proxy_k: int = 16,
    n_max: int = 22,
) -> ObjectiveSequence:
    return ObjectiveSequence(
        domain=ParamDomain.interval(*domain),
        constants=SequenceConstants.constant(N, rho, M, None, k0),
        eval=lambda k, th: ge_fk(ch, as_scalar(th), k, n_max),
        name="gilbert-elliott",
        proxy_k=proxy_k,
        max_k=n_max,
        params={"crossover": list(ch.crossover), "state_chain": ch.state_chain.P.tolist()},
    )


def fit_sequence_constants(
    values: Callable[[int], float], ks: Sequence[int], safety: float = 3.0
) -> tuple[float, float]:
    """Fit |f_k - f_{k-1}| ~ N rho^k by least squares on the log scale.

    Returns ``(N, rho)`` with N inflated by ``safety`` over the fitted
    intercept.
    """
    ks = np.asarray(list(ks))
    diffs = np.array([abs(values(k) - values(k - 1)) for k in ks])
    if np.any(diffs <= 0):
        raise ValueError("consecutive differences must be nonzero to fit a rate")
    slope, intercept = np.polyfit(ks, np.log(diffs), 1)
    return safety * math.exp(intercept), math.exp(slope)


# --------------------------------------------------------------------------
# generic finite-state channel at small k


@dataclass(frozen=True, eq=False)
class GenericFsc:
    """Channel with kernels ``state_kernel[x, s_prev, s]`` and
    ``emission[x, s_prev, y]`` driven by a first-order input whose transition
    matrix is ``input_param(theta)``."""

    input_param: Callable[[np.ndarray], np.ndarray]
    state_kernel: np.ndarray
    emission: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.state_kernel, dtype=float)
        E = np.asarray(self.emission, dtype=float)
        if K.ndim != 3 or E.ndim != 3 or K.shape[:2] != E.shape[:2] or K.shape[1] != K.shape[2]:
            raise ValueError("kernels must have shapes (|X|,|S|,|S|) and (|X|,|S|,|Y|)")
        for name, arr in (("state_kernel", K), ("emission", E)):
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=2) - 1) > 1e-12):
                raise ValueError(f"{name} must be row-stochastic")
        if np.any(E <= 0):
            raise ValueError("emission probabilities must be strictly positive")
        object.__setattr__(self, "state_kernel", K)
        object.__setattr__(self, "emission", E)

    @property
    def sizes(self) -> tuple[int, int, int]:
        nx, ns, ny = self.emission.shape
        return nx, ns, ny

    def hidden_chain(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Transition matrix over (x_n, s_{n-1}) indexed x*|S| + s, with the
        input-chain matrix it was built from."""
        nx, ns, _ = self.sizes
        PX = np.asarray(self.input_param(theta), dtype=float)
        if PX.shape != (nx, nx):
            raise ValueError(f"input_param must return a {nx}x{nx} matrix")
        P = np.einsum("ab,aij->aibj", PX, self.state_kernel).reshape(nx * ns, nx * ns)
        return P, PX


def generic_fsc_fk(fsc: GenericFsc, theta, k: int) -> float:
    """H(X_2|X_1) + H(Y_{k+1}|Y_1^k) - H(X_{k+1},Y_{k+1}|X_1^k,Y_1^k)."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > GENERIC_K_MAX:
        raise CostError(f"generic channel objective limited to k <= {GENERIC_K_MAX}")
    nx, ns, ny = fsc.sizes
    P, PX = fsc.hidden_chain(theta)
    chain = MarkovChain(P)
    init = stationary_distribution(chain, require_primitive=False)
    pi_x = init.reshape(nx, ns).sum(axis=1)
    h_input = float(sum(pi_x[a] * _entropy_row(PX[a]) for a in range(nx)))

    emit_y = fsc.emission.reshape(nx * ns, ny)
    h_y = conditional_entropy_forward(HiddenMarkovSource(chain, emit_y, init=init), k + 1, n_max=k + 1)

    # joint output symbol (x, y), indexed x*|Y| + y
    emit_xy = np.zeros((nx * ns, nx * ny))
    for a in range(nx):
        emit_xy[a * ns : (a + 1) * ns, a * ny : (a + 1) * ny] = fsc.emission[a]
    h_xy = conditional_entropy_forward(HiddenMarkovSource(chain, emit_xy, init=init), k + 1, n_max=k + 1)
    return h_input + h_y - h_xy


def _entropy_row(row: np.ndarray) -> float:
    row = row[row > 0]
    return float(-(row * np.log(row)).sum())


def ge_as_generic(ch: GilbertElliott) -> GenericFsc:
    K = np.stack([ch.state_chain.P, ch.state_chain.P])
    E = np.zeros((2, 2, 2))
    for x in range(2):
        for s, e in enumerate(ch.crossover):
            E[x, s, x] = 1 - e
            E[x, s, 1 - x] = e
    return GenericFsc(lambda th: rll_input_matrix(as_scalar(th)), K, E)


# --------------------------------------------------------------------------
# Birch lower bounds with Markov inputs one order higher


def _windowed_entropy(P: np.ndarray, pi: np.ndarray, emit: np.ndarray, n_out: int) -> float:
    """Average over the seed state h_2 ~ pi of H(Y_{n_out} | Y_1^{n_out - 1}, h_2)
    where the outputs are emitted by h_3, h_4, ... of the chain P."""
    chain = MarkovChain(P)
    total = 0.0
    for state, weight in enumerate(pi):
        if weight <= 0:
            continue
        src = HiddenMarkovSource(chain, emit, init=P[state], stationary=False)
        total += weight * conditional_entropy_forward(src, n_out)
    return total


def birch_bound_bec(p: float, q: float, epsilon: float, horizon: int = 5) -> float:
    """H(Y_horizon | Y_3^{horizon-1}, X_1, X_2) - H(eps) for the second-order
    RLL input on blocks 00, 01, 10 (p = P(00 -> 00), q = P(10 -> 00))."""
    if not (0 < p < 1 and 0 < q < 1 and 0 < epsilon < 1):
        raise ValueError("p, q, epsilon must lie in (0,1)")
    if horizon < 3:
        raise ValueError("horizon must be at least 3")
    P = np.array([[p, 1 - p, 0.0], [0.0, 0.0, 1.0], [q, 1 - q, 0.0]])
    pi = stationary_distribution(MarkovChain(P))
    # last symbol of each block: 0, 1, 0; output 0 is the erasure
    emit = np.array(
        [[epsilon, 1 - epsilon, 0.0], [epsilon, 0.0, 1 - epsilon], [epsilon, 1 - epsilon, 0.0]]
    )
    return _windowed_entropy(P, pi, emit, horizon - 2) - binary_entropy(epsilon)


def birch_bound_noiseless(p: float, q: float) -> float:
    """H(Y_4 | Y_3, X_1, X_2) for the first-order input with
    P(0 -> 0) = p and P(1 -> 0) = q."""
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("p, q must lie in [0,1]")
    X = np.array([[p, 1 - p], [q, 1 - q]])
    # pair states (x_{n-1}, x_n) indexed 2*a + b
    P = np.zeros((4, 4))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                P[2 * a + b, 2 * b + c] = X[b, c]
    pi_x = stationary_distribution(MarkovChain(X), require_primitive=False)
    pi = np.array([pi_x[a] * X[a, b] for a in range(2) for b in range(2)])
    emit = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    return _windowed_entropy(P, pi, emit, 2)


def shannon_capacity(forbidden_word: str = "101") -> float:
    A, _ = build_forbidden_word_adjacency(forbidden_word)
    return perron_log_eigenvalue(A)
