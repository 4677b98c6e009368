"""Markov chains, hidden Markov sources and their entropies (in nats)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

STOCHASTIC_TOL = 1e-12
PRUNE_BELOW = 1e-300
DEFAULT_N_MAX = 22
BRUTE_N_MAX = 8
# nodes expanded per vectorised block of the output tree
_BLOCK_ROWS = 1 << 15


class CostError(ValueError):
    pass


class NotPrimitiveError(ValueError):
    pass


def _check_stochastic(P: np.ndarray, what: str) -> None:
    if P.ndim != 2:
        raise ValueError(f"{what} must be a matrix")
    if np.any(P < 0):
        raise ValueError(f"{what} has negative entries")
    if np.any(np.abs(P.sum(axis=1) - 1) > STOCHASTIC_TOL):
        raise ValueError(f"{what} rows must sum to 1")


@dataclass(frozen=True, eq=False)
class MarkovChain:
    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        _check_stochastic(P, "transition matrix")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def size(self) -> int:
        return self.P.shape[0]


@dataclass(frozen=True, eq=False)
class HiddenMarkovSource:
    """Hidden chain with row-stochastic emissions ``emit[h, y]``.

    ``init`` defaults to the stationary distribution of the chain.
    """

    chain: MarkovChain
    emit: np.ndarray
    init: Optional[np.ndarray] = None
    stationary: bool = True

    def __post_init__(self):
        if not isinstance(self.chain, MarkovChain):
            object.__setattr__(self, "chain", MarkovChain(self.chain))
        emit = np.array(self.emit, dtype=float)
        if emit.shape[0] != self.chain.size:
            raise ValueError("emission matrix needs one row per hidden state")
        _check_stochastic(emit, "emission matrix")
        emit.setflags(write=False)
        object.__setattr__(self, "emit", emit)
        if self.init is None:
            init = stationary_distribution(self.chain, require_primitive=False)
            object.__setattr__(self, "stationary", True)
        else:
            init = np.array(self.init, dtype=float)
            if init.shape != (self.chain.size,) or np.any(init < 0):
                raise ValueError("init must be a probability vector over hidden states")
            if abs(init.sum() - 1) > STOCHASTIC_TOL:
                raise ValueError("init must sum to 1")
            if self.stationary and np.max(np.abs(init @ self.chain.P - init)) > 1e-10:
                raise ValueError("init flagged stationary but init @ P != init")
        init.setflags(write=False)
        object.__setattr__(self, "init", init)

    @property
    def n_outputs(self) -> int:
        return self.emit.shape[1]


def binary_entropy(p: float) -> float:
    if p < -1e-12 or p > 1 + 1e-12:
        raise ValueError(f"binary_entropy: p={p} outside [0,1]")
    p = min(max(p, 0.0), 1.0)
    h = 0.0
    if p > 0:
        h -= p * math.log(p)
    if p < 1:
        h -= (1 - p) * math.log1p(-p)
    return h


def entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def _positive_power(A: np.ndarray, power: int) -> bool:
    """Whether the Boolean pattern of A**power is all-true."""
    B = A > 0
    R = None
    while power:
        if power & 1:
            R = B if R is None else (R.astype(int) @ B.astype(int)) > 0
        power >>= 1
        if power:
            B = (B.astype(int) @ B.astype(int)) > 0
    return bool(np.all(R))


def is_primitive(P: np.ndarray) -> bool:
    s = P.shape[0]
    return _positive_power(P, max(1, s * s - 2 * s + 2))


def is_irreducible(A: np.ndarray) -> bool:
    s = A.shape[0]
    return _positive_power(np.eye(s) + (A > 0), max(1, s - 1))


def stationary_distribution(chain, require_primitive: bool = True) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 directly.

    With ``require_primitive=False`` reducible chains are accepted as long as
    the stationary vector is unique (a single recurrent class).
    """
    P = chain.P if isinstance(chain, MarkovChain) else MarkovChain(chain).P
    s = P.shape[0]
    if require_primitive and not is_primitive(P):
        raise NotPrimitiveError("no unique stationary distribution (chain not primitive)")
    A = np.vstack([P.T - np.eye(s), np.ones((1, s))])
    if np.linalg.matrix_rank(P.T - np.eye(s)) != s - 1:
        raise NotPrimitiveError("no unique stationary distribution")
    b = np.zeros(s + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    # one refinement sweep keeps the residual at rounding level
    pi = pi @ P
    pi /= pi.sum()
    return pi


def _leaf_sum(pred: np.ndarray, mass: np.ndarray, emit: np.ndarray) -> float:
    child = pred @ emit  # (rows, |O|) leaf probabilities
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(child > 0, child * np.log(mass[:, None] / child), 0.0)
    return float(t.sum())


def _descend(pred, mass, depth_left, P, emit) -> float:
    """Sum of leaf terms below a block of nodes sharing the same depth.

    ``pred[i]`` is the joint probability of the node's output prefix and the
    hidden state at the next step; ``mass[i]`` is the prefix probability.
    """
    if depth_left == 0:
        return _leaf_sum(pred, mass, emit)
    n_out = emit.shape[1]
    if pred.shape[0] * n_out > _BLOCK_ROWS:
        step = max(1, _BLOCK_ROWS // n_out)
        return sum(
            _descend(pred[i : i + step], mass[i : i + step], depth_left, P, emit)
            for i in range(0, pred.shape[0], step)
        )
    joint = pred[:, None, :] * emit.T[None, :, :]  # (rows, |O|, |H|)
    joint = joint.reshape(-1, pred.shape[1])
    m = joint.sum(axis=1)
    keep = m >= PRUNE_BELOW
    return _descend(joint[keep] @ P, m[keep], depth_left - 1, P, emit)


def conditional_entropy_forward(src: HiddenMarkovSource, n: int, n_max: int = DEFAULT_N_MAX) -> float:
    """H(Y_n | Y_1^{n-1}) by forward recursion over the output tree.

    Prefixes share their forward vectors, so each tree node costs one
    vector-matrix product; prefixes of probability below 1e-300 are dropped.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n > n_max:
        cost = src.n_outputs**n * src.chain.size
        raise CostError(f"n={n} exceeds n_max={n_max} (about {cost:.3g} leaf-state updates)")
    pred = np.asarray(src.init, dtype=float)[None, :]
    return _descend(pred, np.ones(1), n - 1, src.chain.P, src.emit)


def _path_tables(src: HiddenMarkovSource, n: int):
    paths = np.array(list(itertools.product(range(src.chain.size), repeat=n)))
    P, init = src.chain.P, src.init
    w = init[paths[:, 0]].copy()
    for t in range(1, n):
        w *= P[paths[:, t - 1], paths[:, t]]
    return paths, w


def conditional_entropy_bruteforce(src: HiddenMarkovSource, n: int) -> float:
    """Same quantity as :func:`conditional_entropy_forward`, summing over all
    hidden paths explicitly. Independent oracle for small n."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n > BRUTE_N_MAX:
        raise CostError(f"brute force limited to n <= {BRUTE_N_MAX}")
    paths, w = _path_tables(src, n)
    emit = src.emit
    n_out = src.n_outputs
    probs = {}
    for ys in itertools.product(range(n_out), repeat=n):
        e = w.copy()
        for t, y in enumerate(ys):
            e *= emit[paths[:, t], y]
        probs[ys] = float(e.sum())
    prefix = {}
    for ys, p in probs.items():
        prefix[ys[:-1]] = prefix.get(ys[:-1], 0.0) + p
    total = 0.0
    for ys, p in probs.items():
        if p > 0:
            total += p * math.log(prefix[ys[:-1]] / p)
    return total


def perron_log_eigenvalue(A, tol: float = 1e-13, max_iter: int = 1_000_000) -> float:
    """ln of the Perron root of a non-negative irreducible matrix.

    Power iteration on A + I, which is primitive whenever A is irreducible,
    so periodic matrices converge too.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] > 64:
        raise ValueError("matrix larger than 64x64")
    if np.any(A < 0):
        raise ValueError("matrix must be non-negative")
    if not is_irreducible(A):
        raise NotPrimitiveError("Perron eigenvalue not unique (matrix reducible)")
    B = A + np.eye(A.shape[0])
    x = np.ones(A.shape[0]) / math.sqrt(A.shape[0])
    prev = math.inf
    for _ in range(max_iter):
        y = B @ x
        q = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(q - prev) < tol:
            break
        prev = q
    else:
        raise RuntimeError("power iteration did not converge")
    lam = float(x @ (B @ x)) - 1.0
    return math.log(lam)


def build_forbidden_word_adjacency(word: str) -> tuple[np.ndarray, list[str]]:
    """Adjacency matrix of the shift forbidding ``word``, on (L-1)-blocks."""
    L = len(word)
    if not 2 <= L <= 6 or set(word) - {"0", "1"}:
        raise ValueError("word must be a bit-string of length 2..6")
    states = [
        "".join(b)
        for b in itertools.product("01", repeat=L - 1)
        if word not in "".join(b)
    ]
    index = {s: i for i, s in enumerate(states)}
    A = np.zeros((len(states), len(states)))
    for u in states:
        for c in "01":
            merged = u + c
            v = merged[1:]
            if merged != word and v in index:
                A[index[u], index[v]] = 1.0
    return A, states
