"""Shift-invariant driver measures: Bernoulli and positive Markov chains."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .symbolic import IfsModel, Word, project_words, reverse_word

_LOG_DOMAIN_LENGTH = 64


def _check_probability_vector(p, what="weights") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"{what} must be a nonempty vector")
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ValueError(f"{what} must be strictly positive")
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"{what} sum to {p.sum()!r}, not 1")
    return p / p.sum()


def _product(values) -> float:
    values = list(values)
    if len(values) > _LOG_DOMAIN_LENGTH:
        return math.exp(math.fsum(math.log(v) for v in values))
    out = 1.0
    for v in values:
        out *= v
    return out


@dataclass(frozen=True, eq=False)
class BernoulliDriver:
    weights: np.ndarray

    def __init__(self, weights):
        p = _check_probability_vector(weights)
        p.setflags(write=False)
        object.__setattr__(self, "weights", p)

    kind = "bernoulli"

    @property
    def size(self) -> int:
        return self.weights.size

    def cylinder(self, w: Sequence[int]) -> float:
        return _product(self.weights[s] for s in w)

    def log_cylinder(self, w: Sequence[int]) -> float:
        return math.fsum(math.log(self.weights[s]) for s in w)

    def reversed(self) -> "BernoulliDriver":
        return self

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return _draw_iid(self.weights, n, rng)

    def sample_paths(self, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
        return _draw_iid(self.weights, count * length, rng).reshape(count, length)

    def stream(self, rng: np.random.Generator) -> "_IidStream":
        return _IidStream(self.weights, rng)

    def describe(self) -> dict:
        return {"kind": "bernoulli", "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class MarkovDriver:
    """Stationary Markov measure of a strictly positive row-stochastic matrix."""

    transition: np.ndarray
    stationary: np.ndarray

    kind = "markov"

    def __init__(self, transition):
        P = np.atleast_2d(np.asarray(transition, dtype=float))
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(P <= 0):
            raise ValueError("transition matrix entries must be strictly positive")
        if np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
            raise ValueError("transition rows must sum to 1")
        P = P / P.sum(axis=1, keepdims=True)
        pi = stationary_vector(P)
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "stationary", pi)

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    def cylinder(self, w: Sequence[int]) -> float:
        w = tuple(w)
        if not w:
            return 1.0
        P = self.transition
        return _product([self.stationary[w[0]]] + [P[a, b] for a, b in zip(w, w[1:])])

    def log_cylinder(self, w: Sequence[int]) -> float:
        w = tuple(w)
        if not w:
            return 0.0
        P = self.transition
        return math.log(self.stationary[w[0]]) + math.fsum(math.log(P[a, b]) for a, b in zip(w, w[1:]))

    def reversed(self) -> "MarkovDriver":
        """Time reversal: the chain whose cylinders are the reversed cylinders of this one."""
        pi = self.stationary
        return MarkovDriver(self.transition.T * pi[None, :] / pi[:, None])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.stream(rng).draw(n)

    def sample_paths(self, count: int, length: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((count, length), dtype=np.int64)
        if length == 0:
            return out
        cum = np.cumsum(self.transition, axis=1)
        out[:, 0] = _draw_iid(self.stationary, count, rng)
        u = rng.random((count, length))
        for t in range(1, length):
            rows = cum[out[:, t - 1]]
            out[:, t] = np.minimum((u[:, t, None] >= rows).sum(axis=1), self.size - 1)
        return out

    def stream(self, rng: np.random.Generator) -> "_MarkovStream":
        return _MarkovStream(self, rng)

    def describe(self) -> dict:
        return {"kind": "markov", "transition": self.transition.tolist()}


Driver = BernoulliDriver | MarkovDriver


def stationary_vector(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return pi / pi.sum()


def _draw_iid(p: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(p)
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.minimum(idx, p.size - 1).astype(np.int64)


class _IidStream:
    def __init__(self, p: np.ndarray, rng: np.random.Generator):
        self._p = p
        self._rng = rng

    def draw(self, n: int) -> np.ndarray:
        return _draw_iid(self._p, n, self._rng)


class _MarkovStream:
    """Sequential sampler that carries the chain state across chunks."""

    def __init__(self, drv: MarkovDriver, rng: np.random.Generator):
        self._cum = np.cumsum(drv.transition, axis=1).tolist()
        self._init = np.cumsum(drv.stationary).tolist()
        self._rng = rng
        self._state: int | None = None
        self._n = drv.size

    def draw(self, n: int) -> np.ndarray:
        u = self._rng.random(n).tolist()
        out = [0] * n
        state = self._state
        last = self._n - 1
        for t, x in enumerate(u):
            row = self._init if state is None else self._cum[state]
            s = 0
            while s < last and x >= row[s]:
                s += 1
            out[t] = state = s
        self._state = state
        return np.asarray(out, dtype=np.int64)


def cylinder_measure(drv: Driver, w: Sequence[int]) -> float:
    return drv.cylinder(w)


def reversed_cylinder_measure(drv: Driver, w: Sequence[int]) -> float:
    return drv.cylinder(reverse_word(w))


def sample_path(drv: Driver, length: int, rng: np.random.Generator) -> Word:
    if length < 0:
        raise ValueError("path length must be nonnegative")
    return tuple(int(s) for s in drv.sample(length, rng))


def joint_cylinder_measure(drv: Driver, u: Sequence[int], v: Sequence[int], n: int) -> float:
    """``mu([u] & sigma^{-n}[v])`` for ``n >= |u|``."""
    u, v = tuple(u), tuple(v)
    if n < len(u):
        raise ValueError("only non-overlapping positions n >= |u| are supported")
    if not u or not v:
        return drv.cylinder(u) * drv.cylinder(v)
    if isinstance(drv, BernoulliDriver):
        return drv.cylinder(u) * drv.cylinder(v)
    gap = n - len(u)
    step = np.linalg.matrix_power(drv.transition, gap + 1)[u[-1], v[0]]
    return drv.cylinder(u) * step / drv.stationary[v[0]] * drv.cylinder(v)


@dataclass(frozen=True)
class DecayConstants:
    """``(epsilon, kappa)`` of one-sided exponential decay, certified on a finite word set."""

    epsilon: float
    kappa: float
    n_max: int
    word_len_max: int


def second_eigenvalue_modulus(P: np.ndarray) -> float:
    mods = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    return float(mods[1]) if mods.size > 1 else 0.0


def _word_pairs(alphabet: int, word_len_max: int):
    words = [w for k in range(1, word_len_max + 1) for w in itertools.product(range(alphabet), repeat=k)]
    return itertools.product(words, words)


def estimate_decay_constants(drv: Driver, n_max: int, word_len_max: int) -> DecayConstants:
    """Fit ``(epsilon, kappa)`` so the decay inequality holds on every enumerated pair.

    Positions run over ``n = |u| + g`` with gaps ``0 <= g <= n_max``; ``epsilon``
    is ``-log2`` of the second eigenvalue modulus of the transition matrix.
    """
    if isinstance(drv, BernoulliDriver):
        return DecayConstants(math.inf, 0.0, n_max, word_len_max)
    lam2 = second_eigenvalue_modulus(drv.transition)
    if lam2 >= 1 - 1e-12:
        raise ValueError(f"second eigenvalue modulus {lam2} >= 1: the chain is not mixing")
    if lam2 <= 1e-15:
        eps = math.inf
    else:
        eps = -math.log2(lam2)
    kappa = 0.0
    powers = [np.linalg.matrix_power(drv.transition, g + 1) for g in range(n_max + 1)]
    pi = drv.stationary
    for g in range(n_max + 1):
        # ratio - 1 depends only on the last symbol of u and first of v
        excess = powers[g] / pi[None, :] - 1.0
        worst = float(excess.max())
        if worst <= 1e-12:
            continue
        scale = 1.0 if math.isinf(eps) else 2.0 ** (eps * g)
        kappa = max(kappa, worst * scale)
    return DecayConstants(eps, kappa, n_max, word_len_max)


def decay_violations(drv: Driver, dc: DecayConstants, n_max: int, word_len_max: int, rtol: float = 1e-12):
    """Enumerate ``(u, v, n)`` where the decay inequality fails; an empty list certifies it."""
    bad = []
    for u, v in _word_pairs(drv.size, word_len_max):
        mu_u, mu_v = drv.cylinder(u), drv.cylinder(v)
        for g in range(n_max + 1):
            n = len(u) + g
            lhs = joint_cylinder_measure(drv, u, v, n)
            factor = 1.0 if dc.kappa == 0 else 1.0 + dc.kappa * 2.0 ** (-dc.epsilon * g)
            rhs = factor * mu_u * mu_v
            if lhs > rhs * (1 + rtol):
                bad.append((u, v, n, lhs, rhs))
    return bad


def pushforward_sample(
    ifs: IfsModel,
    drv: Driver,
    depth: int,
    count: int,
    rng: np.random.Generator,
    base=None,
) -> np.ndarray:
    """Points distributed (to within ``a^depth |Lambda|``) by the push-forward of the reversed measure.

    A reversed-measure word is a driver path read backwards, so the projected
    point is the chaos-game orbit point after ``depth`` steps.
    """
    if base is None:
        base = ifs.maps[0].fixed_point()
    paths = drv.sample_paths(count, depth, rng)
    words = paths[:, ::-1]
    return project_words(ifs, words, base)
