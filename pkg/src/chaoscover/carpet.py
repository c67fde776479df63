"""Bedford-McMullen carpets: approximate squares, Minkowski dimensions of
Bernoulli measures, and the closed-form minimiser of that dimension.

Maps are indexed column-major: digits sorted by column, then by row. Column
indices ``phi`` count nonempty columns only, left to right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .symbolic import AffineMap, IfsModel, make_ifs

FLOOR = "floor"
CEIL = "ceil"
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CarpetSpec:
    m: int
    n: int
    digits: tuple[tuple[int, int], ...]

    def __post_init__(self):
        digits = tuple(sorted((int(i), int(j)) for i, j in self.digits))
        object.__setattr__(self, "digits", digits)
        if not (self.n > self.m >= 2):
            raise ValueError(f"need n > m >= 2, got m={self.m}, n={self.n}")
        if not digits:
            raise ValueError("a carpet needs at least one digit")
        if len(set(digits)) != len(digits):
            raise ValueError("digit pairs must be distinct")
        for i, j in digits:
            if not (0 <= i < self.m and 0 <= j < self.n):
                raise ValueError(f"digit {(i, j)} lies outside the {self.m}x{self.n} grid")

    @classmethod
    def from_columns(cls, m: int, n: int, heights: Sequence[int]) -> "CarpetSpec":
        """Carpet whose k-th column holds the bottom ``heights[k]`` cells (0 = empty column)."""
        digits = [(i, j) for i, h in enumerate(heights) for j in range(h)]
        return cls(m, n, tuple(digits))

    def ifs(self) -> IfsModel:
        lin = np.diag([1 / self.m, 1 / self.n])
        maps = [AffineMap.from_arrays(lin, [i / self.m, j / self.n]) for i, j in self.digits]
        return make_ifs(maps, diameter_bound=math.sqrt(2))


@dataclass(frozen=True)
class ReducedParams:
    """Column statistics of a carpet: the only data the dimension formulas use."""

    m: int
    n: int
    heights: tuple[int, ...]
    multiplicities: tuple[int, ...]
    column_of: tuple[int, ...]
    class_of: tuple[int, ...]
    column_class: tuple[int, ...]
    column_sizes: tuple[int, ...] = field(repr=False)

    @property
    def M0(self) -> int:
        return len(self.heights)

    @property
    def M(self) -> int:
        return sum(self.multiplicities)

    @property
    def N(self) -> int:
        return sum(r * h for r, h in zip(self.multiplicities, self.heights))

    @property
    def theta(self) -> float:
        """``log m / log n``."""
        return math.log(self.m) / math.log(self.n)


def reduce_params(c: CarpetSpec) -> ReducedParams:
    if not c.digits:
        raise ValueError("carpet has no digits")
    cols = sorted({i for i, _ in c.digits})
    col_index = {i: k for k, i in enumerate(cols)}
    sizes = [0] * len(cols)
    for i, _ in c.digits:
        sizes[col_index[i]] += 1
    heights = tuple(sorted(set(sizes)))
    mult = tuple(sizes.count(h) for h in heights)
    column_class = tuple(heights.index(s) for s in sizes)
    column_of = tuple(col_index[i] for i, _ in c.digits)
    class_of = tuple(column_class[k] for k in column_of)
    return ReducedParams(c.m, c.n, heights, mult, column_of, class_of, column_class, tuple(sizes))


def _rp(obj) -> ReducedParams:
    return obj if isinstance(obj, ReducedParams) else reduce_params(obj)


def level_height(c, K: int, convention: str = FLOOR) -> int:
    """``L(K)``.

    ``floor``: the largest integer with ``n^L <= m^K``.
    ``ceil``: the smallest integer with ``n^L > m^(K-1)``.
    Both are computed in exact integer arithmetic.
    """
    if K < 0:
        raise ValueError("level must be nonnegative")
    m, n = c.m, c.n
    if convention == FLOOR:
        L, target = 0, m**K
        while n ** (L + 1) <= target:
            L += 1
        return L
    if convention == CEIL:
        if K == 0:
            return 0
        L, target = 0, m ** (K - 1)
        while n**L <= target:
            L += 1
        return min(L, K)
    raise ValueError(f"unknown L(K) convention {convention!r}")


def square_count(c, K: int, convention: str = FLOOR) -> int:
    rp = _rp(c)
    L = level_height(rp, K, convention)
    return rp.N**L * rp.M ** (K - L)


@dataclass(frozen=True)
class ApproxSquare:
    """Level-K approximate square: ``L(K)`` map indices then ``K - L(K)`` column indices."""

    full_prefix: tuple[int, ...]
    column_suffix: tuple[int, ...]

    @property
    def level(self) -> int:
        return len(self.full_prefix) + len(self.column_suffix)


def square_of_word(rp: ReducedParams, w: Sequence[int], K: int, convention: str = FLOOR) -> ApproxSquare:
    """Approximate square containing the cylinder of ``w`` (``len(w) >= K``)."""
    if len(w) < K:
        raise ValueError("word shorter than the level")
    L = level_height(rp, K, convention)
    return ApproxSquare(tuple(w[:L]), tuple(rp.column_of[s] for s in w[L:K]))


def column_masses(rp: ReducedParams, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.zeros(rp.M)
    np.add.at(q, np.asarray(rp.column_of), p)
    return q


def _check_p(rp: ReducedParams, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (rp.N,):
        raise ValueError(f"expected {rp.N} map probabilities, got shape {p.shape}")
    if np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("map probabilities must be positive and sum to 1")
    return p


def square_measure(rp: ReducedParams, p, s: ApproxSquare) -> float:
    p = np.asarray(p, dtype=float)
    q = column_masses(rp, p)
    out = 1.0
    for i in s.full_prefix:
        out *= p[i]
    for j in s.column_suffix:
        out *= q[j]
    return float(out)


def min_square_measure(rp: ReducedParams, p, K: int, convention: str = FLOOR) -> float:
    """``(min p)^L (min q_p)^(K-L)``, multiplied in the same order as :func:`square_measure`."""
    p = _check_p(rp, p)
    L = level_height(rp, K, convention)
    pmin = float(p.min())
    qmin = float(column_masses(rp, p).min())
    out = 1.0
    for _ in range(L):
        out *= pmin
    for _ in range(K - L):
        out *= qmin
    return out


def _exponent(rp: ReducedParams, log_cell: float, log_column: float) -> float:
    th = rp.theta
    return log_cell / -math.log(rp.n) + (1 - th) * log_column / -math.log(rp.m)


def dim_measure(rp: ReducedParams, p) -> float:
    """Minkowski dimension of the Bernoulli measure: the max decouples into min p and min column mass."""
    p = _check_p(rp, p)
    q = column_masses(rp, p)
    return _exponent(rp, math.log(p.min()), math.log(q.min()))


def dim_measure_bruteforce(rp: ReducedParams, p) -> float:
    """Same value by looping over every (map, column) pair."""
    p = _check_p(rp, p)
    q = column_masses(rp, p)
    return max(_exponent(rp, math.log(pi), math.log(qj)) for pi in p for qj in q)


def dim_set(rp: ReducedParams) -> float:
    th = rp.theta
    return math.log(rp.N) / math.log(rp.n) + (1 - th) * math.log(rp.M) / math.log(rp.m)


def max_local_dimension(rp: ReducedParams, p) -> float:
    """Upper end of the local-dimension spectrum: the column index is tied to the map."""
    p = _check_p(rp, p)
    q = column_masses(rp, p)
    return max(_exponent(rp, math.log(pi), math.log(q[rp.column_of[i]])) for i, pi in enumerate(p))


def _check_q(rp: ReducedParams, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (rp.M0,):
        raise ValueError(f"expected {rp.M0} height-class masses, got shape {q.shape}")
    if np.any(q <= 0):
        raise ValueError("height-class masses must be positive")
    total = float(np.dot(rp.multiplicities, q))
    if abs(total - 1) > 1e-9:
        raise ValueError(f"sum of R_k q_k is {total}, not 1")
    return q


def alpha_of_q(rp: ReducedParams, q) -> float:
    q = _check_q(rp, q)
    per_cell = q / np.asarray(rp.heights)
    return _exponent(rp, math.log(per_cell.min()), math.log(q.min()))


def _head_tail(rp: ReducedParams, K: int) -> tuple[int, int]:
    """``|R_K|`` (columns in classes <= K) and ``||R_K^C||`` (cells in classes > K), 1-based K."""
    R, H = rp.multiplicities, rp.heights
    return sum(R[:K]), sum(r * h for r, h in zip(R[K:], H[K:]))


def vector_qK(rp: ReducedParams, K: int) -> np.ndarray:
    if not 1 <= K <= rp.M0:
        raise ValueError(f"K must lie in 1..{rp.M0}")
    head, tail = _head_tail(rp, K)
    NK = rp.heights[K - 1]
    denom = NK * head + tail
    return np.array([NK / denom if k < K else rp.heights[k] / denom for k in range(rp.M0)])


def vector_QK(rp: ReducedParams, K: int) -> np.ndarray:
    if not 1 <= K <= rp.M0 - 1:
        raise ValueError(f"K must lie in 1..{rp.M0 - 1}")
    head, tail = _head_tail(rp, K)
    th = rp.theta
    return np.array([(1 - th) / head if k < K else th * rp.heights[k] / tail for k in range(rp.M0)])


def threshold_AK(rp: ReducedParams, K: int) -> float:
    if not 1 <= K <= rp.M0 - 1:
        raise ValueError(f"K must lie in 1..{rp.M0 - 1}")
    head, tail = _head_tail(rp, K)
    return (math.log(rp.n) / math.log(rp.m) - 1) * tail / head


def lift_q_to_p(rp: ReducedParams, q) -> np.ndarray:
    """Spread each column's mass uniformly over its cells."""
    q = np.asarray(q, dtype=float)
    return np.array([q[k] / rp.heights[k] for k in rp.class_of])


def mcmullen_vector(rp: ReducedParams) -> np.ndarray:
    th = rp.theta
    sizes = np.asarray(rp.column_sizes, dtype=float)
    denom = float(np.sum(sizes**th))
    return np.array([sizes[j] ** (th - 1) / denom for j in rp.column_of])


def alpha_pq(rp: ReducedParams, p, qc) -> float:
    """Exponent of the two-dimensional game with independent map weights ``p`` and column weights ``qc``."""
    p = np.asarray(p, dtype=float)
    qc = np.asarray(qc, dtype=float)
    if p.shape != (rp.N,) or qc.shape != (rp.M,):
        raise ValueError("p needs one entry per map and qc one per nonempty column")
    for v in (p, qc):
        if np.any(v <= 0) or abs(v.sum() - 1) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
    return _exponent(rp, math.log(p.min()), math.log(qc.min()))


@dataclass(frozen=True)
class OptimizationResult:
    K: int
    regime: str
    q_star: np.ndarray
    alpha: float
    p_star: np.ndarray
    candidates: tuple = ()

    def to_record(self) -> dict:
        return {
            "K": self.K,
            "regime": self.regime,
            "q_star": [float(x) for x in self.q_star],
            "p_star": [float(x) for x in self.p_star],
            "alpha": float(self.alpha),
        }


def classify(rp: ReducedParams, K: int) -> tuple[str, int]:
    """Regime picked by ``A_K`` against ``[N_K, N_{K+1}]``; boundary ties go to ``QK``."""
    A = threshold_AK(rp, K)
    lo, hi = rp.heights[K - 1], rp.heights[K]
    if A < lo * (1 - _TIE_TOL):
        return "qK", K
    if A > hi * (1 + _TIE_TOL):
        return "qK", K + 1
    return "QK", K


def regime_vector(rp: ReducedParams, regime: str, K: int) -> np.ndarray:
    return vector_QK(rp, K) if regime == "QK" else vector_qK(rp, K)


def optimize(rp: ReducedParams) -> OptimizationResult:
    """Minimise the Minkowski dimension over Bernoulli vectors."""
    if rp.M0 == 1:
        q = vector_qK(rp, 1)
        return OptimizationResult(1, "qK", q, dim_set(rp), lift_q_to_p(rp, q))
    best = None
    cands = []
    for K in range(1, rp.M0):
        regime, idx = classify(rp, K)
        q = regime_vector(rp, regime, idx)
        a = alpha_of_q(rp, q)
        cands.append((K, regime, idx, a))
        if best is None or a < best[3]:
            best = (K, regime, idx, a, q)
    _, regime, idx, a, q = best
    return OptimizationResult(idx, regime, q, a, lift_q_to_p(rp, q), tuple(cands))


def optimal_structure_threshold(rp: ReducedParams, q, tol: float = 1e-9) -> list[int]:
    """Thresholds ``K`` at which ``q`` has equal head masses and equal tail mass-per-cell ratios."""
    q = np.asarray(q, dtype=float)
    ratio = q / np.asarray(rp.heights)
    found = []
    for K in range(1, rp.M0):
        head, tail = q[:K], ratio[K:]
        ok = (
            np.ptp(head) <= tol
            and head[0] <= q[K:].min() + tol
            and np.ptp(tail) <= tol
            and tail[0] <= ratio[:K].min() + tol
        )
        if ok:
            found.append(K)
    return found


# Carpets used in the worked examples; each column holds the bottom cells except
# where a top-row digit is needed so that (1, 1) lies on the attractor.
TABLE1_CARPETS = {
    "row1": CarpetSpec(2, 3, ((0, 0), (0, 2), (1, 0), (1, 1), (1, 2))),
    "row2": CarpetSpec(2, 3, ((0, 1), (1, 0), (1, 2))),
    "row3": CarpetSpec(2, 5, ((0, 0), (0, 4), (1, 0), (1, 2), (1, 4))),
}
NONUNIQUE_CARPET = CarpetSpec(2, 4, ((0, 0), (0, 3), (1, 0), (1, 1), (1, 2), (1, 3)))
