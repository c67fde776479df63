"""Estimators, bound evaluators and brute-force oracles."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .carpet import (
    FLOOR,
    ApproxSquare,
    ReducedParams,
    _check_p,
    alpha_of_q,
    column_masses,
    level_height,
    optimize,
    square_count,
)
from .measures import BernoulliDriver, Driver, pushforward_sample
from .symbolic import IfsModel, SymbolicPacking, word_length_bound

ENUMERATION_BUDGET = 10**7
STATE_BUDGET = 10**6


class BudgetExceeded(ValueError):
    pass


# --------------------------------------------------------------------------
# slopes and empirical dimensions


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    intercept: float
    residual: float
    points: tuple[tuple[float, float], ...]

    def to_record(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept, "residual": self.residual,
                "points": [list(p) for p in self.points]}


def slope_fit(samples: Sequence[tuple[float, float]]) -> SlopeFit:
    """Least-squares line through ``(log(1/r), log T)``."""
    samples = [(float(r), float(T)) for r, T in samples]
    if len(samples) < 3:
        raise ValueError("need at least three (r, T) samples")
    if any(r <= 0 or T <= 0 for r, T in samples):
        raise ValueError("radii and times must be positive")
    rs = [r for r, _ in samples]
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise ValueError("radii must be strictly decreasing")
    x = np.array([-math.log(r) for r, _ in samples])
    y = np.array([math.log(T) for _, T in samples])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sum((A @ np.array([slope, icpt]) - y) ** 2))
    return SlopeFit(float(slope), float(icpt), resid, tuple(zip(x.tolist(), y.tolist())))


@dataclass(frozen=True)
class DimEstimate:
    radius: float
    estimate: float
    min_count: int
    reliable: bool


def minkowski_dim_estimate(
    ifs: IfsModel,
    drv: Driver,
    radii: Sequence[float],
    samples: int,
    probes: int,
    rng: np.random.Generator,
    depth: int | None = None,
    extra_probes=None,
    min_reliable_count: int = 30,
) -> list[DimEstimate]:
    """Per radius, the max over probe points of ``log nu(B(y, r)) / log r`` with empirical ball masses."""
    from scipy.spatial import cKDTree

    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be decreasing")
    if depth is None:
        depth = max(1, math.ceil(word_length_bound(ifs, radii[-1] / 4)))
    pts = pushforward_sample(ifs, drv, depth, samples, rng)
    probe_pts = pushforward_sample(ifs, drv, depth, probes, rng)
    if extra_probes is not None:
        extra = np.asarray(extra_probes, dtype=float).reshape(-1, ifs.dim)
        probe_pts = np.vstack([probe_pts, extra])
    tree = cKDTree(pts)
    out = []
    for r in radii:
        counts = np.array([len(ix) for ix in tree.query_ball_point(probe_pts, r)])
        cmin = int(counts.min())
        if cmin == 0:
            est = math.inf
        else:
            est = math.log(cmin / samples) / math.log(r)
        out.append(DimEstimate(r, est, cmin, cmin >= min_reliable_count))
    return out


def min_ball_measure_1d(ifs: IfsModel, drv: Driver, r: float, depth: int) -> float:
    """Minimum over cylinder points ``y`` of ``nu(B(y, r))`` from a depth-``depth`` cylinder decomposition.

    Each depth-``depth`` cylinder is collapsed to its image of the base point, so
    the value is accurate to within ``a^depth |Lambda|`` in the radius.
    """
    if ifs.dim != 1:
        raise ValueError("one-dimensional systems only")
    if ifs.size**depth > ENUMERATION_BUDGET:
        raise BudgetExceeded("too many cylinders")
    words = np.array(list(itertools.product(range(ifs.size), repeat=depth)), dtype=np.int64)
    from .symbolic import project_words

    x = project_words(ifs, words, ifs.maps[0].fixed_point())[:, 0]
    # the orbit distribution is the push-forward of the reversed measure
    mass = np.array([drv.cylinder(tuple(w[::-1])) for w in words])
    order = np.argsort(x)
    x, mass = x[order], mass[order]
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    lo = np.searchsorted(x, x - r, side="left")
    hi = np.searchsorted(x, x + r, side="right")
    return float((cum[hi] - cum[lo]).min())


# --------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class MatthewsBounds:
    lower: float
    upper: float
    count: int
    harmonic: float


def harmonic_number(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def matthews_bounds(t_inf: float, T_sup: float, count: int, c: float = 1.0, C: float = 1.0) -> MatthewsBounds:
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 < t_inf <= T_sup:
        raise ValueError("need 0 < t_inf <= T_sup")
    H = harmonic_number(count)
    return MatthewsBounds(float(c * t_inf * H), float(C * T_sup * H), count, H)


def o_from_min_measure(min_measure: float, r: float, alpha: float) -> float:
    """Correction ``o(r)`` with ``min nu(B(y, r)) = r^(alpha + o(r))``."""
    return math.log(min_measure) / math.log(r) - alpha


def expected_upper_main_term(r: float, alpha_bar: float, o_bar: float) -> float:
    """``(log(4/r))^2 (r/4)^(-alpha_bar - o_bar)``; the constant ``C1`` is separate."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if not abs(o_bar) < alpha_bar / 2:
        raise ValueError(f"|o| = {abs(o_bar)} outside the window |o| < alpha/2 = {alpha_bar / 2}")
    return math.log(4 / r) ** 2 * (r / 4) ** (-alpha_bar - o_bar)


@dataclass(frozen=True)
class LowerTerm:
    R: float
    value: float
    factor: float = 0.25


def expected_lower_main_term(
    ifs: IfsModel, r: float, alpha_low: float, o_low: float, c0: float, d: float
) -> LowerTerm:
    """Inflated radius ``R_r = 2r((L(r)+2)/c0)^(2/d)`` and ``R_r^(-alpha + o)``."""
    if c0 <= 0 or d <= 0:
        raise ValueError("c0 and d must be positive")
    L = word_length_bound(ifs, r)
    R = 2 * r * ((L + 2) / c0) ** (2 / d)
    if R >= ifs.diameter_bound:
        raise ValueError(f"inflated radius {R} >= diameter bound {ifs.diameter_bound}: the bound is vacuous")
    return LowerTerm(R, R ** (-alpha_low + o_low))


def cover_constant_c1(
    alpha: float,
    epsilon: float,
    kappa: float,
    a: float,
    diam: float,
    C: float,
    C0: float,
    D: float,
) -> float:
    """Explicit upper-bound constant in terms of the decay and geometry constants.

    ``kappa = 0`` (Bernoulli) and ``epsilon = inf`` send the decay terms to zero.
    """
    if not 0 < a < 1:
        raise ValueError("contraction must lie in (0, 1)")
    decay_term = 0.0 if math.isinf(epsilon) else 4 * alpha / (epsilon * math.log(2))
    if kappa == 0:
        kappa_term = 0.0
        kappa_inner = 0.0
    else:
        log2k = math.log(2 * kappa)
        kappa_term = alpha * math.log(diam / a) / (math.log(a) * log2k)
        kappa_inner = alpha * (1 + math.log(C0)) / (2 * log2k)
    c1_prime = decay_term - 2 / math.log(a) - kappa_term
    return C * c1_prime * (2 * D + kappa_inner)


def bernoulli_convolution_dim_lower(p, lam: float) -> float:
    """``min(log p1, log p2) / log lam`` for the overlapping pair ``{lam x - 1, lam x + 1}``."""
    if not 0.5 < lam < 1:
        raise ValueError("lambda must lie in (1/2, 1)")
    p = np.asarray(p, dtype=float)
    if p.shape != (2,) or np.any(p <= 0):
        raise ValueError("p must be a positive 2-vector")
    return min(math.log(p[0]), math.log(p[1])) / math.log(lam)


# --------------------------------------------------------------------------
# oracles


def oracle_min_square(rp: ReducedParams, p, K: int, convention: str = FLOOR) -> tuple[ApproxSquare, float]:
    """Exhaustive minimum of the approximate-square measure at level ``K``."""
    p = _check_p(rp, p)
    total = square_count(rp, K, convention)
    if total > ENUMERATION_BUDGET:
        raise BudgetExceeded(f"{total} squares exceed the enumeration budget")
    L = level_height(rp, K, convention)
    qc = column_masses(rp, p)
    # same factor order as the closed form: prefix symbols first, then columns
    table = np.ones(1)
    for _ in range(L):
        table = np.multiply.outer(table, p).ravel()
    for _ in range(K - L):
        table = np.multiply.outer(table, qc).ravel()
    idx = int(np.argmin(table))
    digits = []
    for base in [rp.M] * (K - L) + [rp.N] * L:
        idx, d = divmod(idx, base)
        digits.append(d)
    digits.reverse()
    return ApproxSquare(tuple(digits[:L]), tuple(digits[L:])), float(table.min())


@dataclass(frozen=True)
class GridAlpha:
    q_grid: np.ndarray
    alpha_grid: float
    slack: float
    evaluated: int


def oracle_grid_alpha(rp: ReducedParams, delta: float) -> GridAlpha:
    """Minimise ``alpha_of_q`` over a ``delta`` grid of the height-class simplex ``sum R_k q_k = 1``."""
    M0 = rp.M0
    if M0 > 4:
        raise BudgetExceeded("grid oracle supports at most four height classes")
    if delta < 1e-4:
        raise ValueError("grid step must be >= 1e-4")
    R = np.asarray(rp.multiplicities, dtype=float)
    if M0 == 1:
        q = np.array([1 / R[0]])
        return GridAlpha(q, alpha_of_q(rp, q), 0.0, 1)
    free = M0 - 1
    upper = [1 / R[k] for k in range(free)]
    n_pts = [int(math.floor((u - delta) / delta + 1e-9)) + 1 for u in upper]
    if math.prod(n_pts) > ENUMERATION_BUDGET:
        raise BudgetExceeded("grid too fine for the budget")
    best_alpha, best_q, count = math.inf, None, 0
    for idx in itertools.product(*(range(n) for n in n_pts)):
        qf = delta * (1 + np.asarray(idx, dtype=float))
        rest = 1 - float(R[:free] @ qf)
        last = rest / R[free]
        if last < delta - 1e-12:
            continue
        q = np.append(qf, last)
        count += 1
        a = alpha_of_q(rp, q)
        if a < best_alpha:
            best_alpha, best_q = a, q
    # log-Lipschitz bound on alpha over the distance from the optimiser to the grid
    q_star = optimize(rp).q_star
    dq = delta * max(1.0, float(R[:free].max()) / R[free])
    denom = np.maximum(q_star - dq, 1e-300)
    slack = (1 / math.log(rp.n) + (1 - rp.theta) / math.log(rp.m)) * float(np.max(dq / denom))
    return GridAlpha(best_q, best_alpha, slack, count)


def _window_chain(drv: BernoulliDriver, pk: SymbolicPacking):
    """Window states (last ``D`` draws, newest first), their cells, successors and initial law."""
    N, D = pk.alphabet, pk.max_length
    D = max(D, 1)
    windows = list(itertools.product(range(N), repeat=D))
    cells = np.array([pk.index(w) for w in windows], dtype=np.int64)
    index = {w: i for i, w in enumerate(windows)}
    succ = np.array([[index[(j,) + w[:-1]] for j in range(N)] for w in windows], dtype=np.int64)
    init = np.array([drv.cylinder(w) for w in windows])
    return D, cells, succ, init


def oracle_exact_cover_expectation(drv: BernoulliDriver, pk: SymbolicPacking) -> float:
    """Exact expected cover time from the absorbing chain on (window, visited set)."""
    if not isinstance(drv, BernoulliDriver):
        raise TypeError("the exact oracle handles Bernoulli drivers")
    n_cells = len(pk)
    if n_cells > 12:
        raise BudgetExceeded("at most 12 cells")
    if len(pk) == 1:
        return float(max(pk.max_length, 1))
    D, cells, succ, init = _window_chain(drv, pk)
    S = len(cells)
    full = (1 << n_cells) - 1
    if S * (1 << n_cells) > STATE_BUDGET:
        raise BudgetExceeded("state space exceeds the budget")
    p = drv.weights
    bit = 1 << cells
    value: dict[int, np.ndarray] = {full: np.zeros(S)}
    masks = sorted(range(1, full), key=lambda m: -bin(m).count("1"))
    for mask in masks:
        # only windows whose cell is in the set are reachable with this visited set
        A = np.eye(S)
        b = np.ones(S)
        for j, pj in enumerate(p):
            nxt = succ[:, j]
            inside = (bit[nxt] & mask) != 0
            A[np.arange(S)[inside], nxt[inside]] -= pj
            out = ~inside
            if out.any():
                b[out] += pj * np.array([value[mask | int(bit[k])][k] for k in nxt[out]])
        value[mask] = np.linalg.solve(A, b)
    start = np.array([value[int(bit[cells[w]])][w] if int(bit[cells[w]]) != full else 0.0 for w in range(S)])
    return float(D + init @ start)


def exact_hitting_expectations(drv: BernoulliDriver, pk: SymbolicPacking) -> np.ndarray:
    """Expected first recorded step in each cell, from a fresh start."""
    D, cells, succ, init = _window_chain(drv, pk)
    S = len(cells)
    p = drv.weights
    out = np.empty(len(pk))
    for c in range(len(pk)):
        A = np.eye(S)
        b = np.ones(S)
        target = cells == c
        for j, pj in enumerate(p):
            nxt = succ[:, j]
            live = ~target[nxt]
            A[np.arange(S)[live], nxt[live]] -= pj
        g = np.linalg.solve(A, b)
        g[target] = 0.0
        out[c] = D + float(init @ g)
    return out


def pattern_waiting_time(p, pattern: Sequence[int]) -> float:
    """Mean waiting time for a pattern in i.i.d. draws (overlap sum over self-matching suffixes)."""
    p = np.asarray(p, dtype=float)
    pattern = tuple(pattern)
    k = len(pattern)
    total = 0.0
    for j in range(1, k + 1):
        if pattern[:j] == pattern[k - j :]:
            total += 1.0 / float(np.prod(p[list(pattern[:j])]))
    return total
