"""Chaos-game orbits and cover/hitting times on packing-indexed trackers.

Every tracker turns a stream of drawn symbols into a stream of cell codes,
one per step. Step ``t`` (1-based) is the state after ``t`` draws. A step is
*recorded* once the tracked cell depends only on drawn symbols, i.e. from
step ``max(memory, 1)`` on; the ``memory - 1`` earlier steps are burn-in and
carry code ``-1``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .carpet import FLOOR, ApproxSquare, ReducedParams, level_height
from .measures import BernoulliDriver, Driver, _draw_iid, pushforward_sample
from .symbolic import IfsModel, SymbolicPacking, Word, word_length_bound

DEFAULT_STEP_CEILING = 10**9
_TABLE_BUDGET = 1 << 24


class StepCeilingReached(RuntimeError):
    def __init__(self, steps: int, remaining: int, completed_trials: int | None = None):
        self.steps = steps
        self.remaining = remaining
        self.completed_trials = completed_trials
        msg = f"step ceiling {steps} reached with {remaining} cells unvisited"
        if completed_trials is not None:
            msg += f" after {completed_trials} completed trials"
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class ProductDriver:
    """Two-dimensional game: map index ~ ``p`` and column index ~ ``qc``, independently."""

    p: np.ndarray
    qc: np.ndarray

    kind = "product"

    def __init__(self, p, qc):
        p = np.asarray(p, dtype=float)
        qc = np.asarray(qc, dtype=float)
        for v in (p, qc):
            if np.any(v <= 0) or abs(v.sum() - 1) > 1e-9:
                raise ValueError("product driver weights must be positive and sum to 1")
        object.__setattr__(self, "p", p / p.sum())
        object.__setattr__(self, "qc", qc / qc.sum())

    def stream(self, rng: np.random.Generator):
        return _ProductStream(self.p, self.qc, rng)

    def describe(self) -> dict:
        return {"kind": "product", "p": self.p.tolist(), "qc": self.qc.tolist()}


class _ProductStream:
    def __init__(self, p, qc, rng):
        self._p, self._qc, self._rng = p, qc, rng

    def draw(self, n: int) -> np.ndarray:
        k = _draw_iid(self._p, n, self._rng)
        ell = _draw_iid(self._qc, n, self._rng)
        return np.stack([k, ell])


class ArraySource:
    """Replays a fixed symbol array; useful for cross-checks and recorded runs."""

    def __init__(self, symbols):
        self.symbols = np.asarray(symbols, dtype=np.int64)
        self.pos = 0

    def draw(self, n: int) -> np.ndarray:
        end = self.pos + n
        if end > self.symbols.shape[-1]:
            raise IndexError("symbol array exhausted")
        out = self.symbols[..., self.pos : end]
        self.pos = end
        return out


class RecordingSource:
    """Wraps a symbol stream and keeps every drawn chunk."""

    def __init__(self, inner):
        self.inner = inner
        self.chunks: list[np.ndarray] = []

    def draw(self, n: int) -> np.ndarray:
        out = self.inner.draw(n)
        self.chunks.append(out)
        return out

    def symbols(self) -> np.ndarray:
        if not self.chunks:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.chunks, axis=-1)


def cover_steps_from_source(tracker, source, step_ceiling: int = DEFAULT_STEP_CEILING, x0=None) -> int:
    return _cover_steps(tracker.code_stream(source, x0), tracker.size, step_ceiling)


# --------------------------------------------------------------------------
# trackers


class _WindowTracker:
    """Base for trackers whose cell is a function of the last ``memory`` draws."""

    size: int
    memory: int
    variant: str

    def window_codes(self, buf: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def code_stream(self, source, x0=None):
        return _WindowCodeStream(self, source)

    def metadata(self) -> dict:
        return {"variant": self.variant, "size": self.size, "memory": self.memory}


class _WindowCodeStream:
    def __init__(self, tracker: _WindowTracker, source):
        self.tracker = tracker
        self.source = source
        self.keep = max(tracker.memory - 1, 0)
        self.hist = None
        self.t = 0

    def next(self, n: int) -> np.ndarray:
        chunk = self.source.draw(n)
        if self.hist is None:
            buf = chunk
        else:
            buf = np.concatenate([self.hist, chunk], axis=-1)
        codes = self.tracker.window_codes(buf)
        missing = n - codes.shape[-1]
        if missing > 0:
            codes = np.concatenate([np.full(missing, -1, dtype=np.int64), codes])
        if self.keep:
            self.hist = buf[..., -self.keep :] if buf.shape[-1] >= self.keep else buf
        self.t += n
        return codes


class PackingTracker(_WindowTracker):
    """Cells of a symbolic packing, looked up from the last ``max_length`` draws."""

    variant = "symbolic-packing"

    def __init__(self, packing: SymbolicPacking):
        self.packing = packing
        self.size = len(packing)
        self.memory = packing.max_length
        N, D = packing.alphabet, self.memory
        if N**D > _TABLE_BUDGET:
            raise ValueError(f"window table of {N}^{D} entries exceeds the budget")
        self._weights = N ** np.arange(D - 1, -1, -1, dtype=np.int64)
        table = np.empty(N**D, dtype=np.int64)
        for code in range(N**D):
            table[code] = packing.index(_digits(code, N, D))
        self._table = table

    def window_codes(self, buf: np.ndarray) -> np.ndarray:
        D = self.memory
        if D == 0:
            return np.zeros(buf.shape[-1], dtype=np.int64)
        B = buf.shape[-1]
        if B < D:
            return np.empty(0, dtype=np.int64)
        code = np.zeros(B - D + 1, dtype=np.int64)
        for lag in range(D):
            # newest draw (lag 0) is the first symbol of the word
            code += buf[D - 1 - lag : B - lag] * self._weights[lag]
        return self._table[code]

    def encode(self, w: Sequence[int]) -> int:
        return self.packing.index(w)

    def decode(self, code: int) -> Word:
        return self.packing.words[code]

    def transition(self, state: Word, symbol: int) -> Word:
        return self.packing.lookup((symbol,) + tuple(state))

    def metadata(self) -> dict:
        return super().metadata() | {"radius": self.packing.radius}


class CarpetTracker(_WindowTracker):
    """Level-K approximate squares; codes are mixed-radix (prefix base N, suffix base M)."""

    variant = "carpet-squares"

    def __init__(self, rp: ReducedParams, K: int, convention: str = FLOOR, two_dim: bool = False):
        if K < 1:
            raise ValueError("level must be >= 1")
        self.rp = rp
        self.K = K
        self.convention = convention
        self.L = level_height(rp, K, convention)
        self.two_dim = two_dim
        self.memory = K
        N, M, L = rp.N, rp.M, self.L
        self.size = N**L * M ** (K - L)
        self._pw = np.array([N ** (L - 1 - i) * M ** (K - L) for i in range(L)], dtype=np.int64)
        self._sw = np.array([M ** (K - L - 1 - i) for i in range(K - L)], dtype=np.int64)
        self._phi = np.asarray(rp.column_of, dtype=np.int64)
        if self.size >= 2**62:
            raise ValueError("level too large for integer square codes")

    def encode(self, s: ApproxSquare) -> int:
        if len(s.full_prefix) != self.L or s.level != self.K:
            raise ValueError("square does not belong to this level")
        return int(sum(int(d) * int(w) for d, w in zip(s.full_prefix, self._pw))
                   + sum(int(d) * int(w) for d, w in zip(s.column_suffix, self._sw)))

    def decode(self, code: int) -> ApproxSquare:
        N, M, L, K = self.rp.N, self.rp.M, self.L, self.K
        suffix_code, prefix_code = code % M ** (K - L), code // M ** (K - L)
        return ApproxSquare(_digits(prefix_code, N, L), _digits(suffix_code, M, K - L))

    def transition(self, s: ApproxSquare, j: int) -> ApproxSquare:
        return carpet_square_transition(self.rp, s, j)

    def transition_2d(self, s: ApproxSquare, k: int, ell: int) -> ApproxSquare:
        return ApproxSquare((k,) + s.full_prefix[:-1], (ell,) + s.column_suffix[:-1])

    def window_codes(self, buf: np.ndarray) -> np.ndarray:
        K, L = self.K, self.L
        B = buf.shape[-1]
        if B < K:
            return np.empty(0, dtype=np.int64)
        n_out = B - K + 1
        code = np.zeros(n_out, dtype=np.int64)
        if self.two_dim:
            maps, cols = buf[0], buf[1]
            for lag in range(L):
                code += maps[K - 1 - lag : B - lag] * self._pw[lag]
            for lag in range(K - L):
                code += cols[K - 1 - lag : B - lag] * self._sw[lag]
            return code
        for lag in range(L):
            code += buf[K - 1 - lag : B - lag] * self._pw[lag]
        for lag in range(L, K):
            code += self._phi[buf[K - 1 - lag : B - lag]] * self._sw[lag - L]
        return code

    def metadata(self) -> dict:
        return super().metadata() | {
            "K": self.K,
            "L": self.L,
            "L_convention": self.convention,
            "two_dim": self.two_dim,
        }


def _digits(code: int, base: int, width: int) -> tuple[int, ...]:
    out = [0] * width
    for i in range(width - 1, -1, -1):
        code, out[i] = divmod(code, base)
    return tuple(out)


def carpet_square_transition(rp: ReducedParams, state: ApproxSquare, j: int) -> ApproxSquare:
    """Prepend map ``j``; the dropped last prefix symbol moves to the suffix as its column."""
    if not state.full_prefix:
        return ApproxSquare((), (rp.column_of[j],) + state.column_suffix[:-1])
    dropped = state.full_prefix[-1]
    return ApproxSquare(
        (j,) + state.full_prefix[:-1],
        (rp.column_of[dropped],) + state.column_suffix[:-1],
    )


class GridTracker:
    """Cells of side ``r`` over the bounding box; only cells hit by a pilot orbit count.

    Meant for overlapping systems with no symbolic packing. Burn-in is
    ``ceil(L(r))`` steps so orbit points lie within ``r`` of the attractor.
    """

    variant = "geometric-grid"

    def __init__(self, ifs: IfsModel, drv: Driver, r: float, pilot_steps: int, rng: np.random.Generator):
        self.ifs = ifs
        self.r = r
        self.memory = max(1, math.ceil(word_length_bound(ifs, r)))
        pts = pushforward_sample(ifs, drv, max(self.memory, 1) + 8, pilot_steps, rng)
        self.origin = pts.min(axis=0) - r
        cells = np.unique(self._cell_keys(pts))
        self._cells = cells
        self.size = cells.size

    def _cell_keys(self, pts: np.ndarray) -> np.ndarray:
        idx = np.floor((pts - self.origin) / self.r).astype(np.int64)
        key = np.zeros(len(pts), dtype=np.int64)
        for d in range(idx.shape[1]):
            key = key * (1 << 20) + np.clip(idx[:, d], 0, (1 << 20) - 1)
        return key

    def cell_ids(self, pts: np.ndarray) -> np.ndarray:
        keys = self._cell_keys(pts)
        pos = np.searchsorted(self._cells, keys)
        pos = np.minimum(pos, self.size - 1)
        return np.where(self._cells[pos] == keys, pos, -1)

    def cells_in_ball(self, center, radius: float) -> np.ndarray:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        centers = self.cell_centers()
        return np.flatnonzero(np.linalg.norm(centers - c, axis=1) <= radius)

    def cell_centers(self) -> np.ndarray:
        keys = self._cells.copy()
        dim = self.ifs.dim
        idx = np.zeros((keys.size, dim), dtype=np.int64)
        for d in range(dim - 1, -1, -1):
            idx[:, d] = keys % (1 << 20)
            keys //= 1 << 20
        return self.origin + (idx + 0.5) * self.r

    def code_stream(self, source, x0=None):
        return _GridCodeStream(self, source, x0)

    def metadata(self) -> dict:
        return {"variant": self.variant, "size": self.size, "memory": self.memory, "radius": self.r}


class _GridCodeStream:
    def __init__(self, tracker: GridTracker, source, x0):
        self.tracker = tracker
        self.source = source
        ifs = tracker.ifs
        self.A = ifs.linear_stack
        self.b = ifs.translation_stack
        self.x = ifs.maps[0].fixed_point() if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
        self.t = 0

    def next(self, n: int) -> np.ndarray:
        syms = self.source.draw(n)
        pts = chaos_orbit_from_symbols(self.A, self.b, self.x, syms)
        self.x = pts[-1]
        codes = self.tracker.cell_ids(pts)
        steps = self.t + 1 + np.arange(n)
        codes[steps < self.tracker.memory] = -1
        self.t += n
        return codes


def chaos_orbit_from_symbols(A: np.ndarray, b: np.ndarray, x0, symbols) -> np.ndarray:
    """Points ``x_1..x_n`` of ``x_t = f_{s_t}(x_{t-1})``."""
    x = [float(v) for v in np.atleast_1d(x0)]
    dim = len(x)
    Al = A.tolist()
    bl = b.tolist()
    out = np.empty((len(symbols), dim))
    for t, s in enumerate(np.asarray(symbols).tolist()):
        a, c = Al[s], bl[s]
        x = [sum(a[i][j] * x[j] for j in range(dim)) + c[i] for i in range(dim)]
        out[t] = x
    return out


def chaos_orbit(ifs: IfsModel, drv: Driver, x0, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Orbit ``x_0..x_steps`` as a ``(steps + 1, d)`` array."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    syms = drv.stream(rng).draw(steps)
    pts = chaos_orbit_from_symbols(ifs.linear_stack, ifs.translation_stack, x0, syms)
    return np.vstack([x0[None, :], pts])


# --------------------------------------------------------------------------
# step-by-step tracker


class CoverTracker:
    """Visited-set state machine driven one symbol at a time.

    This is the reference path; Monte Carlo runs use the vectorised code
    streams, and the test-suite checks that both agree step for step.
    """

    def __init__(self, tracker: _WindowTracker, x0_coding):
        self.tracker = tracker
        if isinstance(tracker, CarpetTracker):
            self.state = x0_coding if isinstance(x0_coding, ApproxSquare) else _square_from(tracker, x0_coding)
        else:
            self.state = tracker.packing.lookup(x0_coding)
        self.visited = np.zeros(tracker.size, dtype=bool)
        self.remaining = tracker.size
        self.steps = 0

    @property
    def first_recorded(self) -> int:
        return max(self.tracker.memory, 1)

    def step(self, symbol) -> bool:
        tr = self.tracker
        if isinstance(tr, CarpetTracker) and tr.two_dim:
            k, ell = symbol
            self.state = tr.transition_2d(self.state, int(k), int(ell))
        else:
            self.state = tr.transition(self.state, int(symbol))
        self.steps += 1
        if self.steps >= self.first_recorded:
            c = tr.encode(self.state)
            if not self.visited[c]:
                self.visited[c] = True
                self.remaining -= 1
        return self.remaining == 0


def _square_from(tracker: CarpetTracker, w) -> ApproxSquare:
    w = tuple(w)
    if len(w) < tracker.K:
        raise ValueError("x0 coding must have at least K symbols")
    phi = tracker.rp.column_of
    if tracker.two_dim:
        raise ValueError("give the two-dimensional tracker an ApproxSquare start")
    return ApproxSquare(w[: tracker.L], tuple(phi[s] for s in w[tracker.L : tracker.K]))


# --------------------------------------------------------------------------
# trials


@dataclass(frozen=True)
class TrialResult:
    steps: int
    seed: int
    trial: int = 0
    metadata: dict = field(default_factory=dict)


def trial_rng(master_seed: int, trial: int) -> tuple[np.random.Generator, int]:
    """Independent stream for ``(master_seed, trial)`` and a 64-bit seed that identifies it."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    seed = int(ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.Generator(np.random.PCG64(ss)), seed


def _chunk_sizes(start: int = 1024, cap: int = 1 << 16):
    n = start
    while True:
        yield n
        n = min(2 * n, cap)


def _cover_steps(stream, size: int, ceiling: int) -> int:
    visited = np.zeros(size, dtype=bool)
    remaining = size
    for n in _chunk_sizes(min(1024, max(64, 2 * size))):
        t0 = stream.t
        if t0 >= ceiling:
            raise StepCeilingReached(ceiling, remaining)
        n = min(n, ceiling - t0)
        codes = stream.next(n)
        idx = np.flatnonzero(codes >= 0)
        if idx.size == 0:
            continue
        c = codes[idx]
        fresh = ~visited[c]
        if not fresh.any():
            continue
        idx, c = idx[fresh], c[fresh]
        uniq, first = np.unique(c, return_index=True)
        visited[uniq] = True
        remaining -= uniq.size
        if remaining == 0:
            return t0 + int(idx[first].max()) + 1


def _hit_steps(stream, target_mask: np.ndarray, ceiling: int) -> int:
    for n in _chunk_sizes(64):
        t0 = stream.t
        if t0 >= ceiling:
            raise StepCeilingReached(ceiling, 1)
        n = min(n, ceiling - t0)
        codes = stream.next(n)
        valid = codes >= 0
        hit = np.zeros(n, dtype=bool)
        hit[valid] = target_mask[codes[valid]]
        where = np.flatnonzero(hit)
        if where.size:
            return t0 + int(where[0]) + 1


def cover_time_trial(
    drv,
    tracker,
    rng: np.random.Generator,
    x0=None,
    step_ceiling: int = DEFAULT_STEP_CEILING,
    seed: int = 0,
    trial: int = 0,
) -> TrialResult:
    """Number of draws until every cell has been recorded at least once."""
    steps = _cover_steps(tracker.code_stream(drv.stream(rng), x0), tracker.size, step_ceiling)
    return TrialResult(steps, seed, trial, tracker.metadata())


def two_dim_cover_time_trial(p, qc, tracker: CarpetTracker, rng, step_ceiling: int = DEFAULT_STEP_CEILING,
                             seed: int = 0, trial: int = 0) -> TrialResult:
    if not tracker.two_dim:
        tracker = CarpetTracker(tracker.rp, tracker.K, tracker.convention, two_dim=True)
    return cover_time_trial(ProductDriver(p, qc), tracker, rng, None, step_ceiling, seed, trial)


def hitting_time_trial(drv, tracker, target_mask: np.ndarray, rng, x0=None,
                       step_ceiling: int = DEFAULT_STEP_CEILING, seed: int = 0, trial: int = 0) -> TrialResult:
    steps = _hit_steps(tracker.code_stream(drv.stream(rng), x0), target_mask, step_ceiling)
    return TrialResult(steps, seed, trial, tracker.metadata())


def target_mask_for_word(tracker, w: Sequence[int]) -> np.ndarray:
    """Cells of a symbolic tracker contained in the cylinder of ``w`` (the empty word is everything)."""
    w = tuple(w)
    mask = np.zeros(tracker.size, dtype=bool)
    if isinstance(tracker, PackingTracker):
        for i, word in enumerate(tracker.packing.words):
            if word[: len(w)] == w:
                mask[i] = True
            elif w[: len(word)] == word and len(w) > len(word):
                raise ValueError("target is finer than the packing; use a deeper tracker")
    elif isinstance(tracker, CarpetTracker):
        for code in range(tracker.size):
            s = tracker.decode(code)
            mask[code] = s.full_prefix[: len(w)] == w[: len(s.full_prefix)]
    else:
        raise TypeError("word targets need a symbolic tracker")
    if not mask.any():
        raise ValueError("target has zero measure on this tracker")
    return mask


@dataclass(frozen=True)
class CoverStats:
    mean: float
    stderr: float
    min: int
    max: int
    steps: tuple[int, ...]
    seeds: tuple[int, ...]
    master_seed: int

    @property
    def trials(self) -> int:
        return len(self.steps)

    def to_record(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "stderr": self.stderr,
            "min": self.min,
            "max": self.max,
            "master_seed": self.master_seed,
        }


def summarize(steps: Sequence[int], seeds: Sequence[int], master_seed: int) -> CoverStats:
    """Welford single pass; the inputs are in trial order, so the result is order-stable."""
    count, mean, m2 = 0, 0.0, 0.0
    for x in steps:
        count += 1
        delta = x - mean
        mean += delta / count
        m2 += delta * (x - mean)
    var = m2 / (count - 1) if count > 1 else 0.0
    stderr = math.sqrt(var / count) if count > 1 else 0.0
    return CoverStats(mean, stderr, int(min(steps)), int(max(steps)), tuple(int(s) for s in steps),
                      tuple(seeds), int(master_seed))


def _run_trials(kind: str, drv, tracker, master_seed: int, indices: Sequence[int], ceiling: int, extra):
    out = []
    for i in indices:
        rng, seed = trial_rng(master_seed, i)
        try:
            if kind == "cover":
                res = cover_time_trial(drv, tracker, rng, extra, ceiling, seed, i)
            else:
                res = hitting_time_trial(drv, tracker, extra, rng, None, ceiling, seed, i)
        except StepCeilingReached as exc:
            return out, exc
        out.append((i, res.steps, res.seed))
    return out, None


def _monte_carlo(kind, drv, tracker, trials, master_seed, threads, ceiling, extra) -> CoverStats:
    if trials < 1:
        raise ValueError("need at least one trial")
    indices = list(range(trials))
    if threads <= 1:
        parts = [_run_trials(kind, drv, tracker, master_seed, indices, ceiling, extra)]
    else:
        blocks = [indices[k::threads] for k in range(threads)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_run_trials, kind, drv, tracker, master_seed, b, ceiling, extra) for b in blocks]
            parts = [f.result() for f in futs]
    # keyed by trial index so aggregation does not depend on scheduling
    results = {i: (steps, seed) for block, _ in parts for i, steps, seed in block}
    err = next((e for _, e in parts if e is not None), None)
    if err is not None:
        raise StepCeilingReached(err.steps, err.remaining, completed_trials=len(results))
    ordered = [results[i] for i in sorted(results)]
    return summarize([s for s, _ in ordered], [sd for _, sd in ordered], master_seed)


def cover_time_mc(drv, tracker, trials: int, master_seed: int, threads: int = 1,
                  step_ceiling: int = DEFAULT_STEP_CEILING, x0=None) -> CoverStats:
    return _monte_carlo("cover", drv, tracker, trials, master_seed, threads, step_ceiling, x0)


def hitting_time_mc(drv, tracker, target_mask: np.ndarray, trials: int, master_seed: int, threads: int = 1,
                    step_ceiling: int = DEFAULT_STEP_CEILING) -> CoverStats:
    return _monte_carlo("hit", drv, tracker, trials, master_seed, threads, step_ceiling, target_mask)


def hausdorff_distance_estimate(orbit_points, attractor_sample) -> float:
    """One-sided distance: farthest attractor sample point from its nearest orbit point."""
    from scipy.spatial import cKDTree

    orbit = np.asarray(orbit_points, dtype=float)
    sample = np.asarray(attractor_sample, dtype=float)
    if orbit.ndim == 1:
        orbit = orbit[:, None]
    if sample.ndim == 1:
        sample = sample[:, None]
    if len(orbit) == 0 or len(sample) == 0:
        raise ValueError("both point sets must be nonempty")
    dist, _ = cKDTree(orbit).query(sample)
    return float(dist.max())


def bernoulli(p) -> BernoulliDriver:
    return BernoulliDriver(p)
