"""Symbolic words, affine IFS geometry, the natural projection and symbolic packings.

Words are plain tuples of symbol indices. The first symbol of a word is the
outermost map in a composition, so ``(i1, i2, ..., ik)`` is sent to
``f_i1 o f_i2 o ... o f_ik``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]

# relative slack for the product condition lambda_w * diam <= r
_PRODUCT_RTOL = 1e-12


def reverse_word(w: Sequence[int]) -> Word:
    return tuple(reversed(tuple(w)))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> linear @ x + translation`` with an operator-norm contraction bound."""

    linear: np.ndarray
    translation: np.ndarray
    contraction: float

    @classmethod
    def from_arrays(cls, linear, translation, contraction: float | None = None) -> "AffineMap":
        lin = np.atleast_2d(np.asarray(linear, dtype=float))
        tr = np.atleast_1d(np.asarray(translation, dtype=float))
        if lin.shape != (tr.size, tr.size):
            raise ValueError(f"linear part {lin.shape} does not match translation of size {tr.size}")
        norm = float(np.linalg.norm(lin, 2))
        if contraction is None:
            contraction = norm
        elif contraction < norm - 1e-12:
            raise ValueError(f"contraction {contraction} is below the operator norm {norm}")
        if not 0 < contraction < 1:
            raise ValueError(f"map is not a strict contraction (bound {contraction})")
        lin.setflags(write=False)
        tr.setflags(write=False)
        return cls(lin, tr, float(contraction))

    @property
    def dim(self) -> int:
        return self.translation.size

    def __call__(self, x):
        return apply_map(self, x)

    def fixed_point(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.dim) - self.linear, self.translation)


def apply_map(m: AffineMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    # works for a single point (d,) and for a batch (count, d)
    return x @ m.linear.T + m.translation


@dataclass(frozen=True, eq=False)
class IfsModel:
    maps: tuple[AffineMap, ...]
    diameter_bound: float
    ratios: tuple[float, ...] | None = None
    diameter_source: str = "user"

    @property
    def contraction(self) -> float:
        """Global contraction ``a``: the largest map contraction."""
        return max(m.contraction for m in self.maps)

    @property
    def size(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    @property
    def linear_stack(self) -> np.ndarray:
        return np.stack([m.linear for m in self.maps])

    @property
    def translation_stack(self) -> np.ndarray:
        return np.stack([m.translation for m in self.maps])

    def metadata(self) -> dict:
        return {
            "maps": self.size,
            "dim": self.dim,
            "contraction": self.contraction,
            "diameter_bound": self.diameter_bound,
            "diameter_source": self.diameter_source,
        }


def invariant_ball_diameter(maps: Sequence[AffineMap]) -> float:
    """Diameter of a ball mapped into itself by every map; it contains the attractor.

    Centre ``c`` is the mean of the fixed points and the radius is
    ``max_i |f_i(c) - c| / (1 - a)``.
    """
    a = max(m.contraction for m in maps)
    c = np.mean([m.fixed_point() for m in maps], axis=0)
    radius = max(float(np.linalg.norm(apply_map(m, c) - c)) for m in maps) / (1 - a)
    return 2 * radius


def make_ifs(
    maps: Sequence[AffineMap],
    diameter_bound: float | None = None,
    ratios: Sequence[float] | None = None,
) -> IfsModel:
    maps = tuple(maps)
    if not maps:
        raise ValueError("an IFS needs at least one map")
    if len({m.dim for m in maps}) != 1:
        raise ValueError("maps act on different dimensions")
    if ratios is not None:
        ratios = tuple(float(r) for r in ratios)
        if len(ratios) != len(maps) or not all(0 < r < 1 for r in ratios):
            raise ValueError("similarity ratios must be one value in (0, 1) per map")
    if diameter_bound is None:
        diam = invariant_ball_diameter(maps)
        source = "invariant-ball"
        if diam == 0:
            raise ValueError("all maps share one fixed point; the attractor is a single point")
    else:
        diam = float(diameter_bound)
        source = "user"
        if diam <= 0:
            raise ValueError("diameter bound must be positive")
    return IfsModel(maps, diam, ratios, source)


def similarity_ifs(
    ratios: Sequence[float],
    translations: Sequence,
    diameter_bound: float | None = None,
) -> IfsModel:
    """IFS of homotheties ``x -> ratio * x + translation``."""
    maps = []
    for lam, t in zip(ratios, translations):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        maps.append(AffineMap.from_arrays(lam * np.eye(t.size), t, lam))
    return make_ifs(maps, diameter_bound, ratios)


def cantor_ifs() -> IfsModel:
    """Middle-third Cantor system ``{x/3, x/3 + 2/3}`` on [0, 1]."""
    return similarity_ifs([1 / 3, 1 / 3], [0.0, 2 / 3], diameter_bound=1.0)


def bernoulli_convolution_ifs(lam: float) -> IfsModel:
    """Overlapping system ``{lam x - 1, lam x + 1}``; attractor ``[-1/(1-lam), 1/(1-lam)]``."""
    return similarity_ifs([lam, lam], [-1.0, 1.0], diameter_bound=2 / (1 - lam))


def natural_project(ifs: IfsModel, w: Sequence[int], base=None) -> tuple[np.ndarray, float]:
    """Return ``f_w1 o ... o f_wk (base)`` and the distance bound ``a^k |Lambda|``.

    The image under the natural projection of every infinite extension of
    ``w`` lies within the returned bound of the point, provided ``base`` lies
    in the attractor.
    """
    w = tuple(w)
    if len(w) < 1:
        raise ValueError("natural_project needs a word of length >= 1")
    x = np.zeros(ifs.dim) if base is None else np.atleast_1d(np.asarray(base, dtype=float))
    for s in reversed(w):
        x = apply_map(ifs.maps[s], x)
    return x, ifs.contraction ** len(w) * ifs.diameter_bound


def project_words(ifs: IfsModel, words: np.ndarray, base=None) -> np.ndarray:
    """Vectorised natural projection of an integer array of words, shape ``(count, depth)``."""
    words = np.asarray(words)
    count, depth = words.shape
    A = ifs.linear_stack
    b = ifs.translation_stack
    x = np.zeros((count, ifs.dim)) if base is None else np.tile(np.asarray(base, float), (count, 1))
    for col in range(depth - 1, -1, -1):
        s = words[:, col]
        x = np.einsum("nij,nj->ni", A[s], x) + b[s]
    return x


def word_length_bound(ifs: IfsModel, r: float) -> float:
    """``L(r) = log r / log a - log(|Lambda| / a) / log a``."""
    if r <= 0:
        raise ValueError("radius must be positive")
    la = math.log(ifs.contraction)
    return math.log(r) / la - math.log(ifs.diameter_bound / ifs.contraction) / la


@dataclass(frozen=True, eq=False)
class SymbolicPacking:
    """Prefix-free complete set of words; lookups walk a radix tree over symbols."""

    words: tuple[Word, ...]
    radius: float
    alphabet: int
    _trie: dict = field(repr=False)

    @classmethod
    def from_words(cls, words: Iterable[Sequence[int]], alphabet: int, radius: float = math.nan):
        words = tuple(sorted(tuple(w) for w in words))
        trie: dict = {}
        for idx, w in enumerate(words):
            node = trie
            for s in w[:-1]:
                nxt = node.setdefault(s, {})
                if not isinstance(nxt, dict):
                    raise ValueError(f"word {w} extends another packing word")
                node = nxt
            if not w:
                if len(words) != 1:
                    raise ValueError("the empty word only forms a packing on its own")
                trie = {None: 0}
                continue
            if w[-1] in node:
                raise ValueError(f"word {w} is a prefix of, or equal to, another packing word")
            node[w[-1]] = idx
        pk = cls(words, radius, alphabet, trie)
        if not pk.is_complete():
            raise ValueError("packing does not cover every infinite sequence")
        return pk

    def __len__(self) -> int:
        return len(self.words)

    @property
    def max_length(self) -> int:
        return max(len(w) for w in self.words)

    def index(self, w: Sequence[int]) -> int:
        """Index of the packing word that is a prefix of ``w``."""
        node = self._trie
        if None in node:
            return 0
        for s in w:
            node = node[s]
            if not isinstance(node, dict):
                return node
        raise ValueError(f"sequence {tuple(w)} is too short to determine a packing word")

    def lookup(self, w: Sequence[int]) -> Word:
        return self.words[self.index(w)]

    def is_complete(self) -> bool:
        def mass(node, depth):
            if not isinstance(node, dict):
                return 1.0
            if None in node:
                return 1.0
            if len(node) != self.alphabet:
                return 0.0
            return sum(mass(child, depth + 1) for child in node.values()) / self.alphabet

        return abs(mass(self._trie, 0) - 1.0) < 1e-12


def build_packing(ifs: IfsModel, r: float) -> SymbolicPacking:
    """Words with ``lambda_w |Lambda| <= r < lambda_{w-} |Lambda|``, built depth first."""
    if ifs.ratios is None:
        raise ValueError("symbolic packings need similarity ratios for every map")
    diam = ifs.diameter_bound
    if r <= 0:
        raise ValueError("radius must be positive")
    if r >= diam:
        raise ValueError(f"radius {r} >= diameter bound {diam}: the packing would be the empty word")
    threshold = r * (1 + _PRODUCT_RTOL)
    words: list[Word] = []
    stack: list[tuple[Word, float]] = [((), diam)]
    while stack:
        w, size = stack.pop()
        for s in range(ifs.size - 1, -1, -1):
            child = size * ifs.ratios[s]
            if child <= threshold:
                words.append(w + (s,))
            else:
                stack.append((w + (s,), child))
    return SymbolicPacking.from_words(words, ifs.size, r)


def uniform_packing(alphabet: int, depth: int) -> SymbolicPacking:
    """All words of one fixed length."""
    return SymbolicPacking.from_words(itertools.product(range(alphabet), repeat=depth), alphabet)


def packing_transition(pk: SymbolicPacking, state: Sequence[int], next_symbol: int) -> Word:
    """Packing word that prefixes ``next_symbol`` followed by ``state``."""
    return pk.lookup((next_symbol,) + tuple(state))
