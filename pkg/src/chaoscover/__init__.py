"""Chaos-game cover times, Bernoulli measures on self-affine carpets, and their dimension optimiser."""

__version__ = "0.1.0"

from .symbolic import (  # noqa: E402
    AffineMap,
    IfsModel,
    SymbolicPacking,
    build_packing,
    cantor_ifs,
    bernoulli_convolution_ifs,
    make_ifs,
    natural_project,
    packing_transition,
    similarity_ifs,
    word_length_bound,
)
from .measures import BernoulliDriver, MarkovDriver, estimate_decay_constants, pushforward_sample  # noqa: E402
from .carpet import (  # noqa: E402
    CarpetSpec,
    TABLE1_CARPETS,
    NONUNIQUE_CARPET,
    dim_measure,
    dim_set,
    optimize,
    reduce_params,
)
from .engine import CarpetTracker, PackingTracker, cover_time_mc, hitting_time_mc  # noqa: E402
