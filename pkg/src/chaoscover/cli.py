"""Command-line front end.

    python -m chaoscover --experiment table1 --out results/
    python -m chaoscover --config runs/table2.toml --trials 400 --seed 7

Each run writes CSV/JSON-lines artifacts plus ``manifest.json`` into ``--out``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    exact_hitting_expectations,
    matthews_bounds,
    minkowski_dim_estimate,
    oracle_exact_cover_expectation,
    oracle_grid_alpha,
    oracle_min_square,
    slope_fit,
)
from .carpet import (
    CEIL,
    FLOOR,
    TABLE1_CARPETS,
    alpha_of_q,
    classify,
    dim_measure,
    dim_set,
    lift_q_to_p,
    max_local_dimension,
    mcmullen_vector,
    min_square_measure,
    optimize,
    reduce_params,
    square_count,
    threshold_AK,
    vector_QK,
    vector_qK,
)
from .config import ConfigError, ExperimentConfig
from .engine import (
    CarpetTracker,
    PackingTracker,
    ProductDriver,
    StepCeilingReached,
    RecordingSource,
    cover_steps_from_source,
    chaos_orbit_from_symbols,
    cover_time_mc,
    hitting_time_mc,
    target_mask_for_word,
    trial_rng,
)
from .measures import BernoulliDriver
from .svg import SvgStyle, emit_svg_points
from .symbolic import build_packing, cantor_ifs

TABLE2_REFERENCE_LEVELS = (6, 9)


class ArtifactWriter:
    """Writes artifacts into one directory and tags each with the config hash."""

    def __init__(self, out: Path, cfg: ExperimentConfig):
        self.out = out
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def _register(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        path = self._register(name)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
        return path

    def jsonl(self, name: str, records: list[dict]) -> Path:
        path = self._register(name)
        lines = [json.dumps(dict(r, config_hash=self.hash), sort_keys=True, default=_json_default) for r in records]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    def provenance(self, op: str, **kw) -> str:
        parts = [op] + [f"{k}={v}" for k, v in kw.items()] + [f"config={self.hash}"]
        return ";".join(parts)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o)}")


# --------------------------------------------------------------------------
# experiments


def _table1_row(name, c):
    rp = reduce_params(c)
    q1 = vector_qK(rp, 1)
    a_q1 = alpha_of_q(rp, q1)
    a_q2 = alpha_of_q(rp, vector_qK(rp, 2)) if rp.M0 >= 2 else math.nan
    regime, idx = classify(rp, 1) if rp.M0 >= 2 else ("qK", 1)
    # the Q_1 column is only meaningful inside its regime
    a_Q1 = alpha_of_q(rp, vector_QK(rp, 1)) if rp.M0 >= 2 and regime == "QK" else None
    opt = optimize(rp)
    return {
        "carpet": name,
        "R": list(rp.multiplicities),
        "N": list(rp.heights),
        "m": rp.m,
        "n": rp.n,
        "alpha_q1": a_q1,
        "alpha_Q1": a_Q1,
        "alpha_q2": a_q2,
        "dim_set": dim_set(rp),
        "A1": threshold_AK(rp, 1) if rp.M0 >= 2 else None,
        "regime": f"{opt.regime}{opt.K}",
        "alpha_star": opt.alpha,
    }


def run_table1(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    header = ["carpet", "m", "n", "R", "N", "alpha_q1", "alpha_Q1", "alpha_q2", "dim_M", "A1", "regime",
              "alpha_star", "provenance"]
    rows, records = [], []
    for name, c in TABLE1_CARPETS.items():
        r = _table1_row(name, c)
        records.append(r)

        def f5(x):
            return "--" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.5f}"

        rows.append([name, r["m"], r["n"], " ".join(map(str, r["R"])), " ".join(map(str, r["N"])),
                     f5(r["alpha_q1"]), f5(r["alpha_Q1"]), f5(r["alpha_q2"]), f5(r["dim_set"]), f5(r["A1"]),
                     r["regime"], f5(r["alpha_star"]), w.provenance("alpha_of_q+optimize", carpet=name)])
    w.csv("table1.csv", header, rows)
    w.jsonl("table1.jsonl", records)


def table2_vectors(rp):
    """The five Table 2 drivers: four map vectors plus the uniform two-dimensional pair."""
    vecs = {
        "p_1": lift_q_to_p(rp, vector_qK(rp, 1)),
        "P_1": lift_q_to_p(rp, vector_QK(rp, 1)),
        "p_2": lift_q_to_p(rp, vector_qK(rp, 2)),
        "p_hat": mcmullen_vector(rp),
    }
    return vecs, (np.full(rp.N, 1 / rp.N), np.full(rp.M, 1 / rp.M))


def run_table2(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    c = cfg.system.carpet() if cfg.system.kind == "carpet" else TABLE1_CARPETS["row2"]
    rp = reduce_params(c)
    vecs, (pt, qt) = table2_vectors(rp)
    header = ["convention", "K", "L", "squares", "vector", "trials", "mean", "stderr", "min", "max", "provenance"]
    rows, records = [], []
    for conv in (FLOOR, CEIL):
        for K in cfg.levels:
            for label in list(vecs) + ["p_tilde,q_tilde"]:
                if label in vecs:
                    drv, tr = BernoulliDriver(vecs[label]), CarpetTracker(rp, K, conv)
                else:
                    drv, tr = ProductDriver(pt, qt), CarpetTracker(rp, K, conv, two_dim=True)
                st = cover_time_mc(drv, tr, cfg.trials, cfg.seed, cfg.threads, cfg.step_ceiling)
                rows.append([conv, K, tr.L, tr.size, label, st.trials, st.mean, st.stderr, st.min, st.max,
                             w.provenance("cover_time_mc", seed=cfg.seed, trials=cfg.trials)])
                records.append({"convention": conv, "K": K, "L": tr.L, "vector": label, **st.to_record()})
    w.csv("table2.csv", header, rows)
    w.jsonl("table2.jsonl", records)


def run_dim(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    drv = cfg.driver.build(cfg.system.alphabet())
    records = []
    if cfg.system.kind == "carpet":
        rp = reduce_params(cfg.system.carpet())
        if not isinstance(drv, BernoulliDriver):
            raise ConfigError("carpet dimension formulas need a Bernoulli driver")
        records.append({"kind": "closed-form", "dim_measure": dim_measure(rp, drv.weights), "dim_set": dim_set(rp),
                        "max_local_dimension": max_local_dimension(rp, drv.weights), "p": drv.weights})
    if cfg.radii:
        rng, seed = trial_rng(cfg.seed, 0)
        est = minkowski_dim_estimate(cfg.system.ifs(), drv, sorted(cfg.radii, reverse=True), cfg.samples,
                                     cfg.probes, rng)
        for e in est:
            records.append({"kind": "empirical", "radius": e.radius, "estimate": e.estimate,
                            "min_count": e.min_count, "reliable": e.reliable, "seed": seed})
    if not records:
        raise ConfigError("dim on a non-carpet system needs radii")
    w.jsonl("dim.jsonl", records)


def run_optimize(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    rp = reduce_params(cfg.system.carpet())
    res = optimize(rp)
    rec = res.to_record()
    rec["dim_measure_at_p_star"] = dim_measure(rp, res.p_star)
    rec["thresholds"] = [threshold_AK(rp, K) for K in range(1, rp.M0)]
    rec["candidates"] = [{"K": K, "regime": reg, "index": idx, "alpha": a} for K, reg, idx, a in res.candidates]
    w.jsonl("optimize.jsonl", [rec])


def _trackers(cfg: ExperimentConfig):
    """(scale label, r, tracker) triples from levels (carpets) or radii (similarity systems)."""
    if cfg.system.kind == "carpet":
        rp = reduce_params(cfg.system.carpet())
        for K in cfg.levels:
            yield K, float(rp.m) ** -K, CarpetTracker(rp, int(K), cfg.convention)
    else:
        if not cfg.radii:
            raise ConfigError("symbolic trackers need radii")
        ifs = cfg.system.ifs()
        for r in sorted(cfg.radii, reverse=True):
            yield r, float(r), PackingTracker(build_packing(ifs, r))


def run_cover_time(cfg: ExperimentConfig, w: ArtifactWriter) -> list[tuple[float, float]]:
    drv = cfg.driver.build(cfg.system.alphabet())
    trial_rows, records, samples = [], [], []
    for scale, r, tr in _trackers(cfg):
        st = cover_time_mc(drv, tr, cfg.trials, cfg.seed, cfg.threads, cfg.step_ceiling)
        prov = w.provenance("cover_time_mc", seed=cfg.seed)
        for i, (steps, seed) in enumerate(zip(st.steps, st.seeds)):
            trial_rows.append([scale, i, seed, steps, prov])
        records.append({"scale": scale, "r": r, "cells": tr.size, **tr.metadata(), **st.to_record()})
        samples.append((r, st.mean))
    w.csv("cover_trials.csv", ["scale", "trial", "seed", "steps", "provenance"], trial_rows)
    w.jsonl("cover_time.jsonl", records)
    return samples


def run_slope(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    samples = run_cover_time(cfg, w)
    fit = slope_fit(samples)
    rec = fit.to_record()
    if cfg.system.kind == "carpet":
        drv = cfg.driver.build(cfg.system.alphabet())
        rec["reference_dim_measure"] = dim_measure(reduce_params(cfg.system.carpet()), drv.weights)
    w.jsonl("slope.jsonl", [rec])


def run_hitting_time(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    if cfg.target is None:
        raise ConfigError("hitting-time needs a target word")
    drv = cfg.driver.build(cfg.system.alphabet())
    records = []
    for scale, r, tr in _trackers(cfg):
        mask = target_mask_for_word(tr, cfg.target)
        st = hitting_time_mc(drv, tr, mask, cfg.trials, cfg.seed, cfg.threads, cfg.step_ceiling)
        records.append({"scale": scale, "target": list(cfg.target), **tr.metadata(), **st.to_record()})
    w.jsonl("hitting_time.jsonl", records)


def run_orbit(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    c = cfg.system.carpet()
    rp = reduce_params(c)
    ifs = c.ifs()
    if cfg.orbit_vectors is None:
        vectors = [lift_q_to_p(rp, vector_QK(rp, 1)) if rp.M0 >= 2 else lift_q_to_p(rp, vector_qK(rp, 1)),
                   lift_q_to_p(rp, vector_qK(rp, 1)), np.array([0.6, 0.25, 0.15])]
    else:
        vectors = [np.asarray(v, dtype=float) for v in cfg.orbit_vectors]
    x0 = np.array(cfg.orbit_start if cfg.orbit_start is not None else [1.0, 1.0])
    A, b = ifs.linear_stack, ifs.translation_stack
    # the first vector's game sets the step budget
    rng, seed0 = trial_rng(cfg.seed, 0)
    tr = CarpetTracker(rp, cfg.orbit_level, cfg.convention)
    src = RecordingSource(BernoulliDriver(vectors[0]).stream(rng))
    steps = cover_steps_from_source(tr, src, cfg.step_ceiling)
    records = []
    for k, p in enumerate(vectors):
        if k == 0:
            syms, seed = src.symbols()[:steps], seed0
        else:
            rng, seed = trial_rng(cfg.seed, k)
            syms = BernoulliDriver(p).stream(rng).draw(steps)
        pts = np.vstack([x0[None, :], chaos_orbit_from_symbols(A, b, x0, syms)])
        codes = tr.window_codes(syms)
        visited = int(np.unique(codes).size)
        name = f"orbit_{k}"
        w.csv(f"{name}.csv", ["step", "x", "y"], [[i, float(x), float(y)] for i, (x, y) in enumerate(pts)])
        style = SvgStyle(size=cfg.svg_size, radius=cfg.svg_radius,
                         comment=f"config {w.hash}; vector {np.round(p, 6).tolist()}; steps {steps}")
        emit_svg_points(w.out / f"{name}.csv", w._register(f"{name}.svg"), style)
        records.append({"orbit": name, "p": p, "steps": steps, "level": cfg.orbit_level,
                        "squares_visited": visited, "squares": tr.size, "seed": seed})
    w.jsonl("orbit.jsonl", records)


def run_oracle(cfg: ExperimentConfig, w: ArtifactWriter) -> None:
    records = []
    ifs = cantor_ifs()
    fair = BernoulliDriver([0.5, 0.5])
    pk = build_packing(ifs, 3.0**-2)
    exact = oracle_exact_cover_expectation(fair, pk)
    hit = exact_hitting_expectations(fair, pk)
    mb = matthews_bounds(float(hit.min()), float(hit.max()), len(pk))
    st = cover_time_mc(fair, PackingTracker(pk), cfg.trials, cfg.seed, cfg.threads)
    records.append({"oracle": "exact_cover", "cells": len(pk), "exact": exact, "hitting": hit,
                    "matthews_lower": mb.lower, "matthews_upper": mb.upper, **st.to_record()})
    for name, c in TABLE1_CARPETS.items():
        rp = reduce_params(c)
        g = oracle_grid_alpha(rp, cfg.grid_delta)
        records.append({"oracle": "grid_alpha", "carpet": name, "alpha_grid": g.alpha_grid,
                        "alpha_closed": optimize(rp).alpha, "slack": g.slack, "q_grid": g.q_grid})
        p = lift_q_to_p(rp, vector_qK(rp, 1))
        for K in cfg.levels:
            if square_count(rp, K) <= 10**7:
                sq, m = oracle_min_square(rp, p, K)
                records.append({"oracle": "min_square", "carpet": name, "K": K, "oracle_measure": m,
                                "closed_form": min_square_measure(rp, p, K)})
    w.jsonl("oracle.jsonl", records)


RUNNERS = {
    "table1": run_table1,
    "table2": run_table2,
    "dim": run_dim,
    "optimize": run_optimize,
    "cover-time": run_cover_time,
    "slope": run_slope,
    "hitting-time": run_hitting_time,
    "orbit": run_orbit,
    "oracle": run_oracle,
}


def run(cfg: ExperimentConfig) -> Path:
    cfg.validate()
    out = Path(cfg.out)
    w = ArtifactWriter(out, cfg)
    t0 = time.perf_counter()
    RUNNERS[cfg.experiment](cfg, w)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "config_hash": w.hash,
        "seed": cfg.seed,
        "artifacts": w.files,
        "versions": {
            "chaoscover": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _scipy_version(),
        },
        "wall_time_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n",
                                       encoding="utf-8")
    return out


def _scipy_version() -> str:
    import scipy

    return scipy.__version__


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chaoscover", description="Chaos-game cover times and carpet dimensions.")
    ap.add_argument("--config", type=Path, help="TOML experiment config")
    ap.add_argument("--experiment", choices=sorted(RUNNERS), help="experiment kind (overrides config)")
    ap.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    ap.add_argument("--trials", type=int, help="Monte Carlo trials per setting")
    ap.add_argument("--out", type=str, help="output directory")
    ap.add_argument("--threads", type=int, help="worker processes for trials")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out) if args.out else None
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        for key in ("experiment", "seed", "trials", "out", "threads"):
            val = getattr(args, key)
            if val is not None:
                setattr(cfg, key, val)
        out_dir = Path(cfg.out)
        out = run(cfg)
    except (ConfigError, ValueError, StepCeilingReached, OSError) as exc:
        record = {"status": "error", "type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, StepCeilingReached):
            record["completed_trials"] = exc.completed_trials
        text = json.dumps(record, sort_keys=True)
        print(text, file=sys.stderr)
        if out_dir is not None:
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / "error.json").write_text(text + "\n", encoding="utf-8")
            except OSError:
                pass
        return 2
    except Exception as exc:  # noqa: BLE001
        record = {"status": "error", "type": type(exc).__name__, "message": str(exc),
                  "traceback": traceback.format_exc()}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 3
    print(json.dumps({"status": "ok", "out": str(out)}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
