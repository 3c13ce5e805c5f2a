"""Monte Carlo driver: single trials, success-rate sweeps, threshold bisection.

Seed discipline: every random object in a trial is drawn from
``derive_seed(trial_seed, tag)``, a 64-bit BLAKE2b hash of the trial seed
and a fixed tag. Trial seeds inside a sweep are ``derive_seed(base_seed,
"C=<value>", index)``, so any single trial can be rerun on its own and
results do not depend on how trials are spread over workers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .comb import CombEmbedding, assemble_paths, find_spine, verify_embedding
from .graph import Graph, LayeredGraph, sample_gnp, sample_layers
from .matching import block_matchings
from .params import Mode, ParamSet, derive_params
from .partition import (FillInfeasible, PartitionFailure, PartitionState, Phase, compute_barred,
                        compute_deficient, fill_in, first_step, repair)

log = logging.getLogger(__name__)

OUTCOMES = ("success", "stuck_in_repair", "fill_infeasible", "matching_deficient",
            "spine_failure")

WILSON_Z = 1.959963984540054


def derive_seed(*parts) -> int:
    h = hashlib.blake2b(repr(parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class TrialConfig:
    n: int
    k: int
    C: float | None = None
    mode: Mode = "engineering"
    D: float = 3.0
    alpha: float | None = None
    T: int | None = None
    p: float | None = None
    full_comb: bool = False
    spine_d: float = 5.0

    def params(self) -> ParamSet:
        if self.mode == "paper":
            return derive_params(self.n, self.k, self.D, "paper")
        return derive_params(self.n, self.k, self.D, "engineering", C=self.C, T=self.T,
                             alpha=self.alpha, p=self.p)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialGraphs:
    layers: LayeredGraph
    spine_layer: Graph | None

    @property
    def witness(self) -> Graph:
        """Everything an embedding may use: the three layers plus the spine layer."""
        if self.spine_layer is None:
            return self.layers.union
        return self.layers.union.union(self.spine_layer)


def layer_probability(params: ParamSet) -> float:
    return min(max(params.p, 0.0), 1.0)


def sample_trial_graphs(config: TrialConfig, seed: int) -> TrialGraphs:
    params = config.params()
    layers = sample_layers(config.n, layer_probability(params), derive_seed(seed, "layers"))
    spine_layer = None
    if config.full_comb:
        spine_layer = sample_gnp(config.n, min(config.spine_d / config.n, 1.0),
                                 derive_seed(seed, "spine-layer"))
    return TrialGraphs(layers, spine_layer)


@dataclass(frozen=True)
class DevsCheck:
    """Which first-step deviation bounds held; ``None`` when not evaluable."""

    z_small: bool | None
    w_sizes: bool | None
    b_small: bool | None
    b_multiplicity: bool | None
    x_small: bool | None

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def all_hold(self) -> bool:
        return all(v is True for v in asdict(self).values())


@dataclass
class TrialRecord:
    seed: int
    config: dict
    params: dict
    outcome: str
    phase: str | None = None
    certificates: list = field(default_factory=list)
    failure: dict | None = None
    stats: dict = field(default_factory=dict)
    devs: dict | None = None
    embedding: dict | None = None
    runtime_ms: float = 0.0

    @property
    def success(self) -> bool:
        return self.outcome == "success"

    def to_dict(self, timing: bool = False, embedding: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("runtime_ms")
        if not embedding:
            d.pop("embedding")
        return d

    def to_json(self, timing: bool = False, embedding: bool = True, indent=None) -> str:
        return json.dumps(self.to_dict(timing, embedding), sort_keys=True, indent=indent)


def _stats(state: PartitionState | None, n: int) -> dict:
    if state is None:
        return {}
    k = state.k
    w_sizes = [w.bit_count() for w in state.W[1:]]
    b_sizes = [b.bit_count() for b in state.B[1:]] if state.barred_done else []
    x_sizes = [x.bit_count() for x in state.X.values()]
    return {
        "Z": state.Z.bit_count(),
        "W_sizes": w_sizes,
        "W_min": min(w_sizes) if w_sizes else None,
        "W_max": max(w_sizes) if w_sizes else None,
        "B_max": max(b_sizes) if b_sizes else 0,
        "B_multiplicity_max": state.max_b_multiplicity,
        "X_max": max(x_sizes) if x_sizes else 0,
        "X_total": sum(x_sizes),
        "repair_edges": len(state.repair_edges),
        "min_available": state.min_available,
        "min_available_nbrs": state.min_available_nbrs,
        "fill_augmentations": state.fill_augmentations,
        "k": k,
        "n": n,
    }


def check_devs(record: TrialRecord) -> DevsCheck:
    """Evaluate the five first-step deviation bounds on a recorded trial."""
    s, pr = record.stats, record.params
    if not s:
        return DevsCheck(None, None, None, None, None)
    n, m, k = pr["n"], pr["m"], pr["k"]
    eps, alpha, gamma, q = pr["eps"], pr["alpha"], pr["gamma"], pr["q"]
    w = s["W_sizes"]
    return DevsCheck(
        z_small=s["Z"] <= eps * n,
        w_sizes=all(gamma * m < x < (1 + eps) * alpha * m for x in w),
        b_small=s["B_max"] < eps * n,
        b_multiplicity=s["B_multiplicity_max"] <= eps * k,
        x_small=s["X_max"] < 2 * m * q + math.log(n),
    )


def devs_bounds(params: ParamSet) -> dict:
    """The numeric thresholds behind :func:`check_devs`, from parameters alone."""
    return {
        "Z_max": params.eps * params.n,
        "W_range": [params.gamma * params.m, (1 + params.eps) * params.alpha * params.m],
        "B_max": params.eps * params.n,
        "B_multiplicity_max": params.eps * params.k,
        "X_max": 2 * params.m * params.q + math.log(params.n),
        "q": params.q,
        "T": params.T,
    }


@dataclass
class PipelineResult:
    record: TrialRecord
    graphs: TrialGraphs
    roots: list[int] | None = None
    state: PartitionState | None = None
    matchings: list | None = None
    embedding: CombEmbedding | None = None


def fixed_graphs(g: Graph, full_comb: bool = False) -> TrialGraphs:
    """Use one graph as every layer (and as the spine layer in full-comb mode)."""
    return TrialGraphs(LayeredGraph.from_layers([g, g, g]), g if full_comb else None)


def run_pipeline(config: TrialConfig, seed: int, graphs: TrialGraphs | None = None) -> PipelineResult:
    """Run one trial and keep the intermediate objects alongside the record.

    ``graphs`` replaces the sampled layers; ``seed`` still drives the
    algorithm's own randomness.
    """
    t0 = time.perf_counter()
    params = config.params()
    rec = TrialRecord(seed=seed, config=config.to_dict(), params=params.to_dict(),
                      outcome="success")
    if graphs is None:
        graphs = sample_trial_graphs(config, seed)
    elif config.full_comb and graphs.spine_layer is None:
        raise ValueError("full-comb mode needs a spine layer")
    res = PipelineResult(rec, graphs)
    m, k = params.m, config.k

    if config.full_comb:
        spine = find_spine(graphs.spine_layer, m, seed=derive_seed(seed, "spine-search"))
        if spine is None:
            rec.outcome = "spine_failure"
            rec.runtime_ms = (time.perf_counter() - t0) * 1e3
            return res
        roots = spine
    else:
        roots = list(range(m))
    res.roots = roots

    g1, g2, _ = graphs.layers.layers
    state = None
    try:
        state = first_step(g1, roots, params, derive_seed(seed, "first-step"))
        if state.phase != Phase.FILLED:
            compute_barred(g1, state, params)
            compute_deficient(g1, state, params)
            repair(g2, state, params)
            fill_in(state, params)
    except PartitionFailure as exc:
        state = exc.state
        rec.outcome = exc.outcome
        rec.failure = exc.to_dict()
        if isinstance(exc, FillInfeasible):
            rec.certificates = [{"kind": "fill_in", "violator": sorted(exc.violator),
                                 "blocks": sorted(exc.blocks)}]
    res.state = state
    rec.phase = state.phase.value
    rec.stats = _stats(state, config.n)
    rec.devs = check_devs(rec).to_dict()

    if rec.outcome == "success":
        blocks = state.blocks()
        outcomes = block_matchings(graphs.layers.union, blocks)
        res.matchings = outcomes
        bad = [(i, mo) for i, mo in enumerate(outcomes, start=1) if not mo.perfect]
        if bad:
            rec.outcome = "matching_deficient"
            rec.certificates = [{"kind": "block_matching", "blocks": [i - 1, i],
                                 "violator": sorted(mo.violator),
                                 "violator_nbrs": sorted(mo.violator_nbrs)} for i, mo in bad]
        else:
            emb = assemble_paths(blocks, outcomes)
            if config.full_comb:
                emb = emb.with_spine()
            verdict = verify_embedding(graphs.witness, emb, roots, k,
                                       require_spine=config.full_comb)
            if not verdict:
                raise AssertionError(f"assembled embedding failed verification: {verdict.reason}")
            res.embedding = emb
            rec.embedding = emb.to_dict()
    rec.runtime_ms = (time.perf_counter() - t0) * 1e3
    return res


def run_trial(config: TrialConfig, seed: int) -> TrialRecord:
    """One end-to-end run; every failure mode is an outcome, not an exception."""
    return run_pipeline(config, seed).record


def reverify(record: TrialRecord) -> bool:
    """Resample the record's graphs from its seed and re-check its embedding."""
    if record.embedding is None:
        return False
    config = TrialConfig(**record.config)
    graphs = sample_trial_graphs(config, record.seed)
    emb = CombEmbedding.from_dict(record.embedding)
    return bool(verify_embedding(graphs.witness, emb, emb.roots, config.k,
                                 require_spine=config.full_comb))


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class SweepPoint:
    n: int
    k: int
    C: float
    trials: int
    successes: int
    freq: float
    lo: float
    hi: float
    outcomes: dict = field(default_factory=dict, compare=False)

    CSV_FIELDS = ("n", "k", "C", "trials", "successes", "freq", "lo", "hi")

    def csv_row(self) -> list:
        return [self.n, self.k, self.C, self.trials, self.successes,
                f"{self.freq:.6f}", f"{self.lo:.6f}", f"{self.hi:.6f}"]


@dataclass(frozen=True)
class SweepReport:
    points: tuple[SweepPoint, ...]

    def freqs(self) -> list[float]:
        return [p.freq for p in self.points]

    def to_csv(self) -> str:
        import csv
        import io
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SweepPoint.CSV_FIELDS)
        for p in self.points:
            w.writerow(p.csv_row())
        return buf.getvalue()


def _trial_task(args) -> tuple[str, dict]:
    config, seed = args
    rec = run_trial(config, seed)
    return rec.outcome, rec.stats


def _run_many(tasks: Sequence[tuple[TrialConfig, int]], workers: int) -> list[str]:
    if workers <= 1 or len(tasks) <= 1:
        return [run_trial(c, s).outcome for c, s in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [o for o, _ in pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * workers)))]


def _point(config: TrialConfig, outcomes: list[str]) -> SweepPoint:
    succ = sum(o == "success" for o in outcomes)
    lo, hi = wilson_interval(succ, len(outcomes))
    counts = {o: outcomes.count(o) for o in OUTCOMES if o in outcomes}
    return SweepPoint(config.n, config.k, config.C, len(outcomes), succ,
                      succ / len(outcomes) if outcomes else 0.0, lo, hi, counts)


def sweep_seed(base_seed: int, C: float, index: int) -> int:
    return derive_seed(base_seed, f"C={float(C)!r}", index)


def sweep(base: TrialConfig, C_grid: Sequence[float], trials: int, base_seed: int,
          workers: int = 1) -> SweepReport:
    """Success frequency at each ``C`` in the grid, sorted by ``C``."""
    if not C_grid:
        raise ValueError("empty C grid")
    grid = sorted(float(c) for c in C_grid)
    tasks = [(replace(base, C=c), sweep_seed(base_seed, c, t)) for c in grid for t in range(trials)]
    outcomes = _run_many(tasks, workers)
    points = []
    for idx, c in enumerate(grid):
        chunk = outcomes[idx * trials:(idx + 1) * trials]
        points.append(_point(replace(base, C=c), chunk))
        log.info("C=%g: %d/%d", c, points[-1].successes, trials)
    return SweepReport(tuple(points))


class ThresholdError(RuntimeError):
    pass


@dataclass(frozen=True)
class ThresholdEstimate:
    lo: float
    hi: float
    target: float
    probes: tuple[tuple[float, float, int], ...]

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "target": self.target,
                "probes": [{"C": c, "freq": f, "trials": t} for c, f, t in self.probes]}


def estimate_threshold(base: TrialConfig, target: float, trials: int, tolerance: float,
                       base_seed: int, lo: float = 0.0, hi: float = 16.0,
                       max_doublings: int = 6, workers: int = 1) -> ThresholdEstimate:
    """Bisect over ``C`` for the constant where success frequency crosses ``target``.

    The bracket keeps ``freq(lo) < target <= freq(hi)``. Each probe uses its
    own seeds. If ``hi`` does not reach the target it is doubled up to
    ``max_doublings`` times before giving up.
    """
    if not 0 < target < 1:
        raise ValueError("target must lie strictly between 0 and 1")
    if not lo < hi:
        raise ValueError("need lo < hi")
    if hi - lo <= tolerance:
        return ThresholdEstimate(lo, hi, target, ())
    probes: list[tuple[float, float, int]] = []

    def freq(c: float) -> float:
        idx = len(probes)
        tasks = [(replace(base, C=c), derive_seed(base_seed, "probe", idx, t)) for t in range(trials)]
        outs = _run_many(tasks, workers)
        f = sum(o == "success" for o in outs) / trials
        probes.append((c, f, trials))
        log.info("probe C=%g freq=%.3f", c, f)
        return f

    if freq(lo) >= target:
        raise ThresholdError(f"success frequency at lower end C={lo} already reaches {target}")
    for _ in range(max_doublings + 1):
        if freq(hi) >= target:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ThresholdError(f"no C up to {hi / 2} reached success frequency {target}")
    while hi - lo >= tolerance:
        mid = 0.5 * (lo + hi)
        if freq(mid) >= target:
            hi = mid
        else:
            lo = mid
    return ThresholdEstimate(lo, hi, target, tuple(probes))
