"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that the conftest prints in the
terminal summary.
"""

import json
import math
import subprocess
import sys
import time
from functools import lru_cache
from itertools import combinations

import numpy as np
import pytest

from combembed.comb import CombEmbedding, brute_force_contains_comb, is_simple_path, verify_embedding
from combembed.graph import sample_gnp
from combembed.harness import TrialConfig, derive_seed, fixed_graphs, run_pipeline, sweep
from combembed.matching import BipartiteInstance, max_matching
from combembed.params import bernstein_tail, derive_params
from combembed.partition import filled_violations

BASE_SEED = 2024

# Criterion 4 calibration: (n=3000, k=6), 50 trials per point, sweep seed 2024.
CALIBRATION_GRID = (4.0, 8.0, 12.0, 16.0)
CALIBRATION_FREQS = (1.00, 0.72, 0.64, 0.48)
PIN_TOLERANCE = 0.05


@pytest.fixture(scope="module")
def calibration_sweep():
    t0 = time.perf_counter()
    report = sweep(TrialConfig(3000, 6), CALIBRATION_GRID, 50, BASE_SEED)
    return report, time.perf_counter() - t0


@pytest.fixture
def criterion(record_property):
    class Verdict:
        def __call__(self, num):
            record_property("criterion", num)
            return self

        def detail(self, text):
            record_property("detail", text)

    return Verdict()


# --- 1 ----------------------------------------------------------------------

def _brute_max(inst):
    @lru_cache(maxsize=None)
    def best(i, used):
        if i == inst.left_size:
            return 0
        out = best(i + 1, used)
        for y in inst.adj[i]:
            if not used >> y & 1:
                out = max(out, 1 + best(i + 1, used | 1 << y))
        return out

    return best(0, 0)


def _check_matching(inst):
    out = max_matching(inst)
    if out.size != _brute_max(inst):
        return False
    if not out.perfect and len(inst.neighborhood(out.violator)) >= len(out.violator):
        return False
    return True


def test_criterion_1_matching_oracle(criterion):
    c = criterion(1)
    t0 = time.perf_counter()
    checked = bad = 0
    for nl in range(5):
        for nr in range(5):
            cells = [(x, y) for x in range(nl) for y in range(nr)]
            for bits in range(1 << len(cells)):
                adj = [[] for _ in range(nl)]
                for b, (x, y) in enumerate(cells):
                    if bits >> b & 1:
                        adj[x].append(y)
                checked += 1
                bad += not _check_matching(BipartiteInstance.from_lists(nl, nr, adj))
    rng = np.random.default_rng(BASE_SEED)
    for _ in range(500):
        nl, nr = (int(v) for v in rng.integers(0, 13, size=2))
        dens = rng.random()
        adj = [[y for y in range(nr) if rng.random() < dens] for _ in range(nl)]
        checked += 1
        bad += not _check_matching(BipartiteInstance.from_lists(nl, nr, adj))
    elapsed = time.perf_counter() - t0
    c.detail(f"{checked} instances, {bad} mismatches, {elapsed:.1f}s (limit 10s)")
    assert bad == 0
    assert elapsed < 10


# --- 2 ----------------------------------------------------------------------

def _divisors(n):
    return [d for d in range(1, n + 1) if n % d == 0]


def test_criterion_2_comb_oracle(criterion):
    c = criterion(2)
    t0 = time.perf_counter()
    runs = successes = rejected_naive = 0
    problems = []
    for n in (4, 6, 8):
        for p in (0.3, 0.6):
            graphs = [sample_gnp(n, p, derive_seed(BASE_SEED, "comb-oracle", n, p, i))
                      for i in range(200)]
            for k in _divisors(n):
                cfg = TrialConfig(n, k, p=p, full_comb=True, spine_d=p * n)
                for i, g in enumerate(graphs):
                    res = run_pipeline(cfg, derive_seed(BASE_SEED, "run", n, p, k, i),
                                       graphs=fixed_graphs(g, full_comb=True))
                    rec = res.record
                    runs += 1
                    if rec.outcome == "success":
                        successes += 1
                        emb = CombEmbedding.from_dict(rec.embedding)
                        if not brute_force_contains_comb(g, k):
                            problems.append(("oracle says no comb", n, k, p, i))
                        if not verify_embedding(g, emb, res.roots, k, require_spine=True):
                            problems.append(("verify rejected a success", n, k, p, i))
                    elif rec.outcome == "matching_deficient":
                        # Pair blocks in order: some consecutive pair has no
                        # perfect matching, so this candidate must be rejected.
                        blocks = res.state.blocks()
                        naive = CombEmbedding(tuple(zip(*blocks)), tuple(blocks[0])).with_spine()
                        if verify_embedding(g, naive, res.roots, k, require_spine=True):
                            problems.append(("verify accepted a non-embedding", n, k, p, i))
                        else:
                            rejected_naive += 1
    elapsed = time.perf_counter() - t0
    c.detail(f"{runs} runs, {successes} successes confirmed, {rejected_naive} deficient "
             f"candidates rejected, {len(problems)} problems, {elapsed:.1f}s (limit 60s)")
    assert problems == []
    assert elapsed < 60


# --- 3 ----------------------------------------------------------------------

def test_criterion_3_partition_invariants(criterion):
    c = criterion(3)
    t0 = time.perf_counter()
    cfg = TrialConfig(3000, 6, C=10.0)
    filled = 0
    violations = []
    for t in range(200):
        res = run_pipeline(cfg, derive_seed(BASE_SEED, "invariants", t))
        if res.state is None or res.record.phase != "filled":
            continue
        filled += 1
        g1 = res.graphs.layers.layers[0]
        violations += filled_violations(g1, res.state)
    elapsed = time.perf_counter() - t0
    c.detail(f"{filled}/200 trials filled, {len(violations)} violations, "
             f"{elapsed:.0f}s (limit 300s)")
    assert violations == []
    assert elapsed < 300


# --- 4 ----------------------------------------------------------------------

def _pooled_se(f1, f2, trials):
    pbar = (f1 + f2) / 2
    return math.sqrt(pbar * (1 - pbar) * 2 / trials)


def test_criterion_4_monotone_in_C(criterion, calibration_sweep):
    c = criterion(4)
    report, elapsed = calibration_sweep
    freqs = report.freqs()
    trials = report.points[0].trials
    drops = [(CALIBRATION_GRID[a], CALIBRATION_GRID[b])
             for a, b in combinations(range(len(freqs)), 2)
             if freqs[b] < freqs[a] - 2 * _pooled_se(freqs[a], freqs[b], trials)]
    gap = freqs[-1] - freqs[0]
    pin_ok = all(abs(f - g) <= PIN_TOLERANCE for f, g in zip(freqs, CALIBRATION_FREQS))
    c.detail(f"freqs {[round(f, 2) for f in freqs]} at C={list(CALIBRATION_GRID)}; "
             f"pin {'ok' if pin_ok else 'MOVED'}; decreases beyond 2 SE: {drops}; "
             f"f(16)-f(4)={gap:+.2f} (need >= 0.2); {elapsed:.0f}s (limit 600s)")
    assert pin_ok
    assert drops == []
    assert gap >= 0.2
    assert elapsed < 600


def test_calibration_frequencies_pinned(calibration_sweep):
    report, _ = calibration_sweep
    assert [p.C for p in report.points] == list(CALIBRATION_GRID)
    for got, want in zip(report.freqs(), CALIBRATION_FREQS):
        assert abs(got - want) <= PIN_TOLERANCE


# --- 5 ----------------------------------------------------------------------

EXACT_GRID = [(67 * 10**9, 67), (68 * 10**9, 68), (70 * 10**10, 70), (72 * 10**11, 72),
              (80 * 10**12, 80)]


def test_criterion_5_parameter_arithmetic(criterion):
    c = criterion(5)
    t0 = time.perf_counter()
    eps_true = 1 / (3 * (10 + math.log(3)))
    ps = derive_params(300_000, 6, 3.0, "paper")
    assert abs(ps.eps - eps_true) < 1e-9
    assert abs(ps.C - 600 / eps_true) < 1e-6
    checked = 0
    for n, k in EXACT_GRID:
        ps = derive_params(n, k, 3.0, "paper")
        assert ps.preconditions.all_hold, (n, k)
        assert ps.mp > 6000 and ps.T >= 1000 and ps.c >= 6
        checked += 1
    for n, k in [(300_000, 6), (3000, 6), (600, 3)]:
        for C in (8.0, 10.0, 50.0):
            ps = derive_params(n, k, 3.0, "engineering", C=C)
            if ps.T >= 1:
                assert ps.c >= 6
                checked += 1
    elapsed = time.perf_counter() - t0
    c.detail(f"eps err {abs(derive_params(300_000, 6).eps - eps_true):.1e}, "
             f"{checked} parameter points, {elapsed * 1e3:.0f}ms (limit 1s)")
    assert elapsed < 1


# --- 6 ----------------------------------------------------------------------

def test_criterion_6_bernstein_dominance(criterion):
    c = criterion(6)
    t0 = time.perf_counter()
    samples = 100_000
    worst = -math.inf
    fails = []
    for m, rho in [(50, 0.2), (200, 0.5), (1000, 0.05)]:
        rng = np.random.default_rng(derive_seed(BASE_SEED, "bernstein", m, rho) % 2**63)
        x = rng.binomial(m, rho, size=samples)
        sigma = math.sqrt(m * rho * (1 - rho))
        for mult in (2, 5, 10):
            t = mult * sigma
            bound = bernstein_tail(m, rho, t)
            freq = float(np.mean(np.abs(x - m * rho) > t))
            limit = bound + 4 * math.sqrt(bound / samples) + 1e-3
            worst = max(worst, freq - limit)
            if freq > limit:
                fails.append((m, rho, mult, freq, limit))
    elapsed = time.perf_counter() - t0
    c.detail(f"9 cases, {len(fails)} above bound, worst margin {worst:+.3f}, "
             f"{elapsed:.1f}s (limit 30s)")
    assert fails == []
    assert elapsed < 30


# --- 7 ----------------------------------------------------------------------

def _cli(*args):
    res = subprocess.run([sys.executable, "-m", "combembed", *args], capture_output=True,
                         text=True, check=True)
    return res.stdout


def test_criterion_7_determinism(criterion):
    c = criterion(7)
    t0 = time.perf_counter()
    invocations = [
        ("trial", "--n", "3000", "--k", "6", "--C", "10", "--seed", "5", "--embedding"),
        ("trial", "--n", "600", "--k", "3", "--p", "1", "--seed", "3", "--embedding"),
        ("trial", "--n", "600", "--k", "3", "--C", "12", "--seed", "1", "--full-comb",
         "--embedding"),
    ]
    same = 0
    for args in invocations:
        a, b = _cli(*args), _cli(*args)
        json.loads(a)
        same += a == b
    sweep_args = ("sweep", "--n", "600", "--k", "3", "--T", "0", "--C-grid", "0.8,1.2",
                  "--trials", "8", "--seed", "11")
    w1 = _cli(*sweep_args, "--workers", "1")
    w2 = _cli(*sweep_args, "--workers", "2")
    elapsed = time.perf_counter() - t0
    c.detail(f"{same}/{len(invocations)} trial outputs identical, sweep "
             f"{'identical' if w1 == w2 else 'DIFFERS'} across workers, "
             f"{elapsed:.1f}s (limit 60s)")
    assert same == len(invocations)
    assert w1 == w2
    assert elapsed < 60


# --- 8 ----------------------------------------------------------------------

def test_criterion_8_full_comb(criterion):
    c = criterion(8)
    t0 = time.perf_counter()
    cfg = TrialConfig(3000, 6, C=12.0, full_comb=True, spine_d=5.0)
    counts: dict[str, int] = {}
    problems = []
    for t in range(50):
        res = run_pipeline(cfg, derive_seed(BASE_SEED, "full-comb", t))
        rec = res.record
        counts[rec.outcome] = counts.get(rec.outcome, 0) + 1
        if rec.outcome == "spine_failure":
            if rec.phase is not None or res.roots is not None:
                problems.append(("spine failure reached the partition", t))
            continue
        if not is_simple_path(res.graphs.spine_layer, res.roots):
            problems.append(("roots are not a spine path", t))
        if rec.outcome == "success":
            emb = CombEmbedding.from_dict(rec.embedding)
            if not verify_embedding(res.graphs.witness, emb, res.roots, 6, require_spine=True):
                problems.append(("success failed verification", t))
        elif rec.phase is None:
            problems.append(("partition failure without a phase", t))
    elapsed = time.perf_counter() - t0
    c.detail(f"outcomes {dict(sorted(counts.items()))}, {len(problems)} problems, "
             f"{elapsed:.0f}s (limit 600s)")
    assert problems == []
    assert elapsed < 600
