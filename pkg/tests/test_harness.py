import json
import math

import pytest

from combembed.harness import (OUTCOMES, ThresholdError, TrialConfig, check_devs, derive_seed,
                               devs_bounds, estimate_threshold, reverify, run_pipeline,
                               run_trial, sweep, wilson_interval)
from combembed.params import derive_params

# T = 0 makes every degree condition vacuous, so only the final block
# matchings can fail; success then rises monotonically with C.
MATCHING_ONLY = TrialConfig(600, 3, T=0)


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a") != derive_seed(2, "a")
    assert 0 <= derive_seed(0) < 2**64


def test_zero_C_fails_at_the_matching_stage():
    rec = run_trial(TrialConfig(60, 3, C=0.0), 1)
    assert rec.outcome == "matching_deficient"
    cert = rec.certificates[0]
    assert cert["kind"] == "block_matching" and cert["violator_nbrs"] == []


def test_complete_layers_succeed_and_satisfy_devs():
    cfg = TrialConfig(600, 3, p=1.0)
    ps = cfg.params()
    assert ps.T <= ps.gamma * ps.m
    res = run_pipeline(cfg, 5)
    rec = res.record
    assert rec.outcome == "success" and rec.phase == "filled"
    assert reverify(rec)
    d = check_devs(rec)
    # p = 1 is outside the concentration regime, so |W_i| > gamma m is not checked here.
    assert d.z_small and d.b_small and d.b_multiplicity and d.x_small
    assert rec.stats["Z"] == 0 and rec.stats["X_total"] == 0


def test_empty_layers_violate_first_bound():
    rec = run_trial(TrialConfig(600, 3, p=0.0, T=1), 2)
    assert rec.stats["Z"] == 600 - 200
    assert check_devs(rec).z_small is False
    assert rec.outcome != "success"


def test_devs_bounds_exact_constants():
    ps = derive_params(300_000, 6, 3.0, "paper")
    b = devs_bounds(ps)
    assert b["Z_max"] == pytest.approx(ps.eps * 300_000)
    assert b["B_multiplicity_max"] == pytest.approx(6 * ps.eps)
    assert b["B_multiplicity_max"] < 1  # no vertex may be barred anywhere
    lo, hi = b["W_range"]
    assert lo == pytest.approx((1 - 3 * ps.eps) / 3 * ps.m)
    assert hi == pytest.approx((1 + ps.eps) / 3 * ps.m)
    assert b["X_max"] == pytest.approx(2 * ps.m * ps.q + math.log(300_000))


def test_trial_is_deterministic():
    cfg = TrialConfig(600, 4, C=12)
    a, b = run_trial(cfg, 11), run_trial(cfg, 11)
    assert a.to_json() == b.to_json()
    assert a.outcome in OUTCOMES


def test_record_json_round_trip():
    rec = run_trial(TrialConfig(600, 3, p=1.0), 3)
    d = json.loads(rec.to_json(timing=True))
    assert d["outcome"] == "success" and "runtime_ms" in d
    assert "runtime_ms" not in json.loads(rec.to_json())
    assert "embedding" not in json.loads(rec.to_json(embedding=False))


def test_reverify_rejects_tampered_record():
    rec = run_trial(TrialConfig(600, 3, p=1.0), 3)
    assert rec.success and reverify(rec)
    rec.embedding["paths"][0][1] = rec.embedding["paths"][1][1]
    assert not reverify(rec)


def test_matching_certificates_are_genuine():
    seen = 0
    for seed in range(30):
        res = run_pipeline(TrialConfig(600, 3, C=0.6, T=0), seed)
        rec = res.record
        if rec.outcome != "matching_deficient":
            continue
        seen += 1
        blocks = res.state.blocks()
        g = res.graphs.layers.union
        for cert in rec.certificates:
            i, j = cert["blocks"]
            a = set(cert["violator"])
            assert a <= set(blocks[i])
            nbrs = {y for y in blocks[j] for x in a if g.has_edge(x, y)}
            assert nbrs == set(cert["violator_nbrs"])
            assert len(nbrs) < len(a)
    assert seen > 0


def test_fill_in_certificates_are_genuine():
    cfg = TrialConfig(3000, 6, C=8)
    seen = 0
    for seed in range(20):
        res = run_pipeline(cfg, seed)
        rec = res.record
        if rec.outcome != "fill_infeasible" or not rec.certificates:
            continue
        seen += 1
        st = res.state
        cert = rec.certificates[0]
        bins = set(cert["blocks"])
        for x in cert["violator"]:
            assert st.block[x] < 0
            assert {i for i in range(1, st.k) if not (st.B[i] >> x) & 1} <= bins
        room = sum(st.m - len(st.members(i)) for i in bins)
        assert room < len(cert["violator"])
    assert seen > 0


def test_wilson_interval():
    lo, hi = wilson_interval(0, 20)
    assert lo == 0.0 and hi == pytest.approx(0.161125, abs=1e-6)
    lo, hi = wilson_interval(10, 20)
    assert lo < 0.5 < hi and lo == pytest.approx(1 - hi)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_sweep_zero_grid_all_fail():
    rep = sweep(TrialConfig(60, 3), [0.0], 5, 1)
    (pt,) = rep.points
    assert pt.successes == 0 and pt.freq == 0.0
    assert pt.outcomes == {"matching_deficient": 5}


def test_sweep_complete_layers_all_succeed():
    rep = sweep(TrialConfig(600, 3, p=1.0), [1.0], 5, 1)
    assert rep.points[0].successes == 5


def test_sweep_csv_and_ordering():
    rep = sweep(MATCHING_ONLY, [2.0, 0.5], 4, 9)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,k,C,trials,successes,freq,lo,hi"
    assert [p.C for p in rep.points] == [0.5, 2.0]


def test_sweep_independent_of_workers():
    a = sweep(MATCHING_ONLY, [0.8, 1.2], 6, 5, workers=1)
    b = sweep(MATCHING_ONLY, [0.8, 1.2], 6, 5, workers=2)
    assert a.to_csv() == b.to_csv()


def test_sweep_points_independent_of_grid():
    a = sweep(MATCHING_ONLY, [1.2], 6, 5)
    b = sweep(MATCHING_ONLY, [0.4, 1.2], 6, 5)
    assert a.points[0] == b.points[1]


def test_threshold_returns_narrow_bracket_unchanged():
    est = estimate_threshold(MATCHING_ONLY, 0.5, 5, tolerance=1.0, base_seed=0, lo=1.0, hi=1.5)
    assert (est.lo, est.hi) == (1.0, 1.5) and est.probes == ()


def test_threshold_bad_inputs():
    with pytest.raises(ValueError):
        estimate_threshold(MATCHING_ONLY, 1.0, 5, 0.1, 0)
    with pytest.raises(ValueError):
        estimate_threshold(MATCHING_ONLY, 0.5, 5, 0.1, 0, lo=2, hi=1)
    with pytest.raises(ThresholdError):
        estimate_threshold(MATCHING_ONLY, 0.5, 5, 0.1, 0, lo=4.0, hi=8.0)


def test_threshold_deterministic_and_consistent_with_sweep():
    a = estimate_threshold(MATCHING_ONLY, 0.5, 12, 0.1, 3, lo=0.0, hi=1.0)
    b = estimate_threshold(MATCHING_ONLY, 0.5, 12, 0.1, 3, lo=0.0, hi=1.0)
    assert a == b
    assert a.hi - a.lo < 0.1
    assert a.to_dict()["probes"][0]["C"] == 0.0
    rep = sweep(MATCHING_ONLY, [a.lo / 2, 2 * a.hi], 20, 8)
    low, high = rep.points
    assert low.freq < 0.5 <= high.freq


def test_full_comb_on_complete_graph():
    cfg = TrialConfig(60, 3, p=1.0, full_comb=True, spine_d=60.0)
    res = run_pipeline(cfg, 0)
    assert res.record.outcome == "success"
    assert res.record.embedding["spine_edges"]
    assert reverify(res.record)


def test_full_comb_spine_failure_is_its_own_outcome():
    rec = run_trial(TrialConfig(60, 3, p=1.0, full_comb=True, spine_d=0.0), 0)
    assert rec.outcome == "spine_failure"
    assert rec.certificates == [] and rec.embedding is None


def test_k1_trial():
    rec = run_trial(TrialConfig(10, 1, C=5.0), 0)
    assert rec.outcome == "success"
    assert rec.embedding["paths"] == [[v] for v in range(10)]

