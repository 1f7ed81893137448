import math

import numpy as np
import pytest

from detmax.algorithms import CoreSet, brute_force_maxdet, greedy, local_search
from detmax.coreset import (PipelineConfig, aggregate, compose, composability_log_bound,
                            derive_seed, directional_height, height_floor, log_det_ratio,
                            parse_pair, partition, run_pipeline, summarize,
                            verify_composability, verify_directional_height)
from detmax.data import make_clustered
from detmax.geometry import OrthoBasis, PointSet, linear_oracle, log_volume


@pytest.fixture
def gaussian_ps():
    return PointSet(np.random.default_rng(0).standard_normal((60, 6)))


# -- partition -----------------------------------------------------------------

def test_partition_single_part():
    assert partition(7, 1, seed=3) == [list(range(7))]


def test_partition_is_exact_and_deterministic():
    parts = partition(50, 50, seed=1)
    assert sorted(i for p in parts for i in p) == list(range(50))
    assert parts == partition(50, 50, seed=1)
    assert parts != partition(50, 50, seed=2)


def test_partition_sizes_multinomial_range():
    parts = partition(8000, 10, seed=4)
    sizes = [len(p) for p in parts]
    assert sum(sizes) == 8000
    # mean 800, sd sqrt(8000 * 0.1 * 0.9) ~ 26.8; allow 5 sd
    assert all(abs(s - 800) < 5 * 26.9 for s in sizes)
    assert parts == partition(8000, 10, seed=4)


def test_partition_empty_parts_logged(caplog):
    parts = partition(3, 8, seed=0)
    assert sum(1 for p in parts if not p) >= 5
    assert "empty" in caplog.text


def test_partition_bad_m():
    with pytest.raises(ValueError):
        partition(5, 0)


# -- compose / aggregate ------------------------------------------------------------

def test_compose_single_part_is_plain_coreset(gaussian_ps):
    union, cores = compose(gaussian_ps, [list(range(60))], "local-search", 4)
    assert union == list(local_search(gaussian_ps, 4).indices)
    assert len(cores) == 1


def test_compose_small_parts_return_everything(gaussian_ps):
    parts = [[0, 1, 2], [3, 4], [5, 6, 7]]
    union, _ = compose(gaussian_ps, parts, "greedy", 3)
    assert sorted(union) == list(range(8))


def test_compose_uses_global_indices(gaussian_ps):
    parts = partition(gaussian_ps, 3, seed=9)
    union, cores = compose(gaussian_ps, parts, "greedy", 3)
    for part, cs in zip(parts, cores):
        assert set(cs.indices) <= set(part)
        assert cs.log_volume == pytest.approx(log_volume(gaussian_ps, cs.indices), abs=1e-9)
    assert len(union) <= 3 * 3


def test_compose_rejects_overlap(gaussian_ps):
    with pytest.raises(ValueError):
        compose(gaussian_ps, [[0, 1], [1, 2]], "greedy", 1)


def test_compose_bound_two_parts_r4():
    rng = np.random.default_rng(21)
    X = rng.standard_normal((12, 4))
    ps = PointSet(X)
    r = log_det_ratio(ps, [list(range(6)), list(range(6, 12))], "local-search", 2)
    # independent check of both optima by exhaustive search
    _, all_lv = brute_force_maxdet(ps, 2)
    union, _ = compose(ps, [list(range(6)), list(range(6, 12))], "local-search", 2)
    _, union_lv = brute_force_maxdet(ps.take(union), 2)
    assert r == pytest.approx(2 * (all_lv - union_lv), abs=1e-12)
    assert 0 <= r <= composability_log_bound("local-search", 2)


def test_aggregate_union_of_size_k(gaussian_ps):
    for alg in ("greedy", "local-search", "brute-force"):
        cs = aggregate(gaussian_ps, [5, 9, 13], alg, 3)
        assert sorted(cs.indices) == [5, 9, 13]


def test_aggregate_brute_force_is_exact(gaussian_ps):
    union = list(range(0, 60, 4))
    cs = aggregate(gaussian_ps, union, "brute-force", 3)
    _, lv = brute_force_maxdet(gaussian_ps.take(union), 3)
    assert cs.log_volume == pytest.approx(lv, abs=1e-12)
    assert set(cs.indices) <= set(union)


def test_aggregate_ls_dominates_gd(gaussian_ps):
    union = list(range(30))
    assert (aggregate(gaussian_ps, union, "local-search", 4).log_volume
            >= aggregate(gaussian_ps, union, "greedy", 4).log_volume - 1e-12)


# -- pipeline ------------------------------------------------------------------------

def test_pipeline_m1_equals_greedy(gaussian_ps):
    cfg = PipelineConfig(k=4, m=1, repetitions=1)
    [rep] = run_pipeline(gaussian_ps, cfg)
    gd = greedy(gaussian_ps, 4)
    assert list(rep.final.indices) == [rep.union[i] for i in range(4)]
    assert set(rep.final.indices) == set(gd.indices)
    assert rep.final_log_volume == pytest.approx(gd.log_volume, abs=1e-12)


def test_pipeline_is_deterministic(gaussian_ps):
    cfg = PipelineConfig(k=3, m=4, repetitions=3, coreset_alg="local-search",
                         aggregation_alg="local-search", master_seed=5)
    a = [r.to_dict() for r in run_pipeline(gaussian_ps, cfg)]
    b = [r.to_dict() for r in run_pipeline(gaussian_ps, cfg)]
    assert a == b
    assert len({r["seed"] for r in a}) == 3


def test_pipeline_report_invariants(gaussian_ps):
    cfg = PipelineConfig(k=3, m=5, repetitions=2, coreset_alg="local-search")
    for rep in run_pipeline(gaussian_ps, cfg):
        assert rep.union_size <= cfg.m * cfg.k
        assert set(rep.final.indices) <= set(rep.union)
        assert rep.final_log_volume == pytest.approx(
            log_volume(gaussian_ps, rep.final.indices), abs=1e-9)


def test_pipeline_with_rbf_kernel():
    X, _, _ = make_clustered(300, 5, 4, 2.0, seed=0)
    cfg = PipelineConfig(k=5, m=3, kernel=("rbf", 2.0), coreset_alg="local-search",
                         aggregation_alg="local-search")
    [rep] = run_pipeline(PointSet(X), cfg)
    assert math.isfinite(rep.final_log_volume) and rep.final_log_volume <= 0.0


def test_pipeline_compare_gd_vs_ls_recorded():
    X, _, _ = make_clustered(2000, 20, 10, 1.0, seed=0)
    ps = PointSet(X)
    results = {}
    for cs, agg in (("greedy", "greedy"), ("local-search", "local-search")):
        cfg = PipelineConfig(k=10, m=10, repetitions=2, coreset_alg=cs, aggregation_alg=agg,
                             master_seed=1)
        results[cfg.label] = run_pipeline(ps, cfg)
    summary = summarize(results)
    [cmp] = summary["comparisons"]
    assert (cmp["baseline"], cmp["candidate"]) == ("GD/GD", "LS/LS")
    diffs = [b.final_log_volume - a.final_log_volume
             for a, b in zip(results["GD/GD"], results["LS/LS"])]
    assert cmp["mean_volume_ratio"] == pytest.approx(np.mean(np.exp(diffs)))
    assert cmp["mean_det_ratio"] == pytest.approx(np.mean(np.exp(2 * np.array(diffs))))


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(k=0)
    with pytest.raises(ValueError):
        PipelineConfig(k=2, coreset_alg="brute-force")
    with pytest.raises(ValueError):
        PipelineConfig(k=2, eps=0.0)


def test_parse_pair():
    assert parse_pair("LS/GD") == ("local-search", "greedy")
    assert parse_pair("bf/ls") == ("brute-force", "local-search")
    for bad in ("LS", "XX/GD", "GD/BF"):
        with pytest.raises(ValueError):
            parse_pair(bad)


def test_derive_seed_is_pure():
    assert derive_seed(42, 1, 2) == derive_seed(42, 1, 2)
    assert len({derive_seed(42, i) for i in range(100)}) == 100
    assert derive_seed(42, 1, 2) != derive_seed(42, 2, 1)


# -- directional height -----------------------------------------------------------------

def test_height_example():
    ps = PointSet([[1, 0], [0, 1], [5, 5]])
    H = OrthoBasis.from_vectors([[1.0, 0.0]])
    assert directional_height(ps, H) == 5.0


def test_height_k1_ratio_is_one(gaussian_ps):
    C = local_search(gaussian_ps, 1)
    rep = verify_directional_height(gaussian_ps, C, trials=20, seed=1)
    assert rep.worst_ratio == 1.0
    assert not rep.violation


def test_height_floors():
    assert height_floor("local-search", 3, 1e-5) == pytest.approx(1 / (6 * 1.00001))
    assert height_floor("greedy", 3) == pytest.approx(1 / (6 * 27))


def test_height_random_instances_no_violation():
    for i in range(5):
        ps = PointSet(np.random.default_rng(100 + i).standard_normal((40, 6)))
        C = local_search(ps, 3)
        rep = verify_directional_height(ps, C, trials=200, seed=i)
        assert rep.trials + rep.skipped == 200
        assert 0 <= rep.worst_ratio <= 1
        assert not rep.violation


def test_height_oracle_mode_structured_only():
    X = np.random.default_rng(3).standard_normal((30, 5))
    orc = linear_oracle(X)
    C = greedy(orc, 3)
    rep = verify_directional_height(orc, C, trials=30, seed=0)
    assert rep.trials + rep.skipped == 30
    assert rep.worst_random == 1.0
    assert not rep.violation


def test_height_detects_a_bad_coreset():
    # the two short points cannot certify the height of the long one
    ps = PointSet([[100.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    C = CoreSet((1, 2), "local-search", 2, log_volume(ps, [1, 2]), eps=1e-5)
    rep = verify_directional_height(ps, C, trials=10, seed=0)
    assert rep.violation


# -- composability -------------------------------------------------------------------

def test_composability_identical_parts():
    rep = verify_composability(d=4, n_per_part=6, m=3, k=2, trials=10, seed=0,
                               identical_parts=True)
    assert rep.worst_log_ratio == pytest.approx(0.0, abs=1e-12)


def test_composability_m1_single_set_quality():
    rep = verify_composability(d=5, n_per_part=10, m=1, k=2, trials=20, seed=2)
    assert rep.worst_log_ratio >= -1e-12
    assert not rep.violation


def test_composability_greedy_bound():
    rep = verify_composability(d=5, n_per_part=8, m=3, k=2, trials=20, seed=3,
                               algorithm="greedy")
    assert rep.log_bound == pytest.approx(4 * math.log(4 * 9))
    assert not rep.violation
