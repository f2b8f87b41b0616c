import json
import math

import numpy as np
import pytest

from rmtlab.distributions import derive_seed, make_distribution, make_rng
from rmtlab.experiments import (
    RECORD_COLUMNS,
    ExperimentConfig,
    ExperimentReport,
    TrialRecord,
    compressible_kernel_probe,
    distinguished_distances,
    kernel_complement,
    kernel_incompressibility,
    markov_tails,
    report_to_csv,
    run_trials,
    sample_compressible,
    scaled_top_singular_values,
    tail_monotone_violations,
    tail_table_and_fit,
    wilson_interval,
    write_records_csv,
)
from rmtlab.geometry import CompressParams, Compressibility, classify, sparse_distance
from rmtlab.lcd import LcdQuery
from rmtlab.linalg import dist_to_subspace, generate_matrix, orthonormal_basis
from rmtlab.witness import witness_certificate


def rec(dist, n, i, s_n, degenerate=False):
    return TrialRecord(dist, n, i, i, s_n, s_n, 1.0, 1.0, degenerate, 0.0)


def test_single_trial_invariant():
    recs = run_trials(ExperimentConfig(["gaussian"], [2], trials=1, master_seed=5))
    assert len(recs) == 1
    r = recs[0]
    assert r.s_n <= r.witness_upper + 1e-8 * 10
    assert r.seed == derive_seed(5, 0, 2, 0)


def test_records_match_direct_computation():
    cfg = ExperimentConfig(["pareto:2.5"], [12], trials=3, master_seed=9)
    for r in run_trials(cfg):
        a = generate_matrix(make_distribution("pareto", 2.5), 12, 12, r.seed)
        c = witness_certificate(a)
        assert r.witness_upper == c.upper_bound and r.b2 == c.b2 and r.norm_x == c.norm_x


def test_worker_count_does_not_change_records():
    cfg = ExperimentConfig(["gaussian", "rademacher"], [6, 9], trials=4, master_seed=3)
    one = run_trials(cfg)
    cfg.workers = 8
    eight = run_trials(cfg)
    # repr so NaN fields of degenerate trials compare equal
    strip = lambda rs: [repr({k: v for k, v in r.__dict__.items() if k != "runtime_ms"}) for r in rs]
    assert strip(one) == strip(eight)
    assert [(r.dist, r.n, r.trial_index) for r in one] == sorted((r.dist, r.n, r.trial_index) for r in one)


def test_config_validation():
    for bad in [
        dict(trials=0),
        dict(eps_grid=[0.0]),
        dict(eps_grid=[1.0]),
        dict(sizes=[1000]),
        dict(distributions=["pareto:2"]),
        dict(workers=0),
        dict(sizes=[]),
    ]:
        with pytest.raises(ValueError):
            ExperimentConfig(**bad).validate()


def test_c_hat_single_cell():
    # 20 exceedances out of 100 at n = 100, eps = 0.1: threshold is 10
    recs = [rec("gaussian", 100, i, 20.0 if i < 20 else 0.01) for i in range(100)]
    rep = tail_table_and_fit(recs, [0.1])
    (cell,) = rep.cells
    assert cell.threshold == pytest.approx(10.0)
    assert cell.p_hat == pytest.approx(0.2)
    assert rep.c_hat == pytest.approx(1.0)


def test_c_hat_zero_and_degenerates():
    recs = [rec("gaussian", 50, i, 0.01) for i in range(30)] + [rec("gaussian", 50, 30, math.nan, True)]
    rep = tail_table_and_fit(recs, [0.1, 0.2])
    assert rep.c_hat == 0.0
    assert rep.degenerate == {"gaussian@50": 1}
    assert all(c.trials == 30 for c in rep.cells)


def test_tail_errors():
    with pytest.raises(ValueError):
        tail_table_and_fit([rec("gaussian", 5, 0, 1.0)], [])
    with pytest.raises(ValueError):
        tail_table_and_fit([rec("gaussian", 5, 0, math.nan, True)], [0.1])


def test_c_hat_is_max_ratio():
    rng = make_rng(1)
    recs = [rec(d, n, i, float(rng.exponential(0.5))) for d in ("a", "b") for n in (4, 9) for i in range(50)]
    rep = tail_table_and_fit(recs, [0.3, 0.5, 0.9])
    for c in rep.cells:
        assert c.p_hat <= rep.c_hat * (c.epsilon + 1 / math.sqrt(c.n)) + 1e-12
        assert 0 <= c.wilson_low <= c.p_hat <= c.wilson_high <= 1
    assert any(math.isclose(c.ratio, rep.c_hat) for c in rep.cells)


def test_exceedance_events_nest():
    # larger eps lowers the threshold, so p_hat can only grow with eps
    rng = make_rng(2)
    recs = [rec("g", 4, i, float(rng.exponential(1.0))) for i in range(200)]
    rep = tail_table_and_fit(recs, [0.5, 0.7, 0.9])
    ps = [c.p_hat for c in rep.cells]
    assert ps == sorted(ps)


def test_monotone_violation_detection():
    recs = [rec("g", 4, i, 3.0 if i < 100 else 0.0) for i in range(200)]
    # threshold at eps=0.5 is 2, at eps=0.9 about 0.62: both catch the same half
    rep = tail_table_and_fit(recs, [0.5, 0.9])
    assert tail_monotone_violations(rep) == []
    recs = [rec("g", 4, i, 1.0 if i < 150 else 0.0) for i in range(200)]
    rep = tail_table_and_fit(recs, [0.5, 0.9])
    assert rep.cells[0].p_hat == 0 and rep.cells[1].p_hat == 0.75
    assert len(tail_monotone_violations(rep)) == 1


def test_wilson_interval():
    lo, hi = wilson_interval(0, 200)
    z2 = 1.959963984540054**2
    assert lo == pytest.approx(0.0, abs=1e-15) and hi == pytest.approx(z2 / (200 + z2), rel=1e-10)
    lo, hi = wilson_interval(20, 100)
    # closed form Wilson interval
    z = 1.959963984540054
    p, n = 0.2, 100
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    assert (lo, hi) == pytest.approx((centre - half, centre + half), rel=1e-10)


def test_report_round_trip_and_csv(tmp_path):
    cfg = ExperimentConfig(["gaussian"], [10], trials=5, eps_grid=[0.2, 0.3], master_seed=1)
    recs = run_trials(cfg)
    rep = tail_table_and_fit(recs, cfg.eps_grid, cfg.echo())
    rep.wall_time_s, rep.timestamp = 1.5, "2020-01-01T00:00:00+00:00"
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and "timestamp" in d
    assert "timestamp" not in json.loads(rep.to_json(timestamp=False))
    back = ExperimentReport.from_dict(d)
    assert back.to_json() == rep.to_json()
    csv_text = report_to_csv(rep).splitlines()
    assert csv_text[0].startswith("dist,n,epsilon,threshold")
    assert len(csv_text) == 3
    path = tmp_path / "r.csv"
    write_records_csv(recs, path, timestamp=False)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == RECORD_COLUMNS
    assert all(ln.endswith(",0.0") for ln in lines[1:])


def test_echo_leaves_out_workers():
    a = ExperimentConfig(workers=1).echo()
    b = ExperimentConfig(workers=8).echo()
    assert a == b and "workers" not in a


def test_compressible_samples_are_compressible():
    p = CompressParams(0.1, 0.1)
    xs = sample_compressible(100, p, 500, make_rng(4))
    assert np.allclose(np.linalg.norm(xs, axis=1), 1)
    # a rho-perturbation of a sparse unit vector, renormalized, is within 2 rho of sparse
    assert max(sparse_distance(x, 10) for x in xs) <= 2 * p.rho
    assert sum(classify(x, p) is Compressibility.COMPRESSIBLE for x in xs) > 250


def test_probe_zero_matrix():
    res = compressible_kernel_probe(make_distribution("gaussian"), 10, 1000, CompressParams(0.1, 0.1), 1, matrix=np.zeros((8, 10)))
    assert res.minimum == 0.0
    with pytest.raises(ValueError):
        compressible_kernel_probe(make_distribution("gaussian"), 6, 1000, CompressParams(0.1, 0.1), 1)


@pytest.mark.parametrize("seed", range(20))
def test_probe_gaussian(seed):
    res = compressible_kernel_probe(make_distribution("gaussian"), 100, 10_000, CompressParams(0.1, 0.1), seed)
    assert res.minimum >= 0.05
    assert res.quantiles["0"] == res.minimum


@pytest.mark.parametrize("seed", range(20))
def test_probe_pareto(seed):
    res = compressible_kernel_probe(make_distribution("pareto", 2.5), 100, 10_000, CompressParams(0.1, 0.1), seed)
    assert res.minimum > 0


def test_kernel_complement():
    a = generate_matrix(make_distribution("gaussian"), 20, 20, 3)
    h = kernel_complement(a)
    assert h.rank == 2
    assert np.max(np.abs(a[:, 2:].T @ h.vectors)) < 1e-10
    assert np.allclose(h.vectors.T @ h.vectors, np.eye(2))


def test_kernel_incompressibility_example():
    res = kernel_incompressibility(make_distribution("gaussian"), 100, 11, CompressParams(0.1, 0.1), LcdQuery("auto", 0.1, 10))
    assert res.incompressible_fraction >= 0.95
    assert res.lcd_value >= 0.1 * math.sqrt(100)


def test_distinguished_distances():
    a = generate_matrix(make_distribution("gaussian"), 15, 15, 8)
    nx, b2 = distinguished_distances(a)
    assert nx == pytest.approx(dist_to_subspace(a[:, 0], orthonormal_basis(a[:, 1:])), rel=1e-10)
    assert b2 == pytest.approx(dist_to_subspace(a[:, 1], orthonormal_basis(a[:, 2:])), rel=1e-10)
    c = witness_certificate(a)
    assert nx == pytest.approx(c.norm_x, rel=1e-10) and b2 == pytest.approx(c.b2, rel=1e-8)


def test_markov_tails_shape():
    out = markov_tails(make_distribution("gaussian"), 20, 300, [2, 3], seed=1)
    assert set(out) == {2.0, 3.0}
    for tau, (px, pb) in out.items():
        assert px <= 1 / tau**2 + 0.05 and pb <= 2 / tau**2 + 0.05


def test_pareto_median_scaled_sn_comparable():
    cfg = ExperimentConfig(["gaussian", "pareto:2.5"], [200], trials=200, master_seed=4)
    rep = tail_table_and_fit(run_trials(cfg), [0.1], cfg.echo())
    g, p = rep.median_scaled_sn["gaussian@200"], rep.median_scaled_sn["pareto:2.5@200"]
    assert 1 / 3 <= p / g <= 3


def test_scaled_top_singular_values():
    v = scaled_top_singular_values(make_distribution("gaussian"), 100, range(3))
    assert np.all((v > 1.7) & (v < 2.2))
