import csv
import io
import json

import numpy as np
import pytest

from graphpencil.errors import ValidationError
from graphpencil.experiment import (REGIMES, ExperimentSpec, align_to_truth, convergence_slope,
                                    known_blocks_baseline, load_experiment_spec, regime,
                                    replicate_seed, run_experiment, squared_error,
                                    variance_check)
from graphpencil.glyphs import BistarGlyph, block_degrees
from graphpencil.graph import SbmParams


def test_squared_error_examples():
    b = np.array([[0.3, 0.1], [0.1, 0.6]])
    assert squared_error(b, b, [0.5, 0.5]) == 0.0
    assert squared_error([[0.5]], [[0.6]], [1.0]) == pytest.approx(0.01)
    assert squared_error([[0.2, 0.0], [0.0, 0.0]], np.zeros((2, 2)), [0.5, 0.5]) == \
        pytest.approx(0.01)
    # zero-weight blocks do not count
    assert squared_error(b, b + [[0, 0], [0, 1]], [1.0, 0.0]) == 0.0
    with pytest.raises(ValidationError, match="shape"):
        squared_error(b, np.zeros((3, 3)), [0.5, 0.5])


def test_baseline_examples():
    assert known_blocks_baseline(SbmParams.erdos_renyi(0.5), 100) == pytest.approx(5e-5)
    assert known_blocks_baseline(SbmParams([0.5, 0.5], [[1, 0], [0, 1]]), 100) == 0.0
    p = regime("assortative")
    assert known_blocks_baseline(p, 200) == pytest.approx(known_blocks_baseline(p, 100) / 4)


def test_regimes_are_degree_separated():
    for name in REGIMES:
        d = np.sort(block_degrees(regime(name)))
        assert np.diff(d).min() >= 0.2 - 1e-12
    with pytest.raises(ValidationError):
        regime("nonsense")


def test_align_to_truth_orders_by_degree():
    p = SbmParams([0.3, 0.7], [[0.1, 0.2], [0.2, 0.9]])
    q = align_to_truth(p)
    assert np.all(np.diff(block_degrees(q)) < 0)


def test_replicate_seeds_distinct_and_stable():
    seeds = {replicate_seed(0, n, r) for n in (256, 512) for r in range(50)}
    assert len(seeds) == 100
    assert replicate_seed(7, 256, 3) == replicate_seed(7, 256, 3)


@pytest.mark.parametrize("kw, msg", [
    ({"sizes": [512, 256]}, "ascending"),
    ({"sizes": [256], "replicates": [0]}, "positive"),
    ({"methods": ["magic"]}, "subset"),
    ({"basis": "spline"}, "basis"),
])
def test_spec_validation(kw, msg):
    with pytest.raises(ValidationError, match=msg):
        ExperimentSpec(SbmParams.erdos_renyi(0.5), **kw)


def test_sparse_mode_scaling_and_bounds():
    spec = ExperimentSpec(SbmParams.erdos_renyi(0.4), sizes=[100, 200, 400], replicates=1,
                          sparse_mode=True)
    assert spec.n_ref == 100
    assert np.allclose(spec.params_at(400).b, [[0.1]])
    with pytest.raises(ValidationError, match="above 1"):
        ExperimentSpec(SbmParams.erdos_renyi(0.4), sizes=[100, 200], sparse_mode=True, n_ref=400,
                       replicates=1)


def test_spec_json_round_trip(tmp_path):
    spec = ExperimentSpec(regime("middle"), sizes=[64, 128], replicates=[3, 2], seed=9,
                          methods=["two_hop"])
    (tmp_path / "s.json").write_text(json.dumps(spec.to_dict()))
    back = load_experiment_spec(tmp_path / "s.json")
    assert back.to_dict() == spec.to_dict()


def test_er_smoke_run():
    spec = ExperimentSpec(SbmParams.erdos_renyi(0.5), sizes=[256], replicates=[4],
                          methods=["bistar"], k=1)
    res = run_experiment(spec)
    errs = [r["sq_error"] for r in res.raw]
    assert len(errs) == 4 and all(np.isfinite(e) and e > 0 for e in errs)
    row, = res.summary
    assert row["failure_rate"] == 0.0 and row["replicates"] == 4


def test_failures_are_recorded_not_raised():
    # two blocks requested on ER data: every replicate fails the degree stage
    spec = ExperimentSpec(SbmParams.erdos_renyi(0.5), sizes=[64], replicates=[3], k=2,
                          methods=["bistar"])
    res = run_experiment(spec)
    assert all(r["status"] == "failed" for r in res.raw)
    assert res.summary[0]["failure_rate"] == 1.0
    assert np.isnan(res.summary[0]["mean_sq_error"])


def test_byte_identical_reruns():
    spec = ExperimentSpec(regime("disassortative"), sizes=[96, 128], replicates=[3, 2], seed=4)
    a, b = run_experiment(spec), run_experiment(spec)
    assert a.summary_csv() == b.summary_csv() and a.raw_csv() == b.raw_csv()


def test_cells_are_independent_of_schedule():
    small = run_experiment(ExperimentSpec(regime("middle"), sizes=[128], replicates=[2], seed=1))
    big = run_experiment(ExperimentSpec(regime("middle"), sizes=[64, 128], replicates=[1, 3],
                                        seed=1))
    pick = [r for r in big.raw if r["size"] == 128 and r["replicate"] < 2]
    assert [r["sq_error"] for r in pick] == [r["sq_error"] for r in small.raw]


def test_summary_columns_and_shading():
    spec = ExperimentSpec(regime("assortative"), sizes=[128], replicates=[4], seed=2)
    res = run_experiment(spec)
    rows = list(csv.DictReader(io.StringIO(res.summary_csv())))
    assert list(rows[0])[:5] == ["size", "method", "mean_sq_error", "stdev", "baseline"]
    for r in rows:
        m, s = float(r["mean_sq_error"]), float(r["stdev"])
        assert float(r["log_lower"]) == pytest.approx(np.log(m) - s / m)
        assert float(r["log_upper"]) == pytest.approx(np.log(m) + s / m)


def test_convergence_slope():
    n = np.array([100, 200, 400, 800])
    assert convergence_slope(n, 3.0 / n) == pytest.approx(-1.0)
    assert convergence_slope(n, 0.5 * n**-2.0) == pytest.approx(-2.0)


def test_two_hop_not_worse_on_assortative_desk_run():
    spec = ExperimentSpec(regime("assortative"), sizes=[256, 512], replicates=[12, 6], seed=3)
    res = run_experiment(spec)
    assert np.all(res.means("two_hop") <= res.means("bistar"))
    assert np.all(res.means("two_hop") >= res.baselines())


def test_variance_check_small():
    res = variance_check(regime("middle"), 96, [BistarGlyph(0, 0, 0, True)], graphs=20, seed=3)
    row, = res.rows
    assert row["graphs"] == 20 and row["empirical_variance"] > 0
    assert 0.2 < row["ratio"] < 5
    assert res.raw_csv().count("\n") == 21
    with pytest.raises(ValidationError):
        variance_check(regime("middle"), 32, [BistarGlyph(0, 0, 0, True)], graphs=1)
