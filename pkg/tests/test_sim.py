from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from sparse_ssrv.core import AnalysisConfig, ValidationError, substream
from sparse_ssrv.sim import (GENERATOR_NOTE, Confusion, GeneratorSpec, confusion,
                             effect_magnitudes, generate, run_benchmark, sign_sweep,
                             sparsity_sweep)

SMALL = GeneratorSpec(D=40, N=10, depth=20_000, seed=3)
FAST = AnalysisConfig(num_draws=8)


def test_null_generator():
    data = generate(replace(SMALL, prop_relevant=0.0, load_sd=0.0))
    assert np.all(data.truth == 0)
    assert data.warnings
    case = data.table.counts[:, data.labels.case_index].sum(axis=1)
    ctrl = data.table.counts[:, data.labels.control_index].sum(axis=1)
    keep = (case + ctrl) > 20
    _, p, _, _ = stats.chi2_contingency(np.vstack([case[keep], ctrl[keep]]))
    assert p > 1e-3


def test_effect_magnitudes_range_and_mean():
    m = effect_magnitudes(substream(0, 0).generator(), 100_000)
    assert m.min() >= 1.0 and m.max() <= 6.0
    assert m.mean() == pytest.approx(2.25, abs=0.05)


def test_generator_truth_structure():
    data = generate(GeneratorSpec(D=150, prop_relevant=0.2, pos_frac=0.8, seed=1))
    rel = data.truth[data.relevant]
    assert rel.size == 30
    assert np.all((np.abs(rel) >= 1) & (np.abs(rel) <= 6))
    np.testing.assert_array_equal(data.labels.assignment, np.repeat([0, 1], 30))
    np.testing.assert_array_equal(data.table.depths, 250_000)


def test_generator_deterministic():
    a, b = generate(SMALL), generate(SMALL)
    assert a.table == b.table
    np.testing.assert_array_equal(a.truth, b.truth)
    assert not (generate(replace(SMALL, seed=4)).table == a.table)


def test_sign_scenarios_are_matched():
    datasets = [generate(replace(SMALL, pos_frac=p)) for p in (0.5, 0.8, 1.0)]
    mags = [np.abs(d.truth) for d in datasets]
    np.testing.assert_array_equal(mags[0], mags[1])
    np.testing.assert_array_equal(mags[1], mags[2])
    pos = [int((d.truth > 0).sum()) for d in datasets]
    assert pos[0] <= pos[1] <= pos[2] == int(datasets[2].relevant.sum())


def test_poisson_depth():
    data = generate(replace(SMALL, poisson_depth=True))
    assert len(set(data.table.depths.tolist())) > 1


def test_spec_validation():
    with pytest.raises(ValidationError):
        GeneratorSpec(prop_relevant=1.5)
    with pytest.raises(ValidationError):
        GeneratorSpec(D=100, depth=10)


def test_oracle_and_flag_everything():
    data = generate(GeneratorSpec(D=150, seed=2))
    c = confusion(data.relevant, data.relevant)
    assert (c.fdr, c.tpr, c.f_half) == (0.0, 1.0, 1.0)
    c = confusion(np.ones(150, bool), data.relevant)
    assert c.tpr == 1.0
    assert c.fdr == pytest.approx(1 - 0.2)


@pytest.mark.parametrize("tp, fp, fn, f_half", [
    (8, 2, 4, 10 / 13), (0, 0, 5, 0.0), (5, 0, 0, 1.0), (3, 3, 3, 3.75 / 7.5),
])
def test_f_half_closed_form(tp, fp, fn, f_half):
    assert Confusion(tp, fp, fn, 0).f_half == pytest.approx(f_half)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_fdr_plus_precision(tp, fp, fn, tn):
    c = Confusion(tp, fp, fn, tn)
    if tp + fp:
        assert c.fdr + tp / (tp + fp) == pytest.approx(1.0)
    else:
        assert c.fdr == 0.0
    assert c.discovery_rate == pytest.approx((tp + fp) / max(1, tp + fp + fn + tn))


def test_no_positives_gives_nan_tpr():
    assert np.isnan(Confusion(0, 2, 0, 10).tpr)


def test_singleton_sweep_is_run_benchmark():
    a = sparsity_sweep(SMALL, [0.05], ["clr"], replicates=2, config=FAST)
    b = run_benchmark([replace(SMALL, prop_relevant=0.05)], ["clr"], 2, FAST)
    assert a.raw == b.raw
    assert a.note == GENERATOR_NOTE


def test_failures_are_recorded():
    def broken(data, config, workers):
        raise RuntimeError("boom")

    res = run_benchmark([SMALL], ["clr", broken], 2, FAST)
    rows = res.summary_rows()
    assert rows[1]["method"] == "broken" and rows[1]["failed"] == 2
    assert np.isnan(rows[1]["fdr"])
    assert rows[0]["replicates"] == 2


def test_null_fdr_equals_any_discovery():
    res = run_benchmark([replace(SMALL, prop_relevant=0.0)], ["clr", "gaussian-clr"], 4,
                        AnalysisConfig(num_draws=16))
    for r in res.raw:
        assert r["tp"] == 0
        c = Confusion(r["tp"], r["fp"], r["fn"], r["tn"])
        assert c.fdr == float(r["fp"] > 0)


def test_callable_method_and_sign_sweep():
    oracle = lambda data, config, workers: data.relevant
    res = sign_sweep(SMALL, [0.5, 1.0], [oracle], replicates=2, config=FAST)
    assert all(row["fdr"] == 0 and row["tpr"] == 1 for row in res.summary_rows())
    d = res.to_dict()
    assert d["scenarios"][1]["pos_frac"] == 1.0 and len(d["raw"]) == 4
