import numpy as np
import pytest

from sparse_ssrv.baselines import ScalePrior, clr_shift, run_baseline
from sparse_ssrv.core import AnalysisConfig, ConditionLabels, ValidationError
from sparse_ssrv.lfc import comp_lfc, group_means
from sparse_ssrv.measurement import CompositionDraw, clr_transform
from sparse_ssrv.sim import GeneratorSpec, confusion, generate, replicate_seed

LABELS = ConditionLabels([0, 0, 1, 1, 1])


def _comp(seed=0, D=6):
    w = np.random.default_rng(seed).random((D, 5)) + 0.05
    return CompositionDraw(w / w.sum(axis=0))


def test_clr_shift_identical_groups():
    col = np.array([0.1, 0.2, 0.7])
    comp = CompositionDraw(np.column_stack([col] * 5))
    assert clr_shift(comp, LABELS) == pytest.approx(0.0, abs=1e-15)


def test_clr_shift_identity():
    comp = _comp()
    lhs = comp_lfc(comp, LABELS) + clr_shift(comp, LABELS)
    rhs = group_means(clr_transform(comp), LABELS).difference
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_clr_shift_column_permutation_invariant():
    comp = _comp(1)
    p = comp.proportions.copy()
    p[:, 0] = p[::-1, 0]
    assert clr_shift(CompositionDraw(p), LABELS) == pytest.approx(clr_shift(comp, LABELS),
                                                                  abs=1e-14)


def test_clr_shift_feature_permutation_equivariant():
    comp = _comp(2)
    perm = np.random.default_rng(3).permutation(6)
    permuted = CompositionDraw(comp.proportions[perm])
    a = comp_lfc(comp, LABELS) + clr_shift(comp, LABELS)
    b = comp_lfc(permuted, LABELS) + clr_shift(permuted, LABELS)
    np.testing.assert_allclose(b, a[perm], atol=1e-13)


def test_clr_report_feature_order(sparse_data):
    cfg = AnalysisConfig(num_draws=256)
    perm = np.random.default_rng(4).permutation(sparse_data.table.shape[0])
    permuted = sparse_data.table.subset_features(perm)
    a = run_baseline(sparse_data.table, sparse_data.labels, cfg, ScalePrior.clr())
    b = run_baseline(permuted, sparse_data.labels, cfg, ScalePrior.clr())
    # different features see different Gamma variates, so compare up to MC error
    np.testing.assert_allclose(b.summary.mean_lfc, a.summary.mean_lfc[perm],
                               atol=4 * a.summary.sd_lfc.max() / np.sqrt(256))


def test_gaussian_clr_zero_variance_is_clr(sparse_data, fast_config):
    a = run_baseline(sparse_data.table, sparse_data.labels, fast_config, ScalePrior.clr())
    b = run_baseline(sparse_data.table, sparse_data.labels, fast_config,
                     ScalePrior.gaussian_clr(0.0))
    np.testing.assert_array_equal(a.summary.mean_lfc, b.summary.mean_lfc)
    np.testing.assert_array_equal(a.summary.q_value, b.summary.q_value)
    np.testing.assert_array_equal(a.shift_draws, b.shift_draws)


def test_gaussian_clr_sd_grows_with_gamma2(sparse_data):
    # per-feature sd can dip through sample covariance with the noise; many
    # draws keep that well below the added variance
    cfg = AnalysisConfig(num_draws=2048, seed=5)
    sds = [run_baseline(sparse_data.table, sparse_data.labels, cfg,
                        ScalePrior.gaussian_clr(g)).summary.sd_lfc for g in (0.0, 0.25, 1.0)]
    assert np.all(sds[1] >= sds[0]) and np.all(sds[2] >= sds[1])


def _informed_runs(n=25):
    cfg = AnalysisConfig(num_draws=64)
    for r in range(n):
        data = generate(GeneratorSpec(load_sd=0.0, seed=replicate_seed(5, r)))
        rep = run_baseline(data.table, data.labels, cfg.with_(seed=r),
                           ScalePrior.informed(data.true_loads, 0.0))
        yield confusion(rep.summary.significant, data.relevant)


@pytest.fixture(scope="module")
def informed_confusions():
    return list(_informed_runs())


def test_informed_exact_loads_controls_fdr(informed_confusions):
    assert np.mean([c.fdr for c in informed_confusions]) <= 0.05
    assert np.mean([c.tpr for c in informed_confusions]) >= 0.9


@pytest.mark.xfail(strict=True, reason="per-seed FDR <= 0.05 needs at most one false "
                   "positive per ~30 calls; a calibrated BH rule exceeds that in ~35% of seeds")
def test_informed_exact_loads_fdr_per_seed(informed_confusions):
    assert sum(c.fdr <= 0.05 for c in informed_confusions) >= 23


def test_scale_prior_validation():
    with pytest.raises(ValidationError):
        ScalePrior.gaussian_clr(-0.1)
    with pytest.raises(ValidationError):
        ScalePrior("informed", 0.5, None)
    with pytest.raises(ValidationError):
        ScalePrior.informed([1.0, -2.0])
    assert ScalePrior.informed([1.0, 2.0]).gamma2 == 0.5


def test_informed_needs_one_load_per_sample(sparse_data):
    with pytest.raises(ValidationError, match="one load per sample"):
        run_baseline(sparse_data.table, sparse_data.labels, AnalysisConfig(num_draws=4),
                     ScalePrior.informed(np.ones(3)))
