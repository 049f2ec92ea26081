import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import gamma_dirichlet_moments
from sparse_ssrv.core import CountTable, ValidationError, substream
from sparse_ssrv.measurement import (CompositionDraw, DirichletPosterior, clr_transform,
                                     fit_posterior, log_gamma_variates, posterior_moments,
                                     sample_composition)


def _post(column, n_cols=1):
    conc = np.repeat(np.asarray(column, float)[:, None], n_cols, axis=1)
    return DirichletPosterior(conc, 0.5)


def test_fit_posterior_adds_pseudocount():
    table = CountTable(["a", "b"], ["x", "y"], np.array([[3, 0], [1, 4]]))
    post = fit_posterior(table, 0.5)
    np.testing.assert_array_equal(post.concentration[:, 0], [3.5, 1.5])
    np.testing.assert_array_equal(post.concentration[:, 1], [0.5, 4.5])
    with pytest.raises(ValidationError):
        fit_posterior(table, 0)


def test_zero_counts_map_to_alpha():
    # a whole zero column cannot reach fit_posterior: tables reject zero depth
    table = CountTable(["a", "b", "c"], ["x", "y"], np.array([[0, 1], [0, 1], [2, 1]]))
    post = fit_posterior(table, 0.5)
    np.testing.assert_array_equal(post.concentration[:2, 0], [0.5, 0.5])
    with pytest.raises(ValidationError, match="zero total"):
        CountTable(["a", "b"], ["x", "y"], np.array([[0, 1], [0, 1]]))


def test_closed_form_moments_match_gamma_oracle():
    # independent check of the closed form itself
    mean, var = posterior_moments(_post([3.5, 1.5]))
    mc_mean, mc_var = gamma_dirichlet_moments([3.5, 1.5], 200_000, seed=1)
    assert mean[0, 0] == pytest.approx(0.7)
    assert var[0, 0] == pytest.approx(3.5 * 1.5 / (25 * 6))
    assert mc_mean[0] == pytest.approx(mean[0, 0], abs=0.003)
    assert mc_var[0] == pytest.approx(var[0, 0], abs=0.001)


def test_sampler_two_category_moments():
    comp = sample_composition(_post([3.5, 1.5], 20_000), substream(3, 0))
    first = comp.proportions[0]
    assert abs(first.mean() - 0.7) < 0.01
    assert abs(first.var(ddof=1) - 0.035) < 0.005


def test_symmetric_concentration_mean():
    comp = sample_composition(_post([2.0, 2.0, 2.0], 20_000), substream(4, 0))
    np.testing.assert_allclose(comp.proportions.mean(axis=1), 1 / 3, atol=0.01)


def test_small_shapes_are_finite_and_correct():
    # shapes far below 1 would underflow a naive normalized-Gamma draw
    conc = np.full((50, 4000), 0.01)
    comp = sample_composition(DirichletPosterior(conc, 0.01), substream(5, 0))
    assert np.all(np.isfinite(comp.log_proportions))
    np.testing.assert_allclose(np.exp(comp.log_proportions).sum(axis=0), 1.0)
    gen = np.random.default_rng(0)
    lg = log_gamma_variates(gen, np.full(200_000, 0.3))
    assert np.exp(lg).mean() == pytest.approx(0.3, rel=0.02)


def test_depth_consistency_slope():
    truth = np.array([0.4, 0.25, 0.15, 0.1, 0.05, 0.03, 0.02])
    gen = np.random.default_rng(8)
    depths = [1e2, 1e3, 1e4, 1e5]
    rmse = []
    for lam in depths:
        counts = gen.multinomial(int(lam), truth, size=400).T
        post = DirichletPosterior(counts + 0.5, 0.5)
        comp = sample_composition(post, substream(9, int(lam)))
        rmse.append(np.sqrt(np.mean((comp.proportions - truth[:, None]) ** 2)))
    assert all(a > b for a, b in zip(rmse, rmse[1:]))
    slope = np.polyfit(np.log(depths), np.log(rmse), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_clr_hand_value():
    comp = CompositionDraw(np.array([[0.5], [0.25], [0.25]]))
    m = (np.log(0.5) + 2 * np.log(0.25)) / 3
    out = clr_transform(comp)[:, 0]
    np.testing.assert_allclose(out, [np.log(0.5) - m, np.log(0.25) - m, np.log(0.25) - m])
    np.testing.assert_allclose(out, [0.462, -0.231, -0.231], atol=1e-3)


def test_clr_uniform_is_zero():
    comp = CompositionDraw(np.full((5, 2), 0.2))
    np.testing.assert_allclose(clr_transform(comp), 0.0, atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (7, 3), elements=st.floats(1e-6, 1e3)))
def test_clr_columns_sum_to_zero(w):
    comp = CompositionDraw(w / w.sum(axis=0))
    np.testing.assert_allclose(clr_transform(comp).sum(axis=0), 0.0, atol=1e-9)


def test_composition_rejects_zero():
    with pytest.raises(ValidationError):
        CompositionDraw(np.array([[0.0], [1.0]]))
