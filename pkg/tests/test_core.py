import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from embedcal.core import (
    EmbeddedParameter,
    InferenceProblem,
    LikelihoodSpec,
    LogNormal,
    Normal,
    ObservationSet,
    PlainParameter,
    Uniform,
    distribution_from_dict,
    distribution_to_dict,
    interleave,
    log_prior,
    split_sample,
)
from embedcal.models.linear import LinearModel

finite = st.floats(-1e3, 1e3, allow_nan=False)
positive = st.floats(1e-3, 1e2, allow_nan=False)


def two_param_problem():
    params = (
        EmbeddedParameter("a", Normal(0.0, 1.0), LogNormal(0.0, 1.0)),
        EmbeddedParameter("b", Normal(1.0, 2.0), Uniform(0.0, 3.0)),
        PlainParameter("c", Uniform(-1.0, 1.0)),
    )
    obs = ObservationSet([0.0, 1.0], [0.0, 1.0], 0.1)
    return InferenceProblem(params, lambda th: th[:2], obs, LikelihoodSpec("in"))


@given(finite, finite, positive)
def test_normal_logpdf_matches_scipy(x, mean, std):
    assert Normal(mean, std).logpdf(x) == pytest.approx(stats.norm(mean, std).logpdf(x), rel=1e-12, abs=1e-9)


@given(positive, st.floats(-5, 5), st.floats(0.05, 3))
def test_lognormal_logpdf_matches_scipy(x, mu, s):
    ref = stats.lognorm(s, scale=math.exp(mu)).logpdf(x)
    assert LogNormal(mu, s).logpdf(x) == pytest.approx(ref, rel=1e-10, abs=1e-9)


def test_lognormal_outside_support():
    assert LogNormal(0, 1).logpdf(0.0) == -math.inf
    assert LogNormal(0, 1).logpdf(-1.0) == -math.inf
    assert Uniform(0, 1).logpdf(1.5) == -math.inf
    assert Uniform(0, 2).logpdf(1.0) == pytest.approx(-math.log(2))


@pytest.mark.parametrize("bad", [lambda: Normal(0, 0), lambda: LogNormal(0, -1), lambda: Uniform(1, 1)])
def test_invalid_distributions(bad):
    with pytest.raises(ValueError):
        bad()


def test_distribution_dict_roundtrip():
    for d in (Normal(1, 2), LogNormal(-1, 0.5), Uniform(0, 3)):
        assert distribution_from_dict(distribution_to_dict(d)) == d
    with pytest.raises(ValueError):
        distribution_from_dict({"kind": "cauchy"})


def test_embedded_scale_prior_must_be_positive():
    with pytest.raises(ValueError):
        EmbeddedParameter("a", Normal(0, 1), Normal(0, 1))
    with pytest.raises(ValueError):
        EmbeddedParameter("a", Normal(0, 1), Uniform(-1, 1))


def test_layout_names_and_dim():
    p = two_param_problem()
    assert p.names == ["a_m", "a_b", "b_m", "b_b", "c"]
    assert p.dim == 5
    assert len(p.embedded) == 2 and len(p.plain) == 1


def test_plain_before_embedded_rejected():
    obs = ObservationSet([0.0], [0.0], 0.1)
    with pytest.raises(ValueError):
        InferenceProblem(
            (PlainParameter("c", Normal(0, 1)), EmbeddedParameter("a", Normal(0, 1), LogNormal(0, 1))),
            lambda th: th, obs, LikelihoodSpec("in"),
        )


def test_duplicate_names_rejected():
    obs = ObservationSet([0.0], [0.0], 0.1)
    e = EmbeddedParameter("a", Normal(0, 1), LogNormal(0, 1))
    with pytest.raises(ValueError):
        InferenceProblem((e, e), lambda th: th, obs, LikelihoodSpec("in"))


@given(st.lists(finite, min_size=2, max_size=2), st.lists(positive, min_size=2, max_size=2), finite)
def test_split_interleave_roundtrip(means, scales, plain):
    p = two_param_problem()
    sample = interleave(means, scales, [plain])
    m, s = split_sample(p, sample)
    np.testing.assert_array_equal(m, means)
    np.testing.assert_array_equal(s, scales)
    assert p.plain_values(sample)[0] == plain


def test_log_prior_is_sum_of_components():
    p = two_param_problem()
    x = np.array([0.3, 1.2, 0.5, 2.0, 0.1])
    ref = (
        stats.norm(0, 1).logpdf(0.3) + stats.lognorm(1.0).logpdf(1.2)
        + stats.norm(1, 2).logpdf(0.5) + math.log(1 / 3) + math.log(1 / 2)
    )
    assert log_prior(p, x) == pytest.approx(ref, rel=1e-12)


def test_log_prior_outside_support_and_dimension():
    p = two_param_problem()
    assert log_prior(p, [0.3, -1.0, 0.5, 2.0, 0.1]) == -math.inf
    assert p.log_posterior([0.3, -1.0, 0.5, 2.0, 0.1]) == -math.inf
    with pytest.raises(ValueError):
        log_prior(p, [0.0, 1.0])


def test_observation_set_validation():
    with pytest.raises(ValueError):
        ObservationSet([0, 1], [0], 0.1)
    with pytest.raises(ValueError):
        ObservationSet([], [], 0.1)
    with pytest.raises(ValueError):
        ObservationSet([0.0], [np.nan], 0.1)
    with pytest.raises(ValueError):
        ObservationSet([0.0], [1.0], -0.1)
    with pytest.raises(ValueError):
        ObservationSet([0.0, 1.0], [1.0, 2.0], 0.1, labels=["a"])
    obs = ObservationSet([0.0, 1.0], [1.0, 2.0], 0.1)
    assert obs.n_y == 2 and obs.with_noise(0.5).noise_std == 0.5


def test_likelihood_spec_validation():
    with pytest.raises(ValueError):
        LikelihoodSpec("abc")
    with pytest.raises(ValueError):
        LikelihoodSpec("abc", epsilon=0.1, gamma=0.0)
    with pytest.raises(ValueError):
        LikelihoodSpec("foo")
    assert LikelihoodSpec("GMM").kind == "gmm"
    assert LikelihoodSpec("in").gamma == pytest.approx(math.sqrt(math.pi / 2))


def test_sample_prior_within_support(rng):
    p = two_param_problem()
    for _ in range(50):
        assert math.isfinite(p.log_prior(p.sample_prior(rng)))


@pytest.mark.parametrize("kind", ["abc", "in", "gmm", "rgmm"])
def test_log_posterior_batch_matches_loop(linear_obs, kind):
    from conftest import linear_problem

    p = linear_problem(linear_obs, kind)
    pts = np.array([[4.0, 1.0], [3.9, 0.8], [4.0, -1.0], [5.0, 0.01]])
    np.testing.assert_allclose(p.log_posterior_batch(pts), [p.log_posterior(x) for x in pts], rtol=1e-12)


def test_log_posterior_batch_thermal_with_invalid_nodes():
    from embedcal.models.thermal import ThermalForward

    fwd = ThermalForward([20, 40], n=6)
    obs = ObservationSet(np.repeat([20.0, 40.0], 4), fwd([1.1e-6]), 0.2)
    p = InferenceProblem(
        (EmbeddedParameter("alpha", Normal(1e-6, 1e-7), LogNormal(-16.0, 0.1)),),
        fwd, obs, LikelihoodSpec("in"), pce_degree=2, quad_order=3,
    )
    # the second sample puts a quadrature node at a negative diffusivity
    pts = np.array([[1.1e-6, 1.1e-7], [1.0e-7, 1.0e-7], [1.2e-6, 1.0e-7]])
    batch = p.log_posterior_batch(pts)
    loop = [p.log_posterior(x) for x in pts]
    assert batch[1] == -math.inf and loop[1] == -math.inf
    np.testing.assert_allclose(batch[[0, 2]], np.array(loop)[[0, 2]], rtol=1e-10)


def test_with_helpers_keep_layout(linear_obs):
    p = InferenceProblem(
        (EmbeddedParameter("t", Normal(4.5, 0.5), LogNormal(-1, 0.5)),),
        LinearModel(linear_obs.x), linear_obs, LikelihoodSpec("in"),
    )
    q = p.with_likelihood(LikelihoodSpec("gmm")).with_observations(linear_obs.with_noise(0.1))
    assert q.names == p.names and q.likelihood.kind == "gmm" and q.observations.noise_std == 0.1
