import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propensity import diffcore as dc
from propensity.bnn import (UNDECIDED, BayesianMLPClassifier, BNNModel, GaussianVariational,
                            PosteriorPredictive, build_bnn, decide, elbo_loss, histogram_report,
                            kl_gaussian, posterior_predictive, sample_weights, train_bnn)


def pp_from_medians(*rows):
    """Posterior predictive whose single sample per instance is the given pair."""
    return PosteriorPredictive(np.array(rows, dtype=float)[:, None, :])


# -- sampling -----------------------------------------------------------------

def test_zero_noise_returns_mu():
    mu = np.array([[0.3, -1.2], [2.0, 0.0]])
    g = GaussianVariational(mu, np.full((2, 2), 1.5))
    np.testing.assert_array_equal(sample_weights(g, np.zeros((2, 2))).value, mu)


def test_rho_zero_sigma_is_log_two():
    assert GaussianVariational([0.0], [0.0]).sigma[0] == pytest.approx(math.log(2), abs=1e-15)


def test_noise_shape_checked():
    with pytest.raises(ValueError):
        sample_weights(GaussianVariational(np.zeros(3), np.zeros(3)), np.zeros(4))


def test_monte_carlo_mean():
    g = GaussianVariational([1.5], [0.2])
    noise = np.random.default_rng(0).standard_normal(100_000)
    draws = g.mu.value[0] + g.sigma[0] * noise
    assert abs(draws.mean() - 1.5) < 4 * g.sigma[0] / math.sqrt(1e5)
    assert draws.std() == pytest.approx(g.sigma[0], rel=0.02)


# -- KL -----------------------------------------------------------------------

def _rho_for(sigma):
    return math.log(math.expm1(sigma))


def test_kl_identical_to_prior_is_zero():
    assert float(kl_gaussian(GaussianVariational([0.0], [_rho_for(1.0)])).value) == pytest.approx(
        0.0, abs=1e-12)


def test_kl_shifted_mean_is_half():
    assert float(kl_gaussian(GaussianVariational([1.0], [_rho_for(1.0)])).value) == pytest.approx(
        0.5, abs=1e-12)


def test_kl_rejects_nonpositive_prior():
    with pytest.raises(ValueError):
        kl_gaussian(GaussianVariational([0.0], [0.0]), prior_sigma=0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-5, 5), st.floats(-6, 4), st.floats(0.1, 3.0))
def test_kl_nonnegative(mu, rho, prior_sigma):
    assert float(kl_gaussian(GaussianVariational([mu], [rho]), prior_sigma).value) >= -1e-12


# -- ELBO ---------------------------------------------------------------------

@pytest.fixture
def tiny():
    rng = np.random.default_rng(7)
    model = build_bnn(4, hidden=5, rho_init=-2.0, seed=1)
    for g in model.variationals():
        g.mu.value += rng.normal(scale=0.1, size=g.shape)
        g.rho.value += rng.normal(scale=0.3, size=g.shape)
    X = rng.normal(size=(6, 4))
    y = rng.integers(0, 2, 6)
    return model, X, y, model.draw_noise(rng)


def test_zero_kl_weight_is_sampled_cross_entropy(tiny):
    model, X, y, noise = tiny
    ce = dc.cross_entropy(model.forward(X, noise), y).value
    assert elbo_loss(model, X, y, 0.0, noise=noise).value == ce


def test_elbo_argument_checks(tiny):
    model, X, y, noise = tiny
    with pytest.raises(ValueError):
        elbo_loss(model, X, y, -0.1, noise=noise)
    with pytest.raises(ValueError):
        elbo_loss(model, X[:0], y[:0], 0.1, noise=noise)


def test_small_sigma_limit(tiny):
    model, X, y, noise = tiny
    for g in model.variationals():
        g.rho.value[:] = -10.0
    nll = dc.cross_entropy(dc.Node(model.forward_values(X)), y).value
    kl = kl_gaussian(model.variationals()).value
    loss = elbo_loss(model, X, y, 0.3, noise=noise).value
    assert loss == pytest.approx(nll + 0.3 * kl, rel=1e-6)


def test_elbo_gradient_matches_finite_differences(tiny):
    model, X, y, noise = tiny
    err = dc.finite_diff_check(lambda: elbo_loss(model, X, y, 0.25, noise=noise),
                               model.parameters(), h=1e-6)
    assert err < 1e-4


# -- training -----------------------------------------------------------------

@pytest.fixture(scope="module")
def separable_bnn(separable_split):
    train, test = separable_split
    model = build_bnn(train.design_matrix().shape[1], seed=0)
    log = train_bnn(model, train.design_matrix(), train.y, epochs=30)
    return model, log, test


def test_elbo_decreases(separable_bnn):
    _, log, _ = separable_bnn
    assert log["elbo"][9] < log["elbo"][0]


def test_decided_accuracy_on_separable_data(separable_bnn):
    model, _, test = separable_bnn
    d = decide(posterior_predictive(model, test.design_matrix(), S=100))
    assert d.decided.sum() > 0
    assert np.mean(d.outcome[d.decided] == test.y[d.decided]) >= 0.90


def test_empty_training_set_rejected():
    with pytest.raises(ValueError):
        train_bnn(build_bnn(3, hidden=4), np.zeros((0, 3)), np.zeros(0, dtype=int))


# -- posterior predictive -----------------------------------------------------

def test_sample_rows_sum_to_one(tiny):
    model, X, _, _ = tiny
    pp = posterior_predictive(model, X, S=20)
    assert pp.samples.shape == (6, 20, 2)
    assert np.max(np.abs(pp.samples.sum(axis=2) - 1)) <= 1e-9


def test_predictive_is_deterministic_and_order_free(tiny):
    model, X, _, _ = tiny
    a = posterior_predictive(model, X, S=12, seed=3)
    b = posterior_predictive(model, X, S=12, seed=3, n_jobs=2)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = posterior_predictive(model, X, S=12, seed=4)
    assert not np.array_equal(a.samples, c.samples)


def test_predictive_checks_width_and_sample_count(tiny):
    model, X, _, _ = tiny
    with pytest.raises(ValueError):
        posterior_predictive(model, X[:, :3])
    with pytest.raises(ValueError):
        posterior_predictive(model, X, S=0)


def test_collapsed_posterior_tracks_mean_network(tiny):
    # sigma is tiny but nonzero, so samples agree with the mean network
    # only to first order in sigma
    model, X, _, _ = tiny
    for g in model.variationals():
        g.rho.value[:] = -20.0
    pp = posterior_predictive(model, X, S=10)
    assert np.max(np.abs(pp.samples - model.forward_values(X)[:, None, :])) < 1e-7


# -- decisions ----------------------------------------------------------------

def test_decide_examples():
    assert decide(pp_from_medians([0.1, 0.9]), 0.5).outcome[0] == 1
    assert decide(pp_from_medians([0.48, 0.52]), 0.6).outcome[0] == UNDECIDED
    # tie at the max goes to class 0, but 0.5 does not exceed 0.5
    assert decide(pp_from_medians([0.5, 0.5]), 0.4).outcome[0] == 0
    assert decide(pp_from_medians([0.5, 0.5]), 0.5).outcome[0] == UNDECIDED


def test_decide_rejects_bad_threshold():
    with pytest.raises(ValueError):
        decide(pp_from_medians([0.2, 0.8]), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.9), st.floats(0.0, 0.09))
def test_threshold_monotone_and_argmax_consistent(seed, tau, step):
    rng = np.random.default_rng(seed)
    p1 = rng.uniform(size=(40, 15))
    pp = PosteriorPredictive(np.stack([1 - p1, p1], axis=2))
    low, high = decide(pp, tau), decide(pp, tau + step)
    assert not np.any(high.decided & ~low.decided)
    chosen = low.outcome[low.decided]
    np.testing.assert_array_equal(chosen, np.argmax(pp.median, axis=1)[low.decided])


# -- histograms ---------------------------------------------------------------

def test_point_mass_histogram():
    samples = np.zeros((1, 8, 2))
    samples[0, :, 1] = 1.0
    hists = histogram_report(PosteriorPredictive(samples), bins=30)
    h1 = [h for h in hists if h.label == 1][0]
    assert h1.counts.tolist() == [8]
    np.testing.assert_array_equal(h1.edges, [0.0, 0.0])


def test_histogram_counts_and_flags(tiny):
    model, X, _, _ = tiny
    pp = posterior_predictive(model, X, S=25)
    d = decide(pp)
    hists = histogram_report(pp, bins=7, decision=d)
    assert len(hists) == 2 * len(X)
    for h in hists:
        assert h.counts.sum() == 25
        assert h.edges[-1] == 0.0
        assert h.decided == (d.outcome[h.instance] == h.label)
    with pytest.raises(ValueError):
        histogram_report(pp, bins=0)


# -- estimator ----------------------------------------------------------------

def test_estimator_persistence_round_trip(small_split):
    train, test = small_split
    X, Xt = train.design_matrix(), test.design_matrix()
    clf = BayesianMLPClassifier(hidden=32, epochs=2, n_samples=10).fit(X, train.y)
    back = BNNModel.from_dict(clf.model_.to_dict())
    np.testing.assert_array_equal(posterior_predictive(back, Xt, S=10).samples,
                                  clf.posterior_predictive(Xt).samples)
    out = clf.predict(Xt)
    assert set(np.unique(out)) <= {0, 1, UNDECIDED}
    assert clf.get_params()["hidden"] == 32
