import numpy as np
import pytest
from scipy import integrate, special, stats

from sparsegev.errors import DegenerateDataError, DomainError
from sparsegev.evd import (EULER_GAMMA, GevParams, GumbelParams, fit_gumbel_mle, gev_cdf, gev_pdf,
                           gumbel_cdf, gumbel_logpdf, gumbel_mle_score, gumbel_pdf, gumbel_quantile,
                           gumbel_sample, lambert_w0, lambert_w0_exp)


def bisect_w0(x, lo=-1.0, hi=None, iters=200):
    """Independent oracle: bisection on w e^w - x, which is increasing on [-1, inf)."""
    if hi is None:
        hi = max(1.0, np.log1p(x) + 1.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * np.exp(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------ Gumbel

@pytest.mark.parametrize("mu,sigma", [(0.0, 1.0), (2.5, 0.05), (-3.0, 7.0)])
def test_gumbel_pdf_integrates_to_one(mu, sigma):
    p = GumbelParams(mu, sigma)
    total, _ = integrate.quad(lambda z: gumbel_pdf(z, p), -np.inf, np.inf, epsabs=1e-13)
    assert abs(total - 1.0) < 1e-6


def test_gumbel_pdf_matches_scipy():
    p = GumbelParams(1.3, 0.7)
    z = np.linspace(-3, 8, 41)
    np.testing.assert_allclose(gumbel_pdf(z, p), stats.gumbel_r.pdf(z, loc=1.3, scale=0.7), rtol=1e-12)
    np.testing.assert_allclose(gumbel_cdf(z, p), stats.gumbel_r.cdf(z, loc=1.3, scale=0.7), rtol=1e-12)


def test_gumbel_mode_and_cdf_at_location():
    p = GumbelParams(0.4, 2.0)
    # the density peaks at mu and F(mu) = exp(-1)
    z = np.linspace(-5, 5, 100001)
    assert abs(z[np.argmax(gumbel_pdf(z, p))] - 0.4) < 1e-3
    assert gumbel_cdf(0.4, p) == pytest.approx(np.exp(-1.0), abs=1e-15)


def test_gumbel_quantile_inverts_cdf():
    p = GumbelParams(-1.0, 0.3)
    q = np.linspace(1e-9, 1 - 1e-9, 257)
    np.testing.assert_allclose(gumbel_cdf(gumbel_quantile(q, p), p), q, rtol=1e-9, atol=1e-15)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_gumbel_quantile_rejects_boundary(q):
    with pytest.raises(DomainError):
        gumbel_quantile(q, GumbelParams(0.0, 1.0))


def test_gumbel_params_validate():
    with pytest.raises(DomainError):
        GumbelParams(0.0, 0.0)
    with pytest.raises(DomainError):
        GumbelParams(np.inf, 1.0)
    assert GumbelParams(1.0, 2.0).mean == pytest.approx(1.0 + 2.0 * EULER_GAMMA)


def test_gumbel_logpdf_is_log_of_pdf():
    p = GumbelParams(0.0, 1.5)
    z = np.array([-2.0, 0.0, 3.0])
    np.testing.assert_allclose(np.exp(gumbel_logpdf(z, p)), gumbel_pdf(z, p), rtol=1e-14)


def test_gumbel_sample_is_seeded_and_has_right_moments():
    p = GumbelParams(1.0, 0.5)
    a = gumbel_sample(p, np.random.default_rng(3), size=200_000)
    b = gumbel_sample(p, np.random.default_rng(3), size=200_000)
    assert np.array_equal(a, b)
    assert a.mean() == pytest.approx(p.mean, abs=0.01)
    assert a.std() == pytest.approx(0.5 * np.pi / np.sqrt(6.0), rel=0.01)


# ------------------------------------------------------------ GEV

@pytest.mark.parametrize("xi", [-0.4, 0.2, 0.8])
def test_gev_pdf_integrates_to_one(xi):
    p = GevParams(0.5, 1.2, xi)
    lo, hi = (-np.inf, 0.5 - 1.2 / xi) if xi < 0 else (0.5 - 1.2 / xi, np.inf)
    total, _ = integrate.quad(lambda z: gev_pdf(z, p), lo, hi, epsabs=1e-12, limit=200)
    assert abs(total - 1.0) < 1e-6


def test_gev_matches_scipy_sign_convention():
    # scipy's genextreme uses c = -xi
    z = np.linspace(-1, 4, 21)
    for xi in (-0.3, 0.25):
        p = GevParams(0.2, 0.9, xi)
        np.testing.assert_allclose(gev_cdf(z, p), stats.genextreme.cdf(z, -xi, loc=0.2, scale=0.9),
                                   rtol=1e-11, atol=1e-300)
        np.testing.assert_allclose(gev_pdf(z, p), stats.genextreme.pdf(z, -xi, loc=0.2, scale=0.9),
                                   rtol=1e-10, atol=1e-300)


def test_gev_tends_to_gumbel_as_shape_vanishes():
    z = np.linspace(-2, 6, 33)
    g = GumbelParams(0.3, 1.1)
    for xi in (1e-6, -1e-6, 1e-8):
        np.testing.assert_allclose(gev_cdf(z, GevParams(0.3, 1.1, xi)), gumbel_cdf(z, g), atol=1e-5)
    np.testing.assert_array_equal(gev_cdf(z, GevParams(0.3, 1.1, 0.0)), gumbel_cdf(z, g))


def test_gev_support_endpoints():
    p = GevParams(0.0, 1.0, 0.5)  # lower endpoint at -2
    assert gev_cdf(-2.5, p) == 0.0 and gev_pdf(-2.5, p) == 0.0
    q = GevParams(0.0, 1.0, -0.5)  # upper endpoint at 2
    assert gev_cdf(2.5, q) == 1.0 and gev_pdf(2.5, q) == 0.0


# ------------------------------------------------------------ Lambert W

def test_lambert_w_known_values():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(np.e) == pytest.approx(1.0, abs=1e-15)
    assert lambert_w0(-np.exp(-1.0)) == pytest.approx(-1.0, abs=1e-7)
    # omega constant
    assert lambert_w0(1.0) == pytest.approx(0.5671432904097838, abs=1e-15)


def test_lambert_w_round_trip_over_wide_range():
    x = np.concatenate([-np.exp(-1.0) + np.logspace(-14, -0.5, 200), np.linspace(-0.3, 5, 500),
                        np.logspace(0, 300, 300)])
    w = lambert_w0(x)
    rel = np.abs(w * np.exp(w) - x) / np.maximum(1.0, np.abs(x))
    assert rel.max() <= 1e-12


def test_lambert_w_matches_bisection_oracle():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.uniform(-np.exp(-1.0), 0, 50), rng.exponential(10.0, 50)])
    w = lambert_w0(x)
    oracle = np.array([bisect_w0(v) for v in x])
    np.testing.assert_allclose(w, oracle, atol=1e-10)


def test_lambert_w_matches_scipy():
    x = np.logspace(-6, 6, 101)
    np.testing.assert_allclose(lambert_w0(x), special.lambertw(x).real, rtol=1e-13)


def test_lambert_w_domain():
    with pytest.raises(DomainError):
        lambert_w0(-0.5)
    with pytest.raises(DomainError):
        lambert_w0(np.nan)


def test_lambert_w_exp_agrees_and_handles_overflow():
    y = np.linspace(-20, 700, 300)
    np.testing.assert_allclose(lambert_w0_exp(y), lambert_w0(np.exp(y)), rtol=1e-13)
    big = np.array([701.0, 1e4, 1e8])
    w = lambert_w0_exp(big)
    # w + log w = y characterises W0(e^y)
    np.testing.assert_allclose(w + np.log(w), big, rtol=1e-14)
    assert isinstance(lambert_w0_exp(800.0), float)


# ------------------------------------------------------------ maximum likelihood

def test_gumbel_mle_recovers_parameters_within_two_percent():
    p = GumbelParams(2.0, 0.5)
    x = gumbel_sample(p, np.random.default_rng(11), size=100_000)
    est = fit_gumbel_mle(x)
    assert abs(est.mu - 2.0) / 2.0 < 0.02
    assert abs(est.sigma - 0.5) / 0.5 < 0.02
    assert np.abs(gumbel_mle_score(x, est)).max() < 1e-9


def test_gumbel_mle_matches_scipy_fit():
    x = gumbel_sample(GumbelParams(-1.0, 3.0), np.random.default_rng(5), size=500)
    est = fit_gumbel_mle(x)
    loc, scale = stats.gumbel_r.fit(x)
    assert est.mu == pytest.approx(loc, rel=1e-5, abs=1e-6)
    assert est.sigma == pytest.approx(scale, rel=1e-5)


def test_gumbel_mle_is_location_scale_equivariant():
    x = gumbel_sample(GumbelParams(0.0, 1.0), np.random.default_rng(1), size=300)
    a = fit_gumbel_mle(x)
    b = fit_gumbel_mle(3.0 * x + 7.0)
    assert b.sigma == pytest.approx(3.0 * a.sigma, rel=1e-10)
    assert b.mu == pytest.approx(3.0 * a.mu + 7.0, rel=1e-10)


def test_gumbel_mle_degenerate_input():
    with pytest.raises(DegenerateDataError):
        fit_gumbel_mle([1.0, 1.0, 1.0, 1.0])
    with pytest.raises(DegenerateDataError):
        fit_gumbel_mle([1.0, 2.0])


# ------------------------------------------------------------ worked values

def test_gumbel_reference_values():
    std = GumbelParams(0.0, 1.0)
    assert gumbel_pdf(0.0, std) == pytest.approx(np.exp(-1.0), rel=1e-15)
    assert gumbel_pdf(0.0, GumbelParams(0.0, 2.0)) == pytest.approx(np.exp(-1.0) / 2.0, rel=1e-15)
    # exp(-1 - 1/e) to 14 digits
    assert gumbel_pdf(1.0, std) == pytest.approx(0.25464638004358, abs=1e-13)
    assert gumbel_cdf(40.0, std) == 1.0
    median = -np.log(np.log(2.0))
    assert median == pytest.approx(0.36651292058166435, abs=1e-15)
    assert gumbel_cdf(median, std) == pytest.approx(0.5, abs=1e-15)
    assert gumbel_quantile(0.5, std) == pytest.approx(median, abs=1e-15)
    assert gumbel_quantile(0.5, GumbelParams(3.0, 2.0)) == pytest.approx(3.0 + 2.0 * median, abs=1e-14)
    # the mode has cdf e^-1, so that probability maps back to the location
    assert gumbel_quantile(np.exp(-1.0), GumbelParams(1.5, 0.3)) == pytest.approx(1.5, abs=1e-14)


def test_cdf_derivative_is_pdf():
    rng = np.random.default_rng(8)
    p = GumbelParams(0.7, 1.3)
    z = rng.uniform(-2.0, 8.0, 200)
    h = 1e-5
    fd = (gumbel_cdf(z + h, p) - gumbel_cdf(z - h, p)) / (2 * h)
    np.testing.assert_allclose(fd, gumbel_pdf(z, p), rtol=1e-6)


def test_million_draws_match_mean_and_variance():
    x = gumbel_sample(GumbelParams(0.0, 1.0), np.random.default_rng(21), size=1_000_000)
    assert x.mean() == pytest.approx(EULER_GAMMA, abs=0.01)
    assert x.var() == pytest.approx(np.pi ** 2 / 6.0, abs=0.02)


def test_euler_constant_agrees_with_published_approximation():
    # the prediction formula quotes the constant as about 0.5771
    assert abs(EULER_GAMMA - 0.5771) < 2e-4
    assert EULER_GAMMA == pytest.approx(-special.digamma(1.0), abs=1e-16)
