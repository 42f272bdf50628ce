import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from retrodict.gaussian import (
    THETA_WIENER_CUTOFF,
    GaussianProcessSpec,
    ProcessKind,
    entropy_scan,
    gaussian_entropy_bundle,
    kappa,
    observation_entropy,
    ou_sr,
    prior_entropy,
    quadrature_residuals,
    retrodiction_entropy,
    transition_entropy,
    wiener_sr,
)


def plain_spec(dim=1, n_particles=1, sigma=1.0, lam=1.0, big_d=1.0):
    lam_arr = np.full(dim, lam)
    d_arr = np.full(dim, big_d)
    return GaussianProcessSpec(
        dim=dim,
        n_particles=n_particles,
        sigma=np.full(dim, sigma),
        lambda_fn=lambda t: lam_arr,
        big_d_fn=lambda t: d_arr,
    )


def random_spec(rng):
    dim = int(rng.integers(1, 4))
    n = int(rng.integers(1, 6))
    sigma = rng.uniform(0.3, 8.0, size=dim)
    theta = float(rng.uniform(-1.5, 1.5))
    diffusion = rng.uniform(0.1, 3.0, size=dim)
    if rng.random() < 0.3:
        kind = ProcessKind.wiener(diffusion, dim)
    else:
        kind = ProcessKind.ornstein_uhlenbeck(diffusion, theta, dim)
    t = float(10.0 ** rng.uniform(-2.5, 2.0))
    return GaussianProcessSpec.from_kind(kind, n, sigma), t


# ---------------------------------------------------------------------------
# individual closed forms


def test_transition_entropy_single_gaussian():
    # variance D/2 = 1/2: entropy (1/2) log(pi e)
    assert_allclose(transition_entropy(plain_spec(), 1.0), 0.5 * math.log(math.pi * math.e), rtol=1e-14)


def test_transition_entropy_extensive_in_particles():
    one = transition_entropy(plain_spec(n_particles=1), 1.0)
    two = transition_entropy(plain_spec(n_particles=2), 1.0)
    assert_allclose(two, 2 * one, rtol=1e-14)


def test_transition_entropy_wiener_matches_substitution():
    kind = ProcessKind.wiener(1.0)
    spec = GaussianProcessSpec.from_kind(kind, 1, 1.0)
    assert_allclose(transition_entropy(spec, 1.0), 0.5 * math.log(4 * math.pi * math.e), rtol=1e-14)


def test_transition_entropy_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        transition_entropy(plain_spec(), 0.0)
    with pytest.raises(ValueError):
        transition_entropy(plain_spec(), -1.0)


def test_prior_entropy_values():
    assert_allclose(prior_entropy(plain_spec(sigma=1.0)), 0.5 * math.log(2 * math.pi * math.e), rtol=1e-14)
    assert_allclose(prior_entropy(plain_spec(dim=2, sigma=1.0)), math.log(2 * math.pi * math.e), rtol=1e-14)
    assert prior_entropy(plain_spec(sigma=math.inf)) == math.inf


def test_observation_entropy_is_convolution_for_single_particle():
    # final position = start + noise: variance sigma^2 + D/2 = 2
    spec = plain_spec(sigma=1.0, big_d=2.0)
    assert_allclose(observation_entropy(spec, 1.0), 0.5 * math.log(2 * math.pi * math.e * 2.0), rtol=1e-14)


def test_observation_entropy_approaches_prior_at_short_times():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    spec = GaussianProcessSpec.from_kind(kind, 1, 5.0)
    assert abs(observation_entropy(spec, 1e-8) - prior_entropy(spec)) < 1e-4


def test_retrodiction_to_transition_ratio_at_short_times():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    # single particle: S_t -> S_0, so the ratio sr/avg_st -> 1
    b1 = gaussian_entropy_bundle(GaussianProcessSpec.from_kind(kind, 1, 5.0), 1e-8)
    assert abs(b1.sr / b1.avg_st - 1.0) < 1e-3
    # N particles share a start, so the joint S_t drops like (N-1) log D and
    # the same ratio tends to 1/N instead (logarithmically slowly)
    b2 = gaussian_entropy_bundle(GaussianProcessSpec.from_kind(kind, 2, 5.0), 1e-8)
    assert abs(b2.sr / b2.avg_st - 0.5) < 0.05


def test_retrodiction_entropy_wide_prior():
    assert_allclose(
        retrodiction_entropy(plain_spec(sigma=math.inf), 1.0),
        0.5 * math.log(math.pi * math.e),
        rtol=1e-14,
    )


def test_retrodiction_entropy_wide_prior_geometric_mean_form():
    kind = ProcessKind.ornstein_uhlenbeck([0.5, 2.0], -0.3, dim=2)
    spec = GaussianProcessSpec.from_kind(kind, 3, math.inf)
    t = 1.7
    d = kind.big_d_at(t)
    lam = kind.lambda_at(t)
    d_gm = math.exp(np.mean(np.log(d)))
    lam_gm_sq = math.exp(np.mean(np.log(lam**2)))
    expected = (2 / 2) * math.log(math.pi * math.e * d_gm / (3 * lam_gm_sq))
    assert_allclose(retrodiction_entropy(spec, t), expected, rtol=1e-12)


def test_retrodiction_entropy_flat_direction_is_degenerate():
    spec = plain_spec(sigma=math.inf, lam=0.0)
    assert retrodiction_entropy(spec, 1.0) == math.inf


def test_n_scaling_is_exact_for_wide_priors():
    for n in (2, 3, 8):
        delta = retrodiction_entropy(plain_spec(n_particles=n, sigma=math.inf), 1.0) - retrodiction_entropy(
            plain_spec(n_particles=1, sigma=math.inf), 1.0
        )
        assert_allclose(delta, -0.5 * math.log(n), rtol=1e-13)
        kind = ProcessKind.ornstein_uhlenbeck([1.0, 2.0], 0.7, dim=2)
        delta2 = ou_sr([1.0, 2.0], 0.7, math.inf, n, 2, 2.0) - ou_sr([1.0, 2.0], 0.7, math.inf, 1, 2, 2.0)
        assert_allclose(delta2, -math.log(n), rtol=1e-13)


def test_kappa_bounds_and_wide_prior_limit():
    rng = np.random.default_rng(4)
    for _ in range(100):
        spec, t = random_spec(rng)
        k = kappa(spec, t)
        assert ((0 < k) & (k <= 1.0)).all()
    huge = plain_spec(sigma=1e8)
    assert kappa(huge, 1.0)[0] > 1 - 1e-10
    assert_allclose(kappa(plain_spec(sigma=math.inf), 1.0), 1.0)


# ---------------------------------------------------------------------------
# Wiener specialization


def test_wiener_sr_wide_prior_value():
    assert_allclose(wiener_sr(1.0, math.inf, 1, 1, 1.0), 0.5 * math.log(4 * math.pi * math.e), rtol=1e-14)


def test_wiener_sr_long_time_limit_is_prior_entropy():
    # exact limit of the formula is (1/2) log(2 pi e sigma^2), the prior
    # entropy; (1/2) log(4 pi e sigma^2) would overstate it by (1/2) log 2
    sigma, n = 5.0, 5
    limit = wiener_sr(1.0, sigma, n, 1, 1e14)
    s0 = 0.5 * math.log(2 * math.pi * math.e * sigma**2)
    assert abs(limit - s0) < 1e-12


def test_wiener_sr_short_time_form():
    d, n, t = 1.0, 5, 1e-9
    approx = 0.5 * math.log(4 * math.pi * math.e * d * t / n)
    assert abs(wiener_sr(d, 5.0, n, 1, t) - approx) < 1e-8


def test_wiener_sr_diverges_to_minus_infinity_at_short_times():
    assert wiener_sr(1.0, math.inf, 1, 1, 1e-12) < -10.0
    assert wiener_sr(1.0, math.inf, 1, 1, 1e-12) > wiener_sr(1.0, math.inf, 1, 1, 1e-14)


def test_wiener_sr_matches_general_formula():
    kind = ProcessKind.wiener([0.5, 1.5], dim=2)
    spec = GaussianProcessSpec.from_kind(kind, 3, [2.0, 4.0])
    for t in (0.01, 1.0, 50.0):
        assert_allclose(
            wiener_sr([0.5, 1.5], [2.0, 4.0], 3, 2, t), retrodiction_entropy(spec, t), rtol=1e-12
        )


# ---------------------------------------------------------------------------
# Ornstein-Uhlenbeck specialization


def test_ou_sr_matches_general_formula_both_signs():
    for theta in (-0.8, 0.6):
        kind = ProcessKind.ornstein_uhlenbeck(1.3, theta)
        spec = GaussianProcessSpec.from_kind(kind, 4, 2.5)
        for t in (0.05, 1.0, 8.0):
            assert_allclose(ou_sr(1.3, theta, 2.5, 4, 1, t), retrodiction_entropy(spec, t), rtol=1e-12)


def test_ou_sr_trap_slope_approaches_theta():
    theta, h = 1.0, 1e-5
    slope = (ou_sr(1.0, theta, math.inf, 1, 1, 10 + h) - ou_sr(1.0, theta, math.inf, 1, 1, 10 - h)) / (2 * h)
    assert abs(slope - theta) / theta < 1e-3


def test_ou_sr_concave_limit_value():
    # theta=-1, D=1, N=5: limit (1/2) log(2 pi e / 5)
    limit = 0.5 * math.log(2 * math.pi * math.e / 5)
    assert abs(ou_sr(1.0, -1.0, math.inf, 5, 1, 10.0) - limit) < 1e-6
    assert abs(ou_sr(1.0, -1.0, math.inf, 5, 1, 40.0) - limit) < 1e-15


def test_ou_sr_concave_exponential_approach():
    # limit - sr(t) ~ (d/2) exp(-2|theta|t)
    theta = -1.0
    limit = 0.5 * math.log(2 * math.pi * math.e / 1.0)
    for t in (2.0, 3.0):
        gap = limit - ou_sr(1.0, theta, math.inf, 1, 1, t)
        assert_allclose(gap, 0.5 * math.exp(-2 * abs(theta) * t), rtol=0.05)


def test_ou_sr_saturates_to_prior_entropy_in_a_trap():
    sigma = 5.0
    s0 = 0.5 * math.log(2 * math.pi * math.e * sigma**2)
    assert abs(ou_sr(1.0, 1.0, sigma, 5, 1, 25.0) - s0) < 1e-6
    assert math.isfinite(ou_sr(1.0, 1.0, sigma, 5, 1, 1e9))


def test_ou_dispatches_to_wiener_below_cutoff():
    below = THETA_WIENER_CUTOFF / 10
    assert ou_sr(1.0, below, 5.0, 3, 1, 1.0) == wiener_sr(1.0, 5.0, 3, 1, 1.0)


def test_ou_wiener_continuity_envelope():
    # the genuine gap is O(theta * t); check it shrinks linearly above the
    # dispatch cutoff and vanishes below it
    w = wiener_sr(1.0, 5.0, 3, 1, 1.0)
    gap_6 = abs(ou_sr(1.0, 1e-6, 5.0, 3, 1, 1.0) - w)
    gap_7 = abs(ou_sr(1.0, 1e-7, 5.0, 3, 1, 1.0) - w)
    assert gap_6 < 1e-5
    assert gap_7 < 0.2 * gap_6


# ---------------------------------------------------------------------------
# bundle, identity sweep, quadrature


def test_bundle_identity_residual():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    spec = GaussianProcessSpec.from_kind(kind, 2, 5.0)
    b = gaussian_entropy_bundle(spec, 1.0)
    assert abs(b.sr - (b.avg_st - (b.st - b.s0))) < 1e-12


def test_bundle_identity_random_sweep():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(300):
        spec, t = random_spec(rng)
        b = gaussian_entropy_bundle(spec, t)  # constructor enforces the identity
        worst = max(worst, abs(b.sr - (b.avg_st - (b.st - b.s0))))
    assert worst < 1e-10


def test_bundle_wide_prior_flags_and_checks_limit():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    spec = GaussianProcessSpec.from_kind(kind, 5, math.inf)
    b = gaussian_entropy_bundle(spec, 1.0)
    assert b.s0 == math.inf and b.st == math.inf
    assert math.isfinite(b.sr) and math.isfinite(b.avg_st)


def test_observation_entropy_decreases_toward_equilibrium_in_a_trap():
    # prior wider than the equilibrium spread: per-particle S_t falls
    # monotonically from S_0 to the equilibrium entropy
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    single = GaussianProcessSpec.from_kind(kind, 1, 5.0)
    times = np.logspace(-2, 2, 40)
    st1 = [observation_entropy(single, t) for t in times]
    assert st1[0] < prior_entropy(single)
    assert all(b <= a for a, b in zip(st1, st1[1:]))
    assert all(b < a for a, b in zip(st1[:20], st1[1:21]))  # strict before saturation
    s_eq = 0.5 * math.log(2 * math.pi * math.e * (1.0 / 0.5))  # variance D/theta
    assert abs(st1[-1] - s_eq) < 1e-10
    # two particles share a start: the joint S_t rises out of its t->0
    # degeneracy first, then decreases toward equilibrium the same way
    pair = GaussianProcessSpec.from_kind(kind, 2, 5.0)
    st2 = [observation_entropy(pair, t) for t in np.logspace(0.5, 1.5, 20)]
    assert all(b < a for a, b in zip(st2, st2[1:]))
    assert abs(observation_entropy(pair, 100.0) - 2 * s_eq) < 1e-10


def test_sr_monotone_in_time():
    times = np.logspace(-3, 3, 60)
    for kind in (ProcessKind.wiener(1.0), ProcessKind.ornstein_uhlenbeck(1.0, 1.0)):
        spec = GaussianProcessSpec.from_kind(kind, 5, math.inf)
        values = [retrodiction_entropy(spec, t) for t in times]
        assert all(b > a for a, b in zip(values, values[1:]))
    # concave case: non-decreasing, bounded above by its limit (which float
    # saturation reaches exactly at large t)
    limit = 0.5 * math.log(2 * math.pi * math.e * 1.0 / (5 * 1.0))
    spec = GaussianProcessSpec.from_kind(ProcessKind.ornstein_uhlenbeck(1.0, -1.0), 5, math.inf)
    values = [retrodiction_entropy(spec, t) for t in times]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert all(v <= limit + 1e-12 for v in values)
    assert values[0] < limit - 1.0


@pytest.mark.parametrize(
    "kind,n,sigma,t",
    [
        (ProcessKind.wiener(1.0), 1, 1.0, 1.0),
        (ProcessKind.ornstein_uhlenbeck(1.0, 0.5), 2, 5.0, 1.0),
        (ProcessKind.ornstein_uhlenbeck([0.7, 1.3], -0.4, dim=2), 2, [2.0, 3.0], 0.8),
        (ProcessKind.wiener([0.5, 2.0], dim=2), 1, [1.0, 4.0], 2.5),
        (ProcessKind.ornstein_uhlenbeck(2.0, 1.2), 1, 0.7, 0.3),
    ],
)
def test_quadrature_oracle_matches_closed_forms(kind, n, sigma, t):
    spec = GaussianProcessSpec.from_kind(kind, n, sigma)
    residuals = quadrature_residuals(spec, t)
    assert max(residuals.values()) < 1e-6


def test_quadrature_rejects_unsupported_inputs():
    spec = GaussianProcessSpec.from_kind(ProcessKind.wiener(1.0), 3, 1.0)
    with pytest.raises(ValueError):
        quadrature_residuals(spec, 1.0)
    wide = GaussianProcessSpec.from_kind(ProcessKind.wiener(1.0), 1, math.inf)
    with pytest.raises(ValueError):
        quadrature_residuals(wide, 1.0)


def test_entropy_scan_rows():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, -1.0)
    rows = entropy_scan(kind, math.inf, 5, np.logspace(-2, 2, 20))
    assert len(rows) == 20
    assert rows[0]["process"] == "ou" and rows[0]["N"] == 5
    tail = [r["sr"] for r in rows[-5:]]
    assert max(tail) - min(tail) < 1e-3  # concave potential plateaus


def test_entropy_scan_quadrature_column():
    kind = ProcessKind.ornstein_uhlenbeck(1.0, 0.5)
    rows = entropy_scan(kind, 5.0, 1, [0.1, 1.0, 10.0], quadrature_check=True)
    checked = [r["quad_max_residual"] for r in rows if not math.isnan(r["quad_max_residual"])]
    assert checked and max(checked) < 1e-6
