import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from spacs_tomo.errors import AbortedAfterMaxTrials
from spacs_tomo.model import (
    ModelParams,
    ModePair,
    TransformedPair,
    _complex_gaussian,
    bogoliubov,
    generate_ensemble,
    herald,
    herald_tail_probability,
    input_amplitudes,
    pair_covariances,
    quadrature,
    sample_mode_pair,
    sample_mode_pairs,
    transform_trials,
)

SQRT_HALF = 1 / math.sqrt(2)
# 30-digit mpmath values
COSH_04 = 1.08107237183845481840517672948
SINH_04 = 0.410752325802815532544838783868

finite = st.floats(-50, 50, allow_nan=False)


@pytest.fixture(scope="module")
def million():
    return sample_mode_pairs(seed=3, count=10**6)


def test_mode_pair_sample_mean(million):
    assert abs(million.z_s.mean()) < 0.004
    assert abs(million.z_i.mean()) < 0.004


def test_mode_pair_unit_power(million):
    for z in million:
        assert 0.997 <= np.mean(np.abs(z) ** 2) <= 1.003


def test_mode_pair_components_have_half_variance(million):
    # SE of a variance estimate is var * sqrt(2/N)
    se = 0.5 * math.sqrt(2 / 10**6)
    for z in million:
        assert abs(np.var(z.real) - 0.5) < 4 * se
        assert abs(np.var(z.imag) - 0.5) < 4 * se
        assert abs(np.mean(z.real * z.imag)) < 4 * 0.5 / math.sqrt(10**6)


def test_mode_pair_is_deterministic():
    a = sample_mode_pairs(seed=42, count=1000)
    b = sample_mode_pairs(seed=42, count=1000)
    assert np.array_equal(a.z_s, b.z_s) and np.array_equal(a.z_i, b.z_i)
    assert sample_mode_pair(42, 17) == (a.z_s[17], a.z_i[17])
    c = sample_mode_pairs(seed=43, count=1000)
    assert not np.array_equal(a.z_s, c.z_s)


def test_mode_pairs_are_addressable_by_trial_index():
    whole = sample_mode_pairs(seed=5, count=5000)
    part = sample_mode_pairs(seed=5, count=1000, start=3000)
    assert np.array_equal(whole.z_s[3000:4000], part.z_s)
    assert np.array_equal(whole.z_i[3000:4000], part.z_i)


def test_octant_phase_matches_direct_trig():
    words = np.random.Generator(np.random.PCG64(9)).integers(0, 2**64, size=(20000, 2), dtype=np.uint64)
    for w0, w1 in words:
        z = _complex_gaussian(w0, w1)
        u = ((int(w0) >> 11) + 1) * 2.0**-53
        v = (int(w1) >> 11) * 2.0**-53
        rad = math.sqrt(-math.log(u))
        ref = complex(rad * math.cos(2 * math.pi * v), rad * math.sin(2 * math.pi * v))
        assert abs(z - ref) <= 1e-14 * max(1.0, rad)


def test_input_amplitudes_examples():
    p = ModelParams(alpha=1 + 0j, sigma=SQRT_HALF)
    assert input_amplitudes(ModePair(0j, 0j), p) == (1 + 0j, 0j)
    p = ModelParams(alpha=0, sigma=SQRT_HALF)
    a_s, _ = input_amplitudes(ModePair(1 + 1j, 0j), p)
    assert a_s == pytest.approx((1 + 1j) / math.sqrt(2), abs=1e-15)
    p = ModelParams(alpha=2 - 1j, sigma=0.8)
    a_s, _ = input_amplitudes(ModePair(0.5j, 0j), p)
    assert a_s == pytest.approx(2 - 0.6j, abs=1e-15)


def test_bogoliubov_identity_at_zero_squeezing():
    assert bogoliubov(0.3 - 2j, 1.5 + 0.25j, 0.0) == TransformedPair(0.3 - 2j, 1.5 + 0.25j)


def test_bogoliubov_example():
    b_s, b_i = bogoliubov(1 + 0j, 1j, 0.4)
    assert b_s == pytest.approx(complex(COSH_04, -SINH_04), abs=1e-15)
    assert b_i == pytest.approx(complex(SINH_04, COSH_04), abs=1e-15)


def test_bogoliubov_signal_variance():
    r, sigma, n = 0.4, SQRT_HALF, 10**6
    b_s, _ = transform_trials(ModelParams(alpha=0, sigma=sigma, r=r, seed=8), n)
    expected = sigma**2 * (2 * math.cosh(r) ** 2 - 1) / 2
    assert abs(np.var(b_s.real) - expected) < 3 * expected * math.sqrt(2 / n)


def test_transformed_modes_are_improper_and_correlated():
    r, sigma = 0.4, SQRT_HALF
    b_s, b_i = transform_trials(ModelParams(alpha=0, sigma=sigma, r=r, seed=21), 10**6)
    cov, pseudo = pair_covariances(b_s, b_i)
    # E[b_s b_i] = cosh r sinh r (E|a_s|^2 + E|a_i|^2) = sinh(2r) sigma^2; E[b_s conj(b_i)] = 0
    assert pseudo.real == pytest.approx(math.sinh(2 * r) * sigma**2, abs=0.005)
    assert abs(pseudo.imag) < 0.005
    assert abs(cov) < 0.005


@pytest.mark.parametrize(
    "b_i, gamma, expected",
    [(1e-9 + 0j, 0.0, True), (3 + 4j, 5.0, False), (3 + 4j, 4.9, True)],
)
def test_herald_examples(b_i, gamma, expected):
    assert herald(TransformedPair(0j, b_i), gamma) is expected


@given(re=finite, im=finite, g1=st.floats(0, 60), g2=st.floats(0, 60))
def test_herald_is_monotone_in_threshold(re, im, g1, g2):
    lo, hi = sorted((g1, g2))
    pair = TransformedPair(0j, complex(re, im))
    if herald(pair, hi):
        assert herald(pair, lo)


def test_ensemble_without_threshold_accepts_everything():
    e = generate_ensemble(ModelParams(gamma=0.0, target_conditioned=1000, seed=1))
    assert (e.accepted, e.total_trials, e.efficiency) == (1000, 1000, 1.0)
    assert e.c_s.size == e.accepted


def test_ensemble_matches_unconditioned_path_bitwise():
    p = ModelParams(alpha=0.4 - 0.3j, r=0.7, gamma=1.2, seed=77, target_conditioned=500)
    e = generate_ensemble(p, chunk_trials=997)
    b = transform_trials(p, e.total_trials)
    mask = herald(b, p.gamma)
    assert mask[-1]
    assert np.array_equal(b.b_s[mask], e.c_s)


def test_ensemble_independent_of_chunking():
    p = ModelParams(alpha=0.5, r=0.4, gamma=1.8, seed=123, target_conditioned=700)
    a = generate_ensemble(p, chunk_trials=1 << 16)
    b = generate_ensemble(p, chunk_trials=333)
    assert a.total_trials == b.total_trials
    assert np.array_equal(a.c_s, b.c_s)


def test_ensemble_is_reproducible():
    p = ModelParams(r=0.4, gamma=1.5, seed=99, target_conditioned=2000)
    a, b = generate_ensemble(p), generate_ensemble(p)
    assert a.c_s.tobytes() == b.c_s.tobytes()
    assert a.total_trials == b.total_trials


def test_herald_rate_matches_rayleigh_tail():
    p = ModelParams(alpha=0, sigma=SQRT_HALF, r=0.4, gamma=2.5, seed=2024, target_conditioned=2000)
    e = generate_ensemble(p)
    exact = herald_tail_probability(p)
    assert exact == pytest.approx(8.72922408721117e-05, rel=1e-12)
    se = math.sqrt(exact * (1 - exact) / e.total_trials)
    assert abs(e.efficiency - exact) < 3 * se


def test_trial_cap_aborts():
    p = ModelParams(gamma=4.0, r=0.0, seed=5, target_conditioned=10, max_trials=20_000)
    with pytest.raises(AbortedAfterMaxTrials) as info:
        generate_ensemble(p, chunk_trials=7000)
    assert info.value.total_trials == 20_000


@pytest.mark.parametrize(
    "kwargs",
    [dict(sigma=0), dict(sigma=-1), dict(r=-0.1), dict(gamma=-1), dict(target_conditioned=0), dict(seed=-1),
     dict(seed=2**64), dict(sigma=float("nan"))],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_quadrature_examples():
    assert quadrature(1 + 0j, 0.0) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert quadrature(1j, math.pi / 2) == pytest.approx(math.sqrt(2), abs=1e-15)
    # 30-digit mpmath: sqrt(2) (3 cos 0.7 + 4 sin 0.7)
    assert quadrature(3 + 4j, 0.7) == pytest.approx(6.8891961446471646, abs=1e-12)


@given(re=finite, im=finite, theta=st.floats(-10, 10))
def test_quadrature_flips_sign_over_half_turn(re, im, theta):
    c = complex(re, im)
    assert quadrature(c, theta + math.pi) == pytest.approx(-quadrature(c, theta), abs=1e-12 * (1 + abs(c)))


def test_no_squeezing_no_herald_is_coherent_gaussian():
    alpha, sigma, n = 0.8 - 0.5j, 0.9, 10**6
    b_s, _ = transform_trials(ModelParams(alpha=alpha, sigma=sigma, r=0.0, gamma=0.0, seed=4), n)
    for theta in (0.0, 1.0, 2.5):
        q = quadrature(b_s, theta)
        mean = math.sqrt(2) * (alpha * np.exp(-1j * theta)).real
        assert abs(q.mean() - mean) < 3 * sigma / math.sqrt(n)
        assert abs(q.var() - sigma**2) < 3 * sigma**2 * math.sqrt(2 / n)
        assert stats.normaltest(q[:50_000]).pvalue > 1e-3


def test_phase_covariance_per_sample():
    alpha, phi = 0.7 + 0.2j, 0.9
    pair = sample_mode_pairs(31, 10_000)
    rot = np.exp(1j * phi)
    base = bogoliubov(*input_amplitudes(pair, ModelParams(alpha=alpha)), 0.0).b_s
    turned = bogoliubov(
        *input_amplitudes(ModePair(pair.z_s * rot, pair.z_i * rot), ModelParams(alpha=alpha * rot)), 0.0
    ).b_s
    for theta in (0.0, 0.4, 2.0):
        assert np.allclose(quadrature(turned, theta), quadrature(base, theta - phi), atol=1e-12)


def test_phase_covariance_in_distribution():
    alpha, phi, theta = 0.7 + 0.2j, 0.9, 1.3
    a = transform_trials(ModelParams(alpha=alpha, r=0.0, seed=61), 20_000).b_s
    b = transform_trials(ModelParams(alpha=alpha * np.exp(1j * phi), r=0.0, seed=62), 20_000).b_s
    assert stats.ks_2samp(quadrature(b, theta), quadrature(a, theta - phi)).pvalue > 1e-3
