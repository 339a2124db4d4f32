#!/usr/bin/env python3
"""
Test suite for stability analysis
Campaign statistics, reference distributions, closed-form bounds, verdicts and growth fits
"""

import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from trotter_stability import noise_model
from trotter_stability.models import echo_family, echo_schedule, pauli_pair, random_family, scalar_family
from trotter_stability.noise_model import NoiseSpec
from trotter_stability.product_formula import OrderSpec, build_schedule
from trotter_stability.stability_analysis import (
    STABILITY_CONSTANT,
    error_spectrum,
    evaluate_verdicts,
    fit_growth,
    folded_lognormal_cdf,
    folded_lognormal_pdf,
    gaussian_product_moments,
    integrate_density,
    ks_distance,
    lognormal_pdf,
    lognormal_product_moments,
    monte_carlo,
    required_machine_epsilon,
    rms,
    run_campaign,
    scalar_bounds,
    single_factor_norm_cdf,
    single_factor_norm_pdf,
    summarize,
    theorem_bounds,
)


def test_summarize():
    """Sample statistics use ddof = 1 and linear quantiles"""
    stats = summarize([1.0, 2.0, 3.0, 4.0])
    assert stats.trials == 4
    assert stats.mean == 2.5
    assert stats.std == pytest.approx(1.2909944487358056, rel=1e-15)
    assert stats.quantiles[0.5] == 2.5
    assert stats.quantiles[0.9] == pytest.approx(3.7)
    assert stats.mean_stderr == pytest.approx(stats.std / 2)
    assert stats.to_dict()["quantiles"]["0.99"] == pytest.approx(3.97)
    with pytest.raises(ValueError):
        summarize([1.0])
    assert rms([3.0, -4.0]) == pytest.approx(math.sqrt(12.5))
    print("✓ test_summarize")


def test_campaign_independent_of_threads_and_chunks():
    """Per-trial results are identical for any thread count and batch size"""
    gens = pauli_pair()
    schedule = build_schedule(2, OrderSpec("trotter", r=2), 0.5)
    spec = NoiseSpec(1e-3, master_seed=2024)
    reference = run_campaign(gens, schedule, spec, 200, threads=1)

    original = noise_model.CHUNK_ELEMENTS
    noise_model.CHUNK_ELEMENTS = 16 * 7  # seven trials per batch
    try:
        for threads in (1, 4):
            result = run_campaign(gens, schedule, spec, 200, threads=threads)
            assert np.array_equal(result.epsilon, reference.epsilon)
            assert np.array_equal(result.factor_error, reference.factor_error)
    finally:
        noise_model.CHUNK_ELEMENTS = original
    print("✓ test_campaign_independent_of_threads_and_chunks")


def test_campaign_validation():
    """Too few trials or threads are rejected before any work"""
    gens = pauli_pair()
    schedule = build_schedule(2, OrderSpec("trotter"), 0.5)
    with pytest.raises(ValueError):
        run_campaign(gens, schedule, NoiseSpec(1e-3), 50)
    with pytest.raises(ValueError):
        run_campaign(gens, schedule, NoiseSpec(1e-3), 200, threads=0)
    print("✓ test_campaign_validation")


def test_zero_noise_campaign():
    """ε_m = 0 gives ε = 0 in every trial"""
    gens = pauli_pair()
    schedule = build_schedule(2, OrderSpec("suzuki", k=1, r=4), 1.0)
    result = run_campaign(gens, schedule, NoiseSpec(0.0), 100)
    assert np.all(result.epsilon == 0.0)
    assert result.stats.std == 0.0
    print("✓ test_zero_noise_campaign")


def test_monte_carlo_summary():
    """monte_carlo returns the campaign's ε statistics and validates its inputs"""
    gens = pauli_pair()
    schedule = build_schedule(2, OrderSpec("suzuki", k=1, r=2), 0.5)
    spec = NoiseSpec(1e-4, master_seed=77)

    stats = monte_carlo(gens, schedule, spec, 200)
    assert stats.to_dict() == run_campaign(gens, schedule, spec, 200).stats.to_dict()
    assert monte_carlo(gens, schedule, spec, 200, threads=3).to_dict() == stats.to_dict()
    assert stats.trials == 200
    assert 0.1 < stats.mean / 1e-4 < 10
    assert stats.mean_stderr == pytest.approx(stats.std / math.sqrt(200), rel=1e-12)

    quiet = monte_carlo(gens, schedule, NoiseSpec(0.0), 100)
    assert quiet.mean == 0.0 and quiet.std == 0.0

    with pytest.raises(ValueError):
        monte_carlo(gens, schedule, spec, 99)
    print("✓ test_monte_carlo_summary")


def test_scalar_lognormal_chain():
    """Log-normal scalar chain matches its moments, shape and lower bounds"""
    N, eps = 100, 0.05
    schedule = build_schedule(1, OrderSpec("trotter", r=N), 1.0)
    result = run_campaign(scalar_family(), schedule, NoiseSpec(eps, "lognormal", 7), 4000)

    mu, sigma = lognormal_product_moments(N, eps)
    x = summarize(result.norm_ratio)
    assert x.mean == pytest.approx(mu, rel=0.04)
    assert x.std == pytest.approx(sigma, rel=0.1)
    assert ks_distance(result.epsilon, lambda e: folded_lognormal_cdf(e, N, eps)) <= 0.04

    verdicts = evaluate_verdicts(result, theorem_bounds(N, 1, eps))
    assert verdicts["scalar_mean_lower"] == "satisfied"
    assert verdicts["scalar_std_lower"] == "satisfied"
    assert verdicts["thm2_lower"] == "not-applicable"
    print("✓ test_scalar_lognormal_chain")


def test_scalar_gaussian_chain():
    """Additive real noise: X has mean 1 and σ = √((1+ε²)^N − 1)"""
    N, eps = 100, 0.05
    schedule = build_schedule(1, OrderSpec("trotter", r=N), 1.0)
    result = run_campaign(scalar_family(), schedule, NoiseSpec(eps, "gaussian", 3), 4000)
    mu, sigma = gaussian_product_moments(N, eps)
    x = summarize(result.norm_ratio)
    assert x.mean == pytest.approx(mu, abs=0.05)
    assert x.std == pytest.approx(sigma, rel=0.1)
    assert evaluate_verdicts(result, theorem_bounds(N, 1, eps))["scalar_mean_lower"] == "not-applicable"
    print("✓ test_scalar_gaussian_chain")


def test_product_moments():
    """Closed forms at N = 100, ε_m = 0.05"""
    mu, sigma = lognormal_product_moments(100, 0.05)
    assert mu == pytest.approx(1.13315, rel=1e-5)
    assert sigma == pytest.approx(0.6039005, rel=1e-5)
    assert gaussian_product_moments(100, 0.05) == (1.0, pytest.approx(0.53257, rel=1e-4))
    print("✓ test_product_moments")


def test_scalar_bounds():
    """Mean bound e^{Nε²/2} − 1; σ bound clamps a negative radicand to 0; overflow is inf"""
    mean_lower, std_lower = scalar_bounds(100, 0.05)
    assert mean_lower == pytest.approx(0.13315, rel=1e-4)
    assert std_lower == 0.0
    mean_lower, std_lower = scalar_bounds(100, 0.2)
    assert mean_lower == pytest.approx(math.exp(2) - 1)
    assert std_lower == pytest.approx(math.sqrt(math.exp(8) - math.exp(4) - 2 * math.exp(2) + 1))
    assert scalar_bounds(10**6, 0.05) == (math.inf, math.inf)
    print("✓ test_scalar_bounds")


def test_densities_integrate_to_one():
    """The folded log-normal and quarter-circle densities are normalized"""
    total = integrate_density(lambda e: folded_lognormal_pdf(e, 100, 0.05), 0.0, 20.0, points=[1.0])
    assert total == pytest.approx(1.0, abs=1e-6)
    assert integrate_density(lambda x: lognormal_pdf(x, 100, 0.05), 1e-12, 20.0) == pytest.approx(1.0, abs=1e-6)

    edge = 2 * 0.01 * math.sqrt(16)
    assert integrate_density(lambda x: single_factor_norm_pdf(x, 0.01, 16), 0.0, edge) == pytest.approx(1.0, abs=1e-6)
    assert single_factor_norm_cdf(edge, 0.01, 16) == pytest.approx(1.0)
    assert single_factor_norm_cdf(0.0, 0.01, 16) == 0.0
    assert single_factor_norm_pdf(edge * 1.01, 0.01, 16) == 0.0
    with pytest.raises(ValueError):
        lognormal_pdf(0.0, 100, 0.05)
    print("✓ test_densities_integrate_to_one")


def test_error_spectrum_follows_quarter_circle():
    """Singular values of the element error on a flat matrix follow the quarter circle"""
    dim, eps = 48, 0.01
    values = error_spectrum(np.ones((dim, dim)), NoiseSpec(eps, "gaussian", 5), 100)
    assert values.shape == (100 * dim,)
    assert ks_distance(values, lambda x: single_factor_norm_cdf(x, eps, dim)) <= 0.06
    print("✓ test_error_spectrum_follows_quarter_circle")


def test_factor_error_corridor():
    """RMS relative norm error of one factor lies between ε_m and ε_m√ℓ"""
    dim, eps = 8, 1e-3
    gens = random_family(dim, 1, "skew_hermitian", 1.0, seed=1)
    schedule = build_schedule(1, OrderSpec("trotter"), 1.0)
    result = run_campaign(gens, schedule, NoiseSpec(eps, "gaussian", 9), 500)
    bounds = theorem_bounds(1, dim, eps)
    assert 0.9 * bounds.lemma1_lower <= result.factor_error_rms <= 1.1 * bounds.lemma1_upper
    print("✓ test_factor_error_corridor")


def test_theorem_bounds():
    """Closed forms, log-space overflow and the budget inversion"""
    bounds = theorem_bounds(3, 4, 1e-3, epsilon_t=1e-2)
    assert bounds.thm2_lower == pytest.approx(3 * 4 * 1e-3)
    assert bounds.thm3_upper == pytest.approx(3 * 1e-3 * STABILITY_CONSTANT)
    assert bounds.cor5_upper == pytest.approx(3 * 1e-3 * 2)
    assert bounds.lemma1_support == pytest.approx(4e-3)
    assert theorem_bounds(2000, 4, 1e-3).thm2_lower == math.inf
    assert STABILITY_CONSTANT == pytest.approx(math.sqrt(5 * math.e**2 - 4 * math.e))

    assert required_machine_epsilon(1e-2, 100, 4) == pytest.approx(9.79e-6, rel=2e-3)
    with pytest.raises(ValueError):
        required_machine_epsilon(0.0, 100, 4)
    with pytest.raises(ValueError):
        theorem_bounds(0, 4, 1e-3)
    print("✓ test_theorem_bounds")


def test_unitary_verdicts():
    """Projected unitary factors satisfy the unitary and linear bounds"""
    gens = random_family(2, 5, "skew_hermitian", 1.0, seed=4)
    schedule = build_schedule(5, OrderSpec("trotter", r=4), 1.0)
    unitary = run_campaign(gens, schedule, NoiseSpec(1e-4, "gaussian_unitary", 1), 500)
    verdicts = evaluate_verdicts(unitary, theorem_bounds(schedule.N, 2, 1e-4))
    assert verdicts["cor5_upper"] == "satisfied"
    assert verdicts["thm3_upper"] == "satisfied"
    assert verdicts["cor4_budget"] == "not-applicable"

    plain = run_campaign(gens, schedule, NoiseSpec(1e-4, "gaussian", 1), 500)
    assert evaluate_verdicts(plain, theorem_bounds(schedule.N, 2, 1e-4))["cor5_upper"] == "not-applicable"
    print("✓ test_unitary_verdicts")


def test_fit_growth_synthetic():
    """Exact linear, exponential and constant data are classified correctly"""
    n = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    linear = fit_growth([(x, 2 * x + 1) for x in n])
    assert linear.model == "linear"
    assert linear.rate == pytest.approx(2.0)
    assert linear.r_squared == pytest.approx(1.0)

    exponential = fit_growth([(x, 0.01 * math.exp(0.8 * x)) for x in n])
    assert exponential.model == "exponential"
    assert exponential.rate == pytest.approx(0.8, rel=1e-6)

    concave = fit_growth([(x, math.sqrt(x)) for x in [10.0, 25.0, 50.0, 100.0]])
    assert concave.model == "linear"

    flat = fit_growth([(x, 0.5) for x in n])
    assert (flat.model, flat.rate, flat.r_squared) == ("linear", 0.0, 1.0)

    with pytest.raises(ValueError):
        fit_growth([(1, 1.0), (2, 2.0), (3, 3.0)])
    with pytest.raises(ValueError):
        fit_growth([(1, 1.0), (3, 2.0), (2, 3.0), (4, 4.0)])
    print("✓ test_fit_growth_synthetic")


def test_echo_errors_grow_exponentially():
    """Element errors around a stretching echo grow like growth^N"""
    gens = echo_family(4, 1.2, seed=3)
    points = []
    for N in (8, 16, 24, 32):
        result = run_campaign(gens, echo_schedule(N), NoiseSpec(1e-3, "gaussian", 5), 1000)
        points.append((N, result.stats.std))
    fit = fit_growth(points)
    assert fit.model == "exponential"
    assert 0.1 < fit.rate < 0.3
    assert fit.r_squared >= 0.95
    print("✓ test_echo_errors_grow_exponentially")


def test_unitary_errors_grow_linearly():
    """Unitary-projected factors keep σ(ε) on a linear trend below the unitary bound"""
    gens = random_family(2, 5, "skew_hermitian", 1.0, seed=17)
    points = []
    for N in (10, 25, 50, 100):
        schedule = build_schedule(5, OrderSpec("trotter", r=N // 5), 1.0)
        result = run_campaign(gens, schedule, NoiseSpec(1e-4, "gaussian_unitary", 23), 1000)
        assert result.stats.std <= theorem_bounds(N, 2, 1e-4).cor5_upper
        points.append((N, result.stats.std))
    assert fit_growth(points).model == "linear"
    print("✓ test_unitary_errors_grow_linearly")


def run_all_tests():
    """Run all stability analysis tests"""
    tests = [
        test_summarize,
        test_campaign_independent_of_threads_and_chunks,
        test_campaign_validation,
        test_zero_noise_campaign,
        test_monte_carlo_summary,
        test_scalar_lognormal_chain,
        test_scalar_gaussian_chain,
        test_product_moments,
        test_scalar_bounds,
        test_densities_integrate_to_one,
        test_error_spectrum_follows_quarter_circle,
        test_factor_error_corridor,
        test_theorem_bounds,
        test_unitary_verdicts,
        test_fit_growth_synthetic,
        test_echo_errors_grow_exponentially,
        test_unitary_errors_grow_linearly,
    ]

    print("\nRunning Stability Analysis Tests")
    print("=" * 40)

    failed = []
    for test in tests:
        try:
            test()
        except AssertionError as e:
            print(f"✗ {test.__name__}: {e}")
            failed.append(test.__name__)
        except Exception as e:
            print(f"✗ {test.__name__}: Unexpected error - {e}")
            failed.append(test.__name__)

    print("=" * 40)
    if not failed:
        print(f"✅ All {len(tests)} tests passed!")
        return True
    else:
        print(f"❌ {len(failed)} tests failed: {', '.join(failed)}")
        return False


if __name__ == "__main__":
    os.chdir(Path(__file__).parent.parent)
    success = run_all_tests()
    sys.exit(0 if success else 1)
