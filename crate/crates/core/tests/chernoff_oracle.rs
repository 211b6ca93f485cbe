//! Chernoff inversions against exact binomial and Poisson tails.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial as BinomialSampler, Distribution};
use snstf_core::stats::{expected_lower, expected_upper, observed_lower, observed_upper};
use statrs::distribution::{Binomial, DiscreteCDF, Poisson};

fn bisect(mut lo: f64, mut hi: f64, too_high: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if too_high(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest mean whose binomial upper tail at `k` is still at most `eps`.
fn exact_expected_lower(k: u64, n: u64, eps: f64) -> f64 {
    bisect(0.0, k as f64, |m| {
        let b = Binomial::new(m / n as f64, n).unwrap();
        b.sf(k - 1) > eps
    })
}

/// Smallest mean whose binomial lower tail at `k` is at most `eps`.
fn exact_expected_upper(k: u64, n: u64, eps: f64) -> f64 {
    bisect(k as f64, n as f64, |m| {
        let b = Binomial::new(m / n as f64, n).unwrap();
        b.cdf(k) <= eps
    })
}

/// Largest count `x` with `P(X < x) ≤ eps` for Poisson `X`.
fn exact_observed_lower(mean: f64, eps: f64) -> f64 {
    let p = Poisson::new(mean).unwrap();
    let mut x = mean as u64;
    while x > 0 && p.cdf(x - 1) > eps {
        x -= 1;
    }
    x as f64
}

#[test]
fn agrees_with_binomial_tails_within_half_percent() {
    let (k, n, eps) = (10_000u64, 1_000_000u64, 1e-10);
    let lo = expected_lower(k as f64, n as f64, eps).unwrap();
    let lo_exact = exact_expected_lower(k, n, eps);
    assert!(lo <= lo_exact, "{lo} > {lo_exact}");
    assert!((lo_exact - lo) / lo_exact < 0.005, "{lo} vs {lo_exact}");

    let hi = expected_upper(k as f64, n as f64, eps).unwrap();
    let hi_exact = exact_expected_upper(k, n, eps);
    assert!(hi >= hi_exact, "{hi} < {hi_exact}");
    assert!((hi - hi_exact) / hi_exact < 0.005, "{hi} vs {hi_exact}");

    let ol = observed_lower(1e4, eps).unwrap();
    let ol_exact = exact_observed_lower(1e4, eps);
    assert!(ol <= ol_exact && (ol_exact - ol) / ol_exact < 0.005, "{ol} vs {ol_exact}");
}

#[test]
fn zero_count_upper_bound_matches_vacuum_tail() {
    let (n, eps): (f64, f64) = (1e6, 1e-10);
    let exact = n * (1.0 - eps.powf(1.0 / n));
    let u = expected_upper(0.0, n, eps).unwrap();
    assert!(u >= exact * (1.0 - 1e-9) && (u - exact) / exact < 0.005, "{u} vs {exact}");
}

#[test]
fn empirical_coverage() {
    let (n, p, eps, trials) = (1000u64, 0.05, 1e-2, 10_000);
    let mean = n as f64 * p;
    let sampler = BinomialSampler::new(n, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut misses = 0;
    let mut obs_misses = 0;
    for _ in 0..trials {
        let x = sampler.sample(&mut rng) as f64;
        let lo = expected_lower(x, n as f64, eps).unwrap();
        let hi = expected_upper(x, n as f64, eps).unwrap();
        if mean < lo || mean > hi {
            misses += 1;
        }
        if x < observed_lower(mean, eps).unwrap() || x > observed_upper(mean, eps).unwrap() {
            obs_misses += 1;
        }
    }
    let rate = 2.0 * eps;
    let slack = 3.0 * (rate * (1.0 - rate) / trials as f64).sqrt();
    assert!((misses as f64 / trials as f64) <= rate + slack, "{misses}");
    assert!((obs_misses as f64 / trials as f64) <= rate + slack, "{obs_misses}");
}

proptest! {
    #[test]
    fn sandwich(k in 0.0f64..1e8, extra in 0.0f64..1e9, eps in 1e-15f64..0.5) {
        let n = k + extra;
        let lo = expected_lower(k, n, eps).unwrap();
        let hi = expected_upper(k, n, eps).unwrap();
        prop_assert!(lo <= k && k <= hi);
        prop_assert!(observed_lower(k, eps).unwrap() <= k);
        prop_assert!(observed_upper(k, eps).unwrap() >= k);
    }

    #[test]
    fn monotone_in_eps_and_count(k in 1.0f64..1e7, dk in 0.0f64..1e6, e1 in 1e-14f64..0.4, f in 1.0f64..1e3) {
        let n = 1e9;
        let e2 = (e1 * f).min(0.5);
        // looser confidence never widens the interval
        prop_assert!(expected_lower(k, n, e2).unwrap() >= expected_lower(k, n, e1).unwrap());
        prop_assert!(expected_upper(k, n, e2).unwrap() <= expected_upper(k, n, e1).unwrap() * (1.0 + 1e-12));
        prop_assert!(observed_lower(k, e2).unwrap() >= observed_lower(k, e1).unwrap());
        prop_assert!(observed_upper(k, e2).unwrap() <= observed_upper(k, e1).unwrap() * (1.0 + 1e-12));
        // larger counts move every bound up
        prop_assert!(expected_lower(k + dk, n, e1).unwrap() >= expected_lower(k, n, e1).unwrap() * (1.0 - 1e-12));
        prop_assert!(expected_upper(k + dk, n, e1).unwrap() >= expected_upper(k, n, e1).unwrap() * (1.0 - 1e-12));
        prop_assert!(observed_lower(k + dk, e1).unwrap() >= observed_lower(k, e1).unwrap() * (1.0 - 1e-12));
        prop_assert!(observed_upper(k + dk, e1).unwrap() >= observed_upper(k, e1).unwrap() * (1.0 - 1e-12));
    }
}
