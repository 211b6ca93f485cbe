//! The model, the decoy bounds and the pairing bounds checked against the
//! window-level simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snstf_core::aopp;
use snstf_core::decoy::{self, BitGroup, CodeBitSplit, EstimateOptions};
use snstf_core::model::{expected_yields, ChannelModel, CodeBitOption, Label, ProtocolParams, Scheme};
use snstf_core::montecarlo::{simulate, simulate_aopp, BitRecord, SimConfig};
use snstf_core::stats::FailureBudget;

fn random_config(rng: &mut ChaCha8Rng, option: CodeBitOption) -> (ProtocolParams, ChannelModel) {
    let mu_x = rng.random_range(0.05..0.3);
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let p = ProtocolParams {
        mu_x,
        mu_y: mu_x + rng.random_range(0.1..0.5),
        mu_z: rng.random_range(0.1..0.9),
        p_v: w[0] / s,
        p_x: w[1] / s,
        p_y: w[2] / s,
        p_z: 1.0 - (w[0] + w[1] + w[2]) / s,
        p_o: 0.0,
        n_total: 1e6,
        lambda: rng.random_range(0.02..0.3),
        option,
        scheme: Scheme::Improved,
    };
    let mut ch = ChannelModel::reference(rng.random_range(0.0..60.0));
    ch.dark = 10f64.powf(rng.random_range(-6.0..-3.0));
    ch.symmetric = rng.random_bool(0.5);
    if !ch.symmetric {
        ch.alice_fraction = rng.random_range(0.3..0.7);
    }
    (p, ch)
}

#[test]
fn yields_agree_with_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..4 {
        let (p, ch) = random_config(&mut rng, CodeBitOption::Xyz);
        let y = expected_yields(&p, &ch).unwrap();
        let cfg = SimConfig { n_windows: 2_000_000, seed: 100 + i, params: p.clone(), channel: ch, tag_truth: false, keep_bits: false };
        let out = simulate(&cfg).unwrap();
        for l in [Label::V, Label::X, Label::Y, Label::Z] {
            for r in [Label::V, Label::X, Label::Y, Label::Z] {
                let n = out.counts.big_n(l, r);
                let s = y.s(l, r);
                let sd = (s * (1.0 - s) / n).sqrt().max(1.0 / n);
                let obs = out.counts.n(l, r) / n;
                assert!((obs - s).abs() <= 5.0 * sd, "config {i} {l}{r}: observed {obs}, model {s}, sd {sd}");
            }
        }
        let nxx = out.counts.big_n(Label::X, Label::X);
        let a = out.counts.x_accepted / nxx;
        assert!((a - y.a_lambda).abs() <= 5.0 * (y.a_lambda * (1.0 - y.a_lambda) / nxx).sqrt());
        let t = out.counts.x_errors / out.counts.x_accepted;
        let sd = (y.t_x * (1.0 - y.t_x) / out.counts.x_accepted).sqrt().max(1.0 / out.counts.x_accepted);
        assert!((t - y.t_x).abs() <= 5.0 * sd, "config {i}: T_X observed {t}, model {}", y.t_x);
    }
}

#[test]
fn decoy_bounds_hold_on_simulated_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = EstimateOptions::default();
    for seed in 0..30u64 {
        let option = CodeBitOption::ALL[seed as usize % 3];
        let (p, ch) = random_config(&mut rng, option);
        let cfg = SimConfig { n_windows: 1_000_000, seed, params: p.clone(), channel: ch, tag_truth: true, keep_bits: false };
        let out = simulate(&cfg).unwrap();
        let mut budget = FailureBudget::equal_split(1e-10, opts.slots()).unwrap();
        let b = decoy::estimate(&out.counts, &p, &mut budget, &opts).unwrap();
        assert!(b.n1_l <= out.truth.n1() as f64, "seed {seed}: n1_L {} > {}", b.n1_l, out.truth.n1());
        let e = out.truth.phase_error_rate();
        assert!(b.e1ph_u >= e, "seed {seed}: e1ph_U {} < {e}", b.e1ph_u);
    }
}

fn mixed_bits(rng: &mut ChaCha8Rng, n: usize, error_rate: f64, untagged: f64, phase: f64) -> Vec<BitRecord> {
    (0..n)
        .map(|i| {
            let error = rng.random_bool(error_rate);
            let u = !error && rng.random_bool(untagged);
            BitRecord { alice_bit: i % 2 == 0, error, untagged: u, phase_error: u && rng.random_bool(phase) }
        })
        .collect()
}

fn split_of(bits: &[BitRecord]) -> CodeBitSplit {
    let group = |one: bool| {
        let g: Vec<_> = bits.iter().filter(|b| b.alice_bit == one).collect();
        BitGroup { total: g.len() as f64, errors: g.iter().filter(|b| b.error).count() as f64 }
    };
    CodeBitSplit { alice_one: group(true), alice_zero: group(false) }
}

#[test]
fn pairing_matches_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bits = mixed_bits(&mut rng, 100_000, 0.1, 0.0, 0.0);
    let exp = aopp::aopp_expected(&split_of(&bits));
    let reps = 1000;
    let (mut sum, mut sum_sq, mut e_sum) = (0.0, 0.0, 0.0);
    for seed in 0..reps {
        let r = simulate_aopp(&bits, seed);
        sum += r.n_t_prime as f64;
        sum_sq += (r.n_t_prime as f64).powi(2);
        e_sum += r.e_t_prime();
    }
    let mean = sum / reps as f64;
    let sd = ((sum_sq / reps as f64 - mean * mean) / reps as f64).sqrt();
    assert!((mean - exp.n_t_prime).abs() <= 3.0 * sd + 1e-9, "{mean} vs {}", exp.n_t_prime);
    let e_mean = e_sum / reps as f64;
    assert!((e_mean - exp.e_t_prime()).abs() < 0.05 * exp.e_t_prime(), "{e_mean} vs {}", exp.e_t_prime());
}

#[test]
fn pairing_bounds_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let eps = 1e-3;
    let bits = mixed_bits(&mut rng, 1_000_000, 0.02, 0.4 / 0.98, 0.05);
    let split = split_of(&bits);
    let u1 = bits.iter().filter(|b| b.alice_bit && b.untagged).count() as f64;
    let u0 = bits.iter().filter(|b| !b.alice_bit && b.untagged).count() as f64;
    let n1p = aopp::n1_prime_lower(&split, (u1, u0), Some((eps, eps))).unwrap();
    let e1p = aopp::e1ph_prime_upper(0.05, n1p, Some(eps)).unwrap();
    assert!(e1p > 0.05 && e1p < 0.12, "{e1p}");
    let (mut n_viol, mut e_viol) = (0, 0);
    for seed in 0..1000 {
        let r = simulate_aopp(&bits, seed);
        if (r.untagged_pairs as f64) < n1p {
            n_viol += 1;
        }
        if r.phase_errors as f64 / r.untagged_pairs as f64 > e1p {
            e_viol += 1;
        }
    }
    let allowed = 1000.0 * 2.0 * eps + 3.0 * (1000.0 * 2.0 * eps).sqrt();
    assert!((n_viol as f64) <= allowed, "{n_viol}");
    assert!((e_viol as f64) <= allowed + 1000.0 * eps, "{e_viol}");
}
