//! Actively-odd-parity pairing: Alice pairs each of her bit-1 code bits with
//! a bit-0 code bit, Bob keeps the pairs whose parity he also finds odd, and
//! one bit of every surviving pair is kept.
//!
//! Only right pairs (no bit-flip error) and double-error pairs survive, so
//! the post-selected error rate is roughly the product of the two sides'
//! error rates. A pair counts as untagged when both of its bits are
//! untagged; the kept bit then carries a phase error exactly when one of
//! the two bits did.

use serde::{Deserialize, Serialize};

use crate::decoy::{BitGroup, CodeBitSplit, CountsTable};
use crate::error::Result;
use crate::model::Label;
use crate::stats;

/// Expected outcome of random odd-parity pairing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingExpectation {
    /// `min(bit-1 count, bit-0 count)`.
    pub n_odd: f64,
    pub n_t_prime: f64,
    pub n_e_prime: f64,
}

impl PairingExpectation {
    pub fn n_r_prime(&self) -> f64 {
        self.n_t_prime - self.n_e_prime
    }

    pub fn e_t_prime(&self) -> f64 {
        if self.n_t_prime > 0.0 {
            (self.n_e_prime / self.n_t_prime).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AoppResult {
    pub n_odd: f64,
    pub n_t_prime: f64,
    pub e_t_prime: f64,
    pub n_e_prime: f64,
    pub n_r_prime: f64,
    pub n1_prime_l: f64,
    pub e1ph_prime_u: f64,
    /// Surviving pairs with at least one vacuum-emission bit.
    pub n0_prime_l: f64,
    /// Surviving pairs grouped by Alice's non-vacuum intensity.
    pub groups: Vec<(Label, BitGroup)>,
}

/// Expected survivors when bit-1 bits `one` are randomly paired with
/// bit-0 bits `zero`; the larger side is randomly subsampled first.
pub fn aopp_expected(split: &CodeBitSplit) -> PairingExpectation {
    let (one, zero) = (split.alice_one, split.alice_zero);
    let n_odd = one.total.min(zero.total);
    if !(n_odd > 0.0) {
        return PairingExpectation::default();
    }
    let (e1, e0) = (one.error_rate(), zero.error_rate());
    let right = (1.0 - e1) * (1.0 - e0);
    let double = e1 * e0;
    PairingExpectation { n_odd, n_t_prime: n_odd * (right + double), n_e_prime: n_odd * double }
}

/// Failure probabilities reserved for the pairing bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingEps {
    pub subsample: f64,
    pub pairing: f64,
    pub phase: f64,
    pub vacuum: Option<f64>,
}

/// Number of concentration-bound slots drawn by the pairing bounds.
pub fn slots(vacuum_bits: bool) -> usize {
    3 + usize::from(vacuum_bits)
}

/// Lower bound on the hypergeometric count of marked items when `draws`
/// items are taken without replacement from `population` items of which
/// `marked` are marked. Combines the certain floor with a Chernoff bound,
/// which holds for sampling without replacement as well.
fn hypergeometric_lower(population: f64, marked: f64, draws: f64, eps: Option<f64>) -> Result<f64> {
    if population <= 0.0 || draws <= 0.0 {
        return Ok(0.0);
    }
    let marked = marked.clamp(0.0, population);
    let draws = draws.min(population);
    let floor = (marked + draws - population).max(0.0);
    let mean = draws * marked / population;
    let chernoff = match eps {
        Some(e) => stats::observed_lower(mean, e)?,
        None => mean,
    };
    Ok(chernoff.max(floor).min(marked.min(draws)))
}

/// Lower bound on the surviving untagged pairs, from the untagged bits on
/// each side before pairing (`untagged.0` among Alice's bit-1 bits,
/// `untagged.1` among her bit-0 bits). `eps = None` gives the expectation.
pub fn n1_prime_lower(split: &CodeBitSplit, untagged: (f64, f64), eps: Option<(f64, f64)>) -> Result<f64> {
    let (n1, n0) = (split.alice_one.total, split.alice_zero.total);
    let n_odd = n1.min(n0);
    if !(n_odd > 0.0) {
        return Ok(0.0);
    }
    let u1 = untagged.0.clamp(0.0, split.alice_one.right());
    let u0 = untagged.1.clamp(0.0, split.alice_zero.right());
    let (eps_sub, eps_pair) = match eps {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    // untagged bits left on each side once the larger side is cut to n_odd
    let (a1, a0) = if n1 >= n0 {
        (hypergeometric_lower(n1, u1, n_odd, eps_sub)?, u0)
    } else {
        (u1, hypergeometric_lower(n0, u0, n_odd, eps_sub)?)
    };
    // the random bijection puts a0 of the bit-0 untagged bits against a set
    // holding a1 untagged bit-1 bits
    hypergeometric_lower(n_odd, a1, a0, eps_pair)
}

/// Upper bound on the phase-flip error rate of surviving untagged pairs.
///
/// With per-bit phase-error rate `e` the kept bit is wrong in phase with
/// probability `2e(1 − e)`; the realized count over `n1'` pairs is bounded
/// from above by a Chernoff bound. Capped at one half.
pub fn e1ph_prime_upper(e1ph_u: f64, n1_prime: f64, eps: Option<f64>) -> Result<f64> {
    let e = e1ph_u.clamp(0.0, 0.5);
    if e == 0.0 {
        return Ok(0.0);
    }
    if !(n1_prime > 0.0) {
        return Ok(0.5);
    }
    let mean = n1_prime * 2.0 * e * (1.0 - e);
    let hi = match eps {
        Some(eps) => stats::observed_upper(mean, eps)?,
        None => mean,
    };
    Ok((hi / n1_prime).min(0.5))
}

/// Lower bound on surviving pairs that contain at least one bit whose
/// source actually emitted vacuum.
pub fn n0_prime_lower(split: &CodeBitSplit, vacuum_bits: (f64, f64), eps: Option<f64>) -> Result<f64> {
    let (n1, n0) = (split.alice_one.total, split.alice_zero.total);
    let n_odd = n1.min(n0);
    if !(n_odd > 0.0) {
        return Ok(0.0);
    }
    let v1 = (vacuum_bits.0 / n1).clamp(0.0, 1.0);
    let v0 = (vacuum_bits.1 / n0).clamp(0.0, 1.0);
    let mean = n_odd * (v1 + v0 - v1 * v0);
    match eps {
        Some(e) => stats::observed_lower(mean, e),
        None => Ok(mean),
    }
}

/// Expected surviving pairs grouped by the intensity Alice used for the
/// bit-1 member of each pair, with their error counts.
pub fn refined_groups(counts: &CountsTable) -> Vec<(Label, BitGroup)> {
    let split = counts.code_split();
    let (n1, n0) = (split.alice_one.total, split.alice_zero.total);
    let n_odd = n1.min(n0);
    let layout = counts.layout;
    let vac = layout.code_vacuum();
    let sending = layout.sending_labels();
    let zero_err = split.alice_zero.errors;
    let zero_right = split.alice_zero.right();
    sending
        .iter()
        .map(|&l| {
            if !(n_odd > 0.0) {
                return (l, BitGroup::default());
            }
            let err: f64 = sending.iter().map(|&r| counts.n(l, r)).sum();
            let right = counts.n(l, vac);
            let wrong_pairs = n_odd * (err / n1) * (zero_err / n0);
            let right_pairs = n_odd * (right / n1) * (zero_right / n0);
            (l, BitGroup { total: wrong_pairs + right_pairs, errors: wrong_pairs })
        })
        .collect()
}
