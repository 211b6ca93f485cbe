//! Multiplicative Chernoff bounds in their tight form, inverted in both
//! directions: from an observed count to an interval on its expectation,
//! and from an expectation to an interval on a future observed count.
//!
//! For a sum `X` of independent Bernoulli variables with mean `E`,
//!
//! ```text
//! P(X ≥ (1+δ)E) ≤ (e^δ / (1+δ)^(1+δ))^E
//! P(X ≤ (1−δ)E) ≤ (e^−δ / (1−δ)^(1−δ))^E
//! ```
//!
//! Each bound sets the right-hand side equal to `ε` and solves for `δ` by
//! bisection. Counts are `f64` so that expected counts can be fed through
//! the same path as observed ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DELTA_MIN: f64 = 1e-12;
const DELTA_MAX: f64 = 1e6;
const MAX_BISECTIONS: usize = 2000;

fn check_eps(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Bound(format!("failure probability must lie in (0, 1), got {eps}")));
    }
    Ok(-eps.ln())
}

fn check_count(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Bound(format!("{name} must be a finite non-negative count, got {v}")));
    }
    Ok(())
}

/// Root of an increasing function on `[lo, hi]`, with `g(lo) < 0 < g(hi)`.
fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..MAX_BISECTIONS {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Bound(format!("bisection stalled in [{lo}, {hi}]")))
}

/// `ln(1+x) − x/(1+x)`, accurate for small `x`.
fn lower_rate(x: f64) -> f64 {
    if x < 1e-4 {
        x * x * (0.5 - x * (2.0 / 3.0 - 0.75 * x))
    } else {
        x.ln_1p() - x / (1.0 + x)
    }
}

/// `t − ln(1+t)`, accurate for small `t`.
fn upper_rate(t: f64) -> f64 {
    if t < 1e-4 {
        t * t * (0.5 - t * (1.0 / 3.0 - 0.25 * t))
    } else {
        t - t.ln_1p()
    }
}

/// Lower bound `E^L` on the expectation of a count observed as `k`.
///
/// `E^L = k / (1+δ)` where `δ` solves `(e^δ/(1+δ)^(1+δ))^(E^L) = ε`.
pub fn expected_lower(k: f64, n: f64, eps: f64) -> Result<f64> {
    let l = check_eps(eps)?;
    check_count("observed count", k)?;
    check_count("trials", n)?;
    if k > n * (1.0 + 1e-12) {
        return Err(Error::Bound(format!("observed count {k} exceeds trials {n}")));
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    // h(δ) = E·[(1+δ)ln(1+δ) − δ] − ln(1/ε) with E = k/(1+δ)
    let h = |d: f64| k * lower_rate(d) - l;
    if h(DELTA_MIN) >= 0.0 {
        return Ok(k);
    }
    // the bound falls below k·e^{-ln(1/ε)/k - 1}; beyond the bracket zero is the sound answer
    if h(DELTA_MAX) < 0.0 {
        return Ok(0.0);
    }
    let d = bisect(h, DELTA_MIN, DELTA_MAX)?;
    Ok(k / (1.0 + d))
}

/// Upper bound `E^U` on the expectation of a count observed as `k`.
///
/// `E^U = k / (1−δ)` where `δ` solves `(e^−δ/(1−δ)^(1−δ))^(E^U) = ε`.
/// The bisection runs on `t = δ/(1−δ)`, so `E^U = k(1+t)`; as `k → 0` the
/// bound tends to `ln(1/ε)`.
pub fn expected_upper(k: f64, n: f64, eps: f64) -> Result<f64> {
    let l = check_eps(eps)?;
    check_count("observed count", k)?;
    check_count("trials", n)?;
    if k > n * (1.0 + 1e-12) {
        return Err(Error::Bound(format!("observed count {k} exceeds trials {n}")));
    }
    if k == 0.0 {
        return Ok(l);
    }
    let h = |t: f64| k * upper_rate(t) - l;
    if h(DELTA_MIN) >= 0.0 {
        return Ok(k);
    }
    let hi = DELTA_MAX.max(2.0 * l / k + 10.0);
    let t = bisect(h, DELTA_MIN, hi)?;
    Ok(k * (1.0 + t))
}

/// Lower bound on a future observed count whose expectation is `mean`.
pub fn observed_lower(mean: f64, eps: f64) -> Result<f64> {
    let l = check_eps(eps)?;
    check_count("expected count", mean)?;
    if mean == 0.0 {
        return Ok(0.0);
    }
    // m[δ + (1−δ)ln(1−δ)] = ln(1/ε), increasing in δ towards m at δ = 1
    let g = |d: f64| mean * (d + (1.0 - d) * (-d).ln_1p()) - l;
    if mean <= l {
        return Ok(0.0);
    }
    if g(DELTA_MIN) >= 0.0 {
        return Ok(mean);
    }
    let d = bisect(g, DELTA_MIN, 1.0 - 1e-16)?;
    Ok(mean * (1.0 - d))
}

/// Upper bound on a future observed count whose expectation is `mean`.
pub fn observed_upper(mean: f64, eps: f64) -> Result<f64> {
    let l = check_eps(eps)?;
    check_count("expected count", mean)?;
    if mean == 0.0 {
        return Ok(0.0);
    }
    // m[(1+δ)ln(1+δ) − δ] = ln(1/ε)
    let g = |d: f64| mean * ((1.0 + d) * d.ln_1p() - d) - l;
    if g(DELTA_MIN) >= 0.0 {
        return Ok(mean);
    }
    let hi = DELTA_MAX.max(l / mean + 10.0);
    let d = bisect(g, DELTA_MIN, hi)?;
    Ok(mean * (1.0 + d))
}

/// Direction-tagged entry of the failure-probability ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub purpose: String,
    pub eps: f64,
}

/// Total failure probability split equally across a known number of
/// concentration-bound invocations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureBudget {
    pub xi_total: f64,
    pub slots: usize,
    pub allocation: Vec<Allocation>,
}

impl FailureBudget {
    pub fn equal_split(xi_total: f64, slots: usize) -> Result<Self> {
        if !(xi_total > 0.0 && xi_total < 1.0) {
            return Err(Error::Bound(format!("total failure probability must lie in (0, 1), got {xi_total}")));
        }
        if slots == 0 {
            return Err(Error::Bound("failure budget needs at least one slot".into()));
        }
        Ok(FailureBudget { xi_total, slots, allocation: Vec::with_capacity(slots) })
    }

    pub fn per_use(&self) -> f64 {
        self.xi_total / self.slots as f64
    }

    /// Draws one allocation; fails once every slot is spent.
    pub fn draw(&mut self, purpose: &str) -> Result<f64> {
        if self.allocation.len() >= self.slots {
            return Err(Error::BudgetExhausted { used: self.allocation.len() + 1, allocated: self.slots });
        }
        let eps = self.per_use();
        self.allocation.push(Allocation { purpose: purpose.to_string(), eps });
        Ok(eps)
    }

    pub fn consumed(&self) -> f64 {
        self.allocation.iter().map(|a| a.eps).sum()
    }

    /// Compact `count×eps` form for tabular output.
    pub fn summary(&self) -> String {
        format!("{}x{:.3e}", self.allocation.len(), self.per_use())
    }
}
