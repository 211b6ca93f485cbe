//! Decoy-state estimation after error correction.
//!
//! Once bit-flip errors have been located every window's intensity pair is
//! known to the party that needs it, so the vacuum and decoy counting rates
//! are taken from all windows rather than from a reserved sample. Each
//! expected rate enters the single-photon formulas at the end of its
//! Chernoff interval that hurts the bound:
//!
//! | quantity | `s10_L` / `s01_L` | `e1ph_U` |
//! |----------|-------------------|----------|
//! | `S_xv`, `S_vx` | lower | via `s1_L` |
//! | `S_yv`, `S_vy` | upper | via `s1_L` |
//! | `S_vv` | upper | lower (numerator) |
//! | `T_X` | — | upper |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CodeLayout, Label, ProtocolParams, YieldTable};
use crate::stats::{self, FailureBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountKind {
    Expected,
    Observed,
}

/// Bit count and bit-flip error count of one group of code bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BitGroup {
    pub total: f64,
    pub errors: f64,
}

impl BitGroup {
    pub fn right(&self) -> f64 {
        self.total - self.errors
    }

    pub fn error_rate(&self) -> f64 {
        if self.total > 0.0 {
            self.errors / self.total
        } else {
            0.0
        }
    }
}

/// Code bits split by Alice's bit value: `alice_one` holds windows where
/// she sent a non-vacuum pulse, `alice_zero` those where she stayed silent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeBitSplit {
    pub alice_one: BitGroup,
    pub alice_zero: BitGroup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    /// `N_lr`, indexed by [`Label::index`].
    pub windows: [[f64; Label::COUNT]; Label::COUNT],
    /// `n_lr`.
    pub heralded: [[f64; Label::COUNT]; Label::COUNT],
    /// Heralded errors among phase-post-selected xx windows.
    pub x_errors: f64,
    /// Number of xx windows that passed the phase-slice condition.
    pub x_accepted: f64,
    /// Code bits `n_t`.
    pub n_t: f64,
    /// Bit-flip errors `n_E`.
    pub n_e: f64,
    pub layout: CodeLayout,
    pub kind: CountKind,
}

impl CountsTable {
    pub fn new(
        windows: [[f64; Label::COUNT]; Label::COUNT],
        heralded: [[f64; Label::COUNT]; Label::COUNT],
        x_errors: f64,
        x_accepted: f64,
        layout: CodeLayout,
        kind: CountKind,
    ) -> Result<Self> {
        let mut table = CountsTable { windows, heralded, x_errors, x_accepted, n_t: 0.0, n_e: 0.0, layout, kind };
        let (n_t, n_e) = table.code_bit_totals();
        table.n_t = n_t;
        table.n_e = n_e;
        table.validate()?;
        Ok(table)
    }

    /// Counts one would expect to observe: `N_lr = N_t p_l p_r`,
    /// `n_lr = N_lr S_lr`.
    pub fn expected(params: &ProtocolParams, yields: &YieldTable) -> Result<Self> {
        let mut windows = [[0.0; Label::COUNT]; Label::COUNT];
        let mut heralded = [[0.0; Label::COUNT]; Label::COUNT];
        for l in Label::ALL {
            for r in Label::ALL {
                let n = params.windows(l, r);
                windows[l.index()][r.index()] = n;
                heralded[l.index()][r.index()] = n * yields.s(l, r);
            }
        }
        let x_accepted = windows[Label::X.index()][Label::X.index()] * yields.a_lambda;
        Self::new(windows, heralded, x_accepted * yields.t_x, x_accepted, params.layout(), CountKind::Expected)
    }

    pub fn n(&self, l: Label, r: Label) -> f64 {
        self.heralded[l.index()][r.index()]
    }

    pub fn big_n(&self, l: Label, r: Label) -> f64 {
        self.windows[l.index()][r.index()]
    }

    pub fn total_windows(&self) -> f64 {
        self.windows.iter().flatten().sum()
    }

    fn code_bit_totals(&self) -> (f64, f64) {
        let mut n_t = 0.0;
        let mut n_e = 0.0;
        for l in Label::ALL {
            for r in Label::ALL {
                if self.layout.is_code_pair(l, r) {
                    n_t += self.n(l, r);
                    if self.layout.is_error_pair(l, r) {
                        n_e += self.n(l, r);
                    }
                }
            }
        }
        (n_t, n_e)
    }

    pub fn validate(&self) -> Result<()> {
        for l in Label::ALL {
            for r in Label::ALL {
                let (big, small) = (self.big_n(l, r), self.n(l, r));
                if !(small >= 0.0 && big.is_finite() && small <= big * (1.0 + 1e-12)) {
                    return Err(Error::Counts(format!("need 0 <= n_{l}{r} <= N_{l}{r}, got n={small}, N={big}")));
                }
            }
        }
        if !(self.x_errors >= 0.0 && self.x_errors <= self.x_accepted * (1.0 + 1e-12)) {
            return Err(Error::Counts(format!(
                "xx error count {} exceeds accepted windows {}",
                self.x_errors, self.x_accepted
            )));
        }
        let xx = self.big_n(Label::X, Label::X);
        if self.x_accepted > xx * (1.0 + 1e-12) {
            return Err(Error::Counts(format!("accepted xx windows {} exceed N_xx {xx}", self.x_accepted)));
        }
        let (n_t, n_e) = self.code_bit_totals();
        if n_t != self.n_t || n_e != self.n_e {
            return Err(Error::Counts(format!(
                "code-bit totals (n_t={}, n_E={}) disagree with option {} arithmetic ({n_t}, {n_e})",
                self.n_t, self.n_e, self.layout.option
            )));
        }
        Ok(())
    }

    pub fn qber(&self) -> f64 {
        if self.n_t > 0.0 {
            self.n_e / self.n_t
        } else {
            0.0
        }
    }

    pub fn code_split(&self) -> CodeBitSplit {
        let vac = self.layout.code_vacuum();
        let codes = self.layout.code_labels();
        let mut one = BitGroup::default();
        let mut zero = BitGroup::default();
        for &r in &codes {
            zero.total += self.n(vac, r);
            for &l in self.layout.sending_labels() {
                one.total += self.n(l, r);
                if self.layout.is_sending(r) {
                    one.errors += self.n(l, r);
                }
            }
        }
        zero.errors = self.n(vac, vac);
        CodeBitSplit { alice_one: one, alice_zero: zero }
    }

    /// Code bits grouped by Alice's label (vacuum first), each with its own
    /// error count.
    pub fn groups_by_alice_label(&self) -> Vec<(Label, BitGroup)> {
        let codes = self.layout.code_labels();
        codes
            .iter()
            .map(|&a| {
                let mut g = BitGroup::default();
                for &r in &codes {
                    g.total += self.n(a, r);
                    if self.layout.is_error_pair(a, r) {
                        g.errors += self.n(a, r);
                    }
                }
                (a, g)
            })
            .collect()
    }

    /// `n_t − n_vv − Σ n_l'r'` over the given non-vacuum labels.
    pub fn right_remainder(&self, labels: &[Label]) -> f64 {
        let vac = self.layout.code_vacuum();
        let mut rem = self.n_t - self.n(vac, vac);
        for &l in labels {
            for &r in labels {
                rem -= self.n(l, r);
            }
        }
        rem
    }
}

/// `<s10>^L` from Alice-side decoy rates.
pub fn s10_lower(svv: f64, sxv: f64, syv: f64, mu_x: f64, mu_y: f64) -> Result<f64> {
    if !(mu_x > 0.0 && mu_y > mu_x) {
        return Err(Error::Params(format!("decoy bound needs mu_y > mu_x > 0, got mu_x={mu_x}, mu_y={mu_y}")));
    }
    let num = mu_x.exp() * mu_y * mu_y * sxv - mu_y.exp() * mu_x * mu_x * syv - (mu_y * mu_y - mu_x * mu_x) * svv;
    Ok((num / (mu_x * mu_y * (mu_y - mu_x))).max(0.0))
}

/// `<s01>^L` from Bob-side decoy rates.
pub fn s01_lower(svv: f64, svx: f64, svy: f64, mu_x: f64, mu_y: f64) -> Result<f64> {
    s10_lower(svv, svx, svy, mu_x, mu_y)
}

/// Upper bound on the phase-flip error rate of untagged bits, capped at
/// one half. A vanishing single-photon bound yields the vacuous value 0.5.
pub fn e1ph_upper(t_x: f64, svv: f64, mu_x: f64, s1_l: f64) -> f64 {
    if !(s1_l > 0.0) {
        return 0.5;
    }
    let w = (-2.0 * mu_x).exp();
    ((t_x - w * svv / 2.0) / (2.0 * mu_x * w * s1_l)).clamp(0.0, 0.5)
}

/// `<n10>` (or `<n01>`) from a single-photon rate and the windows in which
/// the sending party used each code-bit intensity against a silent partner:
/// `Σ_l N_lv μ_l e^{−μ_l} s`.
pub fn untagged_expectation(s1: f64, windows_and_intensities: &[(f64, f64)]) -> f64 {
    windows_and_intensities.iter().map(|&(n, mu)| n * mu * (-mu).exp()).sum::<f64>() * s1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fluctuation {
    Finite,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub fluctuation: Fluctuation,
    /// Bound `<s1>` from pooled Alice and Bob decoy counts.
    pub joint_constraints: bool,
    /// Also bound the realized `n10` and `n01` separately (needed by pairing).
    pub per_party: bool,
    /// Bound the vacuum-emission bits `n0`.
    pub vacuum_bits: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { fluctuation: Fluctuation::Finite, joint_constraints: false, per_party: false, vacuum_bits: false }
    }
}

impl EstimateOptions {
    /// Number of concentration-bound invocations `estimate` will draw.
    pub fn slots(&self) -> usize {
        if self.fluctuation == Fluctuation::Asymptotic {
            return 0;
        }
        let rates = if self.joint_constraints { 2 } else { 4 };
        let mut n = 2 + rates + 1;
        n += if self.per_party { 2 } else { 1 };
        if self.vacuum_bits {
            n += if self.per_party { 2 } else { 1 };
        }
        n
    }
}

/// Adverse-direction rate bounds and the failure probabilities reserved for
/// the final realized-count bounds. Everything that depends on `<S_vv>` is
/// recomputed by [`DecoyInputs::at`], which is what scanning needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyInputs {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sxv_l: f64,
    pub syv_u: f64,
    pub svx_l: f64,
    pub svy_u: f64,
    pub tx_u: f64,
    pub joint: bool,
    /// `Σ_l N_lv μ_l e^{−μ_l}` over code-bit intensities, Alice and Bob.
    pub single_weight_alice: f64,
    pub single_weight_bob: f64,
    /// `Σ_l N_lv e^{−μ_l}`, the weight of vacuum emissions.
    pub vacuum_weight_alice: f64,
    pub vacuum_weight_bob: f64,
    /// Right bits on each side; caps on the untagged and vacuum counts.
    pub right_alice: f64,
    pub right_bob: f64,
    pub eps_n1: Option<f64>,
    pub eps_per_party: Option<(f64, f64)>,
    pub eps_n0: Option<(f64, Option<f64>)>,
}

/// Bounds evaluated at one value of `<S_vv>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointBounds {
    pub s10_l: f64,
    pub s01_l: f64,
    pub e1ph_u: f64,
    pub n10_exp_l: f64,
    pub n01_exp_l: f64,
    pub n1_l: f64,
    /// Realized per-party counts when `per_party` is set, otherwise the
    /// expectation bounds.
    pub n10_l: f64,
    pub n01_l: f64,
    /// Realized vacuum-emission bits `(Alice side, Bob side)`; with a single
    /// pooled bound the total sits in the first slot.
    pub n0_l: (f64, f64),
}

impl DecoyInputs {
    /// Bounds with `<S_vv>` set to `svv_s1` in the single-photon formulas
    /// and to `svv_e` in the phase-error numerator and the vacuum term.
    pub fn at(&self, svv_s1: f64, svv_e: f64) -> Result<PointBounds> {
        let (s10, s01) = if self.joint {
            let s1 = s10_lower(svv_s1, self.sxv_l, self.syv_u, self.mu_x, self.mu_y)?;
            (s1, s1)
        } else {
            (
                s10_lower(svv_s1, self.sxv_l, self.syv_u, self.mu_x, self.mu_y)?,
                s01_lower(svv_s1, self.svx_l, self.svy_u, self.mu_x, self.mu_y)?,
            )
        };
        let e1ph = e1ph_upper(self.tx_u, svv_e, self.mu_x, 0.5 * (s10 + s01));
        let n10_exp = self.single_weight_alice * s10;
        let n01_exp = self.single_weight_bob * s01;
        let realize = |mean: f64, eps: Option<f64>| match eps {
            Some(e) => stats::observed_lower(mean, e),
            None => Ok(mean),
        };
        let (n10, n01, n1) = match self.eps_per_party {
            Some((a, b)) => {
                let n10 = realize(n10_exp, Some(a))?.min(self.right_alice);
                let n01 = realize(n01_exp, Some(b))?.min(self.right_bob);
                (n10, n01, n10 + n01)
            }
            None => {
                let n1 = realize(n10_exp + n01_exp, self.eps_n1)?.min(self.right_alice + self.right_bob);
                (n10_exp.min(self.right_alice), n01_exp.min(self.right_bob), n1)
            }
        };
        let vac_a = self.vacuum_weight_alice * svv_e;
        let vac_b = self.vacuum_weight_bob * svv_e;
        let n0 = match self.eps_n0 {
            Some((a, Some(b))) => (realize(vac_a, Some(a))?, realize(vac_b, Some(b))?),
            Some((a, None)) => (realize(vac_a + vac_b, Some(a))?, 0.0),
            None => (vac_a, vac_b),
        };
        Ok(PointBounds {
            s10_l: s10,
            s01_l: s01,
            e1ph_u: e1ph,
            n10_exp_l: n10_exp,
            n01_exp_l: n01_exp,
            n1_l: n1,
            n10_l: n10,
            n01_l: n01,
            n0_l: n0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub s10_l: f64,
    pub s01_l: f64,
    pub n10_l: f64,
    pub n01_l: f64,
    pub n1_l: f64,
    pub n0_l: (f64, f64),
    pub e1ph_u: f64,
    /// Interval of `<S_vv>` consistent with the observed vacuum counts.
    pub svv_range: (f64, f64),
    pub eps_used: f64,
    pub inputs: DecoyInputs,
}

/// Chernoff interval of an expected rate `k / n`.
fn rate_interval(k: f64, n: f64, eps: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if n <= 0.0 {
        return Ok((0.0, 1.0));
    }
    match eps {
        None => Ok((k / n, k / n)),
        Some((el, eu)) => {
            let lo = if el > 0.0 { stats::expected_lower(k, n, el)? } else { k };
            let hi = if eu > 0.0 { stats::expected_upper(k, n, eu)? } else { k };
            Ok(((lo / n).clamp(0.0, 1.0), (hi / n).clamp(0.0, 1.0)))
        }
    }
}

/// Full decoy pipeline: observed rates, Chernoff intervals on their
/// expectations, single-photon bounds, untagged-count expectations and the
/// realized untagged counts.
pub fn estimate(
    counts: &CountsTable,
    params: &ProtocolParams,
    budget: &mut FailureBudget,
    opts: &EstimateOptions,
) -> Result<DecoyBounds> {
    counts.validate()?;
    let finite = opts.fluctuation == Fluctuation::Finite;
    let before = budget.consumed();
    let mut draw = |what: &str| -> Result<Option<f64>> { if finite { budget.draw(what).map(Some) } else { Ok(None) } };

    let (v, x, y) = (Label::V, Label::X, Label::Y);
    let pair = |a: Option<f64>, b: Option<f64>| a.zip(b);
    let lo_only = |a: Option<f64>| a.map(|e| (e, 0.0));
    let hi_only = |a: Option<f64>| a.map(|e| (0.0, e));

    let svv_l_eps = draw("S_vv lower")?;
    let svv_u_eps = draw("S_vv upper")?;
    let svv = rate_interval(counts.n(v, v), counts.big_n(v, v), pair(svv_l_eps, svv_u_eps))?;

    let (sxv_l, syv_u, svx_l, svy_u) = if opts.joint_constraints {
        let sx = rate_interval(
            counts.n(x, v) + counts.n(v, x),
            counts.big_n(x, v) + counts.big_n(v, x),
            lo_only(draw("S_x pooled lower")?),
        )?
        .0;
        let sy = rate_interval(
            counts.n(y, v) + counts.n(v, y),
            counts.big_n(y, v) + counts.big_n(v, y),
            hi_only(draw("S_y pooled upper")?),
        )?
        .1;
        (sx, sy, sx, sy)
    } else {
        (
            rate_interval(counts.n(x, v), counts.big_n(x, v), lo_only(draw("S_xv lower")?))?.0,
            rate_interval(counts.n(y, v), counts.big_n(y, v), hi_only(draw("S_yv upper")?))?.1,
            rate_interval(counts.n(v, x), counts.big_n(v, x), lo_only(draw("S_vx lower")?))?.0,
            rate_interval(counts.n(v, y), counts.big_n(v, y), hi_only(draw("S_vy upper")?))?.1,
        )
    };
    let tx_u = rate_interval(counts.x_errors, counts.x_accepted, hi_only(draw("T_X upper")?))?.1;

    let vac = counts.layout.code_vacuum();
    let alice: Vec<(f64, f64)> =
        counts.layout.sending_labels().iter().map(|&l| (counts.big_n(l, vac), params.intensity(l))).collect();
    let bob: Vec<(f64, f64)> =
        counts.layout.sending_labels().iter().map(|&r| (counts.big_n(vac, r), params.intensity(r))).collect();
    let vacuum_weight = |w: &[(f64, f64)]| w.iter().map(|&(n, mu)| n * (-mu).exp()).sum::<f64>();
    let right_alice: f64 = counts.layout.sending_labels().iter().map(|&l| counts.n(l, vac)).sum();
    let right_bob: f64 = counts.layout.sending_labels().iter().map(|&r| counts.n(vac, r)).sum();

    let (eps_n1, eps_per_party) = if opts.per_party {
        (None, pair(draw("n10 realized lower")?, draw("n01 realized lower")?))
    } else {
        (draw("n1 realized lower")?, None)
    };
    let eps_n0 = if opts.vacuum_bits {
        if opts.per_party {
            let a = draw("n0 Alice realized lower")?;
            let b = draw("n0 Bob realized lower")?;
            a.map(|a| (a, b))
        } else {
            draw("n0 realized lower")?.map(|a| (a, None))
        }
    } else {
        None
    };

    let inputs = DecoyInputs {
        mu_x: params.mu_x,
        mu_y: params.mu_y,
        sxv_l,
        syv_u,
        svx_l,
        svy_u,
        tx_u,
        joint: opts.joint_constraints,
        single_weight_alice: untagged_expectation(1.0, &alice),
        single_weight_bob: untagged_expectation(1.0, &bob),
        vacuum_weight_alice: if opts.vacuum_bits { vacuum_weight(&alice) } else { 0.0 },
        vacuum_weight_bob: if opts.vacuum_bits { vacuum_weight(&bob) } else { 0.0 },
        right_alice,
        right_bob,
        eps_n1,
        eps_per_party,
        eps_n0,
    };
    let point = inputs.at(svv.1, svv.0)?;
    Ok(DecoyBounds {
        s10_l: point.s10_l,
        s01_l: point.s01_l,
        n10_l: point.n10_l,
        n01_l: point.n01_l,
        n1_l: point.n1_l.min(counts.n_t),
        n0_l: point.n0_l,
        e1ph_u: point.e1ph_u,
        svv_range: svv,
        eps_used: budget.consumed() - before,
        inputs,
    })
}
