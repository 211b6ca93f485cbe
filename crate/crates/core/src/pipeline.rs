//! End-to-end key-rate evaluation for one parameter point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aopp::{self, AoppResult, PairingEps};
use crate::decoy::{self, BitGroup, CountsTable, DecoyInputs, EstimateOptions, Fluctuation, PointBounds};
use crate::error::{Error, Result};
use crate::keylength::{self, KeyRateReport, SecurityParams};
use crate::model::{expected_yields, ChannelModel, CodeBitOption, ProtocolParams, Scheme};
use crate::stats::FailureBudget;

/// Named pipeline presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pairing on, later refinements off.
    Comparison,
    /// Pairing, per-group error correction, vacuum bits and scanning.
    BestRate,
    /// Four-intensity baseline with `[z]` code bits.
    PriorArt,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Comparison, Mode::BestRate, Mode::PriorArt];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Comparison => "comparison",
            Mode::BestRate => "best_rate",
            Mode::PriorArt => "prior_art",
        }
    }

    pub fn config(self) -> PipelineConfig {
        match self {
            Mode::Comparison | Mode::PriorArt => PipelineConfig::comparison(),
            Mode::BestRate => PipelineConfig::best_rate(),
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Mode::PriorArt => Scheme::PriorArt,
            _ => Scheme::Improved,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Params(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub aopp: bool,
    pub refined_qber: bool,
    pub vacuum_bits: bool,
    pub scan: bool,
    pub scan_points: usize,
    pub joint_constraints: bool,
    pub fluctuation: Fluctuation,
}

impl PipelineConfig {
    pub fn comparison() -> Self {
        PipelineConfig {
            aopp: true,
            refined_qber: false,
            vacuum_bits: false,
            scan: false,
            scan_points: 200,
            joint_constraints: false,
            fluctuation: Fluctuation::Finite,
        }
    }

    pub fn best_rate() -> Self {
        PipelineConfig { refined_qber: true, vacuum_bits: true, scan: true, ..Self::comparison() }
    }

    fn estimate_options(&self) -> EstimateOptions {
        EstimateOptions {
            fluctuation: self.fluctuation,
            joint_constraints: self.joint_constraints,
            per_party: self.aopp,
            vacuum_bits: self.vacuum_bits,
        }
    }

    /// Concentration-bound invocations of one evaluation.
    pub fn slots(&self) -> usize {
        if self.fluctuation == Fluctuation::Asymptotic {
            return 0;
        }
        let pairing = if self.aopp { aopp::slots(self.vacuum_bits) } else { 0 };
        self.estimate_options().slots() + pairing
    }
}

/// Key rate from the expected counts of the channel model.
pub fn evaluate(
    params: &ProtocolParams,
    channel: &ChannelModel,
    sec: &SecurityParams,
    cfg: &PipelineConfig,
) -> Result<KeyRateReport> {
    params.validate()?;
    let yields = expected_yields(params, channel)?;
    let counts = CountsTable::expected(params, &yields)?;
    evaluate_counts(&counts, params, sec, cfg)
}

struct Evaluator<'a> {
    counts: &'a CountsTable,
    inputs: &'a DecoyInputs,
    sec: &'a SecurityParams,
    cfg: &'a PipelineConfig,
    pair_eps: Option<PairingEps>,
}

impl Evaluator<'_> {
    fn key_at(&self, p: &PointBounds) -> Result<(f64, f64, Option<AoppResult>)> {
        let counts = self.counts;
        let cfg = self.cfg;
        if !cfg.aopp {
            let n0 = if cfg.vacuum_bits { p.n0_l.0 + p.n0_l.1 } else { 0.0 };
            let groups: Vec<BitGroup> = if cfg.refined_qber {
                counts.groups_by_alice_label().into_iter().map(|g| g.1).collect()
            } else {
                vec![BitGroup { total: counts.n_t, errors: counts.n_e }]
            };
            let n1 = p.n1_l.min(counts.n_t);
            return Ok((keylength::key_length_refined(&groups, n0, n1, p.e1ph_u, self.sec), n0, None));
        }
        let split = counts.code_split();
        let pairing = aopp::aopp_expected(&split);
        let eps = self.pair_eps;
        let n1p = aopp::n1_prime_lower(&split, (p.n10_l, p.n01_l), eps.map(|e| (e.subsample, e.pairing)))?
            .min(pairing.n_r_prime());
        let e1p = aopp::e1ph_prime_upper(p.e1ph_u, n1p, eps.map(|e| e.phase))?;
        let n0p = if cfg.vacuum_bits {
            aopp::n0_prime_lower(&split, p.n0_l, eps.and_then(|e| e.vacuum))?.min((pairing.n_r_prime() - n1p).max(0.0))
        } else {
            0.0
        };
        let groups = if cfg.refined_qber {
            aopp::refined_groups(counts)
        } else {
            vec![(counts.layout.code_vacuum(), BitGroup { total: pairing.n_t_prime, errors: pairing.n_e_prime })]
        };
        let plain: Vec<BitGroup> = groups.iter().map(|g| g.1).collect();
        let n = keylength::key_length_refined(&plain, n0p, n1p, e1p, self.sec);
        let result = AoppResult {
            n_odd: pairing.n_odd,
            n_t_prime: pairing.n_t_prime,
            e_t_prime: pairing.e_t_prime(),
            n_e_prime: pairing.n_e_prime,
            n_r_prime: pairing.n_r_prime(),
            n1_prime_l: n1p,
            e1ph_prime_u: e1p,
            n0_prime_l: n0p,
            groups,
        };
        Ok((n, n0p, Some(result)))
    }
}

/// Key rate from a table of counts, observed or expected.
pub fn evaluate_counts(
    counts: &CountsTable,
    params: &ProtocolParams,
    sec: &SecurityParams,
    cfg: &PipelineConfig,
) -> Result<KeyRateReport> {
    sec.validate()?;
    let finite = cfg.fluctuation == Fluctuation::Finite;
    let mut budget = FailureBudget::equal_split(sec.xi, cfg.slots().max(1))?;
    let bounds = decoy::estimate(counts, params, &mut budget, &cfg.estimate_options())?;
    let pair_eps = if cfg.aopp && finite {
        Some(PairingEps {
            subsample: budget.draw("pairing subsample lower")?,
            pairing: budget.draw("pairing untagged lower")?,
            phase: budget.draw("pairing phase error upper")?,
            vacuum: if cfg.vacuum_bits { Some(budget.draw("pairing vacuum lower")?) } else { None },
        })
    } else {
        None
    };
    let ev = Evaluator { counts, inputs: &bounds.inputs, sec, cfg, pair_eps };

    let (lo, hi) = bounds.svv_range;
    let separate = ev.inputs.at(hi, lo)?;
    let (n_separate, n0_sep, aopp_sep) = ev.key_at(&separate)?;
    let (n, n0, point, aopp_res, scan) = if cfg.scan {
        let scan = keylength::key_length_scanned(bounds.svv_range, cfg.scan_points, |s| {
            ev.key_at(&ev.inputs.at(s, s)?).map(|r| r.0)
        })?;
        let point = ev.inputs.at(scan.svv, scan.svv)?;
        let (n, n0, a) = ev.key_at(&point)?;
        (n, n0, point, a, Some(scan))
    } else {
        (n_separate, n0_sep, separate, aopp_sep, None)
    };

    let (delta, delta_jc) = match counts.layout.scheme {
        Scheme::PriorArt => (0.0, 0.0),
        Scheme::Improved => {
            let labels = counts.layout.sending_labels();
            let rem = counts.right_remainder(labels);
            let jc = if cfg.joint_constraints { keylength::delta_jc_bound(counts.layout.option, rem) } else { 0.0 };
            (keylength::delta_bound(rem, 0.0, 0.0), jc)
        }
    };
    let n_tilde = n - delta - delta_jc;
    let n_total = counts.total_windows();
    Ok(KeyRateReport {
        option: counts.layout.option,
        scheme: counts.layout.scheme,
        n_total,
        n,
        n_separate,
        scan,
        delta,
        delta_jc,
        n_tilde,
        rate_per_pulse: n_tilde.max(0.0) / n_total,
        n_t: counts.n_t,
        e_t: counts.qber(),
        bounds,
        point,
        n0,
        aopp: aopp_res,
        budget,
    })
}

/// Convenience: the option actually evaluated for a mode.
pub fn mode_option(mode: Mode, option: CodeBitOption) -> CodeBitOption {
    match mode {
        Mode::PriorArt => CodeBitOption::Z,
        _ => option,
    }
}
