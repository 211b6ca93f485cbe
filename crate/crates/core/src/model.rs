//! Protocol and device parameters, and the expected counting rates of every
//! intensity pair under the linear interference model.
//!
//! Each party sends a phase-randomized coherent pulse. At Charlie's beam
//! splitter the two attenuated amplitudes interfere; for a phase difference
//! `δ` the left and right detectors see Poisson light with means
//!
//! ```text
//! m_L = (η_A μ_l + η_B μ_r + 2 √(η_A η_B μ_l μ_r) cos δ) / 2
//! m_R = (η_A μ_l + η_B μ_r − 2 √(η_A η_B μ_l μ_r) cos δ) / 2
//! ```
//!
//! and each fires with probability `1 − (1 − d) e^{−m}`. A window is heralded
//! when exactly one detector fires.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::quad;

/// Source setting chosen by one party in one time window.
///
/// `O` is the "not sending" vacuum of the signal windows of the prior-art
/// four-intensity scheme, which is kept apart from the decoy vacuum `V`.
/// The improved protocol never uses it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    V,
    X,
    Y,
    Z,
    O,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::V, Label::X, Label::Y, Label::Z, Label::O];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_vacuum(self) -> bool {
        matches!(self, Label::V | Label::O)
    }

    /// Row of the yield table: both vacua share the `V` row.
    pub fn intensity_class(self) -> usize {
        match self {
            Label::O => Label::V.index(),
            l => l.index(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::V => "v",
            Label::X => "x",
            Label::Y => "y",
            Label::Z => "z",
            Label::O => "o",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which heralded events are admitted as code bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeBitOption {
    Xyz,
    Yz,
    Z,
}

impl CodeBitOption {
    pub const ALL: [CodeBitOption; 3] = [CodeBitOption::Xyz, CodeBitOption::Yz, CodeBitOption::Z];

    /// Non-vacuum labels whose heralded events become code bits.
    pub fn sending_labels(self) -> &'static [Label] {
        match self {
            CodeBitOption::Xyz => &[Label::X, Label::Y, Label::Z],
            CodeBitOption::Yz => &[Label::Y, Label::Z],
            CodeBitOption::Z => &[Label::Z],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CodeBitOption::Xyz => "xyz",
            CodeBitOption::Yz => "yz",
            CodeBitOption::Z => "z",
        }
    }
}

impl fmt::Display for CodeBitOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CodeBitOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_matches(|c| c == '[' || c == ']').replace(',', "").as_str() {
            "xyz" => Ok(CodeBitOption::Xyz),
            "yz" => Ok(CodeBitOption::Yz),
            "z" => Ok(CodeBitOption::Z),
            other => Err(Error::Params(format!("unknown code-bit option {other:?}"))),
        }
    }
}

/// Improved protocol (all vacuum windows are shared between decoy analysis
/// and code bits) or the prior-art four-intensity scheme (signal windows
/// with their own "not sending" vacuum, decoy windows never used as code
/// bits, no leakage deduction).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Improved,
    PriorArt,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Improved => "improved",
            Scheme::PriorArt => "prior_art",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub mu_x: f64,
    pub mu_y: f64,
    pub mu_z: f64,
    pub p_v: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
    /// Signal-window vacuum probability; zero for the improved protocol.
    #[serde(default)]
    pub p_o: f64,
    /// Total number of time windows `N_t`.
    pub n_total: f64,
    /// Phase-slice tolerance: xx windows with `1 − |cos(θ_A − θ_B)| ≤ λ` are kept.
    pub lambda: f64,
    pub option: CodeBitOption,
    pub scheme: Scheme,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.p_v, self.p_x, self.p_y, self.p_z, self.p_o];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Params(format!("probabilities must lie in [0, 1], got {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Params(format!("probabilities sum to {total}, expected 1")));
        }
        if !(self.mu_x >= 0.0 && self.mu_x < self.mu_y && self.mu_y.is_finite()) {
            return Err(Error::Params(format!(
                "intensities must satisfy 0 <= mu_x < mu_y, got mu_x={}, mu_y={}",
                self.mu_x, self.mu_y
            )));
        }
        if !(self.mu_z >= 0.0 && self.mu_z.is_finite()) {
            return Err(Error::Params(format!("mu_z must be >= 0, got {}", self.mu_z)));
        }
        if !(self.n_total >= 1.0 && self.n_total.is_finite() && self.n_total.fract() == 0.0) {
            return Err(Error::Params(format!("N_t must be a positive integer, got {}", self.n_total)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Params(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        match self.scheme {
            Scheme::Improved if self.p_o != 0.0 => {
                Err(Error::Params("the improved protocol has no signal-window vacuum (p_o must be 0)".into()))
            }
            Scheme::PriorArt if self.option != CodeBitOption::Z => {
                Err(Error::Params("the prior-art scheme only supports code-bit option [z]".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn prob(&self, label: Label) -> f64 {
        match label {
            Label::V => self.p_v,
            Label::X => self.p_x,
            Label::Y => self.p_y,
            Label::Z => self.p_z,
            Label::O => self.p_o,
        }
    }

    pub fn intensity(&self, label: Label) -> f64 {
        match label {
            Label::V | Label::O => 0.0,
            Label::X => self.mu_x,
            Label::Y => self.mu_y,
            Label::Z => self.mu_z,
        }
    }

    /// Expected number of `lr` windows, `N_t p_l p_r`.
    pub fn windows(&self, l: Label, r: Label) -> f64 {
        self.n_total * self.prob(l) * self.prob(r)
    }

    pub fn layout(&self) -> CodeLayout {
        CodeLayout { option: self.option, scheme: self.scheme }
    }

    pub fn sending_labels(&self) -> &'static [Label] {
        self.layout().sending_labels()
    }

    pub fn code_vacuum(&self) -> Label {
        self.layout().code_vacuum()
    }
}

/// Which label pairs produce code bits, and which of those are bit-flip errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLayout {
    pub option: CodeBitOption,
    pub scheme: Scheme,
}

impl CodeLayout {
    /// Non-vacuum labels that produce code bits.
    pub fn sending_labels(self) -> &'static [Label] {
        match self.scheme {
            Scheme::Improved => self.option.sending_labels(),
            Scheme::PriorArt => &[Label::Z],
        }
    }

    /// Vacuum label that produces code bits.
    pub fn code_vacuum(self) -> Label {
        match self.scheme {
            Scheme::Improved => Label::V,
            Scheme::PriorArt => Label::O,
        }
    }

    /// Code-bit labels, vacuum first.
    pub fn code_labels(self) -> Vec<Label> {
        let mut labels = vec![self.code_vacuum()];
        labels.extend_from_slice(self.sending_labels());
        labels
    }

    pub fn is_sending(self, l: Label) -> bool {
        self.sending_labels().contains(&l)
    }

    pub fn is_code_label(self, l: Label) -> bool {
        l == self.code_vacuum() || self.is_sending(l)
    }

    pub fn is_code_pair(self, l: Label, r: Label) -> bool {
        self.is_code_label(l) && self.is_code_label(r)
    }

    /// Both sent or both stayed silent: a wrong bit.
    pub fn is_error_pair(self, l: Label, r: Label) -> bool {
        let vac = self.code_vacuum();
        (self.is_sending(l) && self.is_sending(r)) || (l == vac && r == vac)
    }
}

/// Fiber and detector parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Alice-to-Bob fiber length in km.
    pub distance_km: f64,
    pub alpha_db_per_km: f64,
    /// Detection efficiency of each of Charlie's detectors.
    pub eta_d: f64,
    /// Dark count probability per pulse of each detector.
    pub dark: f64,
    /// Misalignment error in X windows.
    pub e_d: f64,
    /// Charlie sits at the midpoint.
    pub symmetric: bool,
    /// Fraction of the distance on Alice's side, read only when `symmetric` is false.
    #[serde(default = "half")]
    pub alice_fraction: f64,
}

fn half() -> f64 {
    0.5
}

impl ChannelModel {
    /// Device values of the reference simulation setting at the given distance.
    pub fn reference(distance_km: f64) -> Self {
        ChannelModel {
            distance_km,
            alpha_db_per_km: 0.2,
            eta_d: 0.5,
            dark: 1e-9,
            e_d: 0.015,
            symmetric: true,
            alice_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km >= 0.0) {
            return Err(Error::Channel(format!("distance must be >= 0, got {}", self.distance_km)));
        }
        if !(self.alpha_db_per_km >= 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(Error::Channel(format!("fiber loss must be >= 0, got {}", self.alpha_db_per_km)));
        }
        if !(0.0..=1.0).contains(&self.eta_d) {
            return Err(Error::Channel(format!("eta_d must lie in [0, 1], got {}", self.eta_d)));
        }
        if !(0.0..1.0).contains(&self.dark) {
            return Err(Error::Channel(format!("dark count must lie in [0, 1), got {}", self.dark)));
        }
        if !(0.0..=0.5).contains(&self.e_d) {
            return Err(Error::Channel(format!("misalignment must lie in [0, 0.5], got {}", self.e_d)));
        }
        if !self.symmetric && !(0.0..=1.0).contains(&self.alice_fraction) {
            return Err(Error::Channel(format!("alice_fraction must lie in [0, 1], got {}", self.alice_fraction)));
        }
        Ok(())
    }

    /// Overall transmittances `(η_A, η_B)` of the two arms, detector included.
    pub fn arm_transmittances(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let share = if self.symmetric { 0.5 } else { self.alice_fraction };
        let arm = |km: f64| self.eta_d * 10f64.powf(-self.alpha_db_per_km * km / 10.0);
        let (a, b) = (arm(self.distance_km * share), arm(self.distance_km * (1.0 - share)));
        if a > 1.0 || b > 1.0 {
            return Err(Error::Channel(format!("arm transmittance exceeds 1: ({a}, {b})")));
        }
        Ok((a, b))
    }
}

/// Click probability of a detector receiving Poisson light of mean `m`.
pub fn click_probability(mean: f64, dark: f64) -> f64 {
    -((-dark).ln_1p() - mean).exp_m1()
}

/// Mean photon numbers `(m_L, m_R)` reaching the two detectors.
pub fn detector_means(eta_a: f64, eta_b: f64, mu_l: f64, mu_r: f64, delta: f64) -> (f64, f64) {
    let a = eta_a * mu_l;
    let b = eta_b * mu_r;
    let cross = 2.0 * (a * b).sqrt() * delta.cos();
    (0.5 * (a + b + cross).max(0.0), 0.5 * (a + b - cross).max(0.0))
}

/// Heralding probability (exactly one click) at fixed phase difference.
pub fn heralding_probability(eta_a: f64, eta_b: f64, mu_l: f64, mu_r: f64, delta: f64, dark: f64) -> f64 {
    let (ml, mr) = detector_means(eta_a, eta_b, mu_l, mu_r, delta);
    let cl = click_probability(ml, dark);
    let cr = click_probability(mr, dark);
    cl * (1.0 - cr) + cr * (1.0 - cl)
}

/// Half-width `φ = arccos(1 − λ)` of each accepted phase slice.
pub fn slice_half_width(lambda: f64) -> f64 {
    (1.0 - lambda).clamp(-1.0, 1.0).acos()
}

/// Probability that a uniform phase difference passes `1 − |cos δ| ≤ λ`.
///
/// The accepted set is four arcs of width `φ` around `0` and `π`.
pub fn acceptance_probability(lambda: f64) -> f64 {
    2.0 * slice_half_width(lambda) / PI
}

/// Wrong and right heralding probabilities of an xx window at phase
/// difference `δ`, before misalignment. The constructive detector is the
/// right one.
pub fn x_window_outcomes(eta_a: f64, eta_b: f64, mu: f64, delta: f64, dark: f64) -> (f64, f64) {
    let (ml, mr) = detector_means(eta_a, eta_b, mu, mu, delta);
    let (mc, mw) = if delta.cos() >= 0.0 { (ml, mr) } else { (mr, ml) };
    let cc = click_probability(mc, dark);
    let cw = click_probability(mw, dark);
    (cw * (1.0 - cc), cc * (1.0 - cw))
}

/// Expected counting rates of all intensity pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YieldTable {
    /// `s[l][r]` indexed by intensity class `v, x, y, z`.
    pub s: [[f64; 4]; 4],
    /// Error-heralding probability per accepted xx window.
    pub t_x: f64,
    pub a_lambda: f64,
    pub eta_alice: f64,
    pub eta_bob: f64,
}

impl YieldTable {
    pub fn s(&self, l: Label, r: Label) -> f64 {
        self.s[l.intensity_class()][r.intensity_class()]
    }
}

pub fn expected_yields(params: &ProtocolParams, channel: &ChannelModel) -> Result<YieldTable> {
    params.validate()?;
    let (eta_a, eta_b) = channel.arm_transmittances()?;
    let d = channel.dark;
    let rel = 1e-12;

    let mut s = [[0.0; 4]; 4];
    let intensity = [0.0, params.mu_x, params.mu_y, params.mu_z];
    for (i, &mu_l) in intensity.iter().enumerate() {
        for (j, &mu_r) in intensity.iter().enumerate() {
            let v = if mu_l == 0.0 || mu_r == 0.0 {
                // no interference term; the integrand is constant
                heralding_probability(eta_a, eta_b, mu_l, mu_r, 0.0, d)
            } else {
                quad::periodic_mean(|t| heralding_probability(eta_a, eta_b, mu_l, mu_r, t, d), quad::ABS_TOL, rel)?
            };
            s[i][j] = v.clamp(0.0, 1.0);
        }
    }

    let phi = slice_half_width(params.lambda);
    let t_x = if params.mu_x == 0.0 {
        0.5 * s[0][0]
    } else {
        let e_d = channel.e_d;
        let integral = quad::integrate(
            |t| {
                let (wrong, right) = x_window_outcomes(eta_a, eta_b, params.mu_x, t, d);
                (1.0 - e_d) * wrong + e_d * right
            },
            0.0,
            phi,
            quad::ABS_TOL * phi,
            rel,
        )?;
        (integral / phi).clamp(0.0, 1.0)
    };

    Ok(YieldTable { s, t_x, a_lambda: acceptance_probability(params.lambda), eta_alice: eta_a, eta_bob: eta_b })
}

/// Heralding probability of a single photon entering the interferometer
/// through an arm of transmittance `eta`.
pub fn single_photon_yield(eta: f64, dark: f64) -> f64 {
    eta * (1.0 - dark) + (1.0 - eta) * 2.0 * dark * (1.0 - dark)
}

/// Phase-flip error rate of single-photon xx components that pass the phase
/// slice, as predicted by the model. Used as ground truth by tests.
pub fn single_photon_phase_error(channel: &ChannelModel, lambda: f64) -> Result<f64> {
    let (eta_a, eta_b) = channel.arm_transmittances()?;
    let d = channel.dark;
    let phi = slice_half_width(lambda);
    let eta_mean = 0.5 * (eta_a + eta_b);
    let s1 = single_photon_yield(eta_mean, d);
    if s1 == 0.0 {
        return Ok(0.5);
    }
    let err = quad::integrate(
        |t| {
            // a single photon in the superposed mode reaches the destructive
            // detector with this probability
            let (mc, mw) = detector_means(eta_a, eta_b, 0.5, 0.5, t);
            let (mc, mw) = if t.cos() >= 0.0 { (mc, mw) } else { (mw, mc) };
            let wrong = (1.0 - channel.e_d) * mw + channel.e_d * mc;
            wrong * (1.0 - d) + (1.0 - mc - mw) * d * (1.0 - d)
        },
        0.0,
        phi,
        1e-15,
        1e-12,
    )? / phi;
    Ok((err / s1).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_params() -> ProtocolParams {
        ProtocolParams {
            mu_x: 0.1,
            mu_y: 0.4,
            mu_z: 0.5,
            p_v: 0.4,
            p_x: 0.2,
            p_y: 0.2,
            p_z: 0.2,
            p_o: 0.0,
            n_total: 1e10,
            lambda: 0.05,
            option: CodeBitOption::Xyz,
            scheme: Scheme::Improved,
        }
    }

    fn bessel_i0(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            term *= (x / 2.0) * (x / 2.0) / (k as f64 * k as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    #[test]
    fn vacuum_pair_is_pure_dark_count() {
        let mut p = sample_params();
        p.mu_x = 0.0;
        let ch = ChannelModel::reference(100.0);
        let y = expected_yields(&p, &ch).unwrap();
        let d = ch.dark;
        assert!((y.s[0][0] - 2.0 * d * (1.0 - d)).abs() < 1e-24);
        assert!((y.s[1][1] - 2.0 * d * (1.0 - d)).abs() < 1e-22);
    }

    #[test]
    fn zero_transmittance_leaves_only_dark_counts() {
        let p = sample_params();
        let mut ch = ChannelModel::reference(100.0);
        ch.eta_d = 0.0;
        ch.dark = 1e-3;
        let y = expected_yields(&p, &ch).unwrap();
        let floor = 2.0 * 1e-3 * (1.0 - 1e-3);
        for row in y.s {
            for v in row {
                assert!((v - floor).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn phase_average_matches_bessel_closed_form() {
        let p = sample_params();
        let ch = ChannelModel::reference(50.0);
        let y = expected_yields(&p, &ch).unwrap();
        let (ea, eb) = ch.arm_transmittances().unwrap();
        let d = ch.dark;
        let mus = [0.0, p.mu_x, p.mu_y, p.mu_z];
        for i in 0..4 {
            for j in 0..4 {
                let a = ea * mus[i];
                let b = eb * mus[j];
                let closed = 2.0 * (1.0 - d) * (-(a + b) / 2.0).exp() * bessel_i0((a * b).sqrt())
                    - 2.0 * (1.0 - d) * (1.0 - d) * (-(a + b)).exp();
                // the closed form cancels catastrophically near zero, hence the absolute floor
                assert!((y.s[i][j] - closed).abs() < 1e-12 * closed + 1e-14, "{i}{j}");
            }
        }
    }

    #[test]
    fn acceptance_probability_closed_form() {
        assert!((acceptance_probability(1.0) - 1.0).abs() < 1e-15);
        // 1 - |cos δ| <= 0.5  <=>  |cos δ| >= 1/2: four arcs of π/3
        assert!((acceptance_probability(0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dark_count_floor_holds() {
        let p = sample_params();
        for km in [0.0, 100.0, 300.0, 600.0] {
            let mut ch = ChannelModel::reference(km);
            ch.dark = 1e-6;
            let y = expected_yields(&p, &ch).unwrap();
            let (eta, _) = ch.arm_transmittances().unwrap();
            let mus = [0.0, p.mu_x, p.mu_y, p.mu_z];
            let d = ch.dark;
            for i in 0..4 {
                for j in 0..4 {
                    let floor = 2.0 * d * (1.0 - d) * (-eta * (mus[i] + mus[j])).exp();
                    assert!(y.s[i][j] >= floor * (1.0 - 1e-12));
                }
            }
        }
    }

    #[test]
    fn yields_are_monotone_on_a_grid() {
        let base = sample_params();
        let intensities = [0.01, 0.05, 0.1, 0.3, 0.6];
        for km in [50.0, 200.0, 400.0] {
            let ch = ChannelModel::reference(km);
            let mut prev_row: Option<f64> = None;
            for &mz in &intensities {
                let mut p = base.clone();
                p.mu_z = mz;
                let y = expected_yields(&p, &ch).unwrap();
                let v = y.s[3][2];
                if let Some(prev) = prev_row {
                    assert!(v >= prev, "S_zy not monotone in mu_z at {km} km");
                }
                prev_row = Some(v);
            }
        }
        let p = base;
        let mut prev = f64::INFINITY;
        for km in [0.0, 10.0, 100.0, 250.0, 500.0] {
            let y = expected_yields(&p, &ChannelModel::reference(km)).unwrap();
            assert!(y.s[2][3] <= prev);
            prev = y.s[2][3];
        }
        let mut prev = 0.0;
        for eta_d in [0.1, 0.3, 0.5, 0.9] {
            let mut ch = ChannelModel::reference(200.0);
            ch.eta_d = eta_d;
            let y = expected_yields(&p, &ch).unwrap();
            assert!(y.s[1][1] >= prev);
            prev = y.s[1][1];
        }
    }

    #[test]
    fn symmetric_channel_gives_symmetric_table() {
        let y = expected_yields(&sample_params(), &ChannelModel::reference(150.0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((y.s[i][j] - y.s[j][i]).abs() <= 1e-15 * y.s[i][j].max(1e-300));
            }
        }
    }

    #[test]
    fn single_photon_yield_series() {
        let eta = 0.01;
        let d = 1e-9;
        let s = single_photon_yield(eta, d);
        assert!((s - (eta + 2.0 * d * (1.0 - d) * (1.0 - eta))).abs() < 2.0 * d * eta);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let mut ch = ChannelModel::reference(10.0);
        ch.dark = 1.0;
        assert!(expected_yields(&sample_params(), &ch).is_err());
        let mut ch = ChannelModel::reference(0.0);
        ch.eta_d = 1.5;
        assert!(expected_yields(&sample_params(), &ch).is_err());
        let mut p = sample_params();
        p.mu_y = p.mu_x;
        assert!(p.validate().is_err());
        let mut p = sample_params();
        p.p_v += 1e-9;
        assert!(p.validate().is_err());
    }

    #[test]
    fn three_intensity_setting_is_valid() {
        let mut p = sample_params();
        p.p_v += p.p_z;
        p.p_z = 0.0;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn parse_options() {
        assert_eq!("[x,y,z]".parse::<CodeBitOption>().unwrap(), CodeBitOption::Xyz);
        assert_eq!("yz".parse::<CodeBitOption>().unwrap(), CodeBitOption::Yz);
        assert!("xy".parse::<CodeBitOption>().is_err());
    }
}
