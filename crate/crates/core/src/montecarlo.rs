//! Window-by-window sampling of the sources and the measurement station.
//!
//! Each window draws both labels and both phases, then the total photon
//! number `K ~ Poisson(μ_l + μ_r)` of the two coherent states. Given the
//! phases each photon reaches the left detector, the right detector, or is
//! lost with probabilities proportional to `m_L`, `m_R` and the remaining
//! mean, which reproduces independent Poisson light on the two detectors.
//! Keeping `K` lets the simulation tag the windows that truly carried one
//! photon.

use std::f64::consts::PI;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoy::{CountKind, CountsTable};
use crate::error::{Error, Result};
use crate::model::{detector_means, single_photon_phase_error, ChannelModel, Label, ProtocolParams};

/// Largest simulated block size.
pub const MAX_WINDOWS: u64 = 100_000_000;
/// Windows per random stream; fixed so results do not depend on threading.
const BLOCK: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_windows: u64,
    pub seed: u64,
    pub params: ProtocolParams,
    pub channel: ChannelModel,
    /// Record untagged and single-photon tallies.
    pub tag_truth: bool,
    /// Keep one record per heralded code bit for pairing simulations.
    pub keep_bits: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_windows == 0 || self.n_windows > MAX_WINDOWS {
            return Err(Error::Params(format!("simulated windows must lie in 1..={MAX_WINDOWS}, got {}", self.n_windows)));
        }
        self.params.validate()?;
        self.channel.validate()
    }
}

/// Ground-truth tallies that no party could observe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Heralded code windows where Alice sent, Bob stayed silent, and one
    /// photon was emitted.
    pub n10: u64,
    pub n01: u64,
    /// Same windows with no photon emitted at all.
    pub n0_alice: u64,
    pub n0_bob: u64,
    /// Phase-accepted xx windows that carried exactly one photon.
    pub x1_windows: u64,
    pub x1_heralded: u64,
    pub x1_errors: u64,
}

impl Truth {
    pub fn n1(&self) -> u64 {
        self.n10 + self.n01
    }

    /// Error rate of heralded single-photon xx windows.
    pub fn phase_error_rate(&self) -> f64 {
        if self.x1_heralded == 0 {
            0.0
        } else {
            self.x1_errors as f64 / self.x1_heralded as f64
        }
    }

    fn add(&mut self, o: &Truth) {
        self.n10 += o.n10;
        self.n01 += o.n01;
        self.n0_alice += o.n0_alice;
        self.n0_bob += o.n0_bob;
        self.x1_windows += o.x1_windows;
        self.x1_heralded += o.x1_heralded;
        self.x1_errors += o.x1_errors;
    }
}

/// One heralded code bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitRecord {
    pub alice_bit: bool,
    /// Bob's bit differs from Alice's.
    pub error: bool,
    pub untagged: bool,
    /// Virtual phase-flip label of an untagged bit, drawn at the model's
    /// single-photon phase-error rate.
    pub phase_error: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub counts: CountsTable,
    pub truth: Truth,
    pub bits: Vec<BitRecord>,
}

/// Everything sampled for one window, in ledger column order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowRecord {
    pub index: u64,
    pub l: Label,
    pub r: Label,
    pub photons: u64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub click_l: bool,
    pub click_r: bool,
}

struct Tally {
    windows: [[u64; Label::COUNT]; Label::COUNT],
    heralded: [[u64; Label::COUNT]; Label::COUNT],
    x_accepted: u64,
    x_errors: u64,
    truth: Truth,
    bits: Vec<BitRecord>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            windows: [[0; Label::COUNT]; Label::COUNT],
            heralded: [[0; Label::COUNT]; Label::COUNT],
            x_accepted: 0,
            x_errors: 0,
            truth: Truth::default(),
            bits: Vec::new(),
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        for i in 0..Label::COUNT {
            for j in 0..Label::COUNT {
                self.windows[i][j] += o.windows[i][j];
                self.heralded[i][j] += o.heralded[i][j];
            }
        }
        self.x_accepted += o.x_accepted;
        self.x_errors += o.x_errors;
        self.truth.add(&o.truth);
        self.bits.extend(o.bits);
        self
    }
}

struct Sampler {
    cumulative: [f64; Label::COUNT],
    /// Last label with positive probability, for rounding at the top end.
    last: Label,
    poisson: [[Option<Poisson<f64>>; Label::COUNT]; Label::COUNT],
    eta_a: f64,
    eta_b: f64,
    phase_error: f64,
}

impl Sampler {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let p = &cfg.params;
        let mut cumulative = [0.0; Label::COUNT];
        let mut acc = 0.0;
        for l in Label::ALL {
            acc += p.prob(l);
            cumulative[l.index()] = acc;
        }
        let mut poisson: [[Option<Poisson<f64>>; Label::COUNT]; Label::COUNT] = Default::default();
        for l in Label::ALL {
            for r in Label::ALL {
                let mean = p.intensity(l) + p.intensity(r);
                if mean > 0.0 {
                    poisson[l.index()][r.index()] =
                        Some(Poisson::new(mean).map_err(|e| Error::Params(format!("Poisson mean {mean}: {e}")))?);
                }
            }
        }
        let (eta_a, eta_b) = cfg.channel.arm_transmittances()?;
        let phase_error = if cfg.keep_bits { single_photon_phase_error(&cfg.channel, p.lambda)? } else { 0.0 };
        let last = Label::ALL.into_iter().rev().find(|&l| p.prob(l) > 0.0).unwrap_or(Label::V);
        Ok(Sampler { cumulative, last, poisson, eta_a, eta_b, phase_error })
    }

    fn label(&self, u: f64) -> Label {
        Label::ALL.into_iter().find(|l| u < self.cumulative[l.index()]).unwrap_or(self.last)
    }
}

fn run_block(cfg: &SimConfig, s: &Sampler, block: u64, sink: &mut dyn FnMut(&WindowRecord)) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block);
    let start = block * BLOCK;
    let end = (start + BLOCK).min(cfg.n_windows);
    let p = &cfg.params;
    let d = cfg.channel.dark;
    let e_d = cfg.channel.e_d;
    let layout = p.layout();
    let vac = layout.code_vacuum();
    let mut t = Tally::new();
    for index in start..end {
        let l = s.label(rng.random::<f64>());
        let r = s.label(rng.random::<f64>());
        let theta_a = 2.0 * PI * rng.random::<f64>();
        let theta_b = 2.0 * PI * rng.random::<f64>();
        let delta = theta_a - theta_b;
        let (mu_l, mu_r) = (p.intensity(l), p.intensity(r));
        let photons = match &s.poisson[l.index()][r.index()] {
            Some(dist) => dist.sample(&mut rng) as u64,
            None => 0,
        };
        let (mut hit_l, mut hit_r) = (false, false);
        if photons > 0 {
            let (ml, mr) = detector_means(s.eta_a, s.eta_b, mu_l, mu_r, delta);
            let total = mu_l + mu_r;
            let (pl, pr) = (ml / total, mr / total);
            for _ in 0..photons {
                let u: f64 = rng.random();
                if u < pl {
                    hit_l = true;
                } else if u < pl + pr {
                    hit_r = true;
                }
            }
        }
        let click_l = hit_l || rng.random::<f64>() < d;
        let click_r = hit_r || rng.random::<f64>() < d;
        let heralded = click_l != click_r;
        let (li, ri) = (l.index(), r.index());
        t.windows[li][ri] += 1;
        if heralded {
            t.heralded[li][ri] += 1;
        }
        if l == Label::X && r == Label::X {
            let accepted = 1.0 - delta.cos().abs() <= p.lambda;
            if accepted {
                t.x_accepted += 1;
                if cfg.tag_truth && photons == 1 {
                    t.truth.x1_windows += 1;
                }
                if heralded {
                    let constructive_left = delta.cos() >= 0.0;
                    let mut wrong = click_l != constructive_left;
                    if rng.random::<f64>() < e_d {
                        wrong = !wrong;
                    }
                    if wrong {
                        t.x_errors += 1;
                    }
                    if cfg.tag_truth && photons == 1 {
                        t.truth.x1_heralded += 1;
                        if wrong {
                            t.truth.x1_errors += 1;
                        }
                    }
                }
            }
        }
        if heralded && layout.is_code_pair(l, r) {
            let alice_sends = layout.is_sending(l);
            let bob_sends = layout.is_sending(r);
            let single_sender = alice_sends != bob_sends && (l == vac || r == vac);
            let untagged = single_sender && photons == 1;
            if cfg.tag_truth && single_sender {
                match (alice_sends, photons) {
                    (true, 1) => t.truth.n10 += 1,
                    (false, 1) => t.truth.n01 += 1,
                    (true, 0) => t.truth.n0_alice += 1,
                    (false, 0) => t.truth.n0_bob += 1,
                    _ => {}
                }
            }
            if cfg.keep_bits {
                let phase_error = untagged && rng.random::<f64>() < s.phase_error;
                t.bits.push(BitRecord {
                    alice_bit: alice_sends,
                    error: layout.is_error_pair(l, r),
                    untagged,
                    phase_error,
                });
            }
        }
        sink(&WindowRecord { index, l, r, photons, theta_a, theta_b, click_l, click_r });
    }
    t
}

fn finish(cfg: &SimConfig, t: Tally) -> Result<SimOutcome> {
    let to_f = |a: [[u64; Label::COUNT]; Label::COUNT]| a.map(|row| row.map(|v| v as f64));
    let counts = CountsTable::new(
        to_f(t.windows),
        to_f(t.heralded),
        t.x_errors as f64,
        t.x_accepted as f64,
        cfg.params.layout(),
        CountKind::Observed,
    )?;
    Ok(SimOutcome { counts, truth: t.truth, bits: t.bits })
}

/// Simulates `cfg.n_windows` windows; blocks run in parallel.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg)?;
    let blocks = cfg.n_windows.div_ceil(BLOCK);
    let tallies: Vec<Tally> = (0..blocks).into_par_iter().map(|b| run_block(cfg, &sampler, b, &mut |_| {})).collect();
    let total = tallies.into_iter().fold(Tally::new(), Tally::merge);
    finish(cfg, total)
}

/// Column header of the ledger dump.
pub const LEDGER_HEADER: &str = "window\tl\tr\tphotons\ttheta_a\ttheta_b\tclick_l\tclick_r";

/// Like [`simulate`], also writing one tab-separated line per window.
pub fn simulate_with_ledger(cfg: &SimConfig, out: &mut dyn Write) -> Result<SimOutcome> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg)?;
    let io = |e: std::io::Error| Error::Params(format!("ledger write failed: {e}"));
    writeln!(out, "{LEDGER_HEADER}").map_err(io)?;
    let mut failure = None;
    let mut total = Tally::new();
    for b in 0..cfg.n_windows.div_ceil(BLOCK) {
        let mut sink = |w: &WindowRecord| {
            if failure.is_none() {
                if let Err(e) = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                    w.index,
                    w.l,
                    w.r,
                    w.photons,
                    w.theta_a,
                    w.theta_b,
                    u8::from(w.click_l),
                    u8::from(w.click_r)
                ) {
                    failure = Some(e);
                }
            }
        };
        total = total.merge(run_block(cfg, &sampler, b, &mut sink));
    }
    if let Some(e) = failure {
        return Err(io(e));
    }
    finish(cfg, total)
}

/// Realized outcome of one pairing round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AoppRealized {
    pub n_odd: u64,
    pub n_t_prime: u64,
    pub n_e_prime: u64,
    /// Survivors whose two bits were both untagged.
    pub untagged_pairs: u64,
    /// Untagged survivors whose kept bit carries a phase flip.
    pub phase_errors: u64,
}

impl AoppRealized {
    pub fn e_t_prime(&self) -> f64 {
        if self.n_t_prime == 0 {
            0.0
        } else {
            self.n_e_prime as f64 / self.n_t_prime as f64
        }
    }
}

/// Pairs bit-1 with bit-0 code bits at random, keeps pairs whose parity
/// Bob also finds odd, and keeps one random bit of each survivor.
pub fn simulate_aopp(bits: &[BitRecord], seed: u64) -> AoppRealized {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ones: Vec<&BitRecord> = bits.iter().filter(|b| b.alice_bit).collect();
    let mut zeros: Vec<&BitRecord> = bits.iter().filter(|b| !b.alice_bit).collect();
    ones.shuffle(&mut rng);
    zeros.shuffle(&mut rng);
    let n_odd = ones.len().min(zeros.len());
    let mut out = AoppRealized { n_odd: n_odd as u64, ..AoppRealized::default() };
    for (a, b) in ones.iter().zip(zeros.iter()) {
        // Bob's parity is odd exactly when both or neither bit flipped
        if a.error != b.error {
            continue;
        }
        out.n_t_prime += 1;
        let _kept_first: bool = rng.random();
        if a.error {
            out.n_e_prime += 1;
        }
        if a.untagged && b.untagged {
            out.untagged_pairs += 1;
            if a.phase_error != b.phase_error {
                out.phase_errors += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CodeBitOption, Scheme};

    fn params(option: CodeBitOption) -> ProtocolParams {
        ProtocolParams {
            mu_x: 0.1,
            mu_y: 0.4,
            mu_z: 0.5,
            p_v: 0.4,
            p_x: 0.2,
            p_y: 0.2,
            p_z: 0.2,
            p_o: 0.0,
            n_total: 1e5,
            lambda: 0.05,
            option,
            scheme: Scheme::Improved,
        }
    }

    fn cfg(n: u64, channel: ChannelModel) -> SimConfig {
        SimConfig { n_windows: n, seed: 11, params: params(CodeBitOption::Xyz), channel, tag_truth: true, keep_bits: false }
    }

    #[test]
    fn no_light_no_dark_no_clicks() {
        let mut ch = ChannelModel::reference(0.0);
        ch.eta_d = 0.0;
        ch.dark = 0.0;
        let out = simulate(&cfg(200_000, ch)).unwrap();
        assert_eq!(out.counts.heralded.iter().flatten().sum::<f64>(), 0.0);
    }

    #[test]
    fn vacuum_only_heralds_dark_counts() {
        let mut ch = ChannelModel::reference(10.0);
        ch.dark = 1e-3;
        let mut c = cfg(1_000_000, ch);
        c.params = ProtocolParams { p_v: 1.0, p_x: 0.0, p_y: 0.0, p_z: 0.0, ..c.params };
        let out = simulate(&c).unwrap();
        let n = c.n_windows as f64;
        let p = 2.0 * 1e-3 * (1.0 - 1e-3);
        let got = out.counts.heralded.iter().flatten().sum::<f64>();
        assert!((got - n * p).abs() < 5.0 * (n * p * (1.0 - p)).sqrt(), "{got} vs {}", n * p);
    }

    #[test]
    fn chunking_and_threads_do_not_change_results() {
        let ch = ChannelModel::reference(20.0);
        let c = cfg(3 * BLOCK + 17, ch);
        let a = simulate(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate(&c).unwrap());
        assert_eq!(a, b);
        let mut ledger = Vec::new();
        let l = simulate_with_ledger(&c, &mut ledger).unwrap();
        assert_eq!(a, l);
        let text = String::from_utf8(ledger).unwrap();
        assert_eq!(text.lines().count() as u64, c.n_windows + 1);
        assert!(text.starts_with(LEDGER_HEADER));
    }

    #[test]
    fn truth_never_exceeds_heralded() {
        let c = cfg(500_000, ChannelModel::reference(5.0));
        let out = simulate(&c).unwrap();
        let right: f64 = [Label::X, Label::Y, Label::Z].iter().map(|&l| out.counts.n(l, Label::V)).sum();
        let left: f64 = [Label::X, Label::Y, Label::Z].iter().map(|&r| out.counts.n(Label::V, r)).sum();
        assert!(out.truth.n10 as f64 + out.truth.n0_alice as f64 <= right);
        assert!(out.truth.n01 as f64 + out.truth.n0_bob as f64 <= left);
        assert!(out.truth.x1_heralded as f64 <= out.counts.x_accepted);
        assert!(out.truth.x1_errors as f64 <= out.counts.x_errors);
    }

    #[test]
    fn oversized_runs_are_rejected() {
        let c = cfg(MAX_WINDOWS + 1, ChannelModel::reference(5.0));
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn pairing_survivors() {
        let bit = |alice_bit, error| BitRecord { alice_bit, error, untagged: false, phase_error: false };
        let mut bits = vec![bit(true, false); 100];
        bits.extend(vec![bit(false, false); 150]);
        let r = simulate_aopp(&bits, 1);
        assert_eq!((r.n_odd, r.n_t_prime, r.n_e_prime), (100, 100, 0));
        let mut bits = vec![bit(true, true); 40];
        bits.extend(vec![bit(false, true); 60]);
        let r = simulate_aopp(&bits, 1);
        assert_eq!((r.n_t_prime, r.n_e_prime), (40, 40));
        assert_eq!(r.e_t_prime(), 1.0);
        assert_eq!(simulate_aopp(&bits[..40], 1).n_odd, 0);
    }
}
