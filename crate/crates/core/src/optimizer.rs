//! Parameter search: multi-start Nelder-Mead over unconstrained
//! coordinates, with every code-bit option enumerated.
//!
//! Probabilities are softmax weights relative to the vacuum label, each
//! intensity is a logistic map onto `(MU_MIN, MU_MAX)`, and the decoy gap
//! `μ_y − μ_x` is a logistic fraction of `1 − μ_x` so the ordering holds
//! everywhere in the search space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoy::Fluctuation;
use crate::error::{Error, Result};
use crate::keylength::{KeyRateReport, SecurityParams};
use crate::model::{ChannelModel, CodeBitOption, Label, ProtocolParams, Scheme};
use crate::pipeline::{self, Mode, PipelineConfig};

pub const MU_MIN: f64 = 1e-4;
pub const MU_MAX: f64 = 1.0;
const LAMBDA_MIN: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub mode: Mode,
    /// Options to enumerate; ignored for the prior-art mode, which only has `[z]`.
    pub options: Vec<CodeBitOption>,
    /// Also search with `p_z = 0` for options that do not need `μ_z`.
    pub three_intensity: bool,
    pub pin_mu_x: Option<f64>,
    pub pin_lambda: Option<f64>,
    pub restarts: usize,
    /// Total objective evaluations per option variant.
    pub max_evals: usize,
    pub seed: u64,
    /// Centre of the random starts; a neighbouring optimum speeds up sweeps.
    pub warm_start: Option<ProtocolParams>,
    pub fluctuation: Fluctuation,
    pub joint_constraints: bool,
    /// Grid size of the vacuum-yield scan in the final report.
    pub scan_points: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            mode: Mode::Comparison,
            options: CodeBitOption::ALL.to_vec(),
            three_intensity: true,
            pin_mu_x: None,
            pin_lambda: None,
            restarts: 8,
            max_evals: 6000,
            seed: 0,
            warm_start: None,
            fluctuation: Fluctuation::Finite,
            joint_constraints: false,
            scan_points: 200,
        }
    }
}

impl SearchSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.pin_mu_x {
            if !(mu > MU_MIN && mu < MU_MAX) {
                return Err(Error::Search(format!("pinned mu_x must lie in ({MU_MIN}, {MU_MAX}), got {mu}")));
            }
        }
        if let Some(l) = self.pin_lambda {
            if !(l > 0.0 && l <= 2.0) {
                return Err(Error::Search(format!("pinned lambda must lie in (0, 2], got {l}")));
            }
        }
        if self.restarts == 0 || self.max_evals < 10 * self.restarts {
            return Err(Error::Search(format!(
                "need at least one restart and 10 evaluations per restart, got {} restarts and {} evaluations",
                self.restarts, self.max_evals
            )));
        }
        if self.mode != Mode::PriorArt && self.options.is_empty() {
            return Err(Error::Search("no code-bit option to search".into()));
        }
        Ok(())
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            fluctuation: self.fluctuation,
            joint_constraints: self.joint_constraints,
            scan_points: self.scan_points,
            ..self.mode.config()
        }
    }

    /// Option variants searched: `(option, p_z forced to zero)`.
    fn variants(&self) -> Vec<(CodeBitOption, bool)> {
        if self.mode == Mode::PriorArt {
            return vec![(CodeBitOption::Z, false)];
        }
        let mut v = Vec::new();
        for &o in &self.options {
            v.push((o, false));
            if self.three_intensity && o != CodeBitOption::Z {
                v.push((o, true));
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantBest {
    pub option: CodeBitOption,
    pub three_intensity: bool,
    /// Unfloored `ñ / N_t` at the variant's best point.
    pub objective: f64,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub params: ProtocolParams,
    pub report: KeyRateReport,
    pub evaluations: usize,
    pub variants: Vec<VariantBest>,
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn to_interval(t: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * sigmoid(t)
}

fn from_interval(v: f64, lo: f64, hi: f64) -> f64 {
    logit(((v - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9))
}

/// Maps search coordinates to protocol parameters for one variant.
#[derive(Clone, Debug)]
struct Encoding {
    option: CodeBitOption,
    scheme: Scheme,
    /// Labels with a free probability besides the vacuum reference.
    labels: Vec<Label>,
    uses_mu_z: bool,
    pin_mu_x: Option<f64>,
    pin_lambda: Option<f64>,
    n_total: f64,
}

impl Encoding {
    fn new(spec: &SearchSpec, option: CodeBitOption, three: bool, n_total: f64) -> Self {
        let scheme = spec.mode.scheme();
        let mut labels = vec![Label::X, Label::Y];
        if !three {
            labels.push(Label::Z);
        }
        if scheme == Scheme::PriorArt {
            labels.push(Label::O);
        }
        Encoding {
            option,
            scheme,
            labels,
            uses_mu_z: !three,
            pin_mu_x: spec.pin_mu_x,
            pin_lambda: spec.pin_lambda,
            n_total,
        }
    }

    fn dim(&self) -> usize {
        self.labels.len()
            + 1
            + usize::from(self.uses_mu_z)
            + usize::from(self.pin_mu_x.is_none())
            + usize::from(self.pin_lambda.is_none())
    }

    fn decode(&self, z: &[f64]) -> ProtocolParams {
        // keep every logistic strictly inside its interval
        debug_assert_eq!(z.len(), self.dim());
        let z: Vec<f64> = z.iter().map(|t| t.clamp(-20.0, 20.0)).collect();
        let k = self.labels.len();
        let m = z[..k].iter().fold(0.0f64, |a, &b| a.max(b));
        let w: Vec<f64> = z[..k].iter().map(|&t| (t - m).exp()).collect();
        let denom = (-m).exp() + w.iter().sum::<f64>();
        let mut probs = [0.0; Label::COUNT];
        probs[Label::V.index()] = (-m).exp() / denom;
        for (l, wi) in self.labels.iter().zip(&w) {
            probs[l.index()] = wi / denom;
        }
        let mut i = k;
        let mut next = || {
            let v = z[i];
            i += 1;
            v
        };
        let mu_x = match self.pin_mu_x {
            Some(m) => m,
            None => to_interval(next(), MU_MIN, MU_MAX),
        };
        let mu_y = mu_x + (MU_MAX - mu_x) * sigmoid(next());
        let mu_z = if self.uses_mu_z { to_interval(next(), MU_MIN, MU_MAX) } else { mu_y };
        let lambda = match self.pin_lambda {
            Some(l) => l,
            None => to_interval(next(), LAMBDA_MIN, LAMBDA_MAX),
        };
        ProtocolParams {
            mu_x,
            mu_y,
            mu_z,
            p_v: probs[Label::V.index()],
            p_x: probs[Label::X.index()],
            p_y: probs[Label::Y.index()],
            p_z: probs[Label::Z.index()],
            p_o: probs[Label::O.index()],
            n_total: self.n_total,
            lambda,
            option: self.option,
            scheme: self.scheme,
        }
    }

    fn encode(&self, p: &ProtocolParams) -> Vec<f64> {
        let floor = 1e-6;
        let pv = p.p_v.max(floor);
        let mut z: Vec<f64> = self.labels.iter().map(|&l| (p.prob(l).max(floor) / pv).ln()).collect();
        let mu_x = self.pin_mu_x.unwrap_or(p.mu_x).clamp(MU_MIN * 1.01, MU_MAX * 0.99);
        if self.pin_mu_x.is_none() {
            z.push(from_interval(mu_x, MU_MIN, MU_MAX));
        }
        z.push(logit(((p.mu_y - mu_x) / (MU_MAX - mu_x)).clamp(1e-6, 1.0 - 1e-6)));
        if self.uses_mu_z {
            z.push(from_interval(p.mu_z, MU_MIN, MU_MAX));
        }
        if self.pin_lambda.is_none() {
            z.push(from_interval(p.lambda, LAMBDA_MIN, LAMBDA_MAX));
        }
        z
    }
}

/// A generic starting point for any variant.
fn default_centre(option: CodeBitOption, scheme: Scheme, n_total: f64) -> ProtocolParams {
    ProtocolParams {
        mu_x: 0.05,
        mu_y: 0.3,
        mu_z: 0.4,
        p_v: if scheme == Scheme::PriorArt { 0.2 } else { 0.55 },
        p_x: 0.15,
        p_y: 0.1,
        p_z: 0.2,
        p_o: if scheme == Scheme::PriorArt { 0.35 } else { 0.0 },
        n_total,
        lambda: 0.01,
        option,
        scheme,
    }
}

/// Downhill simplex maximizing `f`; returns the best point, its value and
/// the evaluations spent.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let neg = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| neg(p)).collect();
    let mut evals = n + 1;
    // adaptive coefficients for moderate dimension
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        let size = pts[1..].iter().flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if (spread <= 1e-10 * vals[0].abs() + 1e-300 && size < 1e-6) || size < 1e-9 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect() };
        let xr = along(-alpha);
        let fr = neg(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-alpha * gamma);
            let fe = neg(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(-alpha * rho);
                let fc = neg(&xc);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = neg(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                let anchor = pts[0].clone();
                for i in 1..=n {
                    for (x, a) in pts[i].iter_mut().zip(&anchor) {
                        *x = a + sigma * (*x - a);
                    }
                    vals[i] = neg(&pts[i]);
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b))).unwrap_or(0);
    (pts[best].clone(), -vals[best], evals)
}

struct Objective<'a> {
    enc: Encoding,
    channel: &'a ChannelModel,
    sec: &'a SecurityParams,
    cfg: PipelineConfig,
}

impl Objective<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        let p = self.enc.decode(z);
        match pipeline::evaluate(&p, self.channel, self.sec, &self.cfg) {
            Ok(r) => r.n_tilde / r.n_total,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

fn start_seed(seed: u64, variant: usize, start: usize) -> u64 {
    seed ^ (variant as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (start as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Best parameters at one channel and block size, over every enumerated
/// option variant.
pub fn optimize(channel: &ChannelModel, n_total: f64, sec: &SecurityParams, spec: &SearchSpec) -> Result<Optimum> {
    spec.validate()?;
    channel.validate()?;
    sec.validate()?;
    if !(n_total >= 1.0 && n_total.is_finite()) {
        return Err(Error::Search(format!("block size must be a positive count, got {n_total}")));
    }
    let full = spec.pipeline();
    // scanning only refines the final report; the search itself skips it
    let search_cfg = PipelineConfig { scan: false, ..full };
    let variants = spec.variants();
    let per_start = spec.max_evals / (spec.restarts + 1);

    let tasks: Vec<(usize, usize)> =
        (0..variants.len()).flat_map(|v| (0..spec.restarts).map(move |s| (v, s))).collect();
    let runs: Vec<(usize, Vec<f64>, f64, usize)> = tasks
        .par_iter()
        .map(|&(v, s)| {
            let (option, three) = variants[v];
            let obj = Objective { enc: Encoding::new(spec, option, three, n_total), channel, sec, cfg: search_cfg };
            let centre = spec
                .warm_start
                .as_ref()
                .map(|w| ProtocolParams { option, scheme: obj.enc.scheme, n_total, ..w.clone() })
                .unwrap_or_else(|| default_centre(option, obj.enc.scheme, n_total));
            let mut z = obj.enc.encode(&centre);
            if s > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(start_seed(spec.seed, v, s));
                for zi in z.iter_mut() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *zi += g;
                }
            }
            let (x, fx, ev) = nelder_mead(&|z| obj.value(z), &z, 0.5, per_start);
            (v, x, fx, ev)
        })
        .collect();

    let polished: Vec<(Vec<f64>, f64, usize)> = (0..variants.len())
        .into_par_iter()
        .map(|v| {
            let (option, three) = variants[v];
            let obj = Objective { enc: Encoding::new(spec, option, three, n_total), channel, sec, cfg: search_cfg };
            let mine = runs.iter().filter(|r| r.0 == v);
            let spent: usize = mine.clone().map(|r| r.3).sum();
            let best = mine.fold(None::<&(usize, Vec<f64>, f64, usize)>, |acc, r| match acc {
                Some(a) if a.2 >= r.2 => Some(a),
                _ => Some(r),
            });
            let Some(best) = best else { return (Vec::new(), f64::NEG_INFINITY, spent) };
            let (x, fx, ev) = nelder_mead(&|z| obj.value(z), &best.1, 0.1, per_start);
            if fx >= best.2 {
                (x, fx, spent + ev)
            } else {
                (best.1.clone(), best.2, spent + ev)
            }
        })
        .collect();

    let mut summary = Vec::with_capacity(variants.len());
    let mut winner: Option<(usize, f64)> = None;
    for (v, (_, fx, ev)) in polished.iter().enumerate() {
        summary.push(VariantBest { option: variants[v].0, three_intensity: variants[v].1, objective: *fx, evaluations: *ev });
        if fx.is_finite() && winner.is_none_or(|(_, best)| *fx > best) {
            winner = Some((v, *fx));
        }
    }
    let (v, _) = winner.ok_or_else(|| Error::Search("no feasible parameter point found".into()))?;
    let (option, three) = variants[v];
    let enc = Encoding::new(spec, option, three, n_total);
    let params = enc.decode(&polished[v].0);
    let report = pipeline::evaluate(&params, channel, sec, &full)?;
    Ok(Optimum { params, report, evaluations: summary.iter().map(|s| s.evaluations).sum(), variants: summary })
}
