//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use snstf_core::keylength::SecurityParams;
use snstf_core::model::{ChannelModel, CodeBitOption};
use snstf_core::pipeline::Mode;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    pub device: DeviceConfig,
    pub sweep: SweepConfig,
    pub modes: ModesConfig,
    pub pins: PinConfig,
    pub search: SearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub dark: f64,
    pub e_d: f64,
    pub eta_d: f64,
    pub alpha_db_per_km: f64,
    pub f: f64,
    pub xi: f64,
    pub eps_cor: f64,
    pub eps_pa: f64,
    pub eps_hat: f64,
    /// Share of the fiber on Alice's side; unset means Charlie sits in the middle.
    pub alice_fraction: Option<f64>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let ch = ChannelModel::reference(0.0);
        let sec = SecurityParams::default();
        DeviceConfig {
            dark: ch.dark,
            e_d: ch.e_d,
            eta_d: ch.eta_d,
            alpha_db_per_km: ch.alpha_db_per_km,
            f: sec.f,
            xi: sec.xi,
            eps_cor: sec.eps_cor,
            eps_pa: sec.eps_pa,
            eps_hat: sec.eps_hat,
            alice_fraction: None,
        }
    }
}

impl DeviceConfig {
    pub fn channel(&self, distance_km: f64) -> ChannelModel {
        ChannelModel {
            distance_km,
            alpha_db_per_km: self.alpha_db_per_km,
            eta_d: self.eta_d,
            dark: self.dark,
            e_d: self.e_d,
            symmetric: self.alice_fraction.is_none(),
            alice_fraction: self.alice_fraction.unwrap_or(0.5),
        }
    }

    pub fn security(&self) -> SecurityParams {
        SecurityParams { eps_cor: self.eps_cor, eps_pa: self.eps_pa, eps_hat: self.eps_hat, f: self.f, xi: self.xi }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub distances_km: Vec<f64>,
    pub n_total: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { distances_km: Vec::new(), n_total: vec![1e11] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesConfig {
    pub comparison: bool,
    pub best_rate: bool,
    pub prior_art: bool,
    /// Code-bit options, e.g. `"[x,y,z]"` or `"yz"`.
    pub options: Vec<String>,
    /// One row per option; otherwise one row with the best option.
    pub per_option: bool,
    pub three_intensity: bool,
    pub joint_constraints: bool,
    pub asymptotic: bool,
    pub scan_points: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        ModesConfig {
            comparison: true,
            best_rate: false,
            prior_art: false,
            options: CodeBitOption::ALL.iter().map(|o| o.as_str().to_string()).collect(),
            per_option: true,
            three_intensity: true,
            joint_constraints: false,
            asymptotic: false,
            scan_points: 200,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinConfig {
    pub mu_x: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_evals: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { restarts: 8, max_evals: 6000 }
    }
}

/// Line of the first `key = ...` assignment in `text`, 1-based.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn invalid(text: &str, section: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    let at = line_of(text, key).map(|l| format!("line {l}: ")).unwrap_or_default();
    CliError::Config(format!("{at}{section}.{key}: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn options(&self) -> Result<Vec<CodeBitOption>, CliError> {
        self.modes
            .options
            .iter()
            .map(|s| s.parse::<CodeBitOption>().map_err(|e| CliError::Config(format!("modes.options: {e}"))))
            .collect()
    }

    pub fn modes(&self) -> Vec<Mode> {
        let m = &self.modes;
        [(m.comparison, Mode::Comparison), (m.best_rate, Mode::BestRate), (m.prior_art, Mode::PriorArt)]
            .into_iter()
            .filter_map(|(on, mode)| on.then_some(mode))
            .collect()
    }

    /// Checks every value against the protocol invariants; `text` is the
    /// source used to point at offending lines.
    pub fn validate(&self, text: &str) -> Result<(), CliError> {
        let d = &self.device;
        let unit = |key: &str, v: f64, lo_open: bool| {
            let ok = if lo_open { v > 0.0 && v < 1.0 } else { (0.0..1.0).contains(&v) };
            if ok {
                Ok(())
            } else {
                Err(invalid(text, "device", key, format!("must lie in {}0, 1), got {v}", if lo_open { "(" } else { "[" })))
            }
        };
        unit("dark", d.dark, false)?;
        unit("e_d", d.e_d, false)?;
        unit("xi", d.xi, true)?;
        unit("eps_cor", d.eps_cor, true)?;
        unit("eps_pa", d.eps_pa, true)?;
        unit("eps_hat", d.eps_hat, true)?;
        if !(d.eta_d > 0.0 && d.eta_d <= 1.0) {
            return Err(invalid(text, "device", "eta_d", format!("must lie in (0, 1], got {}", d.eta_d)));
        }
        if !(d.alpha_db_per_km >= 0.0 && d.alpha_db_per_km.is_finite()) {
            return Err(invalid(text, "device", "alpha_db_per_km", format!("must be >= 0, got {}", d.alpha_db_per_km)));
        }
        if !(d.f >= 1.0 && d.f.is_finite()) {
            return Err(invalid(text, "device", "f", format!("must be >= 1, got {}", d.f)));
        }
        if let Some(a) = d.alice_fraction {
            if !(0.0..=1.0).contains(&a) {
                return Err(invalid(text, "device", "alice_fraction", format!("must lie in [0, 1], got {a}")));
            }
        }
        for &km in &self.sweep.distances_km {
            if !(km >= 0.0 && km.is_finite()) {
                return Err(invalid(text, "sweep", "distances_km", format!("distances must be >= 0, got {km}")));
            }
        }
        for &n in &self.sweep.n_total {
            if !(n >= 1.0 && n.is_finite() && n.fract() == 0.0) {
                return Err(invalid(text, "sweep", "n_total", format!("block sizes must be positive integers, got {n}")));
            }
        }
        let options = self.options().map_err(|e| match e {
            CliError::Config(m) => invalid(text, "modes", "options", m.trim_start_matches("modes.options: ")),
            other => other,
        })?;
        if options.is_empty() && (self.modes.comparison || self.modes.best_rate) {
            return Err(invalid(text, "modes", "options", "at least one option is needed"));
        }
        if self.modes.scan_points < 2 {
            return Err(invalid(text, "modes", "scan_points", format!("need at least 2 points, got {}", self.modes.scan_points)));
        }
        if let Some(mu) = self.pins.mu_x {
            if !(mu > 0.0 && mu < 1.0) {
                return Err(invalid(text, "pins", "mu_x", format!("must lie in (0, 1), got {mu}")));
            }
        }
        if let Some(l) = self.pins.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return Err(invalid(text, "pins", "lambda", format!("must lie in (0, 1], got {l}")));
            }
        }
        if self.search.restarts == 0 {
            return Err(invalid(text, "search", "restarts", "need at least one restart"));
        }
        if self.search.max_evals < 10 * self.search.restarts {
            return Err(invalid(text, "search", "max_evals", "need at least 10 evaluations per restart"));
        }
        Ok(())
    }
}
