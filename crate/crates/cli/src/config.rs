//! Run configurations. Files are TOML (or JSON, e.g. a sidecar written by a
//! previous run); unknown keys anywhere are rejected. Defaults reproduce the
//! radar setup.

use std::path::{Path, PathBuf};

use m2spec::estimator::{Family, Method, MonteCarloConfig, PriorKind, ThetaDraw};
use m2spec::isdual::{SolverMethod, SolverOptions};
use m2spec::models::{ArConfig, SinusoidConfig, DEFAULT_BURN_IN};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const RADAR_DIMS: [usize; 3] = [30, 30, 8];
pub const RADAR_FREQS: [f64; 3] = [0.8101, -0.5872, 2.1798];

/// Reads a config as JSON when the extension is `.json`, as TOML otherwise.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Is,
    Rect,
    Bart,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Is => Method::Is,
            MethodName::Rect => Method::Rect,
            MethodName::Bart => Method::Bart,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Sinusoid,
    Ar,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    1
}
fn radar_dims() -> [usize; 3] {
    RADAR_DIMS
}
fn radar_freqs() -> [f64; 3] {
    RADAR_FREQS
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn antenna_ratio() -> i64 {
    20
}
fn pole_moduli() -> [f64; 3] {
    [0.3; 3]
}
fn burn_in() -> [usize; 3] {
    [DEFAULT_BURN_IN; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidModel {
    #[serde(default = "radar_dims")]
    pub dims: [usize; 3],
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "radar_freqs")]
    pub freqs: [f64; 3],
    #[serde(default = "antenna_ratio")]
    pub antenna_ratio: i64,
    #[serde(default = "two")]
    pub noise_var: f64,
}

impl Default for SinusoidModel {
    fn default() -> Self {
        Self { dims: RADAR_DIMS, amplitude: 1.0, freqs: RADAR_FREQS, antenna_ratio: 20, noise_var: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArModel {
    #[serde(default = "radar_dims")]
    pub dims: [usize; 3],
    #[serde(default = "pole_moduli")]
    pub pole_moduli: [f64; 3],
    #[serde(default = "radar_freqs")]
    pub freqs: [f64; 3],
    #[serde(default = "antenna_ratio")]
    pub antenna_ratio: i64,
    #[serde(default = "two")]
    pub noise_var: f64,
    #[serde(default = "burn_in")]
    pub burn_in: [usize; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelConfig {
    Sinusoid(SinusoidModel),
    Ar(ArModel),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Sinusoid(SinusoidModel::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
}

impl SimulateConfig {
    pub fn sinusoid(&self) -> Option<SinusoidConfig> {
        match &self.model {
            ModelConfig::Sinusoid(s) => Some(SinusoidConfig {
                dims: s.dims,
                amplitude: s.amplitude,
                freqs: s.freqs,
                antenna_ratio: s.antenna_ratio,
                noise_var: s.noise_var,
                seed: self.seed,
            }),
            ModelConfig::Ar(_) => None,
        }
    }

    pub fn ar(&self) -> Option<ArConfig> {
        match &self.model {
            ModelConfig::Ar(a) => Some(ArConfig {
                dims: a.dims,
                pole_moduli: a.pole_moduli,
                freqs: a.freqs,
                antenna_ratio: a.antenna_ratio,
                noise_var: a.noise_var,
                burn_in: a.burn_in,
                seed: self.seed,
            }),
            ModelConfig::Sinusoid(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    Newton,
    QuasiNewton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub backtrack: f64,
    pub armijo: f64,
    pub min_step: f64,
    pub method: SolverName,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            residual_tol: d.residual_tol,
            max_iterations: d.max_iterations,
            backtrack: d.backtrack,
            armijo: d.armijo,
            min_step: d.min_step,
            method: SolverName::Newton,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            residual_tol: self.residual_tol,
            max_iterations: self.max_iterations,
            backtrack: self.backtrack,
            armijo: self.armijo,
            min_step: self.min_step,
            method: match self.method {
                SolverName::Newton => SolverMethod::Newton,
                SolverName::QuasiNewton => SolverMethod::QuasiNewton,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [("tol", self.tol), ("residual_tol", self.residual_tol), ("armijo", self.armijo), ("min_step", self.min_step)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(CliError::Validation(format!("solver.backtrack must lie in (0, 1), got {}", self.backtrack)));
        }
        if self.max_iterations == 0 {
            return Err(CliError::Validation("solver.max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriorName {
    /// Constant `Sigma_hat_0`.
    #[default]
    ZeroLag,
    Identity,
}

fn rect_widths() -> Vec<usize> {
    vec![8, 8, 2]
}
fn bart_widths() -> Vec<usize> {
    vec![12, 12, 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Defaults to 1 on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_radii: Option<Vec<usize>>,
    /// Periodogram ridge; derived from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub prior: PriorName,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "rect_widths")]
    pub rect_widths: Vec<usize>,
    #[serde(default = "bart_widths")]
    pub bart_widths: Vec<usize>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { lag_radii: None, epsilon: None, prior: PriorName::ZeroLag, solver: SolverConfig::default(), rect_widths: rect_widths(), bart_widths: bart_widths() }
    }
}

impl EstimatorConfig {
    pub fn radii(&self, d: usize) -> Vec<usize> {
        self.lag_radii.clone().unwrap_or_else(|| vec![1; d])
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(CliError::Validation(format!("estimator.epsilon must be positive, got {e}")));
            }
        }
        Ok(())
    }

    pub fn prior_kind(&self) -> PriorKind<f64> {
        match self.prior {
            PriorName::ZeroLag => PriorKind::ZeroLag,
            PriorName::Identity => PriorKind::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Signal field file.
    pub input: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_method")]
    pub method: MethodName,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

fn default_method() -> MethodName {
    MethodName::Is
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumInput {
    /// Column name in the CSV output.
    pub label: String,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub spectra: Vec<SpectrumInput>,
    /// 1-based grid point the sections pass through; defaults to the peak of
    /// the first spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub through: Option<Vec<usize>>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn hundred() -> usize {
    100
}
fn all_methods() -> Vec<MethodName> {
    vec![MethodName::Is, MethodName::Rect, MethodName::Bart]
}
fn sinusoid_family() -> FamilyName {
    FamilyName::Sinusoid
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloModel {
    #[serde(default = "sinusoid_family")]
    pub family: FamilyName,
    #[serde(default = "radar_dims")]
    pub dims: [usize; 3],
    /// Sinusoid amplitude.
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "antenna_ratio")]
    pub antenna_ratio: i64,
    #[serde(default = "two")]
    pub noise_var: f64,
    /// AR pole moduli.
    #[serde(default = "pole_moduli")]
    pub pole_moduli: [f64; 3],
    #[serde(default = "burn_in")]
    pub burn_in: [usize; 3],
    /// Fixed frequency vector; when absent each trial draws one uniformly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<[f64; 3]>,
}

impl Default for MonteCarloModel {
    fn default() -> Self {
        Self {
            family: FamilyName::Sinusoid,
            dims: RADAR_DIMS,
            amplitude: 1.0,
            antenna_ratio: 20,
            noise_var: 2.0,
            pole_moduli: pole_moduli(),
            burn_in: burn_in(),
            theta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloFileConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Trial `i` (0-based) uses seed `seed + i`.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "hundred")]
    pub trials: usize,
    #[serde(default = "all_methods")]
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub model: MonteCarloModel,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

impl MonteCarloFileConfig {
    pub fn to_core(&self) -> Result<MonteCarloConfig> {
        self.estimator.validate()?;
        let m = &self.model;
        let cfg = MonteCarloConfig {
            family: match m.family {
                FamilyName::Sinusoid => Family::Sinusoid,
                FamilyName::Ar => Family::Ar,
            },
            dims: m.dims,
            amplitude: m.amplitude,
            antenna_ratio: m.antenna_ratio,
            noise_var: m.noise_var,
            pole_moduli: m.pole_moduli,
            burn_in: m.burn_in,
            theta: m.theta.map_or(ThetaDraw::Uniform, ThetaDraw::Fixed),
            methods: self.methods.iter().map(|&x| x.into()).collect(),
            trials: self.trials,
            base_seed: self.seed,
            lag_radii: self.estimator.radii(3),
            epsilon: self.estimator.epsilon,
            solver: self.estimator.solver.options(),
            rect_widths: self.estimator.rect_widths.clone(),
            bart_widths: self.estimator.bart_widths.clone(),
        };
        cfg.validate()?;
        for method in &cfg.methods {
            if let Some(w) = cfg.window(*method) {
                if w.widths.len() != 3 || w.widths.iter().zip(&cfg.dims).any(|(&w, &n)| w == 0 || w > n) {
                    return Err(CliError::Validation(format!("{} widths {:?} do not fit the grid {:?}", method.tag(), w.widths, cfg.dims)));
                }
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_files_resolve_to_radar_defaults() {
        let sim: SimulateConfig = toml::from_str("").unwrap();
        assert_eq!(sim.model, ModelConfig::Sinusoid(SinusoidModel::default()));
        assert_eq!(sim.sinusoid().unwrap(), SinusoidConfig::radar_reference(1));
        let mc: MonteCarloFileConfig = toml::from_str("").unwrap();
        let core = mc.to_core().unwrap();
        assert_eq!(core, {
            let mut c = MonteCarloConfig::radar(Family::Sinusoid, 100, 1);
            c.lag_radii = vec![1, 1, 1];
            c
        });
    }

    #[test]
    fn families_are_tagged() {
        let sim: SimulateConfig = toml::from_str("seed = 4\n[model]\nfamily = \"ar\"\npole_moduli = [0.2, 0.2, 0.2]\n").unwrap();
        let ar = sim.ar().unwrap();
        assert_eq!(ar.pole_moduli, [0.2; 3]);
        assert_eq!(ar.burn_in, [DEFAULT_BURN_IN; 3]);
        assert_eq!(ar.seed, 4);
        assert!(sim.sinusoid().is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for text in [
            "sed = 3",
            "[model]\nfamily = \"sinusoid\"\npole_moduli = [0.1, 0.1, 0.1]",
            "[model]\nfamily = \"ar\"\namplitude = 2.0",
            "[model]\nfamily = \"arma\"",
        ] {
            assert!(toml::from_str::<SimulateConfig>(text).is_err(), "{text}");
        }
        assert!(toml::from_str::<EstimateConfig>("input = \"a\"\n[estimator.solver]\ntoll = 1e-3").is_err());
        assert!(toml::from_str::<MonteCarloFileConfig>("methods = [\"music\"]").is_err());
        assert!(toml::from_str::<CompareConfig>("spectra = []\nthrough = [1]\nextra = 1").is_err());
    }

    #[test]
    fn invalid_values_are_reported() {
        let mc: MonteCarloFileConfig = toml::from_str("trials = 0").unwrap();
        assert!(mc.to_core().is_err());
        let mc: MonteCarloFileConfig = toml::from_str("[estimator]\nrect_widths = [8, 8, 9]").unwrap();
        assert!(matches!(mc.to_core(), Err(CliError::Validation(_))));
        let mc: MonteCarloFileConfig = toml::from_str("[estimator.solver]\ntol = -1.0").unwrap();
        assert!(matches!(mc.to_core(), Err(CliError::Validation(_))));
    }

    #[test]
    fn json_and_toml_agree() {
        let cfg: EstimateConfig = toml::from_str("input = \"s.m2sf\"\nmethod = \"bart\"\n[estimator]\nlag_radii = [1, 0, 1]").unwrap();
        assert_eq!(cfg.estimator.solver, SolverConfig::default());
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<EstimateConfig>(&json).unwrap(), cfg);
    }
}
