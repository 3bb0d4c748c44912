//! The four batch commands. Each one writes its outputs plus a
//! `<name>.config.json` sidecar holding the fully resolved configuration;
//! passing that sidecar back through `--config` repeats the run exactly.

use std::path::{Path, PathBuf};

use m2spec::covariance::default_epsilon;
use m2spec::estimator::{cross_section, estimate_is, monte_carlo, peak_find, windowed_periodogram, EstimatorSpec, Method, Peak, WindowSpec};
use m2spec::grid::MatrixField;
use m2spec::isdual::SolveReport;
use m2spec::models::{simulate_ar, simulate_sinusoid};
use serde::Serialize;

use crate::config::{CompareConfig, EstimateConfig, MethodName, ModelConfig, MonteCarloFileConfig, SimulateConfig};
use crate::error::{CliError, Result};
use crate::fieldfile::FieldFile;

pub const SIGNAL_FILE: &str = "signal.m2sf";
pub const MONTECARLO_FILE: &str = "montecarlo.csv";

pub fn spectrum_file(method: MethodName) -> String {
    format!("spectrum_{}.m2sf", tag(method))
}

pub fn report_file(method: MethodName) -> String {
    format!("report_{}.json", tag(method))
}

pub fn cross_section_file(axis: usize) -> String {
    format!("cross_section_axis{}.csv", axis + 1)
}

fn tag(method: MethodName) -> String {
    Method::from(method).tag().to_ascii_lowercase()
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn sidecar(out: &Path, name: &str) -> PathBuf {
    out.join(format!("{name}.config.json"))
}

/// Simulates one realization; returns the written paths.
pub fn simulate(cfg: &SimulateConfig) -> Result<Vec<PathBuf>> {
    let y = match &cfg.model {
        ModelConfig::Sinusoid(_) => simulate_sinusoid(&cfg.sinusoid().expect("sinusoid model"))?,
        ModelConfig::Ar(_) => simulate_ar(&cfg.ar().expect("ar model"))?,
    };
    prepare(&cfg.out)?;
    let signal = cfg.out.join(SIGNAL_FILE);
    FieldFile::from_signal(&y).save(&signal)?;
    let echo = sidecar(&cfg.out, "simulate");
    write_json(&echo, cfg)?;
    Ok(vec![signal, echo])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub relative_gradient_norm: f64,
    pub final_dual_value: f64,
    pub moment_residual: f64,
    pub backtracking_steps: usize,
    pub steepest_descent_steps: usize,
    pub value_history: Vec<f64>,
}

impl From<&SolveReport> for SolverSummary {
    fn from(r: &SolveReport) -> Self {
        Self {
            converged: r.converged,
            iterations: r.iterations,
            final_gradient_norm: r.final_gradient_norm,
            relative_gradient_norm: r.relative_gradient_norm,
            final_dual_value: r.final_dual_value,
            moment_residual: r.moment_residual,
            backtracking_steps: r.backtracking_steps,
            steepest_descent_steps: r.steepest_descent_steps,
            value_history: r.value_history.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakSummary {
    /// 1-based grid index.
    pub index: Vec<usize>,
    /// Grid frequencies in `(-pi, pi]`.
    pub frequencies: Vec<f64>,
    /// Squared Frobenius norm of the spectrum at the peak.
    pub value: f64,
}

impl From<&Peak> for PeakSummary {
    fn from(p: &Peak) -> Self {
        Self { index: p.one_based(), frequencies: p.frequencies.clone(), value: p.value }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: MethodName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    pub peak: PeakSummary,
}

/// Estimates a spectrum from a signal file. The IS method also writes the
/// covariance estimates it matched.
pub fn estimate(cfg: &EstimateConfig) -> Result<(EstimateReport, Vec<PathBuf>)> {
    cfg.estimator.validate()?;
    let y = FieldFile::load(&cfg.input)?.to_signal()?;
    let d = y.shape().ndim();
    let mut resolved = cfg.clone();
    resolved.estimator.lag_radii = Some(cfg.estimator.radii(d));
    prepare(&cfg.out)?;
    let mut written = Vec::new();
    let (phi, report) = match cfg.method {
        MethodName::Is => {
            let epsilon = cfg.estimator.epsilon.unwrap_or_else(|| default_epsilon(&y));
            resolved.estimator.epsilon = Some(epsilon);
            let spec = EstimatorSpec {
                lag_radii: cfg.estimator.radii(d),
                prior: cfg.estimator.prior_kind(),
                epsilon: Some(epsilon),
                solver: cfg.estimator.solver.options(),
            };
            let est = estimate_is(&y, &spec)?;
            let cov = cfg.out.join("covariances.m2sf");
            FieldFile::from_covariances(&est.covariances, Some(epsilon)).save(&cov)?;
            written.push(cov);
            let peak = PeakSummary::from(&peak_find(&est.spectrum));
            let report = EstimateReport { method: cfg.method, epsilon: Some(epsilon), solver: Some((&est.report).into()), peak };
            (est.spectrum, report)
        }
        MethodName::Rect | MethodName::Bart => {
            let window = match cfg.method {
                MethodName::Rect => WindowSpec::rectangular(cfg.estimator.rect_widths.clone()),
                _ => WindowSpec::bartlett(cfg.estimator.bart_widths.clone()),
            };
            let phi = windowed_periodogram(&y, &window)?;
            let peak = PeakSummary::from(&peak_find(&phi));
            (phi, EstimateReport { method: cfg.method, epsilon: None, solver: None, peak })
        }
    };
    let spectrum = cfg.out.join(spectrum_file(cfg.method));
    FieldFile::from_spectrum(&phi, report.epsilon).save(&spectrum)?;
    let report_path = cfg.out.join(report_file(cfg.method));
    write_json(&report_path, &report)?;
    let echo = sidecar(&cfg.out, &format!("estimate_{}", tag(cfg.method)));
    write_json(&echo, &resolved)?;
    written.extend([spectrum, report_path, echo]);
    Ok((report, written))
}

/// Writes `||Phi||_F^2` along each axis through one grid point, one CSV per
/// axis with a column per spectrum.
pub fn compare(cfg: &CompareConfig) -> Result<Vec<PathBuf>> {
    if cfg.spectra.is_empty() {
        return Err(CliError::Validation("compare needs at least one spectrum".into()));
    }
    let mut fields: Vec<MatrixField<f64>> = Vec::with_capacity(cfg.spectra.len());
    for input in &cfg.spectra {
        let phi = FieldFile::load(&input.path)?.to_spectrum()?;
        if let Some(first) = fields.first() {
            first.same_layout(&phi).map_err(|e| CliError::Validation(format!("{}: {e}", input.path.display())))?;
        }
        fields.push(phi);
    }
    let shape = fields[0].shape().clone();
    let through: Vec<usize> = match &cfg.through {
        Some(p) => {
            if p.len() != shape.ndim() || p.iter().zip(shape.dims()).any(|(&i, &n)| i == 0 || i > n) {
                return Err(CliError::Validation(format!("through {p:?} is not a 1-based point of the grid {:?}", shape.dims())));
            }
            p.iter().map(|i| i - 1).collect()
        }
        None => peak_find(&fields[0]).index,
    };
    let mut resolved = cfg.clone();
    resolved.through = Some(through.iter().map(|i| i + 1).collect());
    prepare(&cfg.out)?;
    let mut written = Vec::new();
    for axis in 0..shape.ndim() {
        let columns: Vec<Vec<f64>> = fields.iter().map(|f| cross_section(f, axis, &through)).collect();
        let path = cfg.out.join(cross_section_file(axis));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["index".to_string()];
        header.extend(cfg.spectra.iter().map(|s| s.label.clone()));
        w.write_record(&header)?;
        for l in 0..shape.dims()[axis] {
            let mut row = vec![(l + 1).to_string()];
            row.extend(columns.iter().map(|c| c[l].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        written.push(path);
    }
    let echo = sidecar(&cfg.out, "compare");
    write_json(&echo, &resolved)?;
    written.push(echo);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct TrialRow {
    /// 1-based.
    trial: usize,
    method: &'static str,
    peak_error: f64,
    spectrum_rel_error: Option<f64>,
    seed: u64,
}

/// Runs the paired Monte-Carlo batch and writes one CSV row per trial and method.
pub fn montecarlo(cfg: &MonteCarloFileConfig) -> Result<Vec<PathBuf>> {
    let core = cfg.to_core()?;
    let results = monte_carlo(&core)?;
    prepare(&cfg.out)?;
    let path = cfg.out.join(MONTECARLO_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    for r in &results {
        w.serialize(TrialRow { trial: r.trial + 1, method: r.method.tag(), peak_error: r.peak_error, spectrum_rel_error: r.spectrum_rel_error, seed: r.seed })?;
    }
    w.flush()?;
    let mut resolved = cfg.clone();
    resolved.estimator.lag_radii = Some(core.lag_radii.clone());
    let echo = sidecar(&cfg.out, "montecarlo");
    write_json(&echo, &resolved)?;
    Ok(vec![path, echo])
}

