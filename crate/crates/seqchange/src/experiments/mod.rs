//! Seeded Monte Carlo harness.
//!
//! Every experiment is a pure function of its configuration: trials draw
//! their randomness from `(seed, domain, trial)` streams, run independently
//! on a worker pool, and are reduced in trial order, so a rerun with the
//! same configuration produces byte-identical outputs regardless of
//! parallelism.
//!
//! Delay-side experiments condition on a single calibration training prefix
//! (the quantity under study is the conditional expected delay given the
//! training segment); the false-alarm experiment refits the estimate on
//! every trial, because its bound charges the deviation probability
//! `epsilon0` for exactly that training randomness.

use serde::Serialize;
use thiserror::Error;

use crate::codes::{CodecError, CodecSpec};
use crate::detect::{lambda_for_theta, lambda_window, DetectError, PrunePolicy};
use crate::estimate::{
    beta_bound, divergence_from_estimate, epsilon0_estimate, BetaBound, EmpiricalMarkovEstimate,
    EstimateError, EstimatorQuality,
};
use crate::markov::{ChangePoint, MarkovError, MarkovModel, ModelSampler, Symbol};
use crate::rng::{stream_rng, Domain};

pub mod acceptance;
mod sweeps;

pub use sweeps::{
    run_delay_sweep, run_e0_check, run_false_alarm_sweep, run_lorden_estimate,
    run_optimality_ratio, E0Point, E0Report, LordenPoint, LordenReport, RatioPoint, RatioReport,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// How the drift rate is chosen: an explicit value, or the optimality-slack
/// rule `lambda = D(mu1 || mu_hat) - D(mu1 || mu0) / (1 + theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LambdaPolicy {
    Explicit(f64),
    Theta(f64),
}

/// The threshold sweep: false-alarm levels `alpha` or CUSUM thresholds given
/// as `log2 gamma` (large thresholds stay representable in bits).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ThresholdGrid {
    Alphas(Vec<f64>),
    Log2Gammas(Vec<f64>),
}

/// Change-point grid settings for the worst-case delay estimate: change
/// points `{1, ceil(H/4), ceil(H/2), ceil(3H/4)}` for window `H`, a number
/// of sampled pre-change prefixes per change point, and trials per prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LordenSettings {
    pub window: usize,
    pub prefixes_per_point: usize,
    pub trials_per_prefix: usize,
}

impl Default for LordenSettings {
    fn default() -> Self {
        Self {
            window: 200,
            prefixes_per_point: 32,
            trials_per_prefix: 8,
        }
    }
}

impl LordenSettings {
    /// The change-point grid `{1, H/4, H/2, 3H/4}` (deduplicated, ascending).
    pub fn change_grid(&self) -> Vec<usize> {
        let h = self.window.max(1);
        let mut grid = vec![1, h.div_ceil(4), h.div_ceil(2), (3 * h).div_ceil(4)];
        grid.sort_unstable();
        grid.dedup();
        grid
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mu0: MarkovModel,
    pub mu1: Option<MarkovModel>,
    pub n0: usize,
    pub codec: CodecSpec,
    pub lambda: LambdaPolicy,
    pub grid: ThresholdGrid,
    pub trials: usize,
    pub horizon: usize,
    pub change_point: ChangePoint,
    pub seed: u64,
    /// Deviation tolerances behind `beta` and `epsilon0`.
    pub delta: f64,
    pub delta_prime: f64,
    pub epsilon0_trials: usize,
    pub prune: PrunePolicy,
    pub window_penalty: bool,
    pub lorden: LordenSettings,
}

impl ExperimentConfig {
    pub fn new(mu0: MarkovModel, mu1: Option<MarkovModel>) -> Self {
        Self {
            mu0,
            mu1,
            n0: 10_000,
            codec: CodecSpec::ctw(1),
            lambda: LambdaPolicy::Explicit(0.1),
            grid: ThresholdGrid::Alphas(vec![0.01]),
            trials: 100,
            horizon: 10_000,
            change_point: ChangePoint::At(1),
            seed: 1,
            delta: 0.005,
            delta_prime: 0.015,
            epsilon0_trials: 200,
            prune: PrunePolicy::Off,
            window_penalty: false,
            lorden: LordenSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::Config("trials must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(ExperimentError::Config("horizon must be at least 1".into()));
        }
        if self.n0 < 2 {
            return Err(ExperimentError::Config(
                "training length n0 must be at least 2".into(),
            ));
        }
        let empty = match &self.grid {
            ThresholdGrid::Alphas(v) => v.is_empty(),
            ThresholdGrid::Log2Gammas(v) => v.is_empty(),
        };
        if empty {
            return Err(ExperimentError::Config("threshold sweep is empty".into()));
        }
        if let ThresholdGrid::Alphas(v) = &self.grid {
            if v.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
                return Err(ExperimentError::Config(
                    "alpha values must lie in (0, 1]".into(),
                ));
            }
        }
        if self.mu0.is_deterministic() {
            return Err(ExperimentError::Config(
                "pre-change model is a deterministic cycle; detection rates degenerate".into(),
            ));
        }
        if let Some(mu1) = &self.mu1 {
            if mu1.alphabet() != self.mu0.alphabet() || mu1.order() != self.mu0.order() {
                return Err(ExperimentError::Config(
                    "mu0 and mu1 must share an alphabet and order".into(),
                ));
            }
            if mu1.is_deterministic() {
                return Err(ExperimentError::Config(
                    "post-change model is a deterministic cycle".into(),
                ));
            }
            let d = mu1.divergence_rate(&self.mu0)?;
            if d.is_nan() || d <= 0.0 {
                return Err(ExperimentError::Config(
                    "D(mu1 || mu0) must be positive for detection".into(),
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn mu1(&self) -> Result<&MarkovModel, ExperimentError> {
        self.mu1
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("this experiment needs a mu1 model".into()))
    }
}

/// Constants derived from one calibration training prefix: the estimate, the
/// accuracy bound, the deviation probability, the divergence rates, the
/// admissible drift window, and the resolved drift rate.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub est: EmpiricalMarkovEstimate,
    pub beta: BetaBound,
    pub epsilon0: EstimatorQuality,
    /// `D(mu0 || mu_hat)`.
    pub d00: f64,
    /// `D(mu1 || mu_hat)`.
    pub d10: f64,
    /// `D(mu1 || mu0)`.
    pub d_true: f64,
    pub window: (f64, f64),
    pub lambda: f64,
}

impl Calibration {
    /// The asymptotic delay slope `1 / (D(mu1 || mu_hat) - lambda)`.
    pub fn theoretical_slope(&self) -> f64 {
        1.0 / (self.d10 - self.lambda)
    }
}

/// Fit the calibration estimate and resolve every derived constant. The
/// drift rate is validated against the admissible window, never assumed.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<Calibration, ExperimentError> {
    cfg.validate()?;
    let mu1 = cfg.mu1()?;
    let est = fit_streaming(&cfg.mu0, cfg.n0, cfg.seed, Domain::Calibration, 0)?;
    let beta = beta_bound(&cfg.mu0, cfg.delta, cfg.delta_prime)?;
    let window = lambda_window(&est, &cfg.mu0, mu1, &beta)?;
    let lambda = match cfg.lambda {
        LambdaPolicy::Explicit(l) => {
            if l <= window.0 || l >= window.1 {
                return Err(ExperimentError::Detect(DetectError::OutsideWindow {
                    lambda: l,
                    lower: window.0,
                    upper: window.1,
                }));
            }
            l
        }
        LambdaPolicy::Theta(theta) => lambda_for_theta(&est, &cfg.mu0, mu1, theta, &beta)?,
    };
    let d00 = divergence_from_estimate(&cfg.mu0, &est)?;
    let d10 = divergence_from_estimate(mu1, &est)?;
    let d_true = mu1.divergence_rate(&cfg.mu0)?;
    let epsilon0 = epsilon0_estimate(
        &cfg.mu0,
        cfg.n0,
        cfg.delta,
        cfg.delta_prime,
        cfg.epsilon0_trials,
        cfg.seed,
    )?;
    Ok(Calibration {
        est,
        beta,
        epsilon0,
        d00,
        d10,
        d_true,
        window,
        lambda,
    })
}

/// Stream a training prefix straight into counts (no path materialization).
pub fn fit_streaming(
    model: &MarkovModel,
    n0: usize,
    seed: u64,
    domain: Domain,
    index: u64,
) -> Result<EmpiricalMarkovEstimate, EstimateError> {
    let s = model.alphabet().size();
    let mut rng = stream_rng(seed, domain, index);
    let mut sampler = ModelSampler::new(model);
    let mut symbol_counts = vec![0u64; s];
    let mut pair_counts = vec![0u64; s * s];
    let mut prev: Option<Symbol> = None;
    for _ in 0..n0 {
        let a = sampler.next_symbol(&mut rng);
        symbol_counts[a] += 1;
        if let Some(b) = prev {
            pair_counts[b * s + a] += 1;
        }
        prev = Some(a);
    }
    EmpiricalMarkovEstimate::from_counts(model.alphabet(), symbol_counts, pair_counts)
}

/// One simulated stopping-rule run inside a sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Stream index the trial drew its randomness from (the base seed lives
    /// in the sweep metadata).
    pub seed_index: u64,
    pub stop_time: Option<usize>,
    pub change_point: Option<usize>,
    /// `(stop - m + 1)^+`; absent for censored trials.
    pub delay: Option<usize>,
}

/// Aggregates at one threshold of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    /// `-log2 alpha` or `log2 gamma`, depending on the sweep.
    pub threshold_bits: f64,
    pub alpha: Option<f64>,
    pub trials: usize,
    pub empirical_rate: Option<f64>,
    pub rate_stderr: Option<f64>,
    pub bound: Option<f64>,
    pub mean_delay: Option<f64>,
    pub delay_stderr: Option<f64>,
    pub censored_fraction: f64,
}

/// Ordinary least squares `y = intercept + slope * x` with the residuals the
/// acceptance checks inspect.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci95: (f64, f64),
    pub residuals: Vec<f64>,
    pub theoretical_slope: f64,
}

impl SlopeFit {
    /// Relative deviation of the fitted slope from the theoretical one.
    pub fn relative_error(&self) -> f64 {
        (self.slope - self.theoretical_slope).abs() / self.theoretical_slope.abs()
    }
}

/// Least-squares slope of `ys` against `xs`; needs at least 4 points.
pub fn fit_slope(xs: &[f64], ys: &[f64], theoretical_slope: f64) -> SlopeFit {
    assert!(xs.len() == ys.len(), "mismatched slope-fit inputs");
    assert!(xs.len() >= 4, "slope fits need at least 4 sweep points");
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let dof = (xs.len() - 2).max(1) as f64;
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let slope_stderr = (s2 / sxx).sqrt();
    SlopeFit {
        slope,
        intercept,
        slope_stderr,
        ci95: (slope - 2.0 * slope_stderr, slope + 2.0 * slope_stderr),
        residuals,
        theoretical_slope,
    }
}

/// A full sweep: derived constants, per-point aggregates, an optional slope
/// fit, and per-trial rows (grouped per point) for export.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub slope: Option<SlopeFit>,
    pub lambda: f64,
    pub log2_beta: f64,
    pub epsilon0: f64,
    pub d00: f64,
    pub d10: f64,
    pub d_true: f64,
    pub window: (f64, f64),
    pub trials: Vec<Vec<TrialResult>>,
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn binomial_stderr(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// The two-state test pair used by the verification harness and examples
/// (experiment configuration, not data: every derived constant is computed,
/// never hardcoded).
pub fn default_mu0() -> MarkovModel {
    MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).expect("valid default model")
}

pub fn default_mu1() -> MarkovModel {
    MarkovModel::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]).expect("valid default model")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 2.5 * x).collect();
        let fit = fit_slope(&xs, &ys, 2.5);
        assert!((fit.slope - 2.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.relative_error() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
        cfg.grid = ThresholdGrid::Alphas(vec![]);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
        cfg.grid = ThresholdGrid::Alphas(vec![1.5]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_rejects_degenerate_models() {
        let cycle = MarkovModel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let cfg = ExperimentConfig::new(cycle, Some(default_mu1()));
        assert!(cfg.validate().is_err());
        // mu1 = mu0 has zero divergence.
        let cfg = ExperimentConfig::new(default_mu0(), Some(default_mu0()));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn calibration_resolves_mid_window_constants() {
        let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
        cfg.n0 = 20_000;
        cfg.epsilon0_trials = 50;
        cfg.delta = 0.005;
        cfg.delta_prime = 0.015;
        cfg.lambda = LambdaPolicy::Explicit(0.17);
        let cal = calibrate(&cfg).unwrap();
        assert!(cal.window.0 < 0.17 && 0.17 < cal.window.1);
        assert!((cal.d_true - 0.2157).abs() < 1e-3);
        assert!(cal.d10 > 0.18 && cal.d10 < 0.26);
        assert!(cal.d00 < 0.01);
        assert!(cal.beta.log2_beta > 0.0);
    }

    #[test]
    fn lorden_grid_shape() {
        let s = LordenSettings {
            window: 200,
            prefixes_per_point: 8,
            trials_per_prefix: 2,
        };
        assert_eq!(s.change_grid(), vec![1, 50, 100, 150]);
    }
}
