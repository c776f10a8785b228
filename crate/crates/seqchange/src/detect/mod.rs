//! Sequential tests and stopping rules.
//!
//! Four tests share one statistic shape: a maximum over candidate start
//! indices `k` of a window score minus a drift penalty, compared against a
//! threshold with `>=` (ties stop):
//!
//! - Page's CUSUM: both laws known, score `log2 mu1(x_k^n) - log2 mu0(x_k^n)`.
//!   True Markov likelihoods make the score additive in `k`, so the classic
//!   scalar recursion applies.
//! - The universal-code CUSUM: `mu1` replaced by a code length,
//!   `-L(x_k^n) - log2 mu0(x_k^n) - n lambda`. Code lengths are not additive
//!   in the start index, so every live start keeps its own codec state.
//! - The two-unknown test: additionally `mu0` replaced by the empirical
//!   estimate, `-L(x_k^n) - log2 mu_hat(x_k^n) - n lambda`. This is the test
//!   whose false-alarm and delay behavior the experiment harness verifies.
//! - The fixed-sample discriminant `h = log2 mu1(x) - log2 mu0(x) - n lambda`
//!   with its exact error exponent.
//!
//! The drift penalty multiplies the global sample count `n` exactly as the
//! test is defined; a `window_penalty` compatibility switch substitutes the
//! window length `n - k + 1` for sensitivity studies (see
//! [`cusum::CusumDetector`]).
//!
//! A transition the estimate assigns probability zero would push the
//! statistic to `+inf`; the detector instead stops immediately and flags the
//! alarm as `uncovered_alarm`, since a transition impossible under the
//! fitted pre-change law is maximal evidence of change.

use thiserror::Error;

use crate::estimate::{
    divergence_from_estimate, BetaBound, EmpiricalMarkovEstimate, EstimateError,
};
use crate::codes::CodecSpec;
use crate::markov::{MarkovError, MarkovModel, Symbol};

mod cusum;

pub use cusum::{
    aux_stop_n, nstar, run_cusum, run_page, CusumDetector, PageCusum, PostLaw, PreLaw,
    StepSummary, StoppingResult, TraceRow, UncoveredPolicy,
};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("admissible drift window ({lower}, {upper}) is empty; grow n0 or separate the models")]
    EmptyWindow { lower: f64, upper: f64 },
    #[error("lambda {lambda} lies outside the admissible window ({lower}, {upper})")]
    OutsideWindow { lambda: f64, lower: f64, upper: f64 },
    #[error("degenerate drift: lambda {lambda} does not exceed log2 beta {log2_beta}")]
    DegenerateDrift { lambda: f64, log2_beta: f64 },
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("only order-1 models are supported by this detector (got order {0})")]
    OrderUnsupported(usize),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Stopping threshold in bits: `log2 gamma` for the CUSUM stopping time,
/// `-log2 alpha` for the auxiliary single-start rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Log2Gamma(f64),
    NegLog2Alpha(f64),
}

impl Threshold {
    pub fn gamma(gamma: f64) -> Self {
        Threshold::Log2Gamma(gamma.log2())
    }

    pub fn alpha(alpha: f64) -> Self {
        Threshold::NegLog2Alpha(-alpha.log2())
    }

    /// The value the running statistic is compared against.
    pub fn bits(&self) -> f64 {
        match *self {
            Threshold::Log2Gamma(b) | Threshold::NegLog2Alpha(b) => b,
        }
    }
}

/// Candidate-dropping policy for the max-over-starts detectors. `Off` keeps
/// every start (exact, the default for verification runs); `Slack` drops a
/// start once its statistic has trailed the running maximum by more than
/// `slack` bits for `window` consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrunePolicy {
    Off,
    Slack { slack: f64, window: u32 },
}

impl PrunePolicy {
    /// Parse the CLI form `off` or `<slack>,<window>`.
    pub fn parse(text: &str) -> Result<Self, String> {
        if text == "off" {
            return Ok(PrunePolicy::Off);
        }
        let (s, w) = text
            .split_once(',')
            .ok_or_else(|| format!("expected `off` or `<slack>,<window>`, got `{text}`"))?;
        let slack: f64 = s.parse().map_err(|e| format!("bad slack `{s}`: {e}"))?;
        let window: u32 = w.parse().map_err(|e| format!("bad window `{w}`: {e}"))?;
        if slack.is_nan() || slack < 0.0 || window == 0 {
            return Err(format!("prune policy `{text}` must have slack >= 0 and window >= 1"));
        }
        Ok(PrunePolicy::Slack { slack, window })
    }
}

/// Detector parameters: drift rate, threshold, post-change codec, pruning,
/// and the drift-penalty convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub lambda: f64,
    pub threshold: Threshold,
    pub codec: CodecSpec,
    pub prune: PrunePolicy,
    pub window_penalty: bool,
}

impl DetectorConfig {
    pub fn new(lambda: f64, threshold: Threshold, codec: CodecSpec) -> Self {
        Self {
            lambda,
            threshold,
            codec,
            prune: PrunePolicy::Off,
            window_penalty: false,
        }
    }

    /// Check `max(log2 beta, D(mu0 || mu_hat)) < lambda < D(mu1 || mu_hat)`,
    /// reporting the window. Never assumed silently: sweeps call this before
    /// running.
    pub fn validate_drift(
        &self,
        est: &EmpiricalMarkovEstimate,
        mu0: &MarkovModel,
        mu1: &MarkovModel,
        beta: &BetaBound,
    ) -> Result<(f64, f64), DetectError> {
        let window = lambda_window(est, mu0, mu1, beta)?;
        if self.lambda <= window.0 || self.lambda >= window.1 {
            return Err(DetectError::OutsideWindow {
                lambda: self.lambda,
                lower: window.0,
                upper: window.1,
            });
        }
        Ok(window)
    }
}

/// The admissible drift window
/// `(max(log2 beta, D(mu0 || mu_hat)), D(mu1 || mu_hat))`.
pub fn lambda_window(
    est: &EmpiricalMarkovEstimate,
    mu0: &MarkovModel,
    mu1: &MarkovModel,
    beta: &BetaBound,
) -> Result<(f64, f64), DetectError> {
    let d00 = divergence_from_estimate(mu0, est)?;
    let d10 = divergence_from_estimate(mu1, est)?;
    let lower = beta.log2_beta.max(d00);
    if lower >= d10 {
        return Err(DetectError::EmptyWindow {
            lower,
            upper: d10,
        });
    }
    Ok((lower, d10))
}

/// The drift selection rule for a target optimality slack `theta`:
/// `lambda = D(mu1 || mu_hat) - D(mu1 || mu0) / (1 + theta)`, unvalidated.
pub fn lambda_theta_rule(d1_est: f64, d1_true: f64, theta: f64) -> f64 {
    d1_est - d1_true / (1.0 + theta)
}

/// Apply the theta rule and validate the result against the admissible
/// window.
pub fn lambda_for_theta(
    est: &EmpiricalMarkovEstimate,
    mu0: &MarkovModel,
    mu1: &MarkovModel,
    theta: f64,
    beta: &BetaBound,
) -> Result<f64, DetectError> {
    let d10 = divergence_from_estimate(mu1, est)?;
    let d1_true = mu1.divergence_rate(mu0)?;
    let lambda = lambda_theta_rule(d10, d1_true, theta);
    let window = lambda_window(est, mu0, mu1, beta)?;
    if lambda <= window.0 || lambda >= window.1 {
        return Err(DetectError::OutsideWindow {
            lambda,
            lower: window.0,
            upper: window.1,
        });
    }
    Ok(lambda)
}

/// The CUSUM threshold `eta = gamma (1 / (2^(lambda - log2 beta) - 1) +
/// epsilon0 gamma)` that places the test in the gamma-indexed class of
/// admissible tests. With `epsilon0 = 1/gamma` this is
/// `gamma (1 / (2^(lambda - log2 beta) - 1) + 1)`.
pub fn eta_threshold(
    gamma: f64,
    lambda: f64,
    log2_beta: f64,
    epsilon0: f64,
) -> Result<f64, DetectError> {
    let denom = (lambda - log2_beta).exp2() - 1.0;
    if denom.is_nan() || denom <= 0.0 {
        return Err(DetectError::DegenerateDrift { lambda, log2_beta });
    }
    Ok(gamma * (1.0 / denom + epsilon0 * gamma))
}

/// The false-alarm upper bound `alpha / (2^(lambda - log2 beta) - 1) +
/// epsilon0`, clamped to `[0, 1]`.
pub fn false_alarm_bound(
    alpha: f64,
    lambda: f64,
    log2_beta: f64,
    epsilon0: f64,
) -> Result<f64, DetectError> {
    let denom = (lambda - log2_beta).exp2() - 1.0;
    if denom.is_nan() || denom <= 0.0 {
        return Err(DetectError::DegenerateDrift { lambda, log2_beta });
    }
    Ok((alpha / denom + epsilon0).clamp(0.0, 1.0))
}

/// The lower bound on the no-change mean stopping time,
/// `E0 >= 1/2 + gamma / (2 / (2^(lambda - log2 beta) - 1) + 2 epsilon0 gamma)`.
pub fn e0_lower_bound(
    gamma: f64,
    lambda: f64,
    log2_beta: f64,
    epsilon0: f64,
) -> Result<f64, DetectError> {
    let denom = (lambda - log2_beta).exp2() - 1.0;
    if denom.is_nan() || denom <= 0.0 {
        return Err(DetectError::DegenerateDrift { lambda, log2_beta });
    }
    Ok(0.5 + gamma / (2.0 / denom + 2.0 * epsilon0 * gamma))
}

/// Outcome of the fixed-sample discriminant test.
#[derive(Debug, Clone, Copy)]
pub struct FixedSampleOutcome {
    pub h_bits: f64,
    pub reject_h0: bool,
}

/// Evaluate `h = log2 mu1(x) - log2 mu0(x) - n lambda` and reject the
/// no-change hypothesis when `h >= 0`. Assumes `lambda < D(mu1 || mu0)`;
/// `mu1(x) = 0` yields `h = -inf` (accept), while `mu0(x) = 0` with
/// `mu1(x) > 0` violates absolute continuity and errors.
pub fn fixed_sample_test(
    mu0: &MarkovModel,
    mu1: &MarkovModel,
    lambda: f64,
    x: &[Symbol],
) -> Result<FixedSampleOutcome, DetectError> {
    if mu0.alphabet() != mu1.alphabet() || mu0.order() != mu1.order() {
        return Err(DetectError::Markov(MarkovError::AlphabetMismatch));
    }
    let l1 = mu1.log2_probability(x);
    let l0 = mu0.log2_probability(x);
    if l0 == f64::NEG_INFINITY && l1 > f64::NEG_INFINITY {
        return Err(DetectError::SupportViolation(
            "sequence has zero pre-change but positive post-change probability".into(),
        ));
    }
    let h = if l1 == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        l1 - l0 - x.len() as f64 * lambda
    };
    Ok(FixedSampleOutcome {
        h_bits: h,
        reject_h0: h >= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{beta_bound, fit_from_model};
    use crate::markov::Alphabet;

    fn mu0() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn mu1() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap()
    }

    fn exact_estimate_of_mu0() -> EmpiricalMarkovEstimate {
        // Counts whose ratios reproduce mu0's rows and stationary law.
        EmpiricalMarkovEstimate::from_counts(
            Alphabet::new(2).unwrap(),
            vec![14, 7],
            vec![9, 1, 2, 8],
        )
        .unwrap()
    }

    #[test]
    fn window_with_exact_estimate_and_unit_beta() {
        let est = exact_estimate_of_mu0();
        let beta = beta_bound(&mu0(), 0.0, 0.0).unwrap();
        let (lo, hi) = lambda_window(&est, &mu0(), &mu1(), &beta).unwrap();
        assert!(lo.abs() < 1e-9);
        let d = mu1().divergence_rate(&mu0()).unwrap();
        assert!((hi - d).abs() < 1e-9);
    }

    #[test]
    fn window_collapses_when_beta_dominates() {
        let est = exact_estimate_of_mu0();
        // Huge deltas make log2 beta exceed D(mu1 || mu_hat).
        let beta = beta_bound(&mu0(), 0.09, 0.3).unwrap();
        assert!(matches!(
            lambda_window(&est, &mu0(), &mu1(), &beta),
            Err(DetectError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn window_endpoints_match_divergence_oracle() {
        let m0 = mu0();
        let m1 = mu1();
        let est = fit_from_model(&m0, 200_000, 21, 0).unwrap();
        let beta = beta_bound(&m0, 0.001, 0.001).unwrap();
        let (lo, hi) = lambda_window(&est, &m0, &m1, &beta).unwrap();
        assert!((hi - divergence_from_estimate(&m1, &est).unwrap()).abs() < 1e-15);
        let d00 = divergence_from_estimate(&m0, &est).unwrap();
        assert!((lo - beta.log2_beta.max(d00)).abs() < 1e-15);
    }

    #[test]
    fn theta_rule_values() {
        // With mu_hat = mu0 the rule gives 0 at theta = 0 and D/2 at theta = 1.
        let d = mu1().divergence_rate(&mu0()).unwrap();
        assert!(lambda_theta_rule(d, d, 0.0).abs() < 1e-15);
        assert!((lambda_theta_rule(d, d, 1.0) - d / 2.0).abs() < 1e-15);
    }

    #[test]
    fn theta_selection_validates_window() {
        let est = exact_estimate_of_mu0();
        let beta = beta_bound(&mu0(), 0.001, 0.001).unwrap();
        // Small theta puts lambda at or below log2 beta.
        assert!(matches!(
            lambda_for_theta(&est, &mu0(), &mu1(), 1e-6, &beta),
            Err(DetectError::OutsideWindow { .. })
        ));
        // Astronomically large theta rounds lambda onto the open upper edge.
        assert!(matches!(
            lambda_for_theta(&est, &mu0(), &mu1(), 1e18, &beta),
            Err(DetectError::OutsideWindow { .. })
        ));
        // A moderate theta is fine.
        let lambda = lambda_for_theta(&est, &mu0(), &mu1(), 0.5, &beta).unwrap();
        let (lo, hi) = lambda_window(&est, &mu0(), &mu1(), &beta).unwrap();
        assert!(lo < lambda && lambda < hi);
    }

    #[test]
    fn detector_config_validates_drift() {
        let est = exact_estimate_of_mu0();
        let beta = beta_bound(&mu0(), 0.001, 0.001).unwrap();
        let cfg = DetectorConfig::new(
            0.1,
            Threshold::gamma(64.0),
            crate::codes::CodecSpec::ctw(1),
        );
        let (lo, hi) = cfg.validate_drift(&est, &mu0(), &mu1(), &beta).unwrap();
        assert!(lo < 0.1 && 0.1 < hi);
        let bad = DetectorConfig::new(0.5, Threshold::gamma(64.0), crate::codes::CodecSpec::ctw(1));
        assert!(matches!(
            bad.validate_drift(&est, &mu0(), &mu1(), &beta),
            Err(DetectError::OutsideWindow { .. })
        ));
    }

    #[test]
    fn eta_threshold_plug_values() {
        // lambda - log2 beta = 1 and epsilon0 = 1/gamma give eta = 2 gamma.
        let gamma = 64.0;
        let eta = eta_threshold(gamma, 1.25, 0.25, 1.0 / gamma).unwrap();
        assert!((eta - 2.0 * gamma).abs() < 1e-9);
        // epsilon0 = 0 drops the second term.
        let eta = eta_threshold(gamma, 1.25, 0.25, 0.0).unwrap();
        assert!((eta - gamma).abs() < 1e-9);
        assert!(matches!(
            eta_threshold(gamma, 0.25, 0.25, 0.0),
            Err(DetectError::DegenerateDrift { .. })
        ));
    }

    #[test]
    fn false_alarm_bound_plug_values() {
        let alpha = 0.125;
        let b = false_alarm_bound(alpha, 1.25, 0.25, 0.0).unwrap();
        assert!((b - alpha).abs() < 1e-12);
        assert_eq!(false_alarm_bound(alpha, 1.25, 0.25, 1.0).unwrap(), 1.0);
        assert!((false_alarm_bound(0.0, 1.25, 0.25, 0.25).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn e0_bound_plug_value() {
        // lambda - log2 beta = 1, epsilon0 = 0: 1/2 + gamma/2.
        let b = e0_lower_bound(10.0, 1.0, 0.0, 0.0).unwrap();
        assert!((b - 5.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_sample_support_cases() {
        let m0 = MarkovModel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let m1 = MarkovModel::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        // mu1(x) = 0: h = -inf, accept.
        let out = fixed_sample_test(&m0, &m1, 0.1, &[0, 1]).unwrap();
        assert_eq!(out.h_bits, f64::NEG_INFINITY);
        assert!(!out.reject_h0);
        // mu0(x) = 0 while mu1(x) > 0: support violation.
        assert!(fixed_sample_test(&m1, &m0, 0.1, &[0, 1]).is_err());
    }

    #[test]
    fn fixed_sample_rejects_under_post_change_law() {
        // A length-1e4 post-change sample rejects the no-change hypothesis
        // essentially always at lambda = D/2.
        let m0 = mu0();
        let m1 = mu1();
        let lambda = m1.divergence_rate(&m0).unwrap() / 2.0;
        let spec = crate::markov::ChangeSpec::new(
            m0.clone(),
            m1.clone(),
            crate::markov::ChangePoint::At(1),
            0,
        )
        .unwrap();
        let mut rejected = 0;
        let trials = 300;
        for t in 0..trials {
            let x = crate::markov::sample_path(&spec, 10_000, 7_000 + t);
            if fixed_sample_test(&m0, &m1, lambda, &x).unwrap().reject_h0 {
                rejected += 1;
            }
        }
        assert!(
            rejected as f64 >= 0.99 * trials as f64,
            "rejected {rejected}/{trials}"
        );
    }

    #[test]
    fn prune_policy_parses() {
        assert_eq!(PrunePolicy::parse("off").unwrap(), PrunePolicy::Off);
        assert_eq!(
            PrunePolicy::parse("2.5,40").unwrap(),
            PrunePolicy::Slack {
                slack: 2.5,
                window: 40
            }
        );
        assert!(PrunePolicy::parse("2.5").is_err());
        assert!(PrunePolicy::parse("-1,4").is_err());
    }
}
