//! The empirical pre-change estimate and its quality quantities.
//!
//! From a training prefix `x_1^{n0}` we keep the raw pair counts `N(b, a)`
//! and symbol counts `N(b)`. The sequence probability is the plug-in product
//!
//! ```text
//! mu_hat(x_1^n) = mu_hat(x_1) * prod_i mu_hat(x_i | x_{i-1})
//! ```
//!
//! with the conditional defined ratio-consistently as
//! `mu_hat(a | b) = N(b, a) / sum_a N(b, a)` (the denominator counts `b` in
//! positions `1..n0-1`), so the product identity holds exactly rather than up
//! to `O(1/n0)` end effects. Marginals are `mu_hat(b) = N(b) / n0`.
//!
//! The detection bounds consume three quantities derived here: the
//! multiplicative accuracy bound `beta` (how far `mu0 / mu_hat` can drift per
//! symbol when every estimate is within `(delta, delta')` of the truth), the
//! deviation probability `epsilon0` (how often a fresh training prefix
//! violates those tolerances), and the divergence rates of the true laws
//! against the estimate, which define the admissible drift window.

use thiserror::Error;

use crate::markov::{log2_or_neg_inf, Alphabet, MarkovError, MarkovModel, ModelSampler, Symbol};
use crate::rng::{stream_rng, Domain};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("training prefix of length {0} is too short (need at least 2 symbols)")]
    TrainingTooShort(usize),
    #[error("symbol {0} outside the alphabet")]
    SymbolOutOfRange(Symbol),
    #[error("only order-1 models are supported here (got order {0})")]
    OrderUnsupported(usize),
    #[error("estimate and model alphabets differ")]
    AlphabetMismatch,
    #[error("inadmissible deviation: {0}")]
    InadmissibleDelta(String),
    #[error("support violation: {0}")]
    SupportViolation(String),
    #[error("bad counts: {0}")]
    BadCounts(String),
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

/// Pair and symbol counts over a training prefix, with the derived plug-in
/// conditionals and marginals. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMarkovEstimate {
    alphabet: Alphabet,
    n0: usize,
    smoothed: bool,
    symbol_counts: Vec<u64>,
    pair_counts: Vec<u64>,
    ctx_totals: Vec<u64>,
    cond: Vec<f64>,
    log2_cond: Vec<f64>,
    marg: Vec<f64>,
    log2_marg: Vec<f64>,
}

impl EmpiricalMarkovEstimate {
    /// Count transitions over positions `(1,2)..(n0-1,n0)` and symbols over
    /// `1..n0`.
    pub fn fit(alphabet: Alphabet, x: &[Symbol]) -> Result<Self, EstimateError> {
        Self::fit_inner(alphabet, x, false)
    }

    /// Exploratory variant with add-1/2 smoothing on the derived tables:
    /// conditionals `(N(b,a) + 1/2) / (N(b,.) + s/2)` and marginals
    /// `(N(b) + 1/2) / (n0 + s/2)`, so nothing is ever uncovered. Off by
    /// default: smoothing changes the constants the accuracy and
    /// false-alarm bounds are derived from, so verification runs never use
    /// it.
    pub fn fit_smoothed(alphabet: Alphabet, x: &[Symbol]) -> Result<Self, EstimateError> {
        Self::fit_inner(alphabet, x, true)
    }

    fn fit_inner(alphabet: Alphabet, x: &[Symbol], smoothed: bool) -> Result<Self, EstimateError> {
        if x.len() < 2 {
            return Err(EstimateError::TrainingTooShort(x.len()));
        }
        let s = alphabet.size();
        let mut symbol_counts = vec![0u64; s];
        let mut pair_counts = vec![0u64; s * s];
        for &a in x {
            if !alphabet.contains(a) {
                return Err(EstimateError::SymbolOutOfRange(a));
            }
            symbol_counts[a] += 1;
        }
        for w in x.windows(2) {
            pair_counts[w[0] * s + w[1]] += 1;
        }
        Self::assemble(alphabet, symbol_counts, pair_counts, smoothed)
    }

    /// Assemble an estimate from raw counts (the deserialization path; counts
    /// are taken as given so long as they are globally consistent).
    pub fn from_counts(
        alphabet: Alphabet,
        symbol_counts: Vec<u64>,
        pair_counts: Vec<u64>,
    ) -> Result<Self, EstimateError> {
        Self::assemble(alphabet, symbol_counts, pair_counts, false)
    }

    /// `from_counts` with the smoothing flag preserved (the estimate-file
    /// loader uses this).
    pub fn from_counts_smoothed(
        alphabet: Alphabet,
        symbol_counts: Vec<u64>,
        pair_counts: Vec<u64>,
    ) -> Result<Self, EstimateError> {
        Self::assemble(alphabet, symbol_counts, pair_counts, true)
    }

    fn assemble(
        alphabet: Alphabet,
        symbol_counts: Vec<u64>,
        pair_counts: Vec<u64>,
        smoothed: bool,
    ) -> Result<Self, EstimateError> {
        let s = alphabet.size();
        if symbol_counts.len() != s || pair_counts.len() != s * s {
            return Err(EstimateError::BadCounts(format!(
                "expected {s} symbol counts and {} pair counts, got {} and {}",
                s * s,
                symbol_counts.len(),
                pair_counts.len()
            )));
        }
        let n0 = symbol_counts.iter().sum::<u64>() as usize;
        if n0 < 2 {
            return Err(EstimateError::TrainingTooShort(n0));
        }
        let n_pairs: u64 = pair_counts.iter().sum();
        if n_pairs != (n0 - 1) as u64 {
            return Err(EstimateError::BadCounts(format!(
                "{n_pairs} pair counts for {n0} symbols (expected {})",
                n0 - 1
            )));
        }
        let mut ctx_totals = vec![0u64; s];
        for b in 0..s {
            ctx_totals[b] = pair_counts[b * s..(b + 1) * s].iter().sum();
        }
        let half_s = s as f64 * 0.5;
        let mut cond = vec![0.0f64; s * s];
        for b in 0..s {
            for a in 0..s {
                cond[b * s + a] = if smoothed {
                    (pair_counts[b * s + a] as f64 + 0.5) / (ctx_totals[b] as f64 + half_s)
                } else if ctx_totals[b] > 0 {
                    pair_counts[b * s + a] as f64 / ctx_totals[b] as f64
                } else {
                    0.0
                };
            }
        }
        let marg: Vec<f64> = symbol_counts
            .iter()
            .map(|&c| {
                if smoothed {
                    (c as f64 + 0.5) / (n0 as f64 + half_s)
                } else {
                    c as f64 / n0 as f64
                }
            })
            .collect();
        let log2_cond = cond.iter().map(|&p| log2_or_neg_inf(p)).collect();
        let log2_marg = marg.iter().map(|&p| log2_or_neg_inf(p)).collect();
        Ok(Self {
            alphabet,
            n0,
            smoothed,
            symbol_counts,
            pair_counts,
            ctx_totals,
            cond,
            log2_cond,
            marg,
            log2_marg,
        })
    }

    /// Whether the derived tables use add-1/2 smoothing.
    pub fn is_smoothed(&self) -> bool {
        self.smoothed
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn symbol_count(&self, b: Symbol) -> u64 {
        self.symbol_counts[b]
    }

    pub fn pair_count(&self, b: Symbol, a: Symbol) -> u64 {
        self.pair_counts[b * self.alphabet.size() + a]
    }

    pub fn symbol_counts(&self) -> &[u64] {
        &self.symbol_counts
    }

    pub fn pair_counts(&self) -> &[u64] {
        &self.pair_counts
    }

    /// `mu_hat(b) = N(b) / n0`.
    pub fn marginal(&self, b: Symbol) -> f64 {
        self.marg[b]
    }

    /// `mu_hat(a | b)`; 0 when context `b` was never seen in `1..n0-1`.
    pub fn conditional(&self, b: Symbol, a: Symbol) -> f64 {
        self.cond[b * self.alphabet.size() + a]
    }

    pub fn log2_marginal(&self, b: Symbol) -> f64 {
        self.log2_marg[b]
    }

    pub fn log2_conditional(&self, b: Symbol, a: Symbol) -> f64 {
        self.log2_cond[b * self.alphabet.size() + a]
    }

    /// Plug-in `log2 mu_hat(x)`: marginal start, then conditionals. `-inf`
    /// when any factor is uncovered.
    pub fn seq_log2_prob(&self, x: &[Symbol]) -> f64 {
        let mut scorer = self.scorer();
        let mut total = 0.0;
        for &a in x {
            total = scorer.push(a);
            if total == f64::NEG_INFINITY {
                return total;
            }
        }
        total
    }

    /// Incremental window scorer: each `push` extends the window by one
    /// symbol in O(1) and returns the running `log2 mu_hat`.
    pub fn scorer(&self) -> EstimateScorer<'_> {
        EstimateScorer {
            est: self,
            prev: None,
            total: 0.0,
        }
    }

    /// Every symbol and transition with positive probability under the
    /// reference that never occurred in the training prefix. Support is
    /// relative to the reference: pairs the reference itself rules out are
    /// not reported.
    pub fn coverage_check(&self, reference: &MarkovModel) -> CoverageReport {
        debug_assert_eq!(reference.alphabet(), self.alphabet);
        debug_assert_eq!(reference.order(), 1);
        let s = self.alphabet.size();
        let mut missing_symbols = Vec::new();
        let mut missing_pairs = Vec::new();
        for b in 0..s {
            if reference.stationary_law()[b] > 0.0 && self.symbol_counts[b] == 0 {
                missing_symbols.push(b);
            }
        }
        for b in 0..s {
            if reference.stationary_law()[b] == 0.0 {
                continue;
            }
            for a in 0..s {
                if reference.transition(b, a) > 0.0 && self.pair_count(b, a) == 0 {
                    missing_pairs.push((b, a));
                }
            }
        }
        CoverageReport {
            covered: missing_symbols.is_empty() && missing_pairs.is_empty(),
            missing_symbols,
            missing_pairs,
        }
    }
}

/// Symbols and pairs supported by a reference model but absent from the
/// training prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub missing_symbols: Vec<Symbol>,
    pub missing_pairs: Vec<(Symbol, Symbol)>,
    pub covered: bool,
}

/// O(1)-per-symbol evaluator of `log2 mu_hat` over a growing window.
#[derive(Debug, Clone)]
pub struct EstimateScorer<'a> {
    est: &'a EmpiricalMarkovEstimate,
    prev: Option<Symbol>,
    total: f64,
}

impl EstimateScorer<'_> {
    pub fn push(&mut self, a: Symbol) -> f64 {
        let term = match self.prev {
            None => self.est.log2_marginal(a),
            Some(b) => self.est.log2_conditional(b, a),
        };
        self.prev = Some(a);
        self.total += term;
        self.total
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Per-symbol log ratio of the true law to the estimate over a window,
/// `f_n = (1/n) log2 (mu0(x) / mu_hat(x))`, evaluated two ways: directly from
/// the two sequence probabilities, and through the count-weighted expansion
/// over transition and start terms. The two must agree to 1e-9; [`f_n_ratio`]
/// checks that.
pub fn f_n_ratio(
    model: &MarkovModel,
    est: &EmpiricalMarkovEstimate,
    x: &[Symbol],
) -> Result<f64, EstimateError> {
    check_order1(model, est)?;
    if x.is_empty() {
        return Ok(0.0);
    }
    let lm = model.log2_probability(x);
    let le = est.seq_log2_prob(x);
    if lm == f64::NEG_INFINITY || le == f64::NEG_INFINITY {
        return Err(EstimateError::SupportViolation(
            "window has zero probability under the model or the estimate".into(),
        ));
    }
    let direct = (lm - le) / x.len() as f64;
    let expansion = f_n_expansion(model, est, x)?;
    assert!(
        (direct - expansion).abs() <= 1e-9,
        "f_n forms disagree: direct {direct}, expansion {expansion}"
    );
    Ok(direct)
}

/// The count-weighted form of `f_n`: transition counts times per-pair log
/// ratios, plus the start-symbol marginal term.
pub fn f_n_expansion(
    model: &MarkovModel,
    est: &EmpiricalMarkovEstimate,
    x: &[Symbol],
) -> Result<f64, EstimateError> {
    check_order1(model, est)?;
    if x.is_empty() {
        return Ok(0.0);
    }
    let s = model.alphabet().size();
    let mut counts = vec![0u64; s * s];
    for w in x.windows(2) {
        counts[w[0] * s + w[1]] += 1;
    }
    let n = x.len() as f64;
    let mut total = 0.0;
    for b in 0..s {
        for a in 0..s {
            let c = counts[b * s + a];
            if c == 0 {
                continue;
            }
            let p = model.transition(b, a);
            let q = est.conditional(b, a);
            if p == 0.0 || q == 0.0 {
                return Err(EstimateError::SupportViolation(format!(
                    "transition ({b} -> {a}) occurs but has zero model or estimate probability"
                )));
            }
            total += c as f64 / n * (p / q).log2();
        }
    }
    let b0 = x[0];
    let p0 = model.stationary_law()[b0];
    let q0 = est.marginal(b0);
    if p0 == 0.0 || q0 == 0.0 {
        return Err(EstimateError::SupportViolation(format!(
            "start symbol {b0} has zero model or estimate probability"
        )));
    }
    total += (p0 / q0).log2() / n;
    Ok(total)
}

/// Incremental `f_n` along a growing window (used by the long-horizon
/// accuracy sweeps, where recomputing from scratch at every `n` would be
/// quadratic).
#[derive(Debug, Clone)]
pub struct FnRatioTracker<'a> {
    model: &'a MarkovModel,
    est: &'a EmpiricalMarkovEstimate,
    prev: Option<Symbol>,
    log_model: f64,
    log_est: f64,
    n: usize,
}

impl<'a> FnRatioTracker<'a> {
    pub fn new(model: &'a MarkovModel, est: &'a EmpiricalMarkovEstimate) -> Self {
        Self {
            model,
            est,
            prev: None,
            log_model: 0.0,
            log_est: 0.0,
            n: 0,
        }
    }

    /// Extend the window and return the new `f_n` (`+/-inf` on support gaps).
    pub fn push(&mut self, a: Symbol) -> f64 {
        match self.prev {
            None => {
                self.log_model += log2_or_neg_inf(self.model.stationary_law()[a]);
                self.log_est += self.est.log2_marginal(a);
            }
            Some(b) => {
                self.log_model += self.model.log2_transition(b, a);
                self.log_est += self.est.log2_conditional(b, a);
            }
        }
        self.prev = Some(a);
        self.n += 1;
        (self.log_model - self.log_est) / self.n as f64
    }
}

/// The multiplicative accuracy bound assembled from the two deviation
/// tolerances: `beta' = p / (p - delta)` at the smallest supported
/// conditional `p`, `beta'' = q / (q - delta')` at the smallest supported
/// marginal `q`, and `beta = beta' * beta''`. Under the deviation event the
/// per-symbol ratio `f_n` never exceeds `log2 beta`.
#[derive(Debug, Clone, Copy)]
pub struct BetaBound {
    pub delta: f64,
    pub delta_prime: f64,
    pub beta_prime: f64,
    pub beta_double_prime: f64,
    pub beta: f64,
    pub log2_beta: f64,
}

/// Evaluate the accuracy bound for an order-1 model. Requires
/// `0 <= delta < min supported conditional` and
/// `0 <= delta' < min supported marginal`; at the boundary the bound
/// degenerates (division by zero) and the deltas are inadmissible.
pub fn beta_bound(
    model: &MarkovModel,
    delta: f64,
    delta_prime: f64,
) -> Result<BetaBound, EstimateError> {
    if model.order() != 1 {
        return Err(EstimateError::OrderUnsupported(model.order()));
    }
    if delta.is_nan() || delta < 0.0 || delta_prime.is_nan() || delta_prime < 0.0 {
        return Err(EstimateError::InadmissibleDelta(format!(
            "negative deviation ({delta}, {delta_prime})"
        )));
    }
    let s = model.alphabet().size();
    let pi = model.stationary_law();
    let min_cond = (0..s)
        .filter(|&b| pi[b] > 0.0)
        .flat_map(|b| (0..s).map(move |a| model.transition(b, a)))
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let min_marg = pi
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    if delta >= min_cond {
        return Err(EstimateError::InadmissibleDelta(format!(
            "delta {delta} >= smallest supported conditional {min_cond}"
        )));
    }
    if delta_prime >= min_marg {
        return Err(EstimateError::InadmissibleDelta(format!(
            "delta' {delta_prime} >= smallest supported marginal {min_marg}"
        )));
    }
    let beta_prime = min_cond / (min_cond - delta);
    let beta_double_prime = min_marg / (min_marg - delta_prime);
    let beta = beta_prime * beta_double_prime;
    Ok(BetaBound {
        delta,
        delta_prime,
        beta_prime,
        beta_double_prime,
        beta,
        log2_beta: beta.log2(),
    })
}

/// The deviation event: every supported conditional within `delta` and every
/// supported marginal within `delta'` of the truth. A supported context that
/// never appeared leaves its conditionals undefined and fails the event.
pub fn deviation_check(
    model: &MarkovModel,
    est: &EmpiricalMarkovEstimate,
    delta: f64,
    delta_prime: f64,
) -> bool {
    let s = model.alphabet().size();
    for (b, &pi_b) in model.stationary_law().iter().enumerate() {
        if pi_b == 0.0 {
            continue;
        }
        if (est.marginal(b) - pi_b).abs() > delta_prime {
            return false;
        }
        // An unseen context leaves its conditionals at zero, so a supported
        // transition deviates by its full probability.
        for a in 0..s {
            if model.transition(b, a) > 0.0
                && (est.conditional(b, a) - model.transition(b, a)).abs() > delta
            {
                return false;
            }
        }
    }
    true
}

/// Monte Carlo estimate of the deviation probability `epsilon0`.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorQuality {
    pub n0: usize,
    pub delta: f64,
    pub delta_prime: f64,
    pub epsilon0: f64,
    pub trials: usize,
}

impl EstimatorQuality {
    /// Binomial standard error of the estimate.
    pub fn stderr(&self) -> f64 {
        (self.epsilon0 * (1.0 - self.epsilon0) / self.trials as f64).sqrt()
    }
}

/// Probability, over fresh length-`n0` training prefixes, that the deviation
/// event fails: some supported conditional off by more than `delta` or some
/// marginal off by more than `delta'`.
pub fn epsilon0_estimate(
    model: &MarkovModel,
    n0: usize,
    delta: f64,
    delta_prime: f64,
    trials: usize,
    seed: u64,
) -> Result<EstimatorQuality, EstimateError> {
    if model.order() != 1 {
        return Err(EstimateError::OrderUnsupported(model.order()));
    }
    assert!(trials >= 1, "epsilon0 estimate needs at least one trial");
    assert!(n0 >= 2, "training length must be at least 2");
    let s = model.alphabet().size();
    let mut failures = 0u64;
    for t in 0..trials {
        let mut rng = stream_rng(seed, Domain::Epsilon0, t as u64);
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
        let est = EmpiricalMarkovEstimate::from_counts(model.alphabet(), symbol_counts, pair_counts)?;
        if !deviation_check(model, &est, delta, delta_prime) {
            failures += 1;
        }
    }
    Ok(EstimatorQuality {
        n0,
        delta,
        delta_prime,
        epsilon0: failures as f64 / trials as f64,
        trials,
    })
}

/// Divergence rate of a true order-1 law against the estimate,
/// `D(model || mu_hat)` in bits per symbol, weighted by the model's
/// stationary law. `+inf` when the estimate misses a supported transition or
/// the start marginal of a supported symbol.
pub fn divergence_from_estimate(
    model: &MarkovModel,
    est: &EmpiricalMarkovEstimate,
) -> Result<f64, EstimateError> {
    check_order1(model, est)?;
    let s = model.alphabet().size();
    let mut d = 0.0;
    for (b, &pi_b) in model.stationary_law().iter().enumerate() {
        if pi_b == 0.0 {
            continue;
        }
        for a in 0..s {
            let p = model.transition(b, a);
            if p == 0.0 {
                continue;
            }
            let q = est.conditional(b, a);
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            d += pi_b * p * (p / q).log2();
        }
    }
    Ok(d.max(0.0))
}

fn check_order1(model: &MarkovModel, est: &EmpiricalMarkovEstimate) -> Result<(), EstimateError> {
    if model.order() != 1 {
        return Err(EstimateError::OrderUnsupported(model.order()));
    }
    if model.alphabet() != est.alphabet() {
        return Err(EstimateError::AlphabetMismatch);
    }
    Ok(())
}

/// Draw a training prefix from the model and fit an estimate (one stream per
/// `(seed, index)` pair).
pub fn fit_from_model(
    model: &MarkovModel,
    n0: usize,
    seed: u64,
    index: u64,
) -> Result<EmpiricalMarkovEstimate, EstimateError> {
    let mut rng = stream_rng(seed, Domain::Training, index);
    let mut sampler = ModelSampler::new(model);
    let x: Vec<Symbol> = (0..n0).map(|_| sampler.next_symbol(&mut rng)).collect();
    EmpiricalMarkovEstimate::fit(model.alphabet(), &x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu0() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn alphabet2() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    #[test]
    fn fit_counts_abab_path_by_hand() {
        // x = (a, b, a, b, a): four transitions, all alternating.
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &[0, 1, 0, 1, 0]).unwrap();
        assert_eq!(est.n0(), 5);
        assert!((est.marginal(0) - 3.0 / 5.0).abs() < 1e-15);
        assert!((est.marginal(1) - 2.0 / 5.0).abs() < 1e-15);
        assert_eq!(est.conditional(0, 1), 1.0);
        assert_eq!(est.conditional(1, 0), 1.0);
        assert_eq!(est.conditional(0, 0), 0.0);
    }

    #[test]
    fn single_symbol_path_leaves_other_symbol_uncovered() {
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &[0, 0, 0, 0]).unwrap();
        assert_eq!(est.marginal(0), 1.0);
        assert_eq!(est.conditional(0, 0), 1.0);
        let report = est.coverage_check(&mu0());
        assert!(!report.covered);
        assert!(report.missing_symbols.contains(&1));
        assert!(report.missing_pairs.contains(&(0, 1)));
    }

    #[test]
    fn too_short_training_is_rejected() {
        assert!(matches!(
            EmpiricalMarkovEstimate::fit(alphabet2(), &[0]),
            Err(EstimateError::TrainingTooShort(1))
        ));
    }

    #[test]
    fn coverage_is_support_relative() {
        // Reference rules out (0, 0); the estimate never saw it either, and
        // it must not be reported missing.
        let reference = MarkovModel::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &[0, 1, 0, 1, 1, 0, 1]).unwrap();
        let report = est.coverage_check(&reference);
        assert!(report.covered, "{report:?}");
    }

    #[test]
    fn seq_log2_prob_from_fit_example() {
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &[0, 1, 0, 1, 0]).unwrap();
        // x = (a, b): log2(3/5) + log2 1.
        assert!((est.seq_log2_prob(&[0, 1]) - 0.6f64.log2()).abs() < 1e-12);
        // Single symbol: marginal only.
        assert!((est.seq_log2_prob(&[1]) - 0.4f64.log2()).abs() < 1e-12);
        // Uncovered transition: -inf.
        assert_eq!(est.seq_log2_prob(&[0, 0]), f64::NEG_INFINITY);
    }

    #[test]
    fn seq_log2_prob_matches_direct_product_oracle() {
        // Independent oracle: multiply raw probabilities, then take log2.
        let x = [0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1, 0];
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &x).unwrap();
        for n in 1..=x.len() {
            let w = &x[..n];
            let mut product = est.marginal(w[0]);
            for pair in w.windows(2) {
                product *= est.conditional(pair[0], pair[1]);
            }
            let got = est.seq_log2_prob(w);
            assert!(
                (got - product.log2()).abs() < 1e-12,
                "n = {n}: {got} vs {}",
                product.log2()
            );
        }
    }

    #[test]
    fn f_n_vanishes_when_estimate_reproduces_the_model() {
        // Counts whose ratios equal mu0's rows and whose symbol shares equal
        // its stationary law: pairs (9,1 | 2,8), symbols (14, 7).
        let est =
            EmpiricalMarkovEstimate::from_counts(alphabet2(), vec![14, 7], vec![9, 1, 2, 8])
                .unwrap();
        let model = mu0();
        let f = f_n_ratio(&model, &est, &[0, 0, 1, 1, 0, 1, 0]).unwrap();
        assert!(f.abs() < 1e-9, "f_n = {f}");
    }

    #[test]
    fn f_n_direct_equals_expansion_on_sampled_window() {
        let model = mu0();
        let est = fit_from_model(&model, 5000, 3, 0).unwrap();
        let spec = crate::markov::ChangeSpec::never(model.clone(), 0);
        let x = crate::markov::sample_path(&spec, 300, 5);
        let direct = f_n_ratio(&model, &est, &x).unwrap();
        let expansion = f_n_expansion(&model, &est, &x).unwrap();
        assert!((direct - expansion).abs() < 1e-9);
    }

    #[test]
    fn fn_tracker_matches_whole_window_recompute() {
        let model = mu0();
        let est = fit_from_model(&model, 2000, 9, 0).unwrap();
        let spec = crate::markov::ChangeSpec::never(model.clone(), 0);
        let x = crate::markov::sample_path(&spec, 64, 8);
        let mut tracker = FnRatioTracker::new(&model, &est);
        for n in 1..=x.len() {
            let inc = tracker.push(x[n - 1]);
            let whole = f_n_ratio(&model, &est, &x[..n]).unwrap();
            assert!((inc - whole).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn beta_bound_plugs_in() {
        // deltas of zero give beta = 1.
        let b = beta_bound(&mu0(), 0.0, 0.0).unwrap();
        assert_eq!(b.beta, 1.0);
        assert_eq!(b.log2_beta, 0.0);

        // Min conditional 0.1 with delta 0.05 -> beta' = 2; min marginal 1/3
        // with delta' = 1/6 -> beta'' = 2.
        let b = beta_bound(&mu0(), 0.05, 1.0 / 6.0).unwrap();
        assert!((b.beta_prime - 2.0).abs() < 1e-12);
        assert!((b.beta_double_prime - 2.0).abs() < 1e-12);
        assert!((b.beta - 4.0).abs() < 1e-12);

        // delta equal to the minimum conditional is inadmissible.
        assert!(matches!(
            beta_bound(&mu0(), 0.1, 0.0),
            Err(EstimateError::InadmissibleDelta(_))
        ));
    }

    #[test]
    fn beta_bound_monotone_in_deltas() {
        let m = mu0();
        let mut last = 1.0;
        for k in 0..8 {
            let d = k as f64 * 0.01;
            let b = beta_bound(&m, d, d).unwrap();
            assert!(b.beta >= last - 1e-15);
            last = b.beta;
        }
    }

    #[test]
    fn epsilon0_boundary_cases() {
        let m = mu0();
        // Deviations are bounded by 1, so unit tolerances never fail...
        let q = epsilon0_estimate(&m, 50, 1.0, 1.0, 120, 5).unwrap();
        assert_eq!(q.epsilon0, 0.0);
        // ...while a 2-sample prefix with tight tolerance almost always does.
        let q = epsilon0_estimate(&m, 2, 0.01, 0.01, 200, 6).unwrap();
        assert!(q.epsilon0 > 0.5, "epsilon0 = {}", q.epsilon0);
    }

    #[test]
    fn epsilon0_trend_with_training_length() {
        let m = mu0();
        let a = epsilon0_estimate(&m, 500, 0.05, 0.05, 300, 7).unwrap();
        let b = epsilon0_estimate(&m, 1000, 0.05, 0.05, 300, 8).unwrap();
        let sigma = (a.stderr().powi(2) + b.stderr().powi(2)).sqrt().max(1e-9);
        assert!(
            b.epsilon0 <= a.epsilon0 + 3.0 * sigma,
            "{} vs {}",
            a.epsilon0,
            b.epsilon0
        );
    }

    #[test]
    fn divergence_from_estimate_support_gap_is_infinite() {
        let m = mu0();
        let est = EmpiricalMarkovEstimate::fit(alphabet2(), &[0, 0, 0, 0, 0]).unwrap();
        assert_eq!(divergence_from_estimate(&m, &est).unwrap(), f64::INFINITY);
    }

    #[test]
    fn smoothed_fit_covers_everything() {
        let est = EmpiricalMarkovEstimate::fit_smoothed(alphabet2(), &[0, 0, 0, 0]).unwrap();
        assert!(est.is_smoothed());
        // (0 + 1/2) / (3 + 1) for the unseen transition out of context 0.
        assert!((est.conditional(0, 1) - 0.125).abs() < 1e-15);
        assert!((est.marginal(1) - 0.1).abs() < 1e-15);
        assert!(est.seq_log2_prob(&[1, 1]) > f64::NEG_INFINITY);
    }

    #[test]
    fn counts_round_trip_exactly() {
        let model = mu0();
        let est = fit_from_model(&model, 500, 12, 0).unwrap();
        let back = EmpiricalMarkovEstimate::from_counts(
            est.alphabet(),
            est.symbol_counts().to_vec(),
            est.pair_counts().to_vec(),
        )
        .unwrap();
        assert_eq!(est, back);
        let x = [0, 1, 1, 0];
        assert_eq!(est.seq_log2_prob(&x), back.seq_log2_prob(&x));
    }
}
