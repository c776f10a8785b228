//! The max-over-starts detector engine and its stopping-rule drivers.
//!
//! Universal-code lengths are not additive in the start index, so each live
//! start keeps its own codec state and its own accumulated pre-change window
//! score; memory grows with the sample count unless pruning is enabled.
//! Page's test, whose true-likelihood score is additive, gets the classic
//! scalar recursion instead.

use crate::codes::{CodeLengthModel, CodecSpec};
use crate::estimate::EmpiricalMarkovEstimate;
use crate::markov::{Alphabet, MarkovModel, Symbol};

use super::{DetectError, PrunePolicy, Threshold};

/// The pre-change window score: a known order-1 model (windows start at the
/// stationary marginal) or the empirical estimate (windows start at the
/// empirical marginal).
#[derive(Debug, Clone, Copy)]
pub enum PreLaw<'a> {
    Known(&'a MarkovModel),
    Estimated(&'a EmpiricalMarkovEstimate),
}

impl<'a> PreLaw<'a> {
    fn alphabet(&self) -> Alphabet {
        match self {
            PreLaw::Known(m) => m.alphabet(),
            PreLaw::Estimated(e) => e.alphabet(),
        }
    }
}

/// The post-change surrogate: a universal code length, or (for structural
/// tests and the Page reduction) the true post-change law scored as
/// `-log2 mu1` over the window.
#[derive(Debug, Clone, Copy)]
pub enum PostLaw<'a> {
    Universal(CodecSpec),
    Oracle(&'a MarkovModel),
}

/// What to do when the pre-change score of a window hits a transition of
/// probability zero. The two-unknown test alarms (maximal evidence of
/// change); the known-`mu0` test treats it as a contract violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncoveredPolicy {
    Alarm,
    Error,
}

#[derive(Debug, Clone)]
enum PostState {
    Code(CodeLengthModel),
    Oracle(f64),
}

#[derive(Debug, Clone)]
struct Candidate {
    start: usize,
    post: PostState,
    pre_log2: f64,
    prev: Option<Symbol>,
    below: u32,
    stat: f64,
    uncovered: bool,
}

/// Per-step digest of the detector state.
#[derive(Debug, Clone, Copy)]
pub struct StepSummary {
    pub n: usize,
    pub max_stat: f64,
    pub argmax_start: usize,
    pub n_active: usize,
    pub uncovered: bool,
}

/// One row of an exported detector trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub n: usize,
    pub max_statistic: f64,
    pub argmax_start: usize,
    pub n_active_starts: usize,
    pub stopped: bool,
}

/// Outcome of running a stopping rule to a horizon.
#[derive(Debug, Clone)]
pub struct StoppingResult {
    pub stopped: bool,
    /// First `n` at which the statistic reached the threshold; `None` when
    /// censored at the horizon.
    pub stop_time: Option<usize>,
    pub horizon: usize,
    pub statistic_at_stop: f64,
    pub argmax_start: Option<usize>,
    /// The stop was forced by a transition impossible under the fitted
    /// pre-change law.
    pub uncovered_alarm: bool,
    pub trace: Option<Vec<TraceRow>>,
}

impl StoppingResult {
    fn censored(horizon: usize, trace: Option<Vec<TraceRow>>) -> Self {
        Self {
            stopped: false,
            stop_time: None,
            horizon,
            statistic_at_stop: f64::NEG_INFINITY,
            argmax_start: None,
            uncovered_alarm: false,
            trace,
        }
    }
}

/// The max-over-starts statistic, maintained one candidate per live start.
#[derive(Debug, Clone)]
pub struct CusumDetector<'a> {
    pre: PreLaw<'a>,
    post: PostLaw<'a>,
    lambda: f64,
    prune: PrunePolicy,
    window_penalty: bool,
    /// Added to the local sample count for the global-`n` drift penalty
    /// (used when the rule is applied to a stream suffix).
    penalty_offset: usize,
    on_uncovered: UncoveredPolicy,
    single_start: bool,
    n: usize,
    candidates: Vec<Candidate>,
    uncovered_hit: bool,
}

impl<'a> CusumDetector<'a> {
    pub fn new(
        pre: PreLaw<'a>,
        post: PostLaw<'a>,
        lambda: f64,
        prune: PrunePolicy,
        window_penalty: bool,
    ) -> Result<Self, DetectError> {
        if let PreLaw::Known(m) = pre {
            if m.order() != 1 {
                return Err(DetectError::OrderUnsupported(m.order()));
            }
        }
        if let PostLaw::Oracle(m) = post {
            if m.order() != 1 {
                return Err(DetectError::OrderUnsupported(m.order()));
            }
            if m.alphabet() != pre.alphabet() {
                return Err(DetectError::Markov(
                    crate::markov::MarkovError::AlphabetMismatch,
                ));
            }
        }
        let on_uncovered = match pre {
            PreLaw::Known(_) => UncoveredPolicy::Error,
            PreLaw::Estimated(_) => UncoveredPolicy::Alarm,
        };
        Ok(Self {
            pre,
            post,
            lambda,
            prune,
            window_penalty,
            penalty_offset: 0,
            on_uncovered,
            single_start: false,
            n: 0,
            candidates: Vec::new(),
            uncovered_hit: false,
        })
    }

    /// Keep only the `k = 1` candidate (the auxiliary stopping rule).
    pub fn single_start(mut self) -> Self {
        self.single_start = true;
        self
    }

    /// Offset added to the local step count inside the global-`n` penalty.
    pub fn with_penalty_offset(mut self, offset: usize) -> Self {
        self.penalty_offset = offset;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(start, statistic)` for every live candidate, for spot checks
    /// against from-scratch recomputation.
    pub fn candidate_stats(&self) -> Vec<(usize, f64)> {
        self.candidates.iter().map(|c| (c.start, c.stat)).collect()
    }

    fn fresh_candidate(&self, start: usize) -> Candidate {
        let post = match self.post {
            PostLaw::Universal(spec) => {
                PostState::Code(CodeLengthModel::new(&spec, self.pre.alphabet()))
            }
            PostLaw::Oracle(_) => PostState::Oracle(0.0),
        };
        Candidate {
            start,
            post,
            pre_log2: 0.0,
            prev: None,
            below: 0,
            stat: f64::NEG_INFINITY,
            uncovered: false,
        }
    }

    /// Consume one symbol and report the updated maximum statistic.
    pub fn step(&mut self, a: Symbol) -> Result<StepSummary, DetectError> {
        debug_assert!(self.pre.alphabet().contains(a));
        self.n += 1;
        if !self.single_start || self.candidates.is_empty() {
            let c = self.fresh_candidate(self.n);
            self.candidates.push(c);
        }

        let n = self.n;
        let lambda = self.lambda;
        let window_penalty = self.window_penalty;
        let penalty_offset = self.penalty_offset;
        let mut uncovered = false;

        for cand in &mut self.candidates {
            if cand.uncovered {
                uncovered = true;
                continue;
            }
            // Post-change surrogate bits for the window x_k^n.
            let post_bits = match &mut cand.post {
                PostState::Code(codec) => codec.extend(a),
                PostState::Oracle(bits) => {
                    let m = match self.post {
                        PostLaw::Oracle(m) => m,
                        PostLaw::Universal(_) => unreachable!(),
                    };
                    let step = match cand.prev {
                        None => crate::markov::log2_or_neg_inf(m.stationary_law()[a]),
                        Some(b) => m.log2_transition(b, a),
                    };
                    *bits -= step; // -log2 mu1 accumulates
                    *bits
                }
            };
            // Pre-change window score.
            let pre_step = match self.pre {
                PreLaw::Known(m) => match cand.prev {
                    None => crate::markov::log2_or_neg_inf(m.stationary_law()[a]),
                    Some(b) => m.log2_transition(b, a),
                },
                PreLaw::Estimated(e) => match cand.prev {
                    None => e.log2_marginal(a),
                    Some(b) => e.log2_conditional(b, a),
                },
            };
            cand.prev = Some(a);
            if pre_step == f64::NEG_INFINITY {
                match self.on_uncovered {
                    UncoveredPolicy::Error => {
                        return Err(DetectError::SupportViolation(format!(
                            "window starting at {} hit a zero-probability pre-change transition",
                            cand.start
                        )))
                    }
                    UncoveredPolicy::Alarm => {
                        uncovered = true;
                        self.uncovered_hit = true;
                        cand.stat = f64::INFINITY;
                        cand.uncovered = true;
                        continue;
                    }
                }
            }
            cand.pre_log2 += pre_step;
            let penalty = if window_penalty {
                (n - cand.start + 1) as f64
            } else {
                (n + penalty_offset) as f64
            };
            cand.stat = -post_bits - cand.pre_log2 - penalty * lambda;
        }

        let (mut max_stat, mut argmax) = (f64::NEG_INFINITY, 0);
        for cand in &self.candidates {
            if cand.stat > max_stat {
                max_stat = cand.stat;
                argmax = cand.start;
            }
        }
        if uncovered {
            max_stat = f64::INFINITY;
        }

        if let PrunePolicy::Slack { slack, window } = self.prune {
            for cand in &mut self.candidates {
                if cand.stat < max_stat - slack {
                    cand.below += 1;
                } else {
                    cand.below = 0;
                }
            }
            self.candidates.retain(|c| c.below < window);
        }

        Ok(StepSummary {
            n,
            max_stat,
            argmax_start: argmax,
            n_active: self.candidates.len(),
            uncovered,
        })
    }
}

/// Drive a detector over a path until the first `n` with statistic at or
/// above the threshold (ties stop), censoring at the horizon.
fn drive(
    mut detector: CusumDetector<'_>,
    threshold: Threshold,
    path: impl IntoIterator<Item = Symbol>,
    horizon: usize,
    want_trace: bool,
) -> Result<StoppingResult, DetectError> {
    let bits = threshold.bits();
    let mut trace = want_trace.then(Vec::new);
    for a in path.into_iter().take(horizon) {
        let s = detector.step(a)?;
        let stopped = s.max_stat >= bits;
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                n: s.n,
                max_statistic: s.max_stat,
                argmax_start: s.argmax_start,
                n_active_starts: s.n_active,
                stopped,
            });
        }
        if stopped {
            return Ok(StoppingResult {
                stopped: true,
                stop_time: Some(s.n),
                horizon,
                statistic_at_stop: s.max_stat,
                argmax_start: Some(s.argmax_start),
                uncovered_alarm: s.uncovered,
                trace,
            });
        }
    }
    Ok(StoppingResult::censored(horizon, trace))
}

/// The full CUSUM stopping time: max over starts against `log2 gamma`.
#[allow(clippy::too_many_arguments)]
pub fn run_cusum(
    pre: PreLaw<'_>,
    post: PostLaw<'_>,
    lambda: f64,
    prune: PrunePolicy,
    window_penalty: bool,
    threshold: Threshold,
    path: impl IntoIterator<Item = Symbol>,
    horizon: usize,
    want_trace: bool,
) -> Result<StoppingResult, DetectError> {
    let det = CusumDetector::new(pre, post, lambda, prune, window_penalty)?;
    drive(det, threshold, path, horizon, want_trace)
}

/// The auxiliary stopping rule: the single `k = 1` window against
/// `-log2 alpha`.
pub fn aux_stop_n(
    pre: PreLaw<'_>,
    post: PostLaw<'_>,
    lambda: f64,
    alpha: f64,
    path: impl IntoIterator<Item = Symbol>,
    horizon: usize,
    want_trace: bool,
) -> Result<StoppingResult, DetectError> {
    let det = CusumDetector::new(pre, post, lambda, PrunePolicy::Off, false)?.single_start();
    drive(det, Threshold::alpha(alpha), path, horizon, want_trace)
}

/// The start-by-start construction: apply the single-start rule to every
/// suffix `x_k, x_{k+1}, ...` and return `min_k (N_k + k - 1)`. With matched
/// thresholds and the same penalty convention this equals the CUSUM stopping
/// time by construction; the acceptance suite checks that equality path by
/// path.
pub fn nstar(
    x: &[Symbol],
    pre: PreLaw<'_>,
    post: PostLaw<'_>,
    lambda: f64,
    alpha: f64,
    window_penalty: bool,
) -> Result<StoppingResult, DetectError> {
    let horizon = x.len();
    let mut best: Option<(usize, f64, usize)> = None; // (stop n, stat, start k)
    for k in 1..=horizon {
        if let Some((stop, _, _)) = best {
            if k > stop {
                break;
            }
        }
        let offset = if window_penalty { 0 } else { k - 1 };
        let det = CusumDetector::new(pre, post, lambda, PrunePolicy::Off, window_penalty)?
            .single_start()
            .with_penalty_offset(offset);
        let res = drive(
            det,
            Threshold::alpha(alpha),
            x[k - 1..].iter().copied(),
            horizon - (k - 1),
            false,
        )?;
        if let Some(local) = res.stop_time {
            let global = local + k - 1;
            let better = match best {
                None => true,
                Some((stop, _, _)) => global < stop,
            };
            if better {
                best = Some((global, res.statistic_at_stop, k));
            }
        }
    }
    Ok(match best {
        Some((stop, stat, k)) => StoppingResult {
            stopped: true,
            stop_time: Some(stop),
            horizon,
            statistic_at_stop: stat,
            argmax_start: Some(k),
            uncovered_alarm: stat == f64::INFINITY,
            trace: None,
        },
        None => StoppingResult::censored(horizon, None),
    })
}

/// Page's CUSUM for two known order-1 models, maintained by the scalar
/// recursion `S_n = max(S_{n-1}, 0) + z_n`, where `z_n` is the conditional
/// per-step log ratio (the first step compares stationary marginals).
#[derive(Debug, Clone)]
pub struct PageCusum<'a> {
    mu0: &'a MarkovModel,
    mu1: &'a MarkovModel,
    prev: Option<Symbol>,
    stat: f64,
    n: usize,
}

impl<'a> PageCusum<'a> {
    pub fn new(mu0: &'a MarkovModel, mu1: &'a MarkovModel) -> Result<Self, DetectError> {
        if mu0.order() != 1 || mu1.order() != 1 {
            return Err(DetectError::OrderUnsupported(mu0.order().max(mu1.order())));
        }
        if mu0.alphabet() != mu1.alphabet() {
            return Err(DetectError::Markov(
                crate::markov::MarkovError::AlphabetMismatch,
            ));
        }
        Ok(Self {
            mu0,
            mu1,
            prev: None,
            stat: 0.0,
            n: 0,
        })
    }

    /// Advance one step and return the updated statistic.
    pub fn step(&mut self, a: Symbol) -> Result<f64, DetectError> {
        let (l1, l0) = match self.prev {
            None => (
                crate::markov::log2_or_neg_inf(self.mu1.stationary_law()[a]),
                crate::markov::log2_or_neg_inf(self.mu0.stationary_law()[a]),
            ),
            Some(b) => (
                self.mu1.log2_transition(b, a),
                self.mu0.log2_transition(b, a),
            ),
        };
        if l1 == f64::NEG_INFINITY || l0 == f64::NEG_INFINITY {
            return Err(DetectError::SupportViolation(format!(
                "symbol {a} has zero probability under one of the models"
            )));
        }
        self.prev = Some(a);
        self.n += 1;
        let z = l1 - l0;
        self.stat = self.stat.max(0.0) + z;
        Ok(self.stat)
    }

    pub fn statistic(&self) -> f64 {
        self.stat
    }
}

/// Run Page's test to the first crossing of `log2 gamma`.
pub fn run_page(
    mu0: &MarkovModel,
    mu1: &MarkovModel,
    threshold: Threshold,
    path: impl IntoIterator<Item = Symbol>,
    horizon: usize,
    want_trace: bool,
) -> Result<StoppingResult, DetectError> {
    let mut page = PageCusum::new(mu0, mu1)?;
    let bits = threshold.bits();
    let mut trace = want_trace.then(Vec::new);
    for a in path.into_iter().take(horizon) {
        let stat = page.step(a)?;
        let stopped = stat >= bits;
        if let Some(t) = trace.as_mut() {
            t.push(TraceRow {
                n: page.n,
                max_statistic: stat,
                argmax_start: 0,
                n_active_starts: 1,
                stopped,
            });
        }
        if stopped {
            return Ok(StoppingResult {
                stopped: true,
                stop_time: Some(page.n),
                horizon,
                statistic_at_stop: stat,
                argmax_start: None,
                uncovered_alarm: false,
                trace,
            });
        }
    }
    Ok(StoppingResult::censored(horizon, trace))
}
