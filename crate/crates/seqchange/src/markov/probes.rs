//! Monte Carlo diagnostics for the mixing and convergence conditions the
//! detection theory relies on: lower-deviation probabilities of normalized
//! log-likelihood ratios, and the last time the per-symbol ratio strays from
//! the divergence rate.

use rand_chacha::ChaCha12Rng;

use super::{MarkovError, MarkovModel, ModelSampler, Symbol};
use crate::rng::{stream_rng, Domain};

/// Which normalized log-likelihood ratio a probe examines.
///
/// `Forward` samples from `p` and probes `(1/n) log2 p(x)/q(x)` against
/// `D(p || q)`; `Reverse` swaps the roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeDirection {
    Forward,
    Reverse,
}

/// Estimated lower-deviation probabilities `P[(1/n) log2 ratio < delta]` at a
/// grid of sequence lengths. Summability of these in `n` is the mixing
/// condition that lets Lorden-style delay theory cover sources with memory.
#[derive(Debug, Clone)]
pub struct BerkProbe {
    pub delta: f64,
    pub direction: ProbeDirection,
    pub divergence: f64,
    pub trials: usize,
    /// `(n, estimated probability)` pairs, `n` strictly increasing.
    pub values: Vec<(usize, f64)>,
}

impl BerkProbe {
    /// Binomial standard error at a grid point.
    pub fn stderr(&self, idx: usize) -> f64 {
        let p = self.values[idx].1;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// The last observed time a normalized convergence quantity missed its limit
/// by at least `epsilon`, on a single simulated path.
#[derive(Debug, Clone)]
pub struct ConvergenceDiagnostic {
    pub epsilon: f64,
    pub last_exceedance: Option<usize>,
    pub horizon: usize,
}

/// Monte Carlo estimate of the lower-deviation probabilities at each `n` in
/// `n_values`.
///
/// Valid only when the probed divergence rate is positive and `delta` sits
/// strictly below it; otherwise the summability statement is vacuous and the
/// probe refuses to run.
pub fn berk_probe(
    p: &MarkovModel,
    q: &MarkovModel,
    delta: f64,
    direction: ProbeDirection,
    n_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BerkProbe, MarkovError> {
    if trials == 0 {
        return Err(MarkovError::TooFewTrials(trials));
    }
    let (sample_from, reference) = match direction {
        ProbeDirection::Forward => (p, q),
        ProbeDirection::Reverse => (q, p),
    };
    let rate = sample_from.divergence_rate(reference)?;
    if rate.is_nan() || rate <= 0.0 || delta >= rate {
        return Err(MarkovError::InvalidDelta { delta, rate });
    }
    let mut grid: Vec<usize> = n_values.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let max_n = *grid.last().expect("non-empty n grid");

    let mut hits = vec![0u64; grid.len()];
    for t in 0..trials {
        let mut rng = stream_rng(seed, Domain::Probe, t as u64);
        let mut sampler = ModelSampler::new(sample_from);
        let mut ratio = RatioTracker::new(sample_from, reference);
        let mut gi = 0;
        for n in 1..=max_n {
            let x = sampler.next_symbol(&mut rng);
            let r = ratio.push(x);
            if n == grid[gi] {
                if r / (n as f64) < delta {
                    hits[gi] += 1;
                }
                gi += 1;
                if gi == grid.len() {
                    break;
                }
            }
        }
    }
    let values = grid
        .iter()
        .zip(&hits)
        .map(|(&n, &h)| (n, h as f64 / trials as f64))
        .collect();
    Ok(BerkProbe {
        delta,
        direction,
        divergence: rate,
        trials,
        values,
    })
}

/// Track `log2 p(x_1^n) - log2 q(x_1^n)` incrementally along one path.
pub(crate) struct RatioTracker<'a> {
    p: &'a MarkovModel,
    q: &'a MarkovModel,
    seen: Vec<Symbol>,
    ctx_ready: bool,
    ctx: usize,
    total: f64,
}

impl<'a> RatioTracker<'a> {
    pub(crate) fn new(p: &'a MarkovModel, q: &'a MarkovModel) -> Self {
        Self {
            p,
            q,
            seen: Vec::new(),
            ctx_ready: false,
            ctx: 0,
            total: 0.0,
        }
    }

    /// Returns the updated total `log2 p(x_1^n) - log2 q(x_1^n)` (with
    /// initial-law start terms), `+/-inf` on support violations.
    pub(crate) fn push(&mut self, x: Symbol) -> f64 {
        if !self.ctx_ready {
            self.seen.push(x);
            self.total =
                self.p.log2_probability(&self.seen) - self.q.log2_probability(&self.seen);
            if self.seen.len() == self.p.order() {
                self.ctx = self.p.context_of(&self.seen);
                self.ctx_ready = true;
            }
            return self.total;
        }
        self.total += self.p.log2_transition(self.ctx, x) - self.q.log2_transition(self.ctx, x);
        self.ctx = self.p.shift(self.ctx, x);
        self.total
    }
}

/// Simulate one `p`-path and report the last `n <= horizon` at which
/// `|(1/n) log2 p(x)/q(x) - D(p || q)|` reached `epsilon`. Almost-sure
/// convergence of the ratio makes this finite with high probability; the
/// recorded index is diagnostic, not asserted.
pub fn k_epsilon_diagnostic(
    p: &MarkovModel,
    q: &MarkovModel,
    epsilon: f64,
    horizon: usize,
    seed: u64,
) -> Result<ConvergenceDiagnostic, MarkovError> {
    let rate = p.divergence_rate(q)?;
    if rate.is_infinite() {
        return Err(MarkovError::SupportViolation(
            "p is not absolutely continuous with respect to q".into(),
        ));
    }
    let mut rng: ChaCha12Rng = stream_rng(seed, Domain::Probe, 0);
    let mut sampler = ModelSampler::new(p);
    let mut ratio = RatioTracker::new(p, q);
    let mut last = None;
    for n in 1..=horizon {
        let x = sampler.next_symbol(&mut rng);
        let r = ratio.push(x);
        if (r / n as f64 - rate).abs() >= epsilon {
            last = Some(n);
        }
    }
    Ok(ConvergenceDiagnostic {
        epsilon,
        last_exceedance: last,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::MarkovModel;

    fn mu0() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn mu1() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]).unwrap()
    }

    #[test]
    fn identical_models_make_any_delta_invalid() {
        let m = mu0();
        let err = berk_probe(&m, &m, -0.1, ProbeDirection::Forward, &[4], 10, 1).unwrap_err();
        assert!(matches!(err, MarkovError::InvalidDelta { .. }));
    }

    #[test]
    fn probe_at_n1_matches_exhaustive_enumeration() {
        // IID models so the n = 1 deviation probability is a two-term sum.
        let p = MarkovModel::from_rows(&[vec![0.8, 0.2], vec![0.8, 0.2]]).unwrap();
        let q = MarkovModel::from_rows(&[vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let d = p.divergence_rate(&q).unwrap();
        let delta = 0.5 * d;
        // Exact P[log2 p(x)/q(x) < delta] over x in {0, 1} under p.
        let exact: f64 = [(0usize, 0.8f64, 0.3f64), (1, 0.2, 0.7)]
            .iter()
            .filter(|(_, pp, qq)| (pp / qq).log2() < delta)
            .map(|(_, pp, _)| pp)
            .sum();
        let trials = 4000;
        let probe = berk_probe(&p, &q, delta, ProbeDirection::Forward, &[1], trials, 42).unwrap();
        let got = probe.values[0].1;
        let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!(
            (got - exact).abs() <= 3.0 * sigma.max(1e-9),
            "got {got}, exact {exact}"
        );
    }

    #[test]
    fn deviation_probability_trends_down_in_n() {
        let probe = berk_probe(
            &mu1(),
            &mu0(),
            0.05,
            ProbeDirection::Forward,
            &[20, 400],
            1500,
            7,
        )
        .unwrap();
        let early = probe.values[0].1;
        let late = probe.values[1].1;
        let sigma = probe.stderr(0).max(probe.stderr(1)).max(1e-9);
        assert!(late <= early + 3.0 * sigma, "early {early}, late {late}");
    }

    #[test]
    fn k_epsilon_silent_for_identical_models() {
        let m = mu0();
        let diag = k_epsilon_diagnostic(&m, &m, 0.01, 500, 3).unwrap();
        assert_eq!(diag.last_exceedance, None);
    }

    #[test]
    fn k_epsilon_silent_for_epsilon_above_increment_bound() {
        // Per-step |log ratio| plus |D| can never reach a huge epsilon.
        let diag = k_epsilon_diagnostic(&mu1(), &mu0(), 50.0, 200, 3).unwrap();
        assert_eq!(diag.last_exceedance, None);
    }

    #[test]
    fn k_epsilon_records_finite_exceedance_on_separated_pair() {
        let diag = k_epsilon_diagnostic(&mu1(), &mu0(), 0.05, 20_000, 11).unwrap();
        // Early fluctuations certainly exceed 0.05; the index is finite.
        assert!(diag.last_exceedance.is_some());
        assert!(diag.last_exceedance.unwrap() <= diag.horizon);
    }
}
