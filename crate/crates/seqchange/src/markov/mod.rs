//! Finite-alphabet, finite-order Markov sources and their information rates.
//!
//! An order-`r` chain over an alphabet of size `s` is represented internally
//! as an order-1 chain over contexts (the `s^r` length-`r` symbol windows),
//! so every calculator below has a single code path. A context packs its
//! symbols base-`s` with the most recent symbol in the least significant
//! digit; consuming symbol `a` maps context `c` to `(c*s + a) mod s^r`.
//!
//! All probability arithmetic is done in the log2 domain with a `-inf`
//! sentinel for zero probability, so sequences of length 10^6 evaluate
//! without underflow.

use thiserror::Error;

mod probes;
mod sampling;

pub use probes::{berk_probe, k_epsilon_diagnostic, BerkProbe, ConvergenceDiagnostic, ProbeDirection};
pub use sampling::{sample_path, ChangePath, ChangePoint, ChangeSpec, ModelSampler};

/// Symbols are dense zero-based indices into the alphabet.
pub type Symbol = usize;

/// Maximum number of lifted contexts (`alphabet^order`) a model may have.
pub const MAX_CONTEXTS: usize = 1 << 20;

/// Row sums must match 1 to this absolute tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// The stationary law must satisfy `pi P = pi` to this residual.
pub const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("alphabet size {0} is invalid (need at least 2 symbols)")]
    InvalidAlphabet(usize),
    #[error("order {order} over {alphabet} symbols needs {needed} contexts (limit {MAX_CONTEXTS})")]
    OrderTooLarge { order: usize, alphabet: usize, needed: u128 },
    #[error("expected {expected} transition probabilities, got {got}")]
    BadRowCount { expected: usize, got: usize },
    #[error("row {row}: {detail}")]
    BadRow { row: usize, detail: String },
    #[error("initial law invalid: {0}")]
    BadInitialLaw(String),
    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),
    #[error("models have different alphabets or orders")]
    AlphabetMismatch,
    #[error("absolute continuity violated: {0}")]
    SupportViolation(String),
    #[error("delta {delta} is not below the divergence rate {rate} (probe is vacuous)")]
    InvalidDelta { delta: f64, rate: f64 },
    #[error("trial count {0} is too small")]
    TooFewTrials(usize),
}

/// A finite alphabet of `size >= 2` symbols indexed `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self, MarkovError> {
        if size < 2 {
            return Err(MarkovError::InvalidAlphabet(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn symbols(&self) -> std::ops::Range<Symbol> {
        0..self.size
    }

    pub fn contains(&self, s: Symbol) -> bool {
        s < self.size
    }
}

/// A stationary finite-order Markov source.
///
/// Construction validates row stochasticity, irreducibility on the support
/// digraph, and aperiodicity; the one periodic shape admitted is the fully
/// deterministic cycle (every supported row a unit vector), which is a valid
/// zero-entropy source but is rejected by the experiment harness. The
/// stationary law is solved at construction and checked to residual 1e-10.
///
/// Models are immutable after construction and safe to share across worker
/// threads.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    alphabet: Alphabet,
    order: usize,
    n_contexts: usize,
    rows: Vec<f64>,
    log2_rows: Vec<f64>,
    row_cdf: Vec<f64>,
    initial_law: Vec<f64>,
    log2_initial: Vec<f64>,
    initial_cdf: Vec<f64>,
    stationary: Vec<f64>,
}

impl MarkovModel {
    /// Build a model whose initial law is the stationary law.
    ///
    /// `rows` is row-major: `rows[c * s + a]` is `P(a | context c)`.
    pub fn new(alphabet: Alphabet, order: usize, rows: Vec<f64>) -> Result<Self, MarkovError> {
        Self::build(alphabet, order, rows, None)
    }

    /// Build a model with an explicit initial law over contexts.
    ///
    /// The initial law is the joint law of the first `order` symbols; it
    /// defaults to the stationary law in [`MarkovModel::new`], which is the
    /// stationary-source case assumed by the detectors.
    pub fn with_initial_law(
        alphabet: Alphabet,
        order: usize,
        rows: Vec<f64>,
        initial_law: Vec<f64>,
    ) -> Result<Self, MarkovError> {
        Self::build(alphabet, order, rows, Some(initial_law))
    }

    /// Convenience constructor for order-1 chains from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MarkovError> {
        let alphabet = Alphabet::new(rows.len())?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != rows.len() {
                return Err(MarkovError::BadRow {
                    row: i,
                    detail: format!("has {} entries, expected {}", r.len(), rows.len()),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(alphabet, 1, flat)
    }

    fn build(
        alphabet: Alphabet,
        order: usize,
        rows: Vec<f64>,
        initial_law: Option<Vec<f64>>,
    ) -> Result<Self, MarkovError> {
        if order == 0 {
            return Err(MarkovError::OrderTooLarge {
                order,
                alphabet: alphabet.size(),
                needed: 0,
            });
        }
        let s = alphabet.size();
        let needed = (s as u128).pow(order as u32);
        if needed > MAX_CONTEXTS as u128 {
            return Err(MarkovError::OrderTooLarge {
                order,
                alphabet: s,
                needed,
            });
        }
        let n_contexts = needed as usize;
        if rows.len() != n_contexts * s {
            return Err(MarkovError::BadRowCount {
                expected: n_contexts * s,
                got: rows.len(),
            });
        }
        for c in 0..n_contexts {
            let row = &rows[c * s..(c + 1) * s];
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
                return Err(MarkovError::BadRow {
                    row: c,
                    detail: format!("entry {p} outside [0, 1]"),
                });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(MarkovError::BadRow {
                    row: c,
                    detail: format!("sums to {sum}, expected 1 within {ROW_SUM_TOL}"),
                });
            }
        }

        let class = check_ergodic(&rows, n_contexts, s)?;
        let stationary = solve_stationary(&rows, n_contexts, s, &class)?;

        let initial_law = match initial_law {
            Some(law) => {
                if law.len() != n_contexts {
                    return Err(MarkovError::BadInitialLaw(format!(
                        "has {} entries, expected {n_contexts}",
                        law.len()
                    )));
                }
                if law.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
                    return Err(MarkovError::BadInitialLaw("entry outside [0, 1]".into()));
                }
                let sum: f64 = law.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(MarkovError::BadInitialLaw(format!("sums to {sum}")));
                }
                law
            }
            None => stationary.clone(),
        };

        let log2_rows = rows.iter().map(|&p| log2_or_neg_inf(p)).collect();
        let log2_initial = initial_law.iter().map(|&p| log2_or_neg_inf(p)).collect();
        let row_cdf = cumulative(&rows, n_contexts, s);
        let initial_cdf = cumulative(&initial_law, 1, n_contexts);

        Ok(Self {
            alphabet,
            order,
            n_contexts,
            rows,
            log2_rows,
            row_cdf,
            initial_law,
            log2_initial,
            initial_cdf,
            stationary,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    /// `P(a | context c)`.
    pub fn transition(&self, context: usize, a: Symbol) -> f64 {
        self.rows[context * self.alphabet.size() + a]
    }

    /// `log2 P(a | context c)`; `-inf` when the transition has probability 0.
    pub fn log2_transition(&self, context: usize, a: Symbol) -> f64 {
        self.log2_rows[context * self.alphabet.size() + a]
    }

    /// The stationary law over contexts (`pi P = pi`, residual <= 1e-10).
    pub fn stationary_law(&self) -> &[f64] {
        &self.stationary
    }

    /// The initial law over contexts (stationary unless overridden).
    pub fn initial_law(&self) -> &[f64] {
        &self.initial_law
    }

    /// Stationary probability of a single symbol (the context marginal of its
    /// most recent digit).
    pub fn stationary_symbol(&self, a: Symbol) -> f64 {
        let s = self.alphabet.size();
        (0..self.n_contexts)
            .filter(|c| c % s == a)
            .map(|c| self.stationary[c])
            .sum()
    }

    /// Context reached from `c` after consuming `a`.
    #[inline]
    pub fn shift(&self, c: usize, a: Symbol) -> usize {
        (c * self.alphabet.size() + a) % self.n_contexts
    }

    /// Pack the final `order` symbols of `window` into a context index.
    pub fn context_of(&self, window: &[Symbol]) -> usize {
        debug_assert!(window.len() >= self.order);
        window[window.len() - self.order..]
            .iter()
            .fold(0, |c, &a| c * self.alphabet.size() + a)
    }

    /// `log2` probability of a sequence under this model, starting from the
    /// model's initial law. Returns `-inf` if any factor is zero and `0.0`
    /// for the empty sequence.
    pub fn log2_probability(&self, x: &[Symbol]) -> f64 {
        let r = self.order;
        if x.is_empty() {
            return 0.0;
        }
        if x.len() < r {
            // Marginal of the first `x.len()` symbols: the initial law summed
            // over all contexts sharing those leading digits.
            let span = self.n_contexts / self.alphabet.size().pow(x.len() as u32);
            let prefix = x.iter().fold(0, |c, &a| c * self.alphabet.size() + a);
            let p: f64 = self.initial_law[prefix * span..(prefix + 1) * span].iter().sum();
            return log2_or_neg_inf(p);
        }
        let mut ctx = self.context_of(&x[..r]);
        let mut total = self.log2_initial[ctx];
        for &a in &x[r..] {
            total += self.log2_transition(ctx, a);
            if total == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            ctx = self.shift(ctx, a);
        }
        total
    }

    /// Entropy rate in bits per symbol: the stationary-weighted row entropies.
    ///
    /// Zero exactly when every supported row is deterministic (the
    /// deterministic-cycle case admitted at construction).
    pub fn entropy_rate(&self) -> f64 {
        let s = self.alphabet.size();
        let mut h = 0.0;
        for c in 0..self.n_contexts {
            let pc = self.stationary[c];
            if pc == 0.0 {
                continue;
            }
            let row = &self.rows[c * s..(c + 1) * s];
            let row_h: f64 = row
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.log2())
                .sum();
            h += pc * row_h;
        }
        h
    }

    /// Divergence rate `D(self || other)` in bits per symbol: the
    /// stationary-weighted row KL divergences. `+inf` when some transition
    /// supported by `self` has probability 0 under `other`.
    pub fn divergence_rate(&self, other: &MarkovModel) -> Result<f64, MarkovError> {
        if self.alphabet != other.alphabet || self.order != other.order {
            return Err(MarkovError::AlphabetMismatch);
        }
        let s = self.alphabet.size();
        let mut d = 0.0;
        for c in 0..self.n_contexts {
            let pc = self.stationary[c];
            if pc == 0.0 {
                continue;
            }
            for a in 0..s {
                let p = self.transition(c, a);
                if p == 0.0 {
                    continue;
                }
                let q = other.transition(c, a);
                if q == 0.0 {
                    return Ok(f64::INFINITY);
                }
                d += pc * p * (p / q).log2();
            }
        }
        Ok(d.max(0.0))
    }

    /// True when every supported row is a unit vector. Divergence-based
    /// experiments reject such degenerate sources.
    pub fn is_deterministic(&self) -> bool {
        let s = self.alphabet.size();
        (0..self.n_contexts)
            .filter(|&c| self.stationary[c] > 0.0)
            .all(|c| {
                self.rows[c * s..(c + 1) * s]
                    .iter()
                    .any(|&p| (p - 1.0).abs() <= ROW_SUM_TOL)
            })
    }

    pub(crate) fn row_cdf(&self, c: usize) -> &[f64] {
        let s = self.alphabet.size();
        &self.row_cdf[c * s..(c + 1) * s]
    }

    pub(crate) fn initial_cdf(&self) -> &[f64] {
        &self.initial_cdf
    }
}

pub(crate) fn log2_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.log2()
    } else {
        f64::NEG_INFINITY
    }
}

fn cumulative(probs: &[f64], blocks: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(probs.len());
    for b in 0..blocks {
        let mut acc = 0.0;
        for i in 0..width {
            acc += probs[b * width + i];
            out.push(acc);
        }
        // Guard the final edge so a uniform draw of exactly 1.0 still lands.
        out[b * width + width - 1] = f64::INFINITY;
    }
    out
}

/// Support-digraph analysis: exactly one closed communicating class, which
/// must be aperiodic unless it is a deterministic cycle. Returns the closed
/// class membership mask.
fn check_ergodic(rows: &[f64], n: usize, s: usize) -> Result<Vec<bool>, MarkovError> {
    let succ = |c: usize| {
        (0..s)
            .filter(move |&a| rows[c * s + a] > 0.0)
            .map(move |a| (c * s + a) % n)
    };

    // Iterative Tarjan SCC.
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut n_comps = 0;

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        call.push((start, 0));
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (v, ref mut ai)) = call.last_mut() {
            let mut descended = false;
            while *ai < s {
                let a = *ai;
                *ai += 1;
                if rows[v * s + a] <= 0.0 {
                    continue;
                }
                let w = (v * s + a) % n;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp[w] = n_comps;
                    if w == v {
                        break;
                    }
                }
                n_comps += 1;
            }
        }
    }

    // A component is closed when no edge leaves it.
    let mut closed = vec![true; n_comps];
    for c in 0..n {
        for w in succ(c) {
            if comp[w] != comp[c] {
                closed[comp[c]] = false;
            }
        }
    }
    let closed_ids: Vec<usize> = (0..n_comps).filter(|&i| closed[i]).collect();
    if closed_ids.len() != 1 {
        return Err(MarkovError::NonErgodic(format!(
            "reducible support: {} closed communicating classes",
            closed_ids.len()
        )));
    }
    let class_id = closed_ids[0];
    let in_class: Vec<bool> = (0..n).map(|c| comp[c] == class_id).collect();

    // Period of the closed class via BFS level differences.
    let root = in_class.iter().position(|&b| b).expect("empty closed class");
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    level[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        for w in succ(v) {
            if in_class[w] && level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let mut period = 0usize;
    for v in (0..n).filter(|&v| in_class[v]) {
        for w in succ(v) {
            if in_class[w] {
                let diff = (level[v] as i64 + 1 - level[w] as i64).unsigned_abs() as usize;
                period = gcd(period, diff);
            }
        }
    }
    if period != 1 {
        let deterministic = (0..n).filter(|&v| in_class[v]).all(|v| {
            (0..s)
                .map(|a| rows[v * s + a])
                .any(|p| (p - 1.0).abs() <= ROW_SUM_TOL)
        });
        if !deterministic {
            return Err(MarkovError::NonErgodic(format!(
                "periodic support (period {period})"
            )));
        }
    }
    Ok(in_class)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solve `pi P = pi` restricted to the closed class; transient contexts get
/// probability 0.
fn solve_stationary(
    rows: &[f64],
    n: usize,
    s: usize,
    in_class: &[bool],
) -> Result<Vec<f64>, MarkovError> {
    let members: Vec<usize> = (0..n).filter(|&c| in_class[c]).collect();
    let k = members.len();
    let pos: std::collections::HashMap<usize, usize> =
        members.iter().enumerate().map(|(i, &c)| (c, i)).collect();

    // Dense k x k transition matrix restricted to the class.
    let mut p = vec![0.0f64; k * k];
    for (i, &c) in members.iter().enumerate() {
        for a in 0..s {
            let pr = rows[c * s + a];
            if pr > 0.0 {
                let w = (c * s + a) % n;
                let j = pos[&w];
                p[i * k + j] += pr;
            }
        }
    }

    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let a = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        if i == k - 1 {
            1.0
        } else {
            p[j * k + i] - if i == j { 1.0 } else { 0.0 }
        }
    });
    let mut b = nalgebra::DVector::zeros(k);
    b[k - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| MarkovError::NonErgodic("stationary system is singular".into()))?;

    let mut pi = vec![0.0f64; n];
    for (i, &c) in members.iter().enumerate() {
        let v = sol[i];
        if v < -1e-9 {
            return Err(MarkovError::NonErgodic(format!(
                "stationary solve produced negative mass {v}"
            )));
        }
        pi[c] = v.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for v in pi.iter_mut() {
        *v /= total;
    }

    // Residual check over the full context space: accumulate pi P directly.
    let mut residual = 0.0f64;
    let mut pip = vec![0.0f64; n];
    for c in 0..n {
        if pi[c] == 0.0 {
            continue;
        }
        for a in 0..s {
            let pr = rows[c * s + a];
            if pr > 0.0 {
                pip[(c * s + a) % n] += pi[c] * pr;
            }
        }
    }
    for c in 0..n {
        residual = residual.max((pip[c] - pi[c]).abs());
    }
    if residual > STATIONARY_TOL {
        return Err(MarkovError::NonErgodic(format!(
            "stationary residual {residual:.3e} exceeds {STATIONARY_TOL:.0e}"
        )));
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn default_mu0() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn symmetric_chain_has_uniform_stationary_law() {
        let m = MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert!((m.stationary_law()[0] - 0.5).abs() < 1e-12);
        assert!((m.stationary_law()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn default_pair_stationary_law_matches_hand_solve() {
        // pi (0.9 0.1 / 0.2 0.8) = pi  =>  pi = (2/3, 1/3).
        let m = default_mu0();
        assert!((m.stationary_law()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.stationary_law()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let err = MarkovModel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, MarkovError::NonErgodic(_)));
    }

    #[test]
    fn periodic_nondeterministic_chain_is_rejected() {
        // Bipartite 4-state chain: period 2 but rows are not unit vectors.
        let rows = vec![
            0.0, 0.0, 0.5, 0.5, //
            0.0, 0.0, 0.5, 0.5, //
            0.5, 0.5, 0.0, 0.0, //
            0.5, 0.5, 0.0, 0.0,
        ];
        let err = MarkovModel::new(Alphabet::new(4).unwrap(), 1, rows).unwrap_err();
        assert!(matches!(err, MarkovError::NonErgodic(_)));
    }

    #[test]
    fn deterministic_cycle_is_admitted_with_zero_entropy() {
        let m = MarkovModel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.entropy_rate(), 0.0);
        assert!(m.is_deterministic());
        assert!((m.stationary_law()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_rate_closed_form() {
        let uniform = MarkovModel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((uniform.entropy_rate() - 1.0).abs() < 1e-12);

        let m = default_mu0();
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let expect = (2.0 / 3.0) * h(0.9) + (1.0 / 3.0) * h(0.8);
        assert!((m.entropy_rate() - expect).abs() < 1e-12);
    }

    #[test]
    fn log2_probability_hand_product() {
        let m = default_mu0();
        // x = (0, 0): stationary start 2/3 then transition 0.9.
        let got = m.log2_probability(&[0, 0]);
        let expect = (2.0f64 / 3.0).log2() + 0.9f64.log2();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn log2_probability_uniform_iid_is_minus_n() {
        let m = MarkovModel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((m.log2_probability(&[0, 1, 1, 0, 1]) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn log2_probability_zero_transition_is_neg_inf() {
        let m = MarkovModel::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.log2_probability(&[0, 1]), f64::NEG_INFINITY);
    }

    #[test]
    fn divergence_rate_basics() {
        let p = default_mu0();
        assert_eq!(p.divergence_rate(&p).unwrap(), 0.0);

        // IID rows reduce to the single-letter KL between the rows.
        let a = MarkovModel::from_rows(&[vec![0.7, 0.3], vec![0.7, 0.3]]).unwrap();
        let b = MarkovModel::from_rows(&[vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        let scalar = 0.7 * (0.7f64 / 0.4).log2() + 0.3 * (0.3f64 / 0.6).log2();
        assert!((a.divergence_rate(&b).unwrap() - scalar).abs() < 1e-12);

        // Support violation gives +inf.
        let q = MarkovModel::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert_eq!(p.divergence_rate(&q).unwrap(), f64::INFINITY);

        let three = MarkovModel::from_rows(&[
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        assert!(matches!(
            p.divergence_rate(&three),
            Err(MarkovError::AlphabetMismatch)
        ));
    }

    #[test]
    fn order_two_lift_matches_iid_entropy() {
        // An order-2 lift of an IID(0.3, 0.7) source: all rows equal.
        let rows: Vec<f64> = (0..4).flat_map(|_| [0.3, 0.7]).collect();
        let m = MarkovModel::new(Alphabet::new(2).unwrap(), 2, rows).unwrap();
        let h = -(0.3f64 * 0.3f64.log2() + 0.7 * 0.7f64.log2());
        assert!((m.entropy_rate() - h).abs() < 1e-12);
        // Stationary law over contexts is the product law.
        assert!((m.stationary_law()[0] - 0.09).abs() < 1e-10);
        assert!((m.stationary_law()[3] - 0.49).abs() < 1e-10);
        // Short-sequence marginal: P(x1 = 0) = 0.3.
        assert!((m.log2_probability(&[0]) - 0.3f64.log2()).abs() < 1e-12);
    }
}
