//! Prefix code-length models used as post-change log-likelihood surrogates.
//!
//! Only lengths matter to the detectors, so no bitstream is ever emitted;
//! prefix feasibility is enforced through exhaustive Kraft checks instead.
//! Both codecs extend by one symbol in amortized O(1) (O(depth) for CTW) and
//! their incremental totals agree exactly with from-scratch evaluation.
//!
//! Codec state is mutable and single-owner; concurrent detection branches
//! clone it. States live in flat arenas, so a clone costs O(state size).

use thiserror::Error;

use crate::markov::{Alphabet, ConvergenceDiagnostic, MarkovModel, ModelSampler, Symbol};
use crate::rng::{stream_rng, Domain};

mod ctw;
mod lz78;

pub use ctw::CtwCodec;
pub use lz78::Lz78Codec;

/// Exhaustive Kraft checks refuse alphabets^n beyond this count.
pub const KRAFT_MAX_SEQUENCES: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("bad codec parameters: {0}")]
    BadParams(String),
    #[error("exhaustive check over {states} sequences exceeds the {KRAFT_MAX_SEQUENCES} limit")]
    TooLarge { states: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecKind {
    Lz78,
    Ctw,
}

impl std::fmt::Display for CodecKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CodecKind::Lz78 => write!(f, "lz78"),
            CodecKind::Ctw => write!(f, "ctw"),
        }
    }
}

/// Which codec to use and, for CTW, the context depth. The depth should be
/// at least the assumed Markov order for the strong-universality guarantees
/// the detection theory leans on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecSpec {
    pub kind: CodecKind,
    pub ctw_depth: usize,
}

impl CodecSpec {
    pub fn lz78() -> Self {
        Self {
            kind: CodecKind::Lz78,
            ctw_depth: 0,
        }
    }

    pub fn ctw(depth: usize) -> Self {
        Self {
            kind: CodecKind::Ctw,
            ctw_depth: depth,
        }
    }

    /// Parse CLI-level parameters (`kind`, signed depth).
    pub fn parse(kind: &str, ctw_depth: i64) -> Result<Self, CodecError> {
        let kind = match kind {
            "lz78" => CodecKind::Lz78,
            "ctw" => CodecKind::Ctw,
            other => return Err(CodecError::BadParams(format!("unknown codec `{other}`"))),
        };
        if ctw_depth < 0 {
            return Err(CodecError::BadParams(format!(
                "ctw depth {ctw_depth} is negative"
            )));
        }
        if ctw_depth > 48 {
            return Err(CodecError::BadParams(format!(
                "ctw depth {ctw_depth} is unreasonably large"
            )));
        }
        Ok(Self {
            kind,
            ctw_depth: ctw_depth as usize,
        })
    }
}

/// Incremental code-length state for one sequence.
#[derive(Debug, Clone)]
pub enum CodeLengthModel {
    Lz78(Lz78Codec),
    Ctw(CtwCodec),
}

impl CodeLengthModel {
    /// Empty-state codec; `L(empty) = 0`.
    pub fn new(spec: &CodecSpec, alphabet: Alphabet) -> Self {
        match spec.kind {
            CodecKind::Lz78 => CodeLengthModel::Lz78(Lz78Codec::new(alphabet)),
            CodecKind::Ctw => CodeLengthModel::Ctw(CtwCodec::new(alphabet, spec.ctw_depth)),
        }
    }

    /// Advance by one symbol and return the total length of the extended
    /// sequence (integer-valued for LZ78, real-valued for CTW).
    #[inline]
    pub fn extend(&mut self, a: Symbol) -> f64 {
        match self {
            CodeLengthModel::Lz78(c) => c.extend(a),
            CodeLengthModel::Ctw(c) => c.extend(a),
        }
    }

    pub fn total_bits(&self) -> f64 {
        match self {
            CodeLengthModel::Lz78(c) => c.total_bits(),
            CodeLengthModel::Ctw(c) => c.total_bits(),
        }
    }
}

/// Stateless convenience: the fold of [`CodeLengthModel::extend`] over `x`.
pub fn code_length(spec: &CodecSpec, alphabet: Alphabet, x: &[Symbol]) -> f64 {
    let mut codec = CodeLengthModel::new(spec, alphabet);
    let mut total = 0.0;
    for &a in x {
        total = codec.extend(a);
    }
    total
}

/// Exhaustive Kraft sum over all length-`n` sequences.
pub fn kraft_check(spec: &CodecSpec, alphabet: Alphabet, n: usize) -> Result<f64, CodecError> {
    let states = (alphabet.size() as u128).pow(n as u32);
    if states > KRAFT_MAX_SEQUENCES {
        return Err(CodecError::TooLarge { states });
    }
    let mut sum = 0.0;
    let root = CodeLengthModel::new(spec, alphabet);
    dfs(&root, n, alphabet.size(), &mut sum);
    return Ok(sum);

    fn dfs(codec: &CodeLengthModel, remaining: usize, s: usize, sum: &mut f64) {
        if remaining == 0 {
            *sum += (-codec.total_bits()).exp2();
            return;
        }
        for a in 0..s {
            let mut child = codec.clone();
            child.extend(a);
            dfs(&child, remaining - 1, s, sum);
        }
    }
}

/// Per-symbol redundancy `(L(x_1^n) + log2 mu(x_1^n)) / n` along one sampled
/// path, recorded at each requested `n`, plus the last index at which the
/// magnitude reached `epsilon` (the pointwise-universality diagnostic).
#[derive(Debug, Clone)]
pub struct RedundancyProfile {
    pub n_values: Vec<usize>,
    pub per_symbol_redundancy: Vec<f64>,
    pub j_epsilon: ConvergenceDiagnostic,
}

pub fn redundancy_profile(
    spec: &CodecSpec,
    model: &MarkovModel,
    n_values: &[usize],
    epsilon: f64,
    seed: u64,
) -> RedundancyProfile {
    let mut grid: Vec<usize> = n_values.to_vec();
    grid.sort_unstable();
    grid.dedup();
    assert!(!grid.is_empty(), "redundancy profile needs a nonempty n grid");
    let max_n = *grid.last().unwrap();

    let mut rng = stream_rng(seed, Domain::Path, 0);
    let mut sampler = ModelSampler::new(model);
    let mut codec = CodeLengthModel::new(spec, model.alphabet());
    let mut seen: Vec<Symbol> = Vec::new();
    let mut ctx = 0usize;
    let mut log2_mu = 0.0f64;
    let mut redundancies = Vec::with_capacity(grid.len());
    let mut last_exceedance = None;
    let mut gi = 0;
    for n in 1..=max_n {
        let a = sampler.next_symbol(&mut rng);
        // Incremental log2 mu with stationary start.
        if seen.len() < model.order() {
            seen.push(a);
            log2_mu = model.log2_probability(&seen);
            if seen.len() == model.order() {
                ctx = model.context_of(&seen);
            }
        } else {
            log2_mu += model.log2_transition(ctx, a);
            ctx = model.shift(ctx, a);
        }
        let bits = codec.extend(a);
        let r = (bits + log2_mu) / n as f64;
        if r.abs() >= epsilon {
            last_exceedance = Some(n);
        }
        if n == grid[gi] {
            redundancies.push(r);
            gi += 1;
        }
    }
    RedundancyProfile {
        n_values: grid,
        per_symbol_redundancy: redundancies,
        j_epsilon: ConvergenceDiagnostic {
            epsilon,
            last_exceedance,
            horizon: max_n,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    fn mu0() -> MarkovModel {
        MarkovModel::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn parse_rejects_negative_depth() {
        assert!(CodecSpec::parse("ctw", -1).is_err());
        assert!(CodecSpec::parse("ctw", 0).is_ok());
        assert!(CodecSpec::parse("lz78", 0).is_ok());
        assert!(CodecSpec::parse("huffman", 0).is_err());
    }

    #[test]
    fn code_length_equals_extend_fold() {
        let xs = [0, 1, 1, 0, 0, 0, 1, 0, 1, 1];
        for spec in [CodecSpec::lz78(), CodecSpec::ctw(2)] {
            let mut codec = CodeLengthModel::new(&spec, binary());
            let mut total = 0.0;
            for &a in &xs {
                total = codec.extend(a);
            }
            assert_eq!(total, code_length(&spec, binary(), &xs));
        }
    }

    #[test]
    fn kraft_sum_for_kt_n1_is_exactly_one() {
        let sum = kraft_check(&CodecSpec::ctw(0), binary(), 1).unwrap();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn kraft_holds_for_small_binary_blocks() {
        for n in 1..=8 {
            let lz = kraft_check(&CodecSpec::lz78(), binary(), n).unwrap();
            assert!(lz <= 1.0 + 1e-12, "lz78 n = {n}: {lz}");
            let ctw = kraft_check(&CodecSpec::ctw(2), binary(), n).unwrap();
            assert!(ctw <= 1.0 + 1e-12, "ctw n = {n}: {ctw}");
            // CTW lengths are -log2 of a normalized mixture.
            assert!(ctw >= 0.99, "ctw n = {n}: {ctw}");
        }
    }

    #[test]
    fn kraft_refuses_oversized_blocks() {
        assert!(matches!(
            kraft_check(&CodecSpec::lz78(), binary(), 40),
            Err(CodecError::TooLarge { .. })
        ));
    }

    #[test]
    fn ctw_redundancy_decays_on_markov_source() {
        let profile = redundancy_profile(&CodecSpec::ctw(1), &mu0(), &[1000, 100_000], 10.0, 4);
        let early = profile.per_symbol_redundancy[0];
        let late = profile.per_symbol_redundancy[1];
        assert!(late < early, "early {early}, late {late}");
        assert!(late < 0.05, "late redundancy {late}");
        // A gross epsilon is never exceeded beyond the first step or two.
        assert!(profile.j_epsilon.last_exceedance.unwrap_or(0) <= 2);
    }

    #[test]
    fn lz78_redundancy_trend_is_slow_but_real() {
        // Parsing-based convergence is slow: the per-symbol redundancy at
        // n = 1e6 lands just above half its n = 1e4 value (measured
        // 0.55-0.59 across seeds under this length accounting), and the
        // trend is what matters.
        let profile = redundancy_profile(&CodecSpec::lz78(), &mu0(), &[10_000, 1_000_000], 10.0, 1);
        let early = profile.per_symbol_redundancy[0];
        let late = profile.per_symbol_redundancy[1];
        assert!(late < early, "early {early}, late {late}");
        assert!(late <= 0.62 * early, "ratio {}", late / early);
    }
}
