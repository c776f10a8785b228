//! Change-point path sampling.
//!
//! A composite path is one stationary pre-change stream followed, from the
//! change point on, by an independent post-change stream started at its own
//! stationary law: with training length `n0` and change point `m`, positions
//! `1..=n0+m-1` come from the pre-change model and positions `n0+m..` from
//! the post-change model. Sampling is purely functional in `(spec, seed)`.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use super::{MarkovError, MarkovModel, Symbol};
use crate::rng::stream_rng;

/// Index of the first post-change sample, or `Never` for a pure pre-change
/// stream. The change point `m` counts from the end of the training prefix:
/// `m = 1` means every post-training sample is post-change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangePoint {
    At(usize),
    Never,
}

impl ChangePoint {
    pub fn is_never(&self) -> bool {
        matches!(self, ChangePoint::Never)
    }
}

/// A pre-change model, a post-change model, a change point, and the training
/// prefix length, validated for absolute continuity of the post-change law
/// with respect to the pre-change law.
#[derive(Debug, Clone)]
pub struct ChangeSpec {
    pre: MarkovModel,
    post: MarkovModel,
    change_point: ChangePoint,
    n0: usize,
}

impl ChangeSpec {
    pub fn new(
        pre: MarkovModel,
        post: MarkovModel,
        change_point: ChangePoint,
        n0: usize,
    ) -> Result<Self, MarkovError> {
        if pre.alphabet() != post.alphabet() || pre.order() != post.order() {
            return Err(MarkovError::AlphabetMismatch);
        }
        if let ChangePoint::At(m) = change_point {
            if m == 0 {
                return Err(MarkovError::SupportViolation(
                    "change point must be at least 1".into(),
                ));
            }
        }
        // mu1 << mu0 on the post model's reachable support.
        let s = pre.alphabet().size();
        for c in 0..post.n_contexts() {
            if post.stationary_law()[c] == 0.0 {
                continue;
            }
            if pre.stationary_law()[c] == 0.0 {
                return Err(MarkovError::SupportViolation(format!(
                    "context {c} is reachable under the post-change law but not the pre-change law"
                )));
            }
            for a in 0..s {
                if post.transition(c, a) > 0.0 && pre.transition(c, a) == 0.0 {
                    return Err(MarkovError::SupportViolation(format!(
                        "transition ({c} -> {a}) has positive post-change but zero pre-change probability"
                    )));
                }
            }
        }
        Ok(Self {
            pre,
            post,
            change_point,
            n0,
        })
    }

    /// A pure pre-change stream (no post model, never changes).
    pub fn never(pre: MarkovModel, n0: usize) -> Self {
        Self {
            post: pre.clone(),
            pre,
            change_point: ChangePoint::Never,
            n0,
        }
    }

    pub fn pre(&self) -> &MarkovModel {
        &self.pre
    }

    pub fn post(&self) -> &MarkovModel {
        &self.post
    }

    pub fn change_point(&self) -> ChangePoint {
        self.change_point
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Number of samples drawn from the pre-change model (`n0 + m - 1`).
    pub fn pre_samples(&self) -> Option<usize> {
        match self.change_point {
            ChangePoint::Never => None,
            ChangePoint::At(m) => Some(self.n0 + m - 1),
        }
    }
}

/// Streams one model's stationary path symbol by symbol.
#[derive(Debug, Clone)]
pub struct ModelSampler<'a> {
    model: &'a MarkovModel,
    ctx: usize,
    pending: Vec<Symbol>, // initial context digits, most significant last
    started: bool,
}

impl<'a> ModelSampler<'a> {
    pub fn new(model: &'a MarkovModel) -> Self {
        Self {
            model,
            ctx: 0,
            pending: Vec::new(),
            started: false,
        }
    }

    pub fn next_symbol(&mut self, rng: &mut ChaCha12Rng) -> Symbol {
        if !self.started {
            self.started = true;
            let u: f64 = rng.gen();
            let ctx = cdf_index(self.model.initial_cdf(), u);
            self.ctx = ctx;
            // Unpack the context digits; emit most significant (oldest) first.
            let mut c = ctx;
            let s = self.model.alphabet().size();
            for _ in 0..self.model.order() {
                self.pending.push(c % s);
                c /= s;
            }
        }
        if let Some(sym) = self.pending.pop() {
            return sym;
        }
        let u: f64 = rng.gen();
        let a = cdf_index(self.model.row_cdf(self.ctx), u);
        self.ctx = self.model.shift(self.ctx, a);
        a
    }
}

fn cdf_index(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&edge| u < edge).unwrap_or(cdf.len() - 1)
}

/// Lazily streams a composite change-point path. Deterministic in
/// `(spec, seed)`; distinct seeds give independent paths.
pub struct ChangePath<'a> {
    spec: &'a ChangeSpec,
    rng: ChaCha12Rng,
    pre: ModelSampler<'a>,
    post: ModelSampler<'a>,
    emitted: usize,
}

impl<'a> ChangePath<'a> {
    pub fn new(spec: &'a ChangeSpec, seed: u64) -> Self {
        Self::with_rng(spec, stream_rng(seed, crate::rng::Domain::Path, 0))
    }

    pub fn with_rng(spec: &'a ChangeSpec, rng: ChaCha12Rng) -> Self {
        Self {
            spec,
            rng,
            pre: ModelSampler::new(spec.pre()),
            post: ModelSampler::new(spec.post()),
            emitted: 0,
        }
    }
}

impl Iterator for ChangePath<'_> {
    type Item = Symbol;

    fn next(&mut self) -> Option<Symbol> {
        self.emitted += 1;
        let from_pre = match self.spec.pre_samples() {
            None => true,
            Some(k) => self.emitted <= k,
        };
        Some(if from_pre {
            self.pre.next_symbol(&mut self.rng)
        } else {
            self.post.next_symbol(&mut self.rng)
        })
    }
}

/// Materialize a length-`length` composite path.
pub fn sample_path(spec: &ChangeSpec, length: usize, seed: u64) -> Vec<Symbol> {
    ChangePath::new(spec, seed).take(length).collect()
}
