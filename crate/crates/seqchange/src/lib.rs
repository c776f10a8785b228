//! Sequential change detection for finite-alphabet Markov sources when both
//! the pre-change and the post-change law are unknown.
//!
//! The detector is a CUSUM-style test in which the unknown post-change law is
//! replaced by a universal code length (LZ78 or context tree weighting) and
//! the unknown pre-change law by an empirical Markov estimate fitted on a
//! training prefix. The crate provides:
//!
//! - [`markov`] — finite-order Markov models, change-point path sampling, and
//!   information-rate calculators (entropy rate, divergence rate, mixing
//!   probes).
//! - [`estimate`] — the empirical pre-change estimate, its coverage and
//!   deviation diagnostics, and the multiplicative accuracy bound that feeds
//!   the false-alarm analysis.
//! - [`codes`] — incremental prefix code-length models (LZ78, CTW) with Kraft
//!   accounting and redundancy profiling.
//! - [`detect`] — Page's CUSUM, the universal-code CUSUM variants, stopping
//!   rules, and the threshold/drift selection helpers.
//! - [`experiments`] — a seeded, reproducible Monte Carlo harness that checks
//!   the false-alarm bounds and delay asymptotics at desk scale, shared by
//!   the CLI `verify` subcommand and the acceptance test suite.
//!
//! A narrative guide lives in `book/`; its chapters are mirrored into
//! [`guide`] so every code snippet in the book runs under `cargo test --doc`.

pub mod codes;
pub mod detect;
pub mod estimate;
pub mod experiments;
pub mod guide;
pub mod io;
pub mod markov;
pub mod rng;

pub use markov::{Alphabet, ChangePoint, ChangeSpec, MarkovModel, Symbol};
