//! The narrative guide, mirrored from `book/src` so that every code block in
//! the book compiles and runs under `cargo test --doc`. Build the rendered
//! book with `mdbook build book` from the repository root.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/markov-sources.md")]
pub mod markov_sources {}

#[doc = include_str!("../../../book/src/universal-codes.md")]
pub mod universal_codes {}

#[doc = include_str!("../../../book/src/estimating-the-pre-change-law.md")]
pub mod estimating_the_pre_change_law {}

#[doc = include_str!("../../../book/src/detectors.md")]
pub mod detectors {}

#[doc = include_str!("../../../book/src/false-alarms-and-delays.md")]
pub mod false_alarms_and_delays {}

#[doc = include_str!("../../../book/src/command-line.md")]
pub mod command_line {}
