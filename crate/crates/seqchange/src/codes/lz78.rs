//! LZ78 incremental-parsing code length.
//!
//! The parser grows a phrase dictionary; phrase `j` is a previously seen
//! phrase (or the empty root) extended by one symbol. Its codeword costs
//! `ceil(log2 j)` bits for the prefix index (`j - 1` prior phrases plus the
//! root) plus `ceil(log2 s)` bits for the innovation symbol. A final
//! incomplete phrase is an existing dictionary entry and costs its index bits
//! only. Lengths are integers; the Kraft inequality is verified exhaustively
//! under this convention in the module tests and the acceptance suite.

use crate::markov::{Alphabet, Symbol};

#[derive(Debug, Clone)]
pub struct Lz78Codec {
    s: usize,
    symbol_bits: u64,
    /// Trie children, `children[node * s + a]` holds child index + 1 (0 = none).
    children: Vec<u32>,
    /// Current node of the pending (incomplete) phrase; 0 is the root.
    node: usize,
    /// Completed phrases so far.
    phrases: u64,
    /// Bits spent on completed phrases.
    complete_bits: u64,
}

impl Lz78Codec {
    pub fn new(alphabet: Alphabet) -> Self {
        let s = alphabet.size();
        Self {
            s,
            symbol_bits: ceil_log2(s as u64),
            children: vec![0; s],
            node: 0,
            phrases: 0,
            complete_bits: 0,
        }
    }

    /// Extend by one symbol; returns the code length of the whole sequence
    /// seen so far.
    pub fn extend(&mut self, a: Symbol) -> f64 {
        debug_assert!(a < self.s);
        let slot = self.node * self.s + a;
        let child = self.children[slot];
        if child != 0 {
            // Pending phrase grows but stays in the dictionary; the cost of
            // its eventual index is already accounted in total_bits().
            self.node = child as usize;
        } else {
            // New phrase: index of the pending prefix + innovation symbol.
            let new_node = self.children.len() / self.s;
            self.children[slot] = new_node as u32;
            self.children.extend(std::iter::repeat_n(0, self.s));
            self.phrases += 1;
            self.complete_bits += ceil_log2(self.phrases) + self.symbol_bits;
            self.node = 0;
        }
        self.total_bits()
    }

    pub fn total_bits(&self) -> f64 {
        let pending = if self.node == 0 {
            0
        } else {
            ceil_log2(self.phrases + 1)
        };
        (self.complete_bits + pending) as f64
    }
}

/// `ceil(log2 j)` for `j >= 1`.
fn ceil_log2(j: u64) -> u64 {
    debug_assert!(j >= 1);
    if j.is_power_of_two() {
        j.ilog2() as u64
    } else {
        j.ilog2() as u64 + 1
    }
}
