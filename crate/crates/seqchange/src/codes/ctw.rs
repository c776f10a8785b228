//! Context tree weighting with Krichevsky-Trofimov estimators.
//!
//! A depth-`D` tree over an alphabet of size `s` keeps, at every suffix
//! context up to length `D`, KT counts with Dirichlet(1/2) smoothing:
//!
//! ```text
//! P_kt(a | counts) = (counts[a] + 1/2) / (total + s/2)
//! ```
//!
//! Internal nodes mix their own KT block probability with the product of
//! their children's weighted probabilities, `P_w = 1/2 P_kt + 1/2 prod P_w`,
//! and leaves use `P_kt` alone. The code length is the ideal
//! `-log2 P_w(root)`; integer rounding is omitted (it adds at most one bit
//! and only loosens the detection constants). The mixture is a normalized
//! probability assignment, so the Kraft sum over length-`n` sequences is 1 up
//! to float rounding.
//!
//! The first symbols, whose contexts reach before the start of the sequence,
//! are scored against an all-zeros pad. Nodes live in an arena, so cloning a
//! codec is a flat copy: O(state size), as documented in the module contract.

use crate::markov::{Alphabet, Symbol};

#[derive(Debug, Clone)]
struct Node {
    counts: Vec<u32>,
    total: u32,
    log2_kt: f64,
    log2_w: f64,
    /// Sum of children's `log2_w` (missing children contribute 0, the empty
    /// block probability).
    log2_children: f64,
    /// Child arena indices + 1; 0 means absent.
    children: Vec<u32>,
}

impl Node {
    fn new(s: usize, leaf: bool) -> Self {
        Self {
            counts: vec![0; s],
            total: 0,
            log2_kt: 0.0,
            log2_w: 0.0,
            log2_children: 0.0,
            children: if leaf { Vec::new() } else { vec![0; s] },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CtwCodec {
    s: usize,
    depth: usize,
    nodes: Vec<Node>,
    /// Most recent `depth` symbols, newest last, zero-padded at the start.
    recent: Vec<Symbol>,
    path: Vec<usize>,
}

impl CtwCodec {
    pub fn new(alphabet: Alphabet, depth: usize) -> Self {
        let s = alphabet.size();
        Self {
            s,
            depth,
            nodes: vec![Node::new(s, depth == 0)],
            recent: vec![0; depth],
            path: Vec::with_capacity(depth + 1),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Extend by one symbol; returns the total ideal code length in bits.
    pub fn extend(&mut self, a: Symbol) -> f64 {
        debug_assert!(a < self.s);
        // Walk the context path: depth-d node is keyed by the d-th most
        // recent symbol.
        self.path.clear();
        self.path.push(0);
        let mut node = 0usize;
        for d in 0..self.depth {
            let key = self.recent[self.depth - 1 - d];
            // Arena slot 0 is the root, which is never anyone's child, so 0
            // doubles as the absent sentinel.
            let slot = self.nodes[node].children[key] as usize;
            let child = if slot == 0 {
                let idx = self.nodes.len();
                self.nodes.push(Node::new(self.s, d + 1 == self.depth));
                self.nodes[node].children[key] = idx as u32;
                idx
            } else {
                slot
            };
            self.path.push(child);
            node = child;
        }

        // Update from the leaf upward, propagating the weighted probability.
        let half_s = self.s as f64 * 0.5;
        let mut child_delta = 0.0; // new - old log2_w of the path child
        for d in (0..self.path.len()).rev() {
            let idx = self.path[d];
            let n = &mut self.nodes[idx];
            let kt_step =
                ((n.counts[a] as f64 + 0.5) / (n.total as f64 + half_s)).log2();
            n.counts[a] += 1;
            n.total += 1;
            n.log2_kt += kt_step;
            let old_w = n.log2_w;
            let new_w = if d == self.depth {
                n.log2_kt
            } else {
                n.log2_children += child_delta;
                log2_mix_half(n.log2_kt, n.log2_children)
            };
            n.log2_w = new_w;
            child_delta = new_w - old_w;
        }

        if self.depth > 0 {
            self.recent.rotate_left(1);
            *self.recent.last_mut().unwrap() = a;
        }
        self.total_bits()
    }

    pub fn total_bits(&self) -> f64 {
        -self.nodes[0].log2_w
    }
}

/// `log2(0.5 * 2^a + 0.5 * 2^b)`, stable for widely separated magnitudes.
fn log2_mix_half(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi - 1.0;
    }
    hi - 1.0 + (1.0 + (lo - hi).exp2()).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> Alphabet {
        Alphabet::new(2).unwrap()
    }

    #[test]
    fn depth_zero_is_sequential_kt() {
        let mut c = CtwCodec::new(binary(), 0);
        // First symbol: KT gives 1/2, so exactly one bit.
        assert_eq!(c.extend(0), 1.0);
        // Second zero: (1 + 1/2) / (1 + 1) = 3/4.
        let expect = 1.0 + (4.0f64 / 3.0).log2();
        assert!((c.extend(0) - expect).abs() < 1e-12);
    }

    #[test]
    fn first_symbol_costs_one_bit_at_any_depth() {
        for depth in [0, 1, 2, 5] {
            let mut c = CtwCodec::new(binary(), depth);
            let l = c.extend(1);
            assert!((l - 1.0).abs() < 1e-12, "depth {depth}: {l}");
        }
    }

    #[test]
    fn lengths_are_nondecreasing_and_finite() {
        let xs = [0, 1, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1];
        for depth in [0, 1, 3] {
            let mut c = CtwCodec::new(binary(), depth);
            let mut last = 0.0;
            for &a in &xs {
                let l = c.extend(a);
                assert!(l.is_finite() && l >= last - 1e-12);
                last = l;
            }
        }
    }

    #[test]
    fn ternary_kt_normalizes() {
        // KT with s = 3 gives (0 + 1/2) / (0 + 3/2) = 1/3 for the first symbol.
        let mut c = CtwCodec::new(Alphabet::new(3).unwrap(), 0);
        let l = c.extend(2);
        assert!((l - 3.0f64.log2()).abs() < 1e-12);
    }
}
