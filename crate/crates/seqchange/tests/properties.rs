//! Property tests for the structural invariants: stochastic-matrix algebra,
//! code-length bookkeeping, and estimate round-trips.

use proptest::prelude::*;

use seqchange::codes::{code_length, CodeLengthModel, CodecSpec};
use seqchange::estimate::EmpiricalMarkovEstimate;
use seqchange::io;
use seqchange::markov::{Alphabet, MarkovModel};

/// Row-stochastic order-1 models with entries bounded away from zero, so the
/// support digraph is complete and the chain ergodic by construction.
fn arb_model(size: usize) -> impl Strategy<Value = MarkovModel> {
    prop::collection::vec(0.02f64..1.0, size * size).prop_map(move |raw| {
        let rows: Vec<f64> = raw
            .chunks(size)
            .flat_map(|row| {
                let sum: f64 = row.iter().sum();
                row.iter().map(|v| v / sum).collect::<Vec<_>>()
            })
            .collect();
        MarkovModel::new(Alphabet::new(size).unwrap(), 1, rows).expect("ergodic by construction")
    })
}

fn arb_symbols(size: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..size, 2..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_law_is_a_fixed_point(model in arb_model(3)) {
        let pi = model.stationary_law();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in 0..3 {
            let mass: f64 = (0..3).map(|b| pi[b] * model.transition(b, c)).sum();
            prop_assert!((mass - pi[c]).abs() <= 1e-10);
        }
    }

    #[test]
    fn entropy_rate_is_bounded_by_log_alphabet(model in arb_model(3)) {
        let h = model.entropy_rate();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= 3f64.log2() + 1e-12);
    }

    #[test]
    fn divergence_rate_is_nonnegative_and_zero_only_on_self(
        p in arb_model(2),
        q in arb_model(2),
    ) {
        let d = p.divergence_rate(&q).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(p.divergence_rate(&p).unwrap() == 0.0);
        // Zero divergence forces identical rows on the support.
        if d == 0.0 {
            for b in 0..2 {
                for a in 0..2 {
                    prop_assert!((p.transition(b, a) - q.transition(b, a)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn code_lengths_are_nondecreasing_and_match_from_scratch(
        x in arb_symbols(3, 48),
        depth in 0usize..3,
        lz in any::<bool>(),
    ) {
        let spec = if lz { CodecSpec::lz78() } else { CodecSpec::ctw(depth) };
        let alphabet = Alphabet::new(3).unwrap();
        let mut codec = CodeLengthModel::new(&spec, alphabet);
        let mut last = 0.0;
        for n in 1..=x.len() {
            let total = codec.extend(x[n - 1]);
            prop_assert!(total >= last);
            last = total;
            prop_assert_eq!(total, code_length(&spec, alphabet, &x[..n]));
        }
    }

    #[test]
    fn estimates_round_trip_and_match_product_oracle(x in arb_symbols(2, 40)) {
        let alphabet = Alphabet::new(2).unwrap();
        let est = EmpiricalMarkovEstimate::fit(alphabet, &x).unwrap();
        let back = io::parse_estimate(&io::render_estimate(&est)).unwrap();
        prop_assert_eq!(&est, &back);

        // Direct-product oracle for the plug-in sequence probability.
        let mut product = est.marginal(x[0]);
        for w in x.windows(2) {
            product *= est.conditional(w[0], w[1]);
        }
        let got = est.seq_log2_prob(&x);
        if product > 0.0 {
            prop_assert!((got - product.log2()).abs() < 1e-9);
        } else {
            prop_assert_eq!(got, f64::NEG_INFINITY);
        }
    }
}
