//! The verification suite: one runnable check per acceptance criterion,
//! shared by the CLI `verify` subcommand and the `acceptance` integration
//! test target. Each check prints a single pass/fail line; every tolerance
//! is pinned here, in code.
//!
//! The `full` scale runs the criteria at their stated sizes; `quick` is a
//! smoke profile with the same structure at reduced trial counts (and, for
//! the asymptotic ratio check, a correspondingly reduced target band).

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::codes::{code_length, kraft_check, CodeLengthModel, CodecSpec};
use crate::detect::{
    fixed_sample_test, nstar, run_cusum, PostLaw, PreLaw, PrunePolicy, Threshold,
};
use crate::estimate::{
    beta_bound, deviation_check, epsilon0_estimate, f_n_ratio, EmpiricalMarkovEstimate,
    FnRatioTracker,
};
use crate::markov::{Alphabet, ChangePoint, MarkovModel, ModelSampler, Symbol};
use crate::rng::{stream_rng, Domain};

use super::{
    calibrate, default_mu0, default_mu1, run_delay_sweep, run_e0_check, run_false_alarm_sweep,
    run_lorden_estimate, run_optimality_ratio, ExperimentConfig, LambdaPolicy, LordenSettings,
    ThresholdGrid,
};

/// Sizing knobs for the verification suite.
#[derive(Debug, Clone)]
pub struct AcceptanceScale {
    pub seed: u64,
    pub kraft_max_n: usize,
    pub exponent_max_n: usize,
    pub convergence_n: usize,
    pub consistency_trials: usize,
    pub consistency_n0: usize,
    pub epsilon0_trials: usize,
    pub epsilon0_n0_grid: Vec<usize>,
    pub ratio_bound_paths: usize,
    pub ratio_bound_n0: usize,
    pub ratio_bound_len: usize,
    pub fa_trials: usize,
    pub fa_n0: usize,
    pub fa_alpha_exponents: Vec<i32>,
    pub fa_horizon: usize,
    pub term_trials: usize,
    pub delay_trials: usize,
    pub delay_alpha_exponents: Vec<i32>,
    pub delay_n0: usize,
    pub lorden_log2_gammas: Vec<f64>,
    pub lorden_settings: LordenSettings,
    pub lorden_n0: usize,
    pub e0_log2_gammas: Vec<f64>,
    pub e0_trials: usize,
    pub e0_horizon: usize,
    pub ratio_log2_gammas: Vec<f64>,
    pub ratio_n0: usize,
    pub ratio_lorden: LordenSettings,
    /// Acceptance band for the near-optimality ratio at the largest gamma.
    pub ratio_band: (f64, f64),
    pub oracle_paths: usize,
    pub nstar_paths: usize,
    pub incremental_seqs: usize,
}

impl AcceptanceScale {
    /// The stated acceptance sizes.
    pub fn full() -> Self {
        Self {
            seed: 20_260_810,
            kraft_max_n: 12,
            exponent_max_n: 10,
            convergence_n: 100_000,
            consistency_trials: 200,
            consistency_n0: 1_000_000,
            epsilon0_trials: 400,
            epsilon0_n0_grid: vec![1_000, 10_000, 100_000],
            ratio_bound_paths: 100,
            ratio_bound_n0: 10_000,
            ratio_bound_len: 10_000,
            fa_trials: 10_000,
            fa_n0: 100_000,
            fa_alpha_exponents: (4..=10).collect(),
            fa_horizon: 10_000,
            term_trials: 1_000,
            delay_trials: 2_000,
            delay_alpha_exponents: (5..=20).collect(),
            delay_n0: 100_000,
            lorden_log2_gammas: vec![
                100f64.log2(),
                1_000f64.log2(),
                10_000f64.log2(),
                100_000f64.log2(),
            ],
            lorden_settings: LordenSettings {
                window: 200,
                prefixes_per_point: 32,
                trials_per_prefix: 12,
            },
            lorden_n0: 100_000,
            e0_log2_gammas: vec![0.25, 1.0, 2.0, 10f64.log2()],
            e0_trials: 150,
            e0_horizon: 1_500,
            ratio_log2_gammas: vec![40.0, 80.0, 120.0, 160.0],
            ratio_n0: 1_000_000,
            ratio_lorden: LordenSettings {
                window: 80,
                prefixes_per_point: 32,
                trials_per_prefix: 4,
            },
            ratio_band: (1.0, 1.8),
            oracle_paths: 200,
            nstar_paths: 100,
            incremental_seqs: 1_000,
        }
    }

    /// A smoke profile: same checks, desk-minute sizes. The near-optimality
    /// band widens because the reduced sweep stops further from the
    /// asymptote.
    pub fn quick() -> Self {
        Self {
            seed: 20_260_810,
            kraft_max_n: 8,
            exponent_max_n: 8,
            convergence_n: 100_000,
            consistency_trials: 40,
            consistency_n0: 200_000,
            epsilon0_trials: 150,
            epsilon0_n0_grid: vec![1_000, 10_000],
            ratio_bound_paths: 20,
            ratio_bound_n0: 10_000,
            ratio_bound_len: 2_000,
            fa_trials: 1_500,
            fa_n0: 20_000,
            fa_alpha_exponents: (4..=8).collect(),
            fa_horizon: 2_000,
            term_trials: 200,
            delay_trials: 400,
            delay_alpha_exponents: (5..=12).collect(),
            delay_n0: 100_000,
            lorden_log2_gammas: vec![
                100f64.log2(),
                464f64.log2(),
                2_154f64.log2(),
                10_000f64.log2(),
            ],
            lorden_settings: LordenSettings {
                window: 200,
                prefixes_per_point: 12,
                trials_per_prefix: 6,
            },
            lorden_n0: 100_000,
            e0_log2_gammas: vec![0.25, 1.0],
            e0_trials: 60,
            e0_horizon: 600,
            ratio_log2_gammas: vec![60.0, 120.0, 180.0],
            ratio_n0: 1_000_000,
            ratio_lorden: LordenSettings {
                window: 40,
                prefixes_per_point: 8,
                trials_per_prefix: 2,
            },
            ratio_band: (1.0, 1.9),
            oracle_paths: 40,
            nstar_paths: 20,
            incremental_seqs: 150,
        }
    }
}

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CriterionOutcome {
    fn new(id: usize, name: &'static str) -> Self {
        Self {
            id,
            name,
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.passed = false;
        }
        self.details.push(detail);
    }

    /// The one-line pass/fail summary.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} ({}): {} — {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details.join("; ")
        )
    }
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.summary_line())
    }
}

fn binary() -> Alphabet {
    Alphabet::new(2).unwrap()
}

/// Criterion 1: exhaustive Kraft sums for both codecs over every binary
/// block length up to the limit.
pub fn criterion_1_kraft(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(1, "kraft-exhaustive");
    for spec in [CodecSpec::lz78(), CodecSpec::ctw(2)] {
        let mut worst = f64::NEG_INFINITY;
        let mut ok = true;
        for n in 1..=scale.kraft_max_n {
            let sum = kraft_check(&spec, binary(), n).expect("in-range block");
            worst = worst.max(sum);
            ok &= sum <= 1.0 + 1e-12;
        }
        out.check(
            ok,
            format!("{} max Kraft sum {:.12} over n<=12", spec.kind, worst),
        );
    }
    out
}

/// Criterion 2: exact error exponent of the fixed-sample discriminant,
/// exhaustively over all binary sequences.
pub fn criterion_2_fixed_sample_exponent(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(2, "fixed-sample-exponent");
    let mu0 = default_mu0();
    let mu1 = default_mu1();
    let d = mu1.divergence_rate(&mu0).unwrap();
    let lambda = d / 2.0;
    let mut worst_margin = f64::INFINITY;
    let mut ok = true;
    for n in 1..=scale.exponent_max_n {
        let mut reject_mass = 0.0f64;
        for bitsx in 0..(1u32 << n) {
            let x: Vec<Symbol> = (0..n).map(|i| ((bitsx >> i) & 1) as Symbol).collect();
            let outcome = fixed_sample_test(&mu0, &mu1, lambda, &x).unwrap();
            if outcome.reject_h0 {
                reject_mass += mu0.log2_probability(&x).exp2();
            }
        }
        let bound = (-(n as f64) * lambda).exp2();
        ok &= reject_mass <= bound * (1.0 + 1e-12);
        worst_margin = worst_margin.min(bound - reject_mass);
    }
    out.check(
        ok,
        format!(
            "mu0(h>=0) <= 2^(-n lambda) for all n<={}, min margin {:.3e} (lambda = {:.4})",
            scale.exponent_max_n, worst_margin, lambda
        ),
    );
    out
}

/// Criterion 3: per-symbol entropy and divergence estimates on single long
/// paths land within 2% of the closed forms.
pub fn criterion_3_convergence(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(3, "smb-barron-convergence");
    let mu0 = default_mu0();
    let mu1 = default_mu1();
    let n = scale.convergence_n;

    // Entropy: one mu0 path.
    let h = mu0.entropy_rate();
    let mut rng = stream_rng(scale.seed, Domain::Path, 31);
    let mut sampler = ModelSampler::new(&mu0);
    let mut prev: Option<Symbol> = None;
    let mut log2p = 0.0;
    for _ in 0..n {
        let a = sampler.next_symbol(&mut rng);
        log2p += match prev {
            None => crate::markov::log2_or_neg_inf(mu0.stationary_law()[a]),
            Some(b) => mu0.log2_transition(b, a),
        };
        prev = Some(a);
    }
    let h_hat = -log2p / n as f64;
    out.check(
        (h_hat - h).abs() <= 0.02 * h,
        format!("entropy estimate {h_hat:.5} vs rate {h:.5} (2% band)"),
    );

    // Divergence: one mu1 path, ratio against mu0.
    let d = mu1.divergence_rate(&mu0).unwrap();
    let mut rng = stream_rng(scale.seed, Domain::Path, 32);
    let mut sampler = ModelSampler::new(&mu1);
    let mut prev: Option<Symbol> = None;
    let mut ratio = 0.0;
    for _ in 0..n {
        let a = sampler.next_symbol(&mut rng);
        ratio += match prev {
            None => {
                crate::markov::log2_or_neg_inf(mu1.stationary_law()[a])
                    - crate::markov::log2_or_neg_inf(mu0.stationary_law()[a])
            }
            Some(b) => mu1.log2_transition(b, a) - mu0.log2_transition(b, a),
        };
        prev = Some(a);
    }
    let d_hat = ratio / n as f64;
    out.check(
        (d_hat - d).abs() <= 0.02 * d,
        format!("divergence estimate {d_hat:.5} vs rate {d:.5} (2% band)"),
    );
    out
}

/// Criterion 4: estimator consistency at large n0 and a deviation
/// probability that trends down with training length.
pub fn criterion_4_estimator_consistency(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(4, "estimator-consistency");
    let mu0 = default_mu0();
    let s = mu0.alphabet().size();

    let mut within = 0usize;
    for t in 0..scale.consistency_trials {
        let est = super::fit_streaming(
            &mu0,
            scale.consistency_n0,
            scale.seed,
            Domain::Training,
            t as u64,
        )
        .unwrap();
        let mut sup = 0.0f64;
        for b in 0..s {
            if mu0.stationary_law()[b] == 0.0 {
                continue;
            }
            for a in 0..s {
                if mu0.transition(b, a) > 0.0 {
                    sup = sup.max((est.conditional(b, a) - mu0.transition(b, a)).abs());
                }
            }
        }
        if sup <= 0.01 {
            within += 1;
        }
    }
    let need = (0.95 * scale.consistency_trials as f64).ceil() as usize;
    out.check(
        within >= need,
        format!(
            "sup-norm conditional error <= 0.01 in {within}/{} trials (need {need})",
            scale.consistency_trials
        ),
    );

    let mut qualities = Vec::new();
    for (i, &n0) in scale.epsilon0_n0_grid.iter().enumerate() {
        let q = epsilon0_estimate(
            &mu0,
            n0,
            0.02,
            0.02,
            scale.epsilon0_trials,
            scale.seed + 100 + i as u64,
        )
        .unwrap();
        qualities.push(q);
    }
    let mut trend_ok = true;
    for w in qualities.windows(2) {
        let sigma = (w[0].stderr().powi(2) + w[1].stderr().powi(2)).sqrt();
        if w[1].epsilon0 > w[0].epsilon0 + 3.0 * sigma {
            trend_ok = false;
        }
    }
    out.check(
        trend_ok,
        format!(
            "epsilon0 non-increasing in n0: {}",
            qualities
                .iter()
                .map(|q| format!("{}:{:.4}", q.n0, q.epsilon0))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    out
}

/// Criterion 5: on paths whose estimator passes the deviation check, the
/// per-symbol ratio of the true law to the estimate never exceeds
/// `log2 beta`.
pub fn criterion_5_ratio_bound(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(5, "estimate-ratio-bound");
    let mu0 = default_mu0();
    let (delta, delta_prime) = (0.03, 0.03);
    let beta = beta_bound(&mu0, delta, delta_prime).unwrap();
    let s = mu0.alphabet().size();

    let mut accepted = 0usize;
    let mut attempts = 0u64;
    let mut worst_gap = f64::INFINITY;
    let mut expansion_checked = true;
    while accepted < scale.ratio_bound_paths && attempts < 20 * scale.ratio_bound_paths as u64 {
        let idx = attempts;
        attempts += 1;
        let mut rng = stream_rng(scale.seed, Domain::Training, 5_000 + idx);
        let mut sampler = ModelSampler::new(&mu0);
        let mut symbol_counts = vec![0u64; s];
        let mut pair_counts = vec![0u64; s * s];
        let mut prev: Option<Symbol> = None;
        for _ in 0..scale.ratio_bound_n0 {
            let a = sampler.next_symbol(&mut rng);
            symbol_counts[a] += 1;
            if let Some(b) = prev {
                pair_counts[b * s + a] += 1;
            }
            prev = Some(a);
        }
        let est =
            EmpiricalMarkovEstimate::from_counts(mu0.alphabet(), symbol_counts, pair_counts)
                .unwrap();
        if !deviation_check(&mu0, &est, delta, delta_prime) {
            continue;
        }
        accepted += 1;
        // Continue the same stream to form the post-training window.
        let mut tracker = FnRatioTracker::new(&mu0, &est);
        let mut window = Vec::with_capacity(scale.ratio_bound_len);
        let mut ok = true;
        let mut last_f_n = 0.0;
        for _ in 0..scale.ratio_bound_len {
            let a = sampler.next_symbol(&mut rng);
            window.push(a);
            last_f_n = tracker.push(a);
            worst_gap = worst_gap.min(beta.log2_beta - last_f_n);
            if last_f_n > beta.log2_beta + 1e-9 {
                ok = false;
            }
        }
        // Whole-window recomputation cross-checks the incremental form (and,
        // inside f_n_ratio, the count-weighted expansion).
        let whole = f_n_ratio(&mu0, &est, &window).unwrap();
        if (whole - last_f_n).abs() > 1e-9 {
            expansion_checked = false;
        }
        if !ok {
            out.check(false, format!("path {idx} exceeded log2 beta"));
        }
    }
    out.check(
        accepted == scale.ratio_bound_paths,
        format!(
            "{accepted}/{} paths passed the ({delta}, {delta_prime}) deviation gate in {attempts} attempts",
            scale.ratio_bound_paths
        ),
    );
    out.check(
        worst_gap >= -1e-9,
        format!(
            "f_n <= log2 beta ({:.4}) with min slack {worst_gap:.4}",
            beta.log2_beta
        ),
    );
    out.check(expansion_checked, "direct and expansion forms agree".into());
    out
}

/// Criterion 6: empirical false-alarm rate dominated by the analytic bound
/// at every level of the sweep.
pub fn criterion_6_false_alarm(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(6, "false-alarm-dominance");
    let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
    cfg.seed = scale.seed;
    cfg.n0 = scale.fa_n0;
    cfg.delta = 0.005;
    cfg.delta_prime = 0.015;
    cfg.epsilon0_trials = scale.epsilon0_trials;
    cfg.trials = scale.fa_trials;
    cfg.horizon = scale.fa_horizon;
    cfg.change_point = ChangePoint::Never;
    cfg.grid = ThresholdGrid::Alphas(
        scale
            .fa_alpha_exponents
            .iter()
            .map(|&e| (-(e as f64)).exp2())
            .collect(),
    );
    // Mid-window drift rate, resolved from the same calibration fit the
    // sweep will use (identical stream, so identical window).
    let est = super::fit_streaming(&cfg.mu0, cfg.n0, cfg.seed, Domain::Calibration, 0)
        .expect("calibration fit");
    let beta = beta_bound(&cfg.mu0, cfg.delta, cfg.delta_prime).expect("admissible deltas");
    let window = crate::detect::lambda_window(&est, &cfg.mu0, cfg.mu1.as_ref().unwrap(), &beta)
        .expect("nonempty window");
    let mid = (window.0 + window.1) / 2.0;
    cfg.lambda = LambdaPolicy::Explicit(mid);

    let report = run_false_alarm_sweep(&cfg).expect("false-alarm sweep");
    for p in &report.points {
        let rate = p.empirical_rate.unwrap();
        let bound = p.bound.unwrap();
        let sigma = p.rate_stderr.unwrap();
        out.check(
            rate <= bound + 3.0 * sigma,
            format!(
                "alpha=2^-{:.0}: rate {:.4} <= bound {:.4} + 3s",
                p.threshold_bits, rate, bound
            ),
        );
    }
    out.details.push(format!(
        "lambda {:.4} in window ({:.4}, {:.4}), log2 beta {:.4}, epsilon0 {:.4}",
        report.lambda, report.window.0, report.window.1, report.log2_beta, report.epsilon0
    ));
    out
}

/// Criterion 7: under the post-change law with an admissible drift rate the
/// rule always terminates within a generous horizon.
pub fn criterion_7_termination(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(7, "termination-under-change");
    let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
    cfg.seed = scale.seed;
    cfg.n0 = scale.delay_n0;
    cfg.delta = 0.003;
    cfg.delta_prime = 0.006;
    cfg.epsilon0_trials = 10;
    cfg.lambda = LambdaPolicy::Explicit(0.1);
    cfg.trials = scale.term_trials;
    cfg.change_point = ChangePoint::At(1);
    cfg.grid = ThresholdGrid::Alphas(vec![(-8.0f64).exp2()]);
    let cal = calibrate(&cfg).expect("calibration");
    cfg.horizon = (50.0 * 8.0 / (cal.d10 - cal.lambda)).ceil() as usize;
    let report = run_delay_sweep(&cfg).expect("delay sweep");
    let p = &report.points[0];
    out.check(
        p.censored_fraction == 0.0,
        format!(
            "censored fraction {} over {} trials (horizon {})",
            p.censored_fraction, p.trials, cfg.horizon
        ),
    );
    out.details
        .push(format!("mean stop {:.1} steps", p.mean_delay.unwrap()));
    out
}

/// Criterion 8: mean stopping time of the auxiliary rule grows linearly in
/// `|log2 alpha|` with the predicted slope.
pub fn criterion_8_delay_slope(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(8, "aux-delay-slope");
    let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
    cfg.seed = scale.seed;
    cfg.n0 = scale.delay_n0;
    cfg.delta = 0.003;
    cfg.delta_prime = 0.006;
    cfg.epsilon0_trials = 10;
    cfg.lambda = LambdaPolicy::Explicit(0.1);
    cfg.trials = scale.delay_trials;
    cfg.change_point = ChangePoint::At(1);
    cfg.grid = ThresholdGrid::Alphas(
        scale
            .delay_alpha_exponents
            .iter()
            .map(|&e| (-(e as f64)).exp2())
            .collect(),
    );
    let cal = calibrate(&cfg).expect("calibration");
    let max_bits = *scale.delay_alpha_exponents.iter().max().unwrap() as f64;
    cfg.horizon = (50.0 * max_bits / (cal.d10 - cal.lambda)).ceil() as usize;
    let report = run_delay_sweep(&cfg).expect("delay sweep");
    let slope = report.slope.expect("slope fit");
    out.check(
        slope.relative_error() <= 0.15,
        format!(
            "slope {:.3} vs 1/(D - lambda) = {:.3} ({:+.1}%)",
            slope.slope,
            slope.theoretical_slope,
            100.0 * (slope.slope / slope.theoretical_slope - 1.0)
        ),
    );
    let censored: f64 = report.points.iter().map(|p| p.censored_fraction).sum();
    out.check(censored == 0.0, "no censoring across the sweep".into());
    // Context for the line above: the same sweep at deeper levels, where the
    // code's start-up cost no longer dwarfs the thresholds. The fitted slope
    // converges to the asymptotic value from above; the configured grid sits
    // inside the transient.
    let deep_lo = *scale.delay_alpha_exponents.iter().max().unwrap();
    cfg.grid = ThresholdGrid::Alphas(
        (deep_lo..=deep_lo + 15)
            .map(|e| (-(e as f64)).exp2())
            .collect(),
    );
    cfg.horizon = (50.0 * (deep_lo as f64 + 15.0) / (cal.d10 - cal.lambda)).ceil() as usize;
    let deep = run_delay_sweep(&cfg).expect("diagnostic sweep");
    if let Some(s) = deep.slope {
        out.details.push(format!(
            "diagnostic: over alpha 2^-{}..2^-{} the slope is {:.3} ({:+.1}%)",
            deep_lo,
            deep_lo + 15,
            s.slope,
            100.0 * (s.slope / s.theoretical_slope - 1.0)
        ));
    }
    out
}

/// Criterion 9: worst-case CUSUM delay slope over four decades of gamma,
/// plus the censored-mean lower bound on the no-change stopping time
/// wherever censoring stays below 50%.
pub fn criterion_9_cusum_slope_and_e0(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(9, "cusum-delay-slope-and-e0");
    let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
    cfg.seed = scale.seed;
    cfg.n0 = scale.lorden_n0;
    cfg.delta = 0.003;
    cfg.delta_prime = 0.006;
    cfg.epsilon0_trials = 10;
    cfg.lambda = LambdaPolicy::Explicit(0.1);
    cfg.grid = ThresholdGrid::Log2Gammas(scale.lorden_log2_gammas.clone());
    cfg.lorden = scale.lorden_settings;
    let cal = calibrate(&cfg).expect("calibration");
    let m_max = *cfg.lorden.change_grid().last().unwrap() as f64;
    let t_max = scale
        .lorden_log2_gammas
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    cfg.horizon =
        (m_max + 8.0 * (t_max + m_max * cal.lambda + 30.0) / (cal.d10 - cal.lambda)).ceil() as usize;
    let report = run_lorden_estimate(&cfg).expect("lorden sweep");
    let slope = report.slope.as_ref().expect("slope fit");
    out.check(
        slope.relative_error() <= 0.20,
        format!(
            "worst-case delay slope {:.3} vs {:.3} ({:+.1}%)",
            slope.slope,
            slope.theoretical_slope,
            100.0 * (slope.slope / slope.theoretical_slope - 1.0)
        ),
    );
    for p in &report.points {
        out.details.push(format!(
            "log2 gamma {:.2}: estimate {:.1} (worst m = {})",
            p.threshold_bits, p.estimate, p.argmax_m
        ));
    }

    // The no-change mean stopping time check, run at small gammas where
    // censoring can stay below 50%.
    let mut e0_cfg = cfg.clone();
    e0_cfg.change_point = ChangePoint::Never;
    e0_cfg.trials = scale.e0_trials;
    e0_cfg.horizon = scale.e0_horizon;
    e0_cfg.epsilon0_trials = scale.epsilon0_trials;
    e0_cfg.grid = ThresholdGrid::Log2Gammas(scale.e0_log2_gammas.clone());
    let e0 = run_e0_check(&e0_cfg).expect("e0 check");
    let mut conclusive = 0usize;
    for p in &e0.points {
        if p.conclusive {
            conclusive += 1;
        }
        out.check(
            p.satisfied,
            format!(
                "E0 at log2 gamma {:.2}: censored mean {:.1} vs bound {:.2} (censored {:.0}%{})",
                p.log2_gamma,
                p.censored_mean,
                p.bound,
                100.0 * p.censored_fraction,
                if p.conclusive { "" } else { ", inconclusive" }
            ),
        );
    }
    out.check(
        conclusive > 0,
        format!("{conclusive} conclusive E0 points"),
    );
    out
}

/// Criterion 10: with the drift rate chosen for slack theta = 0.5 and the
/// class-placing threshold, the measured worst-case delay over the analytic
/// benchmark decreases in gamma and lands in the acceptance band.
pub fn criterion_10_optimality_ratio(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(10, "near-optimality-ratio");
    let mut cfg = ExperimentConfig::new(default_mu0(), Some(default_mu1()));
    cfg.seed = scale.seed;
    cfg.n0 = scale.ratio_n0;
    cfg.delta = 0.001;
    cfg.delta_prime = 0.0025;
    cfg.epsilon0_trials = 10;
    cfg.lambda = LambdaPolicy::Theta(0.5);
    cfg.grid = ThresholdGrid::Log2Gammas(scale.ratio_log2_gammas.clone());
    cfg.lorden = scale.ratio_lorden;
    let cal = calibrate(&cfg).expect("calibration");
    let m_max = *cfg.lorden.change_grid().last().unwrap() as f64;
    let t_max = scale
        .ratio_log2_gammas
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    // Thresholds are eta(gamma) > gamma; size the horizon off the largest.
    cfg.horizon =
        (m_max + 8.0 * (t_max + 10.0 + m_max * cal.lambda + 30.0) / (cal.d10 - cal.lambda)).ceil()
            as usize;
    let report = run_optimality_ratio(&cfg).expect("optimality sweep");
    let ratios: Vec<f64> = report.points.iter().map(|p| p.ratio).collect();
    out.check(
        ratios.windows(2).all(|w| w[1] < w[0]),
        format!(
            "ratio decreasing in gamma: {}",
            ratios
                .iter()
                .map(|r| format!("{r:.3}"))
                .collect::<Vec<_>>()
                .join(" -> ")
        ),
    );
    let last = *ratios.last().unwrap();
    out.check(
        last >= scale.ratio_band.0 && last <= scale.ratio_band.1,
        format!(
            "ratio at largest gamma {:.3} within [{}, {}] (target 1 + theta = {:.1})",
            last,
            scale.ratio_band.0,
            scale.ratio_band.1,
            1.0 + report.theta
        ),
    );
    out
}

/// Random ergodic order-1 binary model with all entries in [0.05, 0.95].
fn random_model(rng: &mut ChaCha12Rng) -> MarkovModel {
    loop {
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                let p: f64 = 0.05 + 0.9 * rng.gen::<f64>();
                vec![p, 1.0 - p]
            })
            .collect();
        if let Ok(m) = MarkovModel::from_rows(&rows) {
            return m;
        }
    }
}

/// Criterion 11: structural oracles. The maintained max-over-starts
/// statistic equals from-scratch recomputation; the start-by-start stopping
/// construction equals the CUSUM stopping time; incremental codec totals
/// equal from-scratch evaluation at every prefix.
pub fn criterion_11_structural(scale: &AcceptanceScale) -> CriterionOutcome {
    let mut out = CriterionOutcome::new(11, "structural-oracles");

    // (a) detector vs brute force.
    let mut worst_ctw = 0.0f64;
    let mut lz_exact = true;
    let mut rng = stream_rng(scale.seed, Domain::Probe, 900);
    let mut paths_ok = true;
    for path_idx in 0..scale.oracle_paths {
        let codec = if path_idx % 2 == 0 {
            CodecSpec::lz78()
        } else {
            CodecSpec::ctw(1 + path_idx % 3)
        };
        let window_penalty = (path_idx / 2) % 2 == 1;
        let model = random_model(&mut rng);
        let data_model = random_model(&mut rng);
        let lambda = 0.05 + 0.25 * rng.gen::<f64>();
        // Training long enough that both pairs are covered almost surely.
        let est = loop {
            let idx = rng.gen::<u64>() & 0xFFFF_FFFF;
            let est = super::fit_streaming(&model, 2_000, scale.seed, Domain::Training, idx)
                .unwrap();
            if est.coverage_check(&model).covered {
                break est;
            }
        };
        let len = 10 + (rng.gen::<usize>() % 31); // <= 40
        let spec = crate::markov::ChangeSpec::never(data_model, 0);
        let x = crate::markov::sample_path(&spec, len, rng.gen());
        let mut det = crate::detect::CusumDetector::new(
            PreLaw::Estimated(&est),
            PostLaw::Universal(codec),
            lambda,
            PrunePolicy::Off,
            window_penalty,
        )
        .unwrap();
        for n in 1..=len {
            det.step(x[n - 1]).unwrap();
            for (start, stat) in det.candidate_stats() {
                let w = &x[start - 1..n];
                let bits = code_length(&codec, est.alphabet(), w);
                let pre = est.seq_log2_prob(w);
                let penalty = if window_penalty { w.len() } else { n } as f64;
                let expect = -bits - pre - penalty * lambda;
                match codec.kind {
                    crate::codes::CodecKind::Lz78 => {
                        if stat != expect {
                            lz_exact = false;
                            paths_ok = false;
                        }
                    }
                    crate::codes::CodecKind::Ctw => {
                        worst_ctw = worst_ctw.max((stat - expect).abs());
                        if (stat - expect).abs() > 1e-9 {
                            paths_ok = false;
                        }
                    }
                }
            }
        }
    }
    out.check(
        paths_ok && lz_exact,
        format!(
            "max-over-starts equals brute force on {} paths (lz78 exact, ctw max gap {:.2e})",
            scale.oracle_paths, worst_ctw
        ),
    );

    // (b) start-by-start construction vs CUSUM stopping time.
    let mu0 = default_mu0();
    let mu1 = default_mu1();
    let est = super::fit_streaming(&mu0, 3_000, scale.seed, Domain::Training, 77).unwrap();
    let mut nstar_ok = 0usize;
    for t in 0..scale.nstar_paths {
        let window_penalty = t % 2 == 1;
        let spec =
            crate::markov::ChangeSpec::new(mu0.clone(), mu1.clone(), ChangePoint::At(30), 0)
                .unwrap();
        let x = crate::markov::sample_path(&spec, 250, scale.seed + 40_000 + t as u64);
        let alpha = 0.05;
        let star = nstar(
            &x,
            PreLaw::Estimated(&est),
            PostLaw::Universal(CodecSpec::ctw(1)),
            0.1,
            alpha,
            window_penalty,
        )
        .unwrap();
        let m = run_cusum(
            PreLaw::Estimated(&est),
            PostLaw::Universal(CodecSpec::ctw(1)),
            0.1,
            PrunePolicy::Off,
            window_penalty,
            Threshold::alpha(alpha),
            x.iter().copied(),
            x.len(),
            false,
        )
        .unwrap();
        if star.stop_time == m.stop_time {
            nstar_ok += 1;
        }
    }
    out.check(
        nstar_ok == scale.nstar_paths,
        format!(
            "start-by-start stop equals CUSUM stop on {nstar_ok}/{} paths",
            scale.nstar_paths
        ),
    );

    // (c) incremental totals vs from-scratch at every prefix.
    let mut inc_ok = true;
    let mut rng = stream_rng(scale.seed, Domain::Probe, 901);
    for i in 0..scale.incremental_seqs {
        let s = 2 + i % 2;
        let alphabet = Alphabet::new(s).unwrap();
        let codec_spec = if i % 2 == 0 {
            CodecSpec::lz78()
        } else {
            CodecSpec::ctw(2)
        };
        let len = 1 + rng.gen::<usize>() % 64;
        let x: Vec<Symbol> = (0..len).map(|_| rng.gen::<usize>() % s).collect();
        let mut codec = CodeLengthModel::new(&codec_spec, alphabet);
        for n in 1..=len {
            let total = codec.extend(x[n - 1]);
            let scratch = code_length(&codec_spec, alphabet, &x[..n]);
            if total != scratch {
                inc_ok = false;
            }
        }
    }
    out.check(
        inc_ok,
        format!(
            "incremental equals from-scratch on {} sequences",
            scale.incremental_seqs
        ),
    );
    out
}

/// Run every criterion in order, annotating each with its wall time.
pub fn run_all(scale: &AcceptanceScale) -> Vec<CriterionOutcome> {
    let runners: [fn(&AcceptanceScale) -> CriterionOutcome; 11] = [
        criterion_1_kraft,
        criterion_2_fixed_sample_exponent,
        criterion_3_convergence,
        criterion_4_estimator_consistency,
        criterion_5_ratio_bound,
        criterion_6_false_alarm,
        criterion_7_termination,
        criterion_8_delay_slope,
        criterion_9_cusum_slope_and_e0,
        criterion_10_optimality_ratio,
        criterion_11_structural,
    ];
    runners
        .into_iter()
        .map(|f| {
            let start = std::time::Instant::now();
            let mut outcome = f(scale);
            outcome
                .details
                .push(format!("{:.1}s", start.elapsed().as_secs_f64()));
            outcome
        })
        .collect()
}
