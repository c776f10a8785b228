//! Command line for the change-detection simulator.
//!
//! Exit codes: 0 on success, 1 when a verification assertion fails, 2 on
//! configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqchange::codes::CodecSpec;
use seqchange::detect::{
    aux_stop_n, lambda_window, run_cusum, run_page, PostLaw, PreLaw, PrunePolicy, Threshold,
};
use seqchange::estimate::{beta_bound, divergence_from_estimate, EmpiricalMarkovEstimate};
use seqchange::experiments::acceptance::{run_all, AcceptanceScale};
use seqchange::experiments::{
    run_delay_sweep, run_e0_check, run_false_alarm_sweep, run_lorden_estimate,
    run_optimality_ratio, ExperimentConfig, LambdaPolicy, LordenSettings, ThresholdGrid,
};
use seqchange::io;
use seqchange::markov::{sample_path, ChangePoint, ChangeSpec, MarkovModel};

#[derive(Parser)]
#[command(
    name = "seqchange",
    about = "Sequential change detection for Markov sources with unknown pre- and post-change laws",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a change-point path and write it as one symbol per line.
    Simulate(SimulateArgs),
    /// Run one detector over a path file.
    Detect(DetectArgs),
    /// Run a Monte Carlo sweep and write CSV + metadata into a directory.
    Sweep(SweepArgs),
    /// Run the verification suite (exit 1 if any criterion fails).
    Verify(VerifyArgs),
    /// Report entropies, divergences, and the admissible drift window.
    Info(InfoArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    mu0: PathBuf,
    #[arg(long)]
    mu1: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    n0: usize,
    /// Change point m (>= 1) or `never`.
    #[arg(long, default_value = "never", value_parser = parse_change_point)]
    change_point: ChangePoint,
    #[arg(long)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Path file: one symbol index per line.
    #[arg(long)]
    path: PathBuf,
    /// Training prefix length used to fit the pre-change estimate.
    #[arg(long, default_value_t = 0)]
    n0: usize,
    /// Inferred as (max symbol + 1) when omitted.
    #[arg(long)]
    alphabet_size: Option<usize>,
    #[arg(long, default_value = "proposed")]
    detector: String,
    #[arg(long, default_value = "ctw")]
    codec: String,
    #[arg(long, default_value_t = 1)]
    ctw_depth: i64,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// CUSUM threshold gamma (> 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Run the single-start auxiliary rule at this level in (0, 1] instead
    /// of the CUSUM rule.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value = "off", value_parser = PrunePolicy::parse)]
    prune: PrunePolicy,
    #[arg(long)]
    window_penalty: bool,
    /// Known pre-change model (jb and page detectors).
    #[arg(long)]
    mu0: Option<PathBuf>,
    /// Known post-change model (page detector).
    #[arg(long)]
    mu1: Option<PathBuf>,
    /// Write the per-step trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Fit the estimate with add-1/2 smoothing (exploratory; the analytic
    /// bounds assume the unsmoothed estimate).
    #[arg(long)]
    smooth: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// false-alarm | delay | lorden | e0 | ratio
    #[arg(long)]
    mode: String,
    #[arg(long)]
    mu0: PathBuf,
    #[arg(long)]
    mu1: PathBuf,
    #[arg(long)]
    n0: usize,
    #[arg(long, default_value = "ctw")]
    codec: String,
    #[arg(long, default_value_t = 1)]
    ctw_depth: i64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value = "1", value_parser = parse_change_point)]
    change_point: ChangePoint,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    delta: f64,
    #[arg(long, default_value_t = 0.015)]
    delta_prime: f64,
    #[arg(long, default_value_t = 200)]
    epsilon0_trials: usize,
    #[arg(long, default_value = "off", value_parser = PrunePolicy::parse)]
    prune: PrunePolicy,
    #[arg(long)]
    window_penalty: bool,
    #[arg(long, default_value_t = 200)]
    lorden_window: usize,
    #[arg(long, default_value_t = 32)]
    lorden_prefixes: usize,
    #[arg(long, default_value_t = 8)]
    lorden_trials: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run the reduced smoke profile instead of the full acceptance sizes.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    mu0: PathBuf,
    #[arg(long)]
    mu1: PathBuf,
    /// Also fit an estimate on a seeded training prefix of this length and
    /// report the estimated window.
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.005)]
    delta: f64,
    #[arg(long, default_value_t = 0.015)]
    delta_prime: f64,
}

fn parse_change_point(text: &str) -> Result<ChangePoint, String> {
    if text == "never" {
        return Ok(ChangePoint::Never);
    }
    let m: usize = text
        .parse()
        .map_err(|e| format!("change point must be a positive integer or `never`: {e}"))?;
    if m == 0 {
        return Err("change point must be at least 1".into());
    }
    Ok(ChangePoint::At(m))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Detect(args) => detect(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify(args) => verify(args),
        Command::Info(args) => info(args),
    }
}

fn load(path: &Path) -> Result<MarkovModel, String> {
    io::load_model(path).map_err(|e| e.to_string())
}

fn simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let mu0 = load(&args.mu0)?;
    let spec = match (&args.mu1, args.change_point) {
        (None, ChangePoint::Never) => ChangeSpec::never(mu0, args.n0),
        (None, ChangePoint::At(_)) => {
            return Err("a finite change point needs --mu1".into());
        }
        (Some(p), cp) => {
            let mu1 = load(p)?;
            ChangeSpec::new(mu0, mu1, cp, args.n0).map_err(|e| e.to_string())?
        }
    };
    let x = sample_path(&spec, args.length, args.seed);
    io::write_path_file(&x, &args.out).map_err(|e| e.to_string())?;
    println!(
        "wrote {} symbols to {} (change point: {}, n0 = {})",
        x.len(),
        args.out.display(),
        match args.change_point {
            ChangePoint::Never => "never".to_string(),
            ChangePoint::At(m) => m.to_string(),
        },
        args.n0
    );
    Ok(ExitCode::SUCCESS)
}

fn detect(args: DetectArgs) -> Result<ExitCode, String> {
    let x = io::read_path_file(&args.path).map_err(|e| e.to_string())?;
    if x.len() <= args.n0 {
        return Err(format!(
            "path has {} symbols, not more than n0 = {}",
            x.len(),
            args.n0
        ));
    }
    // --gamma runs the max-over-starts CUSUM rule; --alpha runs the
    // single-start auxiliary rule at level alpha.
    let (threshold, single_start_alpha) = match (args.gamma, args.alpha) {
        (Some(g), None) if g > 1.0 => (Threshold::gamma(g), None),
        (None, Some(a)) if a > 0.0 && a <= 1.0 => (Threshold::alpha(a), Some(a)),
        _ => return Err("give exactly one of --gamma (> 1) or --alpha (in (0, 1])".into()),
    };
    let codec = CodecSpec::parse(&args.codec, args.ctw_depth).map_err(|e| e.to_string())?;
    let test = &x[args.n0..];
    let horizon = test.len();

    let result = match args.detector.as_str() {
        "page" => {
            let mu0 = load(args.mu0.as_ref().ok_or("page needs --mu0")?)?;
            let mu1 = load(args.mu1.as_ref().ok_or("page needs --mu1")?)?;
            run_page(
                &mu0,
                &mu1,
                threshold,
                test.iter().copied(),
                horizon,
                args.trace.is_some(),
            )
            .map_err(|e| e.to_string())?
        }
        "jb" => {
            let mu0 = load(args.mu0.as_ref().ok_or("jb needs --mu0")?)?;
            match single_start_alpha {
                Some(alpha) => aux_stop_n(
                    PreLaw::Known(&mu0),
                    PostLaw::Universal(codec),
                    args.lambda,
                    alpha,
                    test.iter().copied(),
                    horizon,
                    args.trace.is_some(),
                )
                .map_err(|e| e.to_string())?,
                None => run_cusum(
                    PreLaw::Known(&mu0),
                    PostLaw::Universal(codec),
                    args.lambda,
                    args.prune,
                    args.window_penalty,
                    threshold,
                    test.iter().copied(),
                    horizon,
                    args.trace.is_some(),
                )
                .map_err(|e| e.to_string())?,
            }
        }
        "proposed" => {
            let size = args
                .alphabet_size
                .unwrap_or_else(|| x.iter().max().map_or(2, |&m| (m + 1).max(2)));
            let alphabet =
                seqchange::markov::Alphabet::new(size).map_err(|e| e.to_string())?;
            let est = if args.smooth {
                EmpiricalMarkovEstimate::fit_smoothed(alphabet, &x[..args.n0])
            } else {
                EmpiricalMarkovEstimate::fit(alphabet, &x[..args.n0])
            }
            .map_err(|e| e.to_string())?;
            match single_start_alpha {
                Some(alpha) => aux_stop_n(
                    PreLaw::Estimated(&est),
                    PostLaw::Universal(codec),
                    args.lambda,
                    alpha,
                    test.iter().copied(),
                    horizon,
                    args.trace.is_some(),
                )
                .map_err(|e| e.to_string())?,
                None => run_cusum(
                    PreLaw::Estimated(&est),
                    PostLaw::Universal(codec),
                    args.lambda,
                    args.prune,
                    args.window_penalty,
                    threshold,
                    test.iter().copied(),
                    horizon,
                    args.trace.is_some(),
                )
                .map_err(|e| e.to_string())?,
            }
        }
        other => return Err(format!("unknown detector `{other}`")),
    };

    match result.stop_time {
        Some(n) => println!(
            "stopped at n = {n} (statistic {:.4}, start {}{})",
            result.statistic_at_stop,
            result
                .argmax_start
                .map_or("-".to_string(), |k| k.to_string()),
            if result.uncovered_alarm {
                ", uncovered-transition alarm"
            } else {
                ""
            }
        ),
        None => println!("censored at horizon {horizon} (no alarm)"),
    }
    if let (Some(tp), Some(trace)) = (&args.trace, &result.trace) {
        std::fs::write(tp, io::trace_csv(trace)).map_err(|e| e.to_string())?;
        println!("trace written to {}", tp.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(args: SweepArgs) -> Result<ExitCode, String> {
    let mu0 = load(&args.mu0)?;
    let mu1 = load(&args.mu1)?;
    let codec = CodecSpec::parse(&args.codec, args.ctw_depth).map_err(|e| e.to_string())?;
    let lambda = match (args.lambda, args.theta) {
        (Some(l), None) => LambdaPolicy::Explicit(l),
        (None, Some(t)) => LambdaPolicy::Theta(t),
        _ => return Err("give exactly one of --lambda or --theta".into()),
    };
    let grid = match (&args.alphas, &args.gammas) {
        (Some(a), None) => ThresholdGrid::Alphas(a.clone()),
        (None, Some(g)) => {
            if g.iter().any(|&x| x.is_nan() || x <= 1.0) {
                return Err("gamma values must exceed 1".into());
            }
            ThresholdGrid::Log2Gammas(g.iter().map(|x| x.log2()).collect())
        }
        _ => return Err("give exactly one of --alphas or --gammas".into()),
    };
    let mut cfg = ExperimentConfig::new(mu0, Some(mu1));
    cfg.n0 = args.n0;
    cfg.codec = codec;
    cfg.lambda = lambda;
    cfg.grid = grid;
    cfg.trials = args.trials;
    cfg.horizon = args.horizon;
    cfg.change_point = args.change_point;
    cfg.seed = args.seed;
    cfg.delta = args.delta;
    cfg.delta_prime = args.delta_prime;
    cfg.epsilon0_trials = args.epsilon0_trials;
    cfg.prune = args.prune;
    cfg.window_penalty = args.window_penalty;
    cfg.lorden = LordenSettings {
        window: args.lorden_window,
        prefixes_per_point: args.lorden_prefixes,
        trials_per_prefix: args.lorden_trials,
    };
    cfg.validate().map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    let write = |name: &str, text: String| -> Result<(), String> {
        std::fs::write(args.out.join(name), text).map_err(|e| e.to_string())
    };

    match args.mode.as_str() {
        "false-alarm" => {
            let report = run_false_alarm_sweep(&cfg).map_err(|e| e.to_string())?;
            write("sweep.csv", io::sweep_points_csv(&report))?;
            write("trials.csv", io::sweep_trials_csv(&report))?;
            write("metadata.toml", io::metadata_toml(&cfg, &report))?;
            for p in &report.points {
                println!(
                    "alpha {:.3e}: empirical {:.4} +- {:.4}, bound {:.4}",
                    p.alpha.unwrap(),
                    p.empirical_rate.unwrap(),
                    p.rate_stderr.unwrap(),
                    p.bound.unwrap()
                );
            }
        }
        "delay" => {
            let report = run_delay_sweep(&cfg).map_err(|e| e.to_string())?;
            write("sweep.csv", io::sweep_points_csv(&report))?;
            write("trials.csv", io::sweep_trials_csv(&report))?;
            write("metadata.toml", io::metadata_toml(&cfg, &report))?;
            for p in &report.points {
                println!(
                    "threshold {:.2} bits: mean delay {:.2} +- {:.2} (censored {:.1}%)",
                    p.threshold_bits,
                    p.mean_delay.unwrap_or(f64::NAN),
                    p.delay_stderr.unwrap_or(f64::NAN),
                    100.0 * p.censored_fraction
                );
            }
            if let Some(s) = &report.slope {
                println!(
                    "fitted slope {:.3} vs theoretical {:.3}",
                    s.slope, s.theoretical_slope
                );
            }
        }
        "lorden" => {
            let report = run_lorden_estimate(&cfg).map_err(|e| e.to_string())?;
            write("lorden.csv", io::lorden_csv(&report))?;
            write(
                "metadata.toml",
                io::metadata_from_parts(
                    &cfg,
                    report.lambda,
                    report.log2_beta,
                    report.epsilon0,
                    report.d00,
                    report.d10,
                    report.d_true,
                    report.window,
                ),
            )?;
            for p in &report.points {
                println!(
                    "log2 gamma {:.2}: worst-case delay {:.1} +- {:.1} (worst m = {})",
                    p.threshold_bits, p.estimate, p.stderr, p.argmax_m
                );
            }
            if let Some(s) = &report.slope {
                println!(
                    "fitted slope {:.3} vs theoretical {:.3}",
                    s.slope, s.theoretical_slope
                );
            }
        }
        "e0" => {
            let report = run_e0_check(&cfg).map_err(|e| e.to_string())?;
            write("e0.csv", io::e0_csv(&report))?;
            write(
                "metadata.toml",
                io::metadata_from_parts(
                    &cfg,
                    report.lambda,
                    report.log2_beta,
                    report.epsilon0,
                    report.d00,
                    report.d10,
                    report.d_true,
                    report.window,
                ),
            )?;
            for p in &report.points {
                println!(
                    "log2 gamma {:.2}: censored mean {:.1} (censored {:.0}%), bound {:.2}{}",
                    p.log2_gamma,
                    p.censored_mean,
                    100.0 * p.censored_fraction,
                    p.bound,
                    if p.conclusive { "" } else { " [inconclusive]" }
                );
            }
        }
        "ratio" => {
            let report = run_optimality_ratio(&cfg).map_err(|e| e.to_string())?;
            write("ratio.csv", io::ratio_csv(&report))?;
            write(
                "metadata.toml",
                io::metadata_from_parts(
                    &cfg,
                    report.lambda,
                    report.log2_beta,
                    report.epsilon0,
                    report.d00,
                    report.d10,
                    report.d_true,
                    report.window,
                ),
            )?;
            for p in &report.points {
                println!(
                    "log2 gamma {:.1}: delay {:.1} / benchmark {:.1} = ratio {:.3}",
                    p.log2_gamma, p.lorden_delay, p.benchmark, p.ratio
                );
            }
        }
        other => return Err(format!("unknown sweep mode `{other}`")),
    }
    println!("results written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let mut scale = if args.quick {
        AcceptanceScale::quick()
    } else {
        AcceptanceScale::full()
    };
    if let Some(seed) = args.seed {
        scale.seed = seed;
    }
    let outcomes = run_all(&scale);
    let mut failed = 0;
    for o in &outcomes {
        println!("{o}");
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        Ok(ExitCode::from(1))
    } else {
        println!("all {} criteria passed", outcomes.len());
        Ok(ExitCode::SUCCESS)
    }
}

fn info(args: InfoArgs) -> Result<ExitCode, String> {
    let mu0 = load(&args.mu0)?;
    let mu1 = load(&args.mu1)?;
    println!(
        "alphabet {} symbols, order {}",
        mu0.alphabet().size(),
        mu0.order()
    );
    println!("H(mu0) = {:.6} bits/symbol", mu0.entropy_rate());
    println!("H(mu1) = {:.6} bits/symbol", mu1.entropy_rate());
    let d10 = mu1.divergence_rate(&mu0).map_err(|e| e.to_string())?;
    let d01 = mu0.divergence_rate(&mu1).map_err(|e| e.to_string())?;
    println!("D(mu1 || mu0) = {d10:.6} bits/symbol");
    println!("D(mu0 || mu1) = {d01:.6} bits/symbol");
    if d10 > 0.0 {
        println!("known-model drift window: (0, {d10:.6})");
    } else {
        println!("known-model drift window: empty (D(mu1 || mu0) = 0)");
    }
    if let Some(n0) = args.n0 {
        let est = seqchange::experiments::fit_streaming(
            &mu0,
            n0,
            args.seed,
            seqchange::rng::Domain::Calibration,
            0,
        )
        .map_err(|e| e.to_string())?;
        let coverage = est.coverage_check(&mu0);
        println!(
            "estimate fitted on n0 = {n0} (seed {}): coverage {}",
            args.seed,
            if coverage.covered {
                "complete".to_string()
            } else {
                format!(
                    "missing {} symbols, {} pairs",
                    coverage.missing_symbols.len(),
                    coverage.missing_pairs.len()
                )
            }
        );
        let d00e = divergence_from_estimate(&mu0, &est).map_err(|e| e.to_string())?;
        let d10e = divergence_from_estimate(&mu1, &est).map_err(|e| e.to_string())?;
        println!("D(mu0 || mu_hat) = {d00e:.6}");
        println!("D(mu1 || mu_hat) = {d10e:.6}");
        let beta =
            beta_bound(&mu0, args.delta, args.delta_prime).map_err(|e| e.to_string())?;
        println!(
            "beta({}, {}) = {:.6} (log2 beta = {:.6})",
            args.delta, args.delta_prime, beta.beta, beta.log2_beta
        );
        match lambda_window(&est, &mu0, &mu1, &beta) {
            Ok((lo, hi)) => println!("estimated drift window: ({lo:.6}, {hi:.6})"),
            Err(e) => println!("estimated drift window: {e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}
