//! File formats: model and estimate files (structured key-value text),
//! path files (one symbol index per line), CSV exports with a header row
//! naming every column, and the sidecar metadata file that makes a sweep
//! reproducible (config hash, seed, derived constants).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::detect::TraceRow;
use crate::estimate::{EmpiricalMarkovEstimate, EstimateError};
use crate::experiments::{
    E0Report, ExperimentConfig, LambdaPolicy, LordenReport, RatioReport, SweepReport,
    ThresholdGrid,
};
use crate::markov::{Alphabet, ChangePoint, MarkovError, MarkovModel, Symbol};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] MarkovError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    alphabet_size: usize,
    #[serde(default = "default_order")]
    order: usize,
    /// Row-major transition probabilities, one row per context.
    rows: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_law: Option<Vec<f64>>,
}

fn default_order() -> usize {
    1
}

/// Parse a model from its structured text form. Validation failures name
/// the offending row.
pub fn parse_model(text: &str) -> Result<MarkovModel, IoError> {
    let file: ModelFile = toml::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let alphabet = Alphabet::new(file.alphabet_size)?;
    match file.initial_law {
        Some(law) => Ok(MarkovModel::with_initial_law(
            alphabet, file.order, file.rows, law,
        )?),
        None => Ok(MarkovModel::new(alphabet, file.order, file.rows)?),
    }
}

pub fn render_model(model: &MarkovModel) -> String {
    let s = model.alphabet().size();
    let rows: Vec<f64> = (0..model.n_contexts())
        .flat_map(|c| (0..s).map(move |a| model.transition(c, a)))
        .collect();
    let file = ModelFile {
        alphabet_size: s,
        order: model.order(),
        rows,
        initial_law: None,
    };
    toml::to_string(&file).expect("model serializes")
}

pub fn load_model(path: &Path) -> Result<MarkovModel, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    parse_model(&text)
}

pub fn save_model(model: &MarkovModel, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, render_model(model)).map_err(|e| file_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateFile {
    alphabet_size: usize,
    #[serde(default)]
    smoothed: bool,
    counts: CountsSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountsSection {
    symbols: Vec<u64>,
    pairs: Vec<u64>,
}

/// Estimates round-trip through their integer counts, so the derived
/// conditionals reload bit-exactly.
pub fn parse_estimate(text: &str) -> Result<EmpiricalMarkovEstimate, IoError> {
    let file: EstimateFile = toml::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let alphabet = Alphabet::new(file.alphabet_size)?;
    Ok(if file.smoothed {
        EmpiricalMarkovEstimate::from_counts_smoothed(alphabet, file.counts.symbols, file.counts.pairs)?
    } else {
        EmpiricalMarkovEstimate::from_counts(alphabet, file.counts.symbols, file.counts.pairs)?
    })
}

pub fn render_estimate(est: &EmpiricalMarkovEstimate) -> String {
    let file = EstimateFile {
        alphabet_size: est.alphabet().size(),
        smoothed: est.is_smoothed(),
        counts: CountsSection {
            symbols: est.symbol_counts().to_vec(),
            pairs: est.pair_counts().to_vec(),
        },
    };
    toml::to_string(&file).expect("estimate serializes")
}

pub fn load_estimate(path: &Path) -> Result<EmpiricalMarkovEstimate, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    parse_estimate(&text)
}

pub fn save_estimate(est: &EmpiricalMarkovEstimate, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, render_estimate(est)).map_err(|e| file_err(path, e))
}

/// Read a path file: one symbol index per non-empty line.
pub fn read_path_file(path: &Path) -> Result<Vec<Symbol>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let sym: usize = line
            .parse()
            .map_err(|e| IoError::Parse(format!("line {}: `{line}`: {e}", i + 1)))?;
        out.push(sym);
    }
    Ok(out)
}

pub fn write_path_file(symbols: &[Symbol], path: &Path) -> Result<(), IoError> {
    let mut text = String::with_capacity(symbols.len() * 2);
    for &s in symbols {
        let _ = writeln!(text, "{s}");
    }
    std::fs::write(path, text).map_err(|e| file_err(path, e))
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-point CSV of a false-alarm or delay sweep.
pub fn sweep_points_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "threshold_bits,alpha,trials,empirical_rate,rate_stderr,bound,mean_delay,delay_stderr,censored_fraction\n",
    );
    for p in &report.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.threshold_bits,
            opt_f(p.alpha),
            p.trials,
            opt_f(p.empirical_rate),
            opt_f(p.rate_stderr),
            opt_f(p.bound),
            opt_f(p.mean_delay),
            opt_f(p.delay_stderr),
            p.censored_fraction
        );
    }
    out
}

/// Per-trial CSV of a sweep (one block of rows per threshold).
pub fn sweep_trials_csv(report: &SweepReport) -> String {
    let mut out = String::from("threshold_bits,trial,seed_index,stop_time,change_point,delay\n");
    for (p, rows) in report.points.iter().zip(&report.trials) {
        for r in rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.threshold_bits,
                r.trial,
                r.seed_index,
                opt_u(r.stop_time),
                opt_u(r.change_point),
                opt_u(r.delay)
            );
        }
    }
    out
}

pub fn lorden_csv(report: &LordenReport) -> String {
    let mut out =
        String::from("threshold_bits,m,mean_delay,stderr,censored_fraction,samples,is_worst\n");
    for p in &report.points {
        for mp in &p.per_m {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.threshold_bits,
                mp.m,
                mp.mean_delay,
                mp.stderr,
                mp.censored_fraction,
                mp.samples,
                mp.m == p.argmax_m
            );
        }
    }
    out
}

pub fn e0_csv(report: &E0Report) -> String {
    let mut out =
        String::from("log2_gamma,censored_mean,censored_fraction,bound,conclusive,satisfied\n");
    for p in &report.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.log2_gamma, p.censored_mean, p.censored_fraction, p.bound, p.conclusive, p.satisfied
        );
    }
    out
}

pub fn ratio_csv(report: &RatioReport) -> String {
    let mut out =
        String::from("log2_gamma,log2_eta,lorden_delay,lorden_stderr,benchmark,ratio\n");
    for p in &report.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.log2_gamma, p.log2_eta, p.lorden_delay, p.lorden_stderr, p.benchmark, p.ratio
        );
    }
    out
}

/// Detector trace export.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("n,max_statistic,argmax_start,n_active_starts,stopped\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n, r.max_statistic, r.argmax_start, r.n_active_starts, r.stopped
        );
    }
    out
}

#[derive(Debug, Serialize)]
struct MetadataFile<'a> {
    config_sha256: String,
    seed: u64,
    n0: usize,
    codec: String,
    trials: usize,
    horizon: usize,
    change_point: String,
    delta: f64,
    delta_prime: f64,
    window_penalty: bool,
    grid: &'a ThresholdGrid,
    derived: DerivedSection,
}

#[derive(Debug, Serialize)]
struct DerivedSection {
    lambda: f64,
    log2_beta: f64,
    epsilon0: f64,
    d00: f64,
    d10: f64,
    d_true: f64,
    window_lower: f64,
    window_upper: f64,
}

/// Canonical description of a configuration (hash input and audit record).
pub fn describe_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mu0:\n{}", render_model(&cfg.mu0));
    if let Some(mu1) = &cfg.mu1 {
        let _ = writeln!(s, "mu1:\n{}", render_model(mu1));
    }
    let _ = writeln!(s, "n0 = {}", cfg.n0);
    let _ = writeln!(s, "codec = {} depth {}", cfg.codec.kind, cfg.codec.ctw_depth);
    let _ = writeln!(
        s,
        "lambda = {}",
        match cfg.lambda {
            LambdaPolicy::Explicit(l) => format!("explicit {l}"),
            LambdaPolicy::Theta(t) => format!("theta {t}"),
        }
    );
    let _ = writeln!(s, "grid = {:?}", cfg.grid);
    let _ = writeln!(s, "trials = {}", cfg.trials);
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "change_point = {:?}", cfg.change_point);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "delta = {} delta_prime = {}", cfg.delta, cfg.delta_prime);
    let _ = writeln!(s, "epsilon0_trials = {}", cfg.epsilon0_trials);
    let _ = writeln!(s, "prune = {:?}", cfg.prune);
    let _ = writeln!(s, "window_penalty = {}", cfg.window_penalty);
    let _ = writeln!(s, "lorden = {:?}", cfg.lorden);
    s
}

/// The sidecar metadata for a sweep output directory.
pub fn metadata_toml(cfg: &ExperimentConfig, report: &SweepReport) -> String {
    metadata_from_parts(
        cfg,
        report.lambda,
        report.log2_beta,
        report.epsilon0,
        report.d00,
        report.d10,
        report.d_true,
        report.window,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn metadata_from_parts(
    cfg: &ExperimentConfig,
    lambda: f64,
    log2_beta: f64,
    epsilon0: f64,
    d00: f64,
    d10: f64,
    d_true: f64,
    window: (f64, f64),
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(describe_config(cfg).as_bytes());
    let hash = hasher.finalize();
    let file = MetadataFile {
        config_sha256: hash.iter().map(|b| format!("{b:02x}")).collect(),
        seed: cfg.seed,
        n0: cfg.n0,
        codec: format!("{} depth {}", cfg.codec.kind, cfg.codec.ctw_depth),
        trials: cfg.trials,
        horizon: cfg.horizon,
        change_point: match cfg.change_point {
            ChangePoint::Never => "never".into(),
            ChangePoint::At(m) => m.to_string(),
        },
        delta: cfg.delta,
        delta_prime: cfg.delta_prime,
        window_penalty: cfg.window_penalty,
        grid: &cfg.grid,
        derived: DerivedSection {
            lambda,
            log2_beta,
            epsilon0,
            d00,
            d10,
            d_true,
            window_lower: window.0,
            window_upper: window.1,
        },
    };
    toml::to_string(&file).expect("metadata serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_round_trip() {
        let m = crate::experiments::default_mu0();
        let text = render_model(&m);
        let back = parse_model(&text).unwrap();
        assert_eq!(back.alphabet().size(), 2);
        assert_eq!(back.transition(0, 0), m.transition(0, 0));
        assert_eq!(back.stationary_law(), m.stationary_law());
    }

    #[test]
    fn model_parse_names_offending_row() {
        let text = "alphabet_size = 2\nrows = [0.9, 0.1, 0.3, 0.8]\n";
        let err = parse_model(text).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
    }

    #[test]
    fn model_parse_rejects_bad_toml() {
        assert!(parse_model("alphabet_size = [").is_err());
    }

    #[test]
    fn estimate_round_trip_is_exact() {
        let est = crate::estimate::EmpiricalMarkovEstimate::fit(
            Alphabet::new(2).unwrap(),
            &[0, 1, 0, 0, 1, 1, 0, 1, 0],
        )
        .unwrap();
        let back = parse_estimate(&render_estimate(&est)).unwrap();
        assert_eq!(est, back);
    }

    #[test]
    fn smoothed_estimates_round_trip_with_their_flag() {
        let est = crate::estimate::EmpiricalMarkovEstimate::fit_smoothed(
            Alphabet::new(2).unwrap(),
            &[0, 0, 1, 0],
        )
        .unwrap();
        let back = parse_estimate(&render_estimate(&est)).unwrap();
        assert_eq!(est, back);
        assert!(back.is_smoothed());
    }

    #[test]
    fn path_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("path.txt");
        write_path_file(&[0, 1, 2, 1, 0], &p).unwrap();
        assert_eq!(read_path_file(&p).unwrap(), vec![0, 1, 2, 1, 0]);
    }

    #[test]
    fn path_file_reports_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("path.txt");
        std::fs::write(&p, "0\n1\nx\n").unwrap();
        let err = read_path_file(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
