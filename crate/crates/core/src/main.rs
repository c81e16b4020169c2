//! Experiment CLI: reproducible runs of the covariance builder, the band
//! sampler, the Monte Carlo F̄₂ estimator, the spectral limit formula,
//! and the transfer-kernel diagnostics.
//!
//! Every run is fully determined by its config (flags, or a flat JSON
//! file via --config with flags overriding file values). CSV payloads
//! are deterministic; wall-clock data lives in the run record.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use rbm_lab::charpoly::{crossover_experiment, estimate_fbar, EnergyWindow};
use rbm_lab::covariance::{build_covariance, LatticeSpec};
use rbm_lab::diagnostics::diagnostics_report;
use rbm_lab::ensemble::{stream_rng, RbmSampler, RngStreamPolicy, SeedRecord};
use rbm_lab::error::RbmError;
use rbm_lab::report::{
    format_compare_csv, format_covariance_csv, format_estimates_csv, format_kstar_csv,
    format_limit_csv, format_scan_csv, write_samples_binary, RunRecord,
};
use rbm_lab::sphere::{funk_hecke_eigs, limit_formula};

const EXIT_USAGE: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rbm-lab", version, about = "Random band matrix laboratory")]
struct Cli {
    /// Master seed for all RNG streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of independent RNG streams (also the parallel grain).
    #[arg(long, global = true)]
    streams: Option<usize>,

    /// Output path prefix; omit to print CSV to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the covariance profile J = (-W²Δ+1)⁻¹ and emit it as CSV.
    Covariance(CovarianceArgs),
    /// Draw Hermitian band-matrix samples into a binary file.
    Sample(SampleArgs),
    /// Monte Carlo estimate of F̄₂ over a ξ grid.
    McF2(McF2Args),
    /// Evaluate the crossover limit formula over a ξ list.
    Limit(LimitArgs),
    /// Funk–Hecke spectrum of the zonal transfer kernel.
    KstarSpectrum(KstarArgs),
    /// Log-spaced C_* scan of the limit formula at fixed ξ.
    CrossoverScan(ScanArgs),
    /// Headline comparison: MC estimate vs limit formula at n = C_* W².
    Compare(CompareArgs),
    /// Saddle data, |𝓕| residuals, and A-kernel leading eigenvalue.
    Diagnostics(DiagnosticsArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct CovarianceArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct SampleArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct McF2Args {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    e: Option<f64>,
    /// Comma-separated ξ values.
    #[arg(long, value_delimiter = ',')]
    xi: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct LimitArgs {
    #[arg(long)]
    cstar: Option<f64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long = "xi-list", value_delimiter = ',')]
    xi_list: Option<Vec<f64>>,
    /// Initial basis order (doubled internally until converged).
    #[arg(long = "L")]
    l: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct KstarArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    jmax: Option<usize>,
    #[arg(long = "quad-order")]
    quad_order: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct ScanArgs {
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long = "cstar-min")]
    cstar_min: Option<f64>,
    #[arg(long = "cstar-max")]
    cstar_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct CompareArgs {
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    cstar: Option<f64>,
    #[arg(long)]
    e: Option<f64>,
    #[arg(long = "xi-list", value_delimiter = ',')]
    xi_list: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
struct DiagnosticsArgs {
    #[arg(long)]
    e: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
}

/// Flat JSON config: {"mode": "...", "seed": ..., "streams": ..., other
/// mode fields}. Flags override any field.
#[derive(Debug, Serialize, Deserialize)]
struct FileConfig {
    mode: String,
    seed: Option<u64>,
    streams: Option<usize>,
    #[serde(flatten)]
    rest: serde_json::Value,
}

struct Settings {
    seed: u64,
    streams: usize,
    out: Option<PathBuf>,
}

fn usage_err(msg: impl Into<String>) -> RbmError {
    RbmError::InvalidArgument(msg.into())
}

fn pick<T: Clone>(flag: &Option<T>, file: Option<T>, name: &str) -> Result<T, RbmError> {
    flag.clone()
        .or(file)
        .ok_or_else(|| usage_err(format!("missing required parameter `{name}`")))
}

fn file_field<T: serde::de::DeserializeOwned>(rest: &serde_json::Value, key: &str) -> Option<T> {
    rest.get(key).and_then(|v| serde_json::from_value(v.clone()).ok())
}

fn main() {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("RBM_LAB_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    }

    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            let (code, kind) = match &err {
                RbmError::InvalidArgument(_) | RbmError::DomainError(_) => (EXIT_USAGE, "usage"),
                _ => (EXIT_NUMERICAL, "numerical"),
            };
            let payload = serde_json::json!({ "error": err.to_string(), "kind": kind });
            eprintln!("{payload}");
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> Result<(), RbmError> {
    let file: Option<FileConfig> = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let cfg: FileConfig = serde_json::from_str(&text)
                .map_err(|e| usage_err(format!("bad config file: {e}")))?;
            Some(cfg)
        }
        None => None,
    };
    let mode_name = match &cli.command {
        Command::Covariance(_) => "covariance",
        Command::Sample(_) => "sample",
        Command::McF2(_) => "mc-f2",
        Command::Limit(_) => "limit",
        Command::KstarSpectrum(_) => "kstar-spectrum",
        Command::CrossoverScan(_) => "crossover-scan",
        Command::Compare(_) => "compare",
        Command::Diagnostics(_) => "diagnostics",
    };
    if let Some(cfg) = &file {
        if cfg.mode != mode_name {
            return Err(usage_err(format!(
                "config file mode `{}` does not match subcommand `{mode_name}`",
                cfg.mode
            )));
        }
    }
    let rest = file
        .as_ref()
        .map(|c| c.rest.clone())
        .unwrap_or(serde_json::Value::Null);
    let settings = Settings {
        seed: cli.seed.or(file.as_ref().and_then(|c| c.seed)).unwrap_or(0),
        streams: cli.streams.or(file.as_ref().and_then(|c| c.streams)).unwrap_or(8),
        out: cli.out.clone(),
    };
    if settings.streams == 0 {
        return Err(usage_err("--streams must be >= 1"));
    }

    let start = Instant::now();
    match &cli.command {
        Command::Covariance(args) => cmd_covariance(args, &rest, &settings, start),
        Command::Sample(args) => cmd_sample(args, &rest, &settings, start),
        Command::McF2(args) => cmd_mc_f2(args, &rest, &settings, start),
        Command::Limit(args) => cmd_limit(args, &rest, &settings, start),
        Command::KstarSpectrum(args) => cmd_kstar(args, &rest, &settings, start),
        Command::CrossoverScan(args) => cmd_scan(args, &rest, &settings, start),
        Command::Compare(args) => cmd_compare(args, &rest, &settings, start),
        Command::Diagnostics(args) => cmd_diagnostics(args, &rest, &settings, start),
    }
}

/// Emit CSV payload plus run record: files under the prefix when --out is
/// given, stdout/stderr otherwise.
fn emit(
    settings: &Settings,
    start: Instant,
    mut record: RunRecord,
    csv_ext: &str,
    csv: &str,
    sidecar: Option<(&str, String)>,
) -> Result<(), RbmError> {
    record.duration_secs = start.elapsed().as_secs_f64();
    match &settings.out {
        Some(prefix) => {
            let csv_path = prefix.with_extension(csv_ext);
            std::fs::write(&csv_path, csv)?;
            record.add_output(&csv_path, csv.as_bytes());
            if let Some((ext, payload)) = &sidecar {
                let side_path = prefix.with_extension(*ext);
                std::fs::write(&side_path, payload)?;
                record.add_output(&side_path, payload.as_bytes());
            }
            let record_path = prefix.with_extension("run.json");
            std::fs::write(&record_path, serde_json::to_string_pretty(&record).unwrap())?;
        }
        None => {
            print!("{csv}");
            if let Some((_, payload)) = &sidecar {
                eprintln!("{payload}");
            }
            eprintln!("{}", serde_json::to_string(&record).unwrap());
        }
    }
    Ok(())
}

fn config_echo(mode: &str, settings: &Settings, params: serde_json::Value) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "mode": mode,
        "seed": settings.seed,
        "streams": settings.streams,
    });
    if let (Some(map), Some(extra)) = (obj.as_object_mut(), params.as_object()) {
        for (k, v) in extra {
            map.insert(k.clone(), v.clone());
        }
    }
    obj
}

fn cmd_covariance(
    args: &CovarianceArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let n = pick(&args.n, file_field(rest, "n"), "n")?;
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let j = build_covariance(LatticeSpec::new(n, w)?)?;
    let csv = format_covariance_csv(&j);
    let sidecar = serde_json::json!({
        "n": n,
        "w": w,
        "row_sum_max_err": j.row_sum_max_err(),
        "decay_profile": j.decay_profile(),
    });
    let record = RunRecord::new(config_echo(
        "covariance",
        settings,
        serde_json::json!({ "n": n, "w": w }),
    ));
    emit(settings, start, record, "csv", &csv, Some(("json", sidecar.to_string())))
}

fn cmd_sample(
    args: &SampleArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let n = pick(&args.n, file_field(rest, "n"), "n")?;
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let count = pick(&args.count, file_field(rest, "count"), "count")?;
    let j = build_covariance(LatticeSpec::new(n, w)?)?;
    let sampler = RbmSampler::new(&j);

    // Samples are assigned to streams round-robin so the file contents
    // depend only on (seed, streams).
    let streams = settings.streams;
    let mut rngs: Vec<_> = (0..streams as u64)
        .map(|s| stream_rng(SeedRecord { seed: settings.seed, stream: s }))
        .collect();
    let mut draws: Vec<Array2<num_complex::Complex64>> = Vec::with_capacity(count);
    for i in 0..count {
        draws.push(sampler.draw(&mut rngs[i % streams]));
    }

    let mut buf = Vec::new();
    write_samples_binary(&mut buf, n, &draws)?;
    let manifest = serde_json::json!({
        "format": "RBM1",
        "n": n,
        "w": w,
        "count": count,
        "seed": settings.seed,
        "streams": streams,
    });
    let mut record = RunRecord::new(config_echo(
        "sample",
        settings,
        serde_json::json!({ "n": n, "w": w, "count": count }),
    ));
    record.duration_secs = start.elapsed().as_secs_f64();
    let prefix = settings
        .out
        .clone()
        .ok_or_else(|| usage_err("`sample` requires --out for the binary payload"))?;
    let bin_path = prefix.with_extension("rbm");
    std::fs::write(&bin_path, &buf)?;
    record.add_output(&bin_path, &buf);
    let manifest_path = prefix.with_extension("json");
    let manifest_text = serde_json::to_string_pretty(&manifest).unwrap();
    std::fs::write(&manifest_path, &manifest_text)?;
    record.add_output(&manifest_path, manifest_text.as_bytes());
    let record_path = prefix.with_extension("run.json");
    std::fs::write(&record_path, serde_json::to_string_pretty(&record).unwrap())?;
    Ok(())
}

fn cmd_mc_f2(
    args: &McF2Args,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let n = pick(&args.n, file_field(rest, "n"), "n")?;
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let e = pick(&args.e, file_field(rest, "e"), "e")?;
    let xi = pick(&args.xi, file_field(rest, "xi"), "xi")?;
    let samples = pick(&args.samples, file_field(rest, "samples"), "samples")?;

    let j = build_covariance(LatticeSpec::new(n, w)?)?;
    let window = EnergyWindow::new(e, xi.clone(), n)?;
    let policy = RngStreamPolicy::new(settings.seed, settings.streams)?;
    let report = estimate_fbar(&j, &window, samples, policy)?;
    let csv = format_estimates_csv(&report.estimates);

    let mut record = RunRecord::new(config_echo(
        "mc-f2",
        settings,
        serde_json::json!({ "n": n, "w": w, "e": e, "xi": xi, "samples": samples }),
    ));
    record.warnings = report.warnings.clone();
    emit(settings, start, record, "csv", &csv, None)
}

fn cmd_limit(
    args: &LimitArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let cstar = pick(&args.cstar, file_field(rest, "cstar"), "cstar")?;
    let e = pick(&args.e, file_field(rest, "e"), "e")?;
    let xi_list = pick(&args.xi_list, file_field(rest, "xi_list"), "xi-list")?;
    let l = args.l.or(file_field(rest, "L")).unwrap_or(16);

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &xi in &xi_list {
        let v = limit_formula(cstar, e, xi, l)?;
        if !v.converged {
            warnings.push(format!("limit at xi={xi} not L-converged at the cap"));
        }
        rows.push((xi, v));
    }
    let csv = format_limit_csv(&rows);
    let mut record = RunRecord::new(config_echo(
        "limit",
        settings,
        serde_json::json!({ "cstar": cstar, "e": e, "xi_list": xi_list, "L": l }),
    ));
    record.warnings = warnings;
    emit(settings, start, record, "csv", &csv, None)
}

fn cmd_kstar(
    args: &KstarArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let t = pick(&args.t, file_field(rest, "t"), "t")?;
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let jmax = pick(&args.jmax, file_field(rest, "jmax"), "jmax")?;
    let quad_order = args
        .quad_order
        .or(file_field(rest, "quad_order"))
        .unwrap_or((4 * jmax).max(300));

    let eigs = funk_hecke_eigs(t, w, jmax, quad_order)?;
    let w2t = w * w * t;
    let rows: Vec<(usize, f64, f64)> = eigs
        .lambdas
        .iter()
        .enumerate()
        .map(|(jj, &lam)| {
            let jf = jj as f64;
            let asym = (1.0 - (-w2t).exp()) * (1.0 - jf * (jf + 1.0) / w2t);
            (jj, lam, asym)
        })
        .collect();
    let csv = format_kstar_csv(&rows);
    let mut record = RunRecord::new(config_echo(
        "kstar-spectrum",
        settings,
        serde_json::json!({ "t": t, "w": w, "jmax": jmax, "quad_order": quad_order }),
    ));
    if let Some(msg) = eigs.warning {
        record.warnings.push(msg);
    }
    emit(settings, start, record, "csv", &csv, None)
}

fn cmd_scan(
    args: &ScanArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let xi = pick(&args.xi, file_field(rest, "xi"), "xi")?;
    let e = pick(&args.e, file_field(rest, "e"), "e")?;
    let lo = pick(&args.cstar_min, file_field(rest, "cstar_min"), "cstar-min")?;
    let hi = pick(&args.cstar_max, file_field(rest, "cstar_max"), "cstar-max")?;
    let points = pick(&args.points, file_field(rest, "points"), "points")?;
    if !(lo > 0.0 && hi > lo) {
        return Err(usage_err("need 0 < cstar-min < cstar-max"));
    }
    if points < 2 {
        return Err(usage_err("need at least 2 scan points"));
    }

    let log_lo = lo.ln();
    let step = (hi.ln() - log_lo) / (points - 1) as f64;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..points {
        let cstar = (log_lo + step * i as f64).exp();
        let v = limit_formula(cstar, e, xi, 16)?;
        if !v.converged {
            warnings.push(format!("limit at cstar={cstar:.4e} not L-converged at the cap"));
        }
        rows.push((cstar, v));
    }
    let csv = format_scan_csv(&rows);
    let mut record = RunRecord::new(config_echo(
        "crossover-scan",
        settings,
        serde_json::json!({
            "xi": xi, "e": e, "cstar_min": lo, "cstar_max": hi, "points": points
        }),
    ));
    record.warnings = warnings;
    emit(settings, start, record, "csv", &csv, None)
}

fn cmd_compare(
    args: &CompareArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let cstar = pick(&args.cstar, file_field(rest, "cstar"), "cstar")?;
    let e = pick(&args.e, file_field(rest, "e"), "e")?;
    let xi_list = pick(&args.xi_list, file_field(rest, "xi_list"), "xi-list")?;
    let samples = pick(&args.samples, file_field(rest, "samples"), "samples")?;

    let policy = RngStreamPolicy::new(settings.seed, settings.streams)?;
    let (rows, report) = crossover_experiment(cstar, w, e, xi_list.clone(), samples, policy)?;
    let csv = format_compare_csv(&rows);
    let mut record = RunRecord::new(config_echo(
        "compare",
        settings,
        serde_json::json!({
            "w": w, "cstar": cstar, "e": e, "xi_list": xi_list, "samples": samples
        }),
    ));
    record.warnings = report.warnings.clone();
    emit(settings, start, record, "csv", &csv, None)
}

fn cmd_diagnostics(
    args: &DiagnosticsArgs,
    rest: &serde_json::Value,
    settings: &Settings,
    start: Instant,
) -> Result<(), RbmError> {
    let e = pick(&args.e, file_field(rest, "e"), "e")?;
    let w = pick(&args.w, file_field(rest, "w"), "w")?;
    let report = diagnostics_report(e, w, 100)?;
    let payload = serde_json::to_string_pretty(&report).unwrap();
    let mut record = RunRecord::new(config_echo(
        "diagnostics",
        settings,
        serde_json::json!({ "e": e, "w": w }),
    ));
    record.duration_secs = start.elapsed().as_secs_f64();
    match &settings.out {
        Some(prefix) => {
            let path = prefix.with_extension("json");
            std::fs::write(&path, &payload)?;
            record.add_output(&path, payload.as_bytes());
            let record_path = prefix.with_extension("run.json");
            std::fs::write(&record_path, serde_json::to_string_pretty(&record).unwrap())?;
        }
        None => {
            println!("{payload}");
            eprintln!("{}", serde_json::to_string(&record).unwrap());
        }
    }
    Ok(())
}
