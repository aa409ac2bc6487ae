//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on configuration or input errors (including
//! unknown flags), 2 when a verification suite fails, 3 on I/O errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::csbm::{sample_csbm, write_sample_tsv, CsbmParams};
use crate::dataset::{evaluate_real_task, load_external_graph, one_vs_all_mean_shift, shift_direction};
use crate::error::{Error, Result};
use crate::experiments::config::{parse_models, DEFAULT_DISTANCE_Q, DEFAULT_SEED};
use crate::experiments::records::{render_records_csv, summary_path, write_summary_csv};
use crate::experiments::sweep::regime_mean;
use crate::experiments::{
    run_vary_distance_sweep, run_vary_q_sweep, run_verification_suite, write_records_csv, Model,
    Suite, SweepConfig, SweepRecord, SweepRegime,
};
use crate::numerics::RngStream;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "csbm-attention", version, about = "Graph attention on the contextual stochastic block model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vary q at fixed p in the easy or hard regime.
    SweepQ {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value = "easy")]
        regime: String,
    },
    /// Vary the distance between the class means at fixed p and q.
    SweepDistance {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Run a named verification suite and print its report.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate models on an external graph after one-vs-all mean shifting.
    RealData(RealDataArgs),
    /// Sample one graph and write it as TSV files.
    DumpSample(DumpArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma separated, e.g. `mlp-psi,gcn,idealized(3)`.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    r_policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON object with `SweepConfig` fields; its values win over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RealDataArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long = "class")]
    class: i64,
    #[arg(long)]
    mu_norm_grid: String,
    #[arg(long, default_value = "mlp-psi,gcn,linear")]
    models: String,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = DEFAULT_DISTANCE_Q)]
    q: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value = "easy")]
    regime: String,
    #[arg(long)]
    dump_dir: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad number '{t}' in list")))
        })
        .collect()
}

/// Flags first, then the JSON file's fields on top.
fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut c = SweepConfig::default();
    if let Some(v) = args.n {
        c.n = v;
    }
    if args.d.is_some() {
        c.d = args.d;
    }
    if let Some(v) = args.p {
        c.p = v;
    }
    if args.q.is_some() {
        c.q = args.q;
    }
    if let Some(v) = args.sigma {
        c.sigma = v;
    }
    if let Some(v) = args.trials {
        c.trials = v;
    }
    if let Some(v) = args.seed {
        c.base_seed = v;
    }
    if let Some(m) = &args.models {
        c.models = parse_models(m)?;
    }
    if let Some(r) = &args.r_policy {
        c.r_policy = r.parse()?;
    }
    if let Some(path) = &args.config {
        c = overlay_json(&c, path)?;
    }
    c.validate()?;
    Ok(c)
}

fn overlay_json(base: &SweepConfig, path: &Path) -> Result<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let overlay: Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let Value::Object(fields) = overlay else {
        return Err(Error::config(format!("{}: expected a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(base).expect("config serializes");
    let target = merged.as_object_mut().expect("config is an object");
    for (k, v) in fields {
        target.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::config("--jobs must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn emit_records(records: &[SweepRecord], out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => {
            write_records_csv(records, path)?;
            write_summary_csv(records, &summary_path(path))?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        None => {
            stdout
                .write_all(render_records_csv(records).as_bytes())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::SweepQ { sweep, regime } => {
            let regime: SweepRegime = regime.parse()?;
            let config = sweep_config(&sweep)?;
            let records = with_jobs(sweep.jobs, || run_vary_q_sweep(&config, regime))??;
            emit_records(&records, sweep.out.as_deref(), stdout)?;
        }
        Command::SweepDistance { sweep } => {
            let config = sweep_config(&sweep)?;
            let records = with_jobs(sweep.jobs, || run_vary_distance_sweep(&config))??;
            emit_records(&records, sweep.out.as_deref(), stdout)?;
        }
        Command::Verify {
            suite,
            seed,
            jobs,
            out,
        } => {
            let suite: Suite = suite.parse()?;
            let report = with_jobs(jobs, || run_verification_suite(suite, seed))??;
            let text = report.render();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))?;
            if let Some(path) = out {
                fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            }
            if !report.passed() {
                return Ok(EXIT_VERIFY_FAILED);
            }
        }
        Command::RealData(a) => {
            let models: Vec<Model> = parse_models(&a.models)?;
            let grid = parse_real_list(&a.mu_norm_grid)?;
            if grid.is_empty() {
                return Err(Error::config("--mu-norm-grid is empty"));
            }
            let graph = load_external_graph(&a.features, &a.edges, &a.labels, a.masks.as_deref())?;
            let u = shift_direction(&graph, a.class)?;
            let task = one_vs_all_mean_shift(&graph, a.class, &u)?;
            let records = with_jobs(a.jobs, || evaluate_real_task(&task, &models, &grid))??;
            emit_records(&records, a.out.as_deref(), stdout)?;
        }
        Command::DumpSample(a) => {
            let regime: SweepRegime = a.regime.parse()?;
            let d = a
                .d
                .unwrap_or_else(|| crate::experiments::config::default_dim(a.n));
            if d == 0 {
                return Err(Error::config("d must be at least 1"));
            }
            let mu = regime_mean(regime, a.n, d, a.sigma);
            let params = CsbmParams::new(a.n, a.p, a.q, mu, a.sigma)
                .map_err(|e| Error::config(e.to_string()))?;
            let sample = sample_csbm(&params, &mut RngStream::new(a.seed, 0))?;
            write_sample_tsv(&sample, &a.dump_dir)?;
        }
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status. Diagnostics go to standard error.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(argv, &mut std::io::stdout().lock())
}

/// As [`parse_and_dispatch`], writing reports and CSV to `stdout`.
pub fn run_with_output<I, T>(argv: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let msg = e.to_string();
                    eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
                    EXIT_CONFIG
                }
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::RPolicy;

    fn run(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut argv = vec!["csbm-attention"];
        argv.extend_from_slice(args);
        let code = run_with_output(argv, &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn unknown_flag_is_a_config_error() {
        assert_eq!(run(&["sweep-q", "--bogus", "1"]).0, EXIT_CONFIG);
        assert_eq!(run(&["nonsense"]).0, EXIT_CONFIG);
        assert_eq!(run(&["sweep-q", "--regime", "medium"]).0, EXIT_CONFIG);
        assert_eq!(run(&["sweep-q", "--models", "gat"]).0, EXIT_CONFIG);
        assert_eq!(run(&["verify", "--suite", "nope"]).0, EXIT_CONFIG);
    }

    #[test]
    fn help_exits_cleanly() {
        let (code, text) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(text.contains("sweep-q"));
    }

    #[test]
    fn sweep_to_stdout_has_header() {
        let (code, text) = run(&[
            "sweep-q", "--n", "60", "--trials", "2", "--models", "gcn,linear", "--seed", "3",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(text.starts_with("sweep_value,trial,model,metric,value\n"));
        assert_eq!(text.lines().count(), 1 + 20 * 2 * 2);
    }

    #[test]
    fn config_file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"n": 50, "trials": 1, "q_grid": [0.2]}"#).unwrap();
        let args = SweepArgs {
            n: Some(999),
            d: None,
            p: None,
            q: None,
            sigma: None,
            trials: Some(7),
            seed: None,
            jobs: None,
            models: Some("gcn".into()),
            r_policy: None,
            out: None,
            config: Some(cfg.clone()),
        };
        let c = sweep_config(&args).unwrap();
        assert_eq!((c.n, c.trials), (50, 1));
        assert_eq!(c.models, vec![Model::Gcn]);
        assert_eq!(c.q_grid, Some(vec![0.2]));
        fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(sweep_config(&args), Err(Error::Config(_))));
    }

    #[test]
    fn missing_input_file_is_an_io_error() {
        let (code, _) = run(&[
            "real-data",
            "--features",
            "/nonexistent/f.tsv",
            "--edges",
            "/nonexistent/e.tsv",
            "--labels",
            "/nonexistent/l.tsv",
            "--class",
            "0",
            "--mu-norm-grid",
            "1",
        ]);
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn r_policy_flag() {
        let args = SweepArgs {
            n: None,
            d: None,
            p: None,
            q: None,
            sigma: None,
            trials: None,
            seed: None,
            jobs: Some(0),
            models: None,
            r_policy: Some("theorem13".into()),
            out: None,
            config: None,
        };
        assert_eq!(sweep_config(&args).unwrap().r_policy, RPolicy::Theorem13);
        assert!(with_jobs(Some(0), || ()).is_err());
    }
}
