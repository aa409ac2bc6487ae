use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "sweep_value,trial,model,metric,value";
pub const SUMMARY_HEADER: &str = "sweep_value,model,metric,mean,std,trials";

/// Model name used for records that describe the sweep point rather than a
/// model.
pub const REFERENCE_MODEL: &str = "reference";

macro_rules! metrics {
    ($($variant:ident => $name:literal,)*) => {
        /// Names of every quantity a sweep can emit.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Metric {
            $($variant,)*
        }

        impl Metric {
            pub const ALL: &'static [Metric] = &[$(Metric::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Metric::$variant => $name,)*
                }
            }
        }

        impl FromStr for Metric {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok(Metric::$variant),)*
                    other => Err(Error::domain(format!("unknown metric '{other}'"))),
                }
            }
        }
    };
}

metrics! {
    EdgeAcc => "edge_acc",
    NodeAcc => "node_acc",
    GammaIntraMean => "gamma_intra_mean",
    GammaInterMean => "gamma_inter_mean",
    GammaIntraStd => "gamma_intra_std",
    GammaInterStd => "gamma_inter_std",
    GammaUniformRef => "gamma_uniform_ref",
    InterMisclassFrac => "inter_misclass_frac",
    // Fraction of nodes where sign(h'_i) equals sign(w^T X_i).
    SignAgreement => "sign_agreement",
    // Fraction of nodes whose coefficients stay within [1/4, 4] / |N_i|.
    UniformBandFrac => "uniform_band_frac",
    ConjectureThreshold => "conjecture_threshold",
    MisclassifiedNodes => "misclassified_nodes",
    // Emitted with value 1 when a model is undefined at a sweep point.
    Skipped => "skipped",
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep_value: f64,
    pub trial: usize,
    pub model: String,
    pub metric: Metric,
    pub value: f64,
}

impl SweepRecord {
    pub fn new(
        sweep_value: f64,
        trial: usize,
        model: impl Into<String>,
        metric: Metric,
        value: f64,
    ) -> Self {
        Self {
            sweep_value,
            trial,
            model: model.into(),
            metric,
            value,
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.sweep_value
            .total_cmp(&other.sweep_value)
            .then(self.trial.cmp(&other.trial))
            .then_with(|| self.model.cmp(&other.model))
            .then_with(|| self.metric.as_str().cmp(other.metric.as_str()))
    }
}

/// Sorts by `(sweep_value, trial, model, metric)`.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(SweepRecord::order);
}

/// Formats with at most 9 significant digits, dropping trailing zeros.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting parses");
    let plain = format!("{rounded}");
    let exp = format!("{rounded:e}");
    if plain.len() <= exp.len() {
        plain
    } else {
        exp
    }
}

pub fn render_records_csv(records: &[SweepRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = String::with_capacity(32 * (sorted.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        writeln!(
            out,
            "{},{},{},{},{}",
            format_real(r.sweep_value),
            r.trial,
            r.model,
            r.metric.as_str(),
            format_real(r.value)
        )
        .unwrap();
    }
    out
}

pub fn write_records_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    fs::write(path, render_records_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records_csv(&text, path)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn parse_records_csv(text: &str, path: &Path) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(parse_error(path, 1, format!("expected header '{CSV_HEADER}'"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_error(path, line_no, "expected 5 comma separated fields"));
        }
        let real = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| parse_error(path, line_no, format!("bad number '{s}'")))
        };
        out.push(SweepRecord {
            sweep_value: real(fields[0])?,
            trial: fields[1]
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("bad trial '{}'", fields[1])))?,
            model: fields[2].to_string(),
            metric: fields[3]
                .parse()
                .map_err(|e: Error| parse_error(path, line_no, e.to_string()))?,
            value: real(fields[4])?,
        });
    }
    Ok(out)
}

/// Mean and standard deviation over trials of one metric at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub model: String,
    pub metric: Metric,
    pub mean: f64,
    /// Population standard deviation across trials.
    pub std: f64,
    pub trials: usize,
}

pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    sorted.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.metric.as_str().cmp(b.metric.as_str()))
            .then(a.trial.cmp(&b.trial))
    });
    let mut rows = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let head = &sorted[start];
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|r| {
                    r.sweep_value == head.sweep_value
                        && r.model == head.model
                        && r.metric == head.metric
                })
                .count();
        let values: Vec<f64> = sorted[start..end].iter().map(|r| r.value).collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
        rows.push(SummaryRow {
            sweep_value: head.sweep_value,
            model: head.model.clone(),
            metric: head.metric,
            mean,
            std: var.sqrt(),
            trials: values.len(),
        });
        start = end;
    }
    rows
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_real(r.sweep_value),
            r.model,
            r.metric.as_str(),
            format_real(r.mean),
            format_real(r.std),
            r.trials
        )
        .unwrap();
    }
    out
}

/// `<out>.summary.csv` next to a record file.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".summary.csv");
    out.with_file_name(name)
}

pub fn write_summary_csv(records: &[SweepRecord], path: &Path) -> Result<()> {
    fs::write(path, render_summary_csv(&summarize(records))).map_err(|e| Error::io(path, e))
}
