use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::DEFAULT_LEAKY_SLOPE;
use crate::error::{Error, Result};

/// Feature signal strength of a vary-q sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepRegime {
    /// Every coordinate of μ is `10σ√(ln n²) / (2√d)`.
    Easy,
    /// Every coordinate of μ is `σ/√d`, so `‖μ‖ = σ`.
    Hard,
}

impl FromStr for SweepRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "hard" => Ok(Self::Hard),
            other => Err(Error::config(format!("unknown regime '{other}' (expected easy or hard)"))),
        }
    }
}

/// How the MLP attention scale `R` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RPolicy {
    /// `R = 1`.
    Experiment,
    /// `R = 1/√(σ √(ln n) ‖μ‖)`.
    Theorem,
    /// `R = n ln²n / σ`.
    Theorem13,
}

impl RPolicy {
    pub fn scale(self, n: usize, sigma: f64, mu_norm: f64) -> Result<f64> {
        let ln_n = (n as f64).ln();
        let r = match self {
            RPolicy::Experiment => 1.0,
            RPolicy::Theorem => 1.0 / (sigma * ln_n.sqrt() * mu_norm).sqrt(),
            RPolicy::Theorem13 => n as f64 * ln_n * ln_n / sigma,
        };
        if !r.is_finite() || !(r > 0.0) {
            return Err(Error::domain(format!(
                "scale R is undefined for n = {n}, sigma = {sigma}, |mu| = {mu_norm}"
            )));
        }
        Ok(r)
    }
}

impl FromStr for RPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "experiment" => Ok(Self::Experiment),
            "theorem" => Ok(Self::Theorem),
            "theorem13" => Ok(Self::Theorem13),
            other => Err(Error::config(format!(
                "unknown r-policy '{other}' (expected experiment, theorem or theorem13)"
            ))),
        }
    }
}

/// A model evaluated at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Model {
    /// MLP attention `Ψ`.
    MlpPsi,
    /// `Ψ′`: `Ψ` negated when `p < q`.
    MlpPsiSigned,
    /// Two-head single-layer attention with the ansatz parameters.
    GatAnsatz,
    /// Uniform averaging over `N_i`.
    Gcn,
    /// The graph-free Bayes node rule `μᵀx > 0`.
    Linear,
    BayesEdge,
    /// Label-aware attention with margin `t`.
    Idealized(f64),
    Spectral,
}

impl Model {
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Model::MlpPsi => f.write_str("mlp-psi"),
            Model::MlpPsiSigned => f.write_str("mlp-psi-signed"),
            Model::GatAnsatz => f.write_str("gat-ansatz"),
            Model::Gcn => f.write_str("gcn"),
            Model::Linear => f.write_str("linear"),
            Model::BayesEdge => f.write_str("bayes-edge"),
            Model::Idealized(t) => write!(f, "idealized({t})"),
            Model::Spectral => f.write_str("spectral"),
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "mlp-psi" => Model::MlpPsi,
            "mlp-psi-signed" => Model::MlpPsiSigned,
            "gat-ansatz" => Model::GatAnsatz,
            "gcn" => Model::Gcn,
            "linear" => Model::Linear,
            "bayes-edge" => Model::BayesEdge,
            "spectral" => Model::Spectral,
            _ => {
                let t = s
                    .strip_prefix("idealized(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .ok_or_else(|| Error::config(format!("unknown model '{s}'")))?;
                let t: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad margin in model '{s}'")))?;
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::config(format!("margin must be finite and >= 0 in '{s}'")));
                }
                Model::Idealized(t)
            }
        })
    }
}

impl TryFrom<String> for Model {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Model> for String {
    fn from(m: Model) -> String {
        m.to_string()
    }
}

/// Parses a comma separated model list.
pub fn parse_models(list: &str) -> Result<Vec<Model>> {
    let models = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Model>>>()?;
    if models.is_empty() {
        return Err(Error::config("model list is empty"));
    }
    Ok(models)
}

pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_P: f64 = 0.5;
pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_SEED: u64 = 42;
/// `q` of the vary-distance sweep when none is given.
pub const DEFAULT_DISTANCE_Q: f64 = 0.1;
pub const DEFAULT_Q_POINTS: usize = 20;
pub const DEFAULT_DISTANCE_POINTS: usize = 15;

/// Settings shared by both sweeps. Field names double as the JSON config
/// schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    /// Overrides `d = max(1, round(n / ln²n))`.
    pub d: Option<usize>,
    pub p: f64,
    /// Fixed `q` of the vary-distance sweep.
    pub q: Option<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub q_grid: Option<Vec<f64>>,
    /// Values of `κ = ‖μ‖/σ`.
    pub distance_grid: Option<Vec<f64>>,
    pub models: Vec<Model>,
    pub r_policy: RPolicy,
    pub balanced_labels: bool,
    pub leaky_slope: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            d: None,
            p: DEFAULT_P,
            q: None,
            sigma: DEFAULT_SIGMA,
            trials: DEFAULT_TRIALS,
            base_seed: DEFAULT_SEED,
            q_grid: None,
            distance_grid: None,
            models: vec![
                Model::MlpPsi,
                Model::MlpPsiSigned,
                Model::GatAnsatz,
                Model::Gcn,
                Model::Linear,
                Model::BayesEdge,
            ],
            r_policy: RPolicy::Experiment,
            balanced_labels: false,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

/// `max(1, round(n / ln²n))`.
pub fn default_dim(n: usize) -> usize {
    let ln = (n as f64).ln();
    ((n as f64 / (ln * ln)).round() as usize).max(1)
}

/// `points` evenly spaced values in `[ln²n/n, 1 − ln²n/n]`.
pub fn default_q_grid(n: usize, points: usize) -> Vec<f64> {
    let ln = (n as f64).ln();
    let lo = ln * ln / n as f64;
    let hi = 1.0 - lo;
    linspace(lo, hi, points)
}

/// `points` log-spaced values of `κ` in `[0.1, 10√(2 ln n)]`.
pub fn default_distance_grid(n: usize, points: usize) -> Vec<f64> {
    let lo: f64 = 0.1;
    let hi = 10.0 * (2.0 * (n as f64).ln()).sqrt();
    linspace(lo.ln(), hi.ln(), points)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(format!("{name} is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(format!("{name} has a non-finite value")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

impl SweepConfig {
    pub fn dim(&self) -> usize {
        self.d.unwrap_or_else(|| default_dim(self.n))
    }

    pub fn q_grid(&self) -> Vec<f64> {
        self.q_grid
            .clone()
            .unwrap_or_else(|| default_q_grid(self.n, DEFAULT_Q_POINTS))
    }

    pub fn distance_grid(&self) -> Vec<f64> {
        self.distance_grid
            .clone()
            .unwrap_or_else(|| default_distance_grid(self.n, DEFAULT_DISTANCE_POINTS))
    }

    pub fn distance_q(&self) -> f64 {
        self.q.unwrap_or(DEFAULT_DISTANCE_Q)
    }

    /// Checks everything except the grids.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.d == Some(0) {
            return Err(Error::config("d must be at least 1"));
        }
        check_probability("p", self.p)?;
        if let Some(q) = self.q {
            check_probability("q", q)?;
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(Error::config("model list is empty"));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::config(format!(
                "leaky_slope must lie in [0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }

    pub(crate) fn validated_q_grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let grid = self.q_grid();
        check_grid("q_grid", &grid)?;
        if grid.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(Error::config("q_grid values must lie strictly between 0 and 1"));
        }
        Ok(grid)
    }

    pub(crate) fn validated_distance_grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let grid = self.distance_grid();
        check_grid("distance_grid", &grid)?;
        if grid.iter().any(|&k| k < 0.0) {
            return Err(Error::config("distance_grid values must be >= 0"));
        }
        Ok(grid)
    }
}
