use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::inter_edge_floor;
use crate::numerics::std_normal_cdf;

use super::config::{Model, RPolicy, SweepConfig, SweepRegime};
use super::records::{Metric, SweepRecord};
use super::sweep::{run_vary_distance_sweep, run_vary_q_sweep};

/// Slack on Monte Carlo floors and rankings.
pub const SLACK: f64 = 0.02;
/// Minimum edge accuracy counted as separation.
pub const EDGE_SEPARATION_ACC: f64 = 0.999;
/// Relative band on attention coefficient means.
pub const GAMMA_REL_TOL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Easy,
    Hard,
    LinearEquivalence,
    Spectral,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Easy, Suite::Hard, Suite::LinearEquivalence, Suite::Spectral];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Easy => "easy",
            Suite::Hard => "hard",
            Suite::LinearEquivalence => "linear-equivalence",
            Suite::Spectral => "spectral",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown suite '{s}' (expected easy, hard, linear-equivalence or spectral)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "suite {} seed {}", self.suite, self.seed).unwrap();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {}: {}", c.name, c.measured).unwrap();
        }
        let overall = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(out, "{overall} overall").unwrap();
        out
    }
}

/// Smallest number of passing trials that counts as "at least 9 in 10".
pub fn required_trials(trials: usize) -> usize {
    (9 * trials).div_ceil(10)
}

/// Values of one model/metric at one sweep point, ordered by trial.
pub fn values_at(records: &[SweepRecord], sweep_value: f64, model: &str, metric: Metric) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.sweep_value == sweep_value && r.model == model && r.metric == metric)
        .map(|r| (r.trial, r.value))
        .collect();
    v.sort_by_key(|(t, _)| *t);
    v.into_iter().map(|(_, x)| x).collect()
}

pub fn sweep_points(records: &[SweepRecord]) -> Vec<f64> {
    let mut pts: Vec<f64> = records.iter().map(|r| r.sweep_value).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// At every sweep point, at least 9 in 10 trials satisfy `pred`. Reports the
/// worst point's passing count.
fn per_point_trials(
    name: &str,
    records: &[SweepRecord],
    trials: usize,
    model: &str,
    metric: Metric,
    pred: impl Fn(f64) -> bool,
) -> Check {
    let need = required_trials(trials);
    let mut worst = (usize::MAX, f64::NAN);
    for x in sweep_points(records) {
        let vals = values_at(records, x, model, metric);
        let good = vals.iter().filter(|&&v| pred(v)).count();
        if good < worst.0 {
            worst = (good, x);
        }
    }
    let passed = worst.0 != usize::MAX && worst.0 >= need;
    Check {
        name: name.to_string(),
        passed,
        measured: format!("worst point {:.6} with {}/{} trials (need {need})", worst.1, worst.0.min(trials), trials),
    }
}

fn easy_suite(seed: u64) -> Result<Vec<Check>> {
    let base = SweepConfig {
        base_seed: seed,
        models: vec![Model::MlpPsi, Model::MlpPsiSigned, Model::Linear],
        ..SweepConfig::default()
    };
    let recs = run_vary_q_sweep(&base, SweepRegime::Easy)?;
    let trials = base.trials;
    let mut checks = vec![
        per_point_trials(
            "edge separation (mlp-psi edge_acc >= 0.999)",
            &recs,
            trials,
            "mlp-psi",
            Metric::EdgeAcc,
            |v| v >= EDGE_SEPARATION_ACC,
        ),
        per_point_trials(
            "node separation (mlp-psi-signed node_acc = 1)",
            &recs,
            trials,
            "mlp-psi-signed",
            Metric::NodeAcc,
            |v| v == 1.0,
        ),
        per_point_trials(
            "linear classifier (node_acc = 1)",
            &recs,
            trials,
            "linear",
            Metric::NodeAcc,
            |v| v == 1.0,
        ),
    ];

    let theorem = SweepConfig {
        models: vec![Model::MlpPsiSigned],
        r_policy: RPolicy::Theorem,
        ..base.clone()
    };
    let recs = run_vary_q_sweep(&theorem, SweepRegime::Easy)?;
    checks.push(gamma_concentration(&recs, theorem.n, theorem.p));
    Ok(checks)
}

/// Favoured-class mean γ within 10% of `2/(n·max(p, q))` and the other
/// class's mean below `0.1/(n(p+q))`, at every `q`.
pub fn gamma_concentration(records: &[SweepRecord], n: usize, p: f64) -> Check {
    let model = Model::MlpPsiSigned.name();
    let mut passed = true;
    let mut worst_ratio: f64 = 1.0;
    let mut worst_small: f64 = 0.0;
    for q in sweep_points(records) {
        let intra = mean(&values_at(records, q, &model, Metric::GammaIntraMean));
        let inter = mean(&values_at(records, q, &model, Metric::GammaInterMean));
        let (favoured, other, prob) = if p >= q { (intra, inter, p) } else { (inter, intra, q) };
        let ratio = favoured / (2.0 / (n as f64 * prob));
        let small = other * n as f64 * (p + q);
        if (ratio - 1.0).abs() > (worst_ratio - 1.0).abs() {
            worst_ratio = ratio;
        }
        worst_small = worst_small.max(small);
        passed &= (ratio - 1.0).abs() <= GAMMA_REL_TOL && small < 0.1;
    }
    Check {
        name: "gamma concentration (theorem R)".to_string(),
        passed: passed && !sweep_points(records).is_empty(),
        measured: format!(
            "worst favoured ratio {worst_ratio:.4}, worst other-class n(p+q)gamma {worst_small:.3e}"
        ),
    }
}

fn hard_suite(seed: u64) -> Result<Vec<Check>> {
    let c = SweepConfig {
        base_seed: seed,
        models: vec![Model::BayesEdge, Model::MlpPsi, Model::GatAnsatz],
        ..SweepConfig::default()
    };
    let recs = run_vary_q_sweep(&c, SweepRegime::Hard)?;
    let floor = inter_edge_floor(1.0)? - SLACK;
    let mut checks = Vec::new();
    for model in ["bayes-edge", "mlp-psi"] {
        let vals: Vec<f64> = recs
            .iter()
            .filter(|r| r.model == model && r.metric == Metric::InterMisclassFrac)
            .map(|r| r.value)
            .collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: format!("inter-edge floor ({model})"),
            passed: !vals.is_empty() && min >= floor,
            measured: format!("min misclassified {min:.4} vs floor {floor:.4} over {} trials", vals.len()),
        });
    }
    checks.push(per_point_trials(
        "attention collapse (gat-ansatz band fraction >= 0.9)",
        &recs,
        c.trials,
        "gat-ansatz",
        Metric::UniformBandFrac,
        |v| v >= 0.9,
    ));
    let mut worst: f64 = 1.0;
    for q in sweep_points(&recs) {
        let uni = mean(&values_at(&recs, q, "gat-ansatz", Metric::GammaUniformRef));
        for metric in [Metric::GammaIntraMean, Metric::GammaInterMean] {
            let r = mean(&values_at(&recs, q, "gat-ansatz", metric)) / uni;
            if (r.ln()).abs() > worst.ln().abs() {
                worst = r;
            }
        }
    }
    checks.push(Check {
        name: "gat-ansatz gamma means near uniform (factor 2)".to_string(),
        passed: (0.5..=2.0).contains(&worst),
        measured: format!("worst ratio to uniform {worst:.4}"),
    });
    Ok(checks)
}

fn linear_equivalence_suite(seed: u64) -> Result<Vec<Check>> {
    let c = SweepConfig {
        n: 500,
        q: Some(0.5),
        base_seed: seed,
        distance_grid: Some(vec![1.0]),
        models: vec![Model::MlpPsi],
        r_policy: RPolicy::Theorem13,
        ..SweepConfig::default()
    };
    let recs = run_vary_distance_sweep(&c)?;
    let partial = std_normal_cdf(1.0)? - SLACK;
    let mut checks = vec![
        per_point_trials(
            "sign(h') = sign(w^T X) on every node",
            &recs,
            c.trials,
            "mlp-psi",
            Metric::SignAgreement,
            |v| v == 1.0,
        ),
        per_point_trials(
            &format!("partial classification (node_acc >= {partial:.4})"),
            &recs,
            c.trials,
            "mlp-psi",
            Metric::NodeAcc,
            |v| v >= partial,
        ),
    ];

    let ranking = SweepConfig {
        base_seed: seed,
        models: vec![Model::MlpPsi, Model::Linear, Model::Gcn],
        r_policy: RPolicy::Theorem13,
        ..SweepConfig::default()
    };
    let recs = run_vary_q_sweep(&ranking, SweepRegime::Hard)?;
    checks.push(model_ranking(&recs));
    Ok(checks)
}

/// Mean MLP accuracy at least the better of linear and GCN minus the slack,
/// at every sweep point.
pub fn model_ranking(records: &[SweepRecord]) -> Check {
    let mut worst = (f64::INFINITY, f64::NAN);
    for q in sweep_points(records) {
        let acc = |m: &str| mean(&values_at(records, q, m, Metric::NodeAcc));
        let gap = acc("mlp-psi") - acc("linear").max(acc("gcn"));
        if gap < worst.0 {
            worst = (gap, q);
        }
    }
    Check {
        name: "mlp-psi ranks above linear and gcn".to_string(),
        passed: worst.0 >= -SLACK,
        measured: format!("worst margin {:.4} at q = {:.6}", worst.0, worst.1),
    }
}

fn spectral_suite(seed: u64) -> Result<Vec<Check>> {
    let c = SweepConfig {
        q: Some(0.1),
        base_seed: seed,
        distance_grid: Some(vec![1.0]),
        models: vec![Model::Spectral],
        ..SweepConfig::default()
    };
    let recs = run_vary_distance_sweep(&c)?;
    Ok(vec![per_point_trials(
        "exact recovery up to flip",
        &recs,
        c.trials,
        "spectral",
        Metric::NodeAcc,
        |v| v == 1.0,
    )])
}

/// Runs a suite at its fixed desk-scale settings. Failed checks are part of
/// the report, not errors.
pub fn run_verification_suite(suite: Suite, seed: u64) -> Result<VerificationReport> {
    let checks = match suite {
        Suite::Easy => easy_suite(seed)?,
        Suite::Hard => hard_suite(seed)?,
        Suite::LinearEquivalence => linear_equivalence_suite(seed)?,
        Suite::Spectral => spectral_suite(seed)?,
    };
    Ok(VerificationReport {
        suite,
        seed,
        checks,
    })
}
