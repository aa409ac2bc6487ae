use rayon::prelude::*;

use crate::attention::{
    attention_field, convolve_projections, gat_ansatz_heads, AttentionField, ConvolutionOutput,
    GatHeadScore, IdealizedPsiParams, MlpPsiParams, MlpPsiScore,
};
use crate::classifiers::{
    bayes_edge_classify, bayes_node_classify, sign_decision, spectral_node_classify,
    EdgePairFeature,
};
use crate::csbm::{sample_csbm, CsbmParams};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::metrics::{
    edge_metrics, edge_metrics_from_decisions, gamma_stats, node_accuracy,
    uniform_band_node_fraction, EdgeMetrics,
};
use crate::numerics::{sign_or_positive, unit_vector, RngStream};

use super::config::{Model, SweepConfig, SweepRegime};
use super::records::{sort_records, Metric, SweepRecord, REFERENCE_MODEL};

/// Band on `γ_ij |N_i|` counted as "uniform".
pub const UNIFORM_BAND: (f64, f64) = (0.25, 4.0);
/// Share of each node's same-class and other-class neighbors that must fall
/// inside [`UNIFORM_BAND`].
pub const UNIFORM_BAND_NEIGHBOR_FRACTION: f64 = 0.9;

/// Class-1 mean of a vary-q sweep.
pub fn regime_mean(regime: SweepRegime, n: usize, d: usize, sigma: f64) -> Vec<f64> {
    let sqrt_d = (d as f64).sqrt();
    let coord = match regime {
        SweepRegime::Easy => {
            let ln_n2 = ((n as f64) * (n as f64)).ln();
            10.0 * sigma * ln_n2.sqrt() / (2.0 * sqrt_d)
        }
        SweepRegime::Hard => sigma / sqrt_d,
    };
    vec![coord; d]
}

/// Class-1 mean with `‖μ‖ = κσ`, spread evenly over coordinates.
pub fn distance_mean(kappa: f64, d: usize, sigma: f64) -> Vec<f64> {
    vec![kappa * sigma / (d as f64).sqrt(); d]
}

/// The conjectured accuracy threshold on `‖μ‖`,
/// `σ √(ln n / (n(p+q)) · (1 − max(p, q))) · (p+q)/|p−q|`; `None` at `p = q`.
pub fn conjecture_threshold(n: usize, p: f64, q: f64, sigma: f64) -> Option<f64> {
    let ln_n = (n as f64).ln();
    let v = sigma * (ln_n / (n as f64 * (p + q)) * (1.0 - p.max(q))).sqrt() * (p + q)
        / (p - q).abs();
    v.is_finite().then_some(v)
}

/// Everything a model needs besides the sample.
#[derive(Debug, Clone)]
pub struct ModelContext<'a> {
    pub mu: &'a [f64],
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    pub scale_r: Option<f64>,
    pub leaky_slope: f64,
    /// Restricts node metrics to the marked nodes.
    pub eval_nodes: Option<&'a [bool]>,
}

impl ModelContext<'_> {
    fn eval_count(&self, n: usize) -> usize {
        self.eval_nodes.map_or(n, |m| m.iter().filter(|&&x| x).count())
    }

    fn node_acc(&self, pred: &[u8], truth: &[u8], up_to_flip: bool) -> Result<f64> {
        match self.eval_nodes {
            None => node_accuracy(pred, truth, up_to_flip),
            Some(mask) => {
                let keep = |v: &[u8]| -> Vec<u8> {
                    v.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect()
                };
                node_accuracy(&keep(pred), &keep(truth), up_to_flip)
            }
        }
    }
}

type Emitted = Vec<(Metric, f64)>;

fn push_edge(out: &mut Emitted, em: Option<EdgeMetrics>) {
    if let Some(m) = em {
        if let Some(acc) = m.overall_accuracy() {
            out.push((Metric::EdgeAcc, acc));
        }
        if let Some(f) = m.inter_misclassified_fraction() {
            out.push((Metric::InterMisclassFrac, f));
        }
    }
}

fn push_gamma(out: &mut Emitted, sample: &LabeledGraph, field: &AttentionField, p: f64, q: f64) {
    let st = gamma_stats(sample, field, p, q);
    if let Some(m) = st.intra {
        out.push((Metric::GammaIntraMean, m.mean));
        out.push((Metric::GammaIntraStd, m.std));
    }
    if let Some(m) = st.inter {
        out.push((Metric::GammaInterMean, m.mean));
        out.push((Metric::GammaInterStd, m.std));
    }
    if let Some(u) = st.uniform {
        out.push((Metric::GammaUniformRef, u.mean));
    }
}

fn oriented_node_acc(
    sample: &LabeledGraph,
    ctx: &ModelContext<'_>,
    h: &ConvolutionOutput,
    orientation: f64,
) -> Result<f64> {
    ctx.node_acc(&sign_decision(&h.scaled(orientation)), &sample.labels, false)
}

fn mlp_model(
    sample: &LabeledGraph,
    ctx: &ModelContext<'_>,
    signed: bool,
) -> Result<Emitted> {
    let r = ctx
        .scale_r
        .ok_or_else(|| Error::domain("scale R is undefined at this point"))?;
    let params = if signed {
        MlpPsiParams::signed_for(ctx.mu, r, ctx.leaky_slope, ctx.p, ctx.q)?
    } else {
        MlpPsiParams::from_mean(ctx.mu, r, ctx.leaky_slope, false)?
    };
    // Ψ ranks intra edges first; Ψ′ does so only when p >= q.
    let orientation = if signed {
        sign_or_positive(ctx.p - ctx.q)
    } else {
        1.0
    };
    let score = MlpPsiScore::new(sample, &params)?;
    let mut out = Vec::new();
    push_edge(&mut out, edge_metrics(sample, &score, orientation));
    let field = attention_field(sample, &score)?;
    push_gamma(&mut out, sample, &field, ctx.p, ctx.q);
    let h = convolve_projections(&sample.graph, &field, score.projections())?;
    out.push((Metric::NodeAcc, oriented_node_acc(sample, ctx, &h, orientation)?));
    let agree = h
        .h_prime
        .iter()
        .zip(score.projections())
        .filter(|(&h, &s)| (orientation * h > 0.0) == (s > 0.0))
        .count();
    out.push((Metric::SignAgreement, agree as f64 / sample.n() as f64));
    Ok(out)
}

fn gat_model(sample: &LabeledGraph, ctx: &ModelContext<'_>) -> Result<Emitted> {
    let (h1, h2) = gat_ansatz_heads(ctx.mu)?;
    let f1 = attention_field(sample, &GatHeadScore::new(sample, &h1)?)?;
    let f2 = attention_field(sample, &GatHeadScore::new(sample, &h2)?)?;
    let (lo, hi) = UNIFORM_BAND;
    let band = uniform_band_node_fraction(sample, &f1, lo, hi, UNIFORM_BAND_NEIGHBOR_FRACTION).min(
        uniform_band_node_fraction(sample, &f2, lo, hi, UNIFORM_BAND_NEIGHBOR_FRACTION),
    );
    let field = AttentionField::mean(&[f1, f2])?;
    let mut out = Vec::new();
    push_gamma(&mut out, sample, &field, ctx.p, ctx.q);
    out.push((Metric::UniformBandFrac, band));
    let projections = sample.features.project(&h1.w)?;
    let h = convolve_projections(&sample.graph, &field, &projections)?;
    out.push((
        Metric::NodeAcc,
        oriented_node_acc(sample, ctx, &h, sign_or_positive(ctx.p - ctx.q))?,
    ));
    Ok(out)
}

fn gcn_model(sample: &LabeledGraph, ctx: &ModelContext<'_>) -> Result<Emitted> {
    let w = unit_vector(ctx.mu)?;
    let field = AttentionField::uniform(&sample.graph);
    let h = convolve_projections(&sample.graph, &field, &sample.features.project(&w)?)?;
    Ok(vec![(
        Metric::NodeAcc,
        oriented_node_acc(sample, ctx, &h, sign_or_positive(ctx.p - ctx.q))?,
    )])
}

fn linear_model(sample: &LabeledGraph, ctx: &ModelContext<'_>) -> Result<Emitted> {
    if ctx.mu.len() != sample.dim() {
        return Err(Error::domain("mean dimension does not match features"));
    }
    let pred: Vec<u8> = sample
        .features
        .rows()
        .map(|x| bayes_node_classify(x, ctx.mu))
        .collect();
    Ok(vec![(Metric::NodeAcc, ctx.node_acc(&pred, &sample.labels, false)?)])
}

fn bayes_edge_model(sample: &LabeledGraph, ctx: &ModelContext<'_>) -> Result<Emitted> {
    let em = edge_metrics_from_decisions(sample, |i, j| {
        let pair = EdgePairFeature::new(sample.features.row(i), sample.features.row(j), ctx.mu)?;
        Ok(bayes_edge_classify(&pair, ctx.sigma, ctx.p, ctx.q)? == 1)
    })?;
    let mut out = Vec::new();
    push_edge(&mut out, em);
    Ok(out)
}

fn idealized_model(sample: &LabeledGraph, ctx: &ModelContext<'_>, t: f64) -> Result<Emitted> {
    let params = IdealizedPsiParams::new(t, ctx.p, ctx.q, &sample.labels)?;
    let orientation = sign_or_positive(ctx.p - ctx.q);
    let mut out = Vec::new();
    push_edge(&mut out, edge_metrics(sample, &params, orientation));
    let field = attention_field(sample, &params)?;
    push_gamma(&mut out, sample, &field, ctx.p, ctx.q);
    let w = unit_vector(ctx.mu)?;
    let h = convolve_projections(&sample.graph, &field, &sample.features.project(&w)?)?;
    let acc = oriented_node_acc(sample, ctx, &h, orientation)?;
    out.push((Metric::NodeAcc, acc));
    out.push((
        Metric::MisclassifiedNodes,
        ((1.0 - acc) * ctx.eval_count(sample.n()) as f64).round(),
    ));
    Ok(out)
}

fn spectral_model(sample: &LabeledGraph, ctx: &ModelContext<'_>) -> Result<Emitted> {
    let pred = spectral_node_classify(&sample.graph)?;
    Ok(vec![(Metric::NodeAcc, ctx.node_acc(&pred, &sample.labels, true)?)])
}

/// Runs one model on one sample. Models that are undefined at this point
/// (zero mean, non-convergent iteration) yield a single `skipped` entry.
pub fn evaluate_model(
    model: Model,
    sample: &LabeledGraph,
    ctx: &ModelContext<'_>,
) -> Result<Vec<(Metric, f64)>> {
    let result = match model {
        Model::MlpPsi => mlp_model(sample, ctx, false),
        Model::MlpPsiSigned => mlp_model(sample, ctx, true),
        Model::GatAnsatz => gat_model(sample, ctx),
        Model::Gcn => gcn_model(sample, ctx),
        Model::Linear => linear_model(sample, ctx),
        Model::BayesEdge => bayes_edge_model(sample, ctx),
        Model::Idealized(t) => idealized_model(sample, ctx, t),
        Model::Spectral => spectral_model(sample, ctx),
    };
    match result {
        Err(Error::Domain(_)) | Err(Error::Convergence { .. }) => Ok(vec![(Metric::Skipped, 1.0)]),
        other => other,
    }
}

/// One sampled graph of a sweep.
struct Task {
    sweep_value: f64,
    trial: usize,
    q: f64,
    mu: Vec<f64>,
}

fn run_tasks(
    config: &SweepConfig,
    tasks: Vec<Task>,
    extra: impl Fn(&Task) -> Vec<(Metric, f64)> + Sync,
) -> Result<Vec<SweepRecord>> {
    let chunks: Vec<Vec<SweepRecord>> = tasks
        .par_iter()
        .map(|task| -> Result<Vec<SweepRecord>> {
            let params = CsbmParams::new(config.n, config.p, task.q, task.mu.clone(), config.sigma)
                .map_err(|e| Error::config(e.to_string()))?
                .with_balanced_labels(config.balanced_labels);
            let mut rng = RngStream::new(config.base_seed, task.trial as u64);
            let sample = sample_csbm(&params, &mut rng)?;
            let mu_norm = params.mu_norm();
            let ctx = ModelContext {
                mu: &task.mu,
                p: config.p,
                q: task.q,
                sigma: config.sigma,
                scale_r: config.r_policy.scale(config.n, config.sigma, mu_norm).ok(),
                leaky_slope: config.leaky_slope,
                eval_nodes: None,
            };
            let mut out = Vec::new();
            for &model in &config.models {
                let name = model.name();
                for (metric, value) in evaluate_model(model, &sample, &ctx)? {
                    out.push(SweepRecord::new(task.sweep_value, task.trial, name.clone(), metric, value));
                }
            }
            for (metric, value) in extra(task) {
                out.push(SweepRecord::new(task.sweep_value, task.trial, REFERENCE_MODEL, metric, value));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<SweepRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Varies `q` over the grid at fixed `p` and the regime's mean. Trial `t`
/// draws from stream `(base_seed, t)` at every `q`.
pub fn run_vary_q_sweep(config: &SweepConfig, regime: SweepRegime) -> Result<Vec<SweepRecord>> {
    let grid = config.validated_q_grid()?;
    let mu = regime_mean(regime, config.n, config.dim(), config.sigma);
    let tasks = grid
        .iter()
        .flat_map(|&q| {
            let mu = &mu;
            (0..config.trials).map(move |trial| Task {
                sweep_value: q,
                trial,
                q,
                mu: mu.clone(),
            })
        })
        .collect();
    run_tasks(config, tasks, |task| match regime {
        SweepRegime::Hard => conjecture_threshold(config.n, config.p, task.q, config.sigma)
            .map(|v| vec![(Metric::ConjectureThreshold, v)])
            .unwrap_or_default(),
        SweepRegime::Easy => Vec::new(),
    })
}

/// Varies `κ = ‖μ‖/σ` over the distance grid at fixed `p` and `q`.
pub fn run_vary_distance_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    let grid = config.validated_distance_grid()?;
    let q = config.distance_q();
    let d = config.dim();
    let tasks = grid
        .iter()
        .flat_map(|&kappa| {
            (0..config.trials).map(move |trial| Task {
                sweep_value: kappa,
                trial,
                q,
                mu: distance_mean(kappa, d, config.sigma),
            })
        })
        .collect();
    run_tasks(config, tasks, |_| Vec::new())
}
