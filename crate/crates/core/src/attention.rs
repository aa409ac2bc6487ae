//! Attention scoring functions, softmax attention coefficients and the
//! scalar (single output channel, identity activation) graph attention
//! convolution.
//!
//! Scores are evaluated over self-inclusive neighborhoods `N_i`: every node
//! attends to itself as well as to its adjacent nodes.

use crate::error::{Error, Result};
use crate::graph::{Graph, LabeledGraph};
use crate::numerics::{dot, leaky_relu, sign_or_positive, unit_vector};

/// Standard LeakyReLU negative slope used by every model unless overridden.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Tolerance on `‖w̃‖ = 1`.
const UNIT_NORM_TOL: f64 = 1e-9;

fn check_slope(slope: f64) -> Result<()> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::domain(format!("LeakyReLU slope must lie in [0, 1), got {slope}")));
    }
    Ok(())
}

/// Parameters of the two-layer MLP attention
/// `Ψ(x_i, x_j) = rᵀ LeakyReLU(S [w̃ᵀx_i, w̃ᵀx_j]ᵀ)`, with the fixed `S` and
/// `r = R (1, 1, −1, −1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPsiParams {
    pub w_tilde: Vec<f64>,
    pub scale_r: f64,
    pub leaky_slope: f64,
    /// Negate the score, turning `Ψ` into `Ψ′ = −Ψ` for heterophilous graphs.
    pub sign_flip: bool,
}

impl MlpPsiParams {
    /// Uses `w̃ = μ / ‖μ‖`.
    pub fn from_mean(mu: &[f64], scale_r: f64, leaky_slope: f64, sign_flip: bool) -> Result<Self> {
        Self::new(unit_vector(mu)?, scale_r, leaky_slope, sign_flip)
    }

    /// The signed variant `Ψ′`, flipped exactly when `p < q`.
    pub fn signed_for(mu: &[f64], scale_r: f64, leaky_slope: f64, p: f64, q: f64) -> Result<Self> {
        Self::from_mean(mu, scale_r, leaky_slope, p < q)
    }

    pub fn new(w_tilde: Vec<f64>, scale_r: f64, leaky_slope: f64, sign_flip: bool) -> Result<Self> {
        let len = dot(&w_tilde, &w_tilde).sqrt();
        if (len - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::domain(format!("w_tilde must have unit norm, got {len}")));
        }
        // R = 0 is allowed: the score is then identically zero and attention
        // reduces to uniform averaging.
        if !(scale_r >= 0.0) || !scale_r.is_finite() {
            return Err(Error::domain(format!("scale R must be finite and >= 0, got {scale_r}")));
        }
        check_slope(leaky_slope)?;
        Ok(Self {
            w_tilde,
            scale_r,
            leaky_slope,
            sign_flip,
        })
    }

    fn orientation(&self) -> f64 {
        if self.sign_flip {
            -1.0
        } else {
            1.0
        }
    }
}

/// Three-branch closed form of `Ψ` on projections `(s_i, s_j)`, before any
/// sign flip.
pub fn psi_piecewise(s_i: f64, s_j: f64, scale_r: f64, leaky_slope: f64) -> f64 {
    let c = 2.0 * scale_r * (1.0 - leaky_slope);
    let a = s_i.abs();
    if s_j <= -a {
        -c * s_i
    } else if s_j < a {
        c * s_i.signum() * s_j
    } else {
        c * s_i
    }
}

/// `rᵀ LeakyReLU(S [s_i, s_j]ᵀ)` evaluated literally.
pub fn psi_two_layer(s_i: f64, s_j: f64, scale_r: f64, leaky_slope: f64) -> f64 {
    const S: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
    const R_DIR: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
    S.iter()
        .zip(R_DIR)
        .map(|(row, r)| scale_r * r * leaky_relu(row[0] * s_i + row[1] * s_j, leaky_slope))
        .sum()
}

/// `Ψ(x_i, x_j)` (or `Ψ′` when `params.sign_flip`).
pub fn mlp_attention_score(xi: &[f64], xj: &[f64], params: &MlpPsiParams) -> f64 {
    let s_i = dot(&params.w_tilde, xi);
    let s_j = dot(&params.w_tilde, xj);
    params.orientation() * psi_piecewise(s_i, s_j, params.scale_r, params.leaky_slope)
}

/// `Ψ` evaluated at the class means: `±2R(1 − β)‖μ‖` for intra and inter
/// pairs respectively. The sign flip is not applied.
pub fn psi_on_expected_means(params: &MlpPsiParams, mu: &[f64], same_class: bool) -> Result<f64> {
    if mu.len() != params.w_tilde.len() {
        return Err(Error::domain("mean dimension does not match w_tilde"));
    }
    if !(dot(mu, mu) > 0.0) {
        return Err(Error::domain("psi on expected means needs a non-zero mean"));
    }
    let s = dot(&params.w_tilde, mu);
    let s_j = if same_class { s } else { -s };
    Ok(psi_piecewise(s, s_j, params.scale_r, params.leaky_slope))
}

/// One head of the single-layer attention `LeakyReLU(aᵀ[wᵀx_i, wᵀx_j] + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatHeadParams {
    pub w: Vec<f64>,
    pub a: [f64; 2],
    pub b: f64,
    pub leaky_slope: f64,
}

impl GatHeadParams {
    pub fn new(w: Vec<f64>, a: [f64; 2], b: f64, leaky_slope: f64) -> Result<Self> {
        check_slope(leaky_slope)?;
        Ok(Self {
            w,
            a,
            b,
            leaky_slope,
        })
    }

    fn score_projections(&self, s_i: f64, s_j: f64) -> f64 {
        leaky_relu(self.a[0] * s_i + self.a[1] * s_j + self.b, self.leaky_slope)
    }
}

pub fn gat_single_layer_score(xi: &[f64], xj: &[f64], head: &GatHeadParams) -> f64 {
    head.score_projections(dot(&head.w, xi), dot(&head.w, xj))
}

/// The two-head ansatz: `w = μ/‖μ‖`, `a₁ = (1, 1)/√2`, `b₁ = −wᵀμ/√2`, and
/// the second head with `a₂ = −a₁`, `b₂ = −b₁`. The first head favours
/// class-1 pairs, the second class-0 pairs.
pub fn gat_ansatz_heads(mu: &[f64]) -> Result<(GatHeadParams, GatHeadParams)> {
    let w = unit_vector(mu)?;
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let b1 = -inv_sqrt2 * dot(&w, mu);
    let h1 = GatHeadParams::new(w.clone(), [inv_sqrt2, inv_sqrt2], b1, DEFAULT_LEAKY_SLOPE)?;
    let h2 = GatHeadParams::new(w, [-inv_sqrt2, -inv_sqrt2], -b1, DEFAULT_LEAKY_SLOPE)?;
    Ok((h1, h2))
}

/// Oracle attention that sees true labels: `±sign(p − q) t` for intra and
/// inter pairs, with `sign(0) = +1`.
#[derive(Debug, Clone, Copy)]
pub struct IdealizedPsiParams<'a> {
    pub t: f64,
    pub p: f64,
    pub q: f64,
    pub labels: &'a [u8],
}

impl<'a> IdealizedPsiParams<'a> {
    pub fn new(t: f64, p: f64, q: f64, labels: &'a [u8]) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("margin t must be finite and >= 0, got {t}")));
        }
        Ok(Self { t, p, q, labels })
    }
}

pub fn idealized_score(i: usize, j: usize, params: &IdealizedPsiParams<'_>) -> f64 {
    let s = sign_or_positive(params.p - params.q) * params.t;
    if params.labels[i] == params.labels[j] {
        s
    } else {
        -s
    }
}

/// A pairwise score on node indices, the input to the softmax.
pub trait EdgeScore: Sync {
    fn score(&self, i: usize, j: usize) -> f64;
}

impl<F> EdgeScore for F
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    fn score(&self, i: usize, j: usize) -> f64 {
        self(i, j)
    }
}

/// A constant score; its softmax is uniform over every `N_i`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScore(pub f64);

impl EdgeScore for ConstantScore {
    fn score(&self, _: usize, _: usize) -> f64 {
        self.0
    }
}

/// `Ψ` bound to a feature matrix, with projections precomputed.
#[derive(Debug, Clone)]
pub struct MlpPsiScore {
    projections: Vec<f64>,
    scale_r: f64,
    leaky_slope: f64,
    orientation: f64,
}

impl MlpPsiScore {
    pub fn new(sample: &LabeledGraph, params: &MlpPsiParams) -> Result<Self> {
        Ok(Self {
            projections: sample.features.project(&params.w_tilde)?,
            scale_r: params.scale_r,
            leaky_slope: params.leaky_slope,
            orientation: params.orientation(),
        })
    }

    pub fn projections(&self) -> &[f64] {
        &self.projections
    }
}

impl EdgeScore for MlpPsiScore {
    fn score(&self, i: usize, j: usize) -> f64 {
        self.orientation
            * psi_piecewise(
                self.projections[i],
                self.projections[j],
                self.scale_r,
                self.leaky_slope,
            )
    }
}

/// A single-layer attention head bound to a feature matrix.
#[derive(Debug, Clone)]
pub struct GatHeadScore {
    head: GatHeadParams,
    projections: Vec<f64>,
}

impl GatHeadScore {
    pub fn new(sample: &LabeledGraph, head: &GatHeadParams) -> Result<Self> {
        Ok(Self {
            projections: sample.features.project(&head.w)?,
            head: head.clone(),
        })
    }
}

impl EdgeScore for GatHeadScore {
    fn score(&self, i: usize, j: usize) -> f64 {
        self.head
            .score_projections(self.projections[i], self.projections[j])
    }
}

impl EdgeScore for IdealizedPsiParams<'_> {
    fn score(&self, i: usize, j: usize) -> f64 {
        idealized_score(i, j, self)
    }
}

/// Softmax attention coefficients `γ_ij` for every node, stored row-aligned
/// with the graph's self-inclusive neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionField {
    offsets: Vec<usize>,
    gamma: Vec<f64>,
}

impl AttentionField {
    /// `γ_ij = 1/|N_i|`.
    pub fn uniform(graph: &Graph) -> Self {
        let offsets = graph.offsets().to_vec();
        let mut gamma = Vec::with_capacity(*offsets.last().unwrap());
        for i in 0..graph.n() {
            let k = graph.neighborhood(i).len();
            gamma.extend(std::iter::repeat_n(1.0 / k as f64, k));
        }
        Self { offsets, gamma }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Coefficients of node `i`, aligned with `graph.neighborhood(i)`.
    pub fn coefficients(&self, i: usize) -> &[f64] {
        &self.gamma[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Entrywise mean of fields over the same graph. Averaging head outputs
    /// that share `w` is the same as convolving with this field.
    pub fn mean(fields: &[AttentionField]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::domain("mean of zero attention fields"))?;
        if fields.iter().any(|f| f.offsets != first.offsets) {
            return Err(Error::domain("attention fields live on different graphs"));
        }
        let k = fields.len() as f64;
        let gamma = (0..first.gamma.len())
            .map(|e| fields.iter().map(|f| f.gamma[e]).sum::<f64>() / k)
            .collect();
        Ok(Self {
            offsets: first.offsets.clone(),
            gamma,
        })
    }

    fn matches(&self, graph: &Graph) -> bool {
        self.offsets == graph.offsets()
    }
}

/// Max-subtracted softmax of `scores` into `out`.
fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `γ_ij` for `j ∈ N_i`, aligned with `sample.neighborhood(i)`.
pub fn attention_coefficients(
    sample: &LabeledGraph,
    score: &dyn EdgeScore,
    i: usize,
) -> Result<Vec<f64>> {
    let nbrs = sample.neighborhood(i)?;
    let mut scores = Vec::with_capacity(nbrs.len());
    for &j in nbrs {
        let s = score.score(i, j);
        if !s.is_finite() {
            return Err(Error::NonFiniteScore { i, j, score: s });
        }
        scores.push(s);
    }
    let mut gamma = vec![0.0; nbrs.len()];
    softmax_into(&scores, &mut gamma);
    Ok(gamma)
}

/// Coefficients for every node.
pub fn attention_field(sample: &LabeledGraph, score: &dyn EdgeScore) -> Result<AttentionField> {
    let graph = &sample.graph;
    let offsets = graph.offsets().to_vec();
    let mut gamma = vec![0.0; *offsets.last().unwrap()];
    let mut scores = Vec::new();
    for i in 0..graph.n() {
        let nbrs = graph.neighborhood(i);
        scores.clear();
        for &j in nbrs {
            let s = score.score(i, j);
            if !s.is_finite() {
                return Err(Error::NonFiniteScore { i, j, score: s });
            }
            scores.push(s);
        }
        softmax_into(&scores, &mut gamma[offsets[i]..offsets[i + 1]]);
    }
    Ok(AttentionField { offsets, gamma })
}

/// Per-node scalar output `h′_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionOutput {
    pub h_prime: Vec<f64>,
}

impl ConvolutionOutput {
    pub fn negated(&self) -> Self {
        Self {
            h_prime: self.h_prime.iter().map(|h| -h).collect(),
        }
    }

    /// Multiplies every entry by `factor`; used to orient outputs before
    /// taking signs.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h_prime: self.h_prime.iter().map(|h| factor * h).collect(),
        }
    }
}

/// `h′_i = Σ_{j∈N_i} γ_ij s_j` for precomputed projections `s`.
pub fn convolve_projections(
    graph: &Graph,
    field: &AttentionField,
    projections: &[f64],
) -> Result<ConvolutionOutput> {
    if !field.matches(graph) {
        return Err(Error::domain("attention field does not match the graph's neighborhoods"));
    }
    if projections.len() != graph.n() {
        return Err(Error::domain("projection length does not match node count"));
    }
    let h_prime = (0..graph.n())
        .map(|i| {
            graph
                .neighborhood(i)
                .iter()
                .zip(field.coefficients(i))
                .map(|(&j, g)| g * projections[j])
                .sum()
        })
        .collect();
    Ok(ConvolutionOutput { h_prime })
}

/// `h′_i = Σ_{j∈N_i} γ_ij wᵀX_j`.
pub fn attention_convolution(
    sample: &LabeledGraph,
    field: &AttentionField,
    w: &[f64],
) -> Result<ConvolutionOutput> {
    let projections = sample.features.project(w)?;
    convolve_projections(&sample.graph, field, &projections)
}

/// Mean of the single-head outputs of every head.
pub fn multi_head_convolution(
    sample: &LabeledGraph,
    heads: &[&dyn EdgeScore],
    w: &[f64],
) -> Result<ConvolutionOutput> {
    if heads.is_empty() {
        return Err(Error::domain("multi-head convolution needs at least one head"));
    }
    let projections = sample.features.project(w)?;
    let mut acc = vec![0.0; sample.n()];
    for head in heads {
        let field = attention_field(sample, *head)?;
        let out = convolve_projections(&sample.graph, &field, &projections)?;
        for (a, h) in acc.iter_mut().zip(out.h_prime) {
            *a += h;
        }
    }
    let k = heads.len() as f64;
    Ok(ConvolutionOutput {
        h_prime: acc.into_iter().map(|a| a / k).collect(),
    })
}

/// Uniform averaging over `N_i`: `h′_i = |N_i|⁻¹ Σ_{j∈N_i} wᵀX_j`.
pub fn simple_graph_convolution(sample: &LabeledGraph, w: &[f64]) -> Result<ConvolutionOutput> {
    let projections = sample.features.project(w)?;
    let h_prime = (0..sample.n())
        .map(|i| {
            let nbrs = sample.graph.neighborhood(i);
            nbrs.iter().map(|&j| projections[j]).sum::<f64>() / nbrs.len() as f64
        })
        .collect();
    Ok(ConvolutionOutput { h_prime })
}
