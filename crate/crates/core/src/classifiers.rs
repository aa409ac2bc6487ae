//! Reference classifiers: Bayes-optimal node and edge rules, spectral
//! recovery from the adjacency matrix, and sign thresholding of convolution
//! outputs.

use crate::attention::ConvolutionOutput;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{dot, log_cosh, norm, RngStream};

/// Tolerance on the relative eigen-residual in power iteration.
pub const SPECTRAL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITERS: usize = 10_000;

/// Fixed seed of the start vector for the second eigenvector.
const SPECTRAL_START_SEED: u64 = 0x5eed_0002;

/// Features of a node pair: `x = [X_i; X_j]`, `μ′ = [μ; μ]`, `ν′ = [μ; −μ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePairFeature {
    pub x: Vec<f64>,
    pub mu_prime: Vec<f64>,
    pub nu_prime: Vec<f64>,
}

impl EdgePairFeature {
    pub fn new(xi: &[f64], xj: &[f64], mu: &[f64]) -> Result<Self> {
        if xi.len() != mu.len() || xj.len() != mu.len() {
            return Err(Error::domain("edge pair features must match the mean dimension"));
        }
        let x = [xi, xj].concat();
        let mu_prime = [mu, mu].concat();
        let neg: Vec<f64> = mu.iter().map(|m| -m).collect();
        let nu_prime = [mu, &neg[..]].concat();
        Ok(Self {
            x,
            mu_prime,
            nu_prime,
        })
    }
}

/// `1` iff `μᵀx > 0`.
pub fn bayes_node_classify(x: &[f64], mu: &[f64]) -> u8 {
    u8::from(dot(mu, x) > 0.0)
}

/// `0` (inter) iff `p cosh(xᵀμ′/σ²) ≤ q cosh(xᵀν′/σ²)`, else `1` (intra).
pub fn bayes_edge_classify(pair: &EdgePairFeature, sigma: f64, p: f64, q: f64) -> Result<u8> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("p and q must be probabilities, got ({p}, {q})")));
    }
    if p == 0.0 && q == 0.0 {
        return Err(Error::domain("edge classifier is undefined for p = q = 0"));
    }
    let s2 = sigma * sigma;
    let intra = p.ln() + log_cosh(dot(&pair.x, &pair.mu_prime) / s2);
    let inter = q.ln() + log_cosh(dot(&pair.x, &pair.nu_prime) / s2);
    Ok(u8::from(!(intra <= inter)))
}

/// `1` where `h′_i > 0`, otherwise `0`.
pub fn sign_decision(h: &ConvolutionOutput) -> Vec<u8> {
    h.h_prime.iter().map(|&v| u8::from(v > 0.0)).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let len = norm(v);
    if len > 0.0 {
        for x in v.iter_mut() {
            *x /= len;
        }
    }
    len
}

fn remove_component(v: &mut [f64], dir: &[f64]) {
    let c = dot(v, dir);
    for (x, d) in v.iter_mut().zip(dir) {
        *x -= c * d;
    }
}

/// Power iteration for the dominant eigenpair of `A − λ₁ v₁v₁ᵀ` (or `A`
/// itself when `deflate` is `None`). Returns `(λ, v)` with `‖v‖ = 1`.
fn power_iteration(
    graph: &Graph,
    start: Vec<f64>,
    deflate: Option<(f64, &[f64])>,
) -> Result<(f64, Vec<f64>)> {
    let n = graph.n();
    let mut v = start;
    if let Some((_, u)) = deflate {
        remove_component(&mut v, u);
    }
    if normalize(&mut v) == 0.0 {
        return Err(Error::Convergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    let mut bv = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..SPECTRAL_MAX_ITERS {
        graph.adjacency_mul(&v, &mut bv);
        if let Some((lambda, u)) = deflate {
            let c = lambda * dot(u, &v);
            for (b, x) in bv.iter_mut().zip(u) {
                *b -= c * x;
            }
            remove_component(&mut bv, u);
        }
        let rayleigh = dot(&v, &bv);
        let bv_norm = norm(&bv);
        residual = bv
            .iter()
            .zip(&v)
            .map(|(b, x)| (b - rayleigh * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if bv_norm == 0.0 {
            // v lies in the null space; every vector there is an eigenvector.
            return Ok((0.0, v));
        }
        if residual <= SPECTRAL_TOL * bv_norm {
            return Ok((rayleigh, v));
        }
        v.copy_from_slice(&bv);
        normalize(&mut v);
    }
    Err(Error::Convergence {
        iterations: SPECTRAL_MAX_ITERS,
        residual,
    })
}

/// Labels from the sign of the eigenvector belonging to the second-largest
/// magnitude eigenvalue of the adjacency matrix. The result is defined only
/// up to a global flip.
pub fn spectral_node_classify(graph: &Graph) -> Result<Vec<u8>> {
    let n = graph.n();
    if n < 2 {
        return Err(Error::domain("spectral classification needs at least two nodes"));
    }
    let (lambda1, v1) = power_iteration(graph, vec![1.0; n], None)?;
    let mut rng = RngStream::new(SPECTRAL_START_SEED, 0);
    let start = (0..n).map(|_| rng.standard_normal()).collect();
    let (_, v2) = power_iteration(graph, start, Some((lambda1, &v1)))?;
    Ok(v2.iter().map(|&x| u8::from(x > 0.0)).collect())
}
