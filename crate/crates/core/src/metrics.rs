//! Edge and node accuracies, attention coefficient statistics and regime
//! labels.

use crate::attention::{AttentionField, EdgeScore};
use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::numerics::std_normal_sf;

/// Default finite-n stand-in for "κ grows without bound".
pub const DEFAULT_ALMOST_PERFECT_KAPPA: f64 = 3.0;

/// Per-class tallies of edge classifications. Empty classes have no
/// accuracy; an edge-free graph has no metrics at all (see
/// [`edge_metrics`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeMetrics {
    pub intra_correct: usize,
    pub intra_total: usize,
    pub inter_correct: usize,
    pub inter_total: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EdgeMetrics {
    pub fn record(&mut self, same_class: bool, predicted_intra: Option<bool>) {
        if same_class {
            self.intra_total += 1;
            self.intra_correct += usize::from(predicted_intra == Some(true));
        } else {
            self.inter_total += 1;
            self.inter_correct += usize::from(predicted_intra == Some(false));
        }
    }

    pub fn total(&self) -> usize {
        self.intra_total + self.inter_total
    }

    pub fn intra_accuracy(&self) -> Option<f64> {
        ratio(self.intra_correct, self.intra_total)
    }

    pub fn inter_accuracy(&self) -> Option<f64> {
        ratio(self.inter_correct, self.inter_total)
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        ratio(self.intra_correct + self.inter_correct, self.total())
    }

    pub fn inter_misclassified_fraction(&self) -> Option<f64> {
        ratio(self.inter_total - self.inter_correct, self.inter_total)
    }
}

/// Classifies every edge `i < j` of the graph by the sign of
/// `orientation * score(i, j)`: positive means intra, negative inter, zero is
/// wrong for both. Returns `None` for a graph without edges.
pub fn edge_metrics(
    sample: &LabeledGraph,
    score: &dyn EdgeScore,
    orientation: f64,
) -> Option<EdgeMetrics> {
    let mut m = EdgeMetrics::default();
    for (i, j) in sample.graph.edges() {
        let s = orientation * score.score(i, j);
        let predicted = if s > 0.0 {
            Some(true)
        } else if s < 0.0 {
            Some(false)
        } else {
            None
        };
        m.record(sample.same_class(i, j), predicted);
    }
    (m.total() > 0).then_some(m)
}

/// Edge metrics from an explicit intra/inter decision per edge.
pub fn edge_metrics_from_decisions(
    sample: &LabeledGraph,
    mut predict_intra: impl FnMut(usize, usize) -> Result<bool>,
) -> Result<Option<EdgeMetrics>> {
    let mut m = EdgeMetrics::default();
    for (i, j) in sample.graph.edges() {
        let predicted = predict_intra(i, j)?;
        m.record(sample.same_class(i, j), Some(predicted));
    }
    Ok((m.total() > 0).then_some(m))
}

/// Fraction of positions where `pred` equals `truth`; with `up_to_flip` the
/// better of `pred` and its complement.
pub fn node_accuracy(pred: &[u8], truth: &[u8], up_to_flip: bool) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::domain(format!(
            "prediction length {} differs from truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::domain("node accuracy over zero nodes"));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    let acc = hits as f64 / pred.len() as f64;
    Ok(if up_to_flip { acc.max(1.0 - acc) } else { acc })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Welford running moments.
#[derive(Debug, Default)]
struct Accumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn finish(&self) -> Option<Moments> {
        (self.count > 0).then(|| Moments {
            mean: self.mean,
            std: (self.m2 / self.count as f64).max(0.0).sqrt(),
        })
    }
}

/// Attention coefficient statistics over ordered pairs `(i, j)`, `j ∈ N_i`,
/// `j ≠ i`, split by class agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStats {
    pub intra: Option<Moments>,
    pub inter: Option<Moments>,
    /// `2/(np)`, present when `p > 0`.
    pub ref_intra: Option<f64>,
    /// `2/(nq)`, present when `q > 0`.
    pub ref_inter: Option<f64>,
    /// Moments of `1/|N_i|` over the same pairs; absent without edges.
    pub uniform: Option<Moments>,
}

pub fn gamma_stats(sample: &LabeledGraph, field: &AttentionField, p: f64, q: f64) -> GammaStats {
    let mut intra = Accumulator::default();
    let mut inter = Accumulator::default();
    let mut uniform = Accumulator::default();
    let n = sample.n();
    for i in 0..n {
        let nbrs = sample.graph.neighborhood(i);
        let u = 1.0 / nbrs.len() as f64;
        for (&j, &g) in nbrs.iter().zip(field.coefficients(i)) {
            if j == i {
                continue;
            }
            uniform.push(u);
            if sample.same_class(i, j) {
                intra.push(g);
            } else {
                inter.push(g);
            }
        }
    }
    let reference = |prob: f64| (prob > 0.0).then(|| 2.0 / (n as f64 * prob));
    GammaStats {
        intra: intra.finish(),
        inter: inter.finish(),
        ref_intra: reference(p),
        ref_inter: reference(q),
        uniform: uniform.finish(),
    }
}

/// Fraction of nodes `i` at which, separately within `N_i ∩ C₀` and
/// `N_i ∩ C₁`, at least `neighbor_fraction` of the neighbors satisfy
/// `lo ≤ γ_ij |N_i| ≤ hi`.
pub fn uniform_band_node_fraction(
    sample: &LabeledGraph,
    field: &AttentionField,
    lo: f64,
    hi: f64,
    neighbor_fraction: f64,
) -> f64 {
    let n = sample.n();
    let mut good = 0usize;
    for i in 0..n {
        let nbrs = sample.graph.neighborhood(i);
        let size = nbrs.len() as f64;
        let mut inside = [0usize; 2];
        let mut total = [0usize; 2];
        for (&j, &g) in nbrs.iter().zip(field.coefficients(i)) {
            let c = usize::from(sample.labels[j]);
            total[c] += 1;
            let scaled = g * size;
            inside[c] += usize::from((lo..=hi).contains(&scaled));
        }
        let ok = (0..2).all(|c| inside[c] as f64 >= neighbor_fraction * total[c] as f64);
        good += usize::from(ok);
    }
    good as f64 / n as f64
}

/// `2 Φc(κ)²`, the least fraction of inter-class edges any edge rule must
/// misclassify when `‖μ‖ = κσ`.
pub fn inter_edge_floor(kappa: f64) -> Result<f64> {
    let tail = std_normal_sf(kappa)?;
    Ok(2.0 * tail * tail)
}

/// Whether the observed inter-class misclassification reaches the floor up
/// to `slack`. Metrics without inter-class edges never pass.
pub fn hard_regime_floor_check(kappa: f64, em: &EdgeMetrics, slack: f64) -> Result<bool> {
    if !(slack >= 0.0) {
        return Err(Error::domain(format!("slack must be >= 0, got {slack}")));
    }
    let floor = inter_edge_floor(kappa)?;
    Ok(em
        .inter_misclassified_fraction()
        .is_some_and(|f| f >= floor - slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Perfect,
    AlmostPerfect,
    Partial,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Perfect => "perfect",
            Regime::AlmostPerfect => "almost-perfect",
            Regime::Partial => "partial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeLabel {
    pub kappa: f64,
    pub regime: Regime,
}

/// Perfect iff `κ ≥ √(2 ln n)`, almost perfect iff `κ ≥ almost_threshold`,
/// partial otherwise.
pub fn regime_label(kappa: f64, n: usize, almost_threshold: f64) -> Result<RegimeLabel> {
    if n < 2 {
        return Err(Error::domain("regime label needs n >= 2"));
    }
    let perfect = (2.0 * (n as f64).ln()).sqrt();
    let regime = if kappa >= perfect {
        Regime::Perfect
    } else if kappa >= almost_threshold {
        Regime::AlmostPerfect
    } else {
        Regime::Partial
    };
    Ok(RegimeLabel { kappa, regime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::{attention_field, ConstantScore, IdealizedPsiParams};
    use crate::csbm::{sample_csbm, CsbmParams};
    use crate::graph::{Features, Graph};
    use crate::numerics::RngStream;

    fn sample(seed: u64) -> LabeledGraph {
        let pr = CsbmParams::new(200, 0.3, 0.1, vec![1.0, 0.0], 0.5).unwrap();
        sample_csbm(&pr, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn idealized_scores_classify_every_edge() {
        let s = sample(1);
        let ideal = IdealizedPsiParams::new(2.0, 0.3, 0.1, &s.labels).unwrap();
        let m = edge_metrics(&s, &ideal, 1.0).unwrap();
        assert_eq!(m.intra_accuracy(), Some(1.0));
        assert_eq!(m.inter_accuracy(), Some(1.0));
        assert_eq!(m.overall_accuracy(), Some(1.0));
        assert_eq!(m.inter_misclassified_fraction(), Some(0.0));
    }

    #[test]
    fn zero_score_is_always_wrong() {
        let s = sample(2);
        let m = edge_metrics(&s, &ConstantScore(0.0), 1.0).unwrap();
        assert_eq!(m.overall_accuracy(), Some(0.0));
        assert_eq!(m.inter_misclassified_fraction(), Some(1.0));
    }

    #[test]
    fn edgeless_graph_has_no_metrics() {
        let g = LabeledGraph::new(
            vec![0, 1],
            Features::from_rows(vec![vec![0.0], vec![1.0]]).unwrap(),
            Graph::from_edges(2, &[]).unwrap(),
        )
        .unwrap();
        assert!(edge_metrics(&g, &ConstantScore(1.0), 1.0).is_none());
        assert!(edge_metrics_from_decisions(&g, |_, _| Ok(true))
            .unwrap()
            .is_none());
    }

    #[test]
    fn node_accuracy_examples() {
        let t = [0u8, 1, 1, 0];
        assert_eq!(node_accuracy(&t, &t, false).unwrap(), 1.0);
        assert_eq!(node_accuracy(&[1, 0, 0, 1], &t, true).unwrap(), 1.0);
        assert_eq!(node_accuracy(&[1, 0, 0, 1], &t, false).unwrap(), 0.0);
        assert!(node_accuracy(&t, &t[..3], false).is_err());
    }

    #[test]
    fn random_predictions_score_one_half() {
        let mut rng = RngStream::new(9, 0);
        let n = 10_000;
        let a: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        let b: Vec<u8> = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
        assert!((node_accuracy(&a, &b, false).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn uniform_field_reproduces_uniform_reference() {
        let s = sample(3);
        let field = AttentionField::uniform(&s.graph);
        let st = gamma_stats(&s, &field, 0.3, 0.1);
        let (intra, inter, uni) = (st.intra.unwrap(), st.inter.unwrap(), st.uniform.unwrap());
        // Oracle: enumerate the uniform coefficients directly.
        let mut all = Vec::new();
        for i in 0..s.n() {
            for &j in s.graph.neighborhood(i) {
                if j != i {
                    all.push(1.0 / (s.graph.degree(i) + 1) as f64);
                }
            }
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!((uni.mean - mean).abs() < 1e-12);
        assert!(intra.mean > 0.0 && inter.mean > 0.0);
        assert!(intra.std >= 0.0 && inter.std >= 0.0);
        assert_eq!(st.ref_intra, Some(2.0 / (200.0 * 0.3)));
        assert_eq!(st.ref_inter, Some(2.0 / (200.0 * 0.1)));
        assert_eq!(uniform_band_node_fraction(&s, &field, 1.0 - 1e-12, 1.0 + 1e-12, 1.0), 1.0);
    }

    #[test]
    fn uniform_stats_match_on_regular_graph() {
        // A 4-cycle: every |N_i| is 3, so every statistic is exact.
        let g = LabeledGraph::new(
            vec![0, 1, 0, 1],
            Features::from_rows(vec![vec![0.0]; 4]).unwrap(),
            Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap(),
        )
        .unwrap();
        let st = gamma_stats(&g, &AttentionField::uniform(&g.graph), 0.5, 0.5);
        assert!(st.intra.is_none());
        let inter = st.inter.unwrap();
        let uni = st.uniform.unwrap();
        assert!((inter.mean - uni.mean).abs() < 1e-12);
        assert!((inter.std - uni.std).abs() < 1e-12);
        assert!(inter.std < 1e-12);
    }

    #[test]
    fn strong_attention_fails_the_uniform_band() {
        let s = sample(4);
        let ideal = IdealizedPsiParams::new(20.0, 0.3, 0.1, &s.labels).unwrap();
        let field = attention_field(&s, &ideal).unwrap();
        assert!(uniform_band_node_fraction(&s, &field, 0.25, 4.0, 0.9) < 0.5);
    }

    #[test]
    fn floor_examples() {
        let em = |misclassified: usize| EdgeMetrics {
            intra_correct: 0,
            intra_total: 0,
            inter_correct: 100 - misclassified,
            inter_total: 100,
        };
        let floor = inter_edge_floor(1.0).unwrap();
        assert!((floor - 0.050_343).abs() < 1e-5, "{floor}");
        assert!(hard_regime_floor_check(1.0, &em(6), 0.02).unwrap());
        assert_eq!(inter_edge_floor(0.0).unwrap(), 0.5);
        assert!(hard_regime_floor_check(0.0, &em(50), 0.0).unwrap());
        assert!(!hard_regime_floor_check(1.0, &em(0), 0.02).unwrap());
        assert!(hard_regime_floor_check(1.0, &em(6), -1.0).is_err());
    }

    #[test]
    fn regime_examples() {
        let t = DEFAULT_ALMOST_PERFECT_KAPPA;
        assert_eq!(regime_label(4.0, 1000, t).unwrap().regime, Regime::Perfect);
        assert_eq!(regime_label(0.5, 1000, t).unwrap().regime, Regime::Partial);
        assert_eq!(regime_label(3.2, 1000, t).unwrap().regime, Regime::AlmostPerfect);
        let edge = (2.0 * 1000f64.ln()).sqrt();
        assert_eq!(regime_label(edge, 1000, t).unwrap().regime, Regime::Perfect);
        assert!(regime_label(1.0, 1, t).is_err());
    }
}
