//! Qualitative trends on a small citation-style fixture.

use std::path::PathBuf;

use csbm_attention::dataset::{load_external_graph, one_vs_all_mean_shift, shift_direction, evaluate_real_task, ExternalGraph};
use csbm_attention::experiments::{Metric, Model, SweepRecord};

fn fixture() -> ExternalGraph {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny_citation");
    load_external_graph(
        &dir.join("features.tsv"),
        &dir.join("edges.tsv"),
        &dir.join("labels.tsv"),
        Some(&dir.join("masks.tsv")),
    )
    .unwrap()
}

fn series(recs: &[SweepRecord], metric: Metric) -> Vec<f64> {
    recs.iter()
        .filter(|r| r.model == "mlp-psi" && r.metric == metric)
        .map(|r| r.value)
        .collect()
}

const GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[test]
fn fixture_loads() {
    let g = fixture();
    assert_eq!(g.n(), 90);
    assert_eq!(g.edges.len(), 221);
    assert_eq!(g.eval_nodes().iter().filter(|&&e| e).count(), 60);
}

#[test]
fn larger_shift_helps_mlp_attention() {
    let g = fixture();
    for class in 0..3 {
        let u = shift_direction(&g, class).unwrap();
        let task = one_vs_all_mean_shift(&g, class, &vec![0.0; u.len()]).unwrap();
        let recs = evaluate_real_task(&task, &[Model::MlpPsi], &GRID).unwrap();
        let acc = series(&recs, Metric::EdgeAcc);
        assert_eq!(acc.len(), GRID.len());
        for w in acc.windows(2) {
            assert!(w[1] >= w[0], "class {class}: edge accuracy {acc:?}");
        }
        let intra = series(&recs, Metric::GammaIntraMean);
        let inter = series(&recs, Metric::GammaInterMean);
        let ratio: Vec<f64> = intra.iter().zip(&inter).map(|(a, b)| a / b).collect();
        for w in ratio.windows(2) {
            assert!(w[1] > w[0], "class {class}: gamma separation {ratio:?}");
        }
        assert!(acc[GRID.len() - 1] > 0.99);
    }
}

#[test]
fn baselines_on_fixture() {
    let g = fixture();
    let u = shift_direction(&g, 0).unwrap();
    let task = one_vs_all_mean_shift(&g, 0, &vec![0.0; u.len()]).unwrap();
    let recs = evaluate_real_task(&task, &[Model::Linear, Model::Gcn], &[8.0]).unwrap();
    let acc = |m: &str| {
        recs.iter()
            .find(|r| r.model == m && r.metric == Metric::NodeAcc)
            .map(|r| r.value)
            .unwrap()
    };
    assert_eq!(acc("linear"), 1.0);
    assert!(acc("gcn") > 0.5);
}
