//! External graphs in a plain TSV layout and the one-vs-all mean-shift
//! protocol used to run the attention models on them.
//!
//! Layout, all files UTF-8, newline terminated, no header:
//!
//! * `features.tsv`: `node_id` followed by `d` floats
//! * `edges.tsv`: `u v`, one undirected edge per line
//! * `labels.tsv`: `node_id class`
//! * `masks.tsv` (optional): `node_id train|val|test`

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::records::{sort_records, Metric, SweepRecord};
use crate::experiments::sweep::{evaluate_model, ModelContext};
use crate::experiments::Model;
use crate::graph::{Features, Graph, LabeledGraph};
use crate::numerics::{dot, norm};

/// Below this norm the class-mean difference is treated as zero.
const DIRECTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalGraph {
    pub features: Features,
    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub labels: Vec<i64>,
    pub masks: Option<Vec<Split>>,
}

impl ExternalGraph {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn graph(&self) -> Graph {
        Graph::from_edges(self.n(), &self.edges).expect("edges were validated on load")
    }

    /// Nodes outside the training split; every node when there are no masks.
    pub fn eval_nodes(&self) -> Vec<bool> {
        match &self.masks {
            None => vec![true; self.n()],
            Some(m) => m.iter().map(|s| *s != Split::Train).collect(),
        }
    }

    /// The graph with labels as-is; labels must already be 0 or 1.
    pub fn to_labeled_graph(&self) -> Result<LabeledGraph> {
        let labels = self
            .labels
            .iter()
            .map(|&l| match l {
                0 | 1 => Ok(l as u8),
                other => Err(Error::domain(format!("label {other} is not binary"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        LabeledGraph::new(labels, self.features.clone(), self.graph())
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-empty lines as `(1-based line number, whitespace separated fields)`.
fn read_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_string).collect()))
        .collect())
}

fn parse_node(path: &Path, line: usize, s: &str, n: Option<usize>) -> Result<usize> {
    let id: usize = s
        .parse()
        .map_err(|_| parse_error(path, line, format!("bad node id '{s}'")))?;
    if let Some(n) = n {
        if id >= n {
            return Err(parse_error(path, line, format!("unknown node id {id} (n = {n})")));
        }
    }
    Ok(id)
}

/// Assigns one value per node id, requiring every id in `0..n` exactly once.
fn per_node<T: Clone>(
    path: &Path,
    rows: Vec<(usize, usize, T)>,
    n: Option<usize>,
) -> Result<Vec<T>> {
    let n = n.unwrap_or(rows.len());
    let mut slots: Vec<Option<T>> = vec![None; n];
    for (line, id, value) in rows {
        if id >= n {
            return Err(parse_error(path, line, format!("unknown node id {id} (n = {n})")));
        }
        if slots[id].is_some() {
            return Err(parse_error(path, line, format!("node {id} listed twice")));
        }
        slots[id] = Some(value);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, v)| v.ok_or_else(|| parse_error(path, 0, format!("node {id} is missing"))))
        .collect()
}

fn load_features(path: &Path) -> Result<Features> {
    let mut d = None;
    let mut rows = Vec::new();
    for (line, fields) in read_rows(path)? {
        let id = parse_node(path, line, &fields[0], None)?;
        let values = fields[1..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(path, line, format!("bad feature value '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match d {
            None if values.is_empty() => {
                return Err(parse_error(path, line, "row has no feature values"));
            }
            None => d = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("ragged row: {} values, expected {d}", values.len()),
                ));
            }
            Some(_) => {}
        }
        rows.push((line, id, values));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, "no feature rows"));
    }
    Features::from_rows(per_node(path, rows, None)?)
}

fn load_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for (line, fields) in read_rows(path)? {
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected two node ids"));
        }
        let u = parse_node(path, line, &fields[0], Some(n))?;
        let v = parse_node(path, line, &fields[1], Some(n))?;
        if u == v {
            return Err(parse_error(path, line, format!("self-loop at line {line}")));
        }
        let e = (u.min(v), u.max(v));
        if !seen.insert(e) {
            return Err(parse_error(path, line, format!("duplicate edge ({}, {})", e.0, e.1)));
        }
        edges.push(e);
    }
    edges.sort_unstable();
    Ok(edges)
}

fn load_labels(path: &Path, n: usize) -> Result<Vec<i64>> {
    let mut rows = Vec::new();
    for (line, fields) in read_rows(path)? {
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected node id and class"));
        }
        let id = parse_node(path, line, &fields[0], Some(n))?;
        let class: i64 = fields[1]
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad class '{}'", fields[1])))?;
        rows.push((line, id, class));
    }
    per_node(path, rows, Some(n))
}

fn load_masks(path: &Path, n: usize) -> Result<Vec<Split>> {
    let mut rows = Vec::new();
    for (line, fields) in read_rows(path)? {
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected node id and split"));
        }
        let id = parse_node(path, line, &fields[0], Some(n))?;
        let split = Split::parse(&fields[1])
            .ok_or_else(|| parse_error(path, line, format!("bad split '{}'", fields[1])))?;
        rows.push((line, id, split));
    }
    per_node(path, rows, Some(n))
}

pub fn load_external_graph(
    features_path: &Path,
    edges_path: &Path,
    labels_path: &Path,
    masks_path: Option<&Path>,
) -> Result<ExternalGraph> {
    let features = load_features(features_path)?;
    let n = features.n();
    let edges = load_edges(edges_path, n)?;
    let labels = load_labels(labels_path, n)?;
    let masks = masks_path.map(|p| load_masks(p, n)).transpose()?;
    Ok(ExternalGraph {
        features,
        edges,
        labels,
        masks,
    })
}

/// A binary task carved out of a multi-class graph.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedTask {
    pub graph: ExternalGraph,
    pub target_class: i64,
    /// Binary labels, shifted features and the graph, ready for the models.
    pub sample: LabeledGraph,
    pub mu_applied: Vec<f64>,
}

impl BinarizedTask {
    pub fn binary_labels(&self) -> &[u8] {
        &self.sample.labels
    }

    pub fn shifted_features(&self) -> &Features {
        &self.sample.features
    }
}

fn group_means(features: &Features, labels: &[u8]) -> Result<[Vec<f64>; 2]> {
    let d = features.dim();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (x, &l) in features.rows().zip(labels) {
        let c = usize::from(l);
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..2 {
        if counts[c] == 0 {
            return Err(Error::domain(if c == 1 {
                "target class has no nodes"
            } else {
                "every node belongs to the target class"
            }));
        }
        for s in sums[c].iter_mut() {
            *s /= counts[c] as f64;
        }
    }
    Ok(sums)
}

fn binarize(graph: &ExternalGraph, target: i64) -> Vec<u8> {
    graph.labels.iter().map(|&l| u8::from(l == target)).collect()
}

/// Recentres the target class at `+mu` and all other nodes jointly at `−mu`.
pub fn one_vs_all_mean_shift(graph: &ExternalGraph, target: i64, mu: &[f64]) -> Result<BinarizedTask> {
    if mu.len() != graph.features.dim() {
        return Err(Error::domain(format!(
            "mean has dimension {}, features have {}",
            mu.len(),
            graph.features.dim()
        )));
    }
    let labels = binarize(graph, target);
    let means = group_means(&graph.features, &labels)?;
    let mut features = graph.features.clone();
    for (i, &l) in labels.iter().enumerate() {
        let (mean, sign) = if l == 1 { (&means[1], 1.0) } else { (&means[0], -1.0) };
        for ((x, m), t) in features.row_mut(i).iter_mut().zip(mean).zip(mu) {
            *x = *x - m + sign * t;
        }
    }
    let sample = LabeledGraph::new(labels, features, graph.graph())?;
    Ok(BinarizedTask {
        graph: graph.clone(),
        target_class: target,
        sample,
        mu_applied: mu.to_vec(),
    })
}

/// Unit direction of the injected mean: the normalized difference of the
/// raw class means, or the first axis when that difference vanishes.
pub fn shift_direction(graph: &ExternalGraph, target: i64) -> Result<Vec<f64>> {
    let means = group_means(&graph.features, &binarize(graph, target))?;
    let diff: Vec<f64> = means[1].iter().zip(&means[0]).map(|(a, b)| a - b).collect();
    let len = norm(&diff);
    if len < DIRECTION_EPS {
        let mut e1 = vec![0.0; diff.len()];
        e1[0] = 1.0;
        return Ok(e1);
    }
    Ok(diff.into_iter().map(|x| x / len).collect())
}

/// Within-class standard deviation of the shifted features, pooled over
/// coordinates.
fn pooled_sigma(sample: &LabeledGraph, mu: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, &l) in sample.features.rows().zip(&sample.labels) {
        let sign = if l == 1 { 1.0 } else { -1.0 };
        acc += x.iter().zip(mu).map(|(v, m)| (v - sign * m).powi(2)).sum::<f64>();
    }
    (acc / (sample.n() * sample.dim()) as f64).sqrt()
}

/// Edge densities `(p̂, q̂)` within and across the two classes.
fn edge_densities(sample: &LabeledGraph) -> (f64, f64) {
    let n1 = sample.labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = sample.n() as f64 - n1;
    let (mut intra, mut inter) = (0.0, 0.0);
    for (i, j) in sample.graph.edges() {
        if sample.same_class(i, j) {
            intra += 1.0;
        } else {
            inter += 1.0;
        }
    }
    let intra_pairs = n1 * (n1 - 1.0) / 2.0 + n0 * (n0 - 1.0) / 2.0;
    let inter_pairs = n1 * n0;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    (ratio(intra, intra_pairs), ratio(inter, inter_pairs))
}

/// Runs `models` on the task's graph once per `‖μ‖` in `mu_norm_grid`,
/// shifting the raw features with `μ = ‖μ‖ u`. Node metrics use the
/// non-training nodes; edge metrics and attention statistics use every edge.
/// Models see `p` and `q` as the empirical edge densities of the binarized
/// graph and `σ` as the pooled within-class spread.
pub fn evaluate_real_task(
    task: &BinarizedTask,
    models: &[Model],
    mu_norm_grid: &[f64],
) -> Result<Vec<SweepRecord>> {
    if models.is_empty() {
        return Err(Error::config("model list is empty"));
    }
    if mu_norm_grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::config("mu norm grid values must be finite and >= 0"));
    }
    let u = shift_direction(&task.graph, task.target_class)?;
    let eval = task.graph.eval_nodes();
    let has_eval = eval.iter().any(|&e| e);
    let chunks = mu_norm_grid
        .par_iter()
        .map(|&m| -> Result<Vec<SweepRecord>> {
            let skip = |model: &Model| SweepRecord::new(m, 0, model.name(), Metric::Skipped, 1.0);
            if !has_eval {
                return Ok(models.iter().map(skip).collect());
            }
            let mu: Vec<f64> = u.iter().map(|x| m * x).collect();
            let shifted = one_vs_all_mean_shift(&task.graph, task.target_class, &mu)?;
            let sample = &shifted.sample;
            let (p, q) = edge_densities(sample);
            let ctx = ModelContext {
                mu: &mu,
                p,
                q,
                sigma: pooled_sigma(sample, &mu),
                scale_r: Some(1.0),
                leaky_slope: crate::attention::DEFAULT_LEAKY_SLOPE,
                eval_nodes: Some(&eval),
            };
            let mut out = Vec::new();
            for &model in models {
                for (metric, value) in evaluate_model(model, sample, &ctx)? {
                    out.push(SweepRecord::new(m, 0, model.name(), metric, value));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<SweepRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// Mean of `w̃ᵀx` over each group, for checking the injected separation.
pub fn class_projection_means(task: &BinarizedTask) -> Result<[f64; 2]> {
    let w = crate::numerics::unit_vector(&task.mu_applied)?;
    let means = group_means(&task.sample.features, &task.sample.labels)?;
    Ok([dot(&w, &means[0]), dot(&w, &means[1])])
}
