//! Random-forest regression trained by behavior cloning. Trees split on
//! variance reduction with midpoint thresholds; forests average tree
//! predictions and are bit-reproducible from (data, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("empty training data")]
    EmptyData,
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("feature dimensionality mismatch: forest expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("forest parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn (with replacement) per tree.
    pub bootstrap_fraction: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> ForestConfig {
        ForestConfig {
            n_trees: 50,
            max_depth: 12,
            min_samples_leaf: 5,
            bootstrap_fraction: 1.0,
            seed: 7,
        }
    }
}

/// Training rows with provenance for CSV dumps.
#[derive(Clone, Debug, Default)]
pub struct ImitationDataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// (scene id, rollout step) per row.
    pub provenance: Vec<(u32, u32)>,
}

impl ImitationDataset {
    pub fn push(&mut self, features: Vec<f64>, target: f64, scene: u32, step: u32) {
        self.features.push(features);
        self.targets.push(target.clamp(0.0, 1.0));
        self.provenance.push((scene, step));
    }

    pub fn extend(&mut self, other: ImitationDataset) {
        self.features.extend(other.features);
        self.targets.extend(other.targets);
        self.provenance.extend(other.provenance);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    pub fn to_csv(&self, feature_names: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scene,step,{},target", feature_names.join(","));
        for i in 0..self.len() {
            let (scene, step) = self.provenance[i];
            let feats: Vec<String> = self.features[i].iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{scene},{step},{},{}", feats.join(","), self.targets[i]);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionForest {
    pub trees: Vec<RegressionTree>,
    pub dim: usize,
    pub config_summary: String,
}

impl RegressionForest {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        if x.len() != self.dim {
            return Err(LearnerError::DimMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, LearnerError> {
        rows.par_iter()
            .map(|x| self.predict(x))
            .collect::<Result<Vec<_>, _>>()
    }

    pub fn mse(&self, data: &ImitationDataset) -> Result<f64, LearnerError> {
        if data.is_empty() {
            return Err(LearnerError::EmptyData);
        }
        let preds = self.predict_batch(&data.features)?;
        let sum: f64 = preds
            .iter()
            .zip(&data.targets)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(sum / data.len() as f64)
    }
}

pub fn fit_forest(
    data: &ImitationDataset,
    config: &ForestConfig,
) -> Result<RegressionForest, LearnerError> {
    if data.is_empty() {
        return Err(LearnerError::EmptyData);
    }
    let dim = data.dim();
    for (row, f) in data.features.iter().enumerate() {
        if f.len() != dim {
            return Err(LearnerError::RaggedRow {
                row,
                got: f.len(),
                expected: dim,
            });
        }
    }
    let n = data.len();
    let n_draw = ((n as f64) * config.bootstrap_fraction).round().max(1.0) as usize;
    // √d features considered per split.
    let m_try = ((dim as f64).sqrt().ceil() as usize).clamp(1, dim);
    let trees: Vec<RegressionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let indices: Vec<usize> = (0..n_draw).map(|_| rng.gen_range(0..n)).collect();
            fit_tree(data, &indices, config, m_try, dim, &mut rng)
        })
        .collect();
    Ok(RegressionForest {
        trees,
        dim,
        config_summary: format!(
            "trees={} depth={} min_leaf={} bootstrap={} seed={}",
            config.n_trees,
            config.max_depth,
            config.min_samples_leaf,
            config.bootstrap_fraction,
            config.seed
        ),
    })
}

fn fit_tree(
    data: &ImitationDataset,
    indices: &[usize],
    config: &ForestConfig,
    m_try: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let mut nodes = Vec::new();
    build_node(data, indices.to_vec(), 0, config, m_try, dim, rng, &mut nodes);
    RegressionTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    data: &ImitationDataset,
    rows: Vec<usize>,
    depth: usize,
    config: &ForestConfig,
    m_try: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let mean = rows.iter().map(|&i| data.targets[i]).sum::<f64>() / rows.len() as f64;
    let here = nodes.len();
    if depth >= config.max_depth || rows.len() < 2 * config.min_samples_leaf {
        nodes.push(Node::Leaf { value: mean });
        return here;
    }

    // Sample m_try distinct features; sorting keeps the tie-break (lowest
    // feature index wins) independent of draw order.
    let mut feats: Vec<usize> = Vec::with_capacity(m_try);
    while feats.len() < m_try {
        let f = rng.gen_range(0..dim);
        if !feats.contains(&f) {
            feats.push(f);
        }
    }
    feats.sort_unstable();

    let best = best_split(data, &rows, &feats, config.min_samples_leaf);
    let Some((feature, threshold)) = best else {
        nodes.push(Node::Leaf { value: mean });
        return here;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| data.features[i][feature] <= threshold);
    nodes.push(Node::Leaf { value: mean }); // placeholder, patched below
    let left = build_node(data, left_rows, depth + 1, config, m_try, dim, rng, nodes);
    let right = build_node(data, right_rows, depth + 1, config, m_try, dim, rng, nodes);
    nodes[here] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    here
}

/// Best (feature, midpoint threshold) by variance reduction, i.e. minimal sum
/// of child SSEs. Ties: lowest feature index, then lowest threshold.
fn best_split(
    data: &ImitationDataset,
    rows: &[usize],
    feats: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let total_sum: f64 = rows.iter().map(|&i| data.targets[i]).sum();
    let total_sq: f64 = rows.iter().map(|&i| data.targets[i] * data.targets[i]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;
    if parent_sse <= 1e-15 {
        return None;
    }

    let mut best: Option<(f64, usize, f64)> = None; // (sse, feature, threshold)
    let mut order: Vec<usize> = rows.to_vec();
    for &f in feats {
        order.sort_by(|&a, &b| {
            data.features[a][f]
                .partial_cmp(&data.features[b][f])
                .unwrap()
        });
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 0..n - 1 {
            let i = order[k];
            let t = data.targets[i];
            left_sum += t;
            left_sq += t * t;
            let (x0, x1) = (data.features[i][f], data.features[order[k + 1]][f]);
            if x0 == x1 {
                continue;
            }
            let left_n = (k + 1) as f64;
            let right_n = (n - k - 1) as f64;
            if (k + 1) < min_leaf || (n - k - 1) < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / left_n)
                + (right_sq - right_sum * right_sum / right_n);
            let threshold = 0.5 * (x0 + x1);
            let better = match best {
                None => true,
                Some((bs, bf, bt)) => {
                    sse < bs - 1e-12
                        || ((sse - bs).abs() <= 1e-12 && (f < bf || (f == bf && threshold < bt)))
                }
            };
            if better {
                best = Some((sse, f, threshold));
            }
        }
    }
    best.and_then(|(sse, f, t)| {
        if sse < parent_sse - 1e-15 {
            Some((f, t))
        } else {
            None
        }
    })
}

// ---------------------------------------------------------------------------
// Forest serialization: versioned preorder text dump, exact f64 round-trip
// via the shortest-representation Display formatting.
// ---------------------------------------------------------------------------

impl RegressionForest {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "forest v1 {} {}", self.trees.len(), self.dim);
        let _ = writeln!(out, "# {}", self.config_summary);
        for tree in &self.trees {
            let _ = writeln!(out, "tree {}", tree.nodes.len());
            for node in &tree.nodes {
                match node {
                    Node::Leaf { value } => {
                        let _ = writeln!(out, "leaf {value}");
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "split {feature} {threshold} {left} {right}");
                    }
                }
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<RegressionForest, LearnerError> {
        let err = |line: usize, msg: &str| LearnerError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "forest" || parts[1] != "v1" {
            return Err(err(1, "expected `forest v1 <n_trees> <dim>`"));
        }
        let n_trees: usize = parts[2].parse().map_err(|_| err(1, "bad tree count"))?;
        let dim: usize = parts[3].parse().map_err(|_| err(1, "bad dim"))?;
        let (_, comment) = lines.next().ok_or_else(|| err(0, "missing config line"))?;
        let config_summary = comment.trim_start_matches('#').trim().to_string();
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (ln, header) = lines.next().ok_or_else(|| err(0, "missing tree header"))?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 2 || parts[0] != "tree" {
                return Err(err(ln + 1, "expected `tree <n_nodes>`"));
            }
            let n_nodes: usize = parts[1].parse().map_err(|_| err(ln + 1, "bad node count"))?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (ln, line) = lines.next().ok_or_else(|| err(0, "missing node"))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts.as_slice() {
                    ["leaf", v] => nodes.push(Node::Leaf {
                        value: v.parse().map_err(|_| err(ln + 1, "bad leaf value"))?,
                    }),
                    ["split", f, t, l, r] => nodes.push(Node::Split {
                        feature: f.parse().map_err(|_| err(ln + 1, "bad feature"))?,
                        threshold: t.parse().map_err(|_| err(ln + 1, "bad threshold"))?,
                        left: l.parse().map_err(|_| err(ln + 1, "bad left"))?,
                        right: r.parse().map_err(|_| err(ln + 1, "bad right"))?,
                    }),
                    _ => return Err(err(ln + 1, "expected `leaf …` or `split …`")),
                }
            }
            trees.push(RegressionTree { nodes });
        }
        Ok(RegressionForest {
            trees,
            dim,
            config_summary,
        })
    }
}
