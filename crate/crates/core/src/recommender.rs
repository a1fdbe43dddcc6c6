//! Class-weighted random forest over cluster features.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::releasediff::DeletionLabel;
use crate::seeds::derive_seed;
use crate::signals::ClusterFeatures;
use crate::uiminer::ElementKey;

pub const FOREST_FORMAT_VERSION: u32 = 1;
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    /// Weight classes by `n / (2 n_c)` in the Gini impurity.
    pub balanced: bool,
    pub decision_threshold: f64,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: 3,
            bootstrap: true,
            balanced: true,
            decision_threshold: 0.5,
            seed: 0,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(Error::Config(format!(
                "decision threshold must lie in (0, 1), got {}",
                self.decision_threshold
            )));
        }
        if self.min_samples_leaf == 0 || self.features_per_split == 0 {
            return Err(Error::Config("min_samples_leaf and features_per_split must be positive".into()));
        }
        Ok(())
    }
}

/// Tree node; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Weighted share of the `deleted` class.
        p_deleted: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { p_deleted } => *p_deleted,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format_version: u32,
    pub config: RfConfig,
    /// Column names in the order trees index them (sorted).
    pub feature_names: Vec<String>,
    /// Training rows per class: `[deleted, not_deleted]`.
    pub class_counts: [usize; 2],
    pub trees: Vec<Node>,
}

impl Forest {
    /// Per-tree probability of `deleted` for a row in [`Forest::feature_names`] order.
    pub fn per_tree(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::invalid(format!(
                "row has {} features, forest expects {}",
                x.len(),
                self.feature_names.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: "input".into() });
        }
        Ok(self.per_tree(x).iter().sum::<f64>() / self.trees.len() as f64)
    }

    /// Predicts from named columns in any order.
    pub fn predict_named(&self, names: &[&str], x: &[f64]) -> Result<f64> {
        let row = self
            .feature_names
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .map(|i| x[i])
                    .ok_or_else(|| Error::invalid(format!("missing feature {f}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        self.predict_row(&row)
    }

    pub fn predict(&self, row: &ClusterFeatures) -> Result<f64> {
        self.predict_named(&ClusterFeatures::NAMES, &row.values())
    }
}

struct Data<'a> {
    x: &'a [Vec<f64>],
    deleted: &'a [bool],
    class_weight: [f64; 2],
}

impl Data<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.class_weight[if self.deleted[i] { 0 } else { 1 }]
    }

    /// Weighted (deleted, not_deleted) totals over `idx`.
    fn totals(&self, idx: &[usize]) -> [f64; 2] {
        let mut t = [0.0; 2];
        for &i in idx {
            t[if self.deleted[i] { 0 } else { 1 }] += self.weight(i);
        }
        t
    }
}

fn gini(t: [f64; 2]) -> f64 {
    let w = t[0] + t[1];
    if w == 0.0 {
        return 0.0;
    }
    let (a, b) = (t[0] / w, t[1] / w);
    1.0 - a * a - b * b
}

fn leaf(t: [f64; 2]) -> Node {
    let w = t[0] + t[1];
    Node::Leaf { p_deleted: if w == 0.0 { 0.0 } else { t[0] / w } }
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best weighted-Gini split of `idx` over `features`. Candidate thresholds
/// are midpoints of consecutive distinct values; ties keep the earlier
/// (lower feature, then lower threshold) candidate.
fn best_split(data: &Data, idx: &[usize], features: &[usize], min_leaf: usize) -> Option<Best> {
    let parent = data.totals(idx);
    let w = parent[0] + parent[1];
    let g = gini(parent);
    let mut best: Option<Best> = None;
    for &f in features {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| data.x[a][f].total_cmp(&data.x[b][f]));
        let mut left = [0.0; 2];
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left[if data.deleted[i] { 0 } else { 1 }] += data.weight(i);
            let (v, next) = (data.x[i][f], data.x[order[pos + 1]][f]);
            if v == next || pos + 1 < min_leaf || order.len() - pos - 1 < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let (wl, wr) = (left[0] + left[1], right[0] + right[1]);
            let gain = g - wl / w * gini(left) - wr / w * gini(right);
            if gain > best.as_ref().map_or(GAIN_EPS, |b| b.gain + GAIN_EPS) {
                best = Some(Best { gain, feature: f, threshold: (v + next) / 2.0 });
            }
        }
    }
    best
}

fn grow(data: &Data, idx: Vec<usize>, depth: usize, cfg: &RfConfig, n_features: usize, rng: &mut ChaCha8Rng) -> Node {
    let t = data.totals(&idx);
    let pure = t[0] == 0.0 || t[1] == 0.0;
    if pure || cfg.max_depth.is_some_and(|d| depth >= d) || idx.len() < 2 * cfg.min_samples_leaf {
        return leaf(t);
    }
    let features: Vec<usize> = if cfg.features_per_split >= n_features {
        (0..n_features).collect()
    } else {
        let mut f = sample(rng, n_features, cfg.features_per_split).into_vec();
        f.sort_unstable();
        f
    };
    // when the drawn subset cannot split the node, try the remaining features
    let found = best_split(data, &idx, &features, cfg.min_samples_leaf).or_else(|| {
        let rest: Vec<usize> = (0..n_features).filter(|f| !features.contains(f)).collect();
        best_split(data, &idx, &rest, cfg.min_samples_leaf)
    });
    let Some(b) = found else {
        return leaf(t);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| data.x[i][b.feature] <= b.threshold);
    Node::Split {
        feature: b.feature,
        threshold: b.threshold,
        left: Box::new(grow(data, l, depth + 1, cfg, n_features, rng)),
        right: Box::new(grow(data, r, depth + 1, cfg, n_features, rng)),
    }
}

/// Trains on a feature matrix with named columns. Columns are reordered by
/// name first, so the result does not depend on column order.
pub fn train_matrix(names: &[&str], x: &[Vec<f64>], deleted: &[bool], cfg: &RfConfig) -> Result<Forest> {
    cfg.validate()?;
    if x.len() != deleted.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::invalid("random forest needs at least two rows"));
    }
    let mut perm: Vec<usize> = (0..names.len()).collect();
    perm.sort_by(|&a, &b| names[a].cmp(names[b]));
    let rows: Vec<Vec<f64>> = x
        .iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != names.len() {
                return Err(Error::invalid(format!("row {r} has {} features, expected {}", row.len(), names.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: r.to_string() });
            }
            Ok(perm.iter().map(|&c| row[c]).collect())
        })
        .collect::<Result<_>>()?;
    let n_del = deleted.iter().filter(|d| **d).count();
    let n = deleted.len();
    if n_del == 0 || n_del == n {
        return Err(Error::SingleClass("random forest training needs both deleted and not_deleted rows".into()));
    }
    let class_weight = if cfg.balanced {
        [n as f64 / (2.0 * n_del as f64), n as f64 / (2.0 * (n - n_del) as f64)]
    } else {
        [1.0, 1.0]
    };
    let data = Data { x: &rows, deleted, class_weight };
    let n_features = names.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, t as u64));
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&data, idx, 0, cfg, n_features, &mut rng)
        })
        .collect();
    Ok(Forest {
        format_version: FOREST_FORMAT_VERSION,
        config: *cfg,
        feature_names: perm.iter().map(|&c| names[c].to_string()).collect(),
        class_counts: [n_del, n - n_del],
        trees,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    #[serde(flatten)]
    pub features: ClusterFeatures,
    pub label: DeletionLabel,
}

pub fn train_rf(rows: &[LabeledRow], cfg: &RfConfig) -> Result<Forest> {
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.values().to_vec()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.label.is_deleted()).collect();
    train_matrix(&ClusterFeatures::NAMES, &x, &y, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    DeleteCandidate,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub app: String,
    pub element_key: ElementKey,
    pub release_ordinal: usize,
    pub topic: usize,
    pub prob: f64,
    pub decision: Decision,
}

impl Recommendation {
    pub fn is_candidate(&self) -> bool {
        self.decision == Decision::DeleteCandidate
    }
}

/// One recommendation per row, in input order.
pub fn recommend(forest: &Forest, rows: &[ClusterFeatures], threshold: f64) -> Result<Vec<Recommendation>> {
    rows.iter()
        .map(|r| {
            let prob = forest.predict(r).map_err(|e| match e {
                Error::NonFinite { .. } => Error::NonFinite {
                    row: format!("{} {} release {} topic {}", r.app, r.element_key, r.release_ordinal, r.topic),
                },
                e => e,
            })?;
            Ok(Recommendation {
                app: r.app.clone(),
                element_key: r.element_key.clone(),
                release_ordinal: r.release_ordinal,
                topic: r.topic,
                prob,
                decision: if prob >= threshold { Decision::DeleteCandidate } else { Decision::Keep },
            })
        })
        .collect()
}
