//! Confusion-matrix metrics, stratified cross-validation and topic log odds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recommender::{train_rf, LabeledRow, Recommendation, RfConfig};
use crate::releasediff::DeletionLabel;
use crate::seeds::derive_seed;
use crate::uiminer::ElementKey;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of the positive class.
///
/// Precision is 0 when nothing was predicted positive; F1 is 0 when
/// precision and recall are both 0. A matrix with no positive predictions
/// and no positive truths has no defined metrics and is rejected.
pub fn prf1(m: &ConfusionMatrix) -> Result<Metrics> {
    if m.tp + m.fp + m.fn_ == 0 {
        return Err(Error::invalid("confusion matrix has no positives (tp+fp+fn = 0)"));
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics { precision, recall, f1 })
}

/// Assigns each item to one of `k` folds so that every class is spread as
/// evenly as possible (per-class fold counts differ by at most one).
/// Returns the fold index of each item.
pub fn stratified_folds<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.clone()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; labels.len()];
    let mut next = 0usize;
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

/// Fold assignment whose every training part contains all classes present in
/// `labels`. Refolds with a fresh seed up to five times.
pub fn checked_folds<L: Ord + Clone>(labels: &[L], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::invalid(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let classes: BTreeSet<&L> = labels.iter().collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass("cross-validation needs both classes".into()));
    }
    for attempt in 0..=5u64 {
        let fold_of = stratified_folds(labels, k, derive_seed(seed, attempt));
        let ok = (0..k).all(|f| {
            let train: BTreeSet<&L> = labels
                .iter()
                .zip(&fold_of)
                .filter(|(_, &g)| g != f)
                .map(|(l, _)| l)
                .collect();
            train.len() == classes.len()
        });
        if ok {
            return Ok(fold_of);
        }
        log::warn!("fold {attempt}: a training part lacks a class; refolding");
    }
    Err(Error::SingleClass(
        "every refold left a training part with a single class".into(),
    ))
}

/// Per-app or pooled entry of `metrics.json`. Metrics are `None` when the
/// matrix has no positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixMetrics {
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl From<ConfusionMatrix> for MatrixMetrics {
    fn from(matrix: ConfusionMatrix) -> Self {
        let m = prf1(&matrix).ok();
        MatrixMetrics {
            matrix,
            precision: m.map(|m| m.precision),
            recall: m.map(|m| m.recall),
            f1: m.map(|m| m.f1),
        }
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_app: BTreeMap<String, MatrixMetrics>,
    /// Mean per-app F1 over apps where it is defined.
    pub macro_f1: Option<f64>,
    pub pooled_f1: Option<f64>,
    pub pooled: MatrixMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<Vec<ConfusionMatrix>>,
}

impl MetricsReport {
    pub fn from_matrices(per_app: &BTreeMap<String, ConfusionMatrix>, folds: Option<Vec<ConfusionMatrix>>) -> Self {
        let mut pooled = ConfusionMatrix::default();
        for m in per_app.values() {
            pooled.add(m);
        }
        let per_app: BTreeMap<String, MatrixMetrics> =
            per_app.iter().map(|(a, m)| (a.clone(), MatrixMetrics::from(*m))).collect();
        let f1s: Vec<f64> = per_app.values().filter_map(|m| m.f1).collect();
        let pooled = MatrixMetrics::from(pooled);
        MetricsReport {
            macro_f1: (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64),
            pooled_f1: pooled.f1,
            pooled,
            per_app,
            folds,
        }
    }
}

/// Cluster identity shared by recommendations, features and truth labels.
pub type ClusterId = (String, ElementKey, usize, usize);

pub fn cluster_id(r: &Recommendation) -> ClusterId {
    (r.app.clone(), r.element_key.clone(), r.release_ordinal, r.topic)
}

/// Tallies recommendations against truth labels per app.
pub fn evaluate_predictions(
    preds: &[Recommendation],
    truth: &BTreeMap<ClusterId, DeletionLabel>,
) -> Result<BTreeMap<String, ConfusionMatrix>> {
    let mut per_app: BTreeMap<String, ConfusionMatrix> = BTreeMap::new();
    for p in preds {
        let id = cluster_id(p);
        let label = truth.get(&id).ok_or_else(|| {
            Error::invalid(format!(
                "no truth label for {} {} release {} topic {}",
                id.0, id.1, id.2, id.3
            ))
        })?;
        per_app
            .entry(p.app.clone())
            .or_default()
            .record(p.is_candidate(), label.is_deleted());
    }
    Ok(per_app)
}

/// Stratified k-fold cross-validation of the forest on labeled rows.
pub fn kfold_cv(rows: &[LabeledRow], k: usize, config: &RfConfig, seed: u64) -> Result<MetricsReport> {
    config.validate()?;
    let labels: Vec<DeletionLabel> = rows.iter().map(|r| r.label).collect();
    let fold_of = checked_folds(&labels, k, seed)?;
    let folds: Vec<Vec<(String, bool, bool)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<LabeledRow> =
                rows.iter().zip(&fold_of).filter(|(_, &g)| g != f).map(|(r, _)| r.clone()).collect();
            let cfg = RfConfig { seed: derive_seed(config.seed, f as u64), ..*config };
            let forest = train_rf(&train, &cfg)?;
            rows.iter()
                .zip(&fold_of)
                .filter(|(_, &g)| g == f)
                .map(|(r, _)| {
                    let p = forest.predict(&r.features)?;
                    Ok((r.features.app.clone(), p >= config.decision_threshold, r.label.is_deleted()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut per_app: BTreeMap<String, ConfusionMatrix> = BTreeMap::new();
    let mut fold_mats = Vec::with_capacity(k);
    for fold in &folds {
        let mut m = ConfusionMatrix::default();
        for (app, pred, actual) in fold {
            m.record(*pred, *actual);
            per_app.entry(app.clone()).or_default().record(*pred, *actual);
        }
        fold_mats.push(m);
    }
    Ok(MetricsReport::from_matrices(&per_app, Some(fold_mats)))
}

/// One document of a topic-intrusion study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionJudgment {
    pub doc: String,
    pub theta: BTreeMap<String, f64>,
    #[serde(deserialize_with = "topic_id")]
    pub intruder: String,
    #[serde(deserialize_with = "topic_ids")]
    pub selected: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TopicRef {
    Int(i64),
    Str(String),
}

impl From<TopicRef> for String {
    fn from(t: TopicRef) -> String {
        match t {
            TopicRef::Int(i) => i.to_string(),
            TopicRef::Str(s) => s,
        }
    }
}

fn topic_id<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    TopicRef::deserialize(d).map(Into::into)
}

fn topic_ids<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    Vec::<TopicRef>::deserialize(d).map(|v| v.into_iter().map(Into::into).collect())
}

pub const THETA_EPS: f64 = 1e-12;

/// Contents of `tlo.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TloReport {
    pub per_doc: BTreeMap<String, f64>,
    pub mean: Option<f64>,
}

/// Topic log odds of one judgment: the mean over judges of
/// `ln θ(intruder) − ln θ(selected)`, with θ clipped below at [`THETA_EPS`].
pub fn tlo_one(j: &IntrusionJudgment) -> Result<f64> {
    if j.selected.is_empty() {
        return Err(Error::invalid(format!("document {}: no judge selections", j.doc)));
    }
    let theta = |t: &str| {
        j.theta
            .get(t)
            .map(|p| p.max(THETA_EPS).ln())
            .ok_or_else(|| Error::invalid(format!("document {}: topic {t} was not presented", j.doc)))
    };
    let intruder = theta(&j.intruder)?;
    let p_intruder = j.theta[&j.intruder];
    if j.theta.iter().any(|(t, p)| *t != j.intruder && *p <= p_intruder) {
        return Err(Error::invalid(format!(
            "document {}: intruder {} does not have strictly minimal probability",
            j.doc, j.intruder
        )));
    }
    let mut sum = 0.0;
    for s in &j.selected {
        sum += intruder - theta(s)?;
    }
    Ok(sum / j.selected.len() as f64)
}

pub fn tlo(judgments: &[IntrusionJudgment]) -> Result<TloReport> {
    let mut per_doc = BTreeMap::new();
    for j in judgments {
        if per_doc.insert(j.doc.clone(), tlo_one(j)?).is_some() {
            return Err(Error::invalid(format!("duplicate judgment for document {}", j.doc)));
        }
    }
    let mean = (!per_doc.is_empty()).then(|| per_doc.values().sum::<f64>() / per_doc.len() as f64);
    Ok(TloReport { per_doc, mean })
}
