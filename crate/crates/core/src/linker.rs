//! TF-IDF cosine linking of reviews to UI elements within a release window.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::textprep::TokenList;
use crate::uiminer::ElementKey;

pub const DEFAULT_THRESHOLD: f64 = 0.65;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TfIdfVector {
    pub weights: BTreeMap<String, f64>,
    pub norm: f64,
}

impl TfIdfVector {
    fn from_weights(weights: BTreeMap<String, f64>) -> Self {
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        TfIdfVector { weights, norm }
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }
}

/// Raw-count TF times `ln(N / (1 + df)) + 1` IDF over `docs`, L2-normalised.
pub fn build_tfidf<D: AsRef<[String]>>(docs: &[D]) -> Vec<TfIdfVector> {
    let n = docs.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        let uniq: BTreeSet<&str> = d.as_ref().iter().map(String::as_str).collect();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let idf: BTreeMap<&str, f64> = df
        .into_iter()
        .map(|(t, c)| (t, (n / (1.0 + c as f64)).ln() + 1.0))
        .collect();
    docs.iter()
        .map(|d| {
            let mut tf: BTreeMap<String, f64> = BTreeMap::new();
            for t in d.as_ref() {
                *tf.entry(t.clone()).or_default() += 1.0;
            }
            let raw: BTreeMap<String, f64> = tf
                .into_iter()
                .map(|(t, c)| {
                    let w = c * idf[t.as_str()];
                    (t, w)
                })
                .collect();
            let norm = raw.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm == 0.0 {
                return TfIdfVector::default();
            }
            TfIdfVector::from_weights(raw.into_iter().map(|(t, w)| (t, w / norm)).collect())
        })
        .collect()
}

/// Cosine similarity clamped to [0, 1]; 0 when either vector is zero.
pub fn cosine(a: &TfIdfVector, b: &TfIdfVector) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    let (small, large) = if a.weights.len() <= b.weights.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .weights
        .iter()
        .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
        .sum();
    (dot / (a.norm * b.norm)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    #[serde(rename = "review")]
    pub review_id: String,
    pub app: String,
    pub element_key: ElementKey,
    pub release_ordinal: usize,
    pub sim: f64,
}

/// An element's description document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDoc {
    pub key: ElementKey,
    pub tokens: Vec<String>,
}

/// Links every (review, element) pair of one window whose similarity is at
/// least `threshold` and positive. Duplicate element keys keep their first
/// description. Output is ordered by review, then element.
pub fn link_reviews(
    app: &str,
    release_ordinal: usize,
    reviews: &[TokenList],
    elements: &[ElementDoc],
    threshold: f64,
) -> Vec<Link> {
    let mut seen = BTreeSet::new();
    let elements: Vec<&ElementDoc> = elements.iter().filter(|e| seen.insert(e.key.clone())).collect();
    if reviews.is_empty() || elements.is_empty() {
        return Vec::new();
    }
    let docs: Vec<&[String]> = reviews
        .iter()
        .map(|r| r.tokens.as_slice())
        .chain(elements.iter().map(|e| e.tokens.as_slice()))
        .collect();
    let vectors = build_tfidf(&docs);
    let (rv, ev) = vectors.split_at(reviews.len());
    reviews
        .par_iter()
        .zip(rv.par_iter())
        .flat_map_iter(|(r, a)| {
            elements.iter().zip(ev).filter_map(move |(e, b)| {
                let sim = cosine(a, b);
                (sim > 0.0 && sim >= threshold).then(|| Link {
                    review_id: r.review_id.clone(),
                    app: app.to_string(),
                    element_key: e.key.clone(),
                    release_ordinal,
                    sim,
                })
            })
        })
        .collect()
}
