//! Multinomial Naive Bayes separating informative from non-informative
//! reviews.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{checked_folds, prf1, ConfusionMatrix};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Informativeness {
    Informative,
    NonInformative,
}

impl Informativeness {
    pub const ALL: [Informativeness; 2] = [Informativeness::Informative, Informativeness::NonInformative];

    fn index(self) -> usize {
        match self {
            Informativeness::Informative => 0,
            Informativeness::NonInformative => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledReview {
    pub review_id: String,
    pub tokens: Vec<String>,
    pub label: Informativeness,
}

/// One line of `labels.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: Informativeness,
}

pub const NB_FORMAT_VERSION: u32 = 1;

/// Trained model. Per-class arrays are indexed `[informative, non_informative]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub format_version: u32,
    pub alpha: f64,
    pub class_docs: [usize; 2],
    pub class_tokens: [u64; 2],
    pub priors: [f64; 2],
    pub log_likelihood: BTreeMap<String, [f64; 2]>,
}

impl NbModel {
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.log_likelihood.keys().map(String::as_str)
    }

    /// Unnormalised log scores; unknown tokens contribute nothing.
    pub fn log_scores(&self, tokens: &[String]) -> [f64; 2] {
        let mut s = [self.priors[0].ln(), self.priors[1].ln()];
        for t in tokens {
            if let Some(ll) = self.log_likelihood.get(t) {
                s[0] += ll[0];
                s[1] += ll[1];
            }
        }
        s
    }

    /// Posterior probabilities `[informative, non_informative]`.
    pub fn posteriors(&self, tokens: &[String]) -> [f64; 2] {
        let s = self.log_scores(tokens);
        let p_inf = 1.0 / (1.0 + (s[1] - s[0]).exp());
        [p_inf, 1.0 - p_inf]
    }
}

/// Fits multinomial NB with add-`alpha` smoothing and frequency priors.
pub fn train_nb(data: &[LabeledReview], alpha: f64) -> Result<NbModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("smoothing alpha must be positive, got {alpha}")));
    }
    let mut class_docs = [0usize; 2];
    let mut class_tokens = [0u64; 2];
    let mut counts: BTreeMap<&str, [u64; 2]> = BTreeMap::new();
    for d in data {
        let c = d.label.index();
        class_docs[c] += 1;
        for t in &d.tokens {
            counts.entry(t.as_str()).or_default()[c] += 1;
            class_tokens[c] += 1;
        }
    }
    if class_docs.contains(&0) {
        return Err(Error::SingleClass("Naive Bayes needs informative and non-informative examples".into()));
    }
    if counts.is_empty() {
        return Err(Error::invalid("Naive Bayes training data has an empty vocabulary"));
    }
    let n_docs = (class_docs[0] + class_docs[1]) as f64;
    let priors = [class_docs[0] as f64 / n_docs, class_docs[1] as f64 / n_docs];
    let v = counts.len() as f64;
    let denom = [
        class_tokens[0] as f64 + alpha * v,
        class_tokens[1] as f64 + alpha * v,
    ];
    let log_likelihood = counts
        .into_iter()
        .map(|(w, c)| {
            let ll = [
                ((c[0] as f64 + alpha) / denom[0]).ln(),
                ((c[1] as f64 + alpha) / denom[1]).ln(),
            ];
            (w.to_string(), ll)
        })
        .collect();
    Ok(NbModel { format_version: NB_FORMAT_VERSION, alpha, class_docs, class_tokens, priors, log_likelihood })
}

/// Most probable class and its posterior. Exact ties go to `Informative`,
/// so borderline reviews stay in the pipeline.
pub fn classify(model: &NbModel, tokens: &[String]) -> (Informativeness, f64) {
    let s = model.log_scores(tokens);
    let post = model.posteriors(tokens);
    if s[0] >= s[1] {
        (Informativeness::Informative, post[0])
    } else {
        (Informativeness::NonInformative, post[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub stdev: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd { mean, stdev: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbCvReport {
    pub folds: usize,
    pub runs: usize,
    pub f1_informative: MeanStd,
    pub f1_non_informative: MeanStd,
    /// Per-run F1 `[informative, non_informative]`.
    pub per_run: Vec<[f64; 2]>,
}

/// Repeated stratified k-fold cross-validation of [`train_nb`].
pub fn evaluate_nb_cv(data: &[LabeledReview], k: usize, runs: usize, alpha: f64, seed: u64) -> Result<NbCvReport> {
    if runs == 0 {
        return Err(Error::invalid("need at least one cross-validation run"));
    }
    let labels: Vec<Informativeness> = data.iter().map(|d| d.label).collect();
    let mut per_run = Vec::with_capacity(runs);
    for run in 0..runs {
        let fold_of = checked_folds(&labels, k, derive_seed(seed, run as u64))?;
        let mut m = [ConfusionMatrix::default(); 2];
        for f in 0..k {
            let train: Vec<LabeledReview> = data
                .iter()
                .zip(&fold_of)
                .filter(|(_, &g)| g != f)
                .map(|(d, _)| d.clone())
                .collect();
            let model = train_nb(&train, alpha)?;
            for (d, _) in data.iter().zip(&fold_of).filter(|(_, &g)| g == f) {
                let (pred, _) = classify(&model, &d.tokens);
                for c in Informativeness::ALL {
                    m[c.index()].record(pred == c, d.label == c);
                }
            }
        }
        per_run.push([prf1(&m[0])?.f1, prf1(&m[1])?.f1]);
    }
    let col = |i: usize| per_run.iter().map(|r| r[i]).collect::<Vec<_>>();
    Ok(NbCvReport {
        folds: k,
        runs,
        f1_informative: MeanStd::of(&col(0)),
        f1_non_informative: MeanStd::of(&col(1)),
        per_run,
    })
}

/// Joins `labels.jsonl` records with tokenised reviews by id. Labels whose
/// review is unknown are skipped with a warning.
pub fn join_labels(labels: &[LabelRecord], tokens: &BTreeMap<String, Vec<String>>) -> Vec<LabeledReview> {
    let mut out = Vec::with_capacity(labels.len());
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(&l.id) {
            continue;
        }
        match tokens.get(&l.id) {
            Some(t) => out.push(LabeledReview { review_id: l.id.clone(), tokens: t.clone(), label: l.label }),
            None => log::warn!("label for unknown review {}", l.id),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use Informativeness::*;

    fn doc(id: &str, text: &str, label: Informativeness) -> LabeledReview {
        LabeledReview {
            review_id: id.into(),
            tokens: text.split_whitespace().map(String::from).collect(),
            label,
        }
    }

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn separable_corpus_is_fit() {
        let data = vec![
            doc("1", "crash save page", Informative),
            doc("2", "sync fail offline", Informative),
            doc("3", "love nice", NonInformative),
            doc("4", "awesome great", NonInformative),
        ];
        let m = train_nb(&data, 1.0).unwrap();
        for d in &data {
            assert_eq!(classify(&m, &d.tokens).0, d.label);
        }
        assert_eq!(m.priors, [0.5, 0.5]);
    }

    #[test]
    fn hand_computed_posterior() {
        // vocabulary {app, nice, crash, save, page}: |V| = 5
        // informative tokens 3, non-informative tokens 2, alpha 1
        // P(save|inf) = 2/8, P(crash|inf) = 2/8; P(save|non) = 1/7, P(crash|non) = 1/7
        // posterior(inf) = (1/2 * 1/16) / (1/2 * 1/16 + 1/2 * 1/49) = 49/65
        let data = vec![doc("a", "app nice", NonInformative), doc("b", "crash save page", Informative)];
        let m = train_nb(&data, 1.0).unwrap();
        let (label, post) = classify(&m, &toks("save crash"));
        assert_eq!(label, Informative);
        approx::assert_abs_diff_eq!(post, 49.0 / 65.0, epsilon = 1e-12);
        let p = m.posteriors(&toks("save crash"));
        approx::assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unknown_tokens_tie_goes_informative() {
        let data = vec![doc("a", "app nice", NonInformative), doc("b", "crash save", Informative)];
        let m = train_nb(&data, 1.0).unwrap();
        let (label, post) = classify(&m, &toks("zebra quantum"));
        assert_eq!(label, Informative);
        assert_eq!(post, 0.5);
    }

    #[test]
    fn single_class_is_fatal() {
        let data = vec![doc("a", "x y", Informative), doc("b", "z", Informative)];
        assert!(matches!(train_nb(&data, 1.0), Err(Error::SingleClass(_))));
    }

    #[test]
    fn empty_vocabulary_is_fatal() {
        let data = vec![doc("a", "", Informative), doc("b", "", NonInformative)];
        assert!(train_nb(&data, 1.0).is_err());
        assert!(train_nb(&[doc("a", "x", Informative), doc("b", "y", NonInformative)], 0.0).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let data = vec![doc("a", "app nice", NonInformative), doc("b", "crash save page", Informative)];
        let m = train_nb(&data, 1.0).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: NbModel = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn cv_on_separable_corpus_is_perfect() {
        let mut data = Vec::new();
        for i in 0..20 {
            data.push(doc(&format!("i{i}"), "crash sync page error", Informative));
            data.push(doc(&format!("n{i}"), "love great nice awesome", NonInformative));
        }
        let r = evaluate_nb_cv(&data, 10, 3, 1.0, 1).unwrap();
        assert_eq!(r.f1_informative.mean, 1.0);
        assert_eq!(r.f1_non_informative.mean, 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn corpus() -> impl Strategy<Value = Vec<LabeledReview>> {
            let word = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]);
            let d = (prop::collection::vec(word, 1..6), any::<bool>()).prop_map(|(ws, inf)| LabeledReview {
                review_id: String::new(),
                tokens: ws.into_iter().map(String::from).collect(),
                label: if inf { Informative } else { NonInformative },
            });
            prop::collection::vec(d, 2..20).prop_filter("both classes", |v| {
                v.iter().any(|d| d.label == Informative) && v.iter().any(|d| d.label == NonInformative)
            })
        }

        proptest! {
            #[test]
            fn posteriors_sum_to_one(data in corpus(), q in prop::collection::vec("[a-h]", 0..8)) {
                let m = train_nb(&data, 1.0).unwrap();
                let p = m.posteriors(&q);
                prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
                for ll in m.log_likelihood.values() {
                    prop_assert!(ll[0].is_finite() && ll[1].is_finite());
                }
            }

            // Doubling every count together with the pseudo-count leaves every
            // smoothed likelihood, and so every decision, unchanged.
            #[test]
            fn duplicating_training_data_keeps_decisions(data in corpus(), q in prop::collection::vec("[a-g]", 1..8)) {
                let m1 = train_nb(&data, 1.0).unwrap();
                let doubled: Vec<_> = data.iter().chain(data.iter()).cloned().collect();
                let m2 = train_nb(&doubled, 2.0).unwrap();
                let s1 = m1.log_scores(&q);
                let s2 = m2.log_scores(&q);
                prop_assert!((s1[0] - s2[0]).abs() < 1e-9 && (s1[1] - s2[1]).abs() < 1e-9);
                if (s1[0] - s1[1]).abs() > 1e-9 {
                    prop_assert_eq!(classify(&m1, &q).0, classify(&m2, &q).0);
                }
            }
        }
    }
}
