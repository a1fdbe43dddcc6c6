//! Lexicon sentiment scoring and per-cluster feature extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topics::Cluster;
use crate::uiminer::ElementKey;

pub const NEGATION_FACTOR: f64 = -0.5;
pub const NEGATION_WINDOW: usize = 2;
pub const NEGATIONS: &[&str] = &["not", "no", "never", "cannot", "nor"];
/// Maximum token distance between "remove"/"delete" and "app".
pub const UNINSTALL_WINDOW: usize = 3;

static BUNDLED: OnceLock<SentimentLexicon> = OnceLock::new();

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexicon {
    entries: BTreeMap<String, (f64, f64)>,
    negations: BTreeSet<String>,
}

impl SentimentLexicon {
    /// Parses `lemma<TAB>polarity<TAB>subjectivity` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::invalid(format!("lexicon line {}: expected lemma, polarity, subjectivity", n + 1));
            let mut cols = line.split('\t');
            let (Some(lemma), Some(p), Some(s)) = (cols.next(), cols.next(), cols.next()) else {
                return Err(bad());
            };
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let s: f64 = s.trim().parse().map_err(|_| bad())?;
            if !(-1.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!("lexicon line {}: value out of range", n + 1)));
            }
            entries.insert(lemma.to_string(), (p, s));
        }
        Ok(SentimentLexicon { entries, negations: NEGATIONS.iter().map(|s| s.to_string()).collect() })
    }

    pub fn bundled() -> &'static SentimentLexicon {
        BUNDLED.get_or_init(|| {
            SentimentLexicon::from_tsv(include_str!("../data/lexicon.tsv")).expect("bundled lexicon parses")
        })
    }

    pub fn get(&self, lemma: &str) -> Option<(f64, f64)> {
        self.entries.get(lemma).copied()
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Polarity in [-1, 1]; objectivity in [0, 1] with 0 factual and 1 opinionated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub polarity: f64,
    pub objectivity: f64,
}

/// Mean polarity and subjectivity of the lexicon hits. A hit preceded by a
/// negation within [`NEGATION_WINDOW`] tokens has its polarity scaled by
/// [`NEGATION_FACTOR`].
pub fn score_sentiment(tokens: &[String], lex: &SentimentLexicon) -> SentimentScore {
    let mut pol = 0.0;
    let mut subj = 0.0;
    let mut hits = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        if lex.is_negation(t) {
            continue;
        }
        let Some((p, s)) = lex.get(t) else {
            continue;
        };
        let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i].iter().any(|w| lex.is_negation(w));
        pol += if negated { p * NEGATION_FACTOR } else { p };
        subj += s;
        hits += 1;
    }
    if hits == 0 {
        return SentimentScore::default();
    }
    SentimentScore {
        polarity: (pol / hits as f64).clamp(-1.0, 1.0),
        objectivity: (subj / hits as f64).clamp(0.0, 1.0),
    }
}

/// True when the lemmas mention uninstalling or a refund: "uninstall" or
/// "refund" anywhere, or "remove"/"delete" within [`UNINSTALL_WINDOW`]
/// tokens of "app".
pub fn mentions_uninstall(tokens: &[String]) -> bool {
    if tokens.iter().any(|t| t == "uninstall" || t == "refund") {
        return true;
    }
    let apps: Vec<usize> = tokens.iter().enumerate().filter(|(_, t)| *t == "app").map(|(i, _)| i).collect();
    tokens.iter().enumerate().any(|(i, t)| {
        (t == "remove" || t == "delete") && apps.iter().any(|&a| a.abs_diff(i) <= UNINSTALL_WINDOW)
    })
}

/// The recommender's input row for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFeatures {
    pub app: String,
    pub element_key: ElementKey,
    pub release_ordinal: usize,
    pub topic: usize,
    pub n_reviews: usize,
    pub rating: f64,
    /// Release mean rating minus cluster mean rating.
    pub delta_rating: f64,
    pub polarity: f64,
    pub objectivity: f64,
    pub uninstall: usize,
}

impl ClusterFeatures {
    pub const NAMES: [&'static str; 6] = ["delta_rating", "n_reviews", "objectivity", "polarity", "rating", "uninstall"];

    /// Feature values in [`Self::NAMES`] order.
    pub fn values(&self) -> [f64; 6] {
        [
            self.delta_rating,
            self.n_reviews as f64,
            self.objectivity,
            self.polarity,
            self.rating,
            self.uninstall as f64,
        ]
    }
}

/// What feature extraction needs to know about one review.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewSignal {
    pub rating: u8,
    pub tokens: Vec<String>,
}

pub fn extract_features(
    cluster: &Cluster,
    reviews: &BTreeMap<String, ReviewSignal>,
    release_mean_rating: f64,
    lex: &SentimentLexicon,
) -> Result<ClusterFeatures> {
    if cluster.members.is_empty() {
        return Err(Error::invalid(format!("cluster {} has no members", cluster.element_key)));
    }
    let n = cluster.members.len() as f64;
    let (mut rating, mut pol, mut obj, mut uninstall) = (0.0, 0.0, 0.0, 0usize);
    for id in &cluster.members {
        let r = reviews
            .get(id)
            .ok_or_else(|| Error::invalid(format!("cluster member {id} not among informative reviews")))?;
        let s = score_sentiment(&r.tokens, lex);
        rating += r.rating as f64;
        pol += s.polarity;
        obj += s.objectivity;
        uninstall += mentions_uninstall(&r.tokens) as usize;
    }
    let rating = rating / n;
    Ok(ClusterFeatures {
        app: cluster.app.clone(),
        element_key: cluster.element_key.clone(),
        release_ordinal: cluster.release_ordinal,
        topic: cluster.topic,
        n_reviews: cluster.members.len(),
        rating,
        delta_rating: release_mean_rating - rating,
        polarity: pol / n,
        objectivity: obj / n,
        uninstall,
    })
}

/// Mean of `ratings`, or `None` when empty.
pub fn mean_rating<I: IntoIterator<Item = u8>>(ratings: I) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for r in ratings {
        sum += r as f64;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn lex() -> &'static SentimentLexicon {
        SentimentLexicon::bundled()
    }

    #[test]
    fn bundled_lexicon_loads() {
        assert!(lex().len() > 1000);
        assert_eq!(lex().get("great"), Some((0.8, 0.75)));
    }

    #[test]
    fn lexicon_rejects_out_of_range() {
        assert!(SentimentLexicon::from_tsv("x\t1.5\t0.2").is_err());
        assert!(SentimentLexicon::from_tsv("x\t0.5").is_err());
    }

    #[test]
    fn no_hits_is_zero() {
        assert_eq!(score_sentiment(&[], lex()), SentimentScore::default());
        assert_eq!(score_sentiment(&toks("xyzzy plugh"), lex()), SentimentScore::default());
    }

    #[test]
    fn single_hit_is_identity() {
        let (p, s) = lex().get("great").unwrap();
        assert_eq!(score_sentiment(&toks("great"), lex()), SentimentScore { polarity: p, objectivity: s });
    }

    #[test]
    fn negation_scales_polarity() {
        let (p, s) = lex().get("great").unwrap();
        let sc = score_sentiment(&toks("not great"), lex());
        assert_abs_diff_eq!(sc.polarity, -0.5 * p, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.objectivity, s, epsilon = 1e-12);
        // window is two tokens
        let far = score_sentiment(&toks("not xyzzy plugh great"), lex());
        assert_abs_diff_eq!(far.polarity, p, epsilon = 1e-12);
        let near = score_sentiment(&toks("never xyzzy great"), lex());
        assert_abs_diff_eq!(near.polarity, -0.5 * p, epsilon = 1e-12);
    }

    #[test]
    fn mean_over_hits() {
        let (pg, sg) = lex().get("good").unwrap();
        let (pb, sb) = lex().get("bad").unwrap();
        let sc = score_sentiment(&toks("good xyzzy bad"), lex());
        assert_abs_diff_eq!(sc.polarity, (pg + pb) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.objectivity, (sg + sb) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn uninstall_rule() {
        assert!(mentions_uninstall(&toks("go uninstall now")));
        assert!(mentions_uninstall(&toks("want refund")));
        assert!(mentions_uninstall(&toks("delete this stupid app")));
        assert!(mentions_uninstall(&toks("app crash so remove")));
        assert!(!mentions_uninstall(&toks("delete one two three four app")));
        assert!(!mentions_uninstall(&toks("delete save page")));
    }

    fn cluster(members: &[&str]) -> Cluster {
        Cluster {
            app: "a".into(),
            element_key: ElementKey::Id("e".into()),
            release_ordinal: 0,
            topic: 0,
            members: members.iter().map(|s| s.to_string()).collect(),
            top_words: vec![],
            theta: BTreeMap::new(),
        }
    }

    fn signals(rows: &[(&str, u8, &str)]) -> BTreeMap<String, ReviewSignal> {
        rows.iter()
            .map(|(id, r, t)| (id.to_string(), ReviewSignal { rating: *r, tokens: toks(t) }))
            .collect()
    }

    #[test]
    fn features_by_hand() {
        let rs = signals(&[("r1", 1, "bad uninstall"), ("r2", 2, "good"), ("r3", 3, "xyzzy")]);
        let f = extract_features(&cluster(&["r1", "r2", "r3"]), &rs, 4.0, lex()).unwrap();
        assert_eq!(f.n_reviews, 3);
        assert_abs_diff_eq!(f.rating, 2.0);
        assert_abs_diff_eq!(f.delta_rating, 2.0);
        assert_abs_diff_eq!(f.polarity, (-0.7 + 0.7 + 0.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.objectivity, (0.6667 + 0.6) / 3.0, epsilon = 1e-12);
        assert_eq!(f.uninstall, 1);
        let same = extract_features(&cluster(&["r1", "r2", "r3"]), &rs, 2.0, lex()).unwrap();
        assert_eq!(same.delta_rating, 0.0);
    }

    #[test]
    fn missing_member_is_fatal() {
        assert!(extract_features(&cluster(&["ghost"]), &BTreeMap::new(), 3.0, lex()).is_err());
    }

    const WORDS: &[&str] = &["good", "bad", "not", "great", "hate", "slow", "app", "uninstall", "xyzzy", "delete"];

    fn arb_reviews() -> impl Strategy<Value = Vec<(u8, Vec<String>)>> {
        let doc = prop::collection::vec(prop::sample::select(WORDS).prop_map(String::from), 0..6);
        prop::collection::vec((1u8..=5, doc), 1..10)
    }

    proptest! {
        #[test]
        fn score_in_range(doc in prop::collection::vec(prop::sample::select(WORDS).prop_map(String::from), 0..12)) {
            let s = score_sentiment(&doc, lex());
            prop_assert!((-1.0..=1.0).contains(&s.polarity));
            prop_assert!((0.0..=1.0).contains(&s.objectivity));
        }

        #[test]
        fn permutation_and_merge(a in arb_reviews(), b in arb_reviews()) {
            let mut rs = BTreeMap::new();
            let mut ids_a = Vec::new();
            let mut ids_b = Vec::new();
            for (i, (r, t)) in a.iter().enumerate() {
                rs.insert(format!("a{i}"), ReviewSignal { rating: *r, tokens: t.clone() });
                ids_a.push(format!("a{i}"));
            }
            for (i, (r, t)) in b.iter().enumerate() {
                rs.insert(format!("b{i}"), ReviewSignal { rating: *r, tokens: t.clone() });
                ids_b.push(format!("b{i}"));
            }
            let mk = |ids: &[String]| cluster(&ids.iter().map(String::as_str).collect::<Vec<_>>());
            let fa = extract_features(&mk(&ids_a), &rs, 3.0, lex()).unwrap();
            let fb = extract_features(&mk(&ids_b), &rs, 3.0, lex()).unwrap();
            let mut both = ids_a.clone();
            both.extend(ids_b.iter().cloned());
            let fab = extract_features(&mk(&both), &rs, 3.0, lex()).unwrap();
            let mut rev = both.clone();
            rev.reverse();
            let fr = extract_features(&mk(&rev), &rs, 3.0, lex()).unwrap();
            prop_assert_eq!(fab.n_reviews, fa.n_reviews + fb.n_reviews);
            prop_assert_eq!(fab.uninstall, fa.uninstall + fb.uninstall);
            let (na, nb) = (fa.n_reviews as f64, fb.n_reviews as f64);
            let w = |x: f64, y: f64| (na * x + nb * y) / (na + nb);
            prop_assert!((fab.rating - w(fa.rating, fb.rating)).abs() < 1e-9);
            prop_assert!((fab.polarity - w(fa.polarity, fb.polarity)).abs() < 1e-9);
            prop_assert!((fab.objectivity - w(fa.objectivity, fb.objectivity)).abs() < 1e-9);
            prop_assert!((fr.polarity - fab.polarity).abs() < 1e-9);
            prop_assert!((fr.rating - fab.rating).abs() < 1e-9);
        }
    }
}
