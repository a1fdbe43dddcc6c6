//! Review text normalisation: lowercase, expand contractions, strip
//! non-alphanumerics, drop stop words, lemmatise.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_LEMMAS: &str = include_str!("../data/lemmas.tsv");
const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Lemma tokens for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenList {
    pub review_id: String,
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn new(review_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenList { review_id: review_id.into(), tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    /// Candidate replacements; the first one yielding a known word wins,
    /// otherwise the first one is used.
    pub replacements: Vec<String>,
}

impl SuffixRule {
    fn new(suffix: &str, replacements: &[&str]) -> Self {
        SuffixRule {
            suffix: suffix.to_string(),
            replacements: replacements.iter().map(|s| s.to_string()).collect(),
        }
    }
}

const MIN_STEM: usize = 3;

/// Dictionary lemmatiser with suffix-rule fallback for unknown forms.
#[derive(Debug, Clone)]
pub struct LemmaTable {
    map: HashMap<String, String>,
    lemmas: HashSet<String>,
    rules: Vec<SuffixRule>,
}

impl LemmaTable {
    pub fn default_rules() -> Vec<SuffixRule> {
        vec![
            SuffixRule::new("ies", &["y"]),
            SuffixRule::new("es", &["e", ""]),
            SuffixRule::new("s", &[""]),
            SuffixRule::new("ing", &["", "e"]),
            SuffixRule::new("ed", &["", "e"]),
        ]
    }

    /// Builds a table from `(surface, lemma)` pairs. Chains (`a -> b`,
    /// `b -> c`) are resolved so every stored lemma maps to itself.
    pub fn from_pairs<I, S>(pairs: I, rules: Vec<SuffixRule>) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let raw: HashMap<String, String> = pairs
            .into_iter()
            .map(|(s, l)| (s.into().to_lowercase(), l.into().to_lowercase()))
            .collect();
        let mut map = HashMap::with_capacity(raw.len());
        for (surface, lemma) in &raw {
            let mut cur = lemma.clone();
            let mut hops = 0;
            while let Some(next) = raw.get(&cur) {
                if *next == cur {
                    break;
                }
                hops += 1;
                if hops > 16 {
                    // cycle: the surface form becomes its own lemma
                    cur = surface.clone();
                    break;
                }
                cur = next.clone();
            }
            map.insert(surface.clone(), cur);
        }
        // a resolved lemma that is itself a key must map to itself
        let fix: Vec<String> = map
            .values()
            .filter(|l| map.get(*l).is_some_and(|m| m != *l))
            .cloned()
            .collect();
        for l in fix {
            map.insert(l.clone(), l);
        }
        let lemmas = map.values().cloned().collect();
        LemmaTable { map, lemmas, rules }
    }

    /// Parses `surface<TAB>lemma` lines. Blank lines and `#` comments are ignored.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (s, l) = line
                .split_once('\t')
                .ok_or_else(|| Error::invalid(format!("lemmas.tsv line {}: expected surface<TAB>lemma", n + 1)))?;
            pairs.push((s.trim().to_string(), l.trim().to_string()));
        }
        Ok(Self::from_pairs(pairs, Self::default_rules()))
    }

    pub fn bundled() -> &'static LemmaTable {
        static TABLE: OnceLock<LemmaTable> = OnceLock::new();
        TABLE.get_or_init(|| LemmaTable::from_tsv(BUNDLED_LEMMAS).expect("bundled lemmas.tsv is well-formed"))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn is_known(&self, w: &str) -> bool {
        self.map.contains_key(w) || self.lemmas.contains(w)
    }

    fn apply_rule(&self, w: &str) -> Option<String> {
        for rule in &self.rules {
            let Some(stem) = w.strip_suffix(rule.suffix.as_str()) else {
                continue;
            };
            if stem.chars().count() < MIN_STEM {
                continue;
            }
            if rule.suffix == "s" && (stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i')) {
                continue;
            }
            let candidates: Vec<String> = rule.replacements.iter().map(|r| format!("{stem}{r}")).collect();
            let pick = candidates
                .iter()
                .find(|c| self.is_known(c))
                .unwrap_or(&candidates[0])
                .clone();
            return Some(pick);
        }
        None
    }

    /// Dictionary form of `word` (expected lowercase). Total, deterministic
    /// and idempotent.
    pub fn lemmatize(&self, word: &str) -> String {
        let mut cur = word.to_string();
        loop {
            if let Some(l) = self.map.get(&cur) {
                return l.clone();
            }
            if self.lemmas.contains(&cur) {
                return cur;
            }
            match self.apply_rule(&cur) {
                // every rule strictly shortens, so this terminates
                Some(next) => cur = next,
                None => return cur,
            }
        }
    }
}

/// Effective stop-word set: the base list minus `+word` keep-list overrides.
#[derive(Debug, Clone, Default)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn parse(text: &str) -> Self {
        let mut words = HashSet::new();
        let mut keep = HashSet::new();
        for line in text.lines() {
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            match w.strip_prefix('+') {
                Some(k) => {
                    keep.insert(k.trim().to_lowercase());
                }
                None => {
                    words.insert(w.to_lowercase());
                }
            }
        }
        words.retain(|w| !keep.contains(w));
        StopList { words }
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        StopList { words: words.into_iter().map(Into::into).collect() }
    }

    pub fn bundled() -> &'static StopList {
        static LIST: OnceLock<StopList> = OnceLock::new();
        LIST.get_or_init(|| StopList::parse(BUNDLED_STOPWORDS))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }
}

// Longer patterns first; applied to lowercased text with ASCII apostrophes.
const CONTRACTIONS: &[(&str, &str)] = &[
    ("can't", "can not"),
    ("won't", "will not"),
    ("shan't", "shall not"),
    ("n't", " not"),
    ("'re", " are"),
    ("'ve", " have"),
    ("'ll", " will"),
    ("'m", " am"),
    ("'s", ""),
];

pub fn expand_contractions(lower: &str) -> String {
    let mut s = lower.replace(['\u{2019}', '\u{2018}', '`'], "'");
    for (from, to) in CONTRACTIONS {
        s = s.replace(from, to);
    }
    s
}

/// Normalises `text` into lemma tokens. Stop words are removed both before
/// and after lemmatisation, so no output token is on the stop list.
pub fn preprocess(text: &str, table: &LemmaTable, stoplist: &StopList) -> Vec<String> {
    let lower = text.to_lowercase();
    let expanded = expand_contractions(&lower);
    let cleaned: String = expanded
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !stoplist.contains(w))
        .map(|w| table.lemmatize(w))
        .filter(|l| !stoplist.contains(l))
        .collect()
}

/// Splits an identifier such as `closeAllTabs2` or `btn_mic` into words.
/// Underscores, digits, punctuation and lower-to-upper transitions separate words.
pub fn split_identifier(ident: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = ident.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphabetic() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let boundary = c.is_uppercase()
            && !cur.is_empty()
            && (chars[i - 1].is_lowercase()
                || chars.get(i + 1).is_some_and(|n| n.is_lowercase()));
        if boundary {
            words.push(std::mem::take(&mut cur));
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prep(s: &str) -> Vec<String> {
        preprocess(s, LemmaTable::bundled(), StopList::bundled())
    }

    #[test]
    fn walkthrough_sentence() {
        assert_eq!(
            prep("I can't use save pages as it keeps crashing"),
            ["can", "not", "use", "save", "page", "keep", "crash"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(prep("").is_empty());
        assert!(prep("   \t").is_empty());
    }

    #[test]
    fn deciding_and_decided() {
        assert_eq!(prep("Deciding decided"), ["decide", "decide"]);
    }

    #[test]
    fn emojis_and_punctuation_stripped() {
        assert_eq!(prep("Crashes!!! 😡😡 #fail"), ["crash", "fail"]);
    }

    #[test]
    fn curly_apostrophe_contraction() {
        assert_eq!(prep("It doesn\u{2019}t sync"), ["not", "sync"]);
        assert_eq!(prep("won't load"), ["will", "not", "load"]);
    }

    #[test]
    fn suffix_rules_for_unknown_words() {
        let t = LemmaTable::from_pairs(vec![("decide", "decide"), ("box", "box")], LemmaTable::default_rules());
        assert_eq!(t.lemmatize("deciding"), "decide");
        assert_eq!(t.lemmatize("boxes"), "box");
        assert_eq!(t.lemmatize("zorbies"), "zorby");
        assert_eq!(t.lemmatize("zorbings"), "zorb");
        assert_eq!(t.lemmatize("class"), "class");
        assert_eq!(t.lemmatize("sing"), "sing");
    }

    #[test]
    fn chains_resolve_to_fixed_points() {
        let t = LemmaTable::from_pairs(vec![("a1", "b1"), ("b1", "c1"), ("x1", "y1"), ("y1", "x1")], vec![]);
        assert_eq!(t.lemmatize("a1"), "c1");
        assert_eq!(t.lemmatize("b1"), "c1");
        let y = t.lemmatize("y1");
        assert_eq!(t.lemmatize(&y), y);
    }

    #[test]
    fn bundled_table_is_idempotent_on_its_lemmas() {
        let t = LemmaTable::bundled();
        assert!(t.len() > 15_000);
        for l in t.lemmas.iter() {
            assert_eq!(&t.lemmatize(l), l);
        }
    }

    #[test]
    fn stoplist_keep_overrides() {
        let s = StopList::parse("the\nnot\nall\n+not\n+all\n# c\n");
        assert!(s.contains("the"));
        assert!(!s.contains("not"));
        assert!(!s.contains("all"));
        let b = StopList::bundled();
        for w in ["not", "no", "never", "can", "cannot"] {
            assert!(!b.contains(w), "{w} must be kept");
        }
        assert!(b.contains("i") && b.contains("this"));
    }

    #[test]
    fn identifier_splitting() {
        assert_eq!(split_identifier("closeAllTabs2"), ["close", "all", "tabs"]);
        assert_eq!(split_identifier("btn_mic"), ["btn", "mic"]);
        assert_eq!(split_identifier("MenuItem"), ["menu", "item"]);
        assert_eq!(split_identifier("HTMLView"), ["html", "view"]);
    }

    proptest! {
        #[test]
        fn idempotent(text in "[a-zA-Z' .,!?0-9\u{1F600}-\u{1F64F}]{0,80}") {
            let once = prep(&text);
            let twice = prep(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn output_is_alphanumeric_and_not_stopwords(text in "\\PC{0,60}") {
            for tok in prep(&text) {
                prop_assert!(tok.chars().all(char::is_alphanumeric));
                prop_assert!(!StopList::bundled().contains(&tok));
            }
        }

        #[test]
        fn cant_always_gives_can_not(word in "[a-z]{3,8}") {
            let toks = prep(&format!("can't {word}"));
            prop_assert_eq!(&toks[..2], &["can".to_string(), "not".to_string()][..]);
        }
    }
}
