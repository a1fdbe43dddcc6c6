//! Pipeline configuration and the individual steps, each reading and writing
//! artifacts in the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{read_json, read_jsonl, round_to, write_json, write_jsonl, Header};
use crate::corpus::{balance_classes, build_datasets, load_releases, load_reviews, Release, Review};
use crate::error::{Error, Result};
use crate::evaluation::{kfold_cv, tlo, ConfusionMatrix, IntrusionJudgment, MetricsReport, TloReport};
use crate::informativeness::{classify, evaluate_nb_cv, join_labels, train_nb, Informativeness, LabelRecord, NbModel};
use crate::linker::{link_reviews, ElementDoc, Link};
use crate::recommender::{recommend, train_rf, Forest, LabeledRow, Recommendation, RfConfig};
use crate::releasediff::{app_deletions, key_sets, label_clusters, DeletionLabel, DeletionRecord};
use crate::signals::{extract_features, mean_rating, ClusterFeatures, ReviewSignal, SentimentLexicon};
use crate::textprep::{preprocess, LemmaTable, StopList, TokenList};
use crate::topics::{cluster_element_reviews, Cluster, HdpConfig, ThetaRecord};
use crate::uiminer::{describe_element, mine_release, ElementKey, ElementRecord, UIElement, WidgetTags};

pub mod files {
    pub const TOKENS: &str = "tokens.jsonl";
    pub const NB_MODEL: &str = "nb_model.json";
    pub const NB_CV: &str = "nb_cv.json";
    pub const FILTER: &str = "filter.jsonl";
    pub const INFORMATIVE: &str = "informative.jsonl";
    pub const ELEMENTS: &str = "elements.jsonl";
    pub const LINKS: &str = "links.jsonl";
    pub const CLUSTERS: &str = "clusters.jsonl";
    pub const THETA: &str = "theta.jsonl";
    pub const FEATURES: &str = "features.jsonl";
    pub const TRUTHSET: &str = "truthset.jsonl";
    pub const MODEL: &str = "model.json";
    pub const RECOMMENDATIONS: &str = "recommendations.jsonl";
    pub const METRICS: &str = "metrics.json";
    pub const TLO: &str = "tlo.json";
    pub const REPORT: &str = "report.md";
    pub const SUMMARY: &str = "summary.csv";
}

const NB_REVIEWS: &str = include_str!("../data/nb_reviews.jsonl");
const NB_LABELS: &str = include_str!("../data/nb_labels.jsonl");

/// Keys that never affect results and so stay out of the config hash.
const UNHASHED: &[&str] = &["out", "no_header_timestamp"];

const DEFAULTS: &[(&str, &str)] = &[
    ("reviews", ""),
    ("releases", ""),
    ("out", "out"),
    ("nb_reviews", ""),
    ("nb_labels", ""),
    ("rf_train", ""),
    ("judgments", ""),
    ("matrices", ""),
    ("apps", ""),
    ("seed", "0"),
    ("threshold", "0.65"),
    ("nb_alpha", "1.0"),
    ("nb_folds", "10"),
    ("nb_runs", "10"),
    ("hdp_gamma", "1.0"),
    ("hdp_alpha", "1.0"),
    ("hdp_eta", "0.5"),
    ("hdp_iterations", "500"),
    ("hdp_burn_in", "300"),
    ("min_reviews_for_hdp", "3"),
    ("trees", "100"),
    ("max_depth", ""),
    ("min_samples_leaf", "1"),
    ("features_per_split", "3"),
    ("bootstrap", "true"),
    ("balanced", "true"),
    ("decision_threshold", "0.5"),
    ("cv_folds", "10"),
    ("min_releases", "3"),
    ("extra_widgets", ""),
    ("no_header_timestamp", "false"),
];

const PATH_KEYS: &[&str] = &["reviews", "releases", "out", "nb_reviews", "nb_labels", "rf_train", "judgments", "matrices"];

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    DEFAULTS.iter().map(|(k, _)| *k)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
        out.insert(normalize_key(k), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub reviews: Option<PathBuf>,
    pub releases: Option<PathBuf>,
    pub out: PathBuf,
    pub nb_reviews: Option<PathBuf>,
    pub nb_labels: Option<PathBuf>,
    pub rf_train: Option<PathBuf>,
    pub judgments: Option<PathBuf>,
    pub matrices: Option<PathBuf>,
    pub apps: BTreeSet<String>,
    pub seed: u64,
    pub threshold: f64,
    pub nb_alpha: f64,
    pub nb_folds: usize,
    pub nb_runs: usize,
    pub hdp: HdpConfig,
    pub min_reviews_for_hdp: usize,
    pub rf: RfConfig,
    pub cv_folds: usize,
    pub min_releases: usize,
    pub extra_widgets: Vec<String>,
    pub no_header_timestamp: bool,
    pub config_hash: String,
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = &map[key];
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str) -> Result<bool> {
    match map[key].to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got {other:?}"))),
    }
}

fn list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl PipelineConfig {
    /// Builds a configuration from defaults, then `file` entries (relative
    /// paths resolved against `file_dir`), then `flags` (relative to the
    /// working directory). Later layers win.
    pub fn resolve(
        file: &BTreeMap<String, String>,
        file_dir: Option<&Path>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut resolved = merged.clone();
        for (layer, base) in [(file, file_dir), (flags, None)] {
            for (k, v) in layer {
                let k = normalize_key(k);
                if !merged.contains_key(&k) {
                    return Err(Error::Config(format!("unknown config key {k}")));
                }
                let path_value = match base {
                    Some(dir) if PATH_KEYS.contains(&k.as_str()) && !v.is_empty() && Path::new(v).is_relative() => {
                        dir.join(v).to_string_lossy().into_owned()
                    }
                    _ => v.clone(),
                };
                merged.insert(k.clone(), v.clone());
                resolved.insert(k, path_value);
            }
        }
        let mut hasher = Sha256::new();
        for (k, v) in &merged {
            if !UNHASHED.contains(&k.as_str()) {
                hasher.update(format!("{k}={v}\n"));
            }
        }
        let config_hash = hex::encode(hasher.finalize());
        let m = &resolved;
        let path = |k: &str| (!m[k].is_empty()).then(|| PathBuf::from(&m[k]));
        let seed: u64 = parse(m, "seed")?;
        let hdp = HdpConfig {
            gamma: parse(m, "hdp_gamma")?,
            alpha: parse(m, "hdp_alpha")?,
            eta: parse(m, "hdp_eta")?,
            iterations: parse(m, "hdp_iterations")?,
            burn_in: parse(m, "hdp_burn_in")?,
            seed,
        };
        hdp.validate()?;
        let rf = RfConfig {
            n_trees: parse(m, "trees")?,
            max_depth: if m["max_depth"].is_empty() { None } else { Some(parse(m, "max_depth")?) },
            min_samples_leaf: parse(m, "min_samples_leaf")?,
            features_per_split: parse(m, "features_per_split")?,
            bootstrap: parse_bool(m, "bootstrap")?,
            balanced: parse_bool(m, "balanced")?,
            decision_threshold: parse(m, "decision_threshold")?,
            seed,
        };
        rf.validate()?;
        let threshold: f64 = parse(m, "threshold")?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!("threshold must lie in [0, 1], got {threshold}")));
        }
        let nb_alpha: f64 = parse(m, "nb_alpha")?;
        if !(nb_alpha > 0.0) {
            return Err(Error::Config(format!("nb_alpha must be positive, got {nb_alpha}")));
        }
        Ok(PipelineConfig {
            reviews: path("reviews"),
            releases: path("releases"),
            out: PathBuf::from(&m["out"]),
            nb_reviews: path("nb_reviews"),
            nb_labels: path("nb_labels"),
            rf_train: path("rf_train"),
            judgments: path("judgments"),
            matrices: path("matrices"),
            apps: list(&m["apps"]).into_iter().collect(),
            seed,
            threshold,
            nb_alpha,
            nb_folds: parse(m, "nb_folds")?,
            nb_runs: parse(m, "nb_runs")?,
            hdp,
            min_reviews_for_hdp: parse(m, "min_reviews_for_hdp")?,
            rf,
            cv_folds: parse(m, "cv_folds")?,
            min_releases: parse(m, "min_releases")?,
            extra_widgets: list(&m["extra_widgets"]),
            no_header_timestamp: parse_bool(m, "no_header_timestamp")?,
            config_hash,
        })
    }

    /// Reads an optional config file and applies flag overrides.
    pub fn load(config_file: Option<&Path>, flags: &BTreeMap<String, String>) -> Result<Self> {
        let (file, dir) = match config_file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                (parse_config_text(&text)?, p.parent().map(Path::to_path_buf))
            }
            None => (BTreeMap::new(), None),
        };
        Self::resolve(&file, dir.as_deref(), flags)
    }

    pub fn header(&self) -> Header {
        Header::new(self.seed, self.config_hash.clone(), !self.no_header_timestamp)
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input(&self, path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        path.clone().ok_or_else(|| Error::Config(format!("no {key} file configured")))
    }

    fn wants_app(&self, app: &str) -> bool {
        self.apps.is_empty() || self.apps.contains(app)
    }

    fn write_jsonl<T: Serialize>(&self, name: &str, records: &[T]) -> Result<()> {
        write_jsonl(&self.artifact(name), Some(&self.header()), records)
    }

    fn write_json<T: Serialize>(&self, name: &str, doc: &T) -> Result<()> {
        write_json(&self.artifact(name), Some(&self.header()), doc)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.artifact(name);
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads an upstream artifact, naming the step that produces it when absent.
    fn read_jsonl<T: serde::de::DeserializeOwned>(&self, name: &str, step: Step) -> Result<Vec<T>> {
        let path = self.artifact(name);
        if !path.exists() {
            return Err(Error::MissingArtifact { artifact: path, step: step.name().into() });
        }
        read_jsonl(&path)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, name: &str, step: Step) -> Result<T> {
        let path = self.artifact(name);
        if !path.exists() {
            return Err(Error::MissingArtifact { artifact: path, step: step.name().into() });
        }
        read_json(&path)
    }

    fn releases(&self) -> Result<Vec<Release>> {
        let rel = load_releases(&self.input(&self.releases, "releases")?)?;
        Ok(rel.into_iter().filter(|r| self.wants_app(&r.app_id)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Prep,
    Filter,
    MineUi,
    Link,
    Cluster,
    Features,
    Diff,
    Recommend,
    Evaluate,
    Tlo,
    Report,
}

impl Step {
    pub const ALL: [Step; 11] = [
        Step::Prep,
        Step::Filter,
        Step::MineUi,
        Step::Link,
        Step::Cluster,
        Step::Features,
        Step::Diff,
        Step::Recommend,
        Step::Evaluate,
        Step::Tlo,
        Step::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Prep => "prep",
            Step::Filter => "filter",
            Step::MineUi => "mine-ui",
            Step::Link => "link",
            Step::Cluster => "cluster",
            Step::Features => "features",
            Step::Diff => "diff",
            Step::Recommend => "recommend",
            Step::Evaluate => "evaluate",
            Step::Tlo => "tlo",
            Step::Report => "report",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Step::Prep => "Tokenize and lemmatize reviews, assigning release windows",
            Step::Filter => "Train the informativeness classifier and keep informative reviews",
            Step::MineUi => "Extract UI elements from each release's resources",
            Step::Link => "Link reviews to UI elements of their release by TF-IDF cosine",
            Step::Cluster => "Group each element's linked reviews into HDP topics",
            Step::Features => "Compute sentiment and rating features per cluster",
            Step::Diff => "Derive deleted elements by diffing consecutive releases",
            Step::Recommend => "Train the random forest and score every cluster",
            Step::Evaluate => "Cross-validate the recommender or score given confusion matrices",
            Step::Tlo => "Compute topic log odds from intrusion judgments",
            Step::Report => "Write report.md and summary.csv",
        }
    }

    pub fn run(self, cfg: &PipelineConfig) -> Result<()> {
        log::info!("step {}", self.name());
        match self {
            Step::Prep => prep(cfg),
            Step::Filter => filter(cfg),
            Step::MineUi => mine_ui(cfg),
            Step::Link => link(cfg),
            Step::Cluster => cluster(cfg),
            Step::Features => features(cfg),
            Step::Diff => diff(cfg),
            Step::Recommend => recommend_step(cfg),
            Step::Evaluate => evaluate(cfg),
            Step::Tlo => tlo_step(cfg),
            Step::Report => report(cfg),
        }
    }
}

/// Runs every step. Evaluation and TLO are skipped with a warning when
/// their inputs cannot support them (too few labeled clusters, no
/// judgments file).
pub fn run_all(cfg: &PipelineConfig) -> Result<()> {
    for step in Step::ALL {
        match step {
            Step::Tlo if cfg.judgments.is_none() => log::info!("no judgments configured; skipping tlo"),
            Step::Evaluate => match evaluate(cfg) {
                Err(e @ (Error::Invalid(_) | Error::SingleClass(_))) => {
                    log::warn!("evaluation skipped: {e}");
                    let stale = cfg.artifact(files::METRICS);
                    if stale.exists() {
                        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                    }
                }
                other => other?,
            },
            _ => step.run(cfg)?,
        }
    }
    Ok(())
}

/// One review after preprocessing (`tokens.jsonl`, `informative.jsonl`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub app: String,
    pub review: String,
    pub release_ordinal: Option<usize>,
    pub rating: u8,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRecord {
    pub app: String,
    pub review: String,
    pub release_ordinal: Option<usize>,
    pub label: Informativeness,
    pub posterior: f64,
}

fn prep(cfg: &PipelineConfig) -> Result<()> {
    let loaded = load_reviews(&cfg.input(&cfg.reviews, "reviews")?)?;
    if loaded.skipped > 0 {
        log::warn!("{} review lines skipped", loaded.skipped);
    }
    let reviews: Vec<Review> = loaded.records.into_iter().filter(|r| cfg.wants_app(&r.app_id)).collect();
    let datasets = build_datasets(reviews, cfg.releases()?)?;
    let (table, stop) = (LemmaTable::bundled(), StopList::bundled());
    let records: Vec<TokenRecord> = datasets
        .par_iter()
        .flat_map_iter(|ds| {
            ds.reviews.iter().map(move |r| TokenRecord {
                app: ds.app_id.clone(),
                review: r.id.clone(),
                release_ordinal: ds.window_of.get(&r.id).copied(),
                rating: r.rating,
                tokens: preprocess(&r.text, table, stop),
            })
        })
        .collect();
    cfg.write_jsonl(files::TOKENS, &records)
}

fn parse_bundled<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::invalid(format!("bundled corpus: {e}"))))
        .collect()
}

fn nb_corpus(cfg: &PipelineConfig) -> Result<Vec<crate::informativeness::LabeledReview>> {
    let (reviews, labels): (Vec<Review>, Vec<LabelRecord>) = match (&cfg.nb_reviews, &cfg.nb_labels) {
        (Some(r), Some(l)) => (load_reviews(r)?.records, read_jsonl(l)?),
        (None, None) => (parse_bundled(NB_REVIEWS)?, parse_bundled(NB_LABELS)?),
        _ => return Err(Error::Config("nb_reviews and nb_labels must be given together".into())),
    };
    let (table, stop) = (LemmaTable::bundled(), StopList::bundled());
    let tokens: BTreeMap<String, Vec<String>> =
        reviews.iter().map(|r| (r.id.clone(), preprocess(&r.text, table, stop))).collect();
    let joined = join_labels(&labels, &tokens);
    Ok(balance_classes(joined, |d| d.label, cfg.seed))
}

fn filter(cfg: &PipelineConfig) -> Result<()> {
    let tokens: Vec<TokenRecord> = cfg.read_jsonl(files::TOKENS, Step::Prep)?;
    let training = nb_corpus(cfg)?;
    let model = train_nb(&training, cfg.nb_alpha)?;
    match evaluate_nb_cv(&training, cfg.nb_folds, cfg.nb_runs, cfg.nb_alpha, cfg.seed) {
        Ok(report) => {
            log::info!(
                "filter cross-validation: F1 informative {:.3}, non-informative {:.3}",
                report.f1_informative.mean,
                report.f1_non_informative.mean
            );
            cfg.write_json(files::NB_CV, &report)?;
        }
        Err(e) => log::warn!("filter cross-validation skipped: {e}"),
    }
    cfg.write_json(files::NB_MODEL, &model)?;
    let verdicts: Vec<FilterRecord> = tokens
        .par_iter()
        .map(|t| {
            let (label, posterior) = classify(&model, &t.tokens);
            FilterRecord {
                app: t.app.clone(),
                review: t.review.clone(),
                release_ordinal: t.release_ordinal,
                label,
                posterior,
            }
        })
        .collect();
    let informative: Vec<&TokenRecord> = tokens
        .iter()
        .zip(&verdicts)
        .filter(|(t, v)| v.label == Informativeness::Informative && t.release_ordinal.is_some())
        .map(|(t, _)| t)
        .collect();
    cfg.write_jsonl(files::FILTER, &verdicts)?;
    cfg.write_jsonl(files::INFORMATIVE, &informative)
}

fn mine_ui(cfg: &PipelineConfig) -> Result<()> {
    let tags = WidgetTags::default().with_extra(cfg.extra_widgets.iter().cloned());
    let releases = cfg.releases()?;
    let records: Vec<ElementRecord> = releases
        .par_iter()
        .flat_map_iter(|r| {
            if !r.resource_root.is_dir() {
                log::warn!("{} {}: resource root {} missing", r.app_id, r.version, r.resource_root.display());
            }
            mine_release(&r.resource_root, &tags, &r.app_id, r.ordinal)
                .into_iter()
                .map(ElementRecord::from)
        })
        .collect();
    cfg.write_jsonl(files::ELEMENTS, &records)
}

type Window = (String, usize);

fn link(cfg: &PipelineConfig) -> Result<()> {
    let informative: Vec<TokenRecord> = cfg.read_jsonl(files::INFORMATIVE, Step::Filter)?;
    let elements: Vec<ElementRecord> = cfg.read_jsonl(files::ELEMENTS, Step::MineUi)?;
    let (table, stop) = (LemmaTable::bundled(), StopList::bundled());
    let mut windows: BTreeMap<Window, (Vec<TokenList>, Vec<ElementDoc>)> = BTreeMap::new();
    for t in informative {
        if let Some(o) = t.release_ordinal {
            windows.entry((t.app, o)).or_default().0.push(TokenList { review_id: t.review, tokens: t.tokens });
        }
    }
    for e in elements {
        let tokens = describe_element(&e.element, table, stop);
        windows
            .entry((e.element.app.clone(), e.element.release_ordinal))
            .or_default()
            .1
            .push(ElementDoc { key: e.element_key, tokens });
    }
    let links: Vec<Link> = windows
        .par_iter()
        .flat_map_iter(|((app, ordinal), (reviews, docs))| link_reviews(app, *ordinal, reviews, docs, cfg.threshold))
        .map(|mut l| {
            l.sim = round_to(l.sim, 4);
            l
        })
        .collect();
    cfg.write_jsonl(files::LINKS, &links)
}

fn tokens_by_app(records: Vec<TokenRecord>) -> BTreeMap<String, Vec<TokenList>> {
    let mut out: BTreeMap<String, Vec<TokenList>> = BTreeMap::new();
    for t in records {
        out.entry(t.app).or_default().push(TokenList { review_id: t.review, tokens: t.tokens });
    }
    out
}

fn cluster(cfg: &PipelineConfig) -> Result<()> {
    let links: Vec<Link> = cfg.read_jsonl(files::LINKS, Step::Link)?;
    let informative: Vec<TokenRecord> = cfg.read_jsonl(files::INFORMATIVE, Step::Filter)?;
    let tokens = tokens_by_app(informative);
    let mut by_app: BTreeMap<&str, Vec<Link>> = BTreeMap::new();
    for l in &links {
        by_app.entry(l.app.as_str()).or_default().push(l.clone());
    }
    let empty = Vec::new();
    let parts = by_app
        .into_iter()
        .map(|(app, links)| {
            cluster_element_reviews(&links, tokens.get(app).unwrap_or(&empty), &cfg.hdp, cfg.min_reviews_for_hdp)
        })
        .collect::<Result<Vec<_>>>()?;
    let clusters: Vec<&Cluster> = parts.iter().flat_map(|p| &p.clusters).collect();
    let theta: Vec<&ThetaRecord> = parts.iter().flat_map(|p| &p.theta).collect();
    cfg.write_jsonl(files::CLUSTERS, &clusters)?;
    cfg.write_jsonl(files::THETA, &theta)
}

fn features(cfg: &PipelineConfig) -> Result<()> {
    let clusters: Vec<Cluster> = cfg.read_jsonl(files::CLUSTERS, Step::Cluster)?;
    let informative: Vec<TokenRecord> = cfg.read_jsonl(files::INFORMATIVE, Step::Filter)?;
    let mut signals: BTreeMap<String, BTreeMap<String, ReviewSignal>> = BTreeMap::new();
    let mut ratings: BTreeMap<Window, Vec<u8>> = BTreeMap::new();
    for t in informative {
        if let Some(o) = t.release_ordinal {
            ratings.entry((t.app.clone(), o)).or_default().push(t.rating);
        }
        signals
            .entry(t.app)
            .or_default()
            .insert(t.review, ReviewSignal { rating: t.rating, tokens: t.tokens });
    }
    let release_mean: BTreeMap<Window, f64> = ratings
        .into_iter()
        .filter_map(|(w, r)| mean_rating(r).map(|m| (w, m)))
        .collect();
    let lex = SentimentLexicon::bundled();
    let empty = BTreeMap::new();
    let rows: Vec<ClusterFeatures> = clusters
        .par_iter()
        .map(|c| {
            let mean = release_mean
                .get(&(c.app.clone(), c.release_ordinal))
                .copied()
                .ok_or_else(|| Error::invalid(format!("no informative reviews in {} release {}", c.app, c.release_ordinal)))?;
            extract_features(c, signals.get(&c.app).unwrap_or(&empty), mean, lex)
        })
        .collect::<Result<_>>()?;
    cfg.write_jsonl(files::FEATURES, &rows)
}

fn release_counts(cfg: &PipelineConfig) -> Result<BTreeMap<String, usize>> {
    let mut counts = BTreeMap::new();
    for r in cfg.releases()? {
        *counts.entry(r.app_id).or_default() += 1;
    }
    Ok(counts)
}

fn elements_by_app(elements: Vec<ElementRecord>) -> BTreeMap<String, Vec<UIElement>> {
    let mut out: BTreeMap<String, Vec<UIElement>> = BTreeMap::new();
    for e in elements {
        out.entry(e.element.app.clone()).or_default().push(e.element);
    }
    out
}

fn diff(cfg: &PipelineConfig) -> Result<()> {
    let elements = elements_by_app(cfg.read_jsonl(files::ELEMENTS, Step::MineUi)?);
    let counts = release_counts(cfg)?;
    let mut records: Vec<DeletionRecord> = Vec::new();
    for (app, n) in &counts {
        let sets = key_sets(elements.get(app).map(Vec::as_slice).unwrap_or(&[]), *n);
        records.extend(app_deletions(app, &sets));
    }
    cfg.write_jsonl(files::TRUTHSET, &records)
}

/// Feature rows with deletion labels, restricted to clusters that can be
/// evaluated: apps with at least `min_releases` releases, and clusters
/// before each app's last release.
pub fn labeled_rows(cfg: &PipelineConfig) -> Result<Vec<LabeledRow>> {
    let clusters: Vec<Cluster> = cfg.read_jsonl(files::CLUSTERS, Step::Cluster)?;
    let rows: Vec<ClusterFeatures> = cfg.read_jsonl(files::FEATURES, Step::Features)?;
    let truth: Vec<DeletionRecord> = cfg.read_jsonl(files::TRUTHSET, Step::Diff)?;
    let elements: Vec<ElementRecord> = cfg.read_jsonl(files::ELEMENTS, Step::MineUi)?;
    if clusters.len() != rows.len() {
        return Err(Error::invalid(format!(
            "{} has {} rows but {} has {}; rerun features",
            files::FEATURES,
            rows.len(),
            files::CLUSTERS,
            clusters.len()
        )));
    }
    let counts = release_counts(cfg)?;
    let mut known: BTreeMap<(String, usize), BTreeSet<ElementKey>> = BTreeMap::new();
    for e in elements {
        known.entry((e.element.app, e.element.release_ordinal)).or_default().insert(e.element_key);
    }
    let labels = label_clusters(&truth, &clusters, &known);
    Ok(rows
        .into_iter()
        .zip(labels)
        .filter(|(f, _)| {
            counts
                .get(&f.app)
                .is_some_and(|&n| n >= cfg.min_releases && f.release_ordinal + 1 < n)
        })
        .map(|(features, label)| LabeledRow { features, label })
        .collect())
}

fn recommend_step(cfg: &PipelineConfig) -> Result<()> {
    let rows: Vec<ClusterFeatures> = cfg.read_jsonl(files::FEATURES, Step::Features)?;
    let mut training = labeled_rows(cfg)?;
    if let Some(extra) = &cfg.rf_train {
        let mut more: Vec<LabeledRow> = read_jsonl(extra)?;
        log::info!("{} additional training rows from {}", more.len(), extra.display());
        training.append(&mut more);
    }
    let forest = train_rf(&training, &cfg.rf)?;
    let recs: Vec<Recommendation> = recommend(&forest, &rows, cfg.rf.decision_threshold)?
        .into_iter()
        .map(|mut r| {
            r.prob = round_to(r.prob, 4);
            r
        })
        .collect();
    cfg.write_json(files::MODEL, &forest)?;
    cfg.write_jsonl(files::RECOMMENDATIONS, &recs)
}

/// A line of a confusion-matrix input file for `evaluate` in matrices mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub app: String,
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
}

fn evaluate(cfg: &PipelineConfig) -> Result<()> {
    let report = match &cfg.matrices {
        Some(path) => {
            let rows: Vec<MatrixRow> = read_jsonl(path)?;
            let mut per_app = BTreeMap::new();
            for r in rows {
                if per_app.insert(r.app.clone(), r.matrix).is_some() {
                    return Err(Error::invalid(format!("duplicate matrix row for app {}", r.app)));
                }
            }
            MetricsReport::from_matrices(&per_app, None)
        }
        None => kfold_cv(&labeled_rows(cfg)?, cfg.cv_folds, &cfg.rf, cfg.seed)?,
    };
    cfg.write_json(files::METRICS, &report)
}

fn tlo_step(cfg: &PipelineConfig) -> Result<()> {
    let judgments: Vec<IntrusionJudgment> = read_jsonl(&cfg.input(&cfg.judgments, "judgments")?)?;
    cfg.write_json(files::TLO, &tlo(&judgments)?)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

fn report(cfg: &PipelineConfig) -> Result<()> {
    let recs: Vec<Recommendation> = cfg.read_jsonl(files::RECOMMENDATIONS, Step::Recommend)?;
    let clusters: Vec<Cluster> = cfg.read_jsonl(files::CLUSTERS, Step::Cluster)?;
    let metrics: Option<MetricsReport> = cfg
        .artifact(files::METRICS)
        .exists()
        .then(|| cfg.read_json(files::METRICS, Step::Evaluate))
        .transpose()?;
    let tlo_report: Option<TloReport> = cfg
        .artifact(files::TLO)
        .exists()
        .then(|| cfg.read_json(files::TLO, Step::Tlo))
        .transpose()?;
    let label: BTreeMap<(String, String, usize, usize), (String, usize)> = clusters
        .iter()
        .map(|c| {
            (
                (c.app.clone(), c.element_key.to_string(), c.release_ordinal, c.topic),
                (c.label(), c.members.len()),
            )
        })
        .collect();
    let mut sorted: Vec<&Recommendation> = recs.iter().collect();
    sorted.sort_by(|a, b| {
        b.prob
            .total_cmp(&a.prob)
            .then_with(|| a.app.cmp(&b.app))
            .then_with(|| a.element_key.cmp(&b.element_key))
            .then(a.release_ordinal.cmp(&b.release_ordinal))
            .then(a.topic.cmp(&b.topic))
    });

    let header = cfg.header();
    let mut md = String::new();
    let _ = writeln!(md, "<!-- {} -->", header.comment_line("").trim());
    let _ = writeln!(md, "# Deletion candidates\n");
    let n_cand = recs.iter().filter(|r| r.is_candidate()).count();
    let _ = writeln!(md, "{n_cand} of {} clusters are deletion candidates.\n", recs.len());
    let _ = writeln!(md, "| app | element | release | topic | top words | reviews | probability | decision |");
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
    for r in &sorted {
        let key = (r.app.clone(), r.element_key.to_string(), r.release_ordinal, r.topic);
        let (words, n) = label.get(&key).cloned().unwrap_or_default();
        let decision = if r.is_candidate() { "delete_candidate" } else { "keep" };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {:.4} | {} |",
            r.app, r.element_key, r.release_ordinal, r.topic, words, n, r.prob, decision
        );
    }
    let mut csv = format!("{}\napp,fp,fn,tp,tn,precision,recall,f1\n", header.comment_line("#"));
    if let Some(m) = &metrics {
        let _ = writeln!(md, "\n# Evaluation\n");
        let _ = writeln!(md, "| app | FP | FN | TP | TN | precision | recall | F1 |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
        for (app, a) in &m.per_app {
            let x = &a.matrix;
            let cells = format!(
                "{},{},{},{},{},{},{},{}",
                app,
                x.fp,
                x.fn_,
                x.tp,
                x.tn,
                fmt_opt(a.precision),
                fmt_opt(a.recall),
                fmt_opt(a.f1)
            );
            let _ = writeln!(csv, "{cells}");
            let _ = writeln!(md, "| {} |", cells.replace(',', " | "));
        }
        let _ = writeln!(csv, "average,,,,,,,{}", fmt_opt(m.macro_f1));
        let _ = writeln!(md, "\nMacro F1: {}. Pooled F1: {}.", fmt_opt(m.macro_f1), fmt_opt(m.pooled_f1));
    }
    if let Some(t) = &tlo_report {
        let _ = writeln!(md, "\n# Topic intrusion\n\nMean TLO over {} documents: {}.", t.per_doc.len(), fmt_opt(t.mean));
    }
    cfg.write_text(files::REPORT, &md)?;
    cfg.write_text(files::SUMMARY, &csv)
}

/// Loads a trained forest from the output directory.
pub fn load_forest(cfg: &PipelineConfig) -> Result<Forest> {
    cfg.read_json(files::MODEL, Step::Recommend)
}

pub fn load_nb_model(cfg: &PipelineConfig) -> Result<NbModel> {
    cfg.read_json(files::NB_MODEL, Step::Filter)
}

/// Labels of every cluster keyed like recommendations, for
/// [`crate::evaluation::evaluate_predictions`].
pub fn truth_map(rows: &[LabeledRow]) -> BTreeMap<crate::evaluation::ClusterId, DeletionLabel> {
    rows.iter()
        .map(|r| {
            let f = &r.features;
            ((f.app.clone(), f.element_key.clone(), f.release_ordinal, f.topic), r.label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_layers_and_hash() {
        let file = parse_config_text("# demo\nseed = 5\nthreshold=0.7\nreviews = r.jsonl\n").unwrap();
        let cfg = PipelineConfig::resolve(&file, Some(Path::new("/data")), &flags(&[("threshold", "0.8")])).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.threshold, 0.8);
        assert_eq!(cfg.reviews, Some(PathBuf::from("/data/r.jsonl")));
        assert_eq!(cfg.hdp.seed, 5);
        let other_out = PipelineConfig::resolve(
            &file,
            Some(Path::new("/data")),
            &flags(&[("threshold", "0.8"), ("out", "elsewhere"), ("no-header-timestamp", "true")]),
        )
        .unwrap();
        assert_eq!(cfg.config_hash, other_out.config_hash);
        let other_seed = PipelineConfig::resolve(&file, None, &flags(&[("seed", "6")])).unwrap();
        assert_ne!(cfg.config_hash, other_seed.config_hash);
    }

    #[test]
    fn bad_config_is_rejected() {
        assert!(parse_config_text("novalue").is_err());
        assert!(PipelineConfig::resolve(&flags(&[("bogus", "1")]), None, &BTreeMap::new()).is_err());
        assert!(PipelineConfig::resolve(&flags(&[("seed", "x")]), None, &BTreeMap::new()).is_err());
        assert!(PipelineConfig::resolve(&flags(&[("threshold", "2")]), None, &BTreeMap::new()).is_err());
        assert!(PipelineConfig::resolve(&flags(&[("hdp_iterations", "5")]), None, &BTreeMap::new()).is_err());
    }

    #[test]
    fn missing_upstream_artifact_names_step() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::resolve(
            &BTreeMap::new(),
            None,
            &flags(&[("out", dir.path().to_str().unwrap())]),
        )
        .unwrap();
        match Step::Link.run(&cfg) {
            Err(Error::MissingArtifact { step, .. }) => assert_eq!(step, "filter"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundled_filter_corpus_is_balanced() {
        let cfg = PipelineConfig::resolve(&BTreeMap::new(), None, &BTreeMap::new()).unwrap();
        let data = nb_corpus(&cfg).unwrap();
        let inf = data.iter().filter(|d| d.label == Informativeness::Informative).count();
        assert_eq!(inf * 2, data.len());
    }
}
