//! Reviews, releases, and review-to-release window assignment.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_jsonl_lenient, Loaded};
use crate::error::{Error, Result};

/// A single app-store review. Unknown input fields (title, locale) are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    #[serde(rename = "app")]
    pub app_id: String,
    pub ts: DateTime<Utc>,
    pub rating: u8,
    pub text: String,
}

impl Review {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=5).contains(&self.rating) {
            return Err(format!("review {}: rating {} outside 1..5", self.id, self.rating));
        }
        if self.text.trim().is_empty() {
            return Err(format!("review {}: empty text", self.id));
        }
        if self.id.is_empty() {
            return Err("review without id".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Release {
    #[serde(rename = "app")]
    pub app_id: String,
    pub version: String,
    pub date: DateTime<Utc>,
    pub ordinal: usize,
    #[serde(rename = "resources")]
    pub resource_root: PathBuf,
}

#[derive(Debug, Deserialize)]
struct ReleaseLine {
    app: String,
    version: String,
    date: DateTime<Utc>,
    resources: PathBuf,
}

/// Loads `reviews.jsonl`. Malformed lines, out-of-range ratings, empty texts
/// and repeated ids (per app) are skipped with a warning.
pub fn load_reviews(path: &Path) -> Result<Loaded<Review>> {
    let mut seen: HashSet<(String, String)> = HashSet::new();
    read_jsonl_lenient(path, |r: &Review| {
        r.validate()?;
        if !seen.insert((r.app_id.clone(), r.id.clone())) {
            return Err(format!("duplicate review id {} in app {}", r.id, r.app_id));
        }
        Ok(())
    })
}

/// Loads `releases.jsonl`, orders each app's releases by date and assigns
/// ordinals from 0. Relative resource paths resolve against the file's
/// directory.
pub fn load_releases(path: &Path) -> Result<Vec<Release>> {
    let loaded: Loaded<ReleaseLine> = read_jsonl_lenient(path, |_| Ok(()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut by_app: BTreeMap<String, Vec<ReleaseLine>> = BTreeMap::new();
    for line in loaded.records {
        by_app.entry(line.app.clone()).or_default().push(line);
    }
    let mut out = Vec::new();
    for (app, mut lines) in by_app {
        lines.sort_by_key(|l| l.date);
        for w in lines.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::invalid(format!(
                    "app {app}: releases {} and {} share the date {}",
                    w[0].version, w[1].version, w[0].date
                )));
            }
        }
        for (ordinal, l) in lines.into_iter().enumerate() {
            let resource_root = if l.resources.is_absolute() {
                l.resources
            } else {
                base.join(l.resources)
            };
            out.push(Release { app_id: app.clone(), version: l.version, date: l.date, ordinal, resource_root });
        }
    }
    Ok(out)
}

/// One app's releases and reviews, with each review attributed to the
/// release window it was written in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppDataset {
    pub app_id: String,
    pub releases: Vec<Release>,
    pub reviews: Vec<Review>,
    pub window_of: BTreeMap<String, usize>,
}

impl AppDataset {
    pub fn new(app_id: impl Into<String>, releases: Vec<Release>, reviews: Vec<Review>) -> Self {
        AppDataset { app_id: app_id.into(), releases, reviews, window_of: BTreeMap::new() }
    }

    pub fn reviews_in_window(&self, ordinal: usize) -> impl Iterator<Item = &Review> {
        self.reviews
            .iter()
            .filter(move |r| self.window_of.get(&r.id) == Some(&ordinal))
    }
}

/// Attributes each review to release `i` when `date(V_i) <= ts < date(V_{i+1})`.
/// Reviews older than the first release stay unassigned; the last window is
/// open-ended.
pub fn assign_windows(mut dataset: AppDataset) -> Result<AppDataset> {
    let dates: Vec<DateTime<Utc>> = dataset.releases.iter().map(|r| r.date).collect();
    for w in dates.windows(2) {
        if w[0] == w[1] {
            return Err(Error::invalid(format!(
                "app {}: two releases share the date {}",
                dataset.app_id, w[0]
            )));
        }
        if w[0] > w[1] {
            return Err(Error::invalid(format!("app {}: releases not ordered by date", dataset.app_id)));
        }
    }
    let mut window_of = BTreeMap::new();
    for review in &dataset.reviews {
        // number of releases dated at or before the review
        let upto = dates.partition_point(|d| *d <= review.ts);
        if upto > 0 {
            window_of.insert(review.id.clone(), dataset.releases[upto - 1].ordinal);
        }
    }
    dataset.window_of = window_of;
    Ok(dataset)
}

/// Groups reviews and releases by app and assigns windows. Reviews of apps
/// without any release are dropped with a warning.
pub fn build_datasets(reviews: Vec<Review>, releases: Vec<Release>) -> Result<Vec<AppDataset>> {
    let mut rel_by_app: BTreeMap<String, Vec<Release>> = BTreeMap::new();
    for r in releases {
        rel_by_app.entry(r.app_id.clone()).or_default().push(r);
    }
    let mut rev_by_app: BTreeMap<String, Vec<Review>> = BTreeMap::new();
    for r in reviews {
        rev_by_app.entry(r.app_id.clone()).or_default().push(r);
    }
    for app in rev_by_app.keys() {
        if !rel_by_app.contains_key(app) {
            log::warn!("app {app}: reviews present but no releases; ignored");
        }
    }
    rel_by_app
        .into_iter()
        .map(|(app, mut rels)| {
            rels.sort_by_key(|r| r.ordinal);
            let revs = rev_by_app.remove(&app).unwrap_or_default();
            assign_windows(AppDataset::new(app, rels, revs))
        })
        .collect()
}

/// Downsamples every class to the size of the smallest one. Retained items
/// keep their input order.
pub fn balance_classes<T, L, F>(items: Vec<T>, label: F, seed: u64) -> Vec<T>
where
    L: Ord + Clone,
    F: Fn(&T) -> L,
{
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        by_class.entry(label(it)).or_default().push(i);
    }
    let Some(min) = by_class.values().map(Vec::len).min() else {
        return items;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; items.len()];
    for idx in by_class.values() {
        for j in rand::seq::index::sample(&mut rng, idx.len(), min) {
            keep[idx[j]] = true;
        }
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(it, k)| k.then_some(it))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone};

    fn day(d: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap() + Duration::days(d)
    }

    fn release(ordinal: usize, d: i64) -> Release {
        Release {
            app_id: "a".into(),
            version: format!("v{ordinal}"),
            date: day(d),
            ordinal,
            resource_root: PathBuf::from("res"),
        }
    }

    fn review(id: &str, d: i64) -> Review {
        Review { id: id.into(), app_id: "a".into(), ts: day(d), rating: 3, text: "x".into() }
    }

    #[test]
    fn window_membership_is_half_open() {
        let ds = AppDataset::new("a", vec![release(0, 0), release(1, 10)], vec![
            review("mid", 5),
            review("edge", 10),
            review("early", -1),
            review("late", 400),
        ]);
        let ds = assign_windows(ds).unwrap();
        assert_eq!(ds.window_of.get("mid"), Some(&0));
        assert_eq!(ds.window_of.get("edge"), Some(&1));
        assert_eq!(ds.window_of.get("late"), Some(&1));
        assert_eq!(ds.window_of.get("early"), None);
    }

    #[test]
    fn identical_release_dates_are_fatal() {
        let ds = AppDataset::new("a", vec![release(0, 3), release(1, 3)], vec![]);
        assert!(assign_windows(ds).is_err());
    }

    #[test]
    fn load_reviews_skips_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"id":"r1","app":"org.wikipedia","ts":"2016-03-01T00:00:00Z","rating":1,"text":"Updates deleted my saved pages in the offline mode"}"#, "\n",
                r#"{"id":"r2","app":"org.wikipedia","ts":"2016-03-02T00:00:00Z","rating":5,"text":"ok","title":"t","locale":"en"}"#, "\n",
                r#"{"id":"r3","app":"org.wikipedia","ts":"2016-03-03T00:00:00Z","rating":4,"text":"fine"}"#, "\n",
                "{broken\n",
                r#"{"id":"r4","app":"org.wikipedia","ts":"2016-03-03T00:00:00Z","rating":9,"text":"bad rating"}"#, "\n",
                r#"{"id":"r5","app":"org.wikipedia","ts":"2016-03-03T00:00:00Z","rating":2,"text":"   "}"#, "\n",
            ),
        )
        .unwrap();
        let loaded = load_reviews(&path).unwrap();
        assert_eq!(loaded.records.len(), 3);
        assert_eq!(loaded.skipped, 3);
        assert_eq!(loaded.records[0].text, "Updates deleted my saved pages in the offline mode");
        assert_eq!(loaded.records[0].rating, 1);
    }

    #[test]
    fn empty_review_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("reviews.jsonl");
        std::fs::write(&path, "").unwrap();
        let loaded = load_reviews(&path).unwrap();
        assert!(loaded.records.is_empty());
        assert_eq!(loaded.skipped, 0);
    }

    #[test]
    fn unreadable_review_file_is_fatal() {
        assert!(load_reviews(Path::new("/no/such/reviews.jsonl")).is_err());
    }

    #[test]
    fn releases_get_ordinals_by_date() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("releases.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"app":"a","version":"2.0","date":"2016-02-01T00:00:00Z","resources":"v2"}"#, "\n",
                r#"{"app":"a","version":"1.8","date":"2016-01-01T00:00:00Z","resources":"v1"}"#, "\n",
            ),
        )
        .unwrap();
        let rels = load_releases(&path).unwrap();
        assert_eq!(rels[0].version, "1.8");
        assert_eq!(rels[0].ordinal, 0);
        assert_eq!(rels[1].ordinal, 1);
        assert_eq!(rels[1].resource_root, dir.path().join("v2"));
    }

    #[test]
    fn balancing_downsamples_majority() {
        let items: Vec<(u32, bool)> = (0..30).map(|i| (i, i % 3 == 0)).collect();
        let out = balance_classes(items, |x| x.1, 11);
        assert_eq!(out.iter().filter(|x| x.1).count(), 10);
        assert_eq!(out.iter().filter(|x| !x.1).count(), 10);
        assert!(out.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
