//! Planted-signal corpus generator: apps whose releases drop exactly the
//! buttons that drew angry, uninstall-laden reviews in the previous window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::Review;
use crate::error::{Error, Result};

const NOUNS: &[&str] = &[
    "photo", "album", "camera", "sticker", "playlist", "podcast", "radio", "lyric", "channel", "comment",
    "contact", "calendar", "reminder", "weather", "forecast", "wallet", "coupon", "ticket", "recipe",
    "grocery", "workout", "timer", "compass", "dictionary", "translator", "scanner", "printer", "keyboard",
    "emoji", "gallery", "folder", "backup", "password", "vault", "invoice", "receipt", "budget", "journal",
    "garden", "planet", "guitar", "piano", "harbor", "castle", "rocket", "bridge", "lantern", "meadow",
];

const GOOD: &[(&str, u8)] = &[
    ("The {e} button works well", 5),
    ("The {e} button loads fast", 5),
    ("Nice {e} button after the update", 4),
    ("The {e} button is useful", 4),
    ("The new {e} button works", 5),
];

const BAD: &[(&str, u8)] = &[
    ("The {e} button crashes, uninstall", 1),
    ("The {e} button freezes, terrible, uninstalled", 1),
    ("Awful {e} button, it crashes", 1),
    ("The {e} button is broken, uninstalling", 2),
    ("Terrible {e} button keeps crashing", 1),
];

const CHATTER: &[&str] = &["Love it", "Great app", "I hate this app!", "Awesome", "Best app ever"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub apps: usize,
    pub releases: usize,
    pub elements_per_release: usize,
    pub reviews_per_element: usize,
    pub bad_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec { apps: 20, releases: 4, elements_per_release: 6, reviews_per_element: 8, bad_fraction: 0.3, seed: 0 }
    }
}

/// One button of one release.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedElement {
    pub id: String,
    pub label: String,
    pub bad: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticApp {
    pub app: String,
    pub dates: Vec<DateTime<Utc>>,
    /// Buttons of each release, by ordinal.
    pub layouts: Vec<Vec<PlantedElement>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub apps: Vec<SyntheticApp>,
    pub reviews: Vec<Review>,
}

#[derive(Serialize)]
struct ReleaseLine<'a> {
    app: &'a str,
    version: String,
    date: DateTime<Utc>,
    resources: String,
}

fn fresh(rng: &mut ChaCha8Rng, used: &mut BTreeSet<&'static str>, bad_fraction: f64) -> Result<PlantedElement> {
    let free: Vec<&'static str> = NOUNS.iter().copied().filter(|n| !used.contains(n)).collect();
    if free.len() < 2 {
        return Err(Error::invalid("synthetic app ran out of element names"));
    }
    let mut pick = free.choose_multiple(rng, 2);
    let (a, b) = (pick.next().unwrap(), pick.next().unwrap());
    used.insert(a);
    used.insert(b);
    let mut label = format!("{a} {b}");
    label[..1].make_ascii_uppercase();
    Ok(PlantedElement { id: format!("{a}_{b}"), label, bad: rng.random_bool(bad_fraction) })
}

fn planted_text(rng: &mut ChaCha8Rng, element: &PlantedElement) -> (String, u8) {
    let pool = if element.bad { BAD } else { GOOD };
    let (template, rating) = pool[rng.random_range(0..pool.len())];
    let words = element.id.replace('_', " ");
    let mut text = template.replace("{e}", &words);
    if template.starts_with("{e}") {
        text[..1].make_ascii_uppercase();
    }
    (text, rating)
}

/// Generates a corpus from `spec`. Bad elements of every release but the
/// last vanish in the next release and are replaced by fresh ones; good
/// elements persist. Bad elements of the last release also persist.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.releases < 2 || spec.elements_per_release == 0 || spec.reviews_per_element == 0 {
        return Err(Error::invalid("synthetic corpus needs at least 2 releases, 1 element and 1 review"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
    let mut apps = Vec::new();
    let mut reviews = Vec::new();
    for a in 0..spec.apps {
        let app = format!("app{a:02}");
        let dates: Vec<DateTime<Utc>> = (0..spec.releases).map(|i| start + Duration::days(60 * i as i64)).collect();
        let mut used = BTreeSet::new();
        let mut current: Vec<PlantedElement> = (0..spec.elements_per_release)
            .map(|_| fresh(&mut rng, &mut used, spec.bad_fraction))
            .collect::<Result<_>>()?;
        let mut layouts = Vec::new();
        for r in 0..spec.releases {
            let mut n = 0;
            let mut push = |text: String, rating: u8, rng: &mut ChaCha8Rng| {
                let ts = dates[r] + Duration::minutes(rng.random_range(0..60 * 24 * 59));
                reviews.push(Review { id: format!("{app}-r{r}-{n:03}"), app_id: app.clone(), ts, rating, text });
                n += 1;
            };
            for e in &current {
                for _ in 0..spec.reviews_per_element {
                    let (text, rating) = planted_text(&mut rng, e);
                    push(text, rating, &mut rng);
                }
            }
            for _ in 0..2 {
                let text = CHATTER[rng.random_range(0..CHATTER.len())].to_string();
                let rating = rng.random_range(1..=5);
                push(text, rating, &mut rng);
            }
            layouts.push(current.clone());
            if r + 1 < spec.releases {
                current = current
                    .into_iter()
                    .map(|e| if e.bad { fresh(&mut rng, &mut used, spec.bad_fraction) } else { Ok(e) })
                    .collect::<Result<_>>()?;
            }
        }
        apps.push(SyntheticApp { app, dates, layouts });
    }
    Ok(SyntheticCorpus { apps, reviews })
}

fn layout_xml(elements: &[PlantedElement]) -> String {
    let mut xml = String::from(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<LinearLayout xmlns:android=\"http://schemas.android.com/apk/res/android\"\n    android:orientation=\"vertical\">\n",
    );
    for e in elements {
        let _ = writeln!(
            xml,
            "    <Button android:id=\"@+id/{id}\" android:text=\"@string/{id}\" />",
            id = e.id
        );
    }
    xml.push_str("</LinearLayout>\n");
    xml
}

fn strings_xml(elements: &[PlantedElement]) -> String {
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<resources>\n");
    for e in elements {
        let _ = writeln!(xml, "    <string name=\"{}\">{}</string>", e.id, e.label);
    }
    xml.push_str("</resources>\n");
    xml
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes reviews, releases, resource trees and a `pipeline.conf` under
/// `dir`, returning the config path.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: &Path) -> Result<PathBuf> {
    let mut releases = String::new();
    for app in &corpus.apps {
        for (r, elements) in app.layouts.iter().enumerate() {
            let root = format!("res/{}/v{}", app.app, r + 1);
            write_file(&dir.join(&root).join("res/layout/main.xml"), &layout_xml(elements))?;
            write_file(&dir.join(&root).join("res/values/strings.xml"), &strings_xml(elements))?;
            let line = ReleaseLine { app: &app.app, version: format!("{}.0", r + 1), date: app.dates[r], resources: root };
            releases.push_str(&serde_json::to_string(&line).map_err(|e| Error::json(dir, e))?);
            releases.push('\n');
        }
    }
    write_file(&dir.join("releases.jsonl"), &releases)?;
    let mut reviews = String::new();
    for r in &corpus.reviews {
        reviews.push_str(&serde_json::to_string(r).map_err(|e| Error::json(dir, e))?);
        reviews.push('\n');
    }
    write_file(&dir.join("reviews.jsonl"), &reviews)?;
    let config = dir.join("pipeline.conf");
    write_file(&config, "reviews = reviews.jsonl\nreleases = releases.jsonl\nout = out\n")?;
    Ok(config)
}

/// Element ids present per (app, ordinal), straight from the generator.
pub fn presence(corpus: &SyntheticCorpus) -> BTreeMap<(String, usize), BTreeSet<String>> {
    corpus
        .apps
        .iter()
        .flat_map(|a| {
            a.layouts
                .iter()
                .enumerate()
                .map(move |(r, els)| ((a.app.clone(), r), els.iter().map(|e| e.id.clone()).collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_elements_vanish_next_release() {
        let c = generate(&SyntheticSpec { apps: 3, ..Default::default() }).unwrap();
        for app in &c.apps {
            for w in app.layouts.windows(2) {
                let next: BTreeSet<&str> = w[1].iter().map(|e| e.id.as_str()).collect();
                for e in &w[0] {
                    assert_eq!(next.contains(e.id.as_str()), !e.bad, "{}", e.id);
                }
            }
        }
        assert_eq!(c.reviews.len(), 3 * 4 * (6 * 8 + 2));
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SyntheticSpec { apps: 2, ..Default::default() };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(generate(&spec).unwrap(), generate(&SyntheticSpec { seed: 1, ..spec }).unwrap());
    }
}
