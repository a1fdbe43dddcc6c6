//! Element deletions between consecutive releases, and the deletion labels
//! they induce on review clusters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::topics::Cluster;
use crate::uiminer::{ElementKey, UIElement};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeletionRecord {
    #[serde(rename = "app")]
    pub app_id: String,
    #[serde(rename = "element_key")]
    pub element: ElementKey,
    #[serde(skip)]
    pub last_present_ordinal: usize,
    #[serde(rename = "deleted_in")]
    pub deleted_in_ordinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeletionLabel {
    Deleted,
    NotDeleted,
}

impl DeletionLabel {
    pub fn is_deleted(self) -> bool {
        self == DeletionLabel::Deleted
    }
}

/// Keys present in `prev` but not in `next`.
pub fn diff_releases(prev: &BTreeSet<ElementKey>, next: &BTreeSet<ElementKey>) -> BTreeSet<ElementKey> {
    prev.difference(next).cloned().collect()
}

/// Element-key sets of one app indexed by release ordinal.
pub fn key_sets(elements: &[UIElement], n_releases: usize) -> Vec<BTreeSet<ElementKey>> {
    let mut sets = vec![BTreeSet::new(); n_releases];
    for e in elements {
        if let Some(s) = sets.get_mut(e.release_ordinal) {
            s.insert(e.key());
        }
    }
    sets
}

/// Every deletion between consecutive releases of one app. An element that
/// disappears, returns and disappears again yields two records.
pub fn app_deletions(app_id: &str, releases: &[BTreeSet<ElementKey>]) -> Vec<DeletionRecord> {
    releases
        .windows(2)
        .enumerate()
        .flat_map(|(i, pair)| {
            diff_releases(&pair[0], &pair[1]).into_iter().map(move |element| DeletionRecord {
                app_id: app_id.to_string(),
                element,
                last_present_ordinal: i,
                deleted_in_ordinal: i + 1,
            })
        })
        .collect()
}

/// Labels each cluster `deleted` iff its element vanished in the release
/// after the cluster's own. `known` holds each (app, ordinal)'s element keys;
/// clusters on keys absent from it are labeled `not_deleted` with a warning.
pub fn label_clusters(
    deletions: &[DeletionRecord],
    clusters: &[Cluster],
    known: &BTreeMap<(String, usize), BTreeSet<ElementKey>>,
) -> Vec<DeletionLabel> {
    let index: BTreeSet<(&str, &ElementKey, usize)> = deletions
        .iter()
        .map(|d| (d.app_id.as_str(), &d.element, d.deleted_in_ordinal))
        .collect();
    clusters
        .iter()
        .map(|c| {
            let present = known
                .get(&(c.app.clone(), c.release_ordinal))
                .is_some_and(|s| s.contains(&c.element_key));
            if !present {
                log::warn!(
                    "cluster on unknown element {} ({} release {}); labeled not_deleted",
                    c.element_key,
                    c.app,
                    c.release_ordinal
                );
                return DeletionLabel::NotDeleted;
            }
            if index.contains(&(c.app.as_str(), &c.element_key, c.release_ordinal + 1)) {
                DeletionLabel::Deleted
            } else {
                DeletionLabel::NotDeleted
            }
        })
        .collect()
}
