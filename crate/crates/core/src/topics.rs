//! Hierarchical Dirichlet Process topic model (collapsed Gibbs sampling in
//! the Chinese restaurant franchise) and per-element review clustering.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linker::Link;
use crate::seeds::fnv1a;
use crate::textprep::TokenList;
use crate::uiminer::ElementKey;

/// Default minimum group size for topic modelling; smaller groups form a
/// single cluster.
pub const MIN_GROUP: usize = 3;
pub const TOP_WORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdpConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub eta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for HdpConfig {
    fn default() -> Self {
        HdpConfig { gamma: 1.0, alpha: 1.0, eta: 0.5, iterations: 500, burn_in: 300, seed: 0 }
    }
}

impl HdpConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("alpha", self.alpha), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("hdp {name} must be > 0, got {v}")));
            }
        }
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "hdp iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub vocabulary: Vec<String>,
    /// `phi[k][w]`: probability of vocabulary word `w` under topic `k`.
    pub phi: Vec<Vec<f64>>,
    /// `theta[d][k]`: probability of topic `k` in document `d`.
    pub theta: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.phi.len()
    }

    /// Argmax topic of a document; ties go to the lowest topic id.
    pub fn assignment(&self, doc: usize) -> usize {
        argmax(&self.theta[doc])
    }

    pub fn top_words(&self, topic: usize, n: usize) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.vocabulary.len()).collect();
        let phi = &self.phi[topic];
        idx.sort_by(|&a, &b| phi[b].total_cmp(&phi[a]).then(self.vocabulary[a].cmp(&self.vocabulary[b])));
        idx.into_iter().take(n).map(|w| self.vocabulary[w].clone()).collect()
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Default)]
struct Dish {
    tables: usize,
    words: usize,
    word_counts: HashMap<usize, usize>,
}

#[derive(Debug, Clone, Copy)]
struct Table {
    dish: usize,
    customers: usize,
}

struct Sampler<'a> {
    docs: &'a [Vec<usize>],
    v: f64,
    cfg: HdpConfig,
    dishes: Vec<Option<Dish>>,
    total_tables: usize,
    tables: Vec<Vec<Option<Table>>>,
    seat: Vec<Vec<usize>>,
    rng: ChaCha8Rng,
}

fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

fn sample_log(rng: &mut ChaCha8Rng, logw: &[f64]) -> usize {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    sample_index(rng, &w)
}

impl<'a> Sampler<'a> {
    fn new(docs: &'a [Vec<usize>], v: usize, cfg: HdpConfig) -> Self {
        Sampler {
            docs,
            v: v as f64,
            cfg,
            dishes: Vec::new(),
            total_tables: 0,
            tables: vec![Vec::new(); docs.len()],
            seat: docs.iter().map(|d| vec![usize::MAX; d.len()]).collect(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    fn f(&self, k: usize, w: usize) -> f64 {
        let d = self.dishes[k].as_ref().expect("live dish");
        let nkw = d.word_counts.get(&w).copied().unwrap_or(0) as f64;
        (nkw + self.cfg.eta) / (d.words as f64 + self.v * self.cfg.eta)
    }

    fn live(&self) -> Vec<usize> {
        (0..self.dishes.len()).filter(|&k| self.dishes[k].is_some()).collect()
    }

    fn new_dish(&mut self) -> usize {
        match self.dishes.iter().position(Option::is_none) {
            Some(k) => {
                self.dishes[k] = Some(Dish::default());
                k
            }
            None => {
                self.dishes.push(Some(Dish::default()));
                self.dishes.len() - 1
            }
        }
    }

    fn dish_mut(&mut self, k: usize) -> &mut Dish {
        self.dishes[k].as_mut().expect("live dish")
    }

    fn add_word(&mut self, k: usize, w: usize, n: usize) {
        let d = self.dish_mut(k);
        d.words += n;
        *d.word_counts.entry(w).or_default() += n;
    }

    fn remove_word(&mut self, k: usize, w: usize, n: usize) {
        let d = self.dish_mut(k);
        d.words -= n;
        let c = d.word_counts.get_mut(&w).expect("word on dish");
        *c -= n;
        if *c == 0 {
            d.word_counts.remove(&w);
        }
    }

    fn drop_table(&mut self, j: usize, t: usize) {
        let k = self.tables[j][t].take().expect("live table").dish;
        self.total_tables -= 1;
        let d = self.dish_mut(k);
        d.tables -= 1;
        if d.tables == 0 {
            debug_assert_eq!(d.words, 0);
            self.dishes[k] = None;
        }
    }

    fn open_table(&mut self, j: usize, k: usize) -> usize {
        self.dish_mut(k).tables += 1;
        self.total_tables += 1;
        let table = Some(Table { dish: k, customers: 0 });
        match self.tables[j].iter().position(Option::is_none) {
            Some(t) => {
                self.tables[j][t] = table;
                t
            }
            None => {
                self.tables[j].push(table);
                self.tables[j].len() - 1
            }
        }
    }

    fn unseat(&mut self, j: usize, i: usize) {
        let t = self.seat[j][i];
        let w = self.docs[j][i];
        let table = self.tables[j][t].as_mut().expect("live table");
        table.customers -= 1;
        let (k, empty) = (table.dish, table.customers == 0);
        self.remove_word(k, w, 1);
        if empty {
            self.drop_table(j, t);
        }
        self.seat[j][i] = usize::MAX;
    }

    fn seat_word(&mut self, j: usize, i: usize) {
        let w = self.docs[j][i];
        let live = self.live();
        let fk: Vec<f64> = live.iter().map(|&k| self.f(k, w)).collect();
        let f_new = 1.0 / self.v;
        let mk: Vec<f64> = live.iter().map(|&k| self.dishes[k].as_ref().unwrap().tables as f64).collect();
        let m = self.total_tables as f64;

        let open: Vec<usize> = (0..self.tables[j].len()).filter(|&t| self.tables[j][t].is_some()).collect();
        let mut weights: Vec<f64> = open
            .iter()
            .map(|&t| {
                let tb = self.tables[j][t].unwrap();
                let pos = live.binary_search(&tb.dish).expect("dish live");
                tb.customers as f64 * fk[pos]
            })
            .collect();
        let mixed: f64 = mk.iter().zip(&fk).map(|(m, f)| m * f).sum::<f64>() + self.cfg.gamma * f_new;
        weights.push(self.cfg.alpha * mixed / (m + self.cfg.gamma));
        let choice = sample_index(&mut self.rng, &weights);

        let t = if choice < open.len() {
            open[choice]
        } else {
            let mut dw: Vec<f64> = mk.iter().zip(&fk).map(|(m, f)| m * f).collect();
            dw.push(self.cfg.gamma * f_new);
            let c = sample_index(&mut self.rng, &dw);
            let k = if c < live.len() { live[c] } else { self.new_dish() };
            self.open_table(j, k)
        };
        let table = self.tables[j][t].as_mut().unwrap();
        table.customers += 1;
        let k = table.dish;
        self.add_word(k, w, 1);
        self.seat[j][i] = t;
    }

    fn resample_dish(&mut self, j: usize, t: usize) {
        let old = self.tables[j][t].unwrap().dish;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &s) in self.seat[j].iter().enumerate() {
            if s == t {
                *counts.entry(self.docs[j][i]).or_default() += 1;
            }
        }
        let n_t: usize = counts.values().sum();
        for (&w, &c) in &counts {
            self.remove_word(old, w, c);
        }
        {
            let d = self.dish_mut(old);
            d.tables -= 1;
            if d.tables == 0 {
                self.dishes[old] = None;
            }
        }
        self.total_tables -= 1;

        let eta = self.cfg.eta;
        let veta = self.v * eta;
        let log_lik = |words: usize, get: &dyn Fn(usize) -> f64| -> f64 {
            let mut s = 0.0;
            for (&w, &c) in &counts {
                let base = get(w) + eta;
                for r in 0..c {
                    s += (base + r as f64).ln();
                }
            }
            for r in 0..n_t {
                s -= (words as f64 + veta + r as f64).ln();
            }
            s
        };
        let live = self.live();
        let mut logw: Vec<f64> = live
            .iter()
            .map(|&k| {
                let d = self.dishes[k].as_ref().unwrap();
                let get = |w: usize| d.word_counts.get(&w).copied().unwrap_or(0) as f64;
                (d.tables as f64).ln() + log_lik(d.words, &get)
            })
            .collect();
        logw.push(self.cfg.gamma.ln() + log_lik(0, &|_| 0.0));
        let c = sample_log(&mut self.rng, &logw);
        let k = if c < live.len() { live[c] } else { self.new_dish() };

        self.dish_mut(k).tables += 1;
        self.total_tables += 1;
        for (&w, &c) in &counts {
            self.add_word(k, w, c);
        }
        self.tables[j][t].as_mut().unwrap().dish = k;
    }

    fn sweep(&mut self) {
        for j in 0..self.docs.len() {
            for i in 0..self.docs[j].len() {
                self.unseat(j, i);
                self.seat_word(j, i);
            }
        }
        for j in 0..self.docs.len() {
            for t in 0..self.tables[j].len() {
                if self.tables[j][t].is_some() {
                    self.resample_dish(j, t);
                }
            }
        }
    }

    fn run(mut self, vocabulary: Vec<String>) -> TopicModel {
        for j in 0..self.docs.len() {
            for i in 0..self.docs[j].len() {
                self.seat_word(j, i);
            }
        }
        for _ in 0..self.cfg.iterations {
            self.sweep();
        }
        let live = self.live();
        let m = self.total_tables as f64;
        let beta: Vec<f64> = live.iter().map(|&k| self.dishes[k].as_ref().unwrap().tables as f64 / m).collect();
        let v = vocabulary.len();
        let phi: Vec<Vec<f64>> = live.iter().map(|&k| (0..v).map(|w| self.f(k, w)).collect()).collect();
        let theta = (0..self.docs.len())
            .map(|j| {
                let mut n_dk = vec![0.0; live.len()];
                for &t in &self.seat[j] {
                    let k = self.tables[j][t].unwrap().dish;
                    n_dk[live.binary_search(&k).unwrap()] += 1.0;
                }
                let n_d = self.docs[j].len() as f64;
                n_dk.iter()
                    .zip(&beta)
                    .map(|(n, b)| (n + self.cfg.alpha * b) / (n_d + self.cfg.alpha))
                    .collect()
            })
            .collect();
        TopicModel { vocabulary, phi, theta }
    }
}

/// Fits an HDP to `docs`. The model is the state after the final sweep;
/// topics are renumbered densely in order of creation slot.
pub fn fit_hdp<D: AsRef<[String]>>(docs: &[D], config: &HdpConfig) -> Result<TopicModel> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::invalid("topic model needs at least one document"));
    }
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in d.as_ref() {
            index.entry(t.as_str()).or_insert(0);
        }
    }
    if index.is_empty() {
        return Err(Error::invalid("every document is empty"));
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let vocabulary: Vec<String> = index.keys().map(|s| s.to_string()).collect();
    let ids: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.as_ref().iter().map(|t| index[t.as_str()]).collect())
        .collect();
    Ok(Sampler::new(&ids, vocabulary.len(), *config).run(vocabulary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub app: String,
    pub element_key: ElementKey,
    pub release_ordinal: usize,
    pub topic: usize,
    pub members: Vec<String>,
    pub top_words: Vec<String>,
    /// Mean topic distribution of the members, keyed by topic id.
    pub theta: BTreeMap<String, f64>,
}

impl Cluster {
    /// Report label: the top three words.
    pub fn label(&self) -> String {
        self.top_words.iter().take(3).cloned().collect::<Vec<_>>().join(" ")
    }
}

/// One review's topic distribution within one element group (`theta.jsonl`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub app: String,
    pub element_key: ElementKey,
    pub release_ordinal: usize,
    pub review: String,
    pub theta: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    pub theta: Vec<ThetaRecord>,
}

type GroupKey = (String, ElementKey, usize);

pub fn group_seed(seed: u64, app: &str, key: &ElementKey, ordinal: usize) -> u64 {
    seed ^ fnv1a(&[app, &key.to_string(), &ordinal.to_string()])
}

fn frequent_words(docs: &[&[String]], n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for t in d.iter() {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut v: Vec<(&str, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(n).map(|(w, _)| w.to_string()).collect()
}

fn theta_map(row: &[f64]) -> BTreeMap<String, f64> {
    row.iter().enumerate().map(|(k, p)| (k.to_string(), *p)).collect()
}

fn cluster_group(
    (app, key, ordinal): &GroupKey,
    members: &[String],
    tokens: &BTreeMap<&str, &[String]>,
    config: &HdpConfig,
    min_group: usize,
) -> Result<Clustering> {
    let docs: Vec<&[String]> = members.iter().map(|m| tokens[m.as_str()]).collect();
    let single = |reason: Option<String>| {
        if let Some(r) = reason {
            log::warn!("{app} {key} release {ordinal}: {r}; using a single cluster");
        }
        let theta = BTreeMap::from([("0".to_string(), 1.0)]);
        Clustering {
            clusters: vec![Cluster {
                app: app.clone(),
                element_key: key.clone(),
                release_ordinal: *ordinal,
                topic: 0,
                members: members.to_vec(),
                top_words: frequent_words(&docs, TOP_WORDS),
                theta: theta.clone(),
            }],
            theta: members
                .iter()
                .map(|m| ThetaRecord {
                    app: app.clone(),
                    element_key: key.clone(),
                    release_ordinal: *ordinal,
                    review: m.clone(),
                    theta: theta.clone(),
                })
                .collect(),
        }
    };
    if members.len() < min_group.max(1) {
        return Ok(single(None));
    }
    let cfg = HdpConfig { seed: group_seed(config.seed, app, key, *ordinal), ..*config };
    let model = match fit_hdp(&docs, &cfg) {
        Ok(m) => m,
        Err(Error::Invalid(msg)) => return Ok(single(Some(msg))),
        Err(e) => return Err(e),
    };
    let mut by_topic: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for d in 0..members.len() {
        by_topic.entry(model.assignment(d)).or_default().push(d);
    }
    let clusters = by_topic
        .into_iter()
        .map(|(topic, ds)| {
            let mut mean = vec![0.0; model.k()];
            for &d in &ds {
                for (m, p) in mean.iter_mut().zip(&model.theta[d]) {
                    *m += p / ds.len() as f64;
                }
            }
            Cluster {
                app: app.clone(),
                element_key: key.clone(),
                release_ordinal: *ordinal,
                topic,
                members: ds.iter().map(|&d| members[d].clone()).collect(),
                top_words: model.top_words(topic, TOP_WORDS),
                theta: theta_map(&mean),
            }
        })
        .collect();
    let theta = members
        .iter()
        .enumerate()
        .map(|(d, m)| ThetaRecord {
            app: app.clone(),
            element_key: key.clone(),
            release_ordinal: *ordinal,
            review: m.clone(),
            theta: theta_map(&model.theta[d]),
        })
        .collect();
    Ok(Clustering { clusters, theta })
}

/// Clusters the reviews linked to each (app, element, release) by topic.
/// Groups run in parallel, each with its own seed derived from
/// `config.seed` and the group identity; output order is by group, then
/// topic.
pub fn cluster_element_reviews(
    links: &[Link],
    reviews: &[TokenList],
    config: &HdpConfig,
    min_group: usize,
) -> Result<Clustering> {
    config.validate()?;
    let tokens: BTreeMap<&str, &[String]> =
        reviews.iter().map(|r| (r.review_id.as_str(), r.tokens.as_slice())).collect();
    let mut groups: BTreeMap<GroupKey, Vec<String>> = BTreeMap::new();
    for l in links {
        if !tokens.contains_key(l.review_id.as_str()) {
            return Err(Error::invalid(format!("link references unknown review {}", l.review_id)));
        }
        groups
            .entry((l.app.clone(), l.element_key.clone(), l.release_ordinal))
            .or_default()
            .push(l.review_id.clone());
    }
    for members in groups.values_mut() {
        members.sort();
        members.dedup();
    }
    let parts: Vec<Clustering> = groups
        .par_iter()
        .map(|(g, members)| cluster_group(g, members, &tokens, config, min_group))
        .collect::<Result<_>>()?;
    let mut out = Clustering::default();
    for mut p in parts {
        out.clusters.append(&mut p.clusters);
        out.theta.append(&mut p.theta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick(seed: u64) -> HdpConfig {
        HdpConfig { iterations: 150, burn_in: 50, seed, ..HdpConfig::default() }
    }

    /// `n` docs per vocabulary, each of `len` words drawn from that vocabulary.
    pub(crate) fn planted(vocabs: &[&[&str]], n: usize, len: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for (c, vocab) in vocabs.iter().enumerate() {
            for _ in 0..n {
                docs.push((0..len).map(|_| vocab[rng.random_range(0..vocab.len())].to_string()).collect());
                labels.push(c);
            }
        }
        (docs, labels)
    }

    pub(crate) fn purity(assign: &[usize], labels: &[usize]) -> f64 {
        let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
        for (a, l) in assign.iter().zip(labels) {
            *table.entry(*a).or_default().entry(*l).or_default() += 1;
        }
        let hit: usize = table.values().map(|m| m.values().max().unwrap()).sum();
        hit as f64 / labels.len() as f64
    }

    #[test]
    fn config_validation() {
        assert!(HdpConfig::default().validate().is_ok());
        assert!(HdpConfig { alpha: 0.0, ..HdpConfig::default() }.validate().is_err());
        assert!(HdpConfig { iterations: 10, burn_in: 10, ..HdpConfig::default() }.validate().is_err());
    }

    #[test]
    fn rejects_empty_corpora() {
        assert!(fit_hdp::<Vec<String>>(&[], &quick(1)).is_err());
        assert!(fit_hdp(&[Vec::<String>::new()], &quick(1)).is_err());
    }

    #[test]
    fn distributions_are_normalised() {
        let (docs, _) = planted(&[&["a", "b", "c"], &["x", "y", "z"]], 10, 8, 3);
        let m = fit_hdp(&docs, &quick(7)).unwrap();
        assert!(m.k() >= 1);
        for row in &m.theta {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        for row in &m.phi {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_document_gives_one_cluster() {
        let doc: Vec<String> = ["save", "page", "save", "page", "offline"].iter().map(|s| s.to_string()).collect();
        let m = fit_hdp(&[doc], &quick(2)).unwrap();
        assert!(m.k() >= 1);
        assert_abs_diff_eq!(m.theta[0].iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        let w: Vec<String> = vec!["save".into(); 4];
        let reviews = [tl("r1", &w), tl("r2", &w), tl("r3", &w)];
        let links = [link("r1", "e"), link("r2", "e"), link("r3", "e")];
        let out = cluster_element_reviews(&links, &reviews, &quick(2), MIN_GROUP).unwrap();
        assert!(!out.clusters.is_empty());
    }

    #[test]
    fn same_seed_same_model() {
        let (docs, _) = planted(&[&["a", "b"], &["c", "d"]], 8, 6, 1);
        assert_eq!(fit_hdp(&docs, &quick(9)).unwrap(), fit_hdp(&docs, &quick(9)).unwrap());
    }

    #[test]
    fn recovers_three_planted_vocabularies() {
        let vocabs: [&[&str]; 3] = [
            &["battery", "drain", "charge", "power", "hot"],
            &["login", "password", "account", "email", "sign"],
            &["video", "play", "stream", "buffer", "sound"],
        ];
        let (docs, labels) = planted(&vocabs, 20, 10, 11);
        let m = fit_hdp(&docs, &HdpConfig { seed: 4, ..HdpConfig::default() }).unwrap();
        let assign: Vec<usize> = (0..docs.len()).map(|d| m.assignment(d)).collect();
        assert!(m.k() >= 3, "K = {}", m.k());
        let p = purity(&assign, &labels);
        assert!(p >= 0.8, "purity {p}");
    }

    fn link(review: &str, key: &str) -> Link {
        Link { review_id: review.into(), app: "a".into(), element_key: key.parse().unwrap(), release_ordinal: 0, sim: 1.0 }
    }

    fn tl(id: &str, words: &[String]) -> TokenList {
        TokenList { review_id: id.into(), tokens: words.to_vec() }
    }

    #[test]
    fn small_group_is_one_cluster() {
        let w = vec!["save".to_string()];
        let reviews = [tl("r1", &w), tl("r2", &w)];
        let out = cluster_element_reviews(&[link("r1", "e"), link("r2", "e")], &reviews, &quick(0), MIN_GROUP).unwrap();
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].members, ["r1", "r2"]);
        assert_eq!(out.clusters[0].topic, 0);
    }

    #[test]
    fn planted_partition_on_one_element() {
        let (docs, labels) = planted(
            &[&["offline", "airplane", "mode", "network", "wifi"], &["bookmark", "list", "folder", "sync", "sort"]],
            30,
            8,
            5,
        );
        let reviews: Vec<TokenList> = docs.iter().enumerate().map(|(i, d)| tl(&format!("r{i:02}"), d)).collect();
        let links: Vec<Link> = reviews.iter().map(|r| link(&r.review_id, "saved")).collect();
        let cfg = HdpConfig { seed: 3, ..HdpConfig::default() };
        let out = cluster_element_reviews(&links, &reviews, &cfg, MIN_GROUP).unwrap();
        assert_eq!(out.clusters.len(), 2, "{:?}", out.clusters.iter().map(|c| c.members.len()).collect::<Vec<_>>());
        let mut assign = vec![0; reviews.len()];
        for (ci, c) in out.clusters.iter().enumerate() {
            for m in &c.members {
                assign[m[1..].parse::<usize>().unwrap()] = ci;
            }
        }
        assert!(purity(&assign, &labels) >= 0.9);
    }

    #[test]
    fn clusters_partition_each_element_and_repeat_across_elements() {
        let (docs, _) = planted(&[&["a", "b", "c"], &["d", "e", "f"]], 5, 6, 2);
        let reviews: Vec<TokenList> = docs.iter().enumerate().map(|(i, d)| tl(&format!("r{i}"), d)).collect();
        let mut links: Vec<Link> = reviews.iter().map(|r| link(&r.review_id, "e1")).collect();
        links.extend(reviews.iter().take(4).map(|r| link(&r.review_id, "e2")));
        let out = cluster_element_reviews(&links, &reviews, &quick(1), MIN_GROUP).unwrap();
        for key in ["e1", "e2"] {
            let mut members: Vec<String> = out
                .clusters
                .iter()
                .filter(|c| c.element_key.to_string() == key)
                .flat_map(|c| c.members.clone())
                .collect();
            members.sort();
            let mut want: Vec<String> =
                links.iter().filter(|l| l.element_key.to_string() == key).map(|l| l.review_id.clone()).collect();
            want.sort();
            assert_eq!(members, want);
        }
        let by_review: BTreeMap<(String, String), &ThetaRecord> =
            out.theta.iter().map(|t| ((t.element_key.to_string(), t.review.clone()), t)).collect();
        for c in &out.clusters {
            for m in &c.members {
                let row = &by_review[&(c.element_key.to_string(), m.clone())].theta;
                let vals: Vec<f64> = (0..row.len()).map(|k| row[&k.to_string()]).collect();
                assert_eq!(argmax(&vals), c.topic);
            }
        }
    }

    #[test]
    fn unknown_review_is_rejected() {
        assert!(cluster_element_reviews(&[link("ghost", "e")], &[], &quick(0), MIN_GROUP).is_err());
    }
}
