//! Repair trust prediction: input-only features and a random forest.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RepairInstance;
use crate::similarity::tfidf_cosine;
use crate::taxonomy::{parse_mini, MiniAst, NodeKind};
use crate::tokenize::{flat_words, Tokenizer};

pub const FEATURE_NAMES: [&str; 7] = [
    "max_tfidf_sim",
    "avg_tfidf_sim",
    "common_ast_hunk",
    "common_ast_node",
    "changed_files",
    "changed_lines",
    "test_loc",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrustFeatures {
    pub max_tfidf_sim: f64,
    pub avg_tfidf_sim: f64,
    /// Hunks sharing at least one syntax-node label with the breakage.
    pub common_ast_hunk: usize,
    /// Shared syntax-node labels summed over hunks.
    pub common_ast_node: usize,
    pub changed_files: usize,
    pub changed_lines: usize,
    pub test_loc: usize,
}

impl TrustFeatures {
    pub fn to_row(&self) -> Vec<f64> {
        vec![
            self.max_tfidf_sim,
            self.avg_tfidf_sim,
            self.common_ast_hunk as f64,
            self.common_ast_node as f64,
            self.changed_files as f64,
            self.changed_lines as f64,
            self.test_loc as f64,
        ]
    }
}

/// Multiset of non-empty node labels, ignoring operators and kinds.
pub fn label_multiset(t: &MiniAst) -> HashMap<String, usize> {
    let mut m = HashMap::new();
    t.walk(&mut |n| {
        if !n.label.is_empty() && !matches!(n.kind, NodeKind::Operator | NodeKind::Block | NodeKind::Opaque) {
            *m.entry(n.label.clone()).or_default() += 1;
        }
    });
    m
}

fn common_count(a: &HashMap<String, usize>, b: &HashMap<String, usize>) -> usize {
    a.iter().map(|(k, &v)| v.min(b.get(k).copied().unwrap_or(0))).sum()
}

pub fn extract_features(tok: &dyn Tokenizer, inst: &RepairInstance) -> TrustFeatures {
    let breakage = inst.breakage_lines();
    let hunks = &inst.sut_hunks;
    let docs: Vec<Vec<String>> = hunks.iter().map(|h| flat_words(tok, &h.deleted_lines)).collect();
    let sims = tfidf_cosine(&docs, &flat_words(tok, &breakage));
    let brk_labels = label_multiset(&parse_mini(&breakage));
    let common: Vec<usize> = hunks
        .iter()
        .map(|h| if h.deleted_lines.is_empty() { 0 } else { common_count(&brk_labels, &label_multiset(&parse_mini(&h.deleted_lines))) })
        .collect();
    let files: BTreeSet<&str> = hunks.iter().map(|h| h.file.as_str()).collect();
    TrustFeatures {
        max_tfidf_sim: sims.iter().copied().fold(0.0, f64::max),
        avg_tfidf_sim: if sims.is_empty() { 0.0 } else { sims.iter().sum::<f64>() / sims.len() as f64 },
        common_ast_hunk: common.iter().filter(|&&c| c > 0).count(),
        common_ast_node: common.iter().sum(),
        changed_files: files.len(),
        changed_lines: hunks.iter().map(|h| h.deleted_lines.len() + h.added_lines.len()).sum(),
        test_loc: inst.broken_test.source.len(),
    }
}

// ---------------------------------------------------------------------------
// Random forest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: None, min_leaf: 1, mtry: None, bootstrap: true, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => k = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub version: u32,
    pub tokenizer: String,
    pub feature_names: Vec<String>,
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
    pub oob_accuracy: Option<f64>,
}

impl ForestModel {
    /// Mean of the trees' leaf probabilities.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, row: &[f64]) -> bool {
        self.predict_proba(row) >= 0.5
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: ForestModel = serde_json::from_str(&text)?;
        if m.version != MODEL_VERSION {
            return Err(Error::Contract(format!("unsupported model version {}", m.version)));
        }
        Ok(m)
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    let q = (n - pos) as f64 / n as f64;
    1.0 - p * p - q * q
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [bool],
    cfg: &'a ForestConfig,
    mtry: usize,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], feature: usize) -> Option<(f64, f64)> {
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
        let n = sorted.len();
        let total_pos = sorted.iter().filter(|&&i| self.labels[i]).count();
        let mut left_pos = 0;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            left_pos += self.labels[sorted[k]] as usize;
            let (v, next) = (self.rows[sorted[k]][feature], self.rows[sorted[k + 1]][feature]);
            let nl = k + 1;
            if v == next || nl < self.cfg.min_leaf || n - nl < self.cfg.min_leaf {
                continue;
            }
            let nr = n - nl;
            let imp = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(total_pos - left_pos, nr)) / n as f64;
            if best.is_none_or(|(b, _)| imp < b) {
                best = Some((imp, v + (next - v) / 2.0));
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = idx.iter().filter(|&&i| self.labels[i]).count();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: pos as f64 / idx.len() as f64 });
        let d = self.rows[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(rng);
        if pos == 0 || pos == idx.len() || self.cfg.max_depth.is_some_and(|m| depth >= m) || idx.len() < 2 * self.cfg.min_leaf {
            return id;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some((imp, thr)) = self.best_split(&idx, f) {
                if best.is_none_or(|(b, bf, _)| imp < b || imp == b && f < bf) {
                    best = Some((imp, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = TreeNode::Split { feature, threshold, left, right };
        id
    }
}

fn check_training_set(rows: &[Vec<f64>], labels: &[bool]) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Contract(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    let Some(first) = rows.first() else {
        return Err(Error::Contract("empty training set".into()));
    };
    if first.is_empty() || rows.iter().any(|r| r.len() != first.len()) {
        return Err(Error::Contract("rows must share a non-zero width".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Contract("non-finite feature value".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::Contract("training labels contain a single class".into()));
    }
    Ok(())
}

/// Trains one tree per seed; returns the tree and its in-bag mask.
fn train_tree(rows: &[Vec<f64>], labels: &[bool], cfg: &ForestConfig, mtry: usize, seed: u64) -> (DecisionTree, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows.len();
    let idx: Vec<usize> = if cfg.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let mut in_bag = vec![false; n];
    for &i in &idx {
        in_bag[i] = true;
    }
    let mut b = Builder { rows, labels, cfg, mtry, nodes: Vec::new() };
    b.grow(idx, 0, &mut rng);
    (DecisionTree { nodes: b.nodes }, in_bag)
}

pub fn train_forest(rows: &[Vec<f64>], labels: &[bool], config: &ForestConfig) -> Result<ForestModel> {
    check_training_set(rows, labels)?;
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(Error::Contract("n_trees and min_leaf must be positive".into()));
    }
    let d = rows[0].len();
    let mtry = config.mtry.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).clamp(1, d);
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = (0..config.n_trees).map(|_| master.random()).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len());
    let chunk = seeds.len().div_ceil(workers);
    let results: Vec<(DecisionTree, Vec<bool>)> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&sd| train_tree(rows, labels, config, mtry, sd)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("tree worker panicked")).collect()
    });
    let oob_accuracy = config.bootstrap.then(|| {
        let (mut hit, mut seen) = (0usize, 0usize);
        for (i, row) in rows.iter().enumerate() {
            let votes: Vec<f64> = results.iter().filter(|(_, bag)| !bag[i]).map(|(t, _)| t.predict(row)).collect();
            if !votes.is_empty() {
                seen += 1;
                hit += ((votes.iter().sum::<f64>() / votes.len() as f64 >= 0.5) == labels[i]) as usize;
            }
        }
        if seen == 0 { f64::NAN } else { hit as f64 / seen as f64 }
    });
    Ok(ForestModel {
        version: MODEL_VERSION,
        tokenizer: String::new(),
        feature_names: if d == FEATURE_NAMES.len() {
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
        } else {
            (0..d).map(|k| format!("f{k}")).collect()
        },
        config: config.clone(),
        trees: results.into_iter().map(|(t, _)| t).collect(),
        oob_accuracy: oob_accuracy.filter(|v| v.is_finite()),
    })
}

/// Duplicates randomly chosen minority rows until both classes are equal.
pub fn oversample(rows: &[Vec<f64>], labels: &[bool], seed: u64) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    if rows.len() != labels.len() {
        return Err(Error::Contract("rows and labels differ in length".into()));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Contract("oversampling needs both classes".into()));
    }
    let (minority, gap) = if pos.len() < neg.len() { (&pos, neg.len() - pos.len()) } else { (&neg, pos.len() - neg.len()) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut r, mut l) = (rows.to_vec(), labels.to_vec());
    for _ in 0..gap {
        let k = minority[rng.random_range(0..minority.len())];
        r.push(rows[k].clone());
        l.push(labels[k]);
    }
    Ok((r, l))
}

/// Fold index per row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || labels.len() < k {
        return Err(Error::Stratification(format!("{} rows cannot form {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = j % k;
    }
    for f in 0..k {
        for class in [true, false] {
            if !(0..labels.len()).any(|i| fold[i] == f && labels[i] == class) {
                return Err(Error::Stratification(format!("fold {f} has no {class} rows")));
            }
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn class_scores(truth: &[bool], pred: &[bool], class: bool) -> ClassScores {
    let tp = truth.iter().zip(pred).filter(|(&t, &p)| t == class && p == class).count() as f64;
    let predicted = pred.iter().filter(|&&p| p == class).count() as f64;
    let actual = truth.iter().filter(|&&t| t == class).count() as f64;
    let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    ClassScores { precision: 100.0 * precision, recall: 100.0 * recall, f1: 100.0 * f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub positive: ClassScores,
    pub negative: ClassScores,
    pub folds: Vec<usize>,
}

/// Stratified k-fold cross-validation; oversampling is applied to each
/// training fold only.
pub fn cross_validate(rows: &[Vec<f64>], labels: &[bool], k: usize, config: &ForestConfig) -> Result<CvReport> {
    check_training_set(rows, labels)?;
    let folds = stratified_folds(labels, k, config.seed)?;
    let mut pos = Vec::with_capacity(k);
    let mut neg = Vec::with_capacity(k);
    for f in 0..k {
        let (mut tr, mut tl, mut vr, mut vl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..rows.len() {
            if folds[i] == f {
                vr.push(rows[i].clone());
                vl.push(labels[i]);
            } else {
                tr.push(rows[i].clone());
                tl.push(labels[i]);
            }
        }
        let (tr, tl) = oversample(&tr, &tl, config.seed.wrapping_add(f as u64))?;
        let cfg = ForestConfig { seed: config.seed.wrapping_add(1000 + f as u64), ..config.clone() };
        let model = train_forest(&tr, &tl, &cfg)?;
        let pred: Vec<bool> = vr.iter().map(|r| model.predict(r)).collect();
        pos.push(class_scores(&vl, &pred, true));
        neg.push(class_scores(&vl, &pred, false));
    }
    let mean = |v: &[ClassScores]| {
        let n = v.len() as f64;
        ClassScores {
            precision: v.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: v.iter().map(|s| s.recall).sum::<f64>() / n,
            f1: v.iter().map(|s| s.f1).sum::<f64>() / n,
        }
    };
    Ok(CvReport { k, positive: mean(&pos), negative: mean(&neg), folds })
}

fn accuracy(model: &ForestModel, rows: &[Vec<f64>], labels: &[bool]) -> f64 {
    rows.iter().zip(labels).filter(|(r, &l)| model.predict(r) == l).count() as f64 / rows.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: usize,
    pub name: String,
    pub importance: f64,
}

pub const IMPORTANCE_REPEATS: usize = 10;

/// Mean accuracy drop when one feature column is shuffled, highest first.
pub fn permutation_importance(model: &ForestModel, rows: &[Vec<f64>], labels: &[bool], seed: u64) -> Vec<Importance> {
    let base = accuracy(model, rows, labels);
    let d = rows.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Importance> = (0..d)
        .map(|f| {
            let mut drop = 0.0;
            for _ in 0..IMPORTANCE_REPEATS {
                let mut col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
                col.shuffle(&mut rng);
                let shuffled: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(&col)
                    .map(|(r, &v)| {
                        let mut r = r.clone();
                        r[f] = v;
                        r
                    })
                    .collect();
                drop += base - accuracy(model, &shuffled, labels);
            }
            let name = model.feature_names.get(f).cloned().unwrap_or_else(|| format!("f{f}"));
            Importance { feature: f, name, importance: drop / IMPORTANCE_REPEATS as f64 }
        })
        .collect();
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.feature.cmp(&b.feature)));
    out
}
