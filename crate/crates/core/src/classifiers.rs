//! k-nearest neighbours, CART decision trees, and random forests.
//!
//! All three predict string labels. Tie-breaking is deterministic
//! everywhere, and every random choice comes from a stream derived from the
//! caller's seed, so a fitted model is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, StreamRng};
use crate::spectrum::Normalizer;

pub trait Classifier {
    fn predict(&self, features: &[f64]) -> Result<String>;

    fn predict_all<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<String>>
    where
        Self: Sized,
    {
        rows.iter().map(|r| self.predict(r.as_ref())).collect()
    }
}

fn check_training<R: AsRef<[f64]>>(features: &[R], labels: &[String]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    let d = features[0].as_ref().len();
    if let Some(r) = features.iter().find(|r| r.as_ref().len() != d) {
        return Err(Error::Dimension {
            expected: d,
            actual: r.as_ref().len(),
        });
    }
    if labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
        return Err(Error::Config("labels must be non-empty and free of whitespace".into()));
    }
    Ok(d)
}

fn check_query(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}

/// Default neighbourhood size.
pub const DEFAULT_K: usize = 5;

/// Stores (optionally z-scored) training vectors and votes among the k
/// nearest by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    normalizer: Option<Normalizer>,
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
    k: usize,
}

impl KnnModel {
    pub fn fit<R: AsRef<[f64]>>(features: &[R], labels: &[String], k: usize, normalize: bool) -> Result<Self> {
        check_training(features, labels)?;
        if k.is_multiple_of(2) || k > features.len() {
            return Err(Error::Config(format!(
                "k = {k} must be odd and at most {} (training size)",
                features.len()
            )));
        }
        let normalizer = if normalize && features.len() >= 2 {
            Some(Normalizer::fit(features)?)
        } else {
            None
        };
        let stored = features
            .iter()
            .map(|f| match &normalizer {
                Some(n) => n.apply(f.as_ref()),
                None => Ok(f.as_ref().to_vec()),
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            normalizer,
            features: stored,
            labels: labels.to_vec(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("SHAPR1 knn\n");
        let _ = writeln!(out, "k {}", self.k);
        write_normalizer(&mut out, self.normalizer.as_ref());
        let d = self.features[0].len();
        let _ = writeln!(out, "train {} {d}", self.features.len());
        for (f, l) in self.features.iter().zip(&self.labels) {
            out.push_str(l);
            for v in f {
                out.push(' ');
                out.push_str(&io::fmt17(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text, "knn model");
        r.expect_exact("SHAPR1 knn")?;
        let k = r.keyed_usize("k")?;
        let normalizer = read_normalizer(&mut r)?;
        let (n, d) = r.dims("train")?;
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, line) = r.next("training row")?;
            let mut toks = line.split_whitespace();
            let label = toks
                .next()
                .ok_or_else(|| Error::parse("knn model", ln, "missing label"))?;
            let v: Vec<f64> = toks.map(|t| io::parse_f64(t, "knn model", ln)).collect::<Result<_>>()?;
            if v.len() != d {
                return Err(Error::parse("knn model", ln, format!("expected {d} values")));
            }
            labels.push(label.to_string());
            features.push(v);
        }
        if n == 0 || k % 2 == 0 || k > n {
            return Err(Error::parse("knn model", 2, "k must be odd and at most n"));
        }
        Ok(Self {
            normalizer,
            features,
            labels,
            k,
        })
    }
}

impl Classifier for KnnModel {
    /// Majority among the k nearest; ties go to the smallest summed
    /// distance, then the lexicographically smallest label.
    fn predict(&self, features: &[f64]) -> Result<String> {
        check_query(self.features[0].len(), features.len())?;
        let q = match &self.normalizer {
            Some(n) => n.apply(features)?,
            None => features.to_vec(),
        };
        let mut dists: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let d2: f64 = f.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(d, i) in &dists[..self.k] {
            let e = votes.entry(self.labels[i].as_str()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        // BTreeMap iterates labels in order, so the first maximum wins ties.
        let best = votes
            .iter()
            .fold(None::<(&str, usize, f64)>, |acc, (&l, &(c, s))| match acc {
                Some((_, bc, bs)) if c < bc || (c == bc && s >= bs) => acc,
                _ => Some((l, c, s)),
            })
            .expect("k >= 1");
        Ok(best.0.to_string())
    }
}

pub fn knn_predict(model: &KnnModel, fv: &[f64]) -> Result<String> {
    model.predict(fv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` considers all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        class: usize,
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary CART tree grown on Gini impurity. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    classes: Vec<String>,
    n_features: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

const TREE_STREAM: u64 = 0x5452_4545;

fn encode_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, y)
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Most frequent class; ties go to the lowest index (smallest label).
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct Grower<'a, R> {
    x: &'a [R],
    y: &'a [usize],
    n_classes: usize,
    n_features: usize,
    params: TreeParams,
    rng: StreamRng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<R: AsRef<[f64]>> Grower<'_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || depth_capped || idx.len() < self.params.min_samples_split {
            None
        } else {
            self.find_split(idx)
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                class: majority(&counts),
                counts,
            });
            return self.nodes.len() - 1;
        };
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: 0,
            counts: Vec::new(),
        });
        let x = self.x;
        let mid = partition_in_place(idx, |&i| x[i].as_ref()[split.feature] <= split.threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[me] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        me
    }

    fn find_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let d = self.n_features;
        let mtry = self.params.max_features.map_or(d, |m| m.clamp(1, d));
        let mut order: Vec<usize> = if mtry < d {
            // sampled features first, the rest only if none of those can split
            let mut chosen = index::sample(&mut self.rng, d, mtry).into_vec();
            chosen.sort_unstable();
            let mut rest: Vec<usize> = {
                let mut mark = vec![false; d];
                chosen.iter().for_each(|&f| mark[f] = true);
                (0..d).filter(|&f| !mark[f]).collect()
            };
            rest.shuffle(&mut self.rng);
            chosen.extend(rest);
            chosen
        } else {
            (0..d).collect()
        };
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
        for (pos, f) in order.drain(..).enumerate() {
            if pos >= mtry && best.is_some() {
                break;
            }
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x[i].as_ref()[f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let n = pairs.len();
            let mut left = vec![0usize; self.n_classes];
            let mut right = vec![0usize; self.n_classes];
            for &(_, c) in &pairs {
                right[c] += 1;
            }
            for i in 0..n - 1 {
                let c = pairs[i].1;
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (pairs[i].0, pairs[i + 1].0);
                if a >= b {
                    continue;
                }
                let t = a + (b - a) / 2.0;
                if !(a < t && t < b) {
                    continue;
                }
                let nl = i + 1;
                let imp = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
                if best.as_ref().is_none_or(|s| imp < s.impurity - 1e-12) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: t,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }
}

/// Stable partition; returns the number of elements satisfying `pred`.
fn partition_in_place(idx: &mut [usize], pred: impl Fn(&usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| pred(i));
    let k = yes.len();
    yes.extend(no);
    idx.copy_from_slice(&yes);
    k
}

fn grow_tree<R: AsRef<[f64]>>(
    x: &[R],
    y: &[usize],
    classes: &[String],
    sample: &mut [usize],
    params: TreeParams,
    rng: StreamRng,
) -> DecisionTree {
    let n_features = x[0].as_ref().len();
    let mut g = Grower {
        x,
        y,
        n_classes: classes.len(),
        n_features,
        params,
        rng,
        nodes: Vec::new(),
    };
    g.grow(sample, 0);
    DecisionTree {
        classes: classes.to_vec(),
        n_features,
        params,
        nodes: g.nodes,
    }
}

impl DecisionTree {
    pub fn fit<R: AsRef<[f64]>>(features: &[R], labels: &[String], params: TreeParams, seed: u64) -> Result<Self> {
        check_training(features, labels)?;
        if params.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        let (classes, y) = encode_labels(labels);
        let mut sample: Vec<usize> = (0..features.len()).collect();
        Ok(grow_tree(
            features,
            &y,
            &classes,
            &mut sample,
            params,
            rng::substream(seed, TREE_STREAM, 0),
        ))
    }

    /// Depth of the deepest leaf (a single leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// (feature, threshold) of every internal node, in storage order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    fn leaf_class(&self, features: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if features[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    fn write_body(&self, out: &mut String) {
        let _ = writeln!(out, "classes {} {}", self.classes.len(), self.classes.join(" "));
        let _ = writeln!(
            out,
            "params {} {} {}",
            opt(self.params.max_depth),
            self.params.min_samples_split,
            opt(self.params.max_features)
        );
        let _ = writeln!(out, "features {}", self.n_features);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for n in &self.nodes {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(out, "split {feature} {} {left} {right}", io::fmt17(*threshold));
                }
                Node::Leaf { class, counts } => {
                    let c: Vec<String> = counts.iter().map(usize::to_string).collect();
                    let _ = writeln!(out, "leaf {class} {}", c.join(" "));
                }
            }
        }
    }

    fn read_body(r: &mut LineReader<'_>) -> Result<Self> {
        let ctx = r.context;
        let (ln, line) = r.next("classes")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let classes: Vec<String> = match toks.as_slice() {
            ["classes", n, rest @ ..] if io::parse_usize(n, ctx, ln)? == rest.len() && !rest.is_empty() => {
                rest.iter().map(|s| s.to_string()).collect()
            }
            _ => return Err(Error::parse(ctx, ln, "expected `classes <n> <labels...>`")),
        };
        let (ln, line) = r.next("params")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let params = match toks.as_slice() {
            ["params", depth, mss, mf] => TreeParams {
                max_depth: parse_opt(depth, ctx, ln)?,
                min_samples_split: io::parse_usize(mss, ctx, ln)?,
                max_features: parse_opt(mf, ctx, ln)?,
            },
            _ => {
                return Err(Error::parse(
                    ctx,
                    ln,
                    "expected `params <depth> <min_split> <max_features>`",
                ))
            }
        };
        let n_features = r.keyed_usize("features")?;
        let count = r.keyed_usize("nodes")?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = r.next("node")?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let node = match toks.as_slice() {
                ["split", f, t, l, rt] => {
                    let feature = io::parse_usize(f, ctx, ln)?;
                    let left = io::parse_usize(l, ctx, ln)?;
                    let right = io::parse_usize(rt, ctx, ln)?;
                    if feature >= n_features
                        || left >= count
                        || right >= count
                        || left <= nodes.len()
                        || right <= nodes.len()
                    {
                        return Err(Error::parse(ctx, ln, "split references an invalid feature or node"));
                    }
                    Node::Split {
                        feature,
                        threshold: io::parse_f64(t, ctx, ln)?,
                        left,
                        right,
                    }
                }
                ["leaf", c, counts @ ..] => {
                    let class = io::parse_usize(c, ctx, ln)?;
                    let counts = counts
                        .iter()
                        .map(|t| io::parse_usize(t, ctx, ln))
                        .collect::<Result<Vec<_>>>()?;
                    if class >= classes.len() || counts.len() != classes.len() {
                        return Err(Error::parse(ctx, ln, "leaf class out of range"));
                    }
                    Node::Leaf { class, counts }
                }
                _ => return Err(Error::parse(ctx, ln, "expected `split ...` or `leaf ...`")),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(Error::parse(ctx, 0, "tree has no nodes"));
        }
        Ok(Self {
            classes,
            n_features,
            params,
            nodes,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("SHAPR1 tree\n");
        self.write_body(&mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text, "tree model");
        r.expect_exact("SHAPR1 tree")?;
        Self::read_body(&mut r)
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, features: &[f64]) -> Result<String> {
        check_query(self.n_features, features.len())?;
        Ok(self.classes[self.leaf_class(features)].clone())
    }
}

pub fn tree_fit<R: AsRef<[f64]>>(
    features: &[R],
    labels: &[String],
    params: TreeParams,
    seed: u64,
) -> Result<DecisionTree> {
    DecisionTree::fit(features, labels, params, seed)
}

pub fn tree_predict(tree: &DecisionTree, fv: &[f64]) -> Result<String> {
    tree.predict(fv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// `None` uses ⌈√d⌉.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

/// Bagged ensemble of [`DecisionTree`]s voting by majority.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    classes: Vec<String>,
    params: ForestParams,
    seed: u64,
}

impl RandomForest {
    pub fn fit<R: AsRef<[f64]> + Sync>(
        features: &[R],
        labels: &[String],
        params: ForestParams,
        seed: u64,
    ) -> Result<Self> {
        let d = check_training(features, labels)?;
        if params.trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if params.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        let (classes, y) = encode_labels(labels);
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            max_features: Some(params.max_features.unwrap_or((d as f64).sqrt().ceil() as usize)),
        };
        let n = features.len();
        let build = |t: usize| {
            let mut rng = rng::substream(seed, TREE_STREAM, t as u64);
            let mut sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(features, &y, &classes, &mut sample, tree_params, rng)
        };
        #[cfg(feature = "parallel")]
        let trees = {
            use rayon::prelude::*;
            (0..params.trees).into_par_iter().map(build).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trees = (0..params.trees).map(build).collect();
        Ok(Self {
            trees,
            classes,
            params,
            seed,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Same forest with trees in a different order.
    pub fn with_tree_order(&self, order: &[usize]) -> Result<Self> {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.trees.len()).collect::<Vec<_>>() {
            return Err(Error::Config("tree order must be a permutation".into()));
        }
        Ok(Self {
            trees: order.iter().map(|&i| self.trees[i].clone()).collect(),
            ..self.clone()
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("SHAPR1 forest\n");
        let _ = writeln!(
            out,
            "forest {} {} {} {} {} {}",
            self.trees.len(),
            opt(self.params.max_depth),
            self.params.min_samples_split,
            opt(self.params.max_features),
            self.params.bootstrap,
            self.seed
        );
        for t in &self.trees {
            out.push_str("tree\n");
            t.write_body(&mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const CTX: &str = "forest model";
        let mut r = LineReader::new(text, CTX);
        r.expect_exact("SHAPR1 forest")?;
        let (ln, line) = r.next("forest header")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (count, params, seed) = match toks.as_slice() {
            ["forest", n, depth, mss, mf, boot, seed] => (
                io::parse_usize(n, CTX, ln)?,
                ForestParams {
                    trees: io::parse_usize(n, CTX, ln)?,
                    max_depth: parse_opt(depth, CTX, ln)?,
                    min_samples_split: io::parse_usize(mss, CTX, ln)?,
                    max_features: parse_opt(mf, CTX, ln)?,
                    bootstrap: boot
                        .parse::<bool>()
                        .map_err(|_| Error::parse(CTX, ln, "bootstrap must be true|false"))?,
                },
                seed.parse::<u64>().map_err(|_| Error::parse(CTX, ln, "bad seed"))?,
            ),
            _ => return Err(Error::parse(CTX, ln, "expected forest header")),
        };
        let mut trees = Vec::with_capacity(count);
        for _ in 0..count {
            r.expect_exact("tree")?;
            trees.push(DecisionTree::read_body(&mut r)?);
        }
        let classes = trees
            .first()
            .map(|t| t.classes.clone())
            .ok_or_else(|| Error::parse(CTX, ln, "forest has no trees"))?;
        if trees.iter().any(|t| t.classes != classes) {
            return Err(Error::parse(CTX, ln, "trees disagree on the class list"));
        }
        Ok(Self {
            trees,
            classes,
            params,
            seed,
        })
    }
}

impl Classifier for RandomForest {
    /// Majority vote; ties go to the lexicographically smallest label.
    fn predict(&self, features: &[f64]) -> Result<String> {
        check_query(self.trees[0].n_features, features.len())?;
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.leaf_class(features)] += 1;
        }
        Ok(self.classes[majority(&votes)].clone())
    }
}

pub fn forest_fit<R: AsRef<[f64]> + Sync>(
    features: &[R],
    labels: &[String],
    params: ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    RandomForest::fit(features, labels, params, seed)
}

pub fn forest_predict(forest: &RandomForest, fv: &[f64]) -> Result<String> {
    forest.predict(fv)
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn parse_opt(tok: &str, ctx: &str, ln: usize) -> Result<Option<usize>> {
    if tok == "none" {
        Ok(None)
    } else {
        io::parse_usize(tok, ctx, ln).map(Some)
    }
}

pub(crate) fn write_normalizer(out: &mut String, n: Option<&Normalizer>) {
    match n {
        Some(n) => {
            let _ = writeln!(out, "normalizer {}", n.dim());
            let fmt = |v: &[f64]| v.iter().map(|x| io::fmt17(*x)).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "{}", fmt(n.mean()));
            let _ = writeln!(out, "{}", fmt(n.std()));
        }
        None => out.push_str("normalizer none\n"),
    }
}

fn read_normalizer(r: &mut LineReader<'_>) -> Result<Option<Normalizer>> {
    let ctx = r.context;
    let (ln, line) = r.next("normalizer")?;
    if line.trim() == "normalizer none" {
        return Ok(None);
    }
    let d = line
        .trim()
        .strip_prefix("normalizer ")
        .map(|t| io::parse_usize(t, ctx, ln))
        .ok_or_else(|| Error::parse(ctx, ln, "expected `normalizer <d>|none`"))??;
    let mut row = |what| -> Result<Vec<f64>> {
        let (ln, line) = r.next(what)?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| io::parse_f64(t, ctx, ln))
            .collect::<Result<_>>()?;
        if v.len() != d {
            return Err(Error::parse(ctx, ln, format!("expected {d} values")));
        }
        Ok(v)
    };
    let mean = row("normalizer mean")?;
    let std = row("normalizer std")?;
    Normalizer::from_parts(mean, std).map(Some)
}

/// Line cursor over a model file with 1-based line numbers.
struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    context: &'static str,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str, context: &'static str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            context,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.context, 0, format!("unexpected end of file, expected {what}")))
    }

    fn expect_exact(&mut self, want: &str) -> Result<()> {
        let (ln, line) = self.next(want)?;
        if line.trim() != want {
            return Err(Error::parse(self.context, ln, format!("expected `{want}`")));
        }
        Ok(())
    }

    fn keyed_usize(&mut self, key: &str) -> Result<usize> {
        let (ln, line) = self.next(key)?;
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            [k, v] if *k == key => io::parse_usize(v, self.context, ln),
            _ => Err(Error::parse(self.context, ln, format!("expected `{key} <n>`"))),
        }
    }

    fn dims(&mut self, key: &str) -> Result<(usize, usize)> {
        let (ln, line) = self.next(key)?;
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            [k, a, b] if *k == key => Ok((
                io::parse_usize(a, self.context, ln)?,
                io::parse_usize(b, self.context, ln)?,
            )),
            _ => Err(Error::parse(
                self.context,
                ln,
                format!("expected `{key} <rows> <cols>`"),
            )),
        }
    }
}
