//! Random forest of Gini-split decision trees over sparse rows.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::textprep::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    /// Train each tree on a bootstrap resample rather than the full set.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_bootstrap() -> bool {
    true
}

impl ForestParams {
    pub fn new(trees: usize, max_depth: Option<usize>) -> Self {
        Self {
            trees,
            max_depth,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        positive: bool,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    /// Distinct training rows drawn into this tree.
    in_bag: Vec<usize>,
}

impl DecisionTree {
    pub fn predict(&self, x: &SparseVector) -> bool {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive } => return positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x.get(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn in_bag(&self) -> &[usize] {
        &self.in_bag
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Fraction of trees voting positive.
    pub fn vote_fraction(&self, x: &SparseVector) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

/// Column-major copy of the training rows.
struct Columns {
    cols: Vec<Vec<(u32, f64)>>,
}

impl Columns {
    fn new(x: &[SparseVector], dim: usize) -> Self {
        let mut cols = vec![Vec::new(); dim];
        for (i, row) in x.iter().enumerate() {
            for &(j, v) in row.entries() {
                cols[j].push((i as u32, v));
            }
        }
        Self { cols }
    }
}

/// Scratch buffers shared by all nodes of one tree.
struct Workspace {
    /// Node tag per sample; a sample belongs to the node being split iff its tag matches.
    tag: Vec<u32>,
    current_tag: u32,
    seen_feature: Vec<u32>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Trains `params.trees` trees. Tree `t` draws from its own ChaCha stream
/// `t` of `seed`, so results do not depend on evaluation order.
pub fn fit_forest(x: &[SparseVector], y: &[Label], params: &ForestParams, seed: u64) -> RandomForest {
    let dim = x.first().map_or(0, SparseVector::dimension);
    let columns = Columns::new(x, dim);
    let mtry = ((dim as f64).sqrt() as usize).max(1);
    let trees = (0..params.trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            fit_tree(x, y, &columns, params, mtry, &mut rng)
        })
        .collect();
    RandomForest { trees }
}

fn fit_tree(
    x: &[SparseVector],
    y: &[Label],
    columns: &Columns,
    params: &ForestParams,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let n = x.len();
    let dim = columns.cols.len();
    let mut weight = vec![0u32; n];
    if params.bootstrap {
        for _ in 0..n {
            weight[rng.gen_range(0..n)] += 1;
        }
    } else {
        weight.fill(1);
    }
    let root: Vec<usize> = (0..n).filter(|&i| weight[i] > 0).collect();
    let in_bag = root.clone();

    let mut ws = Workspace {
        tag: vec![0; n],
        current_tag: 0,
        seen_feature: vec![0; dim],
    };
    let mut nodes = vec![Node::Leaf { positive: false }];
    let mut stack = vec![(0usize, root, 0usize)];

    while let Some((slot, samples, depth)) = stack.pop() {
        let total: u64 = samples.iter().map(|&i| weight[i] as u64).sum();
        let pos: u64 = samples
            .iter()
            .filter(|&&i| y[i].is_security())
            .map(|&i| weight[i] as u64)
            .sum();
        let leaf = Node::Leaf {
            positive: 2 * pos > total,
        };
        let pure = pos == 0 || pos == total;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || total < 2 {
            nodes[slot] = leaf;
            continue;
        }

        let Some(best) = find_split(x, y, &weight, columns, &samples, (total, pos), mtry, &mut ws, rng)
        else {
            nodes[slot] = leaf;
            continue;
        };

        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in &samples {
            if x[i].get(best.feature) <= best.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let (l, r) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf { positive: false });
        nodes.push(Node::Leaf { positive: false });
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        stack.push((r, right, depth + 1));
        stack.push((l, left, depth + 1));
    }
    DecisionTree { nodes, in_bag }
}

/// Best Gini split among `mtry` randomly drawn features. When none of those
/// admits a valid split, the remaining features that are non-zero somewhere
/// in the node are tried in random order until one does.
#[allow(clippy::too_many_arguments)]
fn find_split(
    x: &[SparseVector],
    y: &[Label],
    weight: &[u32],
    columns: &Columns,
    samples: &[usize],
    (total, pos): (u64, u64),
    mtry: usize,
    ws: &mut Workspace,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let dim = columns.cols.len();
    ws.current_tag += 1;
    let tag = ws.current_tag;
    for &i in samples {
        ws.tag[i] = tag;
    }

    let mut best: Option<Candidate> = None;
    let drawn = index::sample(rng, dim, mtry.min(dim));
    for f in drawn.iter() {
        ws.seen_feature[f] = tag;
        consider(f, y, weight, columns, (total, pos), ws, &mut best);
    }
    if best.is_some() {
        return best;
    }

    let mut remaining: Vec<usize> = Vec::new();
    for &i in samples {
        for &(f, _) in x[i].entries() {
            if ws.seen_feature[f] != tag {
                ws.seen_feature[f] = tag;
                remaining.push(f);
            }
        }
    }
    remaining.sort_unstable();
    remaining.shuffle(rng);
    for f in remaining {
        consider(f, y, weight, columns, (total, pos), ws, &mut best);
        if best.is_some() {
            break;
        }
    }
    best
}

fn gini_weighted(w: f64, p: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let q = p / w;
    w * 2.0 * q * (1.0 - q)
}

fn consider(
    feature: usize,
    y: &[Label],
    weight: &[u32],
    columns: &Columns,
    (total, pos): (u64, u64),
    ws: &mut Workspace,
    best: &mut Option<Candidate>,
) {
    let tag = ws.current_tag;
    // (value, weight, positive weight) for non-zero entries inside the node.
    let mut points: Vec<(f64, u64, u64)> = Vec::new();
    let (mut nz_w, mut nz_p) = (0u64, 0u64);
    for &(i, v) in &columns.cols[feature] {
        let i = i as usize;
        if ws.tag[i] != tag {
            continue;
        }
        let w = weight[i] as u64;
        let p = if y[i].is_security() { w } else { 0 };
        nz_w += w;
        nz_p += p;
        points.push((v, w, p));
    }
    if total > nz_w {
        points.push((0.0, total - nz_w, pos - nz_p));
    }
    if points.len() < 2 {
        return;
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (mut lw, mut lp) = (0u64, 0u64);
    for k in 0..points.len() - 1 {
        lw += points[k].1;
        lp += points[k].2;
        if points[k].0 == points[k + 1].0 {
            continue;
        }
        let impurity = gini_weighted(lw as f64, lp as f64)
            + gini_weighted((total - lw) as f64, (pos - lp) as f64);
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            *best = Some(Candidate {
                feature,
                threshold: points[k].0 + (points[k + 1].0 - points[k].0) / 2.0,
                impurity,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(dim: usize, i: usize) -> SparseVector {
        SparseVector::new(dim, vec![(i, 1.0)]).unwrap()
    }

    #[test]
    fn single_full_sample_tree_memorizes_distinct_points() {
        let x: Vec<_> = (0..4).map(|i| one_hot(4, i)).collect();
        let y = [Label::Security, Label::NonSecurity, Label::NonSecurity, Label::Security];
        let params = ForestParams {
            trees: 1,
            max_depth: None,
            bootstrap: false,
        };
        for seed in 0..20 {
            let f = fit_forest(&x, &y, &params, seed);
            for (xi, yi) in x.iter().zip(&y) {
                assert_eq!(f.trees()[0].predict(xi), yi.is_security());
            }
        }
    }

    #[test]
    fn bootstrap_tree_memorizes_its_in_bag_points() {
        let x: Vec<_> = (0..4).map(|i| one_hot(4, i)).collect();
        let y = [Label::Security, Label::NonSecurity, Label::NonSecurity, Label::Security];
        for seed in 0..20 {
            let f = fit_forest(&x, &y, &ForestParams::new(1, None), seed);
            let tree = &f.trees()[0];
            for &i in tree.in_bag() {
                assert_eq!(tree.predict(&x[i]), y[i].is_security());
            }
        }
    }

    #[test]
    fn depth_cap_is_respected() {
        let x: Vec<_> = (0..16).map(|i| one_hot(16, i)).collect();
        let y: Vec<_> = (0..16).map(|i| Label::from_bool(i % 2 == 0)).collect();
        let f = fit_forest(&x, &y, &ForestParams::new(5, Some(2)), 3);
        assert!(f.trees().iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn deterministic_per_seed() {
        let x: Vec<_> = (0..12)
            .map(|i| SparseVector::new(3, vec![(i % 3, 0.1 * i as f64)]).unwrap())
            .collect();
        let y: Vec<_> = (0..12).map(|i| Label::from_bool(i > 6)).collect();
        let params = ForestParams::new(7, None);
        assert_eq!(fit_forest(&x, &y, &params, 5), fit_forest(&x, &y, &params, 5));
    }
}
