//! Binary classification trees grown greedily on Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values
//! present in a node. Features are rank-encoded once per fit so that the
//! per-node split search sorts small integer keys; forests share one
//! [`SplitData`] across all their trees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, labels_to_bits};
use crate::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::ingest::LoanOutcome;

/// Features with at most this many distinct values are scanned with a
/// histogram instead of a sort.
const HISTOGRAM_LIMIT: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until another stopping rule fires.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(10),
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Training rows reaching the node, counting bootstrap duplicates.
    pub n: usize,
    pub n_denied: usize,
    pub gini: f64,
    pub depth: usize,
    pub split: Option<Split>,
}

impl Node {
    pub fn value(&self) -> f64 {
        self.n_denied as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root first.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = if x[s.feature] <= s.threshold {
                &self.nodes[s.left]
            } else {
                &self.nodes[s.right]
            };
        }
        node
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.leaf_for(x).value()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

pub fn gini(n: usize, n_denied: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = n_denied as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Rank-encoded training matrix.
pub(crate) struct SplitData {
    n_cols: usize,
    /// `ranks[f][row]` indexes into `values[f]`.
    ranks: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
    denied: Vec<bool>,
}

impl SplitData {
    pub(crate) fn new(x: &FeatureMatrix, labels: &[LoanOutcome]) -> Self {
        let n = x.n_rows();
        let mut ranks = Vec::with_capacity(x.n_cols());
        let mut values = Vec::with_capacity(x.n_cols());
        for f in 0..x.n_cols() {
            let col: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
            let mut distinct = col.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            let r = col
                .iter()
                .map(|v| distinct.partition_point(|d| d < v) as u32)
                .collect();
            ranks.push(r);
            values.push(distinct);
        }
        SplitData {
            n_cols: x.n_cols(),
            ranks,
            values,
            denied: labels_to_bits(labels),
        }
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.denied.len()
    }

    pub(crate) fn n_cols(&self) -> usize {
        self.n_cols
    }
}

/// Best split found for one node.
struct Candidate {
    feature: usize,
    /// Rows with rank <= cut go left.
    cut: u32,
    threshold: f64,
    decrease: f64,
}

#[derive(Default)]
struct Scratch {
    keys: Vec<u64>,
    count: Vec<u32>,
    pos: Vec<u32>,
}

/// Sum of squared class counts over node size: `n * (1 - gini)`.
fn purity(n: f64, pos: f64) -> f64 {
    (pos * pos + (n - pos) * (n - pos)) / n
}

impl SplitData {
    fn midpoint(&self, f: usize, lo: u32, hi: u32) -> f64 {
        let a = self.values[f][lo as usize];
        let b = self.values[f][hi as usize];
        let mid = a + (b - a) / 2.0;
        if mid >= b {
            a
        } else {
            mid
        }
    }

    /// Scan one feature, updating `best` when a strictly better split turns
    /// up. Thresholds are visited in increasing order.
    #[allow(clippy::too_many_arguments)]
    fn scan_feature(
        &self,
        f: usize,
        idx: &[usize],
        n_pos: usize,
        min_leaf: usize,
        parent: f64,
        best: &mut Option<Candidate>,
        scratch: &mut Scratch,
    ) {
        let m = idx.len();
        let ranks = &self.ranks[f];
        let n_values = self.values[f].len();
        if n_values < 2 {
            return;
        }
        let eps = 1e-12 * m as f64;
        let mut consider = |left_n: usize, left_pos: usize, lo: u32, hi: u32| {
            if left_n < min_leaf || m - left_n < min_leaf {
                return;
            }
            let (ln, lp) = (left_n as f64, left_pos as f64);
            let (rn, rp) = ((m - left_n) as f64, (n_pos - left_pos) as f64);
            let decrease = purity(ln, lp) + purity(rn, rp) - parent;
            let better = match best {
                None => decrease > eps,
                Some(b) => decrease > b.decrease + eps,
            };
            if better {
                *best = Some(Candidate {
                    feature: f,
                    cut: lo,
                    threshold: self.midpoint(f, lo, hi),
                    decrease,
                });
            }
        };

        if n_values <= HISTOGRAM_LIMIT {
            scratch.count.clear();
            scratch.count.resize(n_values, 0);
            scratch.pos.clear();
            scratch.pos.resize(n_values, 0);
            for &i in idx {
                let r = ranks[i] as usize;
                scratch.count[r] += 1;
                scratch.pos[r] += u32::from(self.denied[i]);
            }
            let (mut left_n, mut left_pos) = (0usize, 0usize);
            let mut prev: Option<u32> = None;
            for r in 0..n_values {
                let c = scratch.count[r] as usize;
                if c == 0 {
                    continue;
                }
                if let Some(p) = prev {
                    consider(left_n, left_pos, p, r as u32);
                }
                left_n += c;
                left_pos += scratch.pos[r] as usize;
                prev = Some(r as u32);
            }
        } else {
            scratch.keys.clear();
            scratch.keys.extend(
                idx.iter()
                    .map(|&i| (u64::from(ranks[i]) << 1) | u64::from(self.denied[i])),
            );
            scratch.keys.sort_unstable();
            let (mut left_n, mut left_pos) = (0usize, 0usize);
            let keys = &scratch.keys;
            let mut j = 0;
            while j < m {
                let r = (keys[j] >> 1) as u32;
                let mut k = j;
                let mut pos = 0;
                while k < m && (keys[k] >> 1) as u32 == r {
                    pos += (keys[k] & 1) as usize;
                    k += 1;
                }
                if j > 0 {
                    let prev = (keys[j - 1] >> 1) as u32;
                    consider(left_n, left_pos, prev, r);
                }
                left_n += k - j;
                left_pos += pos;
                j = k;
            }
        }
    }

    /// Grow one tree over `rows` (duplicates allowed). When `sampler` is set,
    /// each node considers `mtry` features drawn from it.
    pub(crate) fn grow<R: Rng>(
        &self,
        rows: Vec<usize>,
        params: &TreeParams,
        mut sampler: Option<(&mut R, usize)>,
    ) -> Tree {
        let mut nodes: Vec<Node> = Vec::new();
        let mut scratch = Scratch::default();
        // (node index, rows)
        let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();

        let make_node = |rows: &[usize], depth: usize| {
            let n_denied = rows.iter().filter(|&&i| self.denied[i]).count();
            Node {
                n: rows.len(),
                n_denied,
                gini: gini(rows.len(), n_denied),
                depth,
                split: None,
            }
        };
        nodes.push(make_node(&rows, 0));
        stack.push((0, rows));
        let all_features: Vec<usize> = (0..self.n_cols).collect();
        let mut subset: Vec<usize>;

        while let Some((id, idx)) = stack.pop() {
            let (m, n_pos, depth) = (nodes[id].n, nodes[id].n_denied, nodes[id].depth);
            let stop = params.max_depth.is_some_and(|d| depth >= d)
                || m < 2 * params.min_leaf.max(1)
                || n_pos == 0
                || n_pos == m;
            if stop {
                continue;
            }
            let features: &[usize] = match sampler.as_mut() {
                Some((rng, mtry)) if *mtry < self.n_cols => {
                    subset = rand::seq::index::sample(*rng, self.n_cols, *mtry).into_vec();
                    subset.sort_unstable();
                    &subset
                }
                _ => &all_features,
            };
            let parent = purity(m as f64, n_pos as f64);
            let mut best = None;
            for &f in features {
                self.scan_feature(
                    f,
                    &idx,
                    n_pos,
                    params.min_leaf.max(1),
                    parent,
                    &mut best,
                    &mut scratch,
                );
            }
            let Some(best) = best else { continue };

            let ranks = &self.ranks[best.feature];
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&i| ranks[i] <= best.cut);
            let l = nodes.len();
            nodes.push(make_node(&left, depth + 1));
            nodes.push(make_node(&right, depth + 1));
            nodes[id].split = Some(Split {
                feature: best.feature,
                threshold: best.threshold,
                left: l,
                right: l + 1,
            });
            stack.push((l + 1, right));
            stack.push((l, left));
        }
        Tree { nodes }
    }
}

pub fn fit(x: &FeatureMatrix, labels: &[LoanOutcome], p: &TreeParams) -> Result<Tree> {
    check_training(x, labels)?;
    if x.n_rows() < p.min_leaf {
        return Err(Error::InvalidParameter(format!(
            "{} rows is fewer than min_leaf {}",
            x.n_rows(),
            p.min_leaf
        )));
    }
    let data = SplitData::new(x, labels);
    Ok(data.grow::<rand_chacha::ChaCha8Rng>((0..x.n_rows()).collect(), p, None))
}
