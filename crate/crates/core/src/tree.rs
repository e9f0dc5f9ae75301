//! Depth-limited regression trees grown on weighted, binned rows.
//!
//! A node's score is `(Σ w·g)² / (Σ w·h + ε)`; a split's gain is the children's
//! score sum minus the parent's. Leaves carry `−Σ w·g / (Σ w·h + ε)`: the tree is
//! fit to negative gradients, so the stored value is already the step to add.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BinColumn, BinnedDataset};
use crate::error::{Error, Result};
use crate::loss::GradHess;
use crate::sampling::SampleSelection;
use crate::scalar::Scalar;

pub const DEFAULT_EPS_REG: f64 = 1e-3;
pub const DEFAULT_MIN_GAIN: f64 = 1e-12;

/// Below this many `rows × features` a histogram is built on the calling thread.
const PARALLEL_HISTOGRAM_WORK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams<T> {
    pub max_depth: usize,
    pub min_leaf_count: usize,
    pub min_gain: T,
    /// Added to every hessian sum.
    pub eps_reg: T,
}

impl<T: Scalar> Default for TreeParams<T> {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_leaf_count: 1,
            min_gain: T::lit(DEFAULT_MIN_GAIN),
            eps_reg: T::lit(DEFAULT_EPS_REG),
        }
    }
}

impl<T: Scalar> TreeParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf_count == 0 {
            return Err(Error::InvalidParameter("min_leaf_count must be at least 1".into()));
        }
        if !(self.min_gain > T::zero()) {
            return Err(Error::InvalidParameter("min_gain must be positive".into()));
        }
        if !(self.eps_reg >= T::zero() && self.eps_reg.is_finite()) {
            return Err(Error::InvalidParameter("eps_reg must be a nonnegative real".into()));
        }
        Ok(())
    }
}

/// Weighted derivative sums of a set of rows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LeafStats<T> {
    pub sum_wg: T,
    pub sum_wh: T,
    pub count: usize,
}

impl<T: Scalar> LeafStats<T> {
    pub fn new(sum_wg: T, sum_wh: T, count: usize) -> Self {
        LeafStats {
            sum_wg,
            sum_wh,
            count,
        }
    }

    #[inline]
    pub fn push(&mut self, wg: T, wh: T) {
        self.sum_wg = self.sum_wg + wg;
        self.sum_wh = self.sum_wh + wh;
        self.count += 1;
    }

    #[inline]
    pub fn add(&mut self, other: &Self) {
        self.sum_wg = self.sum_wg + other.sum_wg;
        self.sum_wh = self.sum_wh + other.sum_wh;
        self.count += other.count;
    }

    #[inline]
    pub fn minus(&self, other: &Self) -> Self {
        LeafStats {
            sum_wg: self.sum_wg - other.sum_wg,
            sum_wh: self.sum_wh - other.sum_wh,
            count: self.count - other.count,
        }
    }

    /// Unsigned leaf ratio `Σwg / Σwh`.
    pub fn ratio(&self) -> T {
        self.sum_wg / self.sum_wh
    }
}

#[inline]
pub fn leaf_score<T: Scalar>(stats: &LeafStats<T>, eps_reg: T) -> T {
    stats.sum_wg * stats.sum_wg / (stats.sum_wh + eps_reg)
}

/// Score of a two-way split: the sum of both children's leaf scores.
#[inline]
pub fn split_score<T: Scalar>(left: &LeafStats<T>, right: &LeafStats<T>, eps_reg: T) -> T {
    leaf_score(left, eps_reg) + leaf_score(right, eps_reg)
}

/// Value stored in a terminal node.
#[inline]
pub fn leaf_value<T: Scalar>(stats: &LeafStats<T>, eps_reg: T) -> T {
    -stats.sum_wg / (stats.sum_wh + eps_reg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    /// Rows with `bin ≤ self.bin` go left.
    pub bin: usize,
    pub gain: T,
    pub left: LeafStats<T>,
    pub right: LeafStats<T>,
}

/// Per-feature, per-bin stats of one node, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    offsets: Vec<usize>,
    cells: Vec<LeafStats<T>>,
}

fn accumulate_column<T: Scalar, B: Copy + Into<usize>>(
    out: &mut [LeafStats<T>],
    bins: &[B],
    rows: &[usize],
    samples: &[usize],
    wg: &[T],
    wh: &[T],
) {
    for &k in samples {
        let b: usize = bins[rows[k]].into();
        out[b].push(wg[k], wh[k]);
    }
}

impl<T: Scalar> Histogram<T> {
    /// Accumulates `(Σ w·g, Σ w·h, count)` per bin over `samples`, where sample
    /// `k` is row `rows[k]` with weighted derivatives `wg[k]`, `wh[k]`.
    pub fn build(
        binned: &BinnedDataset<T>,
        rows: &[usize],
        samples: &[usize],
        wg: &[T],
        wh: &[T],
    ) -> Self {
        let mut offsets = Vec::with_capacity(binned.n_features() + 1);
        offsets.push(0);
        for &nb in &binned.n_bins {
            offsets.push(offsets.last().unwrap() + nb);
        }
        let fill = |(f, out): (usize, &mut [LeafStats<T>])| match &binned.columns[f] {
            BinColumn::Narrow(bins) => accumulate_column(out, bins, rows, samples, wg, wh),
            BinColumn::Wide(bins) => accumulate_column(out, bins, rows, samples, wg, wh),
        };

        let mut cells = vec![LeafStats::default(); *offsets.last().unwrap()];
        let mut slices = Vec::with_capacity(binned.n_features());
        let mut rest = cells.as_mut_slice();
        for &nb in &binned.n_bins {
            let (head, tail) = rest.split_at_mut(nb);
            slices.push(head);
            rest = tail;
        }
        if samples.len() * binned.n_features() >= PARALLEL_HISTOGRAM_WORK {
            slices.into_par_iter().enumerate().for_each(fill);
        } else {
            slices.into_iter().enumerate().for_each(fill);
        }
        Histogram { offsets, cells }
    }

    pub fn feature(&self, f: usize) -> &[LeafStats<T>] {
        &self.cells[self.offsets[f]..self.offsets[f + 1]]
    }

    pub fn n_features(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `self − other`, cell by cell (sibling histogram from parent and child).
    pub fn minus(&self, other: &Self) -> Self {
        Histogram {
            offsets: self.offsets.clone(),
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| a.minus(b))
                .collect(),
        }
    }
}

/// Best admissible split of a node given its histogram and total stats.
///
/// Ties go to the lower feature index, then the lower bin.
pub fn best_split<T: Scalar>(
    hist: &Histogram<T>,
    total: &LeafStats<T>,
    params: &TreeParams<T>,
) -> Option<SplitCandidate<T>> {
    let eps = params.eps_reg;
    let parent = leaf_score(total, eps);
    let mut best: Option<SplitCandidate<T>> = None;
    for f in 0..hist.n_features() {
        let bins = hist.feature(f);
        let mut left = LeafStats::default();
        for (b, cell) in bins.iter().enumerate().take(bins.len().saturating_sub(1)) {
            left.add(cell);
            if left.count < params.min_leaf_count {
                continue;
            }
            let right = total.minus(&left);
            if right.count < params.min_leaf_count {
                break;
            }
            let gain = split_score(&left, &right, eps) - parent;
            if gain >= params.min_gain && best.is_none_or(|c| gain > c.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin: b,
                    gain,
                    left,
                    right,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node<T> {
    Split {
        feature: usize,
        bin: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

/// Flat tree; node 0 is the root and children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    fn walk(&self, goes_left: impl Fn(usize, usize) -> bool) -> T {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                } => id = if goes_left(feature, bin) { left } else { right },
            }
        }
    }

    /// Output for a row given as bin indices.
    pub fn predict_bins(&self, row_bins: &[usize]) -> T {
        self.walk(|f, b| row_bins[f] <= b)
    }

    /// Output for row `row` of a binned dataset.
    pub fn predict_binned(&self, binned: &BinnedDataset<T>, row: usize) -> T {
        self.walk(|f, b| binned.bin(f, row) <= b)
    }

    /// Output for a raw feature row, using the training bin edges.
    pub fn predict_raw(&self, row: &[T], bin_edges: &[Vec<T>]) -> T {
        self.walk(|f, b| row[f] <= bin_edges[f][b])
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Checks child links and split bins against the binning they will be used with.
    pub fn validate(&self, n_bins: &[usize]) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                bin,
                left,
                right,
            } = *node
            {
                if feature >= n_bins.len() || bin + 1 >= n_bins[feature] {
                    return bad(format!("node {id}: split (feature {feature}, bin {bin}) out of range"));
                }
                if left <= id || right <= id || left >= self.nodes.len() || right >= self.nodes.len() {
                    return bad(format!("node {id}: invalid child links"));
                }
            }
        }
        Ok(())
    }
}

struct Pending<T> {
    id: usize,
    samples: Vec<usize>,
    stats: LeafStats<T>,
    hist: Option<Histogram<T>>,
}

fn direct_stats<T: Scalar>(samples: &[usize], wg: &[T], wh: &[T]) -> LeafStats<T> {
    let mut s = LeafStats::default();
    samples.iter().for_each(|&k| s.push(wg[k], wh[k]));
    s
}

/// Grows one tree depth-first by level on the selected, weighted rows.
pub fn build_tree<T: Scalar>(
    selection: &SampleSelection<T>,
    binned: &BinnedDataset<T>,
    gh: &GradHess<T>,
    params: &TreeParams<T>,
) -> Tree<T> {
    if selection.is_empty() {
        return Tree::leaf(T::zero());
    }
    let rows = &selection.indices;
    let wg: Vec<T> = rows
        .iter()
        .zip(&selection.weights)
        .map(|(&i, &w)| w * gh.g[i])
        .collect();
    let wh: Vec<T> = rows
        .iter()
        .zip(&selection.weights)
        .map(|(&i, &w)| w * gh.h[i])
        .collect();

    let samples: Vec<usize> = (0..rows.len()).collect();
    let stats = direct_stats(&samples, &wg, &wh);
    let hist = (params.max_depth > 0).then(|| Histogram::build(binned, rows, &samples, &wg, &wh));
    let mut nodes = vec![Node::Leaf { value: T::zero() }];
    let mut level = vec![Pending {
        id: 0,
        samples,
        stats,
        hist,
    }];

    for depth in 0..=params.max_depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for node in level {
            let split = node
                .hist
                .as_ref()
                .and_then(|h| best_split(h, &node.stats, params));
            let Some(split) = split else {
                nodes[node.id] = Node::Leaf {
                    value: leaf_value(&node.stats, params.eps_reg),
                };
                continue;
            };

            let column = &binned.columns[split.feature];
            let (left_s, right_s): (Vec<usize>, Vec<usize>) = node
                .samples
                .iter()
                .partition(|&&k| column.get(rows[k]) <= split.bin);
            let left_id = nodes.len();
            let right_id = left_id + 1;
            nodes.push(Node::Leaf { value: T::zero() });
            nodes.push(Node::Leaf { value: T::zero() });
            nodes[node.id] = Node::Split {
                feature: split.feature,
                bin: split.bin,
                left: left_id,
                right: right_id,
            };

            let (left_h, right_h) = if depth + 1 < params.max_depth {
                let parent = node.hist.as_ref().unwrap();
                if left_s.len() <= right_s.len() {
                    let small = Histogram::build(binned, rows, &left_s, &wg, &wh);
                    let large = parent.minus(&small);
                    (Some(small), Some(large))
                } else {
                    let small = Histogram::build(binned, rows, &right_s, &wg, &wh);
                    let large = parent.minus(&small);
                    (Some(large), Some(small))
                }
            } else {
                (None, None)
            };
            next.push(Pending {
                id: left_id,
                stats: direct_stats(&left_s, &wg, &wh),
                samples: left_s,
                hist: left_h,
            });
            next.push(Pending {
                id: right_id,
                stats: direct_stats(&right_s, &wg, &wh),
                samples: right_s,
                hist: right_h,
            });
        }
        level = next;
        if level.is_empty() {
            break;
        }
    }
    Tree { nodes }
}
