//! Graph domain types and the matrix utilities every other module builds on.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric, hollow, dense edge-weight matrix of an undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    w: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl AdjacencyMatrix {
    /// Validates symmetry, hollowness and finiteness.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        check_square(&w)?;
        let n = w.nrows();
        for j in 0..n {
            for i in 0..n {
                let v = w[(i, j)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                if i == j && v != 0.0 {
                    return Err(Error::NonHollow { i, value: v });
                }
                if i < j {
                    let u = w[(j, i)];
                    if (v - u).abs() > SYMMETRY_TOL * v.abs().max(u.abs()).max(1.0) {
                        return Err(Error::NotSymmetric { i, j, a: v, b: u });
                    }
                }
            }
        }
        let mut w = w;
        // Remove sub-tolerance asymmetry so downstream code can rely on exact symmetry.
        for j in 0..n {
            for i in (j + 1)..n {
                w[(i, j)] = w[(j, i)];
            }
        }
        Ok(Self { w, labels: None })
    }

    /// Like [`AdjacencyMatrix::new`], but zeroes a nonzero diagonal with a warning.
    pub fn new_zeroing_diagonal(mut w: DMatrix<f64>) -> Result<Self> {
        check_square(&w)?;
        let mut touched = false;
        for i in 0..w.nrows() {
            if w[(i, i)] != 0.0 {
                touched = true;
                w[(i, i)] = 0.0;
            }
        }
        if touched {
            warn!("adjacency matrix had self-loops; diagonal set to zero");
        }
        Self::new(w)
    }

    /// Rebuilds a matrix from its row-major strict upper triangle.
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: upper.len(),
            });
        }
        let mut w = DMatrix::zeros(n, n);
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = *it.next().expect("length checked");
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        Ok(Self { w, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_binary(&self) -> bool {
        self.w.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Sets every positive weight to one and everything else to zero.
    pub fn binarized(&self) -> Self {
        Self {
            w: self.w.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
            labels: self.labels.clone(),
        }
    }

    /// Simultaneous row/column reordering: vertex `k` of the result is
    /// vertex `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n())?;
        let n = self.n();
        let w = DMatrix::from_fn(n, n, |i, j| self.w[(order[i], order[j])]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| order.iter().map(|&k| l[k].clone()).collect());
        Ok(Self { w, labels })
    }

    /// Row-major sequence of the `n(n-1)/2` strict-upper-triangle entries.
    pub fn vectorize_upper(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.w[(i, j)]);
            }
        }
        out
    }

    pub(crate) fn from_raw_symmetric(w: DMatrix<f64>) -> Self {
        Self { w, labels: None }
    }
}

fn check_square(w: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != w.ncols() {
        return Err(Error::NotSquare {
            rows: w.nrows(),
            cols: w.ncols(),
        });
    }
    Ok(())
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    let mut seen = vec![false; n];
    for &k in order {
        if k >= n || std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidParameter(format!(
                "not a permutation of 0..{n}"
            )));
        }
    }
    Ok(())
}

/// Block label per vertex. Labels are zero-based internally (`0..k`) and
/// one-based in every file the CLI writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidAssignment("k must be positive".into()));
        }
        let mut used = vec![false; k];
        for (v, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::InvalidAssignment(format!(
                    "vertex {v} has label {} > k = {k}",
                    l + 1
                )));
            }
            used[l] = true;
        }
        if let Some(b) = used.iter().position(|u| !u) {
            return Err(Error::InvalidAssignment(format!("block {} is empty", b + 1)));
        }
        Ok(Self { labels, k })
    }

    /// Relabels arbitrary labels onto `0..k`, keeping their relative order.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut distinct: Vec<usize> = raw.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let labels = raw
            .iter()
            .map(|l| distinct.binary_search(l).expect("present"))
            .collect();
        Self {
            labels,
            k: distinct.len().max(1),
        }
    }

    /// Every vertex in one block.
    pub fn single_block(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: 1,
        }
    }

    /// Every vertex in its own block.
    pub fn singletons(n: usize) -> Self {
        Self {
            labels: (0..n).collect(),
            k: n.max(1),
        }
    }

    /// Contiguous blocks whose sizes follow `proportions` (largest-remainder
    /// rounding). Every block gets at least one vertex.
    pub fn from_proportions(n: usize, proportions: &[f64]) -> Result<Self> {
        let k = proportions.len();
        if k == 0 || k > n {
            return Err(Error::InvalidAssignment(format!(
                "cannot split {n} vertices into {k} blocks"
            )));
        }
        if proportions.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidAssignment(
                "block proportions must be positive".into(),
            ));
        }
        let total: f64 = proportions.iter().sum();
        let exact: Vec<f64> = proportions.iter().map(|p| p / total * n as f64).collect();
        let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut remaining = n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let ra = exact[a] - exact[a].floor();
            let rb = exact[b] - exact[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &b in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            sizes[b] += 1;
            remaining -= 1;
        }
        // Steal from the largest block for any block rounded down to zero.
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let largest = (0..k).max_by_key(|&b| (sizes[b], k - b)).expect("k > 0");
            sizes[largest] -= 1;
            sizes[empty] += 1;
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        Self::new(labels, k)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, v: usize) -> usize {
        self.labels[v]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn is_sorted(&self) -> bool {
        self.labels.windows(2).all(|w| w[0] <= w[1])
    }

    /// Stable ordering of vertices by label.
    pub fn sorting_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by_key(|&v| self.labels[v]);
        order
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n())?;
        Ok(Self {
            labels: order.iter().map(|&v| self.labels[v]).collect(),
            k: self.k,
        })
    }
}

/// Kernel-induced distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    /// Wraps an arbitrary symmetric matrix; the diagonal is forced to zero.
    pub fn new(mut d: DMatrix<f64>) -> Result<Self> {
        check_square(&d)?;
        for i in 0..d.nrows() {
            d[(i, i)] = 0.0;
        }
        Ok(Self { d })
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }
}

/// `D = J - (I + X / max X)`: one minus the max-normalized weight off the
/// diagonal, zero on it.
pub fn kernel_to_distance(x: &AdjacencyMatrix) -> Result<DistanceMatrix> {
    let max = x.max_weight();
    if !(max > 0.0) {
        return Err(Error::AllZeroMatrix);
    }
    let mut d = x.weights().map(|w| 1.0 - w / max);
    d.fill_diagonal(0.0);
    Ok(DistanceMatrix { d })
}

/// Reorders vertices so labels are nondecreasing, stable within each block.
pub fn sort_vertices(
    x: &AdjacencyMatrix,
    z: &CommunityAssignment,
) -> Result<(AdjacencyMatrix, CommunityAssignment)> {
    if z.n() != x.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: z.n(),
        });
    }
    let order = z.sorting_order();
    Ok((x.permuted(&order)?, z.permuted(&order)?))
}

/// Averages the two directions of every edge and zeroes the diagonal.
pub fn symmetrize_directed(w: &DMatrix<f64>) -> Result<AdjacencyMatrix> {
    check_square(w)?;
    let n = w.nrows();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (w[(i, j)] + w[(j, i)]) / 2.0;
            if !v.is_finite() {
                return Err(Error::NonFinite { i, j });
            }
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(AdjacencyMatrix::from_raw_symmetric(out))
}

/// Free-function alias of [`AdjacencyMatrix::vectorize_upper`].
pub fn vectorize_upper(x: &AdjacencyMatrix) -> Vec<f64> {
    x.vectorize_upper()
}
