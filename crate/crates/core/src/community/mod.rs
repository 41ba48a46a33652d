//! Joint community estimation from two vertex-matched graphs.
//!
//! Each graph is embedded with its adjacency spectral embedding, the two
//! embeddings are concatenated column-wise, the leading left singular
//! vectors of the concatenation give one joint latent position per vertex,
//! and a Gaussian mixture on those rows yields the block labels.

pub mod gmm;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, CommunityAssignment};

pub use gmm::{gmm_fit, gmm_fit_with, kmeans, GmmModel, GmmOptions};

const EIGEN_EPS: f64 = 1e-13;
const EIGEN_MAX_ITER: usize = 10_000;

/// One latent position per vertex (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    coords: DMatrix<f64>,
}

impl Embedding {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.ncols() == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("embedding has non-finite entries".into()));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }

    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn d(&self) -> usize {
        self.coords.ncols()
    }
}

/// Eigenpairs of a symmetric matrix ordered by decreasing magnitude.
#[derive(Debug, Clone)]
struct Spectrum {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Spectrum {
    fn of(m: &DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
            .ok_or_else(|| Error::EigenFailure("symmetric QR did not converge".into()))?;
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigenFailure("non-finite eigenvalue".into()));
        }
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
            vb.abs().total_cmp(&va.abs()).then(vb.total_cmp(&va))
        });
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (c, &i) in order.iter().enumerate() {
            vectors.set_column(c, &eig.eigenvectors.column(i));
        }
        Ok(Self { values, vectors })
    }

    /// `V |Lambda|^{1/2}` on the leading `d` eigenpairs.
    fn embed(&self, d: usize) -> DMatrix<f64> {
        let n = self.vectors.nrows();
        let mut out = DMatrix::zeros(n, d);
        for c in 0..d {
            let mut col: DVector<f64> = self.vectors.column(c).into_owned();
            fix_sign(&mut col);
            out.set_column(c, &(col * self.values[c].abs().sqrt()));
        }
        out
    }

    /// Matrix absolute value `V |Lambda| V^T`.
    fn absolute(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j].abs()
        });
        &scaled * self.vectors.transpose()
    }
}

/// Makes the largest-magnitude entry (first on ties) positive.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

fn check_dim(d: usize, n: usize) -> Result<()> {
    if d == 0 || d > n {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension {d} outside 1..={n}"
        )));
    }
    Ok(())
}

/// Adjacency spectral embedding on the `d` eigenpairs of largest magnitude.
pub fn ase(x: &AdjacencyMatrix, d: usize) -> Result<Embedding> {
    check_dim(d, x.n())?;
    if x.weights().iter().all(|&v| v == 0.0) {
        warn!("spectral embedding of an empty graph; returning zeros");
        return Embedding::new(DMatrix::zeros(x.n(), d));
    }
    Embedding::new(Spectrum::of(x.weights())?.embed(d))
}

fn joint_from_spectra(s1: &Spectrum, s2: &Spectrum, d: usize) -> Result<Embedding> {
    let n = s1.vectors.nrows();
    let mut u = DMatrix::zeros(n, 2 * d);
    u.columns_mut(0, d).copy_from(&s1.embed(d));
    u.columns_mut(d, d).copy_from(&s2.embed(d));
    let svd = u.svd(true, false);
    let left = svd
        .u
        .ok_or_else(|| Error::EigenFailure("SVD did not produce left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(n, d);
    for (c, &i) in order.iter().take(d).enumerate() {
        let mut col: DVector<f64> = left.column(i).into_owned();
        fix_sign(&mut col);
        out.set_column(c, &col);
    }
    Embedding::new(out)
}

/// Leading `d` left singular vectors of `[ase(x1, d) | ase(x2, d)]`.
pub fn joint_embed(x1: &AdjacencyMatrix, x2: &AdjacencyMatrix, d: usize) -> Result<Embedding> {
    if x1.n() != x2.n() {
        return Err(Error::DimensionMismatch {
            expected: x1.n(),
            found: x2.n(),
        });
    }
    check_dim(d, x1.n())?;
    joint_from_spectra(
        &Spectrum::of(x1.weights())?,
        &Spectrum::of(x2.weights())?,
        d,
    )
}

/// Singular values of the full-rank joint embedding `[ase(x1, n) | ase(x2, n)]`,
/// i.e. square roots of the eigenvalues of `|X1| + |X2|`, in decreasing order.
fn joint_singular_values(s1: &Spectrum, s2: &Spectrum) -> Result<Vec<f64>> {
    let m = s1.absolute() + s2.absolute();
    let sym = (&m + m.transpose()) * 0.5;
    let spec = Spectrum::of(&sym)?;
    let mut sv: Vec<f64> = spec.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Profile-likelihood elbow of a nonincreasing sequence: the split `q` that
/// maximizes the likelihood of modeling the first `q` values and the rest
/// as two Gaussians with a shared variance. Smallest `q` wins ties.
pub fn select_dim(values: &[f64]) -> usize {
    let p = values.len();
    if p < 2 {
        return 1;
    }
    let mut best = (1usize, f64::NEG_INFINITY);
    for q in 1..p {
        let ll = split_loglik(values, q);
        if ll > best.1 {
            best = (q, ll);
        }
    }
    best.0
}

fn split_loglik(values: &[f64], q: usize) -> f64 {
    let p = values.len();
    let (head, tail) = values.split_at(q);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (m1, m2) = (mean(head), mean(tail));
    let ss: f64 = head.iter().map(|v| (v - m1).powi(2)).sum::<f64>()
        + tail.iter().map(|v| (v - m2).powi(2)).sum::<f64>();
    let dof = if p > 2 { p - 2 } else { p };
    let var = ss / dof as f64;
    if var <= 0.0 {
        // perfect two-level fit
        return f64::INFINITY;
    }
    let ln_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    head.iter()
        .map(|v| ln_norm - (v - m1).powi(2) / (2.0 * var))
        .chain(tail.iter().map(|v| ln_norm - (v - m2).powi(2) / (2.0 * var)))
        .sum()
}

#[derive(Debug, Clone, Default)]
pub struct EstimationOptions {
    /// Fixed block count; when absent, chosen by BIC over `1..=kmax`.
    pub k: Option<usize>,
    /// Upper end of the BIC sweep; defaults to `floor(sqrt(n))`.
    pub kmax: Option<usize>,
    /// Embedding dimension; defaults to the elbow of the joint spectrum.
    pub d: Option<usize>,
    pub gmm: GmmOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct BicEntry {
    pub k: usize,
    pub bic: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct BlockEstimate {
    pub assignment: CommunityAssignment,
    pub d: usize,
    /// Number of mixture components of the selected model.
    pub k: usize,
    /// One entry per model that fitted (empty when `k` was fixed at `n`).
    pub bic: Vec<BicEntry>,
}

pub fn default_kmax(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

/// Joint embedding with `d` fixed or chosen at the elbow of the joint
/// spectrum.
fn joint_embedding_auto(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    d: Option<usize>,
) -> Result<(Embedding, usize)> {
    let s1 = Spectrum::of(x.weights())?;
    let s2 = Spectrum::of(y.weights())?;
    let d = match d {
        Some(d) => {
            check_dim(d, x.n())?;
            d
        }
        None => select_dim(&joint_singular_values(&s1, &s2)?),
    };
    Ok((joint_from_spectra(&s1, &s2, d)?, d))
}

/// Same pipeline as [`block_estimation`] with a fixed `k`, but clusters the
/// joint embedding with k-means instead of a mixture model. Useful for large
/// `k`, where mixture components tend to collapse.
pub fn kmeans_estimation<R: Rng + ?Sized>(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    k: usize,
    d: Option<usize>,
    rng: &mut R,
) -> Result<BlockEstimate> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.n(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
    }
    let (embedding, d) = joint_embedding_auto(x, y, d)?;
    let raw = kmeans(embedding.coords(), k, KMEANS_RESTARTS, rng)?;
    let assignment = CommunityAssignment::from_labels(&raw);
    Ok(BlockEstimate {
        k: assignment.k(),
        assignment,
        d,
        bic: Vec::new(),
    })
}

const KMEANS_RESTARTS: usize = 3;

/// Estimates a shared community assignment for `x` and `y`.
///
/// With a fixed `k = n` every vertex is its own block and no model is fitted.
pub fn block_estimation<R: Rng + ?Sized>(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    opts: &EstimationOptions,
    rng: &mut R,
) -> Result<BlockEstimate> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.n(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples { n, min: 1 });
    }
    match opts.k {
        Some(0) => return Err(Error::InvalidParameter("k must be >= 1".into())),
        Some(k) if k > n => {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")))
        }
        Some(1) => {
            return Ok(BlockEstimate {
                assignment: CommunityAssignment::single_block(n),
                d: opts.d.unwrap_or(1),
                k: 1,
                bic: Vec::new(),
            })
        }
        Some(k) if k == n => {
            return Ok(BlockEstimate {
                assignment: CommunityAssignment::singletons(n),
                d: opts.d.unwrap_or(1),
                k: n,
                bic: Vec::new(),
            })
        }
        _ => {}
    }

    let (embedding, d) = joint_embedding_auto(x, y, opts.d)?;
    let data = embedding.coords();

    let (model, bic) = match opts.k {
        Some(k) => {
            let model = gmm_fit_with(data, k, &opts.gmm, rng)?;
            let entry = BicEntry {
                k,
                bic: model.bic,
                converged: model.converged,
            };
            (model, vec![entry])
        }
        None => {
            let kmax = opts.kmax.unwrap_or_else(|| default_kmax(n)).clamp(1, n);
            let mut entries = Vec::new();
            let mut best: Option<GmmModel> = None;
            for k in 1..=kmax {
                let model = match gmm_fit_with(data, k, &opts.gmm, rng) {
                    Ok(m) => m,
                    Err(Error::DegenerateCluster { .. }) => continue,
                    Err(e) => return Err(e),
                };
                entries.push(BicEntry {
                    k,
                    bic: model.bic,
                    converged: model.converged,
                });
                if model.converged && best.as_ref().is_none_or(|b| model.bic < b.bic) {
                    best = Some(model);
                }
            }
            (best.ok_or(Error::NoConvergedModel)?, entries)
        }
    };
    let raw = model.predict(data)?;
    let assignment = CommunityAssignment::from_labels(&raw);
    Ok(BlockEstimate {
        k: model.k,
        assignment,
        d,
        bic,
    })
}

/// Fraction of vertices whose estimated label disagrees with the truth under
/// the best one-to-one matching of labels (brute force over matchings for
/// small `k`, greedy otherwise).
pub fn misclassification_rate(truth: &CommunityAssignment, estimate: &CommunityAssignment) -> f64 {
    let n = truth.n();
    assert_eq!(n, estimate.n(), "assignment length mismatch");
    let (kt, ke) = (truth.k(), estimate.k());
    let mut confusion = vec![vec![0usize; ke]; kt];
    for v in 0..n {
        confusion[truth.label(v)][estimate.label(v)] += 1;
    }
    let matched = if kt.max(ke) <= 7 {
        best_matching(&confusion, 0, &mut vec![false; ke])
    } else {
        greedy_matching(&confusion)
    };
    1.0 - matched as f64 / n as f64
}

fn best_matching(conf: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
    if row == conf.len() {
        return 0;
    }
    // leaving the row unmatched is allowed when there are fewer estimated labels
    let mut best = best_matching(conf, row + 1, used);
    for c in 0..used.len() {
        if !used[c] {
            used[c] = true;
            best = best.max(conf[row][c] + best_matching(conf, row + 1, used));
            used[c] = false;
        }
    }
    best
}

fn greedy_matching(conf: &[Vec<usize>]) -> usize {
    let mut cells: Vec<(usize, usize, usize)> = conf
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (v, r, c)))
        .collect();
    cells.sort_unstable_by(|a, b| b.cmp(a));
    let mut used_r = vec![false; conf.len()];
    let mut used_c = vec![false; conf.first().map_or(0, |r| r.len())];
    let mut total = 0;
    for (v, r, c) in cells {
        if !used_r[r] && !used_c[c] {
            used_r[r] = true;
            used_c[c] = true;
            total += v;
        }
    }
    total
}
