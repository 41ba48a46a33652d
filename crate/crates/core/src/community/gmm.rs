//! Full-covariance Gaussian mixtures fitted by EM.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the relative change in log-likelihood.
    pub tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub loglik: f64,
    pub bic: f64,
    pub converged: bool,
    /// Log-likelihood after every E-step of the winning restart.
    pub loglik_trace: Vec<f64>,
}

/// Number of free parameters of a full-covariance mixture.
pub fn parameter_count(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

pub fn bic(loglik: f64, k: usize, d: usize, n: usize) -> f64 {
    -2.0 * loglik + parameter_count(k, d) as f64 * (n as f64).ln()
}

struct Component {
    log_weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Component {
    fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>, k: usize) -> Result<Self> {
        let chol = Cholesky::new(cov).ok_or(Error::DegenerateCluster { k })?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            log_weight: weight.ln(),
            mean,
            chol,
            log_det,
        })
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let solved = self
            .chol
            .l()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        -0.5 * (diff.len() as f64 * LN_2PI + self.log_det + solved.norm_squared())
    }
}

struct Fit {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    trace: Vec<f64>,
    converged: bool,
}

fn rows(data: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..data.nrows())
        .map(|i| data.row(i).transpose())
        .collect()
}

/// Ridge added to every covariance: `1e-6 * trace(sample covariance) / d`.
fn covariance_floor(points: &[DVector<f64>]) -> f64 {
    let n = points.len() as f64;
    let d = points[0].len();
    let mean = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / n;
    let trace: f64 = points.iter().map(|p| (p - &mean).norm_squared()).sum::<f64>() / n;
    let floor = 1e-6 * trace / d as f64;
    if floor > 0.0 {
        floor
    } else {
        1e-12
    }
}

fn m_step(
    points: &[DVector<f64>],
    resp: &DMatrix<f64>,
    floor: f64,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>)> {
    let n = points.len();
    let k = resp.ncols();
    let d = points[0].len();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.column(c).sum();
        if !(nk > 1e-10) {
            return Err(Error::DegenerateCluster { k });
        }
        let mut mean = DVector::zeros(d);
        for (i, p) in points.iter().enumerate() {
            mean.axpy(resp[(i, c)], p, 1.0);
        }
        mean /= nk;
        let mut cov = DMatrix::zeros(d, d);
        for (i, p) in points.iter().enumerate() {
            let diff = p - &mean;
            cov.ger(resp[(i, c)], &diff, &diff, 1.0);
        }
        cov /= nk;
        for t in 0..d {
            cov[(t, t)] += floor;
        }
        weights.push(nk / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    Ok((weights, means, covs))
}

/// Responsibilities and total log-likelihood under the given parameters.
fn e_step(
    points: &[DVector<f64>],
    weights: &[f64],
    means: &[DVector<f64>],
    covs: &[DMatrix<f64>],
) -> Result<(DMatrix<f64>, f64)> {
    let k = weights.len();
    let comps = (0..k)
        .map(|c| Component::new(weights[c], means[c].clone(), covs[c].clone(), k))
        .collect::<Result<Vec<_>>>()?;
    let n = points.len();
    let mut resp = DMatrix::zeros(n, k);
    let mut loglik = 0.0;
    let mut logp = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        for (c, comp) in comps.iter().enumerate() {
            logp[c] = comp.log_weight + comp.log_density(p);
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logp.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loglik += lse;
        for c in 0..k {
            resp[(i, c)] = (logp[c] - lse).exp();
        }
    }
    if !loglik.is_finite() {
        return Err(Error::DegenerateCluster { k });
    }
    Ok((resp, loglik))
}

/// k-means++ seeding followed by a hard nearest-center assignment.
fn initial_responsibilities<R: Rng + ?Sized>(
    points: &[DVector<f64>],
    k: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = points.len();
    let mut centers: Vec<&DVector<f64>> = Vec::with_capacity(k);
    centers.push(&points[rng.random_range(0..n)]);
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| (p - centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(&points[pick]);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min((p - &points[pick]).norm_squared());
        }
    }
    let mut resp = DMatrix::zeros(n, k);
    for (i, p) in points.iter().enumerate() {
        let best = (0..k)
            .min_by(|&a, &b| {
                (p - centers[a])
                    .norm_squared()
                    .total_cmp(&(p - centers[b]).norm_squared())
            })
            .expect("k >= 1");
        resp[(i, best)] = 1.0;
    }
    resp
}

fn nearest(p: &DVector<f64>, centers: &[DVector<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(c, m)| (c, (p - m).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one center")
}

const KMEANS_MAX_ITER: usize = 100;

/// Lloyd's k-means on the rows of `data`, keeping the lowest within-cluster
/// sum of squares over `restarts` k-means++ seedings. Labels may skip values
/// when a cluster empties; an emptied center stays where it was.
pub fn kmeans<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = data.nrows();
    if k == 0 || data.ncols() == 0 {
        return Err(Error::InvalidParameter(format!("need k >= 1, got k = {k}")));
    }
    if n < k {
        return Err(Error::TooFewSamples { n, min: k });
    }
    let points = rows(data);
    let d = data.ncols();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let resp = initial_responsibilities(&points, k, rng);
        let mut labels: Vec<usize> = (0..n)
            .map(|i| (0..k).find(|&c| resp[(i, c)] == 1.0).expect("hard assignment"))
            .collect();
        let mut centers = vec![DVector::zeros(d); k];
        for _ in 0..KMEANS_MAX_ITER {
            let mut sums = vec![DVector::zeros(d); k];
            let mut counts = vec![0usize; k];
            for (p, &l) in points.iter().zip(&labels) {
                sums[l] += p;
                counts[l] += 1;
            }
            for c in 0..k {
                if counts[c] > 0 {
                    centers[c] = &sums[c] / counts[c] as f64;
                }
            }
            let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
            if next == labels {
                break;
            }
            labels = next;
        }
        let inertia: f64 = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| (p - &centers[l]).norm_squared())
            .sum();
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, labels));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn fit_once<R: Rng + ?Sized>(
    points: &[DVector<f64>],
    k: usize,
    floor: f64,
    opts: &GmmOptions,
    rng: &mut R,
) -> Result<Fit> {
    let resp = initial_responsibilities(points, k, rng);
    let (mut weights, mut means, mut covs) = m_step(points, &resp, floor)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (resp, ll) = e_step(points, &weights, &means, &covs)?;
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= opts.tol * ll.abs() {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        (weights, means, covs) = m_step(points, &resp, floor)?;
    }
    if !converged {
        let (_, ll) = e_step(points, &weights, &means, &covs)?;
        trace.push(ll);
    }
    Ok(Fit {
        weights,
        means,
        covariances: covs,
        trace,
        converged,
    })
}

/// Fits a `k`-component mixture to the rows of `data`, keeping the best of
/// `opts.restarts` k-means++ initializations (converged fits preferred).
pub fn gmm_fit_with<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k: usize,
    opts: &GmmOptions,
    rng: &mut R,
) -> Result<GmmModel> {
    let n = data.nrows();
    let d = data.ncols();
    if k == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need k >= 1 and d >= 1, got k = {k}, d = {d}"
        )));
    }
    if n < k {
        return Err(Error::TooFewSamples { n, min: k });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("embedding has non-finite entries".into()));
    }
    let points = rows(data);
    let floor = covariance_floor(&points);
    let mut best: Option<Fit> = None;
    let mut last_err = None;
    for _ in 0..opts.restarts.max(1) {
        match fit_once(&points, k, floor, opts, rng) {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (fit.converged, *fit.trace.last().unwrap())
                            > (b.converged, *b.trace.last().unwrap())
                    }
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let fit = match best {
        Some(f) => f,
        None => return Err(last_err.unwrap_or(Error::DegenerateCluster { k })),
    };
    let loglik = *fit.trace.last().expect("at least one E-step");
    Ok(GmmModel {
        k,
        weights: fit.weights,
        means: fit.means,
        covariances: fit.covariances,
        loglik,
        bic: bic(loglik, k, d, n),
        converged: fit.converged,
        loglik_trace: fit.trace,
    })
}

pub fn gmm_fit<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> Result<GmmModel> {
    gmm_fit_with(data, k, &GmmOptions::default(), rng)
}

impl GmmModel {
    /// Component with the largest responsibility for every row of `data`.
    pub fn predict(&self, data: &DMatrix<f64>) -> Result<Vec<usize>> {
        let points = rows(data);
        let (resp, _) = e_step(&points, &self.weights, &self.means, &self.covariances)?;
        Ok((0..resp.nrows())
            .map(|i| {
                let row = resp.row(i);
                (0..self.k)
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                    .expect("k >= 1")
            })
            .collect())
    }
}
