//! Permutation p-values, Monte Carlo power and the analytic Pearson baseline.
//!
//! Every random draw comes from a stream keyed by `(seed, indices)`, so
//! results do not depend on the number of worker threads.

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::community::{block_estimation, EstimationOptions};
use crate::error::{Error, Result};
use crate::graph::{kernel_to_distance, sort_vertices, AdjacencyMatrix, CommunityAssignment};
use crate::model::{AssignmentMode, Setting};
use crate::permutation::BlockPermuter;
use crate::rng::stream;
use crate::statistics::{
    dcov_unbiased, local_correlations_prepared, normalized, pearson, smoothed_maximum, u_center,
    CenteredDistanceMatrix, Method, MgcSide,
};

pub const MIN_TEST_REPLICATES: usize = 20;
pub const MIN_POWER_REPLICATES: usize = 100;

/// A statistic with everything that depends only on `y` computed once, for
/// evaluation against many permuted versions of `x`.
enum Prepared {
    Pearson(Vec<f64>),
    Dcorr(CenteredDistanceMatrix, f64),
    Mgc(MgcSide),
}

impl Prepared {
    fn new(y: &AdjacencyMatrix, method: Method) -> Result<Self> {
        Ok(match method {
            Method::Pearson => Prepared::Pearson(y.vectorize_upper()),
            Method::Dcorr => {
                let cy = u_center(&kernel_to_distance(y)?)?;
                let vy = dcov_unbiased(&cy, &cy)?;
                Prepared::Dcorr(cy, vy)
            }
            Method::Mgc => Prepared::Mgc(MgcSide::new(&kernel_to_distance(y)?)?),
        })
    }

    fn eval(&self, x: &AdjacencyMatrix) -> Result<f64> {
        match self {
            Prepared::Pearson(yv) => pearson(&x.vectorize_upper(), yv),
            Prepared::Dcorr(cy, vy) => {
                let cx = u_center(&kernel_to_distance(x)?)?;
                let cov = dcov_unbiased(&cx, cy)?;
                let vx = dcov_unbiased(&cx, &cx)?;
                Ok(normalized(cov, vx, *vy))
            }
            Prepared::Mgc(ys) => {
                let xs = MgcSide::new(&kernel_to_distance(x)?)?;
                Ok(smoothed_maximum(&local_correlations_prepared(&xs, ys)?).0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestOptions {
    pub method: Method,
    pub replicates: usize,
    pub seed: u64,
    pub estimation: EstimationOptions,
}

impl TestOptions {
    pub fn new(method: Method, replicates: usize, seed: u64) -> Self {
        Self {
            method,
            replicates,
            seed,
            estimation: EstimationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub observed: f64,
    pub null_stats: Vec<f64>,
    pub pvalue: f64,
    pub method: Method,
    pub k_used: usize,
    /// Embedding dimension, absent when the assignment was supplied.
    pub d_used: Option<usize>,
    pub seed: u64,
    pub replicates: usize,
}

/// Two-sided permutation p-value: doubles the count of null statistics
/// strictly beyond the observed one on the side away from the null mean,
/// clamped to `[1/r, 1]`.
pub fn two_sided_pvalue(observed: f64, null: &[f64]) -> f64 {
    let r = null.len();
    if r == 0 {
        return 1.0;
    }
    let mean = null.iter().sum::<f64>() / r as f64;
    let beyond = if mean <= observed {
        null.iter().filter(|&&c| c > observed).count()
    } else {
        null.iter().filter(|&&c| c < observed).count()
    };
    let rf = r as f64;
    (2.0 * beyond as f64 / rf).clamp(1.0 / rf, 1.0)
}

/// Percentile with linear interpolation between order statistics, at
/// position `q (len - 1)` of the sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn check_pair(x: &AdjacencyMatrix, y: &AdjacencyMatrix) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.n(),
        });
    }
    Ok(())
}

/// Block-permutation test with communities estimated jointly from `x` and
/// `y`.
pub fn pvalue_test(x: &AdjacencyMatrix, y: &AdjacencyMatrix, opts: &TestOptions) -> Result<TestResult> {
    check_pair(x, y)?;
    let est = block_estimation(x, y, &opts.estimation, &mut stream(opts.seed, &[0]))?;
    debug!("estimated k = {}, d = {}", est.assignment.k(), est.d);
    let mut result = pvalue_test_with_assignment(x, y, &est.assignment, opts.method, opts.replicates, opts.seed)?;
    result.d_used = Some(est.d);
    Ok(result)
}

/// Block-permutation test against a known assignment.
pub fn pvalue_test_with_assignment(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    z: &CommunityAssignment,
    method: Method,
    replicates: usize,
    seed: u64,
) -> Result<TestResult> {
    check_pair(x, y)?;
    if replicates < MIN_TEST_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "replicates = {replicates}, need at least {MIN_TEST_REPLICATES}"
        )));
    }
    let permuter = BlockPermuter::new(x, z)?;
    let (y_sorted, _) = sort_vertices(y, z)?;
    let prepared = Prepared::new(&y_sorted, method)?;
    // The observed statistic uses the same vertex order as the null draws.
    let observed = prepared.eval(permuter.sorted())?;
    let null_stats = (0..replicates as u64)
        .into_par_iter()
        .map(|i| prepared.eval(&permuter.permute(&mut stream(seed, &[1, i]))))
        .collect::<Result<Vec<f64>>>()?;
    let pvalue = two_sided_pvalue(observed, &null_stats);
    Ok(TestResult {
        observed,
        null_stats,
        pvalue,
        method,
        k_used: z.k(),
        d_used: None,
        seed,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NaiveOutcome {
    pub r: f64,
    pub t: f64,
    pub pvalue: f64,
    pub reject: bool,
}

/// Analytic Pearson test treating the `m = n(n-1)/2` upper-triangle pairs as
/// i.i.d.: `t = r sqrt((m-2)/(1-r^2))` against Student's t with `m - 2`
/// degrees of freedom.
pub fn naive_pearson_test(x: &AdjacencyMatrix, y: &AdjacencyMatrix, alpha: f64) -> Result<NaiveOutcome> {
    check_pair(x, y)?;
    check_alpha(alpha)?;
    let n = x.n();
    let m = n * n.saturating_sub(1) / 2;
    if m < 3 {
        return Err(Error::TooFewSamples { n, min: 3 });
    }
    let r = pearson(&x.vectorize_upper(), &y.vectorize_upper())?;
    let df = (m - 2) as f64;
    let (t, pvalue) = if r.abs() >= 1.0 {
        (f64::INFINITY.copysign(r), 0.0)
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(NaiveOutcome {
        r,
        t,
        pvalue,
        reject: pvalue < alpha,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} not in (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PowerOptions {
    pub methods: Vec<Method>,
    /// Also report the analytic Pearson test on the same draws.
    pub naive: bool,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Used when the setting estimates its communities; `k` is taken from
    /// the setting.
    pub estimation: EstimationOptions,
}

impl PowerOptions {
    pub fn new(replicates: usize, alpha: f64, seed: u64) -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            naive: true,
            replicates,
            alpha,
            seed,
            estimation: EstimationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerResult {
    pub setting: String,
    pub model: String,
    pub n: usize,
    pub rho: f64,
    /// Planted block count of the setting.
    pub k: usize,
    /// `pearson`, `dcorr`, `mgc` or `naive_pearson`.
    pub method: String,
    pub power: f64,
    pub alpha: f64,
    pub replicates: usize,
    /// Replicates whose community estimate failed numerically and fell back
    /// to a single block.
    pub estimation_failures: usize,
}

struct Draw {
    observed: Vec<f64>,
    permuted: Vec<f64>,
    naive_reject: bool,
    estimation_failed: bool,
}

fn power_draw(setting: &Setting, rho: f64, n: usize, opts: &PowerOptions, t: u64) -> Result<Draw> {
    let (x, y, z) = setting.sample(n, rho, &mut stream(opts.seed, &[t, 0]))?;
    let mut estimation_failed = false;
    let zhat = match setting.assignment {
        AssignmentMode::Given => z,
        AssignmentMode::Estimated { k } => {
            let est_opts = EstimationOptions {
                k,
                ..opts.estimation.clone()
            };
            match block_estimation(&x, &y, &est_opts, &mut stream(opts.seed, &[t, 1])) {
                Ok(est) => est.assignment,
                Err(e) if e.is_numeric() => {
                    warn!("replicate {t}: community estimation failed ({e}); using one block");
                    estimation_failed = true;
                    CommunityAssignment::single_block(n)
                }
                Err(e) => return Err(e),
            }
        }
    };
    let permuter = BlockPermuter::new(&x, &zhat)?;
    let (y_sorted, _) = sort_vertices(&y, &zhat)?;
    let x_perm = permuter.permute(&mut stream(opts.seed, &[t, 2]));
    let mut observed = Vec::with_capacity(opts.methods.len());
    let mut permuted = Vec::with_capacity(opts.methods.len());
    for &method in &opts.methods {
        let prepared = Prepared::new(&y_sorted, method)?;
        observed.push(prepared.eval(permuter.sorted())?);
        permuted.push(prepared.eval(&x_perm)?);
    }
    let naive_reject = opts.naive && naive_pearson_test(&x, &y, opts.alpha)?.reject;
    Ok(Draw {
        observed,
        permuted,
        naive_reject,
        estimation_failed,
    })
}

/// Monte Carlo power at one `(rho, n)`: each replicate draws a fresh pair,
/// one observed and one block-permuted statistic per method; the null
/// region is outside the `alpha/2` and `1 - alpha/2` percentiles of the
/// permuted statistics, and power is the fraction of observed statistics
/// strictly inside it. All methods share the same draws.
pub fn power_estimate(setting: &Setting, rho: f64, n: usize, opts: &PowerOptions) -> Result<Vec<PowerResult>> {
    check_alpha(opts.alpha)?;
    if opts.replicates < MIN_POWER_REPLICATES {
        return Err(Error::InvalidParameter(format!(
            "replicates = {}, need at least {MIN_POWER_REPLICATES}",
            opts.replicates
        )));
    }
    setting.validate()?;
    // Fail fast on an infeasible rho rather than once per replicate.
    setting.model.sample(&setting.assignment_for(n)?, rho, &mut stream(0, &[]))?;

    let draws = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|t| power_draw(setting, rho, n, opts, t))
        .collect::<Result<Vec<Draw>>>()?;
    let r = opts.replicates;
    let failures = draws.iter().filter(|d| d.estimation_failed).count();
    let row = |method: String, power: f64| PowerResult {
        setting: setting.name.clone(),
        model: setting.model.kind().to_string(),
        n,
        rho,
        k: setting.model.k(),
        method,
        power,
        alpha: opts.alpha,
        replicates: r,
        estimation_failures: failures,
    };

    let mut out = Vec::with_capacity(opts.methods.len() + 1);
    for (mi, method) in opts.methods.iter().enumerate() {
        let mut null: Vec<f64> = draws.iter().map(|d| d.permuted[mi]).collect();
        null.sort_by(f64::total_cmp);
        let lower = percentile(&null, opts.alpha / 2.0);
        let upper = percentile(&null, 1.0 - opts.alpha / 2.0);
        let rejections = draws
            .iter()
            .filter(|d| d.observed[mi] < lower || d.observed[mi] > upper)
            .count();
        out.push(row(method.name().to_string(), rejections as f64 / r as f64));
    }
    if opts.naive {
        let rejections = draws.iter().filter(|d| d.naive_reject).count();
        out.push(row("naive_pearson".into(), rejections as f64 / r as f64));
    }
    Ok(out)
}

/// Rejection rate of the analytic Pearson test alone, for runs that need
/// more replicates than the permutation methods.
pub fn naive_pearson_power(setting: &Setting, rho: f64, n: usize, replicates: usize, alpha: f64, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    setting.validate()?;
    let rejections = (0..replicates as u64)
        .into_par_iter()
        .map(|t| {
            let (x, y, _) = setting.sample(n, rho, &mut stream(seed, &[t, 0]))?;
            Ok(naive_pearson_test(&x, &y, alpha)?.reject as usize)
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(rejections as f64 / replicates.max(1) as f64)
}
