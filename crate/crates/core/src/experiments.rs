//! Experiment grids: statistic means across the feasible correlation range,
//! power curves over vertex counts, and the block-count sweep for a fixed
//! pair of graphs.
//!
//! Each grid point draws from its own seed, derived from the run seed and
//! the point's indices, so rows are reproducible one at a time.

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::community::{block_estimation, kmeans_estimation, EstimationOptions};
use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::inference::{naive_pearson_power, power_estimate, pvalue_test_with_assignment, PowerOptions, PowerResult};
use crate::model::{bernoulli_power_settings, gaussian_power_settings, statistic_settings, Setting};
use crate::rng::{derive_seed, stream};
use crate::statistics::{graph_correlation, Method};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatRow {
    pub setting: String,
    pub n: usize,
    pub rho: f64,
    pub method: Method,
    pub mean_stat: f64,
    pub sd_stat: f64,
    pub replicates: usize,
}

/// Sample mean and standard deviation (`n - 1` denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Mean and SD of each statistic over `replicates` fresh pairs.
pub fn statistic_summary(
    setting: &Setting,
    rho: f64,
    n: usize,
    replicates: usize,
    methods: &[Method],
    seed: u64,
) -> Result<Vec<StatRow>> {
    let draws = (0..replicates as u64)
        .into_par_iter()
        .map(|t| {
            let (x, y, _) = setting.sample(n, rho, &mut stream(seed, &[t]))?;
            methods
                .iter()
                .map(|&m| Ok(graph_correlation(&x, &y, m)?.value))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let values: Vec<f64> = draws.iter().map(|d| d[mi]).collect();
            let (mean_stat, sd_stat) = mean_sd(&values);
            StatRow {
                setting: setting.name.clone(),
                n,
                rho,
                method,
                mean_stat,
                sd_stat,
                replicates,
            }
        })
        .collect())
}

/// `points` evenly spaced values across the setting's feasible correlation
/// range (endpoints included), plus zero.
pub fn rho_grid(setting: &Setting, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 grid points".into()));
    }
    let (lo, hi) = setting.model.rho_range()?;
    let mut grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    if !grid.iter().any(|&r| r.abs() < 1e-12) {
        grid.push(0.0);
    }
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

#[derive(Debug, Clone)]
pub struct StatSweepOptions {
    pub n: usize,
    pub replicates: usize,
    pub points: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for StatSweepOptions {
    fn default() -> Self {
        Self {
            n: 100,
            replicates: 500,
            points: 11,
            methods: Method::ALL.to_vec(),
            seed: 0,
        }
    }
}

/// Statistic means across the feasible range for the four Bernoulli
/// settings (a)-(d).
pub fn reproduce_statistics(opts: &StatSweepOptions) -> Result<Vec<StatRow>> {
    let mut rows = Vec::new();
    for (si, setting) in statistic_settings().iter().enumerate() {
        for (ri, rho) in rho_grid(setting, opts.points)?.into_iter().enumerate() {
            info!("setting {} rho {rho:.4}", setting.name);
            let seed = derive_seed(opts.seed, &[si as u64, ri as u64]);
            rows.extend(statistic_summary(setting, rho, opts.n, opts.replicates, &opts.methods, seed)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerFigure {
    /// Bernoulli rows 1-6.
    Bernoulli,
    /// Gaussian rows 1-4.
    Gaussian,
}

impl PowerFigure {
    pub fn settings(self) -> Vec<Setting> {
        match self {
            PowerFigure::Bernoulli => bernoulli_power_settings(),
            PowerFigure::Gaussian => gaussian_power_settings(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerGridOptions {
    pub n_grid: Vec<usize>,
    pub rhos: Vec<f64>,
    pub replicates: usize,
    /// Replicates for the analytic Pearson rows; zero skips them.
    pub naive_replicates: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
}

pub fn default_n_grid() -> Vec<usize> {
    (1..=10).map(|i| 10 * i).collect()
}

impl Default for PowerGridOptions {
    fn default() -> Self {
        Self {
            n_grid: default_n_grid(),
            rhos: vec![0.0, 0.1, -0.1],
            replicates: 500,
            naive_replicates: 5000,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            seed: 0,
        }
    }
}

/// Power of every setting at every `(rho, n)` of the grid. Rows come out
/// ordered by setting, then rho, then n, then method.
pub fn power_grid(settings: &[Setting], opts: &PowerGridOptions) -> Result<Vec<PowerResult>> {
    let mut rows = Vec::new();
    for (si, setting) in settings.iter().enumerate() {
        for (ri, &rho) in opts.rhos.iter().enumerate() {
            for &n in &opts.n_grid {
                info!("power {} rho {rho} n {n}", setting.name);
                let seed = derive_seed(opts.seed, &[si as u64, ri as u64, n as u64]);
                let mut popts = PowerOptions::new(opts.replicates, opts.alpha, seed);
                popts.methods = opts.methods.clone();
                popts.naive = false;
                let results = power_estimate(setting, rho, n, &popts)?;
                if let Some(r) = results.first() {
                    if r.estimation_failures > 0 {
                        warn!(
                            "{} rho {rho} n {n}: {} replicates fell back to one block",
                            setting.name, r.estimation_failures
                        );
                    }
                }
                rows.extend(results);
                if opts.naive_replicates > 0 {
                    let power =
                        naive_pearson_power(setting, rho, n, opts.naive_replicates, opts.alpha, derive_seed(seed, &[1]))?;
                    rows.push(PowerResult {
                        setting: setting.name.clone(),
                        model: setting.model.kind().to_string(),
                        n,
                        rho,
                        k: setting.model.k(),
                        method: "naive_pearson".into(),
                        power,
                        alpha: opts.alpha,
                        replicates: opts.naive_replicates,
                        estimation_failures: 0,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn reproduce_power(figure: PowerFigure, opts: &PowerGridOptions) -> Result<Vec<PowerResult>> {
    power_grid(&figure.settings(), opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSweepRow {
    /// Requested block count.
    pub k: usize,
    /// Distinct blocks actually used by the permutation.
    pub k_used: usize,
    /// `none` for `k = 1` and `k = n`, otherwise `gmm` or `kmeans`.
    pub clustering: String,
    pub method: Method,
    pub observed: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub pvalue: f64,
    pub replicates: usize,
}

/// Block-permutation nulls of `(x, y)` for each requested block count.
/// Communities come from the joint estimate with that `k`; when the mixture
/// fit fails numerically the same embedding is clustered with k-means.
pub fn k_sweep(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    k_list: &[usize],
    replicates: usize,
    methods: &[Method],
    seed: u64,
    estimation: &EstimationOptions,
) -> Result<Vec<KSweepRow>> {
    let n = x.n();
    let mut rows = Vec::new();
    for (ki, &k) in k_list.iter().enumerate() {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
        }
        let opts = EstimationOptions {
            k: Some(k),
            ..estimation.clone()
        };
        let mut rng = stream(seed, &[ki as u64, 0]);
        let (assignment, clustering) = match block_estimation(x, y, &opts, &mut rng) {
            Ok(est) if k == 1 || k == n => (est.assignment, "none"),
            Ok(est) => (est.assignment, "gmm"),
            Err(e) if e.is_numeric() => {
                warn!("k = {k}: mixture fit failed ({e}); using k-means");
                (kmeans_estimation(x, y, k, opts.d, &mut rng)?.assignment, "kmeans")
            }
            Err(e) => return Err(e),
        };
        let test_seed = derive_seed(seed, &[ki as u64, 1]);
        for &method in methods {
            let res = pvalue_test_with_assignment(x, y, &assignment, method, replicates, test_seed)?;
            let (null_mean, null_sd) = mean_sd(&res.null_stats);
            rows.push(KSweepRow {
                k,
                k_used: assignment.k(),
                clustering: clustering.to_string(),
                method,
                observed: res.observed,
                null_mean,
                null_sd,
                pvalue: res.pvalue,
                replicates,
            });
        }
    }
    Ok(rows)
}

/// `2^1, 2^2, ...` up to `n`, always ending with `n` itself.
pub fn default_k_list(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (1..usize::BITS)
        .map(|i| 1usize << i)
        .take_while(|&k| k < n)
        .collect();
    ks.push(n);
    ks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CommunityAssignment;

    #[test]
    fn mean_sd_small_cases() {
        assert_eq!(mean_sd(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rho_grid_covers_range_and_zero() {
        let b = &statistic_settings()[1];
        let grid = rho_grid(b, 8).unwrap();
        assert_eq!(grid.len(), 9);
        assert!((grid[0] + 0.14 / 0.24).abs() < 1e-12);
        assert!((grid[8] - 0.06 / 0.56).abs() < 1e-12);
        assert!(grid.contains(&0.0));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn er_statistics_track_rho() {
        let a = &statistic_settings()[0];
        let rows = statistic_summary(a, 0.5, 40, 30, &[Method::Pearson, Method::Dcorr], 3).unwrap();
        for row in rows {
            assert!((row.mean_stat - 0.5).abs() < 0.05, "{row:?}");
        }
    }

    #[test]
    fn statistic_sweep_is_reproducible() {
        let a = &statistic_settings()[2];
        let one = statistic_summary(a, 0.2, 20, 10, &Method::ALL, 5).unwrap();
        let two = statistic_summary(a, 0.2, 20, 10, &Method::ALL, 5).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn default_k_list_shape() {
        assert_eq!(default_k_list(20), vec![2, 4, 8, 16, 20]);
        assert_eq!(default_k_list(16), vec![2, 4, 8, 16]);
    }

    #[test]
    fn k_sweep_extremes() {
        let setting = &statistic_settings()[2];
        let (x, y, _) = setting.sample(24, 0.5, &mut stream(8, &[])).unwrap();
        let rows = k_sweep(&x, &y, &[1, 24], 30, &[Method::Dcorr], 2, &EstimationOptions::default()).unwrap();
        // a single block is an unrestricted shuffle
        let full = pvalue_test_with_assignment(&x, &y, &CommunityAssignment::single_block(24), Method::Dcorr, 30, derive_seed(2, &[0, 1]))
            .unwrap();
        assert_eq!(rows[0].null_mean, mean_sd(&full.null_stats).0);
        // singleton blocks leave nothing to permute
        assert_eq!(rows[1].clustering, "none");
        assert!((rows[1].null_mean - rows[1].observed).abs() < 1e-12);
        assert!(rows[1].null_sd < 1e-12);
    }

    #[test]
    fn power_grid_row_order() {
        let settings = vec![statistic_settings().remove(0)];
        let opts = PowerGridOptions {
            n_grid: vec![10, 12],
            rhos: vec![0.0],
            replicates: 100,
            naive_replicates: 100,
            methods: vec![Method::Pearson],
            ..Default::default()
        };
        let rows = power_grid(&settings, &opts).unwrap();
        let keys: Vec<(usize, &str)> = rows.iter().map(|r| (r.n, r.method.as_str())).collect();
        assert_eq!(keys, vec![(10, "pearson"), (10, "naive_pearson"), (12, "pearson"), (12, "naive_pearson")]);
    }
}
