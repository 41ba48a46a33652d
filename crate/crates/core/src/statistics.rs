//! Graph correlation statistics.
//!
//! Every statistic maps a pair of vertex-matched adjacency matrices to a
//! signed number in `[-1, 1]`:
//!
//! * `Pearson`: correlation of the vectorized strict upper triangles.
//! * `Dcorr`: unbiased (U-centered) distance correlation of the
//!   kernel-induced distance matrices.
//! * `Mgc`: multiscale variant of `Dcorr` that restricts the U-centered
//!   products to nearest-neighbor ranks `(k, l)` and reports a smoothed
//!   maximum over the scale grid.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{kernel_to_distance, AdjacencyMatrix, DistanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pearson,
    Dcorr,
    Mgc,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pearson, Method::Dcorr, Method::Mgc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pearson => "pearson",
            Method::Dcorr => "dcorr",
            Method::Mgc => "mgc",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(Method::Pearson),
            "dcorr" => Ok(Method::Dcorr),
            "mgc" => Ok(Method::Mgc),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Value of a graph correlation statistic. `scale` is the one-based
/// neighborhood pair chosen by MGC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GCorrStatistic {
    pub value: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<(usize, usize)>,
}

/// Dispatches to the statistic selected by `method`.
pub fn graph_correlation(
    x: &AdjacencyMatrix,
    y: &AdjacencyMatrix,
    method: Method,
) -> Result<GCorrStatistic> {
    match method {
        Method::Pearson => pearson_graph(x, y),
        Method::Dcorr => dcorr_graph(x, y),
        Method::Mgc => mgc_graph(x, y),
    }
}

fn check_same_n(x: &AdjacencyMatrix, y: &AdjacencyMatrix) -> Result<()> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.n(),
        });
    }
    Ok(())
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewSamples { n: a.len(), min: 2 });
    }
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&u, &v) in a.iter().zip(b) {
        let (du, dv) = (u - ma, v - mb);
        sab += du * dv;
        saa += du * du;
        sbb += dv * dv;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson_graph(x: &AdjacencyMatrix, y: &AdjacencyMatrix) -> Result<GCorrStatistic> {
    check_same_n(x, y)?;
    let value = pearson(&x.vectorize_upper(), &y.vectorize_upper())?;
    Ok(GCorrStatistic {
        value,
        method: Method::Pearson,
        scale: None,
    })
}

/// U-centered distance matrix: zero diagonal, zero off-diagonal row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDistanceMatrix {
    a: DMatrix<f64>,
}

impl CenteredDistanceMatrix {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

pub fn u_center(d: &DistanceMatrix) -> Result<CenteredDistanceMatrix> {
    let n = d.n();
    if n < 4 {
        return Err(Error::TooFewSamples { n, min: 4 });
    }
    let m = d.matrix();
    let row: Vec<f64> = (0..n).map(|i| m.row(i).sum()).collect();
    let col: Vec<f64> = (0..n).map(|j| m.column(j).sum()).collect();
    let total: f64 = row.iter().sum();
    let nf = n as f64;
    let grand = total / ((nf - 1.0) * (nf - 2.0));
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            m[(i, j)] - row[i] / (nf - 2.0) - col[j] / (nf - 2.0) + grand
        }
    });
    Ok(CenteredDistanceMatrix { a })
}

/// Unbiased distance covariance `sum_{i != j} a_ij b_ij / (n (n - 3))`.
pub fn dcov_unbiased(cx: &CenteredDistanceMatrix, cy: &CenteredDistanceMatrix) -> Result<f64> {
    let n = cx.n();
    if cy.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cy.n(),
        });
    }
    if n < 4 {
        return Err(Error::TooFewSamples { n, min: 4 });
    }
    // Diagonals are zero, so the full inner product equals the off-diagonal sum.
    let s = cx.a.dot(&cy.a);
    Ok(s / (n as f64 * (n as f64 - 3.0)))
}

pub(crate) fn normalized(cov: f64, var_x: f64, var_y: f64) -> f64 {
    let denom = var_x * var_y;
    if denom > 0.0 {
        (cov / denom.sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Unbiased distance correlation of two distance matrices; zero whenever
/// either distance variance is nonpositive.
pub fn dcorr_distance(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<f64> {
    let cx = u_center(dx)?;
    let cy = u_center(dy)?;
    let cov = dcov_unbiased(&cx, &cy)?;
    let vx = dcov_unbiased(&cx, &cx)?;
    let vy = dcov_unbiased(&cy, &cy)?;
    Ok(normalized(cov, vx, vy))
}

pub fn dcorr_graph(x: &AdjacencyMatrix, y: &AdjacencyMatrix) -> Result<GCorrStatistic> {
    check_same_n(x, y)?;
    let value = dcorr_distance(&kernel_to_distance(x)?, &kernel_to_distance(y)?)?;
    Ok(GCorrStatistic {
        value,
        method: Method::Dcorr,
        scale: None,
    })
}

/// Full grid of local correlations. Entry `(k, l)` (zero-based) uses the
/// pairs whose rank in the first graph is at most `k + 1` and whose rank in
/// the second graph is at most `l + 1`.
#[derive(Debug, Clone)]
pub struct LocalCorrelationMap {
    corr: DMatrix<f64>,
}

impl LocalCorrelationMap {
    pub fn n(&self) -> usize {
        self.corr.nrows()
    }

    /// Correlation at one-based scale `(k, l)`.
    pub fn at(&self, k: usize, l: usize) -> f64 {
        self.corr[(k - 1, l - 1)]
    }

    /// The global scale `(n, n)`, identical to the distance correlation.
    pub fn global(&self) -> f64 {
        let n = self.n();
        self.corr[(n - 1, n - 1)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.corr
    }
}

/// Column-wise ordinal ranks of `d`: `ranks[(i, j)]` is the zero-based
/// position of `d[(i, j)]` among `d[(., j)]`. Each point is its own nearest
/// neighbor; remaining ties are broken by first occurrence.
fn column_ranks(d: &DMatrix<f64>) -> Vec<usize> {
    let n = d.nrows();
    let mut ranks = vec![0usize; n * n];
    let mut keys: Vec<u128> = Vec::with_capacity(n);
    for (j, col) in d.as_slice().chunks(n).enumerate() {
        keys.clear();
        // (not self, value, index) packed high to low; unique through the index
        keys.extend(col.iter().enumerate().map(|(i, &v)| {
            (((i != j) as u128) << 127) | ((total_order_key(v) as u128) << 63) | i as u128
        }));
        keys.sort_unstable();
        for (r, &key) in keys.iter().enumerate() {
            let i = (key & ((1u128 << 63) - 1)) as usize;
            ranks[i + n * j] = r;
        }
    }
    ranks
}

/// Unsigned integer with the same ordering as `f64::total_cmp`.
fn total_order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Per-sample inputs to the local correlation map: U-centered distances
/// and column ranks. Building one is the costly part of MGC, so a fixed
/// sample can be prepared once and paired with many others.
#[derive(Debug, Clone)]
pub struct MgcSide {
    centered: CenteredDistanceMatrix,
    ranks: Vec<usize>,
}

impl MgcSide {
    pub fn new(d: &DistanceMatrix) -> Result<Self> {
        Ok(Self {
            centered: u_center(d)?,
            ranks: column_ranks(d.matrix()),
        })
    }

    pub fn n(&self) -> usize {
        self.centered.n()
    }
}

/// Local distance correlations over every neighborhood pair.
pub fn local_correlations(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<LocalCorrelationMap> {
    if dy.n() != dx.n() {
        return Err(Error::DimensionMismatch {
            expected: dx.n(),
            found: dy.n(),
        });
    }
    local_correlations_prepared(&MgcSide::new(dx)?, &MgcSide::new(dy)?)
}

pub fn local_correlations_prepared(x: &MgcSide, y: &MgcSide) -> Result<LocalCorrelationMap> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.n(),
        });
    }
    let (rx, ry) = (&x.ranks, &y.ranks);
    let (am, bm) = (x.centered.matrix(), y.centered.matrix());

    // Scatter each product into its (rank_x, rank_y) cell, then take 2-D
    // prefix sums so cell (k, l) holds the truncated sum for scale (k, l).
    let mut cov = DMatrix::<f64>::zeros(n, n);
    let mut var_x = vec![0.0; n];
    let mut var_y = vec![0.0; n];
    let (a, b) = (am.as_slice(), bm.as_slice());
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            // rank of x_i relative to x_j, rank of y_j relative to y_i
            let kx = rx[i + n * j];
            let ly = ry[j + n * i];
            let (av, bv) = (a[i + n * j], b[j + n * i]);
            cov[(kx, ly)] += av * bv;
            var_x[kx] += av * av;
            var_y[ly] += bv * bv;
        }
    }
    for c in cov.as_mut_slice().chunks_mut(n) {
        for k in 1..n {
            c[k] += c[k - 1];
        }
    }
    for l in 1..n {
        for k in 0..n {
            cov[(k, l)] += cov[(k, l - 1)];
        }
    }
    for k in 1..n {
        var_x[k] += var_x[k - 1];
        var_y[k] += var_y[k - 1];
    }
    let corr = DMatrix::from_fn(n, n, |k, l| normalized(cov[(k, l)], var_x[k], var_y[l]));
    Ok(LocalCorrelationMap { corr })
}

/// Smoothed maximum of a local correlation map.
///
/// Cells strictly above the global statistic are grouped into 4-connected
/// regions. If the largest region has at least `2n` cells, its maximum is
/// returned along with its one-based scale; otherwise the global statistic.
pub fn smoothed_maximum(map: &LocalCorrelationMap) -> (f64, (usize, usize)) {
    let n = map.n();
    let global = map.global();
    let corr = map.matrix();
    let above = |k: usize, l: usize| corr[(k, l)] > global;

    let mut region_of = vec![usize::MAX; n * n];
    let mut best: Option<(usize, f64, (usize, usize))> = None;
    let mut stack = Vec::new();
    let mut region = 0;
    for l0 in 0..n {
        for k0 in 0..n {
            if !above(k0, l0) || region_of[k0 + n * l0] != usize::MAX {
                continue;
            }
            let mut size = 0usize;
            let mut peak = (f64::NEG_INFINITY, (0, 0));
            region_of[k0 + n * l0] = region;
            stack.push((k0, l0));
            while let Some((k, l)) = stack.pop() {
                size += 1;
                let v = corr[(k, l)];
                if v > peak.0 || (v == peak.0 && (l, k) < (peak.1 .1, peak.1 .0)) {
                    peak = (v, (k, l));
                }
                let neighbors = [
                    (k.wrapping_sub(1), l),
                    (k + 1, l),
                    (k, l.wrapping_sub(1)),
                    (k, l + 1),
                ];
                for (nk, nl) in neighbors {
                    if nk < n && nl < n && region_of[nk + n * nl] == usize::MAX && above(nk, nl) {
                        region_of[nk + n * nl] = region;
                        stack.push((nk, nl));
                    }
                }
            }
            if best.map_or(true, |(s, _, _)| size > s) {
                best = Some((size, peak.0, peak.1));
            }
            region += 1;
        }
    }
    match best {
        Some((size, value, (k, l))) if size >= 2 * n => (value, (k + 1, l + 1)),
        _ => (global, (n, n)),
    }
}

pub fn mgc_distance(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<(f64, (usize, usize))> {
    let map = local_correlations(dx, dy)?;
    Ok(smoothed_maximum(&map))
}

pub fn mgc_graph(x: &AdjacencyMatrix, y: &AdjacencyMatrix) -> Result<GCorrStatistic> {
    check_same_n(x, y)?;
    let (value, scale) = mgc_distance(&kernel_to_distance(x)?, &kernel_to_distance(y)?)?;
    Ok(GCorrStatistic {
        value,
        method: Method::Mgc,
        scale: Some(scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_graph(n: usize, seed: u64) -> AdjacencyMatrix {
        let mut rng = stream(seed, &[100]);
        let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random::<f64>()).collect();
        AdjacencyMatrix::from_upper(n, &upper).unwrap()
    }

    fn random_binary(n: usize, seed: u64) -> AdjacencyMatrix {
        let mut rng = stream(seed, &[200]);
        let upper: Vec<f64> = (0..n * (n - 1) / 2)
            .map(|_| if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 })
            .collect();
        AdjacencyMatrix::from_upper(n, &upper).unwrap()
    }

    fn random_distance(n: usize, seed: u64) -> DistanceMatrix {
        DistanceMatrix::new(random_graph(n, seed).weights().clone()).unwrap()
    }

    /// Literal U-centering: each entry evaluated from explicit loops.
    fn u_center_oracle(d: &DMatrix<f64>) -> DMatrix<f64> {
        let n = d.nrows();
        let nf = n as f64;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut ri = 0.0;
                let mut cj = 0.0;
                let mut all = 0.0;
                for t in 0..n {
                    ri += d[(i, t)];
                    cj += d[(t, j)];
                    for s in 0..n {
                        all += d[(s, t)];
                    }
                }
                out[(i, j)] =
                    d[(i, j)] - ri / (nf - 2.0) - cj / (nf - 2.0) + all / ((nf - 1.0) * (nf - 2.0));
            }
        }
        out
    }

    #[test]
    fn pearson_self_and_complement() {
        let x = random_binary(12, 1);
        assert!((pearson_graph(&x, &x).unwrap().value - 1.0).abs() < 1e-12);
        let comp = AdjacencyMatrix::from_upper(
            12,
            &x.vectorize_upper().iter().map(|v| 1.0 - v).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((pearson_graph(&x, &comp).unwrap().value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_is_error() {
        let x = random_binary(6, 2);
        let full = AdjacencyMatrix::from_upper(6, &[1.0; 15]).unwrap();
        assert!(matches!(pearson_graph(&x, &full), Err(Error::ConstantInput)));
    }

    #[test]
    fn pearson_upper_equals_full_offdiagonal() {
        let (x, y) = (random_graph(9, 3), random_graph(9, 4));
        let off = |g: &AdjacencyMatrix| {
            let mut v = Vec::new();
            for i in 0..9 {
                for j in 0..9 {
                    if i != j {
                        v.push(g.get(i, j));
                    }
                }
            }
            v
        };
        let full = pearson(&off(&x), &off(&y)).unwrap();
        assert!((pearson_graph(&x, &y).unwrap().value - full).abs() < 1e-12);
    }

    #[test]
    fn u_center_constant_is_zero() {
        let d = DistanceMatrix::new(DMatrix::from_element(6, 6, 0.7)).unwrap();
        let c = u_center(&d).unwrap();
        assert!(c.matrix().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn u_center_n4_matches_oracle() {
        let d = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 2., 3., 1., 0., 4., 5., 2., 4., 0., 6., 3., 5., 6., 0.],
        );
        let got = u_center(&DistanceMatrix::new(d.clone()).unwrap()).unwrap();
        let want = u_center_oracle(&d);
        assert!((got.matrix() - want).abs().max() < 1e-12);
        // hand value: a_01 = 1 - 6/2 - 10/2 + 42/6 = 0
        assert!(got.matrix()[(0, 1)].abs() < 1e-12);
        assert!((got.matrix()[(0, 3)] - (3.0 - 3.0 - 7.0 + 7.0)).abs() < 1e-12);
    }

    #[test]
    fn u_center_needs_four_points() {
        let d = DistanceMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert!(matches!(u_center(&d), Err(Error::TooFewSamples { n: 3, min: 4 })));
    }

    #[test]
    fn dcov_dimension_mismatch() {
        let a = u_center(&random_distance(5, 1)).unwrap();
        let b = u_center(&random_distance(6, 1)).unwrap();
        assert!(matches!(dcov_unbiased(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dcorr_self_is_one() {
        for g in [random_graph(20, 5), random_binary(20, 6)] {
            assert!((dcorr_graph(&g, &g).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dcorr_needs_four_vertices() {
        let g = random_graph(3, 1);
        assert!(matches!(dcorr_graph(&g, &g), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn dcov_independent_is_near_zero() {
        let n = 100;
        let reps = 50;
        let mut sum = 0.0;
        let mut scale = 0.0;
        for r in 0..reps {
            let a = u_center(&random_distance(n, 1000 + r)).unwrap();
            let b = u_center(&random_distance(n, 5000 + r)).unwrap();
            sum += dcov_unbiased(&a, &b).unwrap();
            scale += (dcov_unbiased(&a, &a).unwrap() * dcov_unbiased(&b, &b).unwrap()).sqrt();
        }
        assert!((sum / scale).abs() < 0.02, "{}", sum / scale);
    }

    #[test]
    fn global_scale_equals_dcorr() {
        let (x, y) = (random_graph(15, 7), random_graph(15, 8));
        let (dx, dy) = (kernel_to_distance(&x).unwrap(), kernel_to_distance(&y).unwrap());
        let map = local_correlations(&dx, &dy).unwrap();
        let dcorr = dcorr_distance(&dx, &dy).unwrap();
        assert!((map.global() - dcorr).abs() < 1e-12);
        assert!((map.at(15, 15) - dcorr).abs() < 1e-12);
    }

    /// Brute-force local correlation at one scale: filter pairs by rank.
    fn local_oracle(dx: &DMatrix<f64>, dy: &DMatrix<f64>, k: usize, l: usize) -> f64 {
        let n = dx.nrows();
        let a = u_center_oracle(dx);
        let b = u_center_oracle(dy);
        // rank of d[(i, j)] within column j: self first, then strictly
        // smaller distances, then earlier ties
        let rank = |d: &DMatrix<f64>, i: usize, j: usize| {
            if i == j {
                return 1;
            }
            (0..n)
                .filter(|&t| {
                    t == j || d[(t, j)] < d[(i, j)] || (d[(t, j)] == d[(i, j)] && t < i)
                })
                .count()
                + 1
        };
        let (mut c, mut vx, mut vy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let inx = rank(dx, i, j) <= k;
                let iny = rank(dy, j, i) <= l;
                if inx && iny {
                    c += a[(i, j)] * b[(j, i)];
                }
                if inx {
                    vx += a[(i, j)].powi(2);
                }
                if iny {
                    vy += b[(j, i)].powi(2);
                }
            }
        }
        if vx * vy > 0.0 {
            c / (vx * vy).sqrt()
        } else {
            0.0
        }
    }

    #[test]
    fn local_map_matches_brute_force() {
        let n = 9;
        let (x, y) = (random_graph(n, 21), random_binary(n, 22));
        let (dx, dy) = (kernel_to_distance(&x).unwrap(), kernel_to_distance(&y).unwrap());
        let map = local_correlations(&dx, &dy).unwrap();
        for k in 1..=n {
            for l in 1..=n {
                let want = local_oracle(dx.matrix(), dy.matrix(), k, l);
                assert!((map.at(k, l) - want).abs() < 1e-12, "({k},{l})");
            }
        }
    }

    #[test]
    fn mgc_self_is_one() {
        let g = random_graph(25, 9);
        let s = mgc_graph(&g, &g).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert_eq!(s.scale, Some((25, 25)));
    }

    #[test]
    fn smoothing_requires_large_region() {
        // one isolated high cell is ignored
        let n = 5;
        let mut corr = DMatrix::from_element(n, n, 0.1);
        corr[(n - 1, n - 1)] = 0.2;
        corr[(0, 0)] = 0.9;
        let (v, scale) = smoothed_maximum(&LocalCorrelationMap { corr: corr.clone() });
        assert_eq!((v, scale), (0.2, (n, n)));
        // a full row plus another half row (>= 2n cells) is accepted
        for l in 0..n {
            corr[(2, l)] = 0.5;
            corr[(3, l)] = 0.5;
        }
        corr[(3, 4)] = 0.6;
        let (v, scale) = smoothed_maximum(&LocalCorrelationMap { corr });
        assert_eq!((v, scale), (0.6, (4, 5)));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("DCorr".parse::<Method>().unwrap(), Method::Dcorr);
        assert!("hsic".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::Mgc).unwrap(), "\"mgc\"");
    }

    proptest! {
        #[test]
        fn centered_rows_sum_to_zero(seed in 0u64..500, n in 4usize..15) {
            let d = random_distance(n, seed);
            let c = u_center(&d).unwrap();
            for i in 0..n {
                prop_assert!(c.matrix().row(i).sum().abs() < 1e-9 * n as f64);
            }
        }

        #[test]
        fn distance_variance_nonnegative(seed in 0u64..500, n in 4usize..20) {
            let c = u_center(&random_distance(n, seed)).unwrap();
            prop_assert!(dcov_unbiased(&c, &c).unwrap() >= 0.0);
        }

        #[test]
        fn relabeling_invariance(seed in 0u64..200, shift in 1usize..10) {
            let n = 11;
            let (x, y) = (random_graph(n, seed), random_graph(n, seed + 7));
            let order: Vec<usize> = (0..n).map(|i| (i * 3 + shift) % n).collect();
            let (px, py) = (x.permuted(&order).unwrap(), y.permuted(&order).unwrap());
            for m in Method::ALL {
                let a = graph_correlation(&x, &y, m).unwrap().value;
                let b = graph_correlation(&px, &py, m).unwrap().value;
                prop_assert!((a - b).abs() < 1e-10, "{m}: {a} vs {b}");
            }
        }

        #[test]
        fn dcorr_scale_invariant(seed in 0u64..200, c in 0.1f64..50.0) {
            let (x, y) = (random_graph(10, seed), random_graph(10, seed + 1));
            let cx = AdjacencyMatrix::new(x.weights() * c).unwrap();
            let a = dcorr_graph(&x, &y).unwrap().value;
            let b = dcorr_graph(&cx, &y).unwrap().value;
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn mgc_dominates_dcorr(seed in 0u64..200) {
            let (x, y) = (random_graph(14, seed), random_binary(14, seed));
            let d = dcorr_graph(&x, &y).unwrap().value;
            let m = mgc_graph(&x, &y).unwrap().value;
            prop_assert!(m >= d - 1e-12);
        }

        #[test]
        fn statistics_bounded(seed in 0u64..200) {
            let (x, y) = (random_binary(12, seed), random_binary(12, seed + 3));
            for m in Method::ALL {
                let v = graph_correlation(&x, &y, m).unwrap().value;
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
