//! Samplers for pairs of edge-correlated random graphs.
//!
//! Both graphs share one community assignment. Every unordered vertex pair
//! `{i, j}` contributes one jointly drawn edge pair `(X_ij, Y_ij)` whose
//! Pearson correlation is `rho`; distinct pairs are independent. Pairs are
//! visited in row-major upper-triangle order, and within a pair the `X`
//! edge is drawn before the `Y` edge, so a seed fixes the output exactly.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, CommunityAssignment};

/// Slack allowed when checking `rho` against the feasible interval and when
/// clamping conditional probabilities into `[0, 1]`.
const BOUND_SLACK: f64 = 1e-12;

fn is_degenerate(p: f64) -> bool {
    p <= 0.0 || p >= 1.0
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Closed interval of correlations attainable by a pair of Bernoulli
/// variables with success probabilities `p` and `q`.
pub fn rho_bounds(p: f64, q: f64) -> Result<(f64, f64)> {
    check_probability(p)?;
    check_probability(q)?;
    if is_degenerate(p) || is_degenerate(q) {
        return Err(Error::DegenerateMarginal { p, q });
    }
    let (np, nq) = (1.0 - p, 1.0 - q);
    let lo = f64::max(-(p * q) / (np * nq), -(np * nq) / (p * q));
    let hi = f64::min((p * nq) / (q * np), (q * np) / (p * nq));
    Ok((lo, hi))
}

/// Success probabilities of `Y` given `X = 1` and given `X = 0`.
pub fn conditional_probabilities(p: f64, q: f64, rho: f64) -> Result<(f64, f64)> {
    check_probability(p)?;
    check_probability(q)?;
    if !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho}")));
    }
    if is_degenerate(p) || is_degenerate(q) {
        if rho != 0.0 {
            return Err(Error::DegenerateMarginal { p, q });
        }
        return Ok((q, q));
    }
    let (lo, hi) = rho_bounds(p, q)?;
    if rho < lo - BOUND_SLACK || rho > hi + BOUND_SLACK {
        return Err(Error::RhoOutOfRange {
            rho,
            lo,
            hi,
            block: None,
        });
    }
    let spread = q * (1.0 - q);
    let given_one = q + rho * ((1.0 - p) / p * spread).sqrt();
    let given_zero = q - rho * (p / (1.0 - p) * spread).sqrt();
    Ok((clamp_unit(given_one), clamp_unit(given_zero)))
}

fn clamp_unit(v: f64) -> f64 {
    debug_assert!(v > -1e-9 && v < 1.0 + 1e-9, "conditional probability {v}");
    v.clamp(0.0, 1.0)
}

/// Precomputed joint law of one Bernoulli edge pair.
#[derive(Debug, Clone, Copy)]
struct EdgeLaw {
    p: f64,
    given_one: f64,
    given_zero: f64,
}

impl EdgeLaw {
    fn new(p: f64, q: f64, rho: f64) -> Result<Self> {
        let (given_one, given_zero) = conditional_probabilities(p, q, rho)?;
        Ok(Self {
            p,
            given_one,
            given_zero,
        })
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (bool, bool) {
        let x = rng.random::<f64>() < self.p;
        let cond = if x { self.given_one } else { self.given_zero };
        let y = rng.random::<f64>() < cond;
        (x, y)
    }
}

/// One jointly distributed Bernoulli edge pair.
pub fn sample_correlated_bernoulli_edge<R: Rng + ?Sized>(
    p: f64,
    q: f64,
    rho: f64,
    rng: &mut R,
) -> Result<(bool, bool)> {
    Ok(EdgeLaw::new(p, q, rho)?.draw(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedBernoulliParams {
    pub bx: DMatrix<f64>,
    pub by: DMatrix<f64>,
    pub rho: f64,
    pub z: CommunityAssignment,
}

fn check_assignment(z: &CommunityAssignment, k: usize) -> Result<()> {
    if z.k() != k {
        return Err(Error::InvalidParameter(format!(
            "assignment has {} blocks but block matrices are {k}x{k}",
            z.k()
        )));
    }
    Ok(())
}

fn check_block_matrix(name: &str, b: &DMatrix<f64>, k: usize) -> Result<()> {
    if b.nrows() != k || b.ncols() != k {
        return Err(Error::InvalidParameter(format!(
            "{name} must be {k}x{k}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    for i in 0..k {
        for j in 0..k {
            if b[(i, j)] != b[(j, i)] {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
            if !b[(i, j)].is_finite() {
                return Err(Error::InvalidParameter(format!("{name} has a non-finite entry")));
            }
        }
    }
    Ok(())
}

impl CorrelatedBernoulliParams {
    pub fn new(
        bx: DMatrix<f64>,
        by: DMatrix<f64>,
        rho: f64,
        z: &CommunityAssignment,
    ) -> Result<Self> {
        let params = Self {
            bx,
            by,
            rho,
            z: z.clone(),
        };
        params.block_laws()?;
        Ok(params)
    }

    fn block_laws(&self) -> Result<Vec<EdgeLaw>> {
        let k = self.bx.nrows();
        check_block_matrix("bx", &self.bx, k)?;
        check_block_matrix("by", &self.by, k)?;
        check_assignment(&self.z, k)?;
        let mut laws = Vec::with_capacity(k * k);
        for j in 0..k {
            for i in 0..k {
                let law = EdgeLaw::new(self.bx[(i, j)], self.by[(i, j)], self.rho).map_err(
                    |e| match e {
                        Error::RhoOutOfRange { rho, lo, hi, .. } => Error::RhoOutOfRange {
                            rho,
                            lo,
                            hi,
                            block: Some((i, j)),
                        },
                        other => other,
                    },
                )?;
                laws.push(law);
            }
        }
        Ok(laws)
    }
}

/// Intersection of the per-block feasible intervals for `rho`. Blocks with
/// a degenerate marginal pin the interval to `[0, 0]`.
pub fn feasible_rho_range(bx: &DMatrix<f64>, by: &DMatrix<f64>) -> Result<(f64, f64)> {
    let k = bx.nrows();
    check_block_matrix("bx", bx, k)?;
    check_block_matrix("by", by, k)?;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..k {
        for j in i..k {
            match rho_bounds(bx[(i, j)], by[(i, j)]) {
                Ok((l, h)) => {
                    lo = lo.max(l);
                    hi = hi.min(h);
                }
                Err(Error::DegenerateMarginal { .. }) => {
                    lo = lo.max(0.0);
                    hi = hi.min(0.0);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((lo, hi))
}

/// Pair of `rho`-correlated Bernoulli SBMs. ER is the `k = 1` case.
pub fn sample_correlated_bernoulli_sbm<R: Rng + ?Sized>(
    params: &CorrelatedBernoulliParams,
    rng: &mut R,
) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
    let laws = params.block_laws()?;
    let k = params.bx.nrows();
    let z = params.z.labels();
    let n = z.len();
    let mut x = DMatrix::zeros(n, n);
    let mut y = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (ex, ey) = laws[z[i] + k * z[j]].draw(rng);
            if ex {
                x[(i, j)] = 1.0;
                x[(j, i)] = 1.0;
            }
            if ey {
                y[(i, j)] = 1.0;
                y[(j, i)] = 1.0;
            }
        }
    }
    Ok((
        AdjacencyMatrix::from_raw_symmetric(x),
        AdjacencyMatrix::from_raw_symmetric(y),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedGaussianParams {
    pub mux: DMatrix<f64>,
    pub muy: DMatrix<f64>,
    pub sigx: DMatrix<f64>,
    pub sigy: DMatrix<f64>,
    pub rho: f64,
    pub z: CommunityAssignment,
}

impl CorrelatedGaussianParams {
    pub fn new(
        mux: DMatrix<f64>,
        muy: DMatrix<f64>,
        sigx: DMatrix<f64>,
        sigy: DMatrix<f64>,
        rho: f64,
        z: &CommunityAssignment,
    ) -> Result<Self> {
        let params = Self {
            mux,
            muy,
            sigx,
            sigy,
            rho,
            z: z.clone(),
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        let k = self.mux.nrows();
        check_block_matrix("mux", &self.mux, k)?;
        check_block_matrix("muy", &self.muy, k)?;
        check_block_matrix("sigx", &self.sigx, k)?;
        check_block_matrix("sigy", &self.sigy, k)?;
        if self.sigx.iter().chain(self.sigy.iter()).any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter(
                "standard deviations must be positive".into(),
            ));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidCovariance { rho: self.rho });
        }
        check_assignment(&self.z, k)?;
        Ok(())
    }
}

/// Pair of `rho`-correlated Gaussian SBMs: `X = mu_x + s_x Z1`,
/// `Y = mu_y + s_y (rho Z1 + sqrt(1 - rho^2) Z2)` per vertex pair.
pub fn sample_correlated_gaussian_sbm<R: Rng + ?Sized>(
    params: &CorrelatedGaussianParams,
    rng: &mut R,
) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
    params.validate()?;
    let z = params.z.labels();
    let n = z.len();
    let rho = params.rho;
    let residual = (1.0 - rho * rho).sqrt();
    let mut x = DMatrix::zeros(n, n);
    let mut y = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (z[i], z[j]);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let ex = params.mux[(a, b)] + params.sigx[(a, b)] * z1;
            let ey = params.muy[(a, b)] + params.sigy[(a, b)] * (rho * z1 + residual * z2);
            x[(i, j)] = ex;
            x[(j, i)] = ex;
            y[(i, j)] = ey;
            y[(j, i)] = ey;
        }
    }
    Ok((
        AdjacencyMatrix::from_raw_symmetric(x),
        AdjacencyMatrix::from_raw_symmetric(y),
    ))
}
