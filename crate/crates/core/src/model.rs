//! Simulation settings: a marginal model for each graph plus block
//! proportions, instantiated at any vertex count and correlation.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, CommunityAssignment};
use crate::samplers::{
    feasible_rho_range, sample_correlated_bernoulli_sbm, sample_correlated_gaussian_sbm,
    CorrelatedBernoulliParams, CorrelatedGaussianParams,
};

/// Block parameters as nested rows, the shape used in JSON model files.
pub type BlockRows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum GraphModel {
    Bernoulli {
        bx: BlockRows,
        by: BlockRows,
    },
    Gaussian {
        mux: BlockRows,
        muy: BlockRows,
        sigx: BlockRows,
        sigy: BlockRows,
    },
}

/// How the block-permutation step learns the communities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AssignmentMode {
    /// Use the planted assignment.
    #[default]
    Given,
    /// Estimate it from the sampled pair, with a fixed or BIC-selected `k`.
    Estimated { k: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub name: String,
    #[serde(flatten)]
    pub model: GraphModel,
    /// Relative block sizes; vertices are assigned contiguously.
    pub proportions: Vec<f64>,
    #[serde(default)]
    pub assignment: AssignmentMode,
}

pub fn to_matrix(rows: &BlockRows) -> Result<DMatrix<f64>> {
    let k = rows.len();
    if k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParameter(
            "block parameters must form a nonempty square matrix".into(),
        ));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
}

/// `k x k` rows with `diag` on the diagonal and `off` elsewhere.
pub fn two_level(k: usize, diag: f64, off: f64) -> BlockRows {
    (0..k)
        .map(|i| (0..k).map(|j| if i == j { diag } else { off }).collect())
        .collect()
}

impl GraphModel {
    pub fn k(&self) -> usize {
        match self {
            GraphModel::Bernoulli { bx, .. } => bx.len(),
            GraphModel::Gaussian { mux, .. } => mux.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GraphModel::Bernoulli { .. } => "bernoulli",
            GraphModel::Gaussian { .. } => "gaussian",
        }
    }

    /// Feasible correlation interval: the per-block Bernoulli bounds, or the
    /// open interval `(-1, 1)` for Gaussian edges.
    pub fn rho_range(&self) -> Result<(f64, f64)> {
        match self {
            GraphModel::Bernoulli { bx, by } => feasible_rho_range(&to_matrix(bx)?, &to_matrix(by)?),
            GraphModel::Gaussian { .. } => Ok((-1.0, 1.0)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        z: &CommunityAssignment,
        rho: f64,
        rng: &mut R,
    ) -> Result<(AdjacencyMatrix, AdjacencyMatrix)> {
        match self {
            GraphModel::Bernoulli { bx, by } => {
                let params = CorrelatedBernoulliParams::new(to_matrix(bx)?, to_matrix(by)?, rho, z)?;
                sample_correlated_bernoulli_sbm(&params, rng)
            }
            GraphModel::Gaussian {
                mux,
                muy,
                sigx,
                sigy,
            } => {
                let params = CorrelatedGaussianParams::new(
                    to_matrix(mux)?,
                    to_matrix(muy)?,
                    to_matrix(sigx)?,
                    to_matrix(sigy)?,
                    rho,
                    z,
                )?;
                sample_correlated_gaussian_sbm(&params, rng)
            }
        }
    }
}

impl Setting {
    pub fn new(name: impl Into<String>, model: GraphModel, proportions: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            model,
            proportions,
            assignment: AssignmentMode::Given,
        }
    }

    pub fn estimated(mut self, k: Option<usize>) -> Self {
        self.assignment = AssignmentMode::Estimated { k };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.proportions.len() != self.model.k() {
            return Err(Error::InvalidParameter(format!(
                "setting {:?}: {} proportions for {} blocks",
                self.name,
                self.proportions.len(),
                self.model.k()
            )));
        }
        Ok(())
    }

    pub fn assignment_for(&self, n: usize) -> Result<CommunityAssignment> {
        self.validate()?;
        CommunityAssignment::from_proportions(n, &self.proportions)
    }

    /// Draws a correlated pair together with its planted assignment.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rho: f64,
        rng: &mut R,
    ) -> Result<(AdjacencyMatrix, AdjacencyMatrix, CommunityAssignment)> {
        let z = self.assignment_for(n)?;
        let (x, y) = self.model.sample(&z, rho, rng)?;
        Ok((x, y, z))
    }
}

fn bernoulli(k: usize, x: (f64, f64), y: (f64, f64)) -> GraphModel {
    GraphModel::Bernoulli {
        bx: two_level(k, x.0, x.1),
        by: two_level(k, y.0, y.1),
    }
}

fn gaussian(k: usize, mux: (f64, f64), muy: (f64, f64)) -> GraphModel {
    GraphModel::Gaussian {
        mux: two_level(k, mux.0, mux.1),
        muy: two_level(k, muy.0, muy.1),
        sigx: two_level(k, 1.0, 1.0),
        sigy: two_level(k, 1.0, 1.0),
    }
}

/// Bernoulli settings (a)-(d): ER with equal and unequal marginals, then a
/// two-block SBM with shared and with differing block matrices.
pub fn statistic_settings() -> Vec<Setting> {
    let half = vec![0.5, 0.5];
    vec![
        Setting::new("a", bernoulli(1, (0.5, 0.5), (0.5, 0.5)), vec![1.0]),
        Setting::new("b", bernoulli(1, (0.7, 0.7), (0.2, 0.2)), vec![1.0]),
        Setting::new("c", bernoulli(2, (0.7, 0.3), (0.7, 0.3)), half.clone()),
        Setting::new("d", bernoulli(2, (0.7, 0.3), (0.2, 0.5)), half),
    ]
}

/// Bernoulli power rows 1-6: settings (a)-(d) with planted communities,
/// (d) with estimated communities, and (d) estimated with a 70/30 split.
pub fn bernoulli_power_settings() -> Vec<Setting> {
    let mut rows: Vec<Setting> = statistic_settings()
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            s.name = format!("row{}", i + 1);
            s
        })
        .collect();
    let d = rows[3].clone();
    let mut row5 = d.clone().estimated(Some(2));
    row5.name = "row5".into();
    let mut row6 = d.estimated(Some(2));
    row6.name = "row6".into();
    row6.proportions = vec![0.7, 0.3];
    rows.push(row5);
    rows.push(row6);
    rows
}

/// Gaussian power rows 1-4 (unit variances). For the SBM rows the first
/// mean pair applies to the diagonal blocks and the second to the
/// off-diagonal blocks.
pub fn gaussian_power_settings() -> Vec<Setting> {
    let half = vec![0.5, 0.5];
    vec![
        Setting::new("row1", gaussian(1, (0.0, 0.0), (0.0, 0.0)), vec![1.0]),
        Setting::new("row2", gaussian(1, (0.0, 0.0), (2.0, 2.0)), vec![1.0]),
        Setting::new("row3", gaussian(2, (0.0, 2.0), (0.0, 2.0)), half.clone()),
        Setting::new("row4", gaussian(2, (2.0, 0.0), (4.0, 2.0)), half),
    ]
}
