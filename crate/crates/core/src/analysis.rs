//! Analysis operators D and their adjoints: identity, 2D forward-difference
//! gradient with zero boundary rows/columns, or an explicit dense matrix.
//!
//! `analyze` computes D*x (signal space -> analysis space), `synthesize`
//! computes D u, and `materialize` produces the dense n x p matrix for the
//! cone tests.
//!
//! Images are vectorized row-major: pixel (i, j) of an n1 x n2 image sits at
//! index i * n2 + j. The gradient output interleaves the two difference
//! components per pixel, so pixel k occupies analysis coordinates (2k, 2k+1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::{DenseMatrix, Vector};

/// Largest n * p product materialize will turn into a dense matrix.
pub const DENSE_BUDGET: usize = 25_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalysisOperator {
    Identity { n: usize },
    Gradient2d { n1: usize, n2: usize },
    Explicit { matrix: Vec<Vec<f64>> },
}

impl AnalysisOperator {
    pub fn identity(n: usize) -> Self {
        AnalysisOperator::Identity { n }
    }

    pub fn gradient2d(n1: usize, n2: usize) -> Self {
        AnalysisOperator::Gradient2d { n1, n2 }
    }

    pub fn explicit(m: DenseMatrix) -> Self {
        let matrix = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
            .collect();
        AnalysisOperator::Explicit { matrix }
    }

    /// Signal dimension n.
    pub fn signal_dim(&self) -> usize {
        match self {
            AnalysisOperator::Identity { n } => *n,
            AnalysisOperator::Gradient2d { n1, n2 } => n1 * n2,
            AnalysisOperator::Explicit { matrix } => matrix.len(),
        }
    }

    /// Analysis dimension p.
    pub fn analysis_dim(&self) -> usize {
        match self {
            AnalysisOperator::Identity { n } => *n,
            AnalysisOperator::Gradient2d { n1, n2 } => 2 * n1 * n2,
            AnalysisOperator::Explicit { matrix } => {
                matrix.first().map(|r| r.len()).unwrap_or(0)
            }
        }
    }

    fn explicit_matrix(&self) -> Option<DenseMatrix> {
        match self {
            AnalysisOperator::Explicit { matrix } => {
                let n = matrix.len();
                let p = matrix.first().map(|r| r.len()).unwrap_or(0);
                let mut m = DMatrix::zeros(n, p);
                for (r, row) in matrix.iter().enumerate() {
                    for (c, &x) in row.iter().enumerate() {
                        m[(r, c)] = x;
                    }
                }
                Some(m)
            }
            _ => None,
        }
    }

    /// The per-pixel isotropic grouping for a gradient operator, or one
    /// singleton group per coordinate for the identity.
    pub fn natural_partition(&self) -> Result<GroupPartition> {
        match self {
            AnalysisOperator::Identity { n } => {
                GroupPartition::new(*n, (0..*n).map(|i| vec![i]).collect())
            }
            AnalysisOperator::Gradient2d { n1, n2 } => {
                let pixels = n1 * n2;
                GroupPartition::new(2 * pixels, (0..pixels).map(|k| vec![2 * k, 2 * k + 1]).collect())
            }
            AnalysisOperator::Explicit { .. } => Err(Error::invalid(
                "explicit operators carry no natural group structure",
            )),
        }
    }

    /// Computes D*x.
    pub fn analyze(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.signal_dim() {
            return Err(Error::dims(
                format!("{}", self.signal_dim()),
                format!("{}", x.len()),
            ));
        }
        match self {
            AnalysisOperator::Identity { .. } => Ok(x.clone()),
            AnalysisOperator::Gradient2d { n1, n2 } => {
                let (n1, n2) = (*n1, *n2);
                let mut out = DVector::zeros(2 * n1 * n2);
                for i in 0..n1 {
                    for j in 0..n2 {
                        let k = i * n2 + j;
                        if i + 1 < n1 {
                            out[2 * k] = x[(i + 1) * n2 + j] - x[k];
                        }
                        if j + 1 < n2 {
                            out[2 * k + 1] = x[i * n2 + j + 1] - x[k];
                        }
                    }
                }
                Ok(out)
            }
            AnalysisOperator::Explicit { .. } => {
                let m = self.explicit_matrix().unwrap();
                Ok(m.transpose() * x)
            }
        }
    }

    /// Computes D u, the exact adjoint of [`analyze`].
    pub fn synthesize(&self, u: &Vector) -> Result<Vector> {
        if u.len() != self.analysis_dim() {
            return Err(Error::dims(
                format!("{}", self.analysis_dim()),
                format!("{}", u.len()),
            ));
        }
        match self {
            AnalysisOperator::Identity { .. } => Ok(u.clone()),
            AnalysisOperator::Gradient2d { n1, n2 } => {
                let (n1, n2) = (*n1, *n2);
                let mut out = DVector::zeros(n1 * n2);
                for i in 0..n1 {
                    for j in 0..n2 {
                        let k = i * n2 + j;
                        if i + 1 < n1 {
                            out[(i + 1) * n2 + j] += u[2 * k];
                            out[k] -= u[2 * k];
                        }
                        if j + 1 < n2 {
                            out[i * n2 + j + 1] += u[2 * k + 1];
                            out[k] -= u[2 * k + 1];
                        }
                    }
                }
                Ok(out)
            }
            AnalysisOperator::Explicit { .. } => {
                let m = self.explicit_matrix().unwrap();
                Ok(m * u)
            }
        }
    }

    /// Dense n x p matrix whose transpose applies `analyze`.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        let (n, p) = (self.signal_dim(), self.analysis_dim());
        if n * p > DENSE_BUDGET {
            return Err(Error::ResourceBudget {
                rows: n,
                cols: p,
                budget: DENSE_BUDGET,
            });
        }
        if let Some(m) = self.explicit_matrix() {
            return Ok(m);
        }
        let mut out = DMatrix::zeros(n, p);
        for j in 0..p {
            let mut unit = DVector::zeros(p);
            unit[j] = 1.0;
            out.set_column(j, &self.synthesize(&unit)?);
        }
        Ok(out)
    }
}
