//! Dense linear algebra primitives shared by the cone tests and solvers:
//! nullspace bases, orthonormal range bases, minimum-norm solves, rank.
//!
//! All rank decisions use one global policy: a singular value is treated as
//! zero when it is below `rel_tol` times the largest singular value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-9;

pub fn check_finite(a: &DenseMatrix) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix contains non-finite entries"));
    }
    Ok(())
}

fn check_finite_vec(b: &Vector) -> Result<()> {
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("vector contains non-finite entries"));
    }
    Ok(())
}

/// Orthonormal basis of Ker A, one column per nullspace dimension.
///
/// nalgebra's thin SVD only returns min(rows, cols) right singular vectors,
/// so a wide matrix is padded with zero rows to recover the full V factor.
pub fn nullspace_basis(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    check_finite(a)?;
    if a.ncols() == 0 {
        return Err(Error::invalid("matrix with no columns"));
    }
    if a.nrows() == 0 {
        // No constraints: the nullspace is the whole space.
        return Ok(DMatrix::identity(a.ncols(), a.ncols()));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid("rel_tol must be in (0,1)"));
    }
    let (rows, cols) = a.shape();
    let square = if rows >= cols {
        a.clone()
    } else {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(a);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let thresh = rel_tol * smax;
    let mut keep: Vec<usize> = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= thresh {
            keep.push(i);
        }
    }
    // Padded square matrix always has cols singular values, so the kept
    // right singular vectors span Ker A exactly.
    let mut basis = DMatrix::zeros(cols, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Orthonormal basis of the column span of A.
pub fn orthonormal_range_basis(a: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    check_finite(a)?;
    if a.is_empty() {
        return Err(Error::invalid("empty matrix"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid("rel_tol must be in (0,1)"));
    }
    let rows = a.nrows();
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let thresh = rel_tol * smax;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > thresh)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    Ok(basis)
}

/// Numerical rank under the global tolerance policy.
pub fn rank(a: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    let ns = nullspace_basis(a, rel_tol)?;
    Ok(a.ncols() - ns.ncols())
}

/// Outcome of a minimum-norm solve.
#[derive(Debug, Clone)]
pub enum MinNormSolve {
    /// x of minimum Euclidean norm with Ax = b (up to tolerance).
    Feasible(Vector),
    /// b is not in the range of A; carries the least-squares residual norm.
    Infeasible { residual: f64 },
}

/// Minimum-norm solution of Ax = b via the SVD pseudoinverse.
///
/// Reports infeasible when the best least-squares fit leaves a residual
/// above `tol * (1 + ||b||)`.
pub fn min_norm_solve(a: &DenseMatrix, b: &Vector, tol: f64) -> Result<MinNormSolve> {
    check_finite(a)?;
    check_finite_vec(b)?;
    if a.nrows() != b.len() {
        return Err(Error::dims(format!("{} rows", a.nrows()), format!("{}", b.len())));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = RANK_REL_TOL * smax;
    let x = svd
        .solve(b, eps)
        .map_err(|e| Error::invalid(format!("svd solve failed: {e}")))?;
    let residual = (a * &x - b).norm();
    if residual <= tol * (1.0 + b.norm()) {
        Ok(MinNormSolve::Feasible(x))
    } else {
        Ok(MinNormSolve::Infeasible { residual })
    }
}

/// Moore-Penrose pseudoinverse with the global rank tolerance.
pub fn pseudoinverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    check_finite(a)?;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    svd.pseudo_inverse(RANK_REL_TOL * smax)
        .map_err(|e| Error::invalid(format!("pseudoinverse failed: {e}")))
}

/// Max-absolute-entry norm, used for residual reporting.
pub fn max_abs(a: &DenseMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
