//! Small closed-form instances used by the test suite and the `examples` CLI
//! subcommand. Each one has hand-derivable certificates, so they double as
//! golden fixtures for the certification pipeline.

use nalgebra::{DMatrix, DVector};

use crate::analysis::AnalysisOperator;
use crate::groups::GroupPartition;
use crate::solvers::ProblemInstance;

/// 3-dimensional two-group instance whose ground truth is unique and stably
/// recoverable but not a sharp minimum: R(x) = ||(x1,x2)|| + |x3|,
/// Phi = [[1,1,0],[1,1,1]], x0 = (1,1,0).
pub fn stable_nonsharp_fixture() -> ProblemInstance {
    let phi = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
    let part = GroupPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
    let x0 = DVector::from_vec(vec![1.0, 1.0, 0.0]);
    ProblemInstance::new(phi, AnalysisOperator::identity(3), part, x0).unwrap()
}

/// 4-dimensional two-group instance whose ground truth is a strong (unique)
/// minimum yet not stably recoverable: R(x) = ||(x1,x2)|| + ||(x3,x4)||,
/// Phi = [[1,0,0,-1],[0,1,0,1],[0,0,1,0]], x0 = (0,1,0,0).
pub fn unstable_strong_fixture() -> ProblemInstance {
    let phi = DMatrix::from_row_slice(
        3,
        4,
        &[
            1.0, 0.0, 0.0, -1.0, //
            0.0, 1.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let part = GroupPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
    let x0 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
    ProblemInstance::new(phi, AnalysisOperator::identity(4), part, x0).unwrap()
}

/// 8-dimensional four-group family with tunable columns
/// (a = (a4,a5,a6,a7,a8), b = (b4,b5,b6,b7,b8)):
/// Phi columns are e1, e2, e3, (a4,1,b4), (a5,0,b5), ..., (a8,1,b8) and
/// x0 = (0,1,0,...,0). Depending on the signs of b4, b6, b8 the ground truth
/// is sharp, stably recoverable without sharpness, or not certifiable.
pub fn parametric_four_group_fixture(a: &[f64; 5], b: &[f64; 5]) -> ProblemInstance {
    let cols: [[f64; 3]; 8] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [a[0], 1.0, b[0]],
        [a[1], 0.0, b[1]],
        [a[2], 1.0, b[2]],
        [a[3], 0.0, b[3]],
        [a[4], 1.0, b[4]],
    ];
    let phi = DMatrix::from_fn(3, 8, |r, c| cols[c][r]);
    let part =
        GroupPartition::new(8, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]).unwrap();
    let mut x0 = DVector::zeros(8);
    x0[1] = 1.0;
    ProblemInstance::new(phi, AnalysisOperator::identity(8), part, x0).unwrap()
}
