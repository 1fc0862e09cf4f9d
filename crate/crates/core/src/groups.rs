//! The l1/l2 group structure: norm, prox, active/inactive index sets, the
//! certificate-derived K/H split, direction-dependent sets, and the Hessian
//! blocks of the Euclidean norm on active groups.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOperator;
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Non-overlapping partition of {0, .., p-1} into ordered groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPartition {
    p: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Builds a partition from 0-based index lists. The lists must be
    /// nonempty, pairwise disjoint, and cover {0, .., p-1} exactly.
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; p];
        for (gi, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::invalid(format!("group {gi} is empty")));
            }
            for &i in g {
                if i >= p {
                    return Err(Error::invalid(format!("index {i} out of range in group {gi}")));
                }
                if seen[i] {
                    return Err(Error::invalid(format!("index {i} appears in two groups")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("groups do not cover all coordinates"));
        }
        Ok(Self { p, groups })
    }

    /// Contiguous blocks of equal size covering {0, .., p-1}.
    pub fn contiguous(p: usize, block: usize) -> Result<Self> {
        if block == 0 || p % block != 0 {
            return Err(Error::invalid("block size must divide p"));
        }
        let groups = (0..p / block)
            .map(|g| (g * block..(g + 1) * block).collect())
            .collect();
        Self::new(p, groups)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn block(&self, u: &Vector, g: usize) -> Vector {
        DVector::from_iterator(self.groups[g].len(), self.groups[g].iter().map(|&i| u[i]))
    }

    pub fn block_norm(&self, u: &Vector, g: usize) -> f64 {
        self.groups[g].iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt()
    }

    fn check_len(&self, u: &Vector) -> Result<()> {
        if u.len() != self.p {
            return Err(Error::dims(format!("{}", self.p), format!("{}", u.len())));
        }
        Ok(())
    }
}

/// Sum of per-group Euclidean norms.
pub fn group_norm(u: &Vector, part: &GroupPartition) -> Result<f64> {
    part.check_len(u)?;
    Ok((0..part.len()).map(|g| part.block_norm(u, g)).sum())
}

/// Group soft-thresholding: the prox of tau * ||.||_{1,2}.
pub fn group_prox(u: &Vector, tau: f64, part: &GroupPartition) -> Result<Vector> {
    part.check_len(u)?;
    if tau < 0.0 {
        return Err(Error::invalid("tau must be nonnegative"));
    }
    let mut out = u.clone();
    for g in 0..part.len() {
        let norm = part.block_norm(u, g);
        let scale = if norm <= tau { 0.0 } else { 1.0 - tau / norm };
        for &i in part.group(g) {
            out[i] = scale * u[i];
        }
    }
    Ok(out)
}

/// Projection onto the l1/l2 unit ball {u : sum_J ||u_J|| <= radius}.
///
/// Group analogue of simplex projection: each group norm is soft-thresholded
/// by the multiplier that brings the total down to `radius`.
pub fn project_l12_ball(u: &Vector, radius: f64, part: &GroupPartition) -> Result<Vector> {
    part.check_len(u)?;
    if radius < 0.0 {
        return Err(Error::invalid("radius must be nonnegative"));
    }
    let norms: Vec<f64> = (0..part.len()).map(|g| part.block_norm(u, g)).collect();
    let total: f64 = norms.iter().sum();
    if total <= radius {
        return Ok(u.clone());
    }
    // Find theta with sum_g max(0, n_g - theta) = radius.
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &n) in sorted.iter().enumerate() {
        cumsum += n;
        let t = (cumsum - radius) / (k + 1) as f64;
        if k + 1 == sorted.len() || t >= sorted[k + 1] {
            theta = t;
            break;
        }
    }
    let mut out = DVector::zeros(u.len());
    for g in 0..part.len() {
        let n = norms[g];
        if n > theta {
            let scale = (n - theta) / n;
            for &i in part.group(g) {
                out[i] = scale * u[i];
            }
        }
    }
    Ok(out)
}

/// Active / inactive split of an analysis vector plus the unit-block vector e.
///
/// Returns group ids I (norm above `zero_tol`), their complement, and e with
/// e_J = ybar_J / ||ybar_J|| on active groups and zero elsewhere.
pub fn active_sets(
    ybar: &Vector,
    part: &GroupPartition,
    zero_tol: f64,
) -> Result<(Vec<usize>, Vec<usize>, Vector)> {
    part.check_len(ybar)?;
    if zero_tol < 0.0 {
        return Err(Error::invalid("zero_tol must be nonnegative"));
    }
    let mut active = Vec::new();
    let mut inactive = Vec::new();
    let mut e = DVector::zeros(ybar.len());
    for g in 0..part.len() {
        let norm = part.block_norm(ybar, g);
        if norm > zero_tol {
            active.push(g);
            for &i in part.group(g) {
                e[i] = ybar[i] / norm;
            }
        } else {
            inactive.push(g);
        }
    }
    Ok((active, inactive, e))
}

/// Default activity cutoff for [`active_sets`].
pub fn default_zero_tol(ybar: &Vector) -> f64 {
    1e-10 * 1.0_f64.max(ybar.norm())
}

/// Hessian of the Euclidean norm at a nonzero block:
/// (1/||y||) I - (1/||y||^3) y y^T.
pub fn hessian_block(ybar_j: &Vector) -> Result<DMatrix<f64>> {
    let norm = ybar_j.norm();
    if norm == 0.0 {
        return Err(Error::Domain(
            "hessian block undefined at a zero (inactive) group".into(),
        ));
    }
    let k = ybar_j.len();
    let outer = ybar_j * ybar_j.transpose();
    Ok(DMatrix::identity(k, k) / norm - outer / norm.powi(3))
}

/// Splits the inactive groups by certificate norm: K where ||v_J|| > theta,
/// H otherwise.
pub fn classify_inactive(
    v: &Vector,
    part: &GroupPartition,
    inactive: &[usize],
    theta: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    part.check_len(v)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::invalid("theta must be in (0,1]"));
    }
    let mut k = Vec::new();
    let mut h = Vec::new();
    for &g in inactive {
        if part.block_norm(v, g) > theta {
            k.push(g);
        } else {
            h.push(g);
        }
    }
    Ok((k, h))
}

/// Direction-dependent inactive split K(w)/H(w) and the critical-cone
/// boundary value <e_I, (D*w)_I> + sum_{J in I^c} ||(D*w)_J||.
///
/// The direction lies on the boundary of the critical cone iff the returned
/// value vanishes.
pub fn directional_sets(
    w: &Vector,
    d: &AnalysisOperator,
    part: &GroupPartition,
    active: &[usize],
    inactive: &[usize],
    e: &Vector,
    zero_tol: f64,
) -> Result<(Vec<usize>, Vec<usize>, f64)> {
    if zero_tol < 0.0 {
        return Err(Error::invalid("zero_tol must be nonnegative"));
    }
    let dw = d.analyze(w)?;
    part.check_len(&dw)?;
    let mut kw = Vec::new();
    let mut hw = Vec::new();
    let mut boundary = 0.0;
    for &g in active {
        for &i in part.group(g) {
            boundary += e[i] * dw[i];
        }
    }
    for &g in inactive {
        let norm = part.block_norm(&dw, g);
        boundary += norm;
        if norm > zero_tol {
            kw.push(g);
        } else {
            hw.push(g);
        }
    }
    Ok((kw, hw, boundary))
}

/// Certificate report at a reference point: analysis vector, active split,
/// unit-block vector, the K/H classification of the minimax certificate, and
/// the source coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexReport {
    pub ybar: Vec<f64>,
    pub e: Vec<f64>,
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub k_set: Vec<usize>,
    pub h_set: Vec<usize>,
    pub v: Vec<f64>,
    pub rho: f64,
}

impl IndexReport {
    pub fn ybar_vec(&self) -> Vector {
        DVector::from_vec(self.ybar.clone())
    }

    pub fn e_vec(&self) -> Vector {
        DVector::from_vec(self.e.clone())
    }

    pub fn v_vec(&self) -> Vector {
        DVector::from_vec(self.v.clone())
    }

    /// Checks the structural invariants: I/I^c partition the groups, K/H
    /// partition I^c, e is unit per active block, and v is a subdifferential
    /// member with v_I = e_I.
    pub fn validate(&self, part: &GroupPartition, tol: f64) -> Result<()> {
        let mut all: Vec<usize> = self.active.iter().chain(&self.inactive).cloned().collect();
        all.sort_unstable();
        if all != (0..part.len()).collect::<Vec<_>>() {
            return Err(Error::invalid("active/inactive sets do not partition the groups"));
        }
        let mut ic: Vec<usize> = self.k_set.iter().chain(&self.h_set).cloned().collect();
        ic.sort_unstable();
        let mut inact = self.inactive.clone();
        inact.sort_unstable();
        if ic != inact {
            return Err(Error::invalid("K/H sets do not partition the inactive set"));
        }
        let ybar = self.ybar_vec();
        let e = self.e_vec();
        let v = self.v_vec();
        for &g in &self.active {
            let n = part.block_norm(&ybar, g);
            if n <= 0.0 {
                return Err(Error::invalid(format!("active group {g} has zero block")));
            }
            for &i in part.group(g) {
                if (e[i] - ybar[i] / n).abs() > tol {
                    return Err(Error::invalid("e is not the unit block of ybar"));
                }
                if (v[i] - e[i]).abs() > tol {
                    return Err(Error::invalid("certificate does not equal e on active groups"));
                }
            }
        }
        for &g in &self.inactive {
            for &i in part.group(g) {
                if e[i].abs() > tol {
                    return Err(Error::invalid("e must vanish on inactive groups"));
                }
            }
            if part.block_norm(&v, g) > 1.0 + tol {
                return Err(Error::invalid("certificate leaves the unit ball on an inactive group"));
            }
        }
        Ok(())
    }
}
