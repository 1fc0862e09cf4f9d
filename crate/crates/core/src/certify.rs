//! Decision pipeline: recovery check, sharpness and uniqueness via cone
//! triviality, the sufficient stable-recovery condition via forced-zero
//! projection, side conditions, and the aggregate Diagnosis.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOperator;
use crate::error::{Error, Result};
use crate::groups::{self, IndexReport};
use crate::linalg::{nullspace_basis, DenseMatrix, Vector, RANK_REL_TOL};
use crate::polyhedra::{cone_is_trivial, forced_zero_projection, ConeSpec, ProjectionSpec};
use crate::solvers::{self, ProblemInstance, SolverConfig};

/// Default threshold separating K (certificate norm ~ 1) from H among the
/// inactive groups.
pub const DEFAULT_THETA: f64 = 0.99;

/// Default relative recovery tolerance.
pub const DEFAULT_RECOVERY_TOL: f64 = 1e-3;

/// Margin under 1 required of rho for the nondegeneracy source condition.
pub const NSC_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy)]
pub struct CertifyConfig {
    pub theta: f64,
    pub recovery_tol: f64,
    pub solver: SolverConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            theta: DEFAULT_THETA,
            recovery_tol: DEFAULT_RECOVERY_TOL,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NotRecovered,
    Sharp,
    StrongNonsharpStable,
    StrongNonsharpUncertified,
    NonUnique,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnosis {
    pub recovered: bool,
    pub rho: Option<f64>,
    pub sharp: bool,
    pub sharp_witness: Option<Vec<f64>>,
    pub unique: bool,
    pub unique_witness: Option<Vec<f64>>,
    pub nsc: bool,
    pub restricted_injectivity: bool,
    pub gh_injectivity: bool,
    pub stable_certified: bool,
    pub classification: Classification,
    pub solve_kkt_residual: f64,
    pub certificate_residual: Option<f64>,
    pub solve_ms: f64,
    pub certify_ms: f64,
    pub errors: Vec<String>,
}

/// Relative-error recovery test; falls back to absolute error (and says so)
/// when the ground truth is zero.
pub fn check_recovered(x_opt: &Vector, x0: &Vector, tol: f64) -> (bool, bool) {
    let n0 = x0.norm();
    let err = (x_opt - x0).norm();
    if n0 > 0.0 {
        (err / n0 < tol, false)
    } else {
        (err < tol, true)
    }
}

/// Builds the index report at x0: active split, e, the minimax certificate v
/// with its K/H classification, and rho.
pub fn index_report(inst: &ProblemInstance, theta: f64) -> Result<(IndexReport, f64)> {
    let ybar = inst.d.analyze(&inst.x0)?;
    let zero_tol = groups::default_zero_tol(&ybar);
    let (active, inactive, e) = groups::active_sets(&ybar, &inst.part, zero_tol)?;
    let source = solvers::source_coefficient(inst)?;
    let (k_set, h_set) = groups::classify_inactive(&source.v, &inst.part, &inactive, theta)?;
    let report = IndexReport {
        ybar: ybar.iter().cloned().collect(),
        e: e.iter().cloned().collect(),
        active,
        inactive,
        k_set,
        h_set,
        v: source.v.iter().cloned().collect(),
        rho: source.rho,
    };
    Ok((report, source.residual))
}

/// Rows of D* belonging to the analysis coordinates of group `g`.
fn dstar_rows(dmat: &DenseMatrix, part: &crate::groups::GroupPartition, g: usize) -> DenseMatrix {
    let idx = part.group(g);
    DMatrix::from_fn(idx.len(), dmat.nrows(), |r, c| dmat[(c, idx[r])])
}

/// ConeSpec for W(x0) = {w : Phi w = 0, D*_H w = 0, D*_J w in R+ v_J, J in K}.
fn sharpness_cone(inst: &ProblemInstance, report: &IndexReport) -> Result<ConeSpec> {
    let dmat = inst.d.materialize()?;
    let n = inst.n();
    let v = report.v_vec();
    let mut eq_rows: Vec<Vector> = Vec::new();
    for r in 0..inst.phi.nrows() {
        eq_rows.push(inst.phi.row(r).transpose());
    }
    for &g in &report.h_set {
        let b = dstar_rows(&dmat, &inst.part, g);
        for r in 0..b.nrows() {
            eq_rows.push(b.row(r).transpose());
        }
    }
    let equalities = DMatrix::from_fn(eq_rows.len(), n, |r, c| eq_rows[r][c]);
    let mut rays = Vec::new();
    for &g in &report.k_set {
        let b = dstar_rows(&dmat, &inst.part, g);
        let vj = inst.part.block(&v, g);
        rays.push((b, vj.normalize()));
    }
    Ok(ConeSpec {
        ambient_dim: n,
        equalities,
        ray_constraints: rays,
        line_constraints: vec![],
    })
}

/// Sharpness: x0 is a sharp minimum iff W(x0) = {0}.
pub fn check_sharp(
    inst: &ProblemInstance,
    report: &IndexReport,
) -> Result<(bool, Option<Vector>)> {
    let spec = sharpness_cone(inst, report)?;
    let res = cone_is_trivial(&spec)?;
    Ok((res.trivial, res.witness))
}

/// Uniqueness (equivalently a strong minimum): W(x0) meets the model
/// subspace E only at zero. E adds the line constraints
/// D*_J w in R ybar_J for active groups J.
pub fn check_unique(
    inst: &ProblemInstance,
    report: &IndexReport,
) -> Result<(bool, Option<Vector>)> {
    let mut spec = sharpness_cone(inst, report)?;
    let dmat = inst.d.materialize()?;
    let ybar = report.ybar_vec();
    for &g in &report.active {
        let b = dstar_rows(&dmat, &inst.part, g);
        let yj = inst.part.block(&ybar, g);
        spec.line_constraints.push((b, yj.normalize()));
    }
    let res = cone_is_trivial(&spec)?;
    Ok((res.trivial, res.witness))
}

/// The sufficient stable-recovery condition: uniqueness together with the
/// forced-zero projection clause. For the identity operator the smaller
/// system z in Phi*_K(Ker Phi*_I) is used; otherwise the general system
/// D_K z in Im Phi* + Im D_H with auxiliary variables. K empty makes the
/// clause vacuous.
pub fn check_stable_sufficient(
    inst: &ProblemInstance,
    report: &IndexReport,
    unique: bool,
) -> Result<(bool, Option<Vector>)> {
    if !unique {
        return Ok((false, None));
    }
    if report.k_set.is_empty() {
        return Ok((true, None));
    }
    let v = report.v_vec();
    let k_coords: Vec<usize> = report
        .k_set
        .iter()
        .flat_map(|&g| inst.part.group(g).iter().cloned())
        .collect();
    let zc = k_coords.len();
    // Functionals <z_J, v_J> over the compact z layout.
    let mut functionals = Vec::new();
    {
        let mut off = 0;
        for &g in &report.k_set {
            let len = inst.part.group(g).len();
            let mut f = DVector::zeros(zc);
            for (i, &coord) in inst.part.group(g).iter().enumerate() {
                f[off + i] = v[coord];
            }
            functionals.push(f);
            off += len;
        }
    }

    let phi_t = inst.phi.transpose();
    let spec = if matches!(inst.d, AnalysisOperator::Identity { .. }) {
        // L(z, u) = (z - (Phi^T u)_K ; (Phi^T u)_I) = 0.
        let i_coords: Vec<usize> = report
            .active
            .iter()
            .flat_map(|&g| inst.part.group(g).iter().cloned())
            .collect();
        let rows = zc + i_coords.len();
        let nvar = zc + inst.m();
        let mut l = DMatrix::zeros(rows, nvar);
        for (r, &coord) in k_coords.iter().enumerate() {
            l[(r, r)] = 1.0;
            for u in 0..inst.m() {
                l[(r, zc + u)] = -phi_t[(coord, u)];
            }
        }
        for (ri, &coord) in i_coords.iter().enumerate() {
            for u in 0..inst.m() {
                l[(zc + ri, zc + u)] = phi_t[(coord, u)];
            }
        }
        ProjectionSpec {
            z_dim: zc,
            map: l,
            functionals,
        }
    } else {
        // L(z, a, b) = D_K z - Phi^T a - D_H b = 0.
        let dmat = inst.d.materialize()?;
        let h_coords: Vec<usize> = report
            .h_set
            .iter()
            .flat_map(|&g| inst.part.group(g).iter().cloned())
            .collect();
        let n = inst.n();
        let nvar = zc + inst.m() + h_coords.len();
        let mut l = DMatrix::zeros(n, nvar);
        for (c, &coord) in k_coords.iter().enumerate() {
            for r in 0..n {
                l[(r, c)] = dmat[(r, coord)];
            }
        }
        for u in 0..inst.m() {
            for r in 0..n {
                l[(r, zc + u)] = -phi_t[(r, u)];
            }
        }
        for (c, &coord) in h_coords.iter().enumerate() {
            for r in 0..n {
                l[(r, zc + inst.m() + c)] = -dmat[(r, coord)];
            }
        }
        ProjectionSpec {
            z_dim: zc,
            map: l,
            functionals,
        }
    };
    let (forced, witness) = forced_zero_projection(&spec)?;
    Ok((forced, witness))
}

/// nsc: rho < 1 - margin; restricted injectivity:
/// Ker Phi ∩ Ker D*_{I^c} = {0}; gh: Ker Phi ∩ Ker D*_H = {0}.
pub fn check_side_conditions(
    inst: &ProblemInstance,
    report: &IndexReport,
) -> Result<(bool, bool, bool)> {
    let nsc = report.rho < 1.0 - NSC_MARGIN;
    let dmat = inst.d.materialize()?;
    let stacked_trivial = |gs: &[usize]| -> Result<bool> {
        let mut rows: Vec<Vector> = Vec::new();
        for r in 0..inst.phi.nrows() {
            rows.push(inst.phi.row(r).transpose());
        }
        for &g in gs {
            let b = dstar_rows(&dmat, &inst.part, g);
            for r in 0..b.nrows() {
                rows.push(b.row(r).transpose());
            }
        }
        let m = DMatrix::from_fn(rows.len(), inst.n(), |r, c| rows[r][c]);
        Ok(nullspace_basis(&m, RANK_REL_TOL)?.ncols() == 0)
    };
    let ri = stacked_trivial(&report.inactive)?;
    let gh = stacked_trivial(&report.h_set)?;
    Ok((nsc, ri, gh))
}

/// For quadratic regularizers R(x) = 1/2 <Qx, x>: stable recovery holds iff
/// Ker Phi ∩ Ker Q = {0}. Q must be symmetric positive semi-definite.
pub fn check_quadratic_smooth(phi: &DenseMatrix, q: &DenseMatrix) -> Result<bool> {
    if q.nrows() != q.ncols() || q.nrows() != phi.ncols() {
        return Err(Error::dims(
            format!("{0}x{0}", phi.ncols()),
            format!("{}x{}", q.nrows(), q.ncols()),
        ));
    }
    let scale = crate::linalg::max_abs(q).max(1.0);
    if (q - q.transpose()).amax() > 1e-10 * scale {
        return Err(Error::invalid("Q must be symmetric"));
    }
    let eigs = q.clone().symmetric_eigen().eigenvalues;
    if eigs.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::invalid("Q must be positive semi-definite"));
    }
    let mut stacked = DMatrix::zeros(phi.nrows() + q.nrows(), phi.ncols());
    stacked.rows_mut(0, phi.nrows()).copy_from(phi);
    stacked.rows_mut(phi.nrows(), q.nrows()).copy_from(q);
    Ok(nullspace_basis(&stacked, RANK_REL_TOL)?.ncols() == 0)
}

/// Full pipeline: solve, check recovery, certify.
pub fn diagnose(inst: &ProblemInstance, cfg: &CertifyConfig) -> Diagnosis {
    let mut errors = Vec::new();

    let t0 = Instant::now();
    let solve = solvers::solve_basis_pursuit(inst, &cfg.solver);
    let solve_ms = t0.elapsed().as_secs_f64() * 1e3;
    let (recovered, solve_kkt_residual) = match &solve {
        Ok(rep) => {
            if !rep.converged {
                errors.push(format!(
                    "basis pursuit did not converge (residual {:.3e})",
                    rep.kkt_residual
                ));
            }
            let (rec, fallback) = check_recovered(&rep.x, &inst.x0, cfg.recovery_tol);
            if fallback {
                errors.push("zero ground truth: absolute recovery tolerance used".into());
            }
            (rec && rep.converged, rep.kkt_residual)
        }
        Err(e) => {
            errors.push(format!("basis pursuit failed: {e}"));
            (false, f64::INFINITY)
        }
    };

    let t1 = Instant::now();
    let mut rho = None;
    let mut certificate_residual = None;
    let mut sharp = false;
    let mut sharp_witness = None;
    let mut unique = false;
    let mut unique_witness = None;
    let mut nsc = false;
    let mut ri = false;
    let mut gh = false;
    let mut connow = false;
    match index_report(inst, cfg.theta) {
        Ok((report, cert_res)) => {
            rho = Some(report.rho);
            certificate_residual = Some(cert_res);
            match check_sharp(inst, &report) {
                Ok((flag, wit)) => {
                    sharp = flag;
                    sharp_witness = wit.map(|w| w.iter().cloned().collect());
                }
                Err(e) => errors.push(format!("sharpness check failed: {e}")),
            }
            match check_unique(inst, &report) {
                Ok((flag, wit)) => {
                    unique = flag;
                    unique_witness = wit.map(|w| w.iter().cloned().collect());
                }
                Err(e) => errors.push(format!("uniqueness check failed: {e}")),
            }
            match check_stable_sufficient(inst, &report, unique) {
                Ok((flag, _wit)) => connow = flag,
                Err(e) => errors.push(format!("stability check failed: {e}")),
            }
            match check_side_conditions(inst, &report) {
                Ok((a, b, c)) => {
                    nsc = a;
                    ri = b;
                    gh = c;
                }
                Err(e) => errors.push(format!("side conditions failed: {e}")),
            }
        }
        // An unrecovered instance has no dual certificate at x0; only report
        // the failure when a certificate should have existed.
        Err(Error::NoCertificate { .. }) if !recovered => {}
        Err(e) => errors.push(format!("certificate computation failed: {e}")),
    }
    let certify_ms = t1.elapsed().as_secs_f64() * 1e3;

    let stable_certified = sharp || (unique && connow);
    let classification = if !recovered {
        Classification::NotRecovered
    } else if sharp {
        Classification::Sharp
    } else if unique && stable_certified {
        Classification::StrongNonsharpStable
    } else if unique {
        Classification::StrongNonsharpUncertified
    } else {
        Classification::NonUnique
    };

    Diagnosis {
        recovered,
        rho,
        sharp,
        sharp_witness,
        unique,
        unique_witness,
        nsc,
        restricted_injectivity: ri,
        gh_injectivity: gh,
        stable_certified,
        classification,
        solve_kkt_residual,
        certificate_residual,
        solve_ms,
        certify_ms,
        errors,
    }
}
