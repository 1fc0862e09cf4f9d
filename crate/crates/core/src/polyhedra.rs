//! Polyhedral cone machinery: a dense two-phase simplex solver and exact
//! triviality tests for cones given by equalities, ray constraints
//! (B_J w = lambda_J d_J with lambda_J >= 0) and line constraints
//! (B_J w in R d_J).
//!
//! Triviality is decided by a nullspace-plus-LP decomposition: first restrict
//! to the subspace where every constraint can hold at all, then check the
//! lineality space (all ray multipliers zero) and finally a bounded LP
//! maximizing the sum of ray multipliers. Any nonzero cone element shows up
//! in exactly one of the two stages.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{nullspace_basis, DenseMatrix, Vector, RANK_REL_TOL};

/// LP optimum below this threshold counts as zero.
pub const LP_POSITIVITY_TOL: f64 = 1e-6;

/// Residual tolerance a returned witness must satisfy.
pub const WITNESS_TOL: f64 = 1e-8;

const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, solution: Vector },
    Infeasible,
    Unbounded,
}

/// Maximizes `c . x` subject to `aeq x = beq` with `x[i] >= 0` wherever
/// `nonneg[i]` holds; other variables are free (sign-split internally).
pub fn lp_maximize(
    c: &Vector,
    aeq: &DenseMatrix,
    beq: &Vector,
    nonneg: &[bool],
) -> Result<LpOutcome> {
    let n = c.len();
    if aeq.ncols() != n || nonneg.len() != n {
        return Err(Error::dims(
            format!("{} columns", n),
            format!("{}x{} / mask {}", aeq.nrows(), aeq.ncols(), nonneg.len()),
        ));
    }
    if aeq.nrows() != beq.len() {
        return Err(Error::dims(
            format!("{} rows", aeq.nrows()),
            format!("{}", beq.len()),
        ));
    }

    // Sign-split free variables: x_i = x_i+ - x_i-.
    let mut cols: Vec<(usize, f64)> = Vec::new(); // (original index, sign)
    for (i, &nn) in nonneg.iter().enumerate() {
        cols.push((i, 1.0));
        if !nn {
            cols.push((i, -1.0));
        }
    }
    let ns = cols.len();
    let a2 = DMatrix::from_fn(aeq.nrows(), ns, |r, j| {
        let (i, s) = cols[j];
        s * aeq[(r, i)]
    });
    let c2 = DVector::from_fn(ns, |j, _| {
        let (i, s) = cols[j];
        s * c[i]
    });

    match simplex_nonneg(&c2, &a2, beq)? {
        SimplexOutcome::Infeasible => Ok(LpOutcome::Infeasible),
        SimplexOutcome::Unbounded => Ok(LpOutcome::Unbounded),
        SimplexOutcome::Optimal { value, solution } => {
            let mut x = DVector::zeros(n);
            for (j, &(i, s)) in cols.iter().enumerate() {
                x[i] += s * solution[j];
            }
            Ok(LpOutcome::Optimal { value, solution: x })
        }
    }
}

enum SimplexOutcome {
    Optimal { value: f64, solution: Vector },
    Infeasible,
    Unbounded,
}

/// Tableau simplex: maximize c.x s.t. a x = b, x >= 0.
fn simplex_nonneg(c: &Vector, a: &DenseMatrix, b: &Vector) -> Result<SimplexOutcome> {
    let (m, n) = a.shape();
    if m == 0 {
        // Feasible region is the nonnegative orthant.
        if c.iter().any(|&cj| cj > PIVOT_EPS) {
            return Ok(SimplexOutcome::Unbounded);
        }
        return Ok(SimplexOutcome::Optimal {
            value: 0.0,
            solution: DVector::zeros(n),
        });
    }

    // Canonical form with b >= 0 and one artificial variable per row.
    let mut t = DMatrix::zeros(m, n + m);
    let mut rhs = DVector::zeros(m);
    for r in 0..m {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(r, j)] = sign * a[(r, j)];
        }
        t[(r, n + r)] = 1.0;
        rhs[r] = sign * b[r];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1: drive artificials to zero.
    let c1 = DVector::from_fn(n + m, |j, _| if j >= n { -1.0 } else { 0.0 });
    let status = run_simplex(&mut t, &mut rhs, &mut basis, &c1, n + m)?;
    if matches!(status, RunStatus::Unbounded) {
        return Err(Error::LpFailure("phase-1 objective unbounded".into()));
    }
    let phase1: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &bi)| bi >= n)
        .map(|(r, _)| rhs[r])
        .sum();
    if phase1 > 1e-7 {
        return Ok(SimplexOutcome::Infeasible);
    }

    // Pivot remaining artificials out of the basis; rows where that is
    // impossible are redundant and get dropped.
    let mut keep: Vec<usize> = Vec::new();
    for r in 0..m {
        if basis[r] < n {
            keep.push(r);
            continue;
        }
        if let Some(j) = (0..n).find(|&j| t[(r, j)].abs() > 1e-7) {
            pivot(&mut t, &mut rhs, r, j);
            basis[r] = j;
            keep.push(r);
        }
    }
    let m2 = keep.len();
    let mut t2 = DMatrix::zeros(m2, n);
    let mut rhs2 = DVector::zeros(m2);
    let mut basis2 = Vec::with_capacity(m2);
    for (rr, &r) in keep.iter().enumerate() {
        for j in 0..n {
            t2[(rr, j)] = t[(r, j)];
        }
        rhs2[rr] = rhs[r].max(0.0);
        basis2.push(basis[r]);
    }

    // Phase 2 over the original objective.
    let status = run_simplex(&mut t2, &mut rhs2, &mut basis2, c, n)?;
    if matches!(status, RunStatus::Unbounded) {
        return Ok(SimplexOutcome::Unbounded);
    }
    let mut x = DVector::zeros(n);
    for (r, &bi) in basis2.iter().enumerate() {
        x[bi] = rhs2[r];
    }
    Ok(SimplexOutcome::Optimal {
        value: c.dot(&x),
        solution: x,
    })
}

enum RunStatus {
    Optimal,
    Unbounded,
}

/// Bland-rule simplex iterations over columns `0..ncols_allowed`.
/// The tableau must be canonical for `basis` on entry.
fn run_simplex(
    t: &mut DMatrix<f64>,
    rhs: &mut DVector<f64>,
    basis: &mut Vec<usize>,
    c: &Vector,
    ncols_allowed: usize,
) -> Result<RunStatus> {
    let m = t.nrows();
    let pivot_cap = 10_000 + 200 * (m + t.ncols());
    for _ in 0..pivot_cap {
        // Reduced costs r_j = c_j - c_B . T[:, j].
        let mut entering = None;
        for j in 0..ncols_allowed {
            if basis.contains(&j) {
                continue;
            }
            let mut red = c[j];
            for r in 0..m {
                red -= c[basis[r]] * t[(r, j)];
            }
            if red > PIVOT_EPS {
                entering = Some(j);
                break; // Bland: smallest improving index
            }
        }
        let Some(j) = entering else {
            return Ok(RunStatus::Optimal);
        };
        // Ratio test, Bland tie-break on basis index.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if t[(r, j)] > PIVOT_EPS {
                let ratio = rhs[r] / t[(r, j)];
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12
                            || ((ratio - lratio).abs() <= 1e-12 && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            return Ok(RunStatus::Unbounded);
        };
        pivot(t, rhs, r, j);
        basis[r] = j;
    }
    Err(Error::LpFailure(format!(
        "pivot cap {} exceeded",
        pivot_cap
    )))
}

fn pivot(t: &mut DMatrix<f64>, rhs: &mut DVector<f64>, r: usize, j: usize) {
    let piv = t[(r, j)];
    for col in 0..t.ncols() {
        t[(r, col)] /= piv;
    }
    rhs[r] /= piv;
    for row in 0..t.nrows() {
        if row == r {
            continue;
        }
        let f = t[(row, j)];
        if f == 0.0 {
            continue;
        }
        for col in 0..t.ncols() {
            t[(row, col)] -= f * t[(r, col)];
        }
        rhs[row] -= f * rhs[r];
    }
}

/// A polyhedral cone {w : equalities w = 0, B_J w = lambda_J d_J (lambda >= 0)
/// for ray constraints, B_J w in R d_J for line constraints}.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    pub ambient_dim: usize,
    pub equalities: DenseMatrix,
    pub ray_constraints: Vec<(DenseMatrix, Vector)>,
    pub line_constraints: Vec<(DenseMatrix, Vector)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrivialitySource {
    Lineality,
    RayLp,
}

#[derive(Debug, Clone)]
pub struct TrivialityResult {
    pub trivial: bool,
    pub witness: Option<Vector>,
    pub source: Option<TrivialitySource>,
}

impl ConeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.equalities.ncols() != self.ambient_dim && self.equalities.nrows() > 0 {
            return Err(Error::dims(
                format!("{} columns", self.ambient_dim),
                format!("{}", self.equalities.ncols()),
            ));
        }
        for (b, d) in self.ray_constraints.iter().chain(&self.line_constraints) {
            if b.ncols() != self.ambient_dim || b.nrows() != d.len() {
                return Err(Error::dims(
                    format!("block over R^{}", self.ambient_dim),
                    format!("{}x{} with d in R^{}", b.nrows(), b.ncols(), d.len()),
                ));
            }
            if d.norm() < 1e-12 {
                return Err(Error::invalid("ray/line direction must be nonzero"));
            }
        }
        Ok(())
    }

    /// Max constraint violation of `w` over all equalities, rays and lines.
    pub fn residual(&self, w: &Vector) -> f64 {
        let mut res: f64 = 0.0;
        if self.equalities.nrows() > 0 {
            res = res.max((&self.equalities * w).amax());
        }
        for (b, d) in &self.line_constraints {
            let dv = d / d.norm();
            let bw = b * w;
            let tang = &bw - &dv * dv.dot(&bw);
            res = res.max(tang.amax().max(0.0));
        }
        for (b, d) in &self.ray_constraints {
            let dv = d / d.norm();
            let bw = b * w;
            let along = dv.dot(&bw);
            let tang = &bw - &dv * along;
            res = res.max(tang.amax()).max(-along);
        }
        res
    }
}

/// Decides whether the cone contains any nonzero point.
pub fn cone_is_trivial(spec: &ConeSpec) -> Result<TrivialityResult> {
    spec.validate()?;
    let n = spec.ambient_dim;

    // Base subspace: every constraint forces B_J w parallel to d_J, which is
    // linear; stack those tangential rows with the equalities.
    let mut rows: Vec<Vector> = Vec::new();
    for r in 0..spec.equalities.nrows() {
        rows.push(spec.equalities.row(r).transpose());
    }
    for (b, d) in spec.ray_constraints.iter().chain(&spec.line_constraints) {
        let dv = d / d.norm();
        // (I - d d^T) B has rank dim-1; keep all rows, SVD handles redundancy.
        let proj = b - &dv * (dv.transpose() * b);
        for r in 0..proj.nrows() {
            rows.push(proj.row(r).transpose());
        }
    }
    let base = if rows.is_empty() {
        DMatrix::zeros(0, n)
    } else {
        DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c])
    };
    let null = nullspace_basis(&base, RANK_REL_TOL)?;
    let dim = null.ncols();
    if dim == 0 {
        return Ok(TrivialityResult {
            trivial: true,
            witness: None,
            source: None,
        });
    }

    // Ray functionals in reduced coordinates: g_J . xi = d_J . (B_J N xi).
    // Functionals that vanish on the subspace (relative to the block scale)
    // impose nothing and are dropped; the rest are normalized so the
    // nullspace tolerance in stage 1 is meaningful.
    let g: Vec<Vector> = spec
        .ray_constraints
        .iter()
        .filter_map(|(b, d)| {
            let dv = d / d.norm();
            let gj: Vector = (dv.transpose() * b * &null).transpose();
            let scale = b.norm().max(1.0);
            if gj.norm() <= 1e-10 * scale {
                None
            } else {
                let n = gj.norm();
                Some(gj / n)
            }
        })
        .collect();

    // Stage 1: lineality space, all ray functionals zero.
    let lineality = if g.is_empty() {
        DMatrix::identity(dim, dim)
    } else {
        let gm = DMatrix::from_fn(g.len(), dim, |r, c| g[r][c]);
        nullspace_basis(&gm, RANK_REL_TOL)?
    };
    if lineality.ncols() > 0 {
        let xi = lineality.column(0).clone_owned();
        let w = (&null * xi).normalize();
        return Ok(TrivialityResult {
            trivial: false,
            witness: Some(w),
            source: Some(TrivialitySource::Lineality),
        });
    }

    // Stage 2: LP over (xi free, lambda >= 0, slack >= 0):
    //   max sum lambda  s.t.  g_J . xi - lambda_J = 0,  sum lambda + s = 1.
    let k = g.len();
    let nv = dim + k + 1;
    let mut aeq = DMatrix::zeros(k + 1, nv);
    let mut beq = DVector::zeros(k + 1);
    for (jr, gj) in g.iter().enumerate() {
        for c in 0..dim {
            aeq[(jr, c)] = gj[c];
        }
        aeq[(jr, dim + jr)] = -1.0;
    }
    for jr in 0..k {
        aeq[(k, dim + jr)] = 1.0;
    }
    aeq[(k, dim + k)] = 1.0;
    beq[k] = 1.0;
    let mut cobj = DVector::zeros(nv);
    for jr in 0..k {
        cobj[dim + jr] = 1.0;
    }
    let mut nonneg = vec![true; nv];
    for i in 0..dim {
        nonneg[i] = false;
    }
    match lp_maximize(&cobj, &aeq, &beq, &nonneg)? {
        LpOutcome::Optimal { value, solution } if value > LP_POSITIVITY_TOL => {
            let xi = DVector::from_fn(dim, |i, _| solution[i]);
            let w = (&null * xi).normalize();
            Ok(TrivialityResult {
                trivial: false,
                witness: Some(w),
                source: Some(TrivialitySource::RayLp),
            })
        }
        LpOutcome::Optimal { .. } => Ok(TrivialityResult {
            trivial: true,
            witness: None,
            source: None,
        }),
        LpOutcome::Infeasible => Err(Error::LpFailure(
            "ray LP infeasible on a cone containing the origin".into(),
        )),
        LpOutcome::Unbounded => Err(Error::LpFailure("normalized ray LP unbounded".into())),
    }
}

/// The set Z = {z : exists aux with L (z,aux) = 0 and f_j . z >= 0 for all j}.
/// `map` has `z_dim + aux_dim` columns ordered (z, aux); each functional lives
/// on the z block only.
#[derive(Debug, Clone)]
pub struct ProjectionSpec {
    pub z_dim: usize,
    pub map: DenseMatrix,
    pub functionals: Vec<Vector>,
}

/// Decides whether the constraints force z = 0 (aux may be anything in the
/// kernel). Returns the flag and, when not forced, a nonzero witness z.
pub fn forced_zero_projection(spec: &ProjectionSpec) -> Result<(bool, Option<Vector>)> {
    let total = spec.map.ncols();
    if spec.z_dim > total {
        return Err(Error::dims(
            format!(">= {} columns", spec.z_dim),
            format!("{}", total),
        ));
    }
    for f in &spec.functionals {
        if f.len() != spec.z_dim {
            return Err(Error::dims(
                format!("functional in R^{}", spec.z_dim),
                format!("{}", f.len()),
            ));
        }
    }

    let null = nullspace_basis(&spec.map, RANK_REL_TOL)?;
    let dim = null.ncols();
    if dim == 0 {
        return Ok((true, None));
    }
    let nz = null.rows(0, spec.z_dim).clone_owned();

    // Functionals in reduced coordinates; drop those vanishing on the
    // subspace and normalize the rest (see cone_is_trivial).
    let g: Vec<Vector> = spec
        .functionals
        .iter()
        .filter_map(|f| {
            let gj: Vector = (f.transpose() * &nz).transpose();
            let scale = f.norm().max(1.0);
            if gj.norm() <= 1e-10 * scale {
                None
            } else {
                let n = gj.norm();
                Some(gj / n)
            }
        })
        .collect();

    // Stage 1: directions with every functional exactly zero.
    let lineality = if g.is_empty() {
        DMatrix::identity(dim, dim)
    } else {
        let gm = DMatrix::from_fn(g.len(), dim, |r, c| g[r][c]);
        nullspace_basis(&gm, RANK_REL_TOL)?
    };
    if lineality.ncols() > 0 {
        let zimg = &nz * &lineality;
        // Pick the lineality direction with the largest z image, if any.
        let mut best: Option<(usize, f64)> = None;
        for c in 0..zimg.ncols() {
            let norm = zimg.column(c).norm();
            if best.map_or(true, |(_, bn)| norm > bn) {
                best = Some((c, norm));
            }
        }
        if let Some((c, norm)) = best {
            if norm > 1e-9 {
                let z = zimg.column(c).clone_owned() / norm;
                return Ok((false, Some(z)));
            }
        }
    }

    if g.is_empty() {
        // No strict directions to explore; z is forced to zero on the
        // complement of the lineality space.
        return Ok((true, None));
    }

    // Stage 2: LP  max sum t_j  s.t.  g_j . xi - t_j = 0, t >= 0,
    // sum t + s = 1, xi free. A positive optimum exhibits f_j . z > 0,
    // hence z != 0.
    let k = g.len();
    let nv = dim + k + 1;
    let mut aeq = DMatrix::zeros(k + 1, nv);
    let mut beq = DVector::zeros(k + 1);
    for (jr, gj) in g.iter().enumerate() {
        for c in 0..dim {
            aeq[(jr, c)] = gj[c];
        }
        aeq[(jr, dim + jr)] = -1.0;
    }
    for jr in 0..k {
        aeq[(k, dim + jr)] = 1.0;
    }
    aeq[(k, dim + k)] = 1.0;
    beq[k] = 1.0;
    let mut cobj = DVector::zeros(nv);
    for jr in 0..k {
        cobj[dim + jr] = 1.0;
    }
    let mut nonneg = vec![true; nv];
    for i in 0..dim {
        nonneg[i] = false;
    }
    match lp_maximize(&cobj, &aeq, &beq, &nonneg)? {
        LpOutcome::Optimal { value, solution } if value > LP_POSITIVITY_TOL => {
            let xi = DVector::from_fn(dim, |i, _| solution[i]);
            let z = &nz * xi;
            let norm = z.norm();
            if norm <= 1e-12 {
                return Err(Error::LpFailure(
                    "positive functional sum with zero z image".into(),
                ));
            }
            Ok((false, Some(z / norm)))
        }
        LpOutcome::Optimal { .. } => Ok((true, None)),
        LpOutcome::Infeasible => Err(Error::LpFailure(
            "projection LP infeasible on a cone containing the origin".into(),
        )),
        LpOutcome::Unbounded => Err(Error::LpFailure("normalized projection LP unbounded".into())),
    }
}
