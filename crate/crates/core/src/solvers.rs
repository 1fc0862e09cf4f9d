//! First-order solvers: primal-dual splitting for the equality-constrained
//! group-norm problem and its Tikhonov-regularized counterpart, a
//! Douglas-Rachford scheme for the minimax dual-certificate problem, an
//! independent optimality-residual verifier, and the empirical stability
//! probe.

use nalgebra::{DMatrix, DVector};

use crate::analysis::AnalysisOperator;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::groups::{self, GroupPartition};
use crate::linalg::{min_norm_solve, pseudoinverse, MinNormSolve, Vector};
use crate::rng::Rng;

/// An inverse problem min ||D* x||_{1,2} s.t. Phi x = y0 with ground truth x0.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub phi: DMatrix<f64>,
    pub d: AnalysisOperator,
    pub part: GroupPartition,
    pub x0: Vector,
    pub y0: Vector,
}

impl ProblemInstance {
    /// Builds an instance; y0 is always computed as Phi x0, never supplied.
    pub fn new(
        phi: DMatrix<f64>,
        d: AnalysisOperator,
        part: GroupPartition,
        x0: Vector,
    ) -> Result<Self> {
        let n = phi.ncols();
        if d.signal_dim() != n || x0.len() != n {
            return Err(Error::dims(
                format!("signal dim {}", n),
                format!("operator {} / x0 {}", d.signal_dim(), x0.len()),
            ));
        }
        if part.p() != d.analysis_dim() {
            return Err(Error::dims(
                format!("analysis dim {}", d.analysis_dim()),
                format!("partition over {}", part.p()),
            ));
        }
        let y0 = &phi * &x0;
        Ok(ProblemInstance {
            phi,
            d,
            part,
            x0,
            y0,
        })
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// KKT residual at which a solve counts as converged.
    pub kkt_tol: f64,
    pub max_iters: usize,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tol: 1e-8,
            max_iters: 200_000,
            check_every: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vector,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub objective: f64,
    pub converged: bool,
    /// Best objective seen at each residual check (non-increasing).
    pub objective_trace: Vec<f64>,
}

/// lambda_max of a symmetric PSD operator by power iteration.
fn power_lambda_max(dim: usize, apply: impl Fn(&Vector) -> Vector, iters: usize) -> f64 {
    let mut rng = Rng::new(0x5eed_0f_9001);
    let mut v = DVector::from_fn(dim, |_, _| rng.next_gaussian());
    let mut lam = 0.0;
    for _ in 0..iters {
        let norm = v.norm();
        if norm < 1e-300 {
            return 0.0;
        }
        v /= norm;
        let av = apply(&v);
        lam = v.dot(&av);
        v = av;
    }
    lam.max(0.0)
}

/// Solves min ||D* x||_{1,2} s.t. Phi x = y0 by primal-dual splitting over
/// the stacked operator (D*, Phi). The regularizer dual is projected onto the
/// per-group unit balls; the equality dual absorbs y0.
pub fn solve_basis_pursuit(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    let (m, n, p) = (inst.m(), inst.n(), inst.d.analysis_dim());
    let phi_t = inst.phi.transpose();
    // ||(D*, Phi)||^2 = lambda_max(D D* + Phi^T Phi)
    let lsq = power_lambda_max(
        n,
        |x| inst.d.synthesize(&inst.d.analyze(x).unwrap()).unwrap() + &phi_t * (&inst.phi * x),
        20,
    );
    let step = 0.99 / lsq.sqrt().max(1e-12);
    let (sigma, tau) = (step, step);

    let mut x = DVector::zeros(n);
    let mut xbar = x.clone();
    let mut q: Vector = DVector::zeros(p);
    let mut u: Vector = DVector::zeros(m);
    let mut best_obj = f64::INFINITY;
    let mut trace = Vec::new();

    for it in 1..=cfg.max_iters {
        // Dual updates.
        q += sigma * inst.d.analyze(&xbar)?;
        project_group_balls(&mut q, &inst.part, 1.0);
        u += sigma * (&inst.phi * &xbar - &inst.y0);
        // Primal update with extrapolation.
        let x_new = &x - tau * (inst.d.synthesize(&q)? + &phi_t * &u);
        xbar = 2.0 * &x_new - &x;
        x = x_new;

        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let dx = inst.d.analyze(&x)?;
            let obj = groups::group_norm(&dx, &inst.part)?;
            best_obj = best_obj.min(obj);
            trace.push(best_obj);
            let r_feas = (&inst.phi * &x - &inst.y0).norm();
            let r_stat = (inst.d.synthesize(&q)? + &phi_t * &u).norm();
            let gap = (obj - q.dot(&dx)).max(0.0);
            let res = r_feas.max(r_stat).max(gap);
            if res <= cfg.kkt_tol {
                return Ok(SolveReport {
                    x,
                    iterations: it,
                    kkt_residual: res,
                    objective: obj,
                    converged: true,
                    objective_trace: trace,
                });
            }
            if it == cfg.max_iters {
                return Ok(SolveReport {
                    x,
                    iterations: it,
                    kkt_residual: res,
                    objective: obj,
                    converged: false,
                    objective_trace: trace,
                });
            }
        }
    }
    unreachable!("loop always returns at max_iters")
}

/// Solves min 1/2 ||Phi x - y||^2 + mu ||D* x||_{1,2} with the same
/// primal-dual engine; the quadratic term enters through its gradient.
pub fn solve_tikhonov(
    phi: &DMatrix<f64>,
    d: &AnalysisOperator,
    part: &GroupPartition,
    y: &Vector,
    mu: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if mu <= 0.0 {
        return Err(Error::invalid("mu must be positive"));
    }
    let n = phi.ncols();
    if y.len() != phi.nrows() {
        return Err(Error::dims(format!("{}", phi.nrows()), format!("{}", y.len())));
    }
    let phi_t = phi.transpose();
    let lphi_sq = power_lambda_max(n, |x| &phi_t * (phi * x), 20);
    let ld_sq = power_lambda_max(n, |x| d.synthesize(&d.analyze(x).unwrap()).unwrap(), 20);
    let norm_d = ld_sq.sqrt().max(1e-12);
    // Convergence needs 1/tau - sigma ||D||^2 >= ||Phi||^2 / 2.
    let sigma = 1.0 / norm_d;
    let tau = 0.99 / (lphi_sq / 2.0 + sigma * ld_sq).max(1e-12);

    let mut x = DVector::zeros(n);
    let mut q: Vector = DVector::zeros(d.analysis_dim());
    let mut best_obj = f64::INFINITY;
    let mut trace = Vec::new();

    for it in 1..=cfg.max_iters {
        let grad = &phi_t * (phi * &x - y);
        let x_new = &x - tau * (&grad + d.synthesize(&q)?);
        q += sigma * d.analyze(&(2.0 * &x_new - &x))?;
        project_group_balls(&mut q, part, mu);
        x = x_new;

        if it % cfg.check_every == 0 || it == cfg.max_iters {
            let dx = d.analyze(&x)?;
            let fit = phi * &x - y;
            let obj = 0.5 * fit.norm_squared() + mu * groups::group_norm(&dx, part)?;
            best_obj = best_obj.min(obj);
            trace.push(best_obj);
            let g = &phi_t * &fit;
            let r_stat = (&g + d.synthesize(&q)?).norm();
            let gap = (mu * groups::group_norm(&dx, part)? - q.dot(&dx)).max(0.0);
            let res = r_stat.max(gap);
            if res <= cfg.kkt_tol || it == cfg.max_iters {
                return Ok(SolveReport {
                    x,
                    iterations: it,
                    kkt_residual: res,
                    objective: obj,
                    converged: res <= cfg.kkt_tol,
                    objective_trace: trace,
                });
            }
        }
    }
    unreachable!("loop always returns at max_iters")
}

/// Projects each group block of `q` onto the ball of the given radius.
fn project_group_balls(q: &mut Vector, part: &GroupPartition, radius: f64) {
    for g in 0..part.len() {
        let norm = part.block_norm(q, g);
        if norm > radius {
            let scale = radius / norm;
            for &i in part.group(g) {
                q[i] *= scale;
            }
        }
    }
}

/// Distance from -Phi^T(Phi x - y) to mu * D applied to the subdifferential
/// of the group norm at D* x. Zero exactly when x solves the Tikhonov
/// problem. Computed per group for the identity operator, otherwise by a
/// projected-gradient least-squares inner problem over the inactive blocks.
pub fn verify_tikhonov_optimality(
    x: &Vector,
    y: &Vector,
    mu: f64,
    phi: &DMatrix<f64>,
    d: &AnalysisOperator,
    part: &GroupPartition,
) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::invalid("mu must be positive"));
    }
    let g = -(phi.transpose() * (phi * x - y));
    let dx = d.analyze(x)?;
    // Blocks below this threshold are treated as inactive; solver outputs
    // carry O(kkt_tol) noise on blocks that are exactly zero at the optimum.
    let athr = 1e-6 * 1.0_f64.max(dx.norm());

    if matches!(d, AnalysisOperator::Identity { .. }) {
        let mut sq = 0.0;
        for gi in 0..part.len() {
            let gj = part.block(&g, gi);
            let norm = part.block_norm(&dx, gi);
            if norm > athr {
                let dir = part.block(&dx, gi) / norm;
                sq += (gj - mu * dir).norm_squared();
            } else {
                let excess = (gj.norm() - mu).max(0.0);
                sq += excess * excess;
            }
        }
        return Ok(sq.sqrt());
    }

    // General D: fix the subgradient on active blocks, optimize over the
    // inactive ones inside their unit balls.
    let dmat = d.materialize()?;
    let mut s_fixed = DVector::zeros(part.p());
    let mut inactive = Vec::new();
    for gi in 0..part.len() {
        let norm = part.block_norm(&dx, gi);
        if norm > athr {
            for &i in part.group(gi) {
                s_fixed[i] = dx[i] / norm;
            }
        } else {
            inactive.push(gi);
        }
    }
    let target = &g - mu * (&dmat * &s_fixed);
    if inactive.is_empty() {
        return Ok(target.norm());
    }
    let cols: Vec<usize> = inactive
        .iter()
        .flat_map(|&gi| part.group(gi).iter().cloned())
        .collect();
    let din = DMatrix::from_fn(dmat.nrows(), cols.len(), |r, c| dmat[(r, cols[c])]);
    let inner_part = {
        let mut groups_c = Vec::new();
        let mut off = 0;
        for &gi in &inactive {
            let len = part.group(gi).len();
            groups_c.push((off..off + len).collect());
            off += len;
        }
        GroupPartition::new(cols.len(), groups_c)?
    };
    let lip = mu * mu * power_lambda_max(cols.len(), |s| din.transpose() * (&din * s), 30).max(1e-12);
    let step = 1.0 / lip;
    let mut s: Vector = DVector::zeros(cols.len());
    let mut prev = f64::INFINITY;
    for _ in 0..20_000 {
        let resid = mu * (&din * &s) - &target;
        let grad = mu * (din.transpose() * &resid);
        s -= step * grad;
        project_group_balls(&mut s, &inner_part, 1.0);
        let val = (mu * (&din * &s) - &target).norm();
        if (prev - val).abs() <= 1e-14 * (1.0 + val) {
            break;
        }
        prev = val;
    }
    Ok((mu * (&din * &s) - &target).norm())
}

/// Output of [`source_coefficient`].
#[derive(Debug, Clone)]
pub struct SourceReport {
    /// Squared minimax inactive-block certificate norm.
    pub rho: f64,
    /// The dual certificate v = z* + e over all analysis coordinates.
    pub v: Vector,
    /// Range coefficients with D v + Phi^T w = 0.
    pub w: Vector,
    /// Affine feasibility plus splitting gap at termination.
    pub residual: f64,
}

/// Solves min max_{J inactive} ||z_J|| over {(z, w) : D(z + e) + Phi^T w = 0,
/// z = 0 on active groups} by Douglas-Rachford splitting between the affine
/// set (closed-form projection through a precomputed pseudoinverse) and the
/// max-of-group-norms term (prox via the l1/l2-ball projection and the
/// Moreau identity).
pub fn source_coefficient(inst: &ProblemInstance) -> Result<SourceReport> {
    let ybar = inst.d.analyze(&inst.x0)?;
    let zero_tol = groups::default_zero_tol(&ybar);
    let (_active, inactive, e) = groups::active_sets(&ybar, &inst.part, zero_tol)?;
    let dmat = inst.d.materialize()?;
    let phi_t = inst.phi.transpose();
    let de = &dmat * &e;
    let r = -&de;

    // Inactive analysis coordinates in compact order plus their partition.
    let cols: Vec<usize> = inactive
        .iter()
        .flat_map(|&gi| inst.part.group(gi).iter().cloned())
        .collect();
    let zc = cols.len();
    let compact_part = {
        let mut gs = Vec::new();
        let mut off = 0;
        for &gi in &inactive {
            let len = inst.part.group(gi).len();
            gs.push((off..off + len).collect());
            off += len;
        }
        GroupPartition::new(zc.max(1), if zc == 0 { vec![vec![0]] } else { gs })
    };

    if zc == 0 {
        // No inactive groups: the certificate is e itself, provided it lies
        // in the range of Phi^T.
        return match min_norm_solve(&phi_t, &r, 1e-8)? {
            MinNormSolve::Feasible(w) => {
                let residual = (&phi_t * &w - &r).norm();
                Ok(SourceReport {
                    rho: 0.0,
                    v: e,
                    w,
                    residual,
                })
            }
            MinNormSolve::Infeasible { residual } => Err(Error::NoCertificate { residual }),
        };
    }
    let compact_part = compact_part?;

    // Stacked affine system M (z, w) = r with M = [D_inactive | Phi^T].
    let m_rows = dmat.nrows();
    let nvar = zc + inst.m();
    let mmat = DMatrix::from_fn(m_rows, nvar, |row, col| {
        if col < zc {
            dmat[(row, cols[col])]
        } else {
            phi_t[(row, col - zc)]
        }
    });
    match min_norm_solve(&mmat, &r, 1e-8)? {
        MinNormSolve::Infeasible { residual } => return Err(Error::NoCertificate { residual }),
        MinNormSolve::Feasible(_) => {}
    }
    let pinv = pseudoinverse(&mmat)?;
    let project = |zeta: &Vector| -> Vector { zeta - &pinv * (&mmat * zeta - &r) };

    // prox of t * max_J ||z_J|| via Moreau: u - t proj_{l1/l2 ball}(u / t).
    let t = 1.0;
    let prox = |zeta: &Vector| -> Result<Vector> {
        let mut out = zeta.clone();
        let zpart = DVector::from_fn(zc, |i, _| zeta[i]);
        let proj = groups::project_l12_ball(&(&zpart / t), 1.0, &compact_part)?;
        for i in 0..zc {
            out[i] = zpart[i] - t * proj[i];
        }
        Ok(out)
    };

    let mut s = project(&DVector::zeros(nvar));
    let mut zeta = s.clone();
    let mut gap = f64::INFINITY;
    for _ in 0..100_000 {
        let xdr = prox(&s)?;
        let ydr = project(&(2.0 * &xdr - &s));
        s += &ydr - &xdr;
        gap = (&xdr - &ydr).norm();
        zeta = ydr;
        if gap <= 1e-11 * (1.0 + zeta.norm()) {
            break;
        }
    }

    let zfull = {
        let mut z = DVector::zeros(inst.part.p());
        for (c, &i) in cols.iter().enumerate() {
            z[i] = zeta[c];
        }
        z
    };
    let v = &zfull + &e;
    let w = DVector::from_fn(inst.m(), |i, _| zeta[zc + i]);
    let affine_res = (&mmat * &zeta - &r).norm();
    let rho = inactive
        .iter()
        .map(|&gi| inst.part.block_norm(&zfull, gi))
        .fold(0.0_f64, f64::max)
        .powi(2);
    Ok(SourceReport {
        rho,
        v,
        w,
        residual: affine_res.max(gap),
    })
}

#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub delta: f64,
    pub mu: f64,
    pub ratio: f64,
    pub direction_id: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub rows: Vec<ProbeRow>,
    /// Max ratio over converged rows.
    pub max_ratio: f64,
}

/// Empirical stability probe: perturbs y0 by delta along random unit
/// directions (worst-case shell ||y - y0|| = delta), solves the Tikhonov
/// problem with mu = c * delta and records ||x - x0|| / delta.
pub fn stability_probe(
    inst: &ProblemInstance,
    c: f64,
    deltas: &[f64],
    dirs_per_delta: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ProbeResult> {
    if c <= 0.0 {
        return Err(Error::invalid("c must be positive"));
    }
    if deltas.iter().any(|&d| d <= 0.0) {
        return Err(Error::invalid("all deltas must be positive"));
    }
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut max_ratio = 0.0_f64;
    for &delta in deltas {
        for dir_id in 0..dirs_per_delta {
            let mut dir = DVector::from_fn(inst.m(), |_, _| rng.next_gaussian());
            let norm = dir.norm();
            if norm < 1e-12 {
                dir[0] = 1.0;
            } else {
                dir /= norm;
            }
            let y = &inst.y0 + delta * dir;
            let mu = c * delta;
            let report = solve_tikhonov(&inst.phi, &inst.d, &inst.part, &y, mu, cfg)?;
            let ratio = (&report.x - &inst.x0).norm() / delta;
            if report.converged {
                max_ratio = max_ratio.max(ratio);
            }
            rows.push(ProbeRow {
                delta,
                mu,
                ratio,
                direction_id: dir_id,
                converged: report.converged,
            });
        }
    }
    Ok(ProbeResult { rows, max_ratio })
}

/// One point of the adversarial perturbation sequence.
#[derive(Debug, Clone)]
pub struct AdversarialPoint {
    pub t: f64,
    pub x: Vector,
    pub y: Vector,
    pub mu: f64,
}

/// Builds the explicit sequence showing that the 4-dimensional two-group
/// fixture is not stably recoverable: perturbed minimizers x_k = x0 + t_k w_k
/// drift along the kernel direction while the observations y_k approach y0
/// much faster. Each returned (x_k, y_k, mu_k) makes x_k exactly optimal for
/// the Tikhonov problem with data (y_k, mu_k).
pub fn adversarial_sequence(a: f64, t_list: &[f64]) -> Result<Vec<AdversarialPoint>> {
    if a <= 0.0 {
        return Err(Error::invalid("a must be positive"));
    }
    let inst = fixtures::unstable_strong_fixture();
    let phi_t = inst.phi.transpose();
    let mut out = Vec::new();
    for &t in t_list {
        let ta = t * a;
        if !(ta > 0.0 && ta < 1.0) {
            return Err(Error::invalid(format!(
                "t = {} out of range: need 0 < t*a < 1",
                t
            )));
        }
        let nrm = (ta * ta + (1.0 - ta) * (1.0 - ta)).sqrt();
        let root = (2.0 * ta - 2.0 * ta * ta).sqrt();
        let ck = a * root / nrm;
        let dk = a * (1.0 - 2.0 * ta) / nrm;
        let w = DVector::from_vec(vec![a, -a, ck, dk]);
        let x = &inst.x0 + t * &w;
        // Gradient certificate at x and its preimage under Phi^T.
        let v = DVector::from_vec(vec![
            ta / nrm,
            (1.0 - ta) / nrm,
            root / nrm,
            (1.0 - 2.0 * ta) / nrm,
        ]);
        let u = match min_norm_solve(&phi_t, &v, 1e-10)? {
            MinNormSolve::Feasible(u) => u,
            MinNormSolve::Infeasible { residual } => {
                return Err(Error::Domain(format!(
                    "certificate not in range of Phi^T (residual {:.3e})",
                    residual
                )))
            }
        };
        let mu = (&inst.phi * (&x - &inst.x0)).norm();
        let y = &inst.phi * &x + mu * u;
        out.push(AdversarialPoint { t, x, y, mu });
    }
    Ok(out)
}
