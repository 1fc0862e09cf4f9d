//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines as they complete.

use std::panic::{catch_unwind, resume_unwind};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use stablecert::analysis::AnalysisOperator;
use stablecert::certify::{self, CertifyConfig, Classification};
use stablecert::fixtures;
use stablecert::groups::{self, GroupPartition};
use stablecert::harness::{self, SweepConfig, SweepMode, SweepRecord};
use stablecert::linalg::{nullspace_basis, DenseMatrix, Vector, RANK_REL_TOL};
use stablecert::polyhedra::{cone_is_trivial, lp_maximize, ConeSpec, LpOutcome};
use stablecert::rng::Rng;
use stablecert::solvers::{self, ProblemInstance, SolverConfig};

fn criterion<F: FnOnce() + std::panic::UnwindSafe>(n: usize, desc: &str, f: F) {
    let start = Instant::now();
    let outcome = catch_unwind(f);
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(()) => println!("criterion {n:2}: PASS ({secs:6.1}s) {desc}"),
        Err(e) => {
            println!("criterion {n:2}: FAIL ({secs:6.1}s) {desc}");
            resume_unwind(e);
        }
    }
}

fn collinear(w: &[f64], target: &[f64]) -> bool {
    let w = DVector::from_column_slice(w);
    let t = DVector::from_column_slice(target).normalize();
    let proj = &t * w.dot(&t);
    (w - proj).norm() <= 1e-6
}

#[test]
fn criterion_01_stable_nonsharp_fixture() {
    criterion(1, "overlap fixture: stable recovery without sharpness", || {
        let start = Instant::now();
        let inst = fixtures::stable_nonsharp_fixture();
        let d = certify::diagnose(&inst, &CertifyConfig::default());
        assert!(d.errors.is_empty(), "errors: {:?}", d.errors);
        assert!(d.recovered);
        assert!(d.unique);
        assert!(!d.sharp);
        let wit = d.sharp_witness.as_ref().expect("nonsharp needs a witness");
        assert!(collinear(wit, &[1.0, -1.0, 0.0]), "witness {wit:?}");
        assert!(d.certificate_residual.unwrap() <= 1e-8);
        assert!(d.rho.unwrap().abs() <= 1e-6, "rho {:?}", d.rho);
        assert!(d.nsc);
        assert!(!d.restricted_injectivity);
        assert!(d.stable_certified);
        assert_eq!(d.classification, Classification::StrongNonsharpStable);
        assert!(start.elapsed().as_secs_f64() < 5.0);
    });
}

#[test]
fn criterion_02_unstable_strong_fixture() {
    criterion(2, "kernel-aligned fixture: strong minimum, unstable", || {
        let start = Instant::now();
        let inst = fixtures::unstable_strong_fixture();
        let d = certify::diagnose(&inst, &CertifyConfig::default());
        assert!(d.errors.is_empty(), "errors: {:?}", d.errors);
        assert!(d.recovered);
        assert!(d.unique);
        assert!(!d.sharp);
        assert!((d.rho.unwrap() - 1.0).abs() <= 1e-6, "rho {:?}", d.rho);
        assert!(!d.stable_certified);

        let points = solvers::adversarial_sequence(0.5, &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        let mut prev_ratio = 0.0;
        let mut last_ratio = 0.0;
        for pt in &points {
            let res = solvers::verify_tikhonov_optimality(
                &pt.x, &pt.y, pt.mu, &inst.phi, &inst.d, &inst.part,
            )
            .unwrap();
            assert!(res <= 1e-8, "optimality residual {res:e} at t={}", pt.t);
            let ratio = (&pt.x - &inst.x0).norm() / (&pt.y - &inst.y0).norm();
            assert!(ratio > prev_ratio, "ratios not strictly increasing");
            prev_ratio = ratio;
            last_ratio = ratio;
        }
        assert!(last_ratio > 100.0, "final amplification {last_ratio}");
        assert!(start.elapsed().as_secs_f64() < 10.0);
    });
}

#[test]
fn criterion_03_parametric_fixture_matches_closed_forms() {
    criterion(3, "four-group family agrees with hand-evaluated conditions", || {
        let start = Instant::now();
        let a = [1.0, 0.0, 1.0, 0.0, 1.0];
        for (b, expected) in [
            ([1.0f64, 0.0, -1.0, 0.0, 1.0], Classification::StrongNonsharpStable),
            ([1.0, 0.0, 1.0, 0.0, 1.0], Classification::Sharp),
        ] {
            // Hand evaluation. Sharp iff b4, b6, b8 share a strict sign:
            // the kernel-cone reduction leaves s >= 0 with
            // b4 s1 + b6 s3 + b8 s5 = 0, which forces s = 0 exactly then.
            let (b4, b6, b8) = (b[0], b[2], b[4]);
            let same_sign = b4 * b6 > 0.0 && b6 * b8 > 0.0;
            // Stability condition: the 2x3 matrix [a; b] over the three
            // constrained groups has trivial nonnegative kernel, and some
            // pair of b's has opposite signs.
            let pair = DMatrix::from_row_slice(2, 3, &[a[0], a[2], a[4], b4, b6, b8]);
            let mixed = (b4 * b6).min(b6 * b8).min(b8 * b4) < 0.0;
            let nonneg_kernel_trivial = {
                // sample search over the simplex is exact enough at dim 3
                let mut found = false;
                let mut rng = Rng::new(33);
                for _ in 0..200_000 {
                    let s = DVector::from_fn(3, |_, _| rng.next_uniform());
                    let s = &s / s.norm();
                    if (&pair * &s).norm() <= 1e-8 {
                        found = true;
                        break;
                    }
                }
                !found
            };
            let hand_sharp = same_sign;
            let hand_stable_nonsharp = !same_sign && nonneg_kernel_trivial && mixed;

            let inst = fixtures::parametric_four_group_fixture(&a, &b);
            let d = certify::diagnose(&inst, &CertifyConfig::default());
            assert!(d.errors.is_empty(), "errors: {:?}", d.errors);
            assert_eq!(d.classification, expected, "b = {b:?}");
            assert_eq!(d.sharp, hand_sharp, "b = {b:?}");
            if hand_stable_nonsharp {
                assert!(d.unique && d.stable_certified && !d.sharp);
            }
        }
        assert!(start.elapsed().as_secs_f64() < 5.0);
    });
}

#[test]
fn criterion_04_tikhonov_closed_form() {
    criterion(4, "Tikhonov solver matches the closed-form solution", || {
        let inst = fixtures::stable_nonsharp_fixture();
        let y = DVector::from_vec(vec![2.0, 2.0]);
        let mu = 0.1;
        let rep = solvers::solve_tikhonov(
            &inst.phi,
            &inst.d,
            &inst.part,
            &y,
            mu,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.converged);
        let expected = 0.25 * (y[0] + y[1] - mu / 2.0_f64.sqrt());
        assert!((rep.x[0] - expected).abs() <= 1e-6, "x1 {}", rep.x[0]);
        assert!((rep.x[1] - expected).abs() <= 1e-6, "x2 {}", rep.x[1]);
        assert!(rep.x[2].abs() <= 1e-6, "x3 {}", rep.x[2]);
    });
}

#[test]
fn criterion_05_stability_probe_bounded() {
    criterion(5, "stability probe stays bounded with no divergence trend", || {
        let inst = fixtures::stable_nonsharp_fixture();
        let deltas = [1e-1, 1e-2, 1e-3, 1e-4];
        let result = solvers::stability_probe(
            &inst,
            1.0,
            &deltas,
            20,
            7,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(result.rows.iter().all(|r| r.converged));
        assert!(result.max_ratio <= 10.0, "max ratio {}", result.max_ratio);
        let per_delta: Vec<f64> = deltas
            .iter()
            .map(|&d| {
                result
                    .rows
                    .iter()
                    .filter(|r| r.delta == d)
                    .map(|r| r.ratio)
                    .fold(0.0, f64::max)
            })
            .collect();
        for pair in per_delta.windows(2) {
            let (lo, hi) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            assert!(hi < 2.0 * lo, "ratio jump {lo} -> {hi}");
        }
    });
}

// --- criterion 6 helpers -------------------------------------------------

fn random_search_nonzero(spec: &ConeSpec, samples: usize) -> Option<Vector> {
    let n = spec.ambient_dim;
    let mut rows: Vec<Vector> = Vec::new();
    for r in 0..spec.equalities.nrows() {
        rows.push(spec.equalities.row(r).transpose());
    }
    for (b, d) in spec.ray_constraints.iter().chain(&spec.line_constraints) {
        let dv = d / d.norm();
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
    let null = nullspace_basis(&base, RANK_REL_TOL).unwrap();
    if null.ncols() == 0 {
        return None;
    }
    let mut rng = Rng::new(0xacce97);
    for _ in 0..samples {
        let xi = DVector::from_fn(null.ncols(), |_, _| rng.next_uniform() * 2.0 - 1.0);
        let w = &null * xi;
        if w.norm() < 1e-9 {
            continue;
        }
        let w = w.normalize();
        if spec.residual(&w) <= 1e-8 {
            return Some(w);
        }
    }
    None
}

/// Brute-force LP oracle: best objective over all feasible basic solutions.
fn lp_vertex_oracle(c: &Vector, a: &DenseMatrix, b: &Vector) -> Option<f64> {
    fn rec(
        start: usize,
        need: usize,
        n: usize,
        idx: &mut Vec<usize>,
        a: &DenseMatrix,
        b: &Vector,
        c: &Vector,
        best: &mut Option<f64>,
    ) {
        if need == 0 {
            let m = a.nrows();
            let sub = DMatrix::from_fn(m, idx.len(), |r, j| a[(r, idx[j])]);
            if let Ok(sol) = sub.clone().svd(true, true).solve(b, 1e-10) {
                let res = (&sub * &sol - b).amax();
                if res < 1e-8 && sol.iter().all(|&x| x >= -1e-9) {
                    let val: f64 = idx.iter().enumerate().map(|(j, &i)| c[i] * sol[j]).sum();
                    if best.map_or(true, |bv| val > bv) {
                        *best = Some(val);
                    }
                }
            }
            return;
        }
        for i in start..n {
            idx.push(i);
            rec(i + 1, need - 1, n, idx, a, b, c, best);
            idx.pop();
        }
    }
    let (m, n) = a.shape();
    let mut best = if b.amax() < 1e-12 { Some(0.0) } else { None };
    let mut idx = Vec::new();
    for size in 1..=m.min(n) {
        rec(0, size, n, &mut idx, a, b, c, &mut best);
    }
    best
}

#[test]
fn criterion_06_cone_and_lp_oracles() {
    criterion(6, "cone tests and simplex agree with brute-force oracles", || {
        // 100 random cones, ambient dimension <= 6.
        let mut rng = Rng::new(0xc0de);
        let coeff = |r: &mut Rng| (r.next_uniform() * 4.0 - 2.0).round() / 2.0;
        for _ in 0..100 {
            let n = 2 + rng.next_below(5); // 2..6
            let neq = rng.next_below(3);
            let eq = DMatrix::from_fn(neq, n, |_, _| coeff(&mut rng));
            let nray = rng.next_below(3);
            let mut rays = Vec::new();
            for _ in 0..nray {
                let bs = 1 + rng.next_below(2);
                let bmat = DMatrix::from_fn(bs, n, |_, _| coeff(&mut rng));
                let mut d = DVector::from_fn(bs, |_, _| rng.next_uniform() * 2.0 - 1.0);
                if d.norm() < 1e-6 {
                    d[0] = 1.0;
                }
                rays.push((bmat, d.normalize()));
            }
            let spec = ConeSpec {
                ambient_dim: n,
                equalities: eq,
                ray_constraints: rays,
                line_constraints: vec![],
            };
            let res = cone_is_trivial(&spec).unwrap();
            if let Some(w) = &res.witness {
                assert!(spec.residual(w) <= 1e-8, "witness violates constraints");
                assert!(!res.trivial);
            }
            if let Some(found) = random_search_nonzero(&spec, 10_000) {
                assert!(
                    !res.trivial,
                    "sampler found {found:?} but the test declared triviality"
                );
            }
        }

        // 50 random bounded LPs vs vertex enumeration.
        let mut checked = 0;
        for _ in 0..200 {
            let n = 3 + rng.next_below(4);
            let m = 1 + rng.next_below(3);
            let a = DMatrix::from_fn(m, n, |_, _| coeff(&mut rng));
            let xf = DVector::from_fn(n, |_, _| rng.next_uniform());
            let b = &a * &xf; // feasible by construction
            let c = DVector::from_fn(n, |_, _| rng.next_uniform() * 2.0 - 1.0);
            match lp_maximize(&c, &a, &b, &vec![true; n]).unwrap() {
                LpOutcome::Optimal { value, .. } => {
                    let ov = lp_vertex_oracle(&c, &a, &b).expect("oracle missed a vertex");
                    assert!(
                        (value - ov).abs() <= 1e-9 * (1.0 + ov.abs()),
                        "simplex {value} vs oracle {ov}"
                    );
                    checked += 1;
                }
                LpOutcome::Unbounded => {}
                LpOutcome::Infeasible => panic!("constructed-feasible LP declared infeasible"),
            }
            if checked >= 50 {
                break;
            }
        }
        assert!(checked >= 50, "only {checked} bounded LPs checked");
    });
}

#[test]
fn criterion_07_solver_properties() {
    criterion(7, "solver invariants on 50 random group-sparsity instances", || {
        let cfg = SolverConfig::default();
        let mut rng = Rng::new(0x50f7);
        for trial in 0..50u64 {
            let seed = Rng::derive_seed(0xbead, 0, trial);
            let gsize = 1 + rng.next_below(4);
            let ngroups = 2 + rng.next_below(60 / gsize - 1);
            let n = gsize * ngroups;
            let m = (1 + rng.next_below(40)).min(n);
            let part = GroupPartition::contiguous(n, gsize).unwrap();
            let active = 1 + rng.next_below(ngroups.min(m.max(2) / 2));
            let phi = harness::gen_gaussian_matrix(m, n, seed);
            let x0 = harness::gen_group_sparse_signal(&part, active, seed ^ 1).unwrap();
            let inst = ProblemInstance::new(
                phi.clone(),
                AnalysisOperator::identity(n),
                part.clone(),
                x0.clone(),
            )
            .unwrap();

            let rep = solvers::solve_basis_pursuit(&inst, &cfg).unwrap();
            if rep.converged {
                assert!((&phi * &rep.x - &inst.y0).norm() <= 1e-8);
                let truth = groups::group_norm(&x0, &part).unwrap();
                assert!(rep.objective <= truth + 1e-6, "{} > {}", rep.objective, truth);
            }

            let mu = 0.1 * (1.0 + inst.y0.norm());
            let trep =
                solvers::solve_tikhonov(&phi, &inst.d, &part, &inst.y0, mu, &cfg).unwrap();
            if trep.converged {
                assert!(trep.kkt_residual <= 1e-8);
                let res = solvers::verify_tikhonov_optimality(
                    &trep.x, &inst.y0, mu, &phi, &inst.d, &part,
                )
                .unwrap();
                assert!(res <= 1e-6 * (1.0 + inst.y0.norm()), "verify {res:e}");
            }

            // Prox check: central finite differences of the Moreau envelope
            // of tau * ||.||_{1,2} match its gradient u - prox(u).
            let tau = 0.5 + rng.next_uniform();
            let u = DVector::from_fn(n, |_, _| rng.next_gaussian());
            let envelope = |v: &Vector| {
                let p = groups::group_prox(v, tau, &part).unwrap();
                tau * groups::group_norm(&p, &part).unwrap() + 0.5 * (&p - v).norm_squared()
            };
            let grad = &u - &groups::group_prox(&u, tau, &part).unwrap();
            let h = 1e-4;
            for _ in 0..3 {
                let i = rng.next_below(n);
                let mut up = u.clone();
                let mut um = u.clone();
                up[i] += h;
                um[i] -= h;
                let fd = (envelope(&up) - envelope(&um)) / (2.0 * h);
                assert!((fd - grad[i]).abs() <= 1e-6, "prox fd {} vs {}", fd, grad[i]);
            }

            // Hessian-block check against finite differences of y/||y||.
            let dim = 1 + rng.next_below(4);
            let ybar = DVector::from_fn(dim, |_, _| rng.next_gaussian() + 2.0);
            let hess = groups::hessian_block(&ybar).unwrap();
            let h2 = 1e-5;
            for i in 0..dim {
                let mut yp = ybar.clone();
                let mut ym = ybar.clone();
                yp[i] += h2;
                ym[i] -= h2;
                let fd = (yp.normalize() - ym.normalize()) / (2.0 * h2);
                for r in 0..dim {
                    assert!(
                        (fd[r] - hess[(r, i)]).abs() <= 1e-6,
                        "hessian fd {} vs {}",
                        fd[r],
                        hess[(r, i)]
                    );
                }
            }
        }
    });
}

// --- criteria 8-10: desk sweeps, shared so the determinism check reruns
// each configuration exactly once -----------------------------------------

fn group_sweep_config() -> SweepConfig {
    SweepConfig {
        mode: SweepMode::GroupSparsity,
        n: 200,
        group_count: 20,
        active: 4,
        n1: 0,
        n2: 0,
        blocks: 0,
        m_list: (40..=200).step_by(10).collect(),
        trials: 20,
        kkt_tol: 1e-6,
        max_iters: 50_000,
        theta: 0.99,
        seed: 1,
        record_timings: false,
    }
}

fn tv_sweep_config() -> SweepConfig {
    SweepConfig {
        mode: SweepMode::TotalVariation,
        n: 0,
        group_count: 0,
        active: 0,
        n1: 12,
        n2: 12,
        blocks: 6,
        m_list: (40..=120).step_by(10).collect(),
        trials: 10,
        kkt_tol: 1e-6,
        max_iters: 200_000,
        // Matches the rho > 0.95 band used to classify non-sharp solutions
        // in phase-transition experiments: ||v_J|| >= sqrt(0.95).
        theta: 0.9747,
        seed: 2024,
        record_timings: false,
    }
}

fn run_to_bytes(cfg: &SweepConfig) -> (Vec<SweepRecord>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let records = harness::run_sweep(cfg, Some(&path)).unwrap();
    (records, std::fs::read(&path).unwrap())
}

fn group_sweep() -> &'static (Vec<SweepRecord>, Vec<u8>) {
    static CACHE: OnceLock<(Vec<SweepRecord>, Vec<u8>)> = OnceLock::new();
    CACHE.get_or_init(|| run_to_bytes(&group_sweep_config()))
}

fn tv_sweep() -> &'static (Vec<SweepRecord>, Vec<u8>) {
    static CACHE: OnceLock<(Vec<SweepRecord>, Vec<u8>)> = OnceLock::new();
    CACHE.get_or_init(|| run_to_bytes(&tv_sweep_config()))
}

fn check_ordering_invariants(records: &[SweepRecord]) {
    for r in records {
        assert!(r.sharp <= r.recovered, "sharp > recovered at m={}", r.m);
        assert!(
            r.sharp + r.strong_nonsharp <= r.recovered,
            "classified beyond recovered at m={}",
            r.m
        );
        assert!(
            r.stable_certified_nonsharp <= r.strong_nonsharp,
            "certified > strong at m={}",
            r.m
        );
    }
}

#[test]
fn criterion_08_group_sweep_shape() {
    criterion(8, "group-sparsity phase transition has the expected shape", || {
        let (records, _) = group_sweep();
        let trials = records[0].trials;
        assert_eq!(records.first().unwrap().recovered, 0, "recovery at m=40");
        let last = records.last().unwrap();
        assert_eq!(last.m, 200);
        assert_eq!(last.recovered, trials, "incomplete recovery at m=200");
        assert_eq!(last.recovered, last.sharp, "non-sharp recovery at m=200");
        // Non-decreasing up to single-step dips of <= 10% of trials.
        let dip = (trials as f64 * 0.10).ceil() as usize;
        for w in records.windows(2) {
            assert!(
                w[1].recovered + dip >= w[0].recovered,
                "recovery dropped {} -> {} at m={}",
                w[0].recovered,
                w[1].recovered,
                w[1].m
            );
        }
        check_ordering_invariants(records);
    });
}

#[test]
fn criterion_09_tv_sweep_shape() {
    criterion(9, "TV phase transition shows a strong-nonsharp regime", || {
        let (records, _) = tv_sweep();
        check_ordering_invariants(records);
        let interior = &records[1..records.len() - 1];
        assert!(
            interior.iter().any(|r| r.strong_nonsharp > 0),
            "no strong-nonsharp instances at intermediate m: {records:?}"
        );
    });
}

#[test]
fn criterion_10_sweeps_are_deterministic() {
    criterion(10, "repeating both sweeps yields byte-identical CSVs", || {
        let (_, group_bytes) = group_sweep();
        let (_, group_again) = run_to_bytes(&group_sweep_config());
        assert_eq!(group_bytes, &group_again, "group sweep CSV differs");
        let (_, tv_bytes) = tv_sweep();
        let (_, tv_again) = run_to_bytes(&tv_sweep_config());
        assert_eq!(tv_bytes, &tv_again, "TV sweep CSV differs");
    });
}
