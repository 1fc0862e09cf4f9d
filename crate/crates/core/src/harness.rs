//! Experiment harness: deterministic generators, phase-transition sweeps
//! with CSV/SVG output, and file-format plumbing for the CLI.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisOperator;
use crate::certify::{self, CertifyConfig, Classification, Diagnosis};
use crate::error::{Error, Result};
use crate::groups::GroupPartition;
use crate::linalg::Vector;
use crate::rng::Rng;
use crate::solvers::{ProblemInstance, SolverConfig};

/// i.i.d. standard normal matrix; same seed gives a bit-identical matrix.
pub fn gen_gaussian_matrix(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = Rng::new(seed);
    // Row-major fill so the shape, not the storage order, defines the stream.
    let mut data = vec![0.0; m * n];
    for v in data.iter_mut() {
        *v = rng.next_gaussian();
    }
    DMatrix::from_fn(m, n, |r, c| data[r * n + c])
}

/// Signal with exactly `active` uniformly chosen nonzero groups filled with
/// standard normal entries.
pub fn gen_group_sparse_signal(part: &GroupPartition, active: usize, seed: u64) -> Result<Vector> {
    if active > part.len() {
        return Err(Error::invalid(format!(
            "active {} exceeds group count {}",
            active,
            part.len()
        )));
    }
    let mut rng = Rng::new(seed);
    // Partial Fisher-Yates over group ids.
    let mut ids: Vec<usize> = (0..part.len()).collect();
    for i in 0..active {
        let j = i + rng.next_below(ids.len() - i);
        ids.swap(i, j);
    }
    let mut x = DVector::zeros(part.p());
    for &g in &ids[..active] {
        for &i in part.group(g) {
            x[i] = rng.next_gaussian();
        }
        // A sampled block could be numerically zero only with probability 0;
        // regenerate defensively so the active count is exact.
        if part.block_norm(&x, g) == 0.0 {
            for &i in part.group(g) {
                x[i] = 1.0;
            }
        }
    }
    Ok(x)
}

/// Piecewise-constant image: a full-frame base block plus `blocks - 1`
/// random axis-aligned rectangles of constant intensity. Returns the image
/// and the number of nonzero gradient groups (its TV group sparsity).
pub fn gen_piecewise_constant_image(
    n1: usize,
    n2: usize,
    blocks: usize,
    seed: u64,
) -> Result<(Vector, usize)> {
    if blocks < 1 {
        return Err(Error::invalid("blocks must be >= 1"));
    }
    let mut rng = Rng::new(seed);
    let mut img = DVector::from_element(n1 * n2, rng.next_uniform());
    for _ in 1..blocks {
        let i0 = rng.next_below(n1);
        let i1 = i0 + 1 + rng.next_below(n1 - i0);
        let j0 = rng.next_below(n2);
        let j1 = j0 + 1 + rng.next_below(n2 - j0);
        let val = rng.next_uniform();
        for i in i0..i1 {
            for j in j0..j1 {
                img[i * n2 + j] = val;
            }
        }
    }
    let d = AnalysisOperator::gradient2d(n1, n2);
    let grad = d.analyze(&img)?;
    let part = d.natural_partition()?;
    let sparsity = (0..part.len())
        .filter(|&g| part.block_norm(&grad, g) > 0.0)
        .count();
    Ok((img, sparsity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    GroupSparsity,
    TotalVariation,
}

fn default_n() -> usize {
    200
}
fn default_group_count() -> usize {
    20
}
fn default_active() -> usize {
    4
}
fn default_side() -> usize {
    12
}
fn default_blocks() -> usize {
    3
}
fn default_trials() -> usize {
    20
}
fn default_kkt_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    50_000
}
fn default_theta() -> f64 {
    certify::DEFAULT_THETA
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Signal dimension (group mode).
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_group_count")]
    pub group_count: usize,
    /// Active (nonzero) groups per trial (group mode).
    #[serde(default = "default_active")]
    pub active: usize,
    /// Image height / width (total-variation mode).
    #[serde(default = "default_side")]
    pub n1: usize,
    #[serde(default = "default_side")]
    pub n2: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    pub m_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub seed: u64,
    /// Timing columns make CSVs non-reproducible; off by default.
    #[serde(default)]
    pub record_timings: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.m_list.is_empty() || self.m_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("m_list must be nonempty and strictly increasing"));
        }
        match self.mode {
            SweepMode::GroupSparsity => {
                if self.group_count == 0 || self.n % self.group_count != 0 {
                    return Err(Error::invalid("n must be a positive multiple of group_count"));
                }
                if self.active > self.group_count {
                    return Err(Error::invalid("active exceeds group_count"));
                }
            }
            SweepMode::TotalVariation => {
                if self.n1 == 0 || self.n2 == 0 || self.blocks == 0 {
                    return Err(Error::invalid("n1, n2, blocks must be positive"));
                }
            }
        }
        Ok(())
    }

    fn certify_config(&self) -> CertifyConfig {
        CertifyConfig {
            theta: self.theta,
            solver: SolverConfig {
                kkt_tol: self.kkt_tol,
                max_iters: self.max_iters,
                ..SolverConfig::default()
            },
            ..CertifyConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRecord {
    pub m: usize,
    pub trials: usize,
    pub recovered: usize,
    pub sharp: usize,
    pub strong_nonsharp: usize,
    pub stable_certified_nonsharp: usize,
    pub failed: usize,
    pub mean_solve_ms: f64,
    pub mean_certify_ms: f64,
}

impl SweepRecord {
    fn assert_counts(&self) {
        assert!(self.sharp + self.strong_nonsharp <= self.recovered);
        assert!(self.stable_certified_nonsharp <= self.strong_nonsharp);
    }
}

fn trial_instance(cfg: &SweepConfig, m: usize, trial: usize) -> Result<ProblemInstance> {
    let seed = Rng::derive_seed(cfg.seed, m as u64, trial as u64);
    match cfg.mode {
        SweepMode::GroupSparsity => {
            let phi = gen_gaussian_matrix(m, cfg.n, seed);
            let part = GroupPartition::contiguous(cfg.n, cfg.n / cfg.group_count)?;
            let x0 = gen_group_sparse_signal(&part, cfg.active, seed.wrapping_add(1))?;
            ProblemInstance::new(phi, AnalysisOperator::identity(cfg.n), part, x0)
        }
        SweepMode::TotalVariation => {
            let n = cfg.n1 * cfg.n2;
            let phi = gen_gaussian_matrix(m, n, seed);
            let (x0, _sparsity) =
                gen_piecewise_constant_image(cfg.n1, cfg.n2, cfg.blocks, seed.wrapping_add(1))?;
            let d = AnalysisOperator::gradient2d(cfg.n1, cfg.n2);
            let part = d.natural_partition()?;
            ProblemInstance::new(phi, d, part, x0)
        }
    }
}

fn aggregate(m: usize, diags: &[Option<Diagnosis>]) -> SweepRecord {
    let mut rec = SweepRecord {
        m,
        trials: diags.len(),
        recovered: 0,
        sharp: 0,
        strong_nonsharp: 0,
        stable_certified_nonsharp: 0,
        failed: 0,
        mean_solve_ms: 0.0,
        mean_certify_ms: 0.0,
    };
    let mut solve_ms = 0.0;
    let mut certify_ms = 0.0;
    for d in diags {
        let Some(d) = d else {
            rec.failed += 1;
            continue;
        };
        solve_ms += d.solve_ms;
        certify_ms += d.certify_ms;
        if !d.errors.is_empty() {
            rec.failed += 1;
        }
        if d.recovered {
            rec.recovered += 1;
        }
        match d.classification {
            Classification::Sharp => rec.sharp += 1,
            Classification::StrongNonsharpStable => {
                rec.strong_nonsharp += 1;
                rec.stable_certified_nonsharp += 1;
            }
            Classification::StrongNonsharpUncertified => rec.strong_nonsharp += 1,
            _ => {}
        }
    }
    let n = diags.len().max(1) as f64;
    rec.mean_solve_ms = solve_ms / n;
    rec.mean_certify_ms = certify_ms / n;
    rec.assert_counts();
    rec
}

fn csv_header(record_timings: bool) -> String {
    let base = "m,trials,recovered,sharp,strong_nonsharp,stable_certified_nonsharp,failed";
    if record_timings {
        format!("{base},mean_solve_ms,mean_certify_ms\n")
    } else {
        format!("{base}\n")
    }
}

fn csv_row(rec: &SweepRecord, record_timings: bool) -> String {
    let base = format!(
        "{},{},{},{},{},{},{}",
        rec.m,
        rec.trials,
        rec.recovered,
        rec.sharp,
        rec.strong_nonsharp,
        rec.stable_certified_nonsharp,
        rec.failed
    );
    if record_timings {
        format!(
            "{base},{:.3},{:.3}\n",
            rec.mean_solve_ms, rec.mean_certify_ms
        )
    } else {
        format!("{base}\n")
    }
}

/// Runs the sweep: for each m, `trials` independent (Phi, x0) pairs with
/// per-trial derived seeds, diagnosed in parallel; rows are appended to the
/// CSV as each m completes so a crash loses at most one row.
pub fn run_sweep(cfg: &SweepConfig, csv_path: Option<&Path>) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let ccfg = cfg.certify_config();
    if let Some(path) = csv_path {
        fs::write(path, csv_header(cfg.record_timings))?;
    }
    let mut records = Vec::new();
    for &m in &cfg.m_list {
        let diags: Vec<Option<Diagnosis>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| match trial_instance(cfg, m, trial) {
                Ok(inst) => Some(certify::diagnose(&inst, &ccfg)),
                Err(_) => None,
            })
            .collect();
        let mut rec = aggregate(m, &diags);
        if !cfg.record_timings {
            rec.mean_solve_ms = 0.0;
            rec.mean_certify_ms = 0.0;
        }
        if let Some(path) = csv_path {
            let mut f = fs::OpenOptions::new().append(true).open(path)?;
            f.write_all(csv_row(&rec, cfg.record_timings).as_bytes())?;
        }
        records.push(rec);
    }
    Ok(records)
}

/// Reads sweep records back from a CSV produced by [`run_sweep`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 7 {
            return Err(Error::Parse(format!("csv row {} too short", i + 1)));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("csv row {}: {e}", i + 1)))
        };
        out.push(SweepRecord {
            m: parse(f[0])?,
            trials: parse(f[1])?,
            recovered: parse(f[2])?,
            sharp: parse(f[3])?,
            strong_nonsharp: parse(f[4])?,
            stable_certified_nonsharp: parse(f[5])?,
            failed: parse(f[6])?,
            mean_solve_ms: f.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.0),
            mean_certify_ms: f.get(8).and_then(|s| s.parse().ok()).unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Renders recovery proportions against m as an SVG with four polylines:
/// recovered (green), sharp (blue), strong non-sharp (red), certified-stable
/// non-sharp (orange).
pub fn emit_plot(records: &[SweepRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no records to plot"));
    }
    let (w, h) = (640.0, 480.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 20.0, 50.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let m_min = records.first().unwrap().m as f64;
    let m_max = records.last().unwrap().m as f64;
    let span = (m_max - m_min).max(1.0);
    let xmap = |m: usize| ml + (m as f64 - m_min) / span * pw;
    let ymap = |p: f64| mt + (1.0 - p) * ph;

    let series: [(&str, &str, Box<dyn Fn(&SweepRecord) -> f64>); 4] = [
        ("recovered", "green", Box::new(|r| r.recovered as f64 / r.trials as f64)),
        ("sharp", "blue", Box::new(|r| r.sharp as f64 / r.trials as f64)),
        (
            "strong non-sharp",
            "red",
            Box::new(|r| r.strong_nonsharp as f64 / r.trials as f64),
        ),
        (
            "certified stable non-sharp",
            "orange",
            Box::new(|r| r.stable_certified_nonsharp as f64 / r.trials as f64),
        ),
    ];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = ymap(tick);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ml}\" y2=\"{y}\" stroke=\"black\"/>\n",
            ml - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{tick}</text>\n",
            ml - 8.0,
            y + 4.0
        ));
    }
    for rec in records {
        let x = xmap(rec.m);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{0}\" x2=\"{x}\" y2=\"{1}\" stroke=\"black\"/>\n",
            mt + ph,
            mt + ph + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            mt + ph + 18.0,
            rec.m
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">m</text>\n",
        ml + pw / 2.0,
        h - 12.0
    ));
    for (si, (name, color, f)) in series.iter().enumerate() {
        let pts: Vec<String> = records
            .iter()
            .map(|r| format!("{:.2},{:.2}", xmap(r.m), ymap(f(r))))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
        let ly = mt + 16.0 + 16.0 * si as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ml + 10.0,
            ml + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{name}</text>\n",
            ml + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}

/// JSON description of an instance; y0 is always recomputed from Phi and x0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub phi: Vec<Vec<f64>>,
    pub d: AnalysisOperator,
    /// 1-based coordinate indices per group; omitted means the operator's
    /// natural grouping.
    #[serde(default)]
    pub groups: Option<Vec<Vec<usize>>>,
    pub x0: Vec<f64>,
}

impl InstanceSpec {
    pub fn to_instance(&self) -> Result<ProblemInstance> {
        let m = self.phi.len();
        let n = self.phi.first().map(|r| r.len()).unwrap_or(0);
        if n == 0 || self.phi.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("phi must be a nonempty rectangular matrix"));
        }
        let phi = DMatrix::from_fn(m, n, |r, c| self.phi[r][c]);
        let part = match &self.groups {
            Some(gs) => {
                let mut zero_based = Vec::new();
                for g in gs {
                    let mut row = Vec::new();
                    for &i in g {
                        if i == 0 {
                            return Err(Error::invalid("group indices are 1-based"));
                        }
                        row.push(i - 1);
                    }
                    zero_based.push(row);
                }
                GroupPartition::new(self.d.analysis_dim(), zero_based)?
            }
            None => self.d.natural_partition()?,
        };
        ProblemInstance::new(phi, self.d.clone(), part, DVector::from_vec(self.x0.clone()))
    }
}

/// Loads an instance description from JSON.
pub fn load_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path)?;
    let spec: InstanceSpec =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{e}")))?;
    spec.to_instance()
}

/// Parses an ASCII "P2" PGM image; intensities are scaled to [0, 1].
pub fn load_pgm(path: &Path) -> Result<(usize, usize, Vector)> {
    let text = fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter();
    if tokens.next().as_deref() != Some("P2") {
        return Err(Error::Parse("expected ASCII PGM magic P2".into()));
    }
    let mut next_num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Parse(format!("missing {what}")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
    };
    let width = next_num("width")?;
    let height = next_num("height")?;
    let maxval = next_num("maxval")?;
    if width == 0 || height == 0 || maxval == 0 {
        return Err(Error::Parse("degenerate PGM header".into()));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        pixels.push(next_num("pixel")? as f64 / maxval as f64);
    }
    Ok((height, width, DVector::from_vec(pixels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups;

    #[test]
    fn gaussian_matrix_deterministic_and_normal() {
        let a = gen_gaussian_matrix(100, 100, 7);
        let b = gen_gaussian_matrix(100, 100, 7);
        assert_eq!(a, b);
        let mean = a.iter().sum::<f64>() / 1e4;
        let var = a.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
        let single = gen_gaussian_matrix(1, 1, 3);
        assert!(single[(0, 0)].is_finite());
    }

    #[test]
    fn group_sparse_signal_round_trip() {
        let part = GroupPartition::contiguous(200, 10).unwrap();
        let x = gen_group_sparse_signal(&part, 4, 99).unwrap();
        let tol = groups::default_zero_tol(&x);
        let (active, _, _) = groups::active_sets(&x, &part, tol).unwrap();
        assert_eq!(active.len(), 4);
        let zero = gen_group_sparse_signal(&part, 0, 1).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let full = gen_group_sparse_signal(&part, 20, 1).unwrap();
        let (a2, _, _) = groups::active_sets(&full, &part, groups::default_zero_tol(&full)).unwrap();
        assert_eq!(a2.len(), 20);
    }

    #[test]
    fn piecewise_constant_image_cases() {
        let (flat, s) = gen_piecewise_constant_image(4, 4, 1, 5).unwrap();
        assert_eq!(s, 0);
        let d = AnalysisOperator::gradient2d(4, 4);
        assert_eq!(d.analyze(&flat).unwrap().norm(), 0.0);

        let (img, s2) = gen_piecewise_constant_image(8, 8, 3, 11).unwrap();
        let (img_again, _) = gen_piecewise_constant_image(8, 8, 3, 11).unwrap();
        assert_eq!(img, img_again);
        assert!(s2 > 0 && s2 < 64, "sparsity {s2}");

        let (line, _) = gen_piecewise_constant_image(1, 6, 2, 3).unwrap();
        assert_eq!(line.len(), 6);
    }

    #[test]
    fn sweep_single_trial_extremes() {
        let mut cfg = SweepConfig {
            mode: SweepMode::GroupSparsity,
            n: 20,
            group_count: 5,
            active: 2,
            n1: 0,
            n2: 0,
            blocks: 0,
            m_list: vec![20],
            trials: 1,
            kkt_tol: 1e-8,
            max_iters: 200_000,
            theta: 0.99,
            seed: 4,
            record_timings: false,
        };
        // m = n: Phi almost surely injective, so recovery is sharp.
        let recs = run_sweep(&cfg, None).unwrap();
        assert_eq!(recs[0].recovered, 1);
        assert_eq!(recs[0].sharp, 1);
        // m = 1 with 2 active groups: far too few measurements.
        cfg.m_list = vec![1];
        let recs = run_sweep(&cfg, None).unwrap();
        assert_eq!(recs[0].recovered, 0);
    }

    #[test]
    fn sweep_csv_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SweepConfig {
            mode: SweepMode::GroupSparsity,
            n: 20,
            group_count: 5,
            active: 1,
            n1: 0,
            n2: 0,
            blocks: 0,
            m_list: vec![5, 10],
            trials: 2,
            kkt_tol: 1e-6,
            max_iters: 50_000,
            theta: 0.99,
            seed: 12,
            record_timings: false,
        };
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let r1 = run_sweep(&cfg, Some(&p1)).unwrap();
        let r2 = run_sweep(&cfg, Some(&p2)).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(r1, r2);
        let back = read_csv(&p1).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].m, 5);
        assert_eq!(back[1].recovered, r1[1].recovered);
    }

    #[test]
    fn plot_is_well_formed_xml() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            SweepRecord {
                m: 10,
                trials: 4,
                recovered: 1,
                sharp: 0,
                strong_nonsharp: 1,
                stable_certified_nonsharp: 1,
                failed: 0,
                mean_solve_ms: 0.0,
                mean_certify_ms: 0.0,
            },
            SweepRecord {
                m: 20,
                trials: 4,
                recovered: 4,
                sharp: 3,
                strong_nonsharp: 1,
                stable_certified_nonsharp: 1,
                failed: 0,
                mean_solve_ms: 0.0,
                mean_certify_ms: 0.0,
            },
        ];
        let path = dir.path().join("plot.svg");
        emit_plot(&recs, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // Minimal well-formedness: every opened tag closes, one root element.
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<polyline").count(), 4);
        for frag in ["green", "blue", "red", "orange"] {
            assert!(text.contains(frag));
        }
        // No stray unescaped ampersands or angle brackets in text nodes.
        assert!(!text.contains('&'));
    }

    #[test]
    fn instance_json_round_trip() {
        let json = r#"{
            "phi": [[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]],
            "d": {"kind": "identity", "n": 3},
            "groups": [[1, 2], [3]],
            "x0": [1.0, 1.0, 0.0]
        }"#;
        let spec: InstanceSpec = serde_json::from_str(json).unwrap();
        let inst = spec.to_instance().unwrap();
        assert_eq!(inst.y0, DVector::from_vec(vec![2.0, 2.0]));
        assert_eq!(inst.part.len(), 2);
    }

    #[test]
    fn pgm_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        fs::write(&path, "P2\n# comment\n3 2\n255\n0 128 255\n255 0 64\n").unwrap();
        let (h, w, img) = load_pgm(&path).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(img.len(), 6);
        assert!((img[1] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(img[2], 1.0);
        fs::write(&path, "P5\n1 1\n255\n0\n").unwrap();
        assert!(load_pgm(&path).is_err());
    }
}
