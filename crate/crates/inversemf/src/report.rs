//! Full-pipeline orchestration: curves, duality, measure and atom tables,
//! empirical spectra, diagnostics batteries, CSV emission, and the run
//! manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    alpha_of, approx_degree, box_dimension, local_dims, lq_estimate, ubiquity_sample, AtomIndex,
    DepthTables,
};
use crate::curve::{uniform_grid, CurveKind, CurveMeta, SpectrumCurve};
use crate::env::{sample_path, validate_model, EnvModel, EnvPath};
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_diagnostic, mean_log_lambda, rpf_measure, MeasureTable};
use crate::inverse::{atoms, interval_table_at};
use crate::rng::Stream;
use crate::subshift::Word;
use crate::thermo::{
    duality_check, legendre, normalize_phi, pressure_root_on, root_curve, CylinderSums, RootKind,
};

fn default_q_min() -> f64 {
    -2.0
}
fn default_q_max() -> f64 {
    2.0
}
fn default_q_step() -> f64 {
    0.25
}
fn default_curve_span() -> f64 {
    8.0
}
fn default_curve_step() -> f64 {
    0.02
}
fn default_d_points() -> usize {
    10
}
fn default_scale_min_exp() -> i32 {
    -12
}
fn default_scale_max_exp() -> i32 {
    -6
}
fn default_depth() -> usize {
    12
}
fn default_gen_depth() -> usize {
    14
}
fn default_offsets() -> usize {
    4
}
fn default_rpf_iters() -> usize {
    40
}
fn default_extrema_tol() -> f64 {
    1e-13
}
fn default_root_tol() -> f64 {
    1e-9
}
fn default_samples() -> usize {
    200
}
fn default_atom_samples() -> usize {
    50
}
fn default_window() -> usize {
    2
}
fn default_accum_cap() -> f64 {
    1e8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// Pinned identities calT(0) = -1 and calT(t0) = 0.
    #[serde(default = "Tolerances::default_identity")]
    pub identity: f64,
    /// Exponent-family duality discrepancy.
    #[serde(default = "Tolerances::default_duality")]
    pub duality: f64,
    /// Dirac-sum conservation defect.
    #[serde(default = "Tolerances::default_conservation")]
    pub conservation: f64,
    /// Box dimension against the Bowen root.
    #[serde(default = "Tolerances::default_box_dim")]
    pub box_dim: f64,
    /// Informational: empirical tau against min(calT, 0).
    #[serde(default = "Tolerances::default_tau_dev")]
    pub tau_dev: f64,
    /// Informational: atom lower-dimension threshold.
    #[serde(default = "Tolerances::default_atom_dim")]
    pub atom_dim: f64,
    /// Predicted-spectrum continuity at the kink.
    #[serde(default = "Tolerances::default_continuity")]
    pub continuity: f64,
}

impl Tolerances {
    fn default_identity() -> f64 {
        1e-6
    }
    fn default_duality() -> f64 {
        2e-2
    }
    fn default_conservation() -> f64 {
        1e-10
    }
    fn default_box_dim() -> f64 {
        0.05
    }
    fn default_tau_dev() -> f64 {
        0.2
    }
    fn default_atom_dim() -> f64 {
        0.05
    }
    fn default_continuity() -> f64 {
        1e-3
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: Self::default_identity(),
            duality: Self::default_duality(),
            conservation: Self::default_conservation(),
            box_dim: Self::default_box_dim(),
            tau_dev: Self::default_tau_dev(),
            atom_dim: Self::default_atom_dim(),
            continuity: Self::default_continuity(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    #[serde(default = "default_q_min")]
    pub q_min: f64,
    #[serde(default = "default_q_max")]
    pub q_max: f64,
    #[serde(default = "default_q_step")]
    pub q_step: f64,
    /// Half-width of the dense q-grid used for curves and Legendre
    /// transforms.
    #[serde(default = "default_curve_span")]
    pub curve_q_span: f64,
    #[serde(default = "default_curve_step")]
    pub curve_q_step: f64,
    #[serde(default = "default_d_points")]
    pub d_points: usize,
    /// Scales are 2^e for e in [scale_min_exp, scale_max_exp].
    #[serde(default = "default_scale_min_exp")]
    pub scale_min_exp: i32,
    #[serde(default = "default_scale_max_exp")]
    pub scale_max_exp: i32,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_gen_depth")]
    pub gen_depth: usize,
    #[serde(default = "default_offsets")]
    pub offsets: usize,
    #[serde(default = "default_rpf_iters")]
    pub rpf_iters: usize,
    #[serde(default = "default_extrema_tol")]
    pub extrema_tol: f64,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_atom_samples")]
    pub atom_samples: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Cap on cylinder counts per enumeration (resource guard).
    #[serde(default = "default_accum_cap")]
    pub accum_cap: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl AnalysisConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn q_grid(&self) -> Vec<f64> {
        uniform_grid(self.q_min, self.q_max, self.q_step)
    }

    pub fn curve_grid(&self) -> Vec<f64> {
        uniform_grid(-self.curve_q_span, self.curve_q_span, self.curve_q_step)
    }

    pub fn scales(&self) -> Vec<f64> {
        (self.scale_min_exp..=self.scale_max_exp).rev().map(|e| 2.0f64.powi(e)).collect()
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).unwrap_or_default();
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{:02x}", b)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// "fail" checks gate the exit code; "info" checks are reported only.
    pub severity: String,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn fail_level(name: &str, value: f64, threshold: f64, detail: String) -> Check {
        Check {
            name: name.into(),
            passed: value <= threshold,
            severity: "fail".into(),
            value,
            threshold,
            detail,
        }
    }

    fn info_level(name: &str, value: f64, threshold: f64, detail: String) -> Check {
        Check {
            name: name.into(),
            passed: value <= threshold,
            severity: "info".into(),
            value,
            threshold,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub model_hash: String,
    pub seed: u64,
    pub config_hash: String,
    pub stage_runtimes: Vec<StageTime>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub model_hash: String,
    pub t0: f64,
    pub box_dimension: f64,
    pub mean_log_lambda: f64,
    pub rpf_residual: f64,
    pub conservation_sum: f64,
    pub duality_max_discrepancy: f64,
    pub tau_max_deviation: f64,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn all_fail_level_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.severity == "fail").all(|c| c.passed)
    }
}

pub struct ReportBundle {
    pub summary: Summary,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), bytes)?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_curve(dir: &Path, name: &str, curve: &SpectrumCurve, outputs: &mut Vec<String>) -> Result<()> {
    write_file(dir, name, curve.to_csv_string()?.as_bytes(), outputs)
}

/// Samples `count` deep words proportionally to their mass and returns the
/// midpoints of their CDF intervals, skipping atom collisions.
pub fn typical_points(
    table: &MeasureTable,
    index: &AtomIndex,
    count: usize,
    stream: &mut Stream,
) -> Vec<(Word, f64)> {
    let records = interval_table_at(table, table.depth);
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < count * 20 {
        guard += 1;
        let u = stream.next_f64();
        let i = records.partition_point(|r| r.hi <= u).min(records.len() - 1);
        let rec = &records[i];
        let x = 0.5 * (rec.lo + rec.hi);
        if index.nearest_atom_distance(x, index.gen_depth.saturating_sub(1)) < 1e-15 {
            continue;
        }
        out.push((rec.word.clone(), x));
    }
    out
}

/// The liminf surrogate of the cylinder exponent along the depth tail:
/// min over n in [n_max/2, n_max] of alpha(x|_n).
pub fn alpha_estimate_at(
    table: &MeasureTable,
    path: &EnvPath,
    tables: &DepthTables,
    x: f64,
    n_max: usize,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for n in (n_max / 2).max(1)..=n_max {
        let rec = tables.locate(n, x);
        let info = alpha_of(table, path, &rec.word)?;
        best = best.min(info.alpha);
    }
    Ok(best)
}

/// Runs the full pipeline and writes the bundle into `out_dir`.
pub fn spectrum_report(model: &EnvModel, config: &AnalysisConfig, out_dir: &Path) -> Result<ReportBundle> {
    std::fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    let mut stages = Vec::new();
    let mut checks = Vec::new();

    // resource guard on the word-count estimate
    let max_alpha = model.states.iter().map(|s| s.alphabet_size()).max().unwrap_or(1) as f64;
    let estimate = max_alpha.powi(config.gen_depth.max(config.depth) as i32);
    if estimate > config.accum_cap {
        return Err(Error::ResourceGuard { estimate, cap: config.accum_cap });
    }

    // validation gate
    let t = Instant::now();
    let report = validate_model(model)?;
    if !report.passed() {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        return Err(Error::Invariant(format!("model failed validation: {}", failed.join(", "))));
    }
    stages.push(StageTime { stage: "validate".into(), millis: t.elapsed().as_millis() });

    // normalization
    let t = Instant::now();
    let model = normalize_phi(model, config.depth)?;
    let model_hash = model.hash();
    let meta = CurveMeta { depth: config.depth, model_hash: model_hash.clone() };
    stages.push(StageTime { stage: "normalize".into(), millis: t.elapsed().as_millis() });

    let arc = Arc::new(model.clone());
    let horizon = config.gen_depth + config.rpf_iters + config.depth + 120;
    let path = sample_path(&arc, horizon, "main")?;

    // thermo curves
    let t = Instant::now();
    let sums = CylinderSums::build_capped(&path, 0, config.depth, config.accum_cap as u128)?;
    let t0 = pressure_root_on(&sums, 0.0, RootKind::Bowen, config.root_tol)?;
    let curve_grid = config.curve_grid();
    let cal_t = root_curve(&sums, &curve_grid, RootKind::CalT, config.root_tol, meta.clone())?;
    let big_t = root_curve(&sums, &curve_grid, RootKind::BigT, config.root_tol, meta.clone())?;
    write_curve(out_dir, "calT.csv", &cal_t, &mut outputs)?;
    write_curve(out_dir, "bigT.csv", &big_t, &mut outputs)?;

    // pinned identities
    let cal_at_zero = pressure_root_on(&sums, 0.0, RootKind::CalT, config.root_tol)?;
    let cal_at_t0 = pressure_root_on(&sums, t0, RootKind::CalT, config.root_tol)?;
    checks.push(Check::fail_level(
        "identity_calT_at_zero",
        (cal_at_zero + 1.0).abs(),
        config.tolerances.identity,
        format!("calT(0) = {cal_at_zero}"),
    ));
    checks.push(Check::fail_level(
        "identity_calT_at_t0",
        cal_at_t0.abs(),
        config.tolerances.identity,
        format!("calT(t0) = {cal_at_t0}, t0 = {t0}"),
    ));

    // monotone + midpoint-concave curve invariants
    let mut mono_defect = 0.0f64;
    let mut conc_defect = 0.0f64;
    for w in cal_t.values.windows(2) {
        mono_defect = mono_defect.max(w[0] - w[1]);
    }
    for w in cal_t.values.windows(3) {
        conc_defect = conc_defect.max(0.5 * (w[0] + w[2]) - w[1]);
    }
    checks.push(Check::fail_level(
        "calT_nondecreasing",
        mono_defect,
        1e-6,
        "max backward step on the dense grid".into(),
    ));
    checks.push(Check::fail_level(
        "calT_midpoint_concave",
        conc_defect,
        1e-6,
        "max midpoint convexity defect".into(),
    ));

    // predicted tau and its Legendre transform
    let q_grid = config.q_grid();
    let predicted_tau = SpectrumCurve::new(
        CurveKind::CalT,
        q_grid.clone(),
        q_grid
            .iter()
            .map(|&q| pressure_root_on(&sums, q, RootKind::CalT, config.root_tol).map(|v| v.min(0.0)))
            .collect::<Result<Vec<f64>>>()?,
        meta.clone(),
    );
    write_curve(out_dir, "predicted_tau.csv", &predicted_tau, &mut outputs)?;

    // interior d-grid from the dense curve's edge slopes
    let (slope_hi, slope_lo) = {
        let (left, right) = cal_t.edge_slopes();
        (left, right) // left edge (q -> -inf side) has the larger slope
    };
    let (d_lo, d_hi) = (slope_lo, slope_hi);
    let margin = 0.05 * (d_hi - d_lo);
    let d_grid: Vec<f64> = if d_hi - d_lo < 1e-6 {
        vec![0.5 * (d_lo + d_hi)]
    } else {
        (0..config.d_points)
            .map(|i| {
                d_lo + margin + (d_hi - d_lo - 2.0 * margin) * i as f64 / (config.d_points - 1).max(1) as f64
            })
            .collect()
    };
    let cal_star = legendre(&cal_t, &d_grid)?;
    write_curve(out_dir, "calT_star.csv", &cal_star, &mut outputs)?;

    // predicted lower spectrum: Legendre of min(calT, 0) = a t0-slope line
    // up to the kink, calT* beyond
    let clamped = SpectrumCurve::new(
        CurveKind::CalT,
        curve_grid.clone(),
        cal_t.values.iter().map(|&v| v.min(0.0)).collect(),
        meta.clone(),
    );
    let spectrum_d: Vec<f64> = {
        let lo: f64 = 0.0;
        let hi = d_hi;
        (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect()
    };
    let predicted_spectrum = legendre(&clamped, &spectrum_d)?;
    write_curve(out_dir, "predicted_spectrum.csv", &predicted_spectrum, &mut outputs)?;

    // kink continuity: the t0-slope line must meet calT* at the kink
    let kink_idx = curve_grid.partition_point(|&q| q < t0);
    let d_kink = if kink_idx > 0 && kink_idx < curve_grid.len() {
        (cal_t.values[kink_idx] - cal_t.values[kink_idx - 1])
            / (curve_grid[kink_idx] - curve_grid[kink_idx - 1])
    } else {
        f64::NAN
    };
    let continuity_defect = if d_kink.is_finite() {
        let line = t0 * d_kink;
        let star = legendre(&cal_t, &[d_kink])?.values[0];
        (line - star).abs()
    } else {
        f64::NAN
    };
    checks.push(Check::fail_level(
        "predicted_spectrum_continuity",
        continuity_defect,
        config.tolerances.continuity,
        format!("kink at d = {d_kink}"),
    ));
    stages.push(StageTime { stage: "thermo".into(), millis: t.elapsed().as_millis() });

    // duality
    let t = Instant::now();
    let duality = duality_check(&big_t, &cal_t, &d_grid)?;
    {
        let mut csv = Vec::new();
        use std::io::Write;
        writeln!(csv, "# duality,{},{}", config.depth, model_hash)?;
        writeln!(csv, "d,calT_star,d_times_bigT_star_inv,excluded")?;
        for row in &duality.rows {
            writeln!(csv, "{},{},{},{}", row.d, row.lhs, row.rhs, if row.excluded { 1 } else { 0 })?;
        }
        write_file(out_dir, "duality.csv", &csv, &mut outputs)?;
    }
    checks.push(Check::fail_level(
        "duality_discrepancy",
        duality.max_discrepancy,
        config.tolerances.duality,
        format!("{} interior d points", duality.rows.iter().filter(|r| !r.excluded).count()),
    ));
    stages.push(StageTime { stage: "duality".into(), millis: t.elapsed().as_millis() });

    // measure + atoms
    let t = Instant::now();
    let rpf = rpf_measure(&path, 0, config.gen_depth, config.rpf_iters)?;
    {
        let mut csv = Vec::new();
        rpf.table.write_csv(&mut csv)?;
        write_file(out_dir, "measure.csv", &csv, &mut outputs)?;
    }
    let gibbs = gibbs_diagnostic(&rpf, &path)?;
    checks.push(Check::fail_level(
        "weak_gibbs_budget",
        gibbs.defect_per_n,
        gibbs.budget_per_n,
        format!("defect/n vs certified budget at depth {}", config.gen_depth),
    ));
    checks.push(Check::fail_level(
        "rpf_mean_log_lambda",
        mean_log_lambda(&rpf).abs(),
        1e-3,
        "average log normalizer after normalization".into(),
    ));
    let list = atoms(&rpf.table, &path, config.gen_depth, config.extrema_tol)?;
    {
        let mut csv = Vec::new();
        list.write_csv(&mut csv)?;
        write_file(out_dir, "atoms.csv", &csv, &mut outputs)?;
    }
    let conservation = (list.conservation_sum() - 1.0).abs();
    checks.push(Check::fail_level(
        "dirac_sum_conservation",
        conservation,
        config.tolerances.conservation,
        format!("residual {}", list.residual),
    ));
    stages.push(StageTime { stage: "measure_atoms".into(), millis: t.elapsed().as_millis() });

    // empirical tau
    let t = Instant::now();
    let scales = config.scales();
    let tau_curve = lq_estimate(&list, &model, &q_grid, &scales, config.offsets, meta.clone())?;
    write_curve(out_dir, "tau_estimate.csv", &tau_curve, &mut outputs)?;
    let tau_dev = tau_curve
        .values
        .iter()
        .zip(&predicted_tau.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check::info_level(
        "tau_vs_predicted",
        tau_dev,
        config.tolerances.tau_dev,
        "sup deviation over the q grid".into(),
    ));
    // concavity of the estimate (informational)
    let mut tau_conc = 0.0f64;
    for w in tau_curve.values.windows(3) {
        tau_conc = tau_conc.max(0.5 * (w[0] + w[2]) - w[1]);
    }
    checks.push(Check::info_level("tau_estimate_concavity", tau_conc, 0.02, String::new()));
    stages.push(StageTime { stage: "lq".into(), millis: t.elapsed().as_millis() });

    // local dimensions at the heaviest atoms; extends the scales four
    // octaves down so ball masses settle onto the atom weights
    let t = Instant::now();
    let index = AtomIndex::build(&list);
    let mut heavy: Vec<&crate::inverse::Atom> = list.atoms.iter().filter(|a| a.weight > 0.0).collect();
    heavy.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
    let atom_xs: Vec<f64> = heavy.iter().take(config.atom_samples).map(|a| a.position).collect();
    let atom_scales: Vec<f64> = (config.scale_min_exp - 4..=config.scale_max_exp)
        .rev()
        .map(|e| 2.0f64.powi(e))
        .collect();
    let atom_dims = local_dims(&index, &atom_xs, &atom_scales, config.window);
    let atom_dim_worst = atom_dims.iter().map(|s| s.lower.abs()).fold(0.0f64, f64::max);
    checks.push(Check::info_level(
        "atom_lower_dims",
        atom_dim_worst,
        config.tolerances.atom_dim,
        format!("{} heaviest atoms", atom_xs.len()),
    ));
    {
        use std::io::Write;
        let mut csv = Vec::new();
        writeln!(csv, "# local_dims_atoms,{},{}", config.gen_depth, model_hash)?;
        writeln!(csv, "x,lower,upper,slope")?;
        for s in &atom_dims {
            writeln!(csv, "{},{},{},{}", s.x, s.lower, s.upper, s.slope)?;
        }
        write_file(out_dir, "local_dims_atoms.csv", &csv, &mut outputs)?;
    }

    // typical-point sandwich battery
    let tables = DepthTables::build(&rpf.table);
    let mut stream = Stream::new(model.seed, "samples");
    let typical = typical_points(&rpf.table, &index, config.samples, &mut stream);
    let typical_xs: Vec<f64> = typical.iter().map(|(_, x)| *x).collect();
    let typical_dims = local_dims(&index, &typical_xs, &scales, config.window);
    let mut sandwich_violations = 0usize;
    {
        use std::io::Write;
        let mut csv = Vec::new();
        writeln!(csv, "# local_dims_typical,{},{}", config.gen_depth, model_hash)?;
        writeln!(csv, "x,lower,upper,alpha")?;
        for ((_, x), dim) in typical.iter().zip(&typical_dims) {
            let alpha = alpha_estimate_at(&rpf.table, &path, &tables, *x, config.gen_depth)?;
            if dim.lower.is_finite() && dim.lower > alpha + 0.1 {
                sandwich_violations += 1;
            }
            writeln!(csv, "{},{},{},{}", x, dim.lower, dim.upper, alpha)?;
        }
        write_file(out_dir, "local_dims_typical.csv", &csv, &mut outputs)?;
    }
    let sandwich_rate = sandwich_violations as f64 / typical.len().max(1) as f64;
    checks.push(Check::info_level(
        "sandwich_violation_rate",
        sandwich_rate,
        0.02,
        format!("{sandwich_violations} of {} samples", typical.len()),
    ));

    // xi-hat battery
    let depths: Vec<usize> = (1..=config.gen_depth.min(tables.max_depth())).collect();
    let mut xi_in_band = 0usize;
    let mut xi_total = 0usize;
    {
        use std::io::Write;
        let mut csv = Vec::new();
        writeln!(csv, "# xi_hat,{},{}", config.gen_depth, model_hash)?;
        writeln!(csv, "x,xi_hat,xi")?;
        let mut xstream = Stream::new(model.seed, "xihat");
        for _ in 0..config.samples {
            let x = xstream.next_f64();
            if let Ok(deg) = approx_degree(&index, &tables, x, &depths) {
                if deg.collision {
                    continue;
                }
                xi_total += 1;
                if (deg.xi_hat - 1.0).abs() <= 0.15 {
                    xi_in_band += 1;
                }
                writeln!(csv, "{},{},{}", x, deg.xi_hat, deg.xi)?;
            }
        }
        write_file(out_dir, "xi_hat.csv", &csv, &mut outputs)?;
    }
    let xi_out_rate = 1.0 - xi_in_band as f64 / xi_total.max(1) as f64;
    checks.push(Check::info_level(
        "xi_hat_out_of_band_rate",
        xi_out_rate,
        0.10,
        format!("{xi_in_band} of {xi_total} in [0.85, 1.15]"),
    ));
    stages.push(StageTime { stage: "local_analysis".into(), millis: t.elapsed().as_millis() });

    // box dimension
    let t = Instant::now();
    let contraction = crate::potential::contraction_bound(&model);
    let box_depth = ((scales.iter().cloned().fold(f64::INFINITY, f64::min).ln()
        / contraction.ln())
    .ceil() as usize
        + 2)
    .max(4);
    let box_dim = box_dimension(&path, box_depth, &scales)?;
    checks.push(Check::fail_level(
        "box_dimension_vs_bowen",
        (box_dim - t0).abs(),
        config.tolerances.box_dim,
        format!("box {box_dim} vs t0 {t0} at depth {box_depth}"),
    ));
    stages.push(StageTime { stage: "box_dimension".into(), millis: t.elapsed().as_millis() });

    let summary = Summary {
        model_hash: model_hash.clone(),
        t0,
        box_dimension: box_dim,
        mean_log_lambda: mean_log_lambda(&rpf),
        rpf_residual: rpf.residual,
        conservation_sum: list.conservation_sum(),
        duality_max_discrepancy: duality.max_discrepancy,
        tau_max_deviation: tau_dev,
        checks,
    };
    write_file(out_dir, "summary.json", serde_json::to_string_pretty(&summary)?.as_bytes(), &mut outputs)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model_hash,
        seed: model.seed,
        config_hash: config.hash(),
        stage_runtimes: stages,
        outputs: outputs.clone(),
    };
    std::fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    Ok(ReportBundle { summary, manifest, out_dir: out_dir.to_path_buf() })
}

/// Ubiquity battery shared by the acceptance suite: samples points inside
/// the selected balls and returns their lower-dimension estimates together
/// with the target d/xi bound.
pub struct UbiquityBattery {
    pub xi: f64,
    pub d: f64,
    pub bound: f64,
    pub lower_dims: Vec<f64>,
    pub balls: usize,
}

pub fn ubiquity_battery(
    table: &MeasureTable,
    path: &EnvPath,
    index: &AtomIndex,
    d: f64,
    xi: f64,
    depth: usize,
    points: usize,
    window: usize,
    tol: f64,
) -> Result<UbiquityBattery> {
    let eps = 4.0 / (depth as f64).sqrt();
    let balls = ubiquity_sample(table, path, d, xi, eps, depth, 4, tol)?;
    let mut stream = Stream::new(path.model.seed, "ubiquity");
    let mut xs = Vec::with_capacity(points);
    for i in 0..points {
        let ball = &balls[i % balls.len()];
        let u = 2.0 * stream.next_f64() - 1.0;
        xs.push((ball.center + u * ball.radius).clamp(0.0, 1.0));
    }
    // scales anchored at the ball radius
    let r0 = balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min).max(1e-12);
    let scales: Vec<f64> = (0..=6).rev().map(|j| r0 * 2.0f64.powi(j)).collect();
    let dims = local_dims(index, &xs, &scales, window);
    Ok(UbiquityBattery {
        xi,
        d,
        bound: d / xi + 0.15,
        lower_dims: dims.iter().map(|s| s.lower).collect(),
        balls: balls.len(),
    })
}
