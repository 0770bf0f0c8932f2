//! Command-line front end: model validation, path sampling, pressure roots,
//! measure/atom tables, spectrum curves, and the full report bundle.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use inversemf::analysis::{box_dimension, lq_estimate};
use inversemf::curve::CurveMeta;
use inversemf::env::{sample_path, validate_model, EnvModel};
use inversemf::error::Error;
use inversemf::gibbs::rpf_measure;
use inversemf::inverse::atoms;
use inversemf::report::{spectrum_report, AnalysisConfig};
use inversemf::subshift::enumerate_words;
use inversemf::thermo::{
    duality_check, legendre, normalize_phi, pressure_root_on, root_curve, CylinderSums, RootKind,
};

#[derive(Parser)]
#[command(name = "inversemf", version, about = "Random weak Gibbs measures, their inverse measures, and multifractal spectra")]
struct Cli {
    /// Override the seed stored in the model file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = library default). Falls back to INVERSEMF_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Stdout format for scalar results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ModelArg {
    /// Model file (JSON, format tag "inversemf/1").
    model: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check every model invariant and print the report as JSON.
    Validate(ModelArg),
    /// Sample the driving chain and print the visited states.
    SamplePath {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value = "main")]
        stream: String,
        /// Optional CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve pressure-equation roots and optionally emit the curve CSV.
    Pressure {
        #[command(flatten)]
        model: ModelArg,
        /// Root family: the inverse-measure exponents (calT), the direct
        /// exponents (T), or the Bowen root (bowen).
        #[arg(long)]
        combo: ComboArg,
        /// Comma-separated q values (ignored for bowen).
        #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = vec![-2.0, -1.0, 0.0, 1.0, 2.0])]
        q: Vec<f64>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Normalize phi before solving.
        #[arg(long, default_value_t = true)]
        normalize: bool,
    },
    /// Build the eigenmeasure cylinder-mass table.
    Measure {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 40)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export cylinder geometry (word, lo, hi, diam) for debugging.
        #[arg(long)]
        cylinders: Option<PathBuf>,
    },
    /// Enumerate the inverse-measure atoms.
    Atoms {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 10)]
        gen_depth: usize,
        #[arg(long, default_value_t = 40)]
        iters: usize,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thermodynamic layer: exponent curves, Legendre transforms, duality.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "spectrum-out")]
        out_dir: PathBuf,
    },
    /// Empirical layer: atoms, L^q slopes, box dimension.
    Analyze {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "analyze-out")]
        out_dir: PathBuf,
    },
    /// Full pipeline: curves, measures, atoms, diagnostics, manifest.
    Report {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "report-out")]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ComboArg {
    #[value(name = "calT")]
    CalT,
    #[value(name = "T")]
    T,
    #[value(name = "bowen")]
    Bowen,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Json(_) | Error::Structural(_) => 3,
        Error::Invariant(_) => 2,
        Error::BracketFailure { .. } => 4,
        Error::ResourceGuard { .. } => 6,
        _ => 1,
    }
}

fn load_model(path: &PathBuf, seed: Option<u64>) -> Result<EnvModel, Error> {
    let mut model = EnvModel::load(path)?;
    if let Some(seed) = seed {
        model.seed = seed;
    }
    Ok(model)
}

fn load_config(path: &Option<PathBuf>) -> Result<AnalysisConfig, Error> {
    match path {
        Some(p) => AnalysisConfig::from_json(&std::fs::read_to_string(p)?),
        None => Ok(AnalysisConfig::default()),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Validate(ModelArg { model }) => {
            let model = load_model(&model, cli.seed)?;
            let report = validate_model(&model)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::Json)?);
            Ok(if report.passed() { 0 } else { 2 })
        }
        Command::SamplePath { model, horizon, stream, out } => {
            let model = Arc::new(load_model(&model.model, cli.seed)?);
            let path = sample_path(&model, horizon, &stream)?;
            let mut body = String::from("k,state\n");
            for (k, s) in path.states().iter().enumerate() {
                body.push_str(&format!("{},{}\n", k, s));
            }
            match out {
                Some(p) => std::fs::write(p, body)?,
                None => match cli.format {
                    Format::Csv => print!("{}", body),
                    Format::Json => println!(
                        "{}",
                        serde_json::to_string(&path.states()).map_err(Error::Json)?
                    ),
                },
            }
            Ok(0)
        }
        Command::Pressure { model, combo, q, depth, tol, out, normalize } => {
            let mut model = load_model(&model.model, cli.seed)?;
            if normalize {
                model = normalize_phi(&model, depth)?;
            }
            let arc = Arc::new(model.clone());
            let path = sample_path(&arc, depth + 2, "main")?;
            let sums = CylinderSums::build(&path, 0, depth)?;
            let meta = CurveMeta { depth, model_hash: model.hash() };
            let (kind, grid) = match combo {
                ComboArg::CalT => (RootKind::CalT, q),
                ComboArg::T => (RootKind::BigT, q),
                ComboArg::Bowen => (RootKind::Bowen, vec![0.0]),
            };
            let curve = root_curve(&sums, &grid, kind, tol, meta)?;
            for (qv, root) in curve.grid.iter().zip(&curve.values) {
                match (combo, cli.format) {
                    (ComboArg::Bowen, Format::Csv) => println!("t0 = {:.9}", root),
                    (ComboArg::Bowen, Format::Json) => println!("{{\"t0\": {}}}", root),
                    (_, Format::Csv) => println!("root({}) = {:.9}", qv, root),
                    (_, Format::Json) => println!("{{\"q\": {}, \"root\": {}}}", qv, root),
                }
            }
            if let Some(p) = out {
                std::fs::write(p, curve.to_csv_string()?)?;
            }
            Ok(0)
        }
        Command::Measure { model, depth, iters, out, cylinders } => {
            let model = Arc::new(load_model(&model.model, cli.seed)?);
            let path = sample_path(&model, depth + iters + 2, "main")?;
            let result = rpf_measure(&path, 0, depth, iters)?;
            println!(
                "depth {} cylinders {} residual {:.3e} mean_log_lambda {:.6}",
                depth,
                result.table.len(),
                result.residual,
                inversemf::gibbs::mean_log_lambda(&result)
            );
            if let Some(p) = out {
                let mut csv = Vec::new();
                result.table.write_csv(&mut csv)?;
                std::fs::write(p, csv)?;
            }
            if let Some(p) = cylinders {
                let mut csv = String::from("word,lo,hi,diam\n");
                for w in enumerate_words(&path, 0, depth)? {
                    let iv = inversemf::geometry::cylinder_interval(&path, &w)?;
                    csv.push_str(&format!("\"{}\",{},{},{}\n", w, iv.lo, iv.hi, iv.diam()));
                }
                std::fs::write(p, csv)?;
            }
            Ok(0)
        }
        Command::Atoms { model, gen_depth, iters, tol, out } => {
            let model = Arc::new(load_model(&model.model, cli.seed)?);
            let path = sample_path(&model, gen_depth + iters + 120, "main")?;
            let result = rpf_measure(&path, 0, gen_depth, iters)?;
            let list = atoms(&result.table, &path, gen_depth, tol)?;
            println!(
                "atoms {} boundary ({:.6}, {:.6}) residual {:.3e} conservation {:.3e}",
                list.atoms.len(),
                list.boundary_left,
                list.boundary_right,
                list.residual,
                (list.conservation_sum() - 1.0).abs()
            );
            if let Some(p) = out {
                let mut csv = Vec::new();
                list.write_csv(&mut csv)?;
                std::fs::write(p, csv)?;
            }
            Ok(0)
        }
        Command::Spectrum { model, config, out_dir } => {
            let model = load_model(&model.model, cli.seed)?;
            let config = load_config(&config)?;
            let model = normalize_phi(&model, config.depth)?;
            let arc = Arc::new(model.clone());
            let path = sample_path(&arc, config.depth + 2, "main")?;
            let sums = CylinderSums::build_capped(&path, 0, config.depth, config.accum_cap as u128)?;
            let meta = CurveMeta { depth: config.depth, model_hash: model.hash() };
            std::fs::create_dir_all(&out_dir)?;
            let grid = config.curve_grid();
            let cal_t = root_curve(&sums, &grid, RootKind::CalT, config.root_tol, meta.clone())?;
            let big_t = root_curve(&sums, &grid, RootKind::BigT, config.root_tol, meta.clone())?;
            let t0 = pressure_root_on(&sums, 0.0, RootKind::Bowen, config.root_tol)?;
            let (d_hi, d_lo) = cal_t.edge_slopes();
            let d_grid: Vec<f64> = (0..config.d_points)
                .map(|i| {
                    let m = 0.05 * (d_hi - d_lo);
                    d_lo + m + (d_hi - d_lo - 2.0 * m) * i as f64 / (config.d_points - 1).max(1) as f64
                })
                .collect();
            let star = legendre(&cal_t, &d_grid)?;
            let duality = duality_check(&big_t, &cal_t, &d_grid)?;
            std::fs::write(out_dir.join("calT.csv"), cal_t.to_csv_string()?)?;
            std::fs::write(out_dir.join("bigT.csv"), big_t.to_csv_string()?)?;
            std::fs::write(out_dir.join("calT_star.csv"), star.to_csv_string()?)?;
            println!("t0 = {:.9}", t0);
            println!("duality max discrepancy = {:.6e}", duality.max_discrepancy);
            Ok(0)
        }
        Command::Analyze { model, config, out_dir } => {
            let model = load_model(&model.model, cli.seed)?;
            let config = load_config(&config)?;
            let model = normalize_phi(&model, config.depth)?;
            let arc = Arc::new(model.clone());
            let horizon = config.gen_depth + config.rpf_iters + 120;
            let path = sample_path(&arc, horizon, "main")?;
            let result = rpf_measure(&path, 0, config.gen_depth, config.rpf_iters)?;
            let list = atoms(&result.table, &path, config.gen_depth, config.extrema_tol)?;
            std::fs::create_dir_all(&out_dir)?;
            let meta = CurveMeta { depth: config.gen_depth, model_hash: model.hash() };
            let tau = lq_estimate(&list, &model, &config.q_grid(), &config.scales(), config.offsets, meta)?;
            std::fs::write(out_dir.join("tau_estimate.csv"), tau.to_csv_string()?)?;
            let mut csv = Vec::new();
            list.write_csv(&mut csv)?;
            std::fs::write(out_dir.join("atoms.csv"), csv)?;
            let contraction = inversemf::potential::contraction_bound(&model);
            let scales = config.scales();
            let box_depth = ((scales.iter().cloned().fold(f64::INFINITY, f64::min).ln()
                / contraction.ln())
            .ceil() as usize
                + 2)
            .max(4);
            let dim = box_dimension(&path, box_depth, &scales)?;
            println!(
                "atoms {} conservation {:.3e} box_dimension {:.6}",
                list.atoms.len(),
                (list.conservation_sum() - 1.0).abs(),
                dim
            );
            Ok(0)
        }
        Command::Report { model, config, out_dir } => {
            let model = load_model(&model.model, cli.seed)?;
            let config = load_config(&config)?;
            let bundle = spectrum_report(&model, &config, &out_dir)?;
            for check in &bundle.summary.checks {
                println!(
                    "[{}] {} = {:.6e} (threshold {:.3e}){}",
                    if check.passed { "pass" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.threshold,
                    if check.severity == "info" { " (informational)" } else { "" }
                );
            }
            println!("bundle written to {}", bundle.out_dir.display());
            Ok(if bundle.summary.all_fail_level_passed() { 0 } else { 5 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("INVERSEMF_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
    let outcome = match pool {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(Error::Other(format!("thread pool: {e}"))),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
