//! Command-line frontend: fit models to CSV series, generate series and
//! surrogates from fitted models, and run the built-in numerical
//! self-checks. All reports are versioned JSON; output files are written
//! atomically; every subcommand is deterministic given its flags.

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vstap::bvn;
use vstap::error::{Error, Result};
use vstap::model_io;
use vstap::oracle;
use vstap::pipeline::{fisher_ci, fit_vstap, fit_vstap_with_targets, FitOptions};
use vstap::solver::{solve_gaussian_corr, SolveOptions, SolveStatus, RHO_CAP};
use vstap::{LaggedCorrelationSet, PiecewiseTransform, TransformMode, VstapModel};

const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(
    name = "vstap",
    version,
    about = "Generate multivariate time series matching given marginals and lagged correlations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a generator model to a multichannel CSV series
    Fit(FitArgs),
    /// Generate series of any length from a fitted model
    Generate(GenerateArgs),
    /// Generate surrogates: each channel a permutation of its input values
    Surrogate(SurrogateArgs),
    /// Run the built-in numerical self-checks and report pass/fail
    Validate,
}

#[derive(clap::Args)]
struct FitArgs {
    /// Input CSV: header row of channel names, one row per time index
    #[arg(long)]
    input: PathBuf,
    /// Where to write the fitted model (JSON)
    #[arg(long)]
    output: PathBuf,
    /// Largest lag whose correlations are matched (the autoregression order)
    #[arg(long)]
    order: usize,
    /// Segments per marginal transform
    #[arg(long, default_value_t = 20)]
    breakpoints: usize,
    /// Residual tolerance for the correlation inversions
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Where to write the fit report (default: output path with a
    /// .report.json extension)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Fitted model file (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Base path of the output CSV; with several realizations, files get a
    /// _000-style suffix
    #[arg(long)]
    output: PathBuf,
    /// Observations per channel
    #[arg(long)]
    length: usize,
    /// Base seed; realization b uses seed + b
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of independent realizations
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Marginal mode: exact reproduces sample values, piecewise applies the
    /// fitted transform
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(clap::Args)]
struct SurrogateArgs {
    /// Input CSV: header row of channel names, one row per time index
    #[arg(long)]
    input: PathBuf,
    /// Base path of the output CSV; with several surrogates, files get a
    /// _000-style suffix
    #[arg(long)]
    output: PathBuf,
    /// Largest lag whose correlations are matched
    #[arg(long)]
    order: usize,
    /// Segments per marginal transform
    #[arg(long, default_value_t = 20)]
    breakpoints: usize,
    /// Residual tolerance for the correlation inversions
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Base seed; surrogate b uses seed + b
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of surrogates
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Piecewise,
}

impl From<ModeArg> for TransformMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => TransformMode::ExactMarginal,
            ModeArg::Piecewise => TransformMode::PiecewiseMarginal,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let obj = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{}", serde_json::to_string_pretty(&obj).unwrap());
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Surrogate(args) => cmd_surrogate(args),
        Command::Validate => cmd_validate(),
    }
}

// ---------------------------------------------------------------- CSV I/O

fn csv_err(e: csv::Error) -> Error {
    if matches!(e.kind(), csv::ErrorKind::Io(_)) {
        Error::Io(e.to_string())
    } else {
        Error::Format(e.to_string())
    }
}

/// Reads a CSV of named channels into column-major data.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Format(format!("{}: no columns", path.display())));
    }
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != names.len() {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                row + 2,
                rec.len(),
                names.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {}, column {:?}: cannot parse {:?} as a number",
                    path.display(),
                    row + 2,
                    names[c],
                    field
                ))
            })?;
            cols[c].push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(Error::Format(format!("{}: no data rows", path.display())));
    }
    Ok((names, cols))
}

/// Serializes channels to CSV with 17 significant digits, so values
/// round-trip bit-exactly.
fn csv_bytes(names: &[String], cols: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names).map_err(csv_err)?;
    let n = cols[0].len();
    let mut row = Vec::with_capacity(cols.len());
    for t in 0..n {
        row.clear();
        for c in cols {
            row.push(format!("{:.16e}", c[t]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn write_csv(path: &Path, names: &[String], cols: &[Vec<f64>]) -> Result<()> {
    model_io::atomic_write_bytes(path, &csv_bytes(names, cols)?)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    model_io::atomic_write_bytes(path, &bytes)
}

// ------------------------------------------------------------- path rules

fn check_distinct(a: &Path, b: &Path) -> Result<()> {
    if a == b {
        return Err(Error::InvalidInput(format!(
            "input and output paths must differ, both are {}",
            a.display()
        )));
    }
    Ok(())
}

fn sibling_report_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    output.with_file_name(name)
}

/// Path of realization `idx` out of `total`: the base path itself for a
/// single file, otherwise stem_000.csv style siblings.
fn realization_path(base: &Path, idx: usize, total: usize) -> PathBuf {
    if total <= 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned());
    let mut name = format!("{stem}_{idx:03}");
    if let Some(ext) = ext {
        name.push('.');
        name.push_str(&ext);
    }
    base.with_file_name(name)
}

fn fit_options(order: usize, breakpoints: usize, epsilon: f64) -> Result<FitOptions> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut opts = FitOptions::new(order);
    opts.segments = breakpoints;
    opts.solve = SolveOptions {
        eps: epsilon,
        ..SolveOptions::default()
    };
    Ok(opts)
}

// ------------------------------------------------------------ subcommands

fn solve_rows(model: &VstapModel) -> Vec<Value> {
    model
        .fit_report()
        .pair_solves
        .iter()
        .map(|s| {
            json!({
                "i": s.i, "j": s.j, "tau": s.tau,
                "target": s.target,
                "solution": s.report.solution,
                "achieved": s.target + s.report.residual,
                "residual": s.report.residual,
                "iterations": s.report.iterations,
                "used_binary_search": s.report.used_binary_search,
                "status": s.report.status,
            })
        })
        .collect()
}

fn pair_bound_rows(model: &VstapModel) -> Result<Vec<Value>> {
    let mut rows = Vec::new();
    for i in 0..model.channels() {
        for j in i..model.channels() {
            let t1 = &model.transforms()[i];
            let t2 = &model.transforms()[j];
            rows.push(json!({
                "i": i, "j": j,
                "lower": bvn::psi_eval(t1, t2, -RHO_CAP)?,
                "upper": bvn::psi_eval(t1, t2, RHO_CAP)?,
            }));
        }
    }
    Ok(rows)
}

fn cmd_fit(args: FitArgs) -> Result<ExitCode> {
    check_distinct(&args.input, &args.output)?;
    let opts = fit_options(args.order, args.breakpoints, args.epsilon)?;
    let (names, cols) = read_csv(&args.input)?;
    let model = fit_vstap(&cols, Some(&names), &opts)?;
    model_io::save_model_path(&model, &args.output)?;

    let report_path = args.report.unwrap_or_else(|| sibling_report_path(&args.output));
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "input": args.input.display().to_string(),
        "model": args.output.display().to_string(),
        "channels": model.channel_names(),
        "observations": model.n_fit(),
        "order": model.max_lag(),
        "breakpoints": args.breakpoints,
        "epsilon": args.epsilon,
        "spectral_radius": model.fit_report().spectral_radius,
        "target_repair": model.fit_report().target_repair,
        "gaussian_repair": model.fit_report().gaussian_repair,
        "solves": solve_rows(&model),
        "pair_bounds": pair_bound_rows(&model)?,
    });
    write_json(&report_path, &report)?;
    println!(
        "{}",
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "fit",
            "model": args.output.display().to_string(),
            "report": report_path.display().to_string(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

/// Achieved lagged correlations of one realization with 95% bands around
/// each estimate.
fn correlation_rows(
    cols: &[Vec<f64>],
    targets: &LaggedCorrelationSet,
    p: usize,
) -> Result<Vec<Value>> {
    let est = LaggedCorrelationSet::estimate(cols, p)?;
    let n = cols[0].len();
    let k = cols.len();
    let mut rows = Vec::new();
    for tau in 0..=p {
        for i in 0..k {
            for j in 0..k {
                if tau == 0 && i >= j {
                    continue;
                }
                let r = est.get(i, j, tau);
                let (lo, hi) = if r.abs() == 1.0 {
                    (r, r)
                } else {
                    fisher_ci(r, n)?
                };
                rows.push(json!({
                    "i": i, "j": j, "tau": tau,
                    "target": targets.get(i, j, tau),
                    "achieved": r,
                    "fisher_lo": lo,
                    "fisher_hi": hi,
                }));
            }
        }
    }
    Ok(rows)
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    check_distinct(&args.model, &args.output)?;
    if args.length == 0 {
        return Err(Error::InvalidInput("length must be positive".into()));
    }
    if args.realizations == 0 {
        return Err(Error::InvalidInput("realizations must be positive".into()));
    }
    let model = model_io::load_model_path(&args.model)?;
    let mode: TransformMode = args.mode.into();
    let mut realizations = Vec::new();
    for b in 0..args.realizations {
        let seed = args.seed.wrapping_add(b as u64);
        let cols = model.generate(args.length, mode, seed)?;
        let path = realization_path(&args.output, b, args.realizations);
        write_csv(&path, model.channel_names(), &cols)?;
        realizations.push(json!({
            "file": path.display().to_string(),
            "seed": seed,
            "correlations": correlation_rows(&cols, model.target_corr(), model.max_lag())?,
        }));
    }
    let report_path = sibling_report_path(&args.output);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "generate",
        "model": args.model.display().to_string(),
        "length": args.length,
        "mode": mode,
        "realizations": realizations,
    });
    write_json(&report_path, &report)?;
    println!(
        "{}",
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "generate",
            "files": args.realizations,
            "report": report_path.display().to_string(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_surrogate(args: SurrogateArgs) -> Result<ExitCode> {
    check_distinct(&args.input, &args.output)?;
    if args.realizations == 0 {
        return Err(Error::InvalidInput("realizations must be positive".into()));
    }
    let opts = fit_options(args.order, args.breakpoints, args.epsilon)?;
    let (names, cols) = read_csv(&args.input)?;
    let model = fit_vstap(&cols, Some(&names), &opts)?;
    let reference = LaggedCorrelationSet::estimate(&cols, args.order)?;

    let mut surrogates = Vec::new();
    for b in 0..args.realizations {
        let seed = args.seed.wrapping_add(b as u64);
        let surr = model.surrogate(seed)?;
        let path = realization_path(&args.output, b, args.realizations);
        write_csv(&path, &names, &surr)?;

        let est = LaggedCorrelationSet::estimate(&surr, args.order)?;
        let mut max_dev = 0.0f64;
        for tau in 0..=args.order {
            for i in 0..names.len() {
                for j in 0..names.len() {
                    max_dev = max_dev.max((est.get(i, j, tau) - reference.get(i, j, tau)).abs());
                }
            }
        }
        surrogates.push(json!({
            "file": path.display().to_string(),
            "seed": seed,
            "max_abs_corr_dev": max_dev,
        }));
    }
    let report_path = sibling_report_path(&args.output);
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "surrogate",
        "input": args.input.display().to_string(),
        "order": args.order,
        "observations": cols[0].len(),
        "surrogates": surrogates,
    });
    write_json(&report_path, &report)?;
    println!(
        "{}",
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": "surrogate",
            "files": args.realizations,
            "report": report_path.display().to_string(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------- self-check

struct Check {
    name: &'static str,
    pass: bool,
    details: String,
}

fn check_truncated_moments() -> Check {
    let cases = [
        (-0.7, 0.4, -1.2, 0.9, 0.6),
        (0.3, 1.5, -0.5, 0.2, 0.9),
        (-1.0, 1.0, -1.0, 1.0, -0.45),
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    let mut pass = true;
    for (xl, xh, yl, yh, rho) in cases {
        let rect = match bvn::Rect::new(xl, xh, yl, yh) {
            Ok(r) => r,
            Err(e) => return Check { name: "truncated_moments_vs_monte_carlo", pass: false, details: e.to_string() },
        };
        let exact = match bvn::trunc_moments(&rect, rho) {
            Ok(t) => t,
            Err(e) => return Check { name: "truncated_moments_vs_monte_carlo", pass: false, details: e.to_string() },
        };
        let mc = match oracle::mc_trunc_moments(&rect, rho, 200_000, 1_000, &mut rng) {
            Ok(m) => m,
            Err(e) => return Check { name: "truncated_moments_vs_monte_carlo", pass: false, details: e.to_string() },
        };
        for (got, est) in [
            (exact.prob, mc.prob),
            (exact.mean_x, mc.mean_x),
            (exact.mean_y, mc.mean_y),
            (exact.cross, mc.cross),
        ] {
            let sig = est.sigmas_from(got);
            worst = worst.max(sig);
            pass &= sig <= 4.5;
        }
    }
    Check {
        name: "truncated_moments_vs_monte_carlo",
        pass,
        details: format!("worst deviation {worst:.2} standard errors (limit 4.5)"),
    }
}

fn check_identity_solve() -> Check {
    let run = || -> Result<(f64, SolveStatus)> {
        let t = PiecewiseTransform::identity(20)?;
        let rep = solve_gaussian_corr(&t, &t, 0.35, &SolveOptions::default())?;
        Ok((rep.solution, rep.status))
    };
    match run() {
        Ok((solution, status)) => {
            let pass = status == SolveStatus::Converged && (solution - 0.35).abs() < 1e-3;
            Check {
                name: "identity_solve_round_trip",
                pass,
                details: format!("target 0.35 -> solution {solution:.6}"),
            }
        }
        Err(e) => Check { name: "identity_solve_round_trip", pass: false, details: e.to_string() },
    }
}

fn check_cubic_solve() -> Check {
    let run = || -> Result<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let sample: Vec<f64> = (0..4096)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                g * g * g
            })
            .collect();
        let t = vstap::EmpiricalMarginal::new(&sample)?.fit_piecewise(20)?;
        let target = bvn::psi_eval(&t, &t, 0.5)?;
        let rep = solve_gaussian_corr(&t, &t, target, &SolveOptions::default())?;
        Ok(rep.solution)
    };
    match run() {
        Ok(solution) => Check {
            name: "cubic_solve_round_trip",
            pass: (solution - 0.5).abs() < 1e-3,
            details: format!("correlation 0.5 recovered as {solution:.6}"),
        },
        Err(e) => Check { name: "cubic_solve_round_trip", pass: false, details: e.to_string() },
    }
}

/// Fits white-noise uniform channels with targets (-0.4, 0.2, 0.8); the
/// Gaussian-scale solutions and their repaired versions have known values.
fn check_uniform_triple() -> Result<(Check, Check)> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let samples: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..30_000).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let mut targets = LaggedCorrelationSet::new_zero(3, 0);
    targets.set(0, 1, 0, -0.4);
    targets.set(0, 2, 0, 0.2);
    targets.set(1, 2, 0, 0.8);
    let model = fit_vstap_with_targets(&samples, &targets, None, &FitOptions::new(0))?;

    let want = [(-0.4158234, 0, 1), (0.2090569, 0, 2), (0.8134732, 1, 2)];
    let mut worst = 0.0f64;
    for s in &model.fit_report().pair_solves {
        let w = want
            .iter()
            .find(|(_, i, j)| (*i, *j) == (s.i, s.j))
            .map(|(v, _, _)| *v)
            .unwrap_or(f64::NAN);
        worst = worst.max((s.report.solution - w).abs());
    }
    let solve_check = Check {
        name: "uniform_triple_gaussian_scale",
        pass: worst < 5e-3,
        details: format!("worst |solution - reference| = {worst:.2e} (limit 5e-3)"),
    };

    let repaired = [
        (model.gaussian_corr().get(0, 1, 0), -0.4122),
        (model.gaussian_corr().get(0, 2, 0), 0.2062),
        (model.gaussian_corr().get(1, 2, 0), 0.8065),
    ];
    let worst_rep = repaired
        .iter()
        .map(|(got, want)| (got - want).abs())
        .fold(0.0f64, f64::max);
    let rounds = model.fit_report().gaussian_repair.rounds;
    let repair_check = Check {
        name: "indefinite_matrix_repair",
        pass: worst_rep < 5e-3 && rounds >= 1,
        details: format!(
            "worst |repaired - reference| = {worst_rep:.2e} in {rounds} rounds (limit 5e-3)"
        ),
    };
    Ok((solve_check, repair_check))
}

fn cmd_validate() -> Result<ExitCode> {
    let mut checks = vec![check_truncated_moments(), check_identity_solve(), check_cubic_solve()];
    match check_uniform_triple() {
        Ok((a, b)) => {
            checks.push(a);
            checks.push(b);
        }
        Err(e) => checks.push(Check {
            name: "uniform_triple_gaussian_scale",
            pass: false,
            details: e.to_string(),
        }),
    }

    let failed = checks.iter().filter(|c| !c.pass).count();
    let rows: Vec<Value> = checks
        .iter()
        .map(|c| json!({"name": c.name, "pass": c.pass, "details": c.details}))
        .collect();
    let error = if failed == 0 {
        Value::Null
    } else {
        json!({
            "kind": "validation_failed",
            "message": format!("{failed} of {} checks failed", checks.len()),
        })
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "validate",
        "checks": rows,
        "error": error,
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
