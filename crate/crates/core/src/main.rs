use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fitgauss::analysis::StabilityWindow;
use fitgauss::bench::{
    coefficient_table, emit_csv_with_metadata, emit_stability, method_by_name, run_matrix_cells,
    snapped_steps, write_analysis, write_coefficients, write_records, BenchError, BenchRecord,
    CellResult, NamedMethod, RunMatrix, METHOD_NAMES,
};
use fitgauss::fitting::{fit_tableau, FittedMethodSpec, MethodKind};
use fitgauss::integrator::Method;
use fitgauss::problems::{problem_by_name, Reference, PROBLEM_NAMES};
use fitgauss::tableau::{load_tableau, ButcherTableau};

/// Frequency-fitted two-stage Gauss methods: benchmarks and analysis.
#[derive(Debug, Parser)]
#[command(name = "fitgauss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a method x problem x step-count matrix and write one CSV row per cell.
    Bench(BenchArgs),
    /// Write the |R(z)| = 1 contours of a method as `curve_id,re,im` polylines.
    Stability(StabilityArgs),
    /// Dump fitted coefficients over a grid of v.
    Coeffs(CoeffsArgs),
    /// Order and symplecticity residuals, phase-lag and dissipation of a tableau.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated methods: G2, G2-PL, G2-PL-D, Radau-I, Lobatto-IIIC.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "G2,G2-PL,G2-PL-D,Radau-I,Lobatto-IIIC"
    )]
    methods: Vec<String>,
    /// Comma-separated problems.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "resonance-989,resonance-341,inhomogeneous,duffing,nonlinear"
    )]
    problems: Vec<String>,
    /// Step counts, either `n1,n2,...` or `base:k` for base * 2^0 ... base * 2^k.
    /// Defaults to 60:6 for resonance problems and 100:6 otherwise.
    #[arg(long)]
    steps: Option<String>,
    /// Extra fixed tableau to include, named after the file stem.
    #[arg(long)]
    tableau_file: Option<PathBuf>,
    /// Record wall time per cell (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Directory for per-cell trajectory CSVs (`t,y_0,...`).
    #[arg(long)]
    dump_trajectories: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MethodSelect {
    /// Method name; ignored when --tableau-file is given.
    #[arg(long, default_value = "G2")]
    method: String,
    /// Fitting parameter for G2-PL and G2-PL-D.
    #[arg(long = "fit-v")]
    fit_v: Option<f64>,
    /// Tableau file (`c` / `A` rows / `b` blocks, see README).
    #[arg(long)]
    tableau_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    select: MethodSelect,
    /// Fitting parameter; alias of --fit-v.
    #[arg(long)]
    v: Option<f64>,
    /// Window `re_min,re_max,im_min,im_max`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-20,20,-20,20"
    )]
    window: Vec<f64>,
    /// Samples per axis.
    #[arg(long, default_value_t = StabilityWindow::DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CoeffsArgs {
    #[arg(long, value_delimiter = ',', default_value = "G2-PL,G2-PL-D")]
    methods: Vec<String>,
    /// Values of v: `v1,v2,...` or `lo:hi:count` (evenly spaced).
    #[arg(long, default_value = "0.05:10:200")]
    v: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    select: MethodSelect,
    /// Points at which to report phase-lag and dissipation.
    #[arg(long, default_value = "0.1,0.5,1,2,5,10,20")]
    v: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{0}")]
    Io(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_steps(s: &str) -> Result<Vec<usize>, CliError> {
    if let Some((base, k)) = s.split_once(':') {
        let base: usize = base
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad step base `{base}`")))?;
        let k: u32 = k
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad doubling count `{k}`")))?;
        return Ok((0..=k).map(|j| base << j).collect());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| usage(format!("bad step count `{x}`")))
        })
        .collect()
}

fn parse_vs(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("bad number `{x}`")))
    };
    if parts.len() == 3 {
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad count `{}`", parts[2])))?;
        if n == 0 {
            return Err(usage("v grid needs at least one point"));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        return Ok((0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect());
    }
    s.split(',').map(num).collect()
}

fn read_tableau(path: &Path) -> Result<ButcherTableau, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let loaded = load_tableau(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    for w in &loaded.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(loaded.tableau)
}

fn select_tableau(sel: &MethodSelect, v_alias: Option<f64>) -> Result<ButcherTableau, CliError> {
    if let Some(path) = &sel.tableau_file {
        return read_tableau(path);
    }
    let named = method_by_name(&sel.method)?;
    match named.method {
        Method::Fixed(t) => Ok(t),
        Method::Fitted(kind) => {
            let v = match (sel.fit_v.or(v_alias), kind) {
                (Some(v), _) => v,
                (None, MethodKind::Classical) => 0.0,
                (None, _) => return Err(usage(format!("{kind} needs --fit-v"))),
            };
            fit_tableau(FittedMethodSpec::new(kind, v)).map_err(|e| usage(e.to_string()))
        }
    }
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(p) => fs::File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn out_label(out: &Option<PathBuf>) -> String {
    out.as_ref()
        .map_or("stdout".into(), |p| p.display().to_string())
}

fn csv_io(out: &Option<PathBuf>) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", out_label(out)))
}

fn default_steps(problem: &str) -> Vec<usize> {
    let base = if problem.starts_with("resonance") {
        60
    } else {
        100
    };
    (0..=6).map(|j| base << j).collect()
}

fn bench(args: BenchArgs) -> Result<bool, CliError> {
    let mut methods: Vec<NamedMethod> = args
        .methods
        .iter()
        .map(|n| method_by_name(n))
        .collect::<Result<_, _>>()?;
    if let Some(path) = &args.tableau_file {
        let name = path
            .file_stem()
            .map_or("custom".into(), |s| s.to_string_lossy().into_owned());
        methods.push(NamedMethod::new(name, Method::Fixed(read_tableau(path)?)));
    }
    let problems = args
        .problems
        .iter()
        .map(|n| problem_by_name(n).map_err(BenchError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let explicit_steps = args.steps.as_deref().map(parse_steps).transpose()?;

    // One matrix per (method, problem) keeps method-major order while letting
    // step defaults differ between problems.
    let mut metadata = vec![(
        "methods".to_string(),
        methods
            .iter()
            .map(|m| m.name.as_str())
            .collect::<Vec<_>>()
            .join(" "),
    )];
    let mut plans = Vec::new();
    for p in &problems {
        let steps = explicit_steps
            .clone()
            .unwrap_or_else(|| default_steps(p.name));
        let snapped: Vec<String> = steps
            .iter()
            .filter_map(|&n| {
                snapped_steps(p, n)
                    .filter(|&m| m != n)
                    .map(|m| format!("{n}->{m}"))
            })
            .collect();
        if !snapped.is_empty() {
            eprintln!(
                "{}: step counts snapped to the frequency breakpoints: {}",
                p.name,
                snapped.join(" ")
            );
            metadata.push((format!("snapped {}", p.name), snapped.join(" ")));
        }
        metadata.push((
            format!("steps {}", p.name),
            steps
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ));
        let metric = match p.reference {
            Reference::ClosedForm(_) => "max |y - y_exact| over grid",
            Reference::Endpoint(_) => "|y(t1) - y_ref|",
            Reference::PhaseShift { .. } => "|delta - pi/2| from the last two grid points",
        };
        metadata.push((format!("error {}", p.name), metric.to_string()));
        plans.push((p.clone(), steps));
    }

    let mut results: Vec<CellResult> = Vec::new();
    for m in &methods {
        for (p, steps) in &plans {
            let matrix = RunMatrix {
                methods: vec![m.clone()],
                problems: vec![p.clone()],
                steps: steps.clone(),
                solver: Default::default(),
                timing: args.timing,
            };
            matrix.validate().map_err(|e| usage(e.to_string()))?;
            results.extend(run_matrix_cells(&matrix, args.dump_trajectories.is_some())?);
        }
    }

    if let Some(dir) = &args.dump_trajectories {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for c in &results {
            if let Some(traj) = &c.trajectory {
                let r = &c.record;
                let path = dir.join(format!("{}_{}_{}.csv", r.method, r.problem, r.n_steps));
                let f = fs::File::create(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                traj.write_csv(io::BufWriter::new(f))
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
        }
    }

    let records: Vec<BenchRecord> = results.into_iter().map(|c| c.record).collect();
    for r in records.iter().filter(|r| r.failed()) {
        eprintln!(
            "{} on {} with {} steps failed: {}",
            r.method, r.problem, r.n_steps, r.reason
        );
    }
    match &args.out {
        Some(path) => emit_csv_with_metadata(&records, &metadata, path)?,
        None => {
            write_records(io::stdout().lock(), &records, &metadata).map_err(csv_io(&args.out))?
        }
    }
    Ok(records.iter().all(|r| !r.failed()))
}

fn stability(args: StabilityArgs) -> Result<bool, CliError> {
    let tab = select_tableau(&args.select, args.v)?;
    let [re_min, re_max, im_min, im_max] = args.window[..] else {
        return Err(usage("--window takes four numbers"));
    };
    if !(re_min < re_max && im_min < im_max) || args.resolution < 2 {
        return Err(usage("window must be non-empty with resolution >= 2"));
    }
    let window = StabilityWindow {
        re_min,
        re_max,
        im_min,
        im_max,
        nx: args.resolution,
        ny: args.resolution,
    };
    match &args.out {
        Some(path) => emit_stability(&tab, window, path)?,
        None => {
            let lines = fitgauss::analysis::stability_region_boundary(&tab, window);
            fitgauss::analysis::write_polylines_csv(io::stdout().lock(), &lines)
                .map_err(csv_io(&args.out))?;
        }
    }
    Ok(true)
}

fn coeffs(args: CoeffsArgs) -> Result<bool, CliError> {
    let vs = parse_vs(&args.v)?;
    let mut rows = Vec::new();
    for name in &args.methods {
        let kind: MethodKind = name.parse().map_err(CliError::Usage)?;
        rows.extend(coefficient_table(kind, &vs));
    }
    write_coefficients(open_out(&args.out)?, &rows).map_err(csv_io(&args.out))?;
    Ok(rows.iter().all(|r| r.status == "ok"))
}

fn analyze(args: AnalyzeArgs) -> Result<bool, CliError> {
    let tab = select_tableau(&args.select, None)?;
    let vs = parse_vs(&args.v)?;
    write_analysis(open_out(&args.out)?, &tab, &vs).map_err(csv_io(&args.out))?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Stability(a) => stability(a),
        Command::Coeffs(a) => coeffs(a),
        Command::Analyze(a) => analyze(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Bench(BenchError::UnknownMethod(_))
            | CliError::Bench(BenchError::Problem(_)) = e
            {
                eprintln!("methods: {}", METHOD_NAMES.join(", "));
                eprintln!("problems: {}", PROBLEM_NAMES.join(", "));
            }
            ExitCode::from(1)
        }
    }
}
