//! Method x problem x step-count matrices and their CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, stability_region_boundary, write_polylines_csv, StabilityWindow};
use crate::fitting::{b2_a22_fitted, b2_phase_fitted, Branch, MethodKind};
use crate::integrator::{integrate, snap_steps, Method, SolverConfig, Trajectory};
use crate::problems::{
    accuracy_digits, error_metric, problem_by_name, BenchmarkProblem, ProblemError,
};
use crate::tableau::{lobatto3c, radau1, ButcherTableau};

pub const METHOD_NAMES: [&str; 5] = ["G2", "G2-PL", "G2-PL-D", "Radau-I", "Lobatto-IIIC"];

/// Step counts are snapped upward by at most this factor.
const MAX_SNAP_FACTOR: usize = 100;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown method `{0}` (known: G2, G2-PL, G2-PL-D, Radau-I, Lobatto-IIIC)")]
    UnknownMethod(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid run matrix: {0}")]
    InvalidMatrix(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMethod {
    pub name: String,
    pub method: Method,
}

impl NamedMethod {
    pub fn new(name: impl Into<String>, method: Method) -> Self {
        Self {
            name: name.into(),
            method,
        }
    }
}

/// Resolves one of [`METHOD_NAMES`] (case-insensitive).
pub fn method_by_name(name: &str) -> Result<NamedMethod, BenchError> {
    let canonical = METHOD_NAMES
        .iter()
        .find(|m| m.eq_ignore_ascii_case(name))
        .ok_or_else(|| BenchError::UnknownMethod(name.to_string()))?;
    let method = match *canonical {
        "Radau-I" => Method::Fixed(radau1()),
        "Lobatto-IIIC" => Method::Fixed(lobatto3c()),
        fitted => Method::Fitted(
            fitted
                .parse::<MethodKind>()
                .map_err(BenchError::UnknownMethod)?,
        ),
    };
    Ok(NamedMethod::new(*canonical, method))
}

#[derive(Debug, Clone)]
pub struct RunMatrix {
    pub methods: Vec<NamedMethod>,
    pub problems: Vec<BenchmarkProblem>,
    /// Requested step counts, strictly increasing.
    pub steps: Vec<usize>,
    pub solver: SolverConfig,
    /// Record wall time per cell. Off by default so output is reproducible.
    pub timing: bool,
}

impl RunMatrix {
    pub fn from_names(
        methods: &[&str],
        problems: &[&str],
        steps: Vec<usize>,
    ) -> Result<Self, BenchError> {
        let m = Self {
            methods: methods
                .iter()
                .map(|n| method_by_name(n))
                .collect::<Result<_, _>>()?,
            problems: problems
                .iter()
                .map(|n| problem_by_name(n))
                .collect::<Result<_, _>>()?,
            steps,
            solver: SolverConfig::default(),
            timing: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.methods.is_empty() || self.problems.is_empty() || self.steps.is_empty() {
            return Err(BenchError::InvalidMatrix(
                "methods, problems and steps must be non-empty".into(),
            ));
        }
        if self.steps[0] == 0 || self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BenchError::InvalidMatrix(
                "step counts must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Step count actually used for `problem`: the smallest count `>= n` that
/// puts every frequency breakpoint on the grid.
pub fn snapped_steps(problem: &BenchmarkProblem, n: usize) -> Option<usize> {
    snap_steps(
        problem.t0,
        problem.t1,
        n,
        problem.frequency().breakpoints(),
        MAX_SNAP_FACTOR,
    )
}

/// One row of benchmark output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub problem: String,
    pub n_steps: usize,
    pub stages: usize,
    pub work: usize,
    pub log10_work: f64,
    pub error: f64,
    pub accuracy_digits: f64,
    pub wall_time_ms: Option<f64>,
    pub newton_iters_total: usize,
    /// Empty on success; the failure message otherwise.
    pub reason: String,
}

impl BenchRecord {
    pub fn failed(&self) -> bool {
        self.error.is_nan()
    }
}

/// Output of a single cell, with the trajectory when integration finished.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub record: BenchRecord,
    pub trajectory: Option<Trajectory>,
}

fn run_cell(
    m: &NamedMethod,
    p: &BenchmarkProblem,
    requested: usize,
    matrix: &RunMatrix,
    keep: bool,
) -> CellResult {
    let stages = m.method.stages();
    let mut record = BenchRecord {
        method: m.name.clone(),
        problem: p.name.to_string(),
        n_steps: requested,
        stages,
        work: requested * stages,
        log10_work: ((requested * stages) as f64).log10(),
        error: f64::NAN,
        accuracy_digits: f64::NAN,
        wall_time_ms: None,
        newton_iters_total: 0,
        reason: String::new(),
    };
    let Some(n) = snapped_steps(p, requested) else {
        record.reason = format!(
            "no step count within {MAX_SNAP_FACTOR}x of {requested} aligns the breakpoints"
        );
        return CellResult {
            record,
            trajectory: None,
        };
    };
    record.n_steps = n;
    record.work = n * stages;
    record.log10_work = (record.work as f64).log10();

    let start = Instant::now();
    let outcome = integrate(&m.method, p.system(), &p.y0, p.t0, p.t1, n, &matrix.solver);
    if matrix.timing {
        record.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    match outcome {
        Ok(traj) => {
            record.newton_iters_total = traj.stats.newton_iterations_total;
            debug_assert_eq!(traj.stats.work(), record.work);
            match error_metric(p, &traj) {
                Ok(e) => {
                    record.error = e;
                    record.accuracy_digits = accuracy_digits(e);
                }
                Err(err) => record.reason = err.to_string(),
            }
            CellResult {
                record,
                trajectory: keep.then_some(traj),
            }
        }
        Err(err) => {
            if let Some(partial) = err.partial() {
                record.newton_iters_total = partial.stats.newton_iterations_total;
            }
            record.reason = err.to_string();
            CellResult {
                record,
                trajectory: None,
            }
        }
    }
}

fn cells(m: &RunMatrix) -> Vec<(&NamedMethod, &BenchmarkProblem, usize)> {
    m.methods
        .iter()
        .flat_map(|meth| {
            m.problems
                .iter()
                .flat_map(move |p| m.steps.iter().map(move |&n| (meth, p, n)))
        })
        .collect()
}

/// Runs every cell, in parallel, returning results method-major, then by
/// problem, then by step count. Failed cells carry `error = NaN`.
pub fn run_matrix_cells(
    m: &RunMatrix,
    keep_trajectories: bool,
) -> Result<Vec<CellResult>, BenchError> {
    m.validate()?;
    Ok(cells(m)
        .into_par_iter()
        .map(|(meth, p, n)| run_cell(meth, p, n, m, keep_trajectories))
        .collect())
}

pub fn run_matrix(m: &RunMatrix) -> Result<Vec<BenchRecord>, BenchError> {
    Ok(run_matrix_cells(m, false)?
        .into_iter()
        .map(|c| c.record)
        .collect())
}

/// Writes records as CSV, preceded by `# key: value` lines for each entry of
/// `metadata`. The header row is always present.
pub fn write_records<W: Write>(
    out: W,
    records: &[BenchRecord],
    metadata: &[(String, String)],
) -> csv::Result<()> {
    let mut out = out;
    for (k, v) in metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    wtr.write_record([
        "method",
        "problem",
        "n_steps",
        "stages",
        "work",
        "log10_work",
        "error",
        "accuracy_digits",
        "wall_time_ms",
        "newton_iters_total",
        "reason",
    ])?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads records written by [`write_records`], skipping `#` lines.
pub fn read_records<R: std::io::Read>(input: R) -> csv::Result<Vec<BenchRecord>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BenchError + '_ {
    move |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<(), BenchError> {
    emit_csv_with_metadata(records, &[], path)
}

pub fn emit_csv_with_metadata(
    records: &[BenchRecord],
    metadata: &[(String, String)],
    path: &Path,
) -> Result<(), BenchError> {
    write_records(create(path)?, records, metadata).map_err(csv_err(path))
}

/// Writes the `|R(z)| = 1` contours of `tab` over `window`.
pub fn emit_stability(
    tab: &ButcherTableau,
    window: StabilityWindow,
    path: &Path,
) -> Result<(), BenchError> {
    let lines = stability_region_boundary(tab, window);
    write_polylines_csv(create(path)?, &lines).map_err(csv_err(path))
}

/// Fitted coefficients of one method at one `v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub method: String,
    pub v: f64,
    pub b2: f64,
    pub a22: f64,
    pub branch: String,
    pub status: String,
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::ClosedForm => "closed-form",
        Branch::Series => "series",
    }
}

/// `b2` and `a22` of `kind` over `vs`. Failures keep NaN coefficients and the
/// error message as status.
pub fn coefficient_table(kind: MethodKind, vs: &[f64]) -> Vec<CoefficientRow> {
    vs.iter()
        .map(|&v| {
            let row = |b2: f64, a22: f64, branch: &str, status: String| CoefficientRow {
                method: kind.name().to_string(),
                v,
                b2,
                a22,
                branch: branch.to_string(),
                status,
            };
            match kind {
                MethodKind::Classical => row(0.5, 0.25, "exact", "ok".into()),
                MethodKind::PhaseFitted => match b2_phase_fitted(v) {
                    Ok(b) => row(b.value, 0.25, branch_name(b.branch), "ok".into()),
                    Err(e) => row(f64::NAN, 0.25, "", e.to_string()),
                },
                MethodKind::PhaseDissipationFitted => match b2_a22_fitted(v) {
                    Ok((b, a)) => row(b.value, a.value, branch_name(b.branch), "ok".into()),
                    Err(e) => row(f64::NAN, f64::NAN, "", e.to_string()),
                },
            }
        })
        .collect()
}

pub fn write_coefficients<W: Write>(out: W, rows: &[CoefficientRow]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Order and symplecticity residuals of `tab`, then phase-lag and
/// dissipation at each `v`, as `quantity,v,value` rows.
pub fn write_analysis<W: Write>(out: W, tab: &ButcherTableau, vs: &[f64]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["quantity", "v", "value"])?;
    let res = analysis::residuals(tab);
    for (k, r) in res.order.iter().enumerate() {
        wtr.write_record([format!("order_{}", k + 1), String::new(), format!("{r:?}")])?;
    }
    let s = tab.stages();
    let mut labels: Vec<String> = (1..=s).map(|i| format!("symplectic_{i}{i}")).collect();
    for i in 1..=s {
        for j in i + 1..=s {
            labels.push(format!("symplectic_{i}{j}"));
        }
    }
    for (label, r) in labels.iter().zip(&res.symplectic) {
        wtr.write_record([label.clone(), String::new(), format!("{r:?}")])?;
    }
    for &v in vs {
        let phi = analysis::phase_lag(tab, v).map_or(f64::NAN, |x| x);
        let alpha = analysis::dissipation(tab, v).map_or(f64::NAN, |x| x);
        wtr.write_record([
            "phase_lag".to_string(),
            format!("{v:?}"),
            format!("{phi:?}"),
        ])?;
        wtr.write_record([
            "dissipation".to_string(),
            format!("{v:?}"),
            format!("{alpha:?}"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_bookkeeping() {
        let m = RunMatrix::from_names(&["G2"], &["duffing"], vec![100]).unwrap();
        let recs = run_matrix(&m).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!((recs[0].stages, recs[0].work), (2, 200));
        assert_eq!(recs[0].wall_time_ms, None);
    }

    #[test]
    fn resonance_steps_are_snapped() {
        let m = RunMatrix::from_names(&["G2-PL-D"], &["resonance-989"], vec![100]).unwrap();
        let recs = run_matrix(&m).unwrap();
        assert_eq!(recs[0].n_steps, 120);
        assert!(recs[0].error.is_finite());
    }

    #[test]
    fn ordering_is_method_major() {
        let m = RunMatrix::from_names(
            &["G2", "Radau-I"],
            &["nonlinear", "duffing"],
            vec![200, 400],
        )
        .unwrap();
        let keys: Vec<(String, String, usize)> = run_matrix(&m)
            .unwrap()
            .into_iter()
            .map(|r| (r.method, r.problem, r.n_steps))
            .collect();
        assert_eq!(keys[0], ("G2".into(), "nonlinear".into(), 200));
        assert_eq!(keys[1], ("G2".into(), "nonlinear".into(), 400));
        assert_eq!(keys[2], ("G2".into(), "duffing".into(), 200));
        assert_eq!(keys[4], ("Radau-I".into(), "nonlinear".into(), 200));
    }

    #[test]
    fn failures_become_nan_rows() {
        // h = 20 pi / 100 gives v = 2 pi, where no zero phase-lag b2 exists.
        let m = RunMatrix::from_names(&["G2-PL"], &["nonlinear"], vec![100]).unwrap();
        let r = &run_matrix(&m).unwrap()[0];
        assert!(r.failed());
        assert!(r.reason.contains("phase"), "{}", r.reason);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        assert!(matches!(
            RunMatrix::from_names(&["G5"], &["duffing"], vec![10]),
            Err(BenchError::UnknownMethod(_))
        ));
        assert!(matches!(
            RunMatrix::from_names(&["G2"], &["kepler"], vec![10]),
            Err(BenchError::Problem(_))
        ));
        assert!(RunMatrix::from_names(&["G2"], &["duffing"], vec![20, 10]).is_err());
        assert!(RunMatrix::from_names(&["G2"], &["duffing"], vec![]).is_err());
        assert!(RunMatrix::from_names(&[], &["duffing"], vec![1]).is_err());
    }

    #[test]
    fn method_names_resolve() {
        for n in METHOD_NAMES {
            assert_eq!(method_by_name(n).unwrap().name, n);
        }
        assert_eq!(method_by_name("radau-i").unwrap().method.stages(), 2);
        assert_eq!(method_by_name("Lobatto-IIIC").unwrap().method.stages(), 3);
    }

    #[test]
    fn empty_record_list_is_header_only() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[], &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,problem,n_steps,stages,work,log10_work,error,accuracy_digits,wall_time_ms,newton_iters_total,reason\n"
        );
    }

    #[test]
    fn record_round_trips() {
        let r = BenchRecord {
            method: "G2-PL".into(),
            problem: "duffing".into(),
            n_steps: 400,
            stages: 2,
            work: 800,
            log10_work: 800f64.log10(),
            error: 1.234e-9,
            accuracy_digits: -(1.234e-9f64).log10(),
            wall_time_ms: Some(0.125),
            newton_iters_total: 1234,
            reason: String::new(),
        };
        let mut buf = Vec::new();
        write_records(
            &mut buf,
            std::slice::from_ref(&r),
            &[("grid".into(), "x".into())],
        )
        .unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn coefficient_rows_report_failures() {
        let rows = coefficient_table(MethodKind::PhaseFitted, &[0.001, 1.0, 5.0]);
        assert_eq!(rows[0].branch, "series");
        assert_eq!(rows[1].branch, "closed-form");
        assert!(rows[2].b2.is_nan() && rows[2].status.contains("phase"));
    }
}
