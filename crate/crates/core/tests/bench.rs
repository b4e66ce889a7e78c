use std::process::Command;

use fitgauss::analysis::{sample_stability, stability_region_boundary, StabilityWindow};
use fitgauss::bench::{emit_csv, emit_stability, read_records, run_matrix, RunMatrix};
use fitgauss::fitting::{fit_tableau, FittedMethodSpec, MethodKind};

fn error_of(records: &[fitgauss::bench::BenchRecord], method: &str, n: usize) -> f64 {
    records
        .iter()
        .find(|r| r.method == method && r.n_steps == n)
        .unwrap_or_else(|| panic!("no record for {method} at {n}"))
        .error
}

#[test]
fn reruns_produce_identical_files() {
    let m = RunMatrix::from_names(
        &["G2", "G2-PL-D"],
        &["nonlinear", "resonance-341"],
        vec![120, 240],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    emit_csv(&run_matrix(&m).unwrap(), &a).unwrap();
    emit_csv(&run_matrix(&m).unwrap(), &b).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let back = read_records(bytes.as_slice()).unwrap();
    assert_eq!(back.len(), 8);
    assert_eq!(back[0].method, "G2");
    assert_eq!(back[0].problem, "nonlinear");
}

#[test]
fn fitted_methods_lead_on_the_high_resonance() {
    let m = RunMatrix::from_names(
        &["G2", "G2-PL", "G2-PL-D"],
        &["resonance-989"],
        vec![600, 1200],
    )
    .unwrap();
    let mut records = run_matrix(&m).unwrap();
    records.sort_by_key(|r| r.work);
    for n in [600, 1200] {
        let g2 = error_of(&records, "G2", n);
        assert!(error_of(&records, "G2-PL", n) < g2);
        assert!(error_of(&records, "G2-PL-D", n) < g2);
    }
}

/// Errors for one method across step counts, allowing one increase.
fn assert_monotone(label: &str, errors: &[f64]) {
    assert!(errors.iter().all(|e| e.is_finite()), "{label}: {errors:?}");
    let rises = errors.windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(rises <= 1, "{label}: {errors:?}");
}

#[test]
fn errors_shrink_under_refinement() {
    let grids: [(&str, Vec<usize>); 5] = [
        ("resonance-989", vec![600, 1200, 2400, 4800]),
        ("resonance-341", vec![300, 600, 1200, 2400]),
        ("inhomogeneous", vec![120_000, 240_000, 480_000, 960_000]),
        ("duffing", vec![6000, 12_000, 24_000, 48_000]),
        ("nonlinear", vec![3000, 6000, 12_000, 24_000]),
    ];
    let methods = ["G2", "G2-PL", "G2-PL-D", "Radau-I", "Lobatto-IIIC"];
    for (problem, steps) in grids {
        let m = RunMatrix::from_names(&methods, &[problem], steps).unwrap();
        let records = run_matrix(&m).unwrap();
        for chunk in records.chunks(4) {
            let errors: Vec<f64> = chunk.iter().map(|r| r.error).collect();
            assert_monotone(&format!("{} on {problem}", chunk[0].method), &errors);
        }
    }
}

#[test]
fn stability_boundary_file_for_fitted_method() {
    let tab = fit_tableau(FittedMethodSpec::new(
        MethodKind::PhaseDissipationFitted,
        50.0,
    ))
    .unwrap();
    let window = StabilityWindow::square(20.0, 400);
    let lines = stability_region_boundary(&tab, window);
    // The boundary is one open curve crossing the window just left of the
    // imaginary axis; the strip between it and the axis has |R| > 1.
    assert_eq!(lines.len(), 1);
    assert!(!lines[0].closed);
    assert!(lines[0].points.iter().all(|z| z.re < 0.0 && z.re > -0.2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stab.csv");
    emit_stability(&tab, window, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("curve_id,re,im\n"));
    assert!(text.lines().count() > 10);
    // Dissipation is negative for |y| < 50, so the instability reaches the axis.
    let grid = sample_stability(&tab, window);
    assert!(grid
        .unstable_points(1e-9)
        .iter()
        .filter(|z| z.re <= 0.0)
        .all(|z| z.re > -0.1));
}

#[test]
fn missing_directory_is_reported_with_path() {
    let err = emit_csv(&[], std::path::Path::new("/nonexistent/dir/out.csv")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fitgauss"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let ok = cli()
        .args([
            "bench",
            "--methods",
            "G2",
            "--problems",
            "duffing",
            "--steps",
            "1000",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let records = read_records(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!((records[0].stages, records[0].work), (2, 2000));

    // v = 5 and beyond has no zero phase-lag root: a NaN row.
    let partial = cli()
        .args([
            "bench",
            "--methods",
            "G2-PL",
            "--problems",
            "inhomogeneous",
            "--steps",
            "6000",
        ])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(partial.code(), Some(2));

    let usage = cli()
        .args(["bench", "--methods", "Euler"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Euler"));
    assert_eq!(cli().arg("--bogus").status().unwrap().code(), Some(1));
    assert_eq!(cli().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn cli_coeffs_and_analyze() {
    let out = cli()
        .args(["coeffs", "--methods", "G2-PL", "--v", "1,5"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().nth(2).unwrap().contains("BranchFailure") || out.status.code() == Some(2));
    let out = cli()
        .args(["analyze", "--method", "G2-PL-D", "--fit-v", "1", "--v", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("phase_lag"));
}

#[test]
fn cli_stability_accepts_negative_window() {
    let out = cli()
        .args([
            "stability",
            "--method",
            "G2-PL-D",
            "--v",
            "50",
            "--window",
            "-2,0,-2,2",
            "--resolution",
            "50",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("curve_id,re,im"));
    for line in lines {
        let re: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((-2.0..=0.0).contains(&re), "{line}");
    }
    let short = cli()
        .args(["stability", "--window=-1,1,-1"])
        .output()
        .unwrap();
    assert_eq!(short.status.code(), Some(1));
}
