//! Butcher tableaus and the fixed reference methods.
//!
//! Text format accepted by [`load_tableau`]:
//!
//! ```text
//! # comments run to end of line
//! s
//! c[0]   a[0][0] ... a[0][s-1]
//! ...
//! c[s-1] a[s-1][0] ... a[s-1][s-1]
//! b[0] ... b[s-1]
//! ```
//!
//! Tokens are decimal numbers or `p/q` rationals.

use std::fmt;

use thiserror::Error;

use crate::ext::{dd, sqrt3, to_f64};

/// Row-sum and weight-sum tolerance used when loading external tableaus.
pub const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient {what}")]
    NonFinite { what: String },
}

/// Non-fatal findings reported when loading a tableau.
#[derive(Debug, Clone, PartialEq)]
pub enum TableauWarning {
    /// `sum_j a[row][j]` differs from `c[row]` by `excess`.
    RowSum { row: usize, excess: f64 },
    /// Weights do not sum to one.
    WeightSum { sum: f64 },
}

impl fmt::Display for TableauWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableauWarning::RowSum { row, excess } => {
                write!(f, "row {row}: sum of A differs from c by {excess:e}")
            }
            TableauWarning::WeightSum { sum } => write!(f, "weights sum to {sum}, not 1"),
        }
    }
}

/// Coefficients `(c, A, b)` of an `s`-stage Runge-Kutta method.
///
/// Immutable once built; the fitting module derives modified copies.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    c: Vec<f64>,
    /// Row-major `s x s`.
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ButcherTableau {
    /// Builds a tableau from nodes, stage matrix rows and weights.
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, TableauError> {
        let s = c.len();
        if s == 0 {
            return Err(TableauError::Dimension(
                "tableau needs at least one stage".into(),
            ));
        }
        if b.len() != s {
            return Err(TableauError::Dimension(format!(
                "{} weights for {s} stages",
                b.len()
            )));
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(TableauError::Dimension(format!(
                "stage matrix is not {s}x{s}"
            )));
        }
        let a: Vec<f64> = a.into_iter().flatten().collect();
        for (what, vals) in [("c", &c), ("A", &a), ("b", &b)] {
            if let Some(k) = vals.iter().position(|x| !x.is_finite()) {
                return Err(TableauError::NonFinite {
                    what: format!("{what}[{k}]"),
                });
            }
        }
        Ok(Self { c, a, b })
    }

    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages() + j]
    }

    pub fn a_row(&self, i: usize) -> &[f64] {
        let s = self.stages();
        &self.a[i * s..(i + 1) * s]
    }

    /// Copy with weight `b[i]` replaced.
    pub fn with_weight(&self, i: usize, value: f64) -> Self {
        let mut t = self.clone();
        t.b[i] = value;
        t
    }

    /// Copy with stage coefficient `a[i][j]` replaced.
    pub fn with_stage_coefficient(&self, i: usize, j: usize, value: f64) -> Self {
        let mut t = self.clone();
        let s = t.stages();
        t.a[i * s + j] = value;
        t
    }

    /// True when some `a[i][j]` with `i <= j` is nonzero.
    pub fn is_implicit(&self) -> bool {
        let s = self.stages();
        (0..s).any(|i| (i..s).any(|j| self.a(i, j) != 0.0))
    }

    /// `sum_j a[i][j] - c[i]` for each row.
    pub fn row_sum_defects(&self) -> Vec<f64> {
        (0..self.stages())
            .map(|i| self.a_row(i).iter().sum::<f64>() - self.c[i])
            .collect()
    }

    /// Consistency findings beyond [`CONSISTENCY_TOL`].
    pub fn consistency_warnings(&self) -> Vec<TableauWarning> {
        let mut out: Vec<TableauWarning> = self
            .row_sum_defects()
            .into_iter()
            .enumerate()
            .filter(|(_, d)| d.abs() > CONSISTENCY_TOL)
            .map(|(row, excess)| TableauWarning::RowSum { row, excess })
            .collect();
        let sum: f64 = self.b.iter().sum();
        if (sum - 1.0).abs() > CONSISTENCY_TOL {
            out.push(TableauWarning::WeightSum { sum });
        }
        out
    }

    /// Renders the tableau in the text format read by [`load_tableau`].
    ///
    /// Numbers are written with the shortest representation that parses back
    /// to the same `f64`, so a round trip is bit-exact.
    pub fn to_text(&self) -> String {
        let s = self.stages();
        let mut out = format!("{s}\n");
        for i in 0..s {
            out.push_str(&format!("{:?}", self.c[i]));
            for &x in self.a_row(i) {
                out.push_str(&format!(" {x:?}"));
            }
            out.push('\n');
        }
        let b: Vec<String> = self.b.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&b.join(" "));
        out.push('\n');
        out
    }
}

/// Two-stage Gauss-Legendre method, order 4.
pub fn gauss2() -> ButcherTableau {
    let r = sqrt3() / 6.0;
    let c0 = to_f64(dd(0.5) - r);
    let c1 = to_f64(dd(0.5) + r);
    let a01 = to_f64(dd(0.25) - r);
    let a10 = to_f64(dd(0.25) + r);
    ButcherTableau::new(
        vec![c0, c1],
        vec![vec![0.25, a01], vec![a10, 0.25]],
        vec![0.5, 0.5],
    )
    .expect("gauss2 is well formed")
}

/// Two-stage Radau IA method, order 3.
pub fn radau1() -> ButcherTableau {
    ButcherTableau::new(
        vec![0.0, 2.0 / 3.0],
        vec![vec![0.25, -0.25], vec![0.25, 5.0 / 12.0]],
        vec![0.25, 0.75],
    )
    .expect("radau1 is well formed")
}

/// Three-stage Lobatto IIIC method, order 4.
pub fn lobatto3c() -> ButcherTableau {
    ButcherTableau::new(
        vec![0.0, 0.5, 1.0],
        vec![
            vec![1.0 / 6.0, -1.0 / 3.0, 1.0 / 6.0],
            vec![1.0 / 6.0, 5.0 / 12.0, -1.0 / 12.0],
            vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        ],
        vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    )
    .expect("lobatto3c is well formed")
}

/// A tableau read from text together with its non-fatal consistency findings.
#[derive(Debug, Clone)]
pub struct LoadedTableau {
    pub tableau: ButcherTableau,
    pub warnings: Vec<TableauWarning>,
}

fn parse_number(tok: &str, line: usize) -> Result<f64, TableauError> {
    let err = |msg: String| TableauError::Parse { line, msg };
    match tok.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p
                .parse()
                .map_err(|_| err(format!("bad numerator in `{tok}`")))?;
            let q: f64 = q
                .parse()
                .map_err(|_| err(format!("bad denominator in `{tok}`")))?;
            if q == 0.0 {
                return Err(err(format!("zero denominator in `{tok}`")));
            }
            Ok(p / q)
        }
        None => tok.parse().map_err(|_| err(format!("bad number `{tok}`"))),
    }
}

/// Parses a tableau from the text format described in the module docs.
pub fn load_tableau(source: &str) -> Result<LoadedTableau, TableauError> {
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let nums = content
            .split_whitespace()
            .map(|t| parse_number(t, line))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((line, nums));
    }
    let mut it = rows.into_iter();
    let (line, header) = it.next().ok_or(TableauError::Parse {
        line: 0,
        msg: "empty input".into(),
    })?;
    let s = match header.as_slice() {
        [x] if *x >= 1.0 && x.fract() == 0.0 => *x as usize,
        _ => {
            return Err(TableauError::Parse {
                line,
                msg: "first line must hold the stage count".into(),
            })
        }
    };
    let rest: Vec<(usize, Vec<f64>)> = it.collect();
    if rest.len() != s + 1 {
        return Err(TableauError::Dimension(format!(
            "expected {} data lines after the stage count, found {}",
            s + 1,
            rest.len()
        )));
    }
    let mut c = Vec::with_capacity(s);
    let mut a = Vec::with_capacity(s);
    for (line, nums) in &rest[..s] {
        if nums.len() != s + 1 {
            return Err(TableauError::Dimension(format!(
                "line {line}: expected c and {s} stage coefficients, found {} numbers",
                nums.len()
            )));
        }
        c.push(nums[0]);
        a.push(nums[1..].to_vec());
    }
    let b = rest[s].1.clone();
    let tableau = ButcherTableau::new(c, a, b)?;
    let warnings = tableau.consistency_warnings();
    Ok(LoadedTableau { tableau, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss2_coefficients() {
        let g = gauss2();
        assert_eq!(g.stages(), 2);
        assert!((g.c()[0] - 0.211_324_865_405_187_1).abs() < 1e-16);
        assert_eq!(g.b()[0] + g.b()[1], 1.0);
        assert_eq!(g.a(0, 0), 0.25);
        assert!(g.is_implicit());
    }

    #[test]
    fn fixed_methods_are_row_sum_consistent() {
        for t in [gauss2(), radau1(), lobatto3c()] {
            for d in t.row_sum_defects() {
                assert!(d.abs() <= 1e-15, "defect {d}");
            }
            assert!((t.b().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
        assert_eq!(radau1().b(), &[0.25, 0.75]);
        assert_eq!(lobatto3c().c(), &[0.0, 0.5, 1.0]);
        let r = radau1();
        assert!((r.a(1, 0) + r.a(1, 1) - 2.0 / 3.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn explicit_tableau_is_not_implicit() {
        let euler = ButcherTableau::new(vec![0.0], vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(!euler.is_implicit());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for t in [gauss2(), radau1(), lobatto3c()] {
            let back = load_tableau(&t.to_text()).unwrap();
            assert_eq!(back.tableau, t);
            assert!(back.warnings.is_empty());
        }
    }

    #[test]
    fn parses_rationals_and_comments() {
        let src = "# Radau IA\n2\n0   1/4 -1/4  # first row\n2/3 1/4 5/12\n1/4 3/4\n";
        let t = load_tableau(src).unwrap().tableau;
        assert_eq!(t, radau1());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let src = "2\n0 0.25 -0.25\n0.6666 0.25 0.4166\n0.25 0.5 0.25\n";
        let err = load_tableau(src).unwrap_err();
        assert!(matches!(err, TableauError::Dimension(_)), "{err}");
        assert!(matches!(
            load_tableau("2\n0 1 2\n"),
            Err(TableauError::Dimension(_))
        ));
    }

    #[test]
    fn malformed_numbers_are_parse_errors() {
        assert!(matches!(
            load_tableau("1\n0 abc\n1\n"),
            Err(TableauError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            load_tableau("1\n0 1/0\n1\n"),
            Err(TableauError::Parse { .. })
        ));
        assert!(matches!(
            load_tableau("1.5\n"),
            Err(TableauError::Parse { .. })
        ));
        assert!(matches!(
            load_tableau("  # only a comment\n"),
            Err(TableauError::Parse { .. })
        ));
    }

    #[test]
    fn inconsistent_weights_are_warnings_not_errors() {
        let src = "1\n0.5 0.5\n0.9\n";
        let loaded = load_tableau(src).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(matches!(loaded.warnings[0], TableauWarning::WeightSum { sum } if sum == 0.9));

        let src = "1\n0.5 0.4\n1\n";
        let loaded = load_tableau(src).unwrap();
        assert!(matches!(
            loaded.warnings[0],
            TableauWarning::RowSum { row: 0, .. }
        ));
    }
}
