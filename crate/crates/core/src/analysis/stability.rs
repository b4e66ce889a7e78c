//! Sampling `|R(z)|` over a window of the complex plane and extracting the
//! `|R(z)| = 1` level set with marching squares.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use super::stability_function;
use crate::tableau::ButcherTableau;

/// Rectangular window `[re_min, re_max] x [im_min, im_max]` sampled on an
/// `nx x ny` lattice including the edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl StabilityWindow {
    pub const DEFAULT_RESOLUTION: usize = 800;

    pub fn square(half_width: f64, resolution: usize) -> Self {
        Self {
            re_min: -half_width,
            re_max: half_width,
            im_min: -half_width,
            im_max: half_width,
            nx: resolution,
            ny: resolution,
        }
    }

    pub fn re_at(&self, i: usize) -> f64 {
        lerp(self.re_min, self.re_max, i, self.nx)
    }

    pub fn im_at(&self, j: usize) -> f64 {
        lerp(self.im_min, self.im_max, j, self.ny)
    }
}

fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        return lo;
    }
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// `|R(z)|` on the window lattice, row-major in the imaginary direction
/// (`values[j * nx + i]` is at `re_at(i) + i im_at(j)`). Poles are `+inf`.
#[derive(Debug, Clone)]
pub struct StabilityGrid {
    pub window: StabilityWindow,
    pub values: Vec<f64>,
}

impl StabilityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.window.nx + i]
    }

    /// Points sampled with `|R| > 1 + tol`.
    pub fn unstable_points(&self, tol: f64) -> Vec<Complex64> {
        let w = &self.window;
        (0..w.ny)
            .flat_map(|j| (0..w.nx).map(move |i| (i, j)))
            .filter(|&(i, j)| !(self.at(i, j) <= 1.0 + tol))
            .map(|(i, j)| Complex64::new(w.re_at(i), w.im_at(j)))
            .collect()
    }
}

/// Samples `|R(z)|` on the lattice. Rows are computed in parallel and
/// assembled in order, so the result does not depend on scheduling.
pub fn sample_stability(t: &ButcherTableau, window: StabilityWindow) -> StabilityGrid {
    let rows: Vec<Vec<f64>> = (0..window.ny)
        .into_par_iter()
        .map(|j| {
            let im = window.im_at(j);
            (0..window.nx)
                .map(|i| {
                    let z = Complex64::new(window.re_at(i), im);
                    match stability_function(t, z) {
                        Ok(r) if r.is_finite() => r.norm(),
                        _ => f64::INFINITY,
                    }
                })
                .collect()
        })
        .collect();
    StabilityGrid {
        window,
        values: rows.into_iter().flatten().collect(),
    }
}

/// A piece of the `|R| = 1` curve. Closed curves repeat their first point.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Complex64>,
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between lattice points (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between lattice points (i, j) and (i, j + 1).
    V(usize, usize),
}

/// Extracts the `|R(z)| = 1` contours of `t` over `window`.
pub fn stability_region_boundary(t: &ButcherTableau, window: StabilityWindow) -> Vec<Polyline> {
    contours(&sample_stability(t, window))
}

/// Marching squares on `|R| - 1` with linear interpolation along cell edges.
/// Saddle cells are resolved with the mean of the four corners.
pub(crate) fn contours(grid: &StabilityGrid) -> Vec<Polyline> {
    let w = grid.window;
    if w.nx < 2 || w.ny < 2 {
        return Vec::new();
    }
    // Clamp poles so interpolation stays finite.
    let f = |i: usize, j: usize| (grid.at(i, j) - 1.0).min(1e12);
    let point_on = |e: Edge| -> Complex64 {
        let ((i0, j0), (i1, j1)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (f0, f1) = (f(i0, j0), f(i1, j1));
        let s = if f0 == f1 { 0.5 } else { f0 / (f0 - f1) };
        let p0 = Complex64::new(w.re_at(i0), w.im_at(j0));
        let p1 = Complex64::new(w.re_at(i1), w.im_at(j1));
        p0 + (p1 - p0) * s
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..w.ny - 1 {
        for i in 0..w.nx - 1 {
            let corners = [f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)];
            let out: Vec<bool> = corners.iter().map(|&x| x > 0.0).collect();
            // bottom, right, top, left
            let edges = [
                Edge::H(i, j),
                Edge::V(i + 1, j),
                Edge::H(i, j + 1),
                Edge::V(i, j),
            ];
            let crossing: Vec<usize> = (0..4).filter(|&k| out[k] != out[(k + 1) % 4]).collect();
            match crossing.len() {
                2 => segments.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    let centre = corners.iter().sum::<f64>() / 4.0 > 0.0;
                    if centre == out[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[0], edges[3]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let next_from = |edge: Edge, used: &[bool]| -> Option<usize> {
        by_edge
            .get(&edge)
            .and_then(|ks| ks.iter().copied().find(|&k| !used[k]))
    };

    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut forward = vec![a, b];
        let mut tail = b;
        while let Some(k) = next_from(tail, &used) {
            used[k] = true;
            let (p, q) = segments[k];
            tail = if p == tail { q } else { p };
            forward.push(tail);
        }
        let closed = tail == a && forward.len() > 2;
        if !closed {
            let mut head = a;
            let mut backward = Vec::new();
            while let Some(k) = next_from(head, &used) {
                used[k] = true;
                let (p, q) = segments[k];
                head = if p == head { q } else { p };
                backward.push(head);
            }
            backward.reverse();
            backward.extend(forward);
            forward = backward;
        }
        lines.push(Polyline {
            points: forward.into_iter().map(point_on).collect(),
            closed,
        });
    }
    lines
}

/// Writes polylines as CSV with columns `curve_id,re,im`.
pub fn write_polylines_csv<W: Write>(out: W, lines: &[Polyline]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["curve_id", "re", "im"])?;
    for (id, line) in lines.iter().enumerate() {
        for p in &line.points {
            wtr.write_record([id.to_string(), format!("{:?}", p.re), format!("{:?}", p.im)])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
