use std::path::Path;

use rayon::prelude::*;

use crate::b7::MetricTrajectory;
use crate::error::{Error, Result};
use crate::fit::{linear_grid, poly_fit};
use crate::instanton::{
    flow_instanton_with, InstantonInit, InstantonOptions, InstantonTrajectory, Verdict, BLOWUP,
    BOUNDARY_TOL_FACTOR,
};
use crate::io::{fmt_f64, write_csv};

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `|f⁺|` treated as blow-up.
    pub blowup: f64,
    /// Largest factor by which `t_max` is doubled for undecided verdicts.
    pub max_escalation: f64,
    /// Bisection width for refining each row's transition; `None` skips it.
    pub bisect_tol: Option<f64>,
}

impl ScanOptions {
    pub fn instanton(&self) -> InstantonOptions {
        InstantonOptions {
            abs_tol: self.abs_tol,
            blowup: self.blowup,
            ..InstantonOptions::new(self.rel_tol)
        }
    }

    pub fn new(t_max: f64, rel_tol: f64) -> Self {
        Self {
            t_max,
            rel_tol,
            abs_tol: 1e-250,
            blowup: BLOWUP,
            max_escalation: 16.0,
            bisect_tol: None,
        }
    }
}

/// Flows one initial condition, doubling `t_max` while the verdict is
/// undecided.
pub fn classify_cell(
    metric: &MetricTrajectory,
    init: InstantonInit,
    opts: &ScanOptions,
) -> Result<InstantonTrajectory> {
    let mut t_max = opts.t_max;
    loop {
        let tr = flow_instanton_with(init, metric, t_max, &opts.instanton())?;
        let undecided = matches!(tr.verdict, Verdict::Undecided { .. });
        if !undecided || 2.0 * t_max > opts.t_max * opts.max_escalation {
            return Ok(tr);
        }
        t_max *= 2.0;
    }
}

/// Whether a verdict sits on the complete side of the boundary. Undecided
/// trajectories are placed by their current `G∞` estimate.
pub fn complete_side(v: &Verdict, ell: f64) -> bool {
    match *v {
        Verdict::Undecided { g_inf, .. } | Verdict::CompleteBoundary { g_inf } => {
            g_inf >= 1.0 / ell
        }
        _ => v.is_complete(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Cell {
    pub f1: f64,
    pub g1: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundaryPoint {
    pub g1: f64,
    pub f_boundary: f64,
    /// `G∞` of the complete-side endpoint of the final bracket.
    pub g_inf_check: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassificationMap {
    pub ell: f64,
    pub f1s: Vec<f64>,
    pub g1s: Vec<f64>,
    /// Row-major in `g₁`: `cells[j·n_f + i]` has `(f1s[i], g1s[j])`.
    pub cells: Vec<Cell>,
    pub boundary: Vec<BoundaryPoint>,
}

impl ClassificationMap {
    pub const CSV_HEADER: [&'static str; 5] = ["f1", "g1", "verdict", "Ginf", "lambda_fit"];
    pub const BOUNDARY_HEADER: [&'static str; 2] = ["g1", "f_boundary"];

    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[j * self.f1s.len() + i]
    }

    pub fn row(&self, j: usize) -> &[Cell] {
        let n = self.f1s.len();
        &self.cells[j * n..(j + 1) * n]
    }

    /// Number of cells per verdict name, in a fixed order.
    pub fn counts(&self) -> Vec<(&'static str, usize)> {
        let names = [
            "Abelian",
            "CompleteExponential",
            "CompleteBoundary",
            "Incomplete",
            "Undecided",
        ];
        names
            .iter()
            .map(|&n| {
                (
                    n,
                    self.cells.iter().filter(|c| c.verdict.name() == n).count(),
                )
            })
            .collect()
    }

    pub fn undecided_fraction(&self) -> f64 {
        let n = self
            .cells
            .iter()
            .filter(|c| matches!(c.verdict, Verdict::Undecided { .. }))
            .count();
        n as f64 / self.cells.len().max(1) as f64
    }

    /// Indices `i` in row `j` where a complete-side cell is followed by an
    /// incomplete-side one.
    pub fn row_transitions(&self, j: usize) -> Vec<usize> {
        let row = self.row(j);
        (1..row.len())
            .filter(|&i| {
                complete_side(&row[i - 1].verdict, self.ell)
                    && !complete_side(&row[i].verdict, self.ell)
            })
            .collect()
    }

    /// Checks the structural invariants: abelian axis, incomplete strip below
    /// `g₁ = ½ℓ⁻²` and an increasing boundary.
    pub fn check_invariants(&self) -> Result<()> {
        let half = 0.5 / (self.ell * self.ell);
        for c in &self.cells {
            if c.f1 == 0.0 && !matches!(c.verdict, Verdict::Abelian { .. }) {
                return Err(Error::ViolatedAsymptotic(format!(
                    "cell (0, {}) is {} instead of Abelian",
                    c.g1,
                    c.verdict.name()
                )));
            }
            if c.f1 != 0.0 && c.g1 <= half && !matches!(c.verdict, Verdict::Incomplete { .. }) {
                return Err(Error::ViolatedAsymptotic(format!(
                    "cell ({}, {}) below the abelian threshold is {}",
                    c.f1,
                    c.g1,
                    c.verdict.name()
                )));
            }
        }
        for w in self.boundary.windows(2) {
            if !(w[1].f_boundary > w[0].f_boundary) {
                return Err(Error::ViolatedAsymptotic(format!(
                    "boundary not increasing between g1 = {} and {}",
                    w[0].g1, w[1].g1
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &Self::CSV_HEADER,
            self.cells.iter().map(|c| {
                let lambda = match c.verdict {
                    Verdict::CompleteExponential { lambda_fit, .. } => lambda_fit,
                    _ => f64::NAN,
                };
                vec![
                    fmt_f64(c.f1),
                    fmt_f64(c.g1),
                    c.verdict.name().to_string(),
                    fmt_f64(c.verdict.g_inf().unwrap_or(f64::NAN)),
                    fmt_f64(lambda),
                ]
            }),
        )
    }

    pub fn write_boundary_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &Self::BOUNDARY_HEADER,
            self.boundary
                .iter()
                .map(|b| vec![fmt_f64(b.g1), fmt_f64(b.f_boundary)]),
        )
    }

    /// Three columns `f1 g1 code` with a blank line between rows, for
    /// gnuplot's `pm3d`/`image` styles. Codes: 0 abelian, 1 exponential,
    /// 2 boundary, 3 incomplete, 4 undecided.
    pub fn write_region(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# f1 g1 verdict_code")?;
        for j in 0..self.g1s.len() {
            for c in self.row(j) {
                let code = match c.verdict {
                    Verdict::Abelian { .. } => 0,
                    Verdict::CompleteExponential { .. } => 1,
                    Verdict::CompleteBoundary { .. } => 2,
                    Verdict::Incomplete { .. } => 3,
                    Verdict::Undecided { .. } => 4,
                };
                writeln!(out, "{} {} {code}", fmt_f64(c.f1), fmt_f64(c.g1))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_range(name: &str, r: (f64, f64), n: usize) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite() && r.1 > r.0) || n < 2 {
        return Err(Error::InvalidInput(format!(
            "{name} range {r:?} with {n} points is not a positive-width lattice"
        )));
    }
    Ok(())
}

/// Classifies every lattice point of `f1_range × g1_range` in parallel.
///
/// With `opts.bisect_tol` set, each row above the abelian threshold with a
/// complete-to-incomplete transition is refined by [`boundary_curve`].
pub fn scan_region(
    metric: &MetricTrajectory,
    f1_range: (f64, f64),
    g1_range: (f64, f64),
    n_f: usize,
    n_g: usize,
    opts: &ScanOptions,
) -> Result<ClassificationMap> {
    check_range("f1", f1_range, n_f)?;
    check_range("g1", g1_range, n_g)?;
    let ell = metric.ell_value()?;
    let f1s = linear_grid(f1_range.0, f1_range.1, n_f);
    let g1s = linear_grid(g1_range.0, g1_range.1, n_g);
    let cells = (0..n_f * n_g)
        .into_par_iter()
        .map(|k| {
            let (f1, g1) = (f1s[k % n_f], g1s[k / n_f]);
            let tr = classify_cell(metric, InstantonInit::new(f1, g1), opts)?;
            Ok(Cell {
                f1,
                g1,
                verdict: tr.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut map = ClassificationMap {
        ell,
        f1s,
        g1s,
        cells,
        boundary: Vec::new(),
    };
    if let Some(tol) = opts.bisect_tol {
        let half = 0.5 / (ell * ell);
        let rows: Vec<(f64, f64, f64)> = (0..n_g)
            .filter(|&j| map.g1s[j] > half)
            .filter_map(|j| {
                let tr = map.row_transitions(j);
                let &i = tr.first()?;
                Some((map.g1s[j], map.f1s[i - 1], map.f1s[i]))
            })
            .collect();
        map.boundary = rows
            .par_iter()
            .map(|&(g1, lo, hi)| boundary_curve(metric, g1, (lo, hi), tol, opts))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(map)
}

/// Bisects in `f₁` at fixed `g₁` for the transition between complete and
/// incomplete solutions, to bracket width `tol`.
pub fn boundary_curve(
    metric: &MetricTrajectory,
    g1: f64,
    bracket: (f64, f64),
    tol: f64,
    opts: &ScanOptions,
) -> Result<BoundaryPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(
            "bisection tolerance must be positive".into(),
        ));
    }
    let ell = metric.ell_value()?;
    let side = |f1: f64| -> Result<(bool, InstantonTrajectory)> {
        let tr = classify_cell(metric, InstantonInit::new(f1, g1), opts)?;
        Ok((complete_side(&tr.verdict, ell), tr))
    };
    let (mut lo, mut hi) = bracket;
    let (s_lo, mut t_lo) = side(lo)?;
    let (s_hi, _) = side(hi)?;
    if s_lo == s_hi {
        return Err(Error::BadBracket { lo, hi });
    }
    if !s_lo {
        // Complete side on the right: the boundary is approached from above.
        std::mem::swap(&mut lo, &mut hi);
        t_lo = side(lo)?.1;
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        let (s, tr) = side(mid)?;
        if s {
            lo = mid;
            t_lo = tr;
        } else {
            hi = mid;
        }
    }
    let g_inf_check = match t_lo.verdict {
        Verdict::Undecided { g_inf, .. } => g_inf,
        v => v.g_inf().unwrap_or(f64::NAN),
    };
    Ok(BoundaryPoint {
        g1,
        f_boundary: 0.5 * (lo + hi),
        g_inf_check,
    })
}

/// Whether `g_inf_check` is within the boundary tolerance of `ℓ⁻¹`.
pub fn on_boundary(p: &BoundaryPoint, ell: f64) -> bool {
    (p.g_inf_check - 1.0 / ell).abs() < BOUNDARY_TOL_FACTOR / ell
}

/// Extrapolates the boundary to `f = 0` by fitting `g₁ = c₀ + c₁f + c₂f²`
/// through the `n` points nearest the axis; returns `c₀`.
pub fn boundary_anchor(boundary: &[BoundaryPoint], n: usize) -> Result<f64> {
    let mut pts: Vec<&BoundaryPoint> = boundary.iter().collect();
    pts.sort_by(|a, b| a.f_boundary.total_cmp(&b.f_boundary));
    pts.truncate(n);
    if pts.len() < 3 {
        return Err(Error::FitUnstable {
            residual: f64::INFINITY,
            limit: 3.0,
        });
    }
    let fs: Vec<f64> = pts.iter().map(|p| p.f_boundary).collect();
    let gs: Vec<f64> = pts.iter().map(|p| p.g1).collect();
    let fit = poly_fit(&fs, &gs, 2).ok_or(Error::FitUnstable {
        residual: f64::INFINITY,
        limit: 0.0,
    })?;
    Ok(fit.coeffs[0])
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ComparisonReport {
    /// Shared samples after the first at which the ordering was checked.
    pub checked: usize,
    /// First shared time where `g > ĝ` or `f̂ > f` fails.
    pub first_violation: Option<f64>,
    /// `G∞ > Ĝ∞` when both trajectories are complete.
    pub limits_ordered: Option<bool>,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none() && self.limits_ordered != Some(false)
    }
}

/// Checks the ordering `g > ĝ`, `f̂ > f` between `lower = (f, g)` and
/// `upper = (f̂, ĝ)` at every shared sample after the first, given
/// `g ≥ ĝ`, `f̂ ≥ f ≥ 0`, `f̂ > 0` there and distinct trajectories.
pub fn comparison_order(
    lower: &InstantonTrajectory,
    upper: &InstantonTrajectory,
) -> Result<ComparisonReport> {
    let (a, b) = (&lower.samples, &upper.samples);
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].t == b[j].t {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if a[i].t < b[j].t {
            i += 1;
        } else {
            j += 1;
        }
    }
    let &(i0, j0) = pairs
        .first()
        .ok_or_else(|| Error::HypothesisNotMet("no shared samples".into()))?;
    let (s, h) = (&a[i0], &b[j0]);
    let distinct = a.len() != b.len()
        || pairs
            .iter()
            .any(|&(i, j)| a[i].f != b[j].f || a[i].g != b[j].g);
    if !(s.g >= h.g && h.f >= s.f && s.f >= 0.0 && h.f > 0.0) || !distinct {
        return Err(Error::HypothesisNotMet(format!(
            "at t = {}: (f, g) = ({}, {}), (f^, g^) = ({}, {})",
            s.t, s.f, s.g, h.f, h.g
        )));
    }
    let first_violation = pairs[1..]
        .iter()
        .find(|&&(i, j)| !(a[i].g > b[j].g && b[j].f > a[i].f))
        .map(|&(i, _)| a[i].t);
    let limits_ordered = (lower.verdict.is_complete() && upper.verdict.is_complete()).then(|| {
        lower.verdict.g_inf().unwrap_or(f64::NAN) > upper.verdict.g_inf().unwrap_or(f64::NAN)
    });
    Ok(ComparisonReport {
        checked: pairs.len() - 1,
        first_violation,
        limits_ordered,
    })
}
