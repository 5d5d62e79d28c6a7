use std::path::Path;

use super::{
    ab_rhs, ab_split_rhs, coefficient_gaps, flow_rhs, inequality_margins, lo_to_fhn, series_state,
    B7Params, Coeffs, MetricSample,
};
use crate::error::{Error, Result};
use crate::fit::{geometric_grid, inverse_power_fit, window};
use crate::io::{num_row, write_csv, write_json};
use crate::ode::{integrate_with, SolverOptions, Termination, Trajectory};

#[derive(Debug, Clone)]
pub struct MetricOptions {
    pub rel_tol: f64,
    /// Seed point as a multiple of `r₀`.
    pub eps_factor: f64,
    pub samples_per_decade: usize,
    /// Skip the ℓ fit (for short runs).
    pub fit_ell: bool,
}

impl MetricOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            eps_factor: 1e-4,
            samples_per_decade: 400,
            fit_ell: true,
        }
    }
}

/// Asymptotic fibre length `ℓ = lim A₃` with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EllEstimate {
    pub ell: f64,
    pub fit_err: f64,
}

/// A sampled B7 metric.
#[derive(Debug, Clone)]
pub struct MetricTrajectory {
    pub params: B7Params,
    pub samples: Vec<MetricSample>,
    /// `None` when the ℓ fit was skipped or failed (for example on the AC
    /// member, where `A₃` grows without bound).
    pub ell: Option<EllEstimate>,
    pub t_max: f64,
    pub rel_tol: f64,
    /// `(A₁, A₃, B₁, B₃)` with exact derivatives, for Hermite interpolation.
    coeffs: Trajectory,
}

impl MetricTrajectory {
    fn assemble(
        params: B7Params,
        samples: Vec<MetricSample>,
        t_max: f64,
        opts: &MetricOptions,
    ) -> Result<Self> {
        let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let states: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| s.coeffs.to_array().to_vec())
            .collect();
        let derivs: Vec<Vec<f64>> = samples
            .iter()
            .map(|s| ab_rhs(1.0, &s.coeffs).to_array().to_vec())
            .collect();
        let mut traj = Self {
            params,
            samples,
            ell: None,
            t_max,
            rel_tol: opts.rel_tol,
            coeffs: Trajectory {
                times,
                states,
                derivs,
                termination: Termination::ReachedEnd,
            },
        };
        if opts.fit_ell {
            traj.ell = estimate_ell(&traj).ok();
        }
        Ok(traj)
    }

    pub fn t_min(&self) -> f64 {
        self.samples[0].t
    }

    pub fn times(&self) -> &[f64] {
        &self.coeffs.times
    }

    /// Interpolated `(A₁, A₃, B₁, B₃)` at `t` inside the sampled range.
    pub fn coeffs_at(&self, t: f64) -> Option<Coeffs> {
        let mut out = [0.0; 4];
        self.coeffs
            .interpolate_into(t, &mut out)
            .then(|| Coeffs::from_array(&out))
    }

    /// The coefficient trajectory used for interpolation.
    pub fn coeff_trajectory(&self) -> &Trajectory {
        &self.coeffs
    }

    pub fn ell_value(&self) -> Result<f64> {
        self.ell.map(|e| e.ell).ok_or(Error::FitUnstable {
            residual: f64::NAN,
            limit: f64::NAN,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &MetricSample::CSV_HEADER,
            self.samples.iter().map(|s| num_row(&s.csv_values())),
        )
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "r0": self.params.r0,
            "abar": self.params.abar,
            "bbar": self.params.bbar,
            "ell": self.ell.map(|e| e.ell),
            "fit_err": self.ell.map(|e| e.fit_err),
            "t_max": self.t_max,
            "rel_tol": self.rel_tol,
        })
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        write_json(path, &self.sidecar())
    }
}

fn sample_grid(eps: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
    let decades = (t_max / eps).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(2) + 1;
    geometric_grid(eps, t_max, n)
}

fn check_args(t_max: f64, opts: &MetricOptions, r0: f64) -> Result<f64> {
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidInput("rel_tol must be positive".into()));
    }
    let eps = opts.eps_factor * r0;
    if !(t_max > eps) {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} must exceed the seed point {eps}"
        )));
    }
    Ok(eps)
}

fn metric_solver(rel_tol: f64, grid: Vec<f64>) -> SolverOptions {
    // States are O(t³) at large t and tiny near the seed; the error control is
    // purely relative and the metric never blows up.
    SolverOptions {
        blowup_threshold: f64::MAX,
        ..SolverOptions::tolerances(rel_tol, 1e-250).with_grid(grid)
    }
}

fn check_complete(tr: &Trajectory) -> Result<()> {
    if !tr.termination.is_complete() {
        return Err(Error::IncompleteMetric(format!(
            "flow stopped early: {:?}",
            tr.termination
        )));
    }
    Ok(())
}

fn check_inequalities(params: &B7Params, samples: &[MetricSample]) -> Result<()> {
    for s in samples {
        let m = inequality_margins(params, s);
        if m.min() < -1e-9 || !s.coeffs.is_positive() {
            return Err(Error::IncompleteMetric(format!(
                "metric inequalities fail at t = {}: {m:?}",
                s.t
            )));
        }
    }
    Ok(())
}

/// Integrates the Hitchin flow of a family member from its series seed.
pub fn flow_metric(params: &B7Params, t_max: f64, rel_tol: f64) -> Result<MetricTrajectory> {
    flow_metric_with(params, t_max, &MetricOptions::new(rel_tol))
}

pub fn flow_metric_with(
    params: &B7Params,
    t_max: f64,
    opts: &MetricOptions,
) -> Result<MetricTrajectory> {
    let eps = check_args(t_max, opts, params.r0)?;
    let p = params.p();
    let y0 = series_state(params, eps);
    lo_to_fhn(p, &y0)?;
    let grid = sample_grid(eps, t_max, opts.samples_per_decade);
    let solver = metric_solver(opts.rel_tol, grid);
    let tr = integrate_with(
        |_, y, out| flow_rhs(p, &[y[0], y[1], y[2], y[3]], out),
        &y0,
        eps,
        t_max,
        &solver,
        |_, _| false,
    )?;
    check_complete(&tr)?;
    let samples = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(&t, y)| MetricSample::from_state(params, t, &[y[0], y[1], y[2], y[3]]))
        .collect::<Result<Vec<_>>>()?;
    check_inequalities(params, &samples)?;
    MetricTrajectory::assemble(*params, samples, t_max, opts)
}

/// Series seed `(A₁, A₁ − A₃, B₁, B₁ − B₃)` at `t = eps`.
pub fn ab_seed(params: &B7Params, eps: f64) -> Result<[f64; 4]> {
    let p = params.p();
    let ys = series_state(params, eps);
    let c = lo_to_fhn(p, &ys)?;
    let (d, _) = coefficient_gaps(p, &ys, &c);
    // B₁ − B₃ = O(t⁴) is below the rounding level of B₁ at the seed; the
    // series of the system gives it as −(A₁ − A₃)t/(40r₀) to leading order.
    let e = -d * eps / (40.0 * params.r0);
    Ok([c.a1, d, c.b1, e])
}

/// Same member integrated through the `(A₁, A₃, B₁, B₃)` system.
pub fn flow_metric_ab(params: &B7Params, t_max: f64, rel_tol: f64) -> Result<MetricTrajectory> {
    let opts = MetricOptions::new(rel_tol);
    let eps = check_args(t_max, &opts, params.r0)?;
    let y0 = ab_seed(params, eps)?;
    let grid = sample_grid(eps, t_max, opts.samples_per_decade);
    let solver = metric_solver(rel_tol, grid);
    let tr = integrate_with(
        |_, y, out| ab_split_rhs(1.0, y, out),
        &y0,
        eps,
        t_max,
        &solver,
        |_, _| false,
    )?;
    check_complete(&tr)?;
    let samples = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(&t, y)| {
            let c = Coeffs {
                a1: y[0],
                a3: y[0] - y[1],
                b1: y[2],
                b3: y[2] - y[3],
            };
            MetricSample::from_coeffs(params, t, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    check_inequalities(params, &samples)?;
    MetricTrajectory::assemble(*params, samples, t_max, &opts)
}

/// The ALC member at scale `r₀` whose `ℓ` equals `ell_target`.
///
/// `ℓ` decreases strictly in `64ār₀` from `∞` at the AC member to `0`, so the
/// member is found by bisection in `ln(64ār₀ − 1/3)`, each step flowing the
/// metric to `t_max`. The result matches `ell_target` to `1e-10` relative.
pub fn member_with_ell(r0: f64, ell_target: f64, t_max: f64, rel_tol: f64) -> Result<B7Params> {
    if !(ell_target > 0.0 && ell_target.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "ell_target = {ell_target} must be positive"
        )));
    }
    let member = |u: f64| B7Params::new(r0, (1.0 / 3.0 + u.exp()) / (64.0 * r0));
    // Close to the AC member ℓ is too large to resolve by t_max; count it as large.
    let ell_at = |u: f64| -> Result<f64> {
        match flow_metric(&member(u)?, t_max, rel_tol)?.ell_value() {
            Err(Error::FitUnstable { .. }) => Ok(f64::INFINITY),
            r => r,
        }
    };
    let (mut lo, mut hi) = (-12.0_f64, 8.0_f64);
    if !(ell_at(lo)? > ell_target && ell_at(hi)? < ell_target) {
        return Err(Error::InvalidInput(format!(
            "ell_target = {ell_target} is outside the range reachable at r0 = {r0}"
        )));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let ell = ell_at(mid)?;
        if (ell - ell_target).abs() <= 1e-10 * ell_target {
            return member(mid);
        }
        if ell > ell_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::InvalidInput(format!(
        "ell_target = {ell_target} is not resolvable with t_max = {t_max} at r0 = {r0}"
    )))
}

/// `ℓ = lim A₃` by extrapolating `A₃ = ℓ + c₁/t + c₂/t² + c₃/t³` over the
/// final decade of samples.
///
/// `fit_err` is the larger of the fit residual and the change in `ℓ` when the
/// highest-order term is dropped.
pub fn estimate_ell(traj: &MetricTrajectory) -> Result<EllEstimate> {
    let t_end = traj.samples.last().map(|s| s.t).unwrap_or(0.0);
    let idx = window(traj.times(), t_end / 10.0, t_end);
    if idx.len() < 8 {
        return Err(Error::FitUnstable {
            residual: f64::INFINITY,
            limit: 0.0,
        });
    }
    let ts: Vec<f64> = idx.iter().map(|&i| traj.samples[i].t).collect();
    let a3: Vec<f64> = idx.iter().map(|&i| traj.samples[i].coeffs.a3).collect();
    let hi = inverse_power_fit(&ts, &a3, 3).ok_or(Error::FitUnstable {
        residual: f64::INFINITY,
        limit: 0.0,
    })?;
    let lo = inverse_power_fit(&ts, &a3, 2).ok_or(Error::FitUnstable {
        residual: f64::INFINITY,
        limit: 0.0,
    })?;
    let ell = hi.coeffs[0];
    let fit_err = (ell - lo.coeffs[0]).abs().max(hi.max_residual);
    let limit = 1e-3 * ell.abs();
    if !(ell > 0.0) || !(fit_err <= limit) {
        return Err(Error::FitUnstable {
            residual: fit_err,
            limit,
        });
    }
    Ok(EllEstimate { ell, fit_err })
}
