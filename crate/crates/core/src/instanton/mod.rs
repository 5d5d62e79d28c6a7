//! SU(2)²×U(1)-invariant G2-instantons on the trivial-lift bundle over a B7
//! metric.
//!
//! The connection is determined by `(f⁺, g⁺)` solving
//! `ḟ = −Pf − fg`, `ġ = −Qg − f²`, with `(P, Q)` from
//! [`Coeffs::instanton_pq`] and `f ≈ f₁t`, `g ≈ g₁t` at the singular orbit.

mod analysis;
mod full;

pub use analysis::{
    check_g_remainder, classify_trajectory, decay_rate_fit, flux_limit, DecayFit, GInfEstimate,
    RemainderReport,
};
pub use full::{flow_full_instanton, full_rhs_coefficients, FullInstantonTrajectory};

use std::path::Path;

use crate::b7::{ab_seed, ab_split_rhs, B7Params, Coeffs, MetricTrajectory};
use crate::error::{Error, Result};
use crate::fit::geometric_grid;
use crate::io::{num_row, write_csv, write_json};
use crate::ode::{integrate_with, SolverOptions, Termination, Trajectory};

/// `|f⁺|` beyond which a trajectory counts as blown up.
pub const BLOWUP: f64 = 1e8;

/// Boundary tolerance as a multiple of `ℓ⁻¹`.
pub const BOUNDARY_TOL_FACTOR: f64 = 1e-3;

const SAMPLES_PER_DECADE: usize = 400;

/// Initial data `f⁺ ≈ f₁t`, `g⁺ ≈ g₁t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InstantonInit {
    pub f1: f64,
    pub g1: f64,
}

impl InstantonInit {
    pub fn new(f1: f64, g1: f64) -> Self {
        Self { f1, g1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    /// `f⁺ ≡ 0`.
    Abelian { g_inf: f64 },
    /// Complete with `G∞ > ℓ⁻¹` and `f⁺ ~ λ e^{(ℓ⁻¹−G∞)t} t^{−5/2}`.
    CompleteExponential { g_inf: f64, lambda_fit: f64 },
    /// Complete with `G∞ = ℓ⁻¹` within the boundary tolerance.
    CompleteBoundary { g_inf: f64 },
    /// `f⁺` blew up or `g⁺` turned negative at this time.
    Incomplete { t_blowup: f64 },
    /// Neither test resolved the trajectory by `t_max`.
    Undecided { g_inf: f64, fit_err: f64 },
}

impl Verdict {
    pub fn is_complete(&self) -> bool {
        matches!(
            self,
            Verdict::Abelian { .. }
                | Verdict::CompleteExponential { .. }
                | Verdict::CompleteBoundary { .. }
        )
    }

    pub fn g_inf(&self) -> Option<f64> {
        match *self {
            Verdict::Abelian { g_inf }
            | Verdict::CompleteExponential { g_inf, .. }
            | Verdict::CompleteBoundary { g_inf } => Some(g_inf),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Abelian { .. } => "Abelian",
            Verdict::CompleteExponential { .. } => "CompleteExponential",
            Verdict::CompleteBoundary { .. } => "CompleteBoundary",
            Verdict::Incomplete { .. } => "Incomplete",
            Verdict::Undecided { .. } => "Undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantonSample {
    pub t: f64,
    pub f: f64,
    pub g: f64,
    /// `F⁺ = A₁f⁺`.
    pub big_f: f64,
    /// `G⁺ = A₃g⁺`.
    pub big_g: f64,
    pub coeffs: Coeffs,
}

impl InstantonSample {
    pub const CSV_HEADER: [&'static str; 5] = ["t", "fplus", "gplus", "Fplus", "Gplus"];

    fn new(t: f64, f: f64, g: f64, coeffs: Coeffs) -> Self {
        Self {
            t,
            f,
            g,
            big_f: coeffs.a1 * f,
            big_g: coeffs.a3 * g,
            coeffs,
        }
    }

    pub fn csv_values(&self) -> [f64; 5] {
        [self.t, self.f, self.g, self.big_f, self.big_g]
    }
}

/// How the metric coefficients are supplied to the instanton equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricMode {
    /// Integrate the metric alongside the instanton.
    #[default]
    CoIntegrated,
    /// Interpolate a stored metric trajectory.
    Interpolated,
}

#[derive(Debug, Clone)]
pub struct InstantonOptions {
    pub rel_tol: f64,
    pub mode: MetricMode,
    pub samples_per_decade: usize,
    /// Absolute error floor of the step control.
    pub abs_tol: f64,
    /// `|f⁺|` above which the trajectory is declared to blow up.
    pub blowup: f64,
    /// Skip classification (for raw trajectories).
    pub classify: bool,
}

impl InstantonOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            mode: MetricMode::CoIntegrated,
            samples_per_decade: SAMPLES_PER_DECADE,
            abs_tol: 1e-250,
            blowup: BLOWUP,
            classify: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstantonTrajectory {
    pub init: InstantonInit,
    pub samples: Vec<InstantonSample>,
    pub verdict: Verdict,
    pub ell: f64,
    pub t_max: f64,
    pub termination: Termination,
    /// `(f⁺, g⁺)` with derivatives, for interpolation.
    fg: Trajectory,
}

impl InstantonTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn t_last(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// `(f⁺, g⁺)` at `t` by Hermite interpolation.
    pub fn fg_at(&self, t: f64) -> Option<(f64, f64)> {
        let mut out = [0.0; 2];
        self.fg
            .interpolate_into(t, &mut out)
            .then_some((out[0], out[1]))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &InstantonSample::CSV_HEADER,
            self.samples.iter().map(|s| num_row(&s.csv_values())),
        )
    }

    pub fn sidecar(&self) -> serde_json::Value {
        let lambda_fit = match self.verdict {
            Verdict::CompleteExponential { lambda_fit, .. } => Some(lambda_fit),
            _ => None,
        };
        serde_json::json!({
            "f1": self.init.f1,
            "g1": self.init.g1,
            "verdict": self.verdict.name(),
            "Ginf": self.verdict.g_inf(),
            "lambda_fit": lambda_fit,
            "ell": self.ell,
        })
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        write_json(path, &self.sidecar())
    }
}

/// Coefficients `(p₁, q₁)` of `P = −1/t + p₁t + …`, `Q = −1/t + q₁t + …`.
pub fn pq_series(params: &B7Params) -> (f64, f64) {
    let (r0, a, b) = (params.r0, params.abar, params.bbar);
    let base = 1.0 / (16.0 * r0 * r0);
    (
        base + (4.0 * b - 8.0 * a) / r0,
        base + (8.0 * a - 12.0 * b) / r0,
    )
}

/// `(f⁺, g⁺)` at `t = eps` from the series `f₁t + ct³`, `g₁t + dt³`, with the
/// cubic terms from one Picard iteration against the series of `(P, Q)`.
pub fn seed_instanton(init: InstantonInit, params: &B7Params, eps: f64) -> [f64; 2] {
    let (p1, q1) = pq_series(params);
    let InstantonInit { f1, g1 } = init;
    let c = -0.5 * f1 * (p1 + g1);
    let d = -0.5 * (q1 * g1 + f1 * f1);
    let e3 = eps * eps * eps;
    [f1 * eps + c * e3, g1 * eps + d * e3]
}

/// `(ḟ, ġ)` of the instanton equations.
pub fn instanton_rhs(c: &Coeffs, f: f64, g: f64) -> (f64, f64) {
    let (p, q) = c.instanton_pq();
    (-p * f - f * g, -q * g - f * f)
}

fn split_coeffs(y: &[f64]) -> Coeffs {
    Coeffs {
        a1: y[0],
        a3: y[0] - y[1],
        b1: y[2],
        b3: y[2] - y[3],
    }
}

fn check_run(metric: &MetricTrajectory, t_max: f64, opts: &InstantonOptions) -> Result<f64> {
    if !(opts.rel_tol > 0.0) {
        return Err(Error::InvalidInput("rel_tol must be positive".into()));
    }
    let eps = metric.t_min();
    if !(t_max > eps) {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} must exceed the seed point {eps}"
        )));
    }
    if opts.mode == MetricMode::Interpolated && t_max > metric.t_max * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "metric covers t <= {} but t_max = {t_max}",
            metric.t_max
        )));
    }
    Ok(eps)
}

fn solver(opts: &InstantonOptions, eps: f64, t_max: f64) -> SolverOptions {
    let n = ((t_max / eps).log10() * opts.samples_per_decade as f64).ceil() as usize + 1;
    SolverOptions {
        blowup_threshold: f64::MAX,
        ..SolverOptions::tolerances(opts.rel_tol, opts.abs_tol).with_grid(geometric_grid(
            eps,
            t_max,
            n.max(3),
        ))
    }
}

/// Stops once `|f⁺|` blows up or `g⁺` turns negative with `f⁺ ≠ 0`; in both
/// cases `f⁺` grows without bound afterwards.
fn runaway(f: f64, g: f64, blowup: f64) -> bool {
    f.abs() > blowup || (g < 0.0 && f != 0.0)
}

/// Integrates the instanton equations along `metric` and classifies the
/// result.
pub fn flow_instanton(
    init: InstantonInit,
    metric: &MetricTrajectory,
    t_max: f64,
    rel_tol: f64,
) -> Result<InstantonTrajectory> {
    flow_instanton_with(init, metric, t_max, &InstantonOptions::new(rel_tol))
}

pub fn flow_instanton_with(
    init: InstantonInit,
    metric: &MetricTrajectory,
    t_max: f64,
    opts: &InstantonOptions,
) -> Result<InstantonTrajectory> {
    if !init.f1.is_finite() || !init.g1.is_finite() {
        return Err(Error::InvalidInput("f1 and g1 must be finite".into()));
    }
    let eps = check_run(metric, t_max, opts)?;
    let params = &metric.params;
    let seed = seed_instanton(init, params, eps);
    let solver = solver(opts, eps, t_max);

    let (times, fg, coeffs, termination) = match opts.mode {
        MetricMode::CoIntegrated => {
            let m = ab_seed(params, eps)?;
            let y0 = [m[0], m[1], m[2], m[3], seed[0], seed[1]];
            let tr = integrate_with(
                |_, y, out| {
                    ab_split_rhs(1.0, &y[..4], &mut out[..4]);
                    let (fd, gd) = instanton_rhs(&split_coeffs(y), y[4], y[5]);
                    out[4] = fd;
                    out[5] = gd;
                },
                &y0,
                eps,
                t_max,
                &solver,
                |_, y| runaway(y[4], y[5], opts.blowup),
            )?;
            let coeffs: Vec<Coeffs> = tr.states.iter().map(|y| split_coeffs(y)).collect();
            let fg = Trajectory {
                times: tr.times.clone(),
                states: tr.states.iter().map(|y| vec![y[4], y[5]]).collect(),
                derivs: tr.derivs.iter().map(|d| vec![d[4], d[5]]).collect(),
                termination: tr.termination,
            };
            (tr.times, fg, coeffs, tr.termination)
        }
        MetricMode::Interpolated => {
            let tr = integrate_with(
                |t, y, out| {
                    let c = metric.coeffs_at(t).expect("metric covers the run");
                    let (fd, gd) = instanton_rhs(&c, y[0], y[1]);
                    out[0] = fd;
                    out[1] = gd;
                },
                &seed,
                eps,
                t_max,
                &solver,
                |_, y| runaway(y[0], y[1], opts.blowup),
            )?;
            let coeffs = tr
                .times
                .iter()
                .map(|&t| metric.coeffs_at(t).expect("metric covers the run"))
                .collect();
            let termination = tr.termination;
            (tr.times.clone(), tr, coeffs, termination)
        }
    };
    let samples = times
        .iter()
        .zip(&fg.states)
        .zip(&coeffs)
        .map(|((&t, y), c)| InstantonSample::new(t, y[0], y[1], *c))
        .collect();
    let ell = metric.ell_value()?;
    let mut traj = InstantonTrajectory {
        init,
        samples,
        verdict: Verdict::Undecided {
            g_inf: f64::NAN,
            fit_err: f64::INFINITY,
        },
        ell,
        t_max,
        termination,
        fg,
    };
    if opts.classify {
        traj.verdict = classify_trajectory(&traj, ell, t_max).unwrap_or_else(|e| match e {
            Error::Undecided { fit_err, .. } => Verdict::Undecided {
                g_inf: flux_limit(&traj, ell).map_or(f64::NAN, |g| g.g_inf),
                fit_err,
            },
            _ => Verdict::Undecided {
                g_inf: f64::NAN,
                fit_err: f64::INFINITY,
            },
        });
    }
    Ok(traj)
}

/// Integrates `(F⁺, G⁺) = (A₁f⁺, A₃g⁺)` directly and converts back; an
/// independent check on [`flow_instanton`].
pub fn flow_instanton_fg(
    init: InstantonInit,
    metric: &MetricTrajectory,
    t_max: f64,
    rel_tol: f64,
) -> Result<Vec<InstantonSample>> {
    let opts = InstantonOptions::new(rel_tol);
    let eps = check_run(metric, t_max, &opts)?;
    let params = &metric.params;
    let seed = seed_instanton(init, params, eps);
    let m = ab_seed(params, eps)?;
    let c0 = split_coeffs(&m);
    let y0 = [m[0], m[1], m[2], m[3], c0.a1 * seed[0], c0.a3 * seed[1]];
    let solver = solver(&opts, eps, t_max);
    let tr = integrate_with(
        |_, y, out| {
            ab_split_rhs(1.0, &y[..4], &mut out[..4]);
            let Coeffs { a1, a3, b1, b3 } = split_coeffs(y);
            let (f, g) = (y[4], y[5]);
            out[4] = f / a3 * (1.0 - a1 * a3 / (b1 * b3) - g);
            out[5] = a3 / (a1 * a1) * ((1.0 - a1 * a1 / (b1 * b1)) * g - f * f);
        },
        &y0,
        eps,
        t_max,
        &solver,
        |_, y| {
            let c = split_coeffs(y);
            runaway(y[4] / c.a1, y[5] / c.a3, opts.blowup)
        },
    )?;
    Ok(tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(&t, y)| {
            let c = split_coeffs(y);
            InstantonSample::new(t, y[4] / c.a1, y[5] / c.a3, c)
        })
        .collect())
}

/// The abelian solution `f⁺ = 0`, `g⁺ = 2g₁A₃` on the metric's grid.
pub fn abelian_solution(g1: f64, metric: &MetricTrajectory) -> Result<InstantonTrajectory> {
    let ell = metric.ell_value()?;
    let samples: Vec<InstantonSample> = metric
        .samples
        .iter()
        .map(|s| InstantonSample::new(s.t, 0.0, 2.0 * g1 * s.coeffs.a3, s.coeffs))
        .collect();
    let fg = Trajectory {
        times: samples.iter().map(|s| s.t).collect(),
        states: samples.iter().map(|s| vec![0.0, s.g]).collect(),
        derivs: metric
            .samples
            .iter()
            .map(|s| {
                let d = crate::b7::ab_rhs(1.0, &s.coeffs);
                vec![0.0, 2.0 * g1 * d.a3]
            })
            .collect(),
        termination: Termination::ReachedEnd,
    };
    Ok(InstantonTrajectory {
        init: InstantonInit::new(0.0, g1),
        samples,
        verdict: Verdict::Abelian {
            g_inf: 2.0 * g1 * ell,
        },
        ell,
        t_max: metric.t_max,
        termination: Termination::ReachedEnd,
        fg,
    })
}
