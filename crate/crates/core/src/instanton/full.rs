use super::{runaway, seed_instanton, InstantonInit, BLOWUP};
use crate::b7::{flow_rhs, series_state, FlowState, MetricTrajectory};
use crate::error::{Error, Result};
use crate::fit::geometric_grid;
use crate::ode::{integrate_with, SolverOptions, Termination};

/// Linear coefficients of the four-function system at one point of the
/// flow, in the order `(f⁺, f⁻, g⁺, g⁻)`. Written in `(a, b, ȧ, ḃ, p)`.
pub fn full_rhs_coefficients(p: f64, y: &FlowState) -> [f64; 4] {
    let [u, w, adot, z] = *y;
    let a = u + p;
    let v = u - w;
    let b = v + p;
    let bdot = adot - z;
    let minus = u + w;
    let quart = minus * (2.0 * u + v + 4.0 * p);
    let den = v * quart;
    [
        (adot * (quart - 2.0 * a * v) - bdot * w * (2.0 * a + b + p)) / den,
        (adot * (quart + 2.0 * a * v) + bdot * (a + b) * minus) / den,
        bdot * (b + p) / quart,
        -(4.0 * a * adot * (b + p) + bdot * quart) / den,
    ]
}

#[derive(Debug, Clone)]
pub struct FullInstantonTrajectory {
    pub times: Vec<f64>,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub g_plus: Vec<f64>,
    pub g_minus: Vec<f64>,
    pub termination: Termination,
}

/// Integrates the four-function instanton system alongside the metric flow.
///
/// `f⁺, g⁺` are seeded from their series. The minus components are seeded
/// linearly, `f⁻ = f₁⁻t`, `g⁻ = g₁⁻t`; only `f⁻ = g⁻ = 0` extends smoothly
/// over the singular orbit, where the `g⁻` coefficient behaves like `−16r₀²/t³`
/// and makes any other seed extremely stiff.
pub fn flow_full_instanton(
    f1p: f64,
    f1m: f64,
    g1p: f64,
    g1m: f64,
    metric: &MetricTrajectory,
    t_max: f64,
    rel_tol: f64,
) -> Result<FullInstantonTrajectory> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidInput("rel_tol must be positive".into()));
    }
    let params = metric.params;
    let eps = metric.t_min();
    if !(t_max > eps) {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} must exceed the seed point {eps}"
        )));
    }
    let p = params.p();
    let m = series_state(&params, eps);
    let plus = seed_instanton(InstantonInit::new(f1p, g1p), &params, eps);
    let y0 = [
        m[0],
        m[1],
        m[2],
        m[3],
        plus[0],
        f1m * eps,
        plus[1],
        g1m * eps,
    ];
    let n = ((t_max / eps).log10() * super::SAMPLES_PER_DECADE as f64).ceil() as usize + 1;
    let solver = SolverOptions {
        blowup_threshold: f64::MAX,
        ..SolverOptions::tolerances(rel_tol, 1e-250).with_grid(geometric_grid(eps, t_max, n.max(3)))
    };
    let tr = integrate_with(
        |_, y, out| {
            let s = [y[0], y[1], y[2], y[3]];
            flow_rhs(p, &s, &mut out[..4]);
            let [cfp, cfm, cgp, cgm] = full_rhs_coefficients(p, &s);
            let (fp, fm, gp, gm) = (y[4], y[5], y[6], y[7]);
            out[4] = cfp * fp + fm * gm - fp * gp;
            out[5] = cfm * fm + fp * gm + fm * gp;
            out[6] = cgp * gp + fm * fm - fp * fp;
            out[7] = cgm * gm + 2.0 * fp * fm;
        },
        &y0,
        eps,
        t_max,
        &solver,
        |_, y| runaway(y[4], y[6], BLOWUP),
    )?;
    Ok(FullInstantonTrajectory {
        f_plus: tr.component(4),
        f_minus: tr.component(5),
        g_plus: tr.component(6),
        g_minus: tr.component(7),
        times: tr.times,
        termination: tr.termination,
    })
}
