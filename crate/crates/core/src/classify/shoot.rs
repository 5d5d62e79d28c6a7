use nalgebra::{DMatrix, DVector};

use crate::b7::MetricTrajectory;
use crate::error::{Error, Result};
use crate::fit::linear_grid;
use crate::ode::{integrate_with, solve_singular_ivp, SingularSystem, SolverOptions, Termination};

/// Asymptotic data `(G∞, λ)` with `f⁺ ≈ λe^{(ℓ⁻¹−G∞)t}t^{−5/2}` and `g⁺ → G∞`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EndConditions {
    pub g_inf: f64,
    pub lambda: f64,
}

impl EndConditions {
    pub fn new(g_inf: f64, lambda: f64) -> Self {
        Self { g_inf, lambda }
    }

    pub fn is_abelian(&self) -> bool {
        self.lambda == 0.0
    }

    fn check(&self, ell: f64) -> Result<()> {
        if !self.lambda.is_finite() || !(self.g_inf >= (1.0 - 1e-12) / ell) {
            return Err(Error::InvalidEnd(format!(
                "need G_inf >= 1/ell = {}, got ({}, {})",
                1.0 / ell,
                self.g_inf,
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Default seeding time `20ℓ`.
pub fn default_end_time(ell: f64) -> f64 {
    20.0 * ell
}

/// Remainders `(γ₁, γ₂)` of the large-`t` expansions
/// `Q = −(9/2)ℓ²t⁻³ + γ₁t⁻⁴` and `P = −ℓ⁻¹ + (5/2)t⁻¹ + γ₂t⁻²`.
///
/// Past the end of the metric they are continued linearly in `s = 1/t` from
/// the last two samples at `t_max` and `t_max/2`; both converge like `1/t`.
pub fn asymptotic_remainders(metric: &MetricTrajectory, ell: f64, t: f64) -> Option<(f64, f64)> {
    let at = |t: f64| {
        let (p, q) = metric.coeffs_at(t)?.instanton_pq();
        Some((
            t.powi(4) * (q + 4.5 * ell * ell / t.powi(3)),
            t * t * (p + 1.0 / ell - 2.5 / t),
        ))
    };
    let t_max = metric.t_max;
    if t <= t_max {
        return at(t);
    }
    let (a1, a2) = at(t_max)?;
    let (b1, b2) = at(0.5 * t_max)?;
    // Values at s = 1/t_max and 2/t_max; extrapolate towards s = 0.
    let w = (1.0 / t - 1.0 / t_max) * t_max;
    Some((a1 + w * (b1 - a1), a2 + w * (b2 - a2)))
}

/// State of the end system at `t`, with `(X, Y)` the rescaled unknowns
/// `f⁺ = t^{−5/2}e^{(ℓ⁻¹−G∞)t}X`, `g⁺ = G∞ − t⁻²((9/4)ℓ²G∞ + Y)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EndState {
    pub t: f64,
    pub f: f64,
    pub g: f64,
    pub x: f64,
    pub y: f64,
}

/// The end system in `s = 1/t`: `X' = (γ₂ − c − Y)X`,
/// `Y' = −2Y/s − G∞γ₁ − ((9/2)ℓ²(c + Y) + X²e^{2(ℓ⁻¹−G∞)/s})s + γ₁(c + Y)s²`
/// with `c = (9/4)ℓ²G∞`.
struct EndSystem<'a> {
    metric: &'a MetricTrajectory,
    ell: f64,
    g_inf: f64,
    y0: [f64; 2],
}

impl EndSystem<'_> {
    fn c(&self) -> f64 {
        2.25 * self.ell * self.ell * self.g_inf
    }

    fn decay(&self, s: f64) -> f64 {
        let a = 2.0 * (1.0 / self.ell - self.g_inf);
        if a >= 0.0 {
            1.0
        } else if s == 0.0 {
            0.0
        } else {
            (a / s).exp()
        }
    }
}

impl SingularSystem for EndSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn y0(&self) -> &[f64] {
        &self.y0
    }

    fn m_minus1(&self, y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -2.0 * y[1];
    }

    fn m_smooth(&self, s: f64, y: &[f64], out: &mut [f64]) {
        let t = if s > 0.0 { 1.0 / s } else { f64::INFINITY };
        let (g1, g2) =
            asymptotic_remainders(self.metric, self.ell, t).unwrap_or((f64::NAN, f64::NAN));
        let (x, yy) = (y[0], y[1]);
        let c = self.c();
        let l2 = self.ell * self.ell;
        out[0] = (g2 - c - yy) * x;
        out[1] = -self.g_inf * g1 - (4.5 * l2 * (c + yy) + x * x * self.decay(s)) * s
            + g1 * (c + yy) * s * s;
    }

    fn jacobian_minus1(&self, _y: &[f64]) -> DMatrix<f64> {
        end_system_jacobian()
    }
}

/// Jacobian of the singular part of the end system at its initial point.
pub fn end_system_jacobian() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -2.0]))
}

/// `(f⁺, g⁺)` at `t_end` for the end conditions `ec`, from the singular
/// initial value problem in `s = 1/t` with `X(0) = λ`, `Y(0) = 0`.
pub fn end_seed(
    ec: EndConditions,
    ell: f64,
    metric: &MetricTrajectory,
    t_end: f64,
    rel_tol: f64,
) -> Result<EndState> {
    ec.check(ell)?;
    if !(t_end > metric.t_min()) || t_end > metric.t_max {
        return Err(Error::InvalidInput(format!(
            "t_end = {t_end} must lie inside the metric window [{}, {}]",
            metric.t_min(),
            metric.t_max
        )));
    }
    let sys = EndSystem {
        metric,
        ell,
        g_inf: ec.g_inf,
        y0: [ec.lambda, 0.0],
    };
    let tr = solve_singular_ivp(&sys, 1.0 / t_end, rel_tol)?;
    if tr.termination != Termination::ReachedEnd {
        return Err(Error::Integration {
            t: t_end,
            reason: format!("end system stopped: {:?}", tr.termination),
        });
    }
    let [x, y] = [tr.final_state()[0], tr.final_state()[1]];
    let t = t_end;
    Ok(EndState {
        t,
        f: t.powf(-2.5) * ((1.0 / ell - ec.g_inf) * t).exp() * x,
        g: ec.g_inf - (sys.c() + y) / (t * t),
        x,
        y,
    })
}

/// Outcome of integrating an end solution back towards the singular orbit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind")]
pub enum Shot {
    /// `(F⁺, G⁺)/t²` converged to `(f₁, g₁)/2`.
    Closed {
        f1: f64,
        g1: f64,
    },
    FailedToClose {
        t: f64,
        reason: String,
    },
}

impl Shot {
    pub fn initial_conditions(&self) -> Option<(f64, f64)> {
        match *self {
            Shot::Closed { f1, g1 } => Some((f1, g1)),
            Shot::FailedToClose { .. } => None,
        }
    }
}

/// Relative variation of `F⁺/t²` allowed over the last decade before the
/// singular orbit.
pub const CLOSURE_TOL: f64 = 1e-4;

const SHOOT_BLOWUP: f64 = 1e8;

/// Integrates `(F⁺, G⁺) = (A₁f⁺, A₃g⁺)` from the end state at `t_end` back
/// to ten times the metric's seed point, in the variable `σ = ln(t_end/t)`
/// and for `(U, V) = (F⁺, G⁺)/t²`.
///
/// The solution closes when `U` settles over the final decade. It fails when
/// `G⁺` leaves `(0, ∞)`, when `U` diverges, or when the trajectory leaves the
/// backward-invariant box `{0 < G⁺ < 2/3, 0 ≤ F⁺ < Γ}` after entering it.
pub fn shoot_backward(
    ec: EndConditions,
    metric: &MetricTrajectory,
    t_end: f64,
    rel_tol: f64,
) -> Result<Shot> {
    let ell = metric.ell_value()?;
    let end = match end_seed(ec, ell, metric, t_end, rel_tol) {
        Ok(e) => e,
        Err(Error::Integration { reason, .. }) => {
            return Ok(Shot::FailedToClose { t: t_end, reason })
        }
        Err(e) => return Err(e),
    };
    let c = metric
        .coeffs_at(t_end)
        .ok_or_else(|| Error::InvalidInput("t_end outside the metric".into()))?;
    let t_stop = 10.0 * metric.t_min();
    let sigma_end = (t_end / t_stop).ln();
    let u0 = [
        c.a1 * end.f / (t_end * t_end),
        c.a3 * end.g / (t_end * t_end),
    ];

    let coeffs = |sigma: f64| {
        let t = t_end * (-sigma).exp();
        (
            t,
            metric
                .coeffs_at(t.max(metric.t_min()))
                .expect("inside the metric"),
        )
    };
    let n = (sigma_end * 100.0).ceil() as usize + 1;
    let solver = SolverOptions {
        blowup_threshold: f64::MAX,
        ..SolverOptions::tolerances(rel_tol, 1e-250).with_grid(linear_grid(0.0, sigma_end, n))
    };
    let mut reason = String::new();
    let mut gamma: Option<f64> = None;
    let tr = integrate_with(
        |sigma, y, out| {
            let (t, c) = coeffs(sigma);
            let (f, g) = (y[0] * t * t, y[1] * t * t);
            let fd = f / c.a3 * (1.0 - c.a1 * c.a3 / (c.b1 * c.b3) - g);
            let gd = c.a3 / (c.a1 * c.a1) * ((1.0 - (c.a1 / c.b1).powi(2)) * g - f * f);
            out[0] = 2.0 * y[0] - fd / t;
            out[1] = 2.0 * y[1] - gd / t;
        },
        &u0,
        0.0,
        sigma_end,
        &solver,
        |sigma, y| {
            let (t, c) = coeffs(sigma);
            let (f, g) = (y[0] * t * t, y[1] * t * t);
            if !(y[0].abs() < SHOOT_BLOWUP) || !y[1].is_finite() {
                reason = format!("F/t^2 diverged at t = {t:.6e}");
                return true;
            }
            if !(g > 0.0) && (f != 0.0 || g < 0.0) {
                reason = format!("G left (0, inf) at t = {t:.6e}");
                return true;
            }
            let cap = (2.0 / 3.0) * (1.0 - (c.a1 / c.b1).powi(2));
            let inside = g > 0.0 && g < 2.0 / 3.0 && f >= 0.0;
            match gamma {
                None if inside && f * f < cap => gamma = Some(cap.sqrt()),
                Some(gm) if !(inside && f < gm * (1.0 + 1e-9)) => {
                    reason = format!("left the backward-invariant box at t = {t:.6e}");
                    return true;
                }
                _ => {}
            }
            false
        },
    )?;
    let t_of = |sigma: f64| t_end * (-sigma).exp();
    match tr.termination {
        Termination::ReachedEnd => {}
        Termination::Stopped(s) => return Ok(Shot::FailedToClose { t: t_of(s), reason }),
        other => {
            return Ok(Shot::FailedToClose {
                t: t_of(tr.t_last()),
                reason: format!("integration stopped: {other:?}"),
            })
        }
    }
    // Final decade towards the singular orbit.
    let decade_start = sigma_end - std::f64::consts::LN_10;
    let tail: Vec<&Vec<f64>> = tr
        .times
        .iter()
        .zip(&tr.states)
        .filter(|(&s, _)| s >= decade_start)
        .map(|(_, y)| y)
        .collect();
    let last = tr.final_state();
    for k in 0..2 {
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
                (a.min(y[k]), b.max(y[k]))
            });
        let scale = last[k].abs();
        if hi - lo > CLOSURE_TOL * scale {
            return Ok(Shot::FailedToClose {
                t: t_stop,
                reason: format!(
                    "component {k} varies by {:.3e} over the last decade",
                    (hi - lo) / scale.max(f64::MIN_POSITIVE)
                ),
            });
        }
    }
    // U = u₀ + u₂t²: one Richardson step against the sample at twice t_stop.
    let mut prev = [0.0; 2];
    tr.interpolate_into(sigma_end - std::f64::consts::LN_2, &mut prev);
    let limit = |k: usize| last[k] - (prev[k] - last[k]) / 3.0;
    Ok(Shot::Closed {
        f1: 2.0 * limit(0),
        g1: 2.0 * limit(1),
    })
}
