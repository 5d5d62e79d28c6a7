//! The adiabatic limit: B7 metrics and their instantons after the rescaling
//! `A ↦ λ⁻²A(λ²t)`, `B ↦ λ⁻¹B(λ²t)`, which at `λ = 0` decouple into
//! Taub-NUT fibred over a round S³ and ASD instantons on the fibres.

use std::path::Path;

use super::asd::{asd_eval, cd_from_mu};
use super::metric::TaubNutParams;
use crate::b7::{ab_split_rhs, B7Params, Coeffs};
use crate::error::{Error, Result};
use crate::fit::geometric_grid;
use crate::io::{num_row, write_csv};
use crate::ode::{integrate_with, SolverOptions, Trajectory};

/// Seed point of the rescaled flows. The series error there is `O(t⁵)`.
pub const RESCALED_EPS: f64 = 1e-5;

const SAMPLES_PER_DECADE: usize = 200;

/// Cubic coefficients `(a₁, a₃)` of `A_i = t/2 + a_i t³` for the rescaled
/// member. `a₃ = −2r₀³(2ā − b̄)` does not depend on `λ`.
pub fn rescaled_cubic_coeffs(params: &B7Params, lambda: f64) -> (f64, f64) {
    let a3 = -2.0 * params.p() * (2.0 * params.abar - params.bbar);
    let a1 = -lambda * lambda / 64.0 - 0.5 * a3;
    (a1, a3)
}

/// Series seed `(A₁, A₁ − A₃, B₁, B₁ − B₃)` of the rescaled flow at `t`.
pub fn rescaled_seed(params: &B7Params, lambda: f64, t: f64) -> [f64; 4] {
    let (a1, a3) = rescaled_cubic_coeffs(params, lambda);
    let lam2 = lambda * lambda;
    let t2 = t * t;
    let d = (a1 - a3) * t2 * t;
    [
        0.5 * t + a1 * t2 * t,
        d,
        2.0 + lam2 * t2 / 8.0,
        -lam2 * d * t / 40.0,
    ]
}

fn check_lambda(params: &B7Params, lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda <= params.r0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "lambda = {lambda} must lie in [0, r0 = {}]",
            params.r0
        )));
    }
    Ok(())
}

fn solver(rel_tol: f64, t_max: f64) -> Result<SolverOptions> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidInput("rel_tol must be positive".into()));
    }
    if !(t_max > RESCALED_EPS) {
        return Err(Error::InvalidInput(format!(
            "t_max = {t_max} must exceed {RESCALED_EPS}"
        )));
    }
    let n = ((t_max / RESCALED_EPS).log10() * SAMPLES_PER_DECADE as f64).ceil() as usize + 1;
    Ok(SolverOptions {
        blowup_threshold: f64::MAX,
        ..SolverOptions::tolerances(rel_tol, 1e-250).with_grid(geometric_grid(
            RESCALED_EPS,
            t_max,
            n.max(3),
        ))
    })
}

fn coeffs_of(y: &[f64]) -> Coeffs {
    Coeffs {
        a1: y[0],
        a3: y[0] - y[1],
        b1: y[2],
        b3: y[2] - y[3],
    }
}

/// A rescaled metric trajectory, stored in the split variables.
#[derive(Debug, Clone)]
pub struct RescaledTrajectory {
    pub params: B7Params,
    pub lambda: f64,
    traj: Trajectory,
}

impl RescaledTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.traj.times
    }

    pub fn coeffs(&self) -> Vec<Coeffs> {
        self.traj.states.iter().map(|y| coeffs_of(y)).collect()
    }

    pub fn coeffs_at(&self, t: f64) -> Option<Coeffs> {
        let mut y = [0.0; 4];
        self.traj.interpolate_into(t, &mut y).then(|| coeffs_of(&y))
    }

    /// The Taub-NUT metric of the `λ = 0` limit.
    pub fn taub_nut(&self) -> Result<TaubNutParams> {
        let m = self.params.taub_nut_m().ok_or_else(|| {
            Error::InvalidInput("member has no adiabatic limit (2abar <= bbar)".into())
        })?;
        TaubNutParams::new(m)
    }
}

/// Integrates the rescaled metric flow. `λ = r₀` is the B7 member itself and
/// `λ = 0` is Taub-NUT with `B_i ≡ 2`.
pub fn rescaled_b7_flow(
    params: &B7Params,
    lambda: f64,
    t_max: f64,
    rel_tol: f64,
) -> Result<RescaledTrajectory> {
    check_lambda(params, lambda)?;
    let opts = solver(rel_tol, t_max)?;
    let lam2 = lambda * lambda;
    let y0 = rescaled_seed(params, lambda, RESCALED_EPS);
    let traj = integrate_with(
        |_, y, out| ab_split_rhs(lam2, y, out),
        &y0,
        RESCALED_EPS,
        t_max,
        &opts,
        |_, _| false,
    )?;
    if !traj.termination.is_complete() {
        return Err(Error::Integration {
            t: traj.t_last(),
            reason: format!("rescaled flow stopped: {:?}", traj.termination),
        });
    }
    Ok(RescaledTrajectory {
        params: *params,
        lambda,
        traj,
    })
}

/// Right-hand side of the rescaled instanton system for `(F, G)` given the
/// rescaled metric coefficients.
pub fn rescaled_instanton_rhs(lam2: f64, c: &Coeffs, f: f64, g: f64) -> (f64, f64) {
    let Coeffs { a1, a3, b1, b3 } = *c;
    let fdot = f * (1.0 - lam2 * a1 * a3 / (b1 * b3) - g) / a3;
    let gdot = a3 / (a1 * a1) * ((1.0 - lam2 * a1 * a1 / (b1 * b1)) * g - f * f);
    (fdot, gdot)
}

/// Rescaled instanton `(F, G)` with `F ≈ μ₁t²`, `G ≈ μ₃t²` near the
/// singular orbit, integrated together with the rescaled metric.
#[derive(Debug, Clone)]
pub struct RescaledInstanton {
    pub lambda: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

pub fn rescaled_instanton(
    params: &B7Params,
    lambda: f64,
    mu1: f64,
    mu3: f64,
    t_max: f64,
    rel_tol: f64,
) -> Result<RescaledInstanton> {
    check_lambda(params, lambda)?;
    if !mu1.is_finite() || !mu3.is_finite() {
        return Err(Error::InvalidInput("mu1 and mu3 must be finite".into()));
    }
    let opts = solver(rel_tol, t_max)?;
    let lam2 = lambda * lambda;
    let m = rescaled_seed(params, lambda, RESCALED_EPS);
    let e2 = RESCALED_EPS * RESCALED_EPS;
    let y0 = [m[0], m[1], m[2], m[3], mu1 * e2, mu3 * e2];
    let traj = integrate_with(
        |_, y, out| {
            ab_split_rhs(lam2, &y[..4], &mut out[..4]);
            let (fd, gd) = rescaled_instanton_rhs(lam2, &coeffs_of(y), y[4], y[5]);
            out[4] = fd;
            out[5] = gd;
        },
        &y0,
        RESCALED_EPS,
        t_max,
        &opts,
        |_, _| false,
    )?;
    if !traj.termination.is_complete() {
        return Err(Error::Integration {
            t: traj.t_last(),
            reason: format!("rescaled instanton stopped: {:?}", traj.termination),
        });
    }
    Ok(RescaledInstanton {
        lambda,
        mu1,
        mu3,
        f: traj.component(4),
        g: traj.component(5),
        times: traj.times,
    })
}

/// Largest deviation of a rescaled instanton from the ASD solution with the
/// same `(μ₁, μ₃)` on Taub-NUT with parameter `m`.
pub fn asd_sup_error(inst: &RescaledInstanton, m: f64) -> Result<(f64, f64)> {
    let asd = cd_from_mu(inst.mu1, inst.mu3, m)?;
    let tn = TaubNutParams::new(m)?;
    let mut err = (0.0f64, 0.0f64);
    for ((&t, &f), &g) in inst.times.iter().zip(&inst.f).zip(&inst.g) {
        let eta = tn.at_t(t)?.eta;
        let (a1, a3) = asd_eval(asd, m, eta)?;
        err.0 = err.0.max((f - a1).abs());
        err.1 = err.1.max((g - a3).abs());
    }
    Ok(err)
}

/// One row of the convergence table.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AdiabaticRow {
    pub r0: f64,
    pub lambda: f64,
    pub sup_err_a1: f64,
    pub sup_err_a3: f64,
    pub t_max: f64,
}

impl AdiabaticRow {
    pub const HEADER: [&'static str; 5] = ["r0", "lambda", "sup_err_a1", "sup_err_a3", "t_max"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.r0,
            self.lambda,
            self.sup_err_a1,
            self.sup_err_a3,
            self.t_max,
        ]
    }

    pub fn sup_err(&self) -> f64 {
        self.sup_err_a1.max(self.sup_err_a3)
    }
}

/// Compares the rescaled instantons (`λ = r₀`) of a sequence of family
/// members sharing the same Taub-NUT parameter against the ASD solution
/// with the same `(μ₁, μ₃)`.
pub fn adiabatic_instanton_compare(
    mu1: f64,
    mu3: f64,
    members: &[B7Params],
    t_max: f64,
    rel_tol: f64,
) -> Result<Vec<AdiabaticRow>> {
    let Some(first) = members.first() else {
        return Err(Error::InvalidInput("no family members given".into()));
    };
    let m = first
        .taub_nut_m()
        .ok_or_else(|| Error::InvalidInput("member has no adiabatic limit".into()))?;
    cd_from_mu(mu1, mu3, m)?;
    members
        .iter()
        .map(|p| {
            match p.taub_nut_m() {
                Some(mi) if (mi - m).abs() <= 1e-9 * m => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "member with r0 = {} does not share m = {m}",
                        p.r0
                    )))
                }
            }
            let inst = rescaled_instanton(p, p.r0, mu1, mu3, t_max, rel_tol)?;
            let (e1, e3) = asd_sup_error(&inst, m)?;
            Ok(AdiabaticRow {
                r0: p.r0,
                lambda: p.r0,
                sup_err_a1: e1,
                sup_err_a3: e3,
                t_max,
            })
        })
        .collect()
}

/// Family members with Taub-NUT parameter `m` at the given scales.
pub fn members_with_m(m: f64, r0s: &[f64]) -> Result<Vec<B7Params>> {
    r0s.iter()
        .map(|&r0| B7Params::with_taub_nut_m(r0, m))
        .collect()
}

pub fn write_adiabatic_csv(path: &Path, rows: &[AdiabaticRow]) -> Result<()> {
    write_csv(
        path,
        &AdiabaticRow::HEADER,
        rows.iter().map(|r| num_row(&r.values())),
    )
}
