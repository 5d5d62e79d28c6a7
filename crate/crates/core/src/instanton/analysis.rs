use super::{InstantonSample, InstantonTrajectory, Verdict, BOUNDARY_TOL_FACTOR};
use crate::error::{Error, Result};
use crate::fit::{least_squares, window};
use crate::ode::Termination;

/// Limit `G∞` of `g⁺` with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GInfEstimate {
    pub g_inf: f64,
    pub fit_err: f64,
}

/// Estimates `G∞` from the monotone flux `ℓg⁺/A₃`, which decreases to `G∞`.
///
/// The remaining decrease past the last sample `T` is `ℓ∫_T^∞ f²/A₃`. It is
/// extrapolated from the decrease over `[T/2, T]` assuming the slowest
/// admissible decay `t⁻⁴` (boundary solutions, `f⁺ ~ t^{−5/2}`); faster
/// exponential decay only makes the estimate conservative.
pub fn flux_limit(traj: &InstantonTrajectory, ell: f64) -> Result<GInfEstimate> {
    let n = traj.samples.len();
    if n < 4 {
        return Err(Error::FitUnstable {
            residual: f64::INFINITY,
            limit: 0.0,
        });
    }
    let last = &traj.samples[n - 1];
    let half = last.t / 2.0;
    let mid = nearest_sample(traj, half);
    let flux = |s: &InstantonSample| ell * s.g / s.coeffs.a3;
    let (g_end, g_mid) = (flux(last), flux(mid));
    let ratio = (last.t / mid.t).powi(4);
    let tail = (g_mid - g_end).max(0.0) / (ratio - 1.0);
    Ok(GInfEstimate {
        g_inf: g_end - tail,
        fit_err: tail,
    })
}

fn nearest_sample(traj: &InstantonTrajectory, t: f64) -> &InstantonSample {
    traj.samples
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
        .expect("non-empty")
}

/// `λ = lim f⁺e^{(G∞−ℓ⁻¹)t}t^{5/2}`. The finite-`t` value approaches the limit
/// like `exp(−c/t)`, so one Richardson step in `ln λ` over `[T/2, T]` is used.
fn lambda_limit(traj: &InstantonTrajectory, gap: f64) -> f64 {
    let raw = |s: &InstantonSample| s.f * (gap * s.t).exp() * s.t.powf(2.5);
    let last = traj.samples.last().expect("non-empty");
    let mid = nearest_sample(traj, last.t / 2.0);
    let (l_end, l_mid) = (raw(last), raw(mid));
    if l_end > 0.0 && l_mid > 0.0 {
        let w = last.t / (last.t - mid.t);
        (w * l_end.ln() + (1.0 - w) * l_mid.ln()).exp()
    } else {
        l_end
    }
}

fn boundary_tol(ell: f64) -> f64 {
    BOUNDARY_TOL_FACTOR / ell
}

/// Classifies a trajectory integrated to `t_max`.
///
/// Blow-up of `f⁺` or a negative `g⁺` with `f⁺ ≠ 0` mean the solution is
/// incomplete, as does a flux `ℓg⁺/A₃` that has already dropped below
/// `ℓ⁻¹ − boundary_tol`; in that case `t_blowup` is the detection time. Otherwise `G∞` decides between the exponential and boundary
/// regimes; a trajectory whose `G∞` is still below `ℓ⁻¹` or whose `G∞`
/// uncertainty exceeds the boundary tolerance is undecided.
pub fn classify_trajectory(traj: &InstantonTrajectory, ell: f64, t_max: f64) -> Result<Verdict> {
    if !(ell > 0.0) {
        return Err(Error::InvalidInput(format!("ell = {ell} must be positive")));
    }
    match traj.termination {
        Termination::BlowUp(t) | Termination::Stopped(t) | Termination::StepUnderflow(t) => {
            return Ok(Verdict::Incomplete { t_blowup: t })
        }
        Termination::ReachedEnd => {}
    }
    if traj.samples.iter().all(|s| s.f == 0.0) {
        let last = traj
            .samples
            .last()
            .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
        return Ok(Verdict::Abelian {
            g_inf: ell * last.g / last.coeffs.a3,
        });
    }
    if traj.t_last() < t_max * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!(
            "trajectory ends at {} before t_max = {t_max}",
            traj.t_last()
        )));
    }
    let est = flux_limit(traj, ell)?;
    let tol = boundary_tol(ell);
    let undecided = Error::Undecided {
        t_max,
        fit_err: est.fit_err,
    };
    // The flux only decreases, so a value already below ℓ⁻¹ rules out completeness.
    if est.g_inf + est.fit_err < 1.0 / ell - tol {
        return Ok(Verdict::Incomplete {
            t_blowup: traj.t_last(),
        });
    }
    if est.fit_err > tol {
        return Err(undecided);
    }
    let gap = est.g_inf - 1.0 / ell;
    if gap.abs() < tol {
        Ok(Verdict::CompleteBoundary { g_inf: est.g_inf })
    } else if gap > 0.0 {
        Ok(Verdict::CompleteExponential {
            g_inf: est.g_inf,
            lambda_fit: lambda_limit(traj, gap),
        })
    } else {
        Err(undecided)
    }
}

/// Fit of `log f⁺ = c + rate·t + power·log t + c₁/t` over the final decade.
///
/// The `c₁/t` term absorbs the leading correction to the `t^{−5/2}` prefactor,
/// which otherwise biases the fitted power by O(1) at moderate `t`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor_power: f64,
    /// `e^c`.
    pub prefactor: f64,
    pub max_residual: f64,
}

pub fn decay_rate_fit(traj: &InstantonTrajectory) -> Result<DecayFit> {
    let ts = traj.times();
    let t_end = traj.t_last();
    let idx = window(&ts, t_end / 10.0, t_end);
    let unstable = |r: f64| Error::FitUnstable {
        residual: r,
        limit: 0.0,
    };
    if idx.len() < 10 {
        return Err(unstable(f64::INFINITY));
    }
    if idx.iter().any(|&i| !(traj.samples[i].f > 0.0)) {
        return Err(unstable(f64::INFINITY));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| traj.samples[i].f.ln()).collect();
    let range = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(range > 1e-3) {
        return Err(unstable(range));
    }
    let fit = least_squares(&xs, &ys, 4, |t, k| match k {
        0 => 1.0,
        1 => t,
        2 => t.ln(),
        _ => 1.0 / t,
    })
    .ok_or_else(|| unstable(f64::INFINITY))?;
    Ok(DecayFit {
        rate: fit.coeffs[1],
        prefactor_power: fit.coeffs[2],
        prefactor: fit.coeffs[0].exp(),
        max_residual: fit.max_residual,
    })
}

/// Tail diagnostics of `g⁺` against its abelian model `G∞ℓ⁻¹A₃`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RemainderReport {
    /// Sample times where the remainder is resolvable.
    pub t: Vec<f64>,
    /// `|g⁺ − G∞ℓ⁻¹A₃|·t^{5/2}·e^{(G∞−ℓ⁻¹)t}`.
    pub remainder: Vec<f64>,
    /// `sup |(g⁺ − G∞)t²|` over the tail.
    pub k_sup: f64,
}

/// Relative size below which `f⁺²` is lost against `g⁺` in double precision.
const RESOLVABLE: f64 = 1e-10;

/// Checks `|g⁺ − g_ab|·t^{5/2}·e^{(G∞−ℓ⁻¹)t} → 0` with `g_ab = G∞ℓ⁻¹A₃`, and
/// that `k = (g⁺ − G∞)t²` stays bounded, over the final decade.
///
/// `g⁺ − g_ab` is of order `f⁺²`, so the remainder is only evaluated where
/// `f⁺² > 10⁻¹⁰|g⁺|`; further out it is pure roundoff amplified by the
/// exponential weight. An abelian trajectory is checked on the whole decade.
pub fn check_g_remainder(
    traj: &InstantonTrajectory,
    g_inf: f64,
    ell: f64,
) -> Result<RemainderReport> {
    let ts = traj.times();
    let t_end = traj.t_last();
    let tail = window(&ts, t_end / 10.0, t_end);
    if tail.len() < 2 {
        return Err(Error::InvalidInput(
            "tail has fewer than two samples".into(),
        ));
    }
    let abelian = tail.iter().all(|&i| traj.samples[i].f == 0.0);
    let idx: Vec<usize> = tail
        .iter()
        .copied()
        .filter(|&i| {
            let s = &traj.samples[i];
            abelian || s.f * s.f > RESOLVABLE * s.g.abs()
        })
        .collect();
    if idx.len() < 2 {
        return Err(Error::FitUnstable {
            residual: idx.len() as f64,
            limit: 2.0,
        });
    }
    let rate = g_inf - 1.0 / ell;
    let flux_inf = g_inf / ell;
    let mut report = RemainderReport {
        t: Vec::with_capacity(idx.len()),
        remainder: Vec::with_capacity(idx.len()),
        k_sup: 0.0,
    };
    for &i in &idx {
        let s = &traj.samples[i];
        let r = (s.g - flux_inf * s.coeffs.a3).abs() * s.t.powf(2.5) * (rate * s.t).exp();
        report.t.push(s.t);
        report.remainder.push(r);
    }
    report.k_sup = tail
        .iter()
        .map(|&i| {
            let s = &traj.samples[i];
            ((s.g - g_inf) * s.t * s.t).abs()
        })
        .fold(0.0, f64::max);
    let first = report.remainder[0];
    let last = *report.remainder.last().expect("non-empty");
    if !report.k_sup.is_finite() || (!abelian && last > first) {
        return Err(Error::ViolatedAsymptotic(format!(
            "remainder grows over the tail: {first:.3e} at t = {:.3} to {last:.3e} at t = {:.3}",
            report.t[0],
            report.t.last().expect("non-empty")
        )));
    }
    Ok(report)
}
