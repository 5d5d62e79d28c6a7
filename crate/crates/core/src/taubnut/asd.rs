use super::metric::TaubNutParams;
use crate::error::{Error, Result};

/// SU(2)×U(1)-invariant ASD instantons on Taub-NUT, written in the
/// coefficients `(a₁, a₃)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum AsdParams {
    /// Irreducible solutions with `C, D ≥ 0`. `D = 0` lives on the bundle of
    /// self-dual forms.
    TwoParameter { c: f64, d: f64 },
    /// Reducible solutions `a₁ = 0`. Any real `C`.
    Abelian { c: f64 },
    /// The `C, D → 0` limit with `B = sinh(D)/C ≥ 0` fixed.
    EtesiHausel { b: f64 },
}

impl AsdParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AsdParams::TwoParameter { c, d } => {
                if !(c >= 0.0 && d >= 0.0 && c.is_finite() && d.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "C = {c}, D = {d} must be finite and non-negative"
                    )));
                }
                if c == 0.0 && d == 0.0 {
                    return Err(Error::InvalidInput(
                        "C = D = 0 is the Etesi-Hausel limit; give B instead".into(),
                    ));
                }
            }
            AsdParams::Abelian { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidInput(format!("C = {c} must be finite")));
                }
            }
            AsdParams::EtesiHausel { b } => {
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(Error::InvalidInput(format!("B = {b} must be non-negative")));
                }
            }
        }
        Ok(())
    }

    /// Value of the conserved quantity along this solution.
    pub fn conserved_value(&self) -> f64 {
        match *self {
            AsdParams::TwoParameter { c, .. } | AsdParams::Abelian { c } => -c * c,
            AsdParams::EtesiHausel { .. } => 0.0,
        }
    }
}

/// `(a₁, a₃)` together with their η-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct AsdJet {
    pub a1: f64,
    pub a3: f64,
    pub da1: f64,
    pub da3: f64,
}

fn check_eta(m: f64, eta: f64) -> Result<f64> {
    let c = TaubNutParams::new(m)?.eta_min();
    if !(eta > c) || !eta.is_finite() {
        return Err(Error::Domain(format!(
            "eta = {eta} must exceed 1/m^2 = {c}"
        )));
    }
    Ok(c)
}

fn csch(z: f64) -> f64 {
    1.0 / z.sinh()
}

fn coth(z: f64) -> f64 {
    1.0 / z.tanh()
}

/// Closed-form solution and its analytic η-derivatives.
pub fn asd_jet(params: AsdParams, m: f64, eta: f64) -> Result<AsdJet> {
    params.validate()?;
    let cm = check_eta(m, eta)?;
    let x = eta - cm;
    Ok(match params {
        AsdParams::TwoParameter { c, d } => {
            let u = c / x;
            let du = -u / x;
            let z = u + d;
            let (s, ct) = (csch(z), coth(z));
            // u·csch(z) → 0 when z overflows sinh.
            let a1 = if s == 0.0 { 0.0 } else { u * s };
            let da1 = if s == 0.0 {
                0.0
            } else {
                du * s * (1.0 - u * ct)
            };
            let num = cm + c * ct;
            let a3 = num / eta;
            let da3 = -num / (eta * eta) - c * s * s * du / eta;
            AsdJet { a1, a3, da1, da3 }
        }
        AsdParams::Abelian { c } => AsdJet {
            a1: 0.0,
            a3: (cm + c) / eta,
            da1: 0.0,
            da3: -(cm + c) / (eta * eta),
        },
        AsdParams::EtesiHausel { b } => {
            let k = 1.0 / (1.0 + b * x);
            let a3 = (cm + x * k) / eta;
            AsdJet {
                a1: k,
                a3,
                da1: -b * k * k,
                da3: (k * k - a3) / eta,
            }
        }
    })
}

/// `(a₁, a₃)` at `η`.
pub fn asd_eval(params: AsdParams, m: f64, eta: f64) -> Result<(f64, f64)> {
    let j = asd_jet(params, m, eta)?;
    Ok((j.a1, j.a3))
}

/// Residuals of the ASD equations `ȧ₁ = −(a₃ − 1)a₁/f₃`,
/// `ȧ₃ = −f₃(a₁² − a₃)/f₁²` at one point, using `d/dt = (dη/dt) d/dη`.
pub fn asd_pointwise_residual(params: AsdParams, m: f64, eta: f64) -> Result<(f64, f64)> {
    let j = asd_jet(params, m, eta)?;
    let tn = TaubNutParams::new(m)?;
    let (f1, f3) = (eta.sqrt() / (eta - tn.eta_min()), eta.powf(-0.5));
    let deta_dt = 1.0 / tn.dt_deta(eta);
    let r1 = j.da1 * deta_dt + (j.a3 - 1.0) * j.a1 / f3;
    let r2 = j.da3 * deta_dt + f3 * (j.a1 * j.a1 - j.a3) / (f1 * f1);
    Ok((r1, r2))
}

/// Largest absolute residual of the ASD equations over a grid of η values.
pub fn asd_residual(params: AsdParams, m: f64, eta_grid: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &eta in eta_grid {
        let (r1, r2) = asd_pointwise_residual(params, m, eta)?;
        worst = worst.max(r1.abs()).max(r2.abs());
    }
    Ok(worst)
}

/// `Q = (η − m⁻²)² d(ηa₃)/dη − (ηa₃ − m⁻²)²` from the analytic derivative.
pub fn conserved_quantity_exact(params: AsdParams, m: f64, eta: f64) -> Result<f64> {
    let j = asd_jet(params, m, eta)?;
    let cm = 1.0 / (m * m);
    let x = eta - cm;
    let d_eta_a3 = j.a3 + eta * j.da3;
    let y = eta * j.a3 - cm;
    Ok(x * x * d_eta_a3 - y * y)
}

/// `Q(η)` from sampled `a₃`, differentiating `ηa₃` with five-point
/// finite-difference weights on the (possibly non-uniform) grid.
pub fn conserved_quantity(eta_grid: &[f64], a3: &[f64], m: f64) -> Result<Vec<f64>> {
    let n = eta_grid.len();
    if n != a3.len() || n < 5 {
        return Err(Error::InvalidInput(
            "conserved_quantity needs at least five samples of matching length".into(),
        ));
    }
    if eta_grid
        .windows(2)
        .any(|w| !(w[1] > w[0]) && !(w[1] < w[0]))
    {
        return Err(Error::InvalidInput(
            "eta grid must be strictly monotone".into(),
        ));
    }
    let cm = 1.0 / (m * m);
    let prod: Vec<f64> = eta_grid.iter().zip(a3).map(|(e, a)| e * a).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(2).min(n - 5);
        let xs = &eta_grid[lo..lo + 5];
        let w = fornberg_first_derivative(eta_grid[i], xs);
        let d: f64 = w.iter().zip(&prod[lo..lo + 5]).map(|(a, b)| a * b).sum();
        let x = eta_grid[i] - cm;
        let y = prod[i] - cm;
        out.push(x * x * d - y * y);
    }
    Ok(out)
}

/// First-derivative weights at `x0` for the stencil `xs`.
fn fornberg_first_derivative(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[j][k]: weight of xs[j] for the k-th derivative, k ∈ {0, 1}.
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|r| r[1]).collect()
}

/// The ASD equations with η as the independent variable:
/// `da₁/dη = η(a₃ − 1)a₁/(η − m⁻²)²`, `da₃/dη = (a₁² − a₃)/η`.
pub fn asd_rhs_eta(m: f64, eta: f64, a: &[f64], out: &mut [f64]) {
    let x = eta - 1.0 / (m * m);
    out[0] = eta * (a[1] - 1.0) * a[0] / (x * x);
    out[1] = (a[0] * a[0] - a[1]) / eta;
}

/// Small-`t` coefficients `(μ₁, μ₃)` of `a₁ ≈ μ₁t²`, `a₃ ≈ μ₃t²` for the
/// two-parameter family.
pub fn mu_from_cd(c: f64, d: f64, m: f64) -> (f64, f64) {
    let q = 0.25 * c;
    (q * csch(d), q * coth(d) + 0.25 / (m * m))
}

/// Inverts [`mu_from_cd`]. `μ₁ = 0` gives the abelian solution with the same
/// `μ₃`, and `μ₃ − 1/(4m²) = μ₁ > 0` gives the Etesi-Hausel solution.
pub fn cd_from_mu(mu1: f64, mu3: f64, m: f64) -> Result<AsdParams> {
    let s = mu3 - 0.25 / (m * m);
    if !(mu1 >= 0.0) || !(s >= mu1) || !mu3.is_finite() {
        return Err(Error::ConstraintViolation(format!(
            "need mu3 - 1/(4m^2) >= mu1 >= 0, got mu1 = {mu1}, mu3 = {mu3}, m = {m}"
        )));
    }
    if mu1 == 0.0 {
        return Ok(AsdParams::Abelian { c: 4.0 * s });
    }
    let q2 = (s - mu1) * (s + mu1);
    let q = q2.max(0.0).sqrt();
    if q <= 1e-12 * s {
        return Ok(AsdParams::EtesiHausel { b: 0.25 / mu1 });
    }
    // coth D = s/q, so D = atanh(q/s).
    Ok(AsdParams::TwoParameter {
        c: 4.0 * q,
        d: (q / s).atanh(),
    })
}
