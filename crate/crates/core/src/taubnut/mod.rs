//! Taub-NUT and its SU(2)×U(1)-invariant ASD instantons.
//!
//! The metric `dt² + f₁²(η₁² + η₂²) + f₃²η₃²` is known in closed form in the
//! coordinate `η`; writing `w = η^(−1/2)` also gives `t` in closed form, so no
//! quadrature is needed at run time. The ASD families are evaluated exactly and
//! checked against the ODE through their analytic derivatives.

mod adiabatic;
mod asd;
mod metric;

pub use adiabatic::{
    adiabatic_instanton_compare, asd_sup_error, members_with_m, rescaled_b7_flow,
    rescaled_cubic_coeffs, rescaled_instanton, rescaled_instanton_rhs, rescaled_seed,
    write_adiabatic_csv, AdiabaticRow, RescaledInstanton, RescaledTrajectory, RESCALED_EPS,
};

pub use asd::{
    asd_eval, asd_jet, asd_pointwise_residual, asd_residual, asd_rhs_eta, cd_from_mu,
    conserved_quantity, conserved_quantity_exact, mu_from_cd, AsdJet, AsdParams,
};
pub use metric::{tn_metric, tn_rhs, TaubNutParams, TnPoint};

use nalgebra::Matrix2;

use crate::error::Result;

/// Eigenvalues of the linearisation of the rescaled metric flow at the
/// singular orbit, sorted in decreasing order.
///
/// The two decoupled blocks act on `(a₁, a₃)` and `(b₁, b₃)`.
pub fn linearisation_eigenvalues() -> Vec<f64> {
    let blocks = [
        Matrix2::new(-2.0, -1.0, -2.0, -1.0),
        Matrix2::new(-4.0, 2.0, 4.0, -6.0),
    ];
    let mut ev: Vec<f64> = blocks
        .iter()
        .flat_map(|b| {
            b.complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .collect::<Vec<_>>()
        })
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev
}

/// One row of the closed-form sampler.
#[derive(Debug, Clone, Copy)]
pub struct ClosedFormSample {
    pub eta: f64,
    pub t: f64,
    pub f1: f64,
    pub f3: f64,
    pub a1: f64,
    pub a3: f64,
    pub q: f64,
}

impl ClosedFormSample {
    pub const HEADER: [&'static str; 7] = ["eta", "t", "f1", "f3", "a1", "a3", "Q"];

    pub fn values(&self) -> [f64; 7] {
        [self.eta, self.t, self.f1, self.f3, self.a1, self.a3, self.q]
    }
}

/// Samples metric, instanton and conserved quantity on an η grid.
pub fn sample_closed_form(
    tn: TaubNutParams,
    asd: AsdParams,
    eta_grid: &[f64],
) -> Result<Vec<ClosedFormSample>> {
    eta_grid
        .iter()
        .map(|&eta| {
            let p = tn.at_eta(eta)?;
            let (a1, a3) = asd_eval(asd, tn.m, eta)?;
            Ok(ClosedFormSample {
                eta,
                t: p.t,
                f1: p.f1,
                f3: p.f3,
                a1,
                a3,
                q: conserved_quantity_exact(asd, tn.m, eta)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
