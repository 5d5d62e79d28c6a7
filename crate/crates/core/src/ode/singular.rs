use nalgebra::{DMatrix, DVector};

use super::dopri::{integrate_with, SolverOptions};
use super::{inf_norm, Trajectory};
use crate::error::{Error, Result};

/// A singular initial value problem `y' = M₋₁(y)/t + M(t, y)`, `y(0) = y₀`.
///
/// Solutions exist and are unique when `M₋₁(y₀) = 0` and `h·I − dM₋₁(y₀)` is
/// invertible for every integer `h ≥ 1`.
pub trait SingularSystem {
    fn dim(&self) -> usize;
    fn y0(&self) -> &[f64];
    fn m_minus1(&self, y: &[f64], out: &mut [f64]);
    fn m_smooth(&self, t: f64, y: &[f64], out: &mut [f64]);

    /// Jacobian of `M₋₁` at `y`, row-major. Central differences unless overridden.
    fn jacobian_minus1(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for j in 0..n {
            let h = 1e-6 * y[j].abs().max(1.0);
            yp[j] = y[j] + h;
            self.m_minus1(&yp, &mut fp);
            yp[j] = y[j] - h;
            self.m_minus1(&yp, &mut fm);
            yp[j] = y[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }
}

/// `Σ coeffs[k]·epsᵏ`, component-wise.
pub fn taylor_seed(coeffs: &[Vec<f64>], eps: f64) -> Vec<f64> {
    let n = coeffs.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for c in coeffs.iter().rev() {
        for (o, ci) in out.iter_mut().zip(c) {
            *o = *o * eps + ci;
        }
    }
    out
}

/// Largest `ε ≤ eps_max` with `‖c_last‖·ε^(k+1) < tol`, the last supplied
/// coefficient standing in for the first omitted one.
pub fn taylor_epsilon(coeffs: &[Vec<f64>], tol: f64, eps_max: f64) -> f64 {
    let k = coeffs.len();
    let last = coeffs.last().map_or(0.0, |c| inf_norm(c));
    if last == 0.0 || k == 0 {
        return eps_max;
    }
    (tol / last).powf(1.0 / k as f64).min(eps_max)
}

#[derive(Debug, Clone)]
pub struct SingularOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Override the automatically chosen seed point.
    pub eps: Option<f64>,
    pub solver: SolverOptions,
}

impl SingularOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: rel_tol * 1e-2,
            eps: None,
            solver: SolverOptions::tolerances(rel_tol, rel_tol * 1e-2),
        }
    }
}

/// Solves a [`SingularSystem`] on `[0, t_end]`.
pub fn solve_singular_ivp<S: SingularSystem + ?Sized>(
    sys: &S,
    t_end: f64,
    rel_tol: f64,
) -> Result<Trajectory> {
    solve_singular_ivp_with(sys, t_end, &SingularOptions::new(rel_tol))
}

pub(crate) struct Series {
    pub coeffs: Vec<Vec<f64>>,
}

/// Validates the two existence conditions and computes the series through
/// second order.
pub(crate) fn singular_series<S: SingularSystem + ?Sized>(sys: &S, t_scale: f64) -> Result<Series> {
    let n = sys.dim();
    let y0 = sys.y0().to_vec();
    if y0.len() != n {
        return Err(Error::InvalidSystem("y0 has the wrong dimension".into()));
    }
    let mut buf = vec![0.0; n];
    sys.m_minus1(&y0, &mut buf);
    let resid = inf_norm(&buf);
    if !(resid <= 1e-12) {
        return Err(Error::InvalidSystem(format!(
            "M_-1(y0) = {resid:.3e}, expected 0"
        )));
    }
    let jac = sys.jacobian_minus1(&y0);
    check_resonance(&jac)?;

    // First order: (I − J) y₁ = M(0, y₀).
    let mut m0 = vec![0.0; n];
    sys.m_smooth(0.0, &y0, &mut m0);
    let id = DMatrix::<f64>::identity(n, n);
    let y1 = (&id - &jac)
        .lu()
        .solve(&DVector::from_vec(m0))
        .ok_or_else(|| Error::InvalidSystem("I - J is singular".into()))?;
    let y1: Vec<f64> = y1.iter().copied().collect();

    // Second order: (2I − J) y₂ = K'(0), with K(t) = M₋₁(y₀ + y₁t)/t + M(t, y₀ + y₁t).
    let k_at = |t: f64| -> Vec<f64> {
        let y: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a + b * t).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        sys.m_minus1(&y, &mut a);
        sys.m_smooth(t, &y, &mut b);
        a.iter().zip(&b).map(|(p, q)| p / t + q).collect()
    };
    let h = 1e-4 * t_scale;
    let k1 = k_at(h);
    let k2 = k_at(2.0 * h);
    let rhs: Vec<f64> = (0..n)
        .map(|i| 2.0 * (k1[i] - y1[i]) / h - (k2[i] - y1[i]) / (2.0 * h))
        .collect();
    let y2 = (&id * 2.0 - &jac)
        .lu()
        .solve(&DVector::from_vec(rhs))
        .ok_or_else(|| Error::InvalidSystem("2I - J is singular".into()))?;
    let y2: Vec<f64> = y2.iter().copied().collect();
    Ok(Series {
        coeffs: vec![y0, y1, y2],
    })
}

/// Rejects Jacobians with an eigenvalue within 1e-8 of a positive integer.
pub fn check_resonance(jac: &DMatrix<f64>) -> Result<()> {
    for ev in jac.complex_eigenvalues().iter() {
        let near = ev.re.round();
        if near >= 1.0 && (ev.re - near).abs() < 1e-8 && ev.im.abs() < 1e-8 {
            return Err(Error::InvalidSystem(format!(
                "dM_-1(y0) has resonant eigenvalue {}",
                ev.re
            )));
        }
    }
    Ok(())
}

pub fn solve_singular_ivp_with<S: SingularSystem + ?Sized>(
    sys: &S,
    t_end: f64,
    opts: &SingularOptions,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidInput("t_end must be positive".into()));
    }
    let series = singular_series(sys, t_end)?;
    let coeffs = &series.coeffs;
    // Third coefficient estimated from the ratio of the first two.
    let n1 = inf_norm(&coeffs[1]);
    let n2 = inf_norm(&coeffs[2]);
    let next = if n1 > 0.0 { n2 * n2 / n1 } else { n2 };
    let eps = opts.eps.unwrap_or_else(|| {
        let cap = 1e-2 * t_end;
        if next > 0.0 {
            (opts.abs_tol / next).powf(1.0 / 3.0).min(cap)
        } else {
            cap
        }
    });
    let y_eps = taylor_seed(coeffs, eps);

    let n = sys.dim();
    let mut a = vec![0.0; n];
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        sys.m_minus1(y, &mut a);
        sys.m_smooth(t, y, out);
        for i in 0..out.len() {
            out[i] += a[i] / t;
        }
    };
    let mut solver = opts.solver.clone();
    solver.rel_tol = opts.rel_tol;
    solver.abs_tol = opts.abs_tol;
    let mut traj = integrate_with(rhs, &y_eps, eps, t_end, &solver, |_, _| false)?;
    traj.times.insert(0, 0.0);
    traj.states.insert(0, coeffs[0].clone());
    traj.derivs.insert(0, coeffs[1].clone());
    Ok(traj)
}
