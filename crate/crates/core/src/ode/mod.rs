//! Integration machinery shared by every flow in the crate.
//!
//! [`integrate_adaptive`] is a Dormand–Prince 5(4) pair with PI step control
//! and a fourth-order continuous extension. [`solve_singular_ivp`] handles
//! systems of the form `y' = M₋₁(y)/t + M(t, y)` with `y(0) = y₀` by seeding a
//! truncated power series at a small `t = ε` and handing off to the adaptive
//! integrator.

mod dopri;
mod singular;

pub use dopri::{integrate_adaptive, integrate_fixed, integrate_with, Output, SolverOptions};
pub use singular::{
    check_resonance, solve_singular_ivp, solve_singular_ivp_with, taylor_epsilon, taylor_seed,
    SingularOptions, SingularSystem,
};

/// Default state-norm threshold above which a trajectory is declared to blow up.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedEnd,
    BlowUp(f64),
    StepUnderflow(f64),
    /// A caller-supplied stop predicate fired at this time.
    Stopped(f64),
}

impl Termination {
    pub fn is_complete(&self) -> bool {
        matches!(self, Termination::ReachedEnd)
    }
}

/// Sampled solution of an ODE. Times are strictly increasing and every stored
/// state is finite.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Right-hand side at each stored point; used for Hermite interpolation.
    pub derivs: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn t_first(&self) -> f64 {
        self.times[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("empty trajectory")
    }

    /// Component `k` of every stored state.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }

    /// Index `i` such that `times[i] <= t <= times[i + 1]`.
    fn bracket(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|x| x.partial_cmp(&t).expect("NaN time"))
        {
            Ok(i) => i.min(self.times.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.times.len() - 2),
        }
    }

    /// Cubic Hermite interpolation of the state at `t`. Returns `None` outside
    /// the stored time range.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.interpolate_into(t, &mut out).then_some(out)
    }

    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) -> bool {
        if self.times.len() < 2 || t < self.t_first() || t > self.t_last() {
            if self.times.len() == 1 && t == self.times[0] {
                out.copy_from_slice(&self.states[0]);
                return true;
            }
            return false;
        }
        let i = self.bracket(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let (d0, d1) = (&self.derivs[i], &self.derivs[i + 1]);
        for k in 0..out.len() {
            out[k] = h00 * y0[k] + h10 * h * d0[k] + h01 * y1[k] + h11 * h * d1[k];
        }
        true
    }
}

pub(crate) fn inf_norm(y: &[f64]) -> f64 {
    y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests;
