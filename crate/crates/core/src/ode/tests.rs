use super::*;
use crate::error::Error;

fn decay(_t: f64, y: &[f64], out: &mut [f64]) {
    out[0] = -y[0];
}

#[test]
fn linear_decay_matches_exponential() {
    let tr = integrate_adaptive(decay, &[1.0], 0.0, 1.0, 1e-10, 1e-12).unwrap();
    assert_eq!(tr.termination, Termination::ReachedEnd);
    assert_eq!(tr.t_first(), 0.0);
    assert_eq!(tr.t_last(), 1.0);
    let exact = (-1.0f64).exp();
    assert!((tr.final_state()[0] - exact).abs() < 1e-9 * exact);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn quadratic_rhs_blows_up_near_pole() {
    let tr =
        integrate_adaptive(|_, y, o| o[0] = y[0] * y[0], &[1.0], 0.0, 2.0, 1e-8, 1e-10).unwrap();
    match tr.termination {
        Termination::BlowUp(t) => assert!((t - 1.0).abs() < 1e-6, "blow-up at {t}"),
        other => panic!("expected blow-up, got {other:?}"),
    }
    assert!(inf_norm(tr.final_state()) > BLOWUP_THRESHOLD);
}

#[test]
fn non_finite_rhs_underflows() {
    // Solution exists up to t = 1 only; beyond it the rhs is NaN.
    let tr = integrate_adaptive(
        |t, _, o| o[0] = 1.0 / (1.0 - t).sqrt(),
        &[0.0],
        0.0,
        2.0,
        1e-8,
        1e-10,
    )
    .unwrap();
    match tr.termination {
        Termination::StepUnderflow(t) => assert!(t <= 1.0 && t > 0.99),
        other => panic!("expected underflow, got {other:?}"),
    }
}

#[test]
fn rejects_bad_input() {
    assert!(matches!(
        integrate_adaptive(decay, &[1.0], 1.0, 0.0, 1e-8, 1e-8),
        Err(Error::InvalidInput(_))
    ));
    assert!(integrate_adaptive(decay, &[1.0], 0.0, 1.0, 0.0, 1e-8).is_err());
}

#[test]
fn grid_output_hits_requested_times() {
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
    let opts = SolverOptions::tolerances(1e-11, 1e-13).with_grid(grid.clone());
    let tr = integrate_with(decay, &[1.0], 0.0, 3.0, &opts, |_, _| false).unwrap();
    assert_eq!(tr.times, grid);
    for (t, y) in tr.times.iter().zip(&tr.states) {
        assert!((y[0] - (-t).exp()).abs() < 1e-9);
    }
}

#[test]
fn stop_predicate_terminates() {
    let tr = integrate_with(
        |_, _, o| o[0] = 1.0,
        &[0.0],
        0.0,
        10.0,
        &SolverOptions {
            h_max: Some(0.5),
            ..SolverOptions::default()
        },
        |_, y| y[0] > 2.0,
    )
    .unwrap();
    assert!(matches!(tr.termination, Termination::Stopped(t) if t > 2.0 && t < 10.0));
}

#[test]
fn hermite_interpolation_is_accurate() {
    let tr = integrate_adaptive(decay, &[1.0], 0.0, 2.0, 1e-12, 1e-14).unwrap();
    for i in 0..50 {
        let t = 0.013 + i as f64 * 0.0397;
        let y = tr.interpolate(t).unwrap()[0];
        assert!((y - (-t).exp()).abs() < 1e-7, "t={t}");
    }
    assert!(tr.interpolate(2.5).is_none());
}

#[test]
fn taylor_seed_constant_series() {
    let c = vec![vec![1.5, -2.0]];
    assert_eq!(taylor_seed(&c, 0.0), vec![1.5, -2.0]);
    assert_eq!(taylor_seed(&c, 7.0), vec![1.5, -2.0]);
    let c = vec![vec![1.0], vec![2.0], vec![3.0]];
    assert!((taylor_seed(&c, 0.1)[0] - 1.23).abs() < 1e-15);
}

#[test]
fn taylor_epsilon_respects_bound() {
    let c = vec![vec![1.0], vec![0.0], vec![4.0]];
    let e = taylor_epsilon(&c, 1e-12, 1.0);
    assert!(4.0 * e.powi(3) <= 1.0000001e-12);
}

/// y' = -2y/t + 1, y(0) = 0  ⇒  y = t/3.
struct Linear;
impl SingularSystem for Linear {
    fn dim(&self) -> usize {
        1
    }
    fn y0(&self) -> &[f64] {
        &[0.0]
    }
    fn m_minus1(&self, y: &[f64], out: &mut [f64]) {
        out[0] = -2.0 * y[0];
    }
    fn m_smooth(&self, _t: f64, _y: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
    }
}

/// x' = x, z' = -2z/t + x²: x = x₀eᵗ and z = x₀²(e²ᵗ(2t² − 2t + 1) − 1)/(4t²).
struct Coupled {
    y0: [f64; 2],
}
impl SingularSystem for Coupled {
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
    fn m_smooth(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[0];
        out[1] = y[0] * y[0];
    }
}

fn coupled_exact(x0: f64, t: f64) -> [f64; 2] {
    let z = x0 * x0 * ((2.0 * t).exp() * (2.0 * t * t - 2.0 * t + 1.0) - 1.0) / (4.0 * t * t);
    [x0 * t.exp(), z]
}

#[test]
fn singular_linear_system() {
    let tr = solve_singular_ivp(&Linear, 2.0, 1e-10).unwrap();
    assert_eq!(tr.times[0], 0.0);
    assert!((tr.final_state()[0] - 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn singular_coupled_matches_closed_form() {
    let sys = Coupled { y0: [0.7, 0.0] };
    let tr = solve_singular_ivp(&sys, 1.5, 1e-10).unwrap();
    let ex = coupled_exact(0.7, 1.5);
    let y = tr.final_state();
    assert!((y[0] - ex[0]).abs() < 1e-8 * ex[0].abs());
    assert!(
        (y[1] - ex[1]).abs() < 1e-8 * ex[1].abs(),
        "{} vs {}",
        y[1],
        ex[1]
    );
}

#[test]
fn singular_zero_seed_stays_zero() {
    let sys = Coupled { y0: [0.0, 0.0] };
    let tr = solve_singular_ivp(&sys, 1.0, 1e-10).unwrap();
    assert!(tr.states.iter().all(|s| s[0] == 0.0 && s[1] == 0.0));
}

#[test]
fn singular_result_independent_of_eps() {
    let sys = Coupled { y0: [0.7, 0.0] };
    let rel = 1e-10;
    let mut opts = SingularOptions::new(rel);
    opts.eps = Some(1e-3);
    let a = solve_singular_ivp_with(&sys, 1.0, &opts).unwrap();
    opts.eps = Some(5e-4);
    let b = solve_singular_ivp_with(&sys, 1.0, &opts).unwrap();
    for (x, y) in a.final_state().iter().zip(b.final_state()) {
        assert!((x - y).abs() <= 10.0 * rel * x.abs().max(1.0));
    }
}

#[test]
fn singular_continuous_in_y0() {
    let delta = 1e-6;
    let a = solve_singular_ivp(&Coupled { y0: [0.7, 0.0] }, 1.0, 1e-11).unwrap();
    let b = solve_singular_ivp(
        &Coupled {
            y0: [0.7 + delta, 0.0],
        },
        1.0,
        1e-11,
    )
    .unwrap();
    let diff = a
        .final_state()
        .iter()
        .zip(b.final_state())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff > 0.0 && diff / delta < 1e3);
}

#[test]
fn singular_rejects_nonzero_residual() {
    let sys = Coupled { y0: [0.7, 0.1] };
    assert!(matches!(
        solve_singular_ivp(&sys, 1.0, 1e-8),
        Err(Error::InvalidSystem(_))
    ));
}

/// y' = 2y/t: the Jacobian has the resonant eigenvalue 2.
struct Resonant;
impl SingularSystem for Resonant {
    fn dim(&self) -> usize {
        1
    }
    fn y0(&self) -> &[f64] {
        &[0.0]
    }
    fn m_minus1(&self, y: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * y[0];
    }
    fn m_smooth(&self, _t: f64, _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}

#[test]
fn singular_rejects_resonance() {
    assert!(matches!(
        solve_singular_ivp(&Resonant, 1.0, 1e-8),
        Err(Error::InvalidSystem(_))
    ));
}

#[test]
fn fixed_step_order_on_decay() {
    let exact = (-1.0f64).exp();
    let e1 = (integrate_fixed(decay, &[1.0], 0.0, 1.0, 10).unwrap()[0] - exact).abs();
    let e2 = (integrate_fixed(decay, &[1.0], 0.0, 1.0, 20).unwrap()[0] - exact).abs();
    assert!(
        (e1 / e2).log2() > 4.5,
        "observed order {}",
        (e1 / e2).log2()
    );
}
