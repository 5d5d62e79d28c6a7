use super::{inf_norm, Termination, Trajectory, BLOWUP_THRESHOLD};
use crate::error::{Error, Result};

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension coefficients (Hairer, Nørsett & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Which points end up in the returned [`Trajectory`].
#[derive(Debug, Clone, Default)]
pub enum Output {
    /// Every accepted step.
    #[default]
    Steps,
    /// Only the listed (increasing) times, filled by dense output.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub output: Output,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            blowup_threshold: BLOWUP_THRESHOLD,
            max_steps: 2_000_000,
            h_init: None,
            h_max: None,
            output: Output::Steps,
        }
    }
}

impl SolverOptions {
    pub fn tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.output = Output::Grid(grid);
        self
    }
}

/// Adaptive integration of `y' = rhs(t, y)` on `[t_start, t_end]`.
///
/// Blow-up and step underflow are reported through
/// [`Trajectory::termination`]; `Err` is reserved for invalid input.
pub fn integrate_adaptive<F>(
    rhs: F,
    y_start: &[f64],
    t_start: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_with(
        rhs,
        y_start,
        t_start,
        t_end,
        &SolverOptions::tolerances(rel_tol, abs_tol),
        |_, _| false,
    )
}

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    /// One Dormand–Prince step from `(t, y)` with `k[0] = f(t, y)` already set.
    /// Leaves the fifth-order solution in `y_new`, the FSAL stage in `k[6]`
    /// and the embedded error estimate in `err`.
    fn step<F>(&mut self, rhs: &mut F, t: f64, y: &[f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, tmp, k6);
        for i in 0..n {
            self.y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, &self.y_new, k7);
        for i in 0..n {
            self.err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
    }

    fn dense(&self, y: &[f64], h: f64, theta: f64, out: &mut [f64]) {
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let th1 = 1.0 - theta;
        for i in 0..y.len() {
            let r2 = self.y_new[i] - y[i];
            let r3 = h * k1[i] - r2;
            let r4 = r2 - h * k7[i] - r3;
            let r5 =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            out[i] = y[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
        }
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &SolverOptions,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let sc: Vec<f64> = y0
        .iter()
        .map(|y| opts.abs_tol + opts.rel_tol * y.abs())
        .collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if !d2.is_finite() {
        h0 * 1e-3
    } else if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Full-control integration entry point. `stop` is evaluated after every
/// accepted step and terminates the run with [`Termination::Stopped`] when it
/// returns true.
pub fn integrate_with<F, S>(
    mut rhs: F,
    y_start: &[f64],
    t_start: f64,
    t_end: f64,
    opts: &SolverOptions,
    mut stop: S,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    if !(t_end > t_start) {
        return Err(Error::InvalidInput(format!(
            "t_end ({t_end}) must exceed t_start ({t_start})"
        )));
    }
    if !(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    if !all_finite(y_start) {
        return Err(Error::InvalidInput("non-finite initial state".into()));
    }
    let n = y_start.len();
    let span = t_end - t_start;
    let h_min = 1e-14 * span;
    let h_max = opts.h_max.unwrap_or(span);

    let mut st = Stages::new(n);
    let mut y = y_start.to_vec();
    let mut t = t_start;
    rhs(t, &y, &mut st.k[0]);
    if !all_finite(&st.k[0]) {
        return Err(Error::InvalidInput(format!(
            "right-hand side is not finite at t = {t_start}"
        )));
    }

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        derivs: Vec::new(),
        termination: Termination::ReachedEnd,
    };
    let (grid, mut gi) = match &opts.output {
        Output::Steps => (None, 0),
        Output::Grid(g) => {
            let mut gi = 0;
            while gi < g.len() && g[gi] < t_start {
                gi += 1;
            }
            (Some(g.as_slice()), gi)
        }
    };
    let push = |traj: &mut Trajectory, t: f64, y: &[f64], d: &[f64]| {
        if traj.times.last().is_none_or(|&last| t > last) {
            traj.times.push(t);
            traj.states.push(y.to_vec());
            traj.derivs.push(d.to_vec());
        }
    };
    match grid {
        None => push(&mut traj, t, &y, &st.k[0]),
        Some(g) => {
            if gi < g.len() && g[gi] == t_start {
                push(&mut traj, t, &y, &st.k[0]);
                gi += 1;
            }
        }
    }

    let mut h = opts
        .h_init
        .unwrap_or_else(|| {
            let f0 = st.k[0].clone();
            initial_step(&mut rhs, t, &y, &f0, span, opts)
        })
        .min(h_max);
    let mut err_prev: f64 = 1e-4;
    let mut dense_y = vec![0.0; n];
    let mut dense_d = vec![0.0; n];
    let mut steps = 0usize;
    const SAFETY: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO: f64 = 0.2 - BETA * 0.75;

    loop {
        if steps >= opts.max_steps {
            return Err(Error::TooManySteps(opts.max_steps));
        }
        let last = t + h >= t_end || (t_end - (t + h)) < h_min;
        if last {
            h = t_end - t;
        }
        if h < h_min {
            traj.termination = Termination::StepUnderflow(t);
            push(&mut traj, t, &y, &st.k[0]);
            return Ok(traj);
        }
        st.step(&mut rhs, t, &y, h);
        steps += 1;
        let finite = all_finite(&st.y_new) && st.k.iter().all(|k| all_finite(k));
        let err = if finite {
            error_norm(&st.err, &y, &st.y_new, opts.rel_tol, opts.abs_tol)
        } else {
            f64::INFINITY
        };
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err > 1.0 {
            let fac = (SAFETY * err.powf(-EXPO)).max(0.2);
            h *= fac;
            continue;
        }

        let t_new = if last { t_end } else { t + h };
        if let Some(g) = grid {
            while gi < g.len() && g[gi] <= t_new {
                let theta = (g[gi] - t) / h;
                st.dense(&y, h, theta, &mut dense_y);
                rhs(g[gi], &dense_y, &mut dense_d);
                push(&mut traj, g[gi], &dense_y, &dense_d);
                gi += 1;
            }
        }
        y.copy_from_slice(&st.y_new);
        t = t_new;
        let (k0, rest) = st.k.split_at_mut(1);
        k0[0].copy_from_slice(&rest[5]);
        if grid.is_none() {
            push(&mut traj, t, &y, &st.k[0]);
        }

        if inf_norm(&y) > opts.blowup_threshold {
            push(&mut traj, t, &y, &st.k[0]);
            traj.termination = Termination::BlowUp(t);
            return Ok(traj);
        }
        if stop(t, &y) {
            push(&mut traj, t, &y, &st.k[0]);
            traj.termination = Termination::Stopped(t);
            return Ok(traj);
        }
        if last {
            push(&mut traj, t, &y, &st.k[0]);
            return Ok(traj);
        }

        let err_c = err.max(1e-10);
        let fac = (SAFETY * err_c.powf(-EXPO) * err_prev.powf(BETA)).clamp(0.2, 10.0);
        err_prev = err_c;
        h = (h * fac).min(h_max);
    }
}

/// Fixed-step integration with the fifth-order member of the same pair.
/// Used for order verification.
pub fn integrate_fixed<F>(
    mut rhs: F,
    y_start: &[f64],
    t_start: f64,
    t_end: f64,
    n_steps: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if n_steps == 0 || !(t_end > t_start) {
        return Err(Error::InvalidInput(
            "need t_end > t_start and n_steps > 0".into(),
        ));
    }
    let mut st = Stages::new(y_start.len());
    let mut y = y_start.to_vec();
    let h = (t_end - t_start) / n_steps as f64;
    for i in 0..n_steps {
        let t = t_start + i as f64 * h;
        rhs(t, &y, &mut st.k[0]);
        st.step(&mut rhs, t, &y, h);
        y.copy_from_slice(&st.y_new);
    }
    Ok(y)
}
