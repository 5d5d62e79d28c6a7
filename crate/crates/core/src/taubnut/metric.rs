use crate::error::{Error, Result};

/// Taub-NUT with asymptotic circle radius `m`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TaubNutParams {
    pub m: f64,
}

/// One point of the Taub-NUT metric, in both the radial coordinate `t` and
/// the coordinate `η ∈ (m⁻², ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TnPoint {
    pub t: f64,
    pub eta: f64,
    pub f1: f64,
    pub f3: f64,
}

impl TaubNutParams {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("m must be positive, got {m}")));
        }
        Ok(Self { m })
    }

    /// `m⁻²`, the lower end of the η range.
    pub fn eta_min(&self) -> f64 {
        1.0 / (self.m * self.m)
    }

    /// `dt/dη = −√η (η − m⁻²)⁻²`.
    pub fn dt_deta(&self, eta: f64) -> f64 {
        let x = eta - self.eta_min();
        -eta.sqrt() / (x * x)
    }

    /// Radial coordinate as a function of `w = f₃ = η^(−1/2) ∈ [0, m)`.
    ///
    /// `t = ∫₀^w 2(1 − s²/m²)⁻² ds = w/(1 − w²/m²) + m·atanh(w/m)`.
    pub fn t_of_w(&self, w: f64) -> f64 {
        let r = w / self.m;
        w / (1.0 - r * r) + self.m * r.atanh()
    }

    /// Same as [`t_of_w`](Self::t_of_w) with `w = m(1 − δ)`, accurate as `w → m`.
    fn t_of_delta(&self, d: f64) -> f64 {
        let q = d * (2.0 - d);
        self.m * (1.0 - d) / q + 0.5 * self.m * ((2.0 - d) / d).ln()
    }

    fn point_from_delta(&self, t: f64, d: f64) -> TnPoint {
        let w = self.m * (1.0 - d);
        let q = d * (2.0 - d);
        TnPoint {
            t,
            eta: 1.0 / (w * w),
            f1: w / q,
            f3: w,
        }
    }

    fn point_from_w(&self, t: f64, w: f64) -> TnPoint {
        let r = w / self.m;
        TnPoint {
            t,
            eta: 1.0 / (w * w),
            f1: w / (1.0 - r * r),
            f3: w,
        }
    }

    /// Metric coefficients at a given `η > m⁻²`.
    pub fn at_eta(&self, eta: f64) -> Result<TnPoint> {
        let c = self.eta_min();
        if !(eta > c) || !eta.is_finite() {
            return Err(Error::Domain(format!(
                "eta = {eta} must exceed 1/m^2 = {c}"
            )));
        }
        let w = eta.powf(-0.5);
        // 1 − w²/m² = (η − m⁻²)/η, computed without cancellation.
        let q = (eta - c) / eta;
        let r = w / self.m;
        let t = if r <= 0.5 {
            self.t_of_w(w)
        } else {
            let delta = q / (1.0 + r);
            self.t_of_delta(delta)
        };
        Ok(TnPoint {
            t,
            eta,
            f1: w / q,
            f3: w,
        })
    }

    /// Metric coefficients at radial coordinate `t ≥ 0`.
    pub fn at_t(&self, t: f64) -> Result<TnPoint> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("t = {t} must be non-negative")));
        }
        if t == 0.0 {
            return Ok(TnPoint {
                t,
                eta: f64::INFINITY,
                f1: 0.0,
                f3: 0.0,
            });
        }
        let m = self.m;
        let t_half = self.t_of_w(0.5 * m);
        if t <= t_half {
            let w = solve_monotone(
                |w| self.t_of_w(w) - t,
                |w| {
                    let r = w / m;
                    2.0 / ((1.0 - r * r) * (1.0 - r * r))
                },
                0.0,
                0.5 * m,
                (0.5 * t).min(0.5 * m),
            );
            Ok(self.point_from_w(t, w))
        } else {
            // t is decreasing in δ on (0, 1/2]; δ ≈ m/(2t) for large t.
            let d = solve_monotone(
                |d| self.t_of_delta(d) - t,
                |d| {
                    let q = d * (2.0 - d);
                    -2.0 * m / (q * q)
                },
                0.0,
                0.5,
                (m / (2.0 * t)).min(0.5),
            );
            Ok(self.point_from_delta(t, d))
        }
    }

    /// Radial coordinate by direct quadrature of `dt = −√η (η − m⁻²)⁻² dη`
    /// from `η = ∞`. Slower than [`at_eta`](Self::at_eta) and used to check it.
    ///
    /// With `η' = η/s²` the integral becomes `∫₀¹ 2η^{3/2}(η − m⁻²s²)⁻² ds`,
    /// which is smooth on `[0, 1]`.
    pub fn t_by_quadrature(&self, eta: f64, tol: f64) -> Result<f64> {
        let c = self.eta_min();
        if !(eta > c) {
            return Err(Error::Domain(format!(
                "eta = {eta} must exceed 1/m^2 = {c}"
            )));
        }
        let k = 2.0 * eta.powf(1.5);
        let f = |s: f64| {
            let x = eta - c * s * s;
            k / (x * x)
        };
        Ok(adaptive_simpson(&f, 0.0, 1.0, tol, 60))
    }
}

/// Safeguarded Newton iteration for a monotone `g` with a root in `[lo, hi]`.
fn solve_monotone<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, guess: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let increasing = dg(0.5 * (lo + hi)) > 0.0;
    let mut x = guess.clamp(lo, hi);
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - gx / dg(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= 0.0
        {
            return next;
        }
        x = next;
    }
    x
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `(f₁, f₃, t)` at `η`.
pub fn tn_metric(params: TaubNutParams, eta: f64) -> Result<(f64, f64, f64)> {
    let p = params.at_eta(eta)?;
    Ok((p.f1, p.f3, p.t))
}

/// Right-hand side of the Taub-NUT metric ODE in `(f₁, f₃)`.
pub fn tn_rhs(f1: f64, f3: f64) -> (f64, f64) {
    let r = f3 / f1;
    (0.5 * (2.0 - r), 0.5 * r * r)
}
