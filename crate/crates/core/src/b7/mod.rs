//! The B7 family of SU(2)²×U(1)-invariant G2-metrics on S³×ℝ⁴.
//!
//! A member is fixed by the scale `r₀` and the quartic coefficient `ā`
//! (with `b̄ = 1/(64r₀) − 2ā`). Along the flow we track
//! `(u, w, ȧ, z) = (a − p, a − b, ȧ, ȧ − ḃ)` rather than `(a, b, ȧ, ḃ)`: all
//! the information separating the family members near the singular orbit
//! sits in the differences, which would otherwise drown in rounding.
//!
//! The metric is `dt² + Σ A_i²(e_i⁺)² + B_i²(e_i⁻)²` with `A₁ = A₂`, `B₁ = B₂`.

mod flow;

pub use flow::{
    ab_seed, estimate_ell, flow_metric, flow_metric_ab, flow_metric_with, member_with_ell,
    EllEstimate, MetricOptions, MetricTrajectory,
};

use crate::error::{Error, Result};

/// Members of the family are ALC when `64ār₀ > 1/3` and AC at equality.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct B7Params {
    pub r0: f64,
    pub abar: f64,
    pub bbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completeness {
    Alc,
    Ac,
    /// `ā < b̄`: the local solution does not extend to a complete metric.
    Incomplete,
}

impl B7Params {
    /// Family member with the given scale and `ā`; `b̄` follows from the
    /// constraint.
    pub fn new(r0: f64, abar: f64) -> Result<Self> {
        Self::with_bbar(r0, abar, 1.0 / (64.0 * r0) - 2.0 * abar)
    }

    pub fn with_bbar(r0: f64, abar: f64, bbar: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "r0 must be positive, got {r0}"
            )));
        }
        if !abar.is_finite() || !bbar.is_finite() {
            return Err(Error::InvalidInput("abar and bbar must be finite".into()));
        }
        let c = 64.0 * r0 * (2.0 * abar + bbar);
        if (c - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "64 r0 (2 abar + bbar) = {c}, expected 1"
            )));
        }
        Ok(Self { r0, abar, bbar })
    }

    /// The Bryant–Salamon cone-asymptotic member at scale `r₀`.
    pub fn ac(r0: f64) -> Result<Self> {
        let a = 1.0 / (192.0 * r0);
        Self::with_bbar(r0, a, a)
    }

    /// Member with Taub-NUT adiabatic parameter `m` at scale `r₀`, i.e. with
    /// `24r₀³(2ā − b̄) = m⁻²`.
    pub fn with_taub_nut_m(r0: f64, m: f64) -> Result<Self> {
        let k = 1.0 / (24.0 * m * m * r0.powi(3));
        // 2ā − b̄ = 4ā − 1/(64r₀).
        Self::new(r0, 0.25 * (k + 1.0 / (64.0 * r0)))
    }

    pub fn p(&self) -> f64 {
        self.r0.powi(3)
    }

    pub fn q(&self) -> f64 {
        -self.p()
    }

    /// `64ār₀`; the family is complete for values ≥ 1/3.
    pub fn alc_parameter(&self) -> f64 {
        64.0 * self.abar * self.r0
    }

    pub fn completeness(&self) -> Completeness {
        let x = self.alc_parameter() - 1.0 / 3.0;
        if x.abs() <= 1e-12 {
            Completeness::Ac
        } else if x > 0.0 {
            Completeness::Alc
        } else {
            Completeness::Incomplete
        }
    }

    /// The Taub-NUT parameter `m` of the adiabatic limit, from
    /// `m² = (24r₀³(2ā − b̄))⁻¹`. `None` unless `2ā > b̄`.
    pub fn taub_nut_m(&self) -> Option<f64> {
        let k = 24.0 * self.p() * (2.0 * self.abar - self.bbar);
        (k > 0.0).then(|| k.powf(-0.5))
    }

    /// Same member after the scaling `t ↦ λt`: `r₀ ↦ r₀/λ`, `ā ↦ λā`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::with_bbar(self.r0 / lambda, self.abar * lambda, self.bbar * lambda)
    }
}

/// The flow state `(a − p, a − b, ȧ, ȧ − ḃ)`.
pub type FlowState = [f64; 4];

/// Series state at small `t`.
pub fn series_state(params: &B7Params, t: f64) -> FlowState {
    let (r0, ab, bb) = (params.r0, params.abar, params.bbar);
    let t2 = t * t;
    let u = 0.25 * r0 * t2 + ab * t2 * t2;
    let w = (ab - bb) * t2 * t2;
    let adot = 0.5 * r0 * t + 4.0 * ab * t2 * t;
    let z = 4.0 * (ab - bb) * t2 * t;
    [u, w, adot, z]
}

struct Pieces {
    a: f64,
    b: f64,
    v: f64,
    bdot: f64,
    /// `√((2a − b − p)(2a + b + p))`.
    s: f64,
    x2dot: f64,
    /// `2a − b − p = u + w`.
    minus: f64,
    /// `2a + b + p`.
    plus: f64,
}

fn pieces(p: f64, y: &FlowState) -> Pieces {
    let [u, w, adot, z] = *y;
    let v = u - w;
    let minus = u + w;
    let plus = 2.0 * u + v + 4.0 * p;
    let s = (minus * plus).sqrt();
    let x2dot = 2.0 * (u * u + 2.0 * u * w - w * w + p * (u + 3.0 * w)) / s;
    Pieces {
        a: u + p,
        b: v + p,
        v,
        bdot: adot - z,
        s,
        x2dot,
        minus,
        plus,
    }
}

/// Right-hand side of the Hitchin flow in the state `(a − p, a − b, ȧ, ȧ − ḃ)`.
pub fn flow_rhs(p: f64, y: &FlowState, out: &mut [f64]) {
    let k = pieces(p, y);
    let [_, w, adot, z] = *y;
    out[0] = adot;
    out[1] = z;
    out[2] = k.x2dot / (2.0 * adot);
    out[3] = (2.0 * w * (3.0 * k.b + 2.0 * w + p) / k.s - k.x2dot * z / (2.0 * adot)) / adot;
}

/// Metric coefficients `(A₁, A₃, B₁, B₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub a1: f64,
    pub a3: f64,
    pub b1: f64,
    pub b3: f64,
}

impl Coeffs {
    pub fn from_array(y: &[f64]) -> Self {
        Self {
            a1: y[0],
            a3: y[1],
            b1: y[2],
            b3: y[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a1, self.a3, self.b1, self.b3]
    }

    pub fn is_positive(&self) -> bool {
        self.a1 > 0.0 && self.a3 > 0.0 && self.b1 > 0.0 && self.b3 > 0.0
    }

    /// `H = ½(2/A₃² + 1/B₁² − (A₁² + B₁² + B₃²)/(A₁A₃B₁B₃))`.
    pub fn h(&self) -> f64 {
        let Coeffs { a1, a3, b1, b3 } = *self;
        0.5 * (2.0 / (a3 * a3) + 1.0 / (b1 * b1)
            - (a1 * a1 + b1 * b1 + b3 * b3) / (a1 * a3 * b1 * b3))
    }

    /// Coefficients `(P, Q)` of the instanton equations
    /// `ḟ = −Pf − fg`, `ġ = −Qg − f²`.
    pub fn instanton_pq(&self) -> (f64, f64) {
        let Coeffs { a1, a3, b1, b3 } = *self;
        let pp = 0.5
            * ((a1 * a1 + b3 * b3 + b1 * b1) / (a1 * b1 * b3)
                - (a3 * a3 + 2.0 * a1 * a1) / (a1 * a1 * a3));
        let qq = 0.5 * a3 * (a1 * a1 - b1 * b1) / (a1 * a1 * b1 * b1);
        (pp, qq)
    }
}

/// `(A₁, A₃, B₁, B₃)` from the flow state.
pub fn lo_to_fhn(p: f64, y: &FlowState) -> Result<Coeffs> {
    let k = pieces(p, y);
    let adot = y[2];
    let ab = adot * k.bdot;
    let r1 = k.v * k.minus / ab;
    let r2 = k.v * k.plus / ab;
    if !(r1 > 0.0 && r2 > 0.0 && k.v > 0.0 && adot > 0.0) {
        return Err(Error::DegenerateSeed(format!(
            "coefficient square roots have non-positive arguments ({r1:.3e}, {r2:.3e})"
        )));
    }
    Ok(Coeffs {
        a1: r1.sqrt(),
        a3: k.v / adot,
        b1: r2.sqrt(),
        b3: 2.0 * ab / k.v,
    })
}

/// `(A₁ − A₃, B₁ − B₃)` computed without cancelling the leading terms of
/// `A₁ − A₃`.
pub fn coefficient_gaps(p: f64, y: &FlowState, c: &Coeffs) -> (f64, f64) {
    let k = pieces(p, y);
    let [_, w, adot, z] = *y;
    let d = k.v * (2.0 * w * adot + k.v * z) / (adot * adot * k.bdot) / (c.a1 + c.a3);
    (d, c.b1 - c.b3)
}

/// Right-hand side of the metric system for `(A₁, A₁ − A₃, B₁, B₁ − B₃)`
/// after the rescaling `A ↦ λ⁻²A(λ²t)`, `B ↦ λ⁻¹B(λ²t)`; `lam2 = λ²`.
/// `lam2 = 1` is the unscaled system.
pub fn ab_split_rhs(lam2: f64, y: &[f64], out: &mut [f64]) {
    let (a1, d, b1, e) = (y[0], y[1], y[2], y[3]);
    let a3 = a1 - d;
    let b3 = b1 - e;
    let q = d / a1;
    let bb = b1 * b3;
    out[0] = 0.5 * (1.0 + q + (e * e - lam2 * a1 * a1) / bb);
    // Ȧ₃ = ½(A₃²/A₁² − λ²A₃²/B₁²).
    let r = a3 / a1;
    let a3dot = 0.5 * (r * r - lam2 * a3 * a3 / (b1 * b1));
    out[1] = out[0] - a3dot;
    out[2] = 0.5 * ((lam2 * a1 * a1 - e * (b1 + b3)) / (a1 * b3) + lam2 * a3 / b1);
    out[3] = lam2 * (a1 * e / (2.0 * bb) - d / (2.0 * b1))
        - e * (b1 + b3) * (1.0 / (2.0 * a1 * b3) + 1.0 / (a1 * b1));
}

/// Right-hand side of the metric system in `(A₁, A₃, B₁, B₃)`, rescaled as in
/// [`ab_split_rhs`].
pub fn ab_rhs(lam2: f64, c: &Coeffs) -> Coeffs {
    let Coeffs { a1, a3, b1, b3 } = *c;
    Coeffs {
        a1: 0.5 * ((b1 * b1 + b3 * b3 - lam2 * a1 * a1) / (b1 * b3) - a3 / a1),
        a3: 0.5 * (a3 * a3 / (a1 * a1) - lam2 * a3 * a3 / (b1 * b1)),
        b1: 0.5 * ((lam2 * a1 * a1 + b3 * b3 - b1 * b1) / (a1 * b3) + lam2 * a3 / b1),
        b3: (lam2 * a1 * a1 + b1 * b1 - b3 * b3) / (a1 * b1),
    }
}

/// One sample of a B7 metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub adot: f64,
    pub bdot: f64,
    pub addot: f64,
    pub bddot: f64,
    /// `a − p`, kept separately for accuracy near the singular orbit.
    pub a_minus_p: f64,
    /// `a − b`.
    pub a_minus_b: f64,
    pub coeffs: Coeffs,
    pub h: f64,
}

impl MetricSample {
    pub const CSV_HEADER: [&'static str; 10] =
        ["t", "a", "b", "adot", "bdot", "A1", "A3", "B1", "B3", "H"];

    pub fn from_state(params: &B7Params, t: f64, y: &FlowState) -> Result<Self> {
        let p = params.p();
        let coeffs = lo_to_fhn(p, y)?;
        let k = pieces(p, y);
        let mut d = [0.0; 4];
        flow_rhs(p, y, &mut d);
        Ok(Self {
            t,
            a: k.a,
            b: k.b,
            adot: y[2],
            bdot: k.bdot,
            addot: d[2],
            bddot: d[2] - d[3],
            a_minus_p: y[0],
            a_minus_b: y[1],
            coeffs,
            h: coeffs.h(),
        })
    }

    /// Reconstructs `(a, b, ȧ, ḃ)` from metric coefficients, using the
    /// arc-length constraint `F(a, b) = 4ȧ⁴ḃ²`.
    pub fn from_coeffs(params: &B7Params, t: f64, c: &Coeffs) -> Result<Self> {
        let Coeffs { a1, a3, b1, b3 } = *c;
        let v = 0.5 * a1 * a3 * b1;
        let adot = 0.5 * a1 * b1;
        let bdot = 0.5 * a3 * b3;
        let w = 0.25 * a1 * (a1 * b3 - a3 * b1);
        let u = v + w;
        Self::from_state(params, t, &[u, w, adot, adot - bdot])
    }

    pub fn flow_state(&self) -> FlowState {
        [
            self.a_minus_p,
            self.a_minus_b,
            self.adot,
            self.adot - self.bdot,
        ]
    }

    pub fn csv_values(&self) -> [f64; 10] {
        let c = &self.coeffs;
        [
            self.t, self.a, self.b, self.adot, self.bdot, c.a1, c.a3, c.b1, c.b3, self.h,
        ]
    }
}

/// Power-series seed at `t = eps`.
pub fn seed_metric(params: &B7Params, eps: f64) -> Result<MetricSample> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    MetricSample::from_state(params, eps, &series_state(params, eps))
}

/// The `(a, b)` form of `H`.
pub fn h_from_ab(p: f64, s: &MetricSample) -> f64 {
    let (a, b, ad, bd) = (s.a, s.b, s.adot, s.bdot);
    let v = s.a_minus_p - s.a_minus_b;
    let minus = s.a_minus_p + s.a_minus_b;
    let plus = 2.0 * a + b + p;
    let quart = minus * plus;
    let num = (2.0 * ad * ad - ad * bd) * quart + ad * bd * v * minus - 4.0 * ad * ad * a * v;
    num / (2.0 * v * v * quart)
}

/// `Ĥ = (2 − b′)(4a² − (b+p)² − 2a(b−p)) − b′(b−p)(b+p)` with `b′ = ḃ/ȧ`;
/// `H = ȧ²Ĥ/(2(b−p)²(4a² − (b+p)²))`.
pub fn h_hat(p: f64, s: &MetricSample) -> f64 {
    let bp = s.bdot / s.adot;
    let v = s.a_minus_p - s.a_minus_b;
    let quart = (s.a_minus_p + s.a_minus_b) * (2.0 * s.a + s.b + p);
    (2.0 - bp) * (quart - 2.0 * s.a * v) - bp * v * (s.b + p)
}

/// Evaluates both forms of `H` and checks they agree.
///
/// Near the singular orbit both forms cancel terms of size `~1/t²`, so the
/// comparison is made relative to that scale.
pub fn eval_h(params: &B7Params, s: &MetricSample) -> Result<f64> {
    let h_ab = s.coeffs.h();
    let h_metric = h_from_ab(params.p(), s);
    let c = &s.coeffs;
    let scale = (2.0 / (c.a3 * c.a3)).max(h_ab.abs());
    if (h_ab - h_metric).abs() > 1e-9 * scale {
        return Err(Error::FormMismatch {
            t: s.t,
            ab_form: h_ab,
            metric_form: h_metric,
        });
    }
    Ok(h_ab)
}

/// Margins of the metric inequalities at one sample. Each is positive when
/// the corresponding inequality holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityMargins {
    /// `(b − p)/p`.
    pub b_above_p: f64,
    pub bdot: f64,
    /// `a/b − 1`.
    pub a_over_b: f64,
    /// `ȧ/ḃ − a/b`.
    pub rate_ratio: f64,
    /// `ä/b̈ − ȧ/ḃ`.
    pub accel_ratio: f64,
}

impl InequalityMargins {
    pub fn min(&self) -> f64 {
        self.b_above_p
            .min(self.bdot)
            .min(self.a_over_b)
            .min(self.rate_ratio)
            .min(self.accel_ratio)
    }

    pub fn all_positive(&self) -> bool {
        self.min() > 0.0
    }
}

pub fn inequality_margins(params: &B7Params, s: &MetricSample) -> InequalityMargins {
    let p = params.p();
    let y = s.flow_state();
    let mut d = [0.0; 4];
    flow_rhs(p, &y, &mut d);
    let [_, w, adot, z] = y;
    let v = s.a_minus_p - w;
    // ȧb − ḃa = za − ȧw; äḃ − b̈ȧ = żȧ − äz.
    let cross1 = z * s.a - adot * w;
    let cross2 = d[3] * adot - d[2] * z;
    InequalityMargins {
        b_above_p: v / p,
        bdot: s.bdot,
        a_over_b: w / s.b,
        rate_ratio: cross1 / (s.bdot * s.b),
        accel_ratio: cross2 / (s.bddot * s.bdot),
    }
}
