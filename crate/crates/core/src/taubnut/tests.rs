use rand::Rng;

use super::*;
use crate::error::Error;
use crate::fit::{geometric_grid, least_squares, linear_grid};
use crate::ode::{integrate_with, SolverOptions};
use crate::rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
#[allow(clippy::approx_constant)]
fn metric_at_eta_two() {
    let tn = TaubNutParams::new(1.0).unwrap();
    let (f1, f3, _) = tn_metric(tn, 2.0).unwrap();
    assert!(close(f1, 1.4142136, 5e-8));
    assert!(close(f3, 0.7071068, 5e-8));
}

#[test]
fn domain_errors() {
    let tn = TaubNutParams::new(2.0).unwrap();
    assert!(matches!(tn.at_eta(0.25), Err(Error::Domain(_))));
    assert!(matches!(tn.at_eta(0.1), Err(Error::Domain(_))));
    assert!(TaubNutParams::new(-1.0).is_err());
    assert!(asd_eval(AsdParams::Abelian { c: 1.0 }, 2.0, 0.2).is_err());
}

#[test]
fn circle_radius_at_infinity() {
    let tn = TaubNutParams::new(1.7).unwrap();
    let p = tn.at_t(1e7).unwrap();
    assert!(close(p.f3, 1.7, 1e-6));
    assert!(close(p.f1 / p.t, 1.0, 1e-5));
}

#[test]
fn closed_form_t_matches_quadrature() {
    for m in [0.5, 1.0, 2.0] {
        let tn = TaubNutParams::new(m).unwrap();
        let c = tn.eta_min();
        for k in [1.001, 1.05, 1.5, 3.0, 20.0, 1e4] {
            let eta = c * k;
            let p = tn.at_eta(eta).unwrap();
            let q = tn.t_by_quadrature(eta, 1e-13 * p.t).unwrap();
            assert!(
                (p.t - q).abs() <= 1e-10 * p.t,
                "m={m} eta={eta}: {} vs {q}",
                p.t
            );
        }
    }
}

#[test]
fn inversion_round_trips() {
    let tn = TaubNutParams::new(0.8).unwrap();
    for t in geometric_grid(1e-6, 1e6, 200) {
        let p = tn.at_t(t).unwrap();
        let back = tn.at_eta(p.eta).unwrap();
        // η − m⁻² loses digits as t grows, so the round trip degrades like t².
        assert!(
            (back.t - t).abs() <= 1e-15 * t * (1.0 + t),
            "t={t} back={}",
            back.t
        );
        assert!((back.f1 - p.f1).abs() <= 1e-15 * (1.0 + t) * p.f1);
    }
}

#[test]
fn metric_satisfies_its_ode() {
    for m in [0.5, 1.0, 2.0] {
        let tn = TaubNutParams::new(m).unwrap();
        let c = tn.eta_min();
        for eta in geometric_grid(1.01 * c, 1e4 * c, 100) {
            let p = tn.at_eta(eta).unwrap();
            // df₁/dη and df₃/dη from the closed forms, then the chain rule.
            let x = eta - c;
            let df1 = (0.5 / eta.sqrt()) / x - eta.sqrt() / (x * x);
            let df3 = -0.5 * eta.powf(-1.5);
            let deta_dt = 1.0 / tn.dt_deta(eta);
            let (r1, r3) = tn_rhs(p.f1, p.f3);
            assert!((df1 * deta_dt - r1).abs() < 1e-10, "m={m} eta={eta}");
            assert!((df3 * deta_dt - r3).abs() < 1e-10, "m={m} eta={eta}");
        }
    }
}

#[test]
fn metric_ode_integration_matches_closed_form() {
    let tn = TaubNutParams::new(1.0).unwrap();
    let t0 = 0.1;
    let p0 = tn.at_t(t0).unwrap();
    let opts = SolverOptions::tolerances(1e-12, 1e-14);
    let tr = integrate_with(
        |_, y, o| {
            let (a, b) = tn_rhs(y[0], y[1]);
            o[0] = a;
            o[1] = b;
        },
        &[p0.f1, p0.f3],
        t0,
        5.0,
        &opts,
        |_, _| false,
    )
    .unwrap();
    let p = tn.at_t(5.0).unwrap();
    assert!(
        (tr.final_state()[0] - p.f1).abs() < 1e-9,
        "{} {}",
        tr.final_state()[0],
        p.f1
    );
    assert!((tr.final_state()[1] - p.f3).abs() < 1e-9);
}

#[test]
fn small_t_series_coefficients() {
    for m in [0.7, 1.0, 1.5] {
        let tn = TaubNutParams::new(m).unwrap();
        let ts = linear_grid(0.01 * m, 0.2 * m, 40);
        let f1: Vec<f64> = ts.iter().map(|&t| tn.at_t(t).unwrap().f1).collect();
        let f3: Vec<f64> = ts.iter().map(|&t| tn.at_t(t).unwrap().f3).collect();
        let odd = |t: f64, j: usize| t.powi(2 * j as i32 + 1);
        let c1 = least_squares(&ts, &f1, 4, odd).unwrap().coeffs;
        let c3 = least_squares(&ts, &f3, 4, odd).unwrap().coeffs;
        let mm = m * m;
        assert!(close(c1[0], 0.5, 1e-4) && close(c3[0], 0.5, 1e-4));
        assert!(close(c1[1], 1.0 / (24.0 * mm), 1e-4), "{}", c1[1]);
        assert!(close(c3[1], -1.0 / (12.0 * mm), 1e-4), "{}", c3[1]);
    }
}

#[test]
fn scaling_symmetry() {
    let a = TaubNutParams::new(1.0).unwrap();
    let lam = 2.5;
    let b = TaubNutParams::new(lam).unwrap();
    for t in [0.1, 1.0, 7.0] {
        let pa = a.at_t(t / lam).unwrap();
        let pb = b.at_t(t).unwrap();
        assert!((lam * pa.f1 - pb.f1).abs() < 1e-12 * pb.f1);
        assert!((lam * pa.f3 - pb.f3).abs() < 1e-12 * pb.f3);
    }
}

#[test]
fn asd_reference_values() {
    let (a1, a3) = asd_eval(AsdParams::TwoParameter { c: 1.0, d: 1.0 }, 1.0, 2.0).unwrap();
    assert!(close(a1, 0.2757206, 5e-8), "{a1}");
    assert!(close(a3, 1.0186574, 5e-8), "{a3}");
    for eta in [1.3, 4.0, 100.0] {
        let (a1, a3) = asd_eval(AsdParams::EtesiHausel { b: 0.0 }, 1.0, eta).unwrap();
        assert!(close(a1, 1.0, 1e-15) && close(a3, 1.0, 1e-15));
    }
}

#[test]
fn large_d_tends_to_abelian() {
    let ab = asd_eval(AsdParams::Abelian { c: 0.7 }, 1.2, 3.0).unwrap();
    let tp = asd_eval(AsdParams::TwoParameter { c: 0.7, d: 40.0 }, 1.2, 3.0).unwrap();
    assert!(close(ab.0, tp.0, 1e-15) && close(ab.1, tp.1, 1e-15));
}

#[test]
fn residual_examples() {
    let c = 1.0;
    let grid = geometric_grid(1.01 * c, 100.0 * c, 300);
    let r = asd_residual(AsdParams::TwoParameter { c: 1.0, d: 1.0 }, 1.0, &grid).unwrap();
    assert!(r < 1e-10, "{r}");
    let r = asd_residual(AsdParams::Abelian { c: -0.4 }, 1.0, &grid).unwrap();
    assert!(r < 1e-12, "{r}");
    let r = asd_residual(AsdParams::EtesiHausel { b: 1.0 }, 1.0, &grid).unwrap();
    assert!(r < 1e-10, "{r}");
}

#[test]
fn random_two_parameter_residuals_and_conservation() {
    let mut g = rng::env_stream();
    for _ in 0..100 {
        let m = g.gen_range(0.5..=2.0);
        let c = g.gen_range(1e-3..=3.0);
        let d = g.gen_range(1e-3..=3.0);
        let p = AsdParams::TwoParameter { c, d };
        let cm = 1.0 / (m * m);
        let grid = geometric_grid(1.05 * cm, 50.0 * cm, 60);
        assert!(
            asd_residual(p, m, &grid).unwrap() < 1e-10,
            "m={m} C={c} D={d}"
        );
        for &eta in &grid {
            let q = conserved_quantity_exact(p, m, eta).unwrap();
            assert!((q + c * c).abs() < 1e-10, "Q={q} C²={}", c * c);
        }
    }
}

#[test]
fn conserved_values_per_family() {
    let grid = linear_grid(1.2, 30.0, 50);
    for p in [
        AsdParams::Abelian { c: 1.3 },
        AsdParams::EtesiHausel { b: 0.6 },
        AsdParams::TwoParameter { c: 0.4, d: 0.0 },
    ] {
        for &eta in &grid {
            let q = conserved_quantity_exact(p, 1.0, eta).unwrap();
            assert!((q - p.conserved_value()).abs() < 1e-10, "{p:?} {q}");
        }
    }
}

#[test]
fn finite_difference_conserved_quantity_on_closed_form() {
    let m = 1.0;
    let grid = geometric_grid(1.1, 40.0, 2000);
    let p = AsdParams::TwoParameter { c: 1.0, d: 0.5 };
    let a3: Vec<f64> = grid.iter().map(|&e| asd_eval(p, m, e).unwrap().1).collect();
    let q = conserved_quantity(&grid, &a3, m).unwrap();
    assert!(q.iter().all(|v| (v + 1.0).abs() < 1e-8));
}

#[test]
fn conserved_quantity_along_numerical_solution() {
    // Integrate the ASD system in η from generic data and check Q stays put.
    let m = 1.3;
    let cm = 1.0 / (m * m);
    let grid = geometric_grid(1.2 * cm, 30.0 * cm, 6000);
    let mut rev = grid.clone();
    rev.reverse();
    let opts = SolverOptions::tolerances(1e-13, 1e-15).with_grid(grid.clone());
    let tr = integrate_with(
        |eta, a, o| asd_rhs_eta(m, eta, a, o),
        &[0.3, 0.45],
        grid[0],
        *grid.last().unwrap(),
        &opts,
        |_, _| false,
    )
    .unwrap();
    assert!(tr.termination.is_complete());
    let a3 = tr.component(1);
    let q = conserved_quantity(&tr.times, &a3, m).unwrap();
    let c2 = -q[0];
    let drift = q.iter().fold(0.0f64, |w, v| w.max((v + c2).abs()));
    assert!(drift < 1e-8, "drift {drift}");
}

#[test]
fn etesi_hausel_is_a_limit() {
    let (cc, b) = (1e-4_f64, 0.8);
    let d = (b * cc).asinh();
    for eta in [1.1, 2.0, 10.0] {
        let l = asd_eval(AsdParams::TwoParameter { c: cc, d }, 1.0, eta).unwrap();
        let e = asd_eval(AsdParams::EtesiHausel { b }, 1.0, eta).unwrap();
        assert!(
            close(l.0, e.0, 1e-6) && close(l.1, e.1, 1e-6),
            "{l:?} {e:?}"
        );
    }
}

#[test]
fn smooth_extension_dichotomy() {
    let tn = TaubNutParams::new(1.0).unwrap();
    let ts = linear_grid(1e-3, 2e-2, 20);
    let pts: Vec<_> = ts.iter().map(|&t| tn.at_t(t).unwrap()).collect();
    let ratio = |p: AsdParams| -> Vec<f64> {
        pts.iter()
            .map(|q| asd_eval(p, 1.0, q.eta).unwrap().1 / (q.t * q.t))
            .collect()
    };
    // D > 0: a₃/t² tends to a finite μ₃.
    let r = ratio(AsdParams::TwoParameter { c: 1.0, d: 2.0 });
    let (_, mu3) = mu_from_cd(1.0, 2.0, 1.0);
    assert!(r.iter().all(|v| (v - mu3).abs() < 1e-3));
    // D = 0: a₃ itself has a nonzero limit.
    let a3: Vec<f64> = pts
        .iter()
        .map(|q| {
            asd_eval(AsdParams::TwoParameter { c: 1.0, d: 0.0 }, 1.0, q.eta)
                .unwrap()
                .1
        })
        .collect();
    assert!(a3.iter().all(|v| (v - 1.0).abs() < 1e-3));
}

#[test]
fn mu_reference_values() {
    let (mu1, mu3) = mu_from_cd(1.0, 2.0, 1.0);
    assert!(close(mu1, 0.0689301, 5e-8), "{mu1}");
    assert!(close(mu3, 0.5093286, 1e-7), "{mu3}");
    assert!(close((mu3 - 0.25).powi(2) - mu1 * mu1, 1.0 / 16.0, 1e-14));
    match cd_from_mu(mu1, mu3, 1.0).unwrap() {
        AsdParams::TwoParameter { c, d } => {
            assert!(close(c, 1.0, 1e-12) && close(d, 2.0, 1e-12));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn mu_small_t_behaviour_matches_closed_form() {
    let (m, c, d) = (1.4, 0.9, 0.6);
    let tn = TaubNutParams::new(m).unwrap();
    let (mu1, mu3) = mu_from_cd(c, d, m);
    let p = tn.at_t(1e-4).unwrap();
    let (a1, a3) = asd_eval(AsdParams::TwoParameter { c, d }, m, p.eta).unwrap();
    let t2 = p.t * p.t;
    assert!(close(a1 / t2, mu1, 1e-6) && close(a3 / t2, mu3, 1e-6));
}

#[test]
fn cd_from_mu_degenerate_cases() {
    assert!(matches!(
        cd_from_mu(0.0, 0.5, 1.0).unwrap(),
        AsdParams::Abelian { c } if close(c, 1.0, 1e-15)
    ));
    assert!(matches!(
        cd_from_mu(0.2, 0.45, 1.0).unwrap(),
        AsdParams::EtesiHausel { b } if close(b, 1.25, 1e-12)
    ));
    assert!(matches!(
        cd_from_mu(0.3, 0.4, 1.0),
        Err(Error::ConstraintViolation(_))
    ));
    assert!(cd_from_mu(-0.1, 0.9, 1.0).is_err());
}

#[test]
fn linearisation_spectrum() {
    let ev = linearisation_eigenvalues();
    let want = [0.0, -2.0, -3.0, -8.0];
    assert_eq!(ev.len(), 4);
    for (a, b) in ev.iter().zip(want) {
        assert!(close(*a, b, 1e-12), "{ev:?}");
    }
    assert!(ev.iter().all(|v| *v <= 1e-12));
}

#[test]
fn sampler_rows() {
    let tn = TaubNutParams::new(1.0).unwrap();
    let rows =
        sample_closed_form(tn, AsdParams::TwoParameter { c: 1.0, d: 1.0 }, &[1.5, 2.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(close(rows[1].a1, 0.2757206, 5e-8));
    assert!(close(rows[1].q, -1.0, 1e-12));
    assert_eq!(ClosedFormSample::HEADER.len(), rows[0].values().len());
}

mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mu_round_trip(c in 0.05..3.0f64, d in 0.05..3.0f64, m in 0.5..2.0f64) {
            let (mu1, mu3) = mu_from_cd(c, d, m);
            match cd_from_mu(mu1, mu3, m).unwrap() {
                AsdParams::TwoParameter { c: c2, d: d2 } => {
                    prop_assert!((c2 - c).abs() < 1e-9 * c.max(1.0));
                    prop_assert!((d2 - d).abs() < 1e-8 * d.max(1.0));
                }
                p => prop_assert!(false, "{:?}", p),
            }
        }

        #[test]
        fn metric_scales_with_m(m in 0.3..3.0f64, t in 0.01..20.0f64) {
            let a = TaubNutParams::new(1.0).unwrap().at_t(t / m).unwrap();
            let b = TaubNutParams::new(m).unwrap().at_t(t).unwrap();
            prop_assert!((m * a.f1 - b.f1).abs() < 1e-11 * b.f1);
            prop_assert!((m * a.f3 - b.f3).abs() < 1e-11 * b.f3);
        }

        #[test]
        fn conserved_quantity_is_minus_c_squared(
            c in 1e-3..3.0f64,
            d in 1e-3..3.0f64,
            m in 0.5..2.0f64,
            x in 1.01..100.0f64,
        ) {
            let eta = x / (m * m);
            let q = conserved_quantity_exact(AsdParams::TwoParameter { c, d }, m, eta).unwrap();
            prop_assert!((q + c * c).abs() < 1e-10);
        }
    }
}
