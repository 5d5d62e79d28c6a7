use g2flow::b7::{
    flow_metric, inequality_margins, member_with_ell, B7Params, Completeness, MetricSample,
    MetricTrajectory,
};
use g2flow::classify::{
    boundary_curve, classify_cell, complete_side, default_end_time, on_boundary, scan_region,
    shoot_backward, ClassificationMap, EndConditions, ScanOptions, Shot,
};
use g2flow::fit::geometric_grid;
use g2flow::instanton::{
    flow_instanton_with, InstantonInit, InstantonSample, Verdict, BOUNDARY_TOL_FACTOR,
};
use g2flow::taubnut::{
    adiabatic_instanton_compare, asd_residual, conserved_quantity, conserved_quantity_exact,
    members_with_m, mu_from_cd, sample_closed_form, AdiabaticRow, AsdParams, ClosedFormSample,
    TaubNutParams,
};
use g2flow::{rng, Error};
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{nums, Field, Output};
use crate::Failure;

const REFERENCE_ABAR: f64 = 1.0 / 128.0;
const METRIC_T_MAX: f64 = 3200.0;
const METRIC_REL_TOL: f64 = 1e-12;
const INSTANTON_T_MAX: f64 = 100.0;
const INSTANTON_REL_TOL: f64 = 1e-10;
const UNDECIDED_LIMIT: f64 = 0.1;
const TAUBNUT_RESIDUAL_LIMIT: f64 = 1e-8;

fn usage_on_invalid(e: Error) -> Failure {
    match e {
        Error::InvalidInput(m) | Error::InvalidEnd(m) => Failure::Usage(m),
        e => e.into(),
    }
}

fn family(cfg: &RunConfig) -> Result<B7Params, Failure> {
    let r0 = cfg.r0.unwrap_or(1.0);
    match cfg.ell_target {
        Some(ell) => member_with_ell(
            r0,
            ell,
            cfg.metric_t_max.unwrap_or(METRIC_T_MAX),
            cfg.metric_rel_tol.unwrap_or(METRIC_REL_TOL),
        )
        .map_err(usage_on_invalid),
        None => B7Params::new(r0, cfg.abar.unwrap_or(REFERENCE_ABAR)).map_err(usage_on_invalid),
    }
}

/// Metric used as the background for instanton runs.
fn background(cfg: &RunConfig) -> Result<(MetricTrajectory, f64), Failure> {
    let params = family(cfg)?;
    if params.completeness() != Completeness::Alc {
        return Err(Failure::Usage(format!(
            "instanton runs need an ALC member, got 64 abar r0 = {}",
            params.alc_parameter()
        )));
    }
    let metric = flow_metric(
        &params,
        cfg.metric_t_max.unwrap_or(METRIC_T_MAX),
        cfg.metric_rel_tol.unwrap_or(METRIC_REL_TOL),
    )?;
    let ell = metric.ell_value()?;
    Ok((metric, ell))
}

fn scan_options(cfg: &RunConfig) -> ScanOptions {
    let mut o = ScanOptions::new(
        cfg.t_max.unwrap_or(INSTANTON_T_MAX),
        cfg.rel_tol.unwrap_or(INSTANTON_REL_TOL),
    );
    if let Some(a) = cfg.abs_tol {
        o.abs_tol = a;
    }
    if let Some(b) = cfg.blowup_threshold {
        o.blowup = b;
    }
    o.bisect_tol = cfg.bisect_tol;
    o
}

fn verdict_fields(v: &Verdict) -> [Field; 3] {
    let lambda = match *v {
        Verdict::CompleteExponential { lambda_fit, .. } => lambda_fit,
        _ => f64::NAN,
    };
    [
        Field::Text(v.name().to_string()),
        Field::Num(v.g_inf().unwrap_or(f64::NAN)),
        Field::Num(lambda),
    ]
}

fn report_written(out: &Output) {
    for p in &out.written {
        println!("wrote {}", p.display());
    }
}

pub fn metric(cfg: &RunConfig) -> Result<(), Failure> {
    let params = family(cfg)?;
    let t_max = cfg.t_max.or(cfg.metric_t_max).unwrap_or(METRIC_T_MAX);
    let rel_tol = cfg.rel_tol.or(cfg.metric_rel_tol).unwrap_or(METRIC_REL_TOL);
    let traj = flow_metric(&params, t_max, rel_tol)?;

    println!(
        "member r0 = {}, abar = {}, bbar = {} ({:?})",
        params.r0,
        params.abar,
        params.bbar,
        params.completeness()
    );
    match traj.ell {
        Some(e) => println!("ell = {} (fit_err {:.3e})", e.ell, e.fit_err),
        None => println!("ell: none (not ALC)"),
    }
    let ac = params.completeness() == Completeness::Ac;
    if ac {
        let dev = traj
            .samples
            .iter()
            .map(|s| (s.a - s.b).abs() / s.a)
            .fold(0.0, f64::max);
        println!("a = b along the flow: max |a - b|/a = {dev:.3e}");
    } else {
        let m = traj
            .samples
            .iter()
            .map(|s| inequality_margins(&params, s))
            .fold([f64::INFINITY; 5], |acc, m| {
                let v = [m.b_above_p, m.bdot, m.a_over_b, m.rate_ratio, m.accel_ratio];
                std::array::from_fn(|k| acc[k].min(v[k]))
            });
        println!(
            "inequality margins (min over samples): b > p {:.3e}, bdot > 0 {:.3e}, a > b {:.3e}, \
             adot/bdot > a/b {:.3e}, addot/bddot > adot/bdot {:.3e}",
            m[0], m[1], m[2], m[3], m[4]
        );
    }

    let mut out = Output::new("metric", cfg);
    let rows: Vec<Vec<Field>> = traj.samples.iter().map(|s| nums(&s.csv_values())).collect();
    out.table("metric", &MetricSample::CSV_HEADER, &rows, traj.sidecar())?;
    report_written(&out);
    Ok(())
}

fn map_rows(map: &ClassificationMap) -> Vec<Vec<Field>> {
    map.cells
        .iter()
        .map(|c| {
            let mut r = vec![Field::Num(c.f1), Field::Num(c.g1)];
            r.extend(verdict_fields(&c.verdict));
            r
        })
        .collect()
}

pub fn scan(cfg: &RunConfig) -> Result<(), Failure> {
    let (metric, ell) = background(cfg)?;
    let top = 2.0 / (ell * ell);
    let f1 = cfg.f1_range.unwrap_or([0.0, top]);
    let g1 = cfg.g1_range.unwrap_or([0.0, top]);
    let (n_f, n_g) = (cfg.n_f.unwrap_or(64), cfg.n_g.unwrap_or(64));
    let opts = scan_options(cfg);
    let map = scan_region(&metric, (f1[0], f1[1]), (g1[0], g1[1]), n_f, n_g, &opts)
        .map_err(usage_on_invalid)?;

    println!("ell = {ell}, grid {n_f} x {n_g}");
    for (name, n) in map.counts() {
        println!("{name:>20} {n}");
    }
    let undecided = map.undecided_fraction();
    let meta = json!({
        "ell": ell,
        "counts": map.counts().into_iter().collect::<std::collections::BTreeMap<_, _>>(),
        "undecided_fraction": undecided,
        "t_max": opts.t_max,
        "rel_tol": opts.rel_tol,
    });

    let mut out = Output::new("scan", cfg);
    out.table(
        "scan",
        &ClassificationMap::CSV_HEADER,
        &map_rows(&map),
        meta,
    )?;
    out.raw("region.dat", "region", |p| map.write_region(p))?;
    if opts.bisect_tol.is_some() {
        let rows: Vec<Vec<Field>> = map
            .boundary
            .iter()
            .map(|b| nums(&[b.g1, b.f_boundary]))
            .collect();
        out.table(
            "scan_boundary",
            &ClassificationMap::BOUNDARY_HEADER,
            &rows,
            json!({ "ell": ell }),
        )?;
    }
    report_written(&out);
    if undecided > UNDECIDED_LIMIT {
        return Err(Failure::Numerical(format!(
            "{:.1}% of cells are undecided after escalation",
            100.0 * undecided
        )));
    }
    Ok(())
}

pub fn boundary(cfg: &RunConfig) -> Result<(), Failure> {
    let (metric, ell) = background(cfg)?;
    let half = 0.5 / (ell * ell);
    let mut g1s = cfg.g1_list.clone().unwrap_or_else(|| {
        let step = 1.5 / (ell * ell) / 8.0;
        (1..=8).map(|k| half + k as f64 * step).collect()
    });
    if let Some(g) = g1s.iter().find(|&&g| !(g > half)) {
        return Err(Failure::Usage(format!(
            "g1 = {g} is not above the abelian threshold 1/(2 ell^2) = {half}"
        )));
    }
    g1s.sort_by(f64::total_cmp);
    let tol = cfg.bisect_tol.unwrap_or(1e-6);
    let opts = scan_options(cfg);

    let points = g1s
        .par_iter()
        .map(|&g1| {
            // f1 = 0 is abelian, hence complete; grow the upper end until incomplete.
            let mut hi = g1;
            for _ in 0..12 {
                let tr = classify_cell(&metric, InstantonInit::new(hi, g1), &opts)?;
                if !complete_side(&tr.verdict, ell) {
                    return boundary_curve(&metric, g1, (0.0, hi), tol, &opts);
                }
                hi *= 2.0;
            }
            Err(Error::BadBracket { lo: 0.0, hi })
        })
        .collect::<g2flow::Result<Vec<_>>>()?;

    let header = ["g1", "f_boundary", "Ginf_check"];
    let rows: Vec<Vec<Field>> = points
        .iter()
        .map(|b| nums(&[b.g1, b.f_boundary, b.g_inf_check]))
        .collect();
    let off: Vec<f64> = points
        .iter()
        .filter(|b| !on_boundary(b, ell))
        .map(|b| b.g1)
        .collect();
    let monotone = points.windows(2).all(|w| w[1].f_boundary > w[0].f_boundary);
    for b in &points {
        println!(
            "g1 = {:.6}  f_boundary = {:.8}  Ginf - 1/ell = {:+.3e}",
            b.g1,
            b.f_boundary,
            b.g_inf_check - 1.0 / ell
        );
    }
    let mut out = Output::new("boundary", cfg);
    out.table(
        "boundary",
        &header,
        &rows,
        json!({
            "ell": ell,
            "bisect_tol": tol,
            "boundary_tol": BOUNDARY_TOL_FACTOR / ell,
            "monotone": monotone,
        }),
    )?;
    report_written(&out);
    if !monotone {
        return Err(Failure::Numerical(
            "boundary is not increasing in g1".into(),
        ));
    }
    if !off.is_empty() {
        return Err(Failure::Numerical(format!(
            "G_inf check outside the boundary tolerance at g1 = {off:?}"
        )));
    }
    Ok(())
}

fn asd_params(cfg: &RunConfig) -> Result<AsdParams, Failure> {
    let p = AsdParams::TwoParameter {
        c: cfg.c.unwrap_or(1.0),
        d: cfg.d.unwrap_or(1.0),
    };
    p.validate().map_err(usage_on_invalid)?;
    Ok(p)
}

pub fn taubnut(cfg: &RunConfig) -> Result<(), Failure> {
    let m = cfg.m.unwrap_or(1.0);
    let tn = TaubNutParams::new(m).map_err(usage_on_invalid)?;
    let asd = asd_params(cfg)?;
    let c = tn.eta_min();
    let grid = geometric_grid(1.01 * c, 100.0 * c, cfg.eta_points.unwrap_or(200));

    let samples = sample_closed_form(tn, asd, &grid)?;
    let residual = asd_residual(asd, m, &grid)?;
    let expected_q = asd.conserved_value();
    let q_dev = samples
        .iter()
        .map(|s| (s.q - expected_q).abs())
        .fold(0.0, f64::max);
    let a3: Vec<f64> = samples.iter().map(|s| s.a3).collect();
    let q_fd = conserved_quantity(&grid, &a3, m)?;
    let q_fd_dev = q_fd
        .iter()
        .map(|q| (q - expected_q).abs())
        .fold(0.0, f64::max);

    let n_random = cfg.random_checks.unwrap_or(100);
    let seed = rng::seed_from_env();
    let mut g = rng::stream(seed);
    let (mut rand_res, mut rand_q) = (0.0_f64, 0.0_f64);
    for _ in 0..n_random {
        let m = g.gen_range(0.5..=2.0);
        let c = g.gen_range(1e-3..=3.0);
        let d = g.gen_range(1e-3..=3.0);
        let p = AsdParams::TwoParameter { c, d };
        let cm = 1.0 / (m * m);
        let grid = geometric_grid(1.05 * cm, 50.0 * cm, 60);
        rand_res = rand_res.max(asd_residual(p, m, &grid)?);
        for &eta in &grid {
            rand_q = rand_q.max((conserved_quantity_exact(p, m, eta)? + c * c).abs());
        }
    }

    println!("max ASD residual {residual:.3e}");
    println!("Q = {expected_q}: max deviation {q_dev:.3e} (finite differences {q_fd_dev:.3e})");
    println!(
        "{n_random} random (m, C, D) with seed {seed}: residual {rand_res:.3e}, Q {rand_q:.3e}"
    );

    let mut out = Output::new("taubnut", cfg);
    let rows: Vec<Vec<Field>> = samples.iter().map(|s| nums(&s.values())).collect();
    out.table(
        "taubnut",
        &ClosedFormSample::HEADER,
        &rows,
        json!({ "m": m, "asd": asd }),
    )?;
    out.report(
        "taubnut_residual",
        &json!({
            "m": m,
            "asd": asd,
            "max_residual": residual,
            "random": {
                "count": n_random,
                "seed": seed,
                "max_residual": rand_res,
                "max_conserved_error": rand_q,
            },
        }),
    )?;
    out.report(
        "taubnut_conserved",
        &json!({
            "expected": expected_q,
            "max_deviation": q_dev,
            "max_deviation_finite_difference": q_fd_dev,
        }),
    )?;
    if cfg.adiabatic == Some(true) {
        let rows = adiabatic_rows(cfg)?;
        write_adiabatic(&mut out, &rows)?;
    }
    report_written(&out);
    let worst = residual.max(rand_res);
    if !(worst <= TAUBNUT_RESIDUAL_LIMIT) {
        return Err(Failure::Numerical(format!(
            "ASD residual {worst:.3e} exceeds {TAUBNUT_RESIDUAL_LIMIT:e}"
        )));
    }
    Ok(())
}

fn adiabatic_rows(cfg: &RunConfig) -> Result<Vec<AdiabaticRow>, Failure> {
    let m = cfg.m.unwrap_or(1.0);
    let (mu1, mu3) = match (cfg.mu1, cfg.mu3) {
        (Some(a), Some(b)) => (a, b),
        (None, None) => {
            let AsdParams::TwoParameter { c, d } = asd_params(cfg)? else {
                unreachable!()
            };
            mu_from_cd(c, d, m)
        }
        _ => return Err(Failure::Usage("give both mu1 and mu3, or neither".into())),
    };
    let r0s = cfg
        .r0_list
        .clone()
        .unwrap_or_else(|| vec![0.5, 0.25, 0.125]);
    let members = members_with_m(m, &r0s).map_err(usage_on_invalid)?;
    let rows = adiabatic_instanton_compare(
        mu1,
        mu3,
        &members,
        cfg.t_max.unwrap_or(3.0),
        cfg.rel_tol.unwrap_or(INSTANTON_REL_TOL),
    )
    .map_err(usage_on_invalid)?;
    Ok(rows)
}

fn write_adiabatic(out: &mut Output, rows: &[AdiabaticRow]) -> Result<(), Failure> {
    let decreasing = rows.windows(2).all(|w| w[1].sup_err() < w[0].sup_err());
    for r in rows {
        println!(
            "r0 = {:<8} sup|a1 - A1| = {:.3e}  sup|a3 - A3| = {:.3e}",
            r.r0, r.sup_err_a1, r.sup_err_a3
        );
    }
    println!("errors decreasing: {decreasing}");
    let table: Vec<Vec<Field>> = rows.iter().map(|r| nums(&r.values())).collect();
    out.table(
        "adiabatic",
        &AdiabaticRow::HEADER,
        &table,
        json!({ "decreasing": decreasing }),
    )
}

pub fn adiabatic(cfg: &RunConfig) -> Result<(), Failure> {
    let rows = adiabatic_rows(cfg)?;
    let mut out = Output::new("adiabatic", cfg);
    write_adiabatic(&mut out, &rows)?;
    report_written(&out);
    Ok(())
}

pub fn endshoot(cfg: &RunConfig) -> Result<(), Failure> {
    let (metric, ell) = background(cfg)?;
    let ec = EndConditions::new(cfg.g_inf.unwrap_or(1.5 / ell), cfg.lambda.unwrap_or(1.0));
    let t_end = cfg.t_end.unwrap_or_else(|| default_end_time(ell));
    let opts = scan_options(cfg);
    let shot = shoot_backward(ec, &metric, t_end, opts.rel_tol).map_err(usage_on_invalid)?;

    let mut out = Output::new("endshoot", cfg);
    let mut report = json!({
        "ell": ell,
        "g_inf": ec.g_inf,
        "lambda": ec.lambda,
        "t_end": t_end,
        "shot": shot,
    });
    let closed = shot.initial_conditions();
    if let Some((f1, g1)) = closed {
        println!("closed: f1 = {f1}, g1 = {g1}");
        let tr = flow_instanton_with(
            InstantonInit::new(f1, g1),
            &metric,
            opts.t_max,
            &opts.instanton(),
        )?;
        println!("forward flow: {:?}", tr.verdict);
        report["forward"] = tr.sidecar();
        if let Some(g) = tr.verdict.g_inf() {
            report["g_inf_error"] = json!(g - ec.g_inf);
        }
        if let Verdict::CompleteExponential { lambda_fit, .. } = tr.verdict {
            report["lambda_rel_error"] = json!((lambda_fit - ec.lambda) / ec.lambda);
        }
        let rows: Vec<Vec<Field>> = tr.samples.iter().map(|s| nums(&s.csv_values())).collect();
        out.table(
            "endshoot_forward",
            &InstantonSample::CSV_HEADER,
            &rows,
            tr.sidecar(),
        )?;
    }
    out.report("endshoot", &report)?;
    report_written(&out);
    match shot {
        Shot::Closed { .. } => Ok(()),
        Shot::FailedToClose { t, reason } => Err(Failure::Numerical(format!(
            "end solution fails to close at t = {t}: {reason}"
        ))),
    }
}
