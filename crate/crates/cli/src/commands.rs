use riskdiff_core::ci::{invert, noninferiority_decision, InversionOptions, Method};
use riskdiff_core::coverage::{probability_grid, surface_from_evaluator, CoverageEvaluator};
use riskdiff_core::diagnostics::{
    liberal_conservative_map, scan_ci_nesting, scan_margin_coherence, scan_pexact_monotonicity,
    scan_zec_monotonicity, stepped, Relation, ViolationCertificate, Witness,
};
use riskdiff_core::ec::{calibrate_ec, find_zec_extremum, ExtremumKind};
use riskdiff_core::exact::{exact_pvalue, ExactOptions};
use riskdiff_core::prob::{enumerate_outcomes, Outcome, TrialDesign};
use riskdiff_core::score::{restricted_mle, unrestricted_estimate, upper_tail, AsymptoticMethod};
use riskdiff_core::{Convention, Error};
use serde_json::{json, Map, Value};

use crate::args::{
    CiMethod, CountArgs, DesignArgs, DiagnoseCommand, GlobalArgs, PvalueMethod, ScanTarget,
};
use crate::error::{usage, CliError};
use crate::report::{
    cell, g6, interval_text, intervals_text, num, opt_cell, opt_num, set_json, set_rows, Report,
};

type Out = Result<Report, CliError>;

pub struct Ctx {
    pub convention: Convention,
    pub options: InversionOptions,
}

impl Ctx {
    pub fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        let exact = ExactOptions {
            grid_points: g.grid_points,
            refine_tol: g.refine_tol,
        };
        exact.validate().map_err(|e| usage(e.to_string()))?;
        if g.scan_points < 3 || g.exact_scan_points < 3 {
            return Err(usage("scan grids need at least 3 points"));
        }
        Ok(Self {
            convention: g.convention.into(),
            options: InversionOptions {
                scan_points: g.scan_points,
                exact_scan_points: g.exact_scan_points,
                exact,
                ..InversionOptions::default()
            },
        })
    }

    fn exact(&self) -> ExactOptions {
        self.options.exact
    }

    /// A `Δ` value on the reporting scale.
    fn show(&self, delta: f64) -> f64 {
        self.convention.from_cap(delta)
    }

    fn scale(&self) -> &'static str {
        match self.convention {
            Convention::Delta => "delta",
            Convention::Cap => "Delta",
        }
    }
}

fn design(a: DesignArgs) -> Result<TrialDesign, CliError> {
    TrialDesign::new(a.nt, a.nc).map_err(|e| usage(e.to_string()))
}

fn counts(a: CountArgs) -> Result<(TrialDesign, Outcome), CliError> {
    let d = design(a.design)?;
    let y = d.outcome(a.xt, a.xc).map_err(|e| usage(e.to_string()))?;
    Ok((d, y))
}

fn targets(t: ScanTarget) -> Result<(TrialDesign, Vec<Outcome>, bool), CliError> {
    let d = design(t.design)?;
    match (t.xt, t.xc) {
        (Some(xt), Some(xc)) => Ok((
            d,
            vec![d.outcome(xt, xc).map_err(|e| usage(e.to_string()))?],
            true,
        )),
        _ => Ok((d, enumerate_outcomes(d), false)),
    }
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(usage(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Margins in `[0, 1)`, or `(0, 1)` when `positive`.
fn check_margin(margin: f64, positive: bool) -> Result<(), CliError> {
    let low_ok = if positive {
        margin > 0.0
    } else {
        margin >= 0.0
    };
    if low_ok && margin < 1.0 {
        Ok(())
    } else if positive {
        Err(usage(format!("margin {margin} outside (0, 1)")))
    } else {
        Err(usage(format!("margin {margin} outside [0, 1)")))
    }
}

fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && from < to && from > -1.0 && to < 1.0) {
        return Err(usage(format!(
            "grid {from}..{to} by {step} must be increasing, inside (-1, 1), with a positive step"
        )));
    }
    Ok(stepped(from, to, step))
}

fn outcome_json(y: Outcome) -> Value {
    json!({ "x_t": y.x_t(), "x_c": y.x_c() })
}

fn design_json(d: TrialDesign) -> Value {
    json!({ "n_t": d.n_t(), "n_c": d.n_c() })
}

fn header(r: &mut Report, d: TrialDesign, y: Option<Outcome>) {
    r.set("design", design_json(d));
    if let Some(y) = y {
        r.set("outcome", outcome_json(y));
        r.line(
            "data",
            format!("{}/{} vs {}/{}", y.x_t(), d.n_t(), y.x_c(), d.n_c()),
        );
    } else {
        r.line("design", format!("n_T = {}, n_C = {}", d.n_t(), d.n_c()));
    }
}

pub fn pvalue(ctx: &Ctx, c: CountArgs, margin: f64, method: PvalueMethod) -> Out {
    let (d, y) = counts(c)?;
    check_margin(margin, false)?;
    let boundary = -margin;
    let mut r = Report::new("pvalue", ctx.convention);
    let name = match method {
        PvalueMethod::Chan => "chan",
        PvalueMethod::Mee => "mee",
        PvalueMethod::Mn => "mn",
        PvalueMethod::Wald => "wald",
    };
    let (p, argmax, grid_points, statistic) = match method {
        PvalueMethod::Chan => {
            let p = exact_pvalue(d, y, boundary, ctx.exact())?;
            (p.value, Some(p.argmax_p_c), Some(p.grid_points), None)
        }
        other => {
            let m = match other {
                PvalueMethod::Mee => AsymptoticMethod::Mee,
                PvalueMethod::Mn => AsymptoticMethod::Mn,
                _ => AsymptoticMethod::Wald,
            };
            let z = m.statistic(d, y, boundary)?;
            (upper_tail(z), None, None, Some(z.value))
        }
    };
    r.set("method", name.into());
    r.set("p_value", num(p));
    r.set("nuisance_argmax", opt_num(argmax));
    r.set(
        "grid_points",
        grid_points.map(Value::from).unwrap_or(Value::Null),
    );
    r.set(
        "refine_tol",
        if argmax.is_some() {
            num(ctx.exact().refine_tol)
        } else {
            Value::Null
        },
    );
    r.set("statistic", opt_num(statistic));
    header(&mut r, d, Some(y));
    r.set("margin", num(margin));
    r.set("boundary", num(ctx.show(boundary)));

    r.line("method", name);
    r.line("p_value", g6(p));
    if let (Some(a), Some(g)) = (argmax, grid_points) {
        r.line(
            "nuisance_argmax",
            format!(
                "p_C = {} (grid {g}, refine {})",
                g6(a),
                g6(ctx.exact().refine_tol)
            ),
        );
    }
    if let Some(z) = statistic {
        r.line("statistic", g6(z));
    }
    r.line(
        "null boundary",
        format!("{} = {}", ctx.scale(), g6(ctx.show(boundary))),
    );

    r.header = vec![
        "method",
        "p_value",
        "nuisance_argmax",
        "grid_points",
        "statistic",
        "margin",
        "convention",
    ];
    r.rows.push(vec![
        name.into(),
        cell(p),
        opt_cell(argmax),
        grid_points.map(|g| g.to_string()).unwrap_or_default(),
        opt_cell(statistic),
        cell(margin),
        crate::report::convention_name(ctx.convention).into(),
    ]);
    Ok(r)
}

pub fn stat(ctx: &Ctx, c: CountArgs, at: Option<f64>, margin: Option<f64>) -> Out {
    let (d, y) = counts(c)?;
    if let Some(m) = margin {
        check_margin(m, false)?;
    }
    let delta = match (at, margin) {
        (Some(v), _) => ctx.convention.to_cap(v),
        (None, Some(m)) => -m,
        (None, None) => return Err(usage("stat needs --at or --margin")),
    };
    if !(delta.abs() < 1.0) {
        return Err(usage(format!(
            "hypothesized difference {} outside (-1, 1)",
            ctx.show(delta)
        )));
    }
    let mle = restricted_mle(d, y, delta)?;
    let d_hat = unrestricted_estimate(d, y);
    let mut r = Report::new("stat", ctx.convention);
    header(&mut r, d, Some(y));
    r.set("at", num(ctx.show(delta)));
    r.set("estimate", num(ctx.show(d_hat)));
    r.set("restricted_mle", json!({ "p_t": num(mle.p_tilde_t), "p_c": num(mle.p_tilde_c), "sigma": num(mle.sigma_hat) }));
    r.line("at", format!("{} = {}", ctx.scale(), g6(ctx.show(delta))));
    r.line("estimate", g6(ctx.show(d_hat)));
    r.line(
        "restricted mle",
        format!(
            "p_T = {}, p_C = {}, sigma = {}",
            g6(mle.p_tilde_t),
            g6(mle.p_tilde_c),
            g6(mle.sigma_hat)
        ),
    );
    r.header = vec!["statistic", "value", "degenerate", "upper_tail"];

    let mut stats = Map::new();
    for (name, m) in [
        ("wald", AsymptoticMethod::Wald),
        ("mee", AsymptoticMethod::Mee),
        ("mn", AsymptoticMethod::Mn),
    ] {
        let z = m.statistic(d, y, delta)?;
        stats.insert(name.into(), json!({ "value": num(z.value), "degenerate": z.degenerate, "upper_tail": num(upper_tail(z)) }));
        r.line(&format!("z_{name}"), g6(z.value));
        r.rows.push(vec![
            name.into(),
            cell(z.value),
            z.degenerate.to_string(),
            cell(upper_tail(z)),
        ]);
    }
    if let Some(m) = margin.filter(|m| *m > 0.0) {
        let cal = calibrate_ec(d, y, m, ctx.exact())?;
        let z = cal.z_ec(d, y, delta)?;
        stats.insert(
            "ec".into(),
            json!({
                "value": num(z.value),
                "degenerate": z.degenerate,
                "upper_tail": num(upper_tail(z)),
                "anchor": num(ctx.show(cal.d_hat_0)),
                "p_exact": num(cal.p_exact),
                "margin": num(m),
            }),
        );
        r.line("z_ec", g6(z.value));
        r.line(
            "ec anchor",
            format!(
                "{} (p_exact {})",
                g6(ctx.show(cal.d_hat_0)),
                g6(cal.p_exact)
            ),
        );
        r.rows.push(vec![
            "ec".into(),
            cell(z.value),
            z.degenerate.to_string(),
            cell(upper_tail(z)),
        ]);
    }
    r.set("statistics", Value::Object(stats));
    Ok(r)
}

pub fn ci(ctx: &Ctx, c: CountArgs, method: CiMethod, alpha: f64, margin: Option<f64>) -> Out {
    let (d, y) = counts(c)?;
    check_alpha(alpha)?;
    let method: Method = method.into();
    match (method, margin) {
        (Method::Ec, None) => return Err(usage("the ec method needs --margin")),
        (_, Some(m)) => check_margin(m, method == Method::Ec)?,
        _ => {}
    }
    let set = invert(method, d, y, alpha, margin, &ctx.options)?;
    let mut r = Report::new("ci", ctx.convention);
    header(&mut r, d, Some(y));
    let d_hat = unrestricted_estimate(d, y);
    r.set("estimate", num(ctx.show(d_hat)));
    r.set("set", set_json(&set, ctx.convention));
    r.line("method", method.name());
    r.line("confidence", format!("{}%", g6(100.0 * (1.0 - alpha))));
    r.line("estimate", g6(ctx.show(d_hat)));
    r.line("interval", interval_text(set.hull, ctx.convention));
    r.line(
        "components",
        intervals_text(&set.components, ctx.convention),
    );
    r.line("gaps", intervals_text(&set.gaps, ctx.convention));
    if let Some(b) = set.boundary_check {
        r.line(
            "boundary",
            format!(
                "{} = {}: {} the set, p_exact {}, consistent {}",
                ctx.scale(),
                g6(ctx.show(b.boundary)),
                if b.in_set { "inside" } else { "outside" },
                g6(b.p_exact),
                b.consistent
            ),
        );
    }
    if let Some(m) = margin {
        let dec = noninferiority_decision(method, d, y, m, alpha, &ctx.options)?;
        r.set(
            "decision",
            json!({ "margin": num(m), "reject": dec.reject, "p_used": num(dec.p_used) }),
        );
        r.line(
            "decision",
            format!(
                "{} H0 at margin {} (p {})",
                if dec.reject {
                    "reject"
                } else {
                    "do not reject"
                },
                g6(m),
                g6(dec.p_used)
            ),
        );
    }
    r.header = vec!["method", "part", "lo", "hi"];
    r.rows = set_rows(&set, ctx.convention);
    Ok(r)
}

pub fn compare(ctx: &Ctx, c: CountArgs, alpha: f64, margin: Option<f64>) -> Out {
    let (d, y) = counts(c)?;
    check_alpha(alpha)?;
    if let Some(m) = margin {
        check_margin(m, true)?;
    }
    let mut r = Report::new("compare", ctx.convention);
    header(&mut r, d, Some(y));
    r.set("alpha", num(alpha));
    r.set("margin", opt_num(margin));
    r.line("confidence", format!("{}%", g6(100.0 * (1.0 - alpha))));
    r.header = vec!["method", "status", "lo", "hi", "components"];
    let mut rows = Vec::new();
    for method in Method::ALL {
        if method == Method::Ec && margin.is_none() {
            continue;
        }
        match invert(method, d, y, alpha, margin, &ctx.options) {
            Ok(set) => {
                let (lo, hi) = crate::report::interval(set.hull, ctx.convention);
                rows.push(json!({ "method": method.name(), "status": "ok", "set": set_json(&set, ctx.convention) }));
                let note = if set.is_connected() {
                    String::new()
                } else {
                    format!("  raw {}", intervals_text(&set.components, ctx.convention))
                };
                r.line(
                    method.name(),
                    format!("{}{note}", interval_text(set.hull, ctx.convention)),
                );
                r.rows.push(vec![
                    method.name().into(),
                    "ok".into(),
                    cell(lo),
                    cell(hi),
                    set.components.len().to_string(),
                ]);
            }
            Err(e @ (Error::DegenerateCalibration { .. } | Error::EmptyConfidenceSet { .. })) => {
                let status = match e {
                    Error::DegenerateCalibration { .. } => "degenerate_calibration",
                    _ => "empty",
                };
                rows.push(json!({ "method": method.name(), "status": status, "set": Value::Null }));
                r.line(method.name(), format!("no interval ({e})"));
                r.rows.push(vec![
                    method.name().into(),
                    status.into(),
                    String::new(),
                    String::new(),
                    "0".into(),
                ]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    r.set("intervals", Value::Array(rows));
    Ok(r)
}

pub fn coverage(
    ctx: &Ctx,
    a: DesignArgs,
    method: CiMethod,
    alpha: f64,
    margin: Option<f64>,
    step: f64,
    components: bool,
) -> Out {
    let d = design(a)?;
    check_alpha(alpha)?;
    let method: Method = method.into();
    match (method, margin) {
        (Method::Ec, None) => return Err(usage("coverage of the ec method needs --margin")),
        (_, Some(m)) => check_margin(m, true)?,
        _ => {}
    }
    if !(step > 0.0 && step <= 0.5) {
        return Err(usage(format!("grid step {step} outside (0, 0.5]")));
    }
    let grid = probability_grid(step)?;
    let evaluator =
        CoverageEvaluator::new(method, d, alpha, margin, &ctx.options)?.use_components(components);
    let s = surface_from_evaluator(&evaluator, &grid, step)?;

    let mut r = Report::new("coverage", ctx.convention);
    header(&mut r, d, None);
    r.set("method", method.name().into());
    r.set("alpha", num(alpha));
    r.set("margin", opt_num(margin));
    r.set("step", num(step));
    r.set(
        "scored_set",
        if components { "components" } else { "hull" }.into(),
    );
    r.set("min_coverage", num(s.min_coverage));
    r.set(
        "argmin",
        json!({ "p_t": num(s.argmin.p_t), "p_c": num(s.argmin.p_c) }),
    );
    r.set("mean_coverage", num(s.mean_coverage));
    r.set("max_expected_width", num(s.max_expected_width));
    r.set(
        "outcomes_without_interval",
        Value::Array(
            s.outcomes_without_interval
                .iter()
                .map(|y| outcome_json(*y))
                .collect(),
        ),
    );
    r.set(
        "cells",
        Value::Array(
            s.cells
                .iter()
                .map(|c| {
                    json!({ "p_t": num(c.p_t), "p_c": num(c.p_c), "coverage": num(c.coverage), "expected_width": num(c.expected_width) })
                })
                .collect(),
        ),
    );
    r.line("method", method.name());
    r.line("nominal", g6(1.0 - alpha));
    r.line("cells", s.cells.len().to_string());
    r.line(
        "min coverage",
        format!(
            "{} at p_T = {}, p_C = {}",
            g6(s.min_coverage),
            g6(s.argmin.p_t),
            g6(s.argmin.p_c)
        ),
    );
    r.line("mean coverage", g6(s.mean_coverage));
    r.line("max exp. width", g6(s.max_expected_width));
    r.line("no interval", s.outcomes_without_interval.len().to_string());
    r.header = vec![
        "p_t",
        "p_c",
        "coverage",
        "expected_width",
        "method",
        "alpha",
        "margin",
    ];
    r.rows = s
        .cells
        .iter()
        .map(|c| {
            vec![
                cell(c.p_t),
                cell(c.p_c),
                cell(c.coverage),
                cell(c.expected_width),
                method.name().into(),
                cell(alpha),
                opt_cell(margin),
            ]
        })
        .collect();
    Ok(r)
}

/// Runs a per-outcome scanner. With a single outcome its errors propagate;
/// over a whole design, outcomes whose EC calibration is degenerate or
/// whose set is empty are counted and skipped.
fn scan_outcomes(
    outcomes: &[Outcome],
    single: bool,
    mut scanner: impl FnMut(Outcome) -> riskdiff_core::Result<Vec<ViolationCertificate>>,
) -> Result<(Vec<ViolationCertificate>, usize), CliError> {
    let mut certs = Vec::new();
    let mut skipped = 0;
    for &y in outcomes {
        match scanner(y) {
            Ok(c) => certs.extend(c),
            Err(Error::DegenerateCalibration { .. } | Error::EmptyConfidenceSet { .. })
                if !single =>
            {
                skipped += 1
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((certs, skipped))
}

/// Witness points and values on the reporting scale.
fn witness_view(ctx: &Ctx, w: &Witness) -> (Vec<f64>, Vec<f64>) {
    let flip = |points: &[f64], values: &[f64], negate: bool| {
        if negate {
            (
                points.iter().rev().map(|p| -p).collect(),
                values.iter().rev().copied().collect(),
            )
        } else {
            (points.to_vec(), values.to_vec())
        }
    };
    match w {
        // Stored on the margin scale.
        Witness::ZecTriple { deltas, values, .. } => {
            flip(deltas, values, ctx.convention == Convention::Cap)
        }
        Witness::PexactPair {
            boundaries,
            p_values,
        } => flip(boundaries, p_values, ctx.convention == Convention::Delta),
        Witness::MarginPair {
            margins, p_values, ..
        } => (margins.to_vec(), p_values.to_vec()),
        Witness::Nesting {
            alpha_hi,
            alpha_lo,
            delta,
            ..
        } => (vec![ctx.show(*delta)], vec![*alpha_hi, *alpha_lo]),
    }
}

fn kind_name(c: &ViolationCertificate) -> &'static str {
    match c.witness {
        Witness::ZecTriple { .. } => "zec_nonmonotone",
        Witness::PexactPair { .. } => "pexact_nonmonotone",
        Witness::MarginPair { .. } => "margin_incoherence",
        Witness::Nesting { .. } => "nesting_failure",
    }
}

fn certificates(
    ctx: &Ctx,
    r: &mut Report,
    certs: &[ViolationCertificate],
    skipped: usize,
) -> Result<(), CliError> {
    let mut list = Vec::new();
    r.header = vec![
        "kind",
        "x_t",
        "x_c",
        "point_1",
        "point_2",
        "point_3",
        "value_1",
        "value_2",
        "value_3",
        "tolerance",
        "verified",
    ];
    for c in certs {
        let verified = c.verify(&ctx.options)?;
        let (points, values) = witness_view(ctx, &c.witness);
        let mut w = Map::new();
        match &c.witness {
            Witness::ZecTriple { margin, .. } => {
                w.insert("type".into(), "zec_triple".into());
                w.insert("margin".into(), num(*margin));
                w.insert("points".into(), points.iter().map(|p| num(*p)).collect());
                w.insert("z_ec".into(), values.iter().map(|p| num(*p)).collect());
            }
            Witness::PexactPair { .. } => {
                w.insert("type".into(), "pexact_pair".into());
                w.insert(
                    "boundaries".into(),
                    points.iter().map(|p| num(*p)).collect(),
                );
                w.insert("p_values".into(), values.iter().map(|p| num(*p)).collect());
            }
            Witness::MarginPair { alpha, .. } => {
                w.insert("type".into(), "margin_pair".into());
                w.insert("alpha".into(), num(*alpha));
                w.insert("margins".into(), points.iter().map(|p| num(*p)).collect());
                w.insert("p_values".into(), values.iter().map(|p| num(*p)).collect());
            }
            Witness::Nesting {
                method,
                margin,
                alpha_hi,
                alpha_lo,
                hull,
                ..
            } => {
                w.insert("type".into(), "nesting".into());
                w.insert("method".into(), method.name().into());
                w.insert("margin".into(), opt_num(*margin));
                w.insert("alpha_hi".into(), num(*alpha_hi));
                w.insert("alpha_lo".into(), num(*alpha_lo));
                w.insert("point".into(), num(points[0]));
                w.insert("set".into(), if *hull { "hull" } else { "raw" }.into());
            }
        }
        list.push(json!({
            "kind": kind_name(c),
            "design": design_json(c.design),
            "outcome": outcome_json(c.outcome),
            "witness": Value::Object(w),
            "tolerance_used": num(c.tolerance_used),
            "verified": verified,
        }));
        let shown = |v: &[f64]| v.iter().map(|x| g6(*x)).collect::<Vec<_>>().join(", ");
        r.line(
            kind_name(c),
            format!(
                "({}, {}) at [{}] values [{}]{}",
                c.outcome.x_t(),
                c.outcome.x_c(),
                shown(&points),
                shown(&values),
                if verified { "" } else { " NOT VERIFIED" }
            ),
        );
        let pad = |v: &[f64], i: usize| v.get(i).map(|x| cell(*x)).unwrap_or_default();
        r.rows.push(vec![
            kind_name(c).into(),
            c.outcome.x_t().to_string(),
            c.outcome.x_c().to_string(),
            pad(&points, 0),
            pad(&points, 1),
            pad(&points, 2),
            pad(&values, 0),
            pad(&values, 1),
            pad(&values, 2),
            cell(c.tolerance_used),
            verified.to_string(),
        ]);
    }
    r.line("certificates", certs.len().to_string());
    if skipped > 0 {
        r.line(
            "skipped",
            format!("{skipped} outcomes without a usable EC calibration or set"),
        );
    }
    r.set("skipped_outcomes", skipped.into());
    r.set("certificates", Value::Array(list));
    Ok(())
}

pub fn diagnose(ctx: &Ctx, cmd: DiagnoseCommand) -> Out {
    match cmd {
        DiagnoseCommand::Zec {
            target,
            margin,
            from,
            to,
            step,
        } => {
            check_margin(margin, true)?;
            let (d, outcomes, single) = targets(target)?;
            let (from, to) = match ctx.convention {
                Convention::Delta => (from.unwrap_or(-0.9999), to.unwrap_or(-0.98)),
                Convention::Cap => (from.unwrap_or(0.98), to.unwrap_or(0.9999)),
            };
            // The scanner works on the margin scale.
            let mut deltas: Vec<f64> = grid(from, to, step)?
                .into_iter()
                .map(|x| -ctx.convention.to_cap(x))
                .collect();
            deltas.sort_by(f64::total_cmp);
            let (certs, skipped) = scan_outcomes(&outcomes, single, |y| {
                scan_zec_monotonicity(d, y, margin, &deltas, ctx.exact())
            })?;
            let mut r = Report::new("diagnose zec", ctx.convention);
            header(&mut r, d, single.then(|| outcomes[0]));
            r.set("margin", num(margin));
            r.set(
                "grid",
                json!({ "from": num(from), "to": num(to), "step": num(step) }),
            );
            if single {
                let ext = find_zec_extremum(
                    d,
                    outcomes[0],
                    margin,
                    (deltas[0], deltas[deltas.len() - 1]),
                    ctx.exact(),
                )?;
                let kind = match ext.kind {
                    ExtremumKind::Min => "min",
                    ExtremumKind::Max => "max",
                    ExtremumKind::None => "none",
                };
                // Margin scale to reporting scale.
                let at = ctx.show(-ext.delta_star);
                r.set(
                    "extremum",
                    json!({ "kind": kind, "point": num(at), "z_ec": num(ext.value) }),
                );
                if ext.kind != ExtremumKind::None {
                    r.line(
                        "extremum",
                        format!("{kind} {} at {} = {}", g6(ext.value), ctx.scale(), g6(at)),
                    );
                }
            }
            certificates(ctx, &mut r, &certs, skipped)?;
            Ok(r)
        }
        DiagnoseCommand::Pexact {
            target,
            from,
            to,
            step,
        } => {
            let (d, outcomes, single) = targets(target)?;
            let mut bounds: Vec<f64> = grid(from, to, step)?
                .into_iter()
                .map(|x| ctx.convention.to_cap(x))
                .collect();
            bounds.sort_by(f64::total_cmp);
            let (certs, skipped) = scan_outcomes(&outcomes, single, |y| {
                scan_pexact_monotonicity(d, y, &bounds, ctx.exact())
            })?;
            let mut r = Report::new("diagnose pexact", ctx.convention);
            header(&mut r, d, single.then(|| outcomes[0]));
            r.set(
                "grid",
                json!({ "from": num(from), "to": num(to), "step": num(step) }),
            );
            certificates(ctx, &mut r, &certs, skipped)?;
            Ok(r)
        }
        DiagnoseCommand::Margins {
            target,
            alpha,
            from,
            to,
            step,
        } => {
            check_alpha(alpha)?;
            let (d, outcomes, single) = targets(target)?;
            if !(from > 0.0) {
                return Err(usage("margins must be positive"));
            }
            let margins = grid(from, to, step)?;
            let (certs, skipped) = scan_outcomes(&outcomes, single, |y| {
                scan_margin_coherence(d, y, alpha, &margins, ctx.exact())
            })?;
            let mut r = Report::new("diagnose margins", ctx.convention);
            header(&mut r, d, single.then(|| outcomes[0]));
            r.set("alpha", num(alpha));
            r.set(
                "margins",
                json!({ "from": num(from), "to": num(to), "step": num(step) }),
            );
            certificates(ctx, &mut r, &certs, skipped)?;
            Ok(r)
        }
        DiagnoseCommand::Nesting {
            target,
            method,
            margin,
            alpha_pairs,
        } => {
            let method: Method = method.into();
            match (method, margin) {
                (Method::Ec, None) => {
                    return Err(usage("nesting for the ec method needs --margin"))
                }
                (_, Some(m)) => check_margin(m, true)?,
                _ => {}
            }
            for &(hi, lo) in &alpha_pairs {
                check_alpha(hi)?;
                check_alpha(lo)?;
                if !(hi > lo) {
                    return Err(usage(format!(
                        "alpha pair ({hi}, {lo}) needs alpha_hi > alpha_lo"
                    )));
                }
            }
            let (d, outcomes, single) = targets(target)?;
            let (certs, skipped) = scan_outcomes(&outcomes, single, |y| {
                scan_ci_nesting(method, d, y, margin, &alpha_pairs, &ctx.options)
            })?;
            let mut r = Report::new("diagnose nesting", ctx.convention);
            header(&mut r, d, single.then(|| outcomes[0]));
            r.set("method", method.name().into());
            r.set("margin", opt_num(margin));
            r.set(
                "alpha_pairs",
                Value::Array(
                    alpha_pairs
                        .iter()
                        .map(|(h, l)| json!([num(*h), num(*l)]))
                        .collect(),
                ),
            );
            certificates(ctx, &mut r, &certs, skipped)?;
            Ok(r)
        }
        DiagnoseCommand::Map { design: a, margin } => {
            check_margin(margin, false)?;
            let d = design(a)?;
            let map = liberal_conservative_map(d, -margin, ctx.exact())?;
            let mut r = Report::new("diagnose map", ctx.convention);
            header(&mut r, d, None);
            r.set("margin", num(margin));
            r.set("boundary", num(ctx.show(-margin)));
            r.set("liberal", map.liberal.into());
            r.set("conservative", map.conservative.into());
            r.set("equal", map.equal.into());
            r.set("liberal_fraction", num(map.liberal_fraction));
            let relation = |rel: Relation| match rel {
                Relation::Liberal => "liberal",
                Relation::Conservative => "conservative",
                Relation::Equal => "equal",
            };
            r.set(
                "rows",
                Value::Array(
                    map.rows
                        .iter()
                        .map(|row| {
                            json!({
                                "outcome": outcome_json(row.outcome),
                                "p_asy": num(row.p_asy),
                                "p_exact": num(row.p_exact),
                                "relation": relation(row.relation),
                            })
                        })
                        .collect(),
                ),
            );
            r.raw(format!(
                "{:>4} {:>4}  {:>12}  {:>12}  relation",
                "x_T", "x_C", "p_mee", "p_exact"
            ));
            for row in &map.rows {
                r.raw(format!(
                    "{:>4} {:>4}  {:>12}  {:>12}  {}",
                    row.outcome.x_t(),
                    row.outcome.x_c(),
                    g6(row.p_asy),
                    g6(row.p_exact),
                    relation(row.relation)
                ));
            }
            r.line(
                "summary",
                format!(
                    "{} liberal, {} conservative, {} equal ({}% liberal)",
                    map.liberal,
                    map.conservative,
                    map.equal,
                    g6(100.0 * map.liberal_fraction)
                ),
            );
            r.header = vec!["x_t", "x_c", "p_asy", "p_exact", "relation"];
            r.rows = map
                .rows
                .iter()
                .map(|row| {
                    vec![
                        row.outcome.x_t().to_string(),
                        row.outcome.x_c().to_string(),
                        cell(row.p_asy),
                        cell(row.p_exact),
                        relation(row.relation).into(),
                    ]
                })
                .collect();
            Ok(r)
        }
    }
}
