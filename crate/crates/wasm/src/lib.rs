//! Browser entry points. Every function returns a JSON string, or an error
//! message, so the page needs no bindings beyond plain strings. Differences
//! are on the margin scale `δ = P_C - P_T`.

use riskdiff_core::ci::{invert, InversionOptions, Method};
use riskdiff_core::ec::{calibrate_ec, find_extremum_calibrated, ExtremumKind};
use riskdiff_core::exact::{exact_pvalue, ExactOptions};
use riskdiff_core::prob::{Outcome, TrialDesign};
use riskdiff_core::score::{p_asy, z_mee};
use riskdiff_core::Error;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const MAX_POINTS: usize = 20_001;

fn data(nt: u32, nc: u32, xt: u32, xc: u32) -> Result<(TrialDesign, Outcome), String> {
    let d = TrialDesign::new(nt, nc).map_err(|e| e.to_string())?;
    let y = d.outcome(xt, xc).map_err(|e| e.to_string())?;
    Ok((d, y))
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn span(from: f64, to: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(from < to && (2..=MAX_POINTS).contains(&points)) {
        return Err(format!("need from < to and 2..={MAX_POINTS} points"));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                to
            } else {
                from + (to - from) * i as f64 / last
            }
        })
        .collect())
}

/// `Z_EC` and the Mee statistic along `δ ∈ [from, to]`, with the anchor and
/// the refined interior extremum.
#[wasm_bindgen]
pub fn zec_curve(
    nt: u32,
    nc: u32,
    xt: u32,
    xc: u32,
    margin: f64,
    from: f64,
    to: f64,
    points: usize,
) -> Result<String, String> {
    let (d, y) = data(nt, nc, xt, xc)?;
    if !(from > -1.0 && to < 1.0) {
        return Err("the δ range must lie inside (-1, 1)".into());
    }
    let grid = span(from, to, points)?;
    let cal = calibrate_ec(d, y, margin, ExactOptions::default()).map_err(|e| e.to_string())?;
    let mut curve = Vec::with_capacity(grid.len());
    for &delta in &grid {
        let ec = cal.z_ec(d, y, -delta).map_err(|e| e.to_string())?;
        let mee = z_mee(d, y, -delta).map_err(|e| e.to_string())?;
        curve.push(json!([delta, num(ec.value), num(mee.value)]));
    }
    let ext = find_extremum_calibrated(&cal, d, y, (from, to)).map_err(|e| e.to_string())?;
    let extremum = match ext.kind {
        ExtremumKind::None => Value::Null,
        kind => json!({
            "kind": if kind == ExtremumKind::Min { "min" } else { "max" },
            "delta": ext.delta_star,
            "z_ec": num(ext.value),
        }),
    };
    let out = json!({
        "anchor": -cal.d_hat_0,
        "p_exact": cal.p_exact,
        "boundary_quantile": num(cal.boundary_quantile),
        "extremum": extremum,
        "columns": ["delta", "z_ec", "z_mee"],
        "curve": curve,
    });
    Ok(out.to_string())
}

/// Exact and Mee one-sided p-values as functions of the margin, with the
/// margins where the exact test's decision at `alpha/2` flips back.
#[wasm_bindgen]
pub fn pvalue_curve(
    nt: u32,
    nc: u32,
    xt: u32,
    xc: u32,
    from: f64,
    to: f64,
    points: usize,
    alpha: f64,
) -> Result<String, String> {
    let (d, y) = data(nt, nc, xt, xc)?;
    if !(from >= 0.0 && to < 1.0) {
        return Err("margins must lie in [0, 1)".into());
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(format!("alpha {alpha} outside (0, 1)"));
    }
    let margins = span(from, to, points.min(2001))?;
    let mut curve = Vec::with_capacity(margins.len());
    let mut exact = Vec::with_capacity(margins.len());
    for &m in &margins {
        let pe = exact_pvalue(d, y, -m, ExactOptions::default())
            .map_err(|e| e.to_string())?
            .value;
        let pa = p_asy(d, y, -m).map_err(|e| e.to_string())?;
        curve.push(json!([m, pe, pa]));
        exact.push(pe);
    }
    // A larger margin that no longer rejects after a smaller one did.
    let level = alpha / 2.0;
    let mut incoherent = Vec::new();
    let mut rejected_before = false;
    for (m, p) in margins.iter().zip(&exact) {
        if *p < level {
            rejected_before = true;
        } else if rejected_before {
            incoherent.push(*m);
        }
    }
    let out = json!({
        "level": level,
        "columns": ["margin", "p_exact", "p_mee"],
        "curve": curve,
        "incoherent_margins": incoherent,
    });
    Ok(out.to_string())
}

/// Intervals from every method on the margin scale. EC is included when
/// `margin > 0`.
#[wasm_bindgen]
pub fn compare_intervals(
    nt: u32,
    nc: u32,
    xt: u32,
    xc: u32,
    alpha: f64,
    margin: f64,
) -> Result<String, String> {
    let (d, y) = data(nt, nc, xt, xc)?;
    let options = InversionOptions::default();
    let mut rows = Vec::new();
    for method in Method::ALL {
        let margin = if method == Method::Ec {
            if margin <= 0.0 {
                continue;
            }
            Some(margin)
        } else {
            None
        };
        let row = match invert(method, d, y, alpha, margin, &options) {
            Ok(set) => {
                let flip = |lo: f64, hi: f64| json!([-hi, -lo]);
                let components: Vec<Value> = set
                    .components
                    .iter()
                    .rev()
                    .map(|c| flip(c.lo, c.hi))
                    .collect();
                json!({ "method": method.name(), "hull": flip(set.hull.lo, set.hull.hi), "components": components })
            }
            Err(e @ (Error::DegenerateCalibration { .. } | Error::EmptyConfidenceSet { .. })) => {
                json!({ "method": method.name(), "hull": Value::Null, "components": [], "note": e.to_string() })
            }
            Err(e) => return Err(e.to_string()),
        };
        rows.push(row);
    }
    let estimate = f64::from(xc) / f64::from(nc) - f64::from(xt) / f64::from(nt);
    Ok(
        json!({ "estimate": estimate, "alpha": alpha, "margin": margin, "intervals": rows })
            .to_string(),
    )
}
