//! The exact-corrected (EC) statistic.
//!
//! The observed difference is replaced by an anchor `d̂₀` chosen so that the
//! one-sided asymptotic p-value at the margin boundary equals the exact one:
//!
//! ```text
//! d̂₀ = -δ₀ + σ̂(-δ₀) · Φ⁻¹(1 - p_exact)
//! Z_EC(Δ) = (d̂₀ - Δ) / σ̂(Δ)
//! ```
//!
//! Because only the numerator is shifted, `Z_EC` is not guaranteed to be
//! monotone in `Δ`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::exact::{exact_pvalue, ExactOptions};
use crate::prob::{inverse_normal_cdf, Outcome, TrialDesign};
use crate::score::{restricted_mle, StatValue};

/// Exact p-values closer than this to 0 or 1 leave the anchor undefined.
pub const CALIBRATION_EPS: f64 = 1e-15;

const EXTREMUM_GRID: usize = 2001;
const EXTREMUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EcCalibration {
    pub d_hat_0: f64,
    /// Design margin `δ₀ > 0`; the null boundary is `Δ₀ = -δ₀`.
    pub delta0_margin: f64,
    pub p_exact: f64,
    pub sigma_at_boundary: f64,
    /// `Φ⁻¹(1 - p_exact)`, the value `Z_EC` takes at the boundary.
    pub boundary_quantile: f64,
}

impl EcCalibration {
    pub fn boundary(&self) -> f64 {
        -self.delta0_margin
    }

    /// `Z_EC` at the hypothesized difference `delta` (Δ scale).
    pub fn z_ec(&self, design: TrialDesign, outcome: Outcome, delta: f64) -> Result<StatValue> {
        let mle = restricted_mle(design, outcome, delta)?;
        let numerator = self.d_hat_0 - delta;
        if mle.sigma_hat > 0.0 {
            return Ok(StatValue {
                value: numerator / mle.sigma_hat,
                degenerate: false,
            });
        }
        let value = if numerator > 0.0 {
            f64::INFINITY
        } else if numerator < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        Ok(StatValue {
            value,
            degenerate: true,
        })
    }
}

/// Anchors the EC statistic for one design, outcome and margin.
pub fn calibrate_ec(
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    options: ExactOptions,
) -> Result<EcCalibration> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(domain(format!("margin {margin} outside (0, 1)")));
    }
    let boundary = -margin;
    let p_exact = exact_pvalue(design, outcome, boundary, options)?.value;
    if !(p_exact >= CALIBRATION_EPS && p_exact <= 1.0 - CALIBRATION_EPS) {
        return Err(Error::DegenerateCalibration { p_exact });
    }
    let sigma = restricted_mle(design, outcome, boundary)?.sigma_hat;
    let quantile = inverse_normal_cdf(1.0 - p_exact)?;
    Ok(EcCalibration {
        d_hat_0: boundary + sigma * quantile,
        delta0_margin: margin,
        p_exact,
        sigma_at_boundary: sigma,
        boundary_quantile: quantile,
    })
}

/// `Z_EC` at `delta` (Δ scale), calibrating on the fly.
pub fn z_ec(
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    delta: f64,
    options: ExactOptions,
) -> Result<StatValue> {
    calibrate_ec(design, outcome, margin, options)?.z_ec(design, outcome, delta)
}

/// Memoized calibrations keyed by design, outcome and margin.
#[derive(Debug, Clone, Default)]
pub struct CalibrationCache {
    options: ExactOptions,
    entries: HashMap<(TrialDesign, Outcome, u64), Result<EcCalibration>>,
}

impl CalibrationCache {
    pub fn new(options: ExactOptions) -> Self {
        Self {
            options,
            entries: HashMap::new(),
        }
    }

    pub fn get(
        &mut self,
        design: TrialDesign,
        outcome: Outcome,
        margin: f64,
    ) -> Result<EcCalibration> {
        let options = self.options;
        self.entries
            .entry((design, outcome, margin.to_bits()))
            .or_insert_with(|| calibrate_ec(design, outcome, margin, options))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
    None,
}

/// Interior extremum of `Z_EC` as a function of the margin-scale `δ = -Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZecExtremum {
    pub delta_star: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Scans `Z_EC` over `delta_interval` (margin scale, `δ = -Δ`) and refines
/// the most pronounced interior extremum. Minima take precedence over
/// maxima; among minima the lowest value wins.
pub fn find_zec_extremum(
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    delta_interval: (f64, f64),
    options: ExactOptions,
) -> Result<ZecExtremum> {
    let cal = calibrate_ec(design, outcome, margin, options)?;
    find_extremum_calibrated(&cal, design, outcome, delta_interval)
}

pub fn find_extremum_calibrated(
    cal: &EcCalibration,
    design: TrialDesign,
    outcome: Outcome,
    (from, to): (f64, f64),
) -> Result<ZecExtremum> {
    if !(from > -1.0 && to < 1.0 && from < to) {
        return Err(domain(format!(
            "interval [{from}, {to}] must lie inside (-1, 1)"
        )));
    }
    // Scan in the margin scale δ; the statistic is evaluated at Δ = -δ.
    let eval = |d: f64| cal.z_ec(design, outcome, -d).map(|z| z.value);
    let last = (EXTREMUM_GRID - 1) as f64;
    let grid: Vec<f64> = (0..EXTREMUM_GRID)
        .map(|i| {
            if i + 1 == EXTREMUM_GRID {
                to
            } else {
                from + (to - from) * (i as f64 / last)
            }
        })
        .collect();
    let values = grid.iter().map(|&d| eval(d)).collect::<Result<Vec<_>>>()?;

    let mut best_min: Option<usize> = None;
    let mut best_max: Option<usize> = None;
    for i in 1..EXTREMUM_GRID - 1 {
        let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
        if c < l && c <= r && best_min.is_none_or(|j| c < values[j]) {
            best_min = Some(i);
        }
        if c > l && c >= r && best_max.is_none_or(|j| c > values[j]) {
            best_max = Some(i);
        }
    }
    let (i, kind) = match (best_min, best_max) {
        (Some(i), _) => (i, ExtremumKind::Min),
        (None, Some(i)) => (i, ExtremumKind::Max),
        (None, None) => {
            return Ok(ZecExtremum {
                delta_star: f64::NAN,
                value: f64::NAN,
                kind: ExtremumKind::None,
            });
        }
    };

    let sign = if kind == ExtremumKind::Min { 1.0 } else { -1.0 };
    let (mut a, mut b) = (grid[i - 1], grid[i + 1]);
    let objective = |d: f64| eval(d).map(|v| sign * v);
    let inv_phi = 0.618_033_988_749_894_8;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    while b - a > EXTREMUM_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2)?;
        }
    }
    let delta_star = 0.5 * (a + b);
    Ok(ZecExtremum {
        delta_star,
        value: eval(delta_star)?,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_by_six() -> (TrialDesign, Outcome) {
        let d = TrialDesign::new(6, 6).unwrap();
        (d, d.outcome(6, 0).unwrap())
    }

    #[test]
    fn anchor_reconstruction() {
        let (d, o) = six_by_six();
        let cal = calibrate_ec(d, o, 0.05, ExactOptions::default()).unwrap();
        let rebuilt =
            -0.05 + cal.sigma_at_boundary * inverse_normal_cdf(1.0 - cal.p_exact).unwrap();
        assert!((cal.d_hat_0 - rebuilt).abs() < 1e-10);
        assert!((cal.d_hat_0 - 1.0019).abs() < 5e-4);
        assert_eq!(cal.boundary(), -0.05);
    }

    #[test]
    fn boundary_value_is_the_quantile() {
        let (d, o) = six_by_six();
        let cal = calibrate_ec(d, o, 0.05, ExactOptions::default()).unwrap();
        let z = cal.z_ec(d, o, cal.boundary()).unwrap();
        assert!((z.value - cal.boundary_quantile).abs() < 1e-10);
    }

    #[test]
    fn degenerate_calibration_is_reported() {
        let d = TrialDesign::new(4, 4).unwrap();
        // The lowest outcome has the whole sample space as its tail.
        let err =
            calibrate_ec(d, d.outcome(0, 4).unwrap(), 0.1, ExactOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateCalibration { .. }));
    }

    #[test]
    fn margin_must_be_positive_and_below_one() {
        let (d, o) = six_by_six();
        assert!(calibrate_ec(d, o, 0.0, ExactOptions::default()).is_err());
        assert!(calibrate_ec(d, o, 1.2, ExactOptions::default()).is_err());
    }

    #[test]
    fn cache_returns_identical_calibrations() {
        let (d, o) = six_by_six();
        let mut cache = CalibrationCache::new(ExactOptions::default());
        let a = cache.get(d, o, 0.05).unwrap();
        let b = cache.get(d, o, 0.05).unwrap();
        assert_eq!(a.d_hat_0.to_bits(), b.d_hat_0.to_bits());
        assert_eq!(cache.len(), 1);
        let fresh = calibrate_ec(d, o, 0.05, ExactOptions::default()).unwrap();
        assert_eq!(a, fresh);
    }

    #[test]
    fn anchor_at_estimate_reduces_to_mee() {
        let d = TrialDesign::new(8, 7).unwrap();
        let o = d.outcome(5, 3).unwrap();
        let d_hat = crate::score::unrestricted_estimate(d, o);
        let cal = EcCalibration {
            d_hat_0: d_hat,
            delta0_margin: 0.1,
            p_exact: 0.5,
            sigma_at_boundary: 0.0,
            boundary_quantile: 0.0,
        };
        for delta in [-0.6, -0.1, 0.0, 0.3, 0.8] {
            let ec = cal.z_ec(d, o, delta).unwrap().value;
            let mee = crate::score::z_mee(d, o, delta).unwrap().value;
            assert_eq!(ec, mee);
        }
        let ext = find_extremum_calibrated(&cal, d, o, (-0.95, 0.95)).unwrap();
        assert_eq!(ext.kind, ExtremumKind::None);
    }
}
