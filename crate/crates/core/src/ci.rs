//! Confidence sets by test inversion.
//!
//! Every method is inverted on a uniform grid of hypothesized differences
//! over `[-1 + ε, 1 - ε]`; each accepted/rejected transition between grid
//! neighbours is refined by bisection. Acceptance regions that fall
//! entirely between two grid points are not seen.

use serde::Serialize;

use crate::ec::{calibrate_ec, EcCalibration};
use crate::error::{domain, Error, Result};
use crate::exact::{ExactOptions, ExactWorkspace, TailDirection};
use crate::prob::{enumerate_outcomes, inverse_normal_cdf, Outcome, TrialDesign};
use crate::score::{unrestricted_estimate, upper_tail, wald_se, AsymptoticMethod};

/// Distance kept from `Δ = ±1`, where every statistic degenerates.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wald,
    Mee,
    Mn,
    /// Chan–Zhang exact interval: two one-sided exact tests, gap-filled.
    CzExact,
    /// Exact-corrected statistic; needs a design margin.
    Ec,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Wald,
        Method::Mee,
        Method::Mn,
        Method::CzExact,
        Method::Ec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Wald => "wald",
            Self::Mee => "mee",
            Self::Mn => "mn",
            Self::CzExact => "cz_exact",
            Self::Ec => "ec",
        }
    }

    pub fn asymptotic(self) -> Option<AsymptoticMethod> {
        match self {
            Self::Wald => Some(AsymptoticMethod::Wald),
            Self::Mee => Some(AsymptoticMethod::Mee),
            Self::Mn => Some(AsymptoticMethod::Mn),
            Self::CzExact | Self::Ec => None,
        }
    }
}

/// Closed interval on the `Δ` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// How the margin boundary `Δ₀ = -δ₀` sits in an EC confidence set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCheck {
    pub boundary: f64,
    pub in_set: bool,
    pub p_exact: f64,
    /// `in_set == (p_exact >= alpha / 2)`.
    pub consistent: bool,
    /// The boundary is excluded on the noninferiority side
    /// (`Z_EC(Δ₀) ≥ z_{1-α/2}`).
    pub excluded_below: bool,
}

/// A possibly disconnected test-inversion set with its hull and gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceSet {
    pub method: Method,
    pub alpha: f64,
    pub components: Vec<Interval>,
    pub hull: Interval,
    pub gaps: Vec<Interval>,
    pub margin_delta0: Option<f64>,
    pub boundary_check: Option<BoundaryCheck>,
}

impl ConfidenceSet {
    fn from_components(method: Method, alpha: f64, components: Vec<Interval>) -> Result<Self> {
        let (first, last) = match (components.first(), components.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => {
                return Err(Error::EmptyConfidenceSet {
                    method: method.name(),
                })
            }
        };
        let gaps = components
            .windows(2)
            .map(|w| Interval {
                lo: w[0].hi,
                hi: w[1].lo,
            })
            .collect();
        Ok(Self {
            method,
            alpha,
            hull: Interval {
                lo: first.lo,
                hi: last.hi,
            },
            components,
            gaps,
            margin_delta0: None,
            boundary_check: None,
        })
    }

    /// Membership in the raw acceptance set.
    pub fn contains(&self, delta: f64) -> bool {
        self.components.iter().any(|c| c.contains(delta))
    }

    pub fn is_connected(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Membership of a true difference in the gap-filled interval. Ends that
    /// reach the scan limit `±(1 - ε)` are read as closed at `±1`.
    pub fn hull_covers(&self, d: f64) -> bool {
        extend_edges(self.hull).contains(d)
    }

    /// As [`Self::hull_covers`] for the raw components.
    pub fn components_cover(&self, d: f64) -> bool {
        self.components.iter().any(|c| extend_edges(*c).contains(d))
    }
}

fn extend_edges(iv: Interval) -> Interval {
    let edge = 1.0 - BOUNDARY_EPS;
    Interval {
        lo: if iv.lo <= -edge { -1.0 } else { iv.lo },
        hi: if iv.hi >= edge { 1.0 } else { iv.hi },
    }
}

/// Scan and refinement settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionOptions {
    /// Grid size for the asymptotic and EC scans.
    pub scan_points: usize,
    /// Grid size for the exact (Chan–Zhang) scan, whose points are costly.
    pub exact_scan_points: usize,
    pub bisect_tol: f64,
    pub exact: ExactOptions,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            scan_points: 4001,
            exact_scan_points: 801,
            bisect_tol: 1e-9,
            exact: ExactOptions::default(),
        }
    }
}

/// Uniform grid on `[-1, 1]` with the two ends pulled in to `±(1 - ε)`.
pub fn scan_grid(points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == 0 {
                -1.0 + BOUNDARY_EPS
            } else if i + 1 == points {
                1.0 - BOUNDARY_EPS
            } else {
                (2.0 * i as f64 - last) / last
            }
        })
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

fn check_options(options: &InversionOptions) -> Result<()> {
    if options.scan_points < 3 || options.exact_scan_points < 3 {
        return Err(domain("scan grids need at least 3 points"));
    }
    if !(options.bisect_tol > 0.0) {
        return Err(domain("bisection tolerance must be positive"));
    }
    Ok(())
}

/// `z_{1-alpha/2}`.
pub fn critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    inverse_normal_cdf(1.0 - alpha / 2.0)
}

/// Components of `{Δ : accept(Δ)}` from grid flags plus bisection.
fn components_from_flags(
    grid: &[f64],
    flags: &[bool],
    tol: f64,
    mut accept: impl FnMut(f64) -> Result<bool>,
) -> Result<Vec<Interval>> {
    let mut bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        while (inside - outside).abs() > tol {
            let mid = 0.5 * (inside + outside);
            if accept(mid)? {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if !flags[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < grid.len() && flags[i + 1] {
            i += 1;
        }
        let lo = if start == 0 {
            grid[0]
        } else {
            bisect(grid[start], grid[start - 1])?
        };
        let hi = if i + 1 == grid.len() {
            grid[i]
        } else {
            bisect(grid[i], grid[i + 1])?
        };
        out.push(Interval { lo, hi });
        i += 1;
    }
    Ok(out)
}

fn scan(
    grid: &[f64],
    tol: f64,
    mut accept: impl FnMut(f64) -> Result<bool>,
) -> Result<Vec<Interval>> {
    let flags = grid
        .iter()
        .map(|&d| accept(d))
        .collect::<Result<Vec<_>>>()?;
    components_from_flags(grid, &flags, tol, accept)
}

/// Inverts the Wald, Mee or Miettinen–Nurminen test.
pub fn invert_asymptotic(
    method: AsymptoticMethod,
    design: TrialDesign,
    outcome: Outcome,
    alpha: f64,
    options: &InversionOptions,
) -> Result<ConfidenceSet> {
    check_options(options)?;
    let z_crit = critical_value(alpha)?;
    let (tag, components) = match method {
        AsymptoticMethod::Wald => {
            let d_hat = unrestricted_estimate(design, outcome);
            let half = z_crit * wald_se(design, outcome);
            let iv = Interval {
                lo: (d_hat - half).max(-1.0),
                hi: (d_hat + half).min(1.0),
            };
            (Method::Wald, vec![iv])
        }
        AsymptoticMethod::Mee | AsymptoticMethod::Mn => {
            let tag = if method == AsymptoticMethod::Mee {
                Method::Mee
            } else {
                Method::Mn
            };
            let grid = scan_grid(options.scan_points);
            let comps = scan(&grid, options.bisect_tol, |d| {
                Ok(method.statistic(design, outcome, d)?.value.abs() < z_crit)
            })?;
            (tag, comps)
        }
    };
    ConfidenceSet::from_components(tag, alpha, components)
}

/// Acceptance of `Δ` by both one-sided exact tests at level `alpha/2`.
fn cz_accepts(ws: &ExactWorkspace, outcome: Outcome, alpha: f64) -> bool {
    ws.pvalue(outcome, TailDirection::Upper).value >= alpha / 2.0
        && ws.pvalue(outcome, TailDirection::Lower).value >= alpha / 2.0
}

fn cz_accepts_at(
    design: TrialDesign,
    outcome: Outcome,
    delta: f64,
    alpha: f64,
    exact: ExactOptions,
) -> Result<bool> {
    Ok(cz_accepts(
        &ExactWorkspace::new(design, delta, exact)?,
        outcome,
        alpha,
    ))
}

/// Chan–Zhang exact interval: the raw two-sided acceptance set of the exact
/// score test and, as its hull, the gap-filled interval.
pub fn invert_cz_exact(
    design: TrialDesign,
    outcome: Outcome,
    alpha: f64,
    options: &InversionOptions,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_options(options)?;
    let grid = scan_grid(options.exact_scan_points);
    let comps = scan(&grid, options.bisect_tol, |d| {
        cz_accepts_at(design, outcome, d, alpha, options.exact)
    })?;
    ConfidenceSet::from_components(Method::CzExact, alpha, comps)
}

/// Chan–Zhang sets for every outcome of the design, sharing the score
/// ordering and nuisance grid across outcomes at each scan point. Produces
/// the same sets as calling [`invert_cz_exact`] outcome by outcome.
pub fn invert_cz_exact_all(
    design: TrialDesign,
    alpha: f64,
    options: &InversionOptions,
) -> Result<Vec<ConfidenceSet>> {
    check_alpha(alpha)?;
    check_options(options)?;
    let grid = scan_grid(options.exact_scan_points);
    let outcomes = enumerate_outcomes(design);

    let per_point = |&d: &f64| -> Result<Vec<bool>> {
        let ws = ExactWorkspace::new(design, d, options.exact)?;
        Ok(outcomes
            .iter()
            .map(|&y| cz_accepts(&ws, y, alpha))
            .collect())
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<bool>> = {
        use rayon::prelude::*;
        grid.par_iter().map(per_point).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<bool>> = grid.iter().map(per_point).collect::<Result<_>>()?;

    let per_outcome = |(k, &y): (usize, &Outcome)| -> Result<ConfidenceSet> {
        let flags: Vec<bool> = rows.iter().map(|r| r[k]).collect();
        let comps = components_from_flags(&grid, &flags, options.bisect_tol, |d| {
            cz_accepts_at(design, y, d, alpha, options.exact)
        })?;
        ConfidenceSet::from_components(Method::CzExact, alpha, comps)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        outcomes.par_iter().enumerate().map(per_outcome).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        outcomes.iter().enumerate().map(per_outcome).collect()
    }
}

/// EC confidence set for a design margin, computed from its calibration.
pub fn invert_ec_calibrated(
    cal: &EcCalibration,
    design: TrialDesign,
    outcome: Outcome,
    alpha: f64,
    options: &InversionOptions,
) -> Result<ConfidenceSet> {
    check_options(options)?;
    let z_crit = critical_value(alpha)?;
    let grid = scan_grid(options.scan_points);
    let comps = scan(&grid, options.bisect_tol, |d| {
        Ok(cal.z_ec(design, outcome, d)?.value.abs() < z_crit)
    })?;
    let mut set = ConfidenceSet::from_components(Method::Ec, alpha, comps)?;
    let boundary = cal.boundary();
    let in_set = set.contains(boundary);
    let z_boundary = cal.z_ec(design, outcome, boundary)?.value;
    set.margin_delta0 = Some(cal.delta0_margin);
    set.boundary_check = Some(BoundaryCheck {
        boundary,
        in_set,
        p_exact: cal.p_exact,
        consistent: in_set == (cal.p_exact >= alpha / 2.0),
        excluded_below: !in_set && z_boundary >= z_crit,
    });
    Ok(set)
}

/// EC confidence set: `{Δ : |Z_EC(Δ)| < z_{1-α/2}}`, reported component by
/// component because `Z_EC` need not be monotone.
pub fn invert_ec(
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    alpha: f64,
    options: &InversionOptions,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    let cal = calibrate_ec(design, outcome, margin, options.exact)?;
    invert_ec_calibrated(&cal, design, outcome, alpha, options)
}

/// Any method by tag; `margin` is required for EC.
pub fn invert(
    method: Method,
    design: TrialDesign,
    outcome: Outcome,
    alpha: f64,
    margin: Option<f64>,
    options: &InversionOptions,
) -> Result<ConfidenceSet> {
    match method {
        Method::CzExact => invert_cz_exact(design, outcome, alpha, options),
        Method::Ec => {
            let margin =
                margin.ok_or_else(|| Error::Usage("the ec method needs a margin".into()))?;
            invert_ec(design, outcome, margin, alpha, options)
        }
        other => invert_asymptotic(
            other.asymptotic().expect("asymptotic method"),
            design,
            outcome,
            alpha,
            options,
        ),
    }
}

/// Noninferiority verdict at margin `δ₀` and the p-value it rests on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub reject: bool,
    pub p_used: f64,
}

/// Tests `H0: d ≤ -δ₀` at one-sided level `alpha/2`.
///
/// Asymptotic methods and EC reject when the boundary is excluded on the
/// noninferiority side of their acceptance set, i.e. when the statistic at
/// `-δ₀` reaches `z_{1-α/2}`. The exact method rejects when `-δ₀` lies
/// below the gap-filled interval.
pub fn noninferiority_decision(
    method: Method,
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    alpha: f64,
    options: &InversionOptions,
) -> Result<Decision> {
    let z_crit = critical_value(alpha)?;
    // A zero margin is a superiority test; EC needs a positive one.
    let lowest_ok = if method == Method::Ec {
        margin > 0.0
    } else {
        margin >= 0.0
    };
    if !(lowest_ok && margin < 1.0) {
        return Err(domain(format!("margin {margin} outside the allowed range")));
    }
    let boundary = -margin;
    match method {
        Method::CzExact => {
            let set = invert_cz_exact(design, outcome, alpha, options)?;
            let p = ExactWorkspace::new(design, boundary, options.exact)?
                .pvalue(outcome, TailDirection::Upper);
            Ok(Decision {
                reject: boundary < set.hull.lo,
                p_used: p.value,
            })
        }
        Method::Ec => {
            let cal = calibrate_ec(design, outcome, margin, options.exact)?;
            let z = cal.z_ec(design, outcome, boundary)?;
            Ok(Decision {
                reject: z.value >= z_crit,
                p_used: cal.p_exact,
            })
        }
        other => {
            let z = other
                .asymptotic()
                .expect("asymptotic method")
                .statistic(design, outcome, boundary)?;
            Ok(Decision {
                reject: z.value >= z_crit,
                p_used: upper_tail(z),
            })
        }
    }
}
