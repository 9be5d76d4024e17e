//! Scanners that detect non-monotone statistics, non-monotone exact
//! p-values, incoherent margin decisions and non-nested confidence sets.
//!
//! Every finding is returned as a [`ViolationCertificate`] whose witness
//! values can be recomputed from scratch with [`ViolationCertificate::verify`].

use serde::Serialize;

use crate::ci::{invert, scan_grid, InversionOptions, Method};
use crate::ec::calibrate_ec;
use crate::error::{domain, Result};
use crate::exact::{exact_pvalue, ExactOptions};
use crate::prob::{enumerate_outcomes, Outcome, TrialDesign};
use crate::score::p_asy;

/// Slack used by the monotonicity scanners.
pub const MONOTONICITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    ZecNonmonotone,
    PexactNonmonotone,
    MarginIncoherence,
    NestingFailure,
}

/// The concrete values that exhibit a violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// Three increasing margin-scale points `δ = -Δ` whose middle value is a
    /// strict local minimum or maximum of `Z_EC`.
    ZecTriple {
        margin: f64,
        deltas: [f64; 3],
        values: [f64; 3],
    },
    /// Two increasing boundaries `Δ₀` at which the exact p-value decreases.
    PexactPair {
        boundaries: [f64; 2],
        p_values: [f64; 2],
    },
    /// Margins `δ₀ < δ̄₀`: rejected at the smaller, not at the larger.
    MarginPair {
        alpha: f64,
        margins: [f64; 2],
        p_values: [f64; 2],
    },
    /// A difference inside the `1 - alpha_hi` set but outside the
    /// `1 - alpha_lo` set.
    Nesting {
        method: Method,
        margin: Option<f64>,
        alpha_hi: f64,
        alpha_lo: f64,
        delta: f64,
        hull: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationCertificate {
    pub kind: ViolationKind,
    pub design: TrialDesign,
    pub outcome: Outcome,
    pub witness: Witness,
    pub tolerance_used: f64,
}

impl ViolationCertificate {
    /// Recomputes the witness quantities and checks the claimed inequality
    /// still holds with at least `tolerance_used` to spare.
    pub fn verify(&self, options: &InversionOptions) -> Result<bool> {
        let (design, outcome, tol) = (self.design, self.outcome, self.tolerance_used);
        match &self.witness {
            Witness::ZecTriple { margin, deltas, .. } => {
                let cal = calibrate_ec(design, outcome, *margin, options.exact)?;
                let mut z = [0.0; 3];
                for (slot, d) in z.iter_mut().zip(deltas) {
                    *slot = cal.z_ec(design, outcome, -d)?.value;
                }
                Ok(is_interior_extremum(z, tol))
            }
            Witness::PexactPair { boundaries, .. } => {
                let a = exact_pvalue(design, outcome, boundaries[0], options.exact)?.value;
                let b = exact_pvalue(design, outcome, boundaries[1], options.exact)?.value;
                Ok(boundaries[0] < boundaries[1] && a - b > tol)
            }
            Witness::MarginPair { alpha, margins, .. } => {
                let a = exact_pvalue(design, outcome, -margins[0], options.exact)?.value;
                let b = exact_pvalue(design, outcome, -margins[1], options.exact)?.value;
                Ok(margins[0] < margins[1] && a < alpha / 2.0 - tol && b >= alpha / 2.0)
            }
            Witness::Nesting {
                method,
                margin,
                alpha_hi,
                alpha_lo,
                delta,
                hull,
            } => {
                let narrow = invert(*method, design, outcome, *alpha_hi, *margin, options)?;
                let wide = invert(*method, design, outcome, *alpha_lo, *margin, options)?;
                Ok(if *hull {
                    narrow.hull.contains(*delta) && !wide.hull.contains(*delta)
                } else {
                    narrow.contains(*delta) && !wide.contains(*delta)
                })
            }
        }
    }
}

fn is_interior_extremum(z: [f64; 3], tol: f64) -> bool {
    z[1] < z[0].min(z[2]) - tol || z[1] > z[0].max(z[2]) + tol
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Certifies every adjacent triple of `delta_grid` (margin scale, sorted
/// ascending) where `Z_EC` has a strict interior minimum or maximum.
pub fn scan_zec_monotonicity(
    design: TrialDesign,
    outcome: Outcome,
    margin: f64,
    delta_grid: &[f64],
    options: ExactOptions,
) -> Result<Vec<ViolationCertificate>> {
    let cal = calibrate_ec(design, outcome, margin, options)?;
    let values = delta_grid
        .iter()
        .map(|&d| cal.z_ec(design, outcome, -d).map(|z| z.value))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 1..delta_grid.len().saturating_sub(1) {
        let z = [values[i - 1], values[i], values[i + 1]];
        if is_interior_extremum(z, MONOTONICITY_TOL) {
            out.push(ViolationCertificate {
                kind: ViolationKind::ZecNonmonotone,
                design,
                outcome,
                witness: Witness::ZecTriple {
                    margin,
                    deltas: [delta_grid[i - 1], delta_grid[i], delta_grid[i + 1]],
                    values: z,
                },
                tolerance_used: MONOTONICITY_TOL,
            });
        }
    }
    Ok(out)
}

/// Exact p-values as a function of the boundary `Δ₀` should not decrease;
/// certifies every adjacent pair of the (ascending) grid where they do.
pub fn scan_pexact_monotonicity(
    design: TrialDesign,
    outcome: Outcome,
    boundary_grid: &[f64],
    options: ExactOptions,
) -> Result<Vec<ViolationCertificate>> {
    let p = boundary_grid
        .iter()
        .map(|&b| exact_pvalue(design, outcome, b, options).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..boundary_grid.len().saturating_sub(1) {
        if boundary_grid[i] < boundary_grid[i + 1] && p[i] - p[i + 1] > MONOTONICITY_TOL {
            out.push(ViolationCertificate {
                kind: ViolationKind::PexactNonmonotone,
                design,
                outcome,
                witness: Witness::PexactPair {
                    boundaries: [boundary_grid[i], boundary_grid[i + 1]],
                    p_values: [p[i], p[i + 1]],
                },
                tolerance_used: MONOTONICITY_TOL,
            });
        }
    }
    Ok(out)
}

/// Certifies every margin pair `δ₀ < δ̄₀` where the exact test rejects at
/// `δ₀` but not at the more lenient `δ̄₀`.
pub fn scan_margin_coherence(
    design: TrialDesign,
    outcome: Outcome,
    alpha: f64,
    margins: &[f64],
    options: ExactOptions,
) -> Result<Vec<ViolationCertificate>> {
    check_alpha(alpha)?;
    if let Some(m) = margins.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
        return Err(domain(format!("margin {m} outside (0, 1)")));
    }
    let mut sorted = margins.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let p = sorted
        .iter()
        .map(|&m| exact_pvalue(design, outcome, -m, options).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let level = alpha / 2.0;
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if p[i] < level && p[j] >= level {
                out.push(ViolationCertificate {
                    kind: ViolationKind::MarginIncoherence,
                    design,
                    outcome,
                    witness: Witness::MarginPair {
                        alpha,
                        margins: [sorted[i], sorted[j]],
                        p_values: [p[i], p[j]],
                    },
                    tolerance_used: 0.0,
                });
            }
        }
    }
    Ok(out)
}

/// Searches for differences covered at a lower confidence level but not at
/// a higher one, for both the raw sets and their hulls. Candidates are the
/// component endpoints of both sets plus a 4001-point grid; one
/// certificate is kept per alpha pair and set type.
pub fn scan_ci_nesting(
    method: Method,
    design: TrialDesign,
    outcome: Outcome,
    margin: Option<f64>,
    alpha_pairs: &[(f64, f64)],
    options: &InversionOptions,
) -> Result<Vec<ViolationCertificate>> {
    let mut out = Vec::new();
    for &(alpha_hi, alpha_lo) in alpha_pairs {
        check_alpha(alpha_hi)?;
        check_alpha(alpha_lo)?;
        if !(alpha_hi > alpha_lo) {
            return Err(domain(format!(
                "alpha pair ({alpha_hi}, {alpha_lo}) must have alpha_hi > alpha_lo"
            )));
        }
        let narrow = invert(method, design, outcome, alpha_hi, margin, options)?;
        let wide = invert(method, design, outcome, alpha_lo, margin, options)?;
        let mut candidates = scan_grid(4001);
        for set in [&narrow, &wide] {
            for c in &set.components {
                candidates.push(c.lo);
                candidates.push(c.hi);
            }
        }
        candidates.sort_by(f64::total_cmp);
        for hull in [false, true] {
            let hit = candidates.iter().copied().find(|&d| {
                if hull {
                    narrow.hull.contains(d) && !wide.hull.contains(d)
                } else {
                    narrow.contains(d) && !wide.contains(d)
                }
            });
            if let Some(delta) = hit {
                out.push(ViolationCertificate {
                    kind: ViolationKind::NestingFailure,
                    design,
                    outcome,
                    witness: Witness::Nesting {
                        method,
                        margin,
                        alpha_hi,
                        alpha_lo,
                        delta,
                        hull,
                    },
                    tolerance_used: options.bisect_tol,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// Asymptotic p-value below the exact one.
    Liberal,
    Conservative,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapRow {
    pub outcome: Outcome,
    pub p_asy: f64,
    pub p_exact: f64,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiberalConservativeMap {
    pub design: TrialDesign,
    pub boundary: f64,
    pub rows: Vec<MapRow>,
    pub liberal: usize,
    pub conservative: usize,
    pub equal: usize,
    pub liberal_fraction: f64,
}

/// Mee versus exact p-values at boundary `Δ₀` for every outcome.
pub fn liberal_conservative_map(
    design: TrialDesign,
    boundary: f64,
    options: ExactOptions,
) -> Result<LiberalConservativeMap> {
    let rows = for_each_outcome(design, |y| {
        let pa = p_asy(design, y, boundary)?;
        let pe = exact_pvalue(design, y, boundary, options)?.value;
        let relation = if pa < pe {
            Relation::Liberal
        } else if pa > pe {
            Relation::Conservative
        } else {
            Relation::Equal
        };
        Ok(MapRow {
            outcome: y,
            p_asy: pa,
            p_exact: pe,
            relation,
        })
    })?;
    let count = |r: Relation| rows.iter().filter(|row| row.relation == r).count();
    let (liberal, conservative, equal) = (
        count(Relation::Liberal),
        count(Relation::Conservative),
        count(Relation::Equal),
    );
    Ok(LiberalConservativeMap {
        design,
        boundary,
        liberal_fraction: liberal as f64 / rows.len() as f64,
        rows,
        liberal,
        conservative,
        equal,
    })
}

/// Applies `f` to every outcome of the design, in parallel when enabled,
/// returning results in enumeration order.
pub fn for_each_outcome<T, F>(design: TrialDesign, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Outcome) -> Result<T> + Sync + Send,
{
    let outcomes = enumerate_outcomes(design);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        outcomes.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        outcomes.into_iter().map(f).collect()
    }
}

/// Runs a per-outcome scanner over the whole design and concatenates the
/// certificates in lexicographic outcome order.
pub fn scan_all_outcomes<F>(design: TrialDesign, scanner: F) -> Result<Vec<ViolationCertificate>>
where
    F: Fn(Outcome) -> Result<Vec<ViolationCertificate>> + Sync + Send,
{
    Ok(for_each_outcome(design, scanner)?
        .into_iter()
        .flatten()
        .collect())
}

/// `n` evenly spaced values from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![from],
        _ => {
            let last = (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        to
                    } else {
                        from + (to - from) * (i as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Values `from, from + step, …` up to `to` (inclusive within 1e-9 of a step).
pub fn stepped(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| from + step * i as f64).collect()
}
