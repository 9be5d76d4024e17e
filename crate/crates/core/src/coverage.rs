//! Exact coverage and expected width of confidence intervals by full
//! enumeration of the outcome space.

use serde::Serialize;

use crate::ci::{invert, invert_cz_exact_all, ConfidenceSet, InversionOptions, Method};
use crate::diagnostics::for_each_outcome;
use crate::error::{domain, Error, Result};
use crate::prob::{enumerate_outcomes, LogFactorials, Outcome, TrialDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageCell {
    pub p_t: f64,
    pub p_c: f64,
    pub coverage: f64,
    pub expected_width: f64,
    pub method: Method,
    pub alpha: f64,
    pub margin: Option<f64>,
}

/// Confidence sets for every outcome of a design, computed once.
///
/// Outcomes whose EC calibration is degenerate, or whose acceptance set is
/// empty, have no interval; they contribute zero coverage and zero width.
#[derive(Debug, Clone)]
pub struct CoverageEvaluator {
    method: Method,
    design: TrialDesign,
    alpha: f64,
    margin: Option<f64>,
    sets: Vec<Option<ConfidenceSet>>,
    use_components: bool,
    table: LogFactorials,
}

impl CoverageEvaluator {
    pub fn new(
        method: Method,
        design: TrialDesign,
        alpha: f64,
        margin: Option<f64>,
        options: &InversionOptions,
    ) -> Result<Self> {
        if method == Method::Ec && margin.is_none() {
            return Err(Error::Usage(
                "coverage of the ec method needs a margin".into(),
            ));
        }
        let sets = match method {
            Method::CzExact => invert_cz_exact_all(design, alpha, options)?
                .into_iter()
                .map(Some)
                .collect(),
            _ => for_each_outcome(design, |y| {
                match invert(method, design, y, alpha, margin, options) {
                    Ok(set) => Ok(Some(set)),
                    Err(Error::DegenerateCalibration { .. } | Error::EmptyConfidenceSet { .. }) => {
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            })?,
        };
        Ok(Self {
            method,
            design,
            alpha,
            margin,
            sets,
            use_components: false,
            table: LogFactorials::new(design.n_t().max(design.n_c())),
        })
    }

    /// Score the raw (possibly disconnected) sets instead of their hulls.
    pub fn use_components(mut self, yes: bool) -> Self {
        self.use_components = yes;
        self
    }

    pub fn set_for(&self, outcome: Outcome) -> Option<&ConfidenceSet> {
        self.sets[self.design.index_of(outcome)].as_ref()
    }

    /// Outcomes without an interval.
    pub fn outcomes_without_interval(&self) -> Vec<Outcome> {
        enumerate_outcomes(self.design)
            .into_iter()
            .zip(&self.sets)
            .filter(|(_, s)| s.is_none())
            .map(|(y, _)| y)
            .collect()
    }

    /// Coverage of `p_T - p_C` and expected width at one parameter point.
    pub fn cell(&self, p_t: f64, p_c: f64) -> Result<CoverageCell> {
        if !(0.0..=1.0).contains(&p_t) || !(0.0..=1.0).contains(&p_c) {
            return Err(domain(format!(
                "probabilities ({p_t}, {p_c}) outside [0, 1]"
            )));
        }
        let truth = p_t - p_c;
        let row_t: Vec<f64> = self
            .table
            .log_pmf_row(self.design.n_t(), p_t)
            .into_iter()
            .map(f64::exp)
            .collect();
        let row_c: Vec<f64> = self
            .table
            .log_pmf_row(self.design.n_c(), p_c)
            .into_iter()
            .map(f64::exp)
            .collect();
        let mut coverage = 0.0;
        let mut width = 0.0;
        for (y, set) in enumerate_outcomes(self.design).into_iter().zip(&self.sets) {
            let Some(set) = set else { continue };
            let prob = row_t[y.x_t() as usize] * row_c[y.x_c() as usize];
            if prob == 0.0 {
                continue;
            }
            let (covered, w) = if self.use_components {
                (
                    set.components_cover(truth),
                    set.components.iter().map(|c| c.width()).sum::<f64>(),
                )
            } else {
                (set.hull_covers(truth), set.hull.width())
            };
            if covered {
                coverage += prob;
            }
            width += prob * w;
        }
        Ok(CoverageCell {
            p_t,
            p_c,
            coverage: coverage.min(1.0),
            expected_width: width,
            method: self.method,
            alpha: self.alpha,
            margin: self.margin,
        })
    }
}

/// Coverage of one method at one parameter point.
pub fn exact_coverage(
    method: Method,
    design: TrialDesign,
    p_t: f64,
    p_c: f64,
    alpha: f64,
    margin: Option<f64>,
    options: &InversionOptions,
) -> Result<CoverageCell> {
    CoverageEvaluator::new(method, design, alpha, margin, options)?.cell(p_t, p_c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSurface {
    pub method: Method,
    pub design: TrialDesign,
    pub alpha: f64,
    pub margin: Option<f64>,
    pub step: f64,
    pub cells: Vec<CoverageCell>,
    pub min_coverage: f64,
    pub argmin: CoverageCell,
    pub mean_coverage: f64,
    pub max_expected_width: f64,
    pub outcomes_without_interval: Vec<Outcome>,
}

/// Probability grid `0, step, …, 1`. When `1/step` is (nearly) an integer
/// `m` the points are `j/m`, so round values such as `0.15` are exact.
pub fn probability_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(domain(format!("grid step {step} outside (0, 0.5]")));
    }
    let m = (1.0 / step).round();
    if ((1.0 / step) - m).abs() < 1e-9 {
        let m = m as usize;
        return Ok((0..=m).map(|j| j as f64 / m as f64).collect());
    }
    let n = (1.0 / step).floor() as usize;
    Ok((0..=n).map(|j| j as f64 * step).collect())
}

/// Coverage over every `(p_T, p_C)` pair of the probability grid,
/// `p_T` outer.
pub fn coverage_surface(
    method: Method,
    design: TrialDesign,
    step: f64,
    alpha: f64,
    margin: Option<f64>,
    options: &InversionOptions,
) -> Result<CoverageSurface> {
    let grid = probability_grid(step)?;
    let evaluator = CoverageEvaluator::new(method, design, alpha, margin, options)?;
    surface_from_evaluator(&evaluator, &grid, step)
}

pub fn surface_from_evaluator(
    evaluator: &CoverageEvaluator,
    grid: &[f64],
    step: f64,
) -> Result<CoverageSurface> {
    let mut cells = Vec::with_capacity(grid.len() * grid.len());
    for &p_t in grid {
        for &p_c in grid {
            cells.push(evaluator.cell(p_t, p_c)?);
        }
    }
    let argmin = *cells
        .iter()
        .min_by(|a, b| a.coverage.total_cmp(&b.coverage))
        .ok_or_else(|| domain("empty probability grid"))?;
    let mean_coverage = cells.iter().map(|c| c.coverage).sum::<f64>() / cells.len() as f64;
    let max_expected_width = cells.iter().map(|c| c.expected_width).fold(0.0, f64::max);
    Ok(CoverageSurface {
        method: evaluator.method,
        design: evaluator.design,
        alpha: evaluator.alpha,
        margin: evaluator.margin,
        step,
        min_coverage: argmin.coverage,
        argmin,
        mean_coverage,
        max_expected_width,
        outcomes_without_interval: evaluator.outcomes_without_interval(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_grid_hits_round_values() {
        let g = probability_grid(0.05).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[20], 1.0);
        assert!(probability_grid(0.0).is_err());
        assert!(probability_grid(0.7).is_err());
    }

    #[test]
    fn point_mass_model() {
        let d = TrialDesign::new(4, 4).unwrap();
        let ev = CoverageEvaluator::new(Method::Mee, d, 0.05, None, &Default::default()).unwrap();
        let cell = ev.cell(0.0, 0.0).unwrap();
        let expect = if ev
            .set_for(d.outcome(0, 0).unwrap())
            .unwrap()
            .hull_covers(0.0)
        {
            1.0
        } else {
            0.0
        };
        assert_eq!(cell.coverage, expect);
    }

    #[test]
    fn ec_without_margin_is_a_usage_error() {
        let d = TrialDesign::new(3, 3).unwrap();
        let err =
            CoverageEvaluator::new(Method::Ec, d, 0.05, None, &Default::default()).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn ec_outcomes_without_interval_are_listed() {
        let d = TrialDesign::new(3, 3).unwrap();
        let ev =
            CoverageEvaluator::new(Method::Ec, d, 0.05, Some(0.1), &Default::default()).unwrap();
        assert!(ev
            .outcomes_without_interval()
            .contains(&d.outcome(0, 3).unwrap()));
        let cell = ev.cell(0.0, 1.0).unwrap();
        assert_eq!(cell.coverage, 0.0);
    }
}
