//! Chan's exact unconditional test: tail probability of the outcomes at
//! least as extreme as the observed one under the score ordering,
//! maximized over the control probability on the null boundary.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::prob::{
    enumerate_outcomes, nuisance_domain, JointModel, LogFactorials, Outcome, TrialDesign,
};
use crate::score::{unrestricted_estimate, z_mee, StatValue};

/// Relative slack under which two finite statistic values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Which side of the observed statistic forms the rejection tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailDirection {
    /// `Z ≥ Z_obs`, testing `H0: d ≤ Δ0` (the noninferiority direction).
    Upper,
    /// `Z ≤ Z_obs`, testing `H0: d ≥ Δ0`.
    Lower,
}

/// Nuisance-search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactOptions {
    pub grid_points: usize,
    pub refine_tol: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            grid_points: 1001,
            refine_tol: 1e-10,
        }
    }
}

impl ExactOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(domain(format!(
                "grid_points must be at least 2, got {}",
                self.grid_points
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(domain(format!(
                "refine_tol must be positive, got {}",
                self.refine_tol
            )));
        }
        Ok(())
    }
}

/// Exact p-value together with the nuisance value that attains it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactPValue {
    pub value: f64,
    pub argmax_p_c: f64,
    pub grid_points: usize,
    pub refine_tol: f64,
    pub boundary_delta: f64,
}

/// Outcomes at least as extreme as the observed one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSet {
    pub outcomes: Vec<Outcome>,
    pub threshold: StatValue,
}

/// Position of an outcome in the score ordering at a fixed `Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrderKey {
    z: f64,
    d_hat: f64,
}

impl OrderKey {
    /// `self` is at least as large as `other`, with finite near-ties
    /// counted as equal and infinite ties resolved by the point estimate.
    fn at_least(self, other: Self) -> bool {
        if self.z.is_finite() && other.z.is_finite() {
            return self.z >= other.z - TIE_TOLERANCE * other.z.abs().max(1.0);
        }
        if self.z != other.z {
            return self.z > other.z;
        }
        self.d_hat >= other.d_hat - TIE_TOLERANCE
    }

    fn at_most(self, other: Self) -> bool {
        if self.z.is_finite() && other.z.is_finite() {
            return self.z <= other.z + TIE_TOLERANCE * other.z.abs().max(1.0);
        }
        if self.z != other.z {
            return self.z < other.z;
        }
        self.d_hat <= other.d_hat + TIE_TOLERANCE
    }

    fn as_extreme(self, observed: Self, direction: TailDirection) -> bool {
        match direction {
            TailDirection::Upper => self.at_least(observed),
            TailDirection::Lower => self.at_most(observed),
        }
    }
}

/// Score statistics of every outcome at one hypothesized difference.
#[derive(Debug, Clone)]
pub(crate) struct ScoreOrdering {
    design: TrialDesign,
    outcomes: Vec<Outcome>,
    stats: Vec<StatValue>,
    keys: Vec<OrderKey>,
}

impl ScoreOrdering {
    pub(crate) fn new(design: TrialDesign, delta: f64) -> Result<Self> {
        let outcomes = enumerate_outcomes(design);
        let mut stats = Vec::with_capacity(outcomes.len());
        let mut keys = Vec::with_capacity(outcomes.len());
        for &y in &outcomes {
            let z = z_mee(design, y, delta)?;
            stats.push(z);
            keys.push(OrderKey {
                z: z.value,
                d_hat: unrestricted_estimate(design, y),
            });
        }
        Ok(Self {
            design,
            outcomes,
            stats,
            keys,
        })
    }

    fn members(&self, observed: usize, direction: TailDirection) -> Vec<usize> {
        let obs = self.keys[observed];
        (0..self.keys.len())
            .filter(|&i| self.keys[i].as_extreme(obs, direction))
            .collect()
    }

    fn tail(&self, observed: usize, direction: TailDirection) -> TailIndex {
        TailIndex::new(&self.members(observed, direction), &self.outcomes)
    }
}

/// Tail members grouped by treatment count for row-wise summation.
#[derive(Debug, Clone)]
struct TailIndex {
    rows: Vec<(usize, Vec<usize>)>,
}

impl TailIndex {
    fn new(members: &[usize], outcomes: &[Outcome]) -> Self {
        let mut rows: Vec<(usize, Vec<usize>)> = Vec::new();
        for &i in members {
            let y = outcomes[i];
            let (a, b) = (y.x_t() as usize, y.x_c() as usize);
            match rows.last_mut() {
                Some((row, cols)) if *row == a => cols.push(b),
                _ => rows.push((a, vec![b])),
            }
        }
        Self { rows }
    }

    fn covers_everything(&self, design: TrialDesign) -> bool {
        self.rows.iter().map(|(_, c)| c.len()).sum::<usize>() == design.outcome_count()
    }

    fn sum(&self, pmf_t: &[f64], pmf_c: &[f64]) -> f64 {
        let mut total = 0.0;
        for (a, cols) in &self.rows {
            let inner: f64 = cols.iter().map(|&b| pmf_c[b]).sum();
            total += pmf_t[*a] * inner;
        }
        total
    }
}

/// Binomial rows on a uniform grid of the nuisance domain at one `Δ`.
#[derive(Debug, Clone)]
pub(crate) struct NuisanceGrid {
    design: TrialDesign,
    delta: f64,
    lo: f64,
    hi: f64,
    points: Vec<f64>,
    rows_t: Vec<Vec<f64>>,
    rows_c: Vec<Vec<f64>>,
    table: LogFactorials,
}

impl NuisanceGrid {
    pub(crate) fn new(design: TrialDesign, delta: f64, grid_points: usize) -> Result<Self> {
        let (lo, hi) = nuisance_domain(delta)?;
        let table = LogFactorials::new(design.n_t().max(design.n_c()));
        let last = (grid_points - 1) as f64;
        let points: Vec<f64> = (0..grid_points)
            .map(|i| {
                if i + 1 == grid_points {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64 / last)
                }
            })
            .collect();
        let mut rows_t = Vec::with_capacity(grid_points);
        let mut rows_c = Vec::with_capacity(grid_points);
        for &p in &points {
            let (rt, rc) = pmf_rows(&table, design, delta, p);
            rows_t.push(rt);
            rows_c.push(rc);
        }
        Ok(Self {
            design,
            delta,
            lo,
            hi,
            points,
            rows_t,
            rows_c,
            table,
        })
    }

    fn tail_at(&self, tail: &TailIndex, p_c: f64) -> f64 {
        let (rt, rc) = pmf_rows(&self.table, self.design, self.delta, p_c);
        tail.sum(&rt, &rc)
    }

    /// Grid scan followed by golden-section refinement around every
    /// grid-local maximum, endpoints included.
    fn supremum(&self, tail: &TailIndex, refine_tol: f64) -> (f64, f64) {
        let values: Vec<f64> = self
            .rows_t
            .iter()
            .zip(&self.rows_c)
            .map(|(rt, rc)| tail.sum(rt, rc))
            .collect();
        let n = values.len();
        let mut best = (values[0], self.points[0]);
        for i in 0..n {
            if values[i] > best.0 {
                best = (values[i], self.points[i]);
            }
        }
        for i in 0..n {
            let rising = i == 0 || values[i] > values[i - 1];
            let peak = i + 1 == n || values[i] >= values[i + 1];
            if !(rising && peak) {
                continue;
            }
            let a = if i == 0 { self.lo } else { self.points[i - 1] };
            let b = if i + 1 == n {
                self.hi
            } else {
                self.points[i + 1]
            };
            let found = golden_max(|p| self.tail_at(tail, p), a, b, refine_tol);
            if found.0 > best.0 {
                best = found;
            }
        }
        best
    }
}

fn pmf_rows(
    table: &LogFactorials,
    design: TrialDesign,
    delta: f64,
    p_c: f64,
) -> (Vec<f64>, Vec<f64>) {
    let p_t = (p_c + delta).clamp(0.0, 1.0);
    let mut rt = Vec::with_capacity(design.n_t() as usize + 1);
    let mut rc = Vec::with_capacity(design.n_c() as usize + 1);
    table.pmf_row_into(design.n_t(), p_t, &mut rt);
    table.pmf_row_into(design.n_c(), p_c, &mut rc);
    (rt, rc)
}

/// Golden-section search for a maximum on `[a, b]`; returns the best
/// `(value, argument)` seen.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (f1, x1) } else { (f2, x2) };
    // 200 steps shrink any unit interval below f64 resolution.
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
            if f1 > best.0 {
                best = (f1, x1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
            if f2 > best.0 {
                best = (f2, x2);
            }
        }
    }
    best
}

/// Everything needed to compute exact p-values of any outcome at one `Δ`.
#[derive(Debug, Clone)]
pub(crate) struct ExactWorkspace {
    ordering: ScoreOrdering,
    grid: NuisanceGrid,
    options: ExactOptions,
}

impl ExactWorkspace {
    pub(crate) fn new(design: TrialDesign, delta: f64, options: ExactOptions) -> Result<Self> {
        if !(delta > -1.0 && delta < 1.0) {
            return Err(domain(format!("null boundary {delta} outside (-1, 1)")));
        }
        options.validate()?;
        Ok(Self {
            ordering: ScoreOrdering::new(design, delta)?,
            grid: NuisanceGrid::new(design, delta, options.grid_points)?,
            options,
        })
    }

    pub(crate) fn pvalue(&self, observed: Outcome, direction: TailDirection) -> ExactPValue {
        let design = self.ordering.design;
        let tail = self.ordering.tail(design.index_of(observed), direction);
        let (value, argmax) = if tail.covers_everything(design) {
            (1.0, self.grid.lo)
        } else {
            self.grid.supremum(&tail, self.options.refine_tol)
        };
        ExactPValue {
            value: value.clamp(0.0, 1.0),
            argmax_p_c: argmax,
            grid_points: self.options.grid_points,
            refine_tol: self.options.refine_tol,
            boundary_delta: self.grid.delta,
        }
    }
}

/// Outcomes with `Z_Δ0(y) ≥ Z_Δ0(observed)`, ties included.
pub fn tail_set(design: TrialDesign, observed: Outcome, delta0: f64) -> Result<TailSet> {
    tail_set_directed(design, observed, delta0, TailDirection::Upper)
}

pub fn tail_set_directed(
    design: TrialDesign,
    observed: Outcome,
    delta0: f64,
    direction: TailDirection,
) -> Result<TailSet> {
    let ordering = ScoreOrdering::new(design, delta0)?;
    let obs = design.index_of(observed);
    let outcomes = ordering
        .members(obs, direction)
        .into_iter()
        .map(|i| ordering.outcomes[i])
        .collect();
    Ok(TailSet {
        outcomes,
        threshold: ordering.stats[obs],
    })
}

/// Probability of the tail under `model`, accumulated in log space.
pub fn tail_prob(design: TrialDesign, tail: &TailSet, model: JointModel) -> f64 {
    let table = LogFactorials::new(design.n_t().max(design.n_c()));
    let lt = table.log_pmf_row(design.n_t(), model.p_t());
    let lc = table.log_pmf_row(design.n_c(), model.p_c());
    let terms: Vec<f64> = tail
        .outcomes
        .iter()
        .map(|y| lt[y.x_t() as usize] + lc[y.x_c() as usize])
        .collect();
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return 0.0;
    }
    let scaled: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    (peak + scaled.ln()).exp()
}

/// Chan's exact p-value for `H0: d ≤ Δ0` against `H1: d > Δ0`.
pub fn exact_pvalue(
    design: TrialDesign,
    observed: Outcome,
    delta0: f64,
    options: ExactOptions,
) -> Result<ExactPValue> {
    exact_pvalue_directed(design, observed, delta0, TailDirection::Upper, options)
}

/// Exact p-value in either direction; `Lower` tests `H0: d ≥ Δ0`.
pub fn exact_pvalue_directed(
    design: TrialDesign,
    observed: Outcome,
    delta0: f64,
    direction: TailDirection,
    options: ExactOptions,
) -> Result<ExactPValue> {
    Ok(ExactWorkspace::new(design, delta0, options)?.pvalue(observed, direction))
}
