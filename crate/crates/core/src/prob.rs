//! Binomial probability primitives, outcome enumeration and the standard
//! normal distribution functions used by the score and exact methods.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::error::{domain, Result};

/// Slack allowed when checking that `p_C + Δ` stays inside `[0, 1]`.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Arm sizes of a two-arm trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TrialDesign {
    n_t: u32,
    n_c: u32,
}

impl TrialDesign {
    pub fn new(n_t: u32, n_c: u32) -> Result<Self> {
        if n_t == 0 || n_c == 0 {
            return Err(domain(format!(
                "arm sizes must be positive, got ({n_t}, {n_c})"
            )));
        }
        Ok(Self { n_t, n_c })
    }

    pub fn n_t(&self) -> u32 {
        self.n_t
    }

    pub fn n_c(&self) -> u32 {
        self.n_c
    }

    /// Total sample size `n_T + n_C`.
    pub fn total(&self) -> u32 {
        self.n_t + self.n_c
    }

    /// Number of points in the joint outcome space.
    pub fn outcome_count(&self) -> usize {
        (self.n_t as usize + 1) * (self.n_c as usize + 1)
    }

    /// Position of `outcome` in [`enumerate_outcomes`] order.
    pub fn index_of(&self, outcome: Outcome) -> usize {
        outcome.x_t as usize * (self.n_c as usize + 1) + outcome.x_c as usize
    }

    /// Validates a pair of counts against this design.
    pub fn outcome(&self, x_t: u32, x_c: u32) -> Result<Outcome> {
        if x_t > self.n_t || x_c > self.n_c {
            return Err(domain(format!(
                "counts ({x_t}, {x_c}) exceed arm sizes ({}, {})",
                self.n_t, self.n_c
            )));
        }
        Ok(Outcome { x_t, x_c })
    }
}

/// Observed success counts in the treatment and control arms.
///
/// Construct through [`TrialDesign::outcome`] so the counts are checked
/// against the arm sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Outcome {
    x_t: u32,
    x_c: u32,
}

impl Outcome {
    pub fn x_t(&self) -> u32 {
        self.x_t
    }

    pub fn x_c(&self) -> u32 {
        self.x_c
    }
}

/// Product-binomial model with control probability `p_C` and
/// treatment probability `p_C + Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointModel {
    p_c: f64,
    delta: f64,
}

impl JointModel {
    pub fn new(p_c: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_c) || !(-1.0..=1.0).contains(&delta) {
            return Err(domain(format!("infeasible model p_C={p_c}, delta={delta}")));
        }
        let p_t = p_c + delta;
        if !(-FEASIBILITY_SLACK..=1.0 + FEASIBILITY_SLACK).contains(&p_t) {
            return Err(domain(format!(
                "treatment probability {p_t} outside [0, 1]"
            )));
        }
        Ok(Self { p_c, delta })
    }

    pub fn p_c(&self) -> f64 {
        self.p_c
    }

    pub fn p_t(&self) -> f64 {
        (self.p_c + self.delta).clamp(0.0, 1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Feasible range of the control probability when `P_T - P_C = delta`.
pub fn nuisance_domain(delta: f64) -> Result<(f64, f64)> {
    let lo = (-delta).max(0.0);
    let hi = (1.0 - delta).min(1.0);
    if !(lo <= hi) {
        return Err(domain(format!("empty nuisance domain for delta={delta}")));
    }
    Ok((lo, hi))
}

/// Table of `ln k!` for `k = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    pub fn new(n_max: u32) -> Self {
        let mut table = Vec::with_capacity(n_max as usize + 1);
        let mut acc = 0.0f64;
        table.push(0.0);
        for k in 1..=n_max {
            acc += f64::from(k).ln();
            table.push(acc);
        }
        Self { table }
    }

    pub fn n_max(&self) -> u32 {
        (self.table.len() - 1) as u32
    }

    pub fn ln_factorial(&self, k: u32) -> f64 {
        self.table[k as usize]
    }

    pub fn ln_choose(&self, n: u32, k: u32) -> f64 {
        self.table[n as usize] - self.table[k as usize] - self.table[(n - k) as usize]
    }

    /// `ln Bin(k; n, p)`, or `-inf` where the mass is exactly zero.
    pub fn log_binom_pmf(&self, k: u32, n: u32, p: f64) -> Result<f64> {
        if k > n {
            return Err(domain(format!("count {k} exceeds trials {n}")));
        }
        if n > self.n_max() {
            return Err(domain(format!(
                "n={n} exceeds log-factorial table size {}",
                self.n_max()
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.log_pmf_unchecked(k, n, p))
    }

    fn log_pmf_unchecked(&self, k: u32, n: u32, p: f64) -> f64 {
        if p == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if p == 1.0 {
            return if k == n { 0.0 } else { f64::NEG_INFINITY };
        }
        let successes = if k == 0 { 0.0 } else { f64::from(k) * p.ln() };
        let failures = if k == n {
            0.0
        } else {
            f64::from(n - k) * (-p).ln_1p()
        };
        self.ln_choose(n, k) + successes + failures
    }

    /// Log-probabilities of every count `0..=n` at success probability `p`.
    pub fn log_pmf_row(&self, n: u32, p: f64) -> Vec<f64> {
        (0..=n).map(|k| self.log_pmf_unchecked(k, n, p)).collect()
    }

    /// Probabilities of every count `0..=n`, written into `out`.
    pub(crate) fn pmf_row_into(&self, n: u32, p: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..=n).map(|k| self.log_pmf_unchecked(k, n, p).exp()));
    }
}

/// `ln Bin(k; n, p)` computed through a log-factorial table.
pub fn log_binom_pmf(k: u32, n: u32, p: f64) -> Result<f64> {
    LogFactorials::new(n).log_binom_pmf(k, n, p)
}

/// `Bin(x_T; n_T, p_C + Δ) · Bin(x_C; n_C, p_C)`.
pub fn joint_outcome_prob(design: TrialDesign, outcome: Outcome, model: JointModel) -> f64 {
    let table = LogFactorials::new(design.n_t.max(design.n_c));
    let lt = table.log_pmf_unchecked(outcome.x_t, design.n_t, model.p_t());
    let lc = table.log_pmf_unchecked(outcome.x_c, design.n_c, model.p_c());
    (lt + lc).exp()
}

/// All outcomes of the design, `x_T` outer and `x_C` inner.
pub fn enumerate_outcomes(design: TrialDesign) -> Vec<Outcome> {
    (0..=design.n_t)
        .flat_map(|x_t| (0..=design.n_c).map(move |x_c| Outcome { x_t, x_c }))
        .collect()
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal upper tail `1 - Φ(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Quantile function of the standard normal distribution.
///
/// Acklam's rational approximation on the lower half, polished by one
/// Halley step against the erfc-based distribution function. Upper-half
/// quantiles are taken by symmetry through `1 - q`, which is exact there.
pub fn inverse_normal_cdf(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(domain(format!("quantile level {q} outside (0, 1)")));
    }
    if q > 0.5 {
        return Ok(-lower_quantile(1.0 - q));
    }
    Ok(lower_quantile(q))
}

fn lower_quantile(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const Q_LOW: f64 = 0.02425;

    let x = if q < Q_LOW {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        let t = q - 0.5;
        let r = t * t;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * t
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - q;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
