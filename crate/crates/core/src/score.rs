//! Point estimates, the restricted maximum-likelihood estimate of the
//! nuisance parameter, and the Wald / Mee / Miettinen–Nurminen statistics.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::prob::{normal_sf, nuisance_domain, Outcome, TrialDesign};

/// Constrained estimates `(p̃_T, p̃_C)` under `P_T - P_C = Δ` with the
/// resulting score standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestrictedMle {
    pub p_tilde_t: f64,
    pub p_tilde_c: f64,
    pub sigma_hat: f64,
    pub delta: f64,
}

/// A test statistic on the extended real line.
///
/// `degenerate` is set when the standard error in the denominator is zero;
/// the value is then `±inf` (or `0` when the numerator vanishes too).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatValue {
    #[serde(serialize_with = "crate::serialize_extended")]
    pub value: f64,
    pub degenerate: bool,
}

impl StatValue {
    fn from_ratio(numerator: f64, se: f64) -> Self {
        if se > 0.0 {
            return Self {
                value: numerator / se,
                degenerate: false,
            };
        }
        let value = if numerator > 0.0 {
            f64::INFINITY
        } else if numerator < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        Self {
            value,
            degenerate: true,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            degenerate: self.degenerate,
        }
    }
}

/// Large-sample tests of `P_T - P_C = Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AsymptoticMethod {
    /// Unconstrained standard error.
    Wald,
    /// Score statistic with the restricted-MLE standard error.
    Mee,
    /// Mee statistic inflated by `sqrt(N / (N - 1))`.
    Mn,
}

impl AsymptoticMethod {
    pub fn statistic(self, design: TrialDesign, outcome: Outcome, delta: f64) -> Result<StatValue> {
        match self {
            Self::Wald => Ok(z_wald(design, outcome, delta)),
            Self::Mee => z_mee(design, outcome, delta),
            Self::Mn => z_mn(design, outcome, delta),
        }
    }
}

/// `x_T/n_T - x_C/n_C`.
pub fn unrestricted_estimate(design: TrialDesign, outcome: Outcome) -> f64 {
    f64::from(outcome.x_t()) / f64::from(design.n_t())
        - f64::from(outcome.x_c()) / f64::from(design.n_c())
}

/// Maximizes the product-binomial likelihood along `p_T = p_C + Δ`.
///
/// The log-likelihood is concave in `p_C`, so the score is decreasing and
/// a bracketing bisection on its sign converges to the maximizer (or
/// stops at an endpoint when the score does not change sign).
pub fn restricted_mle(design: TrialDesign, outcome: Outcome, delta: f64) -> Result<RestrictedMle> {
    if !(delta > -1.0 && delta < 1.0) {
        return Err(domain(format!(
            "hypothesized difference {delta} outside (-1, 1)"
        )));
    }
    let (lo, hi) = nuisance_domain(delta)?;
    let score = ScoreFn::new(design, outcome, delta);

    let p_c = if score.eval(lo) <= 0.0 {
        lo
    } else if score.eval(hi) >= 0.0 {
        hi
    } else {
        let (mut a, mut b) = (lo, hi);
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break 0.5 * (a + b);
            }
            let s = score.eval(mid);
            if s > 0.0 {
                a = mid;
            } else if s < 0.0 {
                b = mid;
            } else {
                break mid;
            }
        }
    };

    let p_t = (p_c + delta).clamp(0.0, 1.0);
    let sigma_hat = score_se(design, p_t, p_c);
    Ok(RestrictedMle {
        p_tilde_t: p_t,
        p_tilde_c: p_c,
        sigma_hat,
        delta,
    })
}

pub(crate) fn score_se(design: TrialDesign, p_t: f64, p_c: f64) -> f64 {
    (p_t * (1.0 - p_t) / f64::from(design.n_t()) + p_c * (1.0 - p_c) / f64::from(design.n_c()))
        .sqrt()
}

struct ScoreFn {
    x_t: f64,
    f_t: f64,
    x_c: f64,
    f_c: f64,
    delta: f64,
    one_minus_delta: f64,
}

impl ScoreFn {
    fn new(design: TrialDesign, outcome: Outcome, delta: f64) -> Self {
        Self {
            x_t: f64::from(outcome.x_t()),
            f_t: f64::from(design.n_t() - outcome.x_t()),
            x_c: f64::from(outcome.x_c()),
            f_c: f64::from(design.n_c() - outcome.x_c()),
            delta,
            one_minus_delta: 1.0 - delta,
        }
    }

    /// Derivative of the log-likelihood in `p_C`. Zero-count terms are
    /// dropped; the remaining ones are `±inf` at the endpoints where their
    /// probability vanishes.
    fn eval(&self, p: f64) -> f64 {
        // Written so that both endpoints of the domain give exact zeros.
        let p_t = p + self.delta;
        let q_t = self.one_minus_delta - p;
        let q_c = 1.0 - p;
        let mut s = 0.0;
        if self.x_t > 0.0 {
            s += self.x_t / p_t;
        }
        if self.f_t > 0.0 {
            s -= self.f_t / q_t;
        }
        if self.x_c > 0.0 {
            s += self.x_c / p;
        }
        if self.f_c > 0.0 {
            s -= self.f_c / q_c;
        }
        s
    }
}

/// Mee's score statistic `(d̂ - Δ) / σ̂_Δ`.
pub fn z_mee(design: TrialDesign, outcome: Outcome, delta: f64) -> Result<StatValue> {
    let mle = restricted_mle(design, outcome, delta)?;
    Ok(StatValue::from_ratio(
        unrestricted_estimate(design, outcome) - delta,
        mle.sigma_hat,
    ))
}

/// Variance inflation factor `sqrt(N / (N - 1))` of the Miettinen–Nurminen statistic.
pub fn mn_factor(design: TrialDesign) -> f64 {
    let n = f64::from(design.total());
    (n / (n - 1.0)).sqrt()
}

/// Miettinen–Nurminen statistic.
pub fn z_mn(design: TrialDesign, outcome: Outcome, delta: f64) -> Result<StatValue> {
    Ok(z_mee(design, outcome, delta)?.scaled(mn_factor(design)))
}

/// Wald statistic with the unconstrained per-arm proportions.
pub fn z_wald(design: TrialDesign, outcome: Outcome, delta: f64) -> StatValue {
    StatValue::from_ratio(
        unrestricted_estimate(design, outcome) - delta,
        wald_se(design, outcome),
    )
}

pub(crate) fn wald_se(design: TrialDesign, outcome: Outcome) -> f64 {
    let p_t = f64::from(outcome.x_t()) / f64::from(design.n_t());
    let p_c = f64::from(outcome.x_c()) / f64::from(design.n_c());
    score_se(design, p_t, p_c)
}

/// One-sided asymptotic p-value `1 - Φ(z_mee)` for `H0: d ≤ Δ0`.
pub fn p_asy(design: TrialDesign, outcome: Outcome, delta0: f64) -> Result<f64> {
    Ok(normal_sf(z_mee(design, outcome, delta0)?.value))
}

/// Upper-tail p-value of an arbitrary statistic value.
pub fn upper_tail(z: StatValue) -> f64 {
    normal_sf(z.value)
}
