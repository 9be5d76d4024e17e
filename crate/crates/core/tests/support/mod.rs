//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerical routines; only the plain data
//! types are shared.

#![allow(dead_code)]

use riskdiff_core::prob::{Outcome, TrialDesign};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Difference of the constrained log-likelihood between two control
/// probabilities, `L(a) - L(b)`, written with `ln_1p` so that it stays
/// accurate when `a` and `b` are very close.
fn loglik_diff(design: TrialDesign, y: Outcome, delta: f64, a: f64, b: f64) -> f64 {
    // (count, numerator difference, denominator at b); the differences are
    // formed from `a - b` so no rounding of `a + delta` leaks into them.
    let h = a - b;
    let terms = [
        (f64::from(y.x_t()), h, b + delta),
        (f64::from(design.n_t() - y.x_t()), -h, 1.0 - b - delta),
        (f64::from(y.x_c()), h, b),
        (f64::from(design.n_c() - y.x_c()), -h, 1.0 - b),
    ];
    let mut s = 0.0;
    for (k, num, qb) in terms {
        if k == 0.0 {
            continue;
        }
        if qb <= 0.0 {
            return if qb + num <= 0.0 { 0.0 } else { f64::INFINITY };
        }
        s += k * (num / qb).ln_1p();
    }
    s
}

/// Restricted MLE of `p_C` by golden-section maximization of the
/// likelihood along `p_T = p_C + Δ`.
pub fn golden_mle(design: TrialDesign, y: Outcome, delta: f64) -> f64 {
    let mut a = (-delta).max(0.0);
    let mut b = (1.0 - delta).min(1.0);
    let (lo, hi) = (a, b);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    for _ in 0..400 {
        if b - a < 1e-15 {
            break;
        }
        // f(x1) >= f(x2)
        if loglik_diff(design, y, delta, x1, x2) >= 0.0 {
            b = x2;
            x2 = x1;
            x1 = b - INV_PHI * (b - a);
        } else {
            a = x1;
            x1 = x2;
            x2 = a + INV_PHI * (b - a);
        }
    }
    let mid = 0.5 * (a + b);
    // Snap to an endpoint when the likelihood there is at least as large.
    let mut best = mid;
    for end in [lo, hi] {
        if loglik_diff(design, y, delta, end, best) >= 0.0 {
            best = end;
        }
    }
    best
}

/// Mee statistic from the golden-section MLE, with the extended-real
/// convention for a zero standard error.
pub fn mee_oracle(design: TrialDesign, y: Outcome, delta: f64) -> f64 {
    let p_c = golden_mle(design, y, delta);
    let p_t = (p_c + delta).clamp(0.0, 1.0);
    let se = (p_t * (1.0 - p_t) / f64::from(design.n_t())
        + p_c * (1.0 - p_c) / f64::from(design.n_c()))
    .sqrt();
    let num = d_hat(design, y) - delta;
    if se > 0.0 {
        num / se
    } else if num > 0.0 {
        f64::INFINITY
    } else if num < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

pub fn d_hat(design: TrialDesign, y: Outcome) -> f64 {
    f64::from(y.x_t()) / f64::from(design.n_t()) - f64::from(y.x_c()) / f64::from(design.n_c())
}

pub fn all_outcomes(design: TrialDesign) -> Vec<Outcome> {
    let mut v = Vec::new();
    for a in 0..=design.n_t() {
        for b in 0..=design.n_c() {
            v.push(design.outcome(a, b).unwrap());
        }
    }
    v
}

pub fn choose(n: u32, k: u32) -> f64 {
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c.round()
}

/// Binomial probability by direct powers.
pub fn binom(k: u32, n: u32, p: f64) -> f64 {
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Membership rule of the exact tail, restated: finite values within a
/// relative 1e-10 count as ties; equal infinities compare point estimates.
pub fn in_upper_tail(z: f64, dh: f64, z_obs: f64, dh_obs: f64) -> bool {
    if z.is_finite() && z_obs.is_finite() {
        return z >= z_obs - 1e-10 * z_obs.abs().max(1.0);
    }
    if z != z_obs {
        return z > z_obs;
    }
    dh >= dh_obs - 1e-10
}

pub fn in_lower_tail(z: f64, dh: f64, z_obs: f64, dh_obs: f64) -> bool {
    in_upper_tail(-z, -dh, -z_obs, -dh_obs)
}

/// Positions in `order` form a contiguous block `[k, m)` (upper) or
/// `[0, k]` (lower) for every tail set; returns the block starts.
fn tail_cutoffs(order: &[usize], sets: &[Vec<usize>], upper: bool) -> Vec<usize> {
    let m = order.len();
    let mut pos = vec![0usize; m];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    sets.iter()
        .map(|set| {
            let mut ps: Vec<usize> = set.iter().map(|&i| pos[i]).collect();
            ps.sort_unstable();
            let k = if upper { ps[0] } else { ps[ps.len() - 1] };
            let block: Vec<usize> = if upper {
                (k..m).collect()
            } else {
                (0..=k).collect()
            };
            assert_eq!(ps, block, "tail set is not a block of the ordering");
            k
        })
        .collect()
}

/// Exact p-values of every outcome at boundary `Δ0` by scanning the
/// nuisance parameter on a grid of the given step. Returns
/// `(upper, lower)` vectors in enumeration order.
pub fn brute_exact_pvalues(design: TrialDesign, delta0: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
    let ys = all_outcomes(design);
    let z: Vec<f64> = ys.iter().map(|&y| mee_oracle(design, y, delta0)).collect();
    let dh: Vec<f64> = ys.iter().map(|&y| d_hat(design, y)).collect();
    let m = ys.len();
    let upper_sets: Vec<Vec<usize>> = (0..m)
        .map(|o| {
            (0..m)
                .filter(|&i| in_upper_tail(z[i], dh[i], z[o], dh[o]))
                .collect()
        })
        .collect();
    let lower_sets: Vec<Vec<usize>> = (0..m)
        .map(|o| {
            (0..m)
                .filter(|&i| in_lower_tail(z[i], dh[i], z[o], dh[o]))
                .collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(dh[a].total_cmp(&dh[b])));
    let up_cut = tail_cutoffs(&order, &upper_sets, true);
    let dn_cut = tail_cutoffs(&order, &lower_sets, false);

    let (n_t, n_c) = (design.n_t(), design.n_c());
    let lo = (-delta0).max(0.0);
    let hi = (1.0 - delta0).min(1.0);
    let steps = ((hi - lo) / step).round() as usize;
    let mut up = vec![0.0f64; m];
    let mut dn = vec![0.0f64; m];
    let mut sorted = vec![0.0f64; m];
    let mut prefix = vec![0.0f64; m + 1];
    let mut suffix = vec![0.0f64; m + 1];
    let mut row_t = vec![0.0f64; n_t as usize + 1];
    let mut row_c = vec![0.0f64; n_c as usize + 1];
    for s in 0..=steps {
        let p_c = (lo + (hi - lo) * s as f64 / steps as f64).clamp(0.0, 1.0);
        let p_t = (p_c + delta0).clamp(0.0, 1.0);
        for (k, r) in row_t.iter_mut().enumerate() {
            *r = binom(k as u32, n_t, p_t);
        }
        for (k, r) in row_c.iter_mut().enumerate() {
            *r = binom(k as u32, n_c, p_c);
        }
        for (slot, &i) in sorted.iter_mut().zip(&order) {
            *slot = row_t[ys[i].x_t() as usize] * row_c[ys[i].x_c() as usize];
        }
        for k in 0..m {
            prefix[k + 1] = prefix[k] + sorted[k];
        }
        for k in (0..m).rev() {
            suffix[k] = suffix[k + 1] + sorted[k];
        }
        for o in 0..m {
            up[o] = up[o].max(suffix[up_cut[o]]);
            dn[o] = dn[o].max(prefix[dn_cut[o] + 1]);
        }
    }
    (up, dn)
}

/// Standard normal distribution function by composite Simpson quadrature
/// of the density over the smaller tail.
pub fn normal_cdf_quadrature(z: f64) -> f64 {
    let a = z.abs();
    let upper = a + 14.0;
    let panels = 40_000usize;
    let h = (upper - a) / panels as f64;
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = phi(a) + phi(upper);
    for i in 1..panels {
        let t = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * phi(t);
    }
    let tail = s * h / 3.0;
    if z <= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Standard normal quantile by bisection on [`normal_cdf_quadrature`].
pub fn normal_quantile_bisect(q: f64) -> f64 {
    let (mut lo, mut hi) = (-12.0f64, 12.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf_quadrature(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
