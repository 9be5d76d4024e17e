//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod support;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riskdiff_core::ci::{critical_value, invert_ec_calibrated, InversionOptions, Method};
use riskdiff_core::coverage::coverage_surface;
use riskdiff_core::diagnostics::{liberal_conservative_map, scan_zec_monotonicity, Relation};
use riskdiff_core::ec::{calibrate_ec, find_zec_extremum, ExtremumKind};
use riskdiff_core::exact::{exact_pvalue, ExactOptions};
use riskdiff_core::prob::{Outcome, TrialDesign};
use riskdiff_core::score::{mn_factor, p_asy, restricted_mle, unrestricted_estimate, z_mee, z_mn};
use riskdiff_core::Error;

use support::{all_outcomes, brute_exact_pvalues, golden_mle};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn design(n_t: u32, n_c: u32) -> TrialDesign {
    TrialDesign::new(n_t, n_c).unwrap()
}

fn counterexample() -> (TrialDesign, Outcome) {
    let d = design(6, 6);
    (d, d.outcome(6, 0).unwrap())
}

fn opts() -> ExactOptions {
    ExactOptions::default()
}

fn c1() -> Check {
    let (d, y) = counterexample();
    let start = Instant::now();
    let p = exact_pvalue(d, y, -0.05, opts()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(
        (p.value - 0.00013).abs() <= 2e-5
            && (p.argmax_p_c - 0.525).abs() <= 1e-3
            && took < Duration::from_secs(1),
        format!(
            "p_exact = {:.6e}, argmax = {:.6}, {:?}",
            p.value, p.argmax_p_c, took
        ),
    )
}

fn c2() -> Check {
    let (d, y) = counterexample();
    let cal = calibrate_ec(d, y, 0.05, opts()).map_err(|e| e.to_string())?;
    ensure(
        (cal.d_hat_0 - 1.0019).abs() <= 5e-4,
        format!("d_hat_0 = {:.6}", cal.d_hat_0),
    )
}

fn c3() -> Check {
    let (d, y) = counterexample();
    let cal = calibrate_ec(d, y, 0.05, opts()).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (delta, expect) in [(-0.99, 0.2921), (-0.9981, 0.2133), (-0.999, 0.2242)] {
        let z = cal.z_ec(d, y, -delta).map_err(|e| e.to_string())?.value;
        ok &= (z - expect).abs() <= 5e-4;
        parts.push(format!("{delta}: {z:.5}"));
    }
    ensure(ok, parts.join(", "))
}

fn c4() -> Check {
    let (d, y) = counterexample();
    let cal = calibrate_ec(d, y, 0.05, opts()).map_err(|e| e.to_string())?;
    let ext = find_zec_extremum(d, y, 0.05, (-0.9999, -0.95), opts()).map_err(|e| e.to_string())?;
    let gap = (ext.delta_star + 1.0 / cal.d_hat_0).abs();
    ensure(
        ext.kind == ExtremumKind::Min && (ext.delta_star + 0.9981).abs() <= 1e-3 && gap <= 1e-6,
        format!(
            "delta* = {:.10}, |delta* + 1/d_hat_0| = {gap:.2e}",
            ext.delta_star
        ),
    )
}

fn c5() -> Check {
    let (d, y) = counterexample();
    let grid: Vec<f64> = (0..=199)
        .map(|i| (-9999.0 + f64::from(i)) / 10_000.0)
        .collect();
    let certs = scan_zec_monotonicity(d, y, 0.05, &grid, opts()).map_err(|e| e.to_string())?;
    let verified = certs
        .iter()
        .filter(|c| c.verify(&InversionOptions::default()).unwrap_or(false))
        .count();
    ensure(
        !certs.is_empty() && verified == certs.len(),
        format!("{} certificates, {verified} verified", certs.len()),
    )
}

fn c6() -> Check {
    let start = Instant::now();
    let deltas: Vec<f64> = (-19..=19).map(|i| f64::from(i) / 20.0).collect();
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for n_t in 1..=10 {
        for n_c in 1..=10 {
            let d = design(n_t, n_c);
            for y in all_outcomes(d) {
                for &delta in &deltas {
                    let got = restricted_mle(d, y, delta)
                        .map_err(|e| e.to_string())?
                        .p_tilde_c;
                    worst = worst.max((got - golden_mle(d, y, delta)).abs());
                    cases += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    ensure(
        worst <= 1e-8 && took < Duration::from_secs(60),
        format!("{cases} cases, max error {worst:.2e}, {took:?}"),
    )
}

fn c7() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for n_t in 1..=4 {
        for n_c in 1..=4 {
            let d = design(n_t, n_c);
            for delta0 in [-0.2, -0.1, 0.0, 0.1, 0.2] {
                let (brute, _) = brute_exact_pvalues(d, delta0, 1e-6);
                for (y, b) in all_outcomes(d).into_iter().zip(brute) {
                    let p = exact_pvalue(d, y, delta0, opts())
                        .map_err(|e| e.to_string())?
                        .value;
                    worst = worst.max((p - b).abs());
                    cases += 1;
                }
            }
        }
    }
    let took = start.elapsed();
    ensure(
        worst <= 1e-9 && took < Duration::from_secs(120),
        format!("{cases} cases, max error {worst:.2e}, {took:?}"),
    )
}

fn c8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut infinite = 0usize;
    for _ in 0..1000 {
        let d = design(rng.random_range(1..=60), rng.random_range(1..=60));
        let y = d
            .outcome(rng.random_range(0..=d.n_t()), rng.random_range(0..=d.n_c()))
            .unwrap();
        let delta = rng.random_range(-0.99..0.99);
        let mee = z_mee(d, y, delta).map_err(|e| e.to_string())?.value;
        let mn = z_mn(d, y, delta).map_err(|e| e.to_string())?.value;
        let scaled = mn_factor(d) * mee;
        if scaled.is_finite() {
            worst = worst.max((mn - scaled).abs());
        } else {
            infinite += 1;
            if mn != scaled {
                return Err(format!("infinite mismatch at {d:?} {y:?} {delta}"));
            }
        }
    }
    ensure(
        worst <= 1e-12,
        format!("1000 cases ({infinite} infinite), max error {worst:.2e}"),
    )
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn c9() -> Check {
    let deltas: Vec<f64> = (-19..=19).map(|i| f64::from(i) / 20.0).collect();
    let (mut checked, mut skipped, mut bad) = (0usize, 0usize, Vec::new());
    for n_t in 1..=6 {
        for n_c in 1..=6 {
            let d = design(n_t, n_c);
            for y in all_outcomes(d) {
                let d_hat = unrestricted_estimate(d, y);
                for margin in [0.05, 0.1, 0.2] {
                    let cal = match calibrate_ec(d, y, margin, opts()) {
                        Ok(c) => c,
                        Err(Error::DegenerateCalibration { .. }) => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => return Err(e.to_string()),
                    };
                    let anchor = sign(cal.d_hat_0 - d_hat);
                    let pa = p_asy(d, y, -margin).map_err(|e| e.to_string())?;
                    if (cal.d_hat_0 < d_hat) != (pa < cal.p_exact) {
                        bad.push(format!("{n_t}x{n_c} {y:?} margin {margin}: p relation"));
                    }
                    for &delta in &deltas {
                        let ec = cal.z_ec(d, y, -delta).map_err(|e| e.to_string())?;
                        let mee = z_mee(d, y, -delta).map_err(|e| e.to_string())?;
                        if ec.degenerate || mee.degenerate {
                            continue;
                        }
                        checked += 1;
                        if sign(ec.value - mee.value) != anchor {
                            bad.push(format!("{n_t}x{n_c} {y:?} margin {margin} delta {delta}"));
                        }
                    }
                }
            }
        }
    }
    let detail = format!(
        "{checked} cases, {skipped} degenerate calibrations skipped, {} mismatches",
        bad.len()
    );
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; first: {}", bad[0]))
    }
}

fn c10() -> Check {
    let options = InversionOptions::default();
    let (mut literal, mut directional, mut knife, mut upper_excluded, mut degenerate) =
        (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut bad = Vec::new();
    for n_t in 1..=6 {
        for n_c in 1..=6 {
            let d = design(n_t, n_c);
            for y in all_outcomes(d) {
                for margin in [0.05, 0.1, 0.2] {
                    let cal = match calibrate_ec(d, y, margin, opts()) {
                        Ok(c) => c,
                        Err(Error::DegenerateCalibration { .. }) => {
                            degenerate += 1;
                            continue;
                        }
                        Err(e) => return Err(e.to_string()),
                    };
                    let z0 = cal.z_ec(d, y, -margin).map_err(|e| e.to_string())?.value;
                    for alpha in [0.05, 0.1] {
                        let z_crit = critical_value(alpha).map_err(|e| e.to_string())?;
                        if (z0.abs() - z_crit).abs() <= 1e-6 {
                            knife += 1;
                            continue;
                        }
                        let in_set = match invert_ec_calibrated(&cal, d, y, alpha, &options) {
                            Ok(set) => set.contains(-margin),
                            Err(Error::EmptyConfidenceSet { .. }) => false,
                            Err(e) => return Err(e.to_string()),
                        };
                        let below = !in_set && z0 >= z_crit;
                        let tag = format!("{n_t}x{n_c} {y:?} margin {margin} alpha {alpha}");
                        // Excluded on the noninferiority side exactly when p < alpha/2.
                        if below != (cal.p_exact < alpha / 2.0) {
                            bad.push(tag.clone());
                        }
                        directional += 1;
                        if cal.p_exact <= 1.0 - alpha / 2.0 {
                            if in_set != (cal.p_exact >= alpha / 2.0) {
                                bad.push(tag);
                            }
                            literal += 1;
                        } else {
                            upper_excluded += 1;
                        }
                    }
                }
            }
        }
    }
    let detail = format!(
        "{literal} literal + {directional} directional checks, {upper_excluded} excluded from above, \
         {knife} knife-edge, {degenerate} degenerate calibrations, {} mismatches",
        bad.len()
    );
    if bad.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; first: {}", bad[0]))
    }
}

fn c11() -> Check {
    let start = Instant::now();
    let surface = coverage_surface(
        Method::CzExact,
        design(10, 10),
        0.05,
        0.05,
        None,
        &InversionOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(
        surface.min_coverage >= 0.95 && took < Duration::from_secs(600),
        format!(
            "{} cells, min {:.5} at ({}, {}), {took:?}",
            surface.cells.len(),
            surface.min_coverage,
            surface.argmin.p_t,
            surface.argmin.p_c
        ),
    )
}

fn c12() -> Check {
    let (d, y) = counterexample();
    let map = liberal_conservative_map(d, -0.05, opts()).map_err(|e| e.to_string())?;
    let row = map
        .rows
        .iter()
        .find(|r| r.outcome == y)
        .ok_or("missing (6,0) row")?;
    ensure(
        row.relation == Relation::Conservative && 2 * map.liberal > map.rows.len(),
        format!(
            "(6,0) {:?}; {} liberal of {}",
            row.relation,
            map.liberal,
            map.rows.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        (
            "exact p-value and nuisance argmax for (6,6 / 6,0), margin 0.05",
            c1,
        ),
        ("EC anchor d_hat_0", c2),
        ("Z_EC at three margin-scale points", c3),
        ("Z_EC minimum location", c4),
        ("Z_EC non-monotonicity certificate", c5),
        ("restricted MLE against golden-section oracle", c6),
        ("exact p-value against exhaustive nuisance grid", c7),
        ("MN scaling identity", c8),
        ("EC / Mee sign equivalence chain", c9),
        ("EC boundary consistency rule", c10),
        ("exact coverage floor, (10,10), alpha 0.05", c11),
        ("liberal/conservative map for (6,6)", c12),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
