mod support;

use riskdiff_core::ci::{invert_cz_exact_all, InversionOptions, Method};
use riskdiff_core::diagnostics::{
    scan_all_outcomes, scan_ci_nesting, scan_margin_coherence, scan_pexact_monotonicity,
    scan_zec_monotonicity, stepped, ViolationKind, Witness,
};
use riskdiff_core::ec::find_zec_extremum;
use riskdiff_core::exact::ExactOptions;
use riskdiff_core::prob::TrialDesign;
use riskdiff_core::Error;

use support::{all_outcomes, d_hat};

fn design(n_t: u32, n_c: u32) -> TrialDesign {
    TrialDesign::new(n_t, n_c).unwrap()
}

#[test]
fn zec_certificate_brackets_the_refined_minimum() {
    let d = design(6, 6);
    let y = d.outcome(6, 0).unwrap();
    let grid = stepped(-0.9999, -0.98, 1e-4);
    let certs = scan_zec_monotonicity(d, y, 0.05, &grid, ExactOptions::default()).unwrap();
    let ext = find_zec_extremum(d, y, 0.05, (-0.9999, -0.98), ExactOptions::default()).unwrap();
    assert!(certs.iter().any(|c| match &c.witness {
        Witness::ZecTriple { deltas, .. } =>
            deltas[0] < ext.delta_star && ext.delta_star < deltas[2],
        _ => false,
    }));
    for c in &certs {
        assert!(c.verify(&InversionOptions::default()).unwrap());
    }
}

#[test]
fn pexact_jump_is_certified() {
    // At Δ0 = 0 the observed tie (1,1) sits at Z = 0 with the whole upper
    // half of the sample space; a small positive boundary reorders it.
    let d = design(2, 2);
    let y = d.outcome(1, 1).unwrap();
    let certs = scan_pexact_monotonicity(d, y, &[0.0, 0.005], ExactOptions::default()).unwrap();
    assert_eq!(certs.len(), 1);
    assert_eq!(certs[0].kind, ViolationKind::PexactNonmonotone);
    assert!(certs[0].verify(&InversionOptions::default()).unwrap());
}

#[test]
fn margin_incoherence_pin() {
    let d = design(7, 7);
    let y = d.outcome(4, 3).unwrap();
    let certs = scan_margin_coherence(d, y, 0.5, &[0.11, 0.15], ExactOptions::default()).unwrap();
    assert_eq!(certs.len(), 1);
    let Witness::MarginPair { p_values, .. } = certs[0].witness else {
        panic!("wrong witness")
    };
    assert!((p_values[0] - 0.2464).abs() < 1e-4, "{p_values:?}");
    assert!((p_values[1] - 0.3206).abs() < 1e-4, "{p_values:?}");
    assert!(certs[0].verify(&InversionOptions::default()).unwrap());

    // The same pair seen as boundaries is a p-value decrease.
    let pex = scan_pexact_monotonicity(d, y, &[-0.15, -0.11], ExactOptions::default()).unwrap();
    assert_eq!(pex.len(), 1);
}

#[test]
fn margin_incoherence_implies_pexact_decrease() {
    let d = design(8, 8);
    let margins: Vec<f64> = (1..=30).map(|i| f64::from(i) / 100.0).collect();
    let boundaries: Vec<f64> = margins.iter().rev().map(|m| -m).collect();
    let incoherent = scan_all_outcomes(d, |y| {
        scan_margin_coherence(d, y, 0.5, &margins, ExactOptions::default())
    })
    .unwrap();
    assert!(!incoherent.is_empty());
    for cert in &incoherent {
        let pex = scan_pexact_monotonicity(d, cert.outcome, &boundaries, ExactOptions::default())
            .unwrap();
        assert!(!pex.is_empty(), "{:?}", cert.outcome);
    }
}

#[test]
fn no_margin_incoherence_at_usual_levels() {
    let d = design(6, 6);
    let margins: Vec<f64> = (1..=30).map(|i| f64::from(i) / 100.0).collect();
    for alpha in [0.05, 0.1] {
        let certs = scan_all_outcomes(d, |y| {
            scan_margin_coherence(d, y, alpha, &margins, ExactOptions::default())
        })
        .unwrap();
        assert!(certs.is_empty());
    }
}

#[test]
fn invalid_alpha_is_rejected() {
    let d = design(3, 3);
    let y = d.outcome(2, 1).unwrap();
    let err = scan_margin_coherence(d, y, 1.4, &[0.1], ExactOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
    assert!(scan_margin_coherence(d, y, 0.05, &[1.2], ExactOptions::default()).is_err());
    let err = scan_ci_nesting(
        Method::Mee,
        d,
        y,
        None,
        &[(0.05, 0.1)],
        &InversionOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

#[test]
fn score_sets_are_nested() {
    let d = design(5, 5);
    let pairs = [(0.1, 0.05), (0.2, 0.01)];
    for method in [Method::Mee, Method::Mn, Method::Wald] {
        let certs = scan_all_outcomes(d, |y| {
            scan_ci_nesting(method, d, y, None, &pairs, &InversionOptions::default())
        })
        .unwrap();
        assert!(certs.is_empty(), "{method:?}");
    }
}

#[test]
fn cz_hulls_are_nested_and_contain_the_estimate() {
    let d = design(4, 4);
    let options = InversionOptions::default();
    let wide = invert_cz_exact_all(d, 0.05, &options).unwrap();
    let narrow = invert_cz_exact_all(d, 0.10, &options).unwrap();
    let tight = invert_cz_exact_all(d, 0.99, &options).unwrap();
    for (k, y) in all_outcomes(d).into_iter().enumerate() {
        assert!(
            wide[k].hull.lo <= narrow[k].hull.lo && narrow[k].hull.hi <= wide[k].hull.hi,
            "{y:?}"
        );
        let est = d_hat(d, y);
        if est.abs() < 1.0 {
            assert!(tight[k].hull.contains(est), "{y:?} {:?}", tight[k].hull);
        }
    }
}

#[test]
fn ec_sets_are_nested_at_fixed_margin() {
    // At a fixed margin the anchor does not depend on alpha, so
    // {|Z_EC| < c} can only grow with c.
    let options = InversionOptions::default();
    for n in 1..=8 {
        let d = design(n, n);
        for margin in [0.05, 0.1, 0.2] {
            let certs = scan_all_outcomes(d, |y| {
                match scan_ci_nesting(Method::Ec, d, y, Some(margin), &[(0.1, 0.05)], &options) {
                    Err(Error::DegenerateCalibration { .. } | Error::EmptyConfidenceSet { .. }) => {
                        Ok(Vec::new())
                    }
                    other => other,
                }
            })
            .unwrap();
            assert!(
                certs.is_empty(),
                "n={n} margin={margin}: {:?}",
                certs.first()
            );
        }
    }
}
