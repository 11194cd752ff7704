use loglab_core::epiperimetric::*;
use loglab_core::geometry::{Field, QuadratureRule};
use loglab_core::spherical::{Mode, QuadraticForm, SphereTrace};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn single_mode(dim: usize, degree: usize) -> SphereTrace {
    let mut phi = SphereTrace::zero(dim, 6).unwrap();
    let j = phi.basis().position(Mode { degree, index: 0 }).unwrap();
    phi.coeffs_mut()[j] = 1.0;
    phi
}

#[test]
fn identity_matches_quadrature() {
    for dim in [2, 3] {
        let rule = QuadratureRule::default_ball(dim).unwrap();
        for degree in 3..=5 {
            let phi = single_mode(dim, degree);
            for alpha in [2.1, 2.3, 2.5] {
                for s in [1e-2, 1e-4, 1e-6] {
                    let closed = fourier_identity(&phi, alpha, s, EtaVariant::Statement).unwrap();
                    let quad = fourier_identity_quadrature(&phi, alpha, s, &rule).unwrap();
                    let rel = (closed - quad).abs() / quad.abs();
                    assert!(rel <= 1e-6, "d={dim} k={degree} a={alpha} s={s}: {closed} vs {quad}");
                }
            }
        }
    }
}

#[test]
fn other_eta_readings_disagree_with_quadrature() {
    let rule = QuadratureRule::default_ball(2).unwrap();
    let phi = single_mode(2, 3);
    let quad = fourier_identity_quadrature(&phi, 2.5, 1e-2, &rule).unwrap();
    for v in [EtaVariant::Flipped, EtaVariant::Doubled] {
        let closed = fourier_identity(&phi, 2.5, 1e-2, v).unwrap();
        assert!((closed - quad).abs() / quad.abs() > 1e-3, "{v:?}");
    }
}

#[test]
fn mixed_modes_add() {
    let mut phi = single_mode(3, 3);
    let basis = phi.basis();
    for (k, c) in [(4, 0.3), (5, -0.2)] {
        let j = basis.position(Mode { degree: k, index: 1 }).unwrap();
        phi.coeffs_mut()[j] = c;
    }
    let rule = QuadratureRule::default_ball(3).unwrap();
    let closed = fourier_identity(&phi, 2.2, 1e-3, EtaVariant::Statement).unwrap();
    let quad = fourier_identity_quadrature(&phi, 2.2, 1e-3, &rule).unwrap();
    assert!((closed - quad).abs() / quad.abs() <= 1e-6);
}

#[test]
fn competitors_match_family_traces_on_the_sphere() {
    let sphere = QuadratureRule::default_sphere(2).unwrap();
    for m in generate_family(2, 12, 0.045, 3).unwrap() {
        let (v, _) = build_competitor(&m.trace, 1e-3, &EpiConfig::default(), &IContext::Zero).unwrap();
        for i in 0..sphere.len() {
            let x = sphere.point(i);
            let diff = (v.value(x).unwrap() - m.trace.synthesize(x)).abs();
            assert!(diff <= 1e-10, "trace {}: {diff:e}", m.id);
        }
    }
}

#[test]
fn split_parts_have_the_expected_signs() {
    for dim in [2, 3] {
        for m in generate_family(dim, 6, 0.045, 5).unwrap() {
            let rep = check_inequality(&m.trace, 1e-3, &EpiConfig::default(), &IContext::Zero).unwrap();
            assert!(rep.parts.part1 <= 1e-12, "{:?}", rep.parts);
            assert!(rep.parts.part3 <= 1e-12, "{:?}", rep.parts);
            assert_eq!(rep.negative_samples, 0);
        }
    }
}

#[test]
fn sweep_is_deterministic() {
    let cfg = SweepConfig {
        count: 4,
        scales: vec![1e-3],
        seed: 9,
        ..SweepConfig::new(2)
    };
    let a = sweep(&cfg).unwrap();
    let b = sweep(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.total, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qb_is_psd_with_matching_trace(
        neg in 0.0f64..0.24,
        mid in 0.0f64..1.0,
        angle in 0.0f64..std::f64::consts::PI,
    ) {
        // eigenvalues (−neg, m, 1 + neg − m) with the top one at least 1/3
        let m = mid * (2.0 / 3.0 + neg) / 2.0;
        let vals = [-neg, m, 1.0 + neg - m];
        let (c, s) = (angle.cos(), angle.sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let a = QuadraticForm::new(&rot * DMatrix::from_diagonal(&DVector::from_row_slice(&vals)) * rot.transpose()).unwrap();
        let b = choose_qb(&a).unwrap();
        prop_assert!(b.eigenvalues()[0] >= -1e-12);
        prop_assert!((b.trace() - a.trace()).abs() <= 1e-12);
    }
}
