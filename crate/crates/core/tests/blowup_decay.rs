mod common;

use common::{dyadic, unit};
use loglab_core::blowup::*;
use loglab_core::decay::*;
use loglab_core::energy::{mu, theta};
use loglab_core::geometry::{Field, FnField, GridField};
use loglab_core::spherical::QuadraticForm;
use loglab_core::synthetic::{MuField, Profile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `μ(ρ)|x|²/(4ρ²)·ρ² + 0.05(x³ − 3xy²)`: a singular point with a cubic
/// perturbation that vanishes faster than the quadratic part.
fn perturbed() -> impl Field {
    FnField::new(
        2,
        |x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let quad = if r2 > 0.0 { (1.0 - r2.ln()) * r2 / 4.0 } else { 0.0 };
            quad + 0.05 * (x[0].powi(3) - 3.0 * x[0] * x[1] * x[1])
        },
        |x: &[f64], g: &mut [f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            // d/dx of (1 − log r²) r²/4 is x(1 − log r² − 1)/2 = −x log r²/2
            let f = if r2 > 0.0 { -r2.ln() / 2.0 } else { 0.0 };
            g[0] = f * x[0] + 0.05 * (3.0 * x[0] * x[0] - 3.0 * x[1] * x[1]);
            g[1] = f * x[1] - 0.3 * x[0] * x[1];
        },
    )
}

fn rotation(t: f64) -> [[f64; 2]; 2] {
    [[t.cos(), -t.sin()], [t.sin(), t.cos()]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rescalings_compose(r in 0.01f64..0.5, s in 0.05f64..0.9, x in -0.7f64..0.7, y in -0.7f64..0.7) {
        let u = perturbed();
        let c = [0.0, 0.0];
        let ur = rescale(&u, &c, r).unwrap();
        let urs = rescale(&u, &c, r * s).unwrap();
        let p = [x, y];
        let direct = u.value(&[r * x, r * y]).unwrap() / mu(r).unwrap();
        prop_assert!((ur.value(&p).unwrap() - direct).abs() <= 1e-14 * (1.0 + direct.abs()));
        // u_r(s x) μ(r) = u_{rs}(x) μ(rs)
        let lhs = ur.value(&[s * x, s * y]).unwrap() * mu(r).unwrap();
        let rhs = urs.value(&p).unwrap() * mu(r * s).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
    }
}

#[test]
fn l1_tail_is_monotone_on_a_perturbed_singular_point() {
    let u = perturbed();
    let rec = estimate_blowup(&u, &[0.0, 0.0], &dyadic(2, 14), &BlowupConfig::default()).unwrap();
    assert!(rec.monotone_tail, "{:?}", rec.entries.iter().map(|e| e.l1_distance).collect::<Vec<_>>());
    assert!(matches!(rec.candidate, Candidate::Quadratic { .. }));
    let tail: Vec<f64> = rec.entries.iter().map(|e| e.l1_distance).collect();
    assert!(tail.last().unwrap() < &tail[0]);
}

#[test]
fn analytic_fields_classify_at_small_radii() {
    let radii = dyadic(4, 14);
    let q = MuField::new(&[0.0, 0.0], Profile::Quadratic(QuadraticForm::isotropic(2).unwrap())).unwrap();
    let rec = estimate_blowup(&q, &[0.0, 0.0], &radii, &BlowupConfig::default()).unwrap();
    assert_eq!(rec.classification, Classification::Singular, "{:?}", rec.diagnostics);
    assert!((rec.energy - theta(2)).abs() <= 0.15 * theta(2));
    assert_eq!(rec.stratum, Some(0));

    let h = MuField::new(&[0.0, 0.0, 0.0], Profile::HalfSpace(unit(3, 2))).unwrap();
    let rec = estimate_blowup(&h, &[0.0, 0.0, 0.0], &radii, &BlowupConfig::default()).unwrap();
    assert_eq!(rec.classification, Classification::Regular, "{:?}", rec.diagnostics);
    assert!(matches!(rec.candidate, Candidate::HalfSpace { .. }));
}

#[test]
fn grid_labels_are_rotation_invariant() {
    let base = QuadraticForm::from_diag(&[1.0, 0.0]).unwrap();
    let mut energies = Vec::new();
    for k in 0..4 {
        let t = 0.4 * k as f64;
        let m = rotation(t);
        let nu = vec![m[0][0], m[1][0]];
        let field = MuField::new(&[0.0, 0.0], Profile::HalfSpace(nu)).unwrap().sample(0.0625, 257).unwrap();
        let field = GridField::new(field).unwrap();
        let x0 = [0.0, 0.0];
        let rec = estimate_blowup(&field, &x0, &dyadic(5, 8), &BlowupConfig::default()).unwrap();
        assert_eq!(rec.classification, Classification::Regular, "{t}: {:?}", rec.diagnostics);
        energies.push(rec.energy);
    }
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(0.0, f64::max);
    assert!(hi - lo <= 0.02 * theta(2), "{energies:?}");
    assert_eq!(stratum(&base, 0.05).unwrap(), 1);
}

#[test]
fn excess_series_on_a_quadratic_point() {
    let q = MuField::new(&[0.0, 0.0], Profile::Quadratic(QuadraticForm::from_diag(&[0.7, 0.3]).unwrap())).unwrap();
    let series = excess_series(&q, &[0.0, 0.0], &dyadic(3, 40), None, &BlowupConfig::default()).unwrap();
    assert!(!series.flagged, "{:?}", series.note);
    assert_eq!(series.limit, theta(2));
    // the synthetic field is not a minimizer: W dips below Θ at small radii,
    // so e stays small but is not sign-definite
    assert!(series.samples.iter().all(|&(_, e)| e.abs() <= 0.05 * theta(2)), "{:?}", series.samples);
    for (row, &(r, e)) in series.table.rows.iter().zip(&series.samples) {
        assert_eq!(row.r, r);
        assert_eq!(row.excess, e);
        assert_eq!(e, row.w - row.int_i - theta(2));
    }
}

#[test]
fn excess_series_of_zero_field() {
    let z = FnField::new(2, |_: &[f64]| 0.0, |_: &[f64], g: &mut [f64]| g.iter_mut().for_each(|v| *v = 0.0));
    let series = excess_series(&z, &[0.0, 0.0], &dyadic(2, 8), None, &BlowupConfig::default()).unwrap();
    assert!(series.flagged);
    assert_eq!(series.limit, 0.0);
    assert!(series.samples.iter().all(|&(_, e)| e == 0.0));
}

#[test]
fn noisy_modulus_fits_recover_constant() {
    let gamma = 1.0 / 3.0;
    let p = -(1.0 - gamma) / (2.0 * gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s: Vec<(f64, f64)> = dyadic(2, 20)
            .iter()
            .map(|&r| (r, 0.7 * (-r.ln()).powf(p) * (1.0 + rng.gen_range(-0.05..0.05))))
            .collect();
        let f = fit_modulus(&s, gamma).unwrap();
        worst = worst.max((f.c - 0.7).abs() / 0.7);
    }
    assert!(worst <= 0.15, "{worst}");
}

#[test]
fn singular_modulus_distances_satisfy_the_triangle_inequality() {
    let pts: Vec<(Vec<f64>, QuadraticForm)> = (0..5)
        .map(|k| {
            let t = 0.1 * k as f64;
            (vec![t, 0.5 * t], QuadraticForm::from_diag(&[0.5 + 0.05 * k as f64, 0.5 - 0.05 * k as f64]).unwrap())
        })
        .collect();
    let rec = singular_modulus(&pts, ModulusRate::Holder { beta: 0.4 }).unwrap();
    let n = pts.len();
    let mut d = vec![vec![0.0; n]; n];
    for p in &rec.pairs {
        d[p.i][p.j] = p.distance;
        d[p.j][p.i] = p.distance;
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                assert!(d[i][k] <= d[i][j] + d[j][k] + 1e-14);
            }
        }
    }
    assert!(rec.constant.is_finite() && rec.constant > 0.0);
    assert_eq!(rec.pairs.len(), n * (n - 1) / 2);
}
