//! Gain-margin analysis against eigenvalues of the perturbed observer matrix.

use adrc_core::matpoly::{rational_from_f64, rational_to_f64, DenseMatrix, Rational};
use adrc_core::stability::{
    bandwidth_phi, build_a2, char_poly_a2, gain_margin, is_well_performed, lemma_range, PhiVector, UpperBound,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_nalgebra(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.entries())
}

fn max_real_eig(a: &DenseMatrix) -> f64 {
    to_nalgebra(a)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn char_poly_matches_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=5 {
        // (s + 1)^{n+1} and (s + 2)^{n+1}
        let doubled: Vec<f64> = bandwidth_phi(n)
            .unwrap()
            .to_f64()
            .iter()
            .zip(1..)
            .map(|(p, i)| p * 2f64.powi(i))
            .collect();
        for phi in [bandwidth_phi(n).unwrap(), PhiVector::from_f64(&doubled).unwrap()] {
            let ratio = rng.random_range(-0.9..10.0f64);
            let a2 = to_nalgebra(&build_a2(&phi, ratio));
            let poly = char_poly_a2(&phi, &rational_from_f64(ratio).unwrap());
            for _ in 0..5 {
                let s = rng.random_range(-3.0..3.0f64);
                let m = DMatrix::<f64>::identity(n + 1, n + 1) * s - &a2;
                let det = m.determinant();
                let eval = rational_to_f64(&poly.eval(&rational_from_f64(s).unwrap()));
                assert!(
                    (det - eval).abs() <= 1e-9 * (1.0 + eval.abs()),
                    "n={n} s={s}: {det} vs {eval}"
                );
            }
        }
    }
}

#[test]
fn exact_verdict_matches_eigenvalues_of_a2() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=5 {
        let phi = bandwidth_phi(n).unwrap();
        let interval = gain_margin(&phi);
        let upper = interval.upper_f64();
        let mut checked = 0;
        while checked < 100 {
            // three decimals keeps the exact rational short
            let ratio = (rng.random_range(-1.5..12.0f64) * 1000.0).round() / 1000.0;
            if (ratio - upper).abs() < 1e-6 || (ratio + 1.0).abs() < 1e-6 {
                continue;
            }
            let exact = rational_from_f64(ratio).unwrap();
            let by_eig = max_real_eig(&build_a2(&phi, ratio)) < 0.0;
            assert_eq!(is_well_performed(&phi, &exact), by_eig, "n={n} ratio={ratio}");
            assert_eq!(
                interval.contains(&exact),
                by_eig,
                "n={n} ratio={ratio} interval {interval}"
            );
            checked += 1;
        }
    }
}

#[test]
fn boundaries_are_sharp() {
    let eps = Rational::new(1.into(), 10_000.into());
    for phi in ["3,3,1", "3,3,0.5", "4,6,4,1", "5,10,10,5,1"] {
        let phi = PhiVector::parse(phi).unwrap();
        let interval = gain_margin(&phi);
        let (inside, outside) = match &interval.upper {
            UpperBound::Exact(u) => (u - &eps, u.clone()),
            UpperBound::Bracket { stable, unstable } => (stable.clone(), unstable.clone()),
            other => panic!("{phi}: unexpected upper end {other:?}"),
        };
        assert!(is_well_performed(&phi, &inside), "{phi}");
        assert!(!is_well_performed(&phi, &outside), "{phi}");
        let lower = Rational::from_integer((-1).into());
        assert!(is_well_performed(&phi, &(&lower + &eps)), "{phi}");
        assert!(!is_well_performed(&phi, &lower), "{phi}");
    }
}

#[test]
fn lemma_range_is_inside_theorem_range() {
    for n in 1..=8 {
        let theorem = gain_margin(&bandwidth_phi(n).unwrap());
        let lemma = lemma_range(n).unwrap();
        assert_eq!(lemma.lower, theorem.lower);
        assert!(lemma.upper_f64() <= theorem.upper_f64(), "n={n}: {lemma} vs {theorem}");
    }
}

#[test]
fn cubic_boundary_roots() {
    // s^3 + 3s^2 + 3s + κ; κ = 1 + ratio
    let re_part = |kappa: f64| max_real_eig(&build_a2(&bandwidth_phi(2).unwrap(), kappa - 1.0));
    assert!((re_part(8.5) + 0.0213).abs() < 5e-4, "{}", re_part(8.5));
    assert!((re_part(10.0) - 0.040).abs() < 5e-4, "{}", re_part(10.0));
}

#[test]
fn first_order_is_unbounded() {
    let interval = gain_margin(&bandwidth_phi(1).unwrap());
    assert_eq!(interval.upper, UpperBound::Unbounded { proven: true });
    assert!(is_well_performed(
        &bandwidth_phi(1).unwrap(),
        &Rational::from_integer(1_000_000.into())
    ));
}
