//! Checks against independent closed forms and brute-force evaluations.

use std::f64::consts::TAU;

use num_complex::Complex64;
use picard_core::data::{embedding_constant, sample_initial, InitialLaw};
use picard_core::semigroup::{apply_semigroup, duhamel, SemigroupKind};
use picard_core::spectral::{GridSpec, TorusField, TrajectoryField};

#[test]
fn fft_matches_naive_dft_on_mixed_radix_grid() {
    let g = GridSpec::new(2, 6, 2).unwrap();
    let f = TorusField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + 0.3 * (3.0 * x[0]).cos() + x[1] * 0.1);
    let spec = f.to_spectrum().unwrap();
    let m = 6usize;
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                for k in 0..m {
                    let (x, y) = (TAU * j as f64 / m as f64, TAU * k as f64 / m as f64);
                    let v = f.value(j * m + k);
                    acc += v * Complex64::from_polar(1.0, -(a as f64 * x + b as f64 * y));
                }
            }
            acc /= (m * m) as f64;
            assert!((spec.coefficient(&[a, b]) - acc).norm() < 1e-13, "mode ({a},{b})");
        }
    }
}

#[test]
fn fejer_equals_cesaro_mean_of_partial_sums() {
    let g = GridSpec::new(1, 32, 2).unwrap();
    let f = TorusField::from_fn(g, |x| (x[0]).sin().abs() - 0.5 + 0.2 * (5.0 * x[0]).cos());
    let spec = f.to_spectrum().unwrap();
    let rank = 6usize;
    let partial = |n: i64, x: f64| -> f64 {
        (-n..=n)
            .map(|k| (spec.coefficient(&[k]) * Complex64::from_polar(1.0, k as f64 * x)).re)
            .sum()
    };
    let fejer = f.apply_fejer(rank).unwrap();
    for j in 0..32 {
        let x = g.coordinate(j);
        let cesaro = (0..=rank as i64).map(|n| partial(n, x)).sum::<f64>() / (rank + 1) as f64;
        assert!((fejer.value(j) - cesaro).abs() < 1e-13);
    }
}

#[test]
fn free_evolution_decays_each_mode() {
    let g = GridSpec::new(1, 32, 2).unwrap();
    let f = TorusField::from_fn(g, |x| (3.0 * x[0]).cos() + 0.5);
    let t = 0.37;
    let s = apply_semigroup(SemigroupKind::Exact, &f, t).unwrap();
    let expected = TorusField::from_fn(g, |x| (-9.0 * t).exp() * (3.0 * x[0]).cos() + 0.5);
    assert!(s.distance(&expected).unwrap() < 1e-14);
}

#[test]
fn duhamel_of_constant_and_linear_forcing() {
    // the exponential quadrature is exact for forcing that is linear in time
    let g = GridSpec::new(1, 16, 11).unwrap();
    let horizon = 0.8;
    let k = 2.0f64;
    let lam = k * k;
    let constant = TrajectoryField::from_fn(g, horizon, |_, x| (k * x[0]).cos());
    let out = duhamel(SemigroupKind::Exact, &constant).unwrap();
    let exact = TrajectoryField::from_fn(g, horizon, |t, x| (1.0 - (-lam * t).exp()) / lam * (k * x[0]).cos());
    assert!(out.distance(&exact).unwrap() < 1e-14);

    let ramp = TrajectoryField::from_fn(g, horizon, |t, x| t * (k * x[0]).sin() + 0.25 * t);
    let out = duhamel(SemigroupKind::Exact, &ramp).unwrap();
    let exact = TrajectoryField::from_fn(g, horizon, |t, x| {
        (lam * t - 1.0 + (-lam * t).exp()) / (lam * lam) * (k * x[0]).sin() + 0.125 * t * t
    });
    assert!(out.distance(&exact).unwrap() < 1e-14);
}

#[test]
fn embedding_constant_small_cases() {
    // 1 + 2 * 2^{-1}
    assert!((embedding_constant(1, 1, 1.0) - 2f64.sqrt()).abs() < 1e-15);
    // d = 2, band 1: 1 + 4 * 2^{-2} + 4 * 3^{-2}
    let want = (1.0 + 1.0 + 4.0 / 9.0f64).sqrt();
    assert!((embedding_constant(2, 1, 2.0) - want).abs() < 1e-15);
}

#[test]
fn law_coefficient_variance() {
    // unconditioned in effect: generous radii
    let law = InitialLaw {
        s_gp: 2.0,
        amplitude: 0.1,
        band: 4,
        s0: 1.0,
        r0: Some(1e3),
        radius: 1e3,
        seed: 17,
    };
    let g = GridSpec::new(1, 16, 2).unwrap();
    let draws = sample_initial(&law, &g, 4000).unwrap();
    for xi in [0i64, 1, 3] {
        let mean_sq = draws
            .iter()
            .map(|u| u.to_spectrum().unwrap().coefficient(&[xi]).norm_sqr())
            .sum::<f64>()
            / draws.len() as f64;
        let want = 0.01 * (1.0 + (xi * xi) as f64).powf(-2.0);
        assert!((mean_sq / want - 1.0).abs() < 0.1, "xi={xi}: {mean_sq} vs {want}");
    }
    let outside = draws
        .iter()
        .map(|u| u.to_spectrum().unwrap().coefficient(&[6]).norm())
        .fold(0.0, f64::max);
    assert!(outside < 1e-15);
}
