mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use umse_core::metaeval::{kendall_tau, paired_t_test, rouge_l, rouge_n, spearman, student_t_two_tailed};

use common::{kendall_brute, spearman_brute};

/// Random vector with deliberate ties: values drawn from a small grid.
fn tied_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let levels = rng.random_range(2..8);
    (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect()
}

#[test]
fn correlations_match_brute_force_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    let mut worst = 0f64;
    while checked < 100 {
        let n = rng.random_range(3..=30);
        let x = tied_vector(&mut rng, n);
        let y: Vec<f64> = if rng.random_bool(0.5) {
            tied_vector(&mut rng, n)
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let (Ok(rho), Ok(tau)) = (spearman(&x, &y), kendall_tau(&x, &y)) else {
            continue;
        };
        worst = worst
            .max((rho - spearman_brute(&x, &y)).abs())
            .max((tau - kendall_brute(&x, &y)).abs());
        checked += 1;
    }
    println!("worst correlation deviation {worst:e}");
    assert!(worst <= 1e-12);
}

fn t_density(t: f64, df: f64) -> f64 {
    let c = (libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0)).exp() / (df * std::f64::consts::PI).sqrt();
    c * (1.0 + t * t / df).powf(-(df + 1.0) / 2.0)
}

/// Two-tailed p by Simpson's rule over the density on `[0, |t|]`.
fn t_two_tailed_simpson(t: f64, df: f64) -> f64 {
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = t_density(0.0, df) + t_density(t.abs(), df);
    for i in 1..n {
        s += t_density(i as f64 * h, df) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

#[test]
fn t_tail_matches_numerical_integration() {
    for df in [1.0, 2.0, 3.0, 5.0, 9.0, 15.0, 30.0, 99.0] {
        for t in [0.1, 0.5, 1.0, 1.96, 2.5, 4.0] {
            let p = student_t_two_tailed(t, df);
            let q = t_two_tailed_simpson(t, df);
            assert!((p - q).abs() < 1e-8, "df {df} t {t}: {p} vs {q}");
        }
    }
}

#[test]
fn paired_t_reference_values() {
    // Differences 1, 2, 3, 4, 5: mean 3, sd sqrt(2.5), t = 3 / sqrt(0.5).
    let a = [2.0, 4.0, 6.0, 8.0, 10.0];
    let b = [1.0, 2.0, 3.0, 4.0, 5.0];
    let r = paired_t_test(&a, &b).unwrap();
    assert_eq!(r.df, 4);
    assert!((r.t - 3.0 / 0.5f64.sqrt()).abs() < 1e-12);
    assert!((r.p - t_two_tailed_simpson(r.t, 4.0)).abs() < 1e-8);
}

proptest! {
    #[test]
    fn correlations_invariant_under_monotone_maps(x in prop::collection::vec(-50i32..50, 3..25), seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(0..6) as f64).collect();
        let fx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() * 3.0 + 1.0).collect();
        if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&fx, &y)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if let (Ok(a), Ok(b)) = (kendall_tau(&x, &y), kendall_tau(&fx, &y)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((spearman(&neg, &y).unwrap() + r).abs() < 1e-12);
        }
    }

    #[test]
    fn rouge_scores_are_bounded(c in prop::collection::vec(0u8..6, 0..15), r in prop::collection::vec(0u8..6, 0..15)) {
        for p in [rouge_n(&c, &r, 1), rouge_n(&c, &r, 2), rouge_l(&c, &r)] {
            prop_assert!((0.0..=1.0).contains(&p.f1));
            prop_assert!((0.0..=1.0).contains(&p.precision));
            prop_assert!((0.0..=1.0).contains(&p.recall));
        }
        if !c.is_empty() {
            prop_assert_eq!(rouge_n(&c, &c, 1).f1, 1.0);
            prop_assert_eq!(rouge_l(&c, &c).f1, 1.0);
        }
    }
}
