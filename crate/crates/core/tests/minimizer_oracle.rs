mod common;

use common::{dense_gap, dense_minimizer, dense_objective, mm_steps_for, pattern_mask, random_image, rggb_mask, rng};
use joint_demosaick::cfa::{mosaic, CfaPattern, PatternKind};
use joint_demosaick::majorize::{majorizer_gap, mm_reference_iterate, objective_value, surrogate_value, QuadraticPrior};
use rand::Rng;

#[test]
fn library_bayer_matches_hand_mask() {
    let p = CfaPattern::new(PatternKind::BayerRggb);
    assert_eq!(pattern_mask(&p, 5, 7), rggb_mask(5, 7));
}

#[test]
fn objective_matches_dense_form() {
    let mut r = rng(3);
    let p = CfaPattern::new(PatternKind::BayerRggb);
    for _ in 0..50 {
        let x = random_image(&mut r, 3, 4, 0.0, 255.0);
        let y = mosaic(&random_image(&mut r, 3, 4, 0.0, 255.0), &p).unwrap();
        let sigma = r.random_range(1.0..20.0);
        let lambda = r.random_range(0.01..1.0);
        let a = objective_value(&x, &y, sigma, QuadraticPrior { lambda });
        let b = dense_objective(&x, &y, &rggb_mask(3, 4), sigma, lambda);
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
    }
}

#[test]
fn surrogate_gap_matches_dense_quadratic_form() {
    let mut r = rng(5);
    let p = CfaPattern::new(PatternKind::BayerGrbg);
    for &alpha in &[1.1, 2.0, 10.0] {
        for _ in 0..50 {
            let (x, x0) = (random_image(&mut r, 2, 3, 0.0, 255.0), random_image(&mut r, 2, 3, 0.0, 255.0));
            let y = mosaic(&random_image(&mut r, 2, 3, 0.0, 255.0), &p).unwrap();
            let sigma = r.random_range(1.0..20.0);
            let prior = QuadraticPrior { lambda: 0.1 };
            let mask = pattern_mask(&p, 2, 3);
            let gap = surrogate_value(&x, &x0, &y, sigma, alpha, prior) - objective_value(&x, &y, sigma, prior);
            let dense = dense_gap(&x, &x0, &mask, sigma, alpha);
            assert!((gap - dense).abs() <= 1e-9 * dense.abs().max(1.0), "{gap} vs {dense}");
            assert!((majorizer_gap(&x, &x0, &y, sigma, alpha) - dense).abs() <= 1e-9 * dense.abs().max(1.0));
        }
    }
}

#[test]
fn mm_limit_matches_dense_solve_on_every_layout() {
    let mut r = rng(8);
    for kind in PatternKind::ALL {
        let p = CfaPattern::new(kind);
        let (h, w) = (4, 4);
        let y = mosaic(&random_image(&mut r, h, w, 0.0, 255.0), &p).unwrap();
        let (alpha, lambda, sigma) = (1.5, 0.2, 3.0);
        let steps = mm_steps_for(alpha, lambda, sigma, 1e-14);
        let it = mm_reference_iterate(&y, sigma, alpha, lambda, steps).unwrap();
        let exact = dense_minimizer(&y, &pattern_mask(&p, h, w), sigma, lambda);
        let last = it.last().unwrap();
        for (a, b) in last.data().iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-8, "{kind:?}: {a} vs {b}");
        }
    }
}
