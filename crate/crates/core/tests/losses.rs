use downscaler_core::gradcheck;
use downscaler_core::losses::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn mae_half_elements_differ() {
    let s = LossShape::new(1, 1, 2, 2);
    let y = [0.3f64, 0.3, 0.7, 0.1];
    let yp = [0.5f64, 0.1, 0.7, 0.1];
    assert!((mae_loss(&y, &yp, &[true; 4], s).unwrap().0 - 0.1).abs() < 1e-12);
}

#[test]
fn lp_single_pixel() {
    let s = LossShape::new(1, 1, 1, 1);
    let (l, _) = lp_loss(&[2.0f64], &[1.0], &[true], s, 1e-8).unwrap();
    assert!((l - 1.0 / (4.0 + 1e-8)).abs() < 1e-15);
}

#[test]
fn lp_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = LossShape::new(3, 3, 5, 5);
    let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let yp: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let m = vec![true; 25];
    let a = lp_loss(&y, &yp, &m, s, 0.0).unwrap().0;
    let scale = |v: &[f64]| v.iter().map(|x| 3.5 * x).collect::<Vec<_>>();
    let b = lp_loss(&scale(&y), &scale(&yp), &m, s, 0.0).unwrap().0;
    assert!((a - b).abs() < 1e-12 * a.max(1.0));
}

#[test]
fn diff_ramp_against_flat() {
    // 2x3 grid, one channel: Y(x) = x, Y' = 0
    let s = LossShape::new(1, 1, 2, 3);
    let y = [0.0f64, 1.0, 2.0, 0.0, 1.0, 2.0];
    let yp = [0.0f64; 6];
    let (l, _) = diff_loss(&y, &yp, &[true; 6], s).unwrap();
    assert!((l - 1.0).abs() < 1e-12);
}

#[test]
fn diff_ignores_constant_shift_and_needs_two_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = LossShape::new(3, 3, 4, 6);
    let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 0.37).collect();
    let m: Vec<bool> = (0..24).map(|i| i % 5 != 0).collect();
    assert!(diff_loss(&y, &shifted, &m, s).unwrap().0 < 1e-24);
    let flat = LossShape::new(1, 3, 1, 4);
    assert!(diff_loss(&[0.0f64; 12], &[0.0; 12], &[true; 4], flat).is_err());
}

#[test]
fn total_degenerate_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = LossShape::new(3, 3, 4, 4);
    let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let yp: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let m = vec![true; 16];
    let only_mae = LossWeights {
        a_mae: 1.0,
        a_lp: 0.0,
        a_diff: 0.0,
        eps: 1e-8,
    };
    let (t, g) = total_loss(&y, &yp, &m, s, &only_mae).unwrap();
    let (mae, gm) = mae_loss(&y, &yp, &m, s).unwrap();
    assert_eq!(t.total, mae);
    assert_eq!(g, gm);
    let (z, _) = total_loss(&y, &y, &m, s, &LossWeights::default()).unwrap();
    assert_eq!(z.total, 0.0);
    assert!(LossWeights { a_lp: -1.0, ..Default::default() }.validate().is_err());
}

#[test]
fn losses_are_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = LossShape::new(3, 3, 5, 4);
    for _ in 0..20 {
        let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let yp: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m: Vec<bool> = (0..20).map(|_| rng.gen_bool(0.7)).collect();
        if !m.iter().any(|&b| b) {
            continue;
        }
        let (l, _) = total_loss(&y, &yp, &m, s, &LossWeights::default()).unwrap();
        assert!(l.mae >= 0.0 && l.lp >= 0.0 && l.diff >= 0.0);
    }
}

#[test]
fn land_pixels_carry_no_gradient() {
    let s = LossShape::new(3, 3, 4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let yp: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let m: Vec<bool> = (0..16).map(|i| i != 5 && i != 10).collect();
    let (_, g) = total_loss(&y, &yp, &m, s, &LossWeights::default()).unwrap();
    for (i, v) in g.iter().enumerate() {
        if !m[i % 16] {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    for seed in 0..3 {
        for r in gradcheck::check_losses(seed, 80).unwrap() {
            assert!(r.max_rel_err <= 1e-3, "{r:?}");
        }
    }
}
