use downscaler_core::checkpoint::Checkpoint;
use downscaler_core::dataset::{AugmentFlags, SamplePair};
use downscaler_core::model::{Model, ModelConfig};
use downscaler_core::trainer::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S: usize = 16;

/// Smooth travelling-wave sample with a small land corner.
fn sample(k: usize) -> SamplePair {
    let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
    let phase: f32 = rng.gen_range(0.0..6.0);
    let hw = S * S;
    let field = |t: f32, c: usize, r: usize, col: usize| {
        let x = col as f32 / S as f32;
        let y = r as f32 / S as f32;
        0.5 + 0.3 * ((x * 3.0 + y * (c as f32 + 1.0)) + phase + 0.4 * t).sin() * (1.0 - 0.2 * c as f32)
    };
    let frames = |ts: &[f32]| {
        let mut v = Vec::with_capacity(ts.len() * 3 * hw);
        for &t in ts {
            for c in 0..3 {
                for r in 0..S {
                    for col in 0..S {
                        v.push(field(t, c, r, col));
                    }
                }
            }
        }
        v
    };
    let mask = (0..hw).map(|i| !(i / S < 3 && i % S < 3)).collect::<Vec<_>>();
    let mut lr = frames(&[0.0, 2.0]);
    let mut hr = frames(&[0.0, 1.0, 2.0]);
    for v in lr.iter_mut().chain(hr.iter_mut()) {
        *v += 0.01 * rng.gen_range(-1.0f32..1.0);
    }
    for (i, v) in hr.iter_mut().enumerate() {
        if !mask[i % hw] {
            *v = 0.0;
        }
    }
    SamplePair {
        id: format!("{k:06}"),
        height: S,
        width: S,
        lr,
        hr,
        mask,
        coarse_index: k,
        fine_index: 2 * k,
        t: [k as f64, k as f64 + 1.0],
    }
}

fn data(n: usize) -> TrainData {
    TrainData {
        train: (0..n).map(sample).collect(),
        val: (100..104).map(sample).collect(),
        norm_ranges: None,
        augment: AugmentFlags::ALL,
        patch_size: S,
    }
}

fn quick(iters: usize) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        total_iters: iters,
        lr_halve_at: iters / 2,
        batch: 2,
        seed: 7,
        val_every: 2,
        log_every: 0,
        ..TrainConfig::desk()
    }
}

#[test]
fn zero_iterations_emit_baseline_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        lr_halve_at: 0,
        ..quick(0)
    };
    let out = train(&ModelConfig::tiny(), &cfg, &data(4), Some(dir.path())).unwrap();
    assert!(out.log.is_empty());
    for f in ["ckpt_best.bin", "ckpt_last.bin", "train_log.csv", "val_log.csv", "train_config.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let ck = Checkpoint::load(&dir.path().join("ckpt_last.bin")).unwrap();
    assert_eq!(ck.header.iteration, 0);
    let s = sample(9);
    let (y, _) = ck.model.forward(&s.lr, 1, S, S).unwrap();
    let base = downscaler_core::model::st_interp(&s.lr, 1, s.frame_len());
    let worst = y.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(worst <= 1e-7, "{worst}");
}

#[test]
fn lr_halves_exactly_at_milestone() {
    let cfg = quick(6);
    assert_eq!(cfg.lr_at(2), 1e-3);
    assert_eq!(cfg.lr_at(3), 5e-4);
    let out = train(&ModelConfig::tiny(), &cfg, &data(4), None).unwrap();
    let lrs: Vec<f64> = out.log.iter().map(|r| r.lr).collect();
    assert_eq!(lrs, vec![1e-3, 1e-3, 1e-3, 5e-4, 5e-4, 5e-4]);
    assert_eq!(out.val_log.len(), 4);
    assert!(out.train_csv().starts_with("iter,lr,total,mae,lp,diff\n"));
}

#[test]
fn config_invariants() {
    assert!(TrainConfig { lr: 0.0, ..quick(4) }.validate().is_err());
    assert!(TrainConfig { batch: 0, ..quick(4) }.validate().is_err());
    assert!(TrainConfig { lr_halve_at: 5, ..quick(4) }.validate().is_err());
    let mut bad = quick(4);
    bad.ablation.attn_axes = "hx".into();
    assert!(bad.validate().is_err());
    let empty = TrainData { train: vec![], ..data(1) };
    assert!(train(&ModelConfig::tiny(), &quick(2), &empty, None).is_err());
}

#[test]
fn seeded_runs_are_bitwise_identical() {
    let d = data(4);
    let a = train(&ModelConfig::tiny(), &quick(4), &d, None).unwrap();
    let b = train(&ModelConfig::tiny(), &quick(4), &d, None).unwrap();
    assert_eq!(a.train_csv(), b.train_csv());
    let enc = |m: &Model<f32>| Checkpoint::new(m.clone(), 7, 4, None).encode().unwrap();
    assert_eq!(enc(&a.model), enc(&b.model));
    let c = train(&ModelConfig::tiny(), &TrainConfig { seed: 8, ..quick(4) }, &d, None).unwrap();
    assert_ne!(enc(&a.model), enc(&c.model));
}

#[test]
fn checkpoint_round_trip_preserves_forward() {
    let out = train(&ModelConfig::tiny(), &quick(3), &data(4), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.bin");
    Checkpoint::new(out.model.clone(), 7, 3, None).save(&p).unwrap();
    let back = Checkpoint::load(&p).unwrap();
    let s = sample(11);
    let (a, _) = out.model.forward(&s.lr, 1, S, S).unwrap();
    let (b, _) = back.model.forward(&s.lr, 1, S, S).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn baseline_of_identical_frames_repeats_them() {
    let mut s = sample(3);
    let n = s.frame_len();
    let (x0, x1) = s.lr.split_at_mut(n);
    x1.copy_from_slice(x0);
    let y = baseline_st_interp(&s);
    for f in 0..3 {
        for i in 0..n {
            let want = if s.mask[i % (S * S)] { s.lr[i] } else { 0.0 };
            assert_eq!(y[f * n + i], want);
        }
    }
}

#[test]
fn ablation_single_cell_and_all_off() {
    let matrix = AblationMatrix::from_json_bytes(
        br#"{"cells":[{"use_st_attn":false,"use_fsr":false,"use_lp":false,"use_diff":false}]}"#,
    )
    .unwrap();
    let d = data(4);
    let test: Vec<SamplePair> = (200..203).map(sample).collect();
    let dir = tempfile::tempdir().unwrap();
    let rep = run_ablation(&ModelConfig::tiny(), &quick(2), &d, &test, &matrix, Some(dir.path())).unwrap();
    assert_eq!(rep.cells.len(), 1);
    let cell = &rep.cells[0];
    assert_eq!(cell.column, "none");
    for (a, b) in [(&cell.all, &rep.baseline.all), (&cell.inter, &rep.baseline.inter)] {
        assert!((a.rmse - b.rmse).abs() < 1e-7 && (a.mae - b.mae).abs() < 1e-7);
    }
    let table = std::fs::read_to_string(dir.path().join("ablation_report.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "metric,baseline,none");
    assert_eq!(table.lines().count(), 5);
    assert!(dir.path().join("ablation_frames.csv").exists());
}

#[test]
fn ablation_columns_follow_the_matrix() {
    let matrix = AblationMatrix::from_json_bytes(
        br#"{"cells":[{"name":"full"},{"use_diff":false},{"attn_axes":"hv","use_fsr":false}]}"#,
    )
    .unwrap();
    let test: Vec<SamplePair> = (200..202).map(sample).collect();
    let rep = run_ablation(&ModelConfig::tiny(), &quick(2), &data(4), &test, &matrix, None).unwrap();
    let cols: Vec<&str> = rep.cells.iter().map(|c| c.column.as_str()).collect();
    assert_eq!(cols, ["full", "attn-hvd+fsr+lp+pos", "attn-hv+lp+diff+pos"]);
    let header = rep.table_csv().lines().next().unwrap().to_string();
    assert_eq!(header, "metric,baseline,full,attn-hvd+fsr+lp+pos,attn-hv+lp+diff+pos");
    assert!(rep.frames_csv().lines().count() == 1 + 2 * 4);
    assert!(AblationMatrix::from_json_bytes(br#"{"cells":[]}"#).is_err());
    assert!(AblationMatrix::from_json_bytes(br#"{"cells":[{},{}]}"#).is_err());
}
