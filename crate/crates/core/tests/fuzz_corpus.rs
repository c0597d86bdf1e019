//! Replays the checked-in fuzz seeds through the decoders. Seeds named
//! `valid_*` must decode; every other file only has to fail cleanly.

use std::fs;
use std::path::PathBuf;

use downscaler_core::checkpoint::Checkpoint;
use downscaler_core::config::load_bytes;
use downscaler_core::dataset::{decode_sample, Manifest, SampleInfo};
use downscaler_core::model::ModelConfig;
use downscaler_core::swe::csf::{decode_frame, CsfMeta};
use downscaler_core::swe::SimConfig;
use downscaler_core::trainer::{AblationMatrix, TrainConfig};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn check(target: &str, decode: impl Fn(&[u8]) -> bool) {
    for (name, bytes) in seeds(target) {
        let ok = decode(&bytes);
        if name.starts_with("valid") {
            assert!(ok, "{target}/{name} should decode");
        } else if ["truncated", "short", "zero_nx", "nan", "header_only", "wrong_shape", "duplicate_id", "empty", "bad_axes", "unknown_key"]
            .contains(&name.as_str())
        {
            assert!(!ok, "{target}/{name} should be rejected");
        }
    }
}

#[test]
fn csf_meta_seeds() {
    check("csf_meta", |b| CsfMeta::from_json_bytes(b).is_ok());
}

#[test]
fn csf_frame_seeds() {
    check("csf_frame", |b| {
        b.len() >= 2 && decode_frame(&b[2..], u16::from_le_bytes([b[0], b[1]]) as usize).is_ok()
    });
}

#[test]
fn checkpoint_seeds() {
    check("checkpoint", |b| match Checkpoint::decode(b) {
        Ok(ck) => {
            let again = ck.encode().unwrap();
            assert_eq!(Checkpoint::decode(&again).unwrap().encode().unwrap(), again);
            true
        }
        Err(_) => false,
    });
}

#[test]
fn manifest_seeds() {
    check("manifest", |b| Manifest::from_json_bytes(b).is_ok());
}

#[test]
fn sample_seeds() {
    let info = SampleInfo {
        id: "000000".into(),
        coarse_index: 0,
        fine_index: 0,
        t0: 0.0,
        t1: 1.0,
    };
    check("sample", |b| b.len() >= 2 && decode_sample(&b[2..], &info, b[0] as usize, b[1] as usize).is_ok());
}

fn split_config(b: &[u8]) -> (Option<&[u8]>, Vec<String>) {
    let (file, rest) = match b.iter().position(|&x| x == 0) {
        Some(i) => (&b[..i], &b[i + 1..]),
        None => (b, &[][..]),
    };
    let overrides = String::from_utf8_lossy(rest).lines().map(str::to_string).collect();
    ((!file.is_empty()).then_some(file), overrides)
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("config") {
        let (file, ov) = split_config(&bytes);
        let train = load_bytes::<TrainConfig>(file, &ov);
        let model = load_bytes::<ModelConfig>(file, &ov);
        let sim = load_bytes::<SimConfig>(file, &ov);
        match name.as_str() {
            "train_file" => assert!(!train.unwrap().ablation.use_diff),
            "model_file" => assert!(!model.unwrap().axes.d),
            "sim_overrides" => assert_eq!(sim.unwrap().nx, 16),
            "unknown_key" => assert!(train.is_err() && model.is_err() && sim.is_err()),
            _ => {}
        }
    }
}

#[test]
fn ablation_matrix_seeds() {
    check("ablation_matrix", |b| AblationMatrix::from_json_bytes(b).is_ok());
}
