//! Training loop, evaluation and the ablation harness.

mod ablation;
mod adam;
mod eval;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::dataset::{augment, crop_patch, AugmentFlags, Dataset, NormRanges, SamplePair, Split, CHANNELS};
use crate::error::{Error, Result};
use crate::losses::{batch_loss, LossShape, LossWeights};
use crate::model::{AttentionAxes, Model, ModelConfig};
use crate::nn::Params;

pub use ablation::{run_ablation, AblationCell, AblationMatrix, AblationReport, AblationRow};
pub use adam::{clip_grad_norm, Adam};
pub use eval::{baseline_st_interp, evaluate, predict, score, stack, zero_land};

/// Switches for ablation runs; each one can only turn a component off.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub use_st_attn: bool,
    pub use_fsr: bool,
    pub use_lp: bool,
    pub use_diff: bool,
    /// Subset of `hvd`.
    pub attn_axes: String,
    pub use_pos: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            use_st_attn: true,
            use_fsr: true,
            use_lp: true,
            use_diff: true,
            attn_axes: "hvd".into(),
            use_pos: true,
        }
    }
}

impl AblationFlags {
    pub fn axes(&self) -> Result<AttentionAxes> {
        if let Some(c) = self.attn_axes.chars().find(|c| !"hvd".contains(*c)) {
            return Err(Error::Config(format!("attention axis {c:?} is not one of h, v, d")));
        }
        Ok(AttentionAxes {
            h: self.attn_axes.contains('h'),
            v: self.attn_axes.contains('v'),
            d: self.attn_axes.contains('d'),
        })
    }

    /// Applies the flags to copies of the model config and loss weights.
    pub fn apply(&self, model: &ModelConfig, weights: &LossWeights) -> Result<(ModelConfig, LossWeights)> {
        let axes = self.axes()?;
        let mut m = model.clone();
        m.use_attention &= self.use_st_attn && (axes.h || axes.v || axes.d);
        m.axes = AttentionAxes {
            h: m.axes.h && axes.h,
            v: m.axes.v && axes.v,
            d: m.axes.d && axes.d,
        };
        m.use_fsr &= self.use_fsr;
        m.use_pos &= self.use_pos;
        let mut w = *weights;
        if !self.use_lp {
            w.a_lp = 0.0;
        }
        if !self.use_diff {
            w.a_diff = 0.0;
        }
        Ok((m, w))
    }

    /// True when every learnable component and auxiliary loss is switched off,
    /// which leaves nothing for training to change.
    pub fn all_off(&self) -> bool {
        !(self.use_st_attn && !self.attn_axes.is_empty()) && !self.use_fsr && !self.use_lp && !self.use_diff
    }

    /// Compact column label, e.g. `attn-hvd+fsr+lp+diff+pos`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.use_st_attn && !self.attn_axes.is_empty() {
            parts.push(format!("attn-{}", self.attn_axes));
        }
        for (on, name) in [
            (self.use_fsr, "fsr"),
            (self.use_lp, "lp"),
            (self.use_diff, "diff"),
            (self.use_pos && self.use_st_attn, "pos"),
        ] {
            if on {
                parts.push(name.to_string());
            }
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_halve_at: usize,
    pub total_iters: usize,
    pub batch: usize,
    pub seed: u64,
    /// Write `ckpt_last.bin` every this many iterations (0: only at the end).
    pub checkpoint_every: usize,
    pub val_every: usize,
    pub val_samples: usize,
    /// Patch side; 0 uses the dataset's patch size.
    pub patch_size: usize,
    /// Overrides the dataset's augmentation flags.
    pub augment: Option<AugmentFlags>,
    pub loss: LossWeights,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub grad_clip: Option<f64>,
    pub ablation: AblationFlags,
    /// Print a progress line to stderr every this many iterations (0: off).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            lr: 1e-4,
            lr_halve_at: 600,
            total_iters: 2000,
            batch: 8,
            seed: 0,
            checkpoint_every: 0,
            val_every: 100,
            val_samples: 32,
            patch_size: 0,
            augment: None,
            loss: LossWeights::default(),
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: None,
            ablation: AblationFlags::default(),
            log_every: 0,
        }
    }

    pub fn full() -> Self {
        TrainConfig {
            lr_halve_at: 30_000,
            total_iters: 100_000,
            batch: 24,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.batch == 0 {
            return bad("batch must be >= 1".into());
        }
        if self.lr_halve_at > self.total_iters {
            return bad(format!(
                "lr_halve_at {} exceeds total_iters {}",
                self.lr_halve_at, self.total_iters
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam coefficients out of range".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip must be > 0, got {c}"));
            }
        }
        self.loss.validate()?;
        self.ablation.axes()?;
        Ok(())
    }

    /// Learning rate used at iteration `k` (0-based).
    pub fn lr_at(&self, k: usize) -> f64 {
        if k >= self.lr_halve_at {
            self.lr * 0.5
        } else {
            self.lr
        }
    }
}

/// In-memory training inputs.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub train: Vec<SamplePair>,
    pub val: Vec<SamplePair>,
    pub norm_ranges: Option<NormRanges>,
    pub augment: AugmentFlags,
    pub patch_size: usize,
}

impl TrainData {
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        Ok(TrainData {
            train: ds.load(Split::Train)?,
            val: ds.load(Split::Val)?,
            norm_ranges: Some(ds.manifest.norm_ranges),
            augment: ds.manifest.augment,
            patch_size: ds.manifest.patch_size,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainLogRow {
    pub iter: usize,
    pub lr: f64,
    pub total: f64,
    pub mae: f64,
    pub lp: f64,
    pub diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValRow {
    pub iter: usize,
    pub rmse: f64,
    pub mae: f64,
    pub baseline_rmse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub best_model: Model<f32>,
    pub best: Option<ValRow>,
    pub log: Vec<TrainLogRow>,
    pub val_log: Vec<ValRow>,
}

impl TrainOutcome {
    pub fn train_csv(&self) -> String {
        let mut s = String::from("iter,lr,total,mae,lp,diff\n");
        for r in &self.log {
            let _ = writeln!(s, "{},{:e},{:.9e},{:.9e},{:.9e},{:.9e}", r.iter, r.lr, r.total, r.mae, r.lp, r.diff);
        }
        s
    }

    pub fn val_csv(&self) -> String {
        let mut s = String::from("iter,val_rmse,val_mae,baseline_rmse\n");
        for r in &self.val_log {
            let _ = writeln!(s, "{},{:.9e},{:.9e},{:.9e}", r.iter, r.rmse, r.mae, r.baseline_rmse);
        }
        s
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn validate_on(model: &Model<f32>, val: &[SamplePair], iter: usize) -> Result<ValRow> {
    let ours = evaluate(Some(model), val)?;
    let base = evaluate(None, val)?;
    Ok(ValRow {
        iter,
        rmse: ours.all.rmse,
        mae: ours.all.mae,
        baseline_rmse: base.all.rmse,
    })
}

/// Trains a model. With `out` set, writes `train_log.csv`, `val_log.csv`,
/// `ckpt_best.bin` and `ckpt_last.bin` there.
pub fn train(model_cfg: &ModelConfig, cfg: &TrainConfig, data: &TrainData, out: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (mcfg, weights) = cfg.ablation.apply(model_cfg, &cfg.loss)?;
    mcfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    let patch = if cfg.patch_size > 0 { cfg.patch_size } else { data.patch_size };
    let aug = cfg.augment.unwrap_or(data.augment);
    mcfg.check_size(patch, patch)?;
    let val: Vec<SamplePair> = data.val.iter().take(cfg.val_samples).cloned().collect();
    if let Some(v) = val.first() {
        mcfg.check_size(v.height, v.width)?;
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut model = Model::<f32>::new(mcfg.clone(), cfg.seed)?;
    let mut adam = Adam::new(&model, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_da7a);
    let shape = LossShape::new(3, CHANNELS, patch, patch);
    let ckpt = |m: &Model<f32>, iter: usize| Checkpoint::new(m.clone(), cfg.seed, iter, data.norm_ranges);

    let mut log = Vec::with_capacity(cfg.total_iters);
    let mut val_log = Vec::new();
    let mut best: Option<ValRow> = None;
    let mut best_model = model.clone();
    let mut consider = |m: &Model<f32>, iter: usize, val_log: &mut Vec<ValRow>| -> Result<()> {
        if val.is_empty() {
            return Ok(());
        }
        let row = validate_on(m, &val, iter)?;
        if !row.rmse.is_finite() {
            return Err(Error::NonFinite {
                stage: "validation".into(),
                detail: format!("val rmse at iteration {iter}"),
            });
        }
        if best.as_ref().map_or(true, |b| row.rmse < b.rmse) {
            best = Some(row.clone());
            best_model = m.clone();
            if let Some(dir) = out {
                ckpt(m, iter).save(&dir.join("ckpt_best.bin"))?;
            }
        }
        val_log.push(row);
        Ok(())
    };
    consider(&model, 0, &mut val_log)?;

    for k in 0..cfg.total_iters {
        let mut batch = Vec::with_capacity(cfg.batch);
        let mut ids = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let s = &data.train[rng.gen_range(0..data.train.len())];
            let p = crop_patch(s, patch, &mut rng)?;
            batch.push(augment(&p, aug, &mut rng)?);
            ids.push(s.id.clone());
        }
        let refs: Vec<&SamplePair> = batch.iter().collect();
        let (x, y, masks) = stack(&refs)?;
        let (yp, cache) = model.forward(&x, cfg.batch, patch, patch)?;
        let (loss, dy) = batch_loss(&y, &yp, &masks, shape, &weights)?;
        if !loss.total.is_finite() {
            if let Some(dir) = out {
                write(&dir.join("nonfinite_batch.json"), &serde_json::to_vec(&ids)?)?;
            }
            return Err(Error::NonFinite {
                stage: "loss".into(),
                detail: format!("iteration {k}, batch ids {ids:?}"),
            });
        }
        let mut grad = model.zeros_like();
        model.backward(&cache, &dy, &mut grad);
        if let Some(c) = cfg.grad_clip {
            clip_grad_norm(&mut grad, c);
        }
        let lr = cfg.lr_at(k);
        adam.step(&mut model, &grad, lr);
        let row = TrainLogRow {
            iter: k,
            lr,
            total: loss.total,
            mae: loss.mae,
            lp: loss.lp,
            diff: loss.diff,
        };
        if cfg.log_every > 0 && (k + 1) % cfg.log_every == 0 {
            eprintln!(
                "iter {:>6}  lr {:.2e}  loss {:.5} (mae {:.5} lp {:.5} diff {:.6})",
                k + 1,
                lr,
                row.total,
                row.mae,
                row.lp,
                row.diff
            );
        }
        log.push(row);
        let done = k + 1;
        if cfg.val_every > 0 && (done % cfg.val_every == 0 || done == cfg.total_iters) {
            consider(&model, done, &mut val_log)?;
            if cfg.log_every > 0 {
                if let Some(r) = val_log.last() {
                    eprintln!("val {:>6}  rmse {:.6}  baseline {:.6}", r.iter, r.rmse, r.baseline_rmse);
                }
            }
        }
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
                ckpt(&model, done).save(&dir.join("ckpt_last.bin"))?;
            }
        }
    }
    if !model.all_finite() {
        return Err(Error::NonFinite {
            stage: "parameters".into(),
            detail: "after training".into(),
        });
    }
    let outcome = TrainOutcome {
        best_model: if best.is_some() { best_model } else { model.clone() },
        model,
        best,
        log,
        val_log,
    };
    if let Some(dir) = out {
        ckpt(&outcome.model, cfg.total_iters).save(&dir.join("ckpt_last.bin"))?;
        if outcome.best.is_none() {
            ckpt(&outcome.model, cfg.total_iters).save(&dir.join("ckpt_best.bin"))?;
        }
        write(&dir.join("train_log.csv"), outcome.train_csv().as_bytes())?;
        write(&dir.join("val_log.csv"), outcome.val_csv().as_bytes())?;
        write(
            &dir.join("train_config.json"),
            &serde_json::to_vec_pretty(&serde_json::json!({ "model": mcfg, "train": cfg }))?,
        )?;
    }
    Ok(outcome)
}

/// Number of learnable parameters for a config.
pub fn param_count(cfg: &ModelConfig) -> Result<usize> {
    Ok(Model::<f32>::zeros(cfg.clone())?.param_count())
}
