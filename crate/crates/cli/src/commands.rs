use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use downscaler_core::checkpoint::Checkpoint;
use downscaler_core::config;
use downscaler_core::dataset::{make_dataset as build_dataset, render, AugmentFlags, Dataset, DatasetOptions, SamplePair, Split, CHANNELS};
use downscaler_core::imageio::{save_gray_u8, save_rgb};
use downscaler_core::metrics::{residual_map, MetricReport, Scores, CHANNEL_NAMES};
use downscaler_core::model::ModelConfig;
use downscaler_core::swe::csf::{decode_frame, encode_f32, frame_file, run_to_csf, CsfDir};
use downscaler_core::swe::{BasinSpec, SimConfig, SimState};
use downscaler_core::trainer::{self, baseline_st_interp, evaluate, predict, run_ablation, score, AblationMatrix, TrainConfig, TrainData};
use downscaler_core::{Error, Result};

use crate::{AblateArgs, EvalArgs, InferArgs, MakeDatasetArgs, ReportArgs, Resolution, SimulateArgs, StageConfigArgs, TrainArgs};

pub const SEED_ENV: &str = "ST_DOWNSCALER_SEED";

/// Explicit flag, then the environment variable.
fn seed_or_env(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SimulateDoc {
    sim: SimConfig,
    basin: BasinSpec,
    seed: u64,
}

impl Default for SimulateDoc {
    fn default() -> Self {
        SimulateDoc {
            sim: SimConfig::tidal_bay_coarse(),
            basin: BasinSpec::tidal_bay(),
            seed: 0,
        }
    }
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let doc: SimulateDoc = config::load(a.config.as_deref(), &a.overrides)?;
    let seed = seed_or_env(a.seed)?.unwrap_or(doc.seed);
    let cfg = match a.resolution {
        Resolution::Coarse => doc.sim,
        Resolution::Fine => doc.sim.refined(),
    };
    let (meta, summary) = run_to_csf(&cfg, &doc.basin, seed, &a.out)?;
    let drift = (summary.final_mass - summary.initial_mass) / summary.initial_mass;
    println!(
        "{}: {} frames ({} steps of {} s on {}x{}) -> {}",
        meta.basin,
        meta.n_frames,
        summary.steps,
        cfg.dt,
        cfg.ny,
        cfg.nx,
        a.out.display()
    );
    println!(
        "mass {:.6e} -> {:.6e} (relative change {drift:.3e}{}), max courant {:.3}, min depth {:.3} m",
        summary.initial_mass,
        summary.final_mass,
        if cfg.boundary.has_open() { ", open boundary" } else { "" },
        summary.max_courant,
        summary.min_depth
    );
    Ok(())
}

fn parse_split(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("split {s:?} is not a:b:c")))?;
    let [a, b, c] = parts[..] else {
        return Err(Error::Config(format!("split {s:?} needs three parts")));
    };
    let total = a + b + c;
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0 && total > 0.0 && total.is_finite()) {
        return Err(Error::Config(format!("split {s:?} must be non-negative with a positive sum")));
    }
    Ok([a / total, b / total, c / total])
}

fn parse_augment(s: &str) -> Result<AugmentFlags> {
    if s == "none" {
        return Ok(AugmentFlags::NONE);
    }
    if let Some(c) = s.chars().find(|c| !"hvrt".contains(*c)) {
        return Err(Error::Config(format!("augmentation {c:?} is not one of h, v, r, t")));
    }
    Ok(AugmentFlags {
        hflip: s.contains('h'),
        vflip: s.contains('v'),
        rotate: s.contains('r'),
        reverse: s.contains('t'),
    })
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("size {s:?} is not HxW"));
    let (h, w) = s.split_once('x').ok_or_else(bad)?;
    let h: usize = h.parse().map_err(|_| bad())?;
    let w: usize = w.parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

pub fn make_dataset(a: MakeDatasetArgs) -> Result<()> {
    let opts = DatasetOptions {
        pix: a.size.as_deref().map(parse_size).transpose()?,
        ratios: parse_split(&a.split)?,
        seed: seed_or_env(a.seed)?.unwrap_or(0),
        patch_size: a.patch,
        augment: parse_augment(&a.augment)?,
    };
    let m = build_dataset(&a.coarse, &a.fine, &a.out, &opts)?;
    println!(
        "{} samples of {}x{} (train {}, val {}, test {}) -> {}",
        m.samples.len(),
        m.height,
        m.width,
        m.train.len(),
        m.val.len(),
        m.test.len(),
        a.out.display()
    );
    Ok(())
}

/// Routes `model.*` and `train.*` overrides to their documents.
fn stage_configs(c: &StageConfigArgs) -> Result<(ModelConfig, TrainConfig)> {
    let mut model_over = Vec::new();
    let mut train_over = Vec::new();
    for o in &c.overrides {
        if let Some(rest) = o.strip_prefix("model.") {
            model_over.push(rest.to_string());
        } else if let Some(rest) = o.strip_prefix("train.") {
            train_over.push(rest.to_string());
        } else {
            return Err(Error::Config(format!("override {o:?} must start with model. or train.")));
        }
    }
    let model: ModelConfig = config::load(c.model_cfg.as_deref(), &model_over)?;
    let mut train: TrainConfig = config::load(c.train_cfg.as_deref(), &train_over)?;
    if let Some(seed) = seed_or_env(c.seed)? {
        train.seed = seed;
    }
    if train.log_every == 0 {
        train.log_every = 50;
    }
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (model_cfg, train_cfg) = stage_configs(&a.cfg)?;
    let ds = Dataset::open(&a.data)?;
    let data = TrainData::from_dataset(&ds)?;
    eprintln!(
        "training {} parameters on {} samples for {} iterations",
        trainer::param_count(&model_cfg)?,
        data.train.len(),
        train_cfg.total_iters
    );
    let out = trainer::train(&model_cfg, &train_cfg, &data, Some(&a.out))?;
    match &out.best {
        Some(b) => println!(
            "best val rmse {:.6e} at iteration {} (baseline {:.6e}) -> {}",
            b.rmse,
            b.iter,
            b.baseline_rmse,
            a.out.display()
        ),
        None => println!("no validation split; last checkpoint -> {}", a.out.display()),
    }
    Ok(())
}

fn scores_json(r: &MetricReport) -> serde_json::Value {
    json!({ "all": r.all, "intra": r.intra, "inter": r.inter, "channels": r.channels })
}

fn metrics_csv(rows: &[(&str, &MetricReport)]) -> String {
    let mut s = String::from("method,group,rmse,mae,ssim,gmsd\n");
    for (name, r) in rows {
        let groups = [("all", &r.all), ("intra", &r.intra), ("inter", &r.inter)]
            .into_iter()
            .chain(CHANNEL_NAMES.iter().copied().zip(r.channels.iter()));
        for (g, sc) in groups {
            let Scores { rmse, mae, ssim, gmsd } = *sc;
            s.push_str(&format!("{name},{g},{rmse:.9e},{mae:.9e},{ssim:.9},{gmsd:.9e}\n"));
        }
    }
    s
}

fn prediction_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("predictions").join(format!("{id}.bin"))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let split: Split = a.split.parse()?;
    let ck = Checkpoint::load(&a.ckpt)?;
    let ds = Dataset::open(&a.data)?;
    if let Some(n) = ck.header.norm_ranges {
        if n != ds.manifest.norm_ranges {
            eprintln!("warning: checkpoint normalization differs from the dataset's");
        }
    }
    let samples = ds.load(split)?;
    if samples.is_empty() {
        return Err(Error::Input(format!("split {} is empty", split.name())));
    }
    ck.config().check_size(ds.manifest.height, ds.manifest.width)?;
    let preds = predict(&ck.model, &samples, a.batch)?;
    let ours = score(&samples, &preds)?;
    let base = evaluate(None, &samples)?;

    create_dir(&a.out.join("predictions"))?;
    for (s, p) in samples.iter().zip(&preds) {
        write(&prediction_path(&a.out, &s.id), encode_f32(p.iter().map(|&v| v as f64)))?;
    }
    write(&a.out.join("metrics.csv"), metrics_csv(&[("ours", &ours), ("baseline", &base)]))?;
    write(&a.out.join("frames.csv"), ours.to_csv())?;
    write(&a.out.join("baseline_frames.csv"), base.to_csv())?;
    let data_dir = fs::canonicalize(&a.data).map_err(|e| Error::io(&a.data, e))?;
    let summary = json!({
        "checkpoint": a.ckpt.display().to_string(),
        "iteration": ck.header.iteration,
        "data": data_dir.display().to_string(),
        "split": split.name(),
        "samples": samples.iter().map(|s| s.id.clone()).collect::<Vec<_>>(),
        "ours": scores_json(&ours),
        "baseline": scores_json(&base),
    });
    write(&a.out.join("eval.json"), serde_json::to_vec_pretty(&summary)?)?;
    println!(
        "{} {} samples: rmse {:.6e} (baseline {:.6e}), inter rmse {:.6e} (baseline {:.6e})",
        split.name(),
        samples.len(),
        ours.all.rmse,
        base.all.rmse,
        ours.inter.rmse,
        base.inter.rmse
    );
    Ok(())
}

#[derive(Deserialize)]
struct EvalSummary {
    data: PathBuf,
    samples: Vec<String>,
}

pub fn report(a: ReportArgs) -> Result<()> {
    let summary: EvalSummary = serde_json::from_slice(&read(&a.eval_dir.join("eval.json"))?)?;
    let ds = Dataset::open(&summary.data)?;
    let (h, w) = (ds.manifest.height, ds.manifest.width);
    let n = 3 * CHANNELS * h * w;
    let mut samples = Vec::with_capacity(summary.samples.len());
    let mut preds = Vec::with_capacity(summary.samples.len());
    for id in &summary.samples {
        let s = ds.load_sample(id)?;
        let bytes = read(&prediction_path(&a.eval_dir, id))?;
        let p = downscaler_core::swe::csf::decode_f32(&bytes, n)?;
        samples.push(s);
        preds.push(p);
    }
    let rep = score(&samples, &preds)?;
    let maps = a.out.join("maps");
    create_dir(&maps)?;
    write(&a.out.join("report.csv"), rep.to_csv())?;
    let hw = h * w;
    for (s, p) in samples.iter().zip(&preds).take(a.max_maps) {
        let base = baseline_st_interp(s);
        for f in 0..3 {
            let frame = |v: &[f32]| v[f * CHANNELS * hw..(f + 1) * CHANNELS * hw].to_vec();
            save_rgb(&maps.join(format!("{}_f{f}_pred.png", s.id)), &frame(p), h, w)?;
            save_rgb(&maps.join(format!("{}_f{f}_truth.png", s.id)), &frame(&s.hr), h, w)?;
            for (c, name) in CHANNEL_NAMES.iter().enumerate() {
                let r = (f * CHANNELS + c) * hw..(f * CHANNELS + c + 1) * hw;
                for (tag, y) in [("ours", &p[r.clone()]), ("baseline", &base[r.clone()])] {
                    let img = residual_map(&s.hr[r.clone()], y, a.gain);
                    save_gray_u8(&maps.join(format!("{}_f{f}_{name}_{tag}.png", s.id)), &img, h, w)?;
                }
            }
        }
    }
    println!(
        "{} rows, maps for {} samples -> {}",
        rep.rows.len(),
        samples.len().min(a.max_maps),
        a.out.display()
    );
    Ok(())
}

fn load_frame(path: &Path, grid: &CsfDir) -> Result<SimState> {
    let [xi, u, v] = decode_frame(&read(path)?, grid.meta.cells())?;
    let widen = |g: Vec<f32>| g.into_iter().map(f64::from).collect::<Vec<_>>();
    Ok(SimState {
        nx: grid.meta.nx,
        ny: grid.meta.ny,
        xi: widen(xi),
        u: widen(u),
        v: widen(v),
        h_b: grid.h_b.clone(),
        mask: grid.mask.clone(),
        t: 0.0,
    })
}

pub fn infer(a: InferArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let norm = ck
        .header
        .norm_ranges
        .ok_or_else(|| Error::Input("checkpoint carries no normalization ranges".into()))?;
    let grid_dir = match &a.grid {
        Some(g) => g.clone(),
        None => a.frames[0].parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let grid = CsfDir::open(&grid_dir)?;
    let (h, w) = (grid.meta.ny, grid.meta.nx);
    ck.config().check_size(h, w)?;
    let mut x = Vec::with_capacity(2 * CHANNELS * h * w);
    let mut mask = vec![true; h * w];
    for path in &a.frames {
        let img = render(&load_frame(path, &grid)?, (h, w), &norm)?;
        x.extend_from_slice(&img.data);
        for (m, &k) in mask.iter_mut().zip(&img.mask) {
            *m &= k;
        }
    }
    let (mut y, _) = ck.model.forward(&x, 1, h, w)?;
    trainer::zero_land(&mut y, &mask);

    create_dir(&a.out)?;
    let hw = h * w;
    // Image channels are (U, V, ξ); CSF frames store ξ, U, V.
    const CSF_ORDER: [usize; 3] = [2, 0, 1];
    let mask = &mask;
    for f in 0..3 {
        let frame = &y[f * CHANNELS * hw..(f + 1) * CHANNELS * hw];
        let physical = CSF_ORDER.iter().flat_map(|&c| {
            (0..hw).map(move |p| if mask[p] { norm.denormalize(c, frame[c * hw + p] as f64) } else { 0.0 })
        });
        write(&a.out.join(frame_file(f)), encode_f32(physical.collect::<Vec<_>>()))?;
        save_rgb(&a.out.join(format!("preview_{f:06}.png")), frame, h, w)?;
    }
    println!("3 frames of {h}x{w} -> {}", a.out.display());
    Ok(())
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let matrix = AblationMatrix::from_json_bytes(&read(&a.matrix)?)?;
    let split: Split = a.split.parse()?;
    let (model_cfg, train_cfg) = stage_configs(&a.cfg)?;
    let ds = Dataset::open(&a.data)?;
    let data = TrainData::from_dataset(&ds)?;
    let test: Vec<SamplePair> = ds.load(split)?;
    if test.is_empty() {
        return Err(Error::Input(format!("split {} is empty", split.name())));
    }
    let rep = run_ablation(&model_cfg, &train_cfg, &data, &test, &matrix, Some(&a.out))?;
    print!("{}", rep.table_csv());
    Ok(())
}
