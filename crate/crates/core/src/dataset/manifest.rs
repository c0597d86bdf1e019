use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::swe::csf::{decode_f32, encode_f32, CsfDir};

use super::augment::AugmentFlags;
use super::pairs::{align, build_pairs_with, sample_id, SamplePair};
use super::render::{NormRanges, CHANNELS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_DIR: &str = "samples";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleInfo {
    pub id: String,
    pub coarse_index: usize,
    pub fine_index: usize,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    pub height: usize,
    pub width: usize,
    pub patch_size: usize,
    pub augment: AugmentFlags,
    pub norm_ranges: NormRanges,
    pub coarse_source: String,
    pub fine_source: String,
    pub samples: Vec<SampleInfo>,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Manifest {
    pub fn split(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(bytes)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::format("manifest", d));
        if self.ratios.iter().any(|r| !(0.0..=1.0).contains(r))
            || (self.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("split ratios {:?} must be in [0, 1] and sum to 1", self.ratios));
        }
        if self.height == 0 || self.width == 0 || self.height * self.width > 1 << 24 {
            return bad(format!("image size {}x{}", self.height, self.width));
        }
        if self.patch_size == 0 || self.patch_size > self.height.min(self.width) {
            return bad(format!("patch size {}", self.patch_size));
        }
        self.norm_ranges
            .validate()
            .map_err(|e| Error::format("manifest", e.to_string()))?;
        let mut seen = std::collections::HashSet::new();
        let known: std::collections::HashSet<&str> =
            self.samples.iter().map(|s| s.id.as_str()).collect();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !valid_id(id) {
                return bad(format!("sample id {id:?} is not a plain file stem"));
            }
            if !known.contains(id.as_str()) {
                return bad(format!("sample id {id} missing from the sample table"));
            }
            if !seen.insert(id) {
                return bad(format!("sample id {id} appears in more than one split"));
            }
        }
        Ok(())
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 32 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Shuffles `0..n` and cuts it into train/val/test by `ratios`.
pub fn split_ids(n: usize, ratios: [f64; 3], seed: u64) -> [Vec<usize>; 3] {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    [ids, val, test]
}

/// `lr`, then `hr`, then the mask as 0/1, all little-endian `f32`.
pub fn encode_sample(s: &SamplePair) -> Vec<u8> {
    let mask = s.mask.iter().map(|&m| if m { 1.0 } else { 0.0 });
    let vals = s.lr.iter().chain(&s.hr).map(|&v| v as f64).chain(mask);
    encode_f32(vals)
}

pub fn sample_floats(h: usize, w: usize) -> usize {
    (5 * CHANNELS + 1) * h * w
}

pub fn decode_sample(bytes: &[u8], info: &SampleInfo, h: usize, w: usize) -> Result<SamplePair> {
    let hw = h * w;
    let vals = decode_f32(bytes, sample_floats(h, w))?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::format("sample", format!("{} holds non-finite values", info.id)));
    }
    let (lr, rest) = vals.split_at(2 * CHANNELS * hw);
    let (hr, mask) = rest.split_at(3 * CHANNELS * hw);
    let mask: Vec<bool> = mask.iter().map(|&m| m > 0.5).collect();
    Ok(SamplePair {
        id: info.id.clone(),
        height: h,
        width: w,
        lr: lr.to_vec(),
        hr: hr.to_vec(),
        mask,
        coarse_index: info.coarse_index,
        fine_index: info.fine_index,
        t: [info.t0, info.t1],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetOptions {
    /// Rendered image size; defaults to the coarse grid shape.
    pub pix: Option<(usize, usize)>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub patch_size: usize,
    pub augment: AugmentFlags,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            pix: None,
            ratios: [0.6, 0.2, 0.2],
            seed: 0,
            patch_size: 64,
            augment: AugmentFlags::ALL,
        }
    }
}

/// Pairs two CSF runs, splits the pairs, freezes normalization ranges from
/// the training split's coarse frames and writes `manifest.json` plus one
/// `samples/<id>.bin` per pair under `out`.
pub fn make_dataset(coarse: &Path, fine: &Path, out: &Path, opts: &DatasetOptions) -> Result<Manifest> {
    let coarse_dir = CsfDir::open(coarse)?;
    let fine_dir = CsfDir::open(fine)?;
    let (ct, ft) = (&coarse_dir.meta.frame_times, &fine_dir.meta.frame_times);
    let index = align(ct, ft)?;
    let pix = opts.pix.unwrap_or((coarse_dir.meta.ny, coarse_dir.meta.nx));
    if opts.patch_size == 0 || opts.patch_size > pix.0.min(pix.1) {
        return Err(Error::Config(format!(
            "patch size {} does not fit {}x{} images",
            opts.patch_size, pix.0, pix.1
        )));
    }
    let [tr, va, te] = split_ids(index.len(), opts.ratios, opts.seed);
    if tr.is_empty() {
        return Err(Error::Input(format!(
            "{} pairs leave an empty training split",
            index.len()
        )));
    }
    let mut train_frames: Vec<usize> = tr.iter().flat_map(|&i| [index[i].coarse, index[i].coarse + 1]).collect();
    train_frames.sort_unstable();
    train_frames.dedup();
    let states = train_frames
        .iter()
        .map(|&k| coarse_dir.frame(k))
        .collect::<Result<Vec<_>>>()?;
    let norm = NormRanges::fit(&states)?;
    drop(states);

    let pairs = build_pairs_with(
        ct,
        ft,
        |k| coarse_dir.frame(k),
        |k| fine_dir.frame(k),
        pix,
        &norm,
        |_| true,
    )?;
    let sdir = out.join(SAMPLES_DIR);
    fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
    let mut samples = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let path = sdir.join(format!("{}.bin", p.id));
        fs::write(&path, encode_sample(p)).map_err(|e| Error::io(&path, e))?;
        samples.push(SampleInfo {
            id: p.id.clone(),
            coarse_index: p.coarse_index,
            fine_index: p.fine_index,
            t0: p.t[0],
            t1: p.t[1],
        });
    }
    let ids = |v: &[usize]| v.iter().map(|&i| sample_id(index[i].coarse)).collect();
    let manifest = Manifest {
        version: 1,
        seed: opts.seed,
        ratios: opts.ratios,
        height: pix.0,
        width: pix.1,
        patch_size: opts.patch_size,
        augment: opts.augment,
        norm_ranges: norm,
        coarse_source: coarse.display().to_string(),
        fine_source: fine.display().to_string(),
        samples,
        train: ids(&tr),
        val: ids(&va),
        test: ids(&te),
    };
    manifest.validate()?;
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A dataset directory written by [`make_dataset`].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Dataset {
            dir: dir.to_path_buf(),
            manifest: Manifest::from_json_bytes(&bytes)?,
        })
    }

    pub fn load_sample(&self, id: &str) -> Result<SamplePair> {
        let info = self
            .manifest
            .samples
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Input(format!("unknown sample id {id}")))?;
        let path = self.dir.join(SAMPLES_DIR).join(format!("{id}.bin"));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        decode_sample(&bytes, info, self.manifest.height, self.manifest.width)
    }

    pub fn load(&self, split: Split) -> Result<Vec<SamplePair>> {
        self.manifest
            .split(split)
            .iter()
            .map(|id| self.load_sample(id))
            .collect()
    }
}
