//! Coastal Simulation Format: a directory with `meta.json`, `mask.bin`,
//! `bathy.bin` and one `frame_%06d.bin` per saved frame. Binary files are
//! raw little-endian `f32`, row-major `(ny, nx)`; a frame holds ξ, U, V
//! back to back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{BoundaryLayout, Constituent, SimConfig, SimState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsfMeta {
    pub format: String,
    pub version: u32,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub dt: f64,
    pub output_stride: usize,
    pub g: f64,
    pub f_c: f64,
    pub c_f: f64,
    pub h_min: f64,
    pub constituents: Vec<Constituent>,
    pub boundary: BoundaryLayout,
    pub basin: String,
    pub endianness: String,
    pub dtype: String,
    pub n_frames: usize,
    /// Physical time of each frame (s).
    pub frame_times: Vec<f64>,
}

pub const MAX_GRID_CELLS: usize = 1 << 26;

impl CsfMeta {
    pub fn for_sim(cfg: &SimConfig, basin: &str) -> Self {
        CsfMeta {
            format: "csf".into(),
            version: 1,
            nx: cfg.nx,
            ny: cfg.ny,
            dx: cfg.dx,
            dy: cfg.dy,
            dt: cfg.dt,
            output_stride: cfg.output_stride,
            g: cfg.g,
            f_c: cfg.f_c,
            c_f: cfg.c_f,
            h_min: cfg.h_min,
            constituents: cfg.constituents.clone(),
            boundary: cfg.boundary,
            basin: basin.into(),
            endianness: "little".into(),
            dtype: "f32".into(),
            n_frames: 0,
            frame_times: Vec::new(),
        }
    }

    /// Seconds between consecutive frames.
    pub fn cadence(&self) -> f64 {
        self.dt * self.output_stride as f64
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let meta: CsfMeta = serde_json::from_slice(bytes)?;
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::format("CSF meta.json", d));
        if self.format != "csf" {
            return bad(format!("format tag '{}'", self.format));
        }
        if self.endianness != "little" || self.dtype != "f32" {
            return bad(format!("unsupported encoding {}/{}", self.endianness, self.dtype));
        }
        if self.nx == 0 || self.ny == 0 || self.nx.saturating_mul(self.ny) > MAX_GRID_CELLS {
            return bad(format!("grid {}x{}", self.ny, self.nx));
        }
        if self.frame_times.len() != self.n_frames {
            return bad(format!(
                "n_frames {} but {} frame times",
                self.n_frames,
                self.frame_times.len()
            ));
        }
        if self.frame_times.iter().any(|t| !t.is_finite()) {
            return bad("non-finite frame time".into());
        }
        Ok(())
    }
}

pub fn encode_f32(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values
        .into_iter()
        .flat_map(|v| (v as f32).to_le_bytes())
        .collect()
}

/// Decodes exactly `n` little-endian `f32` values.
pub fn decode_f32(bytes: &[u8], n: usize) -> Result<Vec<f32>> {
    if bytes.len() != n.saturating_mul(4) {
        return Err(Error::format(
            "f32 blob",
            format!("expected {} bytes, found {}", n.saturating_mul(4), bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Splits a frame blob into (ξ, U, V). Non-finite values are rejected.
pub fn decode_frame(bytes: &[u8], cells: usize) -> Result<[Vec<f32>; 3]> {
    let all = decode_f32(bytes, cells.saturating_mul(3))?;
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::format("frame", "non-finite value"));
    }
    Ok([
        all[..cells].to_vec(),
        all[cells..2 * cells].to_vec(),
        all[2 * cells..].to_vec(),
    ])
}

pub fn frame_file(k: usize) -> String {
    format!("frame_{k:06}.bin")
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Streams frames into a CSF directory; `meta.json` is written by [`CsfWriter::finish`].
pub struct CsfWriter {
    dir: PathBuf,
    meta: CsfMeta,
}

impl CsfWriter {
    /// Creates the directory and writes the mask and bathymetry of `first`.
    pub fn create(dir: &Path, mut meta: CsfMeta, first: &SimState) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        meta.n_frames = 0;
        meta.frame_times.clear();
        write(
            &dir.join("mask.bin"),
            &encode_f32(first.mask.iter().map(|&m| if m { 1.0 } else { 0.0 })),
        )?;
        write(&dir.join("bathy.bin"), &encode_f32(first.h_b.iter().copied()))?;
        Ok(CsfWriter {
            dir: dir.to_path_buf(),
            meta,
        })
    }

    pub fn push(&mut self, state: &SimState) -> Result<()> {
        let bytes = encode_f32(
            state
                .xi
                .iter()
                .chain(&state.u)
                .chain(&state.v)
                .copied(),
        );
        write(&self.dir.join(frame_file(self.meta.n_frames)), &bytes)?;
        self.meta.n_frames += 1;
        self.meta.frame_times.push(state.t);
        Ok(())
    }

    pub fn finish(self) -> Result<CsfMeta> {
        write(
            &self.dir.join("meta.json"),
            serde_json::to_string_pretty(&self.meta)?.as_bytes(),
        )?;
        Ok(self.meta)
    }
}

/// Read access to a CSF directory.
#[derive(Clone, Debug)]
pub struct CsfDir {
    pub dir: PathBuf,
    pub meta: CsfMeta,
    pub mask: Vec<bool>,
    pub h_b: Vec<f64>,
}

impl CsfDir {
    pub fn open(dir: &Path) -> Result<Self> {
        let meta = CsfMeta::from_json_bytes(&read(&dir.join("meta.json"))?)?;
        let n = meta.cells();
        let mask = decode_f32(&read(&dir.join("mask.bin"))?, n)?
            .into_iter()
            .map(|v| v != 0.0)
            .collect();
        let h_b = decode_f32(&read(&dir.join("bathy.bin"))?, n)?
            .into_iter()
            .map(f64::from)
            .collect();
        Ok(CsfDir {
            dir: dir.to_path_buf(),
            meta,
            mask,
            h_b,
        })
    }

    pub fn frame(&self, k: usize) -> Result<SimState> {
        if k >= self.meta.n_frames {
            return Err(Error::Input(format!(
                "frame {k} out of range ({} frames)",
                self.meta.n_frames
            )));
        }
        let n = self.meta.cells();
        let [xi, u, v] = decode_frame(&read(&self.dir.join(frame_file(k)))?, n)?;
        let widen = |g: Vec<f32>| g.into_iter().map(f64::from).collect::<Vec<_>>();
        Ok(SimState {
            nx: self.meta.nx,
            ny: self.meta.ny,
            xi: widen(xi),
            u: widen(u),
            v: widen(v),
            h_b: self.h_b.clone(),
            mask: self.mask.clone(),
            t: self.meta.frame_times[k],
        })
    }
}

/// Runs a simulation straight into a CSF directory.
pub fn run_to_csf(
    cfg: &SimConfig,
    basin: &super::BasinSpec,
    seed: u64,
    dir: &Path,
) -> Result<(CsfMeta, super::RunSummary)> {
    cfg.validate()?;
    let first = basin.build(cfg, seed)?;
    let mut writer = CsfWriter::create(dir, CsfMeta::for_sim(cfg, basin.name()), &first)?;
    let summary = super::run_with(cfg, basin, seed, |s| writer.push(s))?;
    Ok((writer.finish()?, summary))
}
