//! Evaluation metrics on normalized `[0, 1]` images with a water mask.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imageio::to_u8;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// GMSD stability constant for unit-range data.
pub const GMSD_C: f64 = 170.0 / (255.0 * 255.0);

pub const CHANNEL_NAMES: [&str; 3] = ["U", "V", "xi"];

fn masked_pairs<'a>(
    y: &'a [f32],
    yp: &'a [f32],
    mask: &'a [bool],
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    if y.len() != yp.len() || mask.is_empty() || y.len() % mask.len() != 0 {
        return Err(Error::Shape(format!(
            "metric inputs {} / {} with mask {}",
            y.len(),
            yp.len(),
            mask.len()
        )));
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::Input("metric mask has no water pixels".into()));
    }
    let hw = mask.len();
    Ok(y.iter()
        .zip(yp)
        .enumerate()
        .filter(move |(i, _)| mask[i % hw])
        .map(|(_, (&a, &b))| (a as f64, b as f64)))
}

/// Root mean squared error over water elements of any number of planes.
pub fn rmse(y: &[f32], yp: &[f32], mask: &[bool]) -> Result<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for (a, b) in masked_pairs(y, yp, mask)? {
        s += (a - b) * (a - b);
        n += 1;
    }
    Ok((s / n as f64).sqrt())
}

pub fn mae(y: &[f32], yp: &[f32], mask: &[bool]) -> Result<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for (a, b) in masked_pairs(y, yp, mask)? {
        s += (a - b).abs();
        n += 1;
    }
    Ok(s / n as f64)
}

/// Mean signed error `mean(Y' − Y)` over water elements.
pub fn mean_error(y: &[f32], yp: &[f32], mask: &[bool]) -> Result<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for (a, b) in masked_pairs(y, yp, mask)? {
        s += b - a;
        n += 1;
    }
    Ok(s / n as f64)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for a in &g {
        for b in &g {
            w.push(a * b / (s * s));
        }
    }
    w
}

fn check_plane(a: &[f32], b: &[f32], mask: &[bool], h: usize, w: usize) -> Result<()> {
    if a.len() != h * w || b.len() != h * w || mask.len() != h * w {
        return Err(Error::Shape(format!(
            "plane sizes {} / {} / mask {} do not match {h}x{w}",
            a.len(),
            b.len(),
            mask.len()
        )));
    }
    Ok(())
}

/// Structural similarity of two single-channel `h × w` images.
///
/// Uses an 11 × 11 Gaussian window (σ = 1.5) at every position where it
/// fits inside the image and covers only water, and averages the SSIM map
/// over those windows.
pub fn ssim(a: &[f32], b: &[f32], mask: &[bool], h: usize, w: usize) -> Result<f64> {
    check_plane(a, b, mask, h, w)?;
    let k = SSIM_WINDOW;
    if h < k || w < k {
        return Err(Error::Input(format!("{h}x{w} image is smaller than the SSIM window")));
    }
    let win = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let land = land_prefix(mask, h, w);
    let (mut total, mut count) = (0.0, 0usize);
    for r in 0..=h - k {
        for c in 0..=w - k {
            if land_in(&land, w, r, c, k) > 0 {
                continue;
            }
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let p = (r + i) * w + c + j;
                    let g = win[i * k + j];
                    let (x, y) = (a[p] as f64, b[p] as f64);
                    ma += g * x;
                    mb += g * y;
                    saa += g * x * x;
                    sbb += g * y * y;
                    sab += g * x * y;
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Input("no all-water SSIM window".into()));
    }
    Ok(total / count as f64)
}

fn land_prefix(mask: &[bool], h: usize, w: usize) -> Vec<u32> {
    let mut s = vec![0u32; (h + 1) * (w + 1)];
    for r in 0..h {
        for c in 0..w {
            s[(r + 1) * (w + 1) + c + 1] =
                (!mask[r * w + c]) as u32 + s[r * (w + 1) + c + 1] + s[(r + 1) * (w + 1) + c] - s[r * (w + 1) + c];
        }
    }
    s
}

fn land_in(s: &[u32], w: usize, r: usize, c: usize, k: usize) -> u32 {
    let at = |rr: usize, cc: usize| s[rr * (w + 1) + cc];
    at(r + k, c + k) + at(r, c) - at(r, c + k) - at(r + k, c)
}

fn prewitt(x: &[f32], w: usize, r: usize, c: usize) -> f64 {
    let v = |i: usize, j: usize| x[i * w + j] as f64;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for d in 0..3 {
        gx += v(r - 1 + d, c - 1) - v(r - 1 + d, c + 1);
        gy += v(r - 1, c - 1 + d) - v(r + 1, c - 1 + d);
    }
    ((gx / 3.0).powi(2) + (gy / 3.0).powi(2)).sqrt()
}

/// Gradient-magnitude similarity deviation: the population standard
/// deviation of the Prewitt gradient-similarity map over interior pixels
/// whose 3 × 3 neighbourhood is all water.
pub fn gmsd(a: &[f32], b: &[f32], mask: &[bool], h: usize, w: usize) -> Result<f64> {
    check_plane(a, b, mask, h, w)?;
    if h < 3 || w < 3 {
        return Err(Error::Input(format!("{h}x{w} image too small for GMSD")));
    }
    let land = land_prefix(mask, h, w);
    let mut vals = Vec::new();
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            if land_in(&land, w, r - 1, c - 1, 3) > 0 {
                continue;
            }
            let (ma, mb) = (prewitt(a, w, r, c), prewitt(b, w, r, c));
            vals.push((2.0 * ma * mb + GMSD_C) / (ma * ma + mb * mb + GMSD_C));
        }
    }
    if vals.is_empty() {
        return Err(Error::Input("no interior water pixels for GMSD".into()));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    Ok((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// `|Y − Y'|·gain` clamped to `[0, 1]` and quantized to 8 bits.
pub fn residual_map(y: &[f32], yp: &[f32], gain: f64) -> Vec<u8> {
    y.iter()
        .zip(yp)
        .map(|(&a, &b)| to_u8((a - b).abs() * gain as f32))
        .collect()
}

/// `|Y(t₂) − Y(t₁)|·gain` for two frames of the same channel.
pub fn frame_difference_map(first: &[f32], second: &[f32], gain: f64) -> Vec<u8> {
    residual_map(first, second, gain)
}

/// Intra frames coincide with input times; the middle frame is inter.
pub fn frame_tag(frame: usize) -> &'static str {
    if frame == 1 {
        "inter"
    } else {
        "intra"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub sample: String,
    pub frame: usize,
    pub channel: usize,
    pub rmse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub gmsd: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Scores {
    pub rmse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub gmsd: f64,
}

impl Scores {
    fn mean<'a>(it: impl IntoIterator<Item = &'a Scores>) -> Scores {
        let mut acc = Scores::default();
        let mut n = 0.0;
        for s in it {
            acc.rmse += s.rmse;
            acc.mae += s.mae;
            acc.ssim += s.ssim;
            acc.gmsd += s.gmsd;
            n += 1.0;
        }
        if n > 0.0 {
            acc.rmse /= n;
            acc.mae /= n;
            acc.ssim /= n;
            acc.gmsd /= n;
        }
        acc
    }
}

/// Per-sample scores: all frames, intra frames, the inter frame, and per
/// channel. RMSE and MAE pool the group's water elements; SSIM and GMSD
/// average the group's single-channel values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleScores {
    pub sample: String,
    pub all: Scores,
    pub intra: Scores,
    pub inter: Scores,
    pub channels: Vec<Scores>,
}

/// Scores one prediction `yp` against `y`, both `[3, C, h, w]`.
pub fn score_sample(
    id: &str,
    y: &[f32],
    yp: &[f32],
    mask: &[bool],
    (c, h, w): (usize, usize, usize),
) -> Result<(SampleScores, Vec<MetricRow>)> {
    let hw = h * w;
    if y.len() != 3 * c * hw || yp.len() != y.len() || mask.len() != hw {
        return Err(Error::Shape(format!(
            "sample {id}: {} / {} values for [3, {c}, {h}, {w}]",
            y.len(),
            yp.len()
        )));
    }
    let plane = |f: usize, ch: usize| (f * c + ch) * hw..(f * c + ch + 1) * hw;
    let mut rows = Vec::with_capacity(3 * c);
    for f in 0..3 {
        for ch in 0..c {
            let r = plane(f, ch);
            rows.push(MetricRow {
                sample: id.to_string(),
                frame: f,
                channel: ch,
                rmse: rmse(&y[r.clone()], &yp[r.clone()], mask)?,
                mae: mae(&y[r.clone()], &yp[r.clone()], mask)?,
                ssim: ssim(&y[r.clone()], &yp[r.clone()], mask, h, w)?,
                gmsd: gmsd(&y[r.clone()], &yp[r], mask, h, w)?,
            });
        }
    }
    let group = |keep: &dyn Fn(usize, usize) -> bool| -> Result<Scores> {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for f in 0..3 {
            for ch in 0..c {
                if keep(f, ch) {
                    a.extend_from_slice(&y[plane(f, ch)]);
                    b.extend_from_slice(&yp[plane(f, ch)]);
                }
            }
        }
        let sel: Vec<&MetricRow> = rows.iter().filter(|r| keep(r.frame, r.channel)).collect();
        let n = sel.len() as f64;
        Ok(Scores {
            rmse: rmse(&a, &b, mask)?,
            mae: mae(&a, &b, mask)?,
            ssim: sel.iter().map(|r| r.ssim).sum::<f64>() / n,
            gmsd: sel.iter().map(|r| r.gmsd).sum::<f64>() / n,
        })
    };
    let scores = SampleScores {
        sample: id.to_string(),
        all: group(&|_, _| true)?,
        intra: group(&|f, _| f != 1)?,
        inter: group(&|f, _| f == 1)?,
        channels: (0..c).map(|k| group(&|_, ch| ch == k)).collect::<Result<_>>()?,
    };
    Ok((scores, rows))
}

/// Per-sample rows plus aggregates (means of the per-sample scores).
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricReport {
    pub samples: Vec<SampleScores>,
    pub rows: Vec<MetricRow>,
    pub all: Scores,
    pub intra: Scores,
    pub inter: Scores,
    pub channels: Vec<Scores>,
}

impl MetricReport {
    pub fn push(&mut self, sample: SampleScores, rows: Vec<MetricRow>) {
        self.samples.push(sample);
        self.rows.extend(rows);
        self.all = Scores::mean(self.samples.iter().map(|s| &s.all));
        self.intra = Scores::mean(self.samples.iter().map(|s| &s.intra));
        self.inter = Scores::mean(self.samples.iter().map(|s| &s.inter));
        let c = self.samples[0].channels.len();
        self.channels = (0..c)
            .map(|k| Scores::mean(self.samples.iter().map(|s| &s.channels[k])))
            .collect();
    }

    /// One row per sample, frame and channel. The `lpips` column is left
    /// empty for external tools.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,frame,channel,rmse,mae,ssim,gmsd,lpips,tag\n");
        for r in &self.rows {
            let name = CHANNEL_NAMES.get(r.channel).copied().unwrap_or("?");
            let _ = writeln!(
                out,
                "{},{},{},{:.8},{:.8},{:.8},{:.8},,{}",
                r.sample,
                r.frame,
                name,
                r.rmse,
                r.mae,
                r.ssim,
                r.gmsd,
                frame_tag(r.frame)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_two_pixels() {
        let v = rmse(&[0.0, 0.2], &[0.2, 0.2], &[true, true]).unwrap();
        assert!((v - (0.04f64 / 2.0).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn residual_gain() {
        assert_eq!(residual_map(&[0.01], &[0.0], 50.0), vec![128]);
        assert_eq!(residual_map(&[0.9], &[0.1], 0.0), vec![0]);
        assert_eq!(residual_map(&[0.3], &[0.3], 50.0), vec![0]);
    }
}
