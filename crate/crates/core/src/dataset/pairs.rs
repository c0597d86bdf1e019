use crate::error::{Error, Result};
use crate::swe::csf::CsfDir;
use crate::swe::SimState;

use super::render::{render, FrameImage, NormRanges, CHANNELS};

/// Frame indices of one supervised pair: coarse `n, n+1` against fine
/// `fine, fine+1, fine+2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairIndex {
    pub coarse: usize,
    pub fine: usize,
}

/// Two coarse frames and the three fine frames spanning the same interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub height: usize,
    pub width: usize,
    /// `[2, 3, h, w]`
    pub lr: Vec<f32>,
    /// `[3, 3, h, w]`
    pub hr: Vec<f32>,
    pub mask: Vec<bool>,
    pub coarse_index: usize,
    pub fine_index: usize,
    /// Physical times of the coarse endpoints (s).
    pub t: [f64; 2],
}

impl SamplePair {
    pub fn frame_len(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn mask_f32(&self) -> Vec<f32> {
        self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }

    pub fn water_pixels(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

pub fn sample_id(coarse_index: usize) -> String {
    format!("{coarse_index:06}")
}

/// Matches every coarse interval `(t_n, t_{n+1})` with fine frames
/// `(t_{2n}, t_{2n+1}, t_{2n+2})`.
///
/// The fine series must sample at exactly half the coarse cadence, starting
/// at the same time; the error names the first timestamp that disagrees.
pub fn align(coarse: &[f64], fine: &[f64]) -> Result<Vec<PairIndex>> {
    if coarse.len() < 2 {
        return Err(Error::Alignment(format!(
            "coarse series has {} frames, need at least 2",
            coarse.len()
        )));
    }
    let cadence = coarse[1] - coarse[0];
    if !(cadence > 0.0) {
        return Err(Error::Alignment(format!(
            "coarse cadence {cadence} s is not positive"
        )));
    }
    let tol = 1e-6 * cadence;
    let mut out = Vec::with_capacity(coarse.len() - 1);
    for n in 0..coarse.len() {
        let expect = coarse[0] + n as f64 * cadence;
        if (coarse[n] - expect).abs() > tol {
            return Err(Error::Alignment(format!(
                "coarse frame {n} at t = {} s, expected {expect} s",
                coarse[n]
            )));
        }
    }
    for (m, &tf) in fine.iter().enumerate().take(2 * coarse.len() - 1) {
        let expect = coarse[0] + m as f64 * cadence / 2.0;
        if (tf - expect).abs() > tol {
            return Err(Error::Alignment(format!(
                "fine frame {m} at t = {tf} s, expected {expect} s (half the coarse cadence of {cadence} s)"
            )));
        }
    }
    for n in 0..coarse.len() - 1 {
        if 2 * n + 2 >= fine.len() {
            break;
        }
        out.push(PairIndex {
            coarse: n,
            fine: 2 * n,
        });
    }
    if out.is_empty() {
        return Err(Error::Alignment(format!(
            "fine series with {} frames covers no coarse interval",
            fine.len()
        )));
    }
    Ok(out)
}

fn assemble(
    idx: PairIndex,
    lr: [&FrameImage; 2],
    hr: [&FrameImage; 3],
) -> Result<SamplePair> {
    let (h, w) = (lr[0].height, lr[0].width);
    if lr.iter().chain(hr.iter()).any(|f| f.height != h || f.width != w) {
        return Err(Error::Shape("coarse and fine frames render to different sizes".into()));
    }
    let hw = h * w;
    let mask: Vec<bool> = (0..hw)
        .map(|p| lr.iter().chain(hr.iter()).all(|f| f.mask[p]))
        .collect();
    let pack = |frames: &[&FrameImage]| {
        let mut out = Vec::with_capacity(frames.len() * CHANNELS * hw);
        for f in frames {
            for c in 0..CHANNELS {
                out.extend((0..hw).map(|p| if mask[p] { f.data[c * hw + p] } else { 0.0 }));
            }
        }
        out
    };
    let lr_data = pack(&lr);
    let hr_data = pack(&hr);
    Ok(SamplePair {
        id: sample_id(idx.coarse),
        height: h,
        width: w,
        lr: lr_data,
        hr: hr_data,
        mask,
        coarse_index: idx.coarse,
        fine_index: idx.fine,
        t: [lr[0].t, lr[1].t],
    })
}

/// Builds pairs from frame sources, rendering each frame once.
pub fn build_pairs_with(
    coarse_times: &[f64],
    fine_times: &[f64],
    mut coarse: impl FnMut(usize) -> Result<SimState>,
    mut fine: impl FnMut(usize) -> Result<SimState>,
    pix: (usize, usize),
    norm: &NormRanges,
    mut keep: impl FnMut(PairIndex) -> bool,
) -> Result<Vec<SamplePair>> {
    let index = align(coarse_times, fine_times)?;
    let mut out = Vec::new();
    let mut cache: Option<(usize, FrameImage, FrameImage)> = None;
    for idx in index {
        if !keep(idx) {
            continue;
        }
        // consecutive pairs share their boundary frames
        let (c0, f0) = match cache.take() {
            Some((n, c, f)) if n == idx.coarse => (c, f),
            _ => (
                render(&coarse(idx.coarse)?, pix, norm)?,
                render(&fine(idx.fine)?, pix, norm)?,
            ),
        };
        let c1 = render(&coarse(idx.coarse + 1)?, pix, norm)?;
        let f1 = render(&fine(idx.fine + 1)?, pix, norm)?;
        let f2 = render(&fine(idx.fine + 2)?, pix, norm)?;
        out.push(assemble(idx, [&c0, &c1], [&f0, &f1, &f2])?);
        cache = Some((idx.coarse + 1, c1, f2));
    }
    Ok(out)
}

/// Every aligned pair from two in-memory series.
pub fn pairs_from_states(
    coarse: &[SimState],
    fine: &[SimState],
    pix: (usize, usize),
    norm: &NormRanges,
) -> Result<Vec<SamplePair>> {
    let ct: Vec<f64> = coarse.iter().map(|s| s.t).collect();
    let ft: Vec<f64> = fine.iter().map(|s| s.t).collect();
    build_pairs_with(
        &ct,
        &ft,
        |k| Ok(coarse[k].clone()),
        |k| Ok(fine[k].clone()),
        pix,
        norm,
        |_| true,
    )
}

/// Every aligned pair from two CSF directories.
pub fn build_pairs(
    coarse: &CsfDir,
    fine: &CsfDir,
    pix: (usize, usize),
    norm: &NormRanges,
) -> Result<Vec<SamplePair>> {
    build_pairs_with(
        &coarse.meta.frame_times,
        &fine.meta.frame_times,
        |k| coarse.frame(k),
        |k| fine.frame(k),
        pix,
        norm,
        |_| true,
    )
}
