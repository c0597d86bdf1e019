use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::swe::SimState;

/// Channels per frame, in `(U, V, ξ)` order.
pub const CHANNELS: usize = 3;

/// Per-channel affine normalization `(lo, hi)` in `(U, V, ξ)` order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRanges(pub [[f64; 2]; CHANNELS]);

impl NormRanges {
    pub fn validate(&self) -> Result<()> {
        for (c, [lo, hi]) in self.0.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!(
                    "degenerate normalization range for channel {c}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Ranges covering `states` on water cells with 1 % head-room.
    ///
    /// U and V share one range symmetric about zero, so that flipping or
    /// rotating a normalized image maps velocities to `1 − v` or swaps them.
    pub fn fit<'a>(states: impl IntoIterator<Item = &'a SimState>) -> Result<Self> {
        let mut vmax = 0.0f64;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for s in states {
            for i in 0..s.xi.len() {
                if !s.mask[i] {
                    continue;
                }
                any = true;
                vmax = vmax.max(s.u[i].abs()).max(s.v[i].abs());
                lo = lo.min(s.xi[i]);
                hi = hi.max(s.xi[i]);
            }
        }
        if !any {
            return Err(Error::Input("no water cells to fit normalization".into()));
        }
        let m = if vmax > 0.0 { 1.01 * vmax } else { 1e-3 };
        let span = hi - lo;
        let pad = if span > 0.0 { 0.01 * span } else { 1e-3 };
        let ranges = NormRanges([[-m, m], [-m, m], [lo - pad, hi + pad]]);
        ranges.validate()?;
        Ok(ranges)
    }

    pub fn normalize(&self, c: usize, v: f64) -> f64 {
        let [lo, hi] = self.0[c];
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn denormalize(&self, c: usize, x: f64) -> f64 {
        let [lo, hi] = self.0[c];
        lo + x * (hi - lo)
    }
}

/// A rendered, land-masked, normalized frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameImage {
    pub height: usize,
    pub width: usize,
    /// `[3, height, width]`, channel order `(U, V, ξ)`.
    pub data: Vec<f32>,
    pub mask: Vec<bool>,
    pub t: f64,
    pub norm: NormRanges,
}

impl FrameImage {
    /// Physical field values `[3, h, w]` (zero on land).
    pub fn denormalized(&self) -> Vec<f64> {
        let hw = self.height * self.width;
        let mut out = vec![0.0; CHANNELS * hw];
        for c in 0..CHANNELS {
            for p in 0..hw {
                if self.mask[p] {
                    out[c * hw + p] = self.norm.denormalize(c, self.data[c * hw + p] as f64);
                }
            }
        }
        out
    }
}

/// Linear interpolation stencil along one axis: cell indices, weights and
/// the nearest cell.
fn stencil(pixel: usize, pixels: usize, cells: usize) -> (usize, usize, f64, usize) {
    let pos = (pixel as f64 + 0.5) * cells as f64 / pixels as f64 - 0.5;
    let i0 = (pos.floor().max(0.0) as usize).min(cells - 1);
    let i1 = (i0 + 1).min(cells - 1);
    let f = (pos - i0 as f64).clamp(0.0, 1.0);
    let nearest = if f < 0.5 { i0 } else { i1 };
    (i0, i1, f, nearest)
}

/// Samples cell-centred fields onto an `h × w` pixel lattice.
///
/// Interpolation is bilinear over water cells only; a pixel is water when its
/// nearest cell is. Values are normalized per channel and clamped to `[0, 1]`.
pub fn render(state: &SimState, (h, w): (usize, usize), norm: &NormRanges) -> Result<FrameImage> {
    norm.validate()?;
    if h == 0 || w == 0 {
        return Err(Error::Config(format!("render size {h}x{w}")));
    }
    let nx = state.nx;
    let fields = [&state.u, &state.v, &state.xi];
    let hw = h * w;
    let mut data = vec![0.0f32; CHANNELS * hw];
    let mut mask = vec![false; hw];
    let xs: Vec<_> = (0..w).map(|px| stencil(px, w, state.nx)).collect();
    for py in 0..h {
        let (r0, r1, fy, rn) = stencil(py, h, state.ny);
        for (px, &(c0, c1, fx, cn)) in xs.iter().enumerate() {
            let p = py * w + px;
            if !state.mask[rn * nx + cn] {
                continue;
            }
            mask[p] = true;
            let taps = [
                (r0, c0, (1.0 - fy) * (1.0 - fx)),
                (r0, c1, (1.0 - fy) * fx),
                (r1, c0, fy * (1.0 - fx)),
                (r1, c1, fy * fx),
            ];
            let mut wsum = 0.0;
            let mut acc = [0.0f64; CHANNELS];
            for &(r, c, wt) in &taps {
                let i = r * nx + c;
                if wt > 0.0 && state.mask[i] {
                    wsum += wt;
                    for (a, f) in acc.iter_mut().zip(&fields) {
                        *a += wt * f[i];
                    }
                }
            }
            for (ch, a) in acc.iter().enumerate() {
                let v = a / wsum;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        stage: "render".into(),
                        detail: format!("channel {ch} at pixel ({py}, {px})"),
                    });
                }
                data[ch * hw + p] = norm.normalize(ch, v) as f32;
            }
        }
    }
    Ok(FrameImage {
        height: h,
        width: w,
        data,
        mask,
        t: state.t,
        norm: *norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(nx: usize, ny: usize, val: f64) -> SimState {
        let n = nx * ny;
        SimState {
            nx,
            ny,
            xi: vec![val; n],
            u: vec![val; n],
            v: vec![val; n],
            h_b: vec![1.0; n],
            mask: vec![true; n],
            t: 0.0,
        }
    }

    const RANGES: NormRanges = NormRanges([[-0.5, 0.5], [-0.5, 0.5], [-1.0, 2.0]]);

    #[test]
    fn endpoints_map_to_zero_and_one() {
        let lo = NormRanges([[-1.0, 1.0]; 3]);
        let img = render(&state(6, 5, -1.0), (8, 8), &lo).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
        let img = render(&state(6, 5, 1.0), (8, 8), &lo).unwrap();
        assert!(img.data.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn checkerboard_mask_zeroes_exactly_land_pixels() {
        let mut s = state(8, 8, 0.3);
        for r in 0..8 {
            for c in 0..8 {
                s.mask[r * 8 + c] = (r + c) % 2 == 0;
            }
        }
        let img = render(&s, (8, 8), &RANGES).unwrap();
        for p in 0..64 {
            assert_eq!(img.mask[p], s.mask[p]);
            for c in 0..3 {
                let v = img.data[c * 64 + p];
                if s.mask[p] {
                    assert!(v > 0.0);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let bad = NormRanges([[0.0, 0.0], [-1.0, 1.0], [-1.0, 1.0]]);
        assert!(render(&state(4, 4, 0.0), (4, 4), &bad).is_err());
    }

    #[test]
    fn float_round_trip_on_native_grid() {
        let mut s = state(7, 5, 0.0);
        for i in 0..35 {
            s.xi[i] = -0.8 + 0.07 * i as f64;
            s.u[i] = 0.4 * ((i as f64) * 0.3).sin();
            s.v[i] = -0.3 * ((i as f64) * 0.2).cos();
        }
        s.mask[3] = false;
        let img = render(&s, (5, 7), &RANGES).unwrap();
        let back = img.denormalized();
        for p in 0..35 {
            if !s.mask[p] {
                continue;
            }
            for (c, f) in [&s.u, &s.v, &s.xi].iter().enumerate() {
                assert!((back[c * 35 + p] - f[p]).abs() <= 1e-6);
                let q = crate::imageio::to_u8(img.data[c * 35 + p]) as f64 / 255.0;
                let [lo, hi] = RANGES.0[c];
                assert!((RANGES.denormalize(c, q) - f[p]).abs() <= (hi - lo) / 255.0);
            }
        }
    }

    #[test]
    fn fitted_velocity_range_is_shared_and_symmetric() {
        let mut s = state(4, 4, 0.0);
        s.u[2] = 0.3;
        s.v[5] = -0.6;
        s.xi[7] = 0.2;
        let r = NormRanges::fit([&s]).unwrap();
        assert_eq!(r.0[0], r.0[1]);
        assert!((r.0[0][1] - 0.606).abs() < 1e-12);
        assert_eq!(r.0[0][0], -r.0[0][1]);
        assert!(r.0[2][0] < 0.0 && r.0[2][1] > 0.2);
    }
}
