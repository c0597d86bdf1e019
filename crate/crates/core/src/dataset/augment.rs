use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::pairs::SamplePair;
use super::render::CHANNELS;

/// Which random augmentations are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentFlags {
    pub hflip: bool,
    pub vflip: bool,
    pub rotate: bool,
    pub reverse: bool,
}

impl AugmentFlags {
    pub const ALL: Self = AugmentFlags {
        hflip: true,
        vflip: true,
        rotate: true,
        reverse: true,
    };
    pub const NONE: Self = AugmentFlags {
        hflip: false,
        vflip: false,
        rotate: false,
        reverse: false,
    };
}

impl Default for AugmentFlags {
    fn default() -> Self {
        Self::ALL
    }
}

/// One concrete draw of augmentations. Applied in the order
/// h-flip, v-flip, rotation, temporal reversal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Augmentation {
    pub hflip: bool,
    pub vflip: bool,
    /// Number of clockwise quarter turns, `0..4`.
    pub quarter_turns: u8,
    pub reverse: bool,
}

impl Augmentation {
    pub fn sample(flags: AugmentFlags, rng: &mut impl Rng) -> Self {
        // always consume the same number of draws so streams stay in step
        let h = rng.gen::<bool>();
        let v = rng.gen::<bool>();
        let k = rng.gen_range(0..4u8);
        let r = rng.gen::<bool>();
        Augmentation {
            hflip: flags.hflip && h,
            vflip: flags.vflip && v,
            quarter_turns: if flags.rotate { k } else { 0 },
            reverse: flags.reverse && r,
        }
    }

    pub fn apply(&self, s: &SamplePair) -> Result<SamplePair> {
        let mut out = s.clone();
        if self.hflip {
            out = hflip(&out);
        }
        if self.vflip {
            out = vflip(&out);
        }
        if self.quarter_turns % 4 != 0 && out.height != out.width {
            return Err(Error::Shape(format!(
                "rotation needs a square patch, got {}x{}",
                out.height, out.width
            )));
        }
        for _ in 0..self.quarter_turns % 4 {
            out = rotate_cw(&out);
        }
        if self.reverse {
            out = reverse(&out);
        }
        Ok(out)
    }
}

/// Draws and applies a random augmentation.
pub fn augment(s: &SamplePair, flags: AugmentFlags, rng: &mut impl Rng) -> Result<SamplePair> {
    Augmentation::sample(flags, rng).apply(s)
}

/// Remaps every frame and the mask through `src(r, c) -> (r', c')` and then
/// rewrites the velocity channels of each water pixel with `vel(u, v)`.
fn remap(
    s: &SamplePair,
    (h, w): (usize, usize),
    src: impl Fn(usize, usize) -> usize,
    vel: impl Fn(f32, f32) -> (f32, f32),
) -> SamplePair {
    let hw = h * w;
    let mask: Vec<bool> = (0..hw).map(|p| s.mask[src(p / w, p % w)]).collect();
    let map = |frames: &[f32]| {
        let mut out = vec![0.0f32; frames.len()];
        for (fo, fi) in out.chunks_mut(CHANNELS * hw).zip(frames.chunks(CHANNELS * hw)) {
            for p in 0..hw {
                let q = src(p / w, p % w);
                for c in 0..CHANNELS {
                    fo[c * hw + p] = fi[c * hw + q];
                }
                if mask[p] {
                    let (u, v) = vel(fo[p], fo[hw + p]);
                    fo[p] = u;
                    fo[hw + p] = v;
                }
            }
        }
        out
    };
    SamplePair {
        height: h,
        width: w,
        lr: map(&s.lr),
        hr: map(&s.hr),
        mask,
        ..s.clone()
    }
}

fn hflip(s: &SamplePair) -> SamplePair {
    let (h, w) = (s.height, s.width);
    remap(s, (h, w), |r, c| r * w + (w - 1 - c), |u, v| (1.0 - u, v))
}

fn vflip(s: &SamplePair) -> SamplePair {
    let (h, w) = (s.height, s.width);
    remap(s, (h, w), |r, c| (h - 1 - r) * w + c, |u, v| (u, 1.0 - v))
}

/// Quarter turn taking `(x, y)` to `(y, −x)`, so `(U, V) → (V, −U)`.
fn rotate_cw(s: &SamplePair) -> SamplePair {
    let (h, w) = (s.height, s.width);
    remap(s, (w, h), |r, c| c * w + (w - 1 - r), |u, v| (v, 1.0 - u))
}

fn reverse(s: &SamplePair) -> SamplePair {
    let n = s.frame_len();
    let rev = |frames: &[f32]| -> Vec<f32> { frames.chunks(n).rev().flatten().copied().collect() };
    SamplePair {
        lr: rev(&s.lr),
        hr: rev(&s.hr),
        ..s.clone()
    }
}

/// Crops the same `size × size` window from all frames and the mask.
///
/// The window is uniform over positions that contain at least one water
/// pixel.
pub fn crop_patch(s: &SamplePair, size: usize, rng: &mut impl Rng) -> Result<SamplePair> {
    let (h, w) = (s.height, s.width);
    if size == 0 || size > h || size > w {
        return Err(Error::Config(format!(
            "patch size {size} does not fit a {h}x{w} sample"
        )));
    }
    // summed-area table of water pixels
    let mut sat = vec![0u32; (h + 1) * (w + 1)];
    for r in 0..h {
        for c in 0..w {
            sat[(r + 1) * (w + 1) + c + 1] = s.mask[r * w + c] as u32 + sat[r * (w + 1) + c + 1]
                + sat[(r + 1) * (w + 1) + c]
                - sat[r * (w + 1) + c];
        }
    }
    let water = |r: usize, c: usize| {
        let at = |rr: usize, cc: usize| sat[rr * (w + 1) + cc];
        at(r + size, c + size) + at(r, c) - at(r, c + size) - at(r + size, c)
    };
    let (nr, nc) = (h - size + 1, w - size + 1);
    let mut pick = None;
    for _ in 0..64 {
        let (r, c) = (rng.gen_range(0..nr), rng.gen_range(0..nc));
        if water(r, c) > 0 {
            pick = Some((r, c));
            break;
        }
    }
    let (r0, c0) = match pick {
        Some(p) => p,
        None => {
            let valid: Vec<(usize, usize)> = (0..nr)
                .flat_map(|r| (0..nc).map(move |c| (r, c)))
                .filter(|&(r, c)| water(r, c) > 0)
                .collect();
            if valid.is_empty() {
                return Err(Error::Input(format!(
                    "sample {} has no {size}x{size} window containing water",
                    s.id
                )));
            }
            valid[rng.gen_range(0..valid.len())]
        }
    };
    let hw = h * w;
    let crop = |frames: &[f32]| {
        let mut out = Vec::with_capacity(frames.len() / hw * size * size);
        for plane in frames.chunks(hw) {
            for r in r0..r0 + size {
                out.extend_from_slice(&plane[r * w + c0..r * w + c0 + size]);
            }
        }
        out
    };
    let mut mask = Vec::with_capacity(size * size);
    for r in r0..r0 + size {
        mask.extend_from_slice(&s.mask[r * w + c0..r * w + c0 + size]);
    }
    Ok(SamplePair {
        height: size,
        width: size,
        lr: crop(&s.lr),
        hr: crop(&s.hr),
        mask,
        ..s.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(h: usize, w: usize) -> SamplePair {
        let hw = h * w;
        let mask: Vec<bool> = (0..hw).map(|p| p % 7 != 3).collect();
        let val = |k: usize, p: usize| if mask[p] { ((k * 31 + p * 17) % 97) as f32 / 97.0 } else { 0.0 };
        SamplePair {
            id: "000000".into(),
            height: h,
            width: w,
            lr: (0..2 * 3 * hw).map(|i| val(i / hw, i % hw)).collect(),
            hr: (0..3 * 3 * hw).map(|i| val(i / hw + 10, i % hw)).collect(),
            mask,
            coarse_index: 0,
            fine_index: 0,
            t: [0.0, 1.0],
        }
    }

    #[test]
    fn identity_when_all_off() {
        let s = sample(8, 8);
        assert_eq!(Augmentation::default().apply(&s).unwrap(), s);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..8 {
            assert_eq!(augment(&s, AugmentFlags::NONE, &mut rng).unwrap(), s);
        }
    }

    #[test]
    fn involutions() {
        let s = sample(6, 6);
        for a in [
            Augmentation { hflip: true, ..Default::default() },
            Augmentation { vflip: true, ..Default::default() },
            Augmentation { reverse: true, ..Default::default() },
            Augmentation { quarter_turns: 2, ..Default::default() },
        ] {
            let twice = a.apply(&a.apply(&s).unwrap()).unwrap();
            for (x, y) in twice.lr.iter().zip(&s.lr).chain(twice.hr.iter().zip(&s.hr)) {
                assert!((x - y).abs() < 1e-6, "{a:?}");
            }
            assert_eq!(twice.mask, s.mask);
        }
    }

    #[test]
    fn four_turns_are_identity_and_one_turn_rotates_velocity() {
        let s = sample(5, 5);
        let r = Augmentation { quarter_turns: 1, ..Default::default() }.apply(&s).unwrap();
        // out[r][c] = in[c][w-1-r]
        let hw = 25;
        let (ro, co) = (1, 3);
        let q = co * 5 + (4 - ro);
        if s.mask[q] {
            assert_eq!(r.lr[ro * 5 + co], s.lr[hw + q]);
            assert!((r.lr[hw + ro * 5 + co] - (1.0 - s.lr[q])).abs() < 1e-6);
        }
        let mut x = s.clone();
        for _ in 0..4 {
            x = rotate_cw(&x);
        }
        for (a, b) in x.hr.iter().zip(&s.hr) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hflip_negates_u_about_mid_range() {
        let s = sample(4, 4);
        let f = hflip(&s);
        for r in 0..4 {
            for c in 0..4 {
                let (p, q) = (r * 4 + c, r * 4 + 3 - c);
                if s.mask[q] {
                    assert!((f.lr[p] - (1.0 - s.lr[q])).abs() < 1e-6);
                    assert_eq!(f.lr[16 + p], s.lr[16 + q]);
                    assert_eq!(f.lr[32 + p], s.lr[32 + q]);
                } else {
                    assert_eq!(f.lr[p], 0.0);
                }
            }
        }
    }

    #[test]
    fn crop_identity_and_reproducible() {
        let s = sample(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(crop_patch(&s, 8, &mut rng).unwrap(), s);
        let a = crop_patch(&s, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = crop_patch(&s, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lr.len(), 2 * 3 * 16);
    }

    #[test]
    fn crop_rejects_all_land() {
        let mut s = sample(8, 8);
        s.mask.iter_mut().for_each(|m| *m = false);
        assert!(crop_patch(&s, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
