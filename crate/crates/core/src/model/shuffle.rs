//! Temporal pixel shuffles and window partitioning.
//!
//! Inputs are two-frame feature stacks `[2, F, h, w]`. The shuffles
//! interleave the frame axis into width, height or channels.

use crate::error::{Error, Result};

fn check(z: &[impl Copy], f: usize, h: usize, w: usize) -> Result<()> {
    if z.len() != 2 * f * h * w {
        return Err(Error::Shape(format!(
            "expected exactly 2 frames of [{f}, {h}, {w}] ({} values), got {}",
            2 * f * h * w,
            z.len()
        )));
    }
    Ok(())
}

/// `out[c, i, 2j+k] = z[k, c, i, j]`, giving `[F, h, 2w]`.
pub fn shuffle_h<T: Copy>(z: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(z, f, h, w)?;
    let mut out = Vec::with_capacity(z.len());
    for c in 0..f {
        for i in 0..h {
            for j in 0..w {
                for k in 0..2 {
                    out.push(z[((k * f + c) * h + i) * w + j]);
                }
            }
        }
    }
    Ok(out)
}

pub fn unshuffle_h<T: Copy + Default>(s: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(s, f, h, w)?;
    let mut out = vec![T::default(); s.len()];
    for c in 0..f {
        for i in 0..h {
            for j in 0..w {
                for k in 0..2 {
                    out[((k * f + c) * h + i) * w + j] = s[(c * h + i) * 2 * w + 2 * j + k];
                }
            }
        }
    }
    Ok(out)
}

/// `out[c, 2i+k, j] = z[k, c, i, j]`, giving `[F, 2h, w]`.
pub fn shuffle_v<T: Copy>(z: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(z, f, h, w)?;
    let mut out = Vec::with_capacity(z.len());
    for c in 0..f {
        for i in 0..h {
            for k in 0..2 {
                let row = ((k * f + c) * h + i) * w;
                out.extend_from_slice(&z[row..row + w]);
            }
        }
    }
    Ok(out)
}

pub fn unshuffle_v<T: Copy + Default>(s: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(s, f, h, w)?;
    let mut out = vec![T::default(); s.len()];
    for c in 0..f {
        for i in 0..h {
            for k in 0..2 {
                let src = (c * 2 * h + 2 * i + k) * w;
                let dst = ((k * f + c) * h + i) * w;
                out[dst..dst + w].copy_from_slice(&s[src..src + w]);
            }
        }
    }
    Ok(out)
}

/// `out[2c+k, i, j] = z[k, c, i, j]`, giving `[2F, h, w]`.
pub fn shuffle_d<T: Copy>(z: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(z, f, h, w)?;
    let hw = h * w;
    let mut out = Vec::with_capacity(z.len());
    for c in 0..f {
        for k in 0..2 {
            out.extend_from_slice(&z[(k * f + c) * hw..(k * f + c + 1) * hw]);
        }
    }
    Ok(out)
}

pub fn unshuffle_d<T: Copy + Default>(s: &[T], f: usize, h: usize, w: usize) -> Result<Vec<T>> {
    check(s, f, h, w)?;
    let hw = h * w;
    let mut out = vec![T::default(); s.len()];
    for c in 0..f {
        for k in 0..2 {
            out[(k * f + c) * hw..(k * f + c + 1) * hw]
                .copy_from_slice(&s[(2 * c + k) * hw..(2 * c + k + 1) * hw]);
        }
    }
    Ok(out)
}

/// Splits a `[d, h, w]` map into non-overlapping `win × win` windows of
/// channel-last tokens: `[n_win, win², d]`, windows in row-major order.
pub fn window_partition<T: Copy>(x: &[T], d: usize, h: usize, w: usize, win: usize) -> Result<Vec<T>> {
    if win == 0 || h % win != 0 || w % win != 0 {
        return Err(Error::Shape(format!("window {win} does not tile {h}x{w}")));
    }
    if x.len() != d * h * w {
        return Err(Error::Shape(format!("expected {} values, got {}", d * h * w, x.len())));
    }
    let mut out = Vec::with_capacity(x.len());
    for wi in 0..h / win {
        for wj in 0..w / win {
            for a in 0..win {
                for b in 0..win {
                    let p = (wi * win + a) * w + wj * win + b;
                    out.extend((0..d).map(|c| x[c * h * w + p]));
                }
            }
        }
    }
    Ok(out)
}

pub fn window_reverse<T: Copy + Default>(
    t: &[T],
    d: usize,
    h: usize,
    w: usize,
    win: usize,
) -> Result<Vec<T>> {
    if win == 0 || h % win != 0 || w % win != 0 || t.len() != d * h * w {
        return Err(Error::Shape(format!("window {win} does not tile {d}x{h}x{w}")));
    }
    let mut out = vec![T::default(); t.len()];
    let mut n = 0;
    for wi in 0..h / win {
        for wj in 0..w / win {
            for a in 0..win {
                for b in 0..win {
                    let p = (wi * win + a) * w + wj * win + b;
                    for c in 0..d {
                        out[c * h * w + p] = t[n];
                        n += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Which temporal fusion a branch uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    H,
    V,
    D,
}

/// Source offsets that gather `window_partition(shuffle_axis(z))` straight
/// from a batch of `[2, F, h, w]` stacks: token `t`, element `e` reads
/// `z[base[t] + elem[e]]`.
#[derive(Clone, Debug)]
pub struct TokenMap {
    pub base: Vec<usize>,
    pub elem: Vec<usize>,
    pub tokens_per_window: usize,
}

impl TokenMap {
    pub fn new(axis: Axis, batch: usize, f: usize, h: usize, w: usize, win: usize) -> Result<Self> {
        let hw = h * w;
        // fused map size and the source of each fused pixel
        let (fh, fw) = match axis {
            Axis::H => (h, 2 * w),
            Axis::V => (2 * h, w),
            Axis::D => (h, w),
        };
        if win == 0 || fh % win != 0 || fw % win != 0 || h % win != 0 || w % win != 0 {
            return Err(Error::Shape(format!("window {win} does not tile {h}x{w}")));
        }
        let src = |i: usize, j: usize| match axis {
            Axis::H => (j % 2) * f * hw + i * w + j / 2,
            Axis::V => (i % 2) * f * hw + (i / 2) * w + j,
            Axis::D => i * w + j,
        };
        let mut base = Vec::with_capacity(batch * fh * fw);
        for s in 0..batch {
            for wi in 0..fh / win {
                for wj in 0..fw / win {
                    for a in 0..win {
                        for b in 0..win {
                            base.push(s * 2 * f * hw + src(wi * win + a, wj * win + b));
                        }
                    }
                }
            }
        }
        let elem = match axis {
            Axis::H | Axis::V => (0..f).map(|c| c * hw).collect(),
            Axis::D => (0..2 * f).map(|e| (e % 2) * f * hw + (e / 2) * hw).collect(),
        };
        Ok(TokenMap {
            base,
            elem,
            tokens_per_window: win * win,
        })
    }

    pub fn tokens(&self) -> usize {
        self.base.len()
    }

    pub fn dim(&self) -> usize {
        self.elem.len()
    }

    pub fn gather<T: Copy>(&self, z: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(self.tokens() * self.dim());
        for &b in &self.base {
            out.extend(self.elem.iter().map(|&e| z[b + e]));
        }
        out
    }

    /// Adds token rows back into `z` (the adjoint of [`gather`](Self::gather)).
    pub fn scatter_add<T: Copy + std::ops::AddAssign>(&self, tokens: &[T], z: &mut [T]) {
        let d = self.dim();
        for (t, &b) in self.base.iter().enumerate() {
            for (k, &e) in self.elem.iter().enumerate() {
                z[b + e] += tokens[t * d + k];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f32> {
        (0..n).map(|i| i as f32 * 0.5 - 3.0).collect()
    }

    #[test]
    fn round_trips() {
        let (f, h, w) = (3, 4, 6);
        let z = ramp(2 * f * h * w);
        assert_eq!(unshuffle_h(&shuffle_h(&z, f, h, w).unwrap(), f, h, w).unwrap(), z);
        assert_eq!(unshuffle_v(&shuffle_v(&z, f, h, w).unwrap(), f, h, w).unwrap(), z);
        assert_eq!(unshuffle_d(&shuffle_d(&z, f, h, w).unwrap(), f, h, w).unwrap(), z);
        let x = ramp(5 * 4 * 8);
        assert_eq!(window_reverse(&window_partition(&x, 5, 4, 8, 4).unwrap(), 5, 4, 8, 4).unwrap(), x);
    }

    #[test]
    fn shuffle_h_alternates_frames() {
        let (f, h, w) = (2, 3, 4);
        let mut z = vec![0.0f32; 2 * f * h * w];
        z[f * h * w..].fill(1.0);
        let s = shuffle_h(&z, f, h, w).unwrap();
        for (j, v) in s.iter().enumerate() {
            assert_eq!(*v, (j % 2) as f32);
        }
        assert!(shuffle_h(&z[1..], f, h, w).is_err());
    }

    #[test]
    fn token_map_matches_explicit_composition() {
        let (f, h, w, win) = (3, 4, 8, 4);
        let z = ramp(2 * 2 * f * h * w);
        let one = 2 * f * h * w;
        for axis in [Axis::H, Axis::V, Axis::D] {
            let map = TokenMap::new(axis, 2, f, h, w, win).unwrap();
            let got = map.gather(&z);
            let mut want = Vec::new();
            for s in 0..2 {
                let zs = &z[s * one..(s + 1) * one];
                let part = match axis {
                    Axis::H => window_partition(&shuffle_h(zs, f, h, w).unwrap(), f, h, 2 * w, win),
                    Axis::V => window_partition(&shuffle_v(zs, f, h, w).unwrap(), f, 2 * h, w, win),
                    Axis::D => window_partition(&shuffle_d(zs, f, h, w).unwrap(), 2 * f, h, w, win),
                };
                want.extend(part.unwrap());
            }
            assert_eq!(got, want, "{axis:?}");
            let mut back = vec![0.0f32; z.len()];
            map.scatter_add(&got, &mut back);
            assert_eq!(back, z, "{axis:?}");
        }
    }
}
