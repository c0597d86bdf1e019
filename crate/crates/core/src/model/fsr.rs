use rand::Rng;

use crate::nn::{Conv2d, Real};

/// Feature split and reconstruction.
///
/// The two frame features are concatenated to `A: [2F, h, w]`, enhanced with
/// a cosine/sine response of a learned pointwise projection, expanded to
/// three `C`-channel residual maps and added to the interpolation bases
/// `(X₀, ½(X₀+X₁), X₁)` through a shared output conv.
#[derive(Clone, Debug, PartialEq)]
pub struct Fsr<T> {
    pub freq: Conv2d<T>,
    pub merge: Conv2d<T>,
    pub expand: Conv2d<T>,
    pub out: Conv2d<T>,
}

crate::impl_params!(Fsr { freq, merge, expand, out });

pub struct FsrCache<T> {
    a: Vec<T>,
    p: Vec<T>,
    cs: Vec<T>,
    e: Vec<T>,
    r: Vec<T>,
    enhanced: bool,
}

impl<T: Real> Fsr<T> {
    pub fn new(f: usize, c: usize, rng: &mut impl Rng) -> Self {
        Fsr {
            freq: Conv2d::he_uniform(2 * f, 2 * f, 1, rng),
            merge: Conv2d::he_uniform(4 * f, 2 * f, 1, rng),
            expand: Conv2d::he_uniform(2 * f, 3 * c, 3, rng),
            out: Conv2d::zeros(c, c, 3),
        }
    }

    pub fn zeros(f: usize, c: usize) -> Self {
        Fsr {
            freq: Conv2d::zeros(2 * f, 2 * f, 1),
            merge: Conv2d::zeros(4 * f, 2 * f, 1),
            expand: Conv2d::zeros(2 * f, 3 * c, 3),
            out: Conv2d::zeros(c, c, 3),
        }
    }

    /// `d: [B, 2F, h, w]` features, `x: [B, 2, C, h, w]` inputs; returns
    /// `[B, 3, C, h, w]`. With `enhance` off the frequency step is skipped.
    pub fn forward(
        &self,
        d: &[T],
        x: &[T],
        (b, h, w): (usize, usize, usize),
        enhance: bool,
    ) -> (Vec<T>, FsrCache<T>) {
        let hw = h * w;
        let f2 = self.freq.in_channels();
        let c = self.out.in_channels();
        let (p, cs, e) = if enhance {
            let p = self.freq.forward(d, b, h, w);
            let mut cs = Vec::with_capacity(2 * p.len());
            for img in p.chunks(f2 * hw) {
                cs.extend(img.iter().map(|v| v.cos()));
                cs.extend(img.iter().map(|v| v.sin()));
            }
            let mut e = self.merge.forward(&cs, b, h, w);
            for (ev, &av) in e.iter_mut().zip(d) {
                *ev += av;
            }
            (p, cs, e)
        } else {
            (Vec::new(), Vec::new(), d.to_vec())
        };
        let r = self.expand.forward(&e, b, h, w);
        let mut y = self.out.forward(&r, 3 * b, h, w);
        let half = T::from_f64_lossy(0.5);
        let fl = c * hw;
        for s in 0..b {
            let x0 = &x[(2 * s) * fl..(2 * s + 1) * fl];
            let x1 = &x[(2 * s + 1) * fl..(2 * s + 2) * fl];
            let ys = &mut y[3 * s * fl..3 * (s + 1) * fl];
            for i in 0..fl {
                ys[i] += x0[i];
                ys[fl + i] += half * (x0[i] + x1[i]);
                ys[2 * fl + i] += x1[i];
            }
        }
        let cache = FsrCache {
            a: if enhance { d.to_vec() } else { Vec::new() },
            p,
            cs,
            e,
            r,
            enhanced: enhance,
        };
        (y, cache)
    }

    /// Returns `(dL/dd, dL/dx)`.
    pub fn backward(
        &self,
        cache: &FsrCache<T>,
        (b, h, w): (usize, usize, usize),
        dy: &[T],
        grad: &mut Fsr<T>,
    ) -> (Vec<T>, Vec<T>) {
        let hw = h * w;
        let f2 = self.freq.in_channels();
        let c = self.out.in_channels();
        let fl = c * hw;
        let half = T::from_f64_lossy(0.5);
        let mut dx = vec![T::zero(); b * 2 * fl];
        for s in 0..b {
            let dys = &dy[3 * s * fl..3 * (s + 1) * fl];
            for i in 0..fl {
                dx[2 * s * fl + i] = dys[i] + half * dys[fl + i];
                dx[(2 * s + 1) * fl + i] = dys[2 * fl + i] + half * dys[fl + i];
            }
        }
        let dr = self.out.backward(&cache.r, 3 * b, h, w, dy, &mut grad.out);
        let de = self.expand.backward(&cache.e, b, h, w, &dr, &mut grad.expand);
        if !cache.enhanced {
            return (de, dx);
        }
        let dcs = self.merge.backward(&cache.cs, b, h, w, &de, &mut grad.merge);
        let mut dp = vec![T::zero(); cache.p.len()];
        for (s, (dpi, pi)) in dp.chunks_mut(f2 * hw).zip(cache.p.chunks(f2 * hw)).enumerate() {
            let dc = &dcs[2 * s * f2 * hw..(2 * s + 1) * f2 * hw];
            let ds = &dcs[(2 * s + 1) * f2 * hw..(2 * s + 2) * f2 * hw];
            for i in 0..pi.len() {
                dpi[i] = ds[i] * pi[i].cos() - dc[i] * pi[i].sin();
            }
        }
        let mut dd = self.freq.backward(&cache.a, b, h, w, &dp, &mut grad.freq);
        for (a, &g) in dd.iter_mut().zip(&de) {
            *a += g;
        }
        (dd, dx)
    }
}
