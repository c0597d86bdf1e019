use rand::Rng;

use crate::nn::{sigmoid, Conv2d, Linear, Real};

/// Residual channel-attention block: a conv–ReLU–conv body whose output is
/// rescaled per channel by a pooled bottleneck gate, plus the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Rcab<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub down: Linear<T>,
    pub up: Linear<T>,
}

crate::impl_params!(Rcab { conv1, conv2, down, up });

pub struct RcabCache<T> {
    x: Vec<T>,
    a: Vec<T>,
    r: Vec<T>,
    b: Vec<T>,
    pooled: Vec<T>,
    hid: Vec<T>,
    s: Vec<T>,
}

impl<T: Real> Rcab<T> {
    pub fn new(f: usize, reduction: usize, rng: &mut impl Rng) -> Self {
        let mid = (f / reduction).max(1);
        Rcab {
            conv1: Conv2d::he_uniform(f, f, 3, rng),
            conv2: Conv2d::he_uniform(f, f, 3, rng),
            down: Linear::he_uniform(f, mid, rng),
            up: Linear::xavier_uniform(mid, f, rng),
        }
    }

    pub fn zeros(f: usize, reduction: usize) -> Self {
        let mid = (f / reduction).max(1);
        Rcab {
            conv1: Conv2d::zeros(f, f, 3),
            conv2: Conv2d::zeros(f, f, 3),
            down: Linear::zeros(f, mid),
            up: Linear::zeros(mid, f),
        }
    }

    /// The gated body without the skip: `s ⊙ W(x)`.
    fn body(&self, x: &[T], n: usize, h: usize, w: usize) -> RcabCache<T> {
        let f = self.conv1.out_channels();
        let hw = h * w;
        let a = self.conv1.forward(x, n, h, w);
        let r: Vec<T> = a.iter().map(|&v| v.max(T::zero())).collect();
        let b = self.conv2.forward(&r, n, h, w);
        let inv = T::one() / T::from_usize(hw).unwrap();
        let pooled: Vec<T> = b.chunks(hw).map(|c| c.iter().copied().sum::<T>() * inv).collect();
        let hid = self.down.forward(&pooled, n);
        let hr: Vec<T> = hid.iter().map(|&v| v.max(T::zero())).collect();
        let s: Vec<T> = self.up.forward(&hr, n).into_iter().map(sigmoid).collect();
        debug_assert_eq!(s.len(), n * f);
        RcabCache {
            x: x.to_vec(),
            a,
            r,
            b,
            pooled,
            hid,
            s,
        }
    }

    pub fn forward(&self, x: &[T], n: usize, h: usize, w: usize) -> (Vec<T>, RcabCache<T>) {
        let hw = h * w;
        let c = self.body(x, n, h, w);
        let mut y = x.to_vec();
        for (ch, (yc, bc)) in y.chunks_mut(hw).zip(c.b.chunks(hw)).enumerate() {
            let s = c.s[ch];
            for (yv, &bv) in yc.iter_mut().zip(bc) {
                *yv += s * bv;
            }
        }
        (y, c)
    }

    pub fn backward(
        &self,
        c: &RcabCache<T>,
        n: usize,
        h: usize,
        w: usize,
        dy: &[T],
        grad: &mut Rcab<T>,
    ) -> Vec<T> {
        let hw = h * w;
        let inv = T::one() / T::from_usize(hw).unwrap();
        // y = x + s·b
        let mut ds = Vec::with_capacity(c.s.len());
        let mut db = vec![T::zero(); dy.len()];
        for (ch, (dyc, bc)) in dy.chunks(hw).zip(c.b.chunks(hw)).enumerate() {
            ds.push(dyc.iter().zip(bc).map(|(&g, &b)| g * b).sum::<T>());
            let s = c.s[ch];
            for (d, &g) in db[ch * hw..(ch + 1) * hw].iter_mut().zip(dyc) {
                *d = s * g;
            }
        }
        let dz: Vec<T> = ds.iter().zip(&c.s).map(|(&g, &s)| g * s * (T::one() - s)).collect();
        let hr: Vec<T> = c.hid.iter().map(|&v| v.max(T::zero())).collect();
        let dhr = self.up.backward(&hr, n, &dz, &mut grad.up);
        let dhid: Vec<T> = dhr
            .iter()
            .zip(&c.hid)
            .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
            .collect();
        let dpool = self.down.backward(&c.pooled, n, &dhid, &mut grad.down);
        for (ch, &g) in dpool.iter().enumerate() {
            for d in &mut db[ch * hw..(ch + 1) * hw] {
                *d += g * inv;
            }
        }
        let mut dr = self.conv2.backward(&c.r, n, h, w, &db, &mut grad.conv2);
        for (d, &a) in dr.iter_mut().zip(&c.a) {
            if a <= T::zero() {
                *d = T::zero();
            }
        }
        let mut dx = self.conv1.backward(&c.x, n, h, w, &dr, &mut grad.conv1);
        for (d, &g) in dx.iter_mut().zip(dy) {
            *d += g;
        }
        dx
    }
}
