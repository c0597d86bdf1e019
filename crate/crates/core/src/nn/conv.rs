use rand::Rng;

use super::{gemm, Real, Tensor};

/// 2-D convolution with stride 1 and "same" zero padding (odd kernels only).
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    /// `[out, in, k, k]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

crate::impl_params!(Conv2d { weight, bias });

impl<T: Real> Conv2d<T> {
    pub fn zeros(cin: usize, cout: usize, k: usize) -> Self {
        assert!(k % 2 == 1, "kernel size must be odd");
        Conv2d {
            weight: Tensor::zeros(&[cout, cin, k, k]),
            bias: Tensor::zeros(&[cout]),
        }
    }

    /// He-uniform weights, zero bias.
    pub fn he_uniform(cin: usize, cout: usize, k: usize, rng: &mut impl Rng) -> Self {
        let mut c = Self::zeros(cin, cout, k);
        let bound = (6.0 / (cin * k * k) as f64).sqrt();
        for w in c.weight.data_mut() {
            *w = T::from_f64_lossy(rng.gen_range(-bound..bound));
        }
        c
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    fn im2col(&self, x: &[T], h: usize, w: usize, col: &mut [T]) {
        let k = self.kernel();
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels() {
            let plane = &x[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((c * k + ky) * k + kx) * hw..][..hw];
                    let dx = kx as isize - pad;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad;
                        let dst = &mut row[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        dst[..x_lo].fill(T::zero());
                        dst[x_hi..].fill(T::zero());
                        let s0 = (x_lo as isize + dx) as usize;
                        dst[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[T], h: usize, w: usize, dx_out: &mut [T]) {
        let k = self.kernel();
        let pad = (k / 2) as isize;
        let hw = h * w;
        for c in 0..self.in_channels() {
            let plane = &mut dx_out[c * hw..(c + 1) * hw];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((c * k + ky) * k + kx) * hw..][..hw];
                    let dx = kx as isize - pad;
                    let x_lo = (-dx).max(0) as usize;
                    let x_hi = (w as isize - dx).min(w as isize).max(0) as usize;
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y as isize + ky as isize - pad;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let s0 = (x_lo as isize + dx) as usize;
                        let src = &row[y * w + x_lo..y * w + x_hi];
                        let dst = &mut plane[sy as usize * w + s0..sy as usize * w + s0 + src.len()];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }

    /// `x` holds `n` images of shape `[in, h, w]`; returns `n × [out, h, w]`.
    pub fn forward(&self, x: &[T], n: usize, h: usize, w: usize) -> Vec<T> {
        let (cin, cout, k) = (self.in_channels(), self.out_channels(), self.kernel());
        let hw = h * w;
        assert_eq!(x.len(), n * cin * hw, "conv input length");
        let kk = cin * k * k;
        let mut out = vec![T::zero(); n * cout * hw];
        let mut col = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
        for i in 0..n {
            let xi = &x[i * cin * hw..(i + 1) * cin * hw];
            let oi = &mut out[i * cout * hw..(i + 1) * cout * hw];
            for (o, &b) in oi.chunks_mut(hw).zip(self.bias.data()) {
                o.fill(b);
            }
            let cols: &[T] = if k == 1 {
                xi
            } else {
                self.im2col(xi, h, w, &mut col);
                &col
            };
            gemm(
                cout,
                kk,
                hw,
                T::one(),
                self.weight.data(),
                (kk, 1),
                cols,
                (hw, 1),
                T::one(),
                oi,
                (hw, 1),
            );
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(
        &self,
        x: &[T],
        n: usize,
        h: usize,
        w: usize,
        dy: &[T],
        grad: &mut Conv2d<T>,
    ) -> Vec<T> {
        let (cin, cout, k) = (self.in_channels(), self.out_channels(), self.kernel());
        let hw = h * w;
        let kk = cin * k * k;
        assert_eq!(dy.len(), n * cout * hw, "conv grad length");
        let mut dx = vec![T::zero(); n * cin * hw];
        let mut col = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
        let mut dcol = if k == 1 { Vec::new() } else { vec![T::zero(); kk * hw] };
        for i in 0..n {
            let xi = &x[i * cin * hw..(i + 1) * cin * hw];
            let dyi = &dy[i * cout * hw..(i + 1) * cout * hw];
            for (gb, d) in grad.bias.data_mut().iter_mut().zip(dyi.chunks(hw)) {
                *gb += d.iter().copied().sum::<T>();
            }
            let cols: &[T] = if k == 1 {
                xi
            } else {
                self.im2col(xi, h, w, &mut col);
                &col
            };
            // dW += dy · colᵀ
            gemm(
                cout,
                hw,
                kk,
                T::one(),
                dyi,
                (hw, 1),
                cols,
                (1, hw),
                T::one(),
                grad.weight.data_mut(),
                (kk, 1),
            );
            let dxi = &mut dx[i * cin * hw..(i + 1) * cin * hw];
            if k == 1 {
                gemm(
                    kk,
                    cout,
                    hw,
                    T::one(),
                    self.weight.data(),
                    (1, kk),
                    dyi,
                    (hw, 1),
                    T::zero(),
                    dxi,
                    (hw, 1),
                );
            } else {
                gemm(
                    kk,
                    cout,
                    hw,
                    T::one(),
                    self.weight.data(),
                    (1, kk),
                    dyi,
                    (hw, 1),
                    T::zero(),
                    &mut dcol,
                    (hw, 1),
                );
                self.col2im(&dcol, h, w, dxi);
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(conv: &Conv2d<f64>, x: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (cin, cout) = (conv.in_channels(), conv.out_channels());
        let k = conv.weight.shape()[2];
        let p = (k / 2) as isize;
        let wt = conv.weight.data();
        let mut out = vec![0.0; cout * h * w];
        for o in 0..cout {
            for y in 0..h {
                for xx in 0..w {
                    let mut s = conv.bias.data()[o];
                    for c in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - p;
                                let sx = xx as isize + kx as isize - p;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                s += wt[((o * cin + c) * k + ky) * k + kx]
                                    * x[(c * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out[(o * h + y) * w + xx] = s;
                }
            }
        }
        out
    }

    #[test]
    fn forward_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [1, 3] {
            let mut conv = Conv2d::<f64>::he_uniform(2, 3, k, &mut rng);
            conv.bias = Tensor::from_vec(&[3], vec![0.1, -0.2, 0.3]).unwrap();
            let (h, w) = (4, 5);
            let x: Vec<f64> = (0..2 * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = conv.forward(&x, 1, h, w);
            let want = naive(&conv, &x, h, w);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conv = Conv2d::<f64>::he_uniform(2, 2, 3, &mut rng);
        let (n, h, w) = (2, 3, 4);
        let x: Vec<f64> = (0..n * 2 * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..n * 2 * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |c: &Conv2d<f64>, x: &[f64]| -> f64 {
            c.forward(x, n, h, w).iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let mut grad = Conv2d::zeros(2, 2, 3);
        let dx = conv.backward(&x, n, h, w, &probe, &mut grad);
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += eps;
            let mut xm = x.clone();
            xm[i] -= eps;
            let fd = (loss(&conv, &xp) - loss(&conv, &xm)) / (2.0 * eps);
            assert!((fd - dx[i]).abs() < 1e-7);
        }
        for i in 0..conv.weight.len() {
            let mut cp = conv.clone();
            cp.weight.data_mut()[i] += eps;
            let mut cm = conv.clone();
            cm.weight.data_mut()[i] -= eps;
            let fd = (loss(&cp, &x) - loss(&cm, &x)) / (2.0 * eps);
            assert!((fd - grad.weight.data()[i]).abs() < 1e-7);
        }
    }
}
