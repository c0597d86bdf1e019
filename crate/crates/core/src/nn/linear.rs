use rand::Rng;

use super::{gemm, Real, Tensor};

/// Row-wise affine map `y = x·Wᵀ + b` over `rows × in` inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

crate::impl_params!(Linear { weight, bias });

impl<T: Real> Linear<T> {
    pub fn zeros(din: usize, dout: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[dout, din]),
            bias: Tensor::zeros(&[dout]),
        }
    }

    pub fn xavier_uniform(din: usize, dout: usize, rng: &mut impl Rng) -> Self {
        let mut l = Self::zeros(din, dout);
        let bound = (6.0 / (din + dout) as f64).sqrt();
        for w in l.weight.data_mut() {
            *w = T::from_f64_lossy(rng.gen_range(-bound..bound));
        }
        l
    }

    pub fn he_uniform(din: usize, dout: usize, rng: &mut impl Rng) -> Self {
        let mut l = Self::zeros(din, dout);
        let bound = (6.0 / din as f64).sqrt();
        for w in l.weight.data_mut() {
            *w = T::from_f64_lossy(rng.gen_range(-bound..bound));
        }
        l
    }

    pub fn din(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn dout(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[T], rows: usize) -> Vec<T> {
        let (din, dout) = (self.din(), self.dout());
        assert_eq!(x.len(), rows * din, "linear input length");
        let mut y = Vec::with_capacity(rows * dout);
        for _ in 0..rows {
            y.extend_from_slice(self.bias.data());
        }
        gemm(
            rows,
            din,
            dout,
            T::one(),
            x,
            (din, 1),
            self.weight.data(),
            (1, din),
            T::one(),
            &mut y,
            (dout, 1),
        );
        y
    }

    pub fn backward(&self, x: &[T], rows: usize, dy: &[T], grad: &mut Linear<T>) -> Vec<T> {
        let (din, dout) = (self.din(), self.dout());
        assert_eq!(dy.len(), rows * dout, "linear grad length");
        for r in dy.chunks(dout) {
            for (g, &d) in grad.bias.data_mut().iter_mut().zip(r) {
                *g += d;
            }
        }
        // dW += dyᵀ · x
        gemm(
            dout,
            rows,
            din,
            T::one(),
            dy,
            (1, dout),
            x,
            (din, 1),
            T::one(),
            grad.weight.data_mut(),
            (din, 1),
        );
        let mut dx = vec![T::zero(); rows * din];
        gemm(
            rows,
            dout,
            din,
            T::one(),
            dy,
            (dout, 1),
            self.weight.data(),
            (din, 1),
            T::zero(),
            &mut dx,
            (din, 1),
        );
        dx
    }
}
