use super::{Real, Tensor};

/// Layer normalization over the last dimension with a learnable affine map.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

crate::impl_params!(LayerNorm { gamma, beta });

pub struct LayerNormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

const LN_EPS: f64 = 1e-5;

impl<T: Real> LayerNorm<T> {
    pub fn new(d: usize) -> Self {
        LayerNorm {
            gamma: Tensor::filled(&[d], T::one()),
            beta: Tensor::zeros(&[d]),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &[T]) -> (Vec<T>, LayerNormCache<T>) {
        let d = self.dim();
        let rows = x.len() / d;
        let dn = T::from_usize(d).unwrap();
        let eps = T::from_f64_lossy(LN_EPS);
        let mut y = vec![T::zero(); x.len()];
        let mut xhat = vec![T::zero(); x.len()];
        let mut rstd = vec![T::zero(); rows];
        for r in 0..rows {
            let xr = &x[r * d..(r + 1) * d];
            let mean = xr.iter().copied().sum::<T>() / dn;
            let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for i in 0..d {
                let xh = (xr[i] - mean) * rs;
                xhat[r * d + i] = xh;
                y[r * d + i] = xh * self.gamma.data()[i] + self.beta.data()[i];
            }
        }
        (y, LayerNormCache { xhat, rstd })
    }

    pub fn backward(&self, cache: &LayerNormCache<T>, dy: &[T], grad: &mut LayerNorm<T>) -> Vec<T> {
        let d = self.dim();
        let dn = T::from_usize(d).unwrap();
        let mut dx = vec![T::zero(); dy.len()];
        let mut dxhat = vec![T::zero(); d];
        for (r, &rs) in cache.rstd.iter().enumerate() {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let dyr = &dy[r * d..(r + 1) * d];
            let mut s1 = T::zero();
            let mut s2 = T::zero();
            for i in 0..d {
                grad.gamma.data_mut()[i] += dyr[i] * xh[i];
                grad.beta.data_mut()[i] += dyr[i];
                dxhat[i] = dyr[i] * self.gamma.data()[i];
                s1 += dxhat[i];
                s2 += dxhat[i] * xh[i];
            }
            for i in 0..d {
                dx[r * d + i] = rs / dn * (dn * dxhat[i] - s1 - xh[i] * s2);
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_matches_finite_differences() {
        let mut ln = LayerNorm::<f64>::new(4);
        ln.gamma = Tensor::from_vec(&[4], vec![1.0, 0.5, -1.2, 2.0]).unwrap();
        ln.beta = Tensor::from_vec(&[4], vec![0.1, 0.0, 0.3, -0.2]).unwrap();
        let x = vec![0.3, -1.0, 2.0, 0.7, 1.5, 1.1, -0.4, 0.0];
        let probe = vec![1.0, -2.0, 0.5, 0.25, -1.0, 0.3, 0.8, 1.7];
        let loss = |x: &[f64]| -> f64 {
            ln.forward(x).0.iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = ln.forward(&x);
        let mut g = LayerNorm::new(4);
        let dx = ln.backward(&cache, &probe, &mut g);
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += 1e-6;
            let mut xm = x.clone();
            xm[i] -= 1e-6;
            let fd = (loss(&xp) - loss(&xm)) / 2e-6;
            assert!((fd - dx[i]).abs() < 1e-7, "{i}: {fd} vs {}", dx[i]);
        }
    }

    #[test]
    fn zero_rows_normalize_to_beta() {
        let ln = LayerNorm::<f64>::new(3);
        let (y, _) = ln.forward(&[0.0; 6]);
        assert!(y.iter().all(|&v| v == 0.0));
    }
}
