//! Training losses over water pixels: masked MAE, a per-frame normalized
//! squared error, and a first-order gradient-difference term along width,
//! height and the channel axis.
//!
//! Every function takes the ground truth `y` and prediction `yp`, both
//! `[T, C, h, w]`, plus a shared `[h, w]` water mask, and returns the loss
//! with its gradient with respect to `yp`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub a_mae: f64,
    pub a_lp: f64,
    pub a_diff: f64,
    pub eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            a_mae: 4.0,
            a_lp: 1.0,
            a_diff: 100.0,
            eps: 1e-8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a_mae, self.a_lp, self.a_diff, self.eps];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn combine(&self, mae: f64, lp: f64, diff: f64) -> f64 {
        self.a_mae * mae + self.a_lp * lp + self.a_diff * diff
    }
}

/// Layout of one sample: `frames × channels × h × w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossShape {
    pub frames: usize,
    pub channels: usize,
    pub h: usize,
    pub w: usize,
}

impl LossShape {
    pub fn new(frames: usize, channels: usize, h: usize, w: usize) -> Self {
        LossShape {
            frames,
            channels,
            h,
            w,
        }
    }

    pub fn len(&self) -> usize {
        self.frames * self.channels * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check<T>(&self, y: &[T], yp: &[T], mask: &[bool]) -> Result<usize> {
        if y.len() != self.len() || yp.len() != self.len() || mask.len() != self.h * self.w {
            return Err(Error::Shape(format!(
                "loss inputs {} / {} / mask {} do not match {:?}",
                y.len(),
                yp.len(),
                mask.len(),
                self
            )));
        }
        let water = mask.iter().filter(|&&m| m).count();
        if water == 0 {
            return Err(Error::Input("loss mask has no water pixels".into()));
        }
        Ok(water)
    }
}

/// Mean absolute error over water elements.
pub fn mae_loss<T: Real>(y: &[T], yp: &[T], mask: &[bool], s: LossShape) -> Result<(T, Vec<T>)> {
    let water = s.check(y, yp, mask)?;
    let hw = s.h * s.w;
    let inv = T::one() / T::from_usize(water * s.frames * s.channels).unwrap();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); y.len()];
    for i in 0..y.len() {
        if mask[i % hw] {
            let d = yp[i] - y[i];
            loss += d.abs();
            grad[i] = if d > T::zero() {
                inv
            } else if d < T::zero() {
                -inv
            } else {
                T::zero()
            };
        }
    }
    Ok((loss * inv, grad))
}

/// Mean of `(Y − Y')² / (‖Y(t)‖² + eps)` over water elements, where the
/// normalizer is the squared norm of ground-truth frame `t` on water.
pub fn lp_loss<T: Real>(y: &[T], yp: &[T], mask: &[bool], s: LossShape, eps: f64) -> Result<(T, Vec<T>)> {
    let water = s.check(y, yp, mask)?;
    let hw = s.h * s.w;
    let fl = s.channels * hw;
    let inv = T::one() / T::from_usize(water * s.frames * s.channels).unwrap();
    let eps = T::from_f64_lossy(eps);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); y.len()];
    for t in 0..s.frames {
        let r = t * fl..(t + 1) * fl;
        let norm = y[r.clone()]
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[i % hw])
            .map(|(_, &v)| v * v)
            .sum::<T>()
            + eps;
        let scale = inv / norm;
        for i in r {
            if mask[i % hw] {
                let d = yp[i] - y[i];
                loss += d * d * scale;
                grad[i] = (d + d) * scale;
            }
        }
    }
    Ok((loss, grad))
}

/// Sum over the width, height and channel directions of the mean squared
/// difference between forward differences of `Y'` and `Y`. Only pairs with
/// both pixels on water count; a direction with no pairs contributes zero.
pub fn diff_loss<T: Real>(y: &[T], yp: &[T], mask: &[bool], s: LossShape) -> Result<(T, Vec<T>)> {
    s.check(y, yp, mask)?;
    if s.h < 2 || s.w < 2 {
        return Err(Error::Shape(format!("difference loss needs h, w >= 2, got {}x{}", s.h, s.w)));
    }
    let (h, w, c) = (s.h, s.w, s.channels);
    let hw = h * w;
    let e: Vec<T> = yp.iter().zip(y).map(|(&a, &b)| a - b).collect();
    let mut grad = vec![T::zero(); y.len()];
    let mut loss = T::zero();
    // (pixel pairs, channel step): along x, along y, then across channels
    let x_pairs: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w - 1).map(move |q| (r * w + q, r * w + q + 1)))
        .filter(|&(a, b)| mask[a] && mask[b])
        .collect();
    let y_pairs: Vec<(usize, usize)> = (0..(h - 1) * w)
        .map(|p| (p, p + w))
        .filter(|&(a, b)| mask[a] && mask[b])
        .collect();
    let z_pairs: Vec<usize> = (0..hw).filter(|&p| mask[p]).collect();
    let mut term = |pairs: &mut dyn Iterator<Item = (usize, usize)>, count: usize| {
        if count == 0 {
            return;
        }
        let inv = T::one() / T::from_usize(count).unwrap();
        for (a, b) in pairs {
            let g = e[b] - e[a];
            loss += g * g * inv;
            let d = (g + g) * inv;
            grad[b] += d;
            grad[a] -= d;
        }
    };
    let planes = s.frames * c;
    term(
        &mut (0..planes).flat_map(|k| x_pairs.iter().map(move |&(a, b)| (k * hw + a, k * hw + b))),
        planes * x_pairs.len(),
    );
    term(
        &mut (0..planes).flat_map(|k| y_pairs.iter().map(move |&(a, b)| (k * hw + a, k * hw + b))),
        planes * y_pairs.len(),
    );
    let zc = if c >= 2 { s.frames * (c - 1) * z_pairs.len() } else { 0 };
    term(
        &mut (0..s.frames).flat_map(|t| {
            let z = &z_pairs;
            (0..c.saturating_sub(1)).flat_map(move |ch| {
                z.iter()
                    .map(move |&p| ((t * c + ch) * hw + p, (t * c + ch + 1) * hw + p))
            })
        }),
        zc,
    );
    Ok((loss, grad))
}

/// Weighted loss with its parts.
#[derive(Clone, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mae: f64,
    pub lp: f64,
    pub diff: f64,
}

/// Weighted sum of the three losses and its gradient.
pub fn total_loss<T: Real>(
    y: &[T],
    yp: &[T],
    mask: &[bool],
    s: LossShape,
    wts: &LossWeights,
) -> Result<(LossBreakdown, Vec<T>)> {
    let (mae, gm) = mae_loss(y, yp, mask, s)?;
    let (lp, gl) = lp_loss(y, yp, mask, s, wts.eps)?;
    let (diff, gd) = if wts.a_diff != 0.0 {
        diff_loss(y, yp, mask, s)?
    } else {
        (T::zero(), vec![T::zero(); y.len()])
    };
    let (am, al, ad) = (
        T::from_f64_lossy(wts.a_mae),
        T::from_f64_lossy(wts.a_lp),
        T::from_f64_lossy(wts.a_diff),
    );
    let grad = gm
        .iter()
        .zip(&gl)
        .zip(&gd)
        .map(|((&a, &b), &c)| am * a + al * b + ad * c)
        .collect();
    let (mae, lp, diff) = (mae.to_f64_lossy(), lp.to_f64_lossy(), diff.to_f64_lossy());
    Ok((
        LossBreakdown {
            total: wts.combine(mae, lp, diff),
            mae,
            lp,
            diff,
        },
        grad,
    ))
}

/// Mean of [`total_loss`] over a batch of samples laid out back to back,
/// each with its own mask.
pub fn batch_loss<T: Real>(
    y: &[T],
    yp: &[T],
    masks: &[Vec<bool>],
    s: LossShape,
    wts: &LossWeights,
) -> Result<(LossBreakdown, Vec<T>)> {
    let n = s.len();
    if masks.is_empty() || y.len() != masks.len() * n || yp.len() != y.len() {
        return Err(Error::Shape(format!(
            "batch of {} masks does not match {} values",
            masks.len(),
            y.len()
        )));
    }
    let inv = 1.0 / masks.len() as f64;
    let tinv = T::from_f64_lossy(inv);
    let mut acc = LossBreakdown {
        total: 0.0,
        mae: 0.0,
        lp: 0.0,
        diff: 0.0,
    };
    let mut grad = Vec::with_capacity(y.len());
    for (i, m) in masks.iter().enumerate() {
        let r = i * n..(i + 1) * n;
        let (l, g) = total_loss(&y[r.clone()], &yp[r], m, s, wts)?;
        acc.total += l.total * inv;
        acc.mae += l.mae * inv;
        acc.lp += l.lp * inv;
        acc.diff += l.diff * inv;
        grad.extend(g.into_iter().map(|v| v * tinv));
    }
    Ok((acc, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights_combine() {
        assert!((LossWeights::default().combine(1.0, 0.5, 0.01) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn constant_fields() {
        let s = LossShape::new(3, 3, 4, 4);
        let y = vec![0.5f64; s.len()];
        let yp = vec![0.25f64; s.len()];
        let m = vec![true; 16];
        assert!((mae_loss(&y, &yp, &m, s).unwrap().0 - 0.25).abs() < 1e-15);
        assert_eq!(diff_loss(&y, &yp, &m, s).unwrap().0, 0.0);
        assert_eq!(mae_loss(&y, &y, &m, s).unwrap().0, 0.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let s = LossShape::new(1, 1, 2, 2);
        let v = vec![0.0f64; 4];
        assert!(mae_loss(&v, &v, &[false; 4], s).is_err());
        assert!(lp_loss(&v, &v, &[false; 4], s, 1e-8).is_err());
    }
}
