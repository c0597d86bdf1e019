use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{gelu, gelu_grad, gemm, LayerNorm, LayerNormCache, Linear, Real};

/// Windowed multi-head self-attention followed by a GELU feed-forward layer,
/// both with residual connections. Queries and keys are layer-normalized
/// over the full embedding before being split into heads.
#[derive(Clone, Debug, PartialEq)]
pub struct Mha<T> {
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub wo: Linear<T>,
    pub ln_q: LayerNorm<T>,
    pub ln_k: LayerNorm<T>,
    pub ffn1: Linear<T>,
    pub ffn2: Linear<T>,
}

crate::impl_params!(Mha { wq, wk, wv, wo, ln_q, ln_k, ffn1, ffn2 });

pub struct MhaCache<T> {
    rows: usize,
    win_len: usize,
    u: Vec<T>,
    ln_q: LayerNormCache<T>,
    ln_k: LayerNormCache<T>,
    qn: Vec<T>,
    kn: Vec<T>,
    v: Vec<T>,
    /// softmax maps, `[n_win, heads, L, L]`
    p: Vec<T>,
    o: Vec<T>,
    m: Vec<T>,
    f1: Vec<T>,
    g: Vec<T>,
}

impl<T> MhaCache<T> {
    /// Attention maps `[n_win, heads, L, L]`.
    pub fn attention(&self) -> &[T] {
        &self.p
    }
}

impl<T: Real> Mha<T> {
    pub fn new(d: usize, rng: &mut impl Rng) -> Self {
        Mha {
            wq: Linear::xavier_uniform(d, d, rng),
            wk: Linear::xavier_uniform(d, d, rng),
            wv: Linear::xavier_uniform(d, d, rng),
            wo: Linear::xavier_uniform(d, d, rng),
            ln_q: LayerNorm::new(d),
            ln_k: LayerNorm::new(d),
            ffn1: Linear::xavier_uniform(d, 2 * d, rng),
            ffn2: Linear::xavier_uniform(2 * d, d, rng),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Mha {
            wq: Linear::zeros(d, d),
            wk: Linear::zeros(d, d),
            wv: Linear::zeros(d, d),
            wo: Linear::zeros(d, d),
            ln_q: LayerNorm::new(d),
            ln_k: LayerNorm::new(d),
            ffn1: Linear::zeros(d, 2 * d),
            ffn2: Linear::zeros(2 * d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.din()
    }

    /// Returns the residual update `y − u` for tokens `u: [n_win·L, d]`.
    pub fn forward(&self, u: &[T], win_len: usize, heads: usize) -> Result<(Vec<T>, MhaCache<T>)> {
        let d = self.dim();
        if heads == 0 || d % heads != 0 {
            return Err(Error::Shape(format!("{heads} heads do not divide dimension {d}")));
        }
        if win_len == 0 || u.len() % (win_len * d) != 0 {
            return Err(Error::Shape(format!(
                "{} token values are not whole windows of {win_len} x {d}",
                u.len()
            )));
        }
        let rows = u.len() / d;
        let n_win = rows / win_len;
        let dh = d / heads;
        let l = win_len;
        let scale = T::one() / T::from_usize(dh).unwrap().sqrt();

        let (qn, ln_q) = self.ln_q.forward(&self.wq.forward(u, rows));
        let (kn, ln_k) = self.ln_k.forward(&self.wk.forward(u, rows));
        let v = self.wv.forward(u, rows);
        let mut p = vec![T::zero(); n_win * heads * l * l];
        let mut o = vec![T::zero(); rows * d];
        for wi in 0..n_win {
            for h in 0..heads {
                let off = wi * l * d + h * dh;
                let pm = &mut p[(wi * heads + h) * l * l..(wi * heads + h + 1) * l * l];
                gemm(l, dh, l, scale, &qn[off..], (d, 1), &kn[off..], (1, d), T::zero(), pm, (l, 1));
                for row in pm.chunks_mut(l) {
                    let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
                    let mut s = T::zero();
                    for x in row.iter_mut() {
                        *x = (*x - mx).exp();
                        s += *x;
                    }
                    for x in row.iter_mut() {
                        *x /= s;
                    }
                }
                gemm(l, l, dh, T::one(), pm, (l, 1), &v[off..], (d, 1), T::zero(), &mut o[off..], (d, 1));
            }
        }
        let mut m = self.wo.forward(&o, rows);
        for (mi, &ui) in m.iter_mut().zip(u) {
            *mi += ui;
        }
        let f1 = self.ffn1.forward(&m, rows);
        let g: Vec<T> = f1.iter().map(|&x| gelu(x)).collect();
        let f2 = self.ffn2.forward(&g, rows);
        let delta: Vec<T> = m.iter().zip(&f2).zip(u).map(|((&a, &b), &c)| a + b - c).collect();
        let cache = MhaCache {
            rows,
            win_len: l,
            u: u.to_vec(),
            ln_q,
            ln_k,
            qn,
            kn,
            v,
            p,
            o,
            m,
            f1,
            g,
        };
        Ok((delta, cache))
    }

    /// Back-propagates `dL/d(y − u)`; returns `dL/du`.
    pub fn backward(&self, c: &MhaCache<T>, d_delta: &[T], heads: usize, grad: &mut Mha<T>) -> Vec<T> {
        let d = self.dim();
        let rows = c.rows;
        let dh = d / heads;
        let l = c.win_len;
        let n_win = rows / l;
        let scale = T::one() / T::from_usize(dh).unwrap().sqrt();

        let dg = self.ffn2.backward(&c.g, rows, d_delta, &mut grad.ffn2);
        let df1: Vec<T> = dg.iter().zip(&c.f1).map(|(&a, &x)| a * gelu_grad(x)).collect();
        let mut dm = self.ffn1.backward(&c.m, rows, &df1, &mut grad.ffn1);
        for (a, &b) in dm.iter_mut().zip(d_delta) {
            *a += b;
        }
        let do_ = self.wo.backward(&c.o, rows, &dm, &mut grad.wo);

        let mut dqn = vec![T::zero(); rows * d];
        let mut dkn = vec![T::zero(); rows * d];
        let mut dv = vec![T::zero(); rows * d];
        let mut dp = vec![T::zero(); l * l];
        for wi in 0..n_win {
            for h in 0..heads {
                let off = wi * l * d + h * dh;
                let pm = &c.p[(wi * heads + h) * l * l..(wi * heads + h + 1) * l * l];
                // dP = dO · Vᵀ
                gemm(l, dh, l, T::one(), &do_[off..], (d, 1), &c.v[off..], (1, d), T::zero(), &mut dp, (l, 1));
                // dV = Pᵀ · dO
                gemm(l, l, dh, T::one(), pm, (1, l), &do_[off..], (d, 1), T::zero(), &mut dv[off..], (d, 1));
                for (prow, drow) in pm.chunks(l).zip(dp.chunks_mut(l)) {
                    let dot = prow.iter().zip(drow.iter()).map(|(&a, &b)| a * b).sum::<T>();
                    for (x, &pv) in drow.iter_mut().zip(prow) {
                        *x = pv * (*x - dot);
                    }
                }
                gemm(l, l, dh, scale, &dp, (l, 1), &c.kn[off..], (d, 1), T::zero(), &mut dqn[off..], (d, 1));
                gemm(l, l, dh, scale, &dp, (1, l), &c.qn[off..], (d, 1), T::zero(), &mut dkn[off..], (d, 1));
            }
        }
        let dq = self.ln_q.backward(&c.ln_q, &dqn, &mut grad.ln_q);
        let dk = self.ln_k.backward(&c.ln_k, &dkn, &mut grad.ln_k);
        let mut du = self.wq.backward(&c.u, rows, &dq, &mut grad.wq);
        for (path, lin, g) in [(&dk, &self.wk, &mut grad.wk), (&dv, &self.wv, &mut grad.wv)] {
            let dx = lin.backward(&c.u, rows, path, g);
            for (a, b) in du.iter_mut().zip(dx) {
                *a += b;
            }
        }
        // m = u + …, and the returned quantity subtracts u
        for ((a, &b), &e) in du.iter_mut().zip(&dm).zip(d_delta) {
            *a += b - e;
        }
        du
    }
}

/// Full block output `y` for tokens `[n_win·L, d]` with a positional code
/// `pos: [L, d]` added to every window first.
pub fn mha_block<T: Real>(
    mha: &Mha<T>,
    tokens: &[T],
    pos: &[T],
    win_len: usize,
    heads: usize,
) -> Result<(Vec<T>, MhaCache<T>)> {
    let d = mha.dim();
    if pos.len() != win_len * d {
        return Err(Error::Shape(format!(
            "positional code has {} values, expected {}",
            pos.len(),
            win_len * d
        )));
    }
    let mut u = tokens.to_vec();
    for (i, x) in u.iter_mut().enumerate() {
        *x += pos[i % (win_len * d)];
    }
    let (delta, cache) = mha.forward(&u, win_len, heads)?;
    Ok((u.iter().zip(&delta).map(|(&a, &b)| a + b).collect(), cache))
}
