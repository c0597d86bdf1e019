//! The spatiotemporal downscaling network.
//!
//! Two coarse frames `[2, C, h, w]` go through a shared head conv and a
//! stack of residual channel-attention blocks, then three temporal-fusion
//! attention branches (horizontal, vertical, depth shuffles sharing one
//! attention block), and finally feature split and reconstruction into three
//! fine frames `[3, C, h, w]` at the same pixel size.

mod attention;
mod fsr;
mod rcab;
pub mod shuffle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Linear, Params, Real, Tensor};

pub use attention::{mha_block, Mha, MhaCache};
pub use fsr::{Fsr, FsrCache};
pub use rcab::{Rcab, RcabCache};
use shuffle::{Axis, TokenMap};

/// Which temporal-fusion branches run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionAxes {
    pub h: bool,
    pub v: bool,
    pub d: bool,
}

impl AttentionAxes {
    pub const ALL: Self = AttentionAxes {
        h: true,
        v: true,
        d: true,
    };

    pub fn enabled(&self) -> Vec<Axis> {
        let mut out = Vec::new();
        if self.h {
            out.push(Axis::H);
        }
        if self.v {
            out.push(Axis::V);
        }
        if self.d {
            out.push(Axis::D);
        }
        out
    }

    /// Short label such as `hvd`, `h-d` or `---`.
    pub fn label(&self) -> String {
        [(self.h, 'h'), (self.v, 'v'), (self.d, 'd')]
            .iter()
            .map(|&(on, c)| if on { c } else { '-' })
            .collect()
    }
}

impl Default for AttentionAxes {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub feat_channels: usize,
    pub n_rcab: usize,
    pub reduction: usize,
    pub window: usize,
    pub n_heads: usize,
    pub in_channels: usize,
    pub temporal_in: usize,
    pub temporal_out: usize,
    pub use_attention: bool,
    pub axes: AttentionAxes,
    pub use_pos: bool,
    pub use_fsr: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ModelConfig {
    pub fn desk() -> Self {
        ModelConfig {
            feat_channels: 32,
            n_rcab: 4,
            reduction: 16,
            window: 8,
            n_heads: 4,
            in_channels: 3,
            temporal_in: 2,
            temporal_out: 3,
            use_attention: true,
            axes: AttentionAxes::ALL,
            use_pos: true,
            use_fsr: true,
        }
    }

    pub fn full() -> Self {
        ModelConfig {
            feat_channels: 64,
            n_rcab: 8,
            ..Self::desk()
        }
    }

    pub fn tiny() -> Self {
        ModelConfig {
            feat_channels: 8,
            n_rcab: 1,
            reduction: 4,
            window: 8,
            n_heads: 2,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.feat_channels == 0 || self.window == 0 || self.n_heads == 0 || self.reduction == 0 {
            return bad("feat_channels, window, n_heads and reduction must be positive".into());
        }
        if self.feat_channels % self.n_heads != 0 {
            return bad(format!(
                "feat_channels {} not divisible by n_heads {}",
                self.feat_channels, self.n_heads
            ));
        }
        if self.feat_channels < self.reduction {
            return bad(format!(
                "feat_channels {} smaller than reduction {}",
                self.feat_channels, self.reduction
            ));
        }
        if self.in_channels == 0 || self.temporal_in != 2 || self.temporal_out != 3 {
            return bad("only 2 input frames and 3 output frames are supported".into());
        }
        if self.feat_channels > 1024 || self.n_rcab > 256 || self.window > 64 {
            return bad("model dimensions out of range".into());
        }
        Ok(())
    }

    /// Spatial sizes the network accepts.
    pub fn check_size(&self, h: usize, w: usize) -> Result<()> {
        if h == 0 || w == 0 {
            return Err(Error::Shape(format!("empty input {h}x{w}")));
        }
        if self.use_attention && (h % self.window != 0 || w % self.window != 0) {
            return Err(Error::Shape(format!(
                "window {} does not divide input size {h}x{w}",
                self.window
            )));
        }
        Ok(())
    }
}

/// All learnable weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub head: Conv2d<T>,
    pub rcabs: Vec<Rcab<T>>,
    pub mha: Mha<T>,
    /// Positional codes `[F, w, w]` per branch.
    pub pos_h: Tensor<T>,
    pub pos_v: Tensor<T>,
    pub pos_d: Tensor<T>,
    /// Depth-branch fold `2F → F` and unfold `F → 2F`.
    pub fold: Linear<T>,
    pub unfold: Linear<T>,
    pub fsr: Fsr<T>,
}

crate::impl_params!(Model { head, rcabs, mha, pos_h, pos_v, pos_d, fold, unfold, fsr });

struct BranchCache<T> {
    axis: Axis,
    map: TokenMap,
    tokens: Vec<T>,
    mha: MhaCache<T>,
    delta: Vec<T>,
}

/// Intermediates kept for the backward pass.
pub struct ForwardCache<T> {
    dims: (usize, usize, usize),
    x: Vec<T>,
    rcabs: Vec<RcabCache<T>>,
    branches: Vec<BranchCache<T>>,
    fsr: FsrCache<T>,
}

impl<T> ForwardCache<T> {
    /// Attention maps of each branch that ran, in `h, v, d` order.
    pub fn attention_maps(&self) -> Vec<&[T]> {
        self.branches.iter().map(|b| b.mha.attention()).collect()
    }
}

fn finite<T: Real>(stage: &str, v: &[T]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite {
            stage: stage.into(),
            detail: format!("element {i} of {}", v.len()),
        }),
    }
}

impl<T: Real> Model<T> {
    /// Seeded initialization: He-uniform convs, Xavier-uniform attention
    /// projections, zero positional codes and a zero output conv.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, c, win) = (config.feat_channels, config.in_channels, config.window);
        let head = Conv2d::he_uniform(c, f, 3, &mut rng);
        let rcabs = (0..config.n_rcab)
            .map(|_| Rcab::new(f, config.reduction, &mut rng))
            .collect();
        let mha = Mha::new(f, &mut rng);
        let fold = Linear::xavier_uniform(2 * f, f, &mut rng);
        let unfold = Linear::xavier_uniform(f, 2 * f, &mut rng);
        let fsr = Fsr::new(f, c, &mut rng);
        Ok(Model {
            head,
            rcabs,
            mha,
            pos_h: Tensor::zeros(&[f, win, win]),
            pos_v: Tensor::zeros(&[f, win, win]),
            pos_d: Tensor::zeros(&[f, win, win]),
            fold,
            unfold,
            fsr,
            config,
        })
    }

    /// Every weight zero (layer-norm scales stay at one).
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (f, c, win) = (config.feat_channels, config.in_channels, config.window);
        Ok(Model {
            head: Conv2d::zeros(c, f, 3),
            rcabs: (0..config.n_rcab).map(|_| Rcab::zeros(f, config.reduction)).collect(),
            mha: Mha::zeros(f),
            pos_h: Tensor::zeros(&[f, win, win]),
            pos_v: Tensor::zeros(&[f, win, win]),
            pos_d: Tensor::zeros(&[f, win, win]),
            fold: Linear::zeros(2 * f, f),
            unfold: Linear::zeros(f, 2 * f),
            fsr: Fsr::zeros(f, c),
            config,
        })
    }

    /// Same shapes, all values zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        g.visit_mut("", &mut |_, t| t.fill(T::zero()));
        g
    }

    /// Adds uniform noise in `±scale` to every parameter.
    pub fn perturb(&mut self, scale: f64, rng: &mut impl Rng) {
        self.visit_mut("", &mut |_, t| {
            for v in t.data_mut() {
                *v += T::from_f64_lossy(rng.gen_range(-scale..scale));
            }
        });
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut out = Model::<U>::zeros(self.config.clone()).expect("validated config");
        let src = self.named();
        for ((_, dst), (_, s)) in out.named_mut().into_iter().zip(src) {
            *dst = s.cast();
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.all_finite())
    }

    fn pos(&self, axis: Axis) -> &Tensor<T> {
        match axis {
            Axis::H => &self.pos_h,
            Axis::V => &self.pos_v,
            Axis::D => &self.pos_d,
        }
    }

    /// `x: [B, 2, C, h, w]` → `[B, 3, C, h, w]`.
    pub fn forward(&self, x: &[T], b: usize, h: usize, w: usize) -> Result<(Vec<T>, ForwardCache<T>)> {
        let cfg = &self.config;
        cfg.check_size(h, w)?;
        let (f, c) = (cfg.feat_channels, cfg.in_channels);
        let hw = h * w;
        if b == 0 || x.len() != b * 2 * c * hw {
            return Err(Error::Shape(format!(
                "input has {} values, expected [{b}, 2, {c}, {h}, {w}]",
                x.len()
            )));
        }
        finite("input", x)?;
        let n = 2 * b;
        let mut z = self.head.forward(x, n, h, w);
        finite("head", &z)?;
        let mut rcabs = Vec::with_capacity(self.rcabs.len());
        for blk in &self.rcabs {
            let (y, cache) = blk.forward(&z, n, h, w);
            z = y;
            rcabs.push(cache);
        }
        finite("rcab", &z)?;

        let mut branches = Vec::new();
        if cfg.use_attention {
            let win = cfg.window;
            let l = win * win;
            for axis in cfg.axes.enabled() {
                let map = TokenMap::new(axis, b, f, h, w, win)?;
                let tokens = map.gather(&z);
                let rows = map.tokens();
                let mut u = if axis == Axis::D {
                    self.fold.forward(&tokens, rows)
                } else {
                    tokens.clone()
                };
                if cfg.use_pos {
                    let pos = self.pos(axis).data();
                    for (t, row) in u.chunks_mut(f).enumerate() {
                        let li = t % l;
                        for (ch, v) in row.iter_mut().enumerate() {
                            *v += pos[ch * l + li];
                        }
                    }
                }
                let (delta, mha) = self.mha.forward(&u, l, cfg.n_heads)?;
                let out = if axis == Axis::D {
                    self.unfold.forward(&delta, rows)
                } else {
                    delta.clone()
                };
                map.scatter_add(&out, &mut z);
                finite("attention", &z)?;
                branches.push(BranchCache {
                    axis,
                    map,
                    tokens: if axis == Axis::D { tokens } else { Vec::new() },
                    mha,
                    delta,
                });
            }
        }

        let (y, fsr) = self.fsr.forward(&z, x, (b, h, w), cfg.use_fsr);
        finite("fsr", &y)?;
        let cache = ForwardCache {
            dims: (b, h, w),
            x: x.to_vec(),
            rcabs,
            branches,
            fsr,
        };
        Ok((y, cache))
    }

    /// Accumulates `dL/dθ` into `grad` given `dL/dy`; returns `dL/dx`.
    pub fn backward(&self, cache: &ForwardCache<T>, dy: &[T], grad: &mut Model<T>) -> Vec<T> {
        let (b, h, w) = cache.dims;
        let cfg = &self.config;
        let f = cfg.feat_channels;
        let n = 2 * b;
        let (mut dz, mut dx) = self.fsr.backward(&cache.fsr, (b, h, w), dy, &mut grad.fsr);
        let l = cfg.window * cfg.window;
        for br in cache.branches.iter().rev() {
            let rows = br.map.tokens();
            let dout = br.map.gather(&dz);
            let ddelta = if br.axis == Axis::D {
                self.unfold.backward(&br.delta, rows, &dout, &mut grad.unfold)
            } else {
                dout
            };
            let du = self.mha.backward(&br.mha, &ddelta, cfg.n_heads, &mut grad.mha);
            let gpos = match br.axis {
                _ if !cfg.use_pos => None,
                Axis::H => Some(&mut grad.pos_h),
                Axis::V => Some(&mut grad.pos_v),
                Axis::D => Some(&mut grad.pos_d),
            };
            if let Some(gpos) = gpos {
                let gpos = gpos.data_mut();
                for (t, row) in du.chunks(f).enumerate() {
                    let li = t % l;
                    for (ch, &g) in row.iter().enumerate() {
                        gpos[ch * l + li] += g;
                    }
                }
            }
            let dt = if br.axis == Axis::D {
                self.fold.backward(&br.tokens, rows, &du, &mut grad.fold)
            } else {
                du
            };
            br.map.scatter_add(&dt, &mut dz);
        }
        for ((blk, c), g) in self
            .rcabs
            .iter()
            .zip(&cache.rcabs)
            .zip(grad.rcabs.iter_mut())
            .rev()
        {
            dz = blk.backward(c, n, h, w, &dz, g);
        }
        let dhead = self.head.backward(&cache.x, n, h, w, &dz, &mut grad.head);
        for (a, b) in dx.iter_mut().zip(dhead) {
            *a += b;
        }
        dx
    }

    /// Parameter names, shapes and counts.
    pub fn summary(&self) -> ModelSummary {
        let layers: Vec<(String, Vec<usize>, usize)> = self
            .named()
            .into_iter()
            .map(|(name, t)| (name, t.shape().to_vec(), t.len()))
            .collect();
        ModelSummary {
            total: layers.iter().map(|l| l.2).sum(),
            layers,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSummary {
    pub layers: Vec<(String, Vec<usize>, usize)>,
    pub total: usize,
}

impl std::fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, shape, count) in &self.layers {
            writeln!(f, "{name:<28} {:<18} {count}", format!("{shape:?}"))?;
        }
        write!(f, "total parameters: {}", self.total)
    }
}

/// The model-free prediction `(X₀, ½(X₀+X₁), X₁)` for `x: [B, 2, C, h, w]`.
pub fn st_interp<T: Real>(x: &[T], b: usize, frame_len: usize) -> Vec<T> {
    let half = T::from_f64_lossy(0.5);
    let mut y = Vec::with_capacity(3 * b * frame_len);
    for s in 0..b {
        let x0 = &x[2 * s * frame_len..(2 * s + 1) * frame_len];
        let x1 = &x[(2 * s + 1) * frame_len..(2 * s + 2) * frame_len];
        y.extend_from_slice(x0);
        y.extend(x0.iter().zip(x1).map(|(&a, &b)| half * (a + b)));
        y.extend_from_slice(x1);
    }
    y
}
