//! Central finite-difference checks of the analytic gradients, in `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{batch_loss, diff_loss, lp_loss, mae_loss, LossShape, LossWeights};
use crate::model::{Model, ModelConfig};
use crate::nn::Params;

#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub probes: usize,
    pub max_rel_err: f64,
    /// Name of the worst probe and its (analytic, numeric) values.
    pub worst: (String, f64, f64),
}

impl GradReport {
    fn new() -> Self {
        GradReport {
            probes: 0,
            max_rel_err: 0.0,
            worst: (String::new(), 0.0, 0.0),
        }
    }

    fn record(&mut self, name: String, analytic: f64, numeric: f64) {
        self.probes += 1;
        let rel = rel_err(analytic, numeric);
        if rel > self.max_rel_err || self.probes == 1 {
            self.max_rel_err = self.max_rel_err.max(rel);
            self.worst = (name, analytic, numeric);
        }
    }
}

/// `|a − n| / max(|a|, |n|)`, with absolute error below `1e-7` treated as
/// agreement so that vanishing gradients do not divide by zero.
pub fn rel_err(a: f64, n: f64) -> f64 {
    let diff = (a - n).abs();
    if diff < 1e-7 {
        return 0.0;
    }
    diff / a.abs().max(n.abs())
}

// small enough that a probe rarely straddles a ReLU or |x| kink, large
// enough to stay clear of f64 rounding
const STEP: f64 = 1e-6;

fn random_mask(rng: &mut impl Rng, hw: usize) -> Vec<bool> {
    (0..hw).map(|_| rng.gen_bool(0.85)).collect()
}

/// Checks the three loss gradients on random data at `probes` random
/// prediction elements each.
pub fn check_losses(seed: u64, probes: usize) -> Result<[GradReport; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = LossShape::new(3, 3, 6, 7);
    let y: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let yp: Vec<f64> = (0..s.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mask = random_mask(&mut rng, s.h * s.w);
    let wts = LossWeights::default();
    let fns: [&dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)>; 3] = [
        &|p| mae_loss(&y, p, &mask, s),
        &|p| lp_loss(&y, p, &mask, s, wts.eps),
        &|p| diff_loss(&y, p, &mask, s),
    ];
    let mut out = [GradReport::new(), GradReport::new(), GradReport::new()];
    for (k, f) in fns.iter().enumerate() {
        let (_, g) = f(&yp)?;
        for _ in 0..probes {
            let i = rng.gen_range(0..s.len());
            let mut p = yp.clone();
            p[i] += STEP;
            let up = f(&p)?.0;
            p[i] -= 2.0 * STEP;
            let dn = f(&p)?.0;
            out[k].record(format!("element {i}"), g[i], (up - dn) / (2.0 * STEP));
        }
    }
    Ok(out)
}

/// Checks `d(total loss)/dθ` through the full forward pass of a randomly
/// initialized `config` model on a batch of two `size × size` samples.
pub fn check_model(config: ModelConfig, size: usize, seed: u64, probes: usize) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::<f64>::new(config.clone(), seed)?;
    // move every parameter away from its structured init (zero output conv,
    // zero positional codes) so all paths carry gradient
    model.perturb(0.05, &mut rng);
    let (b, c) = (2, config.in_channels);
    let hw = size * size;
    let x: Vec<f64> = (0..b * 2 * c * hw).map(|_| rng.gen_range(0.0..1.0)).collect();
    let y: Vec<f64> = (0..b * 3 * c * hw).map(|_| rng.gen_range(0.0..1.0)).collect();
    let masks: Vec<Vec<bool>> = (0..b).map(|_| random_mask(&mut rng, hw)).collect();
    let s = LossShape::new(3, c, size, size);
    let wts = LossWeights::default();
    let loss = |m: &Model<f64>| -> Result<(f64, Vec<f64>, crate::model::ForwardCache<f64>)> {
        let (yp, cache) = m.forward(&x, b, size, size)?;
        let (l, g) = batch_loss(&y, &yp, &masks, s, &wts)?;
        Ok((l.total, g, cache))
    };
    let (_, dy, cache) = loss(&model)?;
    let mut grad = model.zeros_like();
    model.backward(&cache, &dy, &mut grad);
    let analytic: Vec<(String, Vec<f64>)> = grad
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();

    let mut report = GradReport::new();
    // every tensor at least once, then uniformly random elements
    let total: usize = analytic.iter().map(|(_, v)| v.len()).sum();
    let mut picks: Vec<(usize, usize)> = analytic
        .iter()
        .enumerate()
        .map(|(t, (_, v))| (t, rng.gen_range(0..v.len())))
        .collect();
    while picks.len() < probes {
        let mut k = rng.gen_range(0..total);
        let mut t = 0;
        while k >= analytic[t].1.len() {
            k -= analytic[t].1.len();
            t += 1;
        }
        picks.push((t, k));
    }
    for (t, k) in picks {
        let probe = |delta: f64| -> Result<f64> {
            let mut m = model.clone();
            m.named_mut()[t].1.data_mut()[k] += delta;
            Ok(loss(&m)?.0)
        };
        let numeric = (probe(STEP)? - probe(-STEP)?) / (2.0 * STEP);
        report.record(format!("{}[{k}]", analytic[t].0), analytic[t].1[k], numeric);
    }
    Ok(report)
}
