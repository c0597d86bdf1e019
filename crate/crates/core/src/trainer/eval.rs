use crate::dataset::{SamplePair, CHANNELS};
use crate::error::{Error, Result};
use crate::metrics::{score_sample, MetricReport};
use crate::model::{st_interp, Model};

/// Stacks samples into `x: [B, 2, C, h, w]`, `y: [B, 3, C, h, w]` and masks.
pub fn stack(samples: &[&SamplePair]) -> Result<(Vec<f32>, Vec<f32>, Vec<Vec<bool>>)> {
    let first = samples.first().ok_or_else(|| Error::Input("empty batch".into()))?;
    let (h, w) = (first.height, first.width);
    let mut x = Vec::with_capacity(samples.len() * first.lr.len());
    let mut y = Vec::with_capacity(samples.len() * first.hr.len());
    let mut masks = Vec::with_capacity(samples.len());
    for s in samples {
        if s.height != h || s.width != w {
            return Err(Error::Shape(format!(
                "batch mixes {h}x{w} and {}x{} samples",
                s.height, s.width
            )));
        }
        x.extend_from_slice(&s.lr);
        y.extend_from_slice(&s.hr);
        masks.push(s.mask.clone());
    }
    Ok((x, y, masks))
}

/// Model-free prediction `(X₀, ½(X₀+X₁), X₁)`.
pub fn baseline_st_interp(s: &SamplePair) -> Vec<f32> {
    let mut y = st_interp(&s.lr, 1, s.frame_len());
    zero_land(&mut y, &s.mask);
    y
}

pub fn zero_land(y: &mut [f32], mask: &[bool]) {
    let hw = mask.len();
    for (i, v) in y.iter_mut().enumerate() {
        if !mask[i % hw] {
            *v = 0.0;
        }
    }
}

/// Full-frame predictions `[3, C, h, w]` per sample, land zeroed.
pub fn predict(model: &Model<f32>, samples: &[SamplePair], batch: usize) -> Result<Vec<Vec<f32>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch.max(1)) {
        let refs: Vec<&SamplePair> = chunk.iter().collect();
        let (x, _, _) = stack(&refs)?;
        let (h, w) = (chunk[0].height, chunk[0].width);
        let (y, _) = model.forward(&x, chunk.len(), h, w)?;
        let n = 3 * CHANNELS * h * w;
        for (s, yp) in chunk.iter().zip(y.chunks(n)) {
            let mut yp = yp.to_vec();
            zero_land(&mut yp, &s.mask);
            out.push(yp);
        }
    }
    Ok(out)
}

/// Metric report of `predictions` (one per sample) against the fine frames.
pub fn score(samples: &[SamplePair], predictions: &[Vec<f32>]) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    for (s, yp) in samples.iter().zip(predictions) {
        let (scores, rows) = score_sample(&s.id, &s.hr, yp, &s.mask, (CHANNELS, s.height, s.width))?;
        report.push(scores, rows);
    }
    Ok(report)
}

/// Scores the model (or, with `None`, the interpolation baseline).
pub fn evaluate(model: Option<&Model<f32>>, samples: &[SamplePair]) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::Input("no samples to evaluate".into()));
    }
    let preds = match model {
        Some(m) => predict(m, samples, 4)?,
        None => samples.iter().map(baseline_st_interp).collect(),
    };
    score(samples, &preds)
}
