use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::SamplePair;
use crate::error::{Error, Result};
use crate::metrics::Scores;
use crate::model::ModelConfig;

use super::{evaluate, train, AblationFlags, TrainConfig, TrainData};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationCell {
    /// Column name; defaults to the flag label.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub flags: AblationFlags,
}

impl AblationCell {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.flags.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationMatrix {
    pub cells: Vec<AblationCell>,
}

impl AblationMatrix {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let m: AblationMatrix = serde_json::from_slice(bytes).map_err(|e| Error::Config(format!("ablation matrix: {e}")))?;
        if m.cells.is_empty() {
            return Err(Error::Config("ablation matrix has no cells".into()));
        }
        let mut labels: Vec<String> = m.cells.iter().map(|c| c.label()).collect();
        for c in &m.cells {
            c.flags.axes()?;
        }
        labels.sort();
        labels.dedup();
        if labels.len() != m.cells.len() {
            return Err(Error::Config("ablation cells must have distinct names".into()));
        }
        Ok(m)
    }
}

/// Test-split scores of one column.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub column: String,
    pub all: Scores,
    pub intra: Scores,
    pub inter: Scores,
    /// Mean training loss terms over the last 10 % of iterations.
    pub final_loss: Option<[f64; 4]>,
    /// Wall-clock training time of the cell.
    pub train_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationReport {
    pub baseline: AblationRow,
    pub cells: Vec<AblationRow>,
}

impl AblationReport {
    fn columns(&self) -> impl Iterator<Item = &AblationRow> {
        std::iter::once(&self.baseline).chain(&self.cells)
    }

    /// Rows are metrics, columns are the interpolation baseline followed by
    /// each requested cell.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("metric");
        for c in self.columns() {
            let _ = write!(s, ",{}", c.column);
        }
        s.push('\n');
        let metrics: [(&str, fn(&Scores) -> f64); 4] = [
            ("rmse", |x| x.rmse),
            ("mae", |x| x.mae),
            ("ssim", |x| x.ssim),
            ("gmsd", |x| x.gmsd),
        ];
        for (name, get) in metrics {
            s.push_str(name);
            for c in self.columns() {
                let _ = write!(s, ",{:.8}", get(&c.all));
            }
            s.push('\n');
        }
        s
    }

    /// Intra- versus inter-frame scores per column, plus the final training
    /// loss terms.
    pub fn frames_csv(&self) -> String {
        let mut s = String::from("column,frames,rmse,mae,ssim,gmsd,loss_total,loss_mae,loss_lp,loss_diff\n");
        for c in self.columns() {
            for (tag, sc) in [("intra", &c.intra), ("inter", &c.inter)] {
                let _ = write!(s, "{},{tag},{:.8},{:.8},{:.8},{:.8}", c.column, sc.rmse, sc.mae, sc.ssim, sc.gmsd);
                match c.final_loss {
                    Some(l) => {
                        let _ = writeln!(s, ",{:.8e},{:.8e},{:.8e},{:.8e}", l[0], l[1], l[2], l[3]);
                    }
                    None => s.push_str(",,,,\n"),
                }
            }
        }
        s
    }

    pub fn cell(&self, column: &str) -> Option<&AblationRow> {
        self.cells.iter().find(|c| c.column == column)
    }
}

/// Trains every cell with the same seed and data and scores it on `test`.
///
/// With `out` set, each cell's run goes to `out/<column>/` and the reports
/// to `out/ablation_report.csv` and `out/ablation_frames.csv`.
pub fn run_ablation(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    data: &TrainData,
    test: &[SamplePair],
    matrix: &AblationMatrix,
    out: Option<&Path>,
) -> Result<AblationReport> {
    if matrix.cells.is_empty() {
        return Err(Error::Config("ablation matrix has no cells".into()));
    }
    let base = evaluate(None, test)?;
    let baseline = AblationRow {
        column: "baseline".into(),
        all: base.all,
        intra: base.intra,
        inter: base.inter,
        final_loss: None,
        train_seconds: 0.0,
    };
    let mut cells = Vec::with_capacity(matrix.cells.len());
    for cell in &matrix.cells {
        let column = cell.label();
        let mut cfg = TrainConfig {
            ablation: cell.flags.clone(),
            ..train_cfg.clone()
        };
        if cell.flags.all_off() {
            cfg.total_iters = 0;
            cfg.lr_halve_at = 0;
        }
        let dir = out.map(|o| o.join(sanitize(&column)));
        let started = Instant::now();
        let outcome = train(model_cfg, &cfg, data, dir.as_deref())?;
        let train_seconds = started.elapsed().as_secs_f64();
        let rep = evaluate(Some(&outcome.best_model), test)?;
        let tail = (outcome.log.len() / 10).max(1);
        let final_loss = (!outcome.log.is_empty()).then(|| {
            let rows = &outcome.log[outcome.log.len().saturating_sub(tail)..];
            let n = rows.len() as f64;
            [
                rows.iter().map(|r| r.total).sum::<f64>() / n,
                rows.iter().map(|r| r.mae).sum::<f64>() / n,
                rows.iter().map(|r| r.lp).sum::<f64>() / n,
                rows.iter().map(|r| r.diff).sum::<f64>() / n,
            ]
        });
        cells.push(AblationRow {
            column,
            all: rep.all,
            intra: rep.intra,
            inter: rep.inter,
            final_loss,
            train_seconds,
        });
    }
    let report = AblationReport { baseline, cells };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("ablation_report.csv");
        fs::write(&p, report.table_csv()).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("ablation_frames.csv");
        fs::write(&p, report.frames_csv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
