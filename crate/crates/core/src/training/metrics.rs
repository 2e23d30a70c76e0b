use std::io::Write;

use serde::{Deserialize, Serialize};

use super::evaluate::MetricKind;
use crate::error::Result;

/// Averages over one epoch of training plus the end-of-epoch evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss_primary: f64,
    pub loss_aux: Vec<f64>,
    pub loss_total: f64,
    pub eval_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub metric: MetricKind,
    pub num_aux: usize,
    pub records: Vec<EpochRecord>,
}

impl RunMetrics {
    pub fn final_metric(&self) -> Option<f64> {
        self.records.last().map(|r| r.eval_metric)
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["epoch".to_string(), "lr".into(), "loss_primary".into()];
        h.extend((0..self.num_aux).map(|m| format!("loss_aux_{m}")));
        h.extend(["loss_total".to_string(), "eval_metric".into()]);
        h
    }

    /// One row per epoch: `epoch, lr, loss_primary, loss_aux_0.., loss_total, eval_metric`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for r in &self.records {
            let mut row = vec![
                r.epoch.to_string(),
                r.lr.to_string(),
                r.loss_primary.to_string(),
            ];
            row.extend(r.loss_aux.iter().map(f64::to_string));
            row.extend([r.loss_total.to_string(), r.eval_metric.to_string()]);
            w.write_record(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
