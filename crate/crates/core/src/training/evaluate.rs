use serde::{Deserialize, Serialize};

use crate::autodiff::sigmoid;
use crate::data::{Dataset, Labels};
use crate::error::{Error, Result};
use crate::losses::{argmax, mean_average_precision};
use crate::models::TargetNetwork;
use crate::tensor::Tensor;

const EVAL_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Fraction of samples whose argmax primary logit (first index on ties) is the label.
    Top1,
    /// Mean average precision of sigmoid scores against multi-hot labels.
    MeanAp,
}

impl MetricKind {
    pub fn for_dataset(data: &Dataset) -> Self {
        if data.is_multi_label() {
            MetricKind::MeanAp
        } else {
            MetricKind::Top1
        }
    }
}

fn primary_scores(net: &TargetNetwork, data: &Dataset) -> Result<Tensor> {
    let k = net.spec().num_classes;
    let mut scores = Vec::with_capacity(data.len() * k);
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        scores.extend_from_slice(net.predict(&data.batch_inputs(chunk))?.data());
    }
    Tensor::new(vec![data.len(), k], scores)
}

/// Top-1 accuracy or mAP of the primary head on `data`.
pub fn evaluate(net: &TargetNetwork, data: &Dataset, metric: MetricKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    if data.num_classes() != net.spec().num_classes {
        return Err(Error::shape(
            "evaluate",
            format!(
                "{} labels vs {} primary outputs",
                data.num_classes(),
                net.spec().num_classes
            ),
        ));
    }
    let logits = primary_scores(net, data)?;
    match (metric, data.labels()) {
        (MetricKind::Top1, Labels::Class(labels)) => {
            let k = net.spec().num_classes;
            let correct = logits
                .data()
                .chunks(k)
                .zip(labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            Ok(correct as f64 / data.len() as f64)
        }
        (MetricKind::MeanAp, Labels::MultiHot(_)) => {
            let scores = logits.map(sigmoid);
            let targets = data.batch_targets(&(0..data.len()).collect::<Vec<_>>());
            Ok(mean_average_precision(&scores, &targets)?.map)
        }
        (m, _) => Err(Error::invalid(format!(
            "metric {m:?} does not fit the dataset's labels"
        ))),
    }
}
