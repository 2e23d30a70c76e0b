//! In-memory datasets, the seeded synthetic task-pair generator, and a reader
//! for fixed-length binary image records.

mod binary;
mod synthetic;

pub use binary::{read_binary_records, BinaryRecordSpec};
pub use synthetic::{generate, SyntheticTaskPair, TaskPairData, MULTI_LABEL_THRESHOLD};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Ground truth for every sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// One class index per sample.
    Class(Vec<usize>),
    /// Row-major `[N, K]` multi-hot matrix of 0.0/1.0.
    MultiHot(Vec<f64>),
}

/// Samples of a fixed shape with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sample_shape: Vec<usize>,
    inputs: Vec<f64>,
    labels: Labels,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        sample_shape: Vec<usize>,
        inputs: Vec<f64>,
        labels: Labels,
        num_classes: usize,
    ) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if per == 0 || !inputs.len().is_multiple_of(per) {
            return Err(Error::shape(
                "dataset",
                format!("{} values for samples of {sample_shape:?}", inputs.len()),
            ));
        }
        let n = inputs.len() / per;
        match &labels {
            Labels::Class(l) => {
                if l.len() != n || l.iter().any(|&c| c >= num_classes) {
                    return Err(Error::invalid(
                        "class labels do not match samples or class count",
                    ));
                }
            }
            Labels::MultiHot(m) => {
                if m.len() != n * num_classes || m.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::invalid(
                        "multi-hot labels do not match samples or class count",
                    ));
                }
            }
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset inputs".into()));
        }
        Ok(Self {
            sample_shape,
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.sample_size()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    fn sample_size(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn is_multi_label(&self) -> bool {
        matches!(self.labels, Labels::MultiHot(_))
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    /// `[B, ...sample_shape]` batch of the given sample indices.
    pub fn batch_inputs(&self, indices: &[usize]) -> Tensor {
        let per = self.sample_size();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&self.inputs[i * per..(i + 1) * per]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(&self.sample_shape);
        Tensor::from_parts(shape, data)
    }

    /// `[B, K]` one-hot (class labels) or multi-hot targets.
    pub fn batch_targets(&self, indices: &[usize]) -> Tensor {
        let k = self.num_classes;
        let mut data = vec![0.0; indices.len() * k];
        for (row, &i) in data.chunks_mut(k).zip(indices) {
            match &self.labels {
                Labels::Class(l) => row[l[i]] = 1.0,
                Labels::MultiHot(m) => row.copy_from_slice(&m[i * k..(i + 1) * k]),
            }
        }
        Tensor::from_parts(vec![indices.len(), k], data)
    }

    /// Per-class count of samples (positives for multi-hot labels).
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        match &self.labels {
            Labels::Class(l) => l.iter().for_each(|&c| counts[c] += 1),
            Labels::MultiHot(m) => {
                for row in m.chunks(self.num_classes) {
                    for (c, &v) in counts.iter_mut().zip(row) {
                        *c += (v == 1.0) as usize;
                    }
                }
            }
        }
        counts
    }

    /// Samples `[start, end)` as a new dataset.
    pub fn subset(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "subset {start}..{end} of {}",
                self.len()
            )));
        }
        let per = self.sample_size();
        let labels = match &self.labels {
            Labels::Class(l) => Labels::Class(l[start..end].to_vec()),
            Labels::MultiHot(m) => {
                Labels::MultiHot(m[start * self.num_classes..end * self.num_classes].to_vec())
            }
        };
        Self::new(
            self.sample_shape.clone(),
            self.inputs[start * per..end * per].to_vec(),
            labels,
            self.num_classes,
        )
    }
}
