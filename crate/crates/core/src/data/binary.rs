//! Fixed-length records of `label_bytes` label bytes followed by `C*H*W`
//! unsigned pixel bytes in channel-major order, as used by the common
//! tiny-image binary distributions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Labels};
use crate::error::{Error, Result};

fn default_label_bytes() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryRecordSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    /// Label bytes at the start of each record.
    #[serde(default = "default_label_bytes")]
    pub label_bytes: usize,
    /// Which of the label bytes holds the class (0-based).
    #[serde(default)]
    pub label_index: usize,
}

impl BinaryRecordSpec {
    pub fn record_len(&self) -> usize {
        self.label_bytes + self.channels * self.height * self.width
    }
}

/// Reads a whole record file; pixels are scaled to `[0, 1]`.
pub fn read_binary_records(path: &Path, spec: &BinaryRecordSpec) -> Result<Dataset> {
    if spec.label_index >= spec.label_bytes {
        return Err(Error::config(
            "label_index",
            "must be smaller than label_bytes",
        ));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let rec = spec.record_len();
    if bytes.is_empty() || bytes.len() % rec != 0 {
        return Err(Error::invalid(format!(
            "{}: {} bytes is not a multiple of the {rec}-byte record",
            path.display(),
            bytes.len()
        )));
    }
    let mut labels = Vec::with_capacity(bytes.len() / rec);
    let mut inputs = Vec::with_capacity(bytes.len() / rec * (rec - spec.label_bytes));
    for r in bytes.chunks_exact(rec) {
        labels.push(r[spec.label_index] as usize);
        inputs.extend(r[spec.label_bytes..].iter().map(|&p| f64::from(p) / 255.0));
    }
    Dataset::new(
        vec![spec.channels, spec.height, spec.width],
        inputs,
        Labels::Class(labels),
        spec.num_classes,
    )
}
