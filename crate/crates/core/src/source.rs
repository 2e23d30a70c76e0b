//! Frozen source tasks and the input transforms that adapt target data to them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::softmax_rows;
use crate::error::{Error, Result};
use crate::models::{load_checkpoint, TargetNetwork};
use crate::tensor::Tensor;

/// Maps a target-domain batch to the input a source network expects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// Bilinear resize with corner-aligned sampling.
    Resize { height: usize, width: usize },
    /// `[B,C,D,H,W] -> [B,C,H,W]` at depth `floor(D / 2)`.
    CenterFrame,
    /// Applied left to right.
    Compose(Vec<Transform>),
}

impl Transform {
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Transform::Identity => Ok(x.clone()),
            Transform::Resize { height, width } => resize(x, *height, *width),
            Transform::CenterFrame => center_frame(x),
            Transform::Compose(steps) => steps.iter().try_fold(x.clone(), |acc, t| t.apply(&acc)),
        }
    }

    pub fn contains_center_frame(&self) -> bool {
        match self {
            Transform::CenterFrame => true,
            Transform::Compose(steps) => steps.iter().any(Transform::contains_center_frame),
            _ => false,
        }
    }
}

/// The frame at depth `floor(D / 2)` of a `[B,C,D,H,W]` clip batch.
pub fn center_frame(x: &Tensor) -> Result<Tensor> {
    let &[b, c, d, h, w] = x.shape() else {
        return Err(Error::shape(
            "center_frame",
            format!("expected rank 5, got {:?}", x.shape()),
        ));
    };
    let mid = d / 2;
    let plane = h * w;
    let mut out = Vec::with_capacity(b * c * plane);
    for bc in 0..b * c {
        let start = (bc * d + mid) * plane;
        out.extend_from_slice(&x.data()[start..start + plane]);
    }
    Tensor::new(vec![b, c, h, w], out)
}

/// Corner-aligned bilinear sample positions: output `i` reads input `i * (n-1) / (m-1)`.
fn sample_axis(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    (0..output)
        .map(|i| {
            if output == 1 || input == 1 {
                return (0, 0, 0.0);
            }
            let pos = (i * (input - 1)) as f64 / (output - 1) as f64;
            let lo = (pos.floor() as usize).min(input - 1);
            let hi = (lo + 1).min(input - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a * (1.0 - t) + b * t
    }
}

/// Bilinear resize of `[B,C,H,W]` to `[B,C,height,width]`.
pub fn resize(x: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let &[b, c, h, w] = x.shape() else {
        return Err(Error::shape(
            "resize",
            format!("expected rank 4, got {:?}", x.shape()),
        ));
    };
    if height == 0 || width == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    if (height, width) == (h, w) {
        return Ok(x.clone());
    }
    let ys = sample_axis(h, height);
    let xs = sample_axis(w, width);
    let mut out = Vec::with_capacity(b * c * height * width);
    for p in x.data().chunks(h * w) {
        for &(y0, y1, ty) in &ys {
            for &(x0, x1, tx) in &xs {
                let top = lerp(p[y0 * w + x0], p[y0 * w + x1], tx);
                let bottom = lerp(p[y1 * w + x0], p[y1 * w + x1], tx);
                out.push(lerp(top, bottom, ty));
            }
        }
    }
    Tensor::new(vec![b, c, height, width], out)
}

/// Output of a source network on one batch. Plain data, never on a tape.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceOutput {
    pub logits: Tensor,
    /// `softmax(logits)` at temperature 1.
    pub soft_label: Tensor,
}

/// A pretrained network whose parameters never change after load.
///
/// The network is held by value and only exposed through `&self`, and its
/// parameter checksum is recorded at construction so callers can verify the
/// freeze at any time.
#[derive(Debug, Clone)]
pub struct SourceTask {
    name: String,
    network: TargetNetwork,
    transform: Transform,
    checksum: String,
}

impl SourceTask {
    pub fn new(name: impl Into<String>, network: TargetNetwork, transform: Transform) -> Self {
        let checksum = network.params().checksum();
        Self {
            name: name.into(),
            network,
            transform,
            checksum,
        }
    }

    /// Loads a checkpoint directory written by [`crate::models::save_checkpoint`].
    pub fn load(dir: &Path, transform: Transform) -> Result<Self> {
        let network = load_checkpoint(dir)?;
        Ok(Self::new(dir.display().to_string(), network, transform))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn network(&self) -> &TargetNetwork {
        &self.network
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn num_classes(&self) -> usize {
        self.network.spec().num_classes
    }

    /// Checksum recorded at load time.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// True when the current parameters still hash to the load-time checksum.
    pub fn is_unchanged(&self) -> bool {
        self.network.params().checksum() == self.checksum
    }

    /// Transforms `x` and runs the frozen network on it.
    pub fn infer(&self, x: &Tensor) -> Result<SourceOutput> {
        let input = self.transform.apply(x)?;
        let logits = self.network.predict(&input)?;
        let soft_label = softmax_rows(&logits, 1.0)?;
        Ok(SourceOutput { logits, soft_label })
    }
}

/// Free-function form of [`SourceTask::infer`].
pub fn source_infer(source: &SourceTask, x: &Tensor) -> Result<SourceOutput> {
    source.infer(x)
}
