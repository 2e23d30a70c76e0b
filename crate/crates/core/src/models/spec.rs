use serde::{Deserialize, Serialize};

use crate::autodiff::conv_output_dim;
use crate::error::{Error, Result};

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One convolution (no bias) optionally followed by ReLU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub kernel: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub pad: usize,
    #[serde(default = "default_true")]
    pub relu: bool,
}

impl ConvBlockSpec {
    pub fn new(out_channels: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            out_channels,
            kernel,
            stride,
            pad,
            relu: true,
        }
    }
}

/// Input shape `(C, H, W)` and the stack of conv blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrunkSpec {
    pub input: [usize; 3],
    pub blocks: Vec<ConvBlockSpec>,
}

impl TrunkSpec {
    /// `(C, H, W)` after each block.
    pub fn block_shapes(&self) -> Result<Vec<[usize; 3]>> {
        if self.blocks.is_empty() {
            return Err(Error::config(
                "trunk.blocks",
                "at least one block is required",
            ));
        }
        if self.input.contains(&0) {
            return Err(Error::config("trunk.input", "dimensions must be positive"));
        }
        let [_, mut h, mut w] = self.input;
        let mut shapes = Vec::with_capacity(self.blocks.len());
        for (i, b) in self.blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel == 0 {
                return Err(Error::config(
                    format!("trunk.blocks[{i}]"),
                    "channels and kernel must be positive",
                ));
            }
            let oh = conv_output_dim(h, b.kernel, b.stride, b.pad)
                .map_err(|e| Error::config(format!("trunk.blocks[{i}]"), e.to_string()))?;
            let ow = conv_output_dim(w, b.kernel, b.stride, b.pad)
                .map_err(|e| Error::config(format!("trunk.blocks[{i}]"), e.to_string()))?;
            h = oh;
            w = ow;
            shapes.push([b.out_channels, h, w]);
        }
        Ok(shapes)
    }

    /// Width of the pooled final feature.
    pub fn feature_width(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.out_channels)
    }

    /// Same blocks on a different input shape.
    pub fn with_input(&self, input: [usize; 3]) -> Self {
        Self {
            input,
            blocks: self.blocks.clone(),
        }
    }
}

/// Everything needed to rebuild a [`TargetNetwork`](super::TargetNetwork) shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub trunk: TrunkSpec,
    pub num_classes: usize,
    /// Output width of each auxiliary head, in source order.
    #[serde(default)]
    pub source_classes: Vec<usize>,
    #[serde(default)]
    pub use_tm: bool,
    /// Common bottleneck width; defaults to the trunk feature width.
    #[serde(default)]
    pub tm_width: Option<usize>,
}

impl NetworkSpec {
    pub fn new(trunk: TrunkSpec, num_classes: usize) -> Self {
        Self {
            trunk,
            num_classes,
            source_classes: Vec::new(),
            use_tm: false,
            tm_width: None,
        }
    }

    pub fn with_sources(mut self, source_classes: Vec<usize>, use_tm: bool) -> Self {
        self.source_classes = source_classes;
        self.use_tm = use_tm;
        self
    }

    pub fn tm_width(&self) -> usize {
        self.tm_width.unwrap_or_else(|| self.trunk.feature_width())
    }

    pub fn validate(&self) -> Result<()> {
        self.trunk.block_shapes()?;
        if self.num_classes < 2 {
            return Err(Error::config(
                "num_classes",
                "at least 2 classes are required",
            ));
        }
        if let Some(i) = self.source_classes.iter().position(|&k| k < 2) {
            return Err(Error::config(
                format!("source_classes[{i}]"),
                "at least 2 classes are required",
            ));
        }
        if self.tm_width == Some(0) {
            return Err(Error::config("tm_width", "must be positive"));
        }
        Ok(())
    }
}
