use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::params::ParamSet;
use super::spec::NetworkSpec;
use super::transfer::TransferModule;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Trunk, primary head, and auxiliary heads with all trainable parameters.
///
/// Parameter names:
/// `trunk.{i}.weight`, `primary.weight`, `primary.bias`,
/// `aux.{m}.tm.{i}.weight` (with a transfer module), `aux.{m}.weight`, `aux.{m}.bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetwork {
    spec: NetworkSpec,
    params: ParamSet,
}

/// Handles produced by one forward pass; all live on the same tape.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub primary_logits: Var,
    pub aux_logits: Vec<Var>,
    /// Output of each trunk block (after its ReLU).
    pub block_features: Vec<Var>,
    /// Globally pooled output of the last block.
    pub pooled: Var,
    /// One handle per parameter, in [`ParamSet`] order.
    pub param_vars: Vec<Var>,
}

fn stream_for(name: &str) -> u64 {
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// He-normal tensor drawn from a stream keyed by `(seed, name)`, so adding or
/// removing other parameters never changes this one.
fn he_normal(seed: u64, name: &str, shape: &[usize], fan_in: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_for(name));
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    let n = shape.iter().product();
    Tensor::from_parts(
        shape.to_vec(),
        (0..n).map(|_| normal.sample(&mut rng)).collect(),
    )
}

/// Builds a network with deterministic He fan-in initialization and zero biases.
pub fn build_target(spec: NetworkSpec, seed: u64) -> Result<TargetNetwork> {
    spec.validate()?;
    let shapes = spec.trunk.block_shapes()?;
    let mut params = ParamSet::new();
    let mut in_c = spec.trunk.input[0];
    for (i, b) in spec.trunk.blocks.iter().enumerate() {
        let name = format!("trunk.{i}.weight");
        let shape = [b.out_channels, in_c, b.kernel, b.kernel];
        params.push(
            name.clone(),
            he_normal(seed, &name, &shape, in_c * b.kernel * b.kernel),
        );
        in_c = b.out_channels;
    }
    let feat = spec.trunk.feature_width();
    params.push(
        "primary.weight",
        he_normal(seed, "primary.weight", &[feat, spec.num_classes], feat),
    );
    params.push("primary.bias", Tensor::zeros(&[spec.num_classes]));
    let tm_width = spec.tm_width();
    for (m, &k) in spec.source_classes.iter().enumerate() {
        let head_in = if spec.use_tm {
            for (i, s) in shapes.iter().enumerate() {
                let name = format!("aux.{m}.tm.{i}.weight");
                params.push(
                    name.clone(),
                    he_normal(seed, &name, &[tm_width, s[0], 1, 1], s[0]),
                );
            }
            tm_width
        } else {
            feat
        };
        let name = format!("aux.{m}.weight");
        params.push(name.clone(), he_normal(seed, &name, &[head_in, k], head_in));
        params.push(format!("aux.{m}.bias"), Tensor::zeros(&[k]));
    }
    Ok(TargetNetwork { spec, params })
}

impl TargetNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn num_aux_heads(&self) -> usize {
        self.spec.source_classes.len()
    }

    pub(crate) fn from_parts(spec: NetworkSpec, params: ParamSet) -> Result<Self> {
        let reference = build_target(spec.clone(), 0)?;
        if reference.params.names() != params.names()
            || reference
                .params
                .tensors()
                .iter()
                .zip(params.tensors())
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Checkpoint(
                "parameters do not match the network spec".into(),
            ));
        }
        Ok(Self { spec, params })
    }

    /// Checksum of the parameters shared with a plain primary-only network.
    pub fn primary_path_checksum(&self) -> String {
        self.params
            .checksum_where(|n| n.starts_with("trunk.") || n.starts_with("primary."))
    }

    fn input_batch(&self, x: &Tensor) -> Result<Tensor> {
        let [c, h, w] = self.spec.trunk.input;
        match *x.shape() {
            [_, xc, xh, xw] if (xc, xh, xw) == (c, h, w) => Ok(x.clone()),
            // clips fold depth into channels
            [b, xc, d, xh, xw] if xc * d == c && (xh, xw) == (h, w) => x.reshape(vec![b, c, h, w]),
            _ => Err(Error::shape(
                "forward",
                format!(
                    "input {:?} does not match trunk input {:?}",
                    x.shape(),
                    [c, h, w]
                ),
            )),
        }
    }

    /// Runs the trunk once and every head on top of it.
    ///
    /// With `trainable` the parameters are gradient-enabled leaves; otherwise
    /// they are constants and nothing on the tape can be differentiated.
    pub fn forward(&self, tape: &mut Tape, x: &Tensor, trainable: bool) -> Result<ForwardPass> {
        let input = self.input_batch(x)?;
        let param_vars: Vec<Var> = self
            .params
            .tensors()
            .iter()
            .map(|t| tape.leaf(t.clone(), trainable))
            .collect();
        let p = |name: &str| param_vars[self.params.index_of(name).expect("known parameter")];

        let mut h = tape.constant(input);
        let mut block_features = Vec::with_capacity(self.spec.trunk.blocks.len());
        for (i, b) in self.spec.trunk.blocks.iter().enumerate() {
            h = tape.conv2d(h, p(&format!("trunk.{i}.weight")), b.stride, b.pad)?;
            if b.relu {
                h = tape.relu(h)?;
            }
            block_features.push(h);
        }
        let pooled = tape.global_avgpool(h)?;
        let primary_logits = tape.linear(pooled, p("primary.weight"), p("primary.bias"))?;

        let mut aux_logits = Vec::with_capacity(self.num_aux_heads());
        for m in 0..self.num_aux_heads() {
            let feature = if self.spec.use_tm {
                let tm = TransferModule {
                    bottlenecks: (0..block_features.len())
                        .map(|i| p(&format!("aux.{m}.tm.{i}.weight")))
                        .collect(),
                };
                tm.forward(tape, &block_features)?
            } else {
                pooled
            };
            aux_logits.push(tape.linear(
                feature,
                p(&format!("aux.{m}.weight")),
                p(&format!("aux.{m}.bias")),
            )?);
        }
        Ok(ForwardPass {
            primary_logits,
            aux_logits,
            block_features,
            pooled,
            param_vars,
        })
    }

    /// Auxiliary logits only; an error for a network without auxiliary heads.
    pub fn forward_aux(&self, tape: &mut Tape, x: &Tensor, trainable: bool) -> Result<Vec<Var>> {
        if self.num_aux_heads() == 0 {
            return Err(Error::invalid("network has no auxiliary heads"));
        }
        Ok(self.forward(tape, x, trainable)?.aux_logits)
    }

    /// Primary logits as plain data, without building gradients.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let pass = self.forward(&mut tape, x, false)?;
        Ok(tape.value(pass.primary_logits).clone())
    }
}
