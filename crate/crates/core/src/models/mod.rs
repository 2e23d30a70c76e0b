//! Target network: shared convolutional trunk, primary head, and one
//! auxiliary head per source, optionally fed by a transfer module.

mod checkpoint;
mod network;
mod params;
mod spec;
mod transfer;

pub use checkpoint::{
    load_checkpoint, read_manifest, save_checkpoint, Manifest, TensorEntry, CHECKPOINT_BIN,
    CHECKPOINT_MANIFEST, FORMAT_NAME, FORMAT_VERSION,
};
pub use network::{build_target, ForwardPass, TargetNetwork};
pub use params::ParamSet;
pub use spec::{ConvBlockSpec, NetworkSpec, TrunkSpec};
pub use transfer::{tm_forward, TransferModule};
