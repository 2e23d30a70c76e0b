use super::ExperimentConfig;
use crate::error::{Error, Result};

pub(crate) const IC_TO_IC: &str = include_str!("../../presets/ic_to_ic.toml");
pub(crate) const IC_TO_MCIC: &str = include_str!("../../presets/ic_to_mcic.toml");
pub(crate) const IC_TO_AC: &str = include_str!("../../presets/ic_to_ac.toml");
pub(crate) const MULTI_SOURCE: &str = include_str!("../../presets/multi_source.toml");

pub const PRESET_NAMES: [&str; 4] = ["ic_to_ic", "ic_to_mcic", "ic_to_ac", "multi_source"];

/// One of the built-in scenario configs, by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = match name {
        "ic_to_ic" => IC_TO_IC,
        "ic_to_mcic" => IC_TO_MCIC,
        "ic_to_ac" => IC_TO_AC,
        "multi_source" => MULTI_SOURCE,
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; expected one of {PRESET_NAMES:?}"),
            ))
        }
    };
    ExperimentConfig::from_toml_str(text)
}
