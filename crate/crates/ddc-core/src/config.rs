//! Hardware feature configuration: which complementary-storage mechanisms a
//! run enables, plus the named presets the tools accept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Independently toggleable mechanisms.
///
/// `reconfig_unit` (splitting the adder trees into two 16-input halves)
/// only pays off on top of byte-slot interleaving, so it requires
/// `fcc_dw_dbis`; `validate` rejects the other combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Complementary pair storage for standard and pointwise layers.
    #[serde(default)]
    pub fcc_std_pw: bool,
    /// Byte-slot interleaved scheduling for depthwise layers (pairs share a
    /// row, served over two staged passes).
    #[serde(default)]
    pub fcc_dw_dbis: bool,
    /// Split adder trees so two depthwise quads compute concurrently.
    #[serde(default)]
    pub reconfig_unit: bool,
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reconfig_unit && !self.fcc_dw_dbis {
            return Err(Error::Netspec("reconfig_unit requires fcc_dw_dbis".into()));
        }
        Ok(())
    }
}

/// Named feature bundles, ordered from nothing enabled to everything.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConfigPreset {
    Baseline,
    Fcc,
    FccDbis,
    Full,
}

impl ConfigPreset {
    pub const ALL: [ConfigPreset; 4] = [
        ConfigPreset::Baseline,
        ConfigPreset::Fcc,
        ConfigPreset::FccDbis,
        ConfigPreset::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConfigPreset::Baseline => "baseline",
            ConfigPreset::Fcc => "fcc",
            ConfigPreset::FccDbis => "fcc+dbis",
            ConfigPreset::Full => "full",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "baseline" => Ok(ConfigPreset::Baseline),
            "fcc" => Ok(ConfigPreset::Fcc),
            "fcc+dbis" | "fcc-dbis" => Ok(ConfigPreset::FccDbis),
            "full" => Ok(ConfigPreset::Full),
            other => Err(Error::Netspec(format!(
                "unknown config {other:?}; expected baseline, fcc, fcc+dbis, or full"
            ))),
        }
    }

    pub fn features(self) -> FeatureConfig {
        match self {
            ConfigPreset::Baseline => FeatureConfig::default(),
            ConfigPreset::Fcc => FeatureConfig {
                fcc_std_pw: true,
                ..FeatureConfig::default()
            },
            ConfigPreset::FccDbis => FeatureConfig {
                fcc_std_pw: true,
                fcc_dw_dbis: true,
                reconfig_unit: false,
            },
            ConfigPreset::Full => FeatureConfig {
                fcc_std_pw: true,
                fcc_dw_dbis: true,
                reconfig_unit: true,
            },
        }
    }
}

impl std::fmt::Display for ConfigPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_roundtrip() {
        for preset in ConfigPreset::ALL {
            assert_eq!(ConfigPreset::from_name(preset.name()).unwrap(), preset);
        }
        assert!(ConfigPreset::from_name("turbo").is_err());
    }

    #[test]
    fn every_preset_is_internally_consistent() {
        for preset in ConfigPreset::ALL {
            preset.features().validate().unwrap();
        }
    }

    #[test]
    fn reconfig_without_dbis_is_rejected() {
        let bad = FeatureConfig {
            fcc_std_pw: true,
            fcc_dw_dbis: false,
            reconfig_unit: true,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn presets_enable_monotonically_more() {
        let count = |f: FeatureConfig| {
            usize::from(f.fcc_std_pw) + usize::from(f.fcc_dw_dbis) + usize::from(f.reconfig_unit)
        };
        let counts: Vec<usize> = ConfigPreset::ALL
            .iter()
            .map(|p| count(p.features()))
            .collect();
        assert_eq!(counts, vec![0, 1, 2, 3]);
    }
}
