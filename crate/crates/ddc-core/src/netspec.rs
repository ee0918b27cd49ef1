//! TOML network descriptions: an ordered list of layer shapes plus
//! optional default hardware features, with chaining validation so a
//! simulated forward pass is geometrically well-formed end to end.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::FeatureConfig;
use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec};

fn default_one() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_shift() -> u32 {
    7
}

/// One layer entry. `fcc` marks the layer as pair-eligible (the feature
/// configuration decides whether it is actually exercised); `shift` is the
/// arithmetic right shift requantizing 32-bit outputs back to 8 bits
/// between layers.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct NetLayer {
    pub id: String,
    pub kind: LayerKind,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub n: usize,
    #[serde(default = "default_one")]
    pub k: usize,
    #[serde(default = "default_one")]
    pub stride: usize,
    #[serde(default)]
    pub pad: usize,
    #[serde(default = "default_true")]
    pub fcc: bool,
    #[serde(default = "default_shift")]
    pub shift: u32,
}

impl NetLayer {
    pub fn to_spec(&self) -> LayerSpec {
        LayerSpec {
            id: self.id.clone(),
            kind: self.kind,
            h: self.h,
            w: self.w,
            c: self.c,
            n: self.n,
            k: self.k,
            stride: self.stride,
            pad: self.pad,
            fcc_enabled: self.fcc,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    /// Default feature set when the caller does not pick one explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
    pub layers: Vec<NetLayer>,
}

impl NetworkSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Netspec(format!("TOML parse error: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Netspec(format!("TOML encode error: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Netspec(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    /// Check every layer in isolation and the input/output chaining between
    /// consecutive layers.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Netspec("network name is empty".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Netspec(format!(
                "network {} has no layers",
                self.name
            )));
        }
        if let Some(features) = &self.features {
            features.validate()?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for layer in &self.layers {
            if !seen.insert(&layer.id) {
                return Err(Error::Netspec(format!("duplicate layer id {:?}", layer.id)));
            }
            layer.to_spec().validate()?;
        }
        for pair in self.layers.windows(2) {
            let prev = pair[0].to_spec();
            let next = &pair[1];
            let out = (prev.n, prev.out_h(), prev.out_w());
            let want = (next.c, next.h, next.w);
            if out != want {
                return Err(Error::Netspec(format!(
                    "layer {:?} outputs {:?} but layer {:?} expects {:?}",
                    pair[0].id, out, next.id, want
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "mini"

[[layers]]
id = "conv"
kind = "std"
h = 8
w = 8
c = 3
n = 4
k = 3
pad = 1

[[layers]]
id = "pw"
kind = "pw"
h = 8
w = 8
c = 4
n = 6
fcc = true
shift = 6
"#;

    #[test]
    fn defaults_fill_optional_fields() {
        let net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        assert_eq!(net.layers.len(), 2);
        let conv = &net.layers[0];
        assert_eq!(conv.stride, 1);
        assert!(conv.fcc);
        assert_eq!(conv.shift, 7);
        let pw = &net.layers[1];
        assert_eq!(pw.k, 1);
        assert_eq!(pw.pad, 0);
        assert_eq!(pw.shift, 6);
        net.validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_preserves_everything() {
        let net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        let text = net.to_toml_string().unwrap();
        let back = NetworkSpec::from_toml_str(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn features_section_is_parsed_and_validated() {
        let text = format!("{MINIMAL}\n[features]\nfcc_std_pw = true\nfcc_dw_dbis = true\n");
        let with = format!(
            "name = \"x\"\n[features]\nreconfig_unit = true\n{}",
            &MINIMAL[MINIMAL.find("[[layers]]").unwrap()..]
        );
        let net = NetworkSpec::from_toml_str(&text).unwrap();
        assert_eq!(
            net.features.unwrap(),
            FeatureConfig {
                fcc_std_pw: true,
                fcc_dw_dbis: true,
                reconfig_unit: false
            }
        );
        let bad = NetworkSpec::from_toml_str(&with).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn chain_breaks_are_reported() {
        let mut net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        net.layers[1].c = 5;
        let err = net.validate().unwrap_err();
        assert!(err.to_string().contains("expects"));
        let mut net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        net.layers[1].h = 4;
        assert!(net.validate().is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        net.layers[1].id = "conv".into();
        assert!(net
            .validate()
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("pad = 1", "pad = 1\nbogus = 3");
        assert!(NetworkSpec::from_toml_str(&text).is_err());
    }

    #[test]
    fn odd_channel_count_with_pairing_is_rejected() {
        let mut net = NetworkSpec::from_toml_str(MINIMAL).unwrap();
        net.layers[1].n = 5;
        assert!(net.validate().is_err());
    }
}
