use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Spatial branch is a ConvNeXt-v2 style convolution body.
    ConvFormer,
    /// Spatial branch is global multi-head self-attention.
    TransFormer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Channel width at level 1; level `l` has `C·2^(l−1)`.
    pub base_width: usize,
    /// Blocks per level, levels 1 to 5. Decoder levels mirror the encoder.
    pub level_depths: [usize; LEVELS],
    pub level_kinds: [BlockKind; LEVELS],
    /// Attention heads per level (G-MSA and CIM).
    pub heads: [usize; LEVELS],
    /// Decoder levels (1-based) that carry context interaction modules.
    pub cim_levels: Vec<usize>,
    pub cim_blocks_per_level: usize,
    /// Width `D` of the context embedding.
    pub context_dim: usize,
    /// Maximum prompt length `K`.
    pub context_tokens: usize,
    pub ffn_expansion: usize,
    pub conv_block_expansion: usize,
    pub ca_reduction: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        use BlockKind::*;
        Self {
            base_width: 32,
            level_depths: [4, 6, 6, 8, 8],
            level_kinds: [ConvFormer, ConvFormer, ConvFormer, TransFormer, TransFormer],
            heads: [1, 2, 4, 8, 8],
            cim_levels: vec![5, 4, 3],
            cim_blocks_per_level: 2,
            context_dim: 64,
            context_tokens: 16,
            ffn_expansion: 2,
            conv_block_expansion: 4,
            ca_reduction: 4,
        }
    }
}

impl ModelConfig {
    /// C = 8 with one block per level.
    pub fn tiny() -> Self {
        Self {
            base_width: 8,
            level_depths: [1; LEVELS],
            ..Self::default()
        }
    }

    /// Channels at 1-based `level`.
    pub fn width(&self, level: usize) -> usize {
        self.base_width << (level - 1)
    }

    pub fn has_cim(&self, level: usize) -> bool {
        self.cim_levels.contains(&level)
    }

    pub fn total_cims(&self) -> usize {
        self.cim_levels.len() * self.cim_blocks_per_level
    }

    /// Input height and width must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        1 << (LEVELS - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(config_err!("base_width must be positive"));
        }
        if self.level_depths.iter().any(|&d| d == 0) {
            return Err(config_err!("every level needs at least one block: {:?}", self.level_depths));
        }
        if self.context_dim == 0 || self.context_tokens == 0 {
            return Err(config_err!("context_dim and context_tokens must be positive"));
        }
        if self.ffn_expansion == 0 || self.conv_block_expansion == 0 || self.ca_reduction == 0 {
            return Err(config_err!("expansion and reduction factors must be positive"));
        }
        let mut seen = Vec::new();
        for &l in &self.cim_levels {
            if !(1..=LEVELS).contains(&l) || seen.contains(&l) {
                return Err(config_err!("invalid or repeated CIM level {l}"));
            }
            seen.push(l);
        }
        if !self.cim_levels.is_empty() && self.cim_blocks_per_level == 0 {
            return Err(config_err!("cim_blocks_per_level must be positive when CIM levels are set"));
        }
        for level in 1..=LEVELS {
            let heads = self.heads[level - 1];
            let uses_attention = self.level_kinds[level - 1] == BlockKind::TransFormer || self.has_cim(level);
            if uses_attention && (heads == 0 || self.width(level) % heads != 0) {
                return Err(config_err!(
                    "level {level}: width {} is not divisible by {heads} heads",
                    self.width(level)
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.total_cims(), 6);
        assert_eq!(c.level_depths, [4, 6, 6, 8, 8]);
        ModelConfig::tiny().validate().unwrap();
        assert_eq!(ModelConfig::tiny().width(5), 128);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ModelConfig::tiny();
        c.level_depths[2] = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny();
        c.heads[3] = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::tiny();
        c.cim_levels = vec![6];
        assert!(c.validate().is_err());
    }
}
