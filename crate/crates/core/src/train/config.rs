//! Training configuration and the named `toy` / `paper` profiles.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::degrade::DegradationKind;
use crate::error::{config_err, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Side of the square training crops; a multiple of 16.
    pub patch_size: usize,
    pub batch_size: usize,
    /// One epoch is `ceil(patches / batch_size)` steps.
    pub epochs: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub kinds: Vec<DegradationKind>,
    /// Severities are drawn uniformly from this closed range.
    pub severity_range: (f64, f64),
    /// Random flips and quarter turns.
    pub augment: bool,
    /// Probability that an item also carries a second, different kind from
    /// `kinds` which the target keeps; the prompt names only the removed
    /// kind. Zero trains on single degradations.
    pub compose_prob: f64,
    /// Write an intermediate checkpoint every this many steps.
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Tiny model, 64×64 crops, Gaussian noise at σ = 25/255.
    Toy,
    /// Full model, 224×224 crops, batch 36, 150 epochs, all kinds.
    Paper,
}

impl TrainConfig {
    pub fn profile(profile: Profile) -> Self {
        match profile {
            Profile::Toy => Self::toy(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn paper() -> Self {
        Self {
            model: ModelConfig::default(),
            patch_size: 224,
            batch_size: 36,
            epochs: 150,
            lr_max: 2e-4,
            lr_min: 1e-6,
            weight_decay: 1e-4,
            seed: 0,
            kinds: DegradationKind::degrading().to_vec(),
            severity_range: (0.1, 1.0),
            augment: true,
            compose_prob: 0.0,
            checkpoint_every: None,
        }
    }

    /// With 16 patches this is 4 steps per epoch, 500 steps in total.
    pub fn toy() -> Self {
        Self {
            model: ModelConfig::tiny(),
            patch_size: 64,
            batch_size: 4,
            epochs: 125,
            kinds: vec![DegradationKind::GaussianNoise],
            severity_range: (0.5, 0.5),
            ..Self::paper()
        }
    }

    /// Parses a JSON document. An optional `"profile"` key (`"toy"` or
    /// `"paper"`, default `"paper"`) supplies every field not given; nested
    /// `"model"` objects merge key by key. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| config_err!("invalid JSON: {e}"))?;
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| config_err!("config must be a JSON object"))?;
        let profile = match obj.remove("profile") {
            None => Profile::Paper,
            Some(v) => serde_json::from_value(v).map_err(|e| config_err!("profile: {e}"))?,
        };
        let mut base = serde_json::to_value(Self::profile(profile))?;
        merge(&mut base, doc);
        let cfg: Self = serde_path_to_error::deserialize(base).map_err(|e| config_err!("{}: {}", e.path(), e.inner()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.lr_min < self.lr_max) || self.lr_min < 0.0 {
            return Err(config_err!("lr_min ({}) must be below lr_max ({})", self.lr_min, self.lr_max));
        }
        if self.patch_size == 0 || self.patch_size % self.model.size_multiple() != 0 {
            return Err(config_err!(
                "patch_size {} must be a positive multiple of {}",
                self.patch_size,
                self.model.size_multiple()
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(config_err!("batch_size and epochs must be positive"));
        }
        if self.kinds.is_empty() {
            return Err(config_err!("kinds must not be empty"));
        }
        let (lo, hi) = self.severity_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(config_err!("severity_range must satisfy 0 < lo <= hi <= 1, got ({lo}, {hi})"));
        }
        if !(0.0..=1.0).contains(&self.compose_prob) {
            return Err(config_err!("compose_prob must lie in [0, 1], got {}", self.compose_prob));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(config_err!("weight_decay must be non-negative"));
        }
        if self.checkpoint_every == Some(0) {
            return Err(config_err!("checkpoint_every must be positive"));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, patches: usize) -> usize {
        patches.div_ceil(self.batch_size).max(1)
    }

    pub fn total_steps(&self, patches: usize) -> usize {
        self.epochs * self.steps_per_epoch(patches)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
