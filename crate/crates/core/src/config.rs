//! Complete run configuration and JSON overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::datagen::GenSpec;
use crate::engine::{BootstrapRule, EpisodeConfig};
use crate::nn::AgentArch;
use crate::sac::SacConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub episodes: usize,
    pub eval_every: usize,
    pub moving_average_window: usize,
    /// Episodes between periodic checkpoints.
    pub checkpoint_every: usize,
    pub target_edge_factor: f64,
    pub bootstrap: BootstrapRule,
    /// Default mesh size as a fraction of the model's bounding-box diagonal.
    pub mesh_size_factor: f64,
    pub sac: SacConfig,
    pub arch: AgentArch,
    pub gen: GenSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            episodes: 2000,
            eval_every: 25,
            moving_average_window: 10,
            checkpoint_every: 100,
            target_edge_factor: 0.2,
            bootstrap: BootstrapRule::FirstChild,
            mesh_size_factor: 0.1,
            sac: SacConfig::default(),
            arch: AgentArch::default(),
            gen: GenSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.sac.validate()?;
        if self.eval_every == 0 || self.moving_average_window == 0 || self.checkpoint_every == 0 {
            return Err("eval_every, moving_average_window and checkpoint_every must be positive".into());
        }
        if !(self.target_edge_factor > 0.0) || !(self.mesh_size_factor > 0.0) {
            return Err("size factors must be positive".into());
        }
        let a = &self.arch;
        if a.mlp_widths.len() < 2 || a.mlp_widths[0] != crate::obs::OBS_DIM || a.mlp_widths.last() != Some(&2) {
            return Err("MLP widths must start at 9 and end at 2".into());
        }
        if a.value.kernel_size < 2 || a.value.input_width == 0 || a.value.block_widths.contains(&0) {
            return Err("invalid value-network architecture".into());
        }
        Ok(())
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            target_edge_factor: self.target_edge_factor,
            step_cap: self.sac.step_cap,
            bonus: self.sac.bonus,
            bootstrap: self.bootstrap,
            vertex_temperature: self.sac.vertex_temperature,
        }
    }

    /// Applies a partial JSON document on top of `self`; nested objects are
    /// merged key by key.
    pub fn with_overrides(&self, overrides: &Value) -> Result<Self, serde_json::Error> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overrides);
        serde_json::from_value(base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_is_stable() {
        let cfg = RunConfig::default();
        let text = cfg.to_json();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn nested_overrides() {
        let cfg = RunConfig::default()
            .with_overrides(&json!({"seed": 7, "sac": {"batch_size": 8}, "gen": {"train_count": 3}}))
            .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sac.batch_size, 8);
        assert_eq!(cfg.sac.gamma, 0.99);
        assert_eq!(cfg.gen.train_count, 3);
        assert_eq!(cfg.gen.test_count, 12);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::default().with_overrides(&json!({"sede": 1})).is_err());
    }

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
        let mut bad = RunConfig::default();
        bad.arch.mlp_widths = vec![8, 2];
        assert!(bad.validate().is_err());
    }
}
