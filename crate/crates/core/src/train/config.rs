//! Flat `key=value` training configuration.

use crate::decoder::{DecodeOptions, DEFAULT_BACKTRACK_BUDGET, DEFAULT_MAX_NODES};
use crate::error::{Error, Result};
use crate::model::ModelDims;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    /// Split evenly between the tree and graph halves.
    pub latent_dim: usize,
    pub message_iterations: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// KL weight reached at the end of annealing.
    pub kl_weight: f64,
    /// Fraction of all steps over which the KL weight ramps up from 0.
    pub kl_anneal_fraction: f64,
    /// Registered property name used by joint training.
    pub property: String,
    /// Weight of the property regression loss; 0 disables the head.
    pub property_weight: f64,
    pub max_nodes: usize,
    pub backtrack_budget: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 450,
            latent_dim: 56,
            message_iterations: 3,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            batch_size: 8,
            epochs: 10,
            kl_weight: 1.0,
            kl_anneal_fraction: 0.2,
            property: "desk".to_string(),
            property_weight: 0.0,
            max_nodes: DEFAULT_MAX_NODES,
            backtrack_budget: DEFAULT_BACKTRACK_BUDGET,
            seed: 0,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

impl TrainConfig {
    /// Reads `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("expected key=value, got `{line}`")).at_line(i + 1)
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| e.at_line(i + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "hidden_dim" => self.hidden_dim = value(key, v)?,
            "latent_dim" => self.latent_dim = value(key, v)?,
            "message_iterations" => self.message_iterations = value(key, v)?,
            "learning_rate" => self.learning_rate = value(key, v)?,
            "lr_decay" => self.lr_decay = value(key, v)?,
            "batch_size" => self.batch_size = value(key, v)?,
            "epochs" => self.epochs = value(key, v)?,
            "kl_weight" => self.kl_weight = value(key, v)?,
            "kl_anneal_fraction" => self.kl_anneal_fraction = value(key, v)?,
            "property" => self.property = v.to_string(),
            "property_weight" => self.property_weight = value(key, v)?,
            "max_nodes" => self.max_nodes = value(key, v)?,
            "backtrack_budget" => self.backtrack_budget = value(key, v)?,
            "seed" => self.seed = value(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Every field in a fixed order; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        format!(
            "hidden_dim={}\nlatent_dim={}\nmessage_iterations={}\nlearning_rate={}\nlr_decay={}\n\
             batch_size={}\nepochs={}\nkl_weight={}\nkl_anneal_fraction={}\nproperty={}\n\
             property_weight={}\nmax_nodes={}\nbacktrack_budget={}\nseed={}\n",
            self.hidden_dim,
            self.latent_dim,
            self.message_iterations,
            self.learning_rate,
            self.lr_decay,
            self.batch_size,
            self.epochs,
            self.kl_weight,
            self.kl_anneal_fraction,
            self.property,
            self.property_weight,
            self.max_nodes,
            self.backtrack_budget,
            self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("hidden_dim", self.hidden_dim),
            ("latent_dim", self.latent_dim),
            ("message_iterations", self.message_iterations),
            ("batch_size", self.batch_size),
            ("max_nodes", self.max_nodes),
        ];
        if let Some((k, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if !self.latent_dim.is_multiple_of(2) {
            return Err(Error::Config("`latent_dim` must be even".into()));
        }
        let reals = [
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
            ("kl_weight", self.kl_weight),
            ("property_weight", self.property_weight),
        ];
        if let Some((k, _)) = reals.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!(
                "`{k}` must be finite and non-negative"
            )));
        }
        if !(0.0..=1.0).contains(&self.kl_anneal_fraction) {
            return Err(Error::Config(
                "`kl_anneal_fraction` must lie in [0, 1]".into(),
            ));
        }
        if self.property.is_empty() || self.property.contains(char::is_whitespace) {
            return Err(Error::Config("`property` must be a single word".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            hidden: self.hidden_dim,
            latent_tree: self.latent_dim / 2,
            latent_graph: self.latent_dim / 2,
            depth: self.message_iterations,
        }
    }

    pub fn decode_options(&self) -> DecodeOptions {
        DecodeOptions {
            max_nodes: self.max_nodes,
            backtrack_budget: self.backtrack_budget,
            ..DecodeOptions::default()
        }
    }

    /// KL weight at 0-based `step` of `total`: linear from 0 over the first
    /// `kl_anneal_fraction` of steps, then constant.
    pub fn kl_weight_at(&self, step: usize, total: usize) -> f64 {
        let ramp = (self.kl_anneal_fraction * total as f64).ceil() as usize;
        if step >= ramp {
            self.kl_weight
        } else {
            self.kl_weight * step as f64 / ramp as f64
        }
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi(epoch as i32)
    }
}
