use crate::error::{Error, Result};

/// Hyperparameters of the duration network and its training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationNetConfig {
    pub embed_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub dropout_rate: f64,
    pub max_seq_len: usize,
    /// Multiplier of the Noam schedule.
    pub lr_scale: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl DurationNetConfig {
    /// Full-size configuration: 256-d embeddings, six 4-head blocks with
    /// 1024-d feed-forward layers.
    pub fn full() -> Self {
        Self {
            embed_dim: 256,
            num_blocks: 6,
            num_heads: 4,
            ffn_dim: 1024,
            dropout_rate: 0.1,
            max_seq_len: 100,
            lr_scale: 0.001,
            warmup_steps: 25_000,
            batch_size: 64,
            epochs: 100,
            seed: 0,
        }
    }

    /// Scaled-down configuration that trains in seconds on a CPU.
    pub fn desk() -> Self {
        Self {
            embed_dim: 64,
            num_blocks: 2,
            num_heads: 4,
            ffn_dim: 256,
            dropout_rate: 0.1,
            max_seq_len: 100,
            lr_scale: 0.5,
            warmup_steps: 400,
            batch_size: 16,
            epochs: 40,
            seed: 0,
        }
    }

    /// Smallest useful network, for gradient checks.
    pub fn tiny() -> Self {
        Self {
            embed_dim: 8,
            num_blocks: 2,
            num_heads: 2,
            ffn_dim: 16,
            dropout_rate: 0.1,
            max_seq_len: 16,
            lr_scale: 0.5,
            warmup_steps: 50,
            batch_size: 4,
            epochs: 1,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("num_blocks", self.num_blocks),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
            ("max_seq_len", self.max_seq_len),
            ("warmup_steps", self.warmup_steps),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in dims {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout {}", self.dropout_rate)));
        }
        if !(self.lr_scale.is_finite() && self.lr_scale > 0.0) {
            return Err(Error::Config(format!("lr_scale {}", self.lr_scale)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for cfg in [
            DurationNetConfig::full(),
            DurationNetConfig::desk(),
            DurationNetConfig::tiny(),
        ] {
            cfg.validate().unwrap();
        }
        assert_eq!(DurationNetConfig::full().head_dim(), 64);
    }

    #[test]
    fn rejects_bad_heads_and_dropout() {
        let mut cfg = DurationNetConfig::tiny();
        cfg.num_heads = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = DurationNetConfig::tiny();
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
    }
}
