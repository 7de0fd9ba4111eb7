use ndarray::Array2;
use rand::Rng;

use super::config::DurationNetConfig;

/// Weights of one encoder block. Biases and gains are stored as `1 x n` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    /// Log of the Gaussian-bias width, one per head (`1 x heads`).
    pub log_sigma: Array2<f64>,
    pub ln1_gain: Array2<f64>,
    pub ln1_bias: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
    pub ln2_gain: Array2<f64>,
    pub ln2_bias: Array2<f64>,
}

/// Affine standardization of the speed scalar before projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedNorm {
    pub mean: f64,
    pub scale: f64,
}

impl Default for SpeedNorm {
    fn default() -> Self {
        Self {
            mean: 0.0,
            scale: 1.0,
        }
    }
}

impl SpeedNorm {
    pub fn apply(&self, speed: f64) -> f64 {
        (speed - self.mean) / self.scale
    }
}

/// All parameters of the duration network.
///
/// The same structure doubles as the gradient container; `speed_norm` is
/// fixed statistics and never receives a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationNetParams {
    pub phone_embeddings: Array2<f64>,
    pub speed_projection: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub output_weight: Array2<f64>,
    pub output_bias: Array2<f64>,
    pub speed_norm: SpeedNorm,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

impl DurationNetParams {
    /// Glorot-uniform weights, zero biases, unit layer-norm gains.
    ///
    /// Head `h` starts with a Gaussian width of `2^h` positions.
    pub fn init<R: Rng + ?Sized>(cfg: &DurationNetConfig, num_phones: usize, rng: &mut R) -> Self {
        let d = cfg.embed_dim;
        let f = cfg.ffn_dim;
        let phone_embeddings = glorot(num_phones, d, rng);
        let speed_projection = glorot(1, d, rng);
        let blocks = (0..cfg.num_blocks)
            .map(|_| BlockParams {
                wq: glorot(d, d, rng),
                wk: glorot(d, d, rng),
                wv: glorot(d, d, rng),
                wo: glorot(d, d, rng),
                log_sigma: Array2::from_shape_fn((1, cfg.num_heads), |(_, h)| {
                    h as f64 * std::f64::consts::LN_2
                }),
                ln1_gain: Array2::ones((1, d)),
                ln1_bias: Array2::zeros((1, d)),
                w1: glorot(d, f, rng),
                b1: Array2::zeros((1, f)),
                w2: glorot(f, d, rng),
                b2: Array2::zeros((1, d)),
                ln2_gain: Array2::ones((1, d)),
                ln2_bias: Array2::zeros((1, d)),
            })
            .collect();
        Self {
            phone_embeddings,
            speed_projection,
            blocks,
            output_weight: glorot(d, 1, rng),
            output_bias: Array2::zeros((1, 1)),
            speed_norm: SpeedNorm::default(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn num_phones(&self) -> usize {
        self.phone_embeddings.nrows()
    }

    /// Named trainable tensors in declaration order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("phone_embeddings".to_string(), &self.phone_embeddings),
            ("speed_projection".to_string(), &self.speed_projection),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            let fields = [
                ("wq", &b.wq),
                ("wk", &b.wk),
                ("wv", &b.wv),
                ("wo", &b.wo),
                ("log_sigma", &b.log_sigma),
                ("ln1_gain", &b.ln1_gain),
                ("ln1_bias", &b.ln1_bias),
                ("w1", &b.w1),
                ("b1", &b.b1),
                ("w2", &b.w2),
                ("b2", &b.b2),
                ("ln2_gain", &b.ln2_gain),
                ("ln2_bias", &b.ln2_bias),
            ];
            out.extend(fields.map(|(n, t)| (format!("block{i}.{n}"), t)));
        }
        out.push(("output_weight".to_string(), &self.output_weight));
        out.push(("output_bias".to_string(), &self.output_bias));
        out
    }

    /// Mutable trainable tensors, same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.phone_embeddings, &mut self.speed_projection];
        for b in &mut self.blocks {
            out.extend([
                &mut b.wq,
                &mut b.wk,
                &mut b.wv,
                &mut b.wo,
                &mut b.log_sigma,
                &mut b.ln1_gain,
                &mut b.ln1_bias,
                &mut b.w1,
                &mut b.b1,
                &mut b.w2,
                &mut b.b2,
                &mut b.ln2_gain,
                &mut b.ln2_bias,
            ]);
        }
        out.push(&mut self.output_weight);
        out.push(&mut self.output_bias);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(scale, src);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_config() {
        let cfg = DurationNetConfig::tiny();
        let p = DurationNetParams::init(&cfg, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(p.phone_embeddings.dim(), (5, 8));
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.blocks[0].w1.dim(), (8, 16));
        assert_eq!(p.blocks[1].log_sigma.dim(), (1, 2));
        assert_eq!(p.tensors().len(), 2 + 2 * 13 + 2);
        assert!(p.is_finite());
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(p.blocks[0].wq.iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn add_scaled_and_zeros() {
        let cfg = DurationNetConfig::tiny();
        let p = DurationNetParams::init(&cfg, 3, &mut ChaCha8Rng::seed_from_u64(2));
        let mut q = p.zeros_like();
        assert!(q.tensors().iter().all(|(_, t)| t.iter().all(|&v| v == 0.0)));
        q.add_scaled(&p, 2.0);
        assert_eq!(q.output_weight, &p.output_weight * 2.0);
    }
}
