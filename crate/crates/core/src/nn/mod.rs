//! Dense feed-forward networks with explicit backpropagation and Adam.
//!
//! Everything is f64 and CPU-only. Networks are a stack of affine layers
//! with per-layer activations; gradients are computed in reverse mode from
//! a forward cache. This is deliberately small: the Q-network, actor and
//! critic used elsewhere are all plain MLPs.

mod adam;
mod checkpoint;
mod matrix;

pub mod gradcheck;

pub use adam::{AdamParams, AdamState};
pub use matrix::Mat;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid layer spec: {0}")]
    InvalidSpec(String),
    #[error("checkpoint io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
}

/// Steepened sigmoid `1 / (1 + exp(-alpha * x))`. At large `alpha` this
/// approaches a step at 0, which is what squeezes actor outputs toward
/// binary values.
pub fn steepened_sigmoid(x: f64, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0);
    1.0 / (1.0 + (-alpha * x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    /// Sigmoid steepened by the given ratio, see [`steepened_sigmoid`].
    SteepenedSigmoid(f64),
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::SteepenedSigmoid(alpha) => steepened_sigmoid(z, alpha),
        }
    }

    /// Derivative expressed through the post-activation value `y`.
    fn derivative_from_output(&self, y: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::SteepenedSigmoid(alpha) => alpha * y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub w: Mat,
    pub b: Vec<f64>,
    pub activation: Activation,
}

/// Multi-layer perceptron: a chain of `x -> act(x W + b)` layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Forward cache: per-layer inputs and post-activation outputs, kept for
/// the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_inputs: Vec<Mat>,
    layer_outputs: Vec<Mat>,
}

impl ForwardCache {
    pub fn output(&self) -> &Mat {
        self.layer_outputs.last().expect("cache has layers")
    }
}

/// Per-layer parameter gradients, shaped exactly like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub dw: Mat,
    pub db: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: Mat::zeros(l.w.rows(), l.w.cols()),
                    db: vec![0.0; l.b.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for lg in &mut self.layers {
            for v in lg.dw.data_mut() {
                *v *= s;
            }
            for v in &mut lg.db {
                *v *= s;
            }
        }
    }

    /// Flat view in the same order as [`Mlp::params`].
    pub fn flat(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|lg| lg.dw.data().iter().chain(lg.db.iter()))
    }
}

impl Mlp {
    /// Builds a network from layer specs; weights and biases drawn uniformly
    /// from +-1/sqrt(fan_in).
    pub fn new_seeded(specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self, NnError> {
        if specs.is_empty() {
            return Err(NnError::InvalidSpec("network needs at least one layer".into()));
        }
        for s in specs {
            if s.in_dim == 0 || s.out_dim == 0 {
                return Err(NnError::InvalidSpec("layer dims must be >= 1".into()));
            }
            if let Activation::SteepenedSigmoid(a) = s.activation {
                if !(a > 0.0) {
                    return Err(NnError::InvalidSpec("sigmoid steepness must be > 0".into()));
                }
            }
        }
        for pair in specs.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NnError::InvalidSpec(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        let layers = specs
            .iter()
            .map(|s| {
                let bound = 1.0 / (s.in_dim as f64).sqrt();
                let w = Mat::from_fn(s.in_dim, s.out_dim, |_, _| rng.gen_range(-bound..bound));
                let b = (0..s.out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
                Layer {
                    w,
                    b,
                    activation: s.activation,
                }
            })
            .collect();
        Ok(Mlp { layers })
    }

    /// Builds a network with explicitly given parameters (used in tests and
    /// checkpoint loading).
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidSpec("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].w.cols() != pair[1].w.rows() {
                return Err(NnError::InvalidSpec("layer dims do not chain".into()));
            }
        }
        for l in &layers {
            if l.b.len() != l.w.cols() {
                return Err(NnError::InvalidSpec("bias length != layer width".into()));
            }
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec::new(l.w.rows(), l.w.cols(), l.activation))
            .collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    /// Flat parameter iterator: per layer, W row-major then b.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.data().iter().chain(l.b.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.data_mut().iter_mut().chain(l.b.iter_mut()))
    }

    fn check_input(&self, x: &Mat) -> Result<(), NnError> {
        if x.cols() != self.in_dim() {
            return Err(NnError::DimensionMismatch(format!(
                "input has {} columns, network expects {}",
                x.cols(),
                self.in_dim()
            )));
        }
        Ok(())
    }

    /// Inference-only forward pass.
    pub fn forward(&self, x: &Mat) -> Result<Mat, NnError> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = cur.matmul(&layer.w);
            z.add_row_broadcast(&layer.b);
            cur = z.map(|v| layer.activation.apply(v));
        }
        Ok(cur)
    }

    /// Forward pass retaining per-layer activations for [`Mlp::backward`].
    pub fn forward_cached(&self, x: &Mat) -> Result<ForwardCache, NnError> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = cur.matmul(&layer.w);
            z.add_row_broadcast(&layer.b);
            let y = z.map(|v| layer.activation.apply(v));
            inputs.push(cur);
            outputs.push(y.clone());
            cur = y;
        }
        Ok(ForwardCache {
            layer_inputs: inputs,
            layer_outputs: outputs,
        })
    }

    /// Reverse-mode gradients of `sum_ij upstream_ij * output_ij` with
    /// respect to every parameter, plus the gradient w.r.t. the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Mat,
    ) -> Result<(Gradients, Mat), NnError> {
        if cache.layer_inputs.len() != self.layers.len() {
            return Err(NnError::DimensionMismatch(
                "cache does not match network depth".into(),
            ));
        }
        let out = cache.output();
        if upstream.rows() != out.rows() || upstream.cols() != out.cols() {
            return Err(NnError::DimensionMismatch(format!(
                "upstream gradient is {}x{}, output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = vec![None; self.layers.len()];
        let mut delta = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.layer_outputs[idx];
            let x = &cache.layer_inputs[idx];
            // dZ = delta ⊙ act'(y)
            let mut dz = delta;
            for i in 0..dz.rows() {
                let yrow = y.row(i);
                for (j, v) in dz.row_mut(i).iter_mut().enumerate() {
                    *v *= layer.activation.derivative_from_output(yrow[j]);
                }
            }
            let dw = x.transpose_matmul(&dz);
            let db = dz.column_sums();
            delta = dz.matmul_transpose(&layer.w);
            grads[idx] = Some(LayerGrads { dw, db });
        }
        Ok((
            Gradients {
                layers: grads.into_iter().map(Option::unwrap).collect(),
            },
            delta,
        ))
    }
}

/// Target-network blend `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    debug_assert_eq!(target.param_count(), online.param_count());
    for (t, o) in target.params_mut().zip(online.params()) {
        *t = tau * *o + (1.0 - tau) * *t;
    }
}

/// Gradient of `mean_j Q(s_j, mu(s_j))` with respect to the actor's
/// parameters, obtained by pushing `dQ/da` back through the actor. Returns
/// the gradients (ascent direction) and the mean Q value.
pub fn chain_critic_to_actor(
    critic: &Mlp,
    actor: &Mlp,
    states: &Mat,
) -> Result<(Gradients, f64), NnError> {
    if critic.in_dim() != states.cols() + actor.out_dim() {
        return Err(NnError::DimensionMismatch(format!(
            "critic expects {} inputs, got state dim {} + action dim {}",
            critic.in_dim(),
            states.cols(),
            actor.out_dim()
        )));
    }
    if actor.in_dim() != states.cols() {
        return Err(NnError::DimensionMismatch(format!(
            "actor expects {} inputs, states have {}",
            actor.in_dim(),
            states.cols()
        )));
    }
    let batch = states.rows();
    let actor_cache = actor.forward_cached(states)?;
    let actions = actor_cache.output().clone();
    let critic_in = states.hconcat(&actions);
    let critic_cache = critic.forward_cached(&critic_in)?;
    let q = critic_cache.output();
    let mean_q = q.data().iter().sum::<f64>() / batch as f64;

    // d(mean Q)/dQ_j = 1/batch
    let upstream = Mat::from_fn(batch, 1, |_, _| 1.0 / batch as f64);
    let (_, d_input) = critic.backward(&critic_cache, &upstream)?;
    let d_actions = d_input.slice_cols(states.cols(), critic.in_dim());
    let (actor_grads, _) = actor.backward(&actor_cache, &d_actions)?;
    Ok((actor_grads, mean_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn single_layer(w: f64, b: f64, act: Activation) -> Mlp {
        Mlp::from_layers(vec![Layer {
            w: Mat::from_vec(1, 1, vec![w]).unwrap(),
            b: vec![b],
            activation: act,
        }])
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let n = 3;
        let layer = Layer {
            w: Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 }),
            b: vec![0.0; n],
            activation: Activation::Identity,
        };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = Mat::from_vec(2, n, vec![0.5, -1.0, 2.0, 0.0, 3.5, -0.25]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_parameters_tanh_gives_zero() {
        let net = Mlp::from_layers(vec![Layer {
            w: Mat::zeros(4, 3),
            b: vec![0.0; 3],
            activation: Activation::Tanh,
        }])
        .unwrap();
        let x = Mat::from_vec(1, 4, vec![1.0, -2.0, 3.0, 4.0]).unwrap();
        let y = net.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_tanh_evaluation() {
        // 1 -> 1 net, W=2, b=1, input 0: tanh(1)
        let net = single_layer(2.0, 1.0, Activation::Tanh);
        let y = net.forward(&Mat::row_vector(vec![0.0])).unwrap();
        assert!((y.get(0, 0) - 0.7615941559557649).abs() < 1e-15);
    }

    #[test]
    fn steepened_sigmoid_values() {
        assert_eq!(steepened_sigmoid(0.0, 1.0), 0.5);
        assert_eq!(steepened_sigmoid(0.0, 123.0), 0.5);
        assert!((steepened_sigmoid(0.5, 10.0) - 0.9933071490757153).abs() < 1e-15);
        assert!((steepened_sigmoid(1e6, 10.0) - 1.0).abs() < 1e-300);
        assert!(steepened_sigmoid(-1e6, 10.0) >= 0.0);
    }

    #[test]
    fn steepened_sigmoid_approaches_step_and_is_monotone() {
        for &x in &[-2.0, -0.5, -1e-3, 1e-3, 0.5, 2.0] {
            let limit = if x > 0.0 { 1.0 } else { 0.0 };
            let mut prev_err = f64::INFINITY;
            for &alpha in &[1.0, 10.0, 100.0, 1000.0, 1e4] {
                let err = (steepened_sigmoid(x, alpha) - limit).abs();
                assert!(err <= prev_err + 1e-15);
                prev_err = err;
            }
        }
        for &alpha in &[0.5, 1.0, 10.0, 100.0] {
            let mut prev = -1.0;
            for i in -40..=40 {
                let y = steepened_sigmoid(i as f64 * 0.1, alpha);
                // non-strict only where f64 saturates
                assert!(y > prev || (y == prev && (y == 0.0 || y == 1.0)));
                prev = y;
            }
        }
    }

    #[test]
    fn linear_backward_matches_hand_result() {
        // loss = output, input 3 => dW = 3, db = 1
        let net = single_layer(0.7, -0.2, Activation::Identity);
        let cache = net.forward_cached(&Mat::row_vector(vec![3.0])).unwrap();
        let (grads, dx) = net.backward(&cache, &Mat::row_vector(vec![1.0])).unwrap();
        assert_eq!(grads.layers[0].dw.get(0, 0), 3.0);
        assert_eq!(grads.layers[0].db[0], 1.0);
        assert_eq!(dx.get(0, 0), 0.7);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let net = Mlp::new_seeded(
            &[
                LayerSpec::new(3, 5, Activation::Tanh),
                LayerSpec::new(5, 2, Activation::Identity),
            ],
            &mut rng,
        )
        .unwrap();
        let x = Mat::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.3);
        let cache = net.forward_cached(&x).unwrap();
        let (grads, dx) = net.backward(&cache, &Mat::zeros(4, 2)).unwrap();
        assert!(grads.flat().all(|&g| g == 0.0));
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let net = Mlp::new_seeded(&[LayerSpec::new(3, 2, Activation::Tanh)], &mut rng).unwrap();
        let bad = Mat::zeros(1, 4);
        assert!(matches!(
            net.forward(&bad),
            Err(NnError::DimensionMismatch(_))
        ));
        let specs = [
            LayerSpec::new(3, 2, Activation::Tanh),
            LayerSpec::new(5, 1, Activation::Identity),
        ];
        assert!(matches!(
            Mlp::new_seeded(&specs, &mut rng),
            Err(NnError::InvalidSpec(_))
        ));
    }

    #[test]
    fn soft_update_linearity() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let specs = [
            LayerSpec::new(2, 4, Activation::Tanh),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        let online = Mlp::new_seeded(&specs, &mut rng).unwrap();
        let initial = Mlp::new_seeded(&specs, &mut rng).unwrap();
        let mut target = initial.clone();
        let tau = 0.05;
        let k = 40;
        for _ in 0..k {
            soft_update(&mut target, &online, tau);
        }
        let shrink = (1.0 - tau) as f64;
        for ((t, o), i0) in target.params().zip(online.params()).zip(initial.params()) {
            let expect = shrink.powi(k) * (i0 - o);
            assert!(
                (t - o - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                "soft update deviates: {} vs {}",
                t - o,
                expect
            );
        }
    }

    #[test]
    fn chain_rule_scalar_case() {
        // critic Q(s, a) = a, actor a = w * s: d mean Q / dw = mean s.
        let critic = Mlp::from_layers(vec![Layer {
            w: Mat::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
            b: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap();
        let w = 0.37;
        let actor = single_layer(w, 0.0, Activation::Identity);
        let states = Mat::from_vec(4, 1, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let (grads, mean_q) = chain_critic_to_actor(&critic, &actor, &states).unwrap();
        assert!((grads.layers[0].dw.get(0, 0) - 3.0).abs() < 1e-14); // mean state
        assert!((mean_q - w * 3.0).abs() < 1e-14);
    }

    #[test]
    fn chain_rule_zero_when_critic_ignores_action() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let actor = Mlp::new_seeded(
            &[LayerSpec::new(2, 2, Activation::SteepenedSigmoid(10.0))],
            &mut rng,
        )
        .unwrap();
        // Critic reads only the state columns; action weights are zero.
        let mut w = Mat::zeros(4, 1);
        w.set(0, 0, 0.5);
        w.set(1, 0, -0.25);
        let critic = Mlp::from_layers(vec![Layer {
            w,
            b: vec![0.1],
            activation: Activation::Identity,
        }])
        .unwrap();
        let states = Mat::from_fn(3, 2, |i, j| (i + j) as f64 * 0.2);
        let (grads, _) = chain_critic_to_actor(&critic, &actor, &states).unwrap();
        assert!(grads.flat().all(|&g| g == 0.0));
    }
}
