//! Finite-difference gradient oracle.
//!
//! Used by the test suites to validate backpropagation. Everything here goes
//! through [`Mlp::forward`] only, never [`Mlp::backward`], so the two routes
//! stay independent.

use super::{Gradients, Mat, Mlp};
#[cfg(test)]
use super::chain_critic_to_actor;

/// Central finite-difference gradient of `loss(net) = sum_ij c_ij * y_ij`
/// for a fixed input batch and coefficient matrix, perturbing one parameter
/// at a time.
pub fn fd_linear_loss_grads(net: &Mlp, x: &Mat, coeffs: &Mat, h: f64) -> Vec<f64> {
    let loss = |n: &Mlp| -> f64 {
        let y = n.forward(x).expect("forward in fd oracle");
        y.data()
            .iter()
            .zip(coeffs.data())
            .map(|(a, b)| a * b)
            .sum()
    };
    fd_grads(net, h, loss)
}

/// Central finite-difference gradient of `mean_j Q(s_j, mu(s_j))` with
/// respect to the actor parameters, for a fixed critic.
pub fn fd_actor_through_critic_grads(critic: &Mlp, actor: &Mlp, states: &Mat, h: f64) -> Vec<f64> {
    let loss = |a: &Mlp| -> f64 {
        let actions = a.forward(states).expect("actor forward in fd oracle");
        let q = critic
            .forward(&states.hconcat(&actions))
            .expect("critic forward in fd oracle");
        q.data().iter().sum::<f64>() / states.rows() as f64
    };
    fd_grads(actor, h, loss)
}

fn fd_grads(net: &Mlp, h: f64, loss: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let count = net.param_count();
    let mut out = Vec::with_capacity(count);
    let mut work = net.clone();
    for idx in 0..count {
        let original = set_param(&mut work, idx, |p| p + h);
        let up = loss(&work);
        set_param_to(&mut work, idx, original - h);
        let down = loss(&work);
        set_param_to(&mut work, idx, original);
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn set_param(net: &mut Mlp, idx: usize, f: impl Fn(f64) -> f64) -> f64 {
    let p = net.params_mut().nth(idx).expect("param index in range");
    let original = *p;
    *p = f(original);
    original
}

fn set_param_to(net: &mut Mlp, idx: usize, value: f64) {
    let p = net.params_mut().nth(idx).expect("param index in range");
    *p = value;
}

/// Relative agreement check between an analytic gradient and its
/// finite-difference counterpart: |a - b| <= tol * max(|a|, |b|) + floor.
pub fn grads_agree(analytic: &Gradients, fd: &[f64], tol: f64, floor: f64) -> bool {
    let mut i = 0;
    for &a in analytic.flat() {
        let b = fd[i];
        if (a - b).abs() > tol * a.abs().max(b.abs()) + floor {
            return false;
        }
        i += 1;
    }
    i == fd.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_activation(rng: &mut impl Rng) -> Activation {
        match rng.gen_range(0..4) {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            2 => Activation::Relu,
            _ => Activation::SteepenedSigmoid(rng.gen_range(0.5..4.0)),
        }
    }

    /// Mandatory pre-build check: backprop matches central finite
    /// differences on random small nets.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(2024);
        for trial in 0..20 {
            let depth = rng.gen_range(1..=3);
            let mut dims = vec![rng.gen_range(1..=6)];
            for _ in 0..depth {
                dims.push(rng.gen_range(1..=8));
            }
            let specs: Vec<LayerSpec> = (0..depth)
                .map(|i| LayerSpec::new(dims[i], dims[i + 1], random_activation(&mut rng)))
                .collect();
            let net = Mlp::new_seeded(&specs, &mut rng).unwrap();
            let batch = rng.gen_range(1..=4);
            let x = Mat::from_fn(batch, net.in_dim(), |_, _| rng.gen_range(-1.5..1.5));
            let coeffs = Mat::from_fn(batch, net.out_dim(), |_, _| rng.gen_range(-1.0..1.0));

            let cache = net.forward_cached(&x).unwrap();
            let (grads, _) = net.backward(&cache, &coeffs).unwrap();
            let fd = fd_linear_loss_grads(&net, &x, &coeffs, 1e-5);
            assert!(
                grads_agree(&grads, &fd, 1e-4, 1e-9),
                "finite-difference mismatch on trial {trial}"
            );
        }
    }

    #[test]
    fn chain_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for trial in 0..10 {
            let s_dim = rng.gen_range(1..=4);
            let a_dim = rng.gen_range(1..=3);
            let hidden = rng.gen_range(2..=8);
            let actor = Mlp::new_seeded(
                &[
                    LayerSpec::new(s_dim, hidden, Activation::Tanh),
                    LayerSpec::new(hidden, a_dim, Activation::SteepenedSigmoid(3.0)),
                ],
                &mut rng,
            )
            .unwrap();
            let critic = Mlp::new_seeded(
                &[
                    LayerSpec::new(s_dim + a_dim, hidden, Activation::Tanh),
                    LayerSpec::new(hidden, 1, Activation::Identity),
                ],
                &mut rng,
            )
            .unwrap();
            let states = Mat::from_fn(3, s_dim, |_, _| rng.gen_range(-1.0..1.0));
            let (grads, _) = chain_critic_to_actor(&critic, &actor, &states).unwrap();
            let fd = fd_actor_through_critic_grads(&critic, &actor, &states, 1e-5);
            assert!(
                grads_agree(&grads, &fd, 1e-4, 1e-9),
                "chain finite-difference mismatch on trial {trial}"
            );
        }
    }
}
