//! Exploration noise processes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Noise process selection for DDPG exploration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NoiseKind {
    OrnsteinUhlenbeck { theta: f64, sigma: f64, dt: f64 },
    Gaussian { sigma: f64 },
}

impl NoiseKind {
    /// Mean-reverting noise with sigma 0.3, the experiment setting.
    pub fn ou_default() -> Self {
        NoiseKind::OrnsteinUhlenbeck {
            theta: 0.15,
            sigma: 0.3,
            dt: 1.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseKind::OrnsteinUhlenbeck { sigma, .. } => sigma,
            NoiseKind::Gaussian { sigma } => sigma,
        }
    }

    pub fn build(&self, dim: usize) -> ExplorationNoise {
        match *self {
            NoiseKind::OrnsteinUhlenbeck { theta, sigma, dt } => {
                ExplorationNoise::Ou(OuNoise::new(dim, theta, sigma, dt))
            }
            NoiseKind::Gaussian { sigma } => {
                ExplorationNoise::Gaussian(GaussianNoise { sigma, dim })
            }
        }
    }
}

/// Mean-reverting Ornstein-Uhlenbeck process around zero:
/// `x <- x + theta (0 - x) dt + sigma sqrt(dt) N(0, 1)`.
#[derive(Debug, Clone)]
pub struct OuNoise {
    state: Vec<f64>,
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl OuNoise {
    pub fn new(dim: usize, theta: f64, sigma: f64, dt: f64) -> Self {
        assert!(sigma >= 0.0, "sigma must be >= 0");
        OuNoise {
            state: vec![0.0; dim],
            theta,
            sigma,
            dt,
        }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn sample(&mut self, rng: &mut impl Rng) -> &[f64] {
        let scale = self.sigma * self.dt.sqrt();
        for x in &mut self.state {
            let z: f64 = rng.sample(StandardNormal);
            *x += self.theta * (0.0 - *x) * self.dt + scale * z;
        }
        &self.state
    }
}

#[derive(Debug, Clone)]
pub struct GaussianNoise {
    pub sigma: f64,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub enum ExplorationNoise {
    Ou(OuNoise),
    Gaussian(GaussianNoise),
}

impl ExplorationNoise {
    pub fn reset(&mut self) {
        if let ExplorationNoise::Ou(ou) = self {
            ou.reset();
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            ExplorationNoise::Ou(ou) => ou.sigma,
            ExplorationNoise::Gaussian(g) => g.sigma,
        }
    }

    /// Writes one perturbation per output into `out`.
    pub fn sample_into(&mut self, out: &mut [f64], rng: &mut impl Rng) {
        match self {
            ExplorationNoise::Ou(ou) => {
                debug_assert_eq!(out.len(), ou.state.len());
                out.copy_from_slice(ou.sample(rng));
            }
            ExplorationNoise::Gaussian(g) => {
                debug_assert_eq!(out.len(), g.dim);
                for o in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = g.sigma * z;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_sigma_stays_at_zero() {
        let mut ou = OuNoise::new(3, 0.15, 0.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(ou.sample(&mut rng).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn zero_reversion_gives_a_random_walk() {
        // variance after t steps is sigma^2 t
        let sigma = 0.3;
        let steps = 400;
        let runs = 4000;
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut sq = 0.0;
        for _ in 0..runs {
            let mut ou = OuNoise::new(1, 0.0, sigma, 1.0);
            let mut last = 0.0;
            for _ in 0..steps {
                last = ou.sample(&mut rng)[0];
            }
            sq += last * last;
        }
        let var = sq / runs as f64;
        let expect = sigma * sigma * steps as f64;
        assert!(
            (var - expect).abs() < 0.05 * expect,
            "variance {var} vs {expect}"
        );
    }

    #[test]
    fn stationary_variance_matches_small_dt_limit() {
        // var -> sigma^2 / (2 theta) as dt -> 0
        let (theta, sigma, dt) = (0.15, 0.3, 0.01);
        let mut ou = OuNoise::new(1, theta, sigma, dt);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        // burn in past the mixing time
        for _ in 0..200_000 {
            ou.sample(&mut rng);
        }
        let mut sq = 0.0;
        let n = 2_000_000;
        for _ in 0..n {
            let x = ou.sample(&mut rng)[0];
            sq += x * x;
        }
        let var = sq / n as f64;
        let expect = sigma * sigma / (2.0 * theta);
        assert!(
            (var - expect).abs() < 0.05 * expect,
            "variance {var} vs {expect}"
        );
    }

    #[test]
    fn reset_clears_the_state() {
        let mut ou = OuNoise::new(2, 0.15, 0.3, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        ou.sample(&mut rng);
        ou.reset();
        assert!(ou.state.iter().all(|&x| x == 0.0));
    }
}
