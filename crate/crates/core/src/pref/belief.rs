use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::TrajectoryFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Posterior samples kept per update.
    pub samples: usize,
    /// Samples are confined to the ball `|ω| ≤ omega_cap`.
    pub omega_cap: f64,
    pub proposal_std: f64,
    pub burn_in: usize,
    pub thin: usize,
    /// Rationality multiplying the reward inside the softmax.
    pub beta: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            omega_cap: 3.0,
            proposal_std: 0.25,
            burn_in: 200,
            thin: 5,
            beta: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples < 2 {
            return Err("learner needs at least 2 samples".into());
        }
        if !(self.omega_cap > 0.0 && self.proposal_std > 0.0 && self.beta >= 0.0) {
            return Err("omega_cap and proposal_std must be positive, beta nonnegative".into());
        }
        if !self.beta.is_finite() {
            return Err("learner beta must be finite".into());
        }
        if self.thin == 0 {
            return Err("thin must be at least 1".into());
        }
        Ok(())
    }
}

/// A choice reduced to feature space: `preferred` beat `other`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub preferred: Vector3<f64>,
    pub other: Vector3<f64>,
}

impl Observation {
    pub fn new(preferred: &TrajectoryFeatures, other: &TrajectoryFeatures) -> Self {
        Self {
            preferred: preferred.phi,
            other: other.phi,
        }
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Sampled posterior over reward weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    samples: Vec<Vector3<f64>>,
    rng: ChaCha8Rng,
    free: [bool; 3],
}

impl Belief {
    /// `samples` i.i.d. draws from `N(0, I₃)`, radially clipped to the cap.
    pub fn initialize(seed: u64, cfg: &LearnerConfig) -> Self {
        Self::initialize_masked(seed, cfg, [true; 3])
    }

    /// Like [`Belief::initialize`] with dimensions outside `free` pinned to 0.
    pub fn initialize_masked(seed: u64, cfg: &LearnerConfig, free: [bool; 3]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..cfg.samples.max(2))
            .map(|_| {
                let mut w = Vector3::zeros();
                for i in 0..3 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    if free[i] {
                        w[i] = z;
                    }
                }
                let n = w.norm();
                if n > cfg.omega_cap {
                    w *= cfg.omega_cap / n;
                    while w.norm() > cfg.omega_cap {
                        w *= 1.0 - f64::EPSILON;
                    }
                }
                w
            })
            .collect();
        Self { samples, rng, free }
    }

    /// A belief holding exactly `samples`, e.g. to inspect decisions under a
    /// known weight vector.
    pub fn from_samples(samples: Vec<Vector3<f64>>, seed: u64) -> Self {
        assert!(samples.len() >= 2, "a belief needs at least two samples");
        Self {
            samples,
            rng: ChaCha8Rng::seed_from_u64(seed),
            free: [true; 3],
        }
    }

    pub fn samples(&self) -> &[Vector3<f64>] {
        &self.samples
    }

    pub fn mean(&self) -> Vector3<f64> {
        self.samples.iter().sum::<Vector3<f64>>() / self.samples.len() as f64
    }

    /// Per-dimension sample standard deviation.
    pub fn std(&self) -> Vector3<f64> {
        let mean = self.mean();
        let n = self.samples.len() as f64;
        let ss = self
            .samples
            .iter()
            .fold(Vector3::zeros(), |acc, w| acc + (w - mean).component_mul(&(w - mean)));
        (ss / (n - 1.0)).map(f64::sqrt)
    }

    /// Unnormalized log posterior: truncated standard normal prior times the
    /// softmax likelihood of every observation.
    pub fn log_posterior(omega: &Vector3<f64>, observations: &[Observation], cfg: &LearnerConfig) -> f64 {
        if omega.norm() > cfg.omega_cap {
            return f64::NEG_INFINITY;
        }
        let prior = -0.5 * omega.norm_squared();
        let lik: f64 = observations
            .iter()
            .map(|o| log_sigmoid(cfg.beta * omega.dot(&(o.preferred - o.other))))
            .sum();
        prior + lik
    }

    /// Refresh every sample with a Metropolis-Hastings chain started at the
    /// current posterior mean, using the full observation history.
    pub fn update(&mut self, observations: &[Observation], cfg: &LearnerConfig) {
        let n = cfg.samples.max(2);
        let mut current = self.mean();
        let mut current_lp = Self::log_posterior(&current, observations, cfg);
        let mut out = Vec::with_capacity(n);
        let total = cfg.burn_in + n * cfg.thin;
        for it in 0..total {
            let mut proposal = current;
            for i in 0..3 {
                if self.free[i] {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    proposal[i] += cfg.proposal_std * z;
                }
            }
            let lp = Self::log_posterior(&proposal, observations, cfg);
            let u: f64 = self.rng.random();
            if lp > f64::NEG_INFINITY && u.ln() < lp - current_lp {
                current = proposal;
                current_lp = lp;
            }
            if it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0 {
                out.push(current);
            }
        }
        self.samples = out;
    }

    pub fn snapshot(&self, trial: usize) -> BeliefSnapshot {
        BeliefSnapshot {
            trial,
            samples: self.samples.iter().map(|w| (*w).into()).collect(),
            mean: self.mean().into(),
            std: self.std().into(),
        }
    }
}

/// Serializable view of a belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub trial: usize,
    pub samples: Vec<[f64; 3]>,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}
