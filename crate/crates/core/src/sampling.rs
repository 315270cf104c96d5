//! Seeded random instances: Beta-distributed opinions and parameters on
//! random regular networks.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::dynamics::AgentParameters;
use crate::error::{Error, Result};
use crate::graph::{generate_k_regular, InfluenceNetwork};

/// Shape parameters `(alpha, beta)` of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaShape {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaShape {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    fn dist(self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta).map_err(|e| Error::Precondition(format!("beta shape: {e}")))
    }

    pub fn sample_vec<R: Rng>(self, n: usize, rng: &mut R) -> Result<DVector<f64>> {
        let d = self.dist()?;
        Ok(DVector::from_fn(n, |_, _| d.sample(rng)))
    }
}

/// Distributions for initial opinions, resilience and susceptibility.
///
/// The default is `y0 ~ Beta(2, 2)`, `phi ~ Beta(2, 2)`, `lambda ~ Beta(2, 8)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPresets {
    pub y0: BetaShape,
    pub phi: BetaShape,
    pub lambda: BetaShape,
}

impl Default for BetaPresets {
    fn default() -> Self {
        Self {
            y0: BetaShape::new(2.0, 2.0),
            phi: BetaShape::new(2.0, 2.0),
            lambda: BetaShape::new(2.0, 8.0),
        }
    }
}

/// Initial opinions plus agent parameters drawn from one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAgents {
    pub y0: DVector<f64>,
    pub params: AgentParameters,
}

impl BetaPresets {
    /// Draws `y0`, then `phi`, then `lambda`, each in agent order.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<SampledAgents> {
        let y0 = self.y0.sample_vec(n, rng)?;
        let phi = self.phi.sample_vec(n, rng)?;
        let lambda = self.lambda.sample_vec(n, rng)?;
        Ok(SampledAgents {
            y0,
            params: AgentParameters::new(lambda, phi)?,
        })
    }

    pub fn sample_seeded(&self, n: usize, seed: u64) -> Result<SampledAgents> {
        self.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// A complete random instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub net: InfluenceNetwork,
    pub params: AgentParameters,
    pub y0: DVector<f64>,
}

/// Largest feasible degree `<= 3` for a regular graph on `n` nodes.
pub fn regular_degree(n: usize) -> usize {
    let mut k = 3.min(n.saturating_sub(1));
    while k > 1 && !(n * k).is_multiple_of(2) {
        k -= 1;
    }
    k
}

/// Random regular network (degree from [`regular_degree`]) with agents
/// drawn from `presets`. The network uses `seed` and the agents use
/// `seed ^ AGENT_STREAM`, so the two draws are independent of each other.
pub fn random_instance(n: usize, seed: u64, presets: &BetaPresets) -> Result<Instance> {
    let net = generate_k_regular(n, regular_degree(n), seed)?;
    let SampledAgents { y0, params } = presets.sample_seeded(n, seed ^ AGENT_STREAM)?;
    Ok(Instance { net, params, y0 })
}

/// Stream separator between network and agent draws.
pub const AGENT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
