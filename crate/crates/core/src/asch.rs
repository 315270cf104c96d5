//! Asch conformity experiments: one test agent facing a group of
//! confederates with frozen beliefs.
//!
//! Agent 0 is the test agent with `y_0(0) = 1` (certain of the truth).
//! Confederates have `lambda = 0` and `phi = 1`, so they voice their initial
//! belief forever: 0 for all of them in the first experiment, 1 for agent 1
//! and 0 for the rest in the second.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, AgentParameters, Model, PublicOpinion, SimulationResult, StopCriteria};
use crate::error::{Error, Result};
use crate::graph::{build_network, ConformityMode, InfluenceNetwork};

/// Group size used by the original experiment.
pub const DEFAULT_GROUP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Every confederate opposes the truth.
    #[default]
    First,
    /// One confederate (agent 1) supports the truth.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AschModel {
    #[default]
    Continuous,
    /// Binary expression with the test agent's threshold.
    Threshold(f64),
}

/// Scenario description, also the on-disk JSON format
/// `{"n":8,"lambda1":x,"phi1":x,"w11":x,"variant":"first"|"second","model":"continuous"|{"threshold":tau},"seed":s}`.
///
/// `w11` defaults to `1 - lambda1` and `mode` to the global public opinion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AschScenario {
    #[serde(default = "default_group")]
    pub n: usize,
    pub lambda1: f64,
    pub phi1: f64,
    #[serde(default)]
    pub w11: Option<f64>,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub model: AschModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: PublicOpinion,
}

fn default_group() -> usize {
    DEFAULT_GROUP
}

fn default_mode() -> PublicOpinion {
    PublicOpinion::Global
}

impl AschScenario {
    /// First-experiment continuous scenario with the natural self-weight.
    pub fn new(lambda1: f64, phi1: f64) -> Self {
        Self {
            n: DEFAULT_GROUP,
            lambda1,
            phi1,
            w11: None,
            variant: Variant::First,
            model: AschModel::Continuous,
            seed: 0,
            mode: PublicOpinion::Global,
        }
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn model(mut self, model: AschModel) -> Self {
        self.model = model;
        self
    }

    pub fn self_weight(mut self, w11: f64) -> Self {
        self.w11 = Some(w11);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Test agent's self-weight in effect.
    pub fn resolved_w11(&self) -> f64 {
        self.w11.unwrap_or(1.0 - self.lambda1)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Network, parameters and initial beliefs of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AschSetup {
    pub net: InfluenceNetwork,
    pub params: AgentParameters,
    pub y0: DVector<f64>,
}

/// Builds a scenario with a random dense `W`.
///
/// Every entry is drawn from (0, 1) with a `ChaCha8Rng` seeded by `seed`:
/// first the test agent's `n - 1` off-diagonal weights, scaled to sum to
/// `1 - w11`, then each confederate row in order, normalized.
pub fn build_scenario(spec: &AschScenario, seed: u64) -> Result<AschSetup> {
    let n = spec.n;
    let min_n = match spec.variant {
        Variant::First => 2,
        Variant::Second => 3,
    };
    if n < min_n {
        return Err(Error::Precondition(format!(
            "{:?} variant needs at least {min_n} agents, got {n}",
            spec.variant
        )));
    }
    let w11 = spec.resolved_w11();
    if !(w11 > 0.0 && w11 < 1.0) {
        return Err(Error::Parameter {
            name: "w11",
            index: 0,
            value: w11,
            range: "(0, 1)",
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    let off: Vec<f64> = (1..n).map(|_| rng.sample(Open01)).collect();
    let total: f64 = off.iter().sum();
    w[(0, 0)] = w11;
    for (j, v) in off.into_iter().enumerate() {
        w[(0, j + 1)] = (1.0 - w11) * v / total;
    }
    for i in 1..n {
        for j in 0..n {
            w[(i, j)] = rng.sample::<f64, _>(Open01);
        }
    }
    let net = build_network(w, ConformityMode::Uniform)?;

    let mut lambda = DVector::zeros(n);
    let mut phi = DVector::from_element(n, 1.0);
    lambda[0] = spec.lambda1;
    phi[0] = spec.phi1;
    let mut params = AgentParameters::new(lambda, phi)?;
    if let AschModel::Threshold(tau) = spec.model {
        let mut tau_v = DVector::from_element(n, 0.5);
        tau_v[0] = tau;
        params = params.with_thresholds(tau_v)?;
    }

    let mut y0 = DVector::zeros(n);
    y0[0] = 1.0;
    if spec.variant == Variant::Second {
        y0[1] = 1.0;
    }
    Ok(AschSetup { net, params, y0 })
}

/// Limit of the test agent's private belief in the first experiment:
/// `(1 - lambda1) / (1 - lambda1 w11)`.
pub fn closed_form_private(lambda1: f64, w11: f64) -> Result<f64> {
    if !(w11 > 0.0 && w11 < 1.0) {
        return Err(Error::Parameter {
            name: "w11",
            index: 0,
            value: w11,
            range: "(0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&lambda1) {
        return Err(Error::Parameter {
            name: "lambda1",
            index: 0,
            value: lambda1,
            range: "[0, 1]",
        });
    }
    Ok((1.0 - lambda1) / (1.0 - lambda1 * w11))
}

/// Ratio `g(phi1, n) = n phi1 / (n - 1 + phi1)` between the expressed and
/// private limits of the test agent.
pub fn expression_ratio(phi1: f64, n: usize) -> f64 {
    let n = n as f64;
    n * phi1 / (n - 1.0 + phi1)
}

/// Limit of the test agent's expressed belief in the first experiment under
/// the global public opinion: `g(phi1, n) y1*`.
pub fn closed_form_expressed(phi1: f64, n: usize, y1_star: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition(format!("group size must be at least 2, got {n}")));
    }
    if !(0.0..=1.0).contains(&phi1) {
        return Err(Error::Parameter {
            name: "phi1",
            index: 0,
            value: phi1,
            range: "[0, 1]",
        });
    }
    Ok(expression_ratio(phi1, n) * y1_star)
}

/// Private limit as a function of susceptibility alone, with the natural
/// self-weight `w11 = 1 - lambda1`: `(1 - l) / (1 - l (1 - l))`.
pub fn stubbornness_curve(lambda1: f64) -> f64 {
    (1.0 - lambda1) / (1.0 - lambda1 * (1.0 - lambda1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPrediction {
    ExpressesOne,
    ExpressesZero,
    /// The outcome depends on the initial expressed belief.
    Indeterminate,
}

/// Steady expressed choice of the test agent in the first experiment with
/// threshold `tau1`.
///
/// With `lo = phi1 y1*` and `hi = lo + (1 - phi1)/n`: a threshold in the open
/// band `(lo, hi)` admits both outcomes, `tau1 <= hi` otherwise gives 1 and
/// `tau1 >= hi` gives 0.
pub fn threshold_prediction(
    phi1: f64,
    y1_star: f64,
    n: usize,
    tau1: f64,
    mode: PublicOpinion,
) -> Result<ThresholdPrediction> {
    if mode != PublicOpinion::Global {
        return Err(Error::Precondition(
            "the threshold predictor assumes the global public opinion".into(),
        ));
    }
    if n < 2 {
        return Err(Error::Precondition(format!("group size must be at least 2, got {n}")));
    }
    let (lo, hi) = indeterminate_band(phi1, y1_star, n);
    Ok(if tau1 > lo && tau1 < hi {
        ThresholdPrediction::Indeterminate
    } else if tau1 <= hi {
        ThresholdPrediction::ExpressesOne
    } else {
        ThresholdPrediction::ExpressesZero
    })
}

/// Endpoints of the threshold band whose outcome depends on the initial
/// expressed belief.
pub fn indeterminate_band(phi1: f64, y1_star: f64, n: usize) -> (f64, f64) {
    let lo = phi1 * y1_star;
    (lo, lo + (1.0 - phi1) / n as f64)
}

/// Response types of a test agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Independent,
    /// Both beliefs moved to the majority.
    YieldJudgment,
    /// Private belief kept, expressed belief yielded.
    YieldAction,
    /// Expressed belief kept while the private belief yielded.
    Anomalous,
}

/// Classifies final beliefs with a 0.5 cut.
pub fn classify_individual(y1_star: f64, yhat1_star: f64) -> Classification {
    match (y1_star >= 0.5, yhat1_star >= 0.5) {
        (true, true) => Classification::Independent,
        (false, false) => Classification::YieldJudgment,
        (true, false) => Classification::YieldAction,
        (false, true) => Classification::Anomalous,
    }
}

/// Simulated scenario plus the test agent's limits.
#[derive(Debug, Clone, PartialEq)]
pub struct AschRun {
    pub setup: AschSetup,
    pub result: SimulationResult,
    pub y1_star: f64,
    pub yhat1_star: f64,
    pub classification: Classification,
}

/// Builds and simulates a scenario with its own seed and mode.
pub fn run_scenario(spec: &AschScenario, stop: StopCriteria) -> Result<AschRun> {
    let setup = build_scenario(spec, spec.seed)?;
    let model = match spec.model {
        AschModel::Continuous => Model::Continuous,
        AschModel::Threshold(_) => Model::Threshold,
    };
    let result = simulate(&setup.y0, &setup.net, &setup.params, spec.mode, model, stop)?;
    let y1_star = result.final_state.y()[0];
    let yhat1_star = result.final_state.y_hat()[0];
    Ok(AschRun {
        setup,
        result,
        y1_star,
        yhat1_star,
        classification: classify_individual(y1_star, yhat1_star),
    })
}
