//! Time-stepping engine for coupled private/expressed opinions.
//!
//! One step follows the discussion order: every agent first updates its
//! private opinion from the expressed opinions voiced in the current round,
//! then forms its next expressed opinion from the fresh private opinion and
//! the public opinion of the current round.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InfluenceNetwork;

/// Default residual tolerance for [`simulate`].
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap for [`simulate`].
pub const DEFAULT_MAX_STEPS: usize = 100_000;
/// Longest expressed-opinion cycle recognised in threshold runs.
pub const MAX_CYCLE_PERIOD: usize = 64;

/// Which public opinion an agent conforms to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PublicOpinion {
    /// `M`-weighted average of the neighbours' expressed opinions.
    #[default]
    Local,
    /// Unweighted mean of all expressed opinions.
    Global,
}

/// Continuous expressed opinions, or binary ones passed through per-agent
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Continuous,
    Threshold,
}

/// Per-agent susceptibility, resilience and optional expression thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParameters {
    lambda: DVector<f64>,
    phi: DVector<f64>,
    threshold: Option<DVector<f64>>,
}

impl AgentParameters {
    pub fn new(lambda: DVector<f64>, phi: DVector<f64>) -> Result<Self> {
        if lambda.len() != phi.len() {
            return Err(Error::Dimension {
                what: "resilience vector",
                expected: lambda.len(),
                found: phi.len(),
            });
        }
        check_closed_unit("lambda", &lambda)?;
        check_closed_unit("phi", &phi)?;
        Ok(Self {
            lambda,
            phi,
            threshold: None,
        })
    }

    /// Same susceptibility and resilience for every agent.
    pub fn uniform(n: usize, lambda: f64, phi: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, lambda), DVector::from_element(n, phi))
    }

    pub fn with_thresholds(mut self, threshold: DVector<f64>) -> Result<Self> {
        if threshold.len() != self.n() {
            return Err(Error::Dimension {
                what: "threshold vector",
                expected: self.n(),
                found: threshold.len(),
            });
        }
        for (index, &value) in threshold.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::Parameter {
                    name: "threshold",
                    index,
                    value,
                    range: "(0, 1)",
                });
            }
        }
        self.threshold = Some(threshold);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    pub fn threshold(&self) -> Option<&DVector<f64>> {
        self.threshold.as_ref()
    }

    /// Copy with susceptibility replaced.
    pub fn with_lambda(&self, lambda: DVector<f64>) -> Result<Self> {
        let mut p = Self::new(lambda, self.phi.clone())?;
        p.threshold = self.threshold.clone();
        Ok(p)
    }

    /// Copy with resilience replaced.
    pub fn with_phi(&self, phi: DVector<f64>) -> Result<Self> {
        let mut p = Self::new(self.lambda.clone(), phi)?;
        p.threshold = self.threshold.clone();
        Ok(p)
    }
}

fn check_closed_unit(name: &'static str, v: &DVector<f64>) -> Result<()> {
    for (index, &value) in v.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Parameter {
                name,
                index,
                value,
                range: "[0, 1]",
            });
        }
    }
    Ok(())
}

/// Private and expressed opinions at time `t`, plus the initial private
/// opinions every agent stays anchored to.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    t: usize,
    y: DVector<f64>,
    y_hat: DVector<f64>,
    y0: DVector<f64>,
}

impl OpinionState {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn y_hat(&self) -> &DVector<f64> {
        &self.y_hat
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// State with an explicit initial expressed vector. The limit does not
    /// depend on it; only the transient does.
    pub fn with_expressed(y0: DVector<f64>, y_hat0: DVector<f64>) -> Result<Self> {
        check_finite(&y0)?;
        check_finite(&y_hat0)?;
        if y_hat0.len() != y0.len() {
            return Err(Error::Dimension {
                what: "initial expressed opinions",
                expected: y0.len(),
                found: y_hat0.len(),
            });
        }
        Ok(Self {
            t: 0,
            y: y0.clone(),
            y_hat: y_hat0,
            y0,
        })
    }
}

fn check_finite(v: &DVector<f64>) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// State at `t = 0` with expressed opinions equal to the private ones.
pub fn initial_state(y0: DVector<f64>) -> Result<OpinionState> {
    if y0.is_empty() {
        return Err(Error::Empty);
    }
    OpinionState::with_expressed(y0.clone(), y0)
}

fn check_dims(state: &OpinionState, net: &InfluenceNetwork, params: &AgentParameters) -> Result<()> {
    let n = net.n();
    for (what, found) in [("opinion vector", state.n()), ("agent parameters", params.n())] {
        if found != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                found,
            });
        }
    }
    Ok(())
}

/// Private update shared by both models.
///
/// Written as a convex combination around the anchor `y_i(0)` so that a
/// consensus state is reproduced exactly.
fn private_update(state: &OpinionState, net: &InfluenceNetwork, params: &AgentParameters) -> DVector<f64> {
    let w = net.w();
    let n = state.n();
    DVector::from_fn(n, |i, _| {
        let anchor = state.y0[i];
        let mut pull = w[(i, i)] * (state.y[i] - anchor);
        for j in (0..n).filter(|&j| j != i) {
            let wij = w[(i, j)];
            if wij != 0.0 {
                pull += wij * (state.y_hat[j] - anchor);
            }
        }
        anchor + params.lambda[i] * pull
    })
}

/// Pre-threshold expressed value `phi_i y_i + (1 - phi_i) avg_i`, formed as
/// `y_i + (1 - phi_i)(avg_i - y_i)`.
fn expressed_value(
    y_next: &DVector<f64>,
    y_hat: &DVector<f64>,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
) -> DVector<f64> {
    let n = y_next.len();
    let m = net.m();
    DVector::from_fn(n, |i, _| {
        let own = y_next[i];
        let gap = match mode {
            PublicOpinion::Local => (0..n)
                .filter(|&j| m[(i, j)] != 0.0)
                .map(|j| m[(i, j)] * (y_hat[j] - own))
                .sum::<f64>(),
            PublicOpinion::Global => y_hat.iter().map(|&x| x - own).sum::<f64>() / n as f64,
        };
        own + (1.0 - params.phi[i]) * gap
    })
}

/// One round of the continuous model.
pub fn step(
    state: &OpinionState,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
) -> Result<OpinionState> {
    check_dims(state, net, params)?;
    let y = private_update(state, net, params);
    let y_hat = expressed_value(&y, &state.y_hat, net, params, mode);
    Ok(OpinionState {
        t: state.t + 1,
        y,
        y_hat,
        y0: state.y0.clone(),
    })
}

/// One round of the threshold model: the private update is unchanged and
/// agent `i` expresses 1 iff its blended value exceeds `tau_i`.
pub fn step_threshold(
    state: &OpinionState,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
) -> Result<OpinionState> {
    check_dims(state, net, params)?;
    let tau = params.threshold().ok_or(Error::MissingThresholds)?;
    for v in [&state.y0, &state.y, &state.y_hat] {
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OpinionScale { index, value });
        }
    }
    let y = private_update(state, net, params);
    let value = expressed_value(&y, &state.y_hat, net, params, mode);
    let y_hat = DVector::from_fn(value.len(), |i, _| threshold_fn(value[i], tau[i]));
    Ok(OpinionState {
        t: state.t + 1,
        y,
        y_hat,
        y0: state.y0.clone(),
    })
}

/// Step function with a closed lower interval: `x <= tau` maps to 0.
pub fn threshold_fn(x: f64, tau: f64) -> f64 {
    if x <= tau {
        0.0
    } else {
        1.0
    }
}

/// When to stop iterating and how densely to record the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCriteria {
    pub max_steps: usize,
    pub tol: f64,
    /// Record every `stride`-th state (the final state is always kept).
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            tol: DEFAULT_TOL,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Outcome {
    Converged,
    MaxSteps,
    /// Threshold run settled into a periodic expressed pattern.
    Cycle {
        period: usize,
    },
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub y: DVector<f64>,
    pub y_hat: DVector<f64>,
}

impl From<&OpinionState> for Snapshot {
    fn from(s: &OpinionState) -> Self {
        Self {
            t: s.t,
            y: s.y.clone(),
            y_hat: s.y_hat.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub trajectory: Vec<Snapshot>,
    pub outcome: Outcome,
    pub iterations: usize,
    /// `|y(t+1) - y(t)|_inf + |y_hat(t+1) - y_hat(t)|_inf` for every step.
    pub residuals: Vec<f64>,
    pub final_state: OpinionState,
}

impl SimulationResult {
    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }
}

fn sup_dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterates the model from `y0` until the step residual drops below
/// `stop.tol` or `stop.max_steps` is reached. Non-convergence is reported
/// through [`SimulationResult::outcome`], not as an error.
pub fn simulate(
    y0: &DVector<f64>,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
    model: Model,
    stop: StopCriteria,
) -> Result<SimulationResult> {
    simulate_from(initial_state(y0.clone())?, net, params, mode, model, stop)
}

/// Like [`simulate`] but starting from an arbitrary state.
pub fn simulate_from(
    start: OpinionState,
    net: &InfluenceNetwork,
    params: &AgentParameters,
    mode: PublicOpinion,
    model: Model,
    stop: StopCriteria,
) -> Result<SimulationResult> {
    check_dims(&start, net, params)?;
    if model == Model::Threshold && params.threshold().is_none() {
        return Err(Error::MissingThresholds);
    }
    let stride = stop.stride.max(1);
    let mut trajectory = vec![Snapshot::from(&start)];
    let mut residuals = Vec::new();
    let mut recent: VecDeque<OpinionState> = VecDeque::new();
    let mut state = start;
    let mut outcome = Outcome::MaxSteps;

    while state.t < stop.max_steps {
        let next = match model {
            Model::Continuous => step(&state, net, params, mode)?,
            Model::Threshold => step_threshold(&state, net, params, mode)?,
        };
        let residual = sup_dist(&next.y, &state.y) + sup_dist(&next.y_hat, &state.y_hat);
        residuals.push(residual);
        if model == Model::Threshold {
            recent.push_front(std::mem::replace(&mut state, next));
            recent.truncate(MAX_CYCLE_PERIOD);
        } else {
            state = next;
        }
        if state.t.is_multiple_of(stride) {
            trajectory.push(Snapshot::from(&state));
        }
        if residual < stop.tol {
            outcome = Outcome::Converged;
            break;
        }
        if let Some(period) = detect_cycle(&state, &recent, stop.tol) {
            outcome = Outcome::Cycle { period };
            break;
        }
    }
    if trajectory.last().map(|s| s.t) != Some(state.t) {
        trajectory.push(Snapshot::from(&state));
    }
    Ok(SimulationResult {
        trajectory,
        outcome,
        iterations: state.t,
        residuals,
        final_state: state,
    })
}

/// Smallest period `p >= 2` such that the binary expressed pattern repeats
/// exactly and the private opinions repeat within `tol`.
fn detect_cycle(state: &OpinionState, recent: &VecDeque<OpinionState>, tol: f64) -> Option<usize> {
    // recent[0] is one step back
    recent
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(back, past)| (past.y_hat == state.y_hat && sup_dist(&past.y, &state.y) < tol).then_some(back + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, ConformityMode};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn pair() -> InfluenceNetwork {
        build_network(dmatrix![0.5, 0.5; 0.5, 0.5], ConformityMode::Mirror).unwrap()
    }

    #[test]
    fn initial_state_copies() {
        let s = initial_state(dvector![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.t(), 0);
        assert_eq!(s.y(), s.y_hat());
        assert_eq!(s.y0(), &dvector![1.0, 0.0, 0.0]);
        assert!(matches!(
            initial_state(dvector![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(initial_state(DVector::zeros(0)).is_err());
    }

    #[test]
    fn first_step_two_agents() {
        let params = AgentParameters::uniform(2, 0.5, 0.5).unwrap();
        let s0 = initial_state(dvector![1.0, 0.0]).unwrap();
        let s1 = step(&s0, &pair(), &params, PublicOpinion::Local).unwrap();
        assert_eq!(s1.t(), 1);
        assert_abs_diff_eq!(s1.y(), &dvector![0.75, 0.25], epsilon = 1e-15);
        // y_hat(1) = 0.5 y(1) + 0.5 M y_hat(0)
        assert_abs_diff_eq!(s1.y_hat(), &dvector![0.625, 0.375], epsilon = 1e-15);
    }

    #[test]
    fn consensus_is_fixed_point() {
        let net = crate::graph::generate_k_regular(10, 3, 3).unwrap();
        let params = AgentParameters::uniform(10, 0.37, 0.61).unwrap();
        let alpha = 0.3;
        let mut s = initial_state(DVector::from_element(10, alpha)).unwrap();
        for mode in [PublicOpinion::Local, PublicOpinion::Global] {
            for _ in 0..5 {
                s = step(&s, &net, &params, mode).unwrap();
                assert!(s.y().iter().chain(s.y_hat().iter()).all(|&x| x == alpha));
            }
        }
    }

    #[test]
    fn full_stubbornness_freezes_private() {
        let net = crate::graph::generate_k_regular(6, 3, 1).unwrap();
        let params = AgentParameters::uniform(6, 0.0, 0.4).unwrap();
        let y0 = dvector![0.1, 0.9, 0.3, 0.5, 0.7, 0.2];
        let mut s = initial_state(y0.clone()).unwrap();
        for _ in 0..20 {
            s = step(&s, &net, &params, PublicOpinion::Local).unwrap();
            assert_eq!(s.y(), &y0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let params = AgentParameters::uniform(3, 0.5, 0.5).unwrap();
        let s0 = initial_state(dvector![1.0, 0.0]).unwrap();
        assert!(matches!(
            step(&s0, &pair(), &params, PublicOpinion::Local),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(AgentParameters::uniform(2, 1.2, 0.5).is_err());
        assert!(AgentParameters::uniform(2, 0.5, -0.1).is_err());
        let p = AgentParameters::uniform(2, 0.5, 0.5).unwrap();
        assert!(p.clone().with_thresholds(dvector![0.5, 1.0]).is_err());
        assert!(p.clone().with_thresholds(dvector![0.5]).is_err());
        assert!(p.with_thresholds(dvector![0.5, 0.2]).is_ok());
    }

    #[test]
    fn threshold_boundary_is_zero() {
        assert_eq!(threshold_fn(0.5, 0.5), 0.0);
        assert_eq!(threshold_fn(0.5 + 1e-15, 0.5), 1.0);
        assert_eq!(threshold_fn(0.0, 0.5), 0.0);
    }

    #[test]
    fn threshold_full_resilience_expresses_private() {
        // phi = 1 and y = 1: the blended value is 1 > tau
        let params = AgentParameters::uniform(2, 0.0, 1.0)
            .unwrap()
            .with_thresholds(dvector![0.5, 0.5])
            .unwrap();
        let s0 = initial_state(dvector![1.0, 0.0]).unwrap();
        let s1 = step_threshold(&s0, &pair(), &params, PublicOpinion::Global).unwrap();
        assert_eq!(s1.y_hat(), &dvector![1.0, 0.0]);
    }

    #[test]
    fn threshold_errors() {
        let params = AgentParameters::uniform(2, 0.5, 0.5).unwrap();
        let s0 = initial_state(dvector![1.0, 0.0]).unwrap();
        assert_eq!(
            step_threshold(&s0, &pair(), &params, PublicOpinion::Local),
            Err(Error::MissingThresholds)
        );
        let params = params.with_thresholds(dvector![0.5, 0.5]).unwrap();
        let s0 = initial_state(dvector![1.5, 0.0]).unwrap();
        assert!(matches!(
            step_threshold(&s0, &pair(), &params, PublicOpinion::Local),
            Err(Error::OpinionScale { index: 0, .. })
        ));
    }

    #[test]
    fn simulate_consensus_start_converges_immediately() {
        let params = AgentParameters::uniform(2, 0.5, 0.5).unwrap();
        let r = simulate(
            &dvector![0.4, 0.4],
            &pair(),
            &params,
            PublicOpinion::Local,
            Model::Continuous,
            StopCriteria::default(),
        )
        .unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert_eq!(r.final_state.y(), &dvector![0.4, 0.4]);
    }

    #[test]
    fn simulate_stride_keeps_endpoints() {
        let params = AgentParameters::uniform(2, 0.5, 0.5).unwrap();
        let stop = StopCriteria {
            max_steps: 25,
            tol: 0.0,
            stride: 10,
        };
        let r = simulate(
            &dvector![1.0, 0.0],
            &pair(),
            &params,
            PublicOpinion::Local,
            Model::Continuous,
            stop,
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::MaxSteps);
        let ts: Vec<_> = r.trajectory.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 25]);
        assert_eq!(r.residuals.len(), 25);
    }

    #[test]
    fn threshold_cycle_is_detected() {
        // Two agents who only listen to each other and copy the other's
        // expressed choice: the binary pattern alternates forever.
        let net = build_network(dmatrix![0.0, 1.0; 1.0, 0.0], ConformityMode::Mirror).unwrap();
        let params = AgentParameters::uniform(2, 0.0, 0.0)
            .unwrap()
            .with_thresholds(dvector![0.5, 0.5])
            .unwrap();
        let r = simulate(
            &dvector![1.0, 0.0],
            &net,
            &params,
            PublicOpinion::Local,
            Model::Threshold,
            StopCriteria::default(),
        )
        .unwrap();
        assert_eq!(r.outcome, Outcome::Cycle { period: 2 });
        assert!(r.iterations < 10);
    }
}
